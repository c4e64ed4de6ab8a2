"""Exact diagonalization, reduced density matrices, and fidelity diagnostics.

Dense solves are used for small sector dimensions, a fully reorthogonalized
Lanczos iteration above that.  Both paths share the matrix-free Hamiltonian
of :mod:`zzladder.model` restricted to a total-Sz sector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    HamiltonianOperator,
    LadderError,
    LadderSpec,
    SpinValue,
    StateVector,
    as_amplitudes,
    coherent_pair_state,
    singlet_state,
    spin_matrices,
)

DENSE_SECTOR_CUTOFF = 1200
DEGENERACY_RTOL = 1e-8


# ---------------------------------------------------------------------------
# Sz sectors
# ---------------------------------------------------------------------------

class SectorBasis:
    """Configurations of fixed total Sz, as sorted integer codes."""

    def __init__(self, spec: LadderSpec, twice_sz: int):
        self.spec = spec
        self.twice_sz = int(twice_sz)
        ts, n = spec.spin.twice_s, spec.n_sites
        target = (self.twice_sz + n * ts) // 2  # required digit sum
        if (self.twice_sz + n * ts) % 2 != 0 or not 0 <= target <= n * ts:
            raise LadderError(f"empty Sz sector {twice_sz/2}")
        codes = np.arange(spec.dim, dtype=np.int64)
        digsum = np.zeros(spec.dim, dtype=np.int64)
        rem = codes.copy()
        d = spec.local_dim
        for _ in range(n):
            digsum += rem % d
            rem //= d
        self.codes = codes[digsum == target]
        if len(self.codes) == 0:
            raise LadderError(f"empty Sz sector {twice_sz/2}")

    @property
    def dim(self) -> int:
        return len(self.codes)

    def embed(self, vec: np.ndarray) -> np.ndarray:
        """Lift a sector vector to the full product basis."""
        full = np.zeros(self.spec.dim, dtype=complex)
        full[self.codes] = vec
        return full

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full)[self.codes]

    def operator(self) -> HamiltonianOperator:
        return HamiltonianOperator(self.spec, codes=self.codes)


def available_twice_sz(spec: LadderSpec):
    """All total 2*Sz values, largest sector (0) first, nonnegative only."""
    top = spec.n_sites * spec.spin.twice_s
    return list(range(top % 2, top + 1, 2))


# ---------------------------------------------------------------------------
# eigensolvers
# ---------------------------------------------------------------------------

@dataclass
class SpectrumResult:
    """Sorted low-lying energies of one or more sectors."""

    energies: np.ndarray
    states: np.ndarray | None = None      # columns, sector or full basis
    residuals: np.ndarray | None = None
    converged: bool = True
    twice_sz: int | None = None

    def degeneracy_groups(self, rtol: float = DEGENERACY_RTOL):
        """Cluster energies into degenerate groups at rtol * max(1, |E0|)."""
        if len(self.energies) == 0:
            return []
        tol = rtol * max(1.0, abs(self.energies[0]))
        groups, current = [], [0]
        for i in range(1, len(self.energies)):
            if self.energies[i] - self.energies[current[-1]] <= tol:
                current.append(i)
            else:
                groups.append(current)
                current = [i]
        groups.append(current)
        return groups


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude amplitude real and positive."""
    idx = np.argmax(np.abs(vec))
    pivot = vec[idx]
    if pivot != 0:
        vec = vec * (abs(pivot) / pivot)
    return vec


def lanczos_lowest(matvec, dim, n_levels=1, max_iter=300, tol=1e-12, seed=7,
                   dtype=float):
    """Lowest eigenpairs by deflated Lanczos with full reorthogonalization.

    Returns (energies, vectors, residual_estimates, converged).  The start
    vector comes from a fixed-seed generator, so runs are deterministic.
    Converged eigenvectors are projected out of later sweeps, which also
    recovers degenerate partners.
    """
    from scipy.linalg import eigh_tridiagonal

    rng = np.random.default_rng(seed)
    found_vals, found_vecs = [], []
    converged_all = True
    m_cap = min(max_iter, dim)
    for level in range(n_levels):
        v0 = rng.standard_normal(dim).astype(dtype)
        for w in found_vecs:
            v0 -= np.vdot(w, v0) * w
        nrm = np.linalg.norm(v0)
        if nrm < 1e-14:
            converged_all = False
            break
        V = np.empty((m_cap + 1, dim), dtype=dtype)
        V[0] = v0 / nrm
        alphas = np.empty(m_cap)
        betas = np.empty(m_cap)
        theta, s, m = None, None, 0
        for it in range(m_cap):
            m = it + 1
            w = matvec(V[it])
            alphas[it] = float(np.real(np.vdot(V[it], w)))
            # full reorthogonalization against the Krylov basis and deflated vectors
            w -= V[:m].T @ (V[:m].conj() @ w)
            w -= V[:m].T @ (V[:m].conj() @ w)
            for u in found_vecs:
                w -= np.vdot(u, w) * u
            beta = float(np.linalg.norm(w))
            evals, evecs = eigh_tridiagonal(
                alphas[:m], betas[: m - 1], select="i", select_range=(0, 0))
            theta, s = float(evals[0]), evecs[:, 0]
            resid_est = abs(beta * s[-1])
            if resid_est <= tol * max(1.0, abs(theta)) or beta < 1e-14:
                break
            betas[it] = beta
            V[it + 1] = w / beta
        else:
            converged_all = False
        ritz = V[:m].T @ s
        ritz /= np.linalg.norm(ritz)
        found_vals.append(theta)
        found_vecs.append(ritz)
    order = np.argsort(found_vals)
    vals = np.asarray(found_vals)[order]
    vecs = np.column_stack([found_vecs[i] for i in order])
    resid = np.array([np.linalg.norm(matvec(vecs[:, i]) - vals[i] * vecs[:, i])
                      for i in range(vecs.shape[1])])
    return vals, vecs, resid, converged_all


def sector_spectrum(spec: LadderSpec, twice_sz: int, n_levels: int = 1,
                    max_iter: int = 300, tol: float = 1e-12,
                    dense_cutoff: int = DENSE_SECTOR_CUTOFF,
                    want_states: bool = True) -> SpectrumResult:
    """Lowest levels of one Sz sector (dense below cutoff, Lanczos above)."""
    basis = SectorBasis(spec, twice_sz)
    op = basis.operator()
    n_levels = min(n_levels, basis.dim)
    if basis.dim <= dense_cutoff:
        H = op.dense(cap=max(dense_cutoff, basis.dim))
        evals, evecs = np.linalg.eigh(H)
        vals = evals[:n_levels]
        vecs = evecs[:, :n_levels]
        resid = np.linalg.norm(H @ vecs - vecs * vals[None, :], axis=0)
        converged = True
    else:
        vals, vecs, resid, converged = lanczos_lowest(
            op.apply, basis.dim, n_levels=n_levels, max_iter=max_iter, tol=tol)
    states = None
    if want_states:
        states = np.column_stack(
            [_fix_phase(basis.embed(vecs[:, i])) for i in range(vecs.shape[1])])
    return SpectrumResult(energies=np.asarray(vals, dtype=float), states=states,
                          residuals=resid, converged=converged, twice_sz=twice_sz)


def lanczos_ground(spec: LadderSpec, twice_sz: int = 0, n_levels: int = 1,
                   max_iter: int = 300, tol: float = 1e-12) -> SpectrumResult:
    """Lanczos in a single sector, regardless of dimension (no dense path)."""
    basis = SectorBasis(spec, twice_sz)
    op = basis.operator()
    vals, vecs, resid, converged = lanczos_lowest(
        op.apply, basis.dim, n_levels=min(n_levels, basis.dim),
        max_iter=max_iter, tol=tol)
    states = np.column_stack(
        [_fix_phase(basis.embed(vecs[:, i])) for i in range(vecs.shape[1])])
    return SpectrumResult(energies=vals, states=states, residuals=resid,
                          converged=converged, twice_sz=twice_sz)


def ground_state_full(spec: LadderSpec, sectors=None, n_levels: int = 1,
                      dense_cutoff: int = DENSE_SECTOR_CUTOFF,
                      max_iter: int = 300, tol: float = 1e-12):
    """Global ground state over Sz sectors.

    ``sectors`` is a list of 2*Sz values (nonnegative; negatives are
    degenerate mirrors).  The default scans 2Sz in {0, 2}, enough for the
    antiferromagnetic couplings treated here; pass
    ``available_twice_sz(spec)`` for a full sweep.
    Returns (energy, StateVector, SpectrumResult-of-winning-sector).
    """
    if sectors is None:
        sectors = [tsz for tsz in (0, 2) if tsz in set(available_twice_sz(spec))]
    best = None
    for tsz in sectors:
        res = sector_spectrum(spec, tsz, n_levels=n_levels, max_iter=max_iter,
                              tol=tol, dense_cutoff=dense_cutoff)
        if best is None or res.energies[0] < best.energies[0]:
            best = res
    energy = float(best.energies[0])
    state = StateVector(best.states[:, 0], sz_sector=best.twice_sz / 2.0)
    return energy, state, best


def full_spectrum_energies(spec: LadderSpec, n_levels: int = 4, sectors=None,
                           dense_cutoff: int = DENSE_SECTOR_CUTOFF):
    """Lowest levels of the full Hamiltonian by sweeping Sz sectors.

    Each sector contributes its own copies, so multiplet degeneracies are
    counted correctly (a total-spin-j level appears once per |Sz| <= j).
    """
    if sectors is None:
        sectors = available_twice_sz(spec)
    collected = []
    for tsz in sectors:
        res = sector_spectrum(spec, tsz, n_levels=n_levels, want_states=False,
                              dense_cutoff=dense_cutoff)
        mult = 1 if tsz == 0 else 2  # +-Sz mirror sectors
        for e in res.energies:
            collected.extend([float(e)] * mult)
    collected.sort()
    return np.asarray(collected[: max(n_levels, 2)])


def relative_energy_curve(specs, xs, **solver_kw):
    """Rows (x, E_GS/E_dim - 1) for a list of specs along a sweep."""
    rows = []
    for x, spec in zip(xs, specs):
        from .model import dimer_energy

        e_dim, _ = dimer_energy(spec)
        e_gs, _, _ = ground_state_full(spec, **solver_kw)
        rows.append((float(x), e_gs / e_dim - 1.0))
    return rows


# ---------------------------------------------------------------------------
# reduced density matrices and fidelity
# ---------------------------------------------------------------------------

@dataclass
class DensityMatrix:
    """Hermitian, PSD, trace-one operator on an ordered site subset."""

    sites: tuple
    matrix: np.ndarray

    def validate(self, tol: float = 1e-10):
        m = self.matrix
        if np.abs(m - m.conj().T).max() > 1e-12:
            raise LadderError("density matrix is not Hermitian")
        evals = np.linalg.eigvalsh(m)
        if evals.min() < -tol:
            raise LadderError(f"density matrix has negative eigenvalue {evals.min()}")
        if abs(np.trace(m).real - 1.0) > 1e-12:
            raise LadderError("density matrix trace differs from 1")
        return self


def reduced_density_matrix(spec: LadderSpec, state, sites,
                           max_sites: int = 4) -> DensityMatrix:
    """Partial trace of |psi><psi| onto ``sites`` (first listed site fastest)."""
    sites = tuple(int(s) for s in sites)
    if len(set(sites)) != len(sites):
        raise LadderError("sites must be distinct")
    if any(not 0 <= s < spec.n_sites for s in sites):
        raise LadderError("site out of range")
    if len(sites) > max_sites:
        raise LadderError(f"reduced density matrix on {len(sites)} sites exceeds cap")
    amps = as_amplitudes(state).astype(complex)
    n, d = spec.n_sites, spec.local_dim
    tensor = amps.reshape((d,) * n)  # axis j holds site (n-1-j)
    axes_keep = [n - 1 - s for s in sites]
    # kept axes at the end, first listed site fastest (last axis)
    order = [ax for ax in range(n) if ax not in axes_keep] + axes_keep[::-1]
    mat = np.transpose(tensor, order).reshape(-1, d ** len(sites))
    rho = mat.T @ mat.conj()
    return DensityMatrix(sites=sites, matrix=rho)


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    evals, vecs = np.linalg.eigh(rho)
    # roundoff in structurally zero eigenvalues would inject sqrt(eps) noise
    cutoff = 1e-14 * max(evals.max(), 1e-300)
    evals = np.where(evals > cutoff, evals, 0.0)
    return (vecs * np.sqrt(evals)) @ vecs.conj().T


def fidelity(rho1, rho2, validate: bool = True, tol: float = 1e-8) -> float:
    """Uhlmann fidelity Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)), in [0, 1].

    Computed as the nuclear norm of sqrt(rho1) sqrt(rho2); for pure states
    this reduces to |<psi1|psi2>|.
    """
    m1 = rho1.matrix if isinstance(rho1, DensityMatrix) else np.asarray(rho1)
    m2 = rho2.matrix if isinstance(rho2, DensityMatrix) else np.asarray(rho2)
    if m1.shape != m2.shape:
        raise LadderError("density matrices must share a dimension")
    if validate:
        for m in (m1, m2):
            if np.abs(m - m.conj().T).max() > 1e-10:
                raise LadderError("fidelity input is not Hermitian")
            if np.linalg.eigvalsh(m).min() < -tol:
                raise LadderError("fidelity input has a negative eigenvalue")
    sv = np.linalg.svd(_psd_sqrt(m1) @ _psd_sqrt(m2), compute_uv=False)
    return float(min(np.sum(sv), 1.0))


def bures_angle(rho1, rho2, **kw) -> float:
    """arccos of the fidelity, a metric on density matrices."""
    return float(np.arccos(np.clip(fidelity(rho1, rho2, **kw), 0.0, 1.0)))


def pure_density(vec) -> np.ndarray:
    v = as_amplitudes(vec)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


# ---------------------------------------------------------------------------
# symmetry-restored local pair states
# ---------------------------------------------------------------------------

def pair_spin_projectors(spin) -> dict:
    """Projectors onto total pair spin j = 0..2S for two spin-S sites."""
    sv = SpinValue.parse(spin)
    ops = spin_matrices(sv)
    d = sv.dim
    eye = np.eye(d)
    j2 = sum(
        (np.kron(eye, ops[mu]) + np.kron(ops[mu], eye)) @
        (np.kron(eye, ops[mu]) + np.kron(ops[mu], eye))
        for mu in "xyz"
    )
    evals, vecs = np.linalg.eigh(j2)
    projectors = {}
    for j in range(sv.twice_s + 1):
        sel = np.abs(evals - j * (j + 1)) < 1e-8
        block = vecs[:, sel]
        projectors[j] = block @ block.conj().T
    return projectors


def rotation_averaged_pair_state(spin, relative_angle: float) -> DensityMatrix:
    """SU(2) average of a coherent pair at the given relative angle.

    Averaging a pure two-site product state over global rotations gives
    sum_j p_j Pi_j / (2j+1) with p_j the total-spin-j weight of the pair.
    """
    sv = SpinValue.parse(spin)
    pair = coherent_pair_state(sv, relative_angle).amplitudes
    projectors = pair_spin_projectors(sv)
    rho = np.zeros((sv.dim ** 2, sv.dim ** 2), dtype=complex)
    for j, proj in projectors.items():
        p_j = float(np.real(np.vdot(pair, proj @ pair)))
        rho += (p_j / (2 * j + 1)) * proj
    return DensityMatrix(sites=(0, 1), matrix=rho)


def srmf_local_pair_state(angles, spin, kind: str = "rung") -> DensityMatrix:
    """Symmetry-restored mean-field state of a spin pair.

    ``angles`` carries the spiral parameters (theta, phi); the relative
    angle between the two sites is phi inside a rung and theta - phi for
    the zig-zag neighbor pair.
    """
    theta = getattr(angles, "theta", None)
    phi = getattr(angles, "phi", None)
    if theta is None or phi is None:
        theta, phi = angles
    if kind == "rung":
        rel = phi
    elif kind in ("off-rung", "offrung", "zigzag"):
        rel = theta - phi
    else:
        raise LadderError("pair kind must be 'rung' or 'off-rung'")
    return rotation_averaged_pair_state(spin, rel)


def pair_spin_weights(spin, relative_angle: float) -> np.ndarray:
    """Weights p_j of each total-spin sector in a coherent pair."""
    sv = SpinValue.parse(spin)
    pair = coherent_pair_state(sv, relative_angle).amplitudes
    projectors = pair_spin_projectors(sv)
    return np.array([np.real(np.vdot(pair, projectors[j] @ pair))
                     for j in range(sv.twice_s + 1)])


# ---------------------------------------------------------------------------
# fidelity landscape against reference pair states
# ---------------------------------------------------------------------------

def fidelity_landscape(spin, points, n_rungs: int = 4, reference: str = "singlet",
                       boundary: str = "periodic", **solver_kw):
    """Rows (jp, j2, fidelity) of the exact rung state against a reference.

    ``points`` is an iterable of (J'/J, J2/J); the srmf reference uses the
    optimal classical angles of each point.
    """
    from .model import CouplingPattern, uniform_spec

    rows = []
    for jp, j2 in points:
        spec = uniform_spec(n_rungs, spin, 1.0, jp, j2, boundary=boundary)
        kw = dict(solver_kw)
        if reference == "srmf":
            from .meanfield import classical_extrema

            extrema = classical_extrema(
                CouplingPattern.uniform(1, 1.0, jp, j2), spec.spin)
            kw["reference_angles"] = min(extrema, key=lambda t: t[1])[0]
        rows.append((float(jp), float(j2),
                     rung_state_fidelity(spec, reference=reference, **kw)))
    return rows


def rung_state_fidelity(spec: LadderSpec, reference="singlet", rung: int = 0,
                        reference_angles=None, **solver_kw) -> float:
    """Fidelity between the exact local rung state and a reference state."""
    _, gs, _ = ground_state_full(spec, **solver_kw)
    rho = reduced_density_matrix(spec, gs, (2 * rung, 2 * rung + 1))
    if reference == "singlet":
        ref = pure_density(singlet_state(spec.spin).amplitudes)
    elif reference == "srmf":
        if reference_angles is None:
            raise LadderError("srmf reference requires spiral angles")
        ref = srmf_local_pair_state(reference_angles, spec.spin, "rung").matrix
    else:
        raise LadderError(f"unknown reference {reference!r}")
    return fidelity(rho.matrix, ref)
