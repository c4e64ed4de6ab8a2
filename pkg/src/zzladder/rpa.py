"""Quadratic-boson excitation spectra over the two mean-field vacua.

Spiral vacuum: 4x4 momentum blocks and the two magnon branches from the
symplectic invariants, with Goldstone zero modes at k = 0 and k = pitch.
Dimer vacuum: three degenerate boson channels on the rung chain, closed
dispersion, and the zero-point energy correction with its Brillouin-zone
quadrature oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ellipe

from .model import LadderError, SpinValue, dimer_energy
from .meanfield import (
    SpiralAngles,
    _spiral_gradient,
    _uniform,
    classical_extrema,
    dimerline_spiral_angles,
    spiral_energy_per_rung,
)

METRIC = np.diag([1.0, 1.0, -1.0, -1.0])
ZERO_MODE_DET_TOL = 1e-10
STABILITY_TOL = 1e-10


class RPAError(ValueError):
    """Invalid input to an RPA construction."""


@dataclass
class RPABlockMatrix:
    """Momentum block of the spiral spin-wave Hamiltonian."""

    k: float
    delta_plus: np.ndarray
    delta_minus: np.ndarray
    lam: float
    matrix: np.ndarray       # assembled Hermitian 4x4
    stationary: bool = True


@dataclass
class RPASpectrum:
    """Branch energies on a uniform momentum grid."""

    momenta: np.ndarray
    omega_minus: np.ndarray | None = None
    omega_plus: np.ndarray | None = None
    omega: np.ndarray | None = None           # dimer-line single branch
    zero_modes: np.ndarray | None = None
    stable: np.ndarray | None = None           # per-k reality flags
    channel_degeneracy: int = 1

    @property
    def all_stable(self) -> bool:
        return bool(np.all(self.stable)) if self.stable is not None else True


# ---------------------------------------------------------------------------
# spiral vacuum
# ---------------------------------------------------------------------------

def local_excitation_energy(angles, couplings, spin) -> float:
    """lambda = S |J cos(phi) + J' cos(theta - phi) + 2 J2 cos(theta)|."""
    j, jp, j2 = _uniform(couplings)
    s = SpinValue.parse(spin).s
    return s * abs(
        j * np.cos(angles.phi)
        + jp * np.cos(angles.theta - angles.phi)
        + 2.0 * j2 * np.cos(angles.theta)
    )


def spiral_rpa_blocks(k: float, angles, couplings, spin,
                      stationarity_tol: float = 1e-8) -> RPABlockMatrix:
    """Assemble the 4x4 momentum block over the coplanar spiral vacuum."""
    j, jp, j2 = _uniform(couplings)
    s = SpinValue.parse(spin).s
    theta, phi = angles.theta, angles.phi
    cth2 = np.cos(theta / 2.0) ** 2
    sth2 = np.sin(theta / 2.0) ** 2
    cph2 = np.cos(phi / 2.0) ** 2
    sph2 = np.sin(phi / 2.0) ** 2
    ctp2 = np.cos((theta - phi) / 2.0) ** 2
    stp2 = np.sin((theta - phi) / 2.0) ** 2
    ek = np.exp(-1j * k)
    dplus = s * np.array(
        [
            [2.0 * j2 * np.cos(k) * cth2, j * cph2 + jp * ek * ctp2],
            [j * cph2 + jp * ek.conjugate() * ctp2, 2.0 * j2 * np.cos(k) * cth2],
        ]
    )
    dminus = -s * np.array(
        [
            [2.0 * j2 * np.cos(k) * sth2, j * sph2 + jp * ek * stp2],
            [j * sph2 + jp * ek.conjugate() * stp2, 2.0 * j2 * np.cos(k) * sth2],
        ]
    )
    lam = local_excitation_energy(angles, couplings, spin)
    diag = lam * np.eye(2) + dplus
    matrix = np.block([[diag, dminus], [dminus, diag]])
    stationary = _spiral_gradient(theta, phi, j, jp, j2) < stationarity_tol
    return RPABlockMatrix(k=float(k), delta_plus=dplus, delta_minus=dminus,
                          lam=float(lam), matrix=matrix, stationary=bool(stationary))


def bogoliubov_energies(matrix: np.ndarray, tol: float = STABILITY_TOL):
    """Positive branch energies of a quadratic boson form, numerically.

    Eigenvalues of (metric @ H) come in +/- pairs when the form is stable;
    returns (ascending positive half, stable flag).
    """
    n = matrix.shape[0] // 2
    metric = np.diag(np.concatenate([np.ones(n), -np.ones(n)]))
    evals = np.linalg.eigvals(metric @ matrix)
    scale = max(1.0, float(np.abs(evals).max()))
    stable = bool(np.abs(evals.imag).max() <= tol * scale)
    if not stable:
        return np.full(n, np.nan), False
    omegas = np.clip(np.sort(evals.real)[n:], 0.0, None)
    return omegas, True


def _block_det(matrix: np.ndarray) -> float:
    """det of [[D, E], [E, D]] as det(D+E) det(D-E), avoiding 4x4 cancellation."""
    n = matrix.shape[0] // 2
    d = matrix[:n, :n]
    e = matrix[:n, n:]
    return float((np.linalg.det(d + e) * np.linalg.det(d - e)).real)


def _branch_energies_invariant(matrix: np.ndarray, tol: float = STABILITY_TOL):
    """(omega_minus, omega_plus, stable) from invariants of metric @ H.

    omega^2 are the roots of x^2 - (T/2) x + det(H) with
    T = tr((metric H)^2); both branches real when the discriminant and both
    roots are nonnegative.  The small root is evaluated as
    4 det / (T + sqrt(T^2 - 16 det)) to dodge catastrophic cancellation.
    """
    mh = METRIC @ matrix
    t = float(np.trace(mh @ mh).real)
    det = _block_det(matrix)
    disc = t * t - 16.0 * det
    scale = max(1.0, abs(t))
    if disc < -tol * scale * scale:
        return np.nan, np.nan, False
    root = np.sqrt(max(disc, 0.0))
    w2_plus = (t + root) / 4.0
    w2_minus = 4.0 * det / (t + root) if t + root > 0 else 0.0
    if w2_minus < -tol * scale:
        return np.nan, np.nan, False
    return (float(np.sqrt(max(w2_minus, 0.0))),
            float(np.sqrt(max(w2_plus, 0.0))), True)


def spiral_rpa_spectrum(angles, couplings, spin, n_k: int,
                        stationarity_tol: float = 1e-8) -> RPASpectrum:
    """Both magnon branches on the uniform grid k = 2 pi n / n_k.

    Momenta where det H_k vanishes within tolerance host Goldstone modes;
    there the lower branch is exactly zero and is reported as such (the
    invariant formula would otherwise return square-rooted roundoff).
    """
    momenta = 2.0 * np.pi * np.arange(n_k) / n_k
    w_minus = np.empty(n_k)
    w_plus = np.empty(n_k)
    zero = np.zeros(n_k, dtype=bool)
    stable = np.zeros(n_k, dtype=bool)
    for i, k in enumerate(momenta):
        block = spiral_rpa_blocks(k, angles, couplings, spin, stationarity_tol)
        wm, wp, ok = _branch_energies_invariant(block.matrix)
        scale = max(1.0, float(np.linalg.norm(block.matrix)))
        zero[i] = abs(_block_det(block.matrix)) < ZERO_MODE_DET_TOL * scale ** 4
        if zero[i] and ok:
            wm = 0.0
        w_minus[i], w_plus[i], stable[i] = wm, wp, ok
    return RPASpectrum(momenta=momenta, omega_minus=w_minus, omega_plus=w_plus,
                       zero_modes=zero, stable=stable)


def single_site_rpa_energy(angles, couplings, spin, n_k: int):
    """Spin-wave corrected ground energy per rung over the spiral vacuum.

    E/N = E_sep/N - lambda + (1/(2N)) sum_k (omega_-(k) + omega_+(k)).
    Returns (bare mean-field per rung, corrected per rung, all-k stable).
    """
    e_mf = spiral_energy_per_rung(angles.theta, angles.phi, couplings, spin)
    lam = local_excitation_energy(angles, couplings, spin)
    spec = spiral_rpa_spectrum(angles, couplings, spin, n_k)
    if not spec.all_stable:
        return e_mf, np.nan, False
    zero_point = 0.5 * float(np.mean(spec.omega_minus + spec.omega_plus))
    return e_mf, e_mf - lam + zero_point, True


# ---------------------------------------------------------------------------
# dimer vacuum
# ---------------------------------------------------------------------------

def dimer_rpa_dispersion(gamma: float, n_rungs: int, j: float = 1.0) -> RPASpectrum:
    """omega_k = J sqrt(1 - gamma cos(2 pi k / N)) for k = 0..N-1.

    Unstable momenta (negative radicand, |gamma| > 1) carry NaN energies
    and a cleared stability flag.  The same branch serves the three boson
    channels; ``channel_degeneracy`` records the multiplicity.
    """
    ks = np.arange(n_rungs)
    momenta = 2.0 * np.pi * ks / n_rungs
    radicand = 1.0 - gamma * np.cos(momenta)
    stable = radicand >= -STABILITY_TOL
    omega = np.where(stable, j * np.sqrt(np.clip(radicand, 0.0, None)), np.nan)
    zero = stable & (np.abs(radicand) < 1e-12)
    return RPASpectrum(momenta=momenta, omega=omega, zero_modes=zero,
                       stable=stable, channel_degeneracy=3)


def dimer_chain_quadratic_form(gamma: float, n_rungs: int, j: float = 1.0):
    """(A, B) blocks of one boson channel on the rung chain.

    h = J sum_i [ a_i^+ a_i + (gamma/4)(a_i + a_i^+)(a_{i+1} + a_{i+1}^+) ],
    written as (1/2) (a a^+) [[A, B], [B, A]] (a^+; a) up to a constant.
    """
    a = np.zeros((n_rungs, n_rungs))
    b = np.zeros((n_rungs, n_rungs))
    for i in range(n_rungs):
        nxt = (i + 1) % n_rungs
        a[i, i] += j
        c = j * gamma / 4.0
        a[i, nxt] += c
        a[nxt, i] += c
        b[i, nxt] += c
        b[nxt, i] += c
    return a, b


def dimer_rpa_stability(gamma: float) -> bool:
    """The dimer-line boson chain is stable iff |gamma| < 1."""
    return abs(gamma) < 1.0


def dimer_stability_halfwidth(spin, j: float = 1.0) -> float:
    """Half-width of the stable window in the variable 2 J2 - J'.

    |gamma| < 1 translates to |2 J2 - J'| < (3/4) J / (S(S+1)).
    """
    return 0.75 * j / SpinValue.parse(spin).casimir


@dataclass(frozen=True)
class CorrectionResult:
    """Zero-point correction ratio: closed form and quadrature oracle."""

    closed_form: float
    quadrature: float

    @property
    def value(self) -> float:
        return self.closed_form


def _bz_mean_dispersion(gamma: float, n_nodes: int = 1 << 15) -> float:
    """(1/2pi) integral of sqrt(1 - gamma cos k), trapezoid on the period."""
    k = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    return float(np.mean(np.sqrt(np.clip(1.0 - gamma * np.cos(k), 0.0, None))))


def dimer_rpa_energy_correction(gamma: float, agreement_tol: float = 1e-6) -> CorrectionResult:
    """Relative zero-point correction of the dimer vacuum energy.

    Closed form 2 (1 - [sqrt(1+g) E(2g/(1+g)) + sqrt(1-g) E(-2g/(1-g))]/pi)
    with E the complete elliptic integral of the second kind in the
    parameter (m) convention; the quadrature result is the equivalent
    Brillouin-zone average 2 (1 - <sqrt(1 - g cos k)>).  Both are returned
    and must agree within ``agreement_tol``.
    """
    if abs(gamma) >= 1.0:
        raise RPAError(f"boson chain unstable at |gamma| = {abs(gamma)} >= 1")
    if gamma == 0.0:
        return CorrectionResult(0.0, 0.0)
    closed = 2.0 * (
        1.0
        - (
            np.sqrt(1.0 + gamma) * ellipe(2.0 * gamma / (1.0 + gamma))
            + np.sqrt(1.0 - gamma) * ellipe(-2.0 * gamma / (1.0 - gamma))
        )
        / np.pi
    )
    quadrature = 2.0 * (1.0 - _bz_mean_dispersion(gamma))
    if abs(closed - quadrature) > agreement_tol:
        raise RPAError(
            f"elliptic closed form {closed} and quadrature {quadrature} disagree"
        )
    return CorrectionResult(float(closed), float(quadrature))


def dimer_rpa_energy(spec, gamma: float | None = None):
    """Corrected dimer-vacuum energy (total): E_dimer (1 + rel correction).

    The relative correction for spin S is
        (3 / (2 S (S+1))) (1 - <sqrt(1 - gamma cos k)>),
    the three-channel zero-point sum normalized by E_dimer = -J N S(S+1).
    """
    from .model import gamma_of

    if gamma is None:
        gamma = gamma_of(spec).gamma
    if not dimer_rpa_stability(gamma):
        return np.nan, False
    e_dim, _ = dimer_energy(spec)
    rel = 3.0 / (2.0 * spec.spin.casimir) * (1.0 - _bz_mean_dispersion(gamma))
    return e_dim * (1.0 + rel), True


# ---------------------------------------------------------------------------
# energy curves along a coupling sweep
# ---------------------------------------------------------------------------

def rpa_energy_curves(spin, jp_over_j: float, j2_values, n_rungs: int = 4,
                      n_k: int = 256, with_exact: bool = True,
                      boundary: str = "periodic", solver_kw: dict | None = None):
    """Mean-field and corrected energies per rung along a J2 sweep.

    Row fields: j2, gamma, e_mf_site, e_rpa_site, stable_site, e_mf_pair,
    e_rpa_pair, stable_pair, e_exact, e_dimer (all per rung; NaN when a
    method is unavailable at that point).
    """
    from .model import CouplingPattern, LadderSpec, gamma_of, uniform_spec
    from .exact import ground_state_full

    sv = SpinValue.parse(spin)
    solver_kw = solver_kw or {}
    rows = []
    for j2 in j2_values:
        couplings = CouplingPattern.uniform(max(n_rungs, 1), 1.0, jp_over_j, j2)
        spec = uniform_spec(n_rungs, sv, 1.0, jp_over_j, j2, boundary=boundary)
        gamma = gamma_of(spec).gamma
        e_dim = -sv.casimir  # per rung at J = 1
        # single-site branch: best classical extremum, then spin waves
        extrema = classical_extrema(couplings, sv)
        angles, e_site = min(extrema, key=lambda t: t[1])
        e_mf_site, e_rpa_site, ok_site = single_site_rpa_energy(
            angles, couplings, sv, n_k)
        # pair branch: dimer vacuum, stable only inside |gamma| < 1
        if dimer_rpa_stability(gamma):
            e_rpa_pair_total, ok_pair = dimer_rpa_energy(spec, gamma)
            e_mf_pair = e_dim
            e_rpa_pair = e_rpa_pair_total / n_rungs
        else:
            e_mf_pair, e_rpa_pair, ok_pair = np.nan, np.nan, False
        if with_exact:
            e_exact = ground_state_full(spec, **solver_kw)[0] / n_rungs
        else:
            e_exact = np.nan
        rows.append(
            dict(j2=float(j2), gamma=float(gamma), e_mf_site=e_mf_site,
                 e_rpa_site=e_rpa_site, stable_site=bool(ok_site),
                 e_mf_pair=e_mf_pair, e_rpa_pair=e_rpa_pair,
                 stable_pair=bool(ok_pair), e_exact=e_exact, e_dimer=e_dim)
        )
    return rows
