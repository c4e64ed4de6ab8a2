"""Classical spiral mean field, composite-pair mean field, and their minima.

Closed forms are implemented where available; deterministic multi-start
numerical minimization doubles as an oracle for every analytic branch.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .model import (
    CouplingPattern,
    LadderError,
    SpinValue,
    StateVector,
    coherent_pair_state,
    singlet_state,
    spin_matrices,
)

STATIONARITY_TOL = 1e-10
TIE_TOL = 1e-12


class MeanFieldDiagnosticError(RuntimeError):
    """Closed-form and numeric minimizations disagree beyond tolerance."""


@dataclass(frozen=True)
class SpiralAngles:
    """Coplanar spiral parameters: pitch theta between rungs, rung angle phi."""

    theta: float
    phi: float


@dataclass(frozen=True)
class PairMFParams:
    """Composite-pair variational parameters (zeta, phi, tau, theta)."""

    zeta: float
    phi: float
    tau: float
    theta: float


@dataclass(frozen=True)
class PhasePoint:
    """Winning variational branch at one coupling point.

    Colinear labels name the angles across the two chain-bond families
    (zig-zag bond, rung bond):

    * ``Neel_pipi``: both bond types antialigned -> staggered chain order,
      (theta, phi) = (0, pi).
    * ``Neel_0pi``: zig-zag bonds aligned, rung bonds antialigned ->
      period-four order, (theta, phi) = (pi, pi).
    * ``ColinearBroken``: rung bonds aligned, zig-zag bonds antialigned,
      (theta, phi) = (pi, 0); competitive only where the rung coupling is
      subdominant.  The same label tags the symmetry-broken colinear phase
      of the composite-pair mean field.
    """

    label: str
    energy_per_rung: float
    theta: float | None = None
    phi: float | None = None
    gamma: float | None = None


def _uniform(couplings: CouplingPattern, need_equal_legs: bool = True):
    j, jp, j2, j2p = couplings.uniform_values()
    if need_equal_legs and abs(j2 - j2p) > 1e-12:
        raise LadderError("operation requires J2 = J2'")
    return j, jp, j2


# ---------------------------------------------------------------------------
# single-site (classical) spiral family
# ---------------------------------------------------------------------------

def spiral_energy_per_rung(theta: float, phi: float, couplings, spin) -> float:
    """S^2 (J cos phi + J' cos(theta-phi) + 2 J2 cos theta), one rung."""
    j, jp, j2 = _uniform(couplings)
    s = SpinValue.parse(spin).s
    return s * s * (j * np.cos(phi) + jp * np.cos(theta - phi) + 2.0 * j2 * np.cos(theta))


def spiral_energy(angles, couplings, spin, n_rungs: int = 1) -> float:
    """Total spiral energy N S^2 (...) for ``n_rungs`` rungs."""
    theta = getattr(angles, "theta", None)
    if theta is None:
        theta, phi = angles
    else:
        phi = angles.phi
    return n_rungs * spiral_energy_per_rung(theta, phi, couplings, spin)


def _spiral_gradient(theta, phi, j, jp, j2):
    de_dphi = -j * np.sin(phi) + jp * np.sin(theta - phi)
    de_dtheta = -jp * np.sin(theta - phi) - 2.0 * j2 * np.sin(theta)
    return np.hypot(de_dtheta, de_dphi)


def classical_extrema(couplings, spin, stationarity_tol: float = STATIONARITY_TOL):
    """Colinear extrema plus, when real, the spiral branch of the energy.

    Returns a list of (SpiralAngles, energy_per_rung) whose angle pairs are
    stationary points of the spiral energy.  The spiral entry appears only
    when both closed-form cosines fall in [-1, 1] and a sign assignment is
    actually stationary.
    """
    j, jp, j2 = _uniform(couplings)
    out = []
    for theta, phi in ((0.0, np.pi), (np.pi, 0.0), (np.pi, np.pi)):
        out.append((SpiralAngles(theta, phi),
                    spiral_energy_per_rung(theta, phi, couplings, spin)))
    if j > 0 and jp > 0 and j2 > 0:
        cos_t = j * jp / (8.0 * j2 * j2) - j / (2.0 * jp) - jp / (2.0 * j)
        cos_p = j2 * jp / (j * j) - j2 / jp - jp / (4.0 * j2)
        if abs(cos_t) <= 1.0 and abs(cos_p) <= 1.0:
            theta0 = float(np.arccos(cos_t))
            phi0 = float(np.arccos(cos_p))
            candidates = [(st * theta0, sp * phi0) for st in (1, -1) for sp in (1, -1)]
            stationary = [
                (th, ph) for th, ph in candidates
                if _spiral_gradient(th, ph, j, jp, j2) < stationarity_tol
            ]
            if stationary:
                best = min(stationary,
                           key=lambda a: spiral_energy_per_rung(a[0], a[1], couplings, spin))
                # report the positive-pitch representative of the mirror pair
                if best[0] < 0:
                    best = (-best[0], -best[1])
                out.append((SpiralAngles(*best),
                            spiral_energy_per_rung(*best, couplings, spin)))
    return out


def spiral_grid_minimum(couplings, spin, n_grid: int = 401):
    """Grid scan of the spiral energy polished by a local descent (oracle)."""
    j, jp, j2 = _uniform(couplings)
    thetas = np.linspace(-np.pi, np.pi, n_grid)
    phis = np.linspace(-np.pi, np.pi, n_grid)
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    s = SpinValue.parse(spin).s
    e = s * s * (j * np.cos(pp) + jp * np.cos(tt - pp) + 2.0 * j2 * np.cos(tt))
    it, ip = np.unravel_index(np.argmin(e), e.shape)
    res = minimize(
        lambda x: spiral_energy_per_rung(x[0], x[1], couplings, spin),
        [thetas[it], phis[ip]],
        method="Nelder-Mead",
        options=dict(xatol=1e-12, fatol=1e-14, maxiter=4000),
    )
    return SpiralAngles(float(res.x[0]), float(res.x[1])), float(res.fun)


def classical_phase(couplings, spin) -> PhasePoint:
    """Label of the lowest classical branch; colinear wins ties."""
    extrema = classical_extrema(couplings, spin)
    colinear = extrema[:3]
    spiral = extrema[3:]
    best_col = min(colinear, key=lambda t: t[1])
    tie = TIE_TOL * max(1.0, abs(best_col[1]))
    if spiral and spiral[0][1] < best_col[1] - tie:
        ang, e = spiral[0]
        return PhasePoint("Spiral", e, theta=ang.theta, phi=ang.phi)
    ang, e = best_col
    label = {
        (0, 2): "Neel_pipi",       # (theta, phi) = (0, pi)
        (2, 2): "Neel_0pi",        # (pi, pi)
        (2, 0): "ColinearBroken",  # (pi, 0)
    }[(int(round(ang.theta / (np.pi / 2))), int(round(ang.phi / (np.pi / 2))))]
    return PhasePoint(label, e, theta=ang.theta, phi=ang.phi)


def dimer_vs_classical_crossover(spin) -> float:
    """J'/J where spiral and dimer energies cross on the J' = 2 J2 line."""
    return float(np.sqrt(2.0 / SpinValue.parse(spin).s))


def dimerline_spiral_angles(j: float, jp: float) -> SpiralAngles:
    """Optimal spiral angles on the J' = 2 J2 line: cos(theta) = -J'/(2J)."""
    theta = float(np.arccos(-jp / (2.0 * j)))
    phi = 2.0 * theta - 2.0 * np.pi  # stationary partner, |phi| = 2(pi - theta)
    return SpiralAngles(theta, phi)


# ---------------------------------------------------------------------------
# composite-pair mean field, S = 1/2
# ---------------------------------------------------------------------------

def pair_mf_energy_reduced(zeta: float, phi: float, theta: float,
                           gamma: float, jp_over_j: float) -> float:
    """S=1/2 composite-pair variational energy in units of J N / 4.

    E / (J N / 4) = cos(phi) + cos(zeta)(cos(phi) - 1)
                    + sin^2(zeta) (gamma cos(theta)
                    + (2 J'/J) cos(theta - phi/2) cos(phi/2)).

    The tau parameter of the ansatz rescales the local spin mean values
    only and drops out of the energy, so it does not appear here.
    """
    return float(
        np.cos(phi)
        + np.cos(zeta) * (np.cos(phi) - 1.0)
        + np.sin(zeta) ** 2
        * (gamma * np.cos(theta)
           + 2.0 * jp_over_j * np.cos(theta - phi / 2.0) * np.cos(phi / 2.0))
    )


def pair_mf_energy(params: PairMFParams, couplings, n_rungs: int = 1) -> float:
    """Composite-pair variational energy for a physical coupling pattern."""
    j, jp, j2 = _uniform(couplings)
    gamma = (2.0 * j2 - jp) / j
    return 0.25 * j * n_rungs * pair_mf_energy_reduced(
        params.zeta, params.phi, params.theta, gamma, jp / j)


def pair_mf_closed_form_reduced(gamma: float):
    """Analytic minimum of the S=1/2 pair mean field, units of J N / 4.

    |gamma| <= 1: dimer branch, zeta = 0, phi = pi, E = -3.
    |gamma| > 1: colinear branch, cos(zeta) = 1/|gamma|,
    cos(theta) = -sign(gamma), E = -(1/|g| + 1 + |g|).
    """
    if abs(gamma) <= 1.0:
        params = PairMFParams(zeta=0.0, phi=np.pi, tau=0.0, theta=0.0)
        return params, -3.0, "dimer"
    g = abs(gamma)
    theta = 0.0 if gamma < 0 else np.pi
    params = PairMFParams(zeta=float(np.arccos(1.0 / g)), phi=np.pi, tau=0.0, theta=theta)
    return params, -(1.0 / g + 1.0 + g), "colinear-broken"


def pair_mf_minimize_reduced(gamma: float, jp_over_j: float, tol: float = 1e-8):
    """Closed-form minimum cross-checked against multi-start local descent.

    Raises MeanFieldDiagnosticError when the two disagree beyond ``tol``
    (in J N / 4 units), instead of silently preferring either.
    """
    params, e_closed, label = pair_mf_closed_form_reduced(gamma)
    starts = [
        (z, p, t)
        for z in (0.12, 1.35)
        for p in (0.8, 2.9)
        for t in (-2.6, -0.9, 0.9, 2.6)
    ]
    best, best_x = np.inf, None
    for x0 in starts:
        res = minimize(
            lambda x: pair_mf_energy_reduced(x[0], x[1], x[2], gamma, jp_over_j),
            x0,
            method="L-BFGS-B",
            bounds=[(0.0, np.pi / 2), (0.0, np.pi), (-np.pi, np.pi)],
            options=dict(ftol=1e-16, gtol=1e-12, maxiter=500),
        )
        if res.fun < best:
            best, best_x = float(res.fun), res.x
    if abs(best - e_closed) > tol * max(1.0, abs(e_closed)):
        raise MeanFieldDiagnosticError(
            f"pair mean field: closed form {e_closed} vs numeric {best} at gamma={gamma}"
        )
    numeric_params = PairMFParams(float(best_x[0]), float(best_x[1]), 0.0, float(best_x[2]))
    return params, e_closed, label, numeric_params, best


def pair_mf_minimize(couplings, n_rungs: int = 1, tol: float = 1e-8):
    """Pair mean-field minimum for a physical coupling pattern.

    Returns (params, energy, branch label, numeric params, numeric energy);
    energies are totals for ``n_rungs`` rungs.
    """
    j, jp, j2 = _uniform(couplings)
    gamma = (2.0 * j2 - jp) / j
    params, e_red, label, nparams, e_red_num = pair_mf_minimize_reduced(gamma, jp / j, tol)
    scale = 0.25 * j * n_rungs
    return params, scale * e_red, label, nparams, scale * e_red_num


def pair_mf_state(zeta: float, phi: float, tau: float = 0.0) -> StateVector:
    """Explicit S=1/2 rung state behind the composite-pair energy.

    cos(zeta/2)(sin(phi/2)|singlet> - i cos(phi/2)|t_z>)
        - e^{i tau} sin(zeta/2)|t_x>,
    in the frame with the pair polarization along z and the inter-rung
    pitch a rotation about z.  At tau = 0 the exact product-ansatz energy
    of this state reproduces pair_mf_energy_reduced identically; nonzero
    tau only shrinks the local spin mean values.
    """
    up_dn = np.zeros(4, complex); up_dn[1] = 1.0
    dn_up = np.zeros(4, complex); dn_up[2] = 1.0
    up_up = np.zeros(4, complex); up_up[3] = 1.0
    dn_dn = np.zeros(4, complex); dn_dn[0] = 1.0
    t_z = (up_dn + dn_up) / np.sqrt(2.0)
    t_x = (dn_dn - up_up) / np.sqrt(2.0)
    vec = (
        np.cos(zeta / 2.0) * (np.sin(phi / 2.0) * singlet_state("1/2").amplitudes
                              - 1j * np.cos(phi / 2.0) * t_z)
        - np.exp(1j * tau) * np.sin(zeta / 2.0) * t_x
    )
    return StateVector(vec / np.linalg.norm(vec))


# ---------------------------------------------------------------------------
# general-S family: singlet + coherent pair, rotated rung by rung
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _pair_tensors(twice_s: int):
    sv = SpinValue(twice_s)
    ops = spin_matrices(sv)
    eye = np.eye(sv.dim)
    s1 = tuple(np.kron(eye, ops[mu]) for mu in "xyz")
    s2 = tuple(np.kron(ops[mu], eye) for mu in "xyz")
    s1s2 = sum(a @ b for a, b in zip(s1, s2))
    return s1, s2, s1s2


def pair_family_state(spin, zeta: float, tau: float, phi: float) -> StateVector:
    """Normalized rung state cos(zeta/2)|singlet> + sin(zeta/2) e^{i tau}|pair(phi)>."""
    sv = SpinValue.parse(spin)
    vec = (
        np.cos(zeta / 2.0) * singlet_state(sv).amplitudes
        + np.sin(zeta / 2.0) * np.exp(1j * tau) * coherent_pair_state(sv, phi).amplitudes
    )
    return StateVector(vec / np.linalg.norm(vec))


def _rotation(theta: float, axis: str = "y") -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    if axis == "y":
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    if axis == "z":
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    raise LadderError(f"unsupported rotation axis {axis!r}")


def product_ansatz_energy(rung_state, theta: float, couplings, spin,
                          axis: str = "y", n_rungs: int = 1) -> float:
    """Exact energy of a product of identical rung states, rotated rung by rung.

    Intra-rung exchange is taken from the two-site state itself; every
    inter-rung bond couples the site mean vectors, with rung r+1 rotated by
    ``theta`` about ``axis`` relative to rung r.
    """
    j, jp, j2, j2p = couplings.uniform_values()
    sv = SpinValue.parse(spin)
    s1, s2, s1s2 = _pair_tensors(sv.twice_s)
    psi = np.asarray(rung_state.amplitudes if isinstance(rung_state, StateVector)
                     else rung_state, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    intra = float(np.real(np.vdot(psi, s1s2 @ psi)))
    m1 = np.array([np.real(np.vdot(psi, op @ psi)) for op in s1])
    m2 = np.array([np.real(np.vdot(psi, op @ psi)) for op in s2])
    rot = _rotation(theta, axis)
    inter = jp * (m2 @ rot @ m1) + j2 * (m2 @ rot @ m2) + j2p * (m1 @ rot @ m1)
    return n_rungs * (j * intra + float(inter))


def general_s_family_energy(theta, phi, zeta, tau, spin, couplings, n_rungs: int = 1) -> float:
    """Energy of the rotated product of singlet/coherent-pair rung states.

    Evaluated exactly from the two-site state; the zeta = 0 limit is the
    dimer energy and the zeta = pi limit the classical spiral energy, both
    exactly.
    """
    state = pair_family_state(spin, zeta, tau, phi)
    return product_ansatz_energy(state, theta, couplings, spin, axis="y",
                                 n_rungs=n_rungs)


def _family_minimum_on_line(spin, jp_over_j, n_zeta=121, n_tau=13, n_phi=81, n_theta=121):
    """Vectorized global scan of the family energy per rung at J=1, J2=J'/2."""
    sv = SpinValue.parse(spin)
    j, jp, j2 = 1.0, float(jp_over_j), float(jp_over_j) / 2.0
    s1, s2, s1s2 = _pair_tensors(sv.twice_s)
    sing = singlet_state(sv).amplitudes
    phis = np.linspace(0.0, np.pi, n_phi)
    o = np.empty(n_phi, complex)
    a_sp = np.empty(n_phi, complex)
    pp_int = np.empty(n_phi)
    w1 = np.empty((n_phi, 3), complex)
    w2 = np.empty((n_phi, 3), complex)
    n1 = np.empty((n_phi, 3))
    n2 = np.empty((n_phi, 3))
    for i, ph in enumerate(phis):
        p = coherent_pair_state(sv, ph).amplitudes
        o[i] = np.vdot(sing, p)
        a_sp[i] = np.vdot(sing, s1s2 @ p)
        pp_int[i] = np.real(np.vdot(p, s1s2 @ p))
        for mu in range(3):
            w1[i, mu] = np.vdot(sing, s1[mu] @ p)
            w2[i, mu] = np.vdot(sing, s2[mu] @ p)
            n1[i, mu] = np.real(np.vdot(p, s1[mu] @ p))
            n2[i, mu] = np.real(np.vdot(p, s2[mu] @ p))
    zetas = np.linspace(0.0, np.pi, n_zeta)[:, None, None]
    taus = np.linspace(-np.pi, np.pi, n_tau)[None, :, None]
    c = np.cos(zetas / 2.0)
    sn = np.sin(zetas / 2.0)
    eit = np.exp(1j * taus)
    norm2 = 1.0 + 2.0 * c * sn * np.real(eit * o[None, None, :])
    intra = (c**2 * (-sv.casimir) + sn**2 * pp_int[None, None, :]
             + 2.0 * c * sn * np.real(eit * a_sp[None, None, :])) / norm2
    def mean(nv, wv):
        return (sn[..., None] ** 2 * nv[None, None, :, :]
                + 2.0 * c[..., None] * sn[..., None]
                * np.real(eit[..., None] * wv[None, None, :, :])) / norm2[..., None]
    m1 = mean(n1, w1)
    m2 = mean(n2, w2)
    thetas = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    ct, st = np.cos(thetas), np.sin(thetas)
    def dot_rot(u, v):
        return (u[..., 0, None] * (v[..., 0, None] * ct + v[..., 2, None] * st)
                + u[..., 1, None] * v[..., 1, None]
                + u[..., 2, None] * (-v[..., 0, None] * st + v[..., 2, None] * ct))
    energy = j * intra[..., None] + jp * dot_rot(m2, m1) + j2 * (dot_rot(m2, m2) + dot_rot(m1, m1))
    idx = np.unravel_index(np.argmin(energy), energy.shape)
    args = (float(zetas[idx[0], 0, 0]), float(taus[0, idx[1], 0]),
            float(phis[idx[2]]), float(thetas[idx[3]]))
    return float(energy[idx]), args


@dataclass(frozen=True)
class FamilyTransition:
    """Where the family minimum leaves the dimer branch on the J'=2J2 line."""

    spin: SpinValue
    jp_over_j: float | None      # measured switch point (None if absent on (0, 1])
    two_over_s: float            # closed-form candidate 2/S
    endpoint_crossover: float    # sqrt(2/S), where the pure branches cross


def general_s_transition(spin, jp_max: float = 1.05, resolution: float = 5e-4) -> FamilyTransition:
    """Scan the dimerizing line for the first-order exit of the dimer branch.

    For S <= 3/2 the family is dimer-optimal on the whole J' in (0, J] and
    the measured point is None.  For larger spins the measured switch tracks
    the endpoint crossover sqrt(2/S) of the two pure branches; the 2/S
    closed-form candidate is returned alongside for comparison.
    """
    sv = SpinValue.parse(spin)
    e_dim = -sv.casimir
    reference = FamilyTransition(sv, None, 2.0 / sv.s, float(np.sqrt(2.0 / sv.s)))

    def dips(x):
        # pure spiral endpoint in closed form fixes the crossover exactly;
        # the grid scan catches interior minima below both endpoints
        if -sv.s ** 2 * (1.0 + 0.5 * x * x) < e_dim - 1e-12:
            return True
        e, _ = _family_minimum_on_line(sv, x)
        return e < e_dim - 1e-9

    lo, hi = 0.05, jp_max
    if not dips(hi):
        return reference
    if dips(lo):
        return FamilyTransition(sv, lo, reference.two_over_s, reference.endpoint_crossover)
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if dips(mid):
            hi = mid
        else:
            lo = mid
    measured = 0.5 * (lo + hi)
    return FamilyTransition(sv, measured, reference.two_over_s, reference.endpoint_crossover)


# ---------------------------------------------------------------------------
# dimer/spiral local-state fidelity, closed form
# ---------------------------------------------------------------------------

def dimer_spiral_pair_fidelity(spin, phi_tilde: float, kind: str = "rung") -> float:
    """Closed-form fidelity between dimer and spiral local pair states.

    On-rung: sin^(2S)(|phi|/2) / (2S+1); off-rung: 1/(2S+1).  The off-rung
    value equals the Uhlmann fidelity of the maximally mixed pair against a
    pure product state; the on-rung value is the printed closed form, which
    sits a factor 1/sqrt(2S+1) below the Uhlmann fidelity of the same pair
    of states (see tests for the numeric cross-check).
    """
    sv = SpinValue.parse(spin)
    if kind == "rung":
        return float(np.sin(abs(phi_tilde) / 2.0) ** sv.twice_s / sv.dim)
    if kind in ("off-rung", "offrung", "zigzag"):
        return 1.0 / sv.dim
    raise LadderError("pair kind must be 'rung' or 'off-rung'")
