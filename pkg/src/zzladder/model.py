"""Ladder definition, Hamiltonian application, and dimerized eigenstates.

The lattice is a two-leg zig-zag ladder with N rungs (2N sites).  Site
numbering follows the chain picture: sites 0..2N-1, rung r holding the
pair (2r, 2r+1).  Four bond families connect the sites:

    rung(r)      : (2r, 2r+1)      strength J[r]
    zigzag(r)    : (2r+1, 2r+2)    strength Jp[r]
    even leg(r)  : (2r+1, 2r+3)    strength J2[r]
    odd leg(r)   : (2r, 2r+2)      strength J2p[r]

All couplings are antiferromagnetic (>= 0).  Product-basis states are
indexed with the site-0 quantum number varying fastest: a configuration
with local digits d_j (d_j = m_j + S in {0..2S}) sits at index
sum_j d_j * (2S+1)**j.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

DEFAULT_DIM_CAP = 20_000_000
DENSE_DIM_CAP = 10_000
CONSTRAINT_TOL = 1e-12


class LadderError(ValueError):
    """Invalid ladder specification or incompatible operands."""


class UnsupportedCouplingError(LadderError):
    """Operation requires a coupling pattern the spec does not have."""


@dataclass(frozen=True)
class SpinValue:
    """Local spin magnitude, stored exactly as the integer 2S."""

    twice_s: int

    def __post_init__(self):
        if not isinstance(self.twice_s, (int, np.integer)) or self.twice_s < 1:
            raise LadderError(f"twice_s must be a positive integer, got {self.twice_s!r}")

    @property
    def s(self) -> float:
        return self.twice_s / 2.0

    @property
    def dim(self) -> int:
        """Local Hilbert-space dimension 2S+1."""
        return self.twice_s + 1

    @property
    def casimir(self) -> float:
        """S(S+1), computed from integers."""
        return self.twice_s * (self.twice_s + 2) / 4.0

    @property
    def label(self) -> str:
        return str(Fraction(self.twice_s, 2))

    @classmethod
    def parse(cls, text) -> "SpinValue":
        """Accept '1/2', '1', 1.5, Fraction(3,2) ... and return a SpinValue."""
        if isinstance(text, SpinValue):
            return text
        frac = Fraction(str(text))
        if frac.denominator not in (1, 2):
            raise LadderError(f"spin must be a half-integer, got {text!r}")
        return cls(int(frac * 2))


@dataclass(frozen=True)
class CouplingPattern:
    """Per-rung bond strengths J, J', J2, J2' (arrays of length N)."""

    j: np.ndarray
    jp: np.ndarray
    j2: np.ndarray
    j2p: np.ndarray

    def __post_init__(self):
        for name in ("j", "jp", "j2", "j2p"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.ndim != 1:
                raise LadderError(f"coupling array {name} must be one-dimensional")
            if np.any(arr < 0):
                raise LadderError(f"antiferromagnetic model: coupling {name} must be >= 0")
        n = len(self.j)
        if any(len(getattr(self, name)) != n for name in ("jp", "j2", "j2p")):
            raise LadderError("coupling arrays must share a common length N")

    @classmethod
    def uniform(cls, n_rungs: int, j: float, jp: float, j2: float, j2p=None) -> "CouplingPattern":
        if j2p is None:
            j2p = j2
        return cls(
            j=np.full(n_rungs, float(j)),
            jp=np.full(n_rungs, float(jp)),
            j2=np.full(n_rungs, float(j2)),
            j2p=np.full(n_rungs, float(j2p)),
        )

    @property
    def n_rungs(self) -> int:
        return len(self.j)

    @property
    def is_uniform(self) -> bool:
        return all(
            np.all(arr == arr[0]) for arr in (self.j, self.jp, self.j2, self.j2p)
        )

    def uniform_values(self):
        """(J, J', J2, J2') for a uniform pattern; raises otherwise."""
        if not self.is_uniform:
            raise UnsupportedCouplingError("operation requires uniform couplings")
        return float(self.j[0]), float(self.jp[0]), float(self.j2[0]), float(self.j2p[0])


@dataclass(frozen=True)
class LadderSpec:
    """Validated problem definition: lattice size, spin, couplings, boundary."""

    n_rungs: int
    spin: SpinValue
    couplings: CouplingPattern
    boundary: str = "periodic"
    dim_cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        if self.n_rungs < 1:
            raise LadderError("n_rungs must be >= 1")
        if self.boundary not in ("periodic", "open"):
            raise LadderError(f"boundary must be 'periodic' or 'open', got {self.boundary!r}")
        if self.boundary == "periodic" and self.n_rungs % 2 == 1:
            raise LadderError("periodic boundary requires an even number of rungs")
        if self.couplings.n_rungs != self.n_rungs:
            raise LadderError("couplings length differs from n_rungs")
        if self.dim > self.dim_cap:
            raise LadderError(
                f"Hilbert dimension {self.dim} exceeds cap {self.dim_cap}"
            )

    @property
    def n_sites(self) -> int:
        return 2 * self.n_rungs

    @property
    def local_dim(self) -> int:
        return self.spin.dim

    @property
    def dim(self) -> int:
        return self.local_dim ** self.n_sites

    def bonds(self):
        """All (site_a, site_b, strength) terms of the Hamiltonian."""
        n, c = self.n_rungs, self.couplings
        out = []
        last = n if self.boundary == "periodic" else n - 1
        for r in range(n):
            out.append((2 * r, 2 * r + 1, c.j[r]))
        for r in range(last):
            ns = self.n_sites
            out.append(((2 * r + 1) % ns, (2 * r + 2) % ns, c.jp[r]))
            out.append(((2 * r + 1) % ns, (2 * r + 3) % ns, c.j2[r]))
            out.append(((2 * r) % ns, (2 * r + 2) % ns, c.j2p[r]))
        return [(a, b, float(w)) for a, b, w in out if w != 0.0]


def build_spec(n_rungs, spin, couplings, boundary="periodic", dim_cap=DEFAULT_DIM_CAP) -> LadderSpec:
    """Validating constructor accepting plain numbers / dicts for convenience."""
    spin = SpinValue.parse(spin)
    if isinstance(couplings, dict):
        couplings = CouplingPattern.uniform(
            n_rungs,
            couplings["J"],
            couplings.get("Jp", 0.0),
            couplings.get("J2", 0.0),
            couplings.get("J2p"),
        )
    return LadderSpec(n_rungs=n_rungs, spin=spin, couplings=couplings, boundary=boundary, dim_cap=dim_cap)


def uniform_spec(n_rungs, spin, j=1.0, jp=0.0, j2=0.0, j2p=None, boundary="periodic", dim_cap=DEFAULT_DIM_CAP) -> LadderSpec:
    spin = SpinValue.parse(spin)
    return LadderSpec(
        n_rungs=n_rungs,
        spin=spin,
        couplings=CouplingPattern.uniform(n_rungs, j, jp, j2, j2p),
        boundary=boundary,
        dim_cap=dim_cap,
    )


# ---------------------------------------------------------------------------
# local spin matrices and states
# ---------------------------------------------------------------------------

def spin_matrices(spin) -> dict:
    """Dense (2S+1)x(2S+1) operators {'z','+','-','x','y'} in the digit basis."""
    spin = SpinValue.parse(spin)
    d = spin.dim
    m = (np.arange(d) - spin.twice_s / 2.0)
    sz = np.diag(m).astype(complex)
    raise_amp = np.sqrt(spin.casimir - m[:-1] * (m[:-1] + 1.0))
    sp = np.zeros((d, d), dtype=complex)
    sp[np.arange(1, d), np.arange(d - 1)] = raise_amp
    sm = sp.conj().T
    return {
        "z": sz,
        "+": sp,
        "-": sm,
        "x": (sp + sm) / 2.0,
        "y": (sp - sm) / 2.0j,
    }


@dataclass
class StateVector:
    """Complex amplitudes over the product basis, with optional Sz label."""

    amplitudes: np.ndarray
    sz_sector: float | None = None

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.amplitudes / self.norm, self.sz_sector)


def as_amplitudes(state) -> np.ndarray:
    """Accept a StateVector or a bare array and return the amplitude array."""
    if isinstance(state, StateVector):
        return state.amplitudes
    return np.asarray(state)


def singlet_state(spin) -> StateVector:
    """Two-site total-spin-zero state: sum_m (-1)^(m+S) |-m>|m> / sqrt(2S+1).

    Site ordering matches the global convention (first site fastest), so the
    amplitude of the pair configuration (m1, m2) sits at index
    (m1+S) + (2S+1)*(m2+S).
    """
    spin = SpinValue.parse(spin)
    d = spin.dim
    vec = np.zeros(d * d, dtype=complex)
    for k2 in range(d):
        # site-2 digit k2 carries m = k2 - S; site 1 must hold -m
        k1 = spin.twice_s - k2
        sign = -1.0 if (k2 % 2) else 1.0  # (-1)^(m+S) = (-1)^k2
        vec[k1 + d * k2] = sign
    vec /= np.sqrt(d)
    return StateVector(vec, sz_sector=0.0)


def dimer_state(spec: LadderSpec) -> StateVector:
    """Product of rung singlets, |singlet> on every pair (2r, 2r+1)."""
    s = singlet_state(spec.spin).amplitudes
    full = s
    for _ in range(spec.n_rungs - 1):
        full = np.kron(s, full)  # earlier rungs stay fastest
    return StateVector(full, sz_sector=0.0)


def coherent_state(spin, angle: float) -> np.ndarray:
    """Spin coherent state polarized along (sin(angle), 0, cos(angle)).

    Built as exp(-i angle S_y) applied to the maximal-Sz state.
    """
    spin = SpinValue.parse(spin)
    sy = spin_matrices(spin)["y"]
    evals, vecs = np.linalg.eigh(sy)
    top = np.zeros(spin.dim, dtype=complex)
    top[-1] = 1.0
    return (vecs * np.exp(-1j * angle * evals)) @ (vecs.conj().T @ top)


def coherent_pair_state(spin, relative_angle: float) -> StateVector:
    """Two-site product of coherent states with the given relative angle.

    The first site points along -angle/2, the second along +angle/2, both
    in the xz plane; site ordering matches the global convention.
    """
    lo = coherent_state(spin, -relative_angle / 2.0)
    hi = coherent_state(spin, +relative_angle / 2.0)
    return StateVector(np.kron(hi, lo))


# ---------------------------------------------------------------------------
# Hamiltonian as a matrix-free operator
# ---------------------------------------------------------------------------

class HamiltonianOperator:
    """Applies the Heisenberg Hamiltonian without materializing a matrix.

    Works either on the full product basis (codes = all indices) or on the
    configurations listed in a sector basis (sorted integer codes).  Every
    bond S_a . S_b is accumulated as Sz Sz + (S+ S- + S- S+)/2 with exact
    ladder-operator matrix elements.
    """

    PLAN_CAP = 4_000_000  # above this, fall back to on-the-fly bond loops

    def __init__(self, spec: LadderSpec, codes: np.ndarray | None = None):
        self.spec = spec
        self.d = spec.local_dim
        self.n_sites = spec.n_sites
        self._full = codes is None
        if codes is None:
            self.codes = None
            self.dim = spec.dim
        else:
            self.codes = np.asarray(codes, dtype=np.int64)
            self.dim = len(self.codes)
        ts = spec.spin.twice_s
        m = np.arange(self.d) - ts / 2.0
        self._m = m
        # raising amplitude from digit k, lowering amplitude from digit k
        self._cp = np.sqrt(np.maximum(spec.spin.casimir - m * (m + 1.0), 0.0))
        self._cm = np.sqrt(np.maximum(spec.spin.casimir - m * (m - 1.0), 0.0))
        self._steps = self.d ** np.arange(self.n_sites, dtype=np.int64)
        self._bonds = spec.bonds()
        self._plan = None
        if self.dim <= self.PLAN_CAP:
            self._build_plan()

    def _digits(self, site: int) -> np.ndarray:
        codes = self.codes if self.codes is not None else np.arange(self.dim, dtype=np.int64)
        return (codes // self._steps[site]) % self.d

    def _positions(self, new_codes: np.ndarray) -> np.ndarray:
        if self._full:
            return new_codes
        pos = np.searchsorted(self.codes, new_codes)
        return pos

    def _build_plan(self):
        """Precompute the diagonal and the gather/scatter lists per bond term."""
        codes = self.codes if self.codes is not None else np.arange(self.dim, dtype=np.int64)
        ts = self.spec.spin.twice_s
        diag = np.zeros(self.dim)
        scatters = []
        for a, b, w in self._bonds:
            da = self._digits(a)
            db = self._digits(b)
            diag += w * self._m[da] * self._m[db]
            for dsrc, ddst, src, dst in ((da, db, a, b), (db, da, b, a)):
                mask = (dsrc < ts) & (ddst > 0)
                if not mask.any():
                    continue
                rows = np.nonzero(mask)[0]
                amp = 0.5 * w * self._cp[dsrc[rows]] * self._cm[ddst[rows]]
                pos = self._positions(codes[rows] + self._steps[src] - self._steps[dst])
                scatters.append((rows, pos, amp))
        self._plan = (diag, scatters)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """H @ vec for a 1-D vector or a (dim, k) block of columns."""
        vec = np.asarray(vec)
        if vec.shape[0] != self.dim:
            raise LadderError(f"state dimension {vec.shape[0]} != operator dimension {self.dim}")
        col = (-1,) + (1,) * (vec.ndim - 1)
        if self._plan is not None:
            diag, scatters = self._plan
            out = diag.reshape(col) * vec
            for rows, pos, amp in scatters:
                out[pos] += amp.reshape(col) * vec[rows]
            return out
        out = np.zeros_like(vec, dtype=np.promote_types(vec.dtype, np.float64))
        codes = self.codes if self.codes is not None else np.arange(self.dim, dtype=np.int64)
        ts = self.spec.spin.twice_s
        for a, b, w in self._bonds:
            da = self._digits(a)
            db = self._digits(b)
            out += (w * self._m[da] * self._m[db]).reshape(col) * vec
            for src, dst in ((a, b), (b, a)):
                dsrc = da if src == a else db
                ddst = db if src == a else da
                mask = (dsrc < ts) & (ddst > 0)
                if not mask.any():
                    continue
                amp = 0.5 * w * self._cp[dsrc[mask]] * self._cm[ddst[mask]]
                new_codes = codes[mask] + self._steps[src] - self._steps[dst]
                pos = self._positions(new_codes)
                out[pos] += amp.reshape(col) * vec[mask]
        return out

    def __matmul__(self, vec):
        return self.apply(vec)

    def dense(self, cap: int = DENSE_DIM_CAP) -> np.ndarray:
        """Dense matrix obtained by applying the operator to every basis column."""
        if self.dim > cap:
            raise LadderError(f"dense matrix of dimension {self.dim} exceeds cap {cap}")
        return self.apply(np.eye(self.dim))

    def expectation(self, vec) -> float:
        v = as_amplitudes(vec)
        return float(np.real(np.vdot(v, self.apply(v))))


def apply_hamiltonian(spec: LadderSpec, state) -> StateVector:
    """H|psi> on the full product basis."""
    amps = as_amplitudes(state)
    op = HamiltonianOperator(spec)
    res = op.apply(amps.astype(complex))
    sector = state.sz_sector if isinstance(state, StateVector) else None
    return StateVector(res, sz_sector=sector)


def hamiltonian_dense(spec: LadderSpec, cap: int = DENSE_DIM_CAP) -> np.ndarray:
    return HamiltonianOperator(spec).dense(cap)


# ---------------------------------------------------------------------------
# rung operators J (sum) and K (difference)
# ---------------------------------------------------------------------------

def apply_site_operator(spec: LadderSpec, op: str, site: int, state) -> np.ndarray:
    """Apply a single-site spin component ('x','y','z','+','-') to a state."""
    if not 0 <= site < spec.n_sites:
        raise LadderError(f"site {site} out of range")
    vec = as_amplitudes(state).astype(complex)
    if vec.shape[0] != spec.dim:
        raise LadderError("state dimension mismatch")
    d = spec.local_dim
    ts = spec.spin.twice_s
    step = d ** site
    codes = np.arange(spec.dim, dtype=np.int64)
    dig = (codes // step) % d
    m = dig - ts / 2.0
    if op == "z":
        return m * vec
    cp = np.sqrt(np.maximum(spec.spin.casimir - m * (m + 1.0), 0.0))
    cm = np.sqrt(np.maximum(spec.spin.casimir - m * (m - 1.0), 0.0))
    out = np.zeros_like(vec)
    if op in ("+", "x", "y"):
        mask = dig < ts
        out[codes[mask] + step] += cp[mask] * vec[mask]
        if op == "+":
            return out
        raised = out
    if op in ("-", "x", "y"):
        lowered = np.zeros_like(vec)
        mask = dig > 0
        lowered[codes[mask] - step] += cm[mask] * vec[mask]
        if op == "-":
            return lowered
    if op == "x":
        return (raised + lowered) / 2.0
    if op == "y":
        return (raised - lowered) / 2.0j
    raise LadderError(f"unknown operator {op!r}")


def apply_rung_operator(spec: LadderSpec, kind: str, rung: int, component: str, state) -> StateVector:
    """Apply J_mu (site sum) or K_mu (site difference) on the given rung.

    J_r = S(2r+1) + S(2r)  and  K_r = S(2r+1) - S(2r), i.e. second site of
    the rung minus the first.
    """
    if not 0 <= rung < spec.n_rungs:
        raise LadderError(f"rung {rung} out of range")
    if kind not in ("J", "K"):
        raise LadderError("kind must be 'J' or 'K'")
    lo, hi = 2 * rung, 2 * rung + 1
    v_hi = apply_site_operator(spec, component, hi, state)
    v_lo = apply_site_operator(spec, component, lo, state)
    res = v_hi + v_lo if kind == "J" else v_hi - v_lo
    return StateVector(res)


def apply_total_sz(spec: LadderSpec, state) -> np.ndarray:
    vec = as_amplitudes(state).astype(complex)
    out = np.zeros_like(vec)
    for site in range(spec.n_sites):
        out += apply_site_operator(spec, "z", site, vec)
    return out


# ---------------------------------------------------------------------------
# dimerization diagnostics
# ---------------------------------------------------------------------------

def check_dimer_constraint(couplings: CouplingPattern, tol: float = CONSTRAINT_TOL) -> np.ndarray:
    """Per-rung truth of J'(r) = J2(r) + J2'(r)."""
    return np.abs(couplings.jp - couplings.j2 - couplings.j2p) <= tol


def dimer_energy(spec: LadderSpec, tol: float = CONSTRAINT_TOL):
    """<dimer|H|dimer> = -S(S+1) * sum_r J(r), with an eigenstate flag.

    The value is the exact eigenvalue whenever the rung-decoupling
    constraint holds on every (non-boundary-dropped) rung; otherwise it is
    only the expectation value of H in the dimer state.
    """
    ok = check_dimer_constraint(spec.couplings, tol)
    if spec.boundary == "open":
        ok = ok[:-1] if spec.n_rungs > 1 else ok[:0]
    is_eigenstate = bool(np.all(ok))
    energy = -spec.spin.casimir * float(np.sum(spec.couplings.j))
    return energy, is_eigenstate


def sufficient_gs_condition(spec: LadderSpec, tol: float = CONSTRAINT_TOL) -> bool:
    """Sufficient condition for the dimer product to be the ground state.

    Uniform couplings with J2 = J2' required; true iff J' = 2 J2 and
    J' < J (for S = 1/2) or J' < J/(S+1) (for S >= 1).
    """
    j, jp, j2, j2p = spec.couplings.uniform_values()
    if abs(j2 - j2p) > tol:
        raise UnsupportedCouplingError("condition stated for J2 = J2'")
    if abs(jp - 2.0 * j2) > tol:
        return False
    bound = j if spec.spin.twice_s == 1 else j / (spec.spin.s + 1.0)
    return jp < bound


def gs_energy_lower_bound(spec: LadderSpec) -> float:
    """Ground-energy lower bound from the per-site triangle decomposition.

    N * min over integer l in [0, 2S] of
        (J'/2)|S-l|(|S-l|+1) + ((J-J')/2) l(l+1) - (J + J'/2) S(S+1).
    """
    j, jp, j2, j2p = spec.couplings.uniform_values()
    if abs(j2 - j2p) > CONSTRAINT_TOL or abs(jp - 2.0 * j2) > CONSTRAINT_TOL:
        raise UnsupportedCouplingError("bound requires the line J' = 2 J2 = 2 J2'")
    s = spec.spin.s
    dj = j - jp
    best = np.inf
    for l in range(spec.spin.twice_s + 1):
        a = abs(s - l)
        val = 0.5 * jp * a * (a + 1.0) + 0.5 * dj * l * (l + 1.0) - (j + 0.5 * jp) * spec.spin.casimir
        best = min(best, val)
    return spec.n_rungs * best


@dataclass(frozen=True)
class DimerlineParam:
    """Scaled distance from the dimerizing line J' = 2 J2."""

    gamma: float


def gamma_of(spec: LadderSpec) -> DimerlineParam:
    """gamma = ((2 J2 - J')/J) * S(S+1)/(3/4) for uniform couplings."""
    j, jp, j2, j2p = spec.couplings.uniform_values()
    if abs(j2 - j2p) > CONSTRAINT_TOL:
        raise UnsupportedCouplingError("gamma defined for J2 = J2'")
    return DimerlineParam(((2.0 * j2 - jp) / j) * spec.spin.casimir / 0.75)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def spec_to_json(spec: LadderSpec) -> str:
    doc = {
        "n_rungs": spec.n_rungs,
        "twice_s": spec.spin.twice_s,
        "boundary": spec.boundary,
        "couplings": {
            "J": spec.couplings.j.tolist(),
            "Jp": spec.couplings.jp.tolist(),
            "J2": spec.couplings.j2.tolist(),
            "J2p": spec.couplings.j2p.tolist(),
        },
    }
    return json.dumps(doc, indent=2)


def spec_from_json(text: str, dim_cap: int = DEFAULT_DIM_CAP) -> LadderSpec:
    doc = json.loads(text)
    c = doc["couplings"]
    pattern = CouplingPattern(
        j=np.asarray(c["J"], dtype=float),
        jp=np.asarray(c["Jp"], dtype=float),
        j2=np.asarray(c["J2"], dtype=float),
        j2p=np.asarray(c["J2p"], dtype=float),
    )
    return LadderSpec(
        n_rungs=int(doc["n_rungs"]),
        spin=SpinValue(int(doc["twice_s"])),
        couplings=pattern,
        boundary=doc.get("boundary", "periodic"),
        dim_cap=dim_cap,
    )


def save_state(path, state) -> None:
    """Binary dump: 8-byte little-endian length header + complex128 payload."""
    amps = np.ascontiguousarray(as_amplitudes(state), dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", amps.shape[0]))
        fh.write(amps.tobytes())


def load_state(path) -> StateVector:
    with open(path, "rb") as fh:
        (dim,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.shape[0] != dim:
        raise LadderError(f"state file corrupt: header {dim}, payload {data.shape[0]}")
    return StateVector(data.astype(complex))
