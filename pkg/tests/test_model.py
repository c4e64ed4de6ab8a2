import json

import numpy as np
import pytest

from zzladder.model import (
    CouplingPattern,
    HamiltonianOperator,
    LadderError,
    LadderSpec,
    SpinValue,
    StateVector,
    apply_hamiltonian,
    apply_rung_operator,
    apply_site_operator,
    apply_total_sz,
    build_spec,
    check_dimer_constraint,
    coherent_pair_state,
    coherent_state,
    dimer_energy,
    dimer_state,
    gamma_of,
    gs_energy_lower_bound,
    hamiltonian_dense,
    load_state,
    save_state,
    singlet_state,
    spec_from_json,
    spec_to_json,
    spin_matrices,
    sufficient_gs_condition,
    uniform_spec,
)

SPINS = ["1/2", "1", "3/2", "2"]


def random_couplings_on_constraint(n, rng):
    """Random antiferromagnetic pattern obeying Jp = J2 + J2' rung by rung."""
    j = rng.uniform(0.5, 2.0, n)
    jp = rng.uniform(0.05, 0.6, n)
    split = rng.uniform(0.0, 1.0, n)
    return CouplingPattern(j=j, jp=jp, j2=split * jp, j2p=(1 - split) * jp)


def random_state(dim, rng):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# spec construction
# ---------------------------------------------------------------------------

def test_build_spec_valid():
    spec = build_spec(4, "1/2", {"J": 1.0, "Jp": 0.6, "J2": 0.3}, "periodic")
    assert spec.dim == 256
    assert spec.couplings.is_uniform


def test_build_spec_odd_periodic_rejected():
    with pytest.raises(LadderError):
        build_spec(3, "1/2", {"J": 1.0}, "periodic")


def test_build_spec_large_spin_dimension():
    spec = build_spec(4, "5/2", {"J": 1.0}, "periodic")
    assert spec.dim == 6**8 == 1679616


def test_build_spec_cap_and_negative_coupling():
    with pytest.raises(LadderError):
        build_spec(4, "1/2", {"J": 1.0}, "periodic", dim_cap=100)
    with pytest.raises(LadderError):
        CouplingPattern.uniform(2, 1.0, -0.1, 0.0)


def test_spin_value_parsing():
    assert SpinValue.parse("3/2").twice_s == 3
    assert SpinValue.parse(1).twice_s == 2
    assert SpinValue.parse(0.5).twice_s == 1
    assert SpinValue.parse("1/2").label == "1/2"
    with pytest.raises(LadderError):
        SpinValue.parse("1/3")
    with pytest.raises(LadderError):
        SpinValue(0)


# ---------------------------------------------------------------------------
# singlet and dimer states
# ---------------------------------------------------------------------------

def test_singlet_amplitudes_spin_half():
    s = singlet_state("1/2").amplitudes
    expected = np.zeros(4)
    expected[1] = 1 / np.sqrt(2)   # (m1, m2) = (+1/2, -1/2)
    expected[2] = -1 / np.sqrt(2)  # swapped pair picks up the sign
    assert np.allclose(s, expected)


def test_singlet_amplitudes_spin_one():
    s = singlet_state("1").amplitudes
    d = 3
    # (m1, m2) in {(1,-1), (0,0), (-1,1)} with alternating sign, weight 1/sqrt(3)
    expected = np.zeros(9)
    expected[2 + d * 0] = 1 / np.sqrt(3)
    expected[1 + d * 1] = -1 / np.sqrt(3)
    expected[0 + d * 2] = 1 / np.sqrt(3)
    assert np.allclose(s, expected)


@pytest.mark.parametrize("spin", SPINS)
def test_singlet_annihilated_by_total_rung_spin(spin):
    spec = uniform_spec(1, spin, j=1.0, boundary="open")
    s = singlet_state(spin)
    for mu in "xyz":
        out = apply_rung_operator(spec, "J", 0, mu, s)
        assert np.linalg.norm(out.amplitudes) < 1e-14


def test_dimer_single_rung_equals_singlet():
    spec = uniform_spec(1, "1/2", j=1.0, boundary="open")
    assert np.allclose(dimer_state(spec).amplitudes, singlet_state("1/2").amplitudes)


def test_dimer_expectation_matches_formula():
    spec = uniform_spec(2, "1/2", j=1.0, jp=0.6, j2=0.3, boundary="periodic")
    d = dimer_state(spec)
    h_d = apply_hamiltonian(spec, d)
    e = np.vdot(d.amplitudes, h_d.amplitudes).real
    e_dim, is_eig = dimer_energy(spec)
    assert is_eig
    assert abs(e - e_dim) < 1e-12
    assert abs(e_dim - (-0.75 * 2)) < 1e-15


def test_dimer_norm_and_sz_sector():
    spec = uniform_spec(4, "1", j=1.0, jp=0.4, j2=0.2)
    d = dimer_state(spec)
    assert abs(d.norm - 1.0) < 1e-12
    assert np.linalg.norm(apply_total_sz(spec, d)) < 1e-13


def test_dimer_energy_nonuniform_vs_dense_matvec():
    # J = (1, 2): expectation by explicit dense matvec must equal -0.75 * 3
    c = CouplingPattern(j=np.array([1.0, 2.0]), jp=np.zeros(2),
                        j2=np.zeros(2), j2p=np.zeros(2))
    spec = LadderSpec(n_rungs=2, spin=SpinValue(1), couplings=c, boundary="open")
    d = dimer_state(spec).amplitudes
    h = hamiltonian_dense(spec)
    e = np.vdot(d, h @ d).real
    e_dim, _ = dimer_energy(spec)
    assert abs(e - e_dim) < 1e-12
    assert abs(e_dim - (-2.25)) < 1e-15


@pytest.mark.parametrize("spin", ["1/2", "1"])
@pytest.mark.parametrize("boundary,n_rungs", [("open", 3), ("periodic", 4)])
def test_dimer_is_eigenstate_random_couplings(spin, boundary, n_rungs):
    rng = np.random.default_rng(42 + n_rungs)
    for _ in range(4):
        c = random_couplings_on_constraint(n_rungs, rng)
        spec = LadderSpec(n_rungs=n_rungs, spin=SpinValue.parse(spin),
                          couplings=c, boundary=boundary)
        d = dimer_state(spec)
        e_dim, is_eig = dimer_energy(spec)
        assert is_eig
        resid = apply_hamiltonian(spec, d).amplitudes - e_dim * d.amplitudes
        assert np.linalg.norm(resid) < 1e-10


# ---------------------------------------------------------------------------
# constraint, sufficient condition, lower bound, gamma
# ---------------------------------------------------------------------------

def test_check_dimer_constraint_cases():
    ok = CouplingPattern.uniform(2, 1.0, 0.6, 0.3, 0.3)
    bad = CouplingPattern.uniform(2, 1.0, 0.6, 0.4, 0.3)
    asym = CouplingPattern.uniform(2, 1.0, 0.6, 0.45, 0.15)
    assert check_dimer_constraint(ok).all()
    assert not check_dimer_constraint(bad).any()
    assert check_dimer_constraint(asym).all()


def test_sufficient_gs_condition():
    assert sufficient_gs_condition(uniform_spec(4, "1/2", 1.0, 0.9, 0.45))
    assert not sufficient_gs_condition(uniform_spec(4, "1", 1.0, 0.6, 0.3))
    assert sufficient_gs_condition(uniform_spec(4, "1", 1.0, 0.4, 0.2))
    # off the line the condition simply fails
    assert not sufficient_gs_condition(uniform_spec(4, "1/2", 1.0, 0.6, 0.2))
    with pytest.raises(LadderError):
        c = CouplingPattern(j=np.array([1.0, 2.0]), jp=np.full(2, 0.2),
                            j2=np.full(2, 0.1), j2p=np.full(2, 0.1))
        sufficient_gs_condition(LadderSpec(2, SpinValue(1), c, "open"))


def brute_force_bound(spec):
    """Independent enumeration of the per-site bound over l = 0..2S."""
    j = spec.couplings.j[0]
    jp = spec.couplings.jp[0]
    s = spec.spin.s
    vals = []
    for l in range(spec.spin.twice_s + 1):
        a = abs(s - l)
        vals.append(0.5 * jp * a * (a + 1) + 0.5 * (j - jp) * l * (l + 1)
                    - (j + 0.5 * jp) * s * (s + 1))
    return spec.n_rungs * min(vals)


def test_lower_bound_saturated_cases():
    spec = uniform_spec(4, "1/2", 1.0, 0.6, 0.3)
    assert abs(gs_energy_lower_bound(spec) - (-3.0)) < 1e-14
    spec = uniform_spec(3, "1", 1.0, 0.4, 0.2, boundary="open")
    assert abs(gs_energy_lower_bound(spec) - (-6.0)) < 1e-14


def test_lower_bound_unsaturated_case():
    spec = uniform_spec(3, "1", 1.0, 0.8, 0.4, boundary="open")
    bound = gs_energy_lower_bound(spec)
    assert bound < -6.0
    assert abs(bound - brute_force_bound(spec)) < 1e-14


def test_gamma_values():
    assert gamma_of(uniform_spec(4, "1/2", 1.0, 0.6, 0.3)).gamma == pytest.approx(0.0, abs=1e-15)
    assert gamma_of(uniform_spec(4, "1/2", 1.0, 0.6, 0.8)).gamma == pytest.approx(1.0, abs=1e-12)
    assert gamma_of(uniform_spec(4, "1", 1.0, 0.6, 0.3)).gamma == pytest.approx(0.0, abs=1e-15)


# ---------------------------------------------------------------------------
# Hamiltonian application
# ---------------------------------------------------------------------------

def test_apply_hamiltonian_eigenstate_componentwise():
    spec = uniform_spec(4, "1/2", 1.0, 0.6, 0.3)
    d = dimer_state(spec)
    e_dim, _ = dimer_energy(spec)
    out = apply_hamiltonian(spec, d).amplitudes
    assert np.abs(out - e_dim * d.amplitudes).max() < 1e-12


def test_apply_hamiltonian_linearity_and_hermiticity():
    spec = uniform_spec(2, "1", 1.0, 0.5, 0.2)
    rng = np.random.default_rng(0)
    zero = apply_hamiltonian(spec, np.zeros(spec.dim, dtype=complex))
    assert np.linalg.norm(zero.amplitudes) == 0.0
    v, w = random_state(spec.dim, rng), random_state(spec.dim, rng)
    op = HamiltonianOperator(spec)
    lhs = np.vdot(w, op.apply(v))
    rhs = np.conj(np.vdot(v, op.apply(w)))
    assert abs(lhs - rhs) < 1e-12


def test_apply_dimension_mismatch():
    spec = uniform_spec(2, "1/2", 1.0)
    with pytest.raises(LadderError):
        apply_hamiltonian(spec, np.zeros(7, dtype=complex))


def test_dense_trace_and_column_equivalence():
    spec = uniform_spec(2, "1/2", 1.0, 0.6, 0.3)
    h = hamiltonian_dense(spec)
    assert h.shape == (16, 16)
    assert abs(np.trace(h)) < 1e-13
    assert np.abs(h - h.conj().T).max() < 1e-14
    op = HamiltonianOperator(spec)
    for col in range(16):
        e = np.zeros(16)
        e[col] = 1.0
        assert np.array_equal(h[:, col], op.apply(e))


def test_dense_rung_only_block_spectrum():
    # isolated rungs: eigenvalues are sums of J/2 [j(j+1) - 2 S(S+1)] per rung
    spec = uniform_spec(2, "1", 1.0, 0.0, 0.0, boundary="open")
    h = hamiltonian_dense(spec)
    evals = np.sort(np.linalg.eigvalsh(h))
    per_rung = {j: 0.5 * (j * (j + 1) - 2 * 2.0) for j in range(3)}
    expected = []
    for j1 in range(3):
        for j2 in range(3):
            expected.extend([per_rung[j1] + per_rung[j2]] * ((2 * j1 + 1) * (2 * j2 + 1)))
    assert np.allclose(evals, np.sort(expected), atol=1e-12)


def test_dense_cap():
    spec = uniform_spec(4, "2", 1.0)
    with pytest.raises(LadderError):
        hamiltonian_dense(spec, cap=1000)


def test_sector_restricted_operator_matches_full():
    from zzladder.exact import SectorBasis

    spec = uniform_spec(2, "1", 1.0, 0.5, 0.25)
    basis = SectorBasis(spec, 0)
    op_full = HamiltonianOperator(spec)
    op_sec = basis.operator()
    rng = np.random.default_rng(1)
    v = rng.standard_normal(basis.dim)
    full = op_full.apply(basis.embed(v))
    assert np.allclose(basis.restrict(full), op_sec.apply(v), atol=1e-13)


# ---------------------------------------------------------------------------
# rung operators and the local algebra
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("spin", SPINS)
def test_difference_operator_norm_on_singlet(spin):
    spec = uniform_spec(1, spin, 1.0, boundary="open")
    s = singlet_state(spin)
    sv = SpinValue.parse(spin)
    for mu in "xyz":
        out = apply_rung_operator(spec, "K", 0, mu, s)
        norm2 = np.linalg.norm(out.amplitudes) ** 2
        assert abs(norm2 - (4.0 / 3.0) * sv.casimir) < 1e-12


@pytest.mark.parametrize("spin", ["1/2", "1"])
def test_local_lie_algebra_on_random_states(spin):
    """All nine commutators: [J,J] ~ J, [J,K] ~ K, [K,K] ~ J."""
    spec = uniform_spec(2, spin, 1.0, 0.3, 0.15)
    rng = np.random.default_rng(7)
    v = random_state(spec.dim, rng)
    eps = {("x", "y"): "z", ("y", "z"): "x", ("z", "x"): "y"}

    def op(kind, mu, state):
        return apply_rung_operator(spec, kind, 0, mu, StateVector(state)).amplitudes

    for (mu, nu), eta in eps.items():
        for ka, kb, kc in (("J", "J", "J"), ("J", "K", "K"), ("K", "K", "J")):
            comm = op(ka, mu, op(kb, nu, v)) - op(kb, nu, op(ka, mu, v))
            assert np.linalg.norm(comm - 1j * op(kc, eta, v)) < 1e-12


def test_su2_symmetry_of_hamiltonian():
    spec = uniform_spec(2, "1", 1.0, 0.45, 0.3)
    rng = np.random.default_rng(3)
    v = random_state(spec.dim, rng)
    op = HamiltonianOperator(spec)
    # [H, total Sz] = 0
    comm = op.apply(apply_total_sz(spec, v)) - apply_total_sz(spec, op.apply(v))
    assert np.linalg.norm(comm) < 1e-12

    def total_component(mu, state):
        out = np.zeros_like(state)
        for site in range(spec.n_sites):
            out += apply_site_operator(spec, mu, site, state)
        return out

    def casimir(state):
        out = np.zeros_like(state)
        for mu in "xyz":
            out += total_component(mu, total_component(mu, state))
        return out

    comm2 = op.apply(casimir(v)) - casimir(op.apply(v))
    assert np.linalg.norm(comm2) < 1e-12


def test_rung_operator_reconstructs_hamiltonian():
    """Rewriting in rung sums/differences reproduces the bond Hamiltonian."""
    spec = uniform_spec(2, "1/2", 1.1, 0.7, 0.25, 0.35, boundary="open")
    j, jp, j2, j2p = spec.couplings.uniform_values()
    dim = spec.dim

    def pair_term(ka, ra, kb, rb, state):
        out = np.zeros_like(state)
        for mu in "xyz":
            inner = apply_rung_operator(spec, kb, rb, mu, StateVector(state)).amplitudes
            out += apply_rung_operator(spec, ka, ra, mu, StateVector(inner)).amplitudes
        return out

    h_ref = hamiltonian_dense(spec).astype(complex)
    cols = np.eye(dim, dtype=complex)
    h_built = np.zeros((dim, dim), dtype=complex)
    casimir = spec.spin.casimir
    for c in range(dim):
        v = cols[:, c]
        acc = -2 * j * casimir * v
        for r in range(2):
            acc += 0.5 * j * pair_term("J", r, "J", r, v)
        acc += 0.25 * (j2 + j2p + jp) * pair_term("J", 0, "J", 1, v)
        acc += 0.25 * (jp + j2 - j2p) * pair_term("K", 0, "J", 1, v)
        acc -= 0.25 * (jp + j2p - j2) * pair_term("J", 0, "K", 1, v)
        acc += 0.25 * (j2 + j2p - jp) * pair_term("K", 0, "K", 1, v)
        h_built[:, c] = acc
    assert np.abs(h_built - h_ref).max() < 1e-12


def test_rung_operator_index_errors():
    spec = uniform_spec(2, "1/2", 1.0)
    s = StateVector(np.zeros(spec.dim, dtype=complex))
    with pytest.raises(LadderError):
        apply_rung_operator(spec, "J", 5, "x", s)
    with pytest.raises(LadderError):
        apply_rung_operator(spec, "Q", 0, "x", s)


# ---------------------------------------------------------------------------
# coherent states and serialization
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("spin", SPINS)
def test_coherent_state_polarization(spin):
    sv = SpinValue.parse(spin)
    ops = spin_matrices(sv)
    for angle in (0.0, 0.7, np.pi / 2, 2.4):
        v = coherent_state(sv, angle)
        mx = np.vdot(v, ops["x"] @ v).real
        mz = np.vdot(v, ops["z"] @ v).real
        assert abs(mx - sv.s * np.sin(angle)) < 1e-12
        assert abs(mz - sv.s * np.cos(angle)) < 1e-12


def test_coherent_pair_overlap_with_singlet():
    for spin in SPINS:
        sv = SpinValue.parse(spin)
        for phi in (0.4, np.pi / 2, np.pi):
            p = coherent_pair_state(sv, phi).amplitudes
            s = singlet_state(sv).amplitudes
            target = np.sin(phi / 2.0) ** sv.twice_s / np.sqrt(sv.dim)
            assert abs(abs(np.vdot(s, p)) - target) < 1e-12


def test_spec_json_roundtrip():
    spec = uniform_spec(4, "3/2", 1.0, 0.6, 0.3, 0.2)
    text = spec_to_json(spec)
    doc = json.loads(text)
    assert doc["twice_s"] == 3 and doc["n_rungs"] == 4
    spec2 = spec_from_json(text)
    assert spec2.n_rungs == spec.n_rungs
    assert spec2.spin == spec.spin
    assert np.array_equal(spec2.couplings.j2p, spec.couplings.j2p)
    assert spec2.boundary == "periodic"


def test_state_binary_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    v = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    path = tmp_path / "state.bin"
    save_state(path, StateVector(v))
    loaded = load_state(path)
    assert np.array_equal(loaded.amplitudes, v)
    raw = path.read_bytes()
    assert len(raw) == 8 + 16 * 16
    assert int.from_bytes(raw[:8], "little") == 16
