import numpy as np
import pytest
from scipy.integrate import quad

from zzladder.meanfield import SpiralAngles, classical_extrema, dimerline_spiral_angles
from zzladder.model import CouplingPattern, SpinValue, uniform_spec
from zzladder.rpa import (
    RPAError,
    bogoliubov_energies,
    dimer_chain_quadratic_form,
    dimer_rpa_dispersion,
    dimer_rpa_energy,
    dimer_rpa_energy_correction,
    dimer_rpa_stability,
    dimer_stability_halfwidth,
    local_excitation_energy,
    rpa_energy_curves,
    single_site_rpa_energy,
    spiral_rpa_blocks,
    spiral_rpa_spectrum,
)
from zzladder.rpa import _branch_energies_invariant

U = lambda jp, j2: CouplingPattern.uniform(1, 1.0, jp, j2)


# ---------------------------------------------------------------------------
# spiral blocks and spectra
# ---------------------------------------------------------------------------

def test_blocks_hermitian_for_random_parameters():
    rng = np.random.default_rng(1)
    c = U(0.7, 0.4)
    for _ in range(8):
        ang = SpiralAngles(rng.uniform(-np.pi, np.pi), rng.uniform(-np.pi, np.pi))
        blk = spiral_rpa_blocks(rng.uniform(0, 2 * np.pi), ang, c, "1")
        assert np.abs(blk.matrix - blk.matrix.conj().T).max() < 1e-12


def test_blocks_ferro_alignment_has_no_anomalous_part():
    blk = spiral_rpa_blocks(0.9, SpiralAngles(0.0, 0.0), U(0.5, 0.3), "1/2")
    assert np.abs(blk.delta_minus).max() < 1e-14


def test_local_excitation_energy_positive_on_line():
    c = U(0.6, 0.3)
    ang = dimerline_spiral_angles(1.0, 0.6)
    lam = local_excitation_energy(ang, c, "1")
    expected = 1.0 * abs(np.cos(ang.phi) + 0.6 * np.cos(ang.theta - ang.phi)
                         + 0.6 * np.cos(ang.theta))
    assert lam == pytest.approx(expected, abs=1e-14)
    assert lam > 0


def test_goldstone_zero_modes_on_commensurate_grid():
    """At the stationary spiral with pitch 2 pi/3, k = 0 and k = pitch are gapless."""
    c = U(1.0, 0.5)
    ang = dimerline_spiral_angles(1.0, 1.0)
    assert ang.theta == pytest.approx(2 * np.pi / 3)
    spec = spiral_rpa_spectrum(ang, c, 1, 12)
    assert spec.all_stable
    i_pitch = 4  # 2 pi * 4 / 12 = pitch
    assert spec.omega_minus[0] < 1e-8
    assert spec.omega_minus[i_pitch] < 1e-8
    assert spec.zero_modes[0] and spec.zero_modes[i_pitch]
    interior = [i for i in range(12) if i not in (0, 4, 8)]
    assert all(spec.omega_minus[i] > 1e-3 for i in interior)


def test_invariant_formula_matches_numeric_bogoliubov():
    c = U(0.8, 0.4)
    ang = dimerline_spiral_angles(1.0, 0.8)
    for k in (0.3, 0.9, 1.7, 2.6, 4.0):
        blk = spiral_rpa_blocks(k, ang, c, "3/2")
        wm, wp, ok = _branch_energies_invariant(blk.matrix)
        nums, ok2 = bogoliubov_energies(blk.matrix)
        assert ok and ok2
        assert abs(wm - nums[0]) < 1e-10 and abs(wp - nums[1]) < 1e-10


def test_spiral_spectrum_reduces_to_chain_spin_waves():
    """Jp = J, J2 -> 0 with staggered angles is the chain antiferromagnet:
    both folded branches follow 2 S J |sin(k/2)|."""
    c = U(1.0, 1e-12)
    ang = SpiralAngles(0.0, np.pi)
    for s_label, s_val in (("1/2", 0.5), ("1", 1.0)):
        spec = spiral_rpa_spectrum(ang, c, s_label, 16)
        expected = 2 * s_val * np.abs(np.sin(spec.momenta / 2.0))
        assert np.abs(spec.omega_minus - expected).max() < 1e-6
        assert np.abs(spec.omega_plus - expected).max() < 1e-6


def test_single_site_correction_lowers_mean_field():
    for spin in ("1/2", "1"):
        for jp in (0.4, 0.6, 0.9):
            c = U(jp, jp / 2)
            ang = dimerline_spiral_angles(1.0, jp)
            e_mf, e_rpa, ok = single_site_rpa_energy(ang, c, spin, 128)
            assert ok
            assert e_rpa < e_mf


def test_nonstationary_angles_flagged():
    blk = spiral_rpa_blocks(0.3, SpiralAngles(0.77, 0.13), U(0.6, 0.3), "1")
    assert not blk.stationary
    blk2 = spiral_rpa_blocks(0.3, dimerline_spiral_angles(1.0, 0.6), U(0.6, 0.3), "1")
    assert blk2.stationary


# ---------------------------------------------------------------------------
# dimer-line boson chain
# ---------------------------------------------------------------------------

def test_dispersion_flat_at_gamma_zero():
    spec = dimer_rpa_dispersion(0.0, 8)
    assert np.allclose(spec.omega, 1.0)
    assert spec.channel_degeneracy == 3


def test_dispersion_edge_cases():
    spec = dimer_rpa_dispersion(1.0, 8)
    assert spec.omega[0] == pytest.approx(0.0, abs=1e-15)
    assert spec.zero_modes[0]
    spec05 = dimer_rpa_dispersion(0.5, 8)
    assert spec05.omega[4] == pytest.approx(np.sqrt(1.5))
    unstable = dimer_rpa_dispersion(1.3, 8)
    assert not unstable.all_stable
    assert np.isnan(unstable.omega[0])


def test_dispersion_reflection_symmetry():
    spec = dimer_rpa_dispersion(0.7, 16)
    for k in range(1, 16):
        assert spec.omega[k] == pytest.approx(spec.omega[16 - k], abs=1e-15)


@pytest.mark.parametrize("n", [8, 16, 64])
def test_chain_form_bogoliubov_matches_dispersion(n):
    for gamma in (0.3, 0.9):
        a, b = dimer_chain_quadratic_form(gamma, n)
        h = np.block([[a, b], [b, a]])
        w_num, ok = bogoliubov_energies(h)
        assert ok
        w_disp = np.sort(dimer_rpa_dispersion(gamma, n).omega)
        assert np.abs(np.sort(w_num) - w_disp).max() < 1e-10


def test_correction_closed_form_vs_quadrature():
    for gamma in np.arange(0.1, 0.95, 0.1):
        res = dimer_rpa_energy_correction(float(gamma))
        assert abs(res.closed_form - res.quadrature) < 1e-6
        # independent adaptive quadrature of the zone integrand
        integral, _ = quad(lambda u: np.sqrt(1 - gamma * np.cos(u)), 0, np.pi)
        assert res.closed_form == pytest.approx(2 * (1 - integral / np.pi), abs=1e-9)


def test_correction_signs_and_limits():
    assert dimer_rpa_energy_correction(0.0).value == 0.0
    assert dimer_rpa_energy_correction(-0.5).value == pytest.approx(
        dimer_rpa_energy_correction(0.5).value, abs=1e-12)
    near_edge = dimer_rpa_energy_correction(0.9999).value
    assert 0.19 < near_edge < 0.21  # finite limit as |gamma| -> 1
    with pytest.raises(RPAError):
        dimer_rpa_energy_correction(1.0)


def test_stability_window():
    assert dimer_rpa_stability(0.99)
    assert not dimer_rpa_stability(1.01)
    assert dimer_stability_halfwidth(2) == pytest.approx(0.125)
    assert dimer_stability_halfwidth("1/2") == pytest.approx(1.0)


def test_dimer_rpa_energy_scaling_with_spin():
    # same gamma, different spin: relative correction scales as 1/(S(S+1))
    spec_h = uniform_spec(4, "1/2", 1.0, 0.6, 0.45)
    e_h, ok_h = dimer_rpa_energy(spec_h)
    from zzladder.model import dimer_energy, gamma_of

    gam = gamma_of(spec_h).gamma
    rel_h = e_h / dimer_energy(spec_h)[0] - 1.0
    closed = dimer_rpa_energy_correction(gam).value
    assert ok_h
    assert rel_h == pytest.approx(closed, abs=1e-9)  # spin 1/2 matches printed form
    spec_1 = uniform_spec(4, "1", 1.0, 0.6, 0.3 + 0.3 * 0.75 / 2.0)
    gam1 = gamma_of(spec_1).gamma
    e_1, _ = dimer_rpa_energy(spec_1)
    rel_1 = e_1 / dimer_energy(spec_1)[0] - 1.0
    closed_1 = dimer_rpa_energy_correction(gam1).value
    assert rel_1 == pytest.approx(closed_1 * 0.75 / 2.0, abs=1e-9)


# ---------------------------------------------------------------------------
# energy curves
# ---------------------------------------------------------------------------

def test_curves_match_exact_at_gamma_zero():
    rows = rpa_energy_curves("1/2", 0.6, [0.3], n_rungs=4, n_k=64)
    row = rows[0]
    assert row["gamma"] == pytest.approx(0.0, abs=1e-14)
    assert row["e_rpa_pair"] == pytest.approx(row["e_exact"], abs=1e-10)
    assert row["e_rpa_pair"] == pytest.approx(row["e_dimer"], abs=1e-12)


def test_pair_curve_beats_single_site_inside_dimer_window():
    rows = rpa_energy_curves("1/2", 0.6, [0.15, 0.45], n_rungs=4, n_k=64)
    for row in rows:
        err_pair = abs(row["e_rpa_pair"] - row["e_exact"])
        err_site = abs(row["e_rpa_site"] - row["e_exact"])
        assert row["stable_pair"]
        assert err_pair < err_site


def test_curves_flag_unstable_pair_vacuum():
    rows = rpa_energy_curves("1", 0.6, [0.9], n_rungs=4, n_k=32, with_exact=False)
    assert not rows[0]["stable_pair"]
    assert np.isnan(rows[0]["e_rpa_pair"])
