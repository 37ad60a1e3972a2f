import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import same_up_to_sign
from dephasewalk.channels import one_step_map
from dephasewalk.errors import DimensionError, NumericalError
from dephasewalk.models import CoinedWalkModel
from dephasewalk.spectral import (
    OverlapValue,
    biorthonormality_residual,
    decay_modes,
    eigen_residual,
    eigenvector_snapshots,
    floquet_exponent,
    full_spectrum,
    is_conjugate_split,
    leading_pair,
    normalize_phase,
    overlap_g,
    pairing_check,
    track_modes,
)

HALF_PI = 0.5 * math.pi
ANTISYMMETRIC = np.array([1.0, 0.0, -1.0]) / math.sqrt(2.0)
SYMMETRIC = np.array([-1.0, 2.0, -1.0]) / math.sqrt(6.0)


def test_floquet_exponent_branches():
    lam = floquet_exponent([1.0, -1.0, math.exp(-0.5), 0.0, 1j])
    assert lam[0] == pytest.approx(0.0)
    assert lam[1] == pytest.approx(1j * math.pi)
    assert lam[2] == pytest.approx(0.5)
    assert np.isinf(lam[3].real)
    assert lam[4] == pytest.approx(-0.5j * math.pi)


def test_normalize_phase_makes_largest_entry_positive():
    v = normalize_phase(np.array([0.0, -2.0, 1.0]))
    assert_allclose(v, np.array([0.0, 2.0, -1.0]) / math.sqrt(5.0))
    w = normalize_phase(np.array([1j, 0.5j]))
    assert w[0] == pytest.approx(2.0 / math.sqrt(5.0))


def test_normalize_phase_rejects_zero():
    with pytest.raises(NumericalError):
        normalize_phase(np.zeros(3))


def test_stationary_mode_first_and_decay_order(ring_flux):
    d = full_spectrum(one_step_map(ring_flux, 0.5))
    assert d.eigenvalues[0] == pytest.approx(1.0)
    assert abs(d.exponents[0]) <= 1e-12
    re = d.exponents.real
    assert np.all(np.diff(re[1:]) >= -1e-12)
    assert_allclose(np.abs(d.right[:, 0]), 1.0 / math.sqrt(3.0), atol=1e-12)


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.65])
def test_biorthonormal_away_from_the_exceptional_point(ring_flux, beta):
    d = full_spectrum(one_step_map(ring_flux, beta))
    assert d.biorthonormal and not d.near_ep
    assert biorthonormality_residual(d) <= 1e-8
    assert eigen_residual(d) <= 1e-10


def test_no_coupling_means_no_decay(ring_flat):
    d = full_spectrum(one_step_map(ring_flat, 0.0))
    assert_allclose(d.exponents, 0.0, atol=1e-12)
    assert decay_modes(d) == []
    with pytest.raises(NumericalError):
        leading_pair(d)


def test_defective_matrix_flagged_near_ep():
    jordan = np.array([[1.0, 0.0, 0.0], [0.0, 0.5, 1.0], [0.0, 0.0, 0.5]])
    d = full_spectrum(jordan)
    assert d.near_ep
    assert not d.biorthonormal


def test_non_square_input_rejected():
    with pytest.raises(DimensionError):
        full_spectrum(np.ones((2, 3)))


def test_time_reversal_symmetric_spectrum_is_real(ring_flat):
    for beta in (0.3, 0.7, 0.9, 1.2):
        d = full_spectrum(one_step_map(ring_flat, beta))
        im = np.abs(d.exponents.imag)
        assert np.all((im <= 1e-10) | (np.abs(im - math.pi) <= 1e-10))


def test_symmetric_ring_eigenvectors_below_the_crossing(ring_flat):
    d = full_spectrum(one_step_map(ring_flat, 0.8))
    a, b = leading_pair(d)
    assert (a, b) == (1, 2)
    # modo antisimetrico mas lento antes del cruce
    assert same_up_to_sign(d.right[:, 1], ANTISYMMETRIC, 1e-10)
    assert same_up_to_sign(d.right[:, 2], SYMMETRIC, 1e-10)
    assert d.eigenvalues[1].real == pytest.approx(0.248, abs=0.01)
    assert d.eigenvalues[2].real == pytest.approx(-0.211, abs=0.01)
    assert float(overlap_g(d)) <= 1e-10


def test_conjugate_split_after_the_exceptional_point(ring_flux):
    below = full_spectrum(one_step_map(ring_flux, 0.7))
    above = full_spectrum(one_step_map(ring_flux, 0.8))
    assert not is_conjugate_split(below, leading_pair(below))
    pair = leading_pair(above)
    assert is_conjugate_split(above, pair)
    assert above.exponents[pair[0]].imag == pytest.approx(-above.exponents[pair[1]].imag, abs=1e-8)
    assert abs(above.exponents[pair[0]].imag) > 1e-3


def test_overlap_value_range():
    with pytest.raises(NumericalError):
        OverlapValue(1.5)
    assert float(OverlapValue(1.0 + 1e-13)) == 1.0


def test_overlap_needs_three_modes():
    d = full_spectrum(np.array([[0.5, 0.5], [0.5, 0.5]]))
    with pytest.raises(DimensionError):
        overlap_g(d)


@pytest.mark.parametrize("L", [3, 4, 5])
@pytest.mark.parametrize("beta", [0.15, 0.45, 0.95, 1.15, 1.35])
def test_coined_spectrum_symmetric_under_sign_flip(L, beta):
    d = full_spectrum(one_step_map(CoinedWalkModel(L=L), beta))
    assert pairing_check(d, L) <= 1e-8


def test_coined_decay_modes_with_and_without_pairing():
    d = full_spectrum(one_step_map(CoinedWalkModel(L=3), 0.3 * HALF_PI))
    assert np.min(np.abs(d.eigenvalues + 1.0)) <= 1e-10
    assert len(decay_modes(d)) == 4
    kept = decay_modes(d, pairing=True)
    assert len(kept) == 2
    assert all(abs(d.exponents[s].imag) <= HALF_PI + 1e-12 for s in kept)


def test_imaginary_axis_partners_keep_one_member():
    # L = 4: mu = +-i r are each other's -mu partner and sit at |Im lambda| = pi/2
    d = full_spectrum(one_step_map(CoinedWalkModel(L=4), 0.4 * HALF_PI))
    kept = decay_modes(d, pairing=True)
    assert len(kept) == 3
    ims = sorted(d.exponents[s].imag for s in kept)
    assert ims[-1] == pytest.approx(HALF_PI, abs=1e-9)
    assert ims[0] == pytest.approx(-ims[1], abs=1e-8)

    pair = leading_pair(d, pairing=True)
    assert is_conjugate_split(d, pair)
    assert abs(d.exponents[pair[0]].imag) == pytest.approx(0.587, abs=5e-3)


def test_leading_pair_takes_the_slowest_conjugate_pair_in_a_tie():
    d = full_spectrum(one_step_map(CoinedWalkModel(L=5), 0.3 * HALF_PI))
    kept = decay_modes(d, pairing=True)
    assert len(kept) == 4
    rates = [d.exponents[s].real for s in kept]
    assert max(rates) - min(rates) <= 1e-9
    a, b = leading_pair(d, pairing=True)
    assert is_conjugate_split(d, (a, b))
    assert d.exponents[a].imag == pytest.approx(-0.5777, abs=2e-3)
    assert d.exponents[b].imag == pytest.approx(0.5777, abs=2e-3)


def test_pairing_check_dimension_mismatch():
    d = full_spectrum(one_step_map(CoinedWalkModel(L=3), 0.5))
    with pytest.raises(DimensionError):
        pairing_check(d, 4)


def test_branch_tracking_follows_eigenvectors_through_the_crossing(ring_flat):
    betas = [0.78, 0.80, 0.82, 0.84]
    grid = [(b, full_spectrum(one_step_map(ring_flat, b))) for b in betas]
    tracking = track_modes(grid)
    assert tracking.mode_of(0, 1) == 1
    last = grid[-1][1]
    mode = tracking.mode_of(3, 1)
    assert mode == 2
    assert same_up_to_sign(last.right[:, mode], ANTISYMMETRIC, 1e-10)
    assert tracking.ambiguous == []


def test_branch_tracking_requires_sorted_grid(ring_flat):
    d = full_spectrum(one_step_map(ring_flat, 0.5))
    with pytest.raises(ValueError):
        track_modes([(0.5, d), (0.4, d)])


def test_eigenvector_snapshots(ring_flat):
    snaps = eigenvector_snapshots(ring_flat, [0.7, 0.9])
    assert [s["beta"] for s in snaps] == [0.7, 0.9]
    for s in snaps:
        assert s["r2"].shape == (3,)
        assert not s["near_ep"]
