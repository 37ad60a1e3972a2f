import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

from dephasewalk.channels import (
    DensityMatrix,
    StochasticMatrix,
    SuperoperatorMatrix,
    classical_markov,
    dephase_step,
    diagonal_block,
    liouvillian,
    one_step_map,
    propagator,
    step_operator,
    unvectorize,
    vectorize,
)
from dephasewalk.errors import DimensionError, InvariantError
from dephasewalk.models import RingModel, ring_hamiltonian
from dephasewalk.spectral import detailed_balance_residual


def test_propagator_at_zero_time_is_identity(ring_flux):
    u = propagator(ring_hamiltonian(ring_flux), 0.0).data
    assert_allclose(u, np.eye(3), atol=1e-15)


@pytest.mark.parametrize("tau", [0.3, 0.8127, 2.0])
def test_propagator_matches_matrix_exponential(ring_flux, tau):
    h = ring_hamiltonian(ring_flux).data
    u = propagator(ring_hamiltonian(ring_flux), tau).data
    assert np.max(np.abs(u - expm(-1j * h * tau))) <= 1e-12


def test_propagator_rejects_negative_time(ring_flat):
    with pytest.raises(InvariantError):
        propagator(ring_hamiltonian(ring_flat), -0.1)


@pytest.mark.parametrize("phi", [0.0, math.pi / 3, math.pi])
@pytest.mark.parametrize("beta", [0.3, 0.8127, 1.4])
def test_ring_markov_matrix_is_doubly_stochastic(phi, beta):
    q = classical_markov(step_operator(RingModel(phi=phi), beta))
    assert q.residual <= 1e-12
    assert_allclose(q.data.sum(axis=0), 1.0, atol=1e-12)
    assert_allclose(q.data.sum(axis=1), 1.0, atol=1e-12)


def test_stochastic_matrix_rejects_row_defect():
    with pytest.raises(InvariantError):
        StochasticMatrix(np.array([[0.5, 0.6], [0.5, 0.4]]))


def test_stochastic_matrix_clamps_roundoff():
    q = StochasticMatrix(np.array([[1.0 + 1e-16, -1e-16], [-1e-16, 1.0 + 1e-16]]))
    assert q.data.min() >= 0.0


def _random_density(rng, n):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


@pytest.mark.parametrize("q", [0.0, 0.3, 0.7, 1.0])
def test_liouvillian_acts_like_dephase_step(ring_flux, rng, q):
    u = step_operator(ring_flux, 0.8)
    m = liouvillian(u, q).data
    for _ in range(5):
        rho = _random_density(rng, 3)
        via_matrix = unvectorize(m @ vectorize(rho), 3)
        assert np.max(np.abs(via_matrix - dephase_step(rho, u, q).data)) <= 1e-12


@pytest.mark.parametrize("q", [0.0, 0.25, 0.5, 0.9, 1.0])
def test_dephase_step_keeps_states_positive(ring_flux, rng, q):
    u = step_operator(ring_flux, 0.8)
    for _ in range(5):
        rho = _random_density(rng, 3)
        for _ in range(10):
            rho = dephase_step(rho, u, q)
            assert np.linalg.eigvalsh(rho.data)[0] >= -1e-10
            assert np.trace(rho.data).real == pytest.approx(1.0, abs=1e-12)


def test_liouvillian_population_block_is_classical_markov(ring_flux):
    u = step_operator(ring_flux, 0.8)
    block = diagonal_block(liouvillian(u, 1.0))
    assert np.max(np.abs(block - classical_markov(u).data)) <= 1e-12


def test_full_dephasing_kills_coherences(ring_flat):
    u = step_operator(ring_flat, 0.5)
    rho = DensityMatrix(np.full((3, 3), 1.0 / 3.0))
    out = dephase_step(rho, u, 1.0)
    assert out.coherence_norm == 0.0
    sigma = u.data @ rho.data @ u.data.conj().T
    assert_allclose(out.populations, sigma.diagonal().real, atol=1e-12)


def test_full_dephasing_keeps_the_maximally_mixed_state(ring_flat):
    u = step_operator(ring_flat, 0.5)
    out = dephase_step(DensityMatrix(np.eye(3) / 3.0), u, 1.0)
    assert out.coherence_norm <= 1e-15
    assert_allclose(out.populations, 1.0 / 3.0, atol=1e-12)


def test_one_step_map_kind_depends_on_q(ring_flat):
    assert isinstance(one_step_map(ring_flat, 0.5, 1.0), StochasticMatrix)
    m = one_step_map(ring_flat, 0.5, 0.4)
    assert isinstance(m, SuperoperatorMatrix)
    assert m.hilbert_dimension == 3 and m.q == pytest.approx(0.4)


@pytest.mark.parametrize("q", [-0.1, 1.5])
def test_q_outside_unit_interval_rejected(ring_flat, q):
    with pytest.raises(InvariantError):
        one_step_map(ring_flat, 0.5, q)


def test_density_matrix_validation():
    with pytest.raises(InvariantError):
        DensityMatrix(np.diag([0.5, 0.4, 0.0]))
    with pytest.raises(InvariantError):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(InvariantError):
        DensityMatrix(np.array([[1.2, 0.0], [0.0, -0.2]]))
    with pytest.raises(DimensionError):
        DensityMatrix(np.ones(3) / 3)


def test_dephase_step_dimension_mismatch(ring_flat):
    with pytest.raises(DimensionError):
        dephase_step(DensityMatrix.pure_site(0, 2), step_operator(ring_flat, 0.5), 0.5)


def test_superoperator_must_preserve_trace():
    with pytest.raises(InvariantError):
        SuperoperatorMatrix(0.5 * np.eye(4))


def test_detailed_balance_only_with_time_reversal():
    for phi in (0.0, math.pi):
        assert detailed_balance_residual(one_step_map(RingModel(phi=phi), 0.8)) <= 1e-12
    assert detailed_balance_residual(one_step_map(RingModel(phi=math.pi / 3), 0.8)) > 1e-6
