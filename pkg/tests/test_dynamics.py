import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from conftest import FORM1, FORM2, generic_fields, make_params
from qubitbath.dynamics import (
    FieldSampler,
    ReducedState,
    ResonanceModel,
    default_time_grid,
    ergodic_mean,
    free_evolution,
    hamming_regression,
    propagate_effective,
    resonance_model,
    resonance_weights,
    scaling_sweep,
    thermalization_rate,
)
from qubitbath.errors import IncompleteModelError, InvalidInputError
from qubitbath.register import build_spectral_table, config_energies
from qubitbath.reservoir import CouplingScalars
from qubitbath.resonance import register_y0


@pytest.fixture(scope="module")
def scalars():
    return CouplingScalars(FORM1, FORM2, 1.0)


def _setup(b, scalars, **kw):
    params = make_params(b, **kw)
    table = build_spectral_table(params)
    return params, table, resonance_model(table, params, scalars)


def test_reduced_state_validation():
    with pytest.raises(InvalidInputError):
        ReducedState(np.eye(3) / 3)
    with pytest.raises(InvalidInputError):
        ReducedState(np.array([[1.0, 1.0], [0.0, 0.0]]))
    plus = ReducedState.product_plus(2)
    assert np.allclose(plus.elements, 0.25) and plus.n == 2


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
def test_random_state_is_density_matrix(seed, n):
    rho = ReducedState.random(n, np.random.default_rng(seed)).elements
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.allclose(rho, rho.conj().T)
    assert np.linalg.eigvalsh(rho).min() >= -1e-12


def test_trajectory_is_hermitian_and_trace_one(scalars):
    params, table, model = _setup([0.63, 1.07, 1.41], scalars, lambda1=0.05, lambda2=0.05)
    rho0 = ReducedState.random(3, np.random.default_rng(1))
    traj = propagate_effective(rho0, table, model, np.linspace(0, 200, 50))
    assert np.allclose(traj.values[0], rho0.elements, atol=1e-12)
    assert traj.hermiticity_dev.max() < 1e-12
    assert traj.trace_dev.max() < 1e-10


def test_ergodic_mean_is_gibbs(scalars):
    params, table, model = _setup([0.63, 1.07, 1.41], scalars, lambda1=0.05, lambda2=0.05)
    rho0 = ReducedState.random(3, np.random.default_rng(2))
    mean = ergodic_mean(rho0, table, model)
    _, energies = config_energies(params)
    gibbs = np.exp(-params.beta * energies)
    assert np.allclose(mean, np.diag(gibbs / gibbs.sum()), atol=1e-10)
    late = propagate_effective(rho0, table, model, [1e7]).values[0]
    assert np.allclose(late, mean, atol=1e-8)


def test_free_evolution_without_coupling(scalars):
    rng = np.random.default_rng(3)
    params, table, model = _setup(generic_fields(rng, 3), scalars, lambda1=0.0, lambda2=0.0)
    rho0 = ReducedState.random(3, rng)
    times = np.linspace(0, 2000, 101)
    traj = propagate_effective(rho0, table, model, times)
    assert np.max(np.abs(traj.values - free_evolution(rho0, params, times))) < 1e-12


def test_time_grid_validation(scalars):
    params, table, model = _setup([0.7, 1.2], scalars)
    rho0 = ReducedState.product_plus(2)
    for bad in ([], [-1.0], [2.0, 1.0], [np.nan]):
        with pytest.raises(InvalidInputError):
            propagate_effective(rho0, table, model, bad)


def test_incomplete_model_rejected(scalars):
    params, table, model = _setup([0.7, 1.2], scalars)
    with pytest.raises(IncompleteModelError):
        ResonanceModel(table=table, shifts=model.shifts[:-1])
    _, other, _ = _setup([0.7], scalars)
    with pytest.raises(IncompleteModelError):
        propagate_effective(ReducedState.product_plus(1), other, model, [0.0])
    with pytest.raises(InvalidInputError):
        propagate_effective(ReducedState.product_plus(3), table, model, [0.0])


def test_resonance_weights_sum_to_identity(scalars):
    params, table, model = _setup([0.63, 1.07], scalars)
    for g, s in zip(table.groups, model.shifts):
        w = resonance_weights(g, s)
        assert np.allclose(w.weights.sum(axis=0).T, np.eye(g.size), atol=1e-12)


def test_interacting_model_uses_numeric_zero_group(scalars):
    rng = np.random.default_rng(5)
    j = np.triu(rng.uniform(-0.3, 0.3, (2, 2)), 1)
    params, table, model = _setup(rng.uniform(0.5, 1.5, 2), scalars, j=j)
    sources = {s.source for s in model.shifts}
    assert sources <= {"interacting", "numeric", "closed"}
    assert "interacting" in sources


def test_default_time_grid():
    grid = default_time_grid([0.1, 0.01], 1.0, 50)
    assert grid[0] == 0.0 and grid.size == 50
    assert grid[1] == pytest.approx(0.1) and grid[-1] == pytest.approx(1000.0)
    assert default_time_grid([], 2.0, 10)[-1] == pytest.approx(50.0)


def test_scaling_sweep_exact_law():
    base = make_params([1.0], lambda1=0.01, lambda2=0.0)
    report = scaling_sweep(base, [1, 2, 3], FieldSampler(seed=1), instances=2)
    assert np.allclose(report.dephasing_max_rate, report.dephasing_law, rtol=1e-12)
    assert report.dephasing_slope == pytest.approx(2.0, abs=1e-9)
    d = report.to_dict()
    assert [row["n"] for row in d["per_n"]] == [1, 2, 3]


def test_scaling_sweep_validation():
    base = make_params([1.0])
    with pytest.raises(InvalidInputError):
        scaling_sweep(base, [], FieldSampler())
    with pytest.raises(InvalidInputError):
        scaling_sweep(base, [0], FieldSampler())
    with pytest.raises(InvalidInputError):
        FieldSampler(low=2.0, high=1.0)


def test_hamming_regression_is_linear():
    base = make_params([1.0], lambda1=0.0, lambda2=0.01)
    reg = hamming_regression(base, 3, FieldSampler(seed=2), instances=20)
    assert reg.distances == (2, 4, 6)
    assert reg.r_squared > 0.999999
    assert abs(reg.intercept) < 1e-9 * reg.slope


def test_thermalization_rate(scalars):
    params = make_params([0.7, 1.2])
    assert thermalization_rate(params, scalars) == pytest.approx(
        params.lambda2**2 * register_y0(params, scalars)
    )
    assert register_y0(params, scalars) == pytest.approx(
        4 * math.pi * min(scalars.site_rate(b) for b in params.b_fields)
    )


def _perturbed(rho, s, t, eps=1e-3):
    out = np.array(rho, dtype=complex)
    out[s, t] += eps
    out[t, s] += eps
    return out


def test_group_decoupling(scalars):
    params, table, model = _setup([0.63, 1.07, 1.41], scalars, lambda1=0.05, lambda2=0.05)
    rho0 = ReducedState.random(3, np.random.default_rng(6))
    times = [0.0, 3.0, 40.0]
    base = propagate_effective(rho0, table, model, times).values
    g = table.groups[5]
    s, t = int(g.tau_idx[0]), int(g.sigma_idx[0])  # element (s, t) lives in the group of member (t, s)
    bumped = propagate_effective(ReducedState(_perturbed(rho0.elements, s, t)), table, model, times).values
    changed = np.argwhere(np.abs(bumped - base).max(axis=0) > 1e-15)
    allowed = {(int(b), int(a)) for a, b in zip(g.sigma_idx, g.tau_idx)}
    mirror = table.groups[table.group_index(-g.e_value)]
    allowed |= {(int(b), int(a)) for a, b in zip(mirror.sigma_idx, mirror.tau_idx)}
    assert {tuple(map(int, x)) for x in changed} <= allowed


def test_single_branch_envelope(scalars):
    params, table, model = _setup([0.63, 1.07], scalars, lambda1=0.05, lambda2=0.05)
    top = table.groups[-1]
    shift = model.shifts[-1]
    s, t = int(top.tau_idx[0]), int(top.sigma_idx[0])
    rho0 = ReducedState.product_plus(2)
    times = np.linspace(0, 50, 11)
    values = propagate_effective(rho0, table, model, times).values[:, s, t]
    gamma = (top.e_value + shift.deltas[0]).imag
    assert np.allclose(np.abs(values), np.exp(-gamma * times) * abs(rho0.elements[s, t]), rtol=1e-12)


def test_cesaro_average_approaches_ergodic_mean(scalars):
    params, table, model = _setup([0.63, 1.07], scalars, lambda1=0.1, lambda2=0.1)
    rho0 = ReducedState.random(2, np.random.default_rng(8))
    eps = np.concatenate([g.e_value + s.deltas for g, s in zip(table.groups, model.shifts)])
    horizon = 50.0 / eps.imag[np.abs(eps) > 1e-12].min()
    times = np.linspace(0.0, horizon, 20001)
    values = propagate_effective(rho0, table, model, times).values
    average = trapezoid(values, times, axis=0) / horizon
    mean = ergodic_mean(rho0, table, model)
    assert np.max(np.abs(average - mean)) <= 0.05 * np.max(np.abs(mean))


def test_unperturbed_weights_are_basis_projectors(scalars):
    params, table, model = _setup([0.63, 1.07], scalars, lambda1=0.0, lambda2=0.0)
    for g, s in zip(table.groups, model.shifts):
        w = resonance_weights(g, s).weights
        assert np.allclose(np.abs(w).sum(axis=0), np.eye(g.size))
