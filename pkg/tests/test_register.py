import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_params
from qubitbath.errors import (
    AmbiguousGroupingError,
    GenericityError,
    InvalidInputError,
    ResourceLimitError,
)
from qubitbath.register import (
    all_configs,
    build_spectral_table,
    config_energies,
    config_index,
    energy,
    energy_diff,
    group_structure,
    spins_to_str,
    str_to_spins,
)

fields = st.lists(st.floats(0.5, 1.5), min_size=1, max_size=4)


def test_spin_strings_round_trip():
    assert str_to_spins("+-+") == (1, -1, 1)
    assert spins_to_str((1, -1, 1)) == "+-+"
    with pytest.raises(InvalidInputError):
        str_to_spins("+0")


def test_canonical_order_matches_index():
    configs = all_configs(3)
    assert configs[0].tolist() == [1, 1, 1]
    assert configs[-1].tolist() == [-1, -1, -1]
    for k, c in enumerate(configs):
        assert config_index(c) == k


def test_energy_literal():
    j = np.array([[0.0, 0.3], [0.1, 0.2]])
    params = make_params([1.0, 2.0], j=j)
    sigma = (1, -1)
    # sum_ij J_ij s_i s_j + B.s
    expected = 0.0 - 0.3 - 0.1 + 0.2 + (1.0 - 2.0)
    assert energy(params, sigma) == pytest.approx(expected)
    assert energy_diff(params, sigma, (1, 1)) == pytest.approx(expected - energy(params, (1, 1)))
    with pytest.raises(InvalidInputError):
        energy(params, (1, 0))


def test_params_validation():
    with pytest.raises(InvalidInputError):
        make_params([-1.0])
    with pytest.raises(InvalidInputError):
        make_params([1.0], beta=0.0)
    with pytest.raises(InvalidInputError):
        make_params([1.0, 1.0], j=np.zeros((3, 3)))
    params = make_params([1.0])
    with pytest.raises(ValueError):
        params.b_fields[0] = 2.0


def test_interacting_ignores_diagonal():
    assert not make_params([1.0, 1.2], j=np.diag([0.3, 0.4])).interacting
    assert make_params([1.0, 1.2], j=np.array([[0, 0.1], [0, 0]])).interacting


@settings(max_examples=50, deadline=None)
@given(b=fields)
def test_groups_partition_all_pairs(b):
    params = make_params(b)
    try:
        table = build_spectral_table(params)
    except AmbiguousGroupingError:
        return
    n = len(b)
    pairs = set()
    for g in table.groups:
        pairs.update(zip(g.sigma_idx.tolist(), g.tau_idx.tolist()))
        assert g.size == len(set(zip(g.sigma_idx.tolist(), g.tau_idx.tolist())))
    assert len(pairs) == 4**n
    assert sum(g.size for g in table.groups) == 4**n


@settings(max_examples=50, deadline=None)
@given(b=fields)
def test_spectrum_antisymmetric(b):
    try:
        table = build_spectral_table(make_params(b))
    except AmbiguousGroupingError:
        return
    values = np.array([g.e_value for g in table.groups])
    assert np.allclose(np.sort(values), np.sort(-values), atol=1e-12)
    for g in table.groups:
        mirror = table.groups[table.group_index(-g.e_value)]
        assert mirror.size == g.size


def test_structure_of_generic_groups():
    params = make_params([0.61, 0.93, 1.37])
    table = build_spectral_table(params)
    assert table.generic
    zero = table.groups[table.zero_group()]
    assert zero.size == 8 and zero.n0 == 3 and zero.e0 == 0
    for g in table.groups:
        n0, mu, e0, ham = group_structure(g)
        assert g.size == 2**n0
        assert n0 + ham // 2 == 3
        assert len(mu) == n0
        assert g.e_value == pytest.approx(2 * sum(
            b * d / 2 for b, d in zip(params.b_fields, np.array(g.members[0][0]) - g.members[0][1])
        ))


def test_members_are_lexicographic():
    table = build_spectral_table(make_params([0.7, 1.3]))
    for g in table.groups:
        keys = list(zip(g.sigma_idx.tolist(), g.tau_idx.tolist()))
        assert keys == sorted(keys)


def test_non_generic_fields_flagged():
    table = build_spectral_table(make_params([1.0, 1.0]))
    assert not table.generic
    assert any(w.startswith("generic=false") for w in table.warnings)
    mixed = [g for g in table.groups if not g.pattern_consistent]
    assert mixed
    with pytest.raises(GenericityError):
        group_structure(mixed[0])


def test_ambiguous_tolerance_rejected():
    with pytest.raises(AmbiguousGroupingError):
        build_spectral_table(make_params([1.0, 1.3]), tol=0.5)


def test_resource_cap():
    with pytest.raises(ResourceLimitError):
        build_spectral_table(make_params(np.linspace(0.5, 1.5, 5)), max_n=4)


def test_negative_margin_warning():
    table = build_spectral_table(make_params([0.5, 0.5 + 1e-3], lambda1=0.1))
    assert any("margin" in w for w in table.warnings)


def test_interacting_generic_groups_are_simple():
    rng = np.random.default_rng(3)
    j = np.triu(rng.uniform(-0.3, 0.3, (3, 3)), 1)
    table = build_spectral_table(make_params(rng.uniform(0.5, 1.5, 3), j=j))
    assert table.generic
    for g in table.groups:
        if abs(g.e_value) > table.tol:
            assert g.size == 1


def test_config_energies_consistent():
    params = make_params([0.7, 1.1, 1.4], j=np.array([[0, 0.2, 0], [0, 0, 0.1], [0.3, 0, 0]]))
    configs, energies = config_energies(params)
    for c, e in zip(configs, energies):
        assert energy(params, c) == pytest.approx(e)
    assert len(list(itertools.product((1, -1), repeat=3))) == configs.shape[0]


def test_worked_group_example():
    params = make_params([0.61, 0.93, 1.37])
    table = build_spectral_table(params)
    sigma, tau = (1, 1, -1), (-1, 1, -1)
    s, t = config_index(sigma), config_index(tau)
    g = next(g for g in table.groups if s in g.sigma_idx[g.tau_idx == t])
    assert group_structure(g) == (2, (2, 3), 2, 2)


def test_extreme_and_zero_groups():
    params = make_params([0.61, 0.93, 1.37])
    table = build_spectral_table(params)
    top = table.groups[-1]
    assert top.e_value == pytest.approx(2 * sum(params.b_fields))
    assert top.n0 == 0 and top.mu == () and top.size == 1
    zero = table.groups[table.zero_group()]
    assert zero.mu == (1, 2, 3)


def test_single_site_gap():
    assert build_spectral_table(make_params([0.8])).gap == pytest.approx(1.6)


def test_ring_spectrum_is_lattice():
    n, j = 4, 0.25
    ring = np.zeros((n, n))
    for k in range(n):
        ring[k, (k + 1) % n] = j
    table = build_spectral_table(make_params(np.zeros(n), j=ring))
    values = np.array([g.e_value for g in table.groups])
    steps = np.round(values / j, 9)
    assert np.all(steps == np.round(steps))
    # with +-1 spins each bond changes by 2J and flips come in pairs
    assert table.gap == pytest.approx(4 * j)
