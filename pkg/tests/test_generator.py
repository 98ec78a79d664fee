import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dasep.configspace import all_configs, index_of
from dasep.generator import (
    GeneratorParams,
    RateMatrix,
    asep_generator,
    global_generator,
    hop_rates,
    local_generator,
    rightward_displacement,
    single_species_reduction,
    validate_generator,
)

GRID = [(q, n) for q in (0.3, 0.5, 0.7) for n in (1, 2, 3, 4)]


def test_params_validation():
    with pytest.raises(ValueError):
        GeneratorParams(1.0, 2)
    with pytest.raises(ValueError):
        GeneratorParams(0.5, 0)
    with pytest.raises(ValueError):
        GeneratorParams(0.5, 1.5)


def test_local_entries():
    g = local_generator(GeneratorParams(0.5, 2))
    assert g[(0, 1), (1, 0)] == pytest.approx(4.0625, rel=1e-15)
    assert g[(1, 2), (2, 1)] == pytest.approx(2.25, rel=1e-15)
    M = g.toarray()
    assert not M[0].any() and not M[15].any()


@pytest.mark.parametrize("q,n", GRID + [(0.9, 3)])
def test_local_is_valid(q, n):
    rep = validate_generator(local_generator(GeneratorParams(q, n)))
    assert rep.passed, rep.as_dict()


def test_negated_rate_fails():
    M = local_generator(GeneratorParams(0.5, 2)).toarray()
    M[1, 4] = -M[1, 4]
    M[1, 1] = -M[1].sum() + M[1, 1]
    assert not validate_generator(M).nonnegative


def test_non_conserving_rate_fails():
    M = local_generator(GeneratorParams(0.5, 2)).toarray()
    M[1, 2] = 1.0
    M[1, 1] -= 1.0
    rep = validate_generator(M)
    assert not rep.conserves and (1, 2) in rep.conservation_violations


@pytest.mark.parametrize("q,n", GRID)
def test_detailed_balance_ratio_structure(q, n):
    # rate(a->b) / rate(b->a) = q^{-2 * displacement}
    M = local_generator(GeneratorParams(q, n)).toarray()
    pairs = [(a, b) for a in range(4) for b in range(4)]
    for i, a in enumerate(pairs):
        for j, b in enumerate(pairs):
            if i != j and M[i, j] > 0:
                assert M[j, i] > 0
                d = rightward_displacement(a, b)
                assert M[i, j] / M[j, i] == pytest.approx(q ** (-2 * d), rel=1e-12)


@pytest.mark.parametrize("q,n", [(q, n) for q, n in GRID if n >= 2])
def test_simultaneous_jump_present(q, n):
    g = local_generator(GeneratorParams(q, n))
    assert g[(3, 0), (0, 3)] > 0 and g[(0, 3), (3, 0)] > 0


def test_global_L2_equals_local():
    p = GeneratorParams(0.7, 3)
    assert np.array_equal(global_generator(2, p).toarray(), local_generator(p).toarray())


def test_global_embedding_entry():
    p = GeneratorParams(0.5, 2)
    g = global_generator(3, p)
    assert g["013", "031"] == local_generator(p)[(1, 3), (3, 1)]
    assert g["013", "031"] == pytest.approx(0.5 * p.speed, rel=1e-15)


def test_global_embedding_exhaustive_L3():
    p = GeneratorParams(0.3, 2)
    loc = local_generator(p).toarray()
    G = global_generator(3, p).toarray()
    for a in all_configs(3):
        for b in all_configs(3):
            if a == b:
                continue
            diff = [x for x in range(3) if a.sites[x] != b.sites[x]]
            i, j = index_of(a), index_of(b)
            if not diff or diff[-1] - diff[0] > 1:
                assert G[i, j] == 0
                continue
            x = diff[0] if diff[0] < 2 else 1
            if any(a.sites[y] != b.sites[y] for y in range(3) if y not in (x, x + 1)):
                assert G[i, j] == 0
                continue
            if len(diff) == 1:
                # a single differing site can be covered by two bonds
                bonds = [y for y in (diff[0] - 1, diff[0]) if 0 <= y <= 1]
            else:
                bonds = [x]
            expected = sum(loc[4 * a.sites[y] + a.sites[y + 1], 4 * b.sites[y] + b.sites[y + 1]]
                           for y in bonds)
            assert G[i, j] == pytest.approx(expected, abs=0)


def test_global_conservation_and_zero_vector():
    p = GeneratorParams(0.5, 2)
    for L in (3, 4):
        g = global_generator(L, p)
        assert validate_generator(g).passed
        e = np.zeros(4**L)
        e[0] = 1.0
        assert not np.any(g.matrix @ e)


def test_storage_policy_and_guard():
    p = GeneratorParams(0.5, 2)
    assert not global_generator(3, p).is_sparse
    assert global_generator(4, p).is_sparse
    with pytest.raises(ValueError):
        global_generator(11, p)
    with pytest.raises(ValueError):
        global_generator(1, p)


def test_json_listing():
    g = local_generator(GeneratorParams(0.5, 2))
    js = g.to_json()
    assert js["dim"] == 16
    assert [1, 4, 4.0625] in js["entries"]


def test_hop_rates_and_reduction_example():
    p = GeneratorParams(0.5, 2)
    right, left = hop_rates(p)
    assert right == pytest.approx(16.25) and left == pytest.approx(4.0625)
    assert right > left


def test_reduction_direction_read_from_rows():
    p = GeneratorParams(0.5, 2)
    g = local_generator(p)
    right, left = hop_rates(p)
    assert g[(1, 0), (0, 1)] == right
    assert g[(0, 1), (1, 0)] == left


@pytest.mark.parametrize("L", [2, 3, 4])
@pytest.mark.parametrize("species", [1, 2])
@pytest.mark.parametrize("q,n", GRID)
def test_single_species_reduction_exact(L, species, q, n):
    restricted, rep = single_species_reduction(L, GeneratorParams(q, n), species)
    assert rep.max_deviation == 0.0
    assert isinstance(restricted, RateMatrix)


def test_asep_reference_is_generator():
    M = asep_generator(4, 2.0, 0.5)
    assert np.abs(M.sum(axis=1)).max() < 1e-15


@given(st.lists(st.integers(0, 3), min_size=2, max_size=5))
def test_displacement_zero_for_identity(sites):
    assert rightward_displacement(sites, sites) == 0


def test_displacement_example():
    assert rightward_displacement("03", "30") == -2
    with pytest.raises(ValueError):
        rightward_displacement("10", "00")
