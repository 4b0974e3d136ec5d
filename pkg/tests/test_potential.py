import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from anderson_edge.errors import BumpOutsideCell, EmptySpec, ExplosionGuard
from anderson_edge.operators import CellGrid
from anderson_edge.potential import (
    DisorderConfiguration,
    PeriodicBackground,
    build_single_site,
    canonical_translate,
    constant_config,
    enumerate_periodic_configs,
    periodic_config,
    sample_random_config,
)


def mobius(n):
    out, m, p = 1, n, 2
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            out = -out
        p += 1
    return -out if m > 1 else out


def lyndon_count(k, n):
    return sum(mobius(d) * k ** (n // d) for d in range(1, n + 1) if n % d == 0) // n


def test_grid_sum_matches_quadrature():
    site = build_single_site([((-0.2,), 0.17, 1.7), ((0.22,), 0.1, -0.6)], 1, 1 / 256)
    exact = sum(
        quad(lambda x, b=b: b.amplitude * np.exp(-1.0 / (1.0 - ((x - b.center[0]) / b.radius) ** 2)),
             b.center[0] - b.radius, b.center[0] + b.radius, epsabs=1e-14, epsrel=1e-13)[0]
        for b in site.bumps
    )
    grid = CellGrid(1, (1,), 256)
    assert abs(grid.spacing * site(grid.points).sum() - exact) < 1e-8


def test_bump_profile_and_support():
    site = build_single_site([((0.1,), 0.2, 3.0)])
    assert site(np.array([[0.1]]))[0] == pytest.approx(3.0 * np.exp(-1.0))
    assert site(np.array([[0.3]]))[0] == 0.0
    assert site(np.array([[-0.1001]]))[0] == 0.0
    assert site.positive_part(np.array([[0.1]]))[0] > 0
    assert site.negative_part(np.array([[0.1]]))[0] == 0


def test_bump_touching_boundary_rejected():
    with pytest.raises(BumpOutsideCell, match="bump 1"):
        build_single_site([((0.0,), 0.1, 1.0), ((0.3,), 0.2, 1.0)])
    with pytest.raises(BumpOutsideCell):
        build_single_site([((0.0, 0.35), 0.1, 1.0)], d=2, spacing=0.1)
    with pytest.raises(EmptySpec):
        build_single_site([])


def test_sign_detection():
    grid = CellGrid(1, (1,), 64)
    pos = build_single_site([((0.0,), 0.2, 1.0)])
    neg = pos.scaled(-1.0)
    mixed = build_single_site([((-0.2,), 0.1, 1.0), ((0.2,), 0.1, -1.0)])
    assert pos.sign_on(pos(grid.points)) == 1
    assert neg.sign_on(neg(grid.points)) == -1
    assert mixed.sign_on(mixed(grid.points)) == 0


def test_background_evaluation():
    bg = PeriodicBackground.cosine(2.0, 1, constant=0.5)
    np.testing.assert_allclose(bg(np.array([[0.0], [0.5], [0.25]])), [2.5, -1.5, 0.5], atol=1e-15)
    bg2 = PeriodicBackground(2, 0.0, ((1.0, (1, -1), 0.0),))
    assert bg2(np.array([[0.3, 0.3]]))[0] == pytest.approx(1.0)
    assert bg.shifted(1.0)(np.array([[0.0]]))[0] == pytest.approx(3.5)


@pytest.mark.parametrize("k,maxp", [(2, 4), (3, 3), (3, 4), (4, 2)])
def test_necklace_count_matches_lyndon_formula(k, maxp):
    letters = list(np.linspace(0.5, 1.5, k))
    configs = enumerate_periodic_configs(letters, maxp)
    assert len(configs) == sum(lyndon_count(k, n) for n in range(1, maxp + 1))
    assert len(set(configs)) == len(configs)


def brute_force_classes(letters, maxp):
    """Orbits of primitive rectangular arrays under lattice translations."""
    classes = set()
    for per in itertools.product(*(range(1, p + 1) for p in maxp)):
        for tup in itertools.product(letters, repeat=int(np.prod(per))):
            arr = np.array(tup).reshape(per)
            reducible = False
            for axis, p in enumerate(per):
                for q in range(1, p):
                    if p % q == 0:
                        sub = np.take(arr, range(q), axis=axis)
                        reps = [1] * len(per)
                        reps[axis] = p // q
                        if np.array_equal(np.tile(sub, reps), arr):
                            reducible = True
            if reducible:
                continue
            orbit = frozenset(
                tuple(np.roll(arr, s, axis=tuple(range(arr.ndim))).ravel())
                for s in itertools.product(*(range(p) for p in per))
            )
            classes.add((per, orbit))
    return classes


@pytest.mark.parametrize("letters,maxp", [([0.5, 1.5], (2, 2)), ([0.5, 1.0, 1.5], (2, 2)), ([0.5, 1.5], (3, 2))])
def test_2d_enumeration_matches_brute_force(letters, maxp):
    configs = enumerate_periodic_configs(letters, maxp, d=2)
    ours = {
        (c.period, frozenset(tuple(np.roll(c.values, s, axis=(0, 1)).ravel()) for s in itertools.product(*(range(p) for p in c.period))))
        for c in configs
    }
    assert ours == brute_force_classes(letters, maxp)
    assert len(configs) == len(ours)


def test_enumeration_order_and_content():
    configs = enumerate_periodic_configs([0.5, 1.0, 1.5], 3)
    assert [c.label() for c in configs[:3]] == ["(0.5)", "(1)", "(1.5)"]
    assert all(c.kind == "constant" for c in configs[:3])
    sizes = [int(np.prod(c.period)) for c in configs]
    assert sizes == sorted(sizes)


def test_enumeration_guards():
    with pytest.raises(EmptySpec):
        enumerate_periodic_configs([], 2)
    with pytest.raises(ValueError):
        enumerate_periodic_configs([1.0], 2)
    assert len(enumerate_periodic_configs([1.0], 3, bounds=(0.5, 1.5))) == 1
    with pytest.raises(ExplosionGuard):
        enumerate_periodic_configs(np.linspace(0.5, 1.5, 10), 8, cap=1000)


def test_configuration_validation():
    with pytest.raises(ValueError):
        DisorderConfiguration("periodic", (2,), np.array([0.4, 1.0]), (0.5, 1.5))
    with pytest.raises(ValueError):
        DisorderConfiguration("periodic", (3,), np.array([0.5, 1.0]), (0.5, 1.5))
    with pytest.raises(ValueError):
        DisorderConfiguration("constant", (2,), np.array([0.5, 0.5]), (0.5, 1.5))
    c = constant_config(0.5, (0.5, 1.5))
    assert c.is_constant(0.5) and not c.is_constant(1.5)
    with pytest.raises(ValueError):
        c.values[0] = 1.0


def test_tiling_and_shifts():
    c = periodic_config([0.5, 1.5], (0.5, 1.5))
    np.testing.assert_array_equal(c.tiled((6,)), [0.5, 1.5] * 3)
    np.testing.assert_array_equal(c.shifted_from_lower(), [0.0, 1.0])
    np.testing.assert_array_equal(c.shifted_from_upper(), [-1.0, 0.0])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([0.5, 1.0, 1.5]), min_size=1, max_size=6), st.integers(0, 5))
def test_canonical_translate_is_translation_invariant(vals, shift):
    arr = np.array(vals)
    assert np.array_equal(canonical_translate(arr), canonical_translate(np.roll(arr, shift)))
    assert tuple(canonical_translate(arr)) <= tuple(arr)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 20))
def test_random_boxes_are_seeded_and_bounded(seed, size):
    a = sample_random_config(seed, (size,), (0.5, 1.5))
    b = sample_random_config(seed, (size,), (0.5, 1.5))
    assert a == b
    assert np.all((a.values >= 0.5) & (a.values <= 1.5))
    c = sample_random_config(seed, (size,), (0.5, 1.5), alphabet=[0.5, 1.5])
    assert set(c.values.tolist()) <= {0.5, 1.5}
