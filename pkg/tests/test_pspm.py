from __future__ import annotations

import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import brute_window
from polymerlab.errors import ApproximateResult
from polymerlab.metric import distance_exact, random_pspm
from polymerlab.pspm import (PSPM, atom_functionals, canonicalize, equivalent, favorite_mass,
                             geometry_functionals, part_functionals, set_diameter,
                             window_diameter, window_diameter_greedy)

seeds = st.integers(0, 2 ** 32)


def rand(seed, d=1, **kw):
    return random_pspm(np.random.default_rng(seed), d, **kw)


def shuffle_rep(f: PSPM, rng) -> PSPM:
    """Another representative: random per-part translations and relabeling."""
    g = f
    for p in f.parts:
        g = g.translated(p.label, tuple(int(x) for x in rng.integers(-9, 10, f.d)))
    labels = [p.label for p in f.parts]
    new = rng.permutation(np.arange(len(labels) + 3))[: len(labels)]
    return g.relabeled({a: int(b) for a, b in zip(labels, new)})


def test_construction_invariants():
    with pytest.raises(ValueError):
        PSPM.from_parts(1, [{(0,): 0.7}, {(0,): 0.4}])
    with pytest.raises(ValueError):
        PSPM.from_parts(1, [{(0,): -0.1}])
    with pytest.raises(ValueError):
        PSPM.from_parts(1, [{(0,): 0.5}, {(1,): 0.1}], labels=[2, 2])
    f = PSPM.from_parts(1, [{(0,): 0.5, (3,): 0.0}, {}])
    assert f.n_atoms == 1 and len(f.parts) == 1
    assert PSPM.zero(2).total == 0 and PSPM.one(2).total == 1


def test_canonical_examples():
    f = PSPM.from_parts(1, [{(0,): 0.3, (2,): 0.2}, {(5,): 0.4}])
    assert canonicalize(f) == canonicalize(f.translated(0, (7,)))
    assert canonicalize(f) == canonicalize(f.relabeled({0: 1, 1: 0}))
    a = PSPM.from_parts(1, [{(0,): 1.0}])
    b = PSPM.from_parts(1, [{(0,): 0.5, (1,): 0.5}])
    assert canonicalize(a) != canonicalize(b)
    assert distance_exact(a, b) > 0


@given(seeds, st.integers(1, 3))
def test_canonical_idempotent_and_invariant(seed, d):
    rng = np.random.default_rng(seed)
    f = rand(seed, d)
    c = canonicalize(f)
    assert canonicalize(c) == c
    assert canonicalize(shuffle_rep(f, rng)) == c
    assert equivalent(f, shuffle_rep(f, rng))


@given(seeds, st.integers(1, 3))
def test_functionals_factor_through_classes(seed, d):
    rng = np.random.default_rng(seed)
    f = rand(seed, d, max_atoms=8)
    g = shuffle_rep(f, rng)
    for eps in (0.5, 0.1, 0.01):
        assert atom_functionals(f, eps) == atom_functionals(g, eps)
    assert part_functionals(f) == part_functionals(g)
    for delta in (0.2, 0.6):
        for K in (0, 3, 10):
            assert geometry_functionals(f, delta, K) == geometry_functionals(g, delta, K)


def test_atom_examples():
    one = atom_functionals(PSPM.one(), 0.5)
    assert (one.total, one.max_atom, one.eps_mass, one.indicator) == (1, 1, 1, 1)
    u = PSPM.from_parts(1, [{(x,): 0.1 for x in range(10)}])
    a = atom_functionals(u, 0.1)
    assert a.eps_mass == 0 and a.indicator == 1
    z = atom_functionals(PSPM.zero(), 0.3)
    assert (z.total, z.max_atom, z.eps_mass, z.indicator) == (0, 0, 0, 0)
    with pytest.raises(ValueError):
        atom_functionals(u, 1.0)


@given(seeds)
def test_eps_mass_monotone(seed):
    f = rand(seed, 2, max_atoms=10)
    grid = [0.9, 0.5, 0.2, 0.1, 0.05, 0.01, 1e-4, 1e-9]
    vals = [atom_functionals(f, e).eps_mass for e in grid]
    assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(f.total, abs=1e-12)


def test_part_examples():
    p = part_functionals(PSPM.one())
    assert (p.N, p.m, p.Q) == (1, 1.0, math.inf)
    p = part_functionals(PSPM.from_parts(1, [{(0,): 0.5}, {(0,): 0.5}]))
    assert (p.N, p.m, p.Q) == (2, 0.5, 2.0)
    p = part_functionals(PSPM.zero())
    assert (p.N, p.m, p.Q) == (0, 0.0, 0.0)


@given(seeds, st.booleans())
def test_Q_infinite_iff_single_full_part(seed, full):
    f = rand(seed, 1, total=1.0 if full else None)
    p = part_functionals(f)
    single_full = len(f.parts) == 1 and abs(f.total - 1) <= 1e-12
    assert (p.Q == math.inf) == single_full


def test_geometry_examples():
    g = geometry_functionals(PSPM.one(), 0.1, 0)
    assert (g.W_delta, g.in_G, g.favorite_mass) == (0, True, 1.0)
    f = PSPM.from_parts(1, [{(0,): 0.6, (5,): 0.4}])
    assert geometry_functionals(f, 0.5, 0).W_delta == 0
    f = PSPM.from_parts(1, [{(0,): 0.5, (5,): 0.5}])
    assert geometry_functionals(f, 0.3, 0).W_delta == 5
    # G needs a single part of full mass
    two = PSPM.from_parts(1, [{(0,): 0.5}, {(0,): 0.5}])
    g = geometry_functionals(two, 0.6, 10)
    assert g.in_V and not g.in_G


@given(seeds, st.integers(1, 3), st.floats(0.05, 0.95))
def test_window_matches_brute_force(seed, d, delta):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 10))
    coords = rng.integers(-4, 5, size=(n, d))
    coords = np.unique(coords, axis=0)
    ms = rng.dirichlet(np.ones(coords.shape[0]))
    need = 1 - delta
    ref = brute_window(coords, ms, need)
    assert window_diameter(coords, ms, need) == ref
    assert window_diameter_greedy(coords, ms, need) >= ref


@given(seeds)
def test_G_monotone(seed):
    f = rand(seed, 2, max_parts=1, total=1.0, max_atoms=8)
    deltas, Ks = [0.1, 0.3, 0.6, 0.9], [0, 1, 3, 6, 12]
    G = [[geometry_functionals(f, dl, K).in_G for K in Ks] for dl in deltas]
    for i in range(len(deltas)):
        for j in range(len(Ks)):
            if G[i][j]:
                assert all(G[a][b] for a in range(i, len(deltas)) for b in range(j, len(Ks)))


@given(seeds, st.integers(1, 3))
def test_favorite_mass_monotone_and_witness(seed, d):
    rng = np.random.default_rng(seed)
    f = rand(seed, d, max_parts=1, total=1.0, max_atoms=9)
    fav = [favorite_mass(f, K) for K in range(0, 12)]
    assert all(a <= b + 1e-15 for a, b in zip(fav, fav[1:]))
    atoms = f.atoms()
    if not atoms:
        return
    top = max(m for _, m in atoms)
    modes = [x for (_, x), m in atoms if m == top]
    if len(modes) != 1:
        return
    # witness: an l1 ball around the mode carrying mass > 1 - delta
    r = int(rng.integers(0, 5))
    A = [(x, m) for (_, x), m in atoms if sum(abs(a - b) for a, b in zip(x, modes[0])) <= r]
    K = set_diameter(np.array([x for x, _ in A]))
    mass_A = math.fsum(m for _, m in A)
    delta = min(max(1 - mass_A + 1e-9, 1e-6), 1 - 1e-6)
    if geometry_functionals(f, delta, K).in_G:
        assert favorite_mass(f, K) >= 1 - delta


def test_large_part_greedy_flag():
    rng = np.random.default_rng(0)
    coords = {tuple(int(c) for c in rng.integers(-20, 21, 2)) for _ in range(200)}
    f = PSPM.from_parts(2, [{x: 1.0 / len(coords) for x in coords}])
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        g = geometry_functionals(f, 0.5, 10)
    assert g.approximate and any(issubclass(x.category, ApproximateResult) for x in w)


@given(seeds, st.integers(1, 3))
def test_json_roundtrip(seed, d):
    f = rand(seed, d)
    text = f.to_json()
    obj = json.loads(text)
    assert set(obj) == {"d", "parts"}
    assert PSPM.from_json(text) == f


def test_top_atoms_and_scaling():
    f = PSPM.from_parts(1, [{(0,): 0.4, (1,): 0.1}, {(0,): 0.3, (4,): 0.2}])
    t = f.top_atoms(2)
    assert t.n_atoms == 2 and t.total == pytest.approx(0.7)
    assert f.scaled(0.5).total == pytest.approx(0.5)
    assert f.scaled(0.0).n_atoms == 0
