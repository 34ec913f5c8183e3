from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import comb

from oracles import brute_overlap_1d, brute_paths_1d, environment_1d
from polymerlab.disorder import BernoulliPM, Gaussian, sample_row
from polymerlab.errors import BudgetExceeded, Undefined
from polymerlab.lattice import (EndpointField, PolymerStepper, admissible_steps, diamond_sites,
                                half_step, iter_fields, mean_square_displacement,
                                replica_overlap, run_polymer, step_endpoint)

G = Gaussian(0, 1)


def _advance(f, beta, seed, n, spec=G):
    for _ in range(n):
        f = step_endpoint(f, spec, beta, seed)
    return f


def test_one_step_example():
    beta, seed = 0.7, 42
    f = step_endpoint(EndpointField.initial(1), G, beta, seed)
    a, b = sample_row(G, seed, 1, [[1], [-1]])
    ea, eb = math.exp(beta * a), math.exp(beta * b)
    assert f.mass_at((1,)) == pytest.approx(ea / (ea + eb), rel=1e-14)
    assert f.log_Z == pytest.approx(math.log((ea + eb) / 2), rel=1e-14)


def test_beta_zero_is_srw_smoothing():
    f = _advance(EndpointField.initial(2), 0.0, 3, 5)
    g = half_step(_advance(EndpointField.initial(2), 0.0, 3, 4))
    assert f.log_Z == 0.0
    assert np.allclose(f.masses, g.masses, atol=1e-15)


@pytest.mark.parametrize("seed", range(10))
def test_brute_force_paths(seed):
    for n in (1, 4, 8):
        env = environment_1d(G, seed, n)
        ref_logZ, ref_f = brute_paths_1d(env, 1.3, n)
        f = _advance(EndpointField.initial(1), 1.3, seed, n)
        assert abs(f.log_Z - ref_logZ) < 1e-9
        for x, m in ref_f.items():
            assert abs(f.mass_at((x,)) - m) < 1e-9
        assert abs(f.total() - 1.0) < 1e-10


def test_stepper_matches_step_endpoint():
    d, beta, seed = 2, 0.9, 5
    f = EndpointField.initial(d)
    for i, coords, ms in iter_fields(d, beta, G, 12, seed):
        if i > 0:
            f = step_endpoint(f, G, beta, seed)
        dense = {tuple(c): m for c, m in zip(coords.tolist(), ms)}
        ref = {tuple(c): m for c, m in zip(*[a.tolist() for a in f.sparse()])}
        assert dense.keys() == ref.keys()
        assert max(abs(dense[k] - ref[k]) for k in ref) < 1e-13


def test_overlap_examples():
    assert replica_overlap(EndpointField.initial(3)) == 1.0
    f = EndpointField.from_sites(1, 4, {(x,): 0.2 for x in (-4, -2, 0, 2, 4)})
    assert replica_overlap(f) == pytest.approx(0.2)
    env = environment_1d(G, 8, 4)
    f = _advance(EndpointField.initial(1), 1.0, 8, 4)
    assert replica_overlap(f) == pytest.approx(brute_overlap_1d(env, 1.0, 4), abs=1e-12)


def test_half_step_delta():
    g = half_step(EndpointField.initial(1))
    assert g.mass_at((1,)) == 0.5 and g.mass_at((-1,)) == 0.5 and g.mass_at((0,)) == 0.0


@given(st.integers(1, 3), st.integers(0, 2 ** 32), st.floats(0.1, 2.0), st.integers(1, 6))
def test_half_step_sandwich(d, seed, beta, n):
    f = _advance(EndpointField.initial(d), beta, seed, n)
    g = half_step(f)
    two_d = 2 * d
    assert g.total() == pytest.approx(1.0, abs=1e-12)
    assert f.masses.max() / two_d <= g.masses.max() + 1e-15
    assert g.masses.max() <= f.masses.max() + 1e-15
    sf, sg = replica_overlap(f), replica_overlap(g)
    assert sf / two_d <= sg + 1e-15 and sg <= sf + 1e-15


@given(st.integers(1, 3), st.integers(0, 2 ** 32), st.floats(0.0, 3.0), st.integers(1, 8))
def test_normalization_and_parity(d, seed, beta, n):
    f = _advance(EndpointField.initial(d), beta, seed, n)
    assert abs(f.total() - 1.0) < 1e-10
    assert f.parity_violation() == 0.0
    assert np.all(f.masses >= 0)


def test_msd():
    for d in (1, 2, 3):
        f = _advance(EndpointField.initial(d), 0.0, 0, 7)
        assert mean_square_displacement(f) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(Undefined):
        mean_square_displacement(EndpointField.initial(1))
    f = EndpointField.from_sites(2, 6, {(0, 0): 1.0})
    assert mean_square_displacement(f) == 0.0


def test_beta_zero_trajectory():
    r = run_polymer(1, 0.0, G, 100, 9)
    assert np.all(r.F == 0.0)
    central = [comb(i, i // 2) / 2.0 ** i for i in range(101)]
    assert np.allclose(r.max_atom, central, rtol=1e-12)
    assert np.allclose(r.msd[1:], 1.0, atol=1e-12)


@pytest.mark.parametrize("d,beta", [(1, 1.0), (2, 0.6), (3, 0.3)])
def test_telescoping(d, beta):
    r = run_polymer(d, beta, G, 40, 1)
    assert r.telescoping_error() < 1e-8
    assert r.F[0] == 0.0


def test_determinism_and_serialization():
    a = run_polymer(2, 0.8, BernoulliPM(0.4), 25, 17, eps_grid=(0.1, 0.01))
    b = run_polymer(2, 0.8, BernoulliPM(0.4), 25, 17, eps_grid=(0.1, 0.01))
    assert a.to_csv() == b.to_csv()
    lines = a.to_csv().splitlines()
    assert lines[0] == "step,F,log_ratio,max_atom,overlap,msd,eps_mass@1e-1,eps_mass@1e-2"
    assert len(lines) == 27
    rows = [json.loads(x) for x in a.to_ndjson().splitlines()]
    assert rows[0]["msd"] is None and rows[-1]["log_ratio"] is None
    assert rows[5]["F"] == a.F[5]


def test_eps_mass_and_overlap_columns():
    r = run_polymer(1, 1.5, G, 30, 4, eps_grid=(1e-1, 1e-2, 1e-3))
    assert np.all(np.diff(r.eps_mass, axis=1) >= -1e-15)  # smaller eps captures more
    assert np.all(r.overlap <= r.max_atom + 1e-15)
    assert np.all(r.max_atom ** 2 <= r.overlap + 1e-15)


def test_budget():
    # parity-correct sites of the l1 diamond
    assert diamond_sites(1, 5) == 6
    assert diamond_sites(2, 2) == 9
    assert diamond_sites(3, 1) == 6
    n3 = admissible_steps(3, 64)
    with pytest.raises(BudgetExceeded) as e:
        PolymerStepper(3, 0.1, G, n3 + 1, 0, budget_mb=64)
    assert e.value.admissible == n3
    PolymerStepper(3, 0.1, G, n3, 0, budget_mb=64)


def test_pruning_is_small_perturbation():
    exact = run_polymer(2, 0.4, G, 60, 2)
    pruned = run_polymer(2, 0.4, G, 60, 2, prune_below=1e-20)
    assert pruned.pruned_mass < 1e-15
    assert np.allclose(exact.F, pruned.F, atol=1e-12)
    assert np.allclose(exact.max_atom, pruned.max_atom, atol=1e-12)


def test_geometry_and_snapshots():
    r = run_polymer(1, 2.0, G, 60, 3, thinning=10, delta_grid=(0.5,), K_grid=(0, 20))
    assert sorted(r.snapshots) == [0, 10, 20, 30, 40, 50, 60]
    assert r.snapshots[0].n_atoms == 1 and r.snapshots[0].total == 1.0
    assert r.W_delta.shape == (61, 1)
    g20 = r.in_G(0.5, 20)
    assert g20[0] and g20.dtype == bool
    assert np.all(r.in_G(0.5, 0) <= g20)
    assert np.all(r.favorite_mass[:, 0] <= r.favorite_mass[:, 1] + 1e-15)
