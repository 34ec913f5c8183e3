"""Independent brute-force references used by the tests."""

from __future__ import annotations

import itertools
import math

import numpy as np

from polymerlab.disorder import sample_row
from polymerlab.metric import Isometry, d_phi
from polymerlab.pspm import PSPM


def environment_1d(spec, seed: int, n: int) -> dict:
    """X_{i,x} for 1 <= i <= n and |x| <= i, read through sample_row."""
    env = {}
    for i in range(1, n + 1):
        sites = list(range(-i, i + 1))
        vals = sample_row(spec, seed, i, [[x] for x in sites])
        env.update({(i, x): float(v) for x, v in zip(sites, vals)})
    return env


def brute_paths_1d(env: dict, beta: float, n: int) -> tuple[float, dict]:
    """(log Z_n, f_n) by enumerating all 2^n nearest-neighbor paths."""
    weights = {}
    for steps in itertools.product((-1, 1), repeat=n):
        x, energy = 0, 0.0
        for i, s in enumerate(steps, 1):
            x += s
            energy += env[(i, x)]
        weights.setdefault(x, []).append(beta * energy)
    all_e = [e for es in weights.values() for e in es]
    top = max(all_e)
    Z = math.fsum(math.exp(e - top) for e in all_e)
    log_Z = top + math.log(Z) - n * math.log(2)
    f = {x: math.fsum(math.exp(e - top) for e in es) / Z for x, es in weights.items()}
    return log_Z, f


def brute_overlap_1d(env: dict, beta: float, n: int) -> float:
    """Probability two independent polymers share an endpoint, via path pairs."""
    paths = []
    for steps in itertools.product((-1, 1), repeat=n):
        x, energy = 0, 0.0
        for i, s in enumerate(steps, 1):
            x += s
            energy += env[(i, x)]
        paths.append((x, math.exp(beta * energy)))
    Z = math.fsum(w for _, w in paths)
    return math.fsum(w1 * w2 for x1, w1 in paths for x2, w2 in paths if x1 == x2) / Z ** 2


def brute_distance(f: PSPM, g: PSPM) -> float:
    """min of d_phi over every partial injection supp f -> supp g."""
    U = [u for u, _ in f.atoms()]
    V = [v for v, _ in g.atoms()]
    best = math.inf
    for k in range(min(len(U), len(V)) + 1):
        for dom in itertools.combinations(U, k):
            for img in itertools.permutations(V, k):
                best = min(best, d_phi(f, g, Isometry(tuple(zip(dom, img)))))
    return best


def brute_window(coords: np.ndarray, ms: np.ndarray, need: float) -> float:
    """Smallest l1 diameter over all subsets with mass > need."""
    n = ms.shape[0]
    best = math.inf
    for mask in range(1, 1 << n):
        idx = [i for i in range(n) if mask >> i & 1]
        if math.fsum(ms[idx]) > need:
            diam = max((int(np.abs(coords[a] - coords[b]).sum()) for a in idx for b in idx),
                       default=0)
            best = min(best, diam)
    return float(best)


def brute_test_value(k: int, w: dict, f: PSPM) -> float:
    """I(W, f) summing over all k-tuples of atoms in one part."""
    tot = []
    for p in f.parts:
        for tup in itertools.product(p.atoms, repeat=k):
            x1 = tup[0][0]
            offs = tuple(tuple(a - b for a, b in zip(x, x1)) for x, _ in tup[1:])
            if offs in w:
                tot.append(w[offs] * math.prod(m for _, m in tup))
    return math.fsum(tot)
