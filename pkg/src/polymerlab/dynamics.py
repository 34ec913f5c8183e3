"""The update map, the energy functional R, and the iteration from the point mass.

For f in the PSPM space and fresh i.i.d. weights Y_u on the neighborhood of
its support,

    F(u) = sum_{v~u} f(v) e^{beta Y_u} / (sum_w sum_{v~w} f(v) e^{beta Y_w}
                                           + 2d (1 - |f|) e^{c(beta)})
    R(f) = E log(sum_w sum_{v~w} f(v) e^{beta Y_w} + 2d (1 - |f|) e^{c(beta)}) - log 2d.

The missing mass 1 - |f| is treated as spread out at infinity, where it
contributes its expected weight e^{c(beta)} exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .disorder import (DisorderSpec, Gaussian, Uniform, draw, log_mgf, support_atoms,
                       validate_beta)
from .lattice import DEFAULT_BUDGET_MB, iter_fields
from .pspm import MASS_TOL, PSPM
from .rng import absorb, as_seed, derive, split_u64, step_key

DEFAULT_REPLICAS = 4096


@dataclass(frozen=True)
class EnergyEstimate:
    mean: float
    stderr: float
    replicas: int
    analytic: float | None = None

    def __post_init__(self):
        if self.stderr < 0 or self.replicas < 1:
            raise ValueError("stderr must be nonnegative and replicas positive")


def _estimate(values: np.ndarray, analytic: float | None = None) -> EnergyEstimate:
    n = values.shape[0]
    mean = float(np.sum(values) / n)
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EnergyEstimate(mean=mean, stderr=se, replicas=n, analytic=analytic)


def _neighbor_sums(pts: np.ndarray, ms: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    shifts = np.zeros((2 * d, d + 1), np.int64)
    for k in range(d):
        shifts[2 * k, k + 1] = 1
        shifts[2 * k + 1, k + 1] = -1
    nb = (pts[:, None, :] + shifts[None, :, :]).reshape(-1, d + 1)
    sites, inv = np.unique(nb, axis=0, return_inverse=True)
    w = np.zeros(sites.shape[0])
    np.add.at(w, inv.ravel(), np.repeat(ms, 2 * d))
    return sites, w


def neighborhood(f: PSPM) -> tuple[np.ndarray, np.ndarray]:
    """Sites u adjacent to supp f, as rows [label, x1..xd], with w(u) = sum_{v~u} f(v)."""
    atoms = f.atoms()
    if not atoms:
        return np.zeros((0, f.d + 1), np.int64), np.zeros(0)
    pts = np.array([[lab, *x] for (lab, x), _ in atoms], dtype=np.int64)
    return _neighbor_sums(pts, np.array([m for _, m in atoms]), f.d)


def neighborhood_dense(coords: np.ndarray, ms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """:func:`neighborhood` for a single part (label 0) given as arrays."""
    pts = np.concatenate([np.zeros((coords.shape[0], 1), np.int64), coords], axis=1)
    return _neighbor_sums(pts, ms, coords.shape[1])


@njit(cache=True)
def _weights(code, p0, p1, values, cdf, key0, sites, beta, out):
    """out[u] = beta * Y_u for the environment whose step key is ``key0``."""
    for u in range(sites.shape[0]):
        key = key0
        for k in range(sites.shape[1]):
            key = absorb(key, sites[u, k])
        out[u] = beta * draw(code, p0, p1, values, cdf, key)


@njit(cache=True)
def _energy_replicas(code, p0, p1, values, cdf, seed, sites, w, beta, c_beta, missing, two_d,
                     replicas):
    """log-argument of R per replica, rescaled by e^{-c} for stability."""
    out = np.empty(replicas)
    bY = np.empty(sites.shape[0])
    for r in range(replicas):
        s = split_u64(seed, np.uint64(r))
        _weights(code, p0, p1, values, cdf, step_key(s, 0), sites, beta, bY)
        mx = -np.inf
        for u in range(sites.shape[0]):
            if bY[u] - c_beta > mx:
                mx = bY[u] - c_beta
        if sites.shape[0] == 0:
            mx = 0.0
        if mx < 0.0:
            mx = 0.0
        acc = 0.0
        for u in range(sites.shape[0]):
            acc += w[u] * np.exp(bY[u] - c_beta - mx)
        acc += two_d * missing * np.exp(-mx)
        out[r] = c_beta + mx + np.log(acc / two_d)
    return out


def _missing(f: PSPM) -> float:
    m = 1.0 - f.total
    return 0.0 if m < MASS_TOL else m


def update_sample(f: PSPM, spec: DisorderSpec, beta: float, seed: int) -> PSPM:
    """One draw of F given f, with fresh weights keyed by ``seed``."""
    c_beta = validate_beta(spec, beta)
    sites, w = neighborhood(f)
    if sites.shape[0] == 0:
        return PSPM.zero(f.d)
    code, p0, p1, v, c = spec.kernel_args()
    bY = np.empty(sites.shape[0])
    key0 = np.uint64(step_key(np.uint64(as_seed(seed)), 0))
    _weights(code, p0, p1, v, c, key0, sites, float(beta), bY)
    mx = max(float(bY.max()), c_beta)
    num = w * np.exp(bY - mx)
    denom = math.fsum(num) + 2 * f.d * _missing(f) * math.exp(c_beta - mx)
    F = num / denom
    parts: dict[int, dict] = {}
    for row, m in zip(sites, F):
        if m > 0:
            parts.setdefault(int(row[0]), {})[tuple(int(x) for x in row[1:])] = float(m)
    labels = sorted(parts)
    return PSPM.from_parts(f.d, [parts[l] for l in labels], labels)


def log_Z1_reference(spec: DisorderSpec, beta: float, d: int) -> float | None:
    """E log((2d)^-1 sum_{u~0} e^{beta Y_u}) by exact enumeration or quadrature.

    Exact for discrete laws when the 2d-fold enumeration is small, by tensor
    Gauss quadrature for Gaussian and uniform laws in d = 1; None otherwise.
    """
    n = 2 * d
    if beta == 0:
        return 0.0
    atoms = support_atoms(spec)
    if atoms is not None:
        vals, probs = atoms
        k = len(vals)
        if k ** n > 2_000_000:
            return None
        total = []
        # multinomial over how many of the 2d weights take each value
        for counts in _compositions(n, k):
            logp = math.lgamma(n + 1) + sum(c * math.log(p) - math.lgamma(c + 1)
                                           for c, p in zip(counts, probs))
            s = sum(c * math.exp(beta * x) for c, x in zip(counts, vals))
            total.append(math.exp(logp) * math.log(s / n))
        return math.fsum(total)
    if d != 1:
        return None
    if isinstance(spec, Gaussian):
        x, wq = np.polynomial.hermite_e.hermegauss(120)
        y = spec.mean + spec.stddev * x
        wq = wq / wq.sum()
    elif isinstance(spec, Uniform):
        x, wq = np.polynomial.legendre.leggauss(200)
        y = spec.a + (spec.b - spec.a) * (x + 1) / 2
        wq = wq / wq.sum()
    else:
        return None
    e = beta * y
    g = np.logaddexp(e[:, None], e[None, :]) - math.log(2.0)
    return float(np.sum(wq[:, None] * wq[None, :] * g))


def _compositions(n: int, k: int):
    for cuts in itertools.combinations(range(n + k - 1), k - 1):
        prev, out = -1, []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(n + k - 2 - prev)
        yield out


def _is_one(f: PSPM) -> bool:
    return f.n_atoms == 1 and abs(f.total - 1.0) <= MASS_TOL


def energy_values(f: PSPM, spec: DisorderSpec, beta: float, replicas: int, seed: int) -> np.ndarray:
    """Per-replica values whose mean estimates R(f); replica r uses split(seed, r)."""
    if replicas < 1:
        raise ValueError("replicas must be at least 1")
    c_beta = validate_beta(spec, beta)
    if beta == 0:
        return np.zeros(replicas)
    sites, w = neighborhood(f)
    code, p0, p1, v, c = spec.kernel_args()
    return _energy_replicas(code, p0, p1, v, c, np.uint64(as_seed(seed)), sites, w, float(beta),
                            c_beta, _missing(f), float(2 * f.d), int(replicas))


def energy_R(f: PSPM, spec: DisorderSpec, beta: float, replicas: int = DEFAULT_REPLICAS,
             seed: int = 0) -> EnergyEstimate:
    """Monte Carlo estimate of R(f), with the analytic value where one applies."""
    vals = energy_values(f, spec, beta, replicas, seed)
    analytic = None
    if beta == 0:
        analytic = 0.0
    elif f.n_atoms == 0:
        analytic = log_mgf(spec, beta)
    elif _is_one(f):
        analytic = log_Z1_reference(spec, beta, f.d)
    return _estimate(vals, analytic)


# --------------------------------------------------------------------------
# monotonicity along rays


@dataclass
class MonotonicityRow:
    alpha: float
    mean: float
    stderr: float


@dataclass
class MonotonicityReport:
    rows: list[MonotonicityRow]
    # (alpha_i, alpha_j, mean of R(alpha_i f) - R(alpha_j f), paired stderr) for consecutive alphas
    differences: list[tuple[float, float, float, float]]
    replicas: int

    def strictly_decreasing(self, z: float = 3.0) -> bool:
        return all(diff > z * se for _, _, diff, se in self.differences)


def monotonicity_check(f: PSPM, alphas: Sequence[float], spec: DisorderSpec, beta: float,
                       replicas: int = DEFAULT_REPLICAS, seed: int = 0) -> MonotonicityReport:
    """R(alpha f) for each alpha, all on the same environment replicas."""
    if f.n_atoms == 0:
        raise ValueError("f must be nonzero")
    alphas = sorted(float(a) for a in alphas)
    if any(a < 0 or a > 1 for a in alphas):
        raise ValueError("alphas must lie in [0, 1]")
    vals = {a: energy_values(f.scaled(a), spec, beta, replicas, seed) for a in alphas}
    rows = [MonotonicityRow(a, *_mean_se(vals[a])) for a in alphas]
    diffs = []
    for a, b in zip(alphas, alphas[1:]):
        mean, se = _mean_se(vals[a] - vals[b])
        diffs.append((a, b, mean, se))
    return MonotonicityReport(rows=rows, differences=diffs, replicas=replicas)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = x.shape[0]
    return float(np.sum(x) / n), (float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0)


# --------------------------------------------------------------------------
# iteration from the point mass


@dataclass
class IterationResult:
    """R(f_i) estimates (mean over trajectories) and the running Cesaro mean.

    ``cesaro[n-1]`` estimates (1/n) sum_{i<n} E R(f_i); its stderr is across
    independent trajectories.
    """

    steps: list[EnergyEstimate]
    cesaro: list[EnergyEstimate]
    trajectories: int
    replicas: int
    per_trajectory: np.ndarray = field(repr=False, default=None)


def _field_pspm(d: int, coords: np.ndarray, ms: np.ndarray) -> PSPM:
    return PSPM.from_parts(d, [{tuple(int(c) for c in x): float(m) for x, m in zip(coords, ms)}])


def energy_of_field(d: int, coords: np.ndarray, ms: np.ndarray, spec: DisorderSpec, beta: float,
                    replicas: int, seed: int) -> float:
    """Mean over replicas of the R integrand for a dense single-part field."""
    if beta == 0:
        return 0.0
    c_beta = log_mgf(spec, beta)
    sites, w = neighborhood_dense(coords, ms)
    missing = 1.0 - math.fsum(ms)
    missing = 0.0 if missing < MASS_TOL else missing
    code, p0, p1, v, c = spec.kernel_args()
    vals = _energy_replicas(code, p0, p1, v, c, np.uint64(as_seed(seed)), sites, w, float(beta),
                            c_beta, missing, float(2 * d), int(replicas))
    return float(np.sum(vals) / replicas)


def iterate_from_point(spec: DisorderSpec, beta: float, d: int, n_steps: int, seed: int, *,
                       trajectories: int = 64, replicas: int = 64, prune_below: float = 0.0,
                       budget_mb: float = DEFAULT_BUDGET_MB) -> IterationResult:
    """Estimate R(f_i), i < n, along independent lattice trajectories.

    Trajectory j runs the recursion in environment ``derive(seed, 0, j)``; the
    R estimate at step i uses ``replicas`` fresh environments derived from
    ``derive(seed, 1, j, i)``, independent of the trajectory's own.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    validate_beta(spec, beta)
    per = np.zeros((trajectories, n_steps))
    for j in range(trajectories):
        env = derive(seed, 0, j)
        for i, coords, ms in iter_fields(d, beta, spec, n_steps - 1, env, prune_below, budget_mb):
            per[j, i] = energy_of_field(d, coords, ms, spec, beta, replicas, derive(seed, 1, j, i))
    steps = [_estimate(per[:, i]) for i in range(n_steps)]
    running = np.cumsum(per, axis=1) / np.arange(1, n_steps + 1)
    cesaro = [_estimate(running[:, i]) for i in range(n_steps)]
    return IterationResult(steps=steps, cesaro=cesaro, trajectories=trajectories,
                           replicas=replicas, per_trajectory=per)
