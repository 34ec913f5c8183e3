"""Disorder laws, their log moment generating functions, and site sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from numba import njit
from scipy import special, stats

from .errors import AssumptionViolated, NonDegenerateViolated, NonFinite
from .rng import absorb, as_seed, step_key, uniform_pair

KIND_GAUSSIAN = 0
KIND_BERNOULLI_PM = 1
KIND_UNIFORM = 2
KIND_TABLE = 3

TABLE_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    stddev: float = 1.0

    kind = "gaussian"

    def __post_init__(self):
        _require_finite(self.mean, self.stddev)
        if not self.stddev > 0:
            raise NonDegenerateViolated("Gaussian stddev must be positive")

    def log_mgf(self, alpha: float) -> float:
        return alpha * self.mean + 0.5 * (alpha * self.stddev) ** 2

    def cdf(self, x):
        return stats.norm.cdf(x, loc=self.mean, scale=self.stddev)

    def kernel_args(self):
        return KIND_GAUSSIAN, float(self.mean), float(self.stddev), _EMPTY, _EMPTY

    def to_json(self) -> dict:
        return {"kind": self.kind, "mean": self.mean, "stddev": self.stddev}


@dataclass(frozen=True)
class BernoulliPM:
    """Takes the value -1 with probability ``p`` and +1 otherwise."""

    p: float = 0.5

    kind = "bernoulli_pm"

    def __post_init__(self):
        _require_finite(self.p)
        if not 0.0 < self.p < 1.0:
            raise NonDegenerateViolated("BernoulliPM needs 0 < p < 1")

    def log_mgf(self, alpha: float) -> float:
        return float(np.logaddexp(math.log(self.p) - alpha, math.log1p(-self.p) + alpha))

    cdf = None

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([-1.0, 1.0]), np.array([self.p, 1.0 - self.p])

    def kernel_args(self):
        return KIND_BERNOULLI_PM, float(self.p), 0.0, _EMPTY, _EMPTY

    def to_json(self) -> dict:
        return {"kind": self.kind, "p": self.p}


@dataclass(frozen=True)
class Uniform:
    a: float = 0.0
    b: float = 1.0

    kind = "uniform"

    def __post_init__(self):
        _require_finite(self.a, self.b)
        if not self.a < self.b:
            raise NonDegenerateViolated("Uniform needs a < b")

    def log_mgf(self, alpha: float) -> float:
        t = alpha * (self.b - self.a)
        if t == 0.0:
            return 0.0
        if t > 0.0:
            return alpha * self.b + math.log(-math.expm1(-t) / t)
        return alpha * self.a + math.log(math.expm1(t) / t)

    def cdf(self, x):
        return stats.uniform.cdf(x, loc=self.a, scale=self.b - self.a)

    def kernel_args(self):
        return KIND_UNIFORM, float(self.a), float(self.b), _EMPTY, _EMPTY

    def to_json(self) -> dict:
        return {"kind": self.kind, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class TableLaw:
    """Finite-support law: ``values[j]`` has probability ``probabilities[j]``."""

    values: tuple[float, ...]
    probabilities: tuple[float, ...]

    kind = "table"

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))
        if len(self.values) != len(self.probabilities) or not self.values:
            raise NonDegenerateViolated("values and probabilities must be nonempty and aligned")
        _require_finite(*self.values, *self.probabilities)
        if any(p <= 0 for p in self.probabilities):
            raise NonDegenerateViolated("table probabilities must be positive")
        if abs(math.fsum(self.probabilities) - 1.0) > TABLE_SUM_TOL:
            raise NonDegenerateViolated("table probabilities must sum to 1 within 1e-12")
        if len(set(self.values)) < 2:
            raise NonDegenerateViolated("table law is a point mass")

    def log_mgf(self, alpha: float) -> float:
        v = np.asarray(self.values)
        p = np.asarray(self.probabilities)
        return float(special.logsumexp(alpha * v, b=p))

    cdf = None

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.values), np.asarray(self.probabilities)

    def kernel_args(self):
        v = np.asarray(self.values, dtype=np.float64)
        c = np.cumsum(np.asarray(self.probabilities, dtype=np.float64))
        c[-1] = 1.0
        return KIND_TABLE, 0.0, 0.0, v, c

    def to_json(self) -> dict:
        return {"kind": self.kind, "values": list(self.values),
                "probabilities": list(self.probabilities)}


DisorderSpec = Union[Gaussian, BernoulliPM, Uniform, TableLaw]

_EMPTY = np.zeros(0, dtype=np.float64)
_KINDS = {"gaussian": Gaussian, "bernoulli_pm": BernoulliPM, "uniform": Uniform, "table": TableLaw}


def _require_finite(*xs: float) -> None:
    for x in xs:
        if not math.isfinite(float(x)):
            raise NonDegenerateViolated(f"parameter {x!r} is not finite")


def disorder_from_json(obj: dict) -> DisorderSpec:
    obj = dict(obj)
    kind = obj.pop("kind", None)
    if kind not in _KINDS:
        raise NonDegenerateViolated(f"unknown disorder kind {kind!r}; expected one of {sorted(_KINDS)}")
    return _KINDS[kind](**obj)


@dataclass(frozen=True)
class MGFWindow:
    beta: float
    c_values: dict

    def __getitem__(self, alpha: float) -> float:
        return self.c_values[alpha]


def log_mgf(spec: DisorderSpec, alpha: float) -> float:
    """c(alpha) = log E exp(alpha X)."""
    if not math.isfinite(alpha):
        raise ValueError("alpha must be finite")
    if alpha == 0.0:
        return 0.0
    with np.errstate(over="ignore"):
        try:
            c = float(spec.log_mgf(alpha))
        except OverflowError as exc:
            raise NonFinite(f"c({alpha}) overflowed") from exc
    if not math.isfinite(c):
        raise NonFinite(f"c({alpha}) is not finite")
    return c


def check_mgf_window(spec: DisorderSpec, beta: float) -> MGFWindow:
    if not beta > 0:
        raise ValueError("beta must be positive")
    values = {}
    for alpha in (-2.0 * beta, -beta, beta, 2.0 * beta):
        try:
            values[alpha] = log_mgf(spec, alpha)
        except NonFinite as exc:
            raise AssumptionViolated(alpha) from exc
    return MGFWindow(beta=float(beta), c_values=values)


def validate_beta(spec: DisorderSpec, beta: float) -> float:
    """Return c(beta), checking the window when beta > 0."""
    if beta < 0 or not math.isfinite(beta):
        raise ValueError("beta must be finite and nonnegative")
    if beta == 0:
        return 0.0
    return check_mgf_window(spec, beta)[beta]


@njit(cache=True)
def draw(code, p0, p1, values, cdf, key):
    """Environment value for a finalized site key."""
    ua, ub = uniform_pair(key)
    if code == KIND_GAUSSIAN:
        return p0 + p1 * np.sqrt(-2.0 * np.log(ua)) * np.cos(2.0 * np.pi * ub)
    if code == KIND_BERNOULLI_PM:
        return -1.0 if ua < p0 else 1.0
    if code == KIND_UNIFORM:
        return p0 + (p1 - p0) * ua
    for j in range(cdf.shape[0] - 1):
        if ua < cdf[j]:
            return values[j]
    return values[cdf.shape[0] - 1]


@njit(cache=True)
def _sample_sites(code, p0, p1, values, cdf, seed, step, sites):
    out = np.empty(sites.shape[0])
    base = step_key(seed, step)
    for i in range(sites.shape[0]):
        key = base
        for k in range(sites.shape[1]):
            key = absorb(key, sites[i, k])
        out[i] = draw(code, p0, p1, values, cdf, key)
    return out


def sample_row(spec: DisorderSpec, seed: int, step_index: int,
               sites: Sequence[Sequence[int]] | np.ndarray) -> np.ndarray:
    """Environment values at ``sites`` for time ``step_index``.

    The value at a site depends only on (seed, step_index, coordinates), so
    repeated or reordered queries agree.
    """
    arr = np.asarray(sites, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.shape[0] == 0:
        return np.zeros(0)
    if len({tuple(r) for r in arr.tolist()}) != arr.shape[0]:
        raise ValueError("sites must be distinct")
    code, p0, p1, v, c = spec.kernel_args()
    return _sample_sites(code, p0, p1, v, c, np.uint64(as_seed(seed)), np.int64(step_index), arr)


def iid_draws(spec: DisorderSpec, seed: int, count: int, step_index: int = 0) -> np.ndarray:
    """``count`` independent draws indexed along one axis (testing helper)."""
    sites = np.arange(count, dtype=np.int64).reshape(-1, 1)
    code, p0, p1, v, c = spec.kernel_args()
    return _sample_sites(code, p0, p1, v, c, np.uint64(as_seed(seed)), np.int64(step_index), sites)


def describe(spec: DisorderSpec) -> str:
    params = ", ".join(f"{k}={v}" for k, v in spec.to_json().items() if k != "kind")
    return f"{spec.kind}({params})"


def support_atoms(spec: DisorderSpec) -> tuple[np.ndarray, np.ndarray] | None:
    """(values, probabilities) for discrete laws, else None."""
    fn = getattr(spec, "support", None)
    return fn() if fn is not None else None
