"""Exact quenched endpoint laws via the one-step recursion.

The endpoint law lives on a dense cube of radius ``R`` centered at the
origin; only sites of the parity diamond ``{|x|_1 <= n, |x|_1 = n mod 2}``
are ever nonzero.  Each step reads the neighbor sums of the previous law,
reweights by ``exp(beta X_{n+1,x})`` after subtracting the per-step maximum
of ``beta X`` (log-sum-exp), and renormalizes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from math import comb
from typing import Iterator, Sequence

import numpy as np
from numba import njit
from scipy import special

from .disorder import DisorderSpec, draw, log_mgf, validate_beta
from .errors import BudgetExceeded, Overflow, Undefined
from .rng import absorb, as_seed, step_key

DEFAULT_EPS_GRID = (1e-1, 1e-2, 1e-3, 1e-4)
DEFAULT_BUDGET_MB = 2048.0
MAX_STEPS = 1 << 20
NORMALIZATION_TOL = 1e-10
MODE_REL_TOL = 1e-12


# --------------------------------------------------------------------------
# numba kernels


@njit(cache=True)
def _enumerate_sites(d, step, box, R, crd, idx):
    """Write the parity-diamond sites of ``step`` inside ``|x|_inf <= box``.

    Returns the count, or -1 when the buffers are too small.
    """
    L = 2 * R + 1
    cap = idx.shape[0]
    x = np.zeros(d, np.int64)
    used = np.zeros(d, np.int64)
    count = 0
    k = 0
    x[0] = -min(box, step)
    while k >= 0:
        if k < d - 1:
            used[k + 1] = used[k] + abs(x[k])
            k += 1
            x[k] = -min(box, step - used[k])
            continue
        rem = step - used[k]
        b = min(box, rem)
        start = -b if (b - rem) % 2 == 0 else -b + 1
        base = 0
        for j in range(d - 1):
            base = base * L + (x[j] + R)
        for v in range(start, b + 1, 2):
            if count >= cap:
                return -1
            for j in range(d - 1):
                crd[count, j] = x[j]
            crd[count, d - 1] = v
            idx[count] = base * L + (v + R)
            count += 1
        k -= 1
        while k >= 0:
            x[k] += 1
            if x[k] <= min(box, step - used[k]):
                break
            k -= 1
    return count


@njit(cache=True)
def _advance(src, dst, R, d, new_step, box, beta, code, p0, p1, values, cdf, seed,
             crd, idx, wbuf):
    """One recursion step from ``src`` into ``dst`` (flat cubes of radius R).

    Returns (count, log_ratio); count is -1 on buffer overflow and -2 when
    the normalizer vanished.
    """
    count = _enumerate_sites(d, new_step, box, R, crd, idx)
    if count < 0:
        return -1, 0.0
    L = 2 * R + 1
    strides = np.empty(d, np.int64)
    s = 1
    for k in range(d - 1, -1, -1):
        strides[k] = s
        s *= L
    key0 = step_key(seed, new_step)
    maxb = -np.inf
    for i in range(count):
        w = 0.0
        j = idx[i]
        for k in range(d):
            c = crd[i, k]
            if c > -R:
                w += src[j - strides[k]]
            if c < R:
                w += src[j + strides[k]]
        if w > 0.0 and beta != 0.0:
            key = key0
            for k in range(d):
                key = absorb(key, crd[i, k])
            b = beta * draw(code, p0, p1, values, cdf, key)
        else:
            b = 0.0
        if w > 0.0 and b > maxb:
            maxb = b
        wbuf[i] = w
        dst[j] = b
    if maxb == -np.inf:
        return -2, 0.0
    total = 0.0
    for i in range(count):
        j = idx[i]
        if wbuf[i] > 0.0:
            v = wbuf[i] * np.exp(dst[j] - maxb)
        else:
            v = 0.0
        dst[j] = v
        total += v
    if not (total > 0.0) or not np.isfinite(total):
        return -2, 0.0
    inv = 1.0 / total
    for i in range(count):
        dst[idx[i]] *= inv
    return count, np.log(total) + maxb - np.log(2.0 * d)


@njit(cache=True)
def _prune(dst, crd, idx, count, d, threshold):
    """Drop sites outside the box of atoms above ``threshold``; renormalize."""
    active = 0
    for i in range(count):
        if dst[idx[i]] > threshold:
            for k in range(d):
                a = abs(crd[i, k])
                if a > active:
                    active = a
    dropped = 0.0
    for i in range(count):
        far = False
        for k in range(d):
            if abs(crd[i, k]) > active:
                far = True
        if far:
            dropped += dst[idx[i]]
            dst[idx[i]] = 0.0
    if dropped > 0.0:
        inv = 1.0 / (1.0 - dropped)
        for i in range(count):
            dst[idx[i]] *= inv
    return active, dropped


@njit(cache=True)
def _measure(dst, crd, idx, count, d, eps_grid, eps_out):
    mx = 0.0
    sq = 0.0
    second = 0.0
    for m in range(eps_grid.shape[0]):
        eps_out[m] = 0.0
    for i in range(count):
        v = dst[idx[i]]
        if v == 0.0:
            continue
        if v > mx:
            mx = v
        sq += v * v
        r2 = 0.0
        for k in range(d):
            r2 += crd[i, k] * crd[i, k]
        second += r2 * v
        for m in range(eps_grid.shape[0]):
            if v > eps_grid[m]:
                eps_out[m] += v
    return mx, sq, second


@njit(cache=True)
def min_window_1d(xs, ms, need):
    """Smallest ``x[j]-x[i]`` with mass of ``xs[i..j]`` strictly above ``need``.

    ``xs`` sorted ascending.  Returns -1 if even the full mass is too small.
    """
    n = xs.shape[0]
    best = -1
    acc = 0.0
    i = 0
    for j in range(n):
        acc += ms[j]
        while i < j and acc - ms[i] > need:
            acc -= ms[i]
            i += 1
        if acc > need:
            w = xs[j] - xs[i]
            if best < 0 or w < best:
                best = w
    return best


@njit(cache=True)
def favorite_mass_kernel(crd, ms, modes, K):
    """Mass of sites within l1 distance K of every mode."""
    tot = 0.0
    d = crd.shape[1]
    for i in range(crd.shape[0]):
        ok = True
        for m in range(modes.shape[0]):
            dist = 0
            for k in range(d):
                dist += abs(crd[i, k] - modes[m, k])
            if dist > K:
                ok = False
                break
        if ok:
            tot += ms[i]
    return tot


# --------------------------------------------------------------------------
# memory accounting


def diamond_sites(d: int, n: int) -> int:
    """Number of parity-correct sites with |x|_1 <= n."""
    k = np.arange(n % 2, n + 1, 2, dtype=np.float64)
    k = k[k > 0]
    total = 1.0 if n % 2 == 0 else 0.0
    for i in range(1, d + 1):
        total += 2.0 ** i * comb(d, i) * float(np.sum(special.comb(k - 1, i - 1)))
    return int(round(total))


def _bytes_needed(d: int, radius: int, n_sites: int) -> int:
    cube = (2 * radius + 1) ** d * 8
    return 2 * cube + n_sites * 8 * (d + 2)


def admissible_steps(d: int, budget_mb: float = DEFAULT_BUDGET_MB) -> int:
    """Largest n whose exact (unpruned) recursion fits the budget."""
    budget = budget_mb * 2 ** 20
    lo, hi = 0, 1
    while _bytes_needed(d, hi, diamond_sites(d, hi)) <= budget:
        lo, hi = hi, hi * 2
        if hi > MAX_STEPS:
            return MAX_STEPS
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _bytes_needed(d, mid, diamond_sites(d, mid)) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


# --------------------------------------------------------------------------
# fields


@dataclass
class EndpointField:
    """Endpoint law ``f_n`` on a centered cube of ``masses`` plus ``log Z_n``."""

    d: int
    step: int
    masses: np.ndarray
    log_Z: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=np.float64)
        if m.ndim != self.d or len(set(m.shape)) != 1 or m.shape[0] % 2 != 1:
            raise ValueError("masses must be a centered cube of odd side in d dimensions")
        if np.any(m < 0):
            raise ValueError("masses must be nonnegative")
        self.masses = m

    @classmethod
    def initial(cls, d: int) -> "EndpointField":
        m = np.zeros((1,) * d)
        m[(0,) * d] = 1.0
        return cls(d=d, step=0, masses=m)

    @classmethod
    def from_sites(cls, d: int, step: int, sites: dict, log_Z: float = 0.0) -> "EndpointField":
        R = max([step] + [max(abs(c) for c in x) for x in sites])
        m = np.zeros((2 * R + 1,) * d)
        for x, v in sites.items():
            m[tuple(c + R for c in x)] = v
        return cls(d=d, step=step, masses=m, log_Z=log_Z)

    @property
    def radius(self) -> int:
        return (self.masses.shape[0] - 1) // 2

    def mass_at(self, x: Sequence[int]) -> float:
        R = self.radius
        if any(abs(c) > R for c in x):
            return 0.0
        return float(self.masses[tuple(c + R for c in x)])

    def sparse(self) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero sites as (coords[m, d], masses[m]) in C order."""
        nz = np.nonzero(self.masses)
        coords = np.stack(nz, axis=1).astype(np.int64) - self.radius
        return coords, self.masses[nz]

    def total(self) -> float:
        return math.fsum(self.masses.ravel())

    def parity_violation(self) -> float:
        """Mass on sites outside the parity diamond (exactly 0 for valid fields)."""
        coords, ms = self.sparse()
        if coords.shape[0] == 0:
            return 0.0
        r = np.abs(coords).sum(axis=1)
        bad = (r > self.step) | ((r - self.step) % 2 != 0)
        return float(ms[bad].sum())

    def to_pspm(self):
        from .pspm import PSPM

        coords, ms = self.sparse()
        return PSPM.from_parts(self.d, [{tuple(int(c) for c in x): float(v) for x, v in zip(coords, ms)}])


def _embed(masses: np.ndarray, R: int) -> np.ndarray:
    """Copy a centered cube into a larger centered cube of radius R."""
    r0 = (masses.shape[0] - 1) // 2
    out = np.zeros((2 * R + 1,) * masses.ndim)
    sl = tuple(slice(R - r0, R + r0 + 1) for _ in range(masses.ndim))
    out[sl] = masses
    return out


def step_endpoint(f: EndpointField, spec: DisorderSpec, beta: float, seed: int) -> EndpointField:
    """Advance ``f`` by one step in the environment keyed by ``seed``."""
    validate_beta(spec, beta)
    d = f.d
    R = f.radius + 1
    src = _embed(f.masses, R).ravel()
    dst = np.zeros_like(src)
    n_sites = diamond_sites(d, f.step + 1)
    crd = np.empty((n_sites, d), np.int64)
    idx = np.empty(n_sites, np.int64)
    wbuf = np.empty(n_sites)
    code, p0, p1, v, c = spec.kernel_args()
    count, lr = _advance(src, dst, R, d, f.step + 1, R, float(beta), code, p0, p1, v, c,
                         np.uint64(as_seed(seed)), crd, idx, wbuf)
    if count == -2:
        raise Overflow("normalizer vanished after rescaling")
    if beta == 0:
        lr = 0.0
    return EndpointField(d=d, step=f.step + 1, masses=dst.reshape((2 * R + 1,) * d),
                         log_Z=f.log_Z + lr)


def replica_overlap(f: EndpointField) -> float:
    return float(np.sum(f.masses * f.masses))


def _neighbor_average(masses: np.ndarray) -> np.ndarray:
    d = masses.ndim
    p = np.pad(masses, 2)
    out = np.zeros_like(p)
    for k in range(d):
        out += np.roll(p, 1, axis=k) + np.roll(p, -1, axis=k)
    return out / (2 * d)


def half_step(f: EndpointField) -> EndpointField:
    """``g(x) = (2d)^-1 sum_{y~x} f(y)``, the law of the next position under SRW."""
    g = _neighbor_average(f.masses)
    R = (g.shape[0] - 1) // 2
    sl = tuple(slice(1, 2 * R) for _ in range(f.d))
    return EndpointField(d=f.d, step=f.step + 1, masses=g[sl], log_Z=f.log_Z)


def mean_square_displacement(f: EndpointField) -> float:
    if f.step == 0:
        raise Undefined("mean square displacement is undefined at n = 0")
    coords, ms = f.sparse()
    return float(np.sum((coords.astype(np.float64) ** 2).sum(axis=1) * ms) / f.step)


# --------------------------------------------------------------------------
# trajectories


class PolymerStepper:
    """Preallocated double-buffered recursion for one environment.

    ``prune_below`` (default 0, exact) removes, after each step, the sites
    outside the smallest centered box containing every atom above the
    threshold; the removed mass is accumulated in ``pruned_mass``.
    """

    def __init__(self, d: int, beta: float, spec: DisorderSpec, n_steps: int, seed: int,
                 prune_below: float = 0.0, budget_mb: float = DEFAULT_BUDGET_MB):
        if d < 1:
            raise ValueError("d must be positive")
        if n_steps < 0:
            raise ValueError("n_steps must be nonnegative")
        if not 0.0 <= prune_below < 1.0:
            raise ValueError("prune_below must lie in [0, 1)")
        validate_beta(spec, beta)
        self.d, self.beta, self.spec, self.n_steps = d, float(beta), spec, n_steps
        self.seed = as_seed(seed)
        self.prune_below = float(prune_below)
        admissible = admissible_steps(d, budget_mb)
        if prune_below == 0.0 and n_steps > admissible:
            raise BudgetExceeded(d, n_steps, admissible, budget_mb)
        self.R = max(1, min(n_steps, admissible))
        self.budget_mb = budget_mb
        L = 2 * self.R + 1
        self._bufs = [np.zeros(L ** d), np.zeros(L ** d)]
        center = np.ravel_multi_index((self.R,) * d, (L,) * d)
        self._bufs[0][center] = 1.0
        cap = max(1, diamond_sites(d, min(n_steps, self.R, 64)))
        self._crd = np.empty((cap, d), np.int64)
        self._idx = np.empty(cap, np.int64)
        self._wbuf = np.empty(cap)
        self._prev_idx = [np.array([center], np.int64), np.zeros(0, np.int64)]
        self._cur = 0
        self.count = 1
        self._crd[0] = 0
        self._idx[0] = center
        self.step = 0
        self.log_Z = 0.0
        self.box = 0
        self.pruned_mass = 0.0
        self._kargs = spec.kernel_args()

    @property
    def flat(self) -> np.ndarray:
        return self._bufs[self._cur]

    def _grow(self):
        cap = self._idx.shape[0] * 2
        self._crd = np.empty((cap, self.d), np.int64)
        self._idx = np.empty(cap, np.int64)
        self._wbuf = np.empty(cap)

    def advance(self) -> float:
        """Take one step; returns log(Z_{n+1}/Z_n)."""
        new_step = self.step + 1
        box = min(new_step, self.box + 1)
        if box > self.R:
            raise BudgetExceeded(self.d, self.n_steps, max(self.step, self.R), self.budget_mb)
        src = self._bufs[self._cur]
        nxt = 1 - self._cur
        dst = self._bufs[nxt]
        dst[self._prev_idx[nxt]] = 0.0
        code, p0, p1, v, c = self._kargs
        while True:
            count, lr = _advance(src, dst, self.R, self.d, new_step, box, self.beta,
                                 code, p0, p1, v, c, np.uint64(self.seed),
                                 self._crd, self._idx, self._wbuf)
            if count != -1:
                break
            self._grow()
        if count == -2:
            raise Overflow(f"normalizer vanished at step {new_step}")
        if self.beta == 0.0:
            lr = 0.0  # Z_n = 1 exactly; drop the rounding of the mass sum
        self.box = box
        if self.prune_below > 0.0:
            active, dropped = _prune(dst, self._crd, self._idx, count, self.d, self.prune_below)
            self.box = int(active)
            self.pruned_mass += dropped
        self._prev_idx[nxt] = self._idx[:count].copy()
        self._cur = nxt
        self.count = count
        self.step = new_step
        self.log_Z += lr
        return lr

    def sparse(self) -> tuple[np.ndarray, np.ndarray]:
        """Current support as (coords, masses), zero sites removed."""
        idx = self._idx[: self.count]
        ms = self.flat[idx]
        keep = ms > 0.0
        return self._crd[: self.count][keep].copy(), ms[keep]

    def measure(self, eps_grid: np.ndarray) -> tuple[float, float, float, np.ndarray]:
        out = np.zeros(eps_grid.shape[0])
        mx, sq, second = _measure(self.flat, self._crd, self._idx, self.count, self.d, eps_grid, out)
        return mx, sq, second, out

    def field(self) -> EndpointField:
        L = 2 * self.R + 1
        cube = self.flat.reshape((L,) * self.d).copy()
        return EndpointField(d=self.d, step=self.step, masses=cube, log_Z=self.log_Z)


def iter_fields(d: int, beta: float, spec: DisorderSpec, n_steps: int, seed: int,
                prune_below: float = 0.0, budget_mb: float = DEFAULT_BUDGET_MB
                ) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Yield (i, coords, masses) for the endpoint laws f_0, ..., f_n."""
    st = PolymerStepper(d, beta, spec, n_steps, seed, prune_below, budget_mb)
    yield 0, *st.sparse()
    for _ in range(n_steps):
        st.advance()
        yield st.step, *st.sparse()


def geometry_dense(coords: np.ndarray, ms: np.ndarray, deltas: Sequence[float],
                   Ks: Sequence[int], exact_atoms: int = 64) -> tuple[np.ndarray, np.ndarray, bool]:
    """W_delta per delta and favorite-region mass per K for one probability field.

    Exact in d = 1.  In higher dimension W_delta is evaluated on the top
    ``exact_atoms`` atoms (a restriction that can only overestimate it) and
    the result is flagged approximate.
    """
    from .pspm import window_diameter

    d = coords.shape[1]
    approx = False
    W = np.empty(len(deltas))
    if d == 1:
        order = np.argsort(coords[:, 0], kind="stable")
        xs = coords[order, 0]
        mm = ms[order]
        for j, delta in enumerate(deltas):
            w = min_window_1d(xs, mm, 1.0 - delta)
            W[j] = math.inf if w < 0 else float(w)
    else:
        k = min(exact_atoms, ms.shape[0])
        top = np.argsort(-ms, kind="stable")[:k]
        approx = k < ms.shape[0]
        for j, delta in enumerate(deltas):
            W[j] = window_diameter(coords[top], ms[top], 1.0 - delta)
    fav = np.zeros(len(Ks))
    if ms.shape[0]:
        mx = ms.max()
        modes = coords[ms >= mx * (1.0 - MODE_REL_TOL)]
        for j, K in enumerate(Ks):
            fav[j] = favorite_mass_kernel(coords, ms, modes, int(K))
    return W, fav, approx


def _eps_label(eps: float) -> str:
    mant, ex = f"{eps:e}".split("e")
    mant = mant.rstrip("0").rstrip(".")
    return f"eps_mass@{mant}e{int(ex)}"


@dataclass
class TrajectoryRecord:
    """Per-step diagnostics of one quenched trajectory, steps 0..n."""

    d: int
    beta: float
    spec: DisorderSpec
    seed: int
    n_steps: int
    c_beta: float
    eps_grid: tuple
    log_ratio: np.ndarray
    log_Z: np.ndarray
    F: np.ndarray
    max_atom: np.ndarray
    overlap: np.ndarray
    msd: np.ndarray
    eps_mass: np.ndarray
    delta_grid: tuple = ()
    K_grid: tuple = ()
    W_delta: np.ndarray | None = None
    favorite_mass: np.ndarray | None = None
    geometry_approximate: bool = False
    thinning: int = 0
    snapshot_k_top: int = 16
    snapshot_radius: int = 16
    snapshot_floor: float = 0.0
    snapshots: dict = field(default_factory=dict)
    prune_below: float = 0.0
    budget_mb: float = DEFAULT_BUDGET_MB
    pruned_mass: float = 0.0

    @property
    def Z_tilde(self) -> float:
        """exp(log Z_n - n c(beta)), the normalized martingale at the final step."""
        return math.exp(self.log_Z[-1] - self.n_steps * self.c_beta)

    def telescoping_error(self) -> float:
        n = self.n_steps
        return abs(n * self.F[n] - math.fsum(self.log_ratio)) if n else 0.0

    def cesaro(self, values: np.ndarray, n: int | None = None) -> float:
        """Average of ``values[i]`` over i < n (default n = n_steps)."""
        n = self.n_steps if n is None else n
        if n < 1:
            raise ValueError("Cesaro average needs n >= 1")
        return float(np.mean(values[:n]))

    def in_G(self, delta: float, K: int) -> np.ndarray:
        if self.W_delta is None:
            raise ValueError("trajectory was recorded without geometry")
        j = self.delta_grid.index(delta)
        # endpoint laws have one part of full mass, so G reduces to W_delta <= K
        return self.W_delta[:, j] <= K

    def columns(self) -> list[str]:
        return ["step", "F", "log_ratio", "max_atom", "overlap", "msd"] + [
            _eps_label(e) for e in self.eps_grid]

    def rows(self) -> Iterator[dict]:
        cols = self.columns()
        for i in range(self.n_steps + 1):
            vals = [i, float(self.F[i]),
                    float(self.log_ratio[i]) if i < self.n_steps else None,
                    float(self.max_atom[i]), float(self.overlap[i]),
                    float(self.msd[i]) if i > 0 else None]
            vals += [float(x) for x in self.eps_mass[i]]
            yield dict(zip(cols, vals))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns())
        for row in self.rows():
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v)
                        for v in row.values()])
        return buf.getvalue()

    def to_ndjson(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.rows())


def run_polymer(d: int, beta: float, spec: DisorderSpec, n_steps: int, seed: int,
                thinning: int = 0, *, eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
                delta_grid: Sequence[float] = (), K_grid: Sequence[int] = (),
                snapshot_k_top: int = 16, snapshot_radius: int = 16,
                snapshot_floor: float = 0.0, prune_below: float = 0.0,
                budget_mb: float = DEFAULT_BUDGET_MB) -> TrajectoryRecord:
    """Run the recursion for ``n_steps`` and record every diagnostic.

    ``thinning > 0`` stores a top-``snapshot_k_top`` PSPM snapshot of f_i at
    every i divisible by ``thinning``.  Geometry (W_delta, favorite mass) is
    recorded when both ``delta_grid`` and ``K_grid`` are nonempty.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    c_beta = log_mgf(spec, beta) if beta > 0 else 0.0
    st = PolymerStepper(d, beta, spec, n_steps, seed, prune_below, budget_mb)
    eps = np.asarray(sorted(eps_grid, reverse=True), dtype=np.float64)
    n1 = n_steps + 1
    lr = np.zeros(n_steps)
    log_Z = np.zeros(n1)
    mx = np.zeros(n1)
    ov = np.zeros(n1)
    msd = np.full(n1, np.nan)
    em = np.zeros((n1, eps.shape[0]))
    geo = bool(delta_grid) and bool(K_grid)
    W = np.zeros((n1, len(delta_grid))) if geo else None
    fav = np.zeros((n1, len(K_grid))) if geo else None
    approx = False
    snaps = {}
    from .profiles import extract_snapshot

    for i in range(n1):
        if i > 0:
            lr[i - 1] = st.advance()
            log_Z[i] = st.log_Z
        a, sq, second, eo = st.measure(eps)
        mx[i], ov[i], em[i] = a, sq, eo
        if i > 0:
            msd[i] = second / i
        if geo or (thinning and i % thinning == 0):
            coords, ms = st.sparse()
            if geo:
                W[i], fav[i], ap = geometry_dense(coords, ms, delta_grid, K_grid)
                approx = approx or ap
            if thinning and i % thinning == 0:
                snaps[i] = extract_snapshot((coords, ms), snapshot_k_top, snapshot_radius,
                                            snapshot_floor)
    F = np.zeros(n1)
    F[1:] = log_Z[1:] / np.arange(1, n1)
    return TrajectoryRecord(
        d=d, beta=float(beta), spec=spec, seed=as_seed(seed), n_steps=n_steps, c_beta=c_beta,
        eps_grid=tuple(float(e) for e in eps), log_ratio=lr, log_Z=log_Z, F=F, max_atom=mx,
        overlap=ov, msd=msd, eps_mass=em, delta_grid=tuple(delta_grid),
        K_grid=tuple(int(k) for k in K_grid), W_delta=W, favorite_mass=fav,
        geometry_approximate=approx, thinning=int(thinning), snapshot_k_top=snapshot_k_top,
        snapshot_radius=snapshot_radius, snapshot_floor=snapshot_floor, snapshots=snaps,
        prune_below=float(prune_below), budget_mb=float(budget_mb), pruned_mass=st.pruned_mass)
