"""Empirical measures of endpoint snapshots and the fixed-point residual.

An :class:`EmpiricalMeasure` is a uniform mixture of point masses at finitely
many PSPMs.  Between two such measures of equal size the optimal coupling is
a permutation (Birkhoff), so the Wasserstein distance is an assignment
problem over the matrix of pairwise PSPM distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .disorder import DisorderSpec, validate_beta
from .errors import NoSnapshots
from .lattice import TrajectoryRecord, iter_fields
from .metric import MAX_EXACT_ATOMS, distance_exact, pack_many, upper_matrix
from .profiles import extract_snapshot
from .pspm import PSPM
from .dynamics import update_sample
from .rng import derive

COST_BACKENDS = ("auto", "exact", "upper")


@dataclass
class EmpiricalMeasure:
    """Uniform-weight collection of PSPMs; ``meta`` records provenance."""

    atoms: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("an empirical measure needs at least one atom")
        dims = {f.d for f in self.atoms}
        if len(dims) != 1:
            raise ValueError("all atoms must share one dimension")

    @property
    def d(self) -> int:
        return self.atoms[0].d

    @property
    def size(self) -> int:
        return len(self.atoms)

    @classmethod
    def dirac(cls, f: PSPM) -> "EmpiricalMeasure":
        return cls([f], {"source": "dirac"})


def build_empirical(trajectory: TrajectoryRecord, k_top: int = 16, stride: int | None = None,
                    n: int | None = None) -> EmpiricalMeasure:
    """mu_n from the stored snapshots f_i with i <= n and i divisible by ``stride``.

    ``n`` defaults to ``n_steps - 1`` (the measure paired with F_n in the
    energy identity); ``stride`` defaults to the recorded thinning.
    """
    if k_top < 1:
        raise ValueError("k_top must be at least 1")
    thin = trajectory.thinning
    stride = thin if stride is None else stride
    if not trajectory.snapshots or thin < 1 or stride < 1 or stride % thin:
        raise NoSnapshots(f"no snapshots at stride {stride} (recorded thinning {thin})")
    n = max(trajectory.n_steps - 1, 0) if n is None else n
    if not 0 <= n <= trajectory.n_steps:
        raise ValueError("n must lie in [0, n_steps]")
    idx = [i for i in range(0, n + 1, stride)]
    missing = [i for i in idx if i not in trajectory.snapshots]
    if missing:
        raise NoSnapshots(f"snapshots missing at steps {missing[:5]}")
    atoms = [trajectory.snapshots[i].top_atoms(k_top) for i in idx]
    meta = {
        "source": {"d": trajectory.d, "beta": trajectory.beta, "seed": trajectory.seed,
                   "spec": trajectory.spec.to_json()},
        "stride": stride,
        "n": n,
        "k_top": min(k_top, trajectory.snapshot_k_top),
        "steps": idx,
        # mass outside the kept atoms, per atom of the measure
        "discarded_mass": [max(0.0, 1.0 - f.total) for f in atoms],
    }
    return EmpiricalMeasure(atoms, meta)


def cost_matrix(A: Sequence[PSPM], B: Sequence[PSPM], cost: str = "auto",
                k_top: int = 16) -> tuple[np.ndarray, bool]:
    """Pairwise distances and whether any entry is only an upper bound."""
    if cost not in COST_BACKENDS:
        raise ValueError(f"cost must be one of {COST_BACKENDS}")
    na, nb = len(A), len(B)
    if cost == "exact":
        C = np.array([[distance_exact(f, g) for g in B] for f in A]).reshape(na, nb)
        return C, False
    C = upper_matrix(*pack_many(A, k_top), *pack_many(B, k_top))
    if cost == "upper":
        return C, True
    small_a = [i for i, f in enumerate(A) if f.n_atoms <= MAX_EXACT_ATOMS]
    small_b = [j for j, g in enumerate(B) if g.n_atoms <= MAX_EXACT_ATOMS]
    for i in small_a:
        for j in small_b:
            C[i, j] = distance_exact(A[i], B[j])
    flagged = len(small_a) * len(small_b) < na * nb
    return C, flagged


def assignment_value(C: np.ndarray) -> float:
    """Optimal uniform coupling cost of a square cost matrix.

    Tied optima can differ in the last bit; solving both orientations and
    keeping the smaller makes the value exactly symmetric under transposition.
    """
    vals = []
    for M in (C, C.T):
        r, c = linear_sum_assignment(M)
        vals.append(math.fsum(M[r, c]))
    return min(vals) / C.shape[0]


def _expand(C: np.ndarray) -> np.ndarray:
    """Repeat rows and columns so both marginals have lcm(m, k) equal atoms."""
    m, k = C.shape
    L = m * k // math.gcd(m, k)
    return np.tile(C, (L // m, L // k))


def wasserstein_detailed(mu: EmpiricalMeasure, nu: EmpiricalMeasure, cost: str = "auto",
                         k_top: int = 16) -> tuple[float, bool]:
    """(W(mu, nu), flagged_upper_bound)."""
    if mu.d != nu.d:
        raise ValueError("measures live over different dimensions")
    C, flagged = cost_matrix(mu.atoms, nu.atoms, cost, k_top)
    if C.shape[0] != C.shape[1]:
        C = _expand(C)
    return assignment_value(C), flagged


def wasserstein(mu: EmpiricalMeasure, nu: EmpiricalMeasure, cost: str = "auto",
                k_top: int = 16) -> float:
    """Wasserstein distance between two uniform empirical measures."""
    return wasserstein_detailed(mu, nu, cost, k_top)[0]


@dataclass(frozen=True)
class ResidualRow:
    n: int
    residual: float
    flagged_upper_bound: bool
    seed: int


def geometric_probes(n_max: int, base: int = 2, start: int = 1) -> list[int]:
    """0, start, start*base, ... up to n_max."""
    out = [0]
    p = start
    while p <= n_max:
        out.append(p)
        p *= base
    return out


def fixed_point_residual(trajectory: TrajectoryRecord, spec: DisorderSpec | None = None,
                         beta: float | None = None, seed: int = 0,
                         probes: Sequence[int] | None = None, k_top: int | None = None,
                         cost: str = "auto") -> list[ResidualRow]:
    """W(mu_n', T mu_n) at each probed n.

    The trajectory is replayed from its recorded parameters so that the
    update is applied to the full field f_i rather than its truncation.
    mu_n' collects snapshots of f_{i+1}, T mu_n snapshots of one
    independent update draw of f_i (keyed by ``derive(seed, i)``), i <= n.
    """
    spec = trajectory.spec if spec is None else spec
    beta = trajectory.beta if beta is None else beta
    if spec != trajectory.spec or beta != trajectory.beta:
        raise ValueError("spec and beta must match the trajectory")
    validate_beta(spec, beta)
    n_max = trajectory.n_steps - 1
    probes = geometric_probes(n_max) if probes is None else sorted(set(int(p) for p in probes))
    if not probes or probes[0] < 0 or probes[-1] > n_max:
        raise ValueError(f"probes must lie in [0, {n_max}]")
    top = probes[-1]
    k = trajectory.snapshot_k_top if k_top is None else k_top
    radius, floor, d = trajectory.snapshot_radius, trajectory.snapshot_floor, trajectory.d

    def snap(f) -> PSPM:
        return extract_snapshot(f, k, radius, floor, d=d)

    nexts: list[PSPM] = []
    updates: list[PSPM] = []
    for i, coords, ms in iter_fields(d, beta, spec, top + 1, trajectory.seed,
                                     trajectory.prune_below, trajectory.budget_mb):
        if i > 0:
            nexts.append(snap((coords, ms)))
        if i <= top:
            full = PSPM.from_parts(d, [{tuple(int(c) for c in x): float(m)
                                        for x, m in zip(coords, ms)}])
            updates.append(snap(update_sample(full, spec, beta, derive(seed, i))))
    C, _ = cost_matrix(updates, nexts, cost, k)
    exact_rows = np.array([f.n_atoms <= MAX_EXACT_ATOMS for f in updates])
    exact_cols = np.array([g.n_atoms <= MAX_EXACT_ATOMS for g in nexts])
    rows = []
    for n in probes:
        sub = C[: n + 1, : n + 1]
        if cost == "exact":
            flagged = False
        elif cost == "upper":
            flagged = True
        else:
            flagged = not (exact_rows[: n + 1].all() and exact_cols[: n + 1].all())
        rows.append(ResidualRow(n, assignment_value(sub), bool(flagged), int(seed)))
    return rows
