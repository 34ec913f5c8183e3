"""Profile extraction: from mass functions on Z^d to partitioned measures.

:func:`extract_sequence` follows the constructive compactness argument at a
finite scale.  Atoms of each element are ranked by mass; the difference of
positions of the k-th and l-th ranked atoms either stabilizes (the two atoms
travel together and belong to one part) or grows past a threshold (they
separate).  :func:`extract_snapshot` is the single-measure heuristic used to
turn endpoint fields into small PSPM snapshots.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import Unclassified
from .pspm import PSPM

MassFunction = Union[Mapping, tuple, "PSPM"]


@dataclass(frozen=True)
class ProfileParams:
    k_max: int = 16
    stabilization_window: int = 3
    divergence_threshold: float = 32.0
    mass_floor: float = 1e-4

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if self.stabilization_window < 2:
            raise ValueError("stabilization_window must be at least 2")
        if not self.divergence_threshold > 0:
            raise ValueError("divergence_threshold must be positive")
        if not 0.0 <= self.mass_floor < 1.0:
            raise ValueError("mass_floor must lie in [0, 1)")


def as_arrays(f: MassFunction) -> tuple[np.ndarray, np.ndarray]:
    """Coerce a mass function to (coords[m, d], masses[m]) with zero atoms removed.

    Accepts a mapping site -> mass, a (coords, masses) pair, an endpoint
    field, or a single-part PSPM (read as a mass function on Z^d).
    """
    if isinstance(f, PSPM):
        if len(f.parts) > 1:
            raise ValueError("a PSPM with several parts is not a mass function on Z^d")
        d = f.d
        items = f.parts[0].atoms if f.parts else ()
        coords = np.array([x for x, _ in items], dtype=np.int64).reshape(len(items), d)
        ms = np.array([m for _, m in items], dtype=np.float64)
    elif isinstance(f, tuple) and len(f) == 2 and isinstance(f[0], np.ndarray):
        coords = np.asarray(f[0], dtype=np.int64)
        ms = np.asarray(f[1], dtype=np.float64)
        coords = coords.reshape(ms.shape[0], -1)
    elif hasattr(f, "sparse"):
        coords, ms = f.sparse()
    else:
        keys = list(f.keys())
        if not keys:
            return np.zeros((0, 1), np.int64), np.zeros(0)
        keys = [(k,) if isinstance(k, (int, np.integer)) else tuple(k) for k in keys]
        coords = np.array(keys, dtype=np.int64)
        ms = np.array(list(f.values()), dtype=np.float64)
    if np.any(ms < 0):
        raise ValueError("masses must be nonnegative")
    keep = ms > 0
    return coords[keep], ms[keep]


def ranked(coords: np.ndarray, ms: np.ndarray) -> np.ndarray:
    """Atom order by decreasing mass, ties broken lexicographically by site."""
    keys = [coords[:, k] for k in range(coords.shape[1] - 1, -1, -1)]
    return np.lexsort(keys + [-ms])


def _dimension(f: MassFunction) -> int:
    c, _ = as_arrays(f)
    return c.shape[1]


def extract_snapshot(f: MassFunction, k_max: int = 16, radius: int = 16,
                     floor: float = 1e-4, d: int | None = None) -> PSPM:
    """Cluster the top ``k_max`` atoms (mass >= floor) by single linkage.

    Atoms within l1 distance ``radius`` of a cluster join it (merging any
    clusters they bridge).  Each cluster becomes one part, positioned
    relative to its heaviest atom; parts are labeled in order of that atom.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    coords, ms = as_arrays(f)
    dim = d if d is not None else (coords.shape[1] if coords.size else 1)
    order = ranked(coords, ms)
    order = [i for i in order if ms[i] >= floor][:k_max]
    parent = list(range(len(order)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(len(order)):
        for b in range(a):
            if np.abs(coords[order[a]] - coords[order[b]]).sum() <= radius:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    clusters: dict[int, list[int]] = {}
    for a in range(len(order)):
        clusters.setdefault(find(a), []).append(order[a])
    parts = []
    for root in sorted(clusters):
        members = clusters[root]
        anchor = coords[members[0]]
        parts.append({tuple(int(c) for c in coords[i] - anchor): float(ms[i]) for i in members})
    return PSPM.from_parts(dim, parts)


@dataclass
class SequenceProfile:
    """Detailed output of :func:`extract_sequence_detailed`."""

    pspm: PSPM
    references: list[int]
    assignment: dict[int, int]
    offsets: dict[int, tuple[int, ...]]
    masses: dict[int, float]
    unclassified: list[tuple[int, int]] = field(default_factory=list)


def extract_sequence_detailed(seq: Sequence[MassFunction], params: ProfileParams = ProfileParams()
                              ) -> SequenceProfile:
    W = params.stabilization_window
    if len(seq) < W:
        raise ValueError("sequence is shorter than the stabilization window")
    tail = [as_arrays(f) for f in seq[-W:]]
    d = max(c.shape[1] for c, _ in tail)
    tracked = []  # per element: (positions[k], masses[k]) of the top-k atoms
    for coords, ms in tail:
        o = ranked(coords, ms)[: params.k_max]
        tracked.append((coords[o], ms[o]))
    k_count = min(len(m) for _, m in tracked)
    pos = np.stack([p[:k_count] for p, _ in tracked])  # (W, k, d)
    mass = np.stack([m[:k_count] for _, m in tracked])  # (W, k)

    def classify(k: int, l: int) -> str:
        t = pos[:, k] - pos[:, l]
        if np.all(t == t[-1]):
            return "stable"
        if np.abs(t[-1]).sum() >= params.divergence_threshold:
            return "diverging"
        return "unclassified"

    refs: list[int] = []
    assign: dict[int, int] = {}
    unclassified: list[tuple[int, int]] = []
    for k in range(k_count):
        for r, l in enumerate(refs):
            status = classify(k, l)
            if status == "stable":
                assign[k] = r
                break
            if status == "unclassified":
                unclassified.append((k + 1, l + 1))
        else:
            assign[k] = len(refs)
            refs.append(k)
    offsets = {k: tuple(int(c) for c in pos[-1, k] - pos[-1, refs[assign[k]]]) for k in assign}
    avg = {k: math.fsum(mass[:, k]) / W for k in assign}
    parts: list[dict] = [dict() for _ in refs]
    for k, r in assign.items():
        if avg[k] >= params.mass_floor:
            parts[r][offsets[k]] = avg[k]
    pspm = PSPM.from_parts(d, parts) if k_count else PSPM.zero(d)
    # rescale guards against window averaging pushing the total a hair over 1
    if pspm.total > 1.0:
        pspm = pspm.scaled(1.0 / pspm.total)
    return SequenceProfile(pspm=pspm, references=[r + 1 for r in refs],
                           assignment={k + 1: r + 1 for k, r in assign.items()},
                           offsets={k + 1: v for k, v in offsets.items()},
                           masses={k + 1: v for k, v in avg.items()},
                           unclassified=unclassified)


def extract_sequence(seq: Sequence[MassFunction], params: ProfileParams = ProfileParams()) -> PSPM:
    """Limit profile of a sequence of mass functions, one part per cluster.

    Pairs that neither stabilize nor separate are treated as separating and
    reported through an :class:`~polymerlab.errors.Unclassified` warning.
    """
    out = extract_sequence_detailed(seq, params)
    if out.unclassified:
        warnings.warn(Unclassified(out.unclassified), stacklevel=2)
    return out.pspm


def q_family(n: int) -> dict:
    """Mass 1/2 at n and 1/(2n) on each site of [0, n)."""
    f = {(x,): 1.0 / (2 * n) for x in range(n)}
    f[(n,)] = 0.5
    return f


def r_family(n: int) -> dict:
    """Mass 1/5 at -2n, -n, n, n+1 and 1/(5n) on each site of [0, n)."""
    f = {(x,): 1.0 / (5 * n) for x in range(n)}
    for x in (-2 * n, -n, n, n + 1):
        f[(x,)] = 0.2
    return f
