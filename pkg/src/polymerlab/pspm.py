"""Partitioned subprobability measures and their functionals.

A PSPM is a finite list of parts, each a finitely supported positive mass
function on Z^d, of total mass at most 1.  Two PSPMs are identified when they
differ by translating parts individually and relabeling them; the canonical
form picks one representative per class.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ApproximateResult

MASS_TOL = 1e-12
MODE_REL_TOL = 1e-12
EXACT_WINDOW_ATOMS = 64

Coords = tuple[int, ...]
Point = tuple[int, Coords]


@dataclass(frozen=True)
class Part:
    label: int
    atoms: tuple[tuple[Coords, float], ...]

    @cached_property
    def mass(self) -> float:
        return math.fsum(m for _, m in self.atoms)

    @cached_property
    def lookup(self) -> dict:
        return dict(self.atoms)

    def coords_array(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms], dtype=np.int64).reshape(len(self.atoms), -1)

    def mass_array(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=np.float64)


@dataclass(frozen=True)
class PSPM:
    d: int
    parts: tuple[Part, ...] = ()

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        labels = [p.label for p in self.parts]
        if len(set(labels)) != len(labels):
            raise ValueError("part labels must be distinct")
        for p in self.parts:
            if p.label < 0:
                raise ValueError("part labels are nonnegative integers")
            if not p.atoms:
                raise ValueError("parts must be nonempty")
            seen = set()
            for x, m in p.atoms:
                if len(x) != self.d:
                    raise ValueError(f"site {x} is not {self.d}-dimensional")
                if x in seen:
                    raise ValueError(f"site {x} repeated in part {p.label}")
                seen.add(x)
                if not (m > 0 and math.isfinite(m)):
                    raise ValueError("stored atoms must be strictly positive and finite")
        if self.total > 1.0 + MASS_TOL:
            raise ValueError(f"total mass {self.total!r} exceeds 1")

    # construction -------------------------------------------------------

    @classmethod
    def from_parts(cls, d: int, parts: Iterable[Mapping[Sequence[int], float]],
                   labels: Sequence[int] | None = None) -> "PSPM":
        """Build from mass dictionaries; zero atoms and empty parts are dropped."""
        parts = list(parts)
        if labels is None:
            labels = range(len(parts))
        out = []
        for lab, mp in zip(labels, parts):
            atoms = tuple(sorted((tuple(int(c) for c in x), float(m)) for x, m in mp.items() if m != 0))
            if atoms:
                out.append(Part(int(lab), atoms))
        return cls(d, tuple(out))

    @classmethod
    def zero(cls, d: int = 1) -> "PSPM":
        return cls(d, ())

    @classmethod
    def one(cls, d: int = 1) -> "PSPM":
        return cls(d, (Part(0, (((0,) * d, 1.0),)),))

    # access -------------------------------------------------------------

    @cached_property
    def total(self) -> float:
        return math.fsum(m for p in self.parts for _, m in p.atoms)

    @property
    def n_atoms(self) -> int:
        return sum(len(p.atoms) for p in self.parts)

    def atoms(self) -> list[tuple[Point, float]]:
        return [((p.label, x), m) for p in self.parts for x, m in p.atoms]

    @cached_property
    def _lookup(self) -> dict:
        return {(p.label, x): m for p in self.parts for x, m in p.atoms}

    def mass(self, point: Point) -> float:
        return self._lookup.get(point, 0.0)

    def part(self, label: int) -> Part:
        for p in self.parts:
            if p.label == label:
                return p
        raise KeyError(label)

    def scaled(self, alpha: float) -> "PSPM":
        if not 0.0 <= alpha:
            raise ValueError("scale must be nonnegative")
        return PSPM.from_parts(self.d, [{x: alpha * m for x, m in p.atoms} for p in self.parts],
                               [p.label for p in self.parts])

    def translated(self, label: int, shift: Sequence[int]) -> "PSPM":
        """Translate one part; the result is equivalent in the quotient space."""
        parts = []
        for p in self.parts:
            s = shift if p.label == label else (0,) * self.d
            parts.append({tuple(a + b for a, b in zip(x, s)): m for x, m in p.atoms})
        return PSPM.from_parts(self.d, parts, [p.label for p in self.parts])

    def relabeled(self, mapping: Mapping[int, int]) -> "PSPM":
        return PSPM(self.d, tuple(Part(mapping[p.label], p.atoms) for p in self.parts))

    def top_atoms(self, k: int) -> "PSPM":
        """Keep the ``k`` heaviest atoms (ties broken by label, then site)."""
        if k >= self.n_atoms:
            return self
        ranked = sorted(self.atoms(), key=lambda a: (-a[1], a[0]))[:k]
        keep: dict[int, dict] = {}
        for (lab, x), m in ranked:
            keep.setdefault(lab, {})[x] = m
        labs = sorted(keep)
        return PSPM.from_parts(self.d, [keep[l] for l in labs], labs)

    # serialization -------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {"d": self.d, "parts": [
            {"label": p.label, "atoms": [[*x, m] for x, m in p.atoms]} for p in self.parts]}

    def to_json(self) -> str:
        # json writes floats with repr, i.e. 17 significant digits when needed
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "PSPM":
        d = int(obj["d"])
        parts, labels = [], []
        for p in obj["parts"]:
            labels.append(int(p["label"]))
            atoms = {}
            for row in p["atoms"]:
                if len(row) != d + 1:
                    raise ValueError("atom rows are [x1, ..., xd, mass]")
                atoms[tuple(int(c) for c in row[:d])] = float(row[d])
            parts.append(atoms)
        return cls.from_parts(d, parts, labels)

    @classmethod
    def from_json(cls, text: str) -> "PSPM":
        return cls.from_json_obj(json.loads(text))


class CanonicalPSPM(PSPM):
    """A PSPM already in canonical form (see :func:`canonicalize`)."""


def _part_key(atoms: tuple[tuple[Coords, float], ...]):
    masses = sorted((m for _, m in atoms), reverse=True)
    return (-math.fsum(masses), tuple(-m for m in masses), atoms)


def _canonical_atoms(part: Part) -> tuple[tuple[Coords, float], ...]:
    top = max(m for _, m in part.atoms)
    anchor = min(x for x, m in part.atoms if m == top)
    return tuple(sorted((tuple(a - b for a, b in zip(x, anchor)), m) for x, m in part.atoms))


def canonicalize(f: PSPM) -> CanonicalPSPM:
    """Representative invariant under per-part translation and relabeling."""
    shapes = sorted((_canonical_atoms(p) for p in f.parts), key=_part_key)
    return CanonicalPSPM(f.d, tuple(Part(i, s) for i, s in enumerate(shapes)))


def equivalent(f: PSPM, g: PSPM) -> bool:
    c, e = canonicalize(f), canonicalize(g)
    return c.d == e.d and c.parts == e.parts


# --------------------------------------------------------------------------
# atom and part functionals


@dataclass(frozen=True)
class AtomFunctionals:
    total: float
    max_atom: float
    eps_mass: float
    indicator: int


def atom_functionals(f: PSPM, eps: float) -> AtomFunctionals:
    """Total mass, max atom, mass of atoms strictly above eps, and [max >= eps]."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    ms = [m for _, m in f.atoms()]
    mx = max(ms, default=0.0)
    return AtomFunctionals(total=f.total, max_atom=mx,
                           eps_mass=math.fsum(m for m in ms if m > eps),
                           indicator=int(mx >= eps))


@dataclass(frozen=True)
class PartFunctionals:
    N: int
    q: tuple[float, ...]
    m: float
    Q: float


def part_functionals(f: PSPM) -> PartFunctionals:
    """Support number, part masses (descending), max part mass, and Q."""
    q = tuple(sorted((p.mass for p in f.parts), reverse=True))
    Q = 0.0
    for qn in q:
        if qn >= 1.0 - MASS_TOL:
            Q = math.inf
            break
        Q += qn / (1.0 - qn)
    return PartFunctionals(N=len(q), q=q, m=max(q, default=0.0), Q=Q)


# --------------------------------------------------------------------------
# geometry


def _sign_vectors(d: int) -> np.ndarray:
    return np.array([(1,) + s for s in itertools.product((1, -1), repeat=d - 1)], dtype=np.int64)


def set_diameter(coords: np.ndarray) -> int:
    """l1 diameter of a finite point set (0 for a singleton)."""
    if coords.shape[0] <= 1:
        return 0
    proj = coords @ _sign_vectors(coords.shape[1]).T
    return int((proj.max(axis=0) - proj.min(axis=0)).max())


def _feasible(proj: np.ndarray, ms: np.ndarray, need: float, K: int) -> bool:
    """Is there a subset of l1 diameter <= K and mass > need?

    A subset has diameter <= K iff each projection s.x fits in an interval of
    length K; intervals may be anchored at atom projections.
    """
    n_s = proj.shape[1]

    def rec(level: int, cand: np.ndarray) -> bool:
        if level == n_s:
            return True
        p = proj[cand, level]
        for a in np.unique(p):
            sub = cand[(p >= a) & (p <= a + K)]
            if ms[sub].sum() > need and rec(level + 1, sub):
                return True
        return False

    return rec(0, np.arange(ms.shape[0]))


def window_diameter(coords: np.ndarray, ms: np.ndarray, need: float) -> float:
    """Exact smallest l1 diameter of a subset with mass strictly above ``need``."""
    from .lattice import min_window_1d

    coords = np.asarray(coords, dtype=np.int64)
    ms = np.asarray(ms, dtype=np.float64)
    if ms.shape[0] == 0 or math.fsum(ms) <= need:
        return math.inf
    d = coords.shape[1]
    if d == 1:
        order = np.argsort(coords[:, 0], kind="stable")
        return float(min_window_1d(coords[order, 0], ms[order], need))
    if ms.max() > need:
        return 0.0
    proj = coords @ _sign_vectors(d).T
    dist = np.abs(coords[:, None, :] - coords[None, :, :]).sum(axis=2)
    cands = np.unique(dist)
    lo, hi = 0, cands.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(proj, ms, need, int(cands[mid])):
            hi = mid
        else:
            lo = mid + 1
    return float(cands[lo])


def window_diameter_greedy(coords: np.ndarray, ms: np.ndarray, need: float) -> float:
    """Upper bound on :func:`window_diameter` via nearest-first balls."""
    coords = np.asarray(coords, dtype=np.int64)
    ms = np.asarray(ms, dtype=np.float64)
    if ms.shape[0] == 0 or math.fsum(ms) <= need:
        return math.inf
    best = math.inf
    for i in range(coords.shape[0]):
        dist = np.abs(coords - coords[i]).sum(axis=1)
        order = np.argsort(dist, kind="stable")
        acc = np.cumsum(ms[order])
        j = int(np.argmax(acc > need))
        best = min(best, set_diameter(coords[order[: j + 1]]))
    return float(best)


@dataclass(frozen=True)
class GeometryFunctionals:
    W_delta: float
    in_V: bool
    in_G: bool
    favorite_mass: float
    approximate: bool = False


def geometry_functionals(f: PSPM, delta: float, K: int) -> GeometryFunctionals:
    """W_delta, membership in V and G, and the favorite-region mass at K."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if K < 0:
        raise ValueError("K must be nonnegative")
    need = 1.0 - delta
    W = math.inf
    approx = False
    for p in f.parts:
        c, m = p.coords_array(), p.mass_array()
        if f.d > 1 and len(p.atoms) > EXACT_WINDOW_ATOMS:
            w = window_diameter_greedy(c, m, need)
            approx = True
        else:
            w = window_diameter(c, m, need)
        W = min(W, w)
    if approx:
        warnings.warn(ApproximateResult("W_delta from greedy bound on a large part"), stacklevel=2)
    in_V = W <= K
    in_G = in_V and len(f.parts) == 1 and abs(f.total - 1.0) <= MASS_TOL
    return GeometryFunctionals(W_delta=W, in_V=in_V, in_G=in_G,
                               favorite_mass=favorite_mass(f, K), approximate=approx)


def favorite_mass(f: PSPM, K: int) -> float:
    """Mass of the sites within l1 distance K of every mode of f.

    Points of different parts are infinitely far apart, so the region is
    empty when modes occur in more than one part.
    """
    atoms = f.atoms()
    if not atoms:
        return 0.0
    top = max(m for _, m in atoms)
    modes = [pt for pt, m in atoms if m >= top * (1.0 - MODE_REL_TOL)]
    if len({lab for lab, _ in modes}) > 1:
        return 0.0
    lab = modes[0][0]
    tot = []
    for (l2, x), m in atoms:
        if l2 == lab and all(sum(abs(a - b) for a, b in zip(x, y)) <= K for _, y in modes):
            tot.append(m)
    return math.fsum(tot)
