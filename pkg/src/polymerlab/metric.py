"""The metric on partitioned subprobability measures.

For an isometry phi between finite sets of points of N x Z^d,

    d_phi(f, g) = 2 sum_{u in A} |f(u) - g(phi u)| + sum_{u not in A} f(u)^2
                  + sum_{v not in phi A} g(v)^2 + 2^(-deg phi)

and d(f, g) is the infimum over isometries.  Only maps between supports need
be considered: sending an atom to an empty site costs 2 f(u) >= f(u)^2, and
enlarging the domain off the supports only adds nonnegative terms.  Points
in different copies of Z^d are infinitely far apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from numba import njit
from scipy.optimize import linear_sum_assignment

from .errors import TooLarge
from .pspm import PSPM, Point

MAX_EXACT_ATOMS = 12
_INF_DEG = 1 << 60


def _norm(u: Point, v: Point) -> float:
    if u[0] != v[0]:
        return math.inf
    return sum(abs(a - b) for a, b in zip(u[1], v[1]))


def _diff(u: Point, v: Point):
    if u[0] != v[0]:
        return None
    return tuple(a - b for a, b in zip(u[1], v[1]))


def _as_point(p) -> Point:
    lab, x = p
    return int(lab), tuple(int(c) for c in x)


def _violation(u1: Point, u2: Point, v1: Point, v2: Point) -> float:
    """Scale at which the pair (u1->v1, u2->v2) breaks the isometry condition."""
    if _diff(u1, u2) == _diff(v1, v2):
        return math.inf
    return min(_norm(u1, u2), _norm(v1, v2))


@dataclass(frozen=True)
class Isometry:
    """A finite partial injection of N x Z^d, given as (u, phi(u)) pairs."""

    pairs: tuple[tuple[Point, Point], ...] = ()

    def __post_init__(self):
        pairs = tuple((_as_point(u), _as_point(v)) for u, v in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if len({u for u, _ in pairs}) != len(pairs) or len({v for _, v in pairs}) != len(pairs):
            raise ValueError("an isometry must be injective")

    @cached_property
    def mapping(self) -> dict:
        return dict(self.pairs)

    @cached_property
    def degree(self) -> float:
        return degree(self)

    def inverse(self) -> "Isometry":
        return Isometry(tuple((v, u) for u, v in self.pairs))

    def then(self, psi: "Isometry") -> "Isometry":
        """psi after self, defined where self lands in the domain of psi."""
        m = psi.mapping
        return Isometry(tuple((u, m[v]) for u, v in self.pairs if v in m))


def degree(phi: Isometry) -> float:
    """Largest m such that differences below scale m are preserved (inf if all are)."""
    best = math.inf
    p = phi.pairs
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            viol = _violation(p[i][0], p[j][0], p[i][1], p[j][1])
            if viol < best:
                best = viol
    return best


def _penalty(deg: float) -> float:
    return 0.0 if deg == math.inf else 2.0 ** (-deg)


def d_phi(f: PSPM, g: PSPM, phi: Isometry) -> float:
    terms = []
    image = set()
    for u, v in phi.pairs:
        terms.append(2.0 * abs(f.mass(u) - g.mass(v)))
        image.add(v)
    dom = phi.mapping
    terms.extend(m * m for u, m in f.atoms() if u not in dom)
    terms.extend(m * m for v, m in g.atoms() if v not in image)
    terms.append(_penalty(phi.degree))
    return math.fsum(terms)


# --------------------------------------------------------------------------
# exact oracle


def _sorted_atoms(f: PSPM) -> list[tuple[Point, float]]:
    return sorted(f.atoms(), key=lambda a: (-a[1], a[0]))


def distance_exact(f: PSPM, g: PSPM) -> float:
    """Exact d(f, g) by branch and bound over support-to-support injections."""
    return distance_exact_with_map(f, g)[0]


def _assignment_saving(cost: np.ndarray) -> float:
    """Most negative total of an injective selection of entries (entries <= 0)."""
    if cost.size == 0:
        return 0.0
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum())


def distance_exact_with_map(f: PSPM, g: PSPM) -> tuple[float, Isometry]:
    """Exact d(f, g) and an optimal isometry.

    Uses d = min over m of [base + S(m) + 2^-m], where S(m) is the best total
    saving over maps of degree >= m.  S(inf) is an assignment problem between
    parts (each matched part pair moves by one best translation); for finite
    m a depth-first search enforces the degree constraint pairwise and prunes
    with an assignment lower bound.  Only scales m at which even the
    unconstrained saving could beat the incumbent are searched.
    """
    if f.n_atoms > MAX_EXACT_ATOMS or g.n_atoms > MAX_EXACT_ATOMS:
        raise TooLarge(f"exact distance is limited to {MAX_EXACT_ATOMS} atoms per side; "
                       "use distance_upper")
    F = _sorted_atoms(f)
    G = _sorted_atoms(g)
    nf, ng = len(F), len(G)
    base = math.fsum([m * m for _, m in F] + [m * m for _, m in G])
    if nf == 0 or ng == 0:
        return base, Isometry()
    # delta[k, j] < 0 is the saving from matching F[k] with G[j] instead of excluding both
    a = np.array([m for _, m in F])
    b = np.array([m for _, m in G])
    delta = 2.0 * np.abs(a[:, None] - b[None, :]) - a[:, None] ** 2 - b[None, :] ** 2
    neg = np.minimum(delta, 0.0)
    options = [[j for j in np.argsort(delta[k], kind="stable") if delta[k, j] < 0] for k in range(nf)]

    best_val, best_phi = distance_upper_with_map(f, g, k_top=MAX_EXACT_ATOMS)
    v_inf, phi_inf = _best_translation_map(F, G, neg)
    if v_inf < best_val:
        best_val, best_phi = v_inf, phi_inf
    s1 = _assignment_saving(neg)
    viol = np.full((nf, ng, nf, ng), math.inf)
    for k1 in range(nf):
        for j1 in range(ng):
            for k2 in range(k1):
                for j2 in range(ng):
                    if j2 != j1:
                        viol[k1, j1, k2, j2] = _violation(F[k1][0], F[k2][0], G[j1][0], G[j2][0])
    scales = sorted({_norm(F[x][0], F[y][0]) for x in range(nf) for y in range(x)} |
                    {_norm(G[x][0], G[y][0]) for x in range(ng) for y in range(x)})
    scales = [m for m in scales if m != math.inf]
    state = {"val": best_val, "phi": best_phi}

    for m in scales:
        pen_m = 2.0 ** (-m)
        if base + s1 + pen_m >= state["val"] - 1e-15:
            continue
        _constrained_search(F, G, neg, options, viol, m, base, pen_m, state)
    phi = Isometry(tuple(state["phi"].pairs))
    return d_phi(f, g, phi), phi


def _best_translation_map(F, G, neg) -> tuple[float, Isometry]:
    """Optimal map among those of infinite degree (one translation per part pair)."""
    fparts = sorted({p[0] for p, _ in F})
    gparts = sorted({p[0] for p, _ in G})
    gpos = {p: j for j, (p, _) in enumerate(G)}
    gain = np.zeros((len(fparts), len(gparts)))
    chosen: dict = {}
    for P_i, P in enumerate(fparts):
        fk = [k for k, (p, _) in enumerate(F) if p[0] == P]
        for Q_i, Q in enumerate(gparts):
            gk = [j for j, (p, _) in enumerate(G) if p[0] == Q]
            for k0 in fk:
                for j0 in gk:
                    t = tuple(y - x for x, y in zip(F[k0][0][1], G[j0][0][1]))
                    s, pairs = 0.0, []
                    for k in fk:
                        j = gpos.get((Q, tuple(x + c for x, c in zip(F[k][0][1], t))))
                        if j is not None and neg[k, j] < 0:
                            s += neg[k, j]
                            pairs.append((k, j))
                    if s < gain[P_i, Q_i]:
                        gain[P_i, Q_i] = s
                        chosen[P_i, Q_i] = pairs
    r, c = linear_sum_assignment(gain)
    pairs = []
    for P_i, Q_i in zip(r, c):
        if gain[P_i, Q_i] < 0:
            pairs.extend(chosen[P_i, Q_i])
    base_terms = [m * m for _, m in F] + [m * m for _, m in G]
    val = math.fsum(base_terms + [float(neg[k, j]) for k, j in pairs])
    return val, Isometry(tuple((F[k][0], G[j][0]) for k, j in pairs))


def _constrained_search(F, G, neg, options, viol, m, base, pen_m, state) -> None:
    nf, ng = neg.shape
    used = np.zeros(ng, dtype=bool)
    pairs: list[tuple[int, int]] = []

    def bound(k: int) -> float:
        if k >= nf:
            return 0.0
        sub = neg[k:, ~used]
        cheap = max(sub.min(axis=1).sum(), sub.min(axis=0).sum()) if sub.size else 0.0
        if base + cheap + pen_m + saved_now[0] < state["val"] - 1e-15:
            return _assignment_saving(sub)
        return cheap

    saved_now = [0.0]

    def rec(k: int, saved: float):
        if k == nf:
            phi = Isometry(tuple((F[x][0], G[y][0]) for x, y in pairs))
            val = base + saved + _penalty(phi.degree)
            if val < state["val"] - 1e-15:
                state["val"], state["phi"] = val, phi
            return
        saved_now[0] = saved
        if base + saved + bound(k) + pen_m >= state["val"] - 1e-15:
            return
        for j in options[k]:
            if used[j]:
                continue
            ok = True
            for x, y in pairs:
                if viol[k, j, x, y] < m:
                    ok = False
                    break
            if not ok:
                continue
            used[j] = True
            pairs.append((k, j))
            rec(k + 1, saved + neg[k, j])
            pairs.pop()
            used[j] = False
        rec(k + 1, saved)

    rec(0, 0.0)


# --------------------------------------------------------------------------
# scalable upper bound


def pack(f: PSPM, k_top: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(labels, coords, masses) sorted by decreasing mass, optionally top-k only."""
    atoms = _sorted_atoms(f)
    if k_top is not None:
        atoms = atoms[:k_top]
    n = len(atoms)
    lab = np.array([p[0] for p, _ in atoms], dtype=np.int64)
    crd = np.array([p[1] for p, _ in atoms], dtype=np.int64).reshape(n, f.d)
    ms = np.array([m for _, m in atoms], dtype=np.float64)
    return lab, crd, ms


@njit(cache=True)
def _pt_dist(la, ca, lb, cb):
    if la != lb:
        return _INF_DEG
    s = 0
    for k in range(ca.shape[0]):
        s += abs(ca[k] - cb[k])
    return s


@njit(cache=True)
def _pair_violation(lf, cf, lg, cg, i1, j1, i2, j2):
    du = _pt_dist(lf[i1], cf[i1], lf[i2], cf[i2])
    dv = _pt_dist(lg[j1], cg[j1], lg[j2], cg[j2])
    same = False
    if du == _INF_DEG and dv == _INF_DEG:
        same = True
    elif du != _INF_DEG and dv != _INF_DEG:
        same = True
        for k in range(cf.shape[1]):
            if cf[i1, k] - cf[i2, k] != cg[j1, k] - cg[j2, k]:
                same = False
                break
    if same:
        return _INF_DEG
    return min(du, dv)


@njit(cache=True)
def _pen(deg):
    if deg >= _INF_DEG:
        return 0.0
    return 2.0 ** (-float(deg))


@njit(cache=True)
def _greedy_fill(lf, cf, mf, lg, cg, mg, pi, pj, npairs, deg, usedf, usedg):
    """Add single pairs in order of saving while the degree penalty allows it."""
    nf, ng = mf.shape[0], mg.shape[0]
    cand_d = np.empty(nf * ng)
    cand_i = np.empty(nf * ng, np.int64)
    cand_j = np.empty(nf * ng, np.int64)
    nc = 0
    for i in range(nf):
        if usedf[i]:
            continue
        for j in range(ng):
            if usedg[j]:
                continue
            dv = 2.0 * abs(mf[i] - mg[j]) - mf[i] * mf[i] - mg[j] * mg[j]
            if dv < 0.0:
                cand_d[nc] = dv
                cand_i[nc] = i
                cand_j[nc] = j
                nc += 1
    order = np.argsort(cand_d[:nc], kind="mergesort")
    saved = 0.0
    for t in range(nc):
        c = order[t]
        i, j = cand_i[c], cand_j[c]
        if usedf[i] or usedg[j]:
            continue
        nd = deg
        for q in range(npairs):
            v = _pair_violation(lf, cf, lg, cg, pi[q], pj[q], i, j)
            if v < nd:
                nd = v
        if cand_d[c] + _pen(nd) - _pen(deg) < 0.0:
            pi[npairs] = i
            pj[npairs] = j
            npairs += 1
            usedf[i] = True
            usedg[j] = True
            saved += cand_d[c]
            deg = nd
    return npairs, deg, saved


@njit(cache=True)
def _upper_kernel(lf, cf, mf, lg, cg, mg, base):
    """Best of (translation alignment + greedy) and (pure greedy)."""
    nf, ng = mf.shape[0], mg.shape[0]
    d = cf.shape[1]
    best_val = base
    best_pi = np.empty(0, np.int64)
    best_pj = np.empty(0, np.int64)
    if nf == 0 or ng == 0:
        return best_val, best_pi, best_pj
    # part indices
    pf = np.unique(lf)
    pg = np.unique(lg)
    npf, npg = pf.shape[0], pg.shape[0]
    gain = np.zeros((npf, npg))
    shift = np.zeros((npf, npg, d), np.int64)
    t = np.empty(d, np.int64)
    # anchors pair the heaviest atom of a part on one side with any atom on the other
    topf = np.zeros(nf, np.bool_)
    topg = np.zeros(ng, np.bool_)
    for P in range(npf):
        for i in range(nf):
            if lf[i] == pf[P]:
                topf[i] = True
                break
    for Q in range(npg):
        for j in range(ng):
            if lg[j] == pg[Q]:
                topg[j] = True
                break
    for i0 in range(nf):
        P = np.searchsorted(pf, lf[i0])
        for j0 in range(ng):
            if not (topf[i0] or topg[j0]):
                continue
            Q = np.searchsorted(pg, lg[j0])
            for k in range(d):
                t[k] = cg[j0, k] - cf[i0, k]
            s = 0.0
            for i in range(nf):
                if lf[i] != lf[i0]:
                    continue
                for j in range(ng):
                    if lg[j] != lg[j0]:
                        continue
                    ok = True
                    for k in range(d):
                        if cg[j, k] - cf[i, k] != t[k]:
                            ok = False
                            break
                    if ok:
                        dv = 2.0 * abs(mf[i] - mg[j]) - mf[i] * mf[i] - mg[j] * mg[j]
                        if dv < 0.0:
                            s -= dv
            if s > gain[P, Q]:
                gain[P, Q] = s
                shift[P, Q] = t
    for variant in range(2):
        pi = np.empty(min(nf, ng), np.int64)
        pj = np.empty(min(nf, ng), np.int64)
        usedf = np.zeros(nf, np.bool_)
        usedg = np.zeros(ng, np.bool_)
        npairs = 0
        saved = 0.0
        deg = _INF_DEG
        if variant == 0:
            flat = np.argsort(-gain.ravel(), kind="mergesort")
            takenP = np.zeros(npf, np.bool_)
            takenQ = np.zeros(npg, np.bool_)
            for c in flat:
                P, Q = c // npg, c % npg
                if gain[P, Q] <= 0.0:
                    break
                if takenP[P] or takenQ[Q]:
                    continue
                takenP[P] = True
                takenQ[Q] = True
                for i in range(nf):
                    if lf[i] != pf[P]:
                        continue
                    for j in range(ng):
                        if lg[j] != pg[Q]:
                            continue
                        ok = True
                        for k in range(d):
                            if cg[j, k] - cf[i, k] != shift[P, Q, k]:
                                ok = False
                                break
                        if ok:
                            dv = 2.0 * abs(mf[i] - mg[j]) - mf[i] * mf[i] - mg[j] * mg[j]
                            if dv < 0.0:
                                pi[npairs] = i
                                pj[npairs] = j
                                npairs += 1
                                usedf[i] = True
                                usedg[j] = True
                                saved += dv
        npairs, deg, more = _greedy_fill(lf, cf, mf, lg, cg, mg, pi, pj, npairs, deg, usedf, usedg)
        val = base + saved + more + _pen(deg)
        if val < best_val:
            best_val = val
            best_pi = pi[:npairs].copy()
            best_pj = pj[:npairs].copy()
    return best_val, best_pi, best_pj


@njit(cache=True)
def upper_matrix(offA, labA, crdA, mA, sqA, offB, labB, crdB, mB, sqB):
    """distance_upper values for every pair of packed PSPMs (rows A, cols B)."""
    na, nb = offA.shape[0] - 1, offB.shape[0] - 1
    out = np.empty((na, nb))
    for a in range(na):
        s0, s1 = offA[a], offA[a + 1]
        for b in range(nb):
            t0, t1 = offB[b], offB[b + 1]
            v, _, _ = _upper_kernel(labA[s0:s1], crdA[s0:s1], mA[s0:s1],
                                    labB[t0:t1], crdB[t0:t1], mB[t0:t1], sqA[a] + sqB[b])
            out[a, b] = v
    return out


def pack_many(fs: Sequence[PSPM], k_top: int) -> tuple:
    """Concatenated packing of several PSPMs for :func:`upper_matrix`."""
    packs = [pack(f, k_top) for f in fs]
    d = fs[0].d
    off = np.zeros(len(fs) + 1, np.int64)
    off[1:] = np.cumsum([p[2].shape[0] for p in packs])
    lab = np.concatenate([p[0] for p in packs]) if packs else np.zeros(0, np.int64)
    crd = np.concatenate([p[1] for p in packs]).reshape(-1, d)
    ms = np.concatenate([p[2] for p in packs])
    sq = np.array([math.fsum(m * m for _, m in f.atoms()) for f in fs])
    return off, lab, crd, ms, sq


def distance_upper_with_map(f: PSPM, g: PSPM, k_top: int = 16) -> tuple[float, Isometry]:
    if k_top < 1:
        raise ValueError("k_top must be at least 1")
    lf, cf, mf = pack(f, k_top)
    lg, cg, mg = pack(g, k_top)
    base = math.fsum([m * m for _, m in f.atoms()] + [m * m for _, m in g.atoms()])
    _, pi, pj = _upper_kernel(lf, cf, mf, lg, cg, mg, base)
    phi = Isometry(tuple(((int(lf[i]), tuple(int(c) for c in cf[i])),
                          (int(lg[j]), tuple(int(c) for c in cg[j]))) for i, j in zip(pi, pj)))
    return d_phi(f, g, phi), phi


def distance_upper(f: PSPM, g: PSPM, k_top: int = 16) -> float:
    """d_phi for a constructed isometry: an upper bound on d(f, g)."""
    return distance_upper_with_map(f, g, k_top)[0]


def distance(f: PSPM, g: PSPM, k_top: int = 16) -> tuple[float, bool]:
    """Exact distance when both supports are small, else the upper bound.

    Returns (value, is_upper_bound).
    """
    if f.n_atoms <= MAX_EXACT_ATOMS and g.n_atoms <= MAX_EXACT_ATOMS:
        return distance_exact(f, g), False
    return distance_upper(f, g, k_top), True


# --------------------------------------------------------------------------
# test-function metric


@dataclass(frozen=True)
class TestKernel:
    """W(x_1..x_k) = w(x_2 - x_1, ..., x_k - x_1) with w finitely supported.

    ``w`` maps a tuple of k-1 offset vectors to a real weight.
    """

    k: int
    w: tuple[tuple[tuple[tuple[int, ...], ...], float], ...]
    weight: float = 1.0

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("kernels act on k >= 2 points")
        w = tuple((tuple(tuple(int(c) for c in y) for y in offs), float(v)) for offs, v in
                  (self.w.items() if isinstance(self.w, dict) else self.w))
        for offs, _ in w:
            if len(offs) != self.k - 1:
                raise ValueError("each support point needs k-1 offsets")
        object.__setattr__(self, "w", w)
        if not self.weight > 0:
            raise ValueError("weight must be positive")

    @property
    def sup_norm(self) -> float:
        return max((abs(v) for _, v in self.w), default=0.0)


def default_library(d: int) -> list[TestKernel]:
    """k=2 at offsets 0, e1, 2e1, then k=3 on {(0,0), (e1,e1)}; weights 2^-r."""
    z = (0,) * d
    e1 = (1,) + (0,) * (d - 1)
    e2 = (2,) + (0,) * (d - 1)
    kernels = [TestKernel(2, (((z,), 1.0),)), TestKernel(2, (((e1,), 1.0),)),
               TestKernel(2, (((e2,), 1.0),)), TestKernel(3, (((z, z), 1.0), ((e1, e1), 1.0)))]
    return [TestKernel(k.k, k.w, 2.0 ** -(r + 1)) for r, k in enumerate(kernels)]


def test_value(kernel: TestKernel, f: PSPM) -> float:
    """I(W, f): sum over parts and base points of W times the product of masses."""
    terms = []
    for p in f.parts:
        look = p.lookup
        for x, m in p.atoms:
            for offs, wv in kernel.w:
                prod = m
                for y in offs:
                    q = look.get(tuple(a + b for a, b in zip(x, y)))
                    if q is None:
                        prod = 0.0
                        break
                    prod *= q
                if prod:
                    terms.append(wv * prod)
    # fsum is correctly rounded, so the value does not depend on term order
    return math.fsum(terms)


test_value.__test__ = False


def distance_D(f: PSPM, g: PSPM, library: Sequence[TestKernel] | None = None) -> float:
    """Truncated test-function metric sum_r w_r (1 + |W_r|)^-1 |I(W_r, f) - I(W_r, g)|."""
    if library is None:
        library = default_library(f.d)
    if not library:
        raise ValueError("library must be nonempty")
    return math.fsum(k.weight / (1.0 + k.sup_norm) * abs(test_value(k, f) - test_value(k, g))
                     for k in library)


# --------------------------------------------------------------------------
# oracle comparison harness


@dataclass
class OracleRow:
    case_id: int
    d_exact: float
    d_upper: float
    n_atoms_f: int
    n_atoms_g: int

    @property
    def gap(self) -> float:
        return self.d_upper - self.d_exact


def oracle_rows(pairs: Iterable[tuple[PSPM, PSPM]], k_top: int = 16) -> list[OracleRow]:
    rows = []
    for i, (f, g) in enumerate(pairs):
        rows.append(OracleRow(i, distance_exact(f, g), distance_upper(f, g, k_top),
                              f.n_atoms, g.n_atoms))
    return rows


# --------------------------------------------------------------------------
# random generators (tests and the metric-check driver)


def random_pspm(rng: np.random.Generator, d: int = 1, max_atoms: int = 6, max_parts: int = 3,
                spread: int = 3, total: float | None = None) -> PSPM:
    """A random PSPM with at most ``max_atoms`` atoms spread over up to ``max_parts`` parts."""
    n = int(rng.integers(0, max_atoms + 1))
    if n == 0:
        return PSPM.zero(d)
    n_parts = int(rng.integers(1, min(max_parts, n) + 1))
    labels = rng.permutation(np.arange(n_parts + 2))[:n_parts]
    tot = float(rng.uniform(0.2, 1.0)) if total is None else total
    w = rng.dirichlet(np.ones(n)) * tot
    parts: list[dict] = [dict() for _ in range(n_parts)]
    per_part = -(-n // n_parts)
    while (2 * spread + 1) ** d < per_part:
        spread += 1
    for i in range(n):
        p = i % n_parts
        while True:
            x = tuple(int(c) for c in rng.integers(-spread, spread + 1, size=d))
            if x not in parts[p]:
                break
        parts[p][x] = float(w[i])
    return PSPM.from_parts(d, parts, [int(l) for l in labels])


def perturb(rng: np.random.Generator, f: PSPM, scale: float = 0.05, move: float = 0.2,
            drop: float = 0.1) -> PSPM:
    """Translate and relabel parts, jitter masses, occasionally move or drop atoms."""
    parts, labels = [], []
    perm = rng.permutation(len(f.parts) + 2)
    for idx, p in enumerate(f.parts):
        shift = rng.integers(-5, 6, size=f.d)
        atoms = {}
        for x, m in p.atoms:
            if rng.random() < drop:
                continue
            y = tuple(int(a + b) for a, b in zip(x, shift))
            if rng.random() < move:
                y = tuple(int(c + rng.integers(-1, 2)) for c in y)
            atoms[y] = atoms.get(y, 0.0) + m * float(np.exp(rng.normal(0, scale)))
        parts.append(atoms)
        labels.append(int(perm[idx]))
    tot = math.fsum(m for p in parts for m in p.values())
    if tot > 1.0:
        parts = [{x: m / tot for x, m in p.items()} for p in parts]
    return PSPM.from_parts(f.d, parts, labels)
