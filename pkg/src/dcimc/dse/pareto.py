"""Pareto dominance, non-dominated sorting, crowding distance and hypervolume.

Everything here minimizes.  Inputs may be CostVector objects (compared through
``objectives()``, which negates throughput) or plain numeric sequences.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np


def objective_tuple(x) -> tuple:
    if hasattr(x, "objectives"):
        return tuple(x.objectives())
    return tuple(x)


def dominates(u, v) -> bool:
    """True iff u is no worse than v everywhere and strictly better somewhere."""
    a, b = objective_tuple(u), objective_tuple(v)
    if len(a) != len(b):
        raise ValueError("objective vectors differ in length")
    strict = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strict = True
    return strict


def _rank_matrix(points: Sequence) -> np.ndarray:
    """Replace each objective by its dense rank.

    Dense ranks keep every comparison of the original (possibly Fraction)
    values exact while letting numpy do the O(n^2) dominance work.
    """
    objs = [objective_tuple(p) for p in points]
    m = len(objs[0])
    if any(len(o) != m for o in objs):
        raise ValueError("objective vectors differ in length")
    ranks = np.empty((len(objs), m), dtype=np.int64)
    for j in range(m):
        levels = {v: i for i, v in enumerate(sorted({o[j] for o in objs}))}
        ranks[:, j] = [levels[o[j]] for o in objs]
    return ranks


def dominance_matrix(points: Sequence) -> np.ndarray:
    """D[i, j] is True iff point i dominates point j."""
    r = _rank_matrix(points)
    le = (r[:, None, :] <= r[None, :, :]).all(axis=2)
    lt = (r[:, None, :] < r[None, :, :]).any(axis=2)
    return le & lt


def fast_nondominated_sort(points: Sequence) -> list[list[int]]:
    """Partition indices into successive non-dominated fronts (front 0 first)."""
    if len(points) == 0:
        raise ValueError("cannot sort an empty population")
    dom = dominance_matrix(points)
    counts = dom.sum(axis=0)
    fronts = []
    current = np.flatnonzero(counts == 0)
    while current.size:
        fronts.append(current.tolist())
        counts = counts - dom[current].sum(axis=0)
        counts[current] = -1
        current = np.flatnonzero(counts == 0)
    return fronts


def nondominated_indices(points: Sequence) -> list[int]:
    if len(points) == 0:
        return []
    return fast_nondominated_sort(points)[0]


def crowding_distance(front: Sequence) -> list[float]:
    """Normalized cuboid perimeter around each point of one front.

    Boundary points of every objective with a nonzero range get +inf;
    objectives whose values are all equal contribute nothing.
    """
    n = len(front)
    if n == 0:
        raise ValueError("empty front")
    if n <= 2:
        return [math.inf] * n
    objs = np.array([[float(v) for v in objective_tuple(p)] for p in front])
    dist = np.zeros(n)
    for j in range(objs.shape[1]):
        col = objs[:, j]
        order = np.argsort(col, kind="stable")
        span = col[order[-1]] - col[order[0]]
        if span == 0:
            continue
        dist[order[0]] = dist[order[-1]] = math.inf
        gaps = (col[order[2:]] - col[order[:-2]]) / span
        dist[order[1:-1]] += gaps
    return dist.tolist()


def _hv_2d(pts: list[tuple], ref: tuple) -> float:
    pts = sorted(pts)
    vol, best_y = 0.0, ref[1]
    for i, (x, y) in enumerate(pts):
        if y < best_y:
            best_y = y
        nxt = pts[i + 1][0] if i + 1 < len(pts) else ref[0]
        vol += (nxt - x) * (ref[1] - best_y)
    return vol


def _prune(pts: list[tuple]) -> list[tuple]:
    """Drop duplicates and dominated points (keeps slicing cheap)."""
    uniq = sorted(set(pts))
    kept = []
    for p in uniq:
        if not any(all(a <= b for a, b in zip(q, p)) for q in kept):
            kept.append(p)
    return kept


def _hv(pts: list[tuple], ref: tuple) -> float:
    d = len(ref)
    if not pts:
        return 0.0
    if d == 1:
        return ref[0] - min(p[0] for p in pts)
    if d == 2:
        return _hv_2d(pts, ref)
    # slice along the last objective
    pts = sorted(pts, key=lambda p: p[-1])
    vol = 0.0
    for i, p in enumerate(pts):
        top = pts[i + 1][-1] if i + 1 < len(pts) else ref[-1]
        depth = top - p[-1]
        if depth <= 0:
            continue
        vol += depth * _hv(_prune([q[:-1] for q in pts[: i + 1]]), ref[:-1])
    return vol


def hypervolume(front: Sequence, reference) -> float:
    """Exact dominated hypervolume w.r.t. ``reference`` (minimization).

    Points that do not strictly beat the reference in every objective add no
    volume and are dropped.
    """
    ref = tuple(float(v) for v in objective_tuple(reference))
    pts = []
    for p in front:
        q = tuple(float(v) for v in objective_tuple(p))
        if len(q) != len(ref):
            raise ValueError("point and reference differ in dimension")
        if all(a < b for a, b in zip(q, ref)):
            pts.append(q)
    return _hv(_prune(pts), ref)


def reference_point(points: Sequence, margin: float = 0.1) -> tuple[float, ...]:
    """Nadir of ``points`` pushed outward by ``margin`` of each objective's range."""
    objs = np.array([[float(v) for v in objective_tuple(p)] for p in points])
    lo, hi = objs.min(axis=0), objs.max(axis=0)
    span = hi - lo
    pad = np.where(span > 0, span * margin, np.maximum(np.abs(hi) * margin, 1.0))
    return tuple((hi + pad).tolist())
