"""
Quadrature on the reference triangle and the reference edge.

Triangle rules are collapsed (conical) products of Gauss-Jacobi and
Gauss-Legendre rules, so every degree has positive weights and interior
points. Points are returned in barycentric coordinates, weights sum to the
reference area 1/2.

The graded rules integrate functions with a point singularity at one vertex
of a triangle (or one end of a segment) by geometric subdivision towards
that vertex, with ratio 1/2 per level.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 10


@dataclass(frozen=True)
class QuadRule:
    """Quadrature rule.

    ``points`` are barycentric ``(n, 3)`` for triangles and parametric
    ``(n,)`` in [0, 1] for edges.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int


def _check_degree(degree):
    if not isinstance(degree, (int, np.integer)) or not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree!r} (1..{MAX_DEGREE})")


@lru_cache(maxsize=None)
def tri_rule(degree):
    """Rule on the reference triangle exact for total degree ``degree``."""
    _check_degree(degree)
    if degree == 1:
        pts = np.array([[1.0, 1.0, 1.0]]) / 3.0
        w = np.array([0.5])
    elif degree == 2:
        pts = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        w = np.full(3, 1 / 6)
    else:
        n = (degree + 2) // 2
        # x = u, y = (1 - u) v, Jacobian (1 - u)
        tj, wj = roots_jacobi(n, 1.0, 0.0)
        u = (1 + tj) / 2
        wu = wj / 4
        tl, wl = np.polynomial.legendre.leggauss(n)
        v = (1 + tl) / 2
        wv = wl / 2
        U, V = np.meshgrid(u, v, indexing="ij")
        x = U.ravel()
        y = ((1 - U) * V).ravel()
        w = np.outer(wu, wv).ravel()
        pts = np.column_stack([1 - x - y, x, y])
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(pts, w, degree)


@lru_cache(maxsize=None)
def edge_rule(degree):
    """Gauss-Legendre rule on [0, 1] exact for degree ``degree``."""
    _check_degree(degree)
    n = (degree + 2) // 2
    t, w = np.polynomial.legendre.leggauss(n)
    pts = (1 + t) / 2
    w = w / 2
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(pts, w, degree)


def map_tri(rule, corners):
    """Physical points and weights of ``rule`` on triangles.

    ``corners`` has shape (M, 3, 2). Returns points (M, nq, 2) and
    weights (M, nq).
    """
    corners = np.asarray(corners, dtype=float)
    pts = np.einsum("qk,mkd->mqd", rule.points, corners)
    d1 = corners[:, 1] - corners[:, 0]
    d2 = corners[:, 2] - corners[:, 0]
    jac = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    return pts, jac[:, None] * rule.weights[None, :]


def map_edge(rule, a, b):
    """Physical points (M, nq, 2) and weights (M, nq) on segments a -> b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = rule.points
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    length = np.hypot(*(b - a).T)
    return pts, length[:, None] * rule.weights[None, :]


def _aitken(s):
    """Extrapolate the last three partial sums along axis 0, per column."""
    s0, s1, s2 = s
    d1 = s1 - s0
    d2 = s2 - s1
    out = s2.copy()
    scale = np.maximum(np.abs(s2), np.finfo(float).tiny)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = d2 / d1
        ok = (np.abs(d2) > 1e-13 * scale) & (r > 0) & (r < 1)
        out[ok] = s2[ok] + d2[ok] * r[ok] / (1 - r[ok])
    return out


def _red(cells):
    """Split triangles (M, 3, 2) into four each, returning (M, 4, 3, 2)."""
    a, b, c = cells[:, 0], cells[:, 1], cells[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    return np.stack([
        np.stack([a, ab, ca], axis=1),
        np.stack([ab, b, bc], axis=1),
        np.stack([ca, bc, c], axis=1),
        np.stack([ab, bc, ca], axis=1),
    ], axis=1)


def _graded_cells(corners, singular, levels):
    """Triangles of the geometric subdivision towards a vertex.

    Returns ring cells (M, 3*levels, 3, 2) and the corner triangles left
    after ``levels - 2``, ``levels - 1`` and ``levels`` subdivisions, shape
    (3, M, 3, 2).
    """
    corners = np.asarray(corners, dtype=float)
    m = len(corners)
    singular = np.broadcast_to(np.asarray(singular), (m,))
    idx = (singular[:, None] + np.arange(3)[None, :]) % 3
    tri = np.take_along_axis(corners, idx[..., None], axis=1)
    s, p, q = tri[:, 0], tri[:, 1], tri[:, 2]
    rings = np.empty((m, 3 * levels, 3, 2))
    tails = []
    for k in range(levels + 1):
        f = 0.5 ** k
        pk, qk = s + f * (p - s), s + f * (q - s)
        if k >= levels - 2:
            tails.append(np.stack([s, pk, qk], axis=1))
        if k == levels:
            break
        p1, q1 = s + 0.5 * f * (p - s), s + 0.5 * f * (q - s)
        mid = 0.5 * (pk + qk)
        rings[:, 3 * k] = np.stack([pk, mid, p1], axis=1)
        rings[:, 3 * k + 1] = np.stack([qk, q1, mid], axis=1)
        rings[:, 3 * k + 2] = np.stack([p1, mid, q1], axis=1)
    while len(tails) < 3:
        tails.insert(0, tails[0])
    return rings, np.stack(tails)


def graded_integrate_many(f, corners, singular, levels=14, rule=None, extrapolate=True):
    """Integrate ``f`` over many triangles, each graded towards one vertex.

    Parameters
    ----------
    f : callable
        ``f(x, y)`` with ``x, y`` of shape (M, n); row ``i`` belongs to
        triangle ``i``.
    corners : (M, 3, 2) array
    singular : int or (M,) int array
        Local index of the singular vertex.
    levels : int
        Number of geometric subdivisions.
    rule : QuadRule, optional
        Base rule applied on every cell; degree 10 by default.
    extrapolate : bool
        Accelerate the level sequence with Aitken's delta-squared process
        (skipped when the partial sums already agree to rounding, so
        polynomials keep their exact value).
    """
    rule = tri_rule(MAX_DEGREE) if rule is None else rule
    corners = np.asarray(corners, dtype=float)
    m = len(corners)
    if levels == 0:
        pts, w = map_tri(rule, corners)
        return (w * f(pts[..., 0], pts[..., 1])).sum(axis=1)
    rings, tails = _graded_cells(corners, singular, levels)
    nq = len(rule.weights)
    # ring cells are split once more: the singular factor varies strongly across them
    rp, rw = map_tri(rule, _red(rings.reshape(-1, 3, 2)).reshape(-1, 3, 2))
    rp = rp.reshape(m, -1, 2)
    rw = rw.reshape(m, 3 * levels, 4 * nq)
    vals = f(rp[..., 0], rp[..., 1]).reshape(m, 3 * levels, 4 * nq)
    ring_sums = (rw * vals).sum(axis=2)
    tp, tw = map_tri(rule, tails.reshape(-1, 3, 2))
    tp = tp.reshape(3, m, nq, 2).transpose(1, 0, 2, 3).reshape(m, 3 * nq, 2)
    tail_vals = f(tp[..., 0], tp[..., 1]).reshape(m, 3, nq)
    tail_sums = (tw.reshape(3, m, nq).transpose(1, 0, 2) * tail_vals).sum(axis=2)
    # partial sums S_{L-2}, S_{L-1}, S_L: rings below the level plus the corner
    cum = np.cumsum(ring_sums, axis=1)
    partial = []
    for j, lev in enumerate((levels - 2, levels - 1, levels)):
        lev = max(lev, 0)
        below = cum[:, 3 * lev - 1] if lev > 0 else np.zeros(m)
        partial.append(below + tail_sums[:, j])
    partial = np.array(partial)
    if not extrapolate or levels < 2:
        return partial[2]
    return _aitken(partial)


def graded_tri_integrate(f, triangle, singular_vertex, levels=14, base_rule=None, extrapolate=True):
    """Integrate ``f(x, y)`` over one triangle graded towards a vertex.

    ``singular_vertex`` is the local index (0, 1, 2) of the vertex where
    ``f`` may be singular.
    """
    triangle = np.asarray(triangle, dtype=float).reshape(1, 3, 2)
    return float(graded_integrate_many(f, triangle, singular_vertex, levels, base_rule, extrapolate)[0])


def graded_edge_integrate_many(f, a, b, levels=14, rule=None, extrapolate=True):
    """Integrate ``f`` over segments ``a -> b`` graded towards ``a``."""
    rule = edge_rule(MAX_DEGREE) if rule is None else rule
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = len(a)
    if levels == 0:
        pts, w = map_edge(rule, a, b)
        return (w * f(pts[..., 0], pts[..., 1])).sum(axis=1)
    segs_lo, segs_hi = [], []
    for k in range(levels):
        segs_lo.append(a + 0.5 ** (k + 1) * (b - a))
        segs_hi.append(a + 0.5 ** k * (b - a))
    lo = np.stack(segs_lo, axis=1).reshape(-1, 2)
    hi = np.stack(segs_hi, axis=1).reshape(-1, 2)
    pts, w = map_edge(rule, lo, hi)
    nq = len(rule.weights)
    vals = f(pts[..., 0].reshape(m, -1), pts[..., 1].reshape(m, -1)).reshape(m, levels, nq)
    ring_sums = (w.reshape(m, levels, nq) * vals).sum(axis=2)
    cum = np.cumsum(ring_sums, axis=1)
    partial = []
    for lev in (levels - 2, levels - 1, levels):
        lev = max(lev, 0)
        end = a + 0.5 ** lev * (b - a)
        tp, tw = map_edge(rule, a, end)
        tail = (tw * f(tp[..., 0], tp[..., 1])).sum(axis=1)
        partial.append((cum[:, lev - 1] if lev > 0 else 0.0) + tail)
    partial = np.array(partial)
    if not extrapolate or levels < 2:
        return partial[2]
    return _aitken(partial)
