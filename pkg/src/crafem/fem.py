"""
Crouzeix-Raviart P1 nonconforming discretization.

One degree of freedom per edge: the value at the edge midpoint. On a
triangle with local edge ``j`` joining vertices ``t[j]`` and ``t[j+1]``,
the basis function of that edge is ``phi_j = 1 - 2 * lambda_{j+2}`` where
``lambda_{j+2}`` is the barycentric coordinate of the opposite vertex. Hence

* ``grad u_K = -2 * sum_j U_j grad(lambda_{j+2})`` is constant per element;
* the trace of ``u_K`` at vertex ``t[i]`` is ``sum(U) - 2 * U_{i+1}``;
* the value at the centroid is the mean of the three midpoint values.

Dirichlet edges keep their dof (fixed to ``g_D`` at the midpoint) so that
jump and indicator code can treat all edges alike.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import DIRICHLET, INTERIOR, NEUMANN
from .quad import (MAX_DEGREE, _red, edge_rule, graded_edge_integrate_many, graded_integrate_many,
                   map_edge, map_tri, tri_rule)

DIRECT_LIMIT = 200_000
LOAD_DEGREE = 6
ERROR_DEGREE = MAX_DEGREE
GRADING_LEVELS = 14


class SolverError(RuntimeError):
    """Iterative solver failed to reach the requested tolerance."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


# ----------------------------------------------------------------------
# element geometry
# ----------------------------------------------------------------------
def barycentric_gradients(mesh):
    """``(Nt, 3, 2)`` gradients of the barycentric coordinates."""
    p = mesh.vertices[mesh.triangles]
    g = np.empty((mesh.n_elements, 3, 2))
    for i in range(3):
        a = p[:, (i + 1) % 3]
        b = p[:, (i + 2) % 3]
        g[:, i, 0] = a[:, 1] - b[:, 1]
        g[:, i, 1] = b[:, 0] - a[:, 0]
    return g / (2.0 * mesh.areas[:, None, None])


def basis_gradients(mesh):
    """``(Nt, 3, 2)`` gradients of the local CR basis functions."""
    return -2.0 * np.roll(barycentric_gradients(mesh), -2, axis=1)


def local_stiffness(mesh, alpha=None):
    """``(Nt, 3, 3)`` element stiffness matrices ``alpha_K |K| grad phi_j . grad phi_k``."""
    alpha = mesh.element_alpha if alpha is None else alpha
    g = basis_gradients(mesh)
    return (alpha * mesh.areas)[:, None, None] * np.einsum("tjd,tkd->tjk", g, g)


# ----------------------------------------------------------------------
# CR functions
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class CrSolution:
    """Crouzeix-Raviart function: ``values[e]`` is the value at midpoint of edge ``e``."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.n_edges,):
            raise ValueError(f"expected {self.mesh.n_edges} dof values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def local(self):
        """``(Nt, 3)`` dof values in local edge order."""
        return self.values[self.mesh.element_edges]

    @property
    def gradients(self):
        """``(Nt, 2)`` constant gradient per element."""
        return np.einsum("tj,tjd->td", self.local, basis_gradients(self.mesh))

    @property
    def vertex_traces(self):
        """``(Nt, 3)`` value of ``u|_K`` at each local vertex."""
        u = self.local
        return u.sum(axis=1)[:, None] - 2.0 * np.roll(u, -1, axis=1)

    @property
    def centroid_values(self):
        return self.local.mean(axis=1)

    def evaluate(self, elements, x, y):
        """Value of ``u|_K`` at points ``(x, y)`` for elements ``K`` (broadcast)."""
        elements = np.asarray(elements)
        c = self.mesh.centroids[elements]
        g = self.gradients[elements]
        return (self.centroid_values[elements]
                + g[..., 0] * (np.asarray(x) - c[..., 0])
                + g[..., 1] * (np.asarray(y) - c[..., 1]))

    def __mul__(self, c):
        return CrSolution(self.mesh, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other):
        return CrSolution(self.mesh, self.values + _dofs(other))

    def __sub__(self, other):
        return CrSolution(self.mesh, self.values - _dofs(other))


def _dofs(v):
    return v.values if isinstance(v, CrSolution) else np.asarray(v, dtype=float)


def interpolate(mesh, func):
    """CR interpolant: values of ``func(x, y)`` at edge midpoints."""
    m = mesh.midpoints
    return CrSolution(mesh, np.asarray(func(m[:, 0], m[:, 1]), dtype=float))


# ----------------------------------------------------------------------
# assembly and solve
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Linear system over free (non-Dirichlet) edges.

    ``full_matrix`` / ``full_load`` cover all edges (no boundary
    conditions applied); ``matrix`` / ``rhs`` are restricted to ``free``
    with the Dirichlet values lifted to the right-hand side.
    """

    mesh: object
    full_matrix: sp.csr_matrix
    full_load: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    matrix: sp.csr_matrix
    rhs: np.ndarray


def _load_vector(mesh, spec, degree=LOAD_DEGREE):
    rule = tri_rule(degree)
    pts, w = map_tri(rule, mesh.vertices[mesh.triangles])
    fv = spec.f(pts[..., 0], pts[..., 1], mesh.subdomains[:, None])
    # phi_j = 1 - 2 lambda_{j+2} at the quadrature points
    lam = rule.points
    phi = 1.0 - 2.0 * np.roll(lam, -2, axis=1)
    local = np.einsum("tq,tq,qj->tj", w, fv, phi)
    b = np.zeros(mesh.n_edges)
    np.add.at(b, mesh.element_edges.ravel(), local.ravel())

    neu = np.flatnonzero(mesh.edge_tags == NEUMANN)
    if len(neu) and spec.g_N is not None:
        erule = edge_rule(degree)
        a = mesh.vertices[mesh.edges[neu, 0]]
        c = mesh.vertices[mesh.edges[neu, 1]]
        ep, ew = map_edge(erule, a, c)
        g = spec.g_N(ep[..., 0], ep[..., 1])
        k = mesh.edge_elements[neu, 0]
        # traces of the three basis functions of K along the edge
        bg = basis_gradients(mesh)[k]
        cen = mesh.centroids[k]
        d = ep - cen[:, None, :]
        phi_vals = 1.0 / 3.0 + np.einsum("eqd,ejd->eqj", d, bg)
        local = np.einsum("eq,eq,eqj->ej", ew, g, phi_vals)
        np.add.at(b, mesh.element_edges[k].ravel(), local.ravel())
    return b


def assemble(mesh, spec):
    """Assemble the CR system for ``spec`` on ``mesh``.

    Raises ``KeyError`` if a subdomain of the mesh has no coefficient.
    """
    from .mesh import coefficient_array

    alpha = coefficient_array(spec.coefficients, mesh.subdomains)
    loc = local_stiffness(mesh, alpha)
    ee = mesh.element_edges
    rows = np.repeat(ee, 3, axis=1).ravel()
    cols = np.tile(ee, (1, 3)).ravel()
    A = sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(mesh.n_edges,) * 2).tocsr()
    A.sum_duplicates()
    A = 0.5 * (A + A.T)  # exact symmetry after floating-point summation
    A = A.tocsr()
    b = _load_vector(mesh, spec)

    fixed = np.flatnonzero(mesh.edge_tags == DIRICHLET)
    free = np.flatnonzero(mesh.edge_tags != DIRICHLET)
    m = mesh.midpoints[fixed]
    gd = np.asarray(spec.g_D(m[:, 0], m[:, 1]), dtype=float).reshape(-1)
    A_ff = A[free][:, free].tocsr()
    rhs = b[free] - A[free][:, fixed] @ gd
    return SparseSystem(mesh, A, b, free, fixed, gd, A_ff, rhs)


def solve(system, tol=1e-10, method="auto"):
    """Solve the assembled system; returns a :class:`CrSolution`.

    ``method`` is ``"direct"`` (sparse LU), ``"cg"`` (Jacobi-preconditioned
    conjugate gradients, cap ``20 sqrt(n)`` iterations) or ``"auto"``
    (direct below :data:`DIRECT_LIMIT` free dofs).
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    A, b = system.matrix, system.rhs
    n = len(b)
    x = np.zeros(n)
    if n:
        if method == "auto":
            method = "direct" if n < DIRECT_LIMIT else "cg"
        if method == "direct":
            x = spla.splu(A.tocsc()).solve(b)
        elif method == "cg":
            x = _pcg(A, b, tol)
        else:
            raise ValueError(f"unknown solver method {method!r}")
        bnorm = np.linalg.norm(b)
        res = np.linalg.norm(b - A @ x)
        if bnorm > 0 and res > tol * bnorm:
            raise SolverError(f"solver residual {res / bnorm:.3e} above tolerance {tol:.1e}",
                              residual=res / bnorm)
    values = np.empty(system.mesh.n_edges)
    values[system.free] = x
    values[system.fixed] = system.fixed_values
    return CrSolution(system.mesh, values)


def _pcg(A, b, tol):
    n = len(b)
    cap = int(20 * np.sqrt(n)) + 10
    dinv = 1.0 / A.diagonal()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n)
    x = np.zeros(n)
    r = b.copy()
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, cap + 1):
        q = A @ p
        pq = p @ q
        if pq <= 0:
            raise SolverError(f"conjugate gradients broke down at iteration {it}",
                              iterations=it, residual=np.linalg.norm(r) / bnorm)
        a = rz / pq
        x += a * p
        r -= a * q
        if np.linalg.norm(r) <= tol * bnorm:
            return x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"conjugate gradients did not converge in {cap} iterations "
                      f"(residual {np.linalg.norm(r) / bnorm:.3e})",
                      iterations=cap, residual=np.linalg.norm(r) / bnorm)


def solve_problem(mesh, spec, tol=1e-10):
    """Assemble and solve in one call."""
    return solve(assemble(mesh, spec), tol)


# ----------------------------------------------------------------------
# element integrals with grading
# ----------------------------------------------------------------------
def element_integrals(mesh, integrand, singular_points=(), levels=GRADING_LEVELS,
                      degree=ERROR_DEGREE):
    """Integral of ``integrand(x, y, k)`` over every element ``k``.

    ``integrand`` receives point arrays of shape (M, n) and element ids of
    shape (M, 1). Elements with a vertex at a singular point use the graded
    rule (``levels`` subdivisions); elements closer to a singular point than
    their diameter are red-refined twice first.
    """
    rule = tri_rule(degree)
    corners = mesh.vertices[mesh.triangles]
    nt = mesh.n_elements
    out = np.empty(nt)
    touch = np.full(nt, -1)
    near = np.zeros(nt, dtype=bool)
    scale = mesh.diameters
    for sp_ in singular_points:
        d = np.hypot(corners[..., 0] - sp_[0], corners[..., 1] - sp_[1])
        hit = d <= 1e-12 * scale[:, None]
        has = hit.any(axis=1)
        touch[has] = np.argmax(hit[has], axis=1)
        near |= ~has & (d.min(axis=1) < 1.5 * scale)
    near &= touch < 0
    regular = (touch < 0) & ~near

    ids = np.flatnonzero(regular)
    if len(ids):
        for chunk in np.array_split(ids, max(1, len(ids) // 20000)):
            pts, w = map_tri(rule, corners[chunk])
            out[chunk] = (w * integrand(pts[..., 0], pts[..., 1], chunk[:, None])).sum(axis=1)
    ids = np.flatnonzero(near)
    if len(ids):
        cells = _red(_red(corners[ids]).reshape(-1, 3, 2)).reshape(len(ids), 16, 3, 2)
        pts, w = map_tri(rule, cells.reshape(-1, 3, 2))
        nq = len(rule.weights)
        px = pts[..., 0].reshape(len(ids), 16 * nq)
        py = pts[..., 1].reshape(len(ids), 16 * nq)
        out[ids] = (w.reshape(len(ids), -1) * integrand(px, py, ids[:, None])).sum(axis=1)
    ids = np.flatnonzero(touch >= 0)
    if len(ids):
        def f(x, y):
            return integrand(x, y, ids[:, None])
        out[ids] = graded_integrate_many(f, corners[ids], touch[ids], levels, rule)
    return out


# ----------------------------------------------------------------------
# norms and errors
# ----------------------------------------------------------------------
def _as_grad(v):
    if hasattr(v, "grad"):
        return v.grad
    return v


def broken_energy_norm(mesh, spec, v, levels=GRADING_LEVELS):
    """Broken energy norm ``(sum_K ||alpha^{1/2} grad v||_K^2)^{1/2}``.

    ``v`` is a :class:`CrSolution` or dof array (closed form), or an object
    with a ``grad`` attribute / a callable ``grad(x, y) -> (gx, gy)``
    (quadrature, graded at ``spec.singular_points``).
    """
    from .mesh import coefficient_array

    alpha = coefficient_array(spec.coefficients, mesh.subdomains)
    if isinstance(v, CrSolution) or isinstance(v, np.ndarray):
        g = CrSolution(mesh, _dofs(v)).gradients
        return float(np.sqrt(np.sum(alpha * mesh.areas * (g ** 2).sum(axis=1))))
    grad = _as_grad(v)

    def integrand(x, y, k):
        gx, gy = grad(x, y)
        return alpha[k] * (gx ** 2 + gy ** 2)

    return float(np.sqrt(element_integrals(mesh, integrand, spec.singular_points, levels).sum()))


def element_errors(mesh, spec, u_h, levels=GRADING_LEVELS):
    """Per-element ``||alpha^{1/2} grad(u - u_h)||_K^2``."""
    if spec.exact is None:
        raise ValueError(f"problem {spec.name!r} has no exact solution")
    from .mesh import coefficient_array

    alpha = coefficient_array(spec.coefficients, mesh.subdomains)
    gh = u_h.gradients
    grad = spec.exact.grad

    def integrand(x, y, k):
        gx, gy = grad(x, y)
        return alpha[k] * ((gx - gh[:, 0][k]) ** 2 + (gy - gh[:, 1][k]) ** 2)

    return element_integrals(mesh, integrand, spec.singular_points, levels)


def true_error(mesh, spec, u_h, levels=GRADING_LEVELS, norm_u=None):
    """``(|||u - u_h|||, rel_err)``; ``norm_u`` defaults to the problem's |||u|||."""
    from .problems import exact_energy_norm

    err = float(np.sqrt(element_errors(mesh, spec, u_h, levels).sum()))
    norm_u = exact_energy_norm(spec) if norm_u is None else norm_u
    return err, err / norm_u


# ----------------------------------------------------------------------
# edge traces and jumps of CR functions
# ----------------------------------------------------------------------
def edge_endpoint_traces(v):
    """Traces of a CR function at both endpoints of every edge.

    Returns ``(plus, minus)``, each ``(Ne, 2)``: value of ``v|_{K_e^+}`` and
    ``v|_{K_e^-}`` at ``edges[:, 0]`` and ``edges[:, 1]``. ``minus`` is NaN
    on boundary edges.
    """
    mesh = v.mesh
    tr = v.vertex_traces
    t = mesh.triangles

    def side(k):
        valid = k >= 0
        kk = np.maximum(k, 0)
        out = np.full((len(k), 2), np.nan)
        for j in range(2):
            loc = np.argmax(t[kk] == mesh.edges[:, j:j + 1], axis=1)
            out[:, j] = tr[kk, loc]
        out[~valid] = np.nan
        return out

    return side(mesh.edge_elements[:, 0]), side(mesh.edge_elements[:, 1])


def value_jumps(v, g_D=None):
    """Endpoint values ``(Ne, 2)`` of the value jump, linear along each edge.

    Interior: ``v^+ - v^-``; Dirichlet: ``v - g_D`` (``g_D`` evaluated at the
    endpoints, i.e. the jump against the linear interpolant of ``g_D``);
    Neumann: 0. For an interior jump the midpoint value is 0.
    """
    mesh = v.mesh
    plus, minus = edge_endpoint_traces(v)
    out = np.zeros((mesh.n_edges, 2))
    inter = mesh.edge_tags == INTERIOR
    out[inter] = plus[inter] - minus[inter]
    dir_ = np.flatnonzero(mesh.edge_tags == DIRICHLET)
    if len(dir_):
        if g_D is None:
            raise ValueError("g_D required for Dirichlet jumps")
        p = mesh.vertices[mesh.edges[dir_]]
        gd = np.asarray(g_D(p[..., 0], p[..., 1]), dtype=float)
        out[dir_] = plus[dir_] - gd
    return out


def linear_edge_l2_squared(ends, lengths, mid=None):
    """``||w||_e^2`` for ``w`` piecewise linear along the edge.

    With ``mid=None`` ``w`` is linear with the given endpoint values;
    otherwise it is linear on each half with value ``mid`` at the midpoint
    (Simpson's rule is exact for these quadratics).
    """
    a, b = ends[:, 0], ends[:, 1]
    if mid is None:
        return lengths * (a * a + a * b + b * b) / 3.0
    h = lengths / 2.0
    return h * (a * a + a * mid + mid * mid) / 3.0 + h * (mid * mid + mid * b + b * b) / 3.0


def flux_jumps(v, spec):
    """Constant normal flux jump per edge.

    Interior: ``(alpha grad v . n)^+ - (alpha grad v . n)^-`` with ``n``
    outward from the plus element; Dirichlet: 0; Neumann: the mean of
    ``alpha grad v . n - g_N`` over the edge (exact for constant ``g_N``).
    """
    mesh = v.mesh
    from .mesh import coefficient_array

    alpha = coefficient_array(spec.coefficients, mesh.subdomains)
    flux = alpha[:, None] * v.gradients
    n = mesh.normals
    kp, km = mesh.edge_elements[:, 0], mesh.edge_elements[:, 1]
    fp = np.einsum("ed,ed->e", flux[kp], n)
    out = np.zeros(mesh.n_edges)
    inter = mesh.edge_tags == INTERIOR
    out[inter] = fp[inter] - np.einsum("ed,ed->e", flux[km[inter]], n[inter])
    neu = np.flatnonzero(mesh.edge_tags == NEUMANN)
    if len(neu):
        gn = np.zeros(len(neu))
        if spec.g_N is not None:
            erule = edge_rule(LOAD_DEGREE)
            ep, ew = map_edge(erule, mesh.vertices[mesh.edges[neu, 0]], mesh.vertices[mesh.edges[neu, 1]])
            gn = (ew * spec.g_N(ep[..., 0], ep[..., 1])).sum(axis=1) / mesh.edge_lengths[neu]
        out[neu] = fp[neu] - gn
    return out


# ----------------------------------------------------------------------
# L2 representation of the error
# ----------------------------------------------------------------------
def error_representation(mesh, spec, u_h, E_h, levels=GRADING_LEVELS, degree=ERROR_DEGREE):
    """Both sides of the L2 error representation.

    Returns ``(lhs, rhs, terms)`` with ``lhs = a_h(E, E)`` for
    ``E = u - u_h`` and ``rhs = T1 - T2 - T3``:

    * ``T1 = sum_K (r_K, E - E_h)_K`` with ``r_K = f`` (CR fluxes are
      constant per element);
    * ``T2 = sum over interior and Neumann edges of int j_sigma {E - E_h}``;
    * ``T3 = sum over interior and Dirichlet edges of int {alpha grad E . n} j_u``
      with ``j_u = [u_h]`` (interior) or ``u_h - g_D`` (Dirichlet).

    The two sides agree when ``u_h`` is the discrete solution and ``E_h``
    vanishes at Dirichlet midpoints.
    """
    if spec.exact is None:
        raise ValueError(f"problem {spec.name!r} has no exact solution")
    from .mesh import coefficient_array

    E_h = CrSolution(mesh, _dofs(E_h))
    alpha = coefficient_array(spec.coefficients, mesh.subdomains)
    u, gu = spec.exact.value, spec.exact.grad
    gh = u_h.gradients

    lhs = element_errors(mesh, spec, u_h, levels).sum()

    def t1(x, y, k):
        e = u(x, y) - u_h.evaluate(k, x, y) - E_h.evaluate(k, x, y)
        return spec.f(x, y, mesh.subdomains[k]) * e

    T1 = element_integrals(mesh, t1, spec.singular_points, levels, degree).sum()

    tags = mesh.edge_tags
    n = mesh.normals
    js = flux_jumps(u_h, spec)
    has_gN = spec.g_N is not None and np.any(tags == NEUMANN)

    centroids = mesh.centroids

    def side_normal_grad(x, y, k, ne, e):
        """Normal derivative of ``u`` seen from element ``k`` (the gradient may jump across edges).

        Points are pushed into ``k`` perpendicular to the edge by a tiny
        fraction of their distance to the nearer edge endpoint, so the
        correct smooth branch is used even right next to a singular vertex.
        """
        va = mesh.vertices[mesh.edges[e, 0]]
        vb = mesh.vertices[mesh.edges[e, 1]]
        side = np.sign(np.einsum("ed,ed->e", centroids[k[:, 0]] - 0.5 * (va + vb), ne))[:, None]
        r = np.minimum(np.hypot(x - va[:, 0:1], y - va[:, 1:2]), np.hypot(x - vb[:, 0:1], y - vb[:, 1:2]))
        d = 1e-9 * r * side
        gx, gy = gu(x + d * ne[:, 0:1], y + d * ne[:, 1:2])
        return gx * ne[:, 0:1] + gy * ne[:, 1:2]

    def edge_integrands(x, y, e):
        """Pointwise T2 and T3 integrands on edges ``e`` (one row per edge)."""
        kp = mesh.edge_elements[e, 0][:, None]
        km = np.maximum(mesh.edge_elements[e, 1], 0)[:, None]
        inter = (tags[e] == INTERIOR)[:, None]
        ne = n[e]
        ux = u(x, y)
        uh_p = u_h.evaluate(kp, x, y)
        uh_m = u_h.evaluate(km, x, y)
        w_plus = ux - uh_p - E_h.evaluate(kp, x, y)
        w_minus = ux - uh_m - E_h.evaluate(km, x, y)
        avg_w = np.where(inter, 0.5 * (w_plus + w_minus), w_plus)
        jpt = np.broadcast_to(js[e][:, None], x.shape)
        if has_gN:
            # pointwise Neumann flux jump for non-constant g_N
            fp = alpha[kp[:, 0]] * np.einsum("ed,ed->e", gh[kp[:, 0]], ne)
            jpt = np.where((tags[e] == NEUMANN)[:, None], fp[:, None] - spec.g_N(x, y), jpt)
        flux_p = alpha[kp] * (side_normal_grad(x, y, kp, ne, e) - np.einsum("ed,ed->e", gh[kp[:, 0]], ne)[:, None])
        flux_m = alpha[km] * (side_normal_grad(x, y, km, ne, e) - np.einsum("ed,ed->e", gh[km[:, 0]], ne)[:, None])
        avg_flux = np.where(inter, 0.5 * (flux_p + flux_m), flux_p)
        if np.any(tags[e] == DIRICHLET):
            ju = np.where(inter, uh_p - uh_m, uh_p - spec.g_D(x, y))
        else:
            ju = uh_p - uh_m
        t2 = np.where(((tags[e] == INTERIOR) | (tags[e] == NEUMANN))[:, None], jpt * avg_w, 0.0)
        t3 = np.where(((tags[e] == INTERIOR) | (tags[e] == DIRICHLET))[:, None], avg_flux * ju, 0.0)
        return t2, t3

    # edges touching a singular point are integrated with a rule graded towards it
    a = mesh.vertices[mesh.edges[:, 0]].copy()
    b = mesh.vertices[mesh.edges[:, 1]].copy()
    singular = np.zeros(mesh.n_edges, dtype=bool)
    for z in spec.singular_points:
        z = np.asarray(z, dtype=float)
        at_a = np.all(np.abs(a - z) < 1e-12, axis=1)
        at_b = np.all(np.abs(b - z) < 1e-12, axis=1)
        a[at_b], b[at_b] = b[at_b], a[at_b].copy()
        singular |= at_a | at_b
    regular = np.flatnonzero(~singular)
    ep, ew = map_edge(edge_rule(degree), a[regular], b[regular])
    t2, t3 = edge_integrands(ep[..., 0], ep[..., 1], regular)
    T2 = np.sum(ew * t2)
    T3 = np.sum(ew * t3)
    sing = np.flatnonzero(singular)
    if len(sing):
        T2 += graded_edge_integrate_many(
            lambda x, y: edge_integrands(x, y, sing)[0], a[sing], b[sing], levels).sum()
        T3 += graded_edge_integrate_many(
            lambda x, y: edge_integrands(x, y, sing)[1], a[sing], b[sing], levels).sum()

    rhs = T1 - T2 - T3
    return float(lhs), float(rhs), {"T1": float(T1), "T2": float(T2), "T3": float(T3)}


def error_representation_residual(mesh, spec, u_h, E_h, levels=GRADING_LEVELS):
    """``|a_h(E, E) - RHS|`` of the L2 error representation."""
    lhs, rhs, _ = error_representation(mesh, spec, u_h, E_h, levels)
    return abs(lhs - rhs)
