"""
Residual error indicators for Crouzeix-Raviart solutions.

For every element ``K`` three contributions are computed:

* element residual ``h_K^2 / alpha_K ||f||_K^2`` (CR fluxes are constant,
  so the residual is the source term);
* flux jumps, weighted ``h_e / (2 alpha_e^+)`` on interior edges and
  ``h_e / alpha_e`` on Neumann edges;
* solution jumps, weighted ``alpha_e^- / (2 h_e)`` on interior edges and
  ``alpha_e / h_e`` on Dirichlet edges.

The *tangential* variant replaces the solution jump by the jump of the
tangential derivative (weights ``alpha_e^- h_e / 2`` and ``alpha_e h_e``).
Since a CR jump is linear with zero midpoint value,
``||[u_h]||_e = h_e / sqrt(12) ||[du_h/dt]||_e`` and the tangential part is
exactly 12 times the solution-jump part.

The *modified* indicator treats vertices whose coefficient patch is not
quasi-monotone: around such a vertex ``z`` the solution-jump part of ``K``
is replaced by ``alpha_K / (2 h_K) ||I u_h - u_h||^2`` on the boundary of
the corner sub-triangle ``T_{K,z}``, where ``I`` interpolates ``u_h`` into
continuous piecewise linears on the red-refined mesh using, at ``z``, the
trace of ``u_h`` from a maximal-coefficient element ``K_z``.
"""
from dataclasses import dataclass, field

import numpy as np

from .fem import (CrSolution, LOAD_DEGREE, element_integrals, flux_jumps,
                  linear_edge_l2_squared, value_jumps)
from .mesh import DIRICHLET, INTERIOR, NEUMANN, coefficient_array, vertex_star
from .quad import edge_rule, map_edge, map_tri, tri_rule


# ----------------------------------------------------------------------
# report
# ----------------------------------------------------------------------
@dataclass(eq=False)
class IndicatorReport:
    """Per-element indicator components (all squared quantities are
    stored as their square roots, i.e. in energy-norm units).

    ``eta_Ju_tilde`` equals ``eta_Ju`` on elements without a vertex in
    ``n_m``; ``eta_Ju_hat`` is ``(alpha_K/h_K)^{1/2} ||I u_h - u_h||_{dK}``.
    """

    eta_R: np.ndarray
    eta_Jsigma: np.ndarray
    eta_Ju: np.ndarray
    eta_Jtau: np.ndarray
    jsigma: np.ndarray
    ju_norm: np.ndarray
    eta_Ju_tilde: np.ndarray = None
    eta_Ju_hat: np.ndarray = None
    n_m: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    touches_n_m: np.ndarray = None

    @property
    def eta_K(self):
        return np.sqrt(self.eta_R ** 2 + self.eta_Jsigma ** 2 + self.eta_Ju ** 2)

    @property
    def eta_tangential_K(self):
        return np.sqrt(self.eta_R ** 2 + self.eta_Jsigma ** 2 + self.eta_Jtau ** 2)

    @property
    def eta_tilde_K(self):
        if self.eta_Ju_tilde is None:
            raise ValueError("modified indicators not computed")
        mod = np.sqrt(self.eta_R ** 2 + self.eta_Jsigma ** 2 + self.eta_Ju_tilde ** 2)
        return np.where(self.touches_n_m, mod, self.eta_K)

    @property
    def eta(self):
        return float(np.sqrt(np.sum(self.eta_K ** 2)))

    @property
    def eta_tangential(self):
        return float(np.sqrt(np.sum(self.eta_tangential_K ** 2)))

    @property
    def eta_tilde(self):
        return float(np.sqrt(np.sum(self.eta_tilde_K ** 2)))

    @property
    def eta_Ju_total(self):
        return float(np.sqrt(np.sum(self.eta_Ju ** 2)))

    @property
    def eta_Ju_tilde_total(self):
        return float(np.sqrt(np.sum(self.eta_Ju_tilde ** 2)))

    @property
    def eta_Ju_hat_total(self):
        return float(np.sqrt(np.sum(self.eta_Ju_hat ** 2)))

    def indicator(self, which):
        """Per-element indicator: ``standard``, ``modified`` or ``tangential``."""
        if which == "standard":
            return self.eta_K
        if which == "modified":
            return self.eta_tilde_K
        if which == "tangential":
            return self.eta_tangential_K
        raise ValueError(f"unknown estimator {which!r}")

    def total(self, which):
        return float(np.sqrt(np.sum(self.indicator(which) ** 2)))

    def to_csv(self, path):
        """Write ``element,eta_R,eta_Jsigma,eta_Ju,eta_Ju_tilde,eta_K,eta_tilde_K`` rows.

        A trailing comment line lists the vertices of ``n_m``.
        """
        tilde_ju = self.eta_Ju if self.eta_Ju_tilde is None else self.eta_Ju_tilde
        tilde = self.eta_K if self.eta_Ju_tilde is None else self.eta_tilde_K
        lines = ["element,eta_R,eta_Jsigma,eta_Ju,eta_Ju_tilde,eta_K,eta_tilde_K"]
        cols = np.column_stack([self.eta_R, self.eta_Jsigma, self.eta_Ju, tilde_ju, self.eta_K, tilde])
        for k, row in enumerate(cols):
            lines.append(f"{k}," + ",".join(f"{v:.17g}" for v in row))
        lines.append("# n_m: " + " ".join(str(int(z)) for z in self.n_m))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


# ----------------------------------------------------------------------
# standard and tangential indicators
# ----------------------------------------------------------------------
def _element_sum(mesh, edge_values, mask):
    """Sum over the three edges of each element of ``edge_values`` where ``mask``."""
    v = np.where(mask, edge_values, 0.0)
    return v[mesh.element_edges].sum(axis=1)


def _residual_squares(mesh, spec, alpha):
    rule = tri_rule(LOAD_DEGREE)
    pts, w = map_tri(rule, mesh.vertices[mesh.triangles])
    fv = spec.f(pts[..., 0], pts[..., 1], mesh.subdomains[:, None])
    return mesh.diameters ** 2 / alpha * (w * fv ** 2).sum(axis=1)


def _neumann_flux_squares(mesh, spec, u_h, alpha):
    """``||alpha grad u_h . n - g_N||_e^2`` on Neumann edges (0 elsewhere)."""
    out = np.zeros(mesh.n_edges)
    neu = np.flatnonzero(mesh.edge_tags == NEUMANN)
    if not len(neu):
        return out
    k = mesh.edge_elements[neu, 0]
    fn = alpha[k] * np.einsum("ed,ed->e", u_h.gradients[k], mesh.normals[neu])
    if spec.g_N is None:
        out[neu] = fn ** 2 * mesh.edge_lengths[neu]
        return out
    ep, ew = map_edge(edge_rule(LOAD_DEGREE), mesh.vertices[mesh.edges[neu, 0]],
                      mesh.vertices[mesh.edges[neu, 1]])
    out[neu] = (ew * (fn[:, None] - spec.g_N(ep[..., 0], ep[..., 1])) ** 2).sum(axis=1)
    return out


def tangential_jumps(u_h, g_D=None):
    """Constant jump of the tangential derivative per edge.

    Interior: ``(grad u_h^+ - grad u_h^-) . t``; Dirichlet:
    ``grad u_h . t`` minus the slope of the linear interpolant of ``g_D``
    along the edge; Neumann: 0. ``t`` is the unit vector from
    ``edges[:, 0]`` to ``edges[:, 1]``.
    """
    mesh = u_h.mesh
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    h = mesh.edge_lengths
    t = (b - a) / h[:, None]
    g = u_h.gradients
    kp, km = mesh.edge_elements[:, 0], mesh.edge_elements[:, 1]
    out = np.zeros(mesh.n_edges)
    inter = mesh.edge_tags == INTERIOR
    out[inter] = np.einsum("ed,ed->e", g[kp[inter]] - g[km[inter]], t[inter])
    d = mesh.edge_tags == DIRICHLET
    if np.any(d):
        slope = (g_D(b[d, 0], b[d, 1]) - g_D(a[d, 0], a[d, 1])) / h[d]
        out[d] = np.einsum("ed,ed->e", g[kp[d]], t[d]) - slope
    return out


def standard_indicators(mesh, spec, u_h):
    """Standard (and tangential) indicator components for ``u_h``."""
    if u_h.mesh is not mesh and u_h.values.shape != (mesh.n_edges,):
        raise ValueError("solution does not belong to this mesh")
    if u_h.mesh is not mesh:
        u_h = CrSolution(mesh, u_h.values)
    alpha = coefficient_array(spec.coefficients, mesh.subdomains)
    h = mesh.edge_lengths
    kp, km = mesh.edge_elements[:, 0], mesh.edge_elements[:, 1]
    a0 = alpha[kp]
    a1 = np.where(km >= 0, alpha[np.maximum(km, 0)], a0)
    ap, am = np.maximum(a0, a1), np.minimum(a0, a1)
    tags = mesh.edge_tags
    inter = tags == INTERIOR

    eta_R2 = _residual_squares(mesh, spec, alpha)

    js = flux_jumps(u_h, spec)
    js2 = np.where(inter, js ** 2 * h, 0.0) + _neumann_flux_squares(mesh, spec, u_h, alpha)
    wsig = np.where(inter, h / (2 * ap), np.where(tags == NEUMANN, h / ap, 0.0))
    eta_S2 = _element_sum(mesh, wsig * js2, tags != DIRICHLET)

    ends = value_jumps(u_h, spec.g_D)
    ju2 = linear_edge_l2_squared(ends, h)
    wju = np.where(inter, am / (2 * h), np.where(tags == DIRICHLET, ap / h, 0.0))
    eta_U2 = _element_sum(mesh, wju * ju2, tags != NEUMANN)

    jt = tangential_jumps(u_h, spec.g_D)
    wjt = np.where(inter, am * h / 2, np.where(tags == DIRICHLET, ap * h, 0.0))
    eta_T2 = _element_sum(mesh, wjt * jt ** 2 * h, tags != NEUMANN)

    return IndicatorReport(
        eta_R=np.sqrt(eta_R2),
        eta_Jsigma=np.sqrt(eta_S2),
        eta_Ju=np.sqrt(eta_U2),
        eta_Jtau=np.sqrt(eta_T2),
        jsigma=np.where(inter | (tags == NEUMANN), js, 0.0),
        ju_norm=np.sqrt(ju2),
    )


def tangential_indicator(mesh, spec, u_h):
    """Per-element indicator with the tangential-derivative jump."""
    return standard_indicators(mesh, spec, u_h).eta_tangential_K


# ----------------------------------------------------------------------
# quasi-monotonicity
# ----------------------------------------------------------------------
@dataclass(eq=False)
class PatchClassification:
    """Quasi-monotonicity of vertex patches and anchor elements.

    Attributes
    ----------
    quasi_monotone : (Nv,) bool
    anchor : (Nv,) int
        Element ``K_z`` whose trace defines the interpolant at ``z``
        (``-1`` at Dirichlet vertices, where ``g_D`` is used).
    ratio : dict
        ``(K, z) -> C_{K,z}`` for vertices with more than one coefficient.
    path : dict
        ``(K, z) -> tuple`` of elements from ``K`` to ``K_z`` (or to a
        Dirichlet end of the fan) realizing ``C_{K,z}``.
    """

    quasi_monotone: np.ndarray
    anchor: np.ndarray
    ratio: dict
    path: dict

    @property
    def n_m(self):
        return np.flatnonzero(~self.quasi_monotone)

    def c_kz(self, K, z):
        return self.ratio.get((int(K), int(z)), 1.0)


def _arc_component(ok, i, closed):
    """Indices of the maximal run of ``ok`` containing ``i`` (cyclic if closed)."""
    n = len(ok)
    if not ok[i]:
        return set()
    comp = {i}
    for step in (1, -1):
        j = i
        for _ in range(n - 1):
            j = j + step
            if closed:
                j %= n
            elif not 0 <= j < n:
                break
            if not ok[j] or j in comp:
                break
            comp.add(j)
    return comp


def star_quasi_monotone(alpha, closed, dirichlet_ends=None):
    """Quasi-monotonicity of an ordered star with element coefficients ``alpha``.

    ``dirichlet_ends`` lists fan positions (0 and/or ``n - 1``) whose outer
    edge lies on the Dirichlet boundary; pass ``None`` for a vertex not on
    the Dirichlet boundary. Returns one flag per element.
    """
    alpha = np.asarray(alpha, dtype=float)
    top = set(np.flatnonzero(alpha == alpha.max()))
    flags = []
    for i, a in enumerate(alpha):
        comp = _arc_component(alpha >= a, i, closed)
        if dirichlet_ends is None:
            flags.append(top <= comp)
        else:
            flags.append(any(e in comp for e in dirichlet_ends))
    return np.array(flags, dtype=bool)


def _paths(n, i, j, closed):
    """Positions from ``i`` to ``j`` along the star (both directions if closed)."""
    if i == j:
        return [[i]]
    if closed:
        fwd = [(i + s) % n for s in range((j - i) % n + 1)]
        bwd = [(i - s) % n for s in range((i - j) % n + 1)]
        return [fwd, bwd]
    step = 1 if j > i else -1
    return [list(range(i, j + step, step))]


def _best_path(alpha, i, targets, closed):
    best, best_path = np.inf, None
    for j in targets:
        for p in _paths(len(alpha), i, j, closed):
            c = max(alpha[i] / alpha[q] for q in p)
            if c < best:
                best, best_path = c, p
    return best, best_path


def classify_patches(mesh, coefficients=None):
    """Classify every vertex patch and choose anchor elements ``K_z``.

    ``K_z`` is the maximal-coefficient element minimizing
    ``max_K C_{K,z}`` over the star (ties: lowest element id). Paths never
    wrap across the boundary at boundary vertices. At Dirichlet vertices
    ``C_{K,z}`` is taken along the best path to a Dirichlet end of the fan.
    """
    coefficients = mesh.coefficients if coefficients is None else coefficients
    alpha_el = (np.ones(mesh.n_elements) if coefficients is None
                else coefficient_array(coefficients, mesh.subdomains))
    nv = mesh.n_vertices
    qm = np.ones(nv, dtype=bool)
    # default anchor: lowest element id around the vertex
    anchor = np.full(nv, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(anchor, mesh.triangles.ravel(), np.repeat(np.arange(mesh.n_elements), 3))
    lo = np.full(nv, np.inf)
    hi = np.full(nv, -np.inf)
    a3 = np.repeat(alpha_el, 3)
    np.minimum.at(lo, mesh.triangles.ravel(), a3)
    np.maximum.at(hi, mesh.triangles.ravel(), a3)
    dirichlet = mesh.vertex_tags == DIRICHLET
    ratio, path = {}, {}
    for z in np.flatnonzero(lo < hi):
        star = vertex_star(mesh, int(z))
        els = np.array(star.elements)
        a = alpha_el[els]
        n = len(els)
        if dirichlet[z]:
            ends = []
            if mesh.edge_tags[star.edges[0]] == DIRICHLET:
                ends.append(0)
            if mesh.edge_tags[star.edges[-1]] == DIRICHLET:
                ends.append(n - 1)
            qm[z] = bool(star_quasi_monotone(a, star.closed, ends).all())
            anchor[z] = -1
            for i in range(n):
                c, p = _best_path(a, i, ends, star.closed)
                ratio[(int(els[i]), int(z))] = float(c)
                path[(int(els[i]), int(z))] = tuple(int(els[q]) for q in p)
            continue
        qm[z] = bool(star_quasi_monotone(a, star.closed).all())
        tops = np.flatnonzero(a == a.max())
        best = None
        for j in sorted(tops, key=lambda q: els[q]):
            res = [_best_path(a, i, [j], star.closed) for i in range(n)]
            worst = max(c for c, _ in res)
            if best is None or worst < best[0]:
                best = (worst, j, res)
        _, j, res = best
        anchor[z] = els[j]
        for i, (c, p) in enumerate(res):
            ratio[(int(els[i]), int(z))] = float(c)
            path[(int(els[i]), int(z))] = tuple(int(els[q]) for q in p)
    anchor[dirichlet] = -1
    return PatchClassification(quasi_monotone=qm, anchor=anchor, ratio=ratio, path=path)


# ----------------------------------------------------------------------
# interpolation into conforming P1 on the half mesh
# ----------------------------------------------------------------------
def ihalf_interpolate(mesh, half, u_h, classification, g_D):
    """Vertex values of the conforming P1 interpolant on the red-refined mesh.

    Half-mesh vertex ``z < Nv`` is a vertex of ``mesh``; vertex ``Nv + e``
    is the midpoint of edge ``e``. Dirichlet vertices take ``g_D(z)``,
    midpoints take the CR value, other vertices the trace of ``u_h`` from
    the anchor element.
    """
    nv = mesh.n_vertices
    vals = np.empty(nv + mesh.n_edges)
    vals[nv:] = u_h.values
    anchor = classification.anchor
    free = np.flatnonzero(anchor >= 0)
    k = anchor[free]
    loc = mesh.local_index(k, free)
    vals[free] = u_h.vertex_traces[k, loc]
    d = np.flatnonzero(anchor < 0)
    if len(d):
        p = mesh.vertices[d]
        vals[d] = g_D(p[:, 0], p[:, 1])
    return vals


def _vertex_offsets(mesh, u_h, ivals):
    """``delta[K, i] = (I u_h)(t_i) - u_K(t_i)``."""
    return ivals[mesh.triangles] - u_h.vertex_traces


def _half_lengths_at_vertices(mesh):
    """``(Nt, 3)`` sum of the two half-edge lengths of ``K`` meeting at vertex ``i``."""
    h = mesh.edge_lengths[mesh.element_edges]  # edge j = (t_j, t_j+1)
    return 0.5 * (h + np.roll(h, 1, axis=1))


def modified_indicators(mesh, half, spec, u_h, classification, report=None):
    """Complete ``report`` with the modified and auxiliary jump indicators."""
    if report is None:
        report = standard_indicators(mesh, spec, u_h)
    alpha = coefficient_array(spec.coefficients, mesh.subdomains)
    ivals = ihalf_interpolate(mesh, half, u_h, classification, spec.g_D)
    delta = _vertex_offsets(mesh, u_h, ivals)
    ell = _half_lengths_at_vertices(mesh)
    hK = mesh.diameters
    corner = delta ** 2 * ell / 3.0  # ||I u_h - u_h||^2 on the boundary of T_{K,z}
    hat2 = alpha / hK * corner.sum(axis=1)

    # half-edge jump terms per (K, local vertex i)
    h = mesh.edge_lengths
    tags = mesh.edge_tags
    kp, km = mesh.edge_elements[:, 0], mesh.edge_elements[:, 1]
    a0 = alpha[kp]
    a1 = np.where(km >= 0, alpha[np.maximum(km, 0)], a0)
    ap, am = np.maximum(a0, a1), np.minimum(a0, a1)
    ends = value_jumps(u_h, spec.g_D)
    # weight * ||j||^2 on the half edge at each endpoint:
    # jump linear from the endpoint value to 0 at the midpoint
    half_sq = (h / 2)[:, None] * ends ** 2 / 3.0
    w = np.where(tags == INTERIOR, am / (4 * (h / 2)), np.where(tags == DIRICHLET, ap / (2 * (h / 2)), 0.0))
    half_terms = w[:, None] * half_sq  # (Ne, 2)

    t = mesh.triangles
    ee = mesh.element_edges
    near = np.zeros((mesh.n_elements, 3))
    for i in range(3):
        z = t[:, i]
        for j in (i, (i - 1) % 3):
            e = ee[:, j]
            end = (mesh.edges[e, 1] == z).astype(int)
            near[:, i] += half_terms[e, end]

    in_nm = ~classification.quasi_monotone[t]
    tilde2 = np.where(in_nm, alpha[:, None] / (2 * hK[:, None]) * corner, near).sum(axis=1)
    touches = in_nm.any(axis=1)
    report.eta_Ju_tilde = np.where(touches, np.sqrt(tilde2), report.eta_Ju)
    report.eta_Ju_hat = np.sqrt(hat2)
    report.n_m = classification.n_m
    report.touches_n_m = touches
    return report


def compute_indicators(mesh, spec, u_h, classification=None, half=None):
    """Standard, tangential, modified and auxiliary indicators in one report."""
    if classification is None:
        classification = classify_patches(mesh, spec.coefficients)
    report = standard_indicators(mesh, spec, u_h)
    return modified_indicators(mesh, half, spec, u_h, classification, report)


# ----------------------------------------------------------------------
# ratio check for the corner term
# ----------------------------------------------------------------------
def c_kz_bound_check(mesh, u_h, classification, g_D=None, coefficients=None):
    """Compare the corner term with the jumps around each vertex of ``n_m``.

    For every ``z`` in ``n_m`` and ``K`` around ``z`` evaluates

    ``lhs = alpha_K / h_K ||I u_h - u_h||^2_{dT_{K,z}}`` and
    ``rhs = 2 C_{K,z} sum_e alpha_e^- / h_e ||[u_h]||_e^2`` over the half
    edges at ``z`` (Dirichlet half edges with ``alpha_e`` and ``u_h - g_D``).

    Returns ``(max_ratio, rows)`` where rows are ``(K, z, lhs, rhs, C)``;
    a pair with ``rhs == 0`` and ``lhs > 0`` gives ratio ``inf``.
    """
    coefficients = mesh.coefficients if coefficients is None else coefficients
    alpha = (np.ones(mesh.n_elements) if coefficients is None
             else coefficient_array(coefficients, mesh.subdomains))
    ivals = ihalf_interpolate(mesh, None, u_h, classification, g_D)
    delta = _vertex_offsets(mesh, u_h, ivals)
    ell = _half_lengths_at_vertices(mesh)
    hK = mesh.diameters
    ends = value_jumps(u_h, g_D) if np.any(mesh.edge_tags == DIRICHLET) else value_jumps(u_h)
    kp, km = mesh.edge_elements[:, 0], mesh.edge_elements[:, 1]
    a0 = alpha[kp]
    a1 = np.where(km >= 0, alpha[np.maximum(km, 0)], a0)
    amin = np.minimum(a0, a1)
    h = mesh.edge_lengths
    rows = []
    worst = 0.0
    for z in classification.n_m:
        edges = mesh.vertex_edges(z)
        rhs_sum = 0.0
        for e in edges:
            if mesh.edge_tags[e] == NEUMANN:
                continue
            end = int(mesh.edges[e, 1] == z)
            # half edge of length h/2, jump linear from ends[e, end] to 0
            rhs_sum += amin[e] / (h[e] / 2) * (h[e] / 2) * ends[e, end] ** 2 / 3.0
        for K in mesh.vertex_elements(z):
            i = int(np.flatnonzero(mesh.triangles[K] == z)[0])
            lhs = alpha[K] / hK[K] * delta[K, i] ** 2 * ell[K, i] / 3.0
            c = classification.c_kz(K, z)
            rhs = 2 * c * rhs_sum
            r = lhs / rhs if rhs > 0 else (np.inf if lhs > 1e-300 else 0.0)
            worst = max(worst, r)
            rows.append((int(K), int(z), float(lhs), float(rhs), float(c)))
    return worst, rows


# ----------------------------------------------------------------------
# modified Clement interpolation
# ----------------------------------------------------------------------
def clement_interpolate(mesh, v, dirichlet_zero=False, elementwise=False,
                        singular_points=(), levels=14):
    """CR interpolant with ``pi_e v`` = mean of ``v`` over the plus element.

    ``v(x, y)`` (or ``v(x, y, k)`` with ``elementwise=True``, ``k`` the
    element ids of the points) is averaged over ``K_e^+`` for interior edges
    and over the boundary element for boundary edges. With
    ``dirichlet_zero`` the Dirichlet coefficients are set to 0.
    """
    if isinstance(v, CrSolution):
        u = v
        v = lambda x, y, k: u.evaluate(k, x, y)  # noqa: E731
        elementwise = True
    if elementwise:
        integrand = v
    else:
        def integrand(x, y, k):
            return v(x, y)
    means = element_integrals(mesh, integrand, singular_points, levels) / mesh.areas
    vals = means[mesh.edge_elements[:, 0]]
    if dirichlet_zero:
        vals = np.where(mesh.edge_tags == DIRICHLET, 0.0, vals)
    return CrSolution(mesh, vals)
