"""
Conforming triangulations with full edge topology.

A :class:`Mesh` stores vertices, triangles (with subdomain ids) and the
derived edge structure needed by a nonconforming discretization: every edge
knows its two neighbouring elements, ordered so that the first ("plus")
element carries the larger diffusion coefficient, and every boundary edge
carries a Dirichlet/Neumann tag.

Local numbering convention for a triangle ``(t0, t1, t2)``:

* vertices are stored counter-clockwise;
* local edge ``j`` joins ``t[j]`` and ``t[(j + 1) % 3]``, so edge 0 is
  ``(t0, t1)``, and it is the refinement edge used by newest-vertex
  bisection (``t2`` is the newest vertex).

Meshes are immutable; :func:`bisect` and :func:`half_refine` return new
objects.

Example
-------

>>> import numpy as np
>>> from crafem.mesh import build_mesh
>>> m = build_mesh([[0, 0], [1, 0], [1, 1], [0, 1]],
...                [[0, 1, 2], [0, 2, 3]], boundary="D")
>>> m.n_elements, m.n_edges
(2, 5)
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

INTERIOR, DIRICHLET, NEUMANN = 0, 1, 2
_TAG_CODES = {"I": INTERIOR, "D": DIRICHLET, "N": NEUMANN}
_TAG_NAMES = {DIRICHLET: "D", NEUMANN: "N"}


class MeshError(ValueError):
    """Raised for invalid mesh input (degenerate, non-conforming, untagged)."""


def _tag_code(tag):
    if isinstance(tag, (int, np.integer)):
        if int(tag) not in (DIRICHLET, NEUMANN):
            raise MeshError(f"invalid boundary tag {tag!r}")
        return int(tag)
    try:
        code = _TAG_CODES[str(tag).upper()]
    except KeyError:
        raise MeshError(f"invalid boundary tag {tag!r}") from None
    if code == INTERIOR:
        raise MeshError("boundary edges cannot be tagged interior")
    return code


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation with edge topology.

    Attributes
    ----------
    vertices : (Nv, 2) float array
    triangles : (Nt, 3) int array
        Counter-clockwise; ``(t0, t1)`` is the refinement edge.
    subdomains : (Nt,) int array
    edges : (Ne, 2) int array
        Endpoints with ``edges[:, 0] < edges[:, 1]``.
    edge_elements : (Ne, 2) int array
        Plus element and minus element (``-1`` on the boundary). The plus
        element has the larger coefficient; ties go to the lower id.
    edge_tags : (Ne,) int array
        :data:`INTERIOR`, :data:`DIRICHLET` or :data:`NEUMANN`.
    element_edges : (Nt, 3) int array
        Global id of local edge ``j`` (joining ``t[j]`` and ``t[j+1]``).
    coefficients : dict or None
        Subdomain id -> diffusion coefficient used for the orientation.
    parent : (Nt,) int array or None
        Element of the previous mesh each element was produced from.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    subdomains: np.ndarray
    edges: np.ndarray
    edge_elements: np.ndarray
    edge_tags: np.ndarray
    element_edges: np.ndarray
    coefficients: dict = None
    parent: np.ndarray = field(default=None, repr=False)

    # -- sizes ---------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    # -- geometry ------------------------------------------------------
    @cached_property
    def areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def midpoints(self):
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    @cached_property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def diameters(self):
        """Element diameter h_K (longest edge)."""
        return self.edge_lengths[self.element_edges].max(axis=1)

    @cached_property
    def inscribed_diameters(self):
        """Diameter rho_K of the inscribed circle."""
        perimeter = self.edge_lengths[self.element_edges].sum(axis=1)
        return 4.0 * self.areas / perimeter

    @cached_property
    def shape_ratios(self):
        return self.diameters / self.inscribed_diameters

    @cached_property
    def normals(self):
        """Unit normal of each edge, outward with respect to the plus element."""
        a = self.vertices[self.edges[:, 0]]
        b = self.vertices[self.edges[:, 1]]
        d = (b - a) / self.edge_lengths[:, None]
        n = np.column_stack([d[:, 1], -d[:, 0]])
        # flip where n points into the plus element
        c = self.centroids[self.edge_elements[:, 0]]
        inward = np.einsum("ij,ij->i", n, c - a) > 0
        n[inward] *= -1
        return n

    @cached_property
    def tangents(self):
        """Unit tangent ``(-n2, n1)`` of each edge."""
        n = self.normals
        return np.column_stack([-n[:, 1], n[:, 0]])

    @cached_property
    def element_alpha(self):
        if self.coefficients is None:
            return np.ones(self.n_elements)
        return coefficient_array(self.coefficients, self.subdomains)

    @cached_property
    def edge_alpha(self):
        """``(alpha_e^+, alpha_e^-)`` per edge; boundary edges repeat alpha_e."""
        a = self.element_alpha
        plus = a[self.edge_elements[:, 0]]
        minus_ids = self.edge_elements[:, 1]
        minus = np.where(minus_ids >= 0, a[np.maximum(minus_ids, 0)], plus)
        return np.column_stack([plus, minus])

    # -- topology ------------------------------------------------------
    @cached_property
    def is_boundary_edge(self):
        return self.edge_elements[:, 1] < 0

    @cached_property
    def _vertex_elements_csr(self):
        flat = self.triangles.ravel()
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=self.n_vertices)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        return offsets, order // 3

    @cached_property
    def _vertex_edges_csr(self):
        flat = self.edges.ravel()
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=self.n_vertices)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        return offsets, order // 2

    def vertex_elements(self, z):
        off, idx = self._vertex_elements_csr
        return idx[off[z]:off[z + 1]]

    def vertex_edges(self, z):
        off, idx = self._vertex_edges_csr
        return idx[off[z]:off[z + 1]]

    @cached_property
    def vertex_tags(self):
        """Vertex classification: Dirichlet wins over Neumann wins over interior."""
        tags = np.zeros(self.n_vertices, dtype=np.int8)
        for code in (NEUMANN, DIRICHLET):
            sel = self.edges[self.edge_tags == code].ravel()
            tags[sel] = code
        return tags

    def local_index(self, elements, z):
        """Local index of vertex ``z`` in each of ``elements``."""
        z = np.asarray(z)
        return np.argmax(self.triangles[elements] == (z[..., None] if z.ndim else z), axis=1)

    def element_vertex_alpha_range(self):
        """Minimum and maximum element coefficient around each vertex."""
        a = np.repeat(self.element_alpha, 3)
        flat = self.triangles.ravel()
        lo = np.full(self.n_vertices, np.inf)
        hi = np.full(self.n_vertices, -np.inf)
        np.minimum.at(lo, flat, a)
        np.maximum.at(hi, flat, a)
        return lo, hi

    def boundary_edge_list(self):
        """``[(v0, v1, 'D'|'N'), ...]`` for every boundary edge."""
        ids = np.flatnonzero(self.is_boundary_edge)
        return [(int(self.edges[i, 0]), int(self.edges[i, 1]), _TAG_NAMES[int(self.edge_tags[i])])
                for i in ids]

    def with_coefficients(self, coefficients):
        """Same mesh, edges re-oriented for a new coefficient map."""
        return orient_edges(self, coefficients)


def coefficient_array(coefficients, subdomains):
    """Map subdomain ids to coefficient values, raising on missing ids."""
    subdomains = np.asarray(subdomains)
    out = np.empty(len(subdomains))
    for s in np.unique(subdomains):
        try:
            out[subdomains == s] = coefficients[int(s)]
        except KeyError:
            raise KeyError(f"no coefficient for subdomain {int(s)}") from None
    return out


# ----------------------------------------------------------------------
# construction
# ----------------------------------------------------------------------
def _edge_keys(a, b, nv):
    lo = np.minimum(a, b).astype(np.int64)
    hi = np.maximum(a, b).astype(np.int64)
    return lo * nv + hi


def _orientation(edge_elements, element_alpha):
    """Order (plus, minus) so alpha_plus >= alpha_minus, ties to lower id."""
    ee = edge_elements.copy()
    k0, k1 = ee[:, 0], ee[:, 1]
    interior = k1 >= 0
    a0 = element_alpha[k0]
    a1 = np.where(interior, element_alpha[np.maximum(k1, 0)], -np.inf)
    swap = interior & ((a1 > a0) | ((a1 == a0) & (k1 < k0)))
    ee[swap] = ee[swap][:, ::-1]
    return ee


def _assemble(vertices, triangles, subdomains, boundary_tagger, coefficients, parent=None):
    """Edge topology from (already oriented, validated) triangles.

    ``boundary_tagger(edge_array)`` returns tag codes for the boundary edges.
    """
    nv = len(vertices)
    nt = len(triangles)
    a = triangles
    b = np.roll(triangles, -1, axis=1)
    keys = _edge_keys(a, b, nv).ravel()
    uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("non-conforming input: an edge is shared by more than two triangles")
    edges = np.column_stack([uniq // nv, uniq % nv]).astype(np.int64)
    element_edges = inverse.reshape(nt, 3)

    ne = len(edges)
    edge_elements = np.full((ne, 2), -1, dtype=np.int64)
    order = np.argsort(inverse, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    edge_elements[:, 0] = order[starts] // 3
    two = counts == 2
    edge_elements[two, 1] = order[starts[two] + 1] // 3

    alpha = np.ones(nt) if coefficients is None else coefficient_array(coefficients, subdomains)
    edge_elements = _orientation(edge_elements, alpha)

    tags = np.zeros(ne, dtype=np.int8)
    bnd = np.flatnonzero(edge_elements[:, 1] < 0)
    if len(bnd):
        tags[bnd] = boundary_tagger(edges[bnd])
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        subdomains=subdomains,
        edges=edges,
        edge_elements=edge_elements,
        edge_tags=tags,
        element_edges=element_edges,
        coefficients=None if coefficients is None else dict(coefficients),
        parent=parent,
    )


def _check_hanging_nodes(vertices, edges):
    """Raise if a vertex lies inside one of the given (single-incidence) edges."""
    p = vertices
    for start in range(0, len(edges), 256):
        e = edges[start:start + 256]
        a = p[e[:, 0]][:, None, :]
        d = p[e[:, 1]][:, None, :] - a
        w = p[None, :, :] - a
        L2 = (d ** 2).sum(-1)
        s = (w * d).sum(-1) / L2
        cross = d[..., 0] * w[..., 1] - d[..., 1] * w[..., 0]
        dist = np.abs(cross) / np.sqrt(L2)
        inside = (s > 1e-10) & (s < 1 - 1e-10) & (dist <= 1e-10 * np.sqrt(L2))
        if np.any(inside):
            k, v = np.argwhere(inside)[0]
            raise MeshError(
                f"non-conforming input: hanging node {v} on edge "
                f"({e[k, 0]}, {e[k, 1]})"
            )


def build_mesh(vertices, triangles, subdomains=None, boundary="D",
               coefficients=None, refinement="longest", subdomain_of=None):
    """Build and validate a conforming mesh.

    Parameters
    ----------
    vertices : (Nv, 2) array_like
    triangles : (Nt, 3) array_like of int
    subdomains : (Nt,) array_like of int, optional
        Defaults to a single subdomain ``0``.
    boundary : str, callable or mapping
        Boundary tagging. A single tag (``"D"`` or ``"N"``) for the whole
        boundary; a callable ``f(x, y) -> tags`` evaluated at boundary edge
        midpoints; or a mapping ``{(v0, v1): tag}`` listing every boundary
        edge.
    coefficients : dict, optional
        Subdomain -> coefficient, used to orient interior edges.
    refinement : {"longest", "given"}
        Refinement edge of each triangle: its longest edge, or the edge
        ``(t0, t1)`` as given.
    subdomain_of : callable, optional
        ``f(x, y) -> subdomain ids``; when given, elements cut by an
        interface are rejected.
    """
    vertices = np.array(vertices, dtype=float).reshape(-1, 2)
    tri = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    nv = len(vertices)
    if len(tri) == 0:
        raise MeshError("mesh has no triangles")
    if tri.min() < 0 or tri.max() >= nv:
        raise MeshError("triangle vertex index out of range")
    if subdomains is None:
        subdomains = np.zeros(len(tri), dtype=np.int64)
    subdomains = np.array(subdomains, dtype=np.int64).reshape(-1)
    if len(subdomains) != len(tri):
        raise MeshError("one subdomain id per triangle required")

    if np.any((tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])):
        raise MeshError("degenerate element: repeated vertex id")
    used = np.zeros(nv, dtype=bool)
    used[tri.ravel()] = True
    if not used.all():
        raise MeshError(f"vertex {int(np.flatnonzero(~used)[0])} is not used by any triangle")

    p = vertices[tri]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    scale = np.maximum((d1 ** 2).sum(1), (d2 ** 2).sum(1))
    if np.any(np.abs(area2) <= 1e-13 * scale):
        raise MeshError("degenerate element: zero area")
    cw = area2 < 0
    tri[cw] = tri[cw][:, [1, 0, 2]]

    if refinement == "longest":
        q = vertices[tri]
        lengths = np.stack([((q[:, (j + 1) % 3] - q[:, j]) ** 2).sum(1) for j in range(3)], axis=1)
        j = np.argmax(lengths, axis=1)
        idx = (j[:, None] + np.arange(3)[None, :]) % 3
        tri = np.take_along_axis(tri, idx, axis=1)
    elif refinement != "given":
        raise ValueError("refinement must be 'longest' or 'given'")

    if subdomain_of is not None:
        bary = np.array([[1, 1, 1], [4, 1, 1], [1, 4, 1], [1, 1, 4]], dtype=float) / np.array([[3], [6], [6], [6]])
        pts = np.einsum("qk,tkd->tqd", bary, vertices[tri])
        sub = np.asarray(subdomain_of(pts[..., 0], pts[..., 1]))
        bad = np.any(sub != subdomains[:, None], axis=1)
        if np.any(bad):
            raise MeshError(f"interface cuts element {int(np.flatnonzero(bad)[0])}")

    # conformity: single-incidence edges must not carry other vertices
    keys = _edge_keys(tri, np.roll(tri, -1, axis=1), nv).ravel()
    uniq, counts = np.unique(keys, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("non-conforming input: an edge is shared by more than two triangles")
    single = uniq[counts == 1]
    _check_hanging_nodes(vertices, np.column_stack([single // nv, single % nv]))

    tagger = _make_tagger(boundary, vertices)
    return _assemble(vertices, tri, subdomains, tagger, coefficients)


def _make_tagger(boundary, vertices):
    if boundary is None:
        def tagger(edges):
            raise MeshError(f"untagged boundary edge ({edges[0, 0]}, {edges[0, 1]})")
    elif callable(boundary):
        def tagger(edges):
            mid = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
            raw = np.asarray(boundary(mid[:, 0], mid[:, 1]), dtype=object).reshape(-1)
            if raw.size == 1 and len(edges) > 1:
                raw = np.repeat(raw, len(edges))
            out = np.empty(len(edges), dtype=np.int8)
            for i, t in enumerate(raw):
                if t is None:
                    raise MeshError(f"untagged boundary edge ({edges[i, 0]}, {edges[i, 1]})")
                out[i] = _tag_code(t)
            return out
    elif isinstance(boundary, (str, int, np.integer)):
        code = _tag_code(boundary)

        def tagger(edges):
            return np.full(len(edges), code, dtype=np.int8)
    else:
        lookup = {(min(a, b), max(a, b)): _tag_code(t) for (a, b), t in dict(boundary).items()}

        def tagger(edges):
            out = np.empty(len(edges), dtype=np.int8)
            for i, (a, b) in enumerate(edges):
                try:
                    out[i] = lookup[(int(a), int(b))]
                except KeyError:
                    raise MeshError(f"untagged boundary edge ({a}, {b})") from None
            return out
    return tagger


def orient_edges(mesh, coefficients):
    """Return ``mesh`` with edge plus/minus sides recomputed for ``coefficients``."""
    alpha = coefficient_array(coefficients, mesh.subdomains)
    return Mesh(
        vertices=mesh.vertices,
        triangles=mesh.triangles,
        subdomains=mesh.subdomains,
        edges=mesh.edges,
        edge_elements=_orientation(mesh.edge_elements, alpha),
        edge_tags=mesh.edge_tags,
        element_edges=mesh.element_edges,
        coefficients=dict(coefficients),
        parent=mesh.parent,
    )


def _inherited_tagger(old, new_vertex_parent_edge):
    """Tags for new boundary edges from the old edges they lie on."""
    nv_old = old.n_vertices
    old_keys = old.edges[:, 0].astype(np.int64) * nv_old + old.edges[:, 1]

    def tagger(edges):
        a, b = edges[:, 0], edges[:, 1]
        parent = np.empty(len(edges), dtype=np.int64)
        new_a = a >= nv_old
        new_b = b >= nv_old
        parent[new_a] = new_vertex_parent_edge[a[new_a] - nv_old]
        sel = ~new_a & new_b
        parent[sel] = new_vertex_parent_edge[b[sel] - nv_old]
        both_old = ~new_a & ~new_b
        k = np.minimum(a[both_old], b[both_old]) * nv_old + np.maximum(a[both_old], b[both_old])
        parent[both_old] = np.searchsorted(old_keys, k)
        return old.edge_tags[parent]

    return tagger


# ----------------------------------------------------------------------
# refinement
# ----------------------------------------------------------------------
def bisect(mesh, marked):
    """Newest-vertex bisection of the marked elements with conforming closure.

    Every marked element is bisected at least once (across its refinement
    edge). Further bisections are added until the mesh is conforming.
    Returns a new :class:`Mesh` whose ``parent`` array maps each element to
    the element of ``mesh`` it came from.
    """
    marked = np.asarray(list(marked) if not isinstance(marked, np.ndarray) else marked, dtype=np.int64)
    if marked.size and (marked.min() < 0 or marked.max() >= mesh.n_elements):
        raise IndexError("marked element id out of range")
    if marked.size == 0:
        return mesh

    ee = mesh.element_edges
    refine_edge = np.zeros(mesh.n_edges, dtype=bool)
    refine_edge[ee[marked, 0]] = True
    while True:
        m = refine_edge[ee]
        need = ~m[:, 0] & (m[:, 1] | m[:, 2])
        if not need.any():
            break
        refine_edge[ee[need, 0]] = True

    nv = mesh.n_vertices
    split = np.flatnonzero(refine_edge)
    new_index = np.full(mesh.n_edges, -1, dtype=np.int64)
    new_index[split] = nv + np.arange(len(split))
    vertices = np.vstack([mesh.vertices, mesh.midpoints[split]])

    t = mesh.triangles
    m = refine_edge[ee]
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    m0, m1, m2 = new_index[ee[:, 0]], new_index[ee[:, 1]], new_index[ee[:, 2]]

    case = np.where(~m[:, 0], 0, 1 + m[:, 1] + 2 * m[:, 2])  # 0 keep, 1 bisect, 2 +b-c, 3 +c-a, 4 all
    nchild = np.array([1, 2, 3, 3, 4])[case]
    start = np.concatenate([[0], np.cumsum(nchild)[:-1]])
    out = np.empty((int(nchild.sum()), 3), dtype=np.int64)

    def put(sel, slot, rows):
        out[start[sel] + slot] = rows

    s = case == 0
    put(s, 0, t[s])
    s = case == 1
    put(s, 0, np.column_stack([c[s], a[s], m0[s]]))
    put(s, 1, np.column_stack([b[s], c[s], m0[s]]))
    s = case == 2
    put(s, 0, np.column_stack([c[s], a[s], m0[s]]))
    put(s, 1, np.column_stack([m0[s], b[s], m1[s]]))
    put(s, 2, np.column_stack([c[s], m0[s], m1[s]]))
    s = case == 3
    put(s, 0, np.column_stack([m0[s], c[s], m2[s]]))
    put(s, 1, np.column_stack([a[s], m0[s], m2[s]]))
    put(s, 2, np.column_stack([b[s], c[s], m0[s]]))
    s = case == 4
    put(s, 0, np.column_stack([m0[s], c[s], m2[s]]))
    put(s, 1, np.column_stack([a[s], m0[s], m2[s]]))
    put(s, 2, np.column_stack([m0[s], b[s], m1[s]]))
    put(s, 3, np.column_stack([c[s], m0[s], m1[s]]))

    parent = np.repeat(np.arange(mesh.n_elements), nchild)
    subdomains = mesh.subdomains[parent]
    tagger = _inherited_tagger(mesh, split)
    return _assemble(vertices, out, subdomains, tagger, mesh.coefficients, parent=parent)


def refine_uniform(mesh, times=1):
    """Bisect every element ``2 * times`` times (each element becomes 4**times)."""
    for _ in range(2 * times):
        mesh = bisect(mesh, np.arange(mesh.n_elements))
    return mesh


@dataclass(frozen=True, eq=False)
class HalfMesh:
    """Red refinement of a mesh: every triangle split into four.

    Child ``4*K + i`` (``i < 3``) is the corner triangle of ``K`` at its
    local vertex ``i``; child ``4*K + 3`` is the central triangle. Vertex
    ``Nv + e`` of the half mesh is the midpoint of parent edge ``e``.

    Attributes
    ----------
    mesh : Mesh
    parent_element : (4 Nt,) int array
    parent_edge : (Ne_half,) int array
        Parent edge containing each sub-edge, ``-1`` for interior sub-edges.
    """

    mesh: Mesh
    parent_element: np.ndarray
    parent_edge: np.ndarray

    def corner(self, element, local_vertex):
        """Index of the corner sub-triangle T_{K,z}."""
        return 4 * np.asarray(element) + np.asarray(local_vertex)


def half_refine(mesh):
    """Split each triangle into four by joining its edge midpoints."""
    nv = mesh.n_vertices
    t = mesh.triangles
    mid = nv + mesh.element_edges  # midpoint of local edge j = (t_j, t_j+1)
    nt = mesh.n_elements
    children = np.empty((nt, 4, 3), dtype=np.int64)
    for i in range(3):
        children[:, i] = np.column_stack([t[:, i], mid[:, i], mid[:, (i - 1) % 3]])
    children[:, 3] = mid
    children = children.reshape(-1, 3)
    vertices = np.vstack([mesh.vertices, mesh.midpoints])
    parent = np.repeat(np.arange(nt), 4)

    def tagger(edges):
        a, b = edges[:, 0], edges[:, 1]
        m = np.where(a >= nv, a, b) - nv
        return mesh.edge_tags[m]

    half = _assemble(vertices, children, mesh.subdomains[parent], tagger,
                     mesh.coefficients, parent=parent)
    a, b = half.edges[:, 0], half.edges[:, 1]
    one_old = (a < nv) ^ (b < nv)
    parent_edge = np.where(one_old, np.maximum(a, b) - nv, -1)
    return HalfMesh(mesh=half, parent_element=parent, parent_edge=parent_edge)


# ----------------------------------------------------------------------
# vertex stars
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class VertexStar:
    """Elements around a vertex in counter-clockwise order.

    For an interior vertex ``edges[i]`` separates ``elements[i]`` and
    ``elements[(i + 1) % n]``. For a boundary vertex the fan is open:
    ``edges`` has ``n + 1`` entries, ``edges[0]`` and ``edges[n]`` are
    boundary edges and ``edges[i]`` (``0 < i < n``) separates
    ``elements[i - 1]`` and ``elements[i]``.
    """

    vertex: int
    elements: tuple
    edges: tuple
    closed: bool
    on_dirichlet: bool
    on_neumann: bool
    corners: tuple  # half-mesh corner sub-triangle T_{K,z} for each element


def vertex_star(mesh, z):
    """Ordered star of vertex ``z`` (see :class:`VertexStar`)."""
    if not 0 <= z < mesh.n_vertices:
        raise IndexError(f"unknown vertex id {z}")
    elems = mesh.vertex_elements(z)
    loc = mesh.local_index(elems, z)
    ee = mesh.element_edges[elems]
    # CCW around z: enter across local edge loc, leave across local edge loc-1
    enter = ee[np.arange(len(elems)), loc]
    leave = ee[np.arange(len(elems)), (loc - 1) % 3]
    by_enter = {int(e): k for k, e in enumerate(enter)}
    bnd = mesh.is_boundary_edge

    starts = [k for k, e in enumerate(enter) if bnd[e]]
    if len(starts) > 1:
        raise MeshError(f"vertex {z} has a disconnected star")
    closed = not starts
    k = starts[0] if starts else int(np.argmin(elems))
    order, edges = [], []
    if not closed:
        edges.append(int(enter[k]))
    for _ in range(len(elems)):
        order.append(k)
        e = int(leave[k])
        edges.append(e)
        if bnd[e]:
            break
        k = by_enter[e]
        if closed and k == order[0]:
            break
    if len(order) != len(elems):
        raise MeshError(f"vertex {z} has a disconnected star")
    tags = mesh.edge_tags[mesh.vertex_edges(z)]
    elements = tuple(int(elems[i]) for i in order)
    corners = tuple(int(4 * elems[i] + loc[i]) for i in order)
    return VertexStar(
        vertex=int(z),
        elements=elements,
        edges=tuple(edges),
        closed=closed,
        on_dirichlet=bool(np.any(tags == DIRICHLET)),
        on_neumann=bool(np.any(tags == NEUMANN)),
        corners=corners,
    )


# ----------------------------------------------------------------------
# text format
# ----------------------------------------------------------------------
def write_mesh(mesh, path):
    """Write the line-oriented text format (17 significant digits)."""
    bnd = mesh.boundary_edge_list()
    lines = [f"mesh 2d v{mesh.n_vertices} t{mesh.n_elements} e{len(bnd)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{a} {b} {c} {s}" for (a, b, c), s in zip(mesh.triangles, mesh.subdomains)]
    lines += [f"{a} {b} {t}" for a, b, t in bnd]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path, coefficients=None, refinement="given"):
    """Read a mesh written by :func:`write_mesh` (or by hand)."""
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    head = rows[0]
    if len(head) != 5 or head[0] != "mesh" or head[1] != "2d":
        raise MeshError(f"bad mesh header: {' '.join(head)}")
    try:
        nv, nt, nb = int(head[2][1:]), int(head[3][1:]), int(head[4][1:])
        body = rows[1:]
        if len(body) != nv + nt + nb:
            raise MeshError("mesh file: line count does not match header")
        vertices = [[float(x), float(y)] for x, y in body[:nv]]
        tris = [[int(r[0]), int(r[1]), int(r[2])] for r in body[nv:nv + nt]]
        subs = [int(r[3]) for r in body[nv:nv + nt]]
        bnd = {(int(r[0]), int(r[1])): r[2] for r in body[nv + nt:]}
    except (ValueError, IndexError) as exc:
        raise MeshError(f"malformed mesh file: {exc}") from None
    return build_mesh(vertices, tris, subs, boundary=bnd, coefficients=coefficients,
                      refinement=refinement)
