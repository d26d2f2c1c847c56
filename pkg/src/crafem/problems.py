"""
Interface problems: coefficients, data, boundary partition, exact solutions.

Two benchmarks are provided:

* :func:`kellogg_problem` -- checkerboard coefficient on (-1, 1)^2 with the
  singular solution ``r**0.1 * mu(theta)``;
* :func:`lshape_problem` -- Poisson on the L-shaped domain
  (-1, 1)^2 minus [0, 1] x [-1, 0] with solution ``r**(2/3) sin((2 theta + pi)/3)``.

Further problems are read from JSON files with :func:`load_problem`.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .mesh import build_mesh, refine_uniform

# Kellogg constants for beta = 0.1
KELLOGG_BETA = 0.1
KELLOGG_R = 161.4476387975881
KELLOGG_RHO = np.pi / 4
KELLOGG_SIGMA = -14.92256510455152

# |||u||| from energy_norm_of_exact (graded quadrature on the initial mesh
# refined uniformly 1..6 times):
#   kellogg: 0.5650115437565163 (d=2) ... 0.5650115437566757 (d=6), changes < 1e-13
#   lshape:  1.3550744119328466 (d=2) ... 1.3550744119328513 (d=6), changes < 2e-14
# Independent check: sqrt of the boundary integral of alpha * u * du/dn
# (adaptive 1D quadrature) gives 0.5650115437568871 and 1.3550744119328513.
KELLOGG_ENERGY_NORM = 0.5650115437566757
LSHAPE_ENERGY_NORM = 1.3550744119328513


@dataclass(frozen=True, eq=False)
class ExactSolution:
    """Exact solution with gradient; ``energy_norm`` is |||u||| if known."""

    value: callable
    grad: callable
    energy_norm: float = None
    note: str = ""


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """An interface problem ``-div(alpha grad u) = f`` with mixed boundary data.

    ``f(x, y, sub)`` receives subdomain ids; ``g_D`` and ``g_N`` receive
    points on the boundary. ``boundary(x, y)`` returns ``"D"`` or ``"N"`` for
    a boundary point (evaluated at edge midpoints). ``g_D_grad`` is the
    gradient of an extension of ``g_D``, used for tangential derivatives.
    """

    name: str
    coefficients: dict
    f: callable
    g_D: callable
    boundary: callable
    mesh: object
    g_N: callable = None
    g_D_grad: callable = None
    exact: ExactSolution = None
    singular_points: tuple = ()
    domain: tuple = ()
    subdomain_of: callable = None
    description: dict = field(default_factory=dict)

    def __post_init__(self):
        for s, a in self.coefficients.items():
            if not a > 0:
                raise ValueError(f"coefficient of subdomain {s} must be positive, got {a}")
        tags = self.mesh.edge_tags
        if not np.any(tags == 1):
            raise ValueError("Dirichlet boundary must not be empty")

    def alpha(self, x, y):
        """Coefficient at points (needs ``subdomain_of``)."""
        sub = np.asarray(self.subdomain_of(x, y))
        return np.vectorize(lambda s: self.coefficients[int(s)], otypes=[float])(sub)


def _zero_source(x, y, sub=None):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)


def _polar(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    theta = np.arctan2(y, x)
    theta = np.where(theta < 0, theta + 2 * np.pi, theta)
    return r, theta


# ----------------------------------------------------------------------
# Kellogg
# ----------------------------------------------------------------------
def kellogg_mu(theta, beta=KELLOGG_BETA, rho=KELLOGG_RHO, sigma=KELLOGG_SIGMA, derivative=False):
    """Angular factor of the Kellogg solution (or its derivative).

    On quadrant boundaries the lower-angle branch is used.
    """
    theta = np.asarray(theta, dtype=float)
    h = np.pi / 2
    amp = [np.cos((h - sigma) * beta), np.cos(rho * beta), np.cos(sigma * beta), np.cos((h - rho) * beta)]
    shift = [h - rho, np.pi - sigma, np.pi + rho, 3 * h + sigma]
    conds = [theta <= h, theta <= np.pi, theta <= 3 * h, np.ones_like(theta, dtype=bool)]
    if derivative:
        vals = [-beta * a * np.sin((theta - s) * beta) for a, s in zip(amp, shift)]
    else:
        vals = [a * np.cos((theta - s) * beta) for a, s in zip(amp, shift)]
    return np.select(conds, vals)


def _kellogg_value(x, y):
    r, th = _polar(x, y)
    return r ** KELLOGG_BETA * kellogg_mu(th)


def _kellogg_grad(x, y):
    r, th = _polar(x, y)
    b = KELLOGG_BETA
    mu = kellogg_mu(th)
    dmu = kellogg_mu(th, derivative=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        rb = r ** (b - 1)
    c, s = np.cos(th), np.sin(th)
    return rb * (b * mu * c - dmu * s), rb * (b * mu * s + dmu * c)


def _quadrant(x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    return np.where(x > 0, np.where(y > 0, 1, 4), np.where(y > 0, 2, 3))


def kellogg_mesh():
    """Eight triangles, every quadrant split by the diagonal through the origin."""
    v = [[-1, -1], [0, -1], [1, -1], [-1, 0], [0, 0], [1, 0], [-1, 1], [0, 1], [1, 1]]
    t = [[4, 5, 8], [4, 8, 7],   # quadrant 1
         [4, 7, 6], [4, 6, 3],   # quadrant 2
         [4, 3, 0], [4, 0, 1],   # quadrant 3
         [4, 1, 2], [4, 2, 5]]   # quadrant 4
    sub = [1, 1, 2, 2, 3, 3, 4, 4]
    coeff = {1: KELLOGG_R, 2: 1.0, 3: KELLOGG_R, 4: 1.0}
    return build_mesh(v, t, sub, boundary="D", coefficients=coeff, subdomain_of=_quadrant)


def kellogg_problem():
    """Checkerboard interface problem with exact solution, beta = 0.1."""
    mesh = kellogg_mesh()
    exact = ExactSolution(
        value=_kellogg_value,
        grad=_kellogg_grad,
        energy_norm=KELLOGG_ENERGY_NORM,
        note="graded quadrature on uniform refinements; checked against the boundary flux integral",
    )
    return ProblemSpec(
        name="kellogg",
        coefficients=dict(mesh.coefficients),
        f=_zero_source,
        g_D=_kellogg_value,
        g_D_grad=_kellogg_grad,
        boundary=lambda x, y: np.full(np.shape(x), "D", dtype=object),
        mesh=mesh,
        exact=exact,
        singular_points=((0.0, 0.0),),
        domain=((-1, -1), (1, -1), (1, 1), (-1, 1)),
        subdomain_of=_quadrant,
        description={
            "domain": "(-1,1)^2",
            "subdomains": {"1": "(0,1)^2", "2": "(-1,0)x(0,1)", "3": "(-1,0)^2", "4": "(0,1)x(-1,0)"},
            "boundary": "Dirichlet on all of the boundary",
            "f": "0",
            "exact": "r^beta mu(theta), beta=0.1, rho=pi/4, sigma=%.16g" % KELLOGG_SIGMA,
        },
    )


# ----------------------------------------------------------------------
# L-shape
# ----------------------------------------------------------------------
def _lshape_value(x, y):
    r, th = _polar(x, y)
    return r ** (2 / 3) * np.sin((2 * th + np.pi) / 3)


def _lshape_grad(x, y):
    r, th = _polar(x, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        rr = r ** (-1 / 3)
    dr = 2 / 3 * rr * np.sin((2 * th + np.pi) / 3)
    dt = 2 / 3 * rr * np.cos((2 * th + np.pi) / 3)
    c, s = np.cos(th), np.sin(th)
    return c * dr - s * dt, s * dr + c * dt


def lshape_mesh():
    """Six triangles, three unit squares split by diagonals through the origin."""
    v = [[-1, -1], [0, -1], [-1, 0], [0, 0], [1, 0], [-1, 1], [0, 1], [1, 1]]
    t = [[3, 4, 7], [3, 7, 6], [3, 6, 5], [3, 5, 2], [3, 2, 0], [3, 0, 1]]
    return build_mesh(v, t, [1] * 6, boundary="D", coefficients={1: 1.0})


def lshape_problem():
    """Poisson problem on the L-shaped domain with a corner singularity."""
    mesh = lshape_mesh()
    exact = ExactSolution(
        value=_lshape_value,
        grad=_lshape_grad,
        energy_norm=LSHAPE_ENERGY_NORM,
        note="graded quadrature on uniform refinements; checked against the boundary flux integral",
    )
    return ProblemSpec(
        name="lshape",
        coefficients={1: 1.0},
        f=_zero_source,
        g_D=_lshape_value,
        g_D_grad=_lshape_grad,
        boundary=lambda x, y: np.full(np.shape(x), "D", dtype=object),
        mesh=mesh,
        exact=exact,
        singular_points=((0.0, 0.0),),
        domain=((0, 0), (1, 0), (1, 1), (-1, 1), (-1, -1), (0, -1)),
        subdomain_of=lambda x, y: np.ones(np.shape(x), dtype=int),
        description={
            "domain": "(-1,1)^2 minus [0,1]x[-1,0]",
            "subdomains": {"1": "whole domain"},
            "boundary": "Dirichlet on all of the boundary",
            "f": "0",
            "exact": "r^(2/3) sin((2 theta + pi)/3), theta in [0, 3pi/2]",
        },
    )


# ----------------------------------------------------------------------
# energy norm of the exact solution
# ----------------------------------------------------------------------
def energy_norm_of_exact(spec, depth=4, levels=14):
    """|||u||| by graded quadrature on a uniformly refined initial mesh.

    Returns ``(value, rel_change)`` where ``rel_change`` compares depth
    ``depth`` with ``depth - 1`` (a self-convergence error estimate).
    """
    from .fem import element_integrals

    if spec.exact is None:
        raise ValueError(f"problem {spec.name!r} has no exact solution")
    grad = spec.exact.grad

    def norm_at(mesh):
        alpha = mesh.element_alpha

        def integrand(x, y, k):
            gx, gy = grad(x, y)
            return alpha[k] * (gx ** 2 + gy ** 2)

        return np.sqrt(element_integrals(mesh, integrand, spec.singular_points, levels).sum())

    mesh = refine_uniform(spec.mesh, max(depth - 1, 0))
    coarse = norm_at(mesh)
    if depth == 0:
        return coarse, np.nan
    fine = norm_at(refine_uniform(mesh, 1))
    return fine, abs(fine - coarse) / fine


def exact_energy_norm(spec):
    """Stored |||u||| if available, otherwise computed (depth 4)."""
    if spec.exact is None:
        raise ValueError(f"problem {spec.name!r} has no exact solution")
    if spec.exact.energy_norm is not None:
        return spec.exact.energy_norm
    return energy_norm_of_exact(spec)[0]


# ----------------------------------------------------------------------
# problems from files
# ----------------------------------------------------------------------
class Polynomial:
    """Bivariate polynomial from ``[[coef, px, py], ...]`` terms."""

    def __init__(self, terms):
        self.terms = [(float(c), int(px), int(py)) for c, px, py in (terms or [])]
        for _, px, py in self.terms:
            if px < 0 or py < 0:
                raise ValueError("polynomial exponents must be non-negative")

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for c, px, py in self.terms:
            out = out + c * x ** px * y ** py
        return out

    def grad(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gx = np.zeros(np.broadcast(x, y).shape)
        gy = np.zeros_like(gx)
        for c, px, py in self.terms:
            if px:
                gx = gx + c * px * x ** (px - 1) * y ** py
            if py:
                gy = gy + c * py * x ** px * y ** (py - 1)
        return gx, gy

    def to_list(self):
        return [[c, px, py] for c, px, py in self.terms]


def _ear_clip(points, polygon):
    """Triangulate a simple polygon given by vertex ids (any orientation)."""
    idx = list(polygon)
    p = np.asarray(points, dtype=float)
    area = 0.0
    for i in range(len(idx)):
        a, b = p[idx[i]], p[idx[(i + 1) % len(idx)]]
        area += a[0] * b[1] - a[1] * b[0]
    if area < 0:
        idx.reverse()

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    tris = []
    guard = 0
    while len(idx) > 3:
        n = len(idx)
        for i in range(n):
            a, b, c = idx[i - 1], idx[i], idx[(i + 1) % n]
            if cross(p[a], p[b], p[c]) <= 1e-14:
                continue
            inside = False
            for j in idx:
                if j in (a, b, c):
                    continue
                q = p[j]
                if (cross(p[a], p[b], q) >= 0 and cross(p[b], p[c], q) >= 0
                        and cross(p[c], p[a], q) >= 0):
                    inside = True
                    break
            if not inside:
                tris.append([a, b, c])
                idx.pop(i)
                break
        else:
            raise ValueError("polygon could not be triangulated (not simple?)")
        guard += 1
        if guard > 10000:
            raise ValueError("polygon triangulation did not terminate")
    tris.append(idx)
    return tris


def _on_segment(x, y, a, b, tol=1e-10):
    d = b - a
    L2 = d @ d
    wx, wy = x - a[0], y - a[1]
    s = (wx * d[0] + wy * d[1]) / L2
    dist = np.abs(d[0] * wy - d[1] * wx) / np.sqrt(L2)
    return (s >= -tol) & (s <= 1 + tol) & (dist <= tol * np.sqrt(L2))


def problem_from_dict(data):
    """Build a :class:`ProblemSpec` from the JSON problem description.

    Keys: ``name``, ``vertices`` (list of [x, y]), ``subdomains`` (list of
    ``{"id", "polygon": [vertex ids], "alpha", "f": terms}``), ``boundary``
    (list of ``{"segment": [v0, v1], "tag": "D"|"N", "g": terms}``), optional
    ``exact`` (polynomial terms) and ``refine`` (uniform refinements).
    Polynomials are lists of ``[coef, px, py]`` terms.
    """
    try:
        name = str(data.get("name", "file"))
        vertices = np.asarray(data["vertices"], dtype=float).reshape(-1, 2)
        subs = data["subdomains"]
        segments = data["boundary"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed problem description: {exc}") from None

    coefficients, sources, tris, tri_sub = {}, {}, [], []
    for s in subs:
        sid = int(s["id"])
        coefficients[sid] = float(s["alpha"])
        sources[sid] = Polynomial(s.get("f", []))
        for t in _ear_clip(vertices, [int(i) for i in s["polygon"]]):
            tris.append(t)
            tri_sub.append(sid)

    segs = []
    for seg in segments:
        v0, v1 = (int(i) for i in seg["segment"])
        tag = str(seg["tag"]).upper()
        if tag not in ("D", "N"):
            raise ValueError(f"boundary tag must be D or N, got {seg['tag']!r}")
        segs.append((vertices[v0], vertices[v1], tag, Polynomial(seg.get("g", []))))
    # Dirichlet segments first so vertices shared with a Neumann segment get g_D
    segs.sort(key=lambda s: s[2] != "D")

    def boundary(x, y):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, None, dtype=object)
        for a, b, tag, _ in reversed(segs):
            out[_on_segment(x, y, a, b)] = tag
        return out

    def boundary_data(kind):
        def g(x, y):
            x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
            out = np.full(x.shape, np.nan)
            for a, b, tag, poly in reversed(segs):
                if tag == kind:
                    on = _on_segment(x, y, a, b)
                    out[on] = poly(x[on], y[on])
            return out
        return g

    def boundary_grad(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        gx = np.full(x.shape, np.nan)
        gy = np.full(x.shape, np.nan)
        for a, b, tag, poly in reversed(segs):
            if tag == "D":
                on = _on_segment(x, y, a, b)
                gx[on], gy[on] = poly.grad(x[on], y[on])
        return gx, gy

    def f(x, y, sub):
        x, y, sub = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float), np.asarray(sub))
        out = np.zeros(x.shape)
        for sid, poly in sources.items():
            sel = sub == sid
            out[sel] = poly(x[sel], y[sel])
        return out

    mesh = build_mesh(vertices, tris, tri_sub, boundary=boundary, coefficients=coefficients)
    mesh = refine_uniform(mesh, int(data.get("refine", 0)))

    exact = None
    if data.get("exact"):
        poly = Polynomial(data["exact"])
        exact = ExactSolution(value=poly, grad=poly.grad, note="polynomial from file")

    normalized = {
        "name": name,
        "vertices": vertices.tolist(),
        "subdomains": [{"id": int(s["id"]), "polygon": [int(i) for i in s["polygon"]],
                        "alpha": float(s["alpha"]), "f": Polynomial(s.get("f", [])).to_list()}
                       for s in subs],
        "boundary": [{"segment": [int(i) for i in seg["segment"]], "tag": str(seg["tag"]).upper(),
                      "g": Polynomial(seg.get("g", [])).to_list()} for seg in segments],
        "refine": int(data.get("refine", 0)),
    }
    if data.get("exact"):
        normalized["exact"] = Polynomial(data["exact"]).to_list()

    return ProblemSpec(
        name=name,
        coefficients=coefficients,
        f=f,
        g_D=boundary_data("D"),
        g_N=boundary_data("N") if any(s[2] == "N" for s in segs) else None,
        g_D_grad=boundary_grad,
        boundary=boundary,
        mesh=mesh,
        exact=exact,
        domain=tuple(map(tuple, vertices)),
        description=normalized,
    )


def load_problem(path):
    """Read a JSON problem file (see :func:`problem_from_dict`)."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed problem file {path}: {exc}") from None
    return problem_from_dict(data)


def get_problem(name):
    """``"kellogg"``, ``"lshape"`` or ``"file:<path>"``."""
    if name == "kellogg":
        return kellogg_problem()
    if name == "lshape":
        return lshape_problem()
    if name.startswith("file:"):
        return load_problem(name[5:])
    raise ValueError(f"unknown problem {name!r}")
