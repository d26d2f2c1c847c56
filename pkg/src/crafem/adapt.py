"""
Adaptive loop: solve, estimate, mark, refine.

Marking is the bulk (Doerfler) criterion on squared indicators: the
smallest set of elements, taken in order of decreasing indicator, whose
squared indicators add up to at least ``theta`` times the total.
"""
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimator import classify_patches, standard_indicators, modified_indicators
from .fem import GRADING_LEVELS, SolverError, assemble, broken_energy_norm, solve, true_error
from .mesh import bisect
from .problems import exact_energy_norm

log = logging.getLogger(__name__)

ESTIMATORS = ("standard", "modified", "tangential")
CSV_COLUMNS = ("step", "elements", "dofs", "true_error", "rel_err", "eta", "eta_tilde",
               "eff_eta", "eff_eta_tilde", "marked")


@dataclass
class ConvergenceRecord:
    """One adaptive step.

    ``eta`` is the standard estimator, or the tangential one when that
    variant drives the loop; ``eta_tilde`` is the modified estimator.
    ``true_error`` and the efficiency indices are NaN without an exact
    solution. ``marked`` is 0 on the final step.
    """

    step: int
    elements: int
    dofs: int
    true_error: float
    rel_err: float
    eta: float
    eta_tilde: float
    eff_eta: float
    eff_eta_tilde: float
    marked: int
    eta_standard: float = math.nan
    eta_tangential: float = math.nan
    eta_Ju: float = math.nan
    eta_Ju_tilde: float = math.nan
    eta_Ju_hat: float = math.nan
    n_m: int = 0

    def csv_row(self):
        return [getattr(self, c) for c in CSV_COLUMNS]

    def as_dict(self):
        return asdict(self)


@dataclass
class AdaptiveResult:
    records: list
    mesh: object
    solution: object
    report: object
    converged: bool
    meshes: list = field(default_factory=list)


def mark(report, theta, which="standard"):
    """Bulk marking; returns sorted element ids.

    ``report`` is an :class:`~crafem.estimator.IndicatorReport` or an array
    of per-element indicators. Ties in the ordering go to the lower id.
    """
    if not 0 < theta <= 1:
        raise ValueError("theta out of range (0, 1]")
    eta = np.asarray(report.indicator(which) if hasattr(report, "indicator") else report, dtype=float)
    if eta.size == 0:
        raise ValueError("empty indicator report")
    sq = eta ** 2
    total = sq.sum()
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((np.arange(len(sq)), -sq))
    cum = np.cumsum(sq[order])
    k = int(np.searchsorted(cum, theta * total * (1 - 1e-12))) + 1
    return np.sort(order[:min(k, len(sq))])


def _estimate(mesh, spec, u_h):
    cls = classify_patches(mesh, spec.coefficients)
    rep = standard_indicators(mesh, spec, u_h)
    return modified_indicators(mesh, None, spec, u_h, cls, rep), cls


def adaptive_solve(spec, mesh=None, estimator="modified", theta=0.2, tol=0.1, max_steps=60,
                   levels=GRADING_LEVELS, callback=None, keep_meshes=False):
    """Run the adaptive loop until the stopping test passes or ``max_steps``.

    With an exact solution the loop stops when ``rel_err <= tol``;
    otherwise when ``eta / sqrt(eta^2 + |||u_h|||^2) <= tol`` for the
    driving estimator. ``callback(record, mesh, u_h, report)`` is called
    after every step. Returns an :class:`AdaptiveResult`.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    if not 0 < theta <= 1:
        raise ValueError("theta out of range (0, 1]")
    if not tol > 0:
        raise ValueError("tol must be positive")
    mesh = spec.mesh if mesh is None else mesh
    norm_u = exact_energy_norm(spec) if spec.exact is not None else None
    records, meshes = [], []
    step = 0
    while True:
        try:
            u_h = solve(assemble(mesh, spec))
        except SolverError as exc:
            raise SolverError(f"step {step}: {exc}", exc.iterations, exc.residual) from exc
        report, cls = _estimate(mesh, spec, u_h)
        eta_drive = report.total(estimator)
        eta = report.eta_tangential if estimator == "tangential" else report.eta
        eta_t = report.eta_tilde
        if norm_u is not None:
            err, rel = true_error(mesh, spec, u_h, levels, norm_u)
            eff, eff_t = (eta / err, eta_t / err) if err > 0 else (math.nan, math.nan)
        else:
            err = rel = eff = eff_t = math.nan
        stop_value = rel if norm_u is not None else (
            eta_drive / math.sqrt(eta_drive ** 2 + broken_energy_norm(mesh, spec, u_h) ** 2))
        done = stop_value <= tol
        last = done or step >= max_steps
        marked = np.zeros(0, dtype=np.int64) if last else mark(report, theta, estimator)
        rec = ConvergenceRecord(
            step=step, elements=mesh.n_elements, dofs=int(len(assemble_free(mesh))),
            true_error=err, rel_err=rel, eta=eta, eta_tilde=eta_t, eff_eta=eff,
            eff_eta_tilde=eff_t, marked=int(len(marked)),
            eta_standard=report.eta, eta_tangential=report.eta_tangential,
            eta_Ju=report.eta_Ju_total, eta_Ju_tilde=report.eta_Ju_tilde_total,
            eta_Ju_hat=report.eta_Ju_hat_total, n_m=int(len(cls.n_m)),
        )
        records.append(rec)
        if keep_meshes:
            meshes.append(mesh)
        log.info("step %d: %d elements, rel_err %.4g, eta %.4g, eta_tilde %.4g",
                 step, mesh.n_elements, rel, eta, eta_t)
        if callback is not None:
            callback(rec, mesh, u_h, report)
        if last:
            return AdaptiveResult(records, mesh, u_h, report, done, meshes)
        if len(marked) == 0:
            # zero estimator without meeting the tolerance: nothing to refine
            return AdaptiveResult(records, mesh, u_h, report, False, meshes)
        mesh = bisect(mesh, marked)
        step += 1


def assemble_free(mesh):
    """Ids of free (non-Dirichlet) edges."""
    from .mesh import DIRICHLET

    return np.flatnonzero(mesh.edge_tags != DIRICHLET)


def convergence_slope(records, tail_fraction=0.5, key="true_error"):
    """Least-squares slope of ``log(key)`` against ``log(dofs)`` on the tail.

    ``records`` is a list of :class:`ConvergenceRecord` (or dicts). Uses the
    last ``ceil(tail_fraction * n)`` records, at least 3.
    """
    rows = [r if isinstance(r, dict) else r.as_dict() for r in records]
    n = len(rows)
    m = max(3, math.ceil(tail_fraction * n))
    if n < 3 or m > n:
        raise ValueError("at least 3 records needed for a slope")
    tail = rows[-m:]
    x = np.log([r["dofs"] for r in tail])
    y = np.log([r[key] for r in tail])
    return float(np.polyfit(x, y, 1)[0])
