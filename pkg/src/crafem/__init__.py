"""Adaptive Crouzeix-Raviart finite elements for elliptic interface problems."""
from .adapt import ConvergenceRecord, adaptive_solve, convergence_slope, mark
from .estimator import (IndicatorReport, PatchClassification, c_kz_bound_check, classify_patches,
                        clement_interpolate, compute_indicators, ihalf_interpolate,
                        modified_indicators, standard_indicators, tangential_indicator)
from .fem import (CrSolution, SolverError, SparseSystem, assemble, broken_energy_norm,
                  error_representation, error_representation_residual, interpolate, solve,
                  solve_problem, true_error)
from .mesh import (HalfMesh, Mesh, MeshError, VertexStar, bisect, build_mesh, half_refine,
                   read_mesh, refine_uniform, vertex_star, write_mesh)
from .problems import (ExactSolution, ProblemSpec, energy_norm_of_exact, get_problem,
                       kellogg_problem, load_problem, lshape_problem)

__version__ = "0.1.0"
