"""A user-defined interface problem read from JSON.

checkerboard.json describes a 2 x 2 checkerboard on (0, 2)^2 with
alpha = 100 / 1, a unit source, homogeneous Dirichlet data on three sides
and a homogeneous Neumann side. No exact solution is known, so the loop
stops once eta~ / sqrt(eta~^2 + |||u_h|||^2) drops below tol, with the
modified estimator eta~ and the discrete solution u_h. The same file works
with the command-line tool:

    crafem describe --problem file:demos/checkerboard.json
    crafem run --problem file:demos/checkerboard.json --tol 0.1 --out out/

Run:  python demos/custom_problem.py
"""
from pathlib import Path

import numpy as np

from crafem import adaptive_solve
from crafem.estimator import classify_patches
from crafem.problems import load_problem

spec = load_problem(Path(__file__).with_name("checkerboard.json"))
cls = classify_patches(spec.mesh, spec.coefficients)
print(f"{spec.name}: {spec.mesh.n_elements} initial elements, coefficients {spec.coefficients}")
print(f"vertices whose patch is not quasi-monotone: {[tuple(spec.mesh.vertices[z].tolist()) for z in cls.n_m]}")

result = adaptive_solve(spec, estimator="modified", theta=0.3, tol=0.1, max_steps=200)
last = result.records[-1]
print(f"\nconverged: {result.converged} after {last.step} steps, {last.elements} elements")
print(f"eta = {last.eta:.4e}, eta~ = {last.eta_tilde:.4e} (true error unknown: {np.isnan(last.true_error)})")

mesh = result.mesh
finest = np.argsort(mesh.diameters)[:20]
print(f"smallest elements (diameter {mesh.diameters.min():.1e}) sit around "
      f"{tuple(mesh.centroids[finest].mean(axis=0).round(4).tolist())}, the checkerboard centre")
