#!/usr/bin/env python3
"""The self-expressive solve: from features and a prior to a weighted graph.

Each synthetic node is expressed as a linear combination of the others; the
coefficient matrix balances feature self-expression against a class-prior
and a history term, has a closed form, and symmetrizes into the synthetic
adjacency. The demo shows the closed form agreeing with plain gradient
descent and the block structure that emerges for blobby features.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import numpy as np

from gcsr.selfexpr import (
    SelfExpressiveProblem,
    gradient,
    objective,
    solve,
    solve_iterative,
    symmetrize,
)

rng = np.random.default_rng(0)

# three feature blobs, four nodes each
centers = rng.standard_normal((3, 8)) * 3
labels = np.repeat(np.arange(3), 4)
features = centers[labels] + rng.standard_normal((12, 8)) * 0.4

# class-block prior: same-class pairs likelier than cross-class
prior = np.where(labels[:, None] == labels[None, :], 0.8, 0.1)
problem = SelfExpressiveProblem(features, prior, np.eye(12), alpha=1.0, beta=1.0)

coeffs = solve(problem)
res = np.linalg.norm(gradient(problem, coeffs))
print(f"closed form: objective {objective(problem, coeffs):.4f}, "
      f"gradient norm {res:.2e}")

oracle = solve_iterative(problem, tol=1e-10)
print(f"gradient-descent oracle agrees within {np.linalg.norm(coeffs - oracle):.2e}")

adjacency = symmetrize(coeffs)
same = adjacency[labels[:, None] == labels[None, :]]
cross = adjacency[labels[:, None] != labels[None, :]]
print(f"\nsymmetrized adjacency: symmetric={np.array_equal(adjacency, adjacency.T)}, "
      f"min={adjacency.min():.3f}")
print(f"mean within-class weight {same.mean():.3f} vs cross-class {cross.mean():.3f}")

print("\nweights rounded to one decimal (rows grouped by class):")
for row in np.round(adjacency, 1):
    print("  " + " ".join(f"{v:3.1f}" for v in row))

# pushing alpha up pins the solution to the prior; beta does the same
# for the history matrix
pinned = solve(SelfExpressiveProblem(features, prior, np.eye(12), alpha=1e6, beta=0.0))
print(f"\nalpha=1e6 pulls the coefficients onto the prior: "
      f"relative gap {np.linalg.norm(pinned - prior) / np.linalg.norm(prior):.1e}")
