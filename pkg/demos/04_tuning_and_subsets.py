"""Choosing lambda by generalized cross-validation, compared with
exhaustive best-subset search, plus a Poisson model whose intercept is a
cubic spline in time.
"""

# %%
import math

import numpy as np

from pennmm.likelihood import Dataset, make_model, spline_basis
from pennmm.penalty import scad
from pennmm.selection import best_subset, default_lambda_grid, enumerate_subsets, gcv_select
from pennmm.simulation import GeneratorSpec, simulate

# %%
model = make_model("logistic", simulate(GeneratorSpec("logistic2"), 3).fit_data)
curve, best = gcv_select(model, scad(1.0), default_lambda_grid(model.n, num=30))
print(f"GCV picks lambda = {curve.best_lambda:.4f}; zeros: {best.n_zero}")
print("estimate:", np.round(best.beta_hat, 3))

# %%
table = enumerate_subsets(model)
for crit in ("AIC", "BIC"):
    res = best_subset(model, crit, table=table)
    print(f"{crit}: subset {np.flatnonzero(res.best_subset).tolist()} out of {res.n_models_evaluated} models")

# %% [markdown]
# Daily counts over two years: a smooth seasonal intercept (truncated-power
# cubic spline in time) plus linear, quadratic and interaction terms of three
# exposure-like covariates.  Only the spline and three linear terms matter.

# %%
rng = np.random.default_rng(7)
n = 730
t = np.arange(n, dtype=float)
z = rng.standard_normal((n, 3))
X = np.column_stack([spline_basis(t), z, z[:, :2] ** 2, z[:, 0] * z[:, 1]])
ts = (t - t.mean()) / t.std()
eta = math.log(80) + 0.3 * np.sin(2 * ts) + 0.1 * ts + z @ [0.1, 0.06, 0.05]
pois = make_model("poisson", Dataset(X, rng.poisson(np.exp(eta)).astype(float)))
curve, best = gcv_select(pois, scad(1.0), default_lambda_grid(n, num=40))
print(f"Poisson: GCV lambda = {curve.best_lambda:.4f}, {best.n_zero} of {pois.d} coefficients set to zero")
