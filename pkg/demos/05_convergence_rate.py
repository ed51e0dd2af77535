"""Local convergence rate of the MM map: the eigenvalues of its derivative
at the solution against the observed error ratios along the path.
"""

# %%
import numpy as np

from pennmm.likelihood import Dataset, make_model
from pennmm.penalty import lasso
from pennmm.solver import FitConfig, contraction_ratios, fit, rate_diagnostic

# %%
rng = np.random.default_rng(0)
n = 60
q, _ = np.linalg.qr(rng.standard_normal((n, 3)))
X = np.sqrt(n) * q
# X'y / n = z exactly; the slowest coordinate contracts at lam / z1
z = np.array([0.15, 2.0, -1.0])
r = rng.standard_normal(n)
r -= X @ np.linalg.lstsq(X, r, rcond=None)[0]
model = make_model("linear", Dataset(X, X @ z + r))

# %%
res = fit(model, lasso(0.1), config=FitConfig(max_iter=5000))
eig, rho = rate_diagnostic(model, res.spec, res.beta_eps)
ratios, err = contraction_ratios(model, res.spec, res.beta0, res.beta_eps)
print("eigenvalues:", np.round(eig, 4), "(predicted rate 0.1 / 0.15 =", round(0.1 / 0.15, 4), ")")
print("last observed ratios:", np.round(ratios[-5:], 4))
