"""Sandwich standard errors for penalized fits, checked against the
spread of estimates over repeated samples.
"""

# %%
import numpy as np

from pennmm.inference import sandwich_cov
from pennmm.likelihood import make_model
from pennmm.penalty import scad
from pennmm.simulation import GeneratorSpec, simulate
from pennmm.solver import fit

# %%
spec = GeneratorSpec("linear1")
b1, se1 = [], []
for r in range(40):
    model = make_model("linear", simulate(spec, r).fit_data)
    res = fit(model, scad(0.15))
    rep = sandwich_cov(model, res.spec, res)
    b1.append(res.beta_hat[0])
    se1.append(rep.se[0])

# %% [markdown]
# If the formula is calibrated, the mean reported SE should be close to the
# across-sample SD of the estimate.

# %%
print(f"SD of beta_1 over samples: {np.std(b1, ddof=1):.4f}")
print(f"mean sandwich SE         : {np.mean(se1):.4f} (std {np.std(se1, ddof=1):.4f})")
