"""Penalties, their perturbed versions and the quadratic majorizer.

Run with ``python3 demos/01_penalties.py``.  Prints a small table instead of
plotting so it works headless.
"""

# %%
import numpy as np

from pennmm.penalty import lasso, lq, majorizer_at, perturbed_value, scad, value

# %% [markdown]
# SCAD behaves like the L1 penalty near zero and flattens beyond ``a * lam``.
# The perturbed version trades a tiny amount of shrinkage for a penalty that
# is smooth at zero.

# %%
spec = scad(0.5, epsilon=1e-3)
theta = np.array([0.0, 1e-3, 0.01, 0.5, 1.0, 2.0, 5.0])
print(f"{'theta':>8} {'p':>10} {'p_eps':>10}")
for t, p, pe in zip(theta, value(spec, theta), perturbed_value(spec, theta)):
    print(f"{t:8.3g} {p:10.5f} {pe:10.5f}")

# %% [markdown]
# The majorizer anchored at ``theta0`` sits above ``p_eps(|theta|)`` and
# touches it at ``+-theta0``.

# %%
for pen in (spec, lasso(0.5, epsilon=1e-3), lq(0.5, 0.5, epsilon=1e-3)):
    phi = majorizer_at(pen, 0.8)
    grid = np.linspace(-3, 3, 601)
    gap = phi(grid) - perturbed_value(pen, np.abs(grid))
    print(f"{pen.kind:>4}: min gap {gap.min():.2e}, gap at theta0 {phi(0.8) - perturbed_value(pen, 0.8):.1e}")
