"""A reduced version of the simulation tables: few replicates and a short
lambda grid so it finishes in about a minute.

The full-size runs are available from the command line, for example
``pennmm simulate logistic2 --rho 0.25 --output-dir out``.
"""

# %%
import numpy as np

from pennmm.simulation import GeneratorSpec, run_experiment

# %%
spec = GeneratorSpec("logistic2", replicates=5)
report = run_experiment(spec, lambda_grid=np.geomspace(0.01, 0.3, 12), mc_draws=10_000)
print(report.to_tsv())

# %% [markdown]
# C counts true zeros estimated as zero (six is perfect here), I counts true
# signals lost, and RME is the median model error relative to the full MLE.
