# %% [markdown]
# What the truncated SVD keeps
#
# The design matrix of standardized numerics plus one-hot blocks has a flat
# spectrum, so a small rank keeps only a fraction of the variance.

# %%
import numpy as np

from pdfair.dataset import load_schema, split, synthesize
from pdfair.preprocess import apply_plan, fit_plan
from pdfair.tsvd import frobenius_error, project, singular_values, truncated_svd

frame = synthesize(20_000, load_schema("schema_kaggle_default"), 0.1155, seed=3)
pair = split(frame, 0.2, seed=3)
plan = fit_plan(pair.train)
X = apply_plan(plan, pair.train).values
print(X.shape, plan.columns[:4], "...")

# %%
sigma = singular_values(X)
energy = np.cumsum(sigma**2) / np.sum(sigma**2)
for k in (1, 3, 8, 16, len(sigma)):
    print(f"k={k:2d} sigma_k={sigma[k - 1]:8.3f} cumulative energy {energy[k - 1]:.3f}")

# %%
# Eckart-Young: the squared error of the rank-k factors is the discarded tail
f = truncated_svd(X, 3)
print("error^2", frobenius_error(X, f) ** 2, "tail", np.sum(sigma[3:] ** 2))

# %%
# test rows are projected with the training V; no test statistics leak in
Z_test = project(f, apply_plan(plan, pair.test).values)
print("projected test block", Z_test.shape)

# %%
# the leading right singular vector mixes many original columns
top = np.argsort(-np.abs(f.V[:, 0]))[:5]
for j in top:
    print(f"{plan.columns[j]:>28} {f.V[j, 0]:+.3f}")
