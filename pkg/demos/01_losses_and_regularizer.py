# %% [markdown]
# # Bag-level loss, instance-level loss and the regularizer
#
# With aggregate responses we only see the mean response of each bag.  Two
# natural training losses compare predictions with those means: the bag-level
# loss averages predictions first, the instance-level loss compares every
# prediction with its bag mean.  For the squared loss they differ by exactly
# the within-bag variance of the predictions.

# %%
import numpy as np

from agglearn.bagging import AggregateDataset, assign_bags
from agglearn.losses import (
    bag_loss,
    check_loss_bounds,
    instance_loss,
    interpolating_loss,
    logcosh_loss,
    regularizer,
)

rng = np.random.default_rng(0)
n, k = 12, 3
bags = assign_bags(n, k, seed=1)
print(bags.bags)

# %% [markdown]
# Random predictions and bag means.  The features are irrelevant here, the
# losses only look at per-instance predictions.

# %%
agg = AggregateDataset(np.zeros((n, 1)), rng.normal(size=bags.m), bags)
f = rng.normal(size=n)

l_bag = bag_loss(f, agg)
l_ins = instance_loss(f, agg)
reg = regularizer(f, bags)
print(f"L_bag = {l_bag:.6f}")
print(f"L_ins = {l_ins:.6f}")
print(f"R     = {reg:.6f}")
print(f"L_ins - (L_bag + R) = {l_ins - l_bag - reg:.2e}")

# %% [markdown]
# The interpolating loss adds a fraction rho of the regularizer to the
# bag-level loss and therefore slides linearly from one loss to the other.

# %%
for rho in (0.0, 0.25, 0.5, 0.75, 1.0):
    print(f"rho={rho:4.2f}  L_int={interpolating_loss(f, agg, rho):.6f}")

# %% [markdown]
# For a convex loss that is not quadratic the identity becomes a sandwich:
# Jensen puts the bag loss below the instance loss, and a curvature bound C
# caps the gap at (C/2) R.

# %%
report = check_loss_bounds(f, agg, logcosh_loss)
print(report)
