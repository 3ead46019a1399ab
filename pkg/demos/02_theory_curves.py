# %% [markdown]
# # Asymptotic bias, variance and risk along rho
#
# In the proportional regime (n/d -> psi) the risk of the interpolating
# estimator is given by two scalar fixed-point equations.  Moving rho from 0
# (bag level) to 1 (instance level) trades variance for bias.

# %%
import numpy as np

from agglearn.theory import optimal_rho, risk_curve, snr_threshold

grid = np.linspace(0.0, 1.0, 11)
for psi, k in [(4.0, 2), (8.0, 3)]:
    print(f"psi={psi:g}, k={k}")
    print("   rho    bias  variance    risk")
    for p in risk_curve(psi, k, snr=1.0, rho_grid=grid):
        print(f"  {p.rho:4.1f}  {p.bias:6.4f}  {p.variance:8.4f}  {p.risk:6.4f}")

# %% [markdown]
# Which endpoint wins depends on the SNR: below the threshold the
# instance-level estimator has the smaller risk.

# %%
thr = snr_threshold(4.0, 2)
print("threshold at psi=4, k=2:", thr)
for snr in (0.5 * thr, thr, 2 * thr, 10.0):
    best = optimal_rho(4.0, 2, snr)
    print(f"snr={snr:6.2f}  rho*={best.rho_star:.4f}  risk*={best.risk_star:.4f}")

# %% [markdown]
# When psi < k the bag-level estimator does not exist (fewer bags than
# features) and the curve is flagged rather than dropped.

# %%
for p in risk_curve(2.0, 4, 1.0, [0.0, 0.1, 1.0]):
    print(p.rho, p.status, p.risk)
