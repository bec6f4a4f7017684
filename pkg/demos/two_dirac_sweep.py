"""
Two Diracs against three: the interpolation in one picture
==========================================================

P puts mass 1/2 on {0, x2}; Q spreads mass 1/3 over {0, x2, x3}.  The
constrained divergence has a closed form here, and the intermediate
measure eta shows exactly how much mass redistribution (paid for by the
f-divergence) versus mass transport (paid for by the metric) the optimum
uses.  Sweeping x2 with x3 = 2*x2: for small x2 transport is cheap and
eta keeps mass near 1/2 at x2; past a transition point eta jumps all the
way to Q's profile 2/3 and stays there.
"""

import matplotlib

matplotlib.use("Agg")  # headless-friendly

import matplotlib.pyplot as plt
import numpy as np

from fgamma.solvers import dirac_example

x2s = np.linspace(0.05, 3.0, 120)

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
for alpha in (1.5, 2.0, 5.0):
    etas = []
    vals = []
    for x2 in x2s:
        sol = dirac_example(x2, 2.0 * x2, alpha)
        etas.append(sol.eta_x2_mass)
        vals.append(sol.divergence_value)
    ax1.plot(x2s, etas, label=f"alpha = {alpha:g}")
    ax2.plot(x2s, vals, label=f"alpha = {alpha:g}")
    # where does this alpha saturate?
    etas = np.asarray(etas)
    idx = np.argmax(etas >= 2.0 / 3.0 - 1e-9)
    print(f"alpha={alpha:3g}: eta mass saturates at 2/3 near x2 = "
          f"{x2s[idx]:.3f}")

ax1.axhline(2.0 / 3.0, color="gray", lw=0.8, ls="--")
ax1.axhline(1.0 / 3.0, color="gray", lw=0.8, ls=":")
ax1.set_xlabel("x2")
ax1.set_ylabel("intermediate mass at x2")
ax1.legend()
ax2.set_xlabel("x2")
ax2.set_ylabel("divergence value")
ax2.legend()
fig.tight_layout()
fig.savefig("two_dirac_sweep.png", dpi=150)
print("wrote two_dirac_sweep.png")
