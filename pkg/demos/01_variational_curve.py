"""The droplet rate function and its first-order jump.

A droplet holding a fraction lam of the deficit costs sqrt(lam) in surface
energy; the rest of the deficit is absorbed by Gaussian fluctuations at cost
delta * (1 - lam)^2.  Below the critical delta the best choice is no droplet
at all; above it the minimizer jumps to 2/3 and then grows towards 1.
"""

import numpy as np

from droplet.variational import PhiParams, delta_c, lambda_c, minimize_phi

dc = delta_c(2)
print(f"critical delta = {dc:.15f}, droplet fraction at the jump = {lambda_c(2):.6f}")
print()
print(f"{'delta/dc':>9} {'delta':>9} {'phi_star':>10} {'lambda':>9}")
for ratio in np.arange(0.2, 3.01, 0.2):
    sol = minimize_phi(PhiParams(ratio * dc))
    print(f"{ratio:9.2f} {ratio * dc:9.4f} {sol.phi_star:10.6f} {sol.lambda_delta:9.6f}")

# the jump is a discontinuity in lambda, not in phi_star
lo = minimize_phi(PhiParams(dc * (1 - 1e-9)))
hi = minimize_phi(PhiParams(dc * (1 + 1e-9)))
print()
print(f"just below: lambda = {lo.lambda_delta:.6f}, phi_star = {lo.phi_star:.9f}")
print(f"just above: lambda = {hi.lambda_delta:.6f}, phi_star = {hi.phi_star:.9f}")

# higher dimensions: the same jump, to 2/(d+1)
for d in (3, 4):
    print(f"d={d}: critical delta {delta_c(d):.6f}, jump to {lambda_c(d):.6f}")
