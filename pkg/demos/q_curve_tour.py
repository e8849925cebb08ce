# %% [markdown]
# # The Q map
#
# Every positive solution of -a(g(u))Δu = λ f(u) is a solution w_s of the
# local problem -Δw = s f(w) for the right s. Q(s) = g(w_s) tells us
# which value of the nonlocal term each s produces.

# %%
import warnings

import numpy as np

from nonlocal_atlas import build_mesh, make_functional, make_nonlinearity, solve_auxiliary, tabulate_q
from nonlocal_atlas.qmap import certify_monotone

mesh = build_mesh(1, 1.0, 1024)
lam1 = mesh.eigenpair.eigenvalue
print(f"lambda_1 = {lam1:.10f}  (pi^2 = {np.pi**2:.10f})")

# %% [markdown]
# One auxiliary solve. The upward and downward monotone iterations meet,
# which is the numerical face of uniqueness.

# %%
nl = make_nonlinearity("arctan", theta0=0.5, beta0=3.0)
sol = solve_auxiliary(mesh, nl, s=10.0)
print("admissible s in", (lam1 / nl.beta, lam1 / nl.theta))
print(f"max w = {sol.w.max():.6f}, up/down gap = {sol.gap:.2e}, residual = {sol.residual_inf:.2e}")
print("iterations:", sol.iterations)

# %% [markdown]
# A whole table. For f(t) = √t and g = ∫u² the map is an exact power,
# Q(s) = C s⁴, so the log-log slope is a sharp check.

# %%
power = make_nonlinearity("power", p=1.5)
table = tabulate_q(mesh, power, make_functional("lp_of_u", gamma=2), n=32, q_low=1e-6, q_high=1e4)
slope = np.polyfit(np.log(table.s), np.log(table.q), 1)[0]
print(f"slope = {slope:.8f}")

# %% [markdown]
# With a finite β the low end of the s-range is λ₁/β, and Q collapses to
# zero there.

# %%
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    sat = make_nonlinearity("saturating", beta0=2.0)
table = tabulate_q(mesh, sat, make_functional("lp_of_grad", gamma=2), n=24, q_low=1e-8)
for s, q in list(zip(table.s, table.q))[:4]:
    print(f"s - lambda1/beta = {s - lam1 / 2:.3e}   Q = {q:.3e}")
print("monotone:", certify_monotone(table)["monotone"])
