# %% [markdown]
# # Power nonlinearities in closed form
#
# For f(t) = t^(p−1) every candidate is a multiple s·v of one profile v, and
# with a homogeneous g of degree γ the problem collapses to the curve
# λ(α) = C_v^((p−2)/γ) a(α) α^((2−p)/γ).

# %%
import math

from nonlocal_atlas import (
    build_context,
    build_mesh,
    build_powerlike,
    enumerate_scaled_solutions,
    make_coefficient,
    make_functional,
    make_nonlinearity,
    mu0_limit,
    powerlike_threshold,
)
from nonlocal_atlas.powerlike import cross_validate

mesh = build_mesh(1, 1.0, 1024)
g = make_functional("lp_of_u", gamma=1)
model = build_powerlike(mesh, 1.5, g)
print(f"C_v = {model.C_v:.10f}, curve scale = {model.scale:.8f}")

# %% [markdown]
# With the weight a = |sin α| α^((p−2)/γ) the curve reduces to
# C_v^((p−2)/γ)|sin α|, so every window has the same threshold.

# %%
weight = make_coefficient("abs_sin_power_weight", {"p": 1.5, "gamma": 1.0}, k_max=4)
for i in range(4):
    top, arg = powerlike_threshold(model, weight, i)
    print(f"window {i}: lambda0 = {top:.10f} at alpha = {arg:.8f} (pi/2 + i pi = {math.pi / 2 + i * math.pi:.8f})")

# %% [markdown]
# The general pipeline, which never uses the closed form, lands on the
# same thresholds and fixed points.

# %%
sin = make_coefficient("abs_sin", k_max=3)
ctx = build_context(mesh, make_nonlinearity("power", p=1.5), sin, g)
for i in range(3):
    closed, _ = powerlike_threshold(model, sin, i)
    rep = cross_validate(model, sin, ctx, i, lams=[0.5 * closed])
    print(f"window {i}: threshold deviation {rep['threshold_deviation']:.1e}, fixed points {rep['fixed_point_deviation']:.1e}")

# %% [markdown]
# For p > 2 the behaviour of a(α) α^((2−p)/γ) at α → 0 decides whether
# small λ gives one or two solutions in the first window.

# %%
for p in (3.0, 4.0, 6.0):
    m = build_powerlike(mesh, p, make_functional("lp_of_u", gamma=2))
    print(p, mu0_limit(m, make_coefficient("abs_sin", k_max=1)))
roots = enumerate_scaled_solutions(model, sin, 0.5 * powerlike_threshold(model, sin, 0)[0], 0)
print([r.as_dict() for r in roots])
