# %% [markdown]
# # Two-sided bounds
#
# For g = ∫|u|^γ the principal eigenfunction gives a lower bound on Q, and
# for bounded f the torsion function gives an upper one. Both carry over to
# the threshold λ₀.

# %%
import warnings

from nonlocal_atlas import (
    build_bounds_context,
    build_context,
    build_mesh,
    lambda0_bounds,
    make_coefficient,
    make_functional,
    make_nonlinearity,
    q_lower_bound,
    q_upper_bound,
    thresholds,
)

mesh = build_mesh(1, 1.0, 1024)
coef = make_coefficient("abs_sin", k_max=2)
g = make_functional("lp_of_u", gamma=2)
B = build_bounds_context(mesh, 2.0)
print(B.as_dict())

# %%
for beta0 in (1.0, 2.0, 5.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        nl = make_nonlinearity("saturating", beta0=beta0)
    ctx = build_context(mesh, nl, coef, g, n_samples=32)
    s, q = ctx.table.s[16], ctx.table.q[16]
    # w_s depends on s only through s * beta0, so the same sample index repeats Q
    print(f"beta0 = {beta0}, s beta0 = {s * beta0:.4f}: {q_lower_bound(B, nl, s):.4e} <= Q = {q:.4e} <= {q_upper_bound(B, nl, s):.4e}")
    for i in range(coef.n_windows):
        lo, hi = lambda0_bounds(B, nl, coef, i)
        print(f"   window {i}: {lo:.5f} <= lambda0 = {thresholds(i, ctx).lambda0:.5f} <= {hi:.5f}")
