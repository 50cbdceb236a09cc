# # Building hyperplanar webs from Euler-type equations
#
# A choice of u0 and Psi_1..Psi_{n-1} defines f implicitly by
# f = u0(x_n + sum Psi_s(f) x_s). Newton from a fixed guess pins the branch.

# %%
from geoweb import expr as E
from geoweb.euler import EulerSpec, SolvedField, closed_form_check, reconstruct_psi
from geoweb.sampling import SamplePlan
from geoweb.webcheck import hyperplanarity_check

spec = EulerSpec.parse("t", ["t", "t"])
field = SolvedField(spec, guess=1.0)
print("f(0.2, 0.3, 1) =", field.value((0.2, 0.3, 1.0)))

plan = SamplePlan(((0.05, 0.15),) * 3, grid=3, n_random=30, seed=2)
closed = E.parse("x3 / (1 - x1 - x2)", 3)
print("closed form agrees:", closed_form_check(field, closed, plan).passed)
print("hyperplanar:", hyperplanarity_check(field, plan).passed)

# %% [markdown]
# The roots of x1 f^2 + (x2 - 1) f + x3 = 0 give the cone web. Newton from 0
# lands on the root nearest 0, which is the negative of the plus root.

# %%
cone = SolvedField(EulerSpec.parse("t", ["t^2", "t"]), guess=0.0)
plus_root = E.parse("(x2 - 1 + sqrt((x2 - 1)^2 - 4*x1*x3)) / (2*x1)", 3)
print("neg transform agrees:", closed_form_check(cone, plus_root, plan, "neg").passed)

# %% [markdown]
# Going backwards: f_s / f_n depends on f alone, and recovering it gives Psi.

# %%
t = lambda s: E.parse(s, 0, names=("t",))
rec = reconstruct_psi(field, plan, expected=(t("t"), t("t")))
print(f"Psi recovered to {rec.max_expected_error:.1e} over {rec.pairs_compared} level pairs")
