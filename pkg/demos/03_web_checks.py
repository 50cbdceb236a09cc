# # Checking geodesic webs
#
# A flat web is geodesic exactly when every Flex of every web function
# vanishes. The four-web below passes and a paraboloid does not.

# %%
from geoweb import expr as E
from geoweb.geometry import Geometry
from geoweb.sampling import SamplePlan
from geoweb.webcheck import WebSpec, flex, geodesic_oracle_check, geodesic_web_check

funcs = {
    "f1": "(x2 - 1 + sqrt((x2 - 1)^2 - 4*x1*x3)) / (2*x1)",
    "f2": "((1 - sqrt(1 - 4*x2*(x1 + x3))) / (2*x2))^2",
    "f3": "((1 - sqrt(1 - 4*x1*(x2 + x3))) / (2*x1))^2",
    "f4": "x3 / (1 - x1 - x2)",
}
web = WebSpec({k: E.parse(v, 3) for k, v in funcs.items()}, Geometry.flat(), 3)
plan = SamplePlan(((0.05, 0.15),) * 3, grid=5, n_random=50, seed=1)
report = geodesic_web_check(web, plan)
for name, pairs in report.pairs.items():
    worst = max(r.max_scaled for r in pairs.values())
    print(f"{name}: worst scaled Flex {worst:.1e}")
print("web passes:", report.passed)

# %%
bowl = E.parse("x1^2 + x2^2 + x3", 3)
print("Flex_12 of the bowl at (1,1,1):", flex(bowl, 1, 2, (1.0, 1.0, 1.0)))

# %% [markdown]
# On the constant-curvature space the central-line function x2/x1 solves the
# geodesic system. Integrating geodesics tangent to its level sets confirms it.

# %%
cc_plan = SamplePlan(((0.5, 1.5), (0.5, 2.0)), grid=3, n_random=10)
res = geodesic_oracle_check(E.parse("x2/x1", 2), Geometry.constant_curvature(1), cc_plan)
print(f"oracle drift {res.max_scaled:.1e} over {res.n_ok} launches")
