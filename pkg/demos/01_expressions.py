# # Expressions
#
# Web functions are written as strings in x1..xn. This script parses one,
# differentiates it and evaluates the result.

# %%
from geoweb import expr as E
from geoweb.fields import ExprField

f = E.parse("(x2 - 1 + sqrt((x2 - 1)^2 - 4*x1*x3)) / (2*x1)", 3)
print(E.to_string(f))

# %% [markdown]
# Partial derivatives are new expression trees, so they can be printed or
# differentiated again.

# %%
f1 = E.diff(f, 1)
print("f_1 =", E.to_string(f1))
p = (1.0, 4.0, 1.0)
print("f(p) =", E.evaluate(f, p))
value, grad, hess = ExprField(f, 3).jet(p)
print("grad f(p) =", grad)
print("hessian f(p) =\n", hess)

# %% [markdown]
# Evaluation outside the domain raises instead of returning NaN.

# %%
try:
    E.evaluate(f, (1.0, 1.0, 1.0))
except E.EvalError as exc:
    print(type(exc).__name__, exc)
