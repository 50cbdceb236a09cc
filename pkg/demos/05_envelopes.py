# # Envelopes of the leaf planes
#
# For a quadratic family of planes a C^2 + b C + c = 0 the envelope is the
# discriminant b^2 - 4ac.

# %%
from geoweb import expr as E
from geoweb.envelope import envelope_of, family_from_web_function, verify_tangency

cone = E.parse("(x2 - 1 - sqrt((x2 - 1)^2 - 4*x1*x3)) / (2*x1)", 3)
fam = family_from_web_function(cone)
print("family:", fam.polynomial())
env = envelope_of(fam)
print("envelope:", env, "= 0")

# %%
rep = verify_tangency(fam, env, samples=8, seed=4)
print(f"tangency defect {rep.max_defect:.1e}, passed {rep.passed}")

# %% [markdown]
# The raw discriminant can differ from a target by a constant factor, so
# envelopes are compared on the primitive form.

# %%
cyl = E.parse("((1 - sqrt(1 - 4*x2*(x1 + x3))) / (2*x2))^2", 3)
env = envelope_of(family_from_web_function(cyl))
print("raw:", env, " primitive:", env.primitive())

# %% [markdown]
# A family linear in C is a pencil through a fixed line and has no envelope.

# %%
pencil = family_from_web_function(E.parse("x3 / (1 - x1 - x2)", 3))
print(pencil.polynomial(), "->", pencil.linear_kind())
