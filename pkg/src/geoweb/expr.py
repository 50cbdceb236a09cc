"""Immutable expression trees over x1..xn, the family parameter C and the
one-variable placeholder t.

Expressions are built through the smart constructors (``add``, ``mul``, ...)
which fold constants and apply the 0/1 identities; nothing else is
simplified.  Derivatives are exact tree rewrites.  Numeric evaluation goes
through a compiled Python function with common subexpressions shared, so a
gradient and Hessian evaluated together cost little more than the Hessian.
"""
from __future__ import annotations

import math
import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

__all__ = [
    "Expr", "Const", "Var", "Neg", "Sqrt", "Add", "Sub", "Mul", "Div", "Pow",
    "ParseError", "EvalError", "DivisionByZeroError", "NegativeSqrtError",
    "MissingParameterError",
    "const", "var", "add", "sub", "mul", "div", "neg", "power", "sqrt",
    "parse", "to_string", "evaluate", "diff", "gradient", "hessian",
    "substitute", "variables", "compile_exprs", "PARAM", "PLACEHOLDER",
]

PARAM = "C"
PLACEHOLDER = "t"


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvalError(ArithmeticError):
    """Numeric evaluation failed at a point."""


class DivisionByZeroError(EvalError):
    pass


class NegativeSqrtError(EvalError):
    pass


class MissingParameterError(EvalError):
    pass


# --------------------------------------------------------------------------
# nodes

class Expr:
    __slots__ = ("_hash",)
    precedence = 5

    def _fields(self) -> tuple:
        raise NotImplementedError

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._fields() == other._fields()

    def __hash__(self):
        return self._hash

    def __repr__(self):
        args = ", ".join(repr(f) for f in self._fields())
        return f"{type(self).__name__}({args})"

    def __str__(self):
        return to_string(self)

    # operator sugar, all via the smart constructors
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return power(self, k)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        if isinstance(value, bool):
            raise TypeError("boolean constant")
        if isinstance(value, int):
            value = Fraction(value)
        elif isinstance(value, float):
            if not math.isfinite(value):
                raise ValueError("non-finite constant")
        elif not isinstance(value, Fraction):
            raise TypeError(f"unsupported constant {value!r}")
        self.value = value
        self._hash = hash(("Const", value))

    def _fields(self):
        return (self.value,)

    @property
    def exact(self) -> bool:
        return isinstance(self.value, Fraction)


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._hash = hash(("Var", name))

    def _fields(self):
        return (self.name,)

    @property
    def index(self) -> int | None:
        """1-based coordinate index, or None for C / t."""
        if self.name.startswith("x"):
            return int(self.name[1:])
        return None


class _Unary(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        self.arg = arg
        self._hash = hash((type(self).__name__, arg._hash))

    def _fields(self):
        return (self.arg,)


class Neg(_Unary):
    __slots__ = ()
    precedence = 3


class Sqrt(_Unary):
    __slots__ = ()


class _Binary(Expr):
    __slots__ = ("left", "right")
    symbol = "?"

    def __init__(self, left: Expr, right: Expr):
        self.left = left
        self.right = right
        self._hash = hash((type(self).__name__, left._hash, right._hash))

    def _fields(self):
        return (self.left, self.right)


class Add(_Binary):
    __slots__ = ()
    precedence = 1
    symbol = "+"


class Sub(_Binary):
    __slots__ = ()
    precedence = 1
    symbol = "-"


class Mul(_Binary):
    __slots__ = ()
    precedence = 2
    symbol = "*"


class Div(_Binary):
    __slots__ = ()
    precedence = 2
    symbol = "/"

    def __init__(self, left, right):
        if isinstance(right, Const) and right.value == 0:
            raise ZeroDivisionError("constant zero denominator")
        super().__init__(left, right)


class Pow(Expr):
    __slots__ = ("base", "exp")
    precedence = 4

    def __init__(self, base: Expr, exp: int):
        if not isinstance(exp, int) or exp < 0:
            raise ValueError(f"exponent must be a non-negative integer, got {exp!r}")
        self.base = base
        self.exp = exp
        self._hash = hash(("Pow", base._hash, exp))

    def _fields(self):
        return (self.base, self.exp)


ZERO = Const(0)
ONE = Const(1)


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return Const(x)


def _is_const(e, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def _fold(a, b, op):
    # exact when both operands are exact
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return Const(op(a, b))
    return Const(op(float(a), float(b)))


# --------------------------------------------------------------------------
# smart constructors

def const(value) -> Const:
    return Const(value)


def var(name: str) -> Var:
    return Var(name)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(a.value, b.value, lambda p, q: p + q)
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(a.value, b.value, lambda p, q: p - q)
    if _is_const(b, 0):
        return a
    if _is_const(a, 0):
        return neg(b)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(a.value, b.value, lambda p, q: p * q)
    if _is_const(a, 0) or _is_const(b, 0):
        return ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    if _is_const(a, -1):
        return neg(b)
    if _is_const(b, -1):
        return neg(a)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0):
        raise ZeroDivisionError("constant zero denominator")
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(a.value, b.value, lambda p, q: p / q)
    if _is_const(a, 0):
        return ZERO
    if _is_const(b, 1):
        return a
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(base: Expr, k: int) -> Expr:
    if k == 0:
        return ONE
    if k == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value ** k)
    return Pow(base, k)


def sqrt(a: Expr) -> Expr:
    if isinstance(a, Const):
        v = a.value
        if isinstance(v, Fraction) and v >= 0:
            rn, rd = math.isqrt(v.numerator), math.isqrt(v.denominator)
            if rn * rn == v.numerator and rd * rd == v.denominator:
                return Const(Fraction(rn, rd))
        elif isinstance(v, float) and v >= 0:
            return Const(math.sqrt(v))
    return Sqrt(a)


# --------------------------------------------------------------------------
# parser
#
#   expr   := term (('+' | '-') term)*
#   term   := unary (('*' | '/') unary)*
#   unary  := '-' unary | power
#   power  := atom ('^' UINT)?
#   atom   := NUMBER | NAME | 'sqrt' '(' expr ')' | '(' expr ')'
#   NAME   := 'x' DIGITS | 'C' | 't'

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            stripped = len(text) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[stripped]!r}", stripped)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int, names: Iterable[str]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n
        self.names = set(names)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            raise ParseError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op, pos = self.take()[1:]
            rhs = self.unary()
            if op == "*":
                e = mul(e, rhs)
            else:
                if _is_const(rhs, 0):
                    raise ParseError("division by constant zero", pos)
                e = div(e, rhs)
        return e

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            kind, text, pos = self.take()
            if kind != "num" or not text.isdigit():
                raise ParseError("exponent must be a non-negative integer literal", pos)
            return power(base, int(text))
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            if re.fullmatch(r"\d+", text):
                return Const(Fraction(int(text)))
            return Const(float(text))
        if kind == "name":
            if text == "sqrt":
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return sqrt(inner)
            m = re.fullmatch(r"x(\d+)", text)
            if m:
                k = int(m.group(1))
                if k < 1 or k > self.n:
                    raise ParseError(
                        f"variable index out of range: {text} (dimension {self.n})", pos)
                return Var(f"x{k}")
            if text in self.names:
                return Var(text)
            raise ParseError(f"unknown name {text!r}", pos)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos)


def parse(text: str, n: int, names: Iterable[str] = (PARAM,)) -> Expr:
    """Parse ``text`` into an expression over x1..xn.

    ``names`` lists the extra symbols allowed besides coordinates; by default
    only the family parameter C.  One-variable functions (initial conditions,
    the Psi functions) are parsed with ``n=0, names=("t",)``.
    """
    return _Parser(text, n, names).parse()


# --------------------------------------------------------------------------
# printer

def _fmt_const(v) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            s = str(v.numerator)
            return s if v >= 0 else f"({s})"
        return f"({v.numerator}/{v.denominator})"
    s = repr(v)
    return s if not s.startswith("-") else f"({s})"


def to_string(e: Expr) -> str:
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Sqrt):
        return f"sqrt({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.arg)
        if e.arg.precedence < Neg.precedence:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Pow):
        base = to_string(e.base)
        if e.base.precedence < Pow.precedence + 1:
            base = f"({base})"
        return f"{base}^{e.exp}"
    left, right = to_string(e.left), to_string(e.right)
    if e.left.precedence < e.precedence:
        left = f"({left})"
    if e.right.precedence <= e.precedence:
        right = f"({right})"
    return f"{left} {e.symbol} {right}"


# --------------------------------------------------------------------------
# structural helpers

def variables(e: Expr) -> frozenset[str]:
    return _variables(e)


@lru_cache(maxsize=None)
def _variables(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, _Unary):
        return _variables(e.arg)
    if isinstance(e, Pow):
        return _variables(e.base)
    return _variables(e.left) | _variables(e.right)


def substitute(e: Expr, mapping: dict[str, Expr]) -> Expr:
    """Simultaneous substitution of variables by expressions."""
    memo: dict[Expr, Expr] = {}

    def go(node):
        if node in memo:
            return memo[node]
        if isinstance(node, Var):
            out = mapping.get(node.name, node)
        elif isinstance(node, Const):
            out = node
        elif isinstance(node, Neg):
            out = neg(go(node.arg))
        elif isinstance(node, Sqrt):
            out = sqrt(go(node.arg))
        elif isinstance(node, Pow):
            out = power(go(node.base), node.exp)
        else:
            ctor = {Add: add, Sub: sub, Mul: mul, Div: div}[type(node)]
            out = ctor(go(node.left), go(node.right))
        memo[node] = out
        return out

    return go(e)


# --------------------------------------------------------------------------
# differentiation

@lru_cache(maxsize=None)
def diff(e: Expr, v) -> Expr:
    """Exact derivative of ``e`` with respect to ``v`` (1-based index or a name)."""
    name = f"x{v}" if isinstance(v, int) else v
    return _diff(e, name)


@lru_cache(maxsize=None)
def _diff(e: Expr, name: str) -> Expr:
    if name not in _variables(e):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Neg):
        return neg(_diff(e.arg, name))
    if isinstance(e, Sqrt):
        return div(_diff(e.arg, name), mul(Const(2), e))
    if isinstance(e, Pow):
        inner = mul(Const(e.exp), power(e.base, e.exp - 1))
        return mul(inner, _diff(e.base, name))
    a, b = e.left, e.right
    da, db = _diff(a, name), _diff(b, name)
    if isinstance(e, Add):
        return add(da, db)
    if isinstance(e, Sub):
        return sub(da, db)
    if isinstance(e, Mul):
        return add(mul(da, b), mul(a, db))
    # quotient
    if _is_const(db, 0):
        return div(da, b)
    return div(sub(mul(da, b), mul(a, db)), power(b, 2))


def gradient(e: Expr, n: int) -> list[Expr]:
    return [diff(e, i) for i in range(1, n + 1)]


def hessian(e: Expr, n: int) -> list[list[Expr]]:
    """Matrix of second derivatives; each mixed partial is built once."""
    grad = gradient(e, n)
    h = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            h[i][j] = h[j][i] = diff(grad[i], j + 1)
    return h


# --------------------------------------------------------------------------
# numeric evaluation

def _sqrt_checked(a):
    if a < 0:
        raise NegativeSqrtError(f"sqrt of negative value {a!r}")
    return math.sqrt(a)


def _codegen(exprs: Sequence[Expr]) -> str:
    lines: list[str] = []
    memo: dict[Expr, str] = {}

    def emit(e: Expr) -> str:
        if isinstance(e, Const):
            return f"({float(e.value)!r})"
        if isinstance(e, Var):
            if e.name == PARAM:
                return "c"
            if e.name == PLACEHOLDER:
                return "t"
            return f"x[{e.index - 1}]"
        if e in memo:
            return memo[e]
        if isinstance(e, Neg):
            code = f"(-{emit(e.arg)})"
        elif isinstance(e, Sqrt):
            code = f"_sqrt({emit(e.arg)})"
        elif isinstance(e, Pow):
            code = f"({emit(e.base)} ** {e.exp})"
        else:
            code = f"({emit(e.left)} {e.symbol} {emit(e.right)})"
        name = f"_v{len(memo)}"
        lines.append(f"    {name} = {code}")
        memo[e] = name
        return name

    outs = [emit(e) for e in exprs]
    body = "\n".join(lines)
    return f"def _compiled(x, c, t):\n{body}\n    return ({', '.join(outs)},)\n"


class _Compiled:
    __slots__ = ("fn", "needs_c", "needs_t", "size")

    def __init__(self, exprs: tuple[Expr, ...]):
        names = frozenset().union(*(variables(e) for e in exprs)) if exprs else frozenset()
        self.needs_c = PARAM in names
        self.needs_t = PLACEHOLDER in names
        self.size = len(exprs)
        namespace = {"_sqrt": _sqrt_checked}
        exec(_codegen(exprs), namespace)
        self.fn = namespace["_compiled"]

    def __call__(self, x, c=None, t=None) -> tuple[float, ...]:
        if self.needs_c and c is None:
            raise MissingParameterError("expression uses C but no value was given")
        if self.needs_t and t is None:
            raise MissingParameterError("expression uses t but no value was given")
        # plain floats so that x/0 raises instead of producing inf as numpy scalars do
        x = [float(v) for v in x]
        c = None if c is None else float(c)
        t = None if t is None else float(t)
        try:
            return self.fn(x, c, t)
        except ZeroDivisionError as exc:
            raise DivisionByZeroError("division by zero") from exc
        except OverflowError as exc:
            raise EvalError("overflow") from exc
        except IndexError as exc:
            raise ValueError("point has fewer coordinates than the expression uses") from exc


@lru_cache(maxsize=4096)
def compile_exprs(exprs: tuple[Expr, ...]) -> _Compiled:
    """Compile several expressions into one callable ``f(x, c=None, t=None)``
    returning a tuple of floats.  Shared subtrees are evaluated once."""
    return _Compiled(tuple(exprs))


def evaluate(e: Expr, point: Sequence[float] = (), c: float | None = None,
             t: float | None = None) -> float:
    """Double-precision value of ``e`` at ``point``.

    Raises DivisionByZeroError, NegativeSqrtError or MissingParameterError.
    """
    return compile_exprs((e,))(point, c, t)[0]
