"""Scalar expression language: parsing, evaluation, symbolic differentiation.

Grammar (whitespace insignificant)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := number | identifier | identifier '(' expr ')' | '(' expr ')'

Power binds tighter than unary minus (``-2^2 == -4``) and is right
associative (``2^3^2 == 512``).  All evaluation is real-valued; anything
that would leave the reals raises :class:`DomainError`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "ParseError",
    "EvalError",
    "UnboundVariableError",
    "DomainError",
    "FUNCTIONS",
    "parse",
    "evaluate",
    "diff",
    "compile_exprs",
    "compile_vectorized",
    "as_expr",
    "ExprArray",
]


class ParseError(ValueError):
    """Syntax error; ``offset`` is the 1-based byte offset of the problem."""

    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} at offset {offset}")


class EvalError(ArithmeticError):
    """Base class for evaluation failures."""


class UnboundVariableError(EvalError, KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound variable {name!r}")

    def __str__(self):
        return self.args[0]


class DomainError(EvalError, ValueError):
    """Real-valued evaluation is undefined; ``node`` is the failing subtree."""

    def __init__(self, message: str, node: "Expr"):
        self.node = node
        super().__init__(f"{message} in {node}")


def _ln(x: float) -> float:
    if x <= 0.0:
        raise ValueError("ln of non-positive value")
    return math.log(x)


def _sqrt(x: float) -> float:
    if x < 0.0:
        raise ValueError("sqrt of negative value")
    return math.sqrt(x)


def _pow(a: float, b: float) -> float:
    # math.pow already rejects negative**non-integer and 0**negative
    return math.pow(a, b)


FUNCTIONS: dict[str, Callable[[float], float]] = {
    "exp": math.exp,
    "ln": _ln,
    "sqrt": _sqrt,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "abs": abs,
}

_BINARY: dict[str, Callable[[float, float], float]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "^": _pow,
}

# printing precedence
_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5
_BIN_PREC = {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL, "^": _PREC_POW}


class Expr:
    """Immutable expression tree node."""

    __slots__ = ()

    def eval(self, bindings: Mapping[str, float]) -> float:
        raise NotImplementedError

    def diff(self, var: str) -> "Expr":
        raise NotImplementedError

    def variables(self) -> frozenset[str]:
        raise NotImplementedError

    def _prec(self) -> int:
        raise NotImplementedError

    def _py(self, names: Mapping[str, str]) -> str:
        raise NotImplementedError

    def is_const(self) -> bool:
        return isinstance(self, Const)

    def __call__(self, **bindings: float) -> float:
        return self.eval(bindings)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float

    def eval(self, bindings):
        return self.value

    def diff(self, var):
        return ZERO

    def variables(self):
        return frozenset()

    def _prec(self):
        return _PREC_ATOM if self.value >= 0 else _PREC_NEG

    def __str__(self):
        v = self.value
        if math.isfinite(v) and v == int(v) and abs(v) < 1e15:
            s = str(int(v))
        else:
            s = repr(v)
        return f"({s})" if v < 0 or s.startswith("-") else s

    def _py(self, names):
        return f"({self.value!r})"


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str

    def eval(self, bindings):
        try:
            return bindings[self.name]
        except KeyError:
            raise UnboundVariableError(self.name) from None

    def diff(self, var):
        return ONE if var == self.name else ZERO

    def variables(self):
        return frozenset((self.name,))

    def _prec(self):
        return _PREC_ATOM

    def __str__(self):
        return self.name

    def _py(self, names):
        return names[self.name]


@dataclass(frozen=True, slots=True)
class Unary(Expr):
    """``op`` is ``"neg"`` or a name from :data:`FUNCTIONS`."""

    op: str
    arg: Expr

    def eval(self, bindings):
        a = self.arg.eval(bindings)
        if self.op == "neg":
            return -a
        try:
            return FUNCTIONS[self.op](a)
        except (ValueError, OverflowError) as exc:
            raise DomainError(str(exc), self) from None

    def diff(self, var):
        if var not in self.variables():
            return ZERO
        u, du = self.arg, self.arg.diff(var)
        op = self.op
        if op == "neg":
            return neg(du)
        if op == "exp":
            outer = self
        elif op == "ln":
            outer = div(ONE, u)
        elif op == "sqrt":
            outer = div(ONE, mul(Const(2.0), self))
        elif op == "sin":
            outer = Unary("cos", u)
        elif op == "cos":
            outer = neg(Unary("sin", u))
        elif op == "tan":
            outer = div(ONE, power(Unary("cos", u), Const(2.0)))
        elif op == "sinh":
            outer = Unary("cosh", u)
        elif op == "cosh":
            outer = Unary("sinh", u)
        elif op == "abs":
            outer = div(u, self)
        else:  # pragma: no cover - guarded by the parser
            raise ValueError(f"unknown function {op!r}")
        return mul(outer, du)

    def variables(self):
        return self.arg.variables()

    def _prec(self):
        return _PREC_NEG if self.op == "neg" else _PREC_ATOM

    def __str__(self):
        if self.op == "neg":
            a = str(self.arg)
            if self.arg._prec() < _PREC_NEG:
                a = f"({a})"
            return f"-{a}"
        return f"{self.op}({self.arg})"

    def _py(self, names):
        a = self.arg._py(names)
        if self.op == "neg":
            return f"(-{a})"
        return f"_f_{self.op}({a})"


@dataclass(frozen=True, slots=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def eval(self, bindings):
        a = self.left.eval(bindings)
        b = self.right.eval(bindings)
        try:
            return _BINARY[self.op](a, b)
        except ZeroDivisionError:
            raise DomainError("division by zero", self) from None
        except (ValueError, OverflowError) as exc:
            raise DomainError(str(exc), self) from None

    def diff(self, var):
        if var not in self.variables():
            return ZERO
        u, v = self.left, self.right
        du, dv = u.diff(var), v.diff(var)
        op = self.op
        if op == "+":
            return add(du, dv)
        if op == "-":
            return sub(du, dv)
        if op == "*":
            return add(mul(du, v), mul(u, dv))
        if op == "/":
            return div(sub(mul(du, v), mul(u, dv)), power(v, Const(2.0)))
        # u^v
        if var not in v.variables():
            return mul(mul(v, power(u, sub(v, ONE))), du)
        return mul(self, add(mul(dv, Unary("ln", u)), div(mul(v, du), u)))

    def variables(self):
        return self.left.variables() | self.right.variables()

    def _prec(self):
        return _BIN_PREC[self.op]

    def __str__(self):
        p = _BIN_PREC[self.op]
        ls, rs = str(self.left), str(self.right)
        lp, rp = self.left._prec(), self.right._prec()
        if self.op == "^":
            if lp <= _PREC_POW:
                ls = f"({ls})"
            if rp < _PREC_NEG:
                rs = f"({rs})"
        else:
            if lp < p:
                ls = f"({ls})"
            if rp <= p:
                rs = f"({rs})"
        sep = "^" if self.op == "^" else f" {self.op} "
        return f"{ls}{sep}{rs}"

    def _py(self, names):
        a, b = self.left._py(names), self.right._py(names)
        if self.op == "^":
            return f"_f_pow({a}, {b})"
        return f"({a} {self.op} {b})"


ZERO = Const(0.0)
ONE = Const(1.0)


# -- folding constructors used by diff ---------------------------------------

def _fold(op: str, a: Expr, b: Expr) -> Expr | None:
    if isinstance(a, Const) and isinstance(b, Const):
        try:
            return Const(_BINARY[op](a.value, b.value))
        except (ZeroDivisionError, ValueError, OverflowError):
            return None
    return None


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def add(a: Expr, b: Expr) -> Expr:
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return _fold("+", a, b) or Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    return _fold("-", a, b) or Binary("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return _fold("*", a, b) or Binary("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if b == ONE:
        return a
    if a == ZERO and b != ZERO:
        return ZERO
    return _fold("/", a, b) or Binary("/", a, b)


def power(a: Expr, b: Expr) -> Expr:
    if b == ONE:
        return a
    if b == ZERO:
        return ONE
    return _fold("^", a, b) or Binary("^", a, b)


# -- parser ------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


class _Parser:
    def __init__(self, source: str):
        self.src = source
        self.toks: list[tuple[str, str, int]] = []
        pos = 0
        n = len(source)
        while pos < n:
            if source[pos].isspace():
                pos += 1
                continue
            m = _TOKEN.match(source, pos)
            if not m or m.end() == pos:
                raise ParseError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos), source)
            kind = m.lastgroup
            start = m.start(kind)
            self.toks.append((kind, m.group(kind), start))
            pos = m.end()
        self.toks.append(("end", "", n))
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str, pos: int):
        raise ParseError(msg, _byte_offset(self.src, pos), self.src)

    def expect(self, text: str):
        kind, val, pos = self.take()
        if val != text or kind != "op":
            if text == ")":
                self.error("unbalanced parentheses: expected ')'", pos)
            self.error(f"expected {text!r}", pos)

    def parse(self) -> Expr:
        kind, _, pos = self.peek()
        if kind == "end":
            self.error("empty expression", pos)
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            if val == ")":
                self.error("unbalanced parentheses: unexpected ')'", pos)
            self.error(f"unexpected token {val!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Binary(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Binary(op, e, self.factor())
        return e

    def factor(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Unary("neg", self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            return Binary("^", base, self.factor())
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "id":
            nk, nv, _ = self.peek()
            if nk == "op" and nv == "(":
                if val not in FUNCTIONS:
                    self.error(f"unknown function {val!r}", pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Unary(val, arg)
            return Var(val)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            self.error("unexpected end of input", pos)
        if val == ")":
            self.error("unbalanced parentheses: unexpected ')'", pos)
        self.error(f"unexpected token {val!r}", pos)


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8")) + 1


def parse(source: str) -> Expr:
    """Parse *source* into an expression tree."""
    if not isinstance(source, str):
        raise TypeError(f"expected str, got {type(source).__name__}")
    return _Parser(source).parse()


def as_expr(value) -> Expr:
    """Coerce a DSL string, number or Expr to an Expr."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not expressions")
    if isinstance(value, (int, float)):
        return Const(float(value)) if value >= 0 else Unary("neg", Const(float(-value)))
    return parse(str(value))


def evaluate(e: Expr | str, bindings: Mapping[str, float]) -> float:
    return as_expr(e).eval(bindings)


def diff(e: Expr | str, var: str) -> Expr:
    """Exact partial derivative of *e* with respect to *var*."""
    return as_expr(e).diff(var)


# -- compilation -------------------------------------------------------------

_COMPILE_ENV = {f"_f_{name}": fn for name, fn in FUNCTIONS.items()}
_COMPILE_ENV["_f_pow"] = _pow

# array mode: domain violations become NaN instead of raising
_VECTOR_ENV = {
    "_f_exp": np.exp,
    "_f_ln": lambda a: np.log(np.where(a > 0, a, np.nan)),
    "_f_sqrt": lambda a: np.sqrt(np.where(a >= 0, a, np.nan)),
    "_f_sin": np.sin,
    "_f_cos": np.cos,
    "_f_tan": np.tan,
    "_f_sinh": np.sinh,
    "_f_cosh": np.cosh,
    "_f_abs": np.abs,
    "_f_pow": lambda a, b: np.power(np.asarray(a, dtype=float), b),
}


def compile_exprs(
    exprs: Sequence[Expr], argnames: Sequence[str], constants: Mapping[str, float] | None = None
) -> Callable[..., tuple[float, ...]]:
    """Compile *exprs* into one function of positional *argnames* returning a tuple.

    Variables listed in *constants* are baked in.  Results are bit-identical
    to :meth:`Expr.eval`; on any arithmetic failure the tree evaluator is
    re-run so the error names the offending node.
    """
    return _compile(exprs, argnames, constants, vector=False)


def compile_vectorized(
    exprs: Sequence[Expr], argnames: Sequence[str], constants: Mapping[str, float] | None = None
) -> Callable[..., tuple]:
    """Like :func:`compile_exprs` but over numpy arrays; undefined values become NaN."""
    return _compile(exprs, argnames, constants, vector=True)


def _compile(exprs, argnames, constants, vector):
    constants = dict(constants or {})
    names = {a: f"_a{i}" for i, a in enumerate(argnames)}
    for k in constants:
        if k not in names:
            names[k] = f"_c_{len(names)}"
    missing = set().union(*(e.variables() for e in exprs)) - set(names) if exprs else set()
    if missing:
        raise UnboundVariableError(sorted(missing)[0])
    env = dict(_VECTOR_ENV if vector else _COMPILE_ENV)
    for k, v in constants.items():
        if k not in argnames:
            env[names[k]] = float(v)
    body = ", ".join(e._py(names) for e in exprs)
    params = ", ".join(names[a] for a in argnames)
    src = f"def _compiled({params}):\n    return ({body}{',' if len(exprs) == 1 else ''})\n"
    code = compile(src, "<exprdsl>", "exec")
    exec(code, env)
    fast = env["_compiled"]
    argnames = tuple(argnames)
    exprs = tuple(exprs)

    if vector:
        def run_vector(*args):
            with np.errstate(all="ignore"):
                return fast(*args)

        return run_vector

    def run(*args):
        try:
            return fast(*args)
        except (ZeroDivisionError, ValueError, OverflowError):
            b = dict(constants)
            b.update(zip(argnames, args))
            for e in exprs:
                e.eval(b)
            raise  # pragma: no cover - tree evaluation always re-raises

    run.argnames = argnames
    run.exprs = exprs
    return run


def free_variables(exprs: Iterable[Expr]) -> frozenset[str]:
    out: frozenset[str] = frozenset()
    for e in exprs:
        out |= e.variables()
    return out


class ExprArray:
    """A fixed-shape array of expressions compiled into one callable.

    ``arr(*values)`` evaluates every entry at the positional values of
    ``argnames`` and returns a float ndarray of ``shape``.
    """

    def __init__(self, exprs, argnames: Sequence[str], constants: Mapping[str, float] | None = None):
        if isinstance(exprs, (str, Expr, int, float)):
            arr = np.empty((), dtype=object)
            arr[()] = exprs
        else:
            arr = np.array(exprs, dtype=object)
        if any(isinstance(v, (list, tuple)) for v in arr.reshape(-1)):
            raise ValueError("expression array is ragged")
        flat = [as_expr(e) for e in arr.reshape(-1)]
        self.shape = arr.shape
        self.flat = tuple(flat)
        self.argnames = tuple(argnames)
        self.constants = dict(constants or {})
        self._fn = compile_exprs(self.flat, self.argnames, self.constants) if self.flat else None
        self._derivs: dict[tuple[str, ...], ExprArray] = {}
        self._vfn = None

    def __call__(self, *values):
        if self._fn is None:
            return np.zeros(self.shape)
        return np.array(self._fn(*map(float, values)), dtype=float).reshape(self.shape)

    def at(self, values):
        return self(*values)

    def vectorized(self, *arrays) -> np.ndarray:
        """Evaluate over broadcastable arrays; result has shape ``self.shape + broadcast``."""
        arrays = [np.asarray(a, dtype=float) for a in arrays]
        bshape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
        if not self.flat:
            return np.zeros(self.shape + bshape)
        if self._vfn is None:
            self._vfn = compile_vectorized(self.flat, self.argnames, self.constants)
        vals = self._vfn(*arrays)
        out = np.empty((len(self.flat),) + bshape)
        for i, v in enumerate(vals):
            out[i] = v
        return out.reshape(self.shape + bshape)

    def entries(self):
        out = np.empty(len(self.flat), dtype=object)
        for i, e in enumerate(self.flat):
            out[i] = e
        return out.reshape(self.shape)

    def derivative(self, wrt: Sequence[str]) -> "ExprArray":
        """Array of partials with one trailing axis over *wrt*."""
        wrt = tuple(wrt)
        if wrt not in self._derivs:
            d = np.empty(self.shape + (len(wrt),), dtype=object)
            for idx, e in zip(np.ndindex(self.shape), self.flat):
                for a, v in enumerate(wrt):
                    d[idx + (a,)] = e.diff(v)
            self._derivs[wrt] = ExprArray(d, self.argnames, self.constants)
        return self._derivs[wrt]

