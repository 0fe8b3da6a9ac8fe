"""Arithmetic expression trees for model equations.

Expressions are built from numeric literals, variable references, binary
operators, and a fixed set of builtin functions. Two evaluation paths exist:
a tree-walking interpreter (`eval_expression`) and a code generator that
turns an expression into a plain Python function (`compile_function`). Both
paths perform the same floating-point operations in the same order, so their
results are bit-identical; tests rely on that.

The symbol `t` always refers to current simulation time. `noise(scale)`
multiplies its argument by the per-evaluation Gaussian draw `g` supplied by
the engine, which makes stochastic terms reproducible under a fixed seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable

from .errors import UnknownSymbolError

# Builtin function name -> arity. `if` is lazy: only the taken branch is
# evaluated, so guarded divisions like if(x > 0, y / x, 0) are safe.
BUILTINS: dict[str, int] = {
    "min": 2,
    "max": 2,
    "clamp": 3,
    "abs": 1,
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "ln": 1,
    "if": 3,
    "ceil": 1,
    "floor": 1,
    "noise": 1,
}

COMPARISONS = ("<", "<=", ">", ">=", "==", "!=")
ARITHMETIC = ("+", "-", "*", "/", "^")


class Expr:
    """Base class for expression nodes."""

    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Num(Expr):
    value: float


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Call(Expr):
    fn: str
    args: tuple[Expr, ...]


def eval_expression(expr: Expr, env: dict[str, float], t: float = 0.0, g: float = 0.0) -> float:
    """Evaluate `expr` against `env`, with time `t` and noise draw `g`.

    Comparison operators return 1.0 or 0.0. Raises UnknownSymbolError for
    names missing from `env`; arithmetic faults (division by zero, log of a
    negative) propagate as the usual Python exceptions for the caller to map.
    """
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        if expr.name == "t":
            return t
        try:
            return env[expr.name]
        except KeyError:
            raise UnknownSymbolError(f"undefined symbol '{expr.name}'") from None
    if isinstance(expr, BinOp):
        a = eval_expression(expr.left, env, t, g)
        b = eval_expression(expr.right, env, t, g)
        op = expr.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return a / b
        if op == "^":
            return math.pow(a, b)
        if op == "<":
            return 1.0 if a < b else 0.0
        if op == "<=":
            return 1.0 if a <= b else 0.0
        if op == ">":
            return 1.0 if a > b else 0.0
        if op == ">=":
            return 1.0 if a >= b else 0.0
        if op == "==":
            return 1.0 if a == b else 0.0
        if op == "!=":
            return 1.0 if a != b else 0.0
        raise ValueError(f"unknown operator '{op}'")
    if isinstance(expr, Call):
        fn = expr.fn
        if fn == "if":
            cond = eval_expression(expr.args[0], env, t, g)
            branch = expr.args[1] if cond != 0.0 else expr.args[2]
            return eval_expression(branch, env, t, g)
        args = [eval_expression(a, env, t, g) for a in expr.args]
        if fn == "min":
            return min(args[0], args[1])
        if fn == "max":
            return max(args[0], args[1])
        if fn == "clamp":
            return min(max(args[0], args[1]), args[2])
        if fn == "abs":
            return abs(args[0])
        if fn == "sin":
            return math.sin(args[0])
        if fn == "cos":
            return math.cos(args[0])
        if fn == "exp":
            return math.exp(args[0])
        if fn == "ln":
            return math.log(args[0])
        if fn == "ceil":
            return float(math.ceil(args[0]))
        if fn == "floor":
            return float(math.floor(args[0]))
        if fn == "noise":
            return args[0] * g
        raise UnknownSymbolError(f"unknown function '{fn}'")
    raise TypeError(f"not an expression node: {expr!r}")


def variables(expr: Expr) -> set[str]:
    """All names referenced by `expr`, including `t` if present."""
    out: set[str] = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, BinOp):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Call):
            stack.extend(node.args)
    return out


def validate_expression(expr: Expr, known: set[str]) -> None:
    """Check that all names resolve and builtin calls have correct arity."""
    if isinstance(expr, Num):
        if not math.isfinite(expr.value):
            raise ValueError(f"non-finite literal {expr.value!r}")
        return
    if isinstance(expr, Var):
        if expr.name != "t" and expr.name not in known:
            raise UnknownSymbolError(f"undefined symbol '{expr.name}'")
        return
    if isinstance(expr, BinOp):
        if expr.op not in ARITHMETIC and expr.op not in COMPARISONS:
            raise ValueError(f"unknown operator '{expr.op}'")
        validate_expression(expr.left, known)
        validate_expression(expr.right, known)
        return
    if isinstance(expr, Call):
        arity = BUILTINS.get(expr.fn)
        if arity is None:
            raise UnknownSymbolError(f"unknown function '{expr.fn}'")
        if len(expr.args) != arity:
            raise ValueError(f"{expr.fn}() takes {arity} arguments, got {len(expr.args)}")
        for a in expr.args:
            validate_expression(a, known)
        return
    raise TypeError(f"not an expression node: {expr!r}")


# Operator precedence for parsing and printing. Comparisons bind loosest and
# do not chain; `^` binds tightest and associates to the right.
_PREC = {
    "<": 1, "<=": 1, ">": 1, ">=": 1, "==": 1, "!=": 1,
    "+": 2, "-": 2,
    "*": 3, "/": 3,
    "^": 4,
}


def to_source(expr: Expr) -> str:
    """Render `expr` as model-language text with minimal parentheses.

    Round-trips through the parser: parse(to_source(e)) == e.
    """
    return _render(expr, 0)


def _render(expr: Expr, parent_prec: int) -> str:
    if isinstance(expr, Num):
        return format_number(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Call):
        return expr.fn + "(" + ", ".join(_render(a, 0) for a in expr.args) + ")"
    if isinstance(expr, BinOp):
        prec = _PREC[expr.op]
        if expr.op == "^":
            # Right-associative: parenthesize an equal-precedence left child.
            text = _render(expr.left, prec + 1) + " ^ " + _render(expr.right, prec)
        elif expr.op in COMPARISONS:
            # Non-associative: force parens around nested comparisons.
            text = _render(expr.left, prec + 1) + f" {expr.op} " + _render(expr.right, prec + 1)
        else:
            text = _render(expr.left, prec) + f" {expr.op} " + _render(expr.right, prec + 1)
        if prec < parent_prec:
            return "(" + text + ")"
        return text
    raise TypeError(f"not an expression node: {expr!r}")


def format_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def compile_source(expr: Expr) -> str:
    """Generate a Python expression string equivalent to `expr`.

    Free names: `env` (dict of variable values), `t`, `g`, and `math`.
    Generated code mirrors the interpreter operation for operation so the
    two paths cannot drift apart numerically.
    """
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Var):
        if expr.name == "t":
            return "t"
        return f"env[{expr.name!r}]"
    if isinstance(expr, BinOp):
        a = compile_source(expr.left)
        b = compile_source(expr.right)
        if expr.op == "^":
            return f"math.pow({a}, {b})"
        if expr.op in COMPARISONS:
            return f"(1.0 if {a} {expr.op} {b} else 0.0)"
        return f"({a} {expr.op} {b})"
    if isinstance(expr, Call):
        args = [compile_source(a) for a in expr.args]
        fn = expr.fn
        if fn == "if":
            return f"({args[1]} if {args[0]} != 0.0 else {args[2]})"
        if fn == "min":
            return f"min({args[0]}, {args[1]})"
        if fn == "max":
            return f"max({args[0]}, {args[1]})"
        if fn == "clamp":
            return f"min(max({args[0]}, {args[1]}), {args[2]})"
        if fn == "abs":
            return f"abs({args[0]})"
        if fn == "ln":
            return f"math.log({args[0]})"
        if fn in ("sin", "cos", "exp"):
            return f"math.{fn}({args[0]})"
        if fn in ("ceil", "floor"):
            return f"float(math.{fn}({args[0]}))"
        if fn == "noise":
            return f"({args[0]} * g)"
        raise UnknownSymbolError(f"unknown function '{fn}'")
    raise TypeError(f"not an expression node: {expr!r}")


def compile_function(expr: Expr, name: str = "<expr>") -> Callable[[dict[str, float], float, float], float]:
    """Compile `expr` into a callable f(env, t, g) -> float."""
    src = f"def _compiled(env, t, g):\n    return {compile_source(expr)}\n"
    namespace: dict[str, object] = {"math": math}
    code = compile(src, f"<compiled {name}>", "exec")
    exec(code, namespace)
    return namespace["_compiled"]  # type: ignore[return-value]


_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1


def daily_gauss(seed: int, day: int) -> float:
    """Standard-normal draw for (seed, day), stable across runs and order.

    Each day gets its own generator keyed by seed and day index, so changing
    the horizon or recording stride never shifts the noise sequence.
    """
    rng = random.Random(((seed & _MASK64) << 32) ^ (day & _MASK32))
    return rng.normalvariate(0.0, 1.0)
