"""Closed-form initial-data expressions.

The vocabulary is deliberately small: numbers, ``pi``, the coordinates
``x`` (and ``y`` in 2D), ``+ - * /``, ``cos``, ``sin`` and ``box`` (indicator
of an open axis-aligned box: ``box(a, b)`` in 1D, ``box(x0, x1, y0, y1)`` in 2D).

>>> f = compile_expression("2 - cos(2*pi*x)", dim=1)
>>> float(f(0.0))
1.0
"""

from __future__ import annotations

import ast
import operator

import numpy as np

from .errors import InvalidArgument

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _box(coords, *bounds):
    if len(bounds) != 2 * len(coords):
        raise InvalidArgument(f"box() needs {2 * len(coords)} bounds in {len(coords)}D")
    out = 1.0
    for a, (lo, hi) in enumerate(zip(bounds[::2], bounds[1::2])):
        out = out * ((coords[a] > lo) & (coords[a] < hi))
    return np.asarray(out, dtype=float)


def _validate(node, names):
    if isinstance(node, ast.Expression):
        return _validate(node.body, names)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return
    if isinstance(node, ast.Name):
        if node.id not in names:
            raise InvalidArgument(f"unknown name {node.id!r}; allowed: {', '.join(sorted(names))}")
        return
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _validate(node.left, names)
        _validate(node.right, names)
        return
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        _validate(node.operand, names)
        return
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in ("cos", "sin", "box") and not node.keywords:
        if node.func.id in ("cos", "sin") and len(node.args) != 1:
            raise InvalidArgument(f"{node.func.id}() takes one argument")
        for a in node.args:
            _validate(a, names)
        return
    raise InvalidArgument(f"unsupported construct: {ast.dump(node)[:60]}")


def _eval(node, env, coords):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env, coords), _eval(node.right, env, coords))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, env, coords))
    args = [_eval(a, env, coords) for a in node.args]
    if node.func.id == "cos":
        return np.cos(args[0])
    if node.func.id == "sin":
        return np.sin(args[0])
    return _box(coords, *args)


def compile_expression(text: str, dim: int = 1):
    """Return ``f(*coords)`` evaluating ``text``; raises InvalidArgument on bad input."""
    try:
        tree = ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as exc:
        raise InvalidArgument(f"cannot parse expression {text!r}: {exc.msg}") from None
    coord_names = ("x", "y")[:dim]
    _validate(tree, set(coord_names) | {"pi"})

    def f(*coords):
        env = {"pi": np.pi, **dict(zip(coord_names, coords))}
        val = _eval(tree.body, env, coords)
        return np.broadcast_to(np.asarray(val, dtype=float), np.shape(coords[0]))

    f.expression = text
    return f
