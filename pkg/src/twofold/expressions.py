"""Restricted arithmetic expressions for parameter-dependent coefficients.

Coefficients in model files may be strings such as ``"b_plus + 0.5*lam"``.
Only numbers, names, ``+ - * / **`` and parentheses are accepted; anything
else is rejected at parse time so a config file can never execute code.
"""
from __future__ import annotations

import ast
import operator
from dataclasses import dataclass
from typing import Mapping

from .errors import ConfigError

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _check(node: ast.AST, text: str) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, text)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ConfigError(f"operator not allowed in {text!r}")
        _check(node.left, text)
        _check(node.right, text)
    elif isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNARY:
            raise ConfigError(f"operator not allowed in {text!r}")
        _check(node.operand, text)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ConfigError(f"non-numeric constant in {text!r}")
    elif isinstance(node, ast.Name):
        pass
    else:
        raise ConfigError(f"unsupported syntax {type(node).__name__} in {text!r}")


def _names(node: ast.AST) -> set[str]:
    return {n.id for n in ast.walk(node) if isinstance(n, ast.Name)}


def _eval(node: ast.AST, env: Mapping[str, float]) -> float:
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, env))
    if isinstance(node, ast.Constant):
        return float(node.value)
    return float(env[node.id])


@dataclass(frozen=True)
class Expr:
    """A parsed coefficient expression over ``lam`` and named parameters."""

    text: str

    def __post_init__(self):
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {self.text!r}: {exc.msg}") from None
        _check(tree, self.text)
        object.__setattr__(self, "_tree", tree)
        object.__setattr__(self, "names", frozenset(_names(tree)))

    def __call__(self, env: Mapping[str, float]) -> float:
        missing = self.names - set(env)
        if missing:
            raise ConfigError(f"unknown name(s) {sorted(missing)} in {self.text!r}")
        return _eval(self._tree, env)

    def __reduce__(self):
        return (Expr, (self.text,))
