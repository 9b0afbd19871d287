"""Program evaluation and differentiation.

Bindings evaluate in order; ``print`` directives capture tensors for
output.  Random literals are drawn once, at their binding, from a single
seeded stream (depth-first, left-to-right within a binding, bindings in
program order), and the drawn values are frozen into the expression so
evaluation and differentiation see identical inputs.

``grad_program`` differentiates one bound identifier with respect to a
literal-bound identifier by splicing intermediate bindings into one
expression graph and taking the dense derivative.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .. import autodiff as ad
from ..errors import NamedTensorError
from ..rng import SplitMix64
from ..tensor import NamedTensor
from .parse import Binding, Directive, Program

__all__ = ["run_program", "evaluate_program", "grad_program", "ProgramRun"]


def _with_children(node: ad.Expr, kids: Tuple[ad.Expr, ...]) -> ad.Expr:
    new = copy.copy(node)
    if isinstance(node, ad.IndexSelect):
        new.a, new.indices = kids
    elif hasattr(node, "child"):
        (new.child,) = kids
    elif hasattr(node, "a"):
        new.a, new.b = kids
    return new


def _materialize_randoms(expr: ad.Expr, rng: SplitMix64, axis_sizes, memo) -> ad.Expr:
    if id(expr) in memo:
        return memo[id(expr)]
    if isinstance(expr, ad.RandomLiteral):
        sizes = [axis_sizes[n] for n in expr.axis_names]
        flat = rng.floats(int(np.prod(sizes)) if sizes else 1)
        arr = np.asarray(flat).reshape(sizes)
        out: ad.Expr = ad.Const(NamedTensor.from_array(arr, expr.axis_names))
        out.span = expr.span
    else:
        kids = tuple(
            _materialize_randoms(c, rng, axis_sizes, memo) for c in expr.children()
        )
        out = expr if kids == expr.children() else _with_children(expr, kids)
    memo[id(expr)] = out
    return out


@dataclass
class ProgramRun:
    """The result of evaluating a program end to end."""

    env: Dict[str, NamedTensor] = field(default_factory=dict)
    prints: List[Tuple[str, NamedTensor]] = field(default_factory=list)
    exprs: Dict[str, ad.Expr] = field(default_factory=dict)
    axis_sizes: Dict[str, int] = field(default_factory=dict)


def run_program(program: Program, seed: int = 0) -> ProgramRun:
    """Evaluate every binding in order; assumes the program checked clean."""
    from .diagnostics import RunError

    run = ProgramRun(axis_sizes=program.axis_sizes)
    rng = SplitMix64(seed)
    memo: dict = {}
    for st in program.statements:
        if isinstance(st, Binding):
            expr = _materialize_randoms(st.expr, rng, run.axis_sizes, memo)
            run.exprs[st.name] = expr
            try:
                run.env[st.name] = ad.evaluate(
                    expr, run.env, axis_sizes=run.axis_sizes
                )
            except ad.ExprError as err:
                span = err.node.span or st.span
                raise RunError(span[0], span[1], str(err.error)) from err
        elif isinstance(st, Directive) and st.kind == "print":
            if st.target not in run.env:
                raise RunError(
                    st.span[0], st.span[1],
                    f"'{st.target}' has no value to print",
                )
            run.prints.append((st.target, run.env[st.target]))
    return run


def evaluate_program(program: Program, seed: int = 0) -> Dict[str, NamedTensor]:
    """Mapping from every bound identifier to its value."""
    return run_program(program, seed).env


def _is_literal_binding(expr: ad.Expr) -> bool:
    return isinstance(expr, (ad.Const, ad.Literal))


def _inline(expr: ad.Expr, bindings: Dict[str, ad.Expr], memo: dict) -> ad.Expr:
    if id(expr) in memo:
        return memo[id(expr)]
    if isinstance(expr, ad.Var) and expr.name in bindings \
            and not _is_literal_binding(bindings[expr.name]):
        out = _inline(bindings[expr.name], bindings, memo)
    else:
        kids = tuple(_inline(c, bindings, memo) for c in expr.children())
        out = expr if kids == expr.children() else _with_children(expr, kids)
    memo[id(expr)] = out
    return out


def grad_program(
    program: Program,
    of: Optional[str],
    wrt: str,
    seed: int = 0,
) -> ad.Derivative:
    """The derivative of binding ``of`` with respect to literal binding ``wrt``.

    ``of`` may be omitted when the program carries exactly one ``grad``
    directive, which then names the target.
    """
    if of is None:
        targets = [
            st.target for st in program.statements
            if isinstance(st, Directive) and st.kind == "grad"
        ]
        if len(targets) != 1:
            raise NamedTensorError(
                "no --of given and the program does not have exactly one "
                "grad directive"
            )
        of = targets[0]
    run = run_program(program, seed)
    if of not in run.exprs:
        raise NamedTensorError(f"'{of}' is not a bound identifier")
    if wrt not in run.exprs:
        raise NamedTensorError(f"'{wrt}' is not a bound identifier")
    if not _is_literal_binding(run.exprs[wrt]):
        raise NamedTensorError(
            f"'{wrt}' must be bound to a tensor literal to differentiate "
            f"with respect to it"
        )
    root = _inline(ad.Var(of), run.exprs, {})
    return ad.jacobian(root, wrt, run.env, axis_sizes=run.axis_sizes)
