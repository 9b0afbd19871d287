"""Lifting: extending tensor functions to operands with extra axes.

A :class:`TensorFunction` declares the exact input shapes it consumes and
the exact output shape it produces.  :func:`extend` applies such a function
to operands that carry *extra* axes beyond their declared base shapes: the
extra ("extension") axes are inferred per operand, extensions of different
operands are aligned by name, and the base function runs once per record of
the joint extension space.  Extension axes never stretch size-1 dimensions
and never overlap the output shape; violations raise rather than guess.

The defining property: for every record ``s`` of the joint extension space,
``result[s] == f(*(arg[s restricted to that arg's extension] for arg))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np

from .axes import Shape
from .errors import (
    ExtensionCollision,
    MissingAxis,
    ShapeMismatch,
    SizeMismatch,
)
from .tensor import NamedTensor, as_tensor

__all__ = ["TensorFunction", "extend", "extend_unary", "extend_binary", "extend_multary"]


@dataclass(frozen=True)
class TensorFunction:
    """A base function from tensors of fixed shapes to a tensor of a fixed shape.

    ``body`` must be pure and total on its declared input shapes; the output
    shape it produces is verified on every call.
    """

    input_shapes: Tuple[Shape, ...]
    output_shape: Shape
    body: Callable[..., "NamedTensor | float"]
    name: str = "<base>"

    def __post_init__(self):
        object.__setattr__(self, "input_shapes", tuple(self.input_shapes))

    def __call__(self, *args: NamedTensor) -> NamedTensor:
        out = as_tensor(self.body(*args))
        if out.shape != self.output_shape:
            raise ShapeMismatch(
                f"base function {self.name} produced shape {out.shape}, "
                f"declared {self.output_shape}",
                out.shape,
                self.output_shape,
            )
        return out


def _extensions(f: TensorFunction, args: Sequence[NamedTensor]) -> list:
    if len(args) != len(f.input_shapes):
        raise TypeError(
            f"{f.name} takes {len(f.input_shapes)} arguments, got {len(args)}"
        )
    exts = []
    for arg, base in zip(args, f.input_shapes):
        for ax in base:
            if ax.name not in arg.shape:
                raise MissingAxis(
                    f"{f.name}: operand of shape {arg.shape} lacks base axis {ax!r}",
                    arg.shape,
                    base,
                )
            if arg.shape.size(ax.name) != ax.size:
                raise SizeMismatch(
                    f"{f.name}: operand has {ax.name}[{arg.shape.size(ax.name)}], "
                    f"base expects {ax!r}",
                    arg.shape,
                    base,
                )
        exts.append(arg.shape.drop(base.names))
    # An extension name may not be a base name of another operand; the
    # slice-wise semantics would be ambiguous, so such calls are rejected.
    for i, ext in enumerate(exts):
        for j, base in enumerate(f.input_shapes):
            if i == j:
                continue
            clash = [n for n in ext.names if n in base]
            if clash:
                raise ExtensionCollision(
                    f"{f.name}: extension axis {clash[0]!r} of operand {i + 1} "
                    f"is a base axis of operand {j + 1}",
                    ext,
                    base,
                )
    return exts


def extend(f: TensorFunction, *args) -> NamedTensor:
    """Apply ``f`` to operands that may carry extra axes beyond their bases."""
    args = tuple(as_tensor(a) for a in args)
    exts = _extensions(f, args)
    joint = Shape()
    for ext in exts:
        joint = joint.union(ext)  # raises IncompatibleShapes on size conflict
    if not joint.orthogonal(f.output_shape):
        clash = [n for n in joint.names if n in f.output_shape]
        raise ExtensionCollision(
            f"{f.name}: extension axis {clash[0]!r} collides with the output shape",
            joint,
            f.output_shape,
        )
    if not len(joint):
        return f(*args)

    result_shape = f.output_shape.union(joint)
    out = np.empty(result_shape.sizes)
    names = result_shape.names
    for s in joint.records():
        slices = [
            arg.partial_index(s.restrict_names(ext.names))
            for arg, ext in zip(args, exts)
        ]
        value = f(*slices)
        indexer = tuple(
            s[n] - 1 if n in joint else slice(None) for n in names
        )
        out[indexer] = value.array
    return NamedTensor(result_shape, out)


def extend_unary(f: TensorFunction, a) -> NamedTensor:
    if len(f.input_shapes) != 1:
        raise TypeError(f"{f.name} is not unary")
    return extend(f, a)


def extend_binary(f: TensorFunction, a, b) -> NamedTensor:
    if len(f.input_shapes) != 2:
        raise TypeError(f"{f.name} is not binary")
    return extend(f, a, b)


def extend_multary(f: TensorFunction, *args) -> NamedTensor:
    return extend(f, *args)
