"""Expression graphs over named tensors and axis-aware differentiation.

An :class:`Expr` is an immutable node in an acyclic graph: variables and
constants at the leaves, tensor operations above them.  The same graph is
used three ways: :func:`infer_shape` runs the shape rules only,
:func:`evaluate` computes values, and :func:`vjp` / :func:`jacobian`
differentiate.

Derivatives follow the named-axis convention: the derivative of ``Y`` (shape
``T``) with respect to variable ``X`` (shape ``S``) is a tensor over ``S``
together with a *primed* copy of ``T`` -- every output name that collides
with an input name gains prime marks until fresh, so input and output axes
never mix.  ``jacobian`` returns the dense derivative plus the applied
renaming; ``vjp`` contracts a cotangent against the derivative without ever
materializing it.

Subgradient conventions: ``relu`` has slope 0 at the origin; max/min
reductions send all mass to the first extremum in record-enumeration order;
``argmax``/``argmin``/``argmaxk`` and index arguments are treated as
constants; ``maxk`` differentiates through the selected positions.
Differentiating through ``det``/``inv`` is unsupported and raises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional, Sequence

import numpy as np

from . import ops
from .axes import Axis, Record, Shape
from .errors import (
    MissingAxis,
    NamedTensorError,
    ShapeError,
    ShapeMismatch,
    SizeMismatch,
    UnboundVariable,
    UnsupportedDerivative,
)
from .ops import _aligned
from .rng import SplitMix64
from .tensor import NamedTensor, as_tensor

__all__ = [
    "Expr", "ExprError", "Derivative", "LiftReport",
    "var", "const", "literal", "random_literal", "size_of",
    "add", "sub", "mul", "div", "pow_", "neg",
    "relu", "sigmoid", "exp", "log", "sqrt",
    "reduce", "sum_", "mean_", "max_", "min_", "var_", "norm_",
    "contract", "softmax", "argmax", "argmin", "standardize",
    "rename", "merge", "split", "unroll", "index_select",
    "maxk", "argmaxk", "det", "inv", "partial_index",
    "infer_shape", "evaluate", "vjp", "jacobian", "lifted_derivative_check",
]


class ExprError(NamedTensorError):
    """Wraps an error raised while processing a specific expression node."""

    def __init__(self, node: "Expr", error: Exception):
        super().__init__(str(error))
        self.node = node
        self.error = error


class Context:
    """Carries the axis-size table and the literal generator during walks."""

    __slots__ = ("axis_sizes", "rng", "require_declared")

    def __init__(self, axis_sizes: Optional[Mapping[str, int]] = None,
                 rng: Optional[SplitMix64] = None,
                 require_declared: bool = False):
        self.axis_sizes = dict(axis_sizes) if axis_sizes else {}
        self.rng = rng
        self.require_declared = require_declared

    def size_of(self, name: str) -> int:
        if name not in self.axis_sizes:
            raise MissingAxis(f"axis {name!r} has no declared size")
        return self.axis_sizes[name]


class Expr:
    """Base class for expression nodes.  Nodes are immutable after creation."""

    kind = "expr"

    def __init__(self):
        self.span = None  # (line, col), set by the language parser

    def children(self) -> tuple:
        return ()

    def _key(self) -> tuple:
        return ()

    def _infer(self, child_shapes, ctx: Context, env) -> Shape:
        raise NotImplementedError

    def _eval(self, child_values, ctx: Context, env) -> NamedTensor:
        raise NotImplementedError

    def _grads(self, g: NamedTensor, child_values, value: NamedTensor, ctx: Context):
        raise NotImplementedError

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented if not isinstance(other, Expr) else False
        return self._key() == other._key() and self.children() == other.children()

    # operator sugar -------------------------------------------------------

    def __add__(self, other):
        return Binary("add", self, wrap(other))

    def __radd__(self, other):
        return Binary("add", wrap(other), self)

    def __sub__(self, other):
        return Binary("sub", self, wrap(other))

    def __rsub__(self, other):
        return Binary("sub", wrap(other), self)

    def __mul__(self, other):
        return Binary("mul", self, wrap(other))

    def __rmul__(self, other):
        return Binary("mul", wrap(other), self)

    def __truediv__(self, other):
        return Binary("div", self, wrap(other))

    def __rtruediv__(self, other):
        return Binary("div", wrap(other), self)

    def __pow__(self, other):
        return Binary("pow", self, wrap(other))

    def __neg__(self):
        return Unary("neg", self)


def wrap(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, NamedTensor):
        return Const(value)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Const(NamedTensor.scalar(value))
    raise TypeError(f"cannot use {type(value).__name__} in an expression")


# ---------------------------------------------------------------------------
# leaves

class Var(Expr):
    kind = "var"

    def __init__(self, name: str):
        super().__init__()
        self.name = name

    def _key(self):
        return (self.name,)

    def _infer(self, child_shapes, ctx, env):
        if self.name not in env:
            raise UnboundVariable(f"variable {self.name!r} is not bound")
        bound = env[self.name]
        return bound.shape if isinstance(bound, NamedTensor) else bound

    def _eval(self, child_values, ctx, env):
        if self.name not in env:
            raise UnboundVariable(f"variable {self.name!r} is not bound")
        return as_tensor(env[self.name])

    def _grads(self, g, child_values, value, ctx):
        return ()

    def __repr__(self):
        return f"Var({self.name!r})"


class Const(Expr):
    kind = "const"

    def __init__(self, value: NamedTensor):
        super().__init__()
        self.value = as_tensor(value)

    def _key(self):
        return (self.value,)

    def _infer(self, child_shapes, ctx, env):
        return self.value.shape

    def _eval(self, child_values, ctx, env):
        return self.value

    def _grads(self, g, child_values, value, ctx):
        return ()


def _freeze(values):
    if isinstance(values, (list, tuple)):
        return tuple(_freeze(v) for v in values)
    return float(values)


class Literal(Expr):
    """A nested-list tensor literal; nesting level i binds axis_names[i]."""

    kind = "literal"

    def __init__(self, values, axis_names: Sequence[str]):
        super().__init__()
        self.values = _freeze(values)
        self.axis_names = tuple(axis_names)

    def _key(self):
        return (self.values, self.axis_names)

    def _build(self) -> NamedTensor:
        try:
            arr = np.asarray(self.values, dtype=np.float64)
        except ValueError as e:
            raise ShapeMismatch(f"ragged tensor literal: {e}") from None
        if arr.ndim != len(self.axis_names):
            raise ShapeMismatch(
                f"literal nests {arr.ndim} deep but names {len(self.axis_names)} axes"
            )
        try:
            return NamedTensor.from_array(arr, self.axis_names)
        except ValueError as e:
            raise ShapeError(str(e)) from None

    def _infer(self, child_shapes, ctx, env):
        shape = self._build().shape
        if ctx.require_declared:
            for name in self.axis_names:
                declared = ctx.size_of(name)
                if declared != shape.size(name):
                    raise SizeMismatch(
                        f"literal gives {name!r} size {shape.size(name)}, "
                        f"declared size is {declared}",
                        shape,
                    )
        return shape

    def _eval(self, child_values, ctx, env):
        return self._build()

    def _grads(self, g, child_values, value, ctx):
        return ()


class RandomLiteral(Expr):
    """A seeded uniform [-1, 1) tensor over declared axes."""

    kind = "random"

    def __init__(self, axis_names: Sequence[str]):
        super().__init__()
        self.axis_names = tuple(axis_names)

    def _key(self):
        return (self.axis_names,)

    def _shape(self, ctx) -> Shape:
        try:
            return Shape(Axis(n, ctx.size_of(n)) for n in self.axis_names)
        except ValueError as e:
            raise ShapeError(str(e)) from None

    def _infer(self, child_shapes, ctx, env):
        return self._shape(ctx)

    def _eval(self, child_values, ctx, env):
        shape = self._shape(ctx)
        if ctx.rng is None:
            raise NamedTensorError("random literal needs a seeded generator")
        flat = [ctx.rng.next_symmetric() for _ in range(
            math.prod(shape.size(n) for n in self.axis_names))]
        arr = np.asarray(flat).reshape([shape.size(n) for n in self.axis_names])
        return NamedTensor.from_array(arr, self.axis_names)

    def _grads(self, g, child_values, value, ctx):
        return ()


class SizeOf(Expr):
    """The size of a declared axis, as a scalar."""

    kind = "size"

    def __init__(self, axis_name: str):
        super().__init__()
        self.axis_name = axis_name

    def _key(self):
        return (self.axis_name,)

    def _infer(self, child_shapes, ctx, env):
        ctx.size_of(self.axis_name)
        return Shape()

    def _eval(self, child_values, ctx, env):
        return NamedTensor.scalar(ctx.size_of(self.axis_name))

    def _grads(self, g, child_values, value, ctx):
        return ()


# ---------------------------------------------------------------------------
# gradient plumbing

def _shrink(t: NamedTensor, target: Shape) -> NamedTensor:
    """Sum a cotangent over the axes broadcasting introduced."""
    extra = [n for n in t.shape.names if n not in target]
    return ops.reduce(t, "sum", extra) if extra else t


def _expand(t: NamedTensor, target: Shape) -> NamedTensor:
    """Replicate a cotangent over axes a reduction consumed."""
    if t.shape == target:
        return t
    return NamedTensor(target, _aligned(t, target))


def _fit(t: NamedTensor, target: Shape) -> NamedTensor:
    return _expand(_shrink(t, target), target)


# ---------------------------------------------------------------------------
# elementwise nodes

class Unary(Expr):
    kind = "unary"
    OPS = ("neg", "relu", "sigma", "exp", "log", "sqrt")

    def __init__(self, op: str, child: Expr):
        super().__init__()
        if op not in self.OPS:
            raise ValueError(f"unknown unary op {op!r}")
        self.op = op
        self.child = child

    def children(self):
        return (self.child,)

    def _key(self):
        return (self.op,)

    def _infer(self, child_shapes, ctx, env):
        return child_shapes[0]

    def _eval(self, child_values, ctx, env):
        (x,) = child_values
        fn = {
            "neg": ops.neg, "relu": ops.relu, "sigma": ops.sigmoid,
            "exp": ops.exp, "log": ops.log, "sqrt": ops.sqrt,
        }[self.op]
        return fn(x)

    def _grads(self, g, child_values, value, ctx):
        (x,) = child_values
        ga, ya, xa = g.array, value.array, x.array
        if self.op == "neg":
            out = -ga
        elif self.op == "relu":
            out = ga * (xa > 0.0)
        elif self.op == "sigma":
            out = ga * ya * (1.0 - ya)
        elif self.op == "exp":
            out = ga * ya
        elif self.op == "log":
            with np.errstate(all="ignore"):
                out = ga / xa
        else:  # sqrt
            with np.errstate(all="ignore"):
                out = ga / (2.0 * ya)
        return (NamedTensor(x.shape, out),)


class Binary(Expr):
    kind = "binary"
    OPS = ("add", "sub", "mul", "div", "pow")

    def __init__(self, op: str, a: Expr, b: Expr):
        super().__init__()
        if op not in self.OPS:
            raise ValueError(f"unknown binary op {op!r}")
        self.op = op
        self.a = a
        self.b = b

    def children(self):
        return (self.a, self.b)

    def _key(self):
        return (self.op,)

    def _infer(self, child_shapes, ctx, env):
        return ops.binary_shape(child_shapes[0], child_shapes[1])

    def _eval(self, child_values, ctx, env):
        a, b = child_values
        fn = {"add": ops.add, "sub": ops.sub, "mul": ops.mul,
              "div": ops.div, "pow": ops.pow_}[self.op]
        return fn(a, b)

    def _grads(self, g, child_values, value, ctx):
        a, b = child_values
        if self.op == "add":
            return (_shrink(g, a.shape), _shrink(g, b.shape))
        if self.op == "sub":
            return (_shrink(g, a.shape), ops.neg(_shrink(g, b.shape)))
        if self.op == "mul":
            return (
                _shrink(ops.mul(g, b), a.shape),
                _shrink(ops.mul(g, a), b.shape),
            )
        if self.op == "div":
            return (
                _shrink(ops.div(g, b), a.shape),
                ops.neg(_shrink(ops.div(ops.mul(g, value), b), b.shape)),
            )
        # pow: d/da = b * a**(b-1), d/db = value * log(a)
        da = ops.mul(g, ops.mul(b, ops.pow_(a, ops.sub(b, 1.0))))
        db = ops.mul(g, ops.mul(value, ops.log(a)))
        return (_shrink(da, a.shape), _shrink(db, b.shape))


# ---------------------------------------------------------------------------
# reductions and contraction

class Reduce(Expr):
    kind = "reduce"

    def __init__(self, red: str, axes: Sequence[str], child: Expr):
        super().__init__()
        if red not in ops.REDUCE_KINDS:
            raise ValueError(f"unknown reduction {red!r}")
        self.red = red
        self.axes = tuple(axes)
        self.child = child

    def children(self):
        return (self.child,)

    def _key(self):
        return (self.red, self.axes)

    def _infer(self, child_shapes, ctx, env):
        return ops.reduce_shape(child_shapes[0], self.axes)

    def _eval(self, child_values, ctx, env):
        return ops.reduce(child_values[0], self.red, self.axes)

    def _grads(self, g, child_values, value, ctx):
        (x,) = child_values
        target = x.shape
        if not self.axes:
            if self.red == "var":
                return (NamedTensor.zeros(target),)
            if self.red == "norm":
                return (NamedTensor(target, g.array * np.sign(x.array)),)
            return (g,)
        ge = _expand(g, target).array
        pos = tuple(target.names.index(a) for a in self.axes)
        if self.red == "sum":
            out = ge
        elif self.red == "mean":
            out = ge / math.prod(target.size(a) for a in self.axes)
        elif self.red in ("max", "min"):
            out = ge * _first_extremum_mask(x.array, pos, self.red == "min")
        elif self.red == "var":
            n = math.prod(target.size(a) for a in self.axes)
            m = x.array.mean(axis=pos, keepdims=True)
            out = ge * 2.0 * (x.array - m) / n
        else:  # norm
            ye = _expand(value, target).array
            out = ge * np.divide(
                x.array, ye, out=np.zeros_like(x.array), where=ye != 0.0
            )
        return (NamedTensor(target, out),)


def _first_extremum_mask(arr: np.ndarray, pos: tuple, minimize: bool) -> np.ndarray:
    """One-hot mask selecting the first extremum of each fiber.

    "First" means lowest in record-enumeration order over the reduced axes.
    """
    nd = arr.ndim
    keep = [i for i in range(nd) if i not in pos]
    perm = keep + list(pos)
    moved = arr.transpose(perm)
    lead = moved.shape[: len(keep)]
    flat = moved.reshape(lead + (-1,))
    idx = flat.argmin(axis=-1) if minimize else flat.argmax(axis=-1)
    onehot = np.zeros_like(flat)
    np.put_along_axis(onehot, idx[..., None], 1.0, axis=-1)
    return onehot.reshape(moved.shape).transpose(np.argsort(perm))


class Contract(Expr):
    kind = "contract"

    def __init__(self, axes: Sequence[str], a: Expr, b: Expr):
        super().__init__()
        self.axes = tuple(axes)
        self.a = a
        self.b = b

    def children(self):
        return (self.a, self.b)

    def _key(self):
        return (self.axes,)

    def _infer(self, child_shapes, ctx, env):
        return ops.contract_shape(child_shapes[0], child_shapes[1], self.axes)

    def _eval(self, child_values, ctx, env):
        return ops.contract(child_values[0], child_values[1], self.axes)

    def _grads(self, g, child_values, value, ctx):
        a, b = child_values
        return (
            _fit(ops.mul(g, b), a.shape),
            _fit(ops.mul(g, a), b.shape),
        )


class Softmax(Expr):
    kind = "softmax"

    def __init__(self, axes: Sequence[str], child: Expr):
        super().__init__()
        self.axes = tuple(axes)
        self.child = child

    def children(self):
        return (self.child,)

    def _key(self):
        return (self.axes,)

    def _infer(self, child_shapes, ctx, env):
        return ops.softmax_shape(child_shapes[0], self.axes)

    def _eval(self, child_values, ctx, env):
        return ops.softmax(child_values[0], self.axes)

    def _grads(self, g, child_values, value, ctx):
        y = value
        inner = ops.reduce(ops.mul(g, y), "sum", self.axes)
        return (ops.mul(y, ops.sub(g, _expand(inner, y.shape))),)


class ArgExtremum(Expr):
    kind = "argextremum"

    def __init__(self, which: str, axes: Sequence[str], child: Expr):
        super().__init__()
        if which not in ("argmax", "argmin"):
            raise ValueError(which)
        self.which = which
        self.axes = tuple(axes)
        self.child = child

    def children(self):
        return (self.child,)

    def _key(self):
        return (self.which, self.axes)

    def _infer(self, child_shapes, ctx, env):
        return ops.softmax_shape(child_shapes[0], self.axes)

    def _eval(self, child_values, ctx, env):
        fn = ops.argmax if self.which == "argmax" else ops.argmin
        return fn(child_values[0], self.axes)

    def _grads(self, g, child_values, value, ctx):
        return (None,)


class Standardize(Expr):
    kind = "standardize"

    def __init__(self, axes: Sequence[str], child: Expr, eps: float = 1e-5):
        super().__init__()
        self.axes = tuple(axes)
        self.eps = float(eps)
        self.child = child

    def children(self):
        return (self.child,)

    def _key(self):
        return (self.axes, self.eps)

    def _infer(self, child_shapes, ctx, env):
        return ops.standardize_shape(child_shapes[0], self.axes)

    def _eval(self, child_values, ctx, env):
        return ops.standardize(child_values[0], self.axes, self.eps)

    def _grads(self, g, child_values, value, ctx):
        (x,) = child_values
        pos = tuple(x.shape.names.index(a) for a in self.axes)
        n = math.prod(x.shape.size(a) for a in self.axes)
        xa, ga = x.array, g.array
        m = xa.mean(axis=pos, keepdims=True) if self.axes else xa
        v = xa.var(axis=pos, keepdims=True) if self.axes else np.zeros_like(xa)
        q = np.sqrt(v + self.eps)
        xc = xa - m
        t1 = ga / q
        t2 = ga.sum(axis=pos, keepdims=True) / (n * q)
        t3 = xc * (ga * xc).sum(axis=pos, keepdims=True) / (n * q ** 3)
        return (NamedTensor(x.shape, t1 - t2 - t3),)


# ---------------------------------------------------------------------------
# structural nodes

class Rename(Expr):
    kind = "rename"

    def __init__(self, old: str, new: str, child: Expr):
        super().__init__()
        self.old = old
        self.new = new
        self.child = child

    def children(self):
        return (self.child,)

    def _key(self):
        return (self.old, self.new)

    def _infer(self, child_shapes, ctx, env):
        return ops.rename_shape(child_shapes[0], self.old, self.new)

    def _eval(self, child_values, ctx, env):
        return ops.rename(child_values[0], self.old, self.new)

    def _grads(self, g, child_values, value, ctx):
        return (ops.rename(g, self.new, self.old),)


class Merge(Expr):
    kind = "merge"

    def __init__(self, parts: Sequence[str], merged_name: str, child: Expr):
        super().__init__()
        self.parts = tuple(parts)
        self.merged_name = merged_name
        self.child = child

    def children(self):
        return (self.child,)

    def _key(self):
        return (self.parts, self.merged_name)

    def _merged_axis(self, child_shape: Shape) -> Axis:
        size = math.prod(child_shape.size(p) for p in self.parts)
        return Axis(self.merged_name, size)

    def _infer(self, child_shapes, ctx, env):
        ops._check_axis_list(child_shapes[0], self.parts)
        return ops.merge_shape(
            child_shapes[0], self.parts, self._merged_axis(child_shapes[0])
        )

    def _eval(self, child_values, ctx, env):
        x = child_values[0]
        return ops.merge_axes(x, self.parts, self._merged_axis(x.shape))

    def _grads(self, g, child_values, value, ctx):
        (x,) = child_values
        names = g.shape.names
        pos = names.index(self.merged_name)
        dims = list(g.shape.sizes)
        dims[pos : pos + 1] = [x.shape.size(p) for p in self.parts]
        new_names = list(names)
        new_names[pos : pos + 1] = list(self.parts)
        return (NamedTensor.from_array(g.array.reshape(dims), new_names),)


class Split(Expr):
    kind = "split"

    def __init__(self, src: str, outer_name: str, inner_name: str, child: Expr,
                 inner_size: Optional[int] = None):
        super().__init__()
        self.src = src
        self.outer_name = outer_name
        self.inner_name = inner_name
        self.inner_size = inner_size
        self.child = child

    def children(self):
        return (self.child,)

    def _key(self):
        return (self.src, self.outer_name, self.inner_name, self.inner_size)

    def _axes(self, child_shape: Shape, ctx: Context):
        n = child_shape.size(self.src)
        inner = self.inner_size if self.inner_size is not None else ctx.size_of(self.inner_name)
        if inner < 1 or n % inner != 0:
            raise SizeMismatch(
                f"cannot split {self.src}[{n}] into blocks of {inner}", child_shape
            )
        return Axis(self.outer_name, n // inner), Axis(self.inner_name, inner)

    def _infer(self, child_shapes, ctx, env):
        outer, inner = self._axes(child_shapes[0], ctx)
        return ops.split_shape(child_shapes[0], self.src, outer, inner)

    def _eval(self, child_values, ctx, env):
        x = child_values[0]
        outer, inner = self._axes(x.shape, ctx)
        return ops.split_axis(x, self.src, outer, inner)

    def _grads(self, g, child_values, value, ctx):
        (x,) = child_values
        merged = Axis(self.src, x.shape.size(self.src))
        return (ops.merge_axes(g, [self.outer_name, self.inner_name], merged),)


class Unroll(Expr):
    kind = "unroll"

    def __init__(self, seq: str, kernel_name: str, child: Expr,
                 kernel_size: Optional[int] = None):
        super().__init__()
        self.seq = seq
        self.kernel_name = kernel_name
        self.kernel_size = kernel_size
        self.child = child

    def children(self):
        return (self.child,)

    def _key(self):
        return (self.seq, self.kernel_name, self.kernel_size)

    def _kernel(self, ctx: Context) -> Axis:
        size = self.kernel_size if self.kernel_size is not None else ctx.size_of(self.kernel_name)
        return Axis(self.kernel_name, size)

    def _infer(self, child_shapes, ctx, env):
        return ops.unroll_shape(child_shapes[0], self.seq, self._kernel(ctx))

    def _eval(self, child_values, ctx, env):
        return ops.unroll(child_values[0], self.seq, self._kernel(ctx))

    def _grads(self, g, child_values, value, ctx):
        (x,) = child_values
        out = np.zeros(x.shape.sizes)
        seq_pos = x.shape.names.index(self.seq)
        k_pos = g.shape.names.index(self.kernel_name)
        length = g.shape.size(self.seq)
        for j in range(self._kernel(ctx).size):
            gj = np.take(g.array, j, axis=k_pos)
            sl = [slice(None)] * out.ndim
            sl[seq_pos] = slice(j, j + length)
            out[tuple(sl)] += gj
        return (NamedTensor(x.shape, out),)


class IndexSelect(Expr):
    kind = "index_select"

    def __init__(self, ax: str, a: Expr, indices: Expr):
        super().__init__()
        self.ax = ax
        self.a = a
        self.indices = indices

    def children(self):
        return (self.a, self.indices)

    def _key(self):
        return (self.ax,)

    def _infer(self, child_shapes, ctx, env):
        return ops.index_select_shape(child_shapes[0], self.ax, child_shapes[1])

    def _eval(self, child_values, ctx, env):
        return ops.index_select(child_values[0], self.ax, child_values[1])

    def _grads(self, g, child_values, value, ctx):
        a, idx = child_values
        out_shape = value.shape
        n = a.shape.size(self.ax)
        sel = _aligned(idx, out_shape)[..., None] == np.arange(1.0, n + 1.0)
        contrib = g.array[..., None] * sel
        rest = a.shape.drop([self.ax])
        drop = tuple(
            i for i, name in enumerate(out_shape.names) if name not in rest
        )
        if drop:
            contrib = contrib.sum(axis=drop)
        arranged = np.moveaxis(contrib, -1, a.shape.names.index(self.ax))
        return (NamedTensor(a.shape, arranged), None)


class MaxK(Expr):
    kind = "maxk"

    def __init__(self, ax: str, k_name: str, child: Expr,
                 k_size: Optional[int] = None):
        super().__init__()
        self.ax = ax
        self.k_name = k_name
        self.k_size = k_size
        self.child = child

    def children(self):
        return (self.child,)

    def _key(self):
        return (self.ax, self.k_name, self.k_size)

    def _k(self, ctx: Context) -> Axis:
        size = self.k_size if self.k_size is not None else ctx.size_of(self.k_name)
        return Axis(self.k_name, size)

    def _infer(self, child_shapes, ctx, env):
        return ops.maxk_shape(child_shapes[0], self.ax, self._k(ctx))

    def _eval(self, child_values, ctx, env):
        return ops.maxk(child_values[0], self.ax, self._k(ctx))

    def _grads(self, g, child_values, value, ctx):
        (x,) = child_values
        k = self._k(ctx)
        pos = x.shape.names.index(self.ax)
        top = ops._top_order(x, self.ax, k)
        shuttle = [self.k_name if n == self.ax else n for n in x.shape.names]
        garr = g.to_array(shuttle)
        out = np.zeros(x.shape.sizes)
        np.put_along_axis(out, top, garr, axis=pos)
        return (NamedTensor(x.shape, out),)


class ArgMaxK(Expr):
    kind = "argmaxk"

    def __init__(self, ax: str, k_name: str, child: Expr,
                 k_size: Optional[int] = None):
        super().__init__()
        self.ax = ax
        self.k_name = k_name
        self.k_size = k_size
        self.child = child

    def children(self):
        return (self.child,)

    def _key(self):
        return (self.ax, self.k_name, self.k_size)

    def _k(self, ctx: Context) -> Axis:
        size = self.k_size if self.k_size is not None else ctx.size_of(self.k_name)
        return Axis(self.k_name, size)

    def _infer(self, child_shapes, ctx, env):
        return ops.argmaxk_shape(child_shapes[0], self.ax, self._k(ctx))

    def _eval(self, child_values, ctx, env):
        return ops.argmaxk(child_values[0], self.ax, self._k(ctx))

    def _grads(self, g, child_values, value, ctx):
        return (None,)


class Det(Expr):
    kind = "det"

    def __init__(self, rows: str, cols: str, child: Expr):
        super().__init__()
        self.rows = rows
        self.cols = cols
        self.child = child

    def children(self):
        return (self.child,)

    def _key(self):
        return (self.rows, self.cols)

    def _infer(self, child_shapes, ctx, env):
        return ops.det_shape(child_shapes[0], self.rows, self.cols)

    def _eval(self, child_values, ctx, env):
        return ops.det(child_values[0], self.rows, self.cols)

    def _grads(self, g, child_values, value, ctx):
        raise UnsupportedDerivative("differentiation through det is not supported")


class Inv(Expr):
    kind = "inv"

    def __init__(self, rows: str, cols: str, child: Expr):
        super().__init__()
        self.rows = rows
        self.cols = cols
        self.child = child

    def children(self):
        return (self.child,)

    def _key(self):
        return (self.rows, self.cols)

    def _infer(self, child_shapes, ctx, env):
        return ops.inv_shape(child_shapes[0], self.rows, self.cols)

    def _eval(self, child_values, ctx, env):
        return ops.inv(child_values[0], self.rows, self.cols)

    def _grads(self, g, child_values, value, ctx):
        raise UnsupportedDerivative("differentiation through inv is not supported")


class PartialIndex(Expr):
    kind = "partial_index"

    def __init__(self, bindings, child: Expr):
        super().__init__()
        items = bindings.items() if isinstance(bindings, Mapping) else bindings
        self.bindings = tuple(sorted((str(n), int(i)) for n, i in items))
        self.child = child

    def children(self):
        return (self.child,)

    def _key(self):
        return (self.bindings,)

    def _infer(self, child_shapes, ctx, env):
        return ops.partial_index_shape(child_shapes[0], dict(self.bindings))

    def _eval(self, child_values, ctx, env):
        ops.partial_index_shape(child_values[0].shape, dict(self.bindings))
        return child_values[0].partial_index(Record(self.bindings))

    def _grads(self, g, child_values, value, ctx):
        (x,) = child_values
        out = np.zeros(x.shape.sizes)
        indexer = []
        bound = dict(self.bindings)
        for ax in x.shape:
            indexer.append(bound[ax.name] - 1 if ax.name in bound else slice(None))
        out[tuple(indexer)] = g.array
        return (NamedTensor(x.shape, out),)


# ---------------------------------------------------------------------------
# builder functions

def var(name: str) -> Var:
    return Var(name)


def const(value) -> Const:
    return Const(as_tensor(value))


def literal(values, axis_names: Sequence[str]) -> Literal:
    return Literal(values, axis_names)


def random_literal(axis_names: Sequence[str]) -> RandomLiteral:
    return RandomLiteral(axis_names)


def size_of(axis_name: str) -> SizeOf:
    return SizeOf(axis_name)


def add(a, b) -> Expr:
    return Binary("add", wrap(a), wrap(b))


def sub(a, b) -> Expr:
    return Binary("sub", wrap(a), wrap(b))


def mul(a, b) -> Expr:
    return Binary("mul", wrap(a), wrap(b))


def div(a, b) -> Expr:
    return Binary("div", wrap(a), wrap(b))


def pow_(a, b) -> Expr:
    return Binary("pow", wrap(a), wrap(b))


def neg(a) -> Expr:
    return Unary("neg", wrap(a))


def relu(a) -> Expr:
    return Unary("relu", wrap(a))


def sigmoid(a) -> Expr:
    return Unary("sigma", wrap(a))


def exp(a) -> Expr:
    return Unary("exp", wrap(a))


def log(a) -> Expr:
    return Unary("log", wrap(a))


def sqrt(a) -> Expr:
    return Unary("sqrt", wrap(a))


def reduce(a, kind: str, axes: Sequence[str]) -> Expr:
    return Reduce(kind, axes, wrap(a))


def sum_(a, axes) -> Expr:
    return reduce(a, "sum", axes)


def mean_(a, axes) -> Expr:
    return reduce(a, "mean", axes)


def max_(a, axes) -> Expr:
    return reduce(a, "max", axes)


def min_(a, axes) -> Expr:
    return reduce(a, "min", axes)


def var_(a, axes) -> Expr:
    return reduce(a, "var", axes)


def norm_(a, axes) -> Expr:
    return reduce(a, "norm", axes)


def contract(a, b, axes: Sequence[str]) -> Expr:
    return Contract(axes, wrap(a), wrap(b))


def softmax(a, axes: Sequence[str]) -> Expr:
    return Softmax(axes, wrap(a))


def argmax(a, axes: Sequence[str]) -> Expr:
    return ArgExtremum("argmax", axes, wrap(a))


def argmin(a, axes: Sequence[str]) -> Expr:
    return ArgExtremum("argmin", axes, wrap(a))


def standardize(a, axes: Sequence[str], eps: float = 1e-5) -> Expr:
    return Standardize(axes, wrap(a), eps)


def rename(a, old: str, new: str) -> Expr:
    return Rename(old, new, wrap(a))


def merge(a, parts: Sequence[str], merged_name: str) -> Expr:
    return Merge(parts, merged_name, wrap(a))


def split(a, src: str, outer_name: str, inner_name: str,
          inner_size: Optional[int] = None) -> Expr:
    return Split(src, outer_name, inner_name, wrap(a), inner_size)


def unroll(a, seq: str, kernel_name: str, kernel_size: Optional[int] = None) -> Expr:
    return Unroll(seq, kernel_name, wrap(a), kernel_size)


def index_select(a, ax: str, indices) -> Expr:
    return IndexSelect(ax, wrap(a), wrap(indices))


def maxk(a, ax: str, k_name: str, k_size: Optional[int] = None) -> Expr:
    return MaxK(ax, k_name, wrap(a), k_size)


def argmaxk(a, ax: str, k_name: str, k_size: Optional[int] = None) -> Expr:
    return ArgMaxK(ax, k_name, wrap(a), k_size)


def det(a, rows: str, cols: str) -> Expr:
    return Det(rows, cols, wrap(a))


def inv(a, rows: str, cols: str) -> Expr:
    return Inv(rows, cols, wrap(a))


def partial_index(a, bindings) -> Expr:
    return PartialIndex(bindings, wrap(a))


# ---------------------------------------------------------------------------
# graph walkers

def _topo(root: Expr) -> list:
    """Post-order over the DAG: every node appears after all its children."""
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for child in node.children():
            stack.append((child, False))
    return order


def _normalize_env(env) -> dict:
    return dict(env) if env else {}


def infer_shape(e: Expr, env=None, *, axis_sizes=None, require_declared=False) -> Shape:
    """The shape ``e`` evaluates to, given variable shapes (or tensors)."""
    ctx = Context(axis_sizes, require_declared=require_declared)
    env = _normalize_env(env)
    shapes: Dict[int, Shape] = {}
    for node in _topo(e):
        try:
            child_shapes = [shapes[id(c)] for c in node.children()]
            shapes[id(node)] = node._infer(child_shapes, ctx, env)
        except ExprError:
            raise
        except NamedTensorError as err:
            raise ExprError(node, err) from err
    return shapes[id(e)]


def _forward(e: Expr, env, ctx: Context):
    order = _topo(e)
    vals: Dict[int, NamedTensor] = {}
    for node in order:
        try:
            child_values = [vals[id(c)] for c in node.children()]
            vals[id(node)] = node._eval(child_values, ctx, env)
        except ExprError:
            raise
        except NamedTensorError as err:
            raise ExprError(node, err) from err
    return order, vals


def evaluate(e: Expr, env=None, *, axis_sizes=None, rng=None) -> NamedTensor:
    """Evaluate the expression under the given variable bindings."""
    ctx = Context(axis_sizes, rng)
    _, vals = _forward(e, _normalize_env(env), ctx)
    return vals[id(e)]


def _backward(order, vals, root: Expr, cotangent: NamedTensor, wrt: str,
              var_shape: Shape, ctx: Context) -> NamedTensor:
    cots: Dict[int, NamedTensor] = {id(root): cotangent}
    total: Optional[NamedTensor] = None
    for node in reversed(order):
        g = cots.get(id(node))
        if g is None:
            continue
        if isinstance(node, Var):
            if node.name == wrt:
                total = g if total is None else ops.add(total, g)
            continue
        try:
            grads = node._grads(
                g, [vals[id(c)] for c in node.children()], vals[id(node)], ctx
            )
        except NamedTensorError as err:
            raise ExprError(node, err) from err
        for child, cg in zip(node.children(), grads):
            if cg is None:
                continue
            prev = cots.get(id(child))
            cots[id(child)] = cg if prev is None else ops.add(prev, cg)
    return total if total is not None else NamedTensor.zeros(var_shape)


def vjp(e: Expr, wrt: str, env, cotangent, *, axis_sizes=None, rng=None) -> NamedTensor:
    """Contract a cotangent against the derivative of ``e`` w.r.t. ``wrt``.

    The cotangent must have exactly ``e``'s shape; the result has the
    variable's shape.  For a scalar ``e`` and cotangent 1 this is the
    gradient.
    """
    env = _normalize_env(env)
    if wrt not in env:
        raise UnboundVariable(f"variable {wrt!r} is not bound")
    ctx = Context(axis_sizes, rng)
    order, vals = _forward(e, env, ctx)
    cotangent = as_tensor(cotangent)
    if cotangent.shape != vals[id(e)].shape:
        raise ShapeMismatch(
            f"cotangent shape {cotangent.shape} does not match "
            f"expression shape {vals[id(e)].shape}",
            cotangent.shape,
            vals[id(e)].shape,
        )
    return _backward(order, vals, e, cotangent, wrt, as_tensor(env[wrt]).shape, ctx)


@dataclass
class Derivative:
    """A dense derivative tensor plus the output-axis renaming it used.

    ``value`` has shape ``S ∪ T'`` where ``S`` is the variable's shape and
    ``T'`` is the output shape with colliding names primed; ``rename_map``
    records exactly the renamings applied (empty when shapes are already
    orthogonal).  Entry ``(s, t')`` is the partial derivative of output
    record ``t`` with respect to input record ``s``.
    """

    value: NamedTensor
    rename_map: dict


def jacobian(e: Expr, wrt: str, env, *, axis_sizes=None, rng=None) -> Derivative:
    """The dense derivative of ``e`` with respect to variable ``wrt``."""
    env = _normalize_env(env)
    if wrt not in env:
        raise UnboundVariable(f"variable {wrt!r} is not bound")
    var_shape = as_tensor(env[wrt]).shape
    ctx = Context(axis_sizes, rng)
    order, vals = _forward(e, env, ctx)
    out_shape = vals[id(e)].shape

    rename_map: Dict[str, str] = {}
    taken = set(out_shape.names) | set(var_shape.names)
    for name in out_shape.names:
        if name in var_shape:
            fresh = name + "'"
            while fresh in taken:
                fresh += "'"
            rename_map[name] = fresh
            taken.add(fresh)
    primed = Shape(
        Axis(rename_map.get(ax.name, ax.name), ax.size) for ax in out_shape
    )
    jac_shape = var_shape.union(primed)
    result = np.zeros(jac_shape.sizes)
    unprime = {v: k for k, v in rename_map.items()}
    onehot_base = np.zeros(out_shape.sizes)
    out_names = out_shape.names
    for t in out_shape.records():
        onehot = onehot_base.copy()
        onehot[tuple(t[n] - 1 for n in out_names)] = 1.0
        grad = _backward(
            order, vals, e, NamedTensor(out_shape, onehot), wrt, var_shape, ctx
        )
        indexer = tuple(
            slice(None) if name in var_shape else t[unprime.get(name, name)] - 1
            for name in jac_shape.names
        )
        result[indexer] = grad.array
    return Derivative(NamedTensor(jac_shape, result), rename_map)


@dataclass
class LiftReport:
    """Outcome of checking the broadcast-derivative identity."""

    passed: bool
    max_diagonal_error: float
    max_off_block_abs: float
    extension: Shape

    def __str__(self):
        status = "ok" if self.passed else "FAILED"
        return (
            f"lifted derivative over {self.extension}: {status} "
            f"(diag err {self.max_diagonal_error:.2e}, "
            f"off-block max {self.max_off_block_abs:.2e})"
        )


def lifted_derivative_check(
    build: Callable[[Expr], Expr],
    base_shape: Shape,
    extension: Shape,
    *,
    seed: int = 0,
    tolerance: float = 1e-8,
) -> LiftReport:
    """Verify that lifting a function multiplies its derivative by identities.

    ``build`` maps a variable expression to the function's body.  The
    function is evaluated on a random input carrying the extension axes; its
    full Jacobian must be block-diagonal across extension records, each
    diagonal block equal to the base Jacobian of the corresponding slice and
    every off-diagonal block exactly zero.
    """
    if not base_shape.orthogonal(extension):
        raise ShapeError(
            f"extension {extension} overlaps base shape {base_shape}",
            base_shape, extension,
        )
    rng = SplitMix64(seed)
    full_shape = base_shape.union(extension)
    data = np.asarray(rng.floats(full_shape.num_records)).reshape(full_shape.sizes)
    x_full = NamedTensor(full_shape, data)

    expr_full = build(Var("x"))
    full = jacobian(expr_full, "x", {"x": x_full})
    out_full = infer_shape(expr_full, {"x": x_full})
    base_out = out_full.drop(extension.names)

    max_diag = 0.0
    max_off = 0.0
    base_jacs = {}
    for u in extension.records():
        base_jacs[u] = jacobian(build(Var("x")), "x", {"x": x_full.partial_index(u)})

    for u in extension.records():
        bj = base_jacs[u]
        for uprime in extension.records():
            for s in base_shape.records():
                for t in base_out.records():
                    full_rec = {}
                    for n, i in s:
                        full_rec[n] = i
                    for n, i in u:
                        full_rec[n] = i
                    for n, i in t:
                        full_rec[full.rename_map.get(n, n)] = i
                    for n, i in uprime:
                        full_rec[full.rename_map.get(n, n)] = i
                    got = full.value.get(Record(full_rec))
                    if u == uprime:
                        base_rec = {}
                        for n, i in s:
                            base_rec[n] = i
                        for n, i in t:
                            base_rec[bj.rename_map.get(n, n)] = i
                        want = bj.value.get(Record(base_rec))
                        max_diag = max(max_diag, abs(got - want))
                    else:
                        max_off = max(max_off, abs(got))
    passed = max_diag <= tolerance and max_off == 0.0
    return LiftReport(passed, max_diag, max_off, extension)
