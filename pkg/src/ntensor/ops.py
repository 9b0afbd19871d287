"""The common operation set on named tensors.

Every operation here is defined at a base shape and behaves as its lifted
extension: axes not consumed by the operation are carried through unchanged,
slice by slice.  Binary operations broadcast along absent names only; a
shared name must have the same size on both operands or the call fails.

Each operation has a companion ``*_shape`` rule that validates operand
shapes and returns the result shape without touching any values.  The rules
are the single source of truth for the static shape checker, so a program
that passes checking cannot fail at runtime for shape reasons.
"""

from __future__ import annotations

import math
from typing import Callable, Mapping, Sequence

import numpy as np

from .axes import Axis, Shape
from .errors import (
    AllMasked,
    ExtensionCollision,
    IndexOutOfRange,
    InvalidRecord,
    MissingAxis,
    NameCollision,
    ShapeError,
    SingularMatrix,
    SizeMismatch,
)
from .tensor import NamedTensor, as_tensor

__all__ = [
    "add", "sub", "mul", "div", "pow_", "neg",
    "map_elementwise", "relu", "sigmoid", "exp", "log", "sqrt",
    "reduce", "contract", "softmax", "argmax", "argmin",
    "rename", "rename_many", "merge_axes", "split_axis", "unroll",
    "index_select", "maxk", "argmaxk", "det", "inv", "standardize",
    "identity", "partial_index_shape",
    "binary_shape", "reduce_shape", "contract_shape", "softmax_shape",
    "rename_shape", "merge_shape", "split_shape", "unroll_shape",
    "index_select_shape", "maxk_shape", "argmaxk_shape",
    "det_shape", "inv_shape", "standardize_shape",
]

REDUCE_KINDS = ("sum", "min", "max", "mean", "var", "norm")

PIVOT_RTOL = 1e-12


# ---------------------------------------------------------------------------
# alignment helpers

def _aligned(t: NamedTensor, target: Shape) -> np.ndarray:
    """A read-only view of ``t`` broadcast to ``target``'s canonical layout.

    Requires ``t.shape ⊆ target`` (same sizes on shared names); because both
    name tuples are sorted, ``t``'s names form a subsequence of the target's.
    """
    arr = t.array
    tnames = t.shape.names
    dims = []
    i = 0
    for name in target.names:
        if i < len(tnames) and tnames[i] == name:
            dims.append(arr.shape[i])
            i += 1
        else:
            dims.append(1)
    return np.broadcast_to(arr.reshape(dims), target.sizes)


def _axis_positions(shape: Shape, axes: Sequence[str]) -> tuple:
    names = shape.names
    return tuple(names.index(a) for a in axes)


def _check_axis_list(shape: Shape, axes: Sequence[str]) -> tuple:
    axes = tuple(axes)
    if len(set(axes)) != len(axes):
        raise ShapeError(f"axis list {list(axes)} contains duplicates")
    for a in axes:
        if a not in shape:
            raise MissingAxis(f"axis {a!r} not in shape {shape}", shape)
    return axes


# ---------------------------------------------------------------------------
# elementwise operations

def binary_shape(sa: Shape, sb: Shape) -> Shape:
    return sa.union(sb)


def _binary(op: Callable, a, b) -> NamedTensor:
    a, b = as_tensor(a), as_tensor(b)
    out = binary_shape(a.shape, b.shape)
    with np.errstate(all="ignore"):
        return NamedTensor(out, op(_aligned(a, out), _aligned(b, out)))


def add(a, b) -> NamedTensor:
    return _binary(np.add, a, b)


def sub(a, b) -> NamedTensor:
    return _binary(np.subtract, a, b)


def mul(a, b) -> NamedTensor:
    """Elementwise product with broadcast: contraction over zero axes."""
    return _binary(np.multiply, a, b)


def div(a, b) -> NamedTensor:
    return _binary(np.true_divide, a, b)


def pow_(a, b) -> NamedTensor:
    return _binary(np.power, a, b)


def neg(a) -> NamedTensor:
    a = as_tensor(a)
    return NamedTensor(a.shape, -a.array)


def map_elementwise(f: Callable[[float], float], a) -> NamedTensor:
    """Apply an arbitrary scalar function to every entry."""
    a = as_tensor(a)
    out = np.vectorize(f, otypes=[np.float64])(a.array) if a.array.size else a.array
    return NamedTensor(a.shape, np.asarray(out, dtype=np.float64).reshape(a.shape.sizes))


def relu(a) -> NamedTensor:
    a = as_tensor(a)
    return NamedTensor(a.shape, np.maximum(a.array, 0.0))


def sigmoid(a) -> NamedTensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        return NamedTensor(a.shape, 1.0 / (1.0 + np.exp(-a.array)))


def exp(a) -> NamedTensor:
    a = as_tensor(a)
    return NamedTensor(a.shape, np.exp(a.array))


def log(a) -> NamedTensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        return NamedTensor(a.shape, np.log(a.array))


def sqrt(a) -> NamedTensor:
    a = as_tensor(a)
    with np.errstate(invalid="ignore"):
        return NamedTensor(a.shape, np.sqrt(a.array))


# ---------------------------------------------------------------------------
# reductions

def reduce_shape(s: Shape, axes: Sequence[str]) -> Shape:
    axes = _check_axis_list(s, axes)
    return s.drop(axes)


def reduce(a, kind: str, axes: Sequence[str]) -> NamedTensor:
    """Joint reduction over the given axes: sum, min, max, mean, var, or norm.

    ``var`` is the population variance (1/n); ``norm`` is the 2-norm.
    Reducing over an empty axis list treats each entry as its own fiber.
    """
    a = as_tensor(a)
    if kind not in REDUCE_KINDS:
        raise ValueError(f"unknown reduction {kind!r}")
    out_shape = reduce_shape(a.shape, axes)
    if not axes:
        if kind == "var":
            return NamedTensor(a.shape, np.zeros(a.shape.sizes))
        if kind == "norm":
            return NamedTensor(a.shape, np.abs(a.array))
        return a
    pos = _axis_positions(a.shape, axes)
    arr = a.array
    if kind == "sum":
        out = arr.sum(axis=pos)
    elif kind == "min":
        out = arr.min(axis=pos)
    elif kind == "max":
        out = arr.max(axis=pos)
    elif kind == "mean":
        out = arr.mean(axis=pos)
    elif kind == "var":
        out = arr.var(axis=pos)
    else:  # norm
        out = np.sqrt((arr * arr).sum(axis=pos))
    return NamedTensor(out_shape, out)


# ---------------------------------------------------------------------------
# contraction

def contract_shape(sa: Shape, sb: Shape, axes: Sequence[str]) -> Shape:
    union = sa.union(sb)
    axes = _check_axis_list(union, axes)
    return union.drop(axes)


def contract(a, b, axes: Sequence[str]) -> NamedTensor:
    """Elementwise product, then summation over the named axes.

    With an empty axis list this is the plain (broadcasting) elementwise
    product.  An axis present in only one operand is simply summed out of
    the product.
    """
    a, b = as_tensor(a), as_tensor(b)
    out_shape = contract_shape(a.shape, b.shape, axes)
    union = a.shape.union(b.shape)
    prod = _aligned(a, union) * _aligned(b, union)
    if axes:
        prod = prod.sum(axis=_axis_positions(union, axes))
    return NamedTensor(out_shape, prod)


# ---------------------------------------------------------------------------
# vectors to vectors

def softmax_shape(s: Shape, axes: Sequence[str]) -> Shape:
    _check_axis_list(s, axes)
    return s


def softmax(a, axes: Sequence[str]) -> NamedTensor:
    """Softmax over the joint record space of the given axes.

    Entries of ``-inf`` contribute zero mass (mask semantics); a fiber that
    is entirely ``-inf`` raises :class:`AllMasked`.  Computation subtracts
    the fiber maximum for stability.
    """
    a = as_tensor(a)
    out_shape = softmax_shape(a.shape, axes)
    if not axes:
        return NamedTensor(a.shape, np.ones(a.shape.sizes))
    pos = _axis_positions(a.shape, axes)
    arr = a.array
    m = arr.max(axis=pos, keepdims=True)
    if np.any(np.isneginf(m)):
        raise AllMasked(f"softmax over {list(axes)}: a fiber is entirely -inf")
    e = np.exp(arr - m)
    return NamedTensor(out_shape, e / e.sum(axis=pos, keepdims=True))


def _extremum_mass(a, axes, minimize: bool) -> NamedTensor:
    a = as_tensor(a)
    out_shape = softmax_shape(a.shape, axes)
    if not axes:
        return NamedTensor(a.shape, np.ones(a.shape.sizes))
    pos = _axis_positions(a.shape, axes)
    arr = a.array
    m = arr.min(axis=pos, keepdims=True) if minimize else arr.max(axis=pos, keepdims=True)
    mask = (arr == m).astype(np.float64)
    return NamedTensor(out_shape, mask / mask.sum(axis=pos, keepdims=True))


def argmax(a, axes: Sequence[str]) -> NamedTensor:
    """Uniform mass over the tied maxima of each fiber, zero elsewhere."""
    return _extremum_mass(a, axes, minimize=False)


def argmin(a, axes: Sequence[str]) -> NamedTensor:
    """Uniform mass over the tied minima of each fiber, zero elsewhere."""
    return _extremum_mass(a, axes, minimize=True)


# ---------------------------------------------------------------------------
# renaming and reshaping

def rename_shape(s: Shape, old: str, new: str) -> Shape:
    if old not in s:
        raise MissingAxis(f"axis {old!r} not in shape {s}", s)
    if new != old and new in s:
        raise NameCollision(f"axis {new!r} already in shape {s}", s)
    return Shape(Axis(new if ax.name == old else ax.name, ax.size) for ax in s)


def rename(a, old: str, new: str) -> NamedTensor:
    """Relabel one axis; values are untouched."""
    a = as_tensor(a)
    rename_shape(a.shape, old, new)
    names = [new if n == old else n for n in a.shape.names]
    return NamedTensor.from_array(a.array, names)


def rename_many(a, mapping: Mapping[str, str]) -> NamedTensor:
    """Relabel several axes at once; new names must be fresh as a set."""
    a = as_tensor(a)
    names = list(a.shape.names)
    new_names = [mapping.get(n, n) for n in names]
    if len(set(new_names)) != len(new_names):
        raise NameCollision(f"renaming {dict(mapping)} collides on {a.shape}", a.shape)
    for old in mapping:
        if old not in a.shape:
            raise MissingAxis(f"axis {old!r} not in shape {a.shape}", a.shape)
    return NamedTensor.from_array(a.array, new_names)


def merge_shape(s: Shape, parts: Sequence[str], merged: Axis) -> Shape:
    parts = tuple(parts)
    if not parts:
        raise ShapeError("merge needs at least one source axis")
    _check_axis_list(s, parts)
    expected = math.prod(s.size(p) for p in parts)
    if merged.size != expected:
        raise SizeMismatch(
            f"merged axis {merged!r} must have size {expected}", s
        )
    rest = s.drop(parts)
    if merged.name in rest:
        raise NameCollision(f"axis {merged.name!r} already in shape {s}", s)
    return rest.union(Shape([merged]))


def merge_axes(a, parts: Sequence[str], merged: Axis) -> NamedTensor:
    """Reshape several axes into one.

    The new axis enumerates the parts in the order listed, last part
    fastest, so ``merge_axes(split_axis(a, src, outer, inner), [outer,
    inner], src_axis)`` is the identity.
    """
    a = as_tensor(a)
    merge_shape(a.shape, parts, merged)
    names = a.shape.names
    kept = [n for n in names if n not in parts]
    perm = [names.index(n) for n in kept] + [names.index(p) for p in parts]
    arr = a.array.transpose(perm)
    arr = arr.reshape([a.shape.size(n) for n in kept] + [merged.size])
    return NamedTensor.from_array(arr, kept + [merged.name])


def split_shape(s: Shape, src: str, outer: Axis, inner: Axis) -> Shape:
    if src not in s:
        raise MissingAxis(f"axis {src!r} not in shape {s}", s)
    if outer.size * inner.size != s.size(src):
        raise SizeMismatch(
            f"cannot split {src}[{s.size(src)}] into {outer!r} x {inner!r}", s
        )
    rest = s.drop([src])
    if outer.name in rest:
        raise NameCollision(f"axis {outer.name!r} already in shape {s}", s)
    if inner.name in rest or inner.name == outer.name or inner.name == src:
        raise NameCollision(f"axis {inner.name!r} already in shape {s}", s)
    return rest.union(Shape([outer, inner]))


def split_axis(a, src: str, outer: Axis, inner: Axis) -> NamedTensor:
    """Reshape one axis into (outer, inner): source index (i-1)*|inner| + j.

    ``outer`` may reuse the source name, which makes this exactly the
    pooling reshape.
    """
    a = as_tensor(a)
    split_shape(a.shape, src, outer, inner)
    names = a.shape.names
    pos = names.index(src)
    dims = list(a.shape.sizes)
    dims[pos : pos + 1] = [outer.size, inner.size]
    new_names = list(names)
    new_names[pos : pos + 1] = [outer.name, inner.name]
    return NamedTensor.from_array(a.array.reshape(dims), new_names)


def unroll_shape(s: Shape, seq: str, kernel: Axis) -> Shape:
    if seq not in s:
        raise MissingAxis(f"axis {seq!r} not in shape {s}", s)
    if kernel.name in s:
        raise NameCollision(f"axis {kernel.name!r} already in shape {s}", s)
    n = s.size(seq)
    if kernel.size > n:
        raise SizeMismatch(f"kernel {kernel!r} longer than {seq}[{n}]", s)
    out = s.drop([seq])
    return out.union(Shape([Axis(seq, n - kernel.size + 1), kernel]))


def unroll(a, seq: str, kernel: Axis) -> NamedTensor:
    """Sliding windows: result[seq(i), kernel(j)] = a[seq(i + j - 1)]."""
    a = as_tensor(a)
    unroll_shape(a.shape, seq, kernel)
    pos = a.shape.names.index(seq)
    windows = np.lib.stride_tricks.sliding_window_view(
        a.array, kernel.size, axis=pos
    )
    return NamedTensor.from_array(windows, list(a.shape.names) + [kernel.name])


# ---------------------------------------------------------------------------
# advanced indexing

def index_select_shape(sa: Shape, ax: str, si: Shape) -> Shape:
    if ax not in sa:
        raise MissingAxis(f"axis {ax!r} not in shape {sa}", sa)
    if ax in si:
        raise ExtensionCollision(
            f"index tensor may not itself carry the selected axis {ax!r}", si
        )
    rest = sa.drop([ax])
    return rest.union(si)


def index_select(a, ax: str, indices) -> NamedTensor:
    """Gather along ``ax`` at 1-based positions given by an integer tensor.

    Axes shared between the operand and the index tensor align; extra axes
    of the index tensor broadcast.  A scalar index reproduces partial
    indexing; an index tensor sharing no axes with the operand reproduces
    integer-array indexing; sharing axes reproduces gather.
    """
    a, idx = as_tensor(a), as_tensor(indices)
    out_shape = index_select_shape(a.shape, ax, idx.shape)
    n = a.shape.size(ax)
    ivals = idx.array
    if np.any(ivals != np.floor(ivals)) or np.any(ivals < 1) or np.any(ivals > n):
        raise IndexOutOfRange(f"indices for {ax}[{n}] must be integers in 1..{n}")
    rest_names = [m for m in a.shape.names if m != ax]
    arr = np.moveaxis(a.array, a.shape.names.index(ax), -1)
    dims = []
    i = 0
    for name in out_shape.names:
        if i < len(rest_names) and rest_names[i] == name:
            dims.append(arr.shape[i])
            i += 1
        else:
            dims.append(1)
    arr = np.broadcast_to(arr.reshape(dims + [n]), out_shape.sizes + (n,))
    pos = (_aligned(idx, out_shape) - 1).astype(np.intp)[..., None]
    out = np.take_along_axis(arr, pos, axis=-1)[..., 0]
    return NamedTensor(out_shape, out)


# ---------------------------------------------------------------------------
# top-k

def maxk_shape(s: Shape, ax: str, k: Axis) -> Shape:
    if ax not in s:
        raise MissingAxis(f"axis {ax!r} not in shape {s}", s)
    if k.name in s:
        raise NameCollision(f"axis {k.name!r} already in shape {s}", s)
    if k.size > s.size(ax):
        raise SizeMismatch(f"cannot take top {k.size} of {ax}[{s.size(ax)}]", s)
    return s.drop([ax]).union(Shape([k]))


def argmaxk_shape(s: Shape, ax: str, k: Axis) -> Shape:
    maxk_shape(s, ax, k)
    return s.union(Shape([k]))


def _top_order(a: NamedTensor, ax: str, k: Axis) -> np.ndarray:
    """Positions of the k largest entries along ``ax``, ties by ascending index."""
    pos = a.shape.names.index(ax)
    order = np.argsort(-a.array, axis=pos, kind="stable")
    sl = [slice(None)] * a.array.ndim
    sl[pos] = slice(0, k.size)
    return order[tuple(sl)]


def maxk(a, ax: str, k: Axis) -> NamedTensor:
    """The k largest values along ``ax`` in descending order (duplicates kept)."""
    a = as_tensor(a)
    maxk_shape(a.shape, ax, k)
    pos = a.shape.names.index(ax)
    top = _top_order(a, ax, k)
    vals = np.take_along_axis(a.array, top, axis=pos)
    names = list(a.shape.names)
    names[pos] = k.name
    return NamedTensor.from_array(vals, names)


def argmaxk(a, ax: str, k: Axis) -> NamedTensor:
    """One-hot selectors over ``ax`` for each of the k largest entries.

    Each position is selected at most once, so ``contract(a, argmaxk(a),
    [ax])`` equals ``maxk(a)``.
    """
    a = as_tensor(a)
    argmaxk_shape(a.shape, ax, k)
    pos = a.shape.names.index(ax)
    top = _top_order(a, ax, k)
    onehot = np.zeros(a.array.shape + (k.size,))
    moved = np.moveaxis(onehot, pos, -2)
    ti = np.moveaxis(top, pos, -1)
    np.put_along_axis(moved, ti[..., None, :], 1.0, axis=-2)
    return NamedTensor.from_array(onehot, list(a.shape.names) + [k.name])


# ---------------------------------------------------------------------------
# determinant and inverse

def _matrix_shape(s: Shape, rows: str, cols: str) -> None:
    if rows == cols:
        raise ShapeError(f"matrix axes must be distinct, got {rows!r} twice")
    for name in (rows, cols):
        if name not in s:
            raise MissingAxis(f"axis {name!r} not in shape {s}", s)
    if s.size(rows) != s.size(cols):
        raise SizeMismatch(
            f"matrix axes {rows}[{s.size(rows)}] and {cols}[{s.size(cols)}] differ", s
        )


def det_shape(s: Shape, rows: str, cols: str) -> Shape:
    _matrix_shape(s, rows, cols)
    return s.drop([rows, cols])


def inv_shape(s: Shape, rows: str, cols: str) -> Shape:
    _matrix_shape(s, rows, cols)
    return s


def _gauss(mat: np.ndarray, need_inv: bool):
    """Partial-pivot elimination; returns (det, inverse or None).

    A pivot below ``PIVOT_RTOL`` relative to the largest entry of the
    matrix raises :class:`SingularMatrix`.
    """
    n = mat.shape[0]
    a = mat.copy()
    scale = float(np.max(np.abs(a))) if n else 0.0
    if scale == 0.0:
        raise SingularMatrix("zero matrix")
    inv_acc = np.eye(n) if need_inv else None
    det_acc = 1.0
    for c in range(n):
        p = c + int(np.argmax(np.abs(a[c:, c])))
        if abs(a[p, c]) < PIVOT_RTOL * scale:
            raise SingularMatrix(
                f"pivot {a[p, c]:.3g} below {PIVOT_RTOL:g} of matrix scale {scale:.3g}"
            )
        if p != c:
            a[[c, p]] = a[[p, c]]
            det_acc = -det_acc
            if need_inv:
                inv_acc[[c, p]] = inv_acc[[p, c]]
        det_acc *= a[c, c]
        if need_inv:
            f = a[c, c]
            a[c] /= f
            inv_acc[c] /= f
            for r in range(n):
                if r != c and a[r, c] != 0.0:
                    g = a[r, c]
                    a[r] -= g * a[c]
                    inv_acc[r] -= g * inv_acc[c]
        else:
            for r in range(c + 1, n):
                if a[r, c] != 0.0:
                    a[r] -= (a[r, c] / a[c, c]) * a[c]
    return det_acc, inv_acc


def _matrices(a: NamedTensor, rows: str, cols: str):
    """Iterate the (rows, cols)-oriented matrices of ``a``, plus layout info."""
    names = list(a.shape.names)
    rpos, cpos = names.index(rows), names.index(cols)
    arr = np.moveaxis(a.array, (rpos, cpos), (-2, -1))
    batch_names = [n for n in names if n not in (rows, cols)]
    n = a.shape.size(rows)
    return arr.reshape(-1, n, n), batch_names, [a.shape.size(b) for b in batch_names], n


def det(a, rows: str, cols: str) -> NamedTensor:
    """Determinant of the matrix over (rows, cols), lifted over other axes."""
    a = as_tensor(a)
    out_shape = det_shape(a.shape, rows, cols)
    mats, _, batch_sizes, _ = _matrices(a, rows, cols)
    dets = np.array([_gauss(m, False)[0] for m in mats])
    return NamedTensor(out_shape, dets.reshape(batch_sizes))


def inv(a, rows: str, cols: str) -> NamedTensor:
    """Matrix inverse over (rows, cols), lifted over other axes.

    The result is oriented so that contracting it with ``a`` over either
    shared axis (after renaming the other on one side) yields the identity
    matrix; for symmetric input it is the plain inverse.
    """
    a = as_tensor(a)
    inv_shape(a.shape, rows, cols)
    mats, batch_names, batch_sizes, n = _matrices(a, rows, cols)
    out = np.empty_like(mats)
    for i, m in enumerate(mats):
        out[i] = _gauss(m, True)[1].T
    return NamedTensor.from_array(
        out.reshape(batch_sizes + [n, n]), batch_names + [rows, cols]
    )


# ---------------------------------------------------------------------------
# standardization

def standardize_shape(s: Shape, axes: Sequence[str]) -> Shape:
    _check_axis_list(s, axes)
    return s


def standardize(a, axes: Sequence[str], eps: float = 1e-5) -> NamedTensor:
    """(a - mean) / sqrt(var + eps) over the given axes, lifted over the rest."""
    a = as_tensor(a)
    standardize_shape(a.shape, axes)
    pos = _axis_positions(a.shape, axes)
    arr = a.array
    m = arr.mean(axis=pos, keepdims=True)
    v = arr.var(axis=pos, keepdims=True)
    return NamedTensor(a.shape, (arr - m) / np.sqrt(v + eps))


# ---------------------------------------------------------------------------
# misc

def identity(a: Axis, b: Axis) -> NamedTensor:
    """The identity matrix I over two same-sized axes: 1 where indices agree."""
    if a.size != b.size:
        raise SizeMismatch(f"identity axes {a!r} and {b!r} differ in size")
    if a.name == b.name:
        raise NameCollision(f"identity axes must have distinct names, got {a.name!r}")
    return NamedTensor.from_array(np.eye(a.size), [a.name, b.name])


def partial_index_shape(s: Shape, bindings: Mapping[str, int]) -> Shape:
    for name, idx in bindings.items():
        if name not in s:
            raise MissingAxis(f"axis {name!r} not in shape {s}", s)
        if not 1 <= idx <= s.size(name):
            raise InvalidRecord(f"index {name}({idx}) out of range for {s.axis(name)!r}")
    return s.drop(bindings.keys())
