"""Composed reference models: an autoregressive transformer LM and LeNet."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .. import ops
from ..axes import Axis
from ..tensor import NamedTensor
from .blocks import attention, conv2d, maxpool2d

__all__ = [
    "TransformerLayerParams", "TransformerParams", "LeNetParams",
    "positional_encoding", "causal_mask", "transformer_lm", "lenet",
]


@dataclass
class TransformerLayerParams:
    wq: NamedTensor  # {heads, layer, key}
    wk: NamedTensor  # {heads, layer, key}
    wv: NamedTensor  # {heads, layer, val}
    wo: NamedTensor  # {heads, val, layer}
    ln1_gamma: NamedTensor  # {layer}
    ln1_beta: NamedTensor
    ln2_gamma: NamedTensor
    ln2_beta: NamedTensor
    ffn_w1: NamedTensor  # {hidden, layer}
    ffn_b1: NamedTensor  # {hidden}
    ffn_w2: NamedTensor  # {layer, hidden}
    ffn_b2: NamedTensor  # {layer}


@dataclass
class TransformerParams:
    embed: NamedTensor  # {vocab, layer}
    layers: List[TransformerLayerParams]


def positional_encoding(seq_len: int, layer_size: int) -> NamedTensor:
    """Sinusoidal positions over {seq, layer}, 1-based as everywhere else.

    Odd embedding positions carry sines, even ones cosines, with the usual
    10000-exponent frequency schedule.
    """
    enc = np.empty((seq_len, layer_size))
    for p in range(1, seq_len + 1):
        for i in range(1, layer_size + 1):
            if i % 2 == 1:
                enc[p - 1, i - 1] = math.sin((p - 1) / 10000 ** ((i - 1) / layer_size))
            else:
                enc[p - 1, i - 1] = math.cos((p - 1) / 10000 ** ((i - 2) / layer_size))
    return NamedTensor.from_array(enc, ["seq", "layer"])


def causal_mask(seq_len: int) -> NamedTensor:
    """Additive mask over {seq, seq'}: 0 where seq index <= seq' index, else -inf."""
    m = np.where(
        np.arange(1, seq_len + 1)[:, None] <= np.arange(1, seq_len + 1)[None, :],
        0.0,
        -np.inf,
    )
    return NamedTensor.from_array(m, ["seq", "seq'"])


def _layer_norm(x, gamma, beta, eps: float = 1e-5) -> NamedTensor:
    return ops.add(ops.mul(ops.standardize(x, ["layer"], eps), gamma), beta)


def _self_attention(x, p: TransformerLayerParams, mask) -> NamedTensor:
    query = ops.contract(p.wq, ops.rename(x, "seq", "seq'"), ["layer"])
    keys = ops.contract(p.wk, x, ["layer"])
    values = ops.contract(p.wv, x, ["layer"])
    attended = attention(query, keys, values, mask)
    return ops.contract(p.wo, ops.rename(attended, "seq'", "seq"), ["heads", "val"])


def _ffn(x, p: TransformerLayerParams) -> NamedTensor:
    h = ops.relu(ops.add(ops.contract(p.ffn_w1, x, ["layer"]), p.ffn_b1))
    return ops.relu(ops.add(ops.contract(p.ffn_w2, h, ["hidden"]), p.ffn_b2))


def transformer_lm(onehots, params: TransformerParams) -> NamedTensor:
    """Autoregressive transformer language model.

    ``onehots`` is a one-hot tensor over {seq, vocab} (extra axes such as
    batch broadcast through every stage).  Returns next-token distributions
    over {seq, vocab} that sum to one over vocab at each position.
    """
    layer_size = params.embed.shape.size("layer")
    seq_len = onehots.shape.size("seq")
    embedded = ops.mul(
        ops.contract(params.embed, onehots, ["vocab"]), math.sqrt(layer_size)
    )
    x = ops.add(embedded, positional_encoding(seq_len, layer_size))
    mask = causal_mask(seq_len)
    for p in params.layers:
        t = ops.add(_layer_norm(_self_attention(x, p, mask), p.ln1_gamma, p.ln1_beta), x)
        x = ops.add(_layer_norm(_ffn(t, p), p.ln2_gamma, p.ln2_beta), t)
    return ops.softmax(ops.contract(params.embed, x, ["layer"]), ["vocab"])


@dataclass
class LeNetParams:
    conv1_w: NamedTensor  # {chans', chans, kh, kw}
    conv1_b: NamedTensor  # {chans'}
    conv2_w: NamedTensor
    conv2_b: NamedTensor
    dense_w: NamedTensor  # {hidden, layer}
    dense_b: NamedTensor  # {hidden}
    out_w: NamedTensor  # {classes, hidden}
    out_b: NamedTensor  # {classes}
    pool: int = 2


def _conv_layer(x, weights, bias) -> NamedTensor:
    return ops.rename(conv2d(x, weights, bias), "chans'", "chans")


def lenet(x0, params: LeNetParams) -> NamedTensor:
    """Convolutional classifier over {batch, chans, height, width} inputs.

    The pooled feature map is flattened by merging (height, width, chans)
    into a single layer axis before the dense layers.
    """
    k = params.pool
    t1 = ops.relu(_conv_layer(x0, params.conv1_w, params.conv1_b))
    x1 = maxpool2d(t1, k, k)
    t2 = ops.relu(_conv_layer(x1, params.conv2_w, params.conv2_b))
    pooled = maxpool2d(t2, k, k)
    layer_size = params.dense_w.shape.size("layer")
    flat = ops.merge_axes(
        pooled, ["height", "width", "chans"], Axis("layer", layer_size)
    )
    hidden = ops.relu(ops.add(ops.contract(params.dense_w, flat, ["layer"]), params.dense_b))
    logits = ops.add(ops.contract(params.out_w, hidden, ["hidden"]), params.out_b)
    return ops.softmax(logits, ["classes"])
