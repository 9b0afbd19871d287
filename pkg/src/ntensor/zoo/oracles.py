"""Plain-loop reference implementations for every zoo model.

Everything here works on nested Python lists with explicit index loops and
``math`` scalars; nothing imports the named-tensor machinery.  These are the
independent second route the fixtures compare against.
"""

from __future__ import annotations

import math

__all__ = [
    "feedforward", "rnn_elman", "attention", "conv1d", "conv2d",
    "maxpool1d", "maxpool2d", "batchnorm", "instancenorm", "layernorm",
    "groupnorm", "transformer_lm", "lenet", "prob_ops", "cbow",
    "sudoku_check", "kmeans_step", "beam_step", "mvn_density",
]

EPS = 1e-5


def _sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def _softmax(row):
    m = max(row)
    if m == float("-inf"):
        raise ValueError("all entries masked")
    exps = [math.exp(v - m) if v != float("-inf") else 0.0 for v in row]
    z = sum(exps)
    return [e / z for e in exps]


def feedforward(x, layers):
    # layers: [(w, b)] with w[out][in], b[out]
    h = x
    for w, b in layers:
        h = [
            _sigmoid(sum(w[i][j] * h[j] for j in range(len(h))) + b[i])
            for i in range(len(b))
        ]
    return h


def rnn_elman(xs, w_hidden, w_input, bias, h0):
    # w_hidden[hidden][hidden'], w_input[inp][hidden'], bias[hidden']
    states = [list(h0)]
    h = list(h0)
    nh = len(bias)
    for x in xs:
        nxt = []
        for hp in range(nh):
            acc = bias[hp]
            acc += sum(w_hidden[i][hp] * h[i] for i in range(len(h)))
            acc += sum(w_input[i][hp] * x[i] for i in range(len(x)))
            nxt.append(_sigmoid(acc))
        h = nxt
        states.append(h)
    return states


def attention(q, k, v, mask=None):
    # q[key], k[seq][key], v[seq][val] -> out[val]
    nseq, nkey = len(k), len(k[0])
    scale = math.sqrt(nkey)
    scores = [
        sum(q[j] * k[s][j] for j in range(nkey)) / scale
        + (mask[s] if mask is not None else 0.0)
        for s in range(nseq)
    ]
    w = _softmax(scores)
    nval = len(v[0])
    return [sum(w[s] * v[s][t] for s in range(nseq)) for t in range(nval)]


def conv1d(x, w, b):
    # x[chans][seq], w[chans_out][chans][kernel], b[chans_out]
    cin, n = len(x), len(x[0])
    cout, k = len(w), len(w[0][0])
    out_n = n - k + 1
    return [
        [
            sum(
                w[co][c][j] * x[c][i + j]
                for c in range(cin)
                for j in range(k)
            )
            + b[co]
            for i in range(out_n)
        ]
        for co in range(cout)
    ]


def conv2d(x, w, b):
    # x[chans][h][w], w[chans_out][chans][kh][kw], b[chans_out]
    cin, h, wid = len(x), len(x[0]), len(x[0][0])
    cout, kh, kw = len(w), len(w[0][0]), len(w[0][0][0])
    oh, ow = h - kh + 1, wid - kw + 1
    out = []
    for co in range(cout):
        plane = []
        for i in range(oh):
            row = []
            for j in range(ow):
                acc = b[co]
                for c in range(cin):
                    for a in range(kh):
                        for bb in range(kw):
                            acc += w[co][c][a][bb] * x[c][i + a][j + bb]
                row.append(acc)
            plane.append(row)
        out.append(plane)
    return out


def maxpool1d(x, k):
    # x[chans][seq]
    return [
        [max(row[i * k : (i + 1) * k]) for i in range(len(row) // k)]
        for row in x
    ]


def maxpool2d(x, kh, kw):
    # x[chans][h][w]
    out = []
    for plane in x:
        h, w = len(plane), len(plane[0])
        out.append(
            [
                [
                    max(
                        plane[i * kh + a][j * kw + b]
                        for a in range(kh)
                        for b in range(kw)
                    )
                    for j in range(w // kw)
                ]
                for i in range(h // kh)
            ]
        )
    return out


def _standardize_group(values):
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    denom = math.sqrt(var + EPS)
    return [(v - mean) / denom for v in values], mean, var


def batchnorm(x, gamma, beta):
    # x[batch][chans][layer], gamma/beta[chans]
    nb, nc, nl = len(x), len(x[0]), len(x[0][0])
    out = [[[0.0] * nl for _ in range(nc)] for _ in range(nb)]
    for c in range(nc):
        flat = [x[b][c][l] for b in range(nb) for l in range(nl)]
        std, _, _ = _standardize_group(flat)
        pos = 0
        for b in range(nb):
            for l in range(nl):
                out[b][c][l] = std[pos] * gamma[c] + beta[c]
                pos += 1
    return out


def instancenorm(x, gamma, beta):
    nb, nc, nl = len(x), len(x[0]), len(x[0][0])
    out = [[[0.0] * nl for _ in range(nc)] for _ in range(nb)]
    for b in range(nb):
        for c in range(nc):
            std, _, _ = _standardize_group(x[b][c])
            for l in range(nl):
                out[b][c][l] = std[l] * gamma[c] + beta[c]
    return out


def layernorm(x, gamma, beta):
    # gamma/beta[chans][layer]
    nb, nc, nl = len(x), len(x[0]), len(x[0][0])
    out = [[[0.0] * nl for _ in range(nc)] for _ in range(nb)]
    for b in range(nb):
        flat = [x[b][c][l] for c in range(nc) for l in range(nl)]
        std, _, _ = _standardize_group(flat)
        pos = 0
        for c in range(nc):
            for l in range(nl):
                out[b][c][l] = std[pos] * gamma[c][l] + beta[c][l]
                pos += 1
    return out


def groupnorm(x, gamma, beta, k):
    nb, nc, nl = len(x), len(x[0]), len(x[0][0])
    out = [[[0.0] * nl for _ in range(nc)] for _ in range(nb)]
    for b in range(nb):
        for g in range(nc // k):
            members = list(range(g * k, (g + 1) * k))
            flat = [x[b][c][l] for c in members for l in range(nl)]
            std, _, _ = _standardize_group(flat)
            pos = 0
            for c in members:
                for l in range(nl):
                    out[b][c][l] = std[pos] * gamma[c] + beta[c]
                    pos += 1
    return out


def _layernorm_vec(vec, gamma, beta):
    std, _, _ = _standardize_group(vec)
    return [std[i] * gamma[i] + beta[i] for i in range(len(vec))]


def transformer_lm(onehots, embed, layers, hidden_size):
    """Loop transformer; layers are dicts of plain nested lists.

    onehots[seq][vocab]; embed[vocab][layer]; per layer: wq/wk/wv[heads]
    [layer][key], wo[heads][val][layer], ln1_gamma/.../ln2_beta[layer],
    w1[hidden][layer], b1[hidden], w2[layer][hidden], b2[layer].
    """
    nseq, nvocab = len(onehots), len(onehots[0])
    nlayer = len(embed[0])
    scale = math.sqrt(nlayer)
    x = [
        [
            sum(embed[v][l] * onehots[s][v] for v in range(nvocab)) * scale
            for l in range(nlayer)
        ]
        for s in range(nseq)
    ]
    for s in range(nseq):
        for l in range(nlayer):
            i = l + 1
            p = s + 1
            if i % 2 == 1:
                x[s][l] += math.sin((p - 1) / 10000 ** ((i - 1) / nlayer))
            else:
                x[s][l] += math.cos((p - 1) / 10000 ** ((i - 2) / nlayer))

    for p in layers:
        nheads = len(p["wq"])
        nkey = len(p["wq"][0][0])
        nval = len(p["wv"][0][0])
        # attention sublayer
        q = [
            [
                [
                    sum(p["wq"][h][l][e] * x[sp][l] for l in range(nlayer))
                    for e in range(nkey)
                ]
                for sp in range(nseq)
            ]
            for h in range(nheads)
        ]
        kk = [
            [
                [
                    sum(p["wk"][h][l][e] * x[s][l] for l in range(nlayer))
                    for e in range(nkey)
                ]
                for s in range(nseq)
            ]
            for h in range(nheads)
        ]
        vv = [
            [
                [
                    sum(p["wv"][h][l][e] * x[s][l] for l in range(nlayer))
                    for e in range(nval)
                ]
                for s in range(nseq)
            ]
            for h in range(nheads)
        ]
        att = [[None] * nseq for _ in range(nheads)]
        for h in range(nheads):
            for sp in range(nseq):
                mask = [0.0 if (s + 1) <= (sp + 1) else float("-inf") for s in range(nseq)]
                att[h][sp] = attention(q[h][sp], kk[h], vv[h], mask)
        y = [
            [
                sum(
                    p["wo"][h][e][l] * att[h][s][e]
                    for h in range(nheads)
                    for e in range(nval)
                )
                for l in range(nlayer)
            ]
            for s in range(nseq)
        ]
        t = [
            [
                _layernorm_vec(y[s], p["ln1_gamma"], p["ln1_beta"])[l] + x[s][l]
                for l in range(nlayer)
            ]
            for s in range(nseq)
        ]
        # feed-forward sublayer
        x_new = []
        for s in range(nseq):
            h1 = [
                max(0.0, sum(p["w1"][hh][l] * t[s][l] for l in range(nlayer)) + p["b1"][hh])
                for hh in range(hidden_size)
            ]
            h2 = [
                max(0.0, sum(p["w2"][l][hh] * h1[hh] for hh in range(hidden_size)) + p["b2"][l])
                for l in range(nlayer)
            ]
            ln = _layernorm_vec(h2, p["ln2_gamma"], p["ln2_beta"])
            x_new.append([ln[l] + t[s][l] for l in range(nlayer)])
        x = x_new

    out = []
    for s in range(nseq):
        logits = [
            sum(embed[v][l] * x[s][l] for l in range(nlayer)) for v in range(nvocab)
        ]
        out.append(_softmax(logits))
    return out


def lenet(x0, params):
    """Loop LeNet; x0[batch][chans][h][w], params dict of nested lists."""
    out = []
    for image in x0:
        t1 = conv2d(image, params["conv1_w"], params["conv1_b"])
        t1 = [[[max(0.0, v) for v in row] for row in plane] for plane in t1]
        x1 = maxpool2d(t1, params["pool"], params["pool"])
        t2 = conv2d(x1, params["conv2_w"], params["conv2_b"])
        t2 = [[[max(0.0, v) for v in row] for row in plane] for plane in t2]
        x2 = maxpool2d(t2, params["pool"], params["pool"])
        nc, nh, nw = len(x2), len(x2[0]), len(x2[0][0])
        # flatten in (height, width, chans) order, chans fastest
        flat = [x2[c][h][w] for h in range(nh) for w in range(nw) for c in range(nc)]
        dense_w, dense_b = params["dense_w"], params["dense_b"]
        h1 = [
            max(0.0, sum(dense_w[i][j] * flat[j] for j in range(len(flat))) + dense_b[i])
            for i in range(len(dense_b))
        ]
        out_w, out_b = params["out_w"], params["out_b"]
        logits = [
            sum(out_w[i][j] * h1[j] for j in range(len(h1))) + out_b[i]
            for i in range(len(out_b))
        ]
        out.append(_softmax(logits))
    return out


def prob_ops(cond, prior):
    # cond[a][b] = p(b | a), prior[a]
    na, nb = len(cond), len(cond[0])
    joint = [[cond[a][b] * prior[a] for b in range(nb)] for a in range(na)]
    marginal = [sum(joint[a][b] for a in range(na)) for b in range(nb)]
    posterior = [[joint[a][b] / marginal[b] for b in range(nb)] for a in range(na)]
    return joint, marginal, posterior


def cbow(onehots, embed, proj):
    # onehots[seq][vocab], embed[vocab][emb], proj[classes][emb]
    nseq, nvocab = len(onehots), len(onehots[0])
    nemb = len(embed[0])
    nclasses = len(proj)
    summed = [0.0] * nclasses
    for s in range(nseq):
        e = [
            sum(embed[v][j] * onehots[s][v] for v in range(nvocab))
            for j in range(nemb)
        ]
        for c in range(nclasses):
            summed[c] += sum(proj[c][j] * e[j] for j in range(nemb))
    return _softmax(summed)


def sudoku_check(grid):
    # grid[h][w][a], all in {0, 1}
    for h in range(9):
        for w in range(9):
            if sum(grid[h][w][a] for a in range(9)) != 1:
                return 0.0
    for a in range(9):
        for h in range(9):
            if sum(grid[h][w][a] for w in range(9)) != 1:
                return 0.0
        for w in range(9):
            if sum(grid[h][w][a] for h in range(9)) != 1:
                return 0.0
        for bh in range(3):
            for bw in range(3):
                total = sum(
                    grid[bh * 3 + i][bw * 3 + j][a]
                    for i in range(3)
                    for j in range(3)
                )
                if total != 1:
                    return 0.0
    return 1.0


def kmeans_step(points, centers):
    # points[batch][d], centers[clusters][d]
    nb, nd = len(points), len(points[0])
    nk = len(centers)
    assign = [[0.0] * nb for _ in range(nk)]
    for b in range(nb):
        dists = [
            math.sqrt(sum((centers[c][j] - points[b][j]) ** 2 for j in range(nd)))
            for c in range(nk)
        ]
        best = min(dists)
        ties = [c for c in range(nk) if dists[c] == best]
        for c in ties:
            assign[c][b] = 1.0 / len(ties)
    new_centers = []
    for c in range(nk):
        mass = sum(assign[c])
        if mass == 0.0:
            new_centers.append(list(centers[c]))
        else:
            new_centers.append(
                [
                    sum(assign[c][b] * points[b][j] for b in range(nb)) / mass
                    for j in range(nd)
                ]
            )
    return new_centers


def beam_step(scores, states, trans, offset, beam_size):
    # scores[beam], states[beam][state], trans[state][state'], offset[state']
    nbeam, nstate = len(states), len(states[0])
    stepped = [
        [
            scores[b]
            * (
                sum(trans[s][sp] * states[b][s] for s in range(nstate))
                + offset[sp]
            )
            for sp in range(nstate)
        ]
        for b in range(nbeam)
    ]
    best = [max(stepped[b][sp] for b in range(nbeam)) for sp in range(nstate)]
    order = sorted(range(nstate), key=lambda sp: (-best[sp], sp))[:beam_size]
    new_scores = [best[sp] for sp in order]
    new_states = [[0.0] * beam_size for _ in range(nstate)]
    for i, sp in enumerate(order):
        new_states[sp][i] = 1.0
    return new_scores, new_states


def _det(m):
    n = len(m)
    if n == 1:
        return m[0][0]
    total = 0.0
    for j in range(n):
        minor = [row[:j] + row[j + 1 :] for row in m[1:]]
        total += ((-1) ** j) * m[0][j] * _det(minor)
    return total


def _inv(m):
    n = len(m)
    d = _det(m)
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [
                row[:j] + row[j + 1 :]
                for r, row in enumerate(m)
                if r != i
            ]
            out[j][i] = ((-1) ** (i + j)) * _det(minor) / d
    return out


def mvn_density(x, mean, cov):
    # x[d], mean[d], cov[d][d] symmetric positive definite
    n = len(x)
    inv = _inv(cov)
    diff = [x[i] - mean[i] for i in range(n)]
    quad = sum(inv[i][j] * diff[i] * diff[j] for i in range(n) for j in range(n))
    return math.exp(-quad / 2.0) / math.sqrt((2.0 * math.pi) ** n * _det(cov))
