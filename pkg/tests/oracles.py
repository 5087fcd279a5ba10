"""
Straight-line reference implementations used by the tests

Everything here is written from the definitions with explicit loops and
shares no code with the package.
"""

import math

import numpy as np


def conv2d(x, w, b=None, stride=1, padding=0, dilation=1):
    n, cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    ho = (h + 2 * padding - dilation * (k - 1) - 1) // stride + 1
    wo = (wd + 2 * padding - dilation * (k - 1) - 1) // stride + 1
    out = np.zeros((n, cout, ho, wo))
    for ni in range(n):
        for co in range(cout):
            for i in range(ho):
                for j in range(wo):
                    total = 0.0 if b is None else float(b[co])
                    for ci in range(cin):
                        for di in range(k):
                            for dj in range(k):
                                r = i * stride - padding + di * dilation
                                c = j * stride - padding + dj * dilation
                                if 0 <= r < h and 0 <= c < wd:
                                    total += x[ni, ci, r, c] * w[co, ci, di, dj]
                    out[ni, co, i, j] = total
    return out


def bilinear(x, size):
    """align_corners=False bilinear resize of (N, C, H, W)"""
    n, c, h, w = x.shape
    ho, wo = size
    out = np.zeros((n, c, ho, wo))
    for i in range(ho):
        sy = max((i + 0.5) * h / ho - 0.5, 0.0)
        y0 = min(int(math.floor(sy)), h - 1)
        y1 = min(y0 + 1, h - 1)
        fy = sy - y0
        for j in range(wo):
            sx = max((j + 0.5) * w / wo - 0.5, 0.0)
            x0 = min(int(math.floor(sx)), w - 1)
            x1 = min(x0 + 1, w - 1)
            fx = sx - x0
            out[:, :, i, j] = (
                (1 - fy) * (1 - fx) * x[:, :, y0, x0]
                + (1 - fy) * fx * x[:, :, y0, x1]
                + fy * (1 - fx) * x[:, :, y1, x0]
                + fy * fx * x[:, :, y1, x1]
            )
    return out


def mean_pool(x, factor):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h // factor, w // factor))
    for i in range(h // factor):
        for j in range(w // factor):
            out[:, :, i, j] = x[:, :, i * factor:(i + 1) * factor, j * factor:(j + 1) * factor].mean(axis=(2, 3))
    return out


def max_pool2(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h // 2, w // 2))
    for ni in range(n):
        for ci in range(c):
            for i in range(h // 2):
                for j in range(w // 2):
                    out[ni, ci, i, j] = max(
                        x[ni, ci, 2 * i, 2 * j], x[ni, ci, 2 * i, 2 * j + 1],
                        x[ni, ci, 2 * i + 1, 2 * j], x[ni, ci, 2 * i + 1, 2 * j + 1],
                    )
    return out


def channel_max_mean(x):
    n, c, h, w = x.shape
    top = np.zeros((n, 1, h, w))
    avg = np.zeros((n, 1, h, w))
    for ni in range(n):
        for i in range(h):
            for j in range(w):
                values = [x[ni, ci, i, j] for ci in range(c)]
                top[ni, 0, i, j] = max(values)
                avg[ni, 0, i, j] = sum(values) / c
    return top, avg


def activation(x, kind):
    if kind == 'relu':
        return np.maximum(x, 0.0)
    if kind == 'gelu':
        erf = np.vectorize(math.erf)
        return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))
    if kind == 'tanh':
        return np.tanh(x)
    if kind == 'sigmoid':
        return 1.0 / (1.0 + np.exp(-x))
    if kind == 'identity':
        return x
    raise ValueError(kind)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def conv_of(layer, x):
    """Apply a Conv2d module's weights through the loop oracle"""
    bias = None if layer.bias is None else layer.bias.data
    return conv2d(x, layer.weight.data, bias, layer.stride, layer.padding, layer.dilation)


def align(conv, x):
    return x if conv is None else conv_of(conv, x)


def up(x):
    return bilinear(x, (2 * x.shape[2], 2 * x.shape[3]))


def down(x):
    return mean_pool(x, 2)


def msfi_fuse(fusion, f2, f3, f4):
    """Two-stage fusion written out operand by operand"""
    act = lambda t: activation(t, fusion.activation)  # noqa: E731
    f4p = f4 * align(fusion.align_f3_to_f4, down(f3))
    f3p = f3 * align(fusion.align_f2_to_f3, down(f2))
    f3p = f3p * align(fusion.align_f4p_to_f3, up(f4p))
    f2p = f2 * align(fusion.align_f3p_to_f2, up(f3p))
    f4pp = act(conv_of(fusion.fuse4, np.concatenate([f4p, down(f3p)], axis=1)))
    f3pp = act(conv_of(fusion.fuse3, np.concatenate([f3p, down(f2p), up(f4pp)], axis=1)))
    f2pp = act(conv_of(fusion.fuse2, np.concatenate([f2p, up(f3pp)], axis=1)))
    return {'f2p': f2p, 'f3p': f3p, 'f4p': f4p, 'f2pp': f2pp, 'f3pp': f3pp, 'f4pp': f4pp}


def mac(block, z):
    shared = conv_of(block.shared, z)
    alpha = block.alpha.data.reshape(-1)
    return np.concatenate([activation(shared, kind) * alpha[n] for n, kind in enumerate(block.kinds)], axis=1)


def mskm(block, z):
    g1 = mac(block.mac_a, z)
    g2 = conv_of(block.point, z)
    g3 = mac(block.mac_n, z)
    g = np.concatenate([g1, g2, g3], axis=1)
    top, avg = channel_max_mean(g)
    S = sigmoid(conv_of(block.select, np.concatenate([top, avg], axis=1)))
    gp = np.concatenate([S[:, i:i + 1] * branch for i, branch in enumerate((g1, g2, g3))], axis=1)
    return conv_of(block.project, conv_of(block.gate, z) * gp)


# ==========================================================================
# Metrics
# ==========================================================================

def mae(pred, gt):
    total = 0.0
    for p, g in zip(pred.reshape(-1), gt.reshape(-1)):
        total += abs(float(p) - float(g))
    return total / pred.size


def adaptive_fbeta(pred, gt, beta_sq=0.3):
    threshold = min(2.0 * float(pred.mean()), 1.0)
    tp = fp = fn = 0
    for p, g in zip(pred.reshape(-1), gt.reshape(-1)):
        positive = p >= threshold and p > 0
        if positive and g:
            tp += 1
        elif positive:
            fp += 1
        elif g:
            fn += 1
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return (1 + beta_sq) * precision * recall / (beta_sq * precision + recall)


def _object(values):
    eps = np.spacing(1)
    x = sum(values) / len(values)
    var = sum((v - x) ** 2 for v in values) / (len(values) - 1) if len(values) > 1 else 0.0
    return 2 * x / (x * x + 1 + math.sqrt(var) + eps)


def _ssim(pred, gt):
    eps = np.spacing(1)
    values = list(pred.reshape(-1))
    truth = list(gt.reshape(-1))
    n = len(values)
    if n == 0:
        return 0.0
    x = sum(values) / n
    y = sum(truth) / n
    dof = max(n - 1, 1)
    sx = sum((v - x) ** 2 for v in values) / dof
    sy = sum((t - y) ** 2 for t in truth) / dof
    sxy = sum((v - x) * (t - y) for v, t in zip(values, truth)) / dof
    alpha = 4 * x * y * sxy
    beta = (x * x + y * y) * (sx + sy)
    if alpha != 0:
        return alpha / (beta + eps)
    return 1.0 if beta == 0 else 0.0


def s_measure(pred, gt, alpha=0.5):
    gt = gt > 0.5
    h, w = gt.shape
    mean_gt = gt.mean()
    if mean_gt == 0:
        return 1 - pred.mean()
    if mean_gt == 1:
        return pred.mean()
    fg = [pred[i, j] for i in range(h) for j in range(w) if gt[i, j]]
    bg = [1 - pred[i, j] for i in range(h) for j in range(w) if not gt[i, j]]
    object_score = mean_gt * _object(fg) + (1 - mean_gt) * _object(bg)

    rows = [i for i in range(h) for j in range(w) if gt[i, j]]
    cols = [j for i in range(h) for j in range(w) if gt[i, j]]
    cy = int(round(sum(rows) / len(rows))) + 1
    cx = int(round(sum(cols) / len(cols))) + 1
    gtf = gt.astype(float)
    region = 0.0
    for (r0, r1), (c0, c1) in (((0, cy), (0, cx)), ((0, cy), (cx, w)), ((cy, h), (0, cx)), ((cy, h), (cx, w))):
        weight = (r1 - r0) * (c1 - c0) / (h * w)
        region += weight * _ssim(pred[r0:r1, c0:c1], gtf[r0:r1, c0:c1])
    return min(max(alpha * object_score + (1 - alpha) * region, 0.0), 1.0)


def e_measure(pred, gt):
    threshold = min(2.0 * float(pred.mean()), 1.0)
    binary = ((pred >= threshold) & (pred > 0)).astype(float)
    gtf = (gt > 0.5).astype(float)
    mean_gt = gtf.mean()
    if mean_gt == 0:
        return 1 - binary.mean()
    if mean_gt == 1:
        return binary.mean()
    mean_p = binary.mean()
    total = 0.0
    for b, g in zip(binary.reshape(-1), gtf.reshape(-1)):
        pg = g - mean_gt
        pp = b - mean_p
        xi = 2 * pg * pp / (pg * pg + pp * pp + 1e-8)
        total += (xi + 1) ** 2 / 4
    return total / binary.size
