"""
Brute-force reference implementations.

Everything here is written as direct loops or dense matrix algebra over
numpy arrays, sharing no code with the kernels it checks. Selftest and the
test suite compare the kernels against these on small random instances.
"""

from collections import deque
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

# ========================================
# Numerics
# ========================================


def matmul_loop(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n), dtype=np.result_type(a, b))
    for i in range(m):
        for j in range(n):
            total = 0.0
            for p in range(k):
                total += a[i, p] * b[p, j]
            out[i, j] = total
    return out


def conv2d_loop(
    x: np.ndarray,
    w: np.ndarray,
    b: np.ndarray = None,
    stride: int = 1,
    padding: int = 0,
) -> np.ndarray:
    """Direct cross-correlation over B x C x H x W with O x C x kh x kw kernels."""
    batch, channels, height, width = x.shape
    out_channels, _, kh, kw = w.shape
    out_h = (height + 2 * padding - kh) // stride + 1
    out_w = (width + 2 * padding - kw) // stride + 1
    out = np.zeros((batch, out_channels, out_h, out_w), dtype=np.result_type(x, w))

    for n in range(batch):
        for o in range(out_channels):
            for i in range(out_h):
                for j in range(out_w):
                    total = 0.0 if b is None else b[o]
                    for c in range(channels):
                        for u in range(kh):
                            for v in range(kw):
                                row = i * stride + u - padding
                                col = j * stride + v - padding
                                if 0 <= row < height and 0 <= col < width:
                                    total += x[n, c, row, col] * w[o, c, u, v]
                    out[n, o, i, j] = total
    return out


def gap_loop(x: np.ndarray) -> np.ndarray:
    batch, channels, height, width = x.shape
    out = np.zeros((batch, channels, 1, 1), dtype=x.dtype)
    for n in range(batch):
        for c in range(channels):
            out[n, c, 0, 0] = np.sum(x[n, c].ravel()) / (height * width)
    return out


# ========================================
# Hypergraph
# ========================================

@dataclass
class DenseHypergraph:
    """Every intermediate of one dense hypergraph pass."""

    V_f: np.ndarray
    g: np.ndarray
    E_f: np.ndarray
    H: np.ndarray
    H_s: np.ndarray
    Dv: np.ndarray
    De: np.ndarray
    P_H: np.ndarray
    output: np.ndarray


def dense_interaction(H_s: np.ndarray, degree_eps: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Degree diagonals and ``Dv^-1/2 H_s De^-1 H_s^T Dv^-1/2`` with explicit matrices."""
    dv = H_s.sum(axis=1) + degree_eps
    de = H_s.sum(axis=0) + degree_eps
    dv_inv_sqrt = np.diag(1.0 / np.sqrt(dv))
    de_inv = np.diag(1.0 / de)
    P_H = dv_inv_sqrt @ H_s @ de_inv @ H_s.T @ dv_inv_sqrt
    return dv, de, P_H


def dense_hypergraph(
    F: np.ndarray,
    w_v: np.ndarray,
    b_v: np.ndarray,
    w_g: np.ndarray,
    b_g: np.ndarray,
    w_e: np.ndarray,
    b_e: np.ndarray,
    theta: np.ndarray,
    sparsity: float,
    degree_eps: float,
) -> DenseHypergraph:
    """
    Step-by-step hypergraph propagation of a single C x H x W map.

    ``w_v``/``w_g`` are d x C matrices, ``w_e`` an M x C x k x k kernel
    applied with "same" padding.
    """
    channels, height, width = F.shape
    X = F.reshape(channels, height * width).T
    V_f = X @ w_v.T + b_v
    g = w_g @ X.mean(axis=0) + b_g
    pad = w_e.shape[-1] // 2
    E_f = conv2d_loop(F[np.newaxis], w_e, b_e, padding=pad)[0].reshape(w_e.shape[0], -1).T

    H = np.abs(V_f @ np.diag(g) @ V_f.T @ E_f)
    threshold = sparsity * H.mean()
    H_s = np.where(H > threshold, H, 0.0)
    dv, de, P_H = dense_interaction(H_s, degree_eps)
    out = X @ theta - P_H @ (X @ theta)
    return DenseHypergraph(
        V_f=V_f, g=g, E_f=E_f, H=H, H_s=H_s, Dv=dv, De=de, P_H=P_H,
        output=out.T.reshape(channels, height, width),
    )


# ========================================
# Metrics
# ========================================

_NEIGHBOURS = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]


def label_loop(mask: np.ndarray) -> List[List[Tuple[int, int]]]:
    """8-connected components by breadth-first flood fill, in raster order of first pixel."""
    height, width = mask.shape
    seen = np.zeros(mask.shape, dtype=bool)
    regions = []
    for r in range(height):
        for c in range(width):
            if not mask[r, c] or seen[r, c]:
                continue
            pixels = []
            queue = deque([(r, c)])
            seen[r, c] = True
            while queue:
                pr, pc = queue.popleft()
                pixels.append((pr, pc))
                for dr, dc in _NEIGHBOURS:
                    nr, nc = pr + dr, pc + dc
                    if 0 <= nr < height and 0 <= nc < width and mask[nr, nc] and not seen[nr, nc]:
                        seen[nr, nc] = True
                        queue.append((nr, nc))
            regions.append(pixels)
    return regions


@dataclass
class NaiveImageMetrics:
    tp: int
    fp: int
    fn: int
    targets: int
    detected: int
    false_pixels: int
    pixels: int


def naive_image_metrics(pred: np.ndarray, gt: np.ndarray, radius: float = 3.0) -> NaiveImageMetrics:
    """Full-scan pixel counts plus greedy centroid matching."""
    tp = fp = fn = 0
    for p, g in zip(pred.ravel(), gt.ravel()):
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1

    predicted = label_loop(pred)
    targets = label_loop(gt)
    p_centroids = [np.mean(np.array(px, dtype=float), axis=0) for px in predicted]
    t_centroids = [np.mean(np.array(px, dtype=float), axis=0) for px in targets]

    pairs = []
    for t, tc in enumerate(t_centroids):
        for p, pc in enumerate(p_centroids):
            distance = float(np.sqrt(np.sum((tc - pc) ** 2)))
            if distance < radius:
                pairs.append((distance, t, p))
    pairs.sort()
    used_t, used_p = set(), set()
    for _, t, p in pairs:
        if t not in used_t and p not in used_p:
            used_t.add(t)
            used_p.add(p)

    false_pixels = sum(len(px) for p, px in enumerate(predicted) if p not in used_p)
    return NaiveImageMetrics(
        tp=tp, fp=fp, fn=fn,
        targets=len(targets),
        detected=len(used_t),
        false_pixels=false_pixels,
        pixels=pred.size,
    )


def naive_aggregate(results: List[NaiveImageMetrics]) -> dict:
    """IoU, nIoU, F, Pd and Fa from per-image counts, with the empty-mask conventions."""
    tp = sum(r.tp for r in results)
    fp = sum(r.fp for r in results)
    fn = sum(r.fn for r in results)

    iou = tp / (tp + fp + fn) if tp + fp + fn else 1.0
    precision = tp / (tp + fp) if tp + fp else (1.0 if fn == 0 else 0.0)
    recall = tp / (tp + fn) if tp + fn else (1.0 if fp == 0 else 0.0)
    f_measure = 2 * precision * recall / (precision + recall) if precision + recall else 0.0

    per_image = []
    for r in results:
        union = r.tp + r.fp + r.fn
        per_image.append(r.tp / union if union else 1.0)
    targets = sum(r.targets for r in results)
    return {
        "iou": iou,
        "niou": sum(per_image) / len(per_image),
        "f_measure": f_measure,
        "pd": sum(r.detected for r in results) / targets if targets else 1.0,
        "fa": sum(r.false_pixels for r in results) / sum(r.pixels for r in results),
    }
