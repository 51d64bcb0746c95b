"""Independent brute-force reference implementations used by the tests.

Everything here is deliberately written as plain double/triple loops over
explicit definitions, sharing no code path with the package, so agreement
between the two is evidence of correctness rather than of shared bugs.
"""

from __future__ import annotations

import itertools

import numpy as np


def kernel_oracle(size: int) -> np.ndarray:
    """Quadrant-by-quadrant construction of the contrastive kernel."""
    c = (size - 1) // 2
    mag = 1.0 / (2.0 * c * c)
    w = np.zeros((size, size))
    for u in range(size):
        for v in range(size):
            if u == c or v == c:
                continue
            same_side = (u < c) == (v < c)
            w[u, v] = mag if same_side else -mag
    return w


def conv_scores_oracle(values: np.ndarray, start: int, end: int, size: int) -> np.ndarray:
    """Zero-padded diagonal convolution, written as explicit loops."""
    c = (size - 1) // 2
    w = kernel_oracle(size)
    M = end - start
    sub = values[start:end, start:end]
    padded = np.zeros((M + 2 * c, M + 2 * c))
    padded[c:c + M, c:c + M] = sub
    out = np.zeros(M)
    for i in range(M):
        acc = 0.0
        for u in range(size):
            for v in range(size):
                acc += w[u, v] * padded[i + u, i + v]
        out[i] = acc
    return out


def segment_of(frame: int, boundaries: list[int]) -> int:
    seg = 0
    for b in boundaries:
        if frame >= b:
            seg += 1
    return seg


def mask_pairs_oracle(length: int, boundaries: list[int], gap: int):
    """Exhaustive enumeration of positive / negative ordered pairs."""
    positive, negative = set(), set()
    for i in range(length):
        for j in range(length):
            if i == j or abs(i - j) > gap:
                continue
            if segment_of(i, boundaries) == segment_of(j, boundaries):
                positive.add((i, j))
            else:
                negative.add((i, j))
    return positive, negative


def boco_loss_oracle(values: np.ndarray, boundaries: list[int], gap: int) -> float:
    length = values.shape[0]
    pos, neg = mask_pairs_oracle(length, boundaries, gap)
    pos_mean = sum(values[i, j] for i, j in pos) / len(pos) if pos else 0.0
    neg_mean = sum(values[i, j] for i, j in neg) / len(neg) if neg else 0.0
    return neg_mean - pos_mean


def optimal_tp_bruteforce(pred: list[int], gt: list[int], tol: float) -> int:
    """Maximum one-to-one matching size by trying every injective assignment."""
    best = 0
    n, m = len(pred), len(gt)
    for k in range(min(n, m), 0, -1):
        for pred_sub in itertools.combinations(range(n), k):
            for gt_perm in itertools.permutations(range(m), k):
                if all(abs(pred[i] - gt[j]) <= tol for i, j in zip(pred_sub, gt_perm)):
                    return k
    return best


def central_difference(f, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of an array."""
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        hi = f()
        x[idx] = orig - step
        lo = f()
        x[idx] = orig
        grad[idx] = (hi - lo) / (2.0 * step)
        it.iternext()
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-300)
    return float(np.linalg.norm(a - b)) / denom


def random_symmetric_tsm(rng: np.random.Generator, length: int) -> np.ndarray:
    """Random matrix with cosine-TSM invariants: symmetric, [-1, 1], unit diag."""
    raw = rng.uniform(-1.0, 1.0, size=(length, length))
    sym = np.triu(raw, k=1)
    sym = sym + sym.T
    np.fill_diagonal(sym, 1.0)
    return sym
