"""Independent reference implementations used only by the tests.

Everything here is written directly against numpy with plain loops, never
through the package's Tensor machinery.
"""

import itertools

import numpy as np


def central_diff(f, arrays, h=1e-4):
    """Central finite-difference gradient of scalar f(*arrays) w.r.t. each array."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a, dtype=np.float64)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = a[idx]
            a[idx] = orig + h
            up = f(*arrays)
            a[idx] = orig - h
            down = f(*arrays)
            a[idx] = orig
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def rel_err(a, b, floor=1e-6):
    """Norm-wise relative error; ``floor`` keeps exactly-zero gradients from
    comparing rounding noise against rounding noise."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / scale)


def clamp_gather(padded, t, K):
    """Window of padded frame t: rows clamp(t + j, 0, T'-1) for j in -K..K."""
    last = padded.shape[0] - 1
    return np.stack([padded[min(max(t + j, 0), last)] for j in range(-K, K + 1)])


def pairwise_similarity(x, groups, metric):
    """maps[b, g, i, j] by a double loop over frame pairs."""
    B, L, C = x.shape
    d = C // groups
    out = np.zeros((B, groups, L, L))
    for b in range(B):
        for g in range(groups):
            for i in range(L):
                for j in range(L):
                    u = x[b, i, g * d : (g + 1) * d].astype(np.float64)
                    v = x[b, j, g * d : (g + 1) * d].astype(np.float64)
                    if metric == "cosine":
                        s = float(u @ v) / max(float(np.linalg.norm(u) * np.linalg.norm(v)), 1e-8)
                    elif metric == "neg-euclidean":
                        s = -float(np.sqrt(((u - v) ** 2).sum()))
                    elif metric == "neg-manhattan":
                        s = -float(np.abs(u - v).sum())
                    else:
                        s = -float(np.abs(u - v).max())
                    out[b, g, i, j] = s
    return out


def brute_force_matches(dets, gts, length, threshold):
    """Largest number of (det, gt) pairs over every injective assignment."""
    best = 0
    if len(dets) > len(gts):
        small, big, swap = gts, dets, True
    else:
        small, big, swap = dets, gts, False
    for perm in itertools.permutations(range(len(big)), len(small)):
        count = 0
        for i, j in enumerate(perm):
            d, g = (big[j], small[i]) if swap else (small[i], big[j])
            if abs(d - g) / length <= threshold:
                count += 1
        best = max(best, count)
    return best


def gaussian_labels(boundaries, T, sigma=1.0, radius=3):
    """Per-frame loop over every boundary, no vectorization."""
    out = []
    for t in range(T):
        total = 0.0
        for b in boundaries:
            bi = int(np.floor(b + 0.5))
            if abs(bi - t) <= radius:
                total += float(np.exp(-((bi - t) ** 2) / (2 * sigma**2)))
        out.append(min(1.0, total))
    return np.array(out)
