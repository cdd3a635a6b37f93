"""Pure-Python / numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and bit-identical results; ``vlfusion.kernels`` picks one at import time.
"""

import math

import numpy as np


def lsa_min(cost):
    """Minimum-cost assignment of every row of ``cost`` to a distinct column.

    Shortest-augmenting-path Hungarian method with row/column potentials.
    Requires ``n_rows <= n_cols``.

    Returns
    -------
    col4row : ndarray of int64, shape (n,)
    u : ndarray, shape (n,)
        Row potentials.
    v : ndarray, shape (m,)
        Column potentials. ``v <= 0`` and ``u[i] + v[j] <= cost[i, j]``, with
        equality on assigned pairs and ``v == 0`` on unassigned columns.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    if n > m:
        raise ValueError("lsa_min needs n_rows <= n_cols")
    c = cost.tolist()
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)  # p[j]: 1-based row matched to column j, 0 = free
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = c[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col4row = np.zeros(n, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j]:
            col4row[p[j] - 1] = j - 1
    return col4row, np.array(u[1:]), np.array(v[1:])


def iou_matrix(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    ix1 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix2 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.clip(ix2 - ix1, 0.0, None) * np.clip(iy2 - iy1, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def bin_events(x, y, t, p, window_start, window_len, n_slices, height, width):
    """Count events into a ``(2, n_slices, height, width)`` int64 tensor.

    Returns ``(counts, n_binned, n_dropped_pixels)``.
    """
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    t = np.asarray(t, dtype=np.float64)
    p = np.asarray(p)
    window_end = window_start + window_len
    in_window = (t >= window_start) & (t < window_end)
    on_sensor = (x >= 0) & (x < width) & (y >= 0) & (y < height)
    dropped = int(np.count_nonzero(in_window & ~on_sensor))
    keep = in_window & on_sensor
    rel = (t[keep] - window_start) / window_len * n_slices
    slices = np.minimum(np.floor(rel).astype(np.int64), n_slices - 1)
    channel = np.where(p[keep] > 0, 0, 1)
    flat = ((channel * n_slices + slices) * height + y[keep]) * width + x[keep]
    size = 2 * n_slices * height * width
    counts = np.bincount(flat, minlength=size).astype(np.int64)
    return counts.reshape(2, n_slices, height, width), int(flat.size), dropped


def project_points(points, fx, fy, cx, cy, k1, k2, k3, p1, p2, apply_distortion):
    """Pinhole projection of camera-frame points.

    Returns ``(uv, valid)``; rows with ``z <= 0`` are ``nan`` and not valid.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    z = pts[:, 2]
    valid = z > 0
    uv = np.full((pts.shape[0], 2), np.nan)
    zs = z[valid]
    xn = pts[valid, 0] / zs
    yn = pts[valid, 1] / zs
    if apply_distortion:
        r2 = xn * xn + yn * yn
        radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        xd = xn * radial + 2.0 * p1 * xn * yn + p2 * (r2 + 2.0 * xn * xn)
        yd = yn * radial + p1 * (r2 + 2.0 * yn * yn) + 2.0 * p2 * xn * yn
        xn, yn = xd, yd
    uv[valid, 0] = fx * xn + cx
    uv[valid, 1] = fy * yn + cy
    return uv, valid
