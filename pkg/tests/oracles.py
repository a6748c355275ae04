"""Independent reference implementations used by the tests."""
import math

import numpy as np


def brute_force_path(n, arcs, w, src, dst):
    """Exhaustive simple-path enumeration; returns (cost, lexicographically smallest path)."""
    adj = {}
    for (a, b), c in zip(arcs, w):
        adj.setdefault(a, []).append((b, c))
    best = [math.inf, None]

    def dfs(u, path, cost):
        if u == dst:
            cand = (cost, tuple(path))
            if best[1] is None or cand < (best[0], best[1]):
                best[0], best[1] = cand
            return
        for v, c in adj.get(u, []):
            if v not in path and math.isfinite(c):
                path.append(v)
                dfs(v, path, cost + c)
                path.pop()

    dfs(src, [src], 0.0)
    return best[0], best[1]


def triangle_oracle(u, V_A, w, gmin, gmax):
    """Vector-algebra classification: 0 ok, 1 crosswind, 2 ground speed, 3 climb angle."""
    u, w = np.asarray(u, float), np.asarray(w, float)
    w_par = float(w @ u)
    w_perp_vec = w - w_par * u
    w_perp = float(np.linalg.norm(w_perp_vec))
    if w_perp > V_A:
        return 1, None
    va_par = math.sqrt(V_A * V_A - w_perp * w_perp)
    air = va_par * u - w_perp_vec
    ground = air + w
    vg = float(ground @ u)
    gamma = math.asin(max(-1.0, min(1.0, air[2] / V_A)))
    if vg <= 0:
        return 2, air
    if gamma < gmin or gamma > gmax:
        return 3, air
    return 0, air
