"""Pure-numpy coordinate-descent kernel.

Fallback twin of the compiled kernel in ``_cd_fast.pyx``; both solve the
Gram-form L1 problem

    min_w  0.5*y_sq - c.w + 0.5*w.G.w + lam*|w|_1

with cyclic exact soft-threshold updates. Keep the two implementations in
lockstep: same update order, same convergence rule, same outputs.
"""

from __future__ import annotations

import numpy as np


def solve_cd(G, c, y_sq, lam, tol, max_iter, w, objective_out, record_objective=False):
    """Run coordinate-descent sweeps in place on ``w``.

    Returns ``(n_sweeps, converged, last_max_delta)``. With
    ``record_objective`` set, ``objective_out[i]`` holds the penalized
    objective after sweep ``i`` (costs one extra O(p^2) pass per sweep).
    """
    p = c.shape[0]
    diag = np.ascontiguousarray(np.diagonal(G))
    n_iter = 0
    converged = False
    final_delta = 0.0
    for it in range(max_iter):
        max_delta = 0.0
        for j in range(p):
            gjj = diag[j]
            if gjj <= 0.0:
                if w[j] != 0.0:
                    max_delta = max(max_delta, abs(w[j]))
                    w[j] = 0.0
                continue
            zj = c[j] - float(G[j] @ w) + gjj * w[j]
            if zj > lam:
                wj = (zj - lam) / gjj
            elif zj < -lam:
                wj = (zj + lam) / gjj
            else:
                wj = 0.0
            delta = abs(wj - w[j])
            if delta > max_delta:
                max_delta = delta
            w[j] = wj
        if record_objective:
            objective_out[it] = (
                0.5 * y_sq + float(w @ (0.5 * (G @ w) - c)) + lam * float(np.abs(w).sum())
            )
        n_iter = it + 1
        final_delta = max_delta
        if max_delta < tol:
            converged = True
            break
    return n_iter, converged, final_delta


def soft_threshold(z: float, lam: float) -> float:
    """sign(z) * max(|z| - lam, 0)."""
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0
