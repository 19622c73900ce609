"""Pure numpy versions of the compiled kernels (same signatures and results)."""

from __future__ import annotations

import numpy as np

_CHUNK = 256


def _tricube(u):
    u = np.minimum(np.abs(u), 1.0)
    return (1.0 - u ** 3) ** 3


def loess_kernel(x, y, rw, x_eval, q, degree, want_hat):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    rw = np.asarray(rw, float)
    x_eval = np.asarray(x_eval, float)
    N = x.size
    q = min(int(q), N)
    fit = np.empty(x_eval.size)
    hat = np.full(x_eval.size, np.nan)
    for start in range(0, x_eval.size, _CHUNK):
        x0 = x_eval[start:start + _CHUNK]
        dist = np.abs(x[None, :] - x0[:, None])
        h = np.partition(dist, q - 1, axis=1)[:, q - 1]
        h = np.where(h > 0, h, 1.0)
        u = (x[None, :] - x0[:, None]) / h[:, None]
        w = _tricube(u) * rw[None, :]
        mom = np.stack([np.sum(w * u ** k, axis=1) for k in range(5)], axis=1)
        my = np.stack([np.sum(w * u ** k * y[None, :], axis=1) for k in range(3)], axis=1)
        f = np.full(x0.size, np.nan)
        hv = np.full(x0.size, np.nan)
        todo = np.ones(x0.size, dtype=bool)
        for d in range(degree, -1, -1):
            if not todo.any():
                break
            p = d + 1
            idx = np.nonzero(todo)[0]
            M = np.stack([[mom[idx, j + k] for k in range(p)] for j in range(p)], axis=0)
            M = np.moveaxis(M, 2, 0)
            scale = np.abs(M).reshape(idx.size, -1).max(axis=1)
            ok = scale > 0
            good = np.zeros(idx.size, dtype=bool)
            if ok.any():
                Mi = M[ok]
                with np.errstate(all="ignore"):
                    cond = np.linalg.cond(Mi)
                fine = np.isfinite(cond) & (cond < 1e12)
                inv = np.zeros_like(Mi)
                if fine.any():
                    inv[fine] = np.linalg.inv(Mi[fine])
                rows = idx[ok][fine]
                coef0 = np.einsum("rk,rk->r", inv[fine][:, 0, :], my[rows, :p])
                f[rows] = coef0
                hv[rows] = inv[fine][:, 0, 0]
                good[np.nonzero(ok)[0][fine]] = True
            todo[idx[good]] = False
        if todo.any():
            for r in np.nonzero(todo)[0]:
                nn = np.argsort(dist[r], kind="stable")[:q]
                f[r] = y[nn].mean()
        fit[start:start + _CHUNK] = f
        hat[start:start + _CHUNK] = hv
    return fit, hat


def concordance_kernel(marker, time, status, weight, tau):
    marker = np.asarray(marker, float)
    time = np.asarray(time, float)
    status = np.asarray(status)
    weight = np.asarray(weight, float)
    rows = np.nonzero((status == 1) & (time < tau))[0]
    if rows.size == 0:
        return 0.0, 0.0
    comp = time[rows, None] < time[None, :]
    wi = weight[rows, None]
    mi = marker[rows, None]
    conc = (mi > marker[None, :]) + 0.5 * (mi == marker[None, :])
    den = float(np.sum(wi * comp))
    num = float(np.sum(wi * comp * conc))
    return num, den
