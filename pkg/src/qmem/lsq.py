"""Batched Levenberg-Marquardt least squares.

Every array carries a leading batch axis so that a fit and its bootstrap
refits run through the same vectorised loop. ``fun(x, rows)`` maps
parameters of shape (b, P) to residuals (b, M) and ``jac(x, rows)`` returns
(b, M, P); ``rows`` holds the batch indices being evaluated, since rows that
have converged drop out of later iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GTOL = 1e-10


@dataclass
class LSQResult:
    x: np.ndarray  # (B, P)
    residuals: np.ndarray  # (B, M)
    jac: np.ndarray  # (B, M, P)
    grad_norm: np.ndarray  # (B,) scaled gradient, see below
    n_iter: int
    converged: np.ndarray  # (B,)

    @property
    def cost(self) -> np.ndarray:
        return 0.5 * np.sum(self.residuals ** 2, axis=-1)


def scaled_gradient(J: np.ndarray, r: np.ndarray, y_scale=1.0) -> np.ndarray:
    """max_j |J_j . r| / (|J_j| |y|): the gradient in units of the data scale.

    Zero at a stationary point and independent of how parameters are scaled.
    Normalising by the data norm ``y_scale`` rather than the residual keeps
    the rounding floor at machine precision even for near-exact fits.
    """
    ys = np.maximum(np.asarray(y_scale, dtype=float), np.linalg.norm(r, axis=-1))
    ys = np.maximum(ys, 1e-300)
    cn = np.linalg.norm(J, axis=-2)
    g = np.abs(np.einsum("bmp,bm->bp", J, r))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(cn > 0, g / (cn * ys[:, None]), 0.0)
    return np.nan_to_num(np.max(out, axis=-1), nan=0.0)


def levenberg_marquardt(fun, jac, x0, *, max_iter: int = 300, gtol: float = GTOL,
                        xtol: float = 1e-15, lam0: float = 1e-3, y_scale=1.0) -> LSQResult:
    """Damped Gauss-Newton with Marquardt diagonal scaling, per batch row.

    Rows stop updating once their scaled gradient drops below ``gtol`` or the
    proposed step stalls below ``xtol`` relative to the parameters.
    """
    x = np.array(np.atleast_2d(x0), dtype=float)
    B, P = x.shape
    y_scale = np.broadcast_to(np.asarray(y_scale, dtype=float), (B,))
    everything = np.arange(B)
    r = fun(x, everything)
    cost = 0.5 * np.sum(r ** 2, axis=-1)
    cost = np.where(np.isfinite(cost), cost, np.inf)
    lam = np.full(B, lam0)
    active = np.isfinite(cost)
    stalled = np.zeros(B, dtype=bool)
    J = jac(x, everything)
    it = 0
    for it in range(1, max_iter + 1):
        gn = scaled_gradient(J, r, y_scale)
        active &= ~(gn < gtol)
        active &= ~stalled
        if not active.any():
            break
        idx = np.flatnonzero(active)
        Ja, ra = J[idx], r[idx]
        A = np.einsum("bmp,bmq->bpq", Ja, Ja)
        g = np.einsum("bmp,bm->bp", Ja, ra)
        d = np.maximum(np.einsum("bpp->bp", A), 1e-300)
        M = A + lam[idx, None, None] * (d[:, :, None] * np.eye(P))
        try:
            step = -np.linalg.solve(M, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = -np.stack([np.linalg.lstsq(m, v, rcond=None)[0] for m, v in zip(M, g)])
        xn = x[idx] + step
        rn = fun(xn, idx)
        cn = 0.5 * np.sum(rn ** 2, axis=-1)
        # tolerate rounding-level cost changes so the gradient can still be driven down
        ok = np.isfinite(cn) & (cn <= cost[idx] * (1 + 1e-13))
        tiny = np.all(np.abs(step) <= xtol * (np.abs(x[idx]) + xtol), axis=-1)
        acc = idx[ok]
        if acc.size:
            x[acc] = xn[ok]
            r[acc] = rn[ok]
            cost[acc] = cn[ok]
            J[acc] = jac(x[acc], acc)
            lam[acc] = np.maximum(lam[acc] / 3.0, 1e-15)
        rej = idx[~ok]
        lam[rej] = lam[rej] * 4.0
        stalled[idx[tiny]] = True
        stalled[rej[lam[rej] > 1e16]] = True
    gn = scaled_gradient(J, r, y_scale)
    return LSQResult(x, r, J, gn, it, gn < gtol)


def column_condition(J: np.ndarray) -> np.ndarray:
    """Condition number of the column-normalised Jacobian, per batch row."""
    cn = np.linalg.norm(J, axis=-2)
    if np.any(cn == 0):
        out = np.full(J.shape[0], np.inf)
        good = np.all(cn > 0, axis=-1)
        if good.any():
            out[good] = column_condition(J[good])
        return out
    s = np.linalg.svd(J / cn[:, None, :], compute_uv=False)
    return s[:, 0] / s[:, -1]
