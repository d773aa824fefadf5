"""Decay-curve models, damped least-squares fits and residual bootstrap."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..errors import FitError, InsufficientData
from ..lsq import GTOL, column_condition, levenberg_marquardt

ONE_SIGMA = 0.682689492137086
MAX_CONDITION = 1e12


# -- models -----------------------------------------------------------------------

@dataclass(frozen=True)
class Model:
    """Model y = f(x; p) with batched evaluation: p has shape (B, P)."""

    name: str
    names: tuple
    f: Callable
    jac: Callable
    guess: Callable
    canonical: Callable | None = None


def _linear_grid_fit(bases: np.ndarray, y: np.ndarray):
    """Least squares for many candidate bases at once.

    ``bases`` has shape (G, M, K). Returns coefficients (G, K) and residual
    sums of squares (G,).
    """
    A = np.einsum("gmk,gml->gkl", bases, bases)
    b = np.einsum("gmk,m->gk", bases, y)
    ridge = 1e-12 * np.einsum("gkk->g", A)[:, None, None] * np.eye(A.shape[-1])
    coef = np.linalg.solve(A + ridge, b[..., None])[..., 0]
    res = y - np.einsum("gmk,gk->gm", bases, coef)
    return coef, np.sum(res ** 2, axis=-1)


def _time_grid(x, n):
    span = float(np.ptp(x))
    pos = np.diff(np.unique(x))
    dmin = float(pos.min()) if pos.size else span
    return np.geomspace(max(dmin, 1e-3 * span) / 3, 10 * span, n)


# exponential: A exp(-x / tau) + C

def _exp_f(x, p):
    A, tau, C = p[:, 0:1], p[:, 1:2], p[:, 2:3]
    return A * np.exp(-x / tau) + C


def _exp_jac(x, p):
    A, tau = p[:, 0:1], p[:, 1:2]
    e = np.exp(-x / tau)
    return np.stack([e, A * e * x / tau ** 2, np.ones_like(e)], axis=-1)


def _exp_guess(x, y):
    taus = _time_grid(x, 120)
    e = np.exp(-x[None, :] / taus[:, None])
    bases = np.stack([e, np.ones_like(e)], axis=-1)
    coef, rss = _linear_grid_fit(bases, y)
    i = int(np.argmin(rss))
    return np.array([coef[i, 0], taus[i], coef[i, 1]])


EXPONENTIAL = Model("exponential", ("A", "tau", "C"), _exp_f, _exp_jac, _exp_guess)


# exp-of-exp: A exp(-nbar exp(-kappa x)) + C

def _eoe_f(x, p):
    A, nbar, kappa, C = (p[:, i:i + 1] for i in range(4))
    return A * np.exp(-nbar * np.exp(-kappa * x)) + C


def _eoe_jac(x, p):
    A, nbar, kappa = (p[:, i:i + 1] for i in range(3))
    u = np.exp(-kappa * x)
    v = np.exp(-nbar * u)
    return np.stack([v, -A * v * u, A * v * nbar * u * x, np.ones_like(v)], axis=-1)


def _eoe_guess(x, y):
    span = float(np.ptp(x))
    kappas = 1.0 / _time_grid(x, 60)
    kappas = kappas[kappas * span > 0.05]
    nbars = np.geomspace(0.05, 60, 50)
    K, N = np.meshgrid(kappas, nbars, indexing="ij")
    K, N = K.ravel(), N.ravel()
    v = np.exp(-N[:, None] * np.exp(-K[:, None] * x[None, :]))
    bases = np.stack([v, np.ones_like(v)], axis=-1)
    coef, rss = _linear_grid_fit(bases, y)
    i = int(np.argmin(rss))
    return np.array([coef[i, 0], N[i], K[i], coef[i, 1]])


EXP_OF_EXP = Model("exp_of_exp", ("A", "nbar", "kappa", "C"), _eoe_f, _eoe_jac, _eoe_guess)


# decaying sinusoid with slow baseline:
# A exp(-x/T2) cos(omega x + phi) + B0 + B1 exp(-x/Tb)

def _ds_f(x, p):
    A, T2, w, phi, B0, B1, Tb = (p[:, i:i + 1] for i in range(7))
    return A * np.exp(-x / T2) * np.cos(w * x + phi) + B0 + B1 * np.exp(-x / Tb)


def _ds_jac(x, p):
    A, T2, w, phi, B0, B1, Tb = (p[:, i:i + 1] for i in range(7))
    e = np.exp(-x / T2)
    c, s = np.cos(w * x + phi), np.sin(w * x + phi)
    eb = np.exp(-x / Tb)
    return np.stack([
        e * c, A * e * c * x / T2 ** 2, -A * e * s * x, -A * e * s,
        np.ones_like(e), eb, B1 * eb * x / Tb ** 2,
    ], axis=-1)


def dominant_frequency(x, y) -> float:
    """Angular frequency of the largest Fourier component of detrended data.

    Evaluates the discrete Fourier sum directly on a zero-padded grid so
    non-uniform sampling is handled the same way as uniform sampling.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    trend = np.polyval(np.polyfit(x, y, 2), x)
    z = y - trend
    span = float(np.ptp(x))
    # median spacing sets a pseudo-Nyquist limit; the grid step stays well
    # below the 2 pi / span width of a spectral peak
    w_max = math.pi / float(np.median(np.diff(np.unique(x))))
    n_grid = max(16 * len(x), int(math.ceil(8 * w_max * span / math.pi)))
    ws = np.linspace(0.5 * math.pi / span, w_max, min(n_grid, 200_000))
    power = np.abs(np.exp(-1j * ws[:, None] * x[None, :]) @ z) ** 2
    return float(ws[int(np.argmax(power))])


def _ds_guess_factory(fixed_tb: float | None):
    def guess(x, y):
        span = float(np.ptp(x))
        w0 = dominant_frequency(x, y)
        dw = 2 * math.pi / span
        ws = np.linspace(max(w0 - dw, 0.25 * w0), w0 + dw, 13)
        t2s = np.geomspace(0.05 * span, 20 * span, 30)
        tbs = np.array([fixed_tb]) if fixed_tb is not None else np.geomspace(0.2 * span, 20 * span, 12)
        W, T, TB = (g.ravel() for g in np.meshgrid(ws, t2s, tbs, indexing="ij"))
        e = np.exp(-x[None, :] / T[:, None])
        ph = W[:, None] * x[None, :]
        bases = np.stack([e * np.cos(ph), e * np.sin(ph), np.ones_like(e),
                          np.exp(-x[None, :] / TB[:, None])], axis=-1)
        coef, rss = _linear_grid_fit(bases, y)
        i = int(np.argmin(rss))
        a, b = coef[i, 0], coef[i, 1]
        # a cos + b sin = A cos(wx + phi) with A cos(phi) = a, -A sin(phi) = b
        return np.array([math.hypot(a, b), T[i], W[i], math.atan2(-b, a), coef[i, 2], coef[i, 3], TB[i]])
    return guess


def _ds_canonical(p):
    p = p.copy()
    neg = p[:, 0] < 0
    p[neg, 0] *= -1
    p[neg, 3] += math.pi
    p[:, 3] = (p[:, 3] + math.pi) % (2 * math.pi) - math.pi
    return p


def decaying_sinusoid_model(fixed_tb: float | None = None) -> Model:
    return Model("decaying_sinusoid", ("A", "T2", "omega", "phi", "B0", "B1", "Tb"),
                 _ds_f, _ds_jac, _ds_guess_factory(fixed_tb), _ds_canonical)


# -- results ----------------------------------------------------------------------

@dataclass
class FitResult:
    """Point estimates, 1-sigma bootstrap intervals and fit diagnostics.

    ``values`` holds the fitted parameters and any derived quantities;
    ``parameters`` lists the ones that were free in the fit.
    """

    model: str
    parameters: tuple
    values: dict
    units: dict
    residual_norm: float
    grad_norm: float
    n_iter: int
    x: np.ndarray
    y: np.ndarray
    yfit: np.ndarray
    stderr: np.ndarray | None = None
    intervals: dict = field(default_factory=dict)
    fixed: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    _model: Model | None = field(default=None, repr=False)
    _derive: Callable | None = field(default=None, repr=False)

    def __getitem__(self, name):
        return self.values[name]

    def interval(self, name) -> tuple:
        return self.intervals[name]

    def predict(self, x) -> np.ndarray:
        p = self._full_vector(np.array([[self.values[n] for n in self.parameters]]))
        return self._model.f(np.asarray(x, float), p)[0]

    def _full_vector(self, free: np.ndarray) -> np.ndarray:
        names = self._model.names
        out = np.empty((free.shape[0], len(names)))
        k = 0
        for j, n in enumerate(names):
            if n in self.fixed:
                out[:, j] = self.fixed[n]
            else:
                out[:, j] = free[:, k]
                k += 1
        return out

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "parameters": {n: {"value": _num(self.values[n]), "unit": self.units.get(n, ""),
                               "interval_1sigma": [_num(v) for v in self.intervals[n]] if n in self.intervals else None}
                           for n in self.values},
            "fixed": {k: _num(v) for k, v in self.fixed.items()},
            "residual_norm": _num(self.residual_norm),
            "grad_norm": _num(self.grad_norm),
            "n_iter": int(self.n_iter),
            "n_points": int(len(self.x)),
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else str(v)


# -- fitting ------------------------------------------------------------------------

def _prepare(x, y, n_params, min_points=None):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise InsufficientData(f"x and y lengths differ ({x.size} vs {y.size})")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InsufficientData("data contain non-finite values")
    need = 3 * n_params if min_points is None else max(min_points, n_params + 1)
    if x.size < need:
        raise InsufficientData(f"{x.size} points for {n_params} free parameters; need at least {need}")
    order = np.argsort(x, kind="stable")
    return x[order], y[order]


def _free_funcs(model: Model, x, y, fixed: dict):
    free_idx = [j for j, n in enumerate(model.names) if n not in fixed]
    fixed_idx = [(j, v) for j, n in enumerate(model.names) for k, v in fixed.items() if k == n]
    P = len(model.names)

    def full(pf):
        p = np.empty((pf.shape[0], P))
        p[:, free_idx] = pf
        for j, v in fixed_idx:
            p[:, j] = v
        return p

    def fun(pf, rows=None):
        return model.f(x, full(pf)) - y

    def jac(pf, rows=None):
        return model.jac(x, full(pf))[..., free_idx]

    return free_idx, full, fun, jac


def fit_model(model: Model, x, y, *, p0=None, fixed: dict | None = None, units: dict | None = None,
              derive: Callable | None = None, stderr=None, max_iter: int = 400,
              gtol: float = GTOL, meta: dict | None = None, min_points: int | None = None) -> FitResult:
    """Damped least-squares fit of ``model`` with an automatic initial guess.

    ``fixed`` pins parameters by name. ``derive`` maps a dict of parameter
    arrays to a dict of derived-quantity arrays; derived values are reported
    alongside the parameters and get bootstrap intervals too.
    """
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(model.names)
    if unknown:
        raise ValueError(f"cannot fix unknown parameters {sorted(unknown)}")
    n_free = len(model.names) - len(fixed)
    x, y = _prepare(x, y, n_free, min_points)
    free_idx, full, fun, jac = _free_funcs(model, x, y, fixed)
    if p0 is None:
        p0 = model.guess(x, y)
        for j, n in enumerate(model.names):
            if n in fixed:
                p0[j] = fixed[n]
    p0 = np.asarray(p0, dtype=float)[free_idx]
    y_scale = float(np.linalg.norm(y))
    res = levenberg_marquardt(fun, jac, p0[None, :], max_iter=max_iter, gtol=gtol, y_scale=y_scale)
    pf = res.x
    if not np.all(np.isfinite(pf)):
        raise FitError(f"{model.name} fit diverged")
    cond = column_condition(res.jac)[0]
    if not cond < MAX_CONDITION:
        names = [model.names[j] for j in free_idx]
        cn = np.linalg.norm(res.jac[0], axis=0)
        worst = names[int(np.argmin(cn))] if np.any(cn == 0) else ", ".join(names)
        raise FitError(f"{model.name} fit: rank-deficient Jacobian (condition {cond:.3g}); check {worst}")
    if not res.converged[0]:
        J, r = res.jac[0], res.residuals[0]
        score = np.abs(J.T @ r) / np.maximum(np.linalg.norm(J, axis=0), 1e-300)
        worst = model.names[free_idx[int(np.argmax(score))]]
        raise FitError(f"{model.name} fit did not converge after {res.n_iter} iterations "
                       f"(scaled gradient {res.grad_norm[0]:.3g}); parameter {worst} is least settled")
    p = full(pf)
    if model.canonical is not None:
        p = model.canonical(p)
    names_free = tuple(model.names[j] for j in free_idx)
    values = {n: float(p[0, j]) for j, n in enumerate(model.names) if n not in fixed}
    if derive is not None:
        values.update({k: float(np.asarray(v).ravel()[0])
                       for k, v in derive({n: p[:, j] for j, n in enumerate(model.names)}).items()})
    yfit = model.f(x, p)[0]
    return FitResult(
        model=model.name, parameters=names_free, values=values, units=dict(units or {}),
        residual_norm=float(np.linalg.norm(y - yfit)), grad_norm=float(res.grad_norm[0]),
        n_iter=res.n_iter, x=x, y=y, yfit=yfit,
        stderr=None if stderr is None else np.asarray(stderr, float),
        fixed=fixed, meta=dict(meta or {}), _model=model, _derive=derive,
    )


def bootstrap_samples(fit: FitResult, resamples: int = 1000, seed=0) -> dict:
    """Refit ``resamples`` residual-bootstrap data sets; returns name -> samples.

    Residuals are centred and inflated by sqrt(n / (n - p)) to undo the
    shrinkage of least-squares residuals before resampling.
    """
    if resamples < 2:
        raise ValueError("need at least 2 bootstrap resamples")
    model = fit._model
    x, y = fit.x, fit.y
    n, k = len(x), len(fit.parameters)
    r = (y - fit.yfit)
    r = (r - r.mean()) * math.sqrt(n / (n - k))
    rng = np.random.default_rng(seed)
    ystar = fit.yfit[None, :] + r[rng.integers(0, n, size=(resamples, n))]
    free_idx, full, _, jac = _free_funcs(model, x, y, fit.fixed)

    p_hat = np.array([fit.values[nm] for nm in fit.parameters])
    p0 = np.tile(p_hat, (resamples, 1))
    res = _batched_refit(model, x, ystar, full, jac, p0)
    ok = np.all(np.isfinite(res), axis=1)
    if ok.mean() < 0.5:
        raise FitError(f"bootstrap: only {ok.sum()} of {resamples} refits succeeded")
    p = full(res[ok])
    if model.canonical is not None:
        p = model.canonical(p)
    samples = {nm: p[:, j] for j, nm in enumerate(model.names) if nm not in fit.fixed}
    if fit._derive is not None:
        samples.update({kk: np.asarray(v, float) for kk, v in
                        fit._derive({nm: p[:, j] for j, nm in enumerate(model.names)}).items()})
    return samples


def _batched_refit(model, x, ystar, full, jac, p0):
    """LM on each row of ``ystar`` starting from ``p0``; failed rows are NaN."""
    def fun(p, rows):
        return model.f(x, full(p)) - ystar[rows]

    res = levenberg_marquardt(fun, jac, p0, y_scale=np.linalg.norm(ystar, axis=1))
    out = res.x.copy()
    out[~np.all(np.isfinite(res.residuals), axis=1)] = np.nan
    return out


def bootstrap_ci(fit: FitResult, resamples: int = 1000, seed=0, level: float = ONE_SIGMA) -> dict:
    """Percentile intervals (default 1 sigma) from the residual bootstrap.

    Intervals are widened, if needed, to contain the point estimate.
    """
    samples = bootstrap_samples(fit, resamples, seed)
    lo_q, hi_q = 50 * (1 - level), 50 * (1 + level)
    out = {}
    for name, s in samples.items():
        lo, hi = np.percentile(s, [lo_q, hi_q])
        est = fit.values[name]
        out[name] = (float(min(lo, est)), float(max(hi, est)))
    return out


def with_bootstrap(fit: FitResult, resamples: int = 1000, seed=0) -> FitResult:
    return replace(fit, intervals=bootstrap_ci(fit, resamples, seed), _model=fit._model, _derive=fit._derive)


# -- public fit entry points ---------------------------------------------------------------

def fit_exponential(x, y, **kw) -> FitResult:
    """y = A exp(-x / tau) + C."""
    return fit_model(EXPONENTIAL, x, y, **kw)


def fit_exp_of_exp(x, y, **kw) -> FitResult:
    """y = A exp(-nbar exp(-kappa x)) + C."""
    return fit_model(EXP_OF_EXP, x, y, **kw)


def fit_decaying_sinusoid(x, y, *, baseline_tau: float | None = None, **kw) -> FitResult:
    """y = A exp(-x/T2) cos(omega x + phi) + B0 + B1 exp(-x/Tb).

    ``baseline_tau`` pins Tb, e.g. to a separately measured energy-decay time.
    """
    fixed = dict(kw.pop("fixed", None) or {})
    if baseline_tau is not None:
        fixed["Tb"] = float(baseline_tau)
    return fit_model(decaying_sinusoid_model(fixed.get("Tb")), x, y, fixed=fixed, **kw)
