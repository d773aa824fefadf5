"""Microwave design calculators and shunt-resonator S21 fitting.

Lengths are in millimetres and frequencies in Hz unless noted.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import constants

from .errors import FitError, InsufficientData, NotEvanescent, ResolutionError
from .experiments.fitting import FitResult, Model, fit_model
from .lsq import levenberg_marquardt

C_MM_PER_S = constants.c * 1e3
X01 = 2.405  # first zero of J0, sets the TM01 cutoff


def cutoff_frequency(a_mm: float) -> float:
    """TM01 cutoff (Hz) of a circular waveguide of radius ``a_mm``."""
    if not a_mm > 0:
        raise ValueError("radius must be positive")
    return X01 * C_MM_PER_S / (2 * math.pi * a_mm)


def propagation_constant(f_hz: float, a_mm: float) -> complex:
    """beta = sqrt(k^2 - (x01/a)^2) in 1/mm; purely imaginary below cutoff."""
    if not (f_hz > 0 and a_mm > 0):
        raise ValueError("frequency and radius must be positive")
    k = 2 * math.pi * f_hz / C_MM_PER_S
    q = X01 / a_mm
    d = k * k - q * q
    return complex(math.sqrt(d), 0.0) if d >= 0 else complex(0.0, math.sqrt(-d))


def energy_suppression(z_mm: float, beta: complex) -> float:
    """Energy-density suppression exp(-2 |beta| z) of an evanescent mode."""
    beta = complex(beta)
    if abs(beta.real) > 1e-12 * max(abs(beta), 1e-300):
        raise NotEvanescent(f"beta = {beta} has a real part: the mode propagates")
    if z_mm < 0:
        raise ValueError("distance must be >= 0")
    return math.exp(-2.0 * abs(beta) * z_mm)


def quarter_wave_frequency(length_mm: float) -> float:
    """Estimate c / (4 l) of a lambda/4 line; ignores end loading."""
    if not length_mm > 0:
        raise ValueError("length must be positive")
    return C_MM_PER_S / (4.0 * length_mm)


def participation_bound(Q_int: float, p: float) -> float:
    """Lower bound Q_int * p on the quality factor of a lossy region."""
    if not (Q_int > 0 and p > 0):
        raise ValueError("Q_int and p must be positive")
    return Q_int * p


@dataclass(frozen=True)
class WaveguideGeometry:
    """Circular waveguide seal (radius ``a``, seal distance ``L``) and coax line length."""

    a: float = 5.0
    L: float = 23.0
    line: float = 20.0

    def __post_init__(self):
        for name in ("a", "L", "line"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def suppression(self, f_hz: float) -> float:
        return energy_suppression(self.L, propagation_constant(f_hz, self.a))

    def decay_length(self, f_hz: float) -> float:
        """1/|beta| in mm."""
        return 1.0 / abs(propagation_constant(f_hz, self.a))


@dataclass(frozen=True)
class SurfaceBudget:
    """Participation ratios and quality factors; material bounds via Q_int * p."""

    p_diel: float = 2e-7
    p_mag: float = 4e-5
    Q_int: float = 7e7
    Q_ext: float = 1e9

    def __post_init__(self):
        for name in ("p_diel", "p_mag"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        for name in ("Q_int", "Q_ext"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def Q_diel(self) -> float:
        return participation_bound(self.Q_int, self.p_diel)

    @property
    def Q_mag(self) -> float:
        return participation_bound(self.Q_int, self.p_mag)


# -- shunt resonator -------------------------------------------------------------------

def s21_shunt_model(f, f0: float, Q_int: float, Q_ext: float, phi: float = 0.0):
    """S21 = 1 - (Q_tot/Q_ext) e^{i phi} / (1 + 2 i Q_tot (f - f0)/f0)."""
    f = np.asarray(f, dtype=float)
    if math.isinf(Q_ext):
        return np.ones_like(f, dtype=complex)
    q_tot = 1.0 / (1.0 / Q_int + 1.0 / Q_ext)
    return 1.0 - (q_tot / Q_ext) * np.exp(1j * phi) / (1.0 + 2j * q_tot * (f - f0) / f0)


def synthetic_trace(f0: float, Q_int: float, Q_ext: float, phi: float = 0.0, n_points: int = 401,
                    span_linewidths: float = 10.0, snr_db: float | None = None, seed=0):
    """Frequencies and S21 centred on f0, optionally with complex Gaussian noise.

    The SNR compares the circle diameter Q_tot/Q_ext with the noise standard
    deviation of each quadrature.
    """
    q_tot = 1.0 / (1.0 / Q_int + 1.0 / Q_ext)
    f = f0 + np.linspace(-0.5, 0.5, n_points) * span_linewidths * f0 / q_tot
    s = s21_shunt_model(f, f0, Q_int, Q_ext, phi)
    if snr_db is not None:
        sigma = (q_tot / Q_ext) * 10 ** (-snr_db / 20)
        rng = np.random.default_rng(seed)
        s = s + sigma * (rng.standard_normal(n_points) + 1j * rng.standard_normal(n_points))
    return f, s


def kasa_circle(z: np.ndarray):
    """Algebraic least-squares circle through complex points: (centre, radius)."""
    z = np.asarray(z, dtype=complex)
    m = z.mean()
    scale = np.sqrt(np.mean(np.abs(z - m) ** 2))
    if not scale > 0:
        raise FitError("S21 trace is a single point: no circle")
    w = (z - m) / scale
    x, y = w.real, w.imag
    A = np.column_stack([x, y, np.ones_like(x)])
    b = -(x ** 2 + y ** 2)
    coef, _, rank, sv = np.linalg.lstsq(A, b, rcond=None)
    if rank < 3 or sv[-1] < 1e-10 * sv[0]:
        raise FitError("degenerate S21 trace: points are collinear, not a circle")
    cx, cy = -coef[0] / 2, -coef[1] / 2
    r2 = cx ** 2 + cy ** 2 - coef[2]
    if not r2 > 0:
        raise FitError("degenerate S21 trace: circle fit has no real radius")
    return m + scale * complex(cx, cy), scale * math.sqrt(r2)


def _phase_fit(x, theta, u0, q0):
    """Fit theta = theta0 - 2 arctan(2 Q (x - u0)) for (theta0, log Q, u0)."""
    p0 = np.array([[np.median(theta + 2 * np.arctan(2 * q0 * (x - u0))), math.log(q0), u0]])

    def fun(p, rows=None):
        return p[:, 0:1] - 2 * np.arctan(2 * np.exp(p[:, 1:2]) * (x - p[:, 2:3])) - theta

    def jac(p, rows=None):
        q = np.exp(p[:, 1:2])
        u = 2 * q * (x - p[:, 2:3])
        g = -2.0 / (1 + u ** 2)
        return np.stack([np.ones_like(u), g * u, g * (-2 * q)], axis=-1)

    res = levenberg_marquardt(fun, jac, p0, gtol=1e-12, y_scale=np.linalg.norm(theta))
    return res.x[0]


def _s21_model(x: np.ndarray) -> Model:
    """Stacked [Re, Im] model of S21 against fractional detuning x = (f - fr)/fr.

    Parameters: u0 = (f0 - fr)/fr, lq = ln Q_tot, d = Q_tot/Q_ext, phi.
    """
    m = x.size

    def parts(p):
        u0, lq, d, phi = (p[:, i:i + 1] for i in range(4))
        q = np.exp(lq)
        D = 1 + 2j * q * (x - u0)
        e = np.exp(1j * phi)
        return u0, q, d, e, D

    def f(_, p):
        _, _, d, e, D = parts(p)
        s = 1 - d * e / D
        return np.concatenate([s.real, s.imag], axis=1)

    def jac(_, p):
        u0, q, d, e, D = parts(p)
        dd = -e / D
        dphi = -1j * d * e / D
        dq = d * e * 2j * (x - u0) / D ** 2 * q
        du0 = d * e * (-2j * q) / D ** 2
        J = np.stack([du0, dq, dd, dphi], axis=-1)
        return np.concatenate([J.real, J.imag], axis=1)

    def guess(_, y):
        z = y[:m] + 1j * y[m:]
        c, r = kasa_circle(z)
        far = int(np.argmax(np.abs(z - 1)))
        d0 = 2 * r
        phi0 = float(np.angle(1 - c))
        depth = np.abs(z - 1)
        half = depth >= depth[far] / math.sqrt(2)
        width = float(np.ptp(x[half])) if half.sum() > 1 else float(np.ptp(x)) / 10
        q0 = 1.0 / max(width, 1e-300)
        theta = np.unwrap(np.angle(z - c))
        _, lq, u0 = _phase_fit(x, theta, x[far], q0)
        return np.array([u0, lq, d0, phi0])

    return Model("s21_shunt", ("u0", "lq", "d", "phi"), f, jac, guess)


def s21_circle_fit(freq_hz, s21, min_linewidths: float = 3.0) -> FitResult:
    """Recover f0, Q_int and Q_ext from a shunt-resonator trace.

    Starts from an algebraic circle fit (diameter and rotation) and a fit of
    the phase around the circle centre (f0 and Q_tot), then refines all
    parameters by damped least squares on the complex model.
    """
    f = np.asarray(freq_hz, dtype=float)
    z = np.asarray(s21, dtype=complex)
    if f.shape != z.shape:
        raise InsufficientData("frequency and S21 arrays differ in length")
    if f.size < 50:
        raise InsufficientData(f"S21 trace has {f.size} points; need at least 50")
    order = np.argsort(f)
    f, z = f[order], z[order]
    fr = float(np.median(f))
    x = (f - fr) / fr
    model = _s21_model(x)
    y = np.concatenate([z.real, z.imag])

    def derive(v):
        q = np.exp(v["lq"])
        d = v["d"]
        return {"f0_hz": fr * (1 + v["u0"]), "Q_tot": q, "Q_ext": q / d,
                "Q_int": q / (1 - d), "diameter": d}

    units = {"u0": "", "lq": "", "d": "", "phi": "rad", "f0_hz": "Hz", "Q_tot": "", "Q_ext": "",
             "Q_int": "", "diameter": ""}
    try:
        fit = fit_model(model, np.arange(y.size, dtype=float), y, units=units, derive=derive,
                        meta={"kind": "s21", "f_ref_hz": fr})
    except np.linalg.LinAlgError as exc:
        raise FitError(f"degenerate S21 trace: {exc}") from exc
    d = fit["d"]
    if not 0 < d < 1:
        raise FitError(f"circle diameter {d:.4g} outside (0, 1): not a shunt-resonator response")
    span_lw = float(np.ptp(f)) / (fit["f0_hz"] / fit["Q_tot"])
    if span_lw < min_linewidths:
        raise ResolutionError(f"trace spans {span_lw:.2f} linewidths; need >= {min_linewidths}")
    fit.meta["span_linewidths"] = span_lw
    return fit


def read_s21_csv(path):
    """Read a VNA trace with columns freq_hz, re_s21, im_s21."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise InsufficientData(f"cannot read {path}: {exc}") from exc
    need = {"freq_hz", "re_s21", "im_s21"}
    if not rows or not need <= set(rows[0]):
        raise InsufficientData(f"S21 CSV must have columns {sorted(need)}")
    try:
        f = np.array([float(r["freq_hz"]) for r in rows])
        s = np.array([complex(float(r["re_s21"]), float(r["im_s21"])) for r in rows])
    except (TypeError, ValueError) as exc:
        raise InsufficientData(f"malformed number in {path}: {exc}") from exc
    return f, s


def write_s21_csv(path, f, s21):
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz", "re_s21", "im_s21"])
        for fi, si in zip(f, s21):
            w.writerow([repr(float(fi)), repr(float(si.real)), repr(float(si.imag))])


__all__ = [
    "C_MM_PER_S", "X01", "cutoff_frequency", "propagation_constant", "energy_suppression",
    "quarter_wave_frequency", "participation_bound", "WaveguideGeometry", "SurfaceBudget",
    "s21_shunt_model", "synthetic_trace", "kasa_circle", "s21_circle_fit", "read_s21_csv",
    "write_s21_csv",
]
