"""Gaussian drive segments and the cavity state-preparation sequences."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .errors import SelectivityError, TruncationError
from .lindblad import Delay, DriveTerm, PulseSegment, Schedule
from .operators import SpaceSignature
from .system import QUBIT, STORAGE, TWO_PI, SystemParams

DISPLACEMENT_SIGMA = 0.040  # us
SELECTIVE_SIGMA = 1.5  # us
EDGE_TAPER = 0.5  # cosine taper width, in units of sigma
SELECTIVITY_MIN = 3.0  # minimum 2 pi chi sigma_t

FOCK_ONE_DISPLACEMENTS = (1.14, -0.58)
SUPERPOSITION_DISPLACEMENTS = (0.56, -0.24)
ANALYSIS_MAGNITUDE = 0.8


def gaussian_shape(t, sigma: float, truncation: float = 2.0):
    """Unit-peak Gaussian on [0, 2 truncation sigma] with cosine-tapered edges."""
    t = np.asarray(t, dtype=float)
    half = truncation * sigma
    u = np.abs(t - half)
    g = np.exp(-0.5 * (u / sigma) ** 2)
    taper = EDGE_TAPER * sigma
    start = half - taper
    w = np.where(u > start, 0.5 * (1 + np.cos(np.pi * np.clip(u - start, 0, taper) / taper)), 1.0)
    return np.where(u <= half, g * w, 0.0)


@lru_cache(maxsize=None)
def shape_area(sigma: float, truncation: float = 2.0) -> float:
    val, _ = integrate.quad(lambda t: float(gaussian_shape(t, sigma, truncation)), 0.0,
                            2 * truncation * sigma, limit=200, epsabs=1e-14, epsrel=1e-13)
    return val


@dataclass(frozen=True)
class GaussianEnvelope:
    """Complex envelope ``amplitude * exp(i phase) * shape(t)``.

    ``amplitude`` is the peak drive strength in rad/us; ``detuning`` in Hz is
    carried to the :class:`DriveTerm` built from it.
    """

    amplitude: float
    sigma_t: float
    truncation: float = 2.0
    phase: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        if not self.sigma_t > 0:
            raise ValueError("sigma_t must be positive")
        if self.truncation < 2:
            raise ValueError("truncation must be >= 2 sigma")

    @property
    def duration(self) -> float:
        return 2 * self.truncation * self.sigma_t

    def __call__(self, t) -> complex:
        return self.amplitude * cmath.exp(1j * self.phase) * float(gaussian_shape(t, self.sigma_t, self.truncation))

    def area(self) -> complex:
        """Integral of the complex envelope over the pulse (rad)."""
        return self.amplitude * cmath.exp(1j * self.phase) * shape_area(self.sigma_t, self.truncation)

    def segment(self, mode: int, label: str = "", lowering=None) -> PulseSegment:
        return PulseSegment(self.duration, (DriveTerm(mode, self, self.detuning, lowering),),
                            max_step=self.sigma_t, label=label)


def displacement_pulse(beta: complex, storage_dim: int | None = None,
                       sigma_t: float = DISPLACEMENT_SIGMA, truncation: float = 2.0):
    """Storage drive that displaces a lossless, uncoupled cavity by ``beta``.

    With ``H = e(t) a^dag + e(t)^* a`` the displacement is ``-i * integral(e)``,
    so the envelope carries ``i * beta``. ``beta == 0`` gives a no-op segment.
    """
    beta = complex(beta)
    if storage_dim is not None and abs(beta) ** 2 > storage_dim / 3:
        raise TruncationError(f"|beta|^2 = {abs(beta) ** 2:.3g} exceeds budget {storage_dim / 3:.3g}")
    if beta == 0:
        return Delay(0.0, label="D(0)")
    drive = 1j * beta
    env = GaussianEnvelope(abs(drive) / shape_area(sigma_t, truncation), sigma_t, truncation,
                           phase=cmath.phase(drive))
    return env.segment(STORAGE, label=f"D({beta:.3g})")


def _qubit_rotation_angle(amplitude: float, sigma_t: float, truncation: float, steps: int = 4000) -> float:
    """Rotation angle of a resonant, dissipationless two-level qubit.

    Propagates the 2x2 Schroedinger equation piecewise (midpoint samples) and
    reads the angle from the unitary, unwrapped through pi.
    """
    dt = 2 * truncation * sigma_t / steps
    tm = (np.arange(steps) + 0.5) * dt
    eps = amplitude * gaussian_shape(tm, sigma_t, truncation)
    u = np.eye(2, dtype=complex)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    for e in eps:
        # exp(-i e dt sigma_x)
        c, s = math.cos(e * dt), math.sin(e * dt)
        u = (c * np.eye(2) - 1j * s * sx) @ u
    half = math.atan2(-u[1, 0].imag, u[0, 0].real)
    return 2 * (half % (2 * math.pi))


@lru_cache(maxsize=None)
def calibrate_rotation(angle: float, sigma_t: float, truncation: float = 2.0) -> float:
    """Peak amplitude (rad/us) giving ``angle`` on the dissipationless qubit."""
    guess = angle / (2 * shape_area(sigma_t, truncation))
    return optimize.brentq(
        lambda amp: _qubit_rotation_angle(amp, sigma_t, truncation) - angle,
        0.8 * guess, 1.2 * guess, xtol=1e-14, rtol=1e-13,
    )


def selectivity(params: SystemParams, sigma_t: float) -> float:
    """2 pi chi sigma_t: dispersive shift over the pulse bandwidth."""
    return TWO_PI * params.chi_sq * sigma_t * 1e-6


def projected_transition(signature, n: int) -> np.ndarray:
    """|g, n><e, n| on the full space: a drive that only sees one peak."""
    sig = signature
    op = np.zeros((sig.total, sig.total), dtype=complex)
    rest = [0] * (len(sig.dims) - 2)
    op[sig.index([n, 0, *rest]), sig.index([n, 1, *rest])] = 1.0
    return op


def selective_qubit_pulse(angle: float, target_n: int, params: SystemParams,
                          sigma_t: float = SELECTIVE_SIGMA, truncation: float = 2.0,
                          phase: float = 0.0, check: bool = True,
                          ideal_signature=None) -> PulseSegment:
    """Qubit rotation conditioned on the storage holding ``target_n`` photons.

    The drive is a single Gaussian tone on the ``target_n`` peak, so other
    photon numbers see it off resonance and pick up AC Stark phases. Passing
    ``ideal_signature`` instead drives only the projected |g,n>-|e,n>
    transition, i.e. a perfectly selective gate.
    """
    if check and selectivity(params, sigma_t) < SELECTIVITY_MIN:
        raise SelectivityError(
            f"2 pi chi sigma_t = {selectivity(params, sigma_t):.2f} < {SELECTIVITY_MIN}; "
            "pulse bandwidth overlaps neighbouring photon-number peaks"
        )
    amp = calibrate_rotation(float(angle), float(sigma_t), float(truncation))
    env = GaussianEnvelope(amp, sigma_t, truncation, phase=phase, detuning=-target_n * params.chi_sq)
    lowering = None if ideal_signature is None else projected_transition(ideal_signature, target_n)
    return env.segment(QUBIT, label=f"R{angle / math.pi:.3g}pi|n={target_n}", lowering=lowering)


def _two_displacement_sequence(b1, b2, params, storage_dim, sigma_sel, check, ideal_gate, qubit_dim):
    ideal_sig = SpaceSignature((storage_dim, qubit_dim)) if ideal_gate else None
    return Schedule((
        displacement_pulse(b1, storage_dim),
        selective_qubit_pulse(2 * math.pi, 0, params, sigma_t=sigma_sel, check=check,
                              ideal_signature=ideal_sig),
        displacement_pulse(b2, storage_dim),
    ))


def fock_one_sequence(params: SystemParams, storage_dim: int = 6, sigma_sel: float = SELECTIVE_SIGMA,
                      check: bool = True, ideal_gate: bool = False, qubit_dim: int = 2) -> Schedule:
    """D(1.14), 2 pi on the zero-photon peak, D(-0.58): prepares |1>."""
    if storage_dim < 6:
        raise TruncationError("Fock-state preparation needs storage dim >= 6")
    return _two_displacement_sequence(*FOCK_ONE_DISPLACEMENTS, params, storage_dim, sigma_sel,
                                      check, ideal_gate, qubit_dim)


def superposition_sequence(params: SystemParams, storage_dim: int = 6, sigma_sel: float = SELECTIVE_SIGMA,
                           check: bool = True, ideal_gate: bool = False, qubit_dim: int = 2) -> Schedule:
    """D(0.56), 2 pi on the zero-photon peak, D(-0.24): prepares (|0> - |1>)/sqrt 2."""
    if storage_dim < 6:
        raise TruncationError("superposition preparation needs storage dim >= 6")
    return _two_displacement_sequence(*SUPERPOSITION_DISPLACEMENTS, params, storage_dim, sigma_sel,
                                      check, ideal_gate, qubit_dim)


def analysis_displacement(phase: float, magnitude: float = ANALYSIS_MAGNITUDE):
    """Final Ramsey displacement ``magnitude * exp(i phase)``."""
    return displacement_pulse(magnitude * cmath.exp(1j * phase))
