"""Closed-form decoherence and coupling models.

Frequencies (``chi``, ``g``, ``Delta``, ``alpha``) are ordinary Hz, rates are
1/s and times are seconds unless a name says otherwise. The conversion to
angular frequency happens inside each function.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentRates

TWO_PI = 2.0 * math.pi


def vacuum_return_probability(t, beta0: complex, kappa: float):
    """P_vac(t) = exp(-|beta0|^2 exp(-kappa t)) for a decaying coherent state."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    out = np.exp(-abs(beta0) ** 2 * np.exp(-kappa * t))
    return float(out) if out.ndim == 0 else out


def inverse_purcell(g: float, Delta: float, gamma: float) -> float:
    """Decay inherited by the cavity through hybridisation: (g/Delta)^2 gamma."""
    if Delta == 0:
        raise ZeroDivisionError("detuning Delta = 0: dispersive approximation undefined")
    return (g / Delta) ** 2 * gamma


def g_from_chi(chi: float, alpha: float, Delta: float) -> float:
    """Coupling g (Hz) from the transmon dispersive relation.

    Uses chi = 2 g^2 alpha / (Delta (Delta - alpha)) with alpha the qubit
    anharmonicity (self-Kerr) and Delta = omega_q - omega_s. Other references
    drop the factor 2 or flip the sign of alpha; this is the convention that
    reproduces the ~1/600 hybridisation ratio of the device.
    """
    if Delta == 0:
        raise ZeroDivisionError("Delta = 0")
    if Delta == alpha:
        raise ZeroDivisionError("Delta = alpha")
    if alpha == 0:
        raise ZeroDivisionError("alpha = 0: no dispersive shift for a linear mode")
    g2 = chi * Delta * (Delta - alpha) / (2.0 * alpha)
    if g2 < 0:
        raise ValueError("chi, alpha and Delta give g^2 < 0 in this convention")
    return math.sqrt(g2)


def dephasing_exact(chi: float, gamma: float, p_e: float) -> float:
    """Shot-noise dephasing of a cavity from thermal qubit jumps.

    Gamma_phi = gamma/2 Re[sqrt((1 + 2 i chi_ang/gamma)^2 + 8 i chi_ang p_e/gamma) - 1]
    with chi_ang = 2 pi chi.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not 0.0 <= p_e < 1.0:
        raise ValueError("p_e must lie in [0, 1)")
    x = TWO_PI * chi / gamma
    root = cmath.sqrt((1 + 2j * x) ** 2 + 8j * x * p_e)
    # principal branch has Re >= 0, which is the physical root
    return max(0.0, 0.5 * gamma * (root.real - 1.0))


def dephasing_approx(gamma: float, p_e: float) -> float:
    """Strong-dispersive limit of :func:`dephasing_exact`: P_e * gamma."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return p_e * gamma


def dephasing_telegraph(chi: float, gamma_down: float, gamma_up: float) -> float:
    """Dephasing from a two-state random telegraph frequency shift.

    The coherence of the cavity |0>+|1> superposition, dressed by a qubit that
    jumps down at ``gamma_down`` and up at ``gamma_up``, decays with the slower
    eigenvalue of the 2x2 rate matrix. This is what a Lindblad simulation with
    explicit qubit jump operators produces; it agrees with
    :func:`dephasing_exact` to first order in the thermal population.
    """
    w = TWO_PI * chi
    m = np.array([[-gamma_up, gamma_down], [gamma_up, -gamma_down + 1j * w]])
    ev = np.linalg.eigvals(m)
    return float(-np.max(ev.real))


def quadratic_correction(chi: float, gamma: float) -> float:
    """Relative size (gamma / 2 pi chi)^2 of the term dropped by the approximation."""
    return (gamma / (TWO_PI * chi)) ** 2


def t2_compose(T1: float, Gamma_phi: float) -> float:
    """1/T2 = 1/(2 T1) + Gamma_phi."""
    if not T1 > 0:
        raise ValueError("T1 must be positive")
    if Gamma_phi < 0:
        raise ValueError("Gamma_phi must be >= 0")
    return 1.0 / (0.5 / T1 + Gamma_phi)


def t_phi_from(T1: float, T2: float) -> float:
    """Pure dephasing time from 1/T_phi = 1/T2 - 1/(2 T1); any common unit."""
    if not (T1 > 0 and T2 > 0):
        raise ValueError("T1 and T2 must be positive")
    rate = 1.0 / T2 - 0.5 / T1
    if rate < 0:
        raise InconsistentRates(f"T2 = {T2} exceeds 2*T1 = {2 * T1}")
    return math.inf if rate == 0 else 1.0 / rate


@dataclass(frozen=True)
class DecoherenceBudget:
    """Cavity-memory error budget. Times in ms, rates in 1/s, g and Delta in Hz."""

    T1: float
    T2: float
    T_phi: float
    kappa_0: float
    kappa_q: float
    kappa_tot: float
    Gamma_phi: float
    Gamma_phi_0: float
    g: float = 0.0
    Delta: float = 0.0

    @classmethod
    def from_rates(cls, kappa_0: float, kappa_q: float = 0.0, Gamma_phi: float = 0.0,
                   Gamma_phi_0: float = 0.0, g: float = 0.0, Delta: float = 0.0) -> "DecoherenceBudget":
        for name, v in (("kappa_0", kappa_0), ("kappa_q", kappa_q),
                        ("Gamma_phi", Gamma_phi), ("Gamma_phi_0", Gamma_phi_0)):
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0")
        kappa_tot = kappa_0 + kappa_q
        if kappa_tot <= 0:
            raise ValueError("total decay rate must be positive")
        phi = Gamma_phi + Gamma_phi_0
        T1 = 1e3 / kappa_tot
        T2 = 1e3 / (0.5 * kappa_tot + phi)
        T_phi = math.inf if phi == 0 else 1e3 / phi
        return cls(T1, T2, T_phi, kappa_0, kappa_q, kappa_tot, Gamma_phi, Gamma_phi_0, g, Delta)

    @classmethod
    def from_system(cls, kappa_0: float, chi: float, alpha: float, Delta: float,
                    gamma: float, p_e: float, Gamma_phi_0: float = 0.0) -> "DecoherenceBudget":
        """Budget predicted from device parameters (inverse Purcell + thermal shot noise)."""
        g = g_from_chi(chi, alpha, Delta)
        return cls.from_rates(kappa_0, inverse_purcell(g, Delta, gamma),
                              dephasing_exact(chi, gamma, p_e), Gamma_phi_0, g, Delta)


__all__ = [
    "vacuum_return_probability", "inverse_purcell", "g_from_chi", "dephasing_exact",
    "dephasing_approx", "dephasing_telegraph", "quadratic_correction", "t2_compose",
    "t_phi_from", "DecoherenceBudget",
]
