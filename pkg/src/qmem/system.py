"""Physical parameters, Hamiltonian and dissipation channels of the
storage-cavity / transmon / readout-cavity system.

Parameters are stored in laboratory units: frequencies, cross-Kerr and
self-Kerr in Hz (ordinary frequency), rates in 1/s. Simulation objects are
produced in the simulator's internal units, time in microseconds and angular
rates in rad/us.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
from scipy import constants

from .errors import ConfigError, InvalidPopulation, SignatureMismatch
from .operators import Operator, SpaceSignature, annihilation, embed

TWO_PI = 2.0 * math.pi
US = 1e-6  # seconds per internal time unit
HZ_TO_RAD_PER_US = TWO_PI * US

STORAGE, QUBIT, READOUT = 0, 1, 2


@dataclass(frozen=True)
class SystemParams:
    omega_s: float = 4.250e9
    omega_q: float = 7.906e9
    omega_r: float = 9.777e9
    chi_sq: float = 4.99e5
    chi_rq: float = 8.25e5
    chi_sr: float = 1.60e3
    K_s: float = 4.50e2
    K_q: float = 1.46e8
    K_r: float = 1.20e3
    kappa: float = TWO_PI * 120.0
    kappa_ext: float = TWO_PI * 1.0
    gamma: float = 1.0 / 6.1e-6
    gamma_phi_q: float = 1.0 / 10e-6 - 0.5 / 6.1e-6
    P_e: float = 0.008
    kappa_r: float = 0.0
    Gamma_phi_0: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "kappa_ext", "gamma", "gamma_phi_q", "kappa_r", "Gamma_phi_0"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"rate {name} = {v!r} must be finite and >= 0")
        if not 0.0 <= self.P_e < 0.5:
            raise InvalidPopulation(f"P_e = {self.P_e!r} outside [0, 0.5)")

    @property
    def gamma_up(self) -> float:
        """Thermal excitation rate that makes P_e the qubit steady state."""
        return self.gamma * self.P_e / (1.0 - self.P_e)

    @property
    def t1q(self) -> float:
        return 1.0 / self.gamma if self.gamma > 0 else math.inf

    @property
    def t2q(self) -> float:
        rate = 0.5 * self.gamma + self.gamma_phi_q
        return 1.0 / rate if rate > 0 else math.inf

    def strong_dispersive(self) -> bool:
        return TWO_PI * self.chi_sq > self.gamma

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    @classmethod
    def from_times(cls, t1q: float, t2q: float, **kw) -> "SystemParams":
        if t2q > 2 * t1q:
            raise ConfigError(f"T2q = {t2q} exceeds 2*T1q = {2 * t1q}")
        return cls(gamma=1.0 / t1q, gamma_phi_q=1.0 / t2q - 0.5 / t1q, **kw)

    def cache_key(self) -> tuple:
        return tuple(float(getattr(self, f.name)) for f in fields(self))


DEVICE_PARAMS = SystemParams()

# JSON config keys; file units are ordinary Hz and seconds
CONFIG_KEYS = (
    "omega_s_hz", "omega_q_hz", "omega_r_hz", "chi_sq_hz", "chi_rq_hz", "chi_sr_hz",
    "k_s_hz", "k_q_hz", "k_r_hz", "kappa_hz", "t1q_s", "t2q_s", "p_e", "gamma_phi0_hz",
)


def params_from_dict(cfg: dict) -> SystemParams:
    """Build parameters from the JSON schema (ordinary Hz, seconds)."""
    missing = [k for k in CONFIG_KEYS if k not in cfg]
    if missing:
        raise ConfigError(f"missing config key: {missing[0]}")
    unknown = sorted(set(cfg) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key: {unknown[0]}")
    try:
        v = {k: float(cfg[k]) for k in CONFIG_KEYS}
    except (TypeError, ValueError) as exc:
        bad = next(k for k in CONFIG_KEYS if not _is_number(cfg[k]))
        raise ConfigError(f"config key {bad} is not a number") from exc
    for k, x in v.items():
        if not math.isfinite(x):
            raise ConfigError(f"config key {k} is not finite")
    if v["t1q_s"] <= 0 or v["t2q_s"] <= 0:
        raise ConfigError("config keys t1q_s and t2q_s must be positive")
    if v["t2q_s"] > 2 * v["t1q_s"]:
        raise ConfigError("config key t2q_s exceeds 2 * t1q_s")
    try:
        return SystemParams(
            omega_s=v["omega_s_hz"], omega_q=v["omega_q_hz"], omega_r=v["omega_r_hz"],
            chi_sq=v["chi_sq_hz"], chi_rq=v["chi_rq_hz"], chi_sr=v["chi_sr_hz"],
            K_s=v["k_s_hz"], K_q=v["k_q_hz"], K_r=v["k_r_hz"],
            kappa=TWO_PI * v["kappa_hz"],
            gamma=1.0 / v["t1q_s"],
            gamma_phi_q=1.0 / v["t2q_s"] - 0.5 / v["t1q_s"],
            P_e=v["p_e"],
            Gamma_phi_0=TWO_PI * v["gamma_phi0_hz"],
        )
    except ValueError as exc:
        key = "p_e" if isinstance(exc, InvalidPopulation) else "kappa_hz"
        raise ConfigError(f"config key {key}: {exc}") from exc


def _is_number(x) -> bool:
    try:
        float(x)
    except (TypeError, ValueError):
        return False
    return not isinstance(x, bool)


def params_to_dict(p: SystemParams) -> dict:
    return {
        "omega_s_hz": p.omega_s, "omega_q_hz": p.omega_q, "omega_r_hz": p.omega_r,
        "chi_sq_hz": p.chi_sq, "chi_rq_hz": p.chi_rq, "chi_sr_hz": p.chi_sr,
        "k_s_hz": p.K_s, "k_q_hz": p.K_q, "k_r_hz": p.K_r,
        "kappa_hz": p.kappa / TWO_PI, "t1q_s": p.t1q, "t2q_s": p.t2q,
        "p_e": p.P_e, "gamma_phi0_hz": p.Gamma_phi_0 / TWO_PI,
    }


def load_params(path) -> SystemParams:
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return params_from_dict(cfg)


def default_signature(storage_dim: int = 6, qubit_dim: int = 2, readout_dim: int | None = None) -> SpaceSignature:
    dims = (storage_dim, qubit_dim) if readout_dim is None else (storage_dim, qubit_dim, readout_dim)
    return SpaceSignature(dims)


def _check_signature(signature: SpaceSignature):
    if len(signature.dims) not in (2, 3):
        raise SignatureMismatch(f"system needs 2 or 3 modes, got {signature.dims}")


def build_hamiltonian(params: SystemParams, signature: SpaceSignature) -> Operator:
    """Dispersive + Kerr Hamiltonian in the frame co-rotating with each mode.

    Returned in rad/us. Linear terms vanish in this frame, so the result is
    diagonal in the product Fock basis.
    """
    _check_signature(signature)
    a = embed(annihilation(signature.dims[STORAGE]), STORAGE, signature).data
    b = embed(annihilation(signature.dims[QUBIT]), QUBIT, signature).data
    na = a.conj().T @ a
    nb = b.conj().T @ b
    kerr = lambda x: x.conj().T @ x.conj().T @ x @ x
    h = params.chi_sq * na @ nb + 0.5 * params.K_s * kerr(a) + 0.5 * params.K_q * kerr(b)
    if len(signature.dims) == 3:
        c = embed(annihilation(signature.dims[READOUT]), READOUT, signature).data
        nc = c.conj().T @ c
        h = h + params.chi_rq * nb @ nc + params.chi_sr * na @ nc + 0.5 * params.K_r * kerr(c)
    return Operator(signature, -HZ_TO_RAD_PER_US * h)


def qubit_transition_frequency(params: SystemParams, n_storage: int, frame: str = "lab") -> float:
    """Qubit g-e frequency (Hz) with n photons in the storage mode."""
    shift = -n_storage * params.chi_sq
    if frame == "lab":
        return params.omega_q + shift
    if frame == "rotating":
        return shift
    raise ValueError(f"unknown frame {frame!r}")


@dataclass(frozen=True, eq=False)
class CollapseChannel:
    """Jump operator ``sqrt(rate) * operator``; ``rate`` in 1/s."""

    operator: Operator
    rate: float
    label: str = ""

    def __post_init__(self):
        if not self.rate >= 0:
            raise ValueError(f"channel rate {self.rate!r} < 0")

    def jump(self) -> np.ndarray:
        """Jump operator in internal units (sqrt(1/us))."""
        return math.sqrt(self.rate * US) * np.asarray(self.operator.data)


def collapse_channels(params: SystemParams, signature: SpaceSignature) -> list[CollapseChannel]:
    _check_signature(signature)
    a = embed(annihilation(signature.dims[STORAGE]), STORAGE, signature)
    b = embed(annihilation(signature.dims[QUBIT]), QUBIT, signature)
    candidates = [
        ("storage decay", a, params.kappa),
        ("qubit decay", b, params.gamma),
        ("qubit thermal excitation", b.dag(), params.gamma_up),
        ("qubit dephasing", b.dag() @ b, 2.0 * params.gamma_phi_q),
        ("storage dephasing", a.dag() @ a, 2.0 * params.Gamma_phi_0),
    ]
    if len(signature.dims) == 3:
        c = embed(annihilation(signature.dims[READOUT]), READOUT, signature)
        candidates.append(("readout decay", c, params.kappa_r))
    return [CollapseChannel(op, rate, label) for label, op, rate in candidates if rate > 0]


# -- junction --------------------------------------------------------------------

_PHI0 = constants.h / (2 * constants.e)


def josephson_energy(L_J: float) -> float:
    """Josephson energy (Phi0/2pi)^2 / L_J in micro-eV, L_J in henry."""
    if not L_J > 0:
        raise ValueError(f"L_J must be positive, got {L_J!r}")
    return (_PHI0 / TWO_PI) ** 2 / L_J / constants.e * 1e6


def l_j_from_resistance(R_n: float, gap_voltage: float = 180e-6) -> float:
    """Junction inductance (H) from normal resistance via Ambegaokar-Baratoff.

    ``gap_voltage`` is Delta/e in volts.
    """
    if not R_n > 0:
        raise ValueError(f"R_n must be positive, got {R_n!r}")
    if not gap_voltage > 0:
        raise ValueError(f"gap voltage must be positive, got {gap_voltage!r}")
    i_c = math.pi * gap_voltage / (2.0 * R_n)
    return _PHI0 / (TWO_PI * i_c)


__all__ = [
    "SystemParams", "DEVICE_PARAMS", "CollapseChannel", "CONFIG_KEYS",
    "build_hamiltonian", "collapse_channels", "qubit_transition_frequency",
    "josephson_energy", "l_j_from_resistance", "params_from_dict", "params_to_dict",
    "load_params", "default_signature",
]
