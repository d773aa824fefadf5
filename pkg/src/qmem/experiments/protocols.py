"""Simulated measurement protocols for the cavity memory.

Every protocol prepares a state with simulated pulses, lets it idle for each
point of a sweep, and reads out a qubit excitation probability. The readout
step assumes an ideal photon-number-selective pi pulse on the probe peak
(``probe_n``) followed by qubit measurement, so the observable is

    P(g, probe_n) + sum_{m != probe_n} P(e, m).

In ``"exact"`` readout mode that probability is reported directly; in
``"sampled"`` mode it is turned into single-shot IQ points and thresholded.

Sweep axes use SI units: delays in seconds, temperatures in kelvin,
detunings in Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import constants, special

from ..analytic import dephasing_exact
from ..errors import AliasingError, ConfigError, InsufficientData, ResolutionError
from ..lindblad import Delay, Schedule, evolve, evolve_batch, evolve_subspace, propagate_delays
from ..operators import DensityMatrix, fock_state, product, thermal_qubit
from ..pulses import (SELECTIVE_SIGMA, SELECTIVITY_MIN, GaussianEnvelope, analysis_displacement,
                      calibrate_rotation, displacement_pulse, fock_one_sequence, selectivity,
                      superposition_sequence)
from ..system import QUBIT, TWO_PI, SystemParams
from .fitting import (FitResult, Model, fit_decaying_sinusoid, fit_exp_of_exp, fit_exponential,
                      fit_model, with_bootstrap)
from .parallel import run_points

PROTOCOLS = ("coherent-decay", "fock-t1", "ramsey", "spectroscopy", "temp-sweep", "pe-sweep")
READOUT_MODES = ("exact", "sampled")


@dataclass(frozen=True)
class ExperimentConfig:
    """Protocol settings. An empty ``sweep`` selects the protocol's default grid."""

    protocol: str
    sweep: tuple = ()
    shots: int = 2000
    seed: int = 0
    readout: str = "exact"
    storage_dim: int | None = None
    beta0: float = 3.0
    fringe_hz: float = 2000.0
    fringe_phase: float = 0.0
    separation_sigma: float = 6.0
    n_points: int = 30
    delay_quantum_s: float = 1e-6
    bootstrap: int = 1000
    purcell_ratio: float = 0.0
    ideal_gate: bool = False
    jobs: int | None = None

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}; choose from {', '.join(PROTOCOLS)}")
        if self.readout not in READOUT_MODES:
            raise ConfigError(f"readout must be one of {READOUT_MODES}, got {self.readout!r}")
        sweep = tuple(float(v) for v in self.sweep)
        object.__setattr__(self, "sweep", sweep)
        if any(not math.isfinite(v) for v in sweep):
            raise ConfigError("sweep values must be finite")
        if any(b < a for a, b in zip(sweep, sweep[1:])):
            raise ConfigError("sweep must be sorted in increasing order")
        if self.readout == "sampled" and self.shots < 1:
            raise ConfigError("sampled readout needs shots >= 1")
        if self.n_points < 2:
            raise ConfigError("n_points must be >= 2")
        if not self.delay_quantum_s > 0:
            raise ConfigError("delay_quantum_s must be positive")
        if self.purcell_ratio < 0:
            raise ConfigError("purcell_ratio must be >= 0")

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


# -- readout -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class IQRecord:
    """Single-shot quadratures in units of the vacuum-fluctuation sigma."""

    I_m: np.ndarray
    Q_m: np.ndarray

    def __post_init__(self):
        i, q = np.asarray(self.I_m, float), np.asarray(self.Q_m, float)
        if i.shape != q.shape:
            raise ValueError("I and Q records differ in length")
        if not (np.all(np.isfinite(i)) and np.all(np.isfinite(q))):
            raise ValueError("IQ record contains non-finite values")
        object.__setattr__(self, "I_m", i)
        object.__setattr__(self, "Q_m", q)

    def __len__(self):
        return len(self.I_m)


@dataclass(frozen=True, eq=False)
class IQReadout:
    """Thresholded readout. ``fraction`` is the raw share of shots beyond the
    midpoint; ``estimate`` removes the symmetric assignment error of the two
    Gaussian blobs."""

    record: IQRecord
    fraction: float
    estimate: float
    stderr: float
    assignment_error: float


_MAX_OFFSET = 1e6  # stands in for an infinitely separated blob


def assignment_error(separation_sigma: float) -> float:
    """Probability that a unit-variance blob lands past the midpoint."""
    return 0.5 * float(special.erfc(separation_sigma / (2 * math.sqrt(2))))


def sample_iq(p_e: float, shots: int, separation_sigma: float = 6.0, seed=0) -> IQReadout:
    """Draw ``shots`` IQ points: ground blob at -s/2, excited at +s/2 along I."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if not separation_sigma > 0:
        raise ValueError("separation_sigma must be positive")
    if not 0.0 <= p_e <= 1.0:
        raise ValueError(f"p_e = {p_e} outside [0, 1]")
    rng = np.random.default_rng(seed)
    excited = rng.random(shots) < p_e
    half = min(0.5 * separation_sigma, _MAX_OFFSET)
    noise = rng.standard_normal((2, shots))
    rec = IQRecord(np.where(excited, half, -half) + noise[0], noise[1])
    frac = float(np.mean(rec.I_m > 0.0))
    eps = assignment_error(separation_sigma)
    est = min(max((frac - eps) / (1.0 - 2.0 * eps), 0.0), 1.0)
    se = math.sqrt(max(frac * (1 - frac), 1.0 / shots) / shots) / (1.0 - 2.0 * eps)
    return IQReadout(rec, frac, est, se, eps)


def _point_seeds(seed: int, n: int):
    return np.random.SeedSequence(seed).spawn(n)


def read_out(probs, config: ExperimentConfig):
    """Observable and standard error per sweep point for the configured readout mode."""
    probs = np.clip(np.asarray(probs, dtype=float), 0.0, 1.0)
    if config.readout == "exact":
        return probs, np.zeros_like(probs)
    vals, errs = [], []
    for p, s in zip(probs, _point_seeds(config.seed, len(probs))):
        r = sample_iq(float(p), config.shots, config.separation_sigma, s)
        vals.append(r.estimate)
        errs.append(r.stderr)
    return np.array(vals), np.array(errs)


def probe_probability(rho: DensityMatrix, probe_n: int = 0) -> float:
    """Qubit excitation after an ideal selective pi on the ``probe_n`` peak."""
    return _probe_matrix(np.asarray(rho.data), rho.signature, probe_n)


def _probe_matrix(r: np.ndarray, signature, probe_n: int) -> float:
    ds, dq = signature.dims[:2]
    pops = np.real(np.diag(r)).reshape(ds, dq, -1).sum(axis=2)
    return float(pops[probe_n, 0] + np.delete(pops[:, 1], probe_n).sum())


# -- sweeps ----------------------------------------------------------------------

def quantize(values_s, quantum_s: float) -> np.ndarray:
    """Round delays to multiples of the propagator quantum, dropping repeats."""
    steps = np.unique(np.rint(np.asarray(values_s, float) / quantum_s).astype(np.int64))
    return steps * quantum_s


def geometric_delays(t_expected_s: float, n: int, quantum_s: float) -> np.ndarray:
    """Geometric grid over [0.02, 4] x the expected decay time."""
    return quantize(np.geomspace(0.02, 4.0, n) * t_expected_s, quantum_s)


def _resolve_delays(config: ExperimentConfig, t_expected_s: float) -> np.ndarray:
    if config.sweep:
        d = np.asarray(config.sweep, float)
        if np.any(d < 0):
            raise ConfigError("delays must be >= 0")
        q = quantize(d, config.delay_quantum_s)
        if len(q) != len(d) or not np.allclose(q, d, rtol=0, atol=1e-3 * config.delay_quantum_s):
            raise ConfigError("delays must be distinct multiples of delay_quantum_s")
        return q
    if not (t_expected_s > 0 and math.isfinite(t_expected_s)):
        raise ConfigError("no decay expected (rate 0): give an explicit sweep")
    return geometric_delays(t_expected_s, config.n_points, config.delay_quantum_s)


def _ground_state(params: SystemParams, storage_dim: int) -> DensityMatrix:
    return product(fock_state(storage_dim, 0), thermal_qubit(params.P_e))


def _idle_series(rho: DensityMatrix, delays_s, params: SystemParams, quantum_s: float):
    return propagate_delays(rho, np.asarray(delays_s) * 1e6, params, quantum=quantum_s * 1e6)


def _finish(fit: FitResult, config: ExperimentConfig, stderr, meta: dict) -> FitResult:
    fit.stderr = np.asarray(stderr, float)
    fit.meta.update(meta)
    fit.meta["protocol"] = config.protocol
    fit.meta["readout"] = config.readout
    if config.bootstrap:
        fit = with_bootstrap(fit, config.bootstrap, seed=config.seed)
    return fit


def effective_params(config: ExperimentConfig, params: SystemParams) -> SystemParams:
    """Adds the qubit-induced storage decay ``purcell_ratio * gamma`` if configured."""
    if config.purcell_ratio:
        return params.replace(kappa=params.kappa + config.purcell_ratio * params.gamma)
    return params


# -- coherent-state decay ---------------------------------------------------------------

@dataclass
class SweepData:
    x: np.ndarray
    y: np.ndarray
    stderr: np.ndarray
    probs: np.ndarray
    meta: dict = field(default_factory=dict)


def coherent_decay_data(config: ExperimentConfig, params: SystemParams) -> SweepData:
    p = effective_params(config, params)
    ds = config.storage_dim or 30
    rho0 = _ground_state(p, ds)
    prep = evolve(rho0, Schedule((displacement_pulse(config.beta0, ds),)), p, store_states=False).final
    delays = _resolve_delays(config, 1.0 / p.kappa if p.kappa > 0 else math.inf)
    states = _idle_series(prep, delays, p, config.delay_quantum_s)
    probs = np.array([_probe_matrix(r, prep.signature, 0) for r in states])
    y, se = read_out(probs, config)
    return SweepData(delays, y, se, probs, {"storage_dim": ds, "beta0": config.beta0})


def coherent_decay(config: ExperimentConfig, params: SystemParams) -> FitResult:
    """Vacuum return of a displaced cavity; fits kappa from exp(-nbar exp(-kappa t))."""
    d = coherent_decay_data(config, params)
    fit = fit_exp_of_exp(d.x, d.y, units={"A": "", "nbar": "", "kappa": "1/s", "C": "",
                                          "kappa_hz": "Hz", "t1_ms": "ms"},
                         derive=lambda v: {"kappa_hz": v["kappa"] / TWO_PI, "t1_ms": 1e3 / v["kappa"]})
    return _finish(fit, config, d.stderr, d.meta)


# -- Fock-state energy decay ---------------------------------------------------------

def fock_t1_data(config: ExperimentConfig, params: SystemParams) -> SweepData:
    p = effective_params(config, params)
    ds = config.storage_dim or 6
    rho0 = _ground_state(p, ds)
    seq = fock_one_sequence(p, ds, ideal_gate=config.ideal_gate)
    prep = evolve(rho0, seq, p, store_states=False).final
    delays = _resolve_delays(config, 1.0 / p.kappa if p.kappa > 0 else math.inf)
    states = _idle_series(prep, delays, p, config.delay_quantum_s)
    probs = np.array([_probe_matrix(r, prep.signature, 1) for r in states])
    y, se = read_out(probs, config)
    return SweepData(delays, y, se, probs, {"storage_dim": ds, "kappa_effective": p.kappa})


def fock_t1(config: ExperimentConfig, params: SystemParams) -> FitResult:
    """Energy decay of the prepared one-photon state; single-exponential T1."""
    d = fock_t1_data(config, params)
    fit = fit_exponential(d.x, d.y, units={"A": "", "tau": "s", "C": "", "t1_ms": "ms", "kappa": "1/s"},
                          derive=lambda v: {"t1_ms": 1e3 * v["tau"], "kappa": 1.0 / v["tau"]})
    return _finish(fit, config, d.stderr, d.meta)


# -- Ramsey ----------------------------------------------------------------------------

def expected_t2(params: SystemParams) -> float:
    """Analytic cavity T2 (s): energy decay plus thermal shot-noise and intrinsic dephasing."""
    phi = params.Gamma_phi_0
    if params.gamma > 0 and params.P_e > 0:
        phi += dephasing_exact(params.chi_sq, params.gamma, params.P_e)
    rate = 0.5 * params.kappa + phi
    return 1.0 / rate if rate > 0 else math.inf


def ramsey_delays(config: ExperimentConfig, t2_s: float, fringe_hz: float) -> np.ndarray:
    """Uniform grid over three expected T2 with at least four samples per fringe."""
    q = config.delay_quantum_s
    span = 3.0 * t2_s
    n = max(2 * config.n_points, int(math.ceil(4 * fringe_hz * span)) + 1)
    step = max(q, math.floor(span / (n - 1) / q) * q)
    return np.arange(n) * step


def check_aliasing(delays_s, omega: float):
    gaps = np.diff(np.asarray(delays_s, float))
    if gaps.size and np.max(gaps) > math.pi / omega:
        raise AliasingError(f"sample spacing {np.max(gaps):.3g} s exceeds pi/omega = {math.pi / omega:.3g} s; "
                            "the fringe would alias")


def rotate_storage(rhos: np.ndarray, thetas, signature) -> np.ndarray:
    """R^dag rho R with R = exp(i theta a^dag a), one angle per stacked state."""
    ds = signature.dims[0]
    n = np.repeat(np.arange(ds), signature.total // ds)
    dn = n[:, None] - n[None, :]
    return rhos * np.exp(-1j * np.asarray(thetas, float)[:, None, None] * dn[None])


def analysis_probabilities(rhos: np.ndarray, thetas, params: SystemParams, signature) -> np.ndarray:
    """Vacuum probe after the analysis displacement 0.8 exp(i theta), per state.

    The pulsed dynamics commute with storage phase rotations (the Hamiltonian
    is diagonal in photon number and every dissipator is phase covariant), so
    D(0.8 e^{i theta}) acting on rho equals R D(0.8) R^dag rho R R^dag and the
    diagonal probe ignores the outer R. One batched integration of the
    theta = 0 pulse therefore serves every sweep point.
    """
    rot = rotate_storage(rhos, thetas, signature)
    out = evolve_batch(rot, analysis_displacement(0.0), params, signature)
    return np.array([_probe_matrix(r, signature, 0) for r in out])


def ramsey_data(config: ExperimentConfig, params: SystemParams, fringe_hz: float | None = None) -> SweepData:
    p = effective_params(config, params)
    ds = config.storage_dim or 6
    fringe_hz = config.fringe_hz if fringe_hz is None else fringe_hz
    omega = TWO_PI * fringe_hz
    t2 = expected_t2(p)
    if config.sweep:
        delays = _resolve_delays(config, t2)
    else:
        if not math.isfinite(t2):
            raise ConfigError("no decay expected: give an explicit Ramsey sweep")
        delays = ramsey_delays(config, t2, fringe_hz)
    check_aliasing(delays, omega)
    rho0 = _ground_state(p, ds)
    prep = evolve(rho0, superposition_sequence(p, ds, ideal_gate=config.ideal_gate), p, store_states=False).final
    states = _idle_series(prep, delays, p, config.delay_quantum_s)
    thetas = omega * delays + config.fringe_phase
    probs = analysis_probabilities(np.stack(states), thetas, p, prep.signature)
    y, se = read_out(probs, config)
    return SweepData(delays, y, se, probs, {"storage_dim": ds, "fringe_hz": fringe_hz,
                                            "t2_expected_ms": 1e3 * t2})


def ramsey_t2(config: ExperimentConfig, params: SystemParams, fringe_hz: float | None = None) -> FitResult:
    """Cavity Ramsey with a programmed fringe; fits T2 of the decaying sinusoid.

    The slow baseline decays with the energy-relaxation time 1/kappa, which
    is pinned rather than fitted.
    """
    p = effective_params(config, params)
    d = ramsey_data(config, params, fringe_hz)
    t1 = 1.0 / p.kappa if p.kappa > 0 else None
    derive = (lambda v: {"t2_ms": 1e3 * v["T2"], "gamma_phi": 1.0 / v["T2"] - 0.5 / t1}) if t1 else \
        (lambda v: {"t2_ms": 1e3 * v["T2"]})
    units = {"A": "", "T2": "s", "omega": "rad/s", "phi": "rad", "B0": "", "B1": "", "Tb": "s",
             "t2_ms": "ms", "gamma_phi": "1/s"}
    fit = fit_decaying_sinusoid(d.x, d.y, baseline_tau=t1 if t1 else float(np.ptp(d.x)) * 10,
                                units=units, derive=derive)
    return _finish(fit, config, d.stderr, d.meta)


# -- qubit spectroscopy -----------------------------------------------------------------

@dataclass
class Spectrum:
    """Spectroscopy trace and the photon-number populations read from it."""

    detunings: np.ndarray  # Hz
    signal: np.ndarray
    stderr: np.ndarray
    populations: list  # [(n, P_n)]

    def __iter__(self):
        return iter(self.populations)

    def as_dict(self) -> dict:
        return {int(n): float(pn) for n, pn in self.populations}


def spectroscopy_detunings(params: SystemParams, n_max: int, per_peak: int = 11) -> np.ndarray:
    chi = params.chi_sq
    offs = np.linspace(-0.5, 0.5, per_peak, endpoint=False) + 0.5 / per_peak
    return np.sort(np.concatenate([(-n + offs) * chi for n in range(n_max + 1)]))


def probe_responses(rho: DensityMatrix, detunings_hz, params: SystemParams, sigma_t: float,
                    amplitude: float | None = None) -> np.ndarray:
    """Qubit excitation after a selective pi probe at each detuning, in one batch."""
    det = np.asarray(detunings_hz, dtype=float)
    amp = calibrate_rotation(math.pi, sigma_t) if amplitude is None else amplitude
    seg = GaussianEnvelope(amp, sigma_t, detuning=det).segment(QUBIT, label="probe")
    out = evolve_subspace(rho, seg, params, storage_diagonal_mask(rho.signature))
    return np.array([_qubit_excited(r, rho.signature) for r in out])


def storage_diagonal_mask(signature) -> np.ndarray:
    """Elements diagonal in storage photon number; closed under qubit-only drives."""
    ds = signature.dims[0]
    n = np.repeat(np.arange(ds), signature.total // ds)
    return n[:, None] == n[None, :]


def _qubit_excited(r, signature) -> float:
    ds, dq = signature.dims[:2]
    pops = np.real(np.diag(r)).reshape(ds, dq, -1).sum(axis=(0, 2))
    return float(pops[1:].sum())


PREPARATIONS = ("fock", "superposition", "coherent", "ground")


def prepare_state(kind: str, config: ExperimentConfig, params: SystemParams) -> DensityMatrix:
    """Run a state-preparation sequence from the thermal ground state."""
    p = effective_params(config, params)
    ds = config.storage_dim or 6
    rho0 = _ground_state(p, ds)
    if kind == "ground":
        return rho0
    if kind == "fock":
        seq = fock_one_sequence(p, ds, ideal_gate=config.ideal_gate)
    elif kind == "superposition":
        seq = superposition_sequence(p, ds, ideal_gate=config.ideal_gate)
    elif kind == "coherent":
        seq = Schedule((displacement_pulse(config.beta0, ds),))
    else:
        raise ConfigError(f"unknown preparation {kind!r}; choose from {', '.join(PREPARATIONS)}")
    return evolve(rho0, seq, p, store_states=False).final


def qubit_spectroscopy(state: DensityMatrix, config: ExperimentConfig, params: SystemParams,
                       n_max: int | None = None, sigma_t: float = SELECTIVE_SIGMA,
                       settle_s: float | None = None) -> Spectrum:
    """Selective pi-pulse spectroscopy of the qubit; peak areas give P_n.

    The signal is the qubit excitation with the probe minus that of an
    identical window with the probe off. Each
    peak is integrated over a window one dispersive shift wide centred on
    -n chi, and the areas are normalised to unit sum.

    Qubit excitation left over from state preparation enters the areas with
    the opposite sign, so the probe waits ``settle_s`` first (default five
    qubit lifetimes) for it to relax.
    """
    if selectivity(params, sigma_t) < SELECTIVITY_MIN:
        raise ResolutionError(f"probe bandwidth too wide: 2 pi chi sigma_t = {selectivity(params, sigma_t):.2f}")
    ds = state.signature.dims[0]
    n_max = min(ds - 1, 4) if n_max is None else n_max
    if settle_s is None:
        settle_s = 5.0 / params.gamma if params.gamma > 0 else 0.0
    if settle_s > 0:
        state = evolve(state, Schedule((Delay(settle_s * 1e6, label="settle"),)), params, store_states=False).final
    if config.sweep:
        det = np.asarray(config.sweep, float)
    else:
        det = spectroscopy_detunings(params, n_max)
    # reference: same window with the probe off, so qubit relaxation during the
    # probe does not masquerade as signal
    reference = probe_responses(state, [0.0], params, sigma_t, amplitude=0.0)[0]
    probs = probe_responses(state, det, params, sigma_t)
    y, se = read_out(probs, config)
    signal = y - reference
    chi = params.chi_sq
    areas = []
    for n in range(n_max + 1):
        win = np.abs(det + n * chi) <= 0.5 * chi
        if win.sum() < 2:
            raise InsufficientData(f"fewer than two spectroscopy points near peak n={n}")
        areas.append(np.sum(signal[win]))
    areas = np.array(areas)
    total = areas.sum()
    if not total > 0:
        raise ResolutionError("no spectroscopy signal")
    pops = [(n, float(a / total)) for n, a in enumerate(areas)]
    return Spectrum(det, signal, se, pops)


# -- temperature sweep ---------------------------------------------------------------------

@dataclass(frozen=True)
class ThermalQubitDecay:
    """gamma(T) = gamma0 + A exp(-gap / k_B T), A set so gamma(T_ref) = factor * gamma0."""

    gamma0: float = 1.0 / 6.1e-6
    gap_ueV: float = 180.0
    T_ref: float = 0.180
    factor: float = 4.0

    def __call__(self, T: float) -> float:
        a = (self.factor - 1.0) * self.gamma0 * math.exp(self._x(self.T_ref))
        return self.gamma0 + a * math.exp(-self._x(T))

    def _x(self, T):
        return self.gap_ueV * 1e-6 * constants.e / (constants.k * T)


@dataclass(frozen=True)
class LinearKappa0:
    """Intrinsic decay kappa0 (1 + slope (T - T_lo) / (T_hi - T_lo))."""

    kappa0: float = 1.0 / 2e-3
    slope: float = -0.15
    T_lo: float = 0.020
    T_hi: float = 0.150

    def __call__(self, T: float) -> float:
        return self.kappa0 * (1.0 + self.slope * (T - self.T_lo) / (self.T_hi - self.T_lo))


def _line_f(x, p):
    return p[:, 0:1] + p[:, 1:2] * x


def _line_jac(x, p):
    one = np.ones((p.shape[0], x.size))
    return np.stack([one, one * x], axis=-1)


def _line_guess(x, y):
    slope, icpt = np.polyfit(x, y, 1)
    return np.array([icpt, slope])


LINE = Model("linear", ("intercept", "slope"), _line_f, _line_jac, _line_guess)


RATE_METHODS = ("vacuum-return", "fock-t1")


def _temperature_point(args):
    T, config, params, ratio, gamma_model, kappa0_model, method = args
    g = gamma_model(T)
    p = params.replace(gamma=g, kappa=kappa0_model(T) + ratio * g)
    cfg = config.replace(sweep=(), bootstrap=0, purcell_ratio=0.0)
    if method == "fock-t1":
        return g, fock_t1(cfg.replace(protocol="fock-t1"), p)["kappa"]
    return g, coherent_decay(cfg.replace(protocol="coherent-decay"), p)["kappa"]


@dataclass
class TemperatureSweep:
    temperatures: np.ndarray
    gamma: np.ndarray
    kappa_tot: np.ndarray
    fit: FitResult
    fit_subtracted: FitResult | None


def temperature_sweep(T_list, config: ExperimentConfig, params: SystemParams,
                      gamma_model=None, kappa0_model=None, ratio: float = 1.0 / 650,
                      subtract_trend: bool = True, method: str = "vacuum-return") -> TemperatureSweep:
    """Storage decay versus qubit decay across temperature.

    At each temperature the storage decays at kappa0(T) + ratio * gamma(T);
    kappa_tot is measured by vacuum return (:func:`coherent_decay`) or, with
    ``method="fock-t1"``, by :func:`fock_t1`. A straight-line fit of
    kappa_tot against gamma returns the hybridisation ratio (slope) and
    kappa0 (intercept). With ``subtract_trend`` a second fit removes the
    kappa0(T) drift relative to the lowest temperature first.
    """
    T = np.asarray(sorted(float(t) for t in T_list))
    if T.size < 3:
        raise InsufficientData("temperature sweep needs at least 3 temperatures")
    if np.any(T <= 0):
        raise ConfigError("temperatures must be positive (kelvin)")
    if method not in RATE_METHODS:
        raise ConfigError(f"unknown rate method {method!r}; choose from {', '.join(RATE_METHODS)}")
    gamma_model = gamma_model or ThermalQubitDecay(gamma0=params.gamma)
    kappa0_model = kappa0_model or LinearKappa0()
    pts = run_points(_temperature_point,
                     [(t, config, params, ratio, gamma_model, kappa0_model, method) for t in T], config.jobs)
    g = np.array([a for a, _ in pts])
    k = np.array([b for _, b in pts])
    units = {"intercept": "1/s", "slope": "", "kappa0": "1/s", "ratio": "", "t1_0_ms": "ms"}
    derive = lambda v: {"kappa0": v["intercept"], "ratio": v["slope"], "t1_0_ms": 1e3 / v["intercept"]}

    def regress(y):
        fit = fit_model(LINE, g, y, units=units, derive=derive, min_points=3,
                        meta={"protocol": "temp-sweep"})
        return with_bootstrap(fit, config.bootstrap, config.seed) if config.bootstrap else fit

    fit = regress(k)
    sub = None
    if subtract_trend:
        drift = np.array([kappa0_model(t) - kappa0_model(T[0]) for t in T])
        sub = regress(k - drift)
    return TemperatureSweep(T, g, k, fit, sub)


# -- thermal-population sweep -------------------------------------------------------------

def _pe_point(args):
    pe, config, params = args
    p = params.replace(P_e=pe)
    t2 = expected_t2(effective_params(config, p))
    fringe = max(config.fringe_hz, 1.0 / t2)
    fit = ramsey_t2(config.replace(protocol="ramsey", sweep=(), bootstrap=0), p, fringe_hz=fringe)
    return fit["T2"], fit["gamma_phi"], fringe


@dataclass
class PeSweep:
    p_e: np.ndarray
    gamma_phi: np.ndarray
    t2: np.ndarray
    model: np.ndarray
    fringe_hz: np.ndarray

    @property
    def relative_deviation(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.model > 0, (self.gamma_phi - self.model) / self.model, np.nan)

    def pairs(self) -> list:
        return [(float(a), float(b)) for a, b in zip(self.p_e, self.gamma_phi)]

    def linear_fit(self) -> tuple:
        """(slope, intercept) of gamma_phi against P_e."""
        slope, icpt = np.polyfit(self.p_e, self.gamma_phi, 1)
        return float(slope), float(icpt)


def pe_sweep(P_e_list, config: ExperimentConfig, params: SystemParams) -> PeSweep:
    """Cavity dephasing rate versus thermal qubit population.

    Runs :func:`ramsey_t2` at each P_e and reports Gamma_phi = 1/T2 - kappa/2
    next to the shot-noise model. The fringe is raised above the configured
    value when needed so that about three periods fit within the decay.
    """
    pes = np.asarray(sorted(float(v) for v in P_e_list))
    if pes.size == 0:
        raise ConfigError("empty P_e sweep")
    if np.any(pes < 0) or np.any(pes >= 0.5):
        raise ConfigError("each P_e must lie in [0, 0.5)")
    pts = run_points(_pe_point, [(pe, config, params) for pe in pes], config.jobs)
    p = effective_params(config, params)
    model = np.array([(dephasing_exact(p.chi_sq, p.gamma, pe) if p.gamma > 0 else 0.0) + p.Gamma_phi_0
                      for pe in pes])
    return PeSweep(pes, np.array([b for _, b, _ in pts]), np.array([a for a, _, _ in pts]), model,
                   np.array([c for _, _, c in pts]))
