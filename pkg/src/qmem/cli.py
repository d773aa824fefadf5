"""``qmem`` command line: simulate protocols, run design calculators, fit data.

Exit codes: 0 success, 2 bad input (config, numerics, data), 3 fit failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .design import (cutoff_frequency, energy_suppression, participation_bound, propagation_constant,
                     quarter_wave_frequency, read_s21_csv, s21_circle_fit)
from .errors import ConfigError, FitError, IntegrationFailure, QmemError
from .experiments.fitting import fit_decaying_sinusoid, fit_exp_of_exp, fit_exponential, with_bootstrap
from .experiments.io import read_sweep_csv, write_json, write_sweep_csv
from .experiments.protocols import (PREPARATIONS, PROTOCOLS, RATE_METHODS, READOUT_MODES, ExperimentConfig, coherent_decay,
                                    fock_t1, pe_sweep, prepare_state, qubit_spectroscopy, ramsey_t2,
                                    temperature_sweep)
from .plot import svg_plot
from .system import DEVICE_PARAMS, SystemParams, josephson_energy, l_j_from_resistance, params_from_dict, params_to_dict

EXIT_OK, EXIT_INPUT, EXIT_FIT = 0, 2, 3

# experiment options a config file may set under "experiment"
_EXPERIMENT_KEYS = ("sweep", "shots", "readout", "storage_dim", "beta0", "fringe_hz", "fringe_phase",
                    "separation_sigma", "n_points", "delay_quantum_s", "bootstrap", "purcell_ratio",
                    "ideal_gate", "prep", "rate_method")

_AXES = {
    "coherent-decay": ("delay (s)", "P(e), probe n=0"),
    "fock-t1": ("delay (s)", "P(e), probe n=1"),
    "ramsey": ("delay (s)", "P(e), probe n=0"),
    "spectroscopy": ("qubit detuning (Hz)", "excitation above reference"),
    "temp-sweep": ("gamma_q (1/s)", "kappa_tot (1/s)"),
    "pe-sweep": ("P_e", "Gamma_phi (1/s)"),
}


@dataclass
class RunManifest:
    """Everything needed to reproduce a ``sim`` run."""

    protocol: str
    config_path: str | None
    params: dict
    experiment: dict
    seed: int
    out_dir: str
    version: str = __version__
    wall_clock_s: float = 0.0
    started: str = ""
    outputs: dict = field(default_factory=dict)  # file name -> sha256

    def write(self, path):
        write_json(path, asdict(self))

    @classmethod
    def read(cls, path) -> "RunManifest":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"manifest {path} is malformed: {exc}") from exc


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- config ---------------------------------------------------------------------------

def load_config(path) -> tuple:
    """(system params dict, experiment overrides) from a JSON config.

    The file is either a flat system-parameter object or
    ``{"system": {...}, "experiment": {...}}``.
    """
    if path is None:
        return params_to_dict(DEVICE_PARAMS), {}
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if "system" in cfg:
        unknown = sorted(set(cfg) - {"system", "experiment"})
        if unknown:
            raise ConfigError(f"unknown top-level config key: {unknown[0]}")
        system, exp = cfg["system"], cfg.get("experiment", {})
        if not isinstance(system, dict) or not isinstance(exp, dict):
            raise ConfigError("config sections 'system' and 'experiment' must be objects")
    else:
        system, exp = cfg, {}
    bad = sorted(set(exp) - set(_EXPERIMENT_KEYS))
    if bad:
        raise ConfigError(f"unknown experiment key: {bad[0]}")
    params_from_dict(system)  # validate now so errors name the key
    return system, dict(exp)


def _parse_sweep(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"--sweep must be comma-separated numbers: {exc}") from None


def _resolve_experiment(args, exp: dict) -> dict:
    exp = dict(exp)
    for key in ("shots", "readout", "bootstrap", "storage_dim", "prep", "rate_method"):
        v = getattr(args, key, None)
        if v is not None:
            exp[key] = v
    if args.sweep is not None:
        exp["sweep"] = list(_parse_sweep(args.sweep))
    if args.ideal_gate:
        exp["ideal_gate"] = True
    exp.setdefault("prep", "fock")
    return exp


# -- protocol dispatch --------------------------------------------------------------------

def run_protocol(protocol: str, params: SystemParams, exp: dict, seed: int, jobs=None):
    """Returns (x, y, stderr, report dict, fit curve or None)."""
    exp = dict(exp)
    prep = exp.pop("prep", "fock")
    rate_method = exp.pop("rate_method", "vacuum-return")
    sweep = tuple(exp.pop("sweep", ()) or ())
    try:
        config = ExperimentConfig(protocol=protocol, seed=seed, jobs=jobs, **exp)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    if protocol in ("coherent-decay", "fock-t1", "ramsey"):
        fn = {"coherent-decay": coherent_decay, "fock-t1": fock_t1, "ramsey": ramsey_t2}[protocol]
        fit = fn(config.replace(sweep=sweep), params)
        xc = np.linspace(fit.x.min(), fit.x.max(), 400)
        return fit.x, fit.y, fit.stderr, fit.to_dict(), (xc, fit.predict(xc))
    if protocol == "spectroscopy":
        if prep not in PREPARATIONS:
            raise ConfigError(f"unknown preparation {prep!r}; choose from {', '.join(PREPARATIONS)}")
        state = prepare_state(prep, config, params)
        spec = qubit_spectroscopy(state, config.replace(sweep=sweep), params)
        report = {"prep": prep, "populations": {str(k): v for k, v in spec.as_dict().items()}}
        return spec.detunings, spec.signal, spec.stderr, report, None
    if protocol == "temp-sweep":
        temps = sweep or (0.020, 0.050, 0.080, 0.110, 0.130, 0.150, 0.165, 0.180)
        ts = temperature_sweep(temps, config, params, method=rate_method)
        report = {"temperatures_k": [float(t) for t in ts.temperatures], "rate_method": rate_method, "fit": ts.fit.to_dict(),
                  "fit_trend_subtracted": ts.fit_subtracted.to_dict() if ts.fit_subtracted else None}
        xc = np.linspace(ts.gamma.min(), ts.gamma.max(), 200)
        return ts.gamma, ts.kappa_tot, np.zeros_like(ts.gamma), report, (xc, ts.fit.predict(xc))
    if protocol == "pe-sweep":
        pes = sweep or (0.005, 0.01, 0.02, 0.05)
        ps = pe_sweep(pes, config, params)
        report = {"t2_s": ps.t2.tolist(), "gamma_phi_model": ps.model.tolist(),
                  "relative_deviation": ps.relative_deviation.tolist(), "fringe_hz": ps.fringe_hz.tolist()}
        return ps.p_e, ps.gamma_phi, np.zeros_like(ps.p_e), report, (ps.p_e, ps.model)
    raise ConfigError(f"unknown protocol {protocol!r}")


def _write_plot(csv_path: Path, svg_path: Path, protocol: str, curve):
    # drawn from the CSV on disk so plotting cannot feed back into the numbers
    x, y, se = read_sweep_csv(csv_path)
    xl, yl = _AXES[protocol]
    svg_path.write_text(svg_plot(x, y, yerr=se if np.any(se > 0) else None, curve=curve,
                                 xlabel=xl, ylabel=yl, title=protocol))


def execute(manifest: RunManifest, plot: bool = False, jobs=None) -> RunManifest:
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = params_from_dict(manifest.params)
    t0 = time.perf_counter()
    x, y, se, report, curve = run_protocol(manifest.protocol, params, manifest.experiment, manifest.seed, jobs)
    stem = manifest.protocol
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}_fit.json"
    write_sweep_csv(csv_path, x, y, se)
    report = {"protocol": manifest.protocol, "seed": manifest.seed, **report}
    write_json(json_path, report)
    files = [csv_path, json_path]
    if plot:
        svg_path = out / f"{stem}.svg"
        _write_plot(csv_path, svg_path, manifest.protocol, curve)
        files.append(svg_path)
    manifest.wall_clock_s = round(time.perf_counter() - t0, 3)
    manifest.outputs = {p.name: _sha256(p) for p in files}
    manifest.write(out / "manifest.json")
    return manifest


# -- commands ---------------------------------------------------------------------------------

def cmd_sim(args) -> int:
    system, exp = load_config(args.config)
    exp = _resolve_experiment(args, exp)
    man = RunManifest(protocol=args.protocol, config_path=str(args.config) if args.config else None,
                      params=system, experiment=exp, seed=args.seed, out_dir=str(Path(args.out).resolve()),
                      started=time.strftime("%Y-%m-%dT%H:%M:%S%z"))
    man = execute(man, plot=args.plot, jobs=args.jobs)
    print(json.dumps({"protocol": man.protocol, "out_dir": man.out_dir, "outputs": sorted(man.outputs),
                      "wall_clock_s": man.wall_clock_s}))
    return EXIT_OK


def cmd_rerun(args) -> int:
    man = RunManifest.read(args.manifest)
    expected = dict(man.outputs)
    if args.out is not None:
        man.out_dir = str(Path(args.out).resolve())
    man.started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    man = execute(man, plot=any(k.endswith(".svg") for k in expected), jobs=args.jobs)
    mismatched = sorted(k for k, h in expected.items() if man.outputs.get(k) != h)
    print(json.dumps({"out_dir": man.out_dir, "identical": not mismatched, "mismatched": mismatched}))
    return EXIT_OK if not mismatched else 1


def _design(args) -> dict:
    calc = args.calc
    if calc == "cutoff":
        return {"inputs": {"a_mm": args.a_mm}, "cutoff_ghz": cutoff_frequency(args.a_mm) / 1e9}
    if calc == "suppression":
        beta = propagation_constant(args.f_ghz * 1e9, args.a_mm)
        return {"inputs": {"a_mm": args.a_mm, "f_ghz": args.f_ghz, "l_mm": args.l_mm},
                "decay_length_mm": 1.0 / abs(beta), "cutoff_ghz": cutoff_frequency(args.a_mm) / 1e9,
                "suppression": energy_suppression(args.l_mm, beta)}
    if calc == "quarterwave":
        return {"inputs": {"l_mm": args.l_mm}, "frequency_ghz": quarter_wave_frequency(args.l_mm) / 1e9}
    if calc == "participation":
        return {"inputs": {"qint": args.qint, "p": args.p}, "q_material_min": participation_bound(args.qint, args.p)}
    if calc == "josephson":
        if (args.lj_nh is None) == (args.rn_ohm is None):
            raise ValueError("give exactly one of --lj-nh or --rn-ohm")
        if args.lj_nh is not None:
            lj = args.lj_nh * 1e-9
            inputs = {"lj_nh": args.lj_nh}
        else:
            lj = l_j_from_resistance(args.rn_ohm, args.gap_uv * 1e-6)
            inputs = {"rn_ohm": args.rn_ohm, "gap_uv": args.gap_uv}
        return {"inputs": inputs, "lj_nh": lj * 1e9, "ej_uev": josephson_energy(lj)}
    raise ValueError(f"unknown calculator {calc!r}")


def cmd_design(args) -> int:
    for k, v in vars(args).items():
        if isinstance(v, float) and not math.isfinite(v):
            raise ValueError(f"--{k.replace('_', '-')} must be finite")
    print(json.dumps(_design(args), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_fit(args) -> int:
    if args.kind == "s21":
        f, s = read_s21_csv(args.inp)
        fit = s21_circle_fit(f, s)
    else:
        x, y, _ = read_sweep_csv(args.inp)
        if args.kind == "exp":
            fit = fit_exponential(x, y, units={"tau": "s"})
        elif args.kind == "exp-of-exp":
            fit = fit_exp_of_exp(x, y, units={"kappa": "1/s"})
        else:
            fit = fit_decaying_sinusoid(x, y, baseline_tau=args.baseline_tau,
                                        units={"T2": "s", "omega": "rad/s", "phi": "rad", "Tb": "s"})
    if args.bootstrap:
        fit = with_bootstrap(fit, args.bootstrap, seed=args.seed)
    text = json.dumps(fit.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser -------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qmem", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qmem {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sim", help="simulate a measurement protocol")
    s.add_argument("protocol", choices=PROTOCOLS)
    s.add_argument("--config", type=Path, help="JSON config (default: built-in device parameters)")
    s.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    s.add_argument("--out", type=Path, default=Path("qmem-out"))
    s.add_argument("--plot", action="store_true", help="also write an SVG plot")
    s.add_argument("--jobs", type=int, help="worker processes (default: $QMEM_JOBS or all CPUs)")
    s.add_argument("--readout", choices=READOUT_MODES)
    s.add_argument("--shots", type=int)
    s.add_argument("--bootstrap", type=int, help="bootstrap resamples (0 disables)")
    s.add_argument("--storage-dim", type=int)
    s.add_argument("--sweep", help="comma-separated sweep values in SI units")
    s.add_argument("--prep", choices=PREPARATIONS, help="state preparation for spectroscopy")
    s.add_argument("--rate-method", choices=RATE_METHODS, help="how temp-sweep measures kappa_tot")
    s.add_argument("--ideal-gate", action="store_true", help="instantaneous ideal 2pi gate in preparation")
    s.set_defaults(func=cmd_sim)

    r = sub.add_parser("rerun", help="reproduce a run from its manifest")
    r.add_argument("manifest", type=Path)
    r.add_argument("--out", type=Path)
    r.add_argument("--jobs", type=int)
    r.set_defaults(func=cmd_rerun)

    d = sub.add_parser("design", help="microwave design calculators")
    d.add_argument("calc", choices=("cutoff", "suppression", "quarterwave", "participation", "josephson"))
    d.add_argument("--a-mm", type=float, default=5.0)
    d.add_argument("--f-ghz", type=float, default=4.25)
    d.add_argument("--l-mm", type=float, default=23.0)
    d.add_argument("--qint", type=float, default=7e7)
    d.add_argument("--p", type=float, default=2e-7)
    d.add_argument("--lj-nh", type=float)
    d.add_argument("--rn-ohm", type=float)
    d.add_argument("--gap-uv", type=float, default=180.0)
    d.set_defaults(func=cmd_design)

    f = sub.add_parser("fit", help="fit measured or simulated data from CSV")
    f.add_argument("kind", choices=("s21", "exp", "exp-of-exp", "ramsey"))
    f.add_argument("--in", dest="inp", type=Path, required=True)
    f.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
    f.add_argument("--baseline-tau", type=float, help="pin the Ramsey baseline decay time (s)")
    f.add_argument("--bootstrap", type=int, default=1000)
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(func=cmd_fit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    label = (getattr(args, "protocol", None) or getattr(args, "kind", None) or getattr(args, "calc", None)
             or str(getattr(args, "manifest", "")))
    try:
        return args.func(args)
    except (FitError, IntegrationFailure) as exc:
        print(f"qmem {args.command} {label}: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (QmemError, ValueError, ZeroDivisionError) as exc:
        print(f"qmem {args.command} {label}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
