"""Evanescent decay into the waveguide section and an S21 circle fit of a synthetic trace."""

import argparse
from pathlib import Path

import numpy as np

from qmem.design import WaveguideGeometry, propagation_constant, s21_circle_fit, synthetic_trace
from qmem.experiments.io import write_json, write_sweep_csv
from qmem.plot import svg_plot


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("figures/fig1"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    geo = WaveguideGeometry()
    beta = propagation_constant(4.25e9, geo.a)
    z = np.linspace(0.0, geo.L, 47)
    e = np.exp(-2 * abs(beta) * z)
    write_sweep_csv(args.out / "energy_vs_z.csv", z, np.log10(e))
    (args.out / "energy_vs_z.svg").write_text(svg_plot(z, np.log10(e), xlabel="z (mm)",
                                                       ylabel="log10 energy density", title="evanescent decay"))

    f, s = synthetic_trace(4.25e9, 7e7, 1e9, phi=0.05, snr_db=40, seed=args.seed)
    fit = s21_circle_fit(f, s)
    write_sweep_csv(args.out / "s21_magnitude.csv", f, np.abs(s))
    (args.out / "s21_magnitude.svg").write_text(svg_plot(f - 4.25e9, np.abs(s), xlabel="f - 4.25 GHz (Hz)",
                                                         ylabel="|S21|", title="notch resonance"))
    write_json(args.out / "summary.json", {"suppression_at_L": geo.suppression(4.25e9),
                                           "decay_length_mm": 1 / abs(beta),
                                           "s21_fit": fit.to_dict()})
    print(f"suppression {geo.suppression(4.25e9):.3e}; Q_int {fit['Q_int']:.4g}")


if __name__ == "__main__":
    main()
