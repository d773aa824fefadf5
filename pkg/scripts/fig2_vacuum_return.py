"""Vacuum return of a displaced cavity (beta0 = 3) and the fitted decay rate."""

from _run_protocols import run

if __name__ == "__main__":
    run([("coherent-decay", ["coherent-decay", "--storage-dim", "60"])], "figures/fig2", __doc__)
