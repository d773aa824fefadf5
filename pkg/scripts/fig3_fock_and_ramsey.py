"""One-photon energy decay and the cavity Ramsey fringe."""

from _run_protocols import run

if __name__ == "__main__":
    run([("fock-t1", ["fock-t1"]), ("ramsey", ["ramsey"])], "figures/fig3", __doc__)
