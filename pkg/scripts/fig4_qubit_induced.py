"""Storage decay against qubit decay over temperature, and dephasing against P_e."""

from _run_protocols import run

if __name__ == "__main__":
    run([("temp-sweep", ["temp-sweep"]), ("pe-sweep", ["pe-sweep"])], "figures/fig4", __doc__)
