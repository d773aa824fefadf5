"""Photon-number-resolved qubit spectroscopy after Fock and superposition preparation."""

from _run_protocols import run

if __name__ == "__main__":
    run([("fock", ["spectroscopy", "--prep", "fock"]),
         ("superposition", ["spectroscopy", "--prep", "superposition"])], "figures/figS2", __doc__)
