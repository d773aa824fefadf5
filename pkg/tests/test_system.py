import json
import math

import numpy as np
import pytest

from qmem.errors import ConfigError, InvalidPopulation, SignatureMismatch
from qmem.lindblad import liouvillian
from qmem.operators import SpaceSignature
from qmem.system import (CONFIG_KEYS, DEVICE_PARAMS, TWO_PI, SystemParams, build_hamiltonian, collapse_channels,
                         default_signature, josephson_energy, l_j_from_resistance, load_params,
                         params_from_dict, params_to_dict, qubit_transition_frequency)

RAD_PER_US = TWO_PI * 1e-6


def _zero_couplings(**kw):
    return SystemParams(chi_sq=0, chi_rq=0, chi_sr=0, K_s=0, K_q=0, K_r=0, **kw)


def test_zero_couplings_give_zero_hamiltonian():
    for sig in (default_signature(5, 2), default_signature(4, 3, 3)):
        assert np.all(build_hamiltonian(_zero_couplings(), sig).data == 0)


def test_hamiltonian_diagonal_and_hermitian():
    sig = default_signature(6, 3, 3)
    h = np.asarray(build_hamiltonian(DEVICE_PARAMS, sig).data)
    assert np.allclose(h, np.diag(np.diag(h)), atol=0)
    assert np.max(np.abs(h - h.conj().T)) < 1e-12


def test_dispersive_shift_eigenvalue():
    sig = default_signature(4, 2)
    e = np.real(np.diag(build_hamiltonian(DEVICE_PARAMS, sig).data))
    E = lambda n, q: e[sig.index([n, q])]
    shift = E(1, 1) - E(1, 0) - E(0, 1) + E(0, 0)
    assert shift == pytest.approx(-RAD_PER_US * 4.99e5, rel=1e-12)


def test_qubit_kerr_in_three_level_qubit():
    sig = default_signature(3, 3)
    e = np.real(np.diag(build_hamiltonian(DEVICE_PARAMS, sig).data))
    f_level = e[sig.index([0, 2])]
    assert f_level == pytest.approx(-RAD_PER_US * 1.46e8, rel=1e-12)


def test_bad_signature():
    with pytest.raises(SignatureMismatch):
        build_hamiltonian(DEVICE_PARAMS, SpaceSignature((4,)))


def test_transition_frequencies():
    p = DEVICE_PARAMS
    assert qubit_transition_frequency(p, 0) == p.omega_q
    assert qubit_transition_frequency(p, 1) == pytest.approx(p.omega_q - 4.99e5)
    diffs = np.diff([qubit_transition_frequency(p, n, "rotating") for n in range(6)])
    assert np.allclose(diffs, -p.chi_sq)


def test_channels():
    sig = default_signature(4, 2)
    labels = {c.label for c in collapse_channels(DEVICE_PARAMS.replace(P_e=0.0), sig)}
    assert "qubit thermal excitation" not in labels
    up = [c for c in collapse_channels(DEVICE_PARAMS, sig) if c.label == "qubit thermal excitation"][0]
    assert up.rate == pytest.approx(1.322e3, rel=1e-3)
    with pytest.raises(InvalidPopulation):
        DEVICE_PARAMS.replace(P_e=0.5)


def test_unique_steady_state_has_thermal_population():
    # oracle: null vector of the dense Liouvillian
    sig = default_signature(2, 2)
    p = DEVICE_PARAMS.replace(kappa=0.0)
    L = liouvillian(build_hamiltonian(p, sig), collapse_channels(p, sig))
    w, v = np.linalg.eig(L)
    order = np.argsort(np.abs(w))
    assert abs(w[order[0]]) < 1e-12
    # storage has no decay here, so the null space is two-dimensional (one per
    # storage population); qubit population must be P_e in each block
    rho = v[:, order[0]].reshape(4, 4)
    rho = rho / np.trace(rho)
    pops = np.real(np.diag(rho)).reshape(2, 2)
    pe = pops[:, 1].sum() / pops.sum()
    assert pe == pytest.approx(0.008, abs=1e-4)
    p2 = DEVICE_PARAMS
    L2 = liouvillian(build_hamiltonian(p2, sig), collapse_channels(p2, sig))
    w2 = np.sort(np.abs(np.linalg.eigvals(L2)))
    assert w2[0] < 1e-12 < w2[1]


def test_josephson():
    assert josephson_energy(4.5e-9) == pytest.approx(150.6, rel=0.01)
    assert josephson_energy(45e-9) == pytest.approx(josephson_energy(4.5e-9) / 10, rel=1e-12)
    assert l_j_from_resistance(3.5e3, 180e-6) == pytest.approx(4.1e-9, rel=0.03)
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            josephson_energy(bad)
        with pytest.raises(ValueError):
            l_j_from_resistance(bad)


def test_config_round_trip(tmp_path):
    d = params_to_dict(DEVICE_PARAMS)
    assert set(d) == set(CONFIG_KEYS)
    p = params_from_dict(d)
    assert p.kappa == pytest.approx(DEVICE_PARAMS.kappa, rel=1e-14)
    assert p.gamma == pytest.approx(DEVICE_PARAMS.gamma, rel=1e-14)
    assert p.gamma_phi_q == pytest.approx(DEVICE_PARAMS.gamma_phi_q, rel=1e-12)
    f = tmp_path / "cfg.json"
    f.write_text(json.dumps(d))
    assert load_params(f).P_e == 0.008


@pytest.mark.parametrize("key", CONFIG_KEYS)
def test_missing_key_named(key):
    d = params_to_dict(DEVICE_PARAMS)
    del d[key]
    with pytest.raises(ConfigError, match=key):
        params_from_dict(d)


def test_bad_config_values(tmp_path):
    d = params_to_dict(DEVICE_PARAMS)
    d["p_e"] = "lots"
    with pytest.raises(ConfigError, match="p_e"):
        params_from_dict(d)
    f = tmp_path / "bad.json"
    f.write_text("{not json")
    with pytest.raises(ConfigError):
        load_params(f)


def test_t2_matches_times():
    assert DEVICE_PARAMS.t1q == pytest.approx(6.1e-6)
    assert DEVICE_PARAMS.t2q == pytest.approx(10e-6)
    assert math.isinf(DEVICE_PARAMS.replace(gamma=0.0, gamma_phi_q=0.0).t2q)
