"""Truncated Fock-space operator algebra.

Modes are ordered (storage, qubit[, readout]) and every operator carries the
:class:`SpaceSignature` of the space it acts on. Matrices are dense complex
arrays in the product Fock basis with the first mode most significant, i.e.
``index = n_0 * dims[1] * ... + n_1 * dims[2] * ... + ...`` (numpy ``kron``
ordering).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import (
    InvalidDimension,
    InvalidMode,
    InvalidState,
    SignatureMismatch,
    TruncationError,
)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-9
POSITIVITY_TOL = -1e-8


@dataclass(frozen=True)
class SpaceSignature:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise InvalidDimension("signature needs at least one mode")
        for d in dims:
            if d < 2:
                raise InvalidDimension(f"mode dimension {d} < 2")
        object.__setattr__(self, "dims", dims)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def __len__(self):
        return len(self.dims)

    def check_mode(self, mode: int) -> int:
        if not 0 <= mode < len(self.dims):
            raise InvalidMode(f"mode index {mode} out of range for {self.dims}")
        return mode

    def index(self, levels: Sequence[int]) -> int:
        """Flat basis index of the product state |levels>."""
        if len(levels) != len(self.dims):
            raise SignatureMismatch(f"{len(levels)} levels given for {len(self.dims)} modes")
        for n, d in zip(levels, self.dims):
            if not 0 <= n < d:
                raise InvalidDimension(f"level {n} outside dimension {d}")
        return int(np.ravel_multi_index(tuple(levels), self.dims))


def _as_signature(sig) -> SpaceSignature:
    if isinstance(sig, SpaceSignature):
        return sig
    if isinstance(sig, (int, np.integer)):
        return SpaceSignature((int(sig),))
    return SpaceSignature(tuple(sig))


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense operator on the space described by ``signature``."""

    signature: SpaceSignature
    data: np.ndarray

    def __post_init__(self):
        sig = _as_signature(self.signature)
        data = _frozen(self.data)
        n = sig.total
        if data.shape != (n, n):
            raise SignatureMismatch(f"matrix shape {data.shape} does not match dims {sig.dims}")
        object.__setattr__(self, "signature", sig)
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    def _check(self, other: "Operator"):
        if other.signature != self.signature:
            raise SignatureMismatch(f"{self.signature.dims} vs {other.signature.dims}")

    def dag(self) -> "Operator":
        return Operator(self.signature, self.data.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.signature, self.data @ other.data)
        return self.data @ np.asarray(other)

    def __add__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.signature, self.data + other.data)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.signature, self.data - other.data)
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return Operator(self.signature, self.data * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return Operator(self.signature, -self.data)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)

    def is_hermitian(self, atol=HERMITIAN_TOL) -> bool:
        return bool(np.allclose(self.data, self.data.conj().T, rtol=0, atol=atol))


class DensityMatrix(Operator):
    """Hermitian, unit-trace, positive semidefinite operator.

    Construction validates the invariants and stores the Hermitian part, so
    rounding asymmetry from integrators never accumulates.
    """

    def __init__(self, signature, data, *, trace_tol=TRACE_TOL, positivity_tol=POSITIVITY_TOL):
        super().__init__(signature, data)
        d = self.data
        scale = max(1.0, float(np.max(np.abs(d))))
        if not np.allclose(d, d.conj().T, rtol=0, atol=HERMITIAN_TOL * scale * d.shape[0]):
            raise InvalidState("density matrix is not Hermitian")
        herm = 0.5 * (d + d.conj().T)
        tr = np.trace(herm).real
        if abs(tr - 1.0) > trace_tol:
            raise InvalidState(f"trace {tr!r} differs from 1 by more than {trace_tol}")
        lam_min = float(np.linalg.eigvalsh(herm)[0])
        if lam_min < positivity_tol:
            raise InvalidState(f"negative eigenvalue {lam_min:.3e}")
        object.__setattr__(self, "data", _frozen(herm))

    @classmethod
    def from_ket(cls, signature, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(signature, np.outer(psi, psi.conj()))

    def populations(self) -> np.ndarray:
        return self.data.diagonal().real.copy()

    def purity(self) -> float:
        return float(np.real(np.trace(self.data @ self.data)))


# -- single-mode building blocks ------------------------------------------------

def annihilation(dim: int) -> Operator:
    """Truncated lowering operator with entries[n-1, n] = sqrt(n)."""
    if int(dim) < 2:
        raise InvalidDimension(f"dimension {dim} < 2")
    return Operator(SpaceSignature((dim,)), np.diag(np.sqrt(np.arange(1, dim)), 1))


def creation(dim: int) -> Operator:
    return annihilation(dim).dag()


def number(dim: int) -> Operator:
    if int(dim) < 2:
        raise InvalidDimension(f"dimension {dim} < 2")
    return Operator(SpaceSignature((dim,)), np.diag(np.arange(dim, dtype=float)))


def identity(signature) -> Operator:
    sig = _as_signature(signature)
    return Operator(sig, np.eye(sig.total))


def basis(dim: int, n: int) -> np.ndarray:
    if not 0 <= n < dim:
        raise InvalidDimension(f"level {n} outside dimension {dim}")
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return v


def tensor(*ops) -> Operator:
    """Kronecker product of operators in mode order."""
    mats = [np.asarray(o.data if isinstance(o, Operator) else o) for o in ops]
    dims = []
    for o, m in zip(ops, mats):
        dims.extend(o.signature.dims if isinstance(o, Operator) else (m.shape[0],))
    return Operator(SpaceSignature(tuple(dims)), reduce(np.kron, mats))


def embed(op, mode_index: int, signature) -> Operator:
    """Lift a single-mode operator to ``signature``, identity elsewhere."""
    sig = _as_signature(signature)
    sig.check_mode(mode_index)
    mat = np.asarray(op.data if isinstance(op, Operator) else op, dtype=complex)
    if mat.shape != (sig.dims[mode_index],) * 2:
        raise SignatureMismatch(
            f"operator of size {mat.shape[0]} cannot act on mode {mode_index} (dim {sig.dims[mode_index]})"
        )
    left = int(np.prod(sig.dims[:mode_index]))
    right = int(np.prod(sig.dims[mode_index + 1:]))
    full = np.kron(np.kron(np.eye(left), mat), np.eye(right))
    return Operator(sig, full)


def mode_operators(signature) -> list[Operator]:
    """Embedded lowering operator for every mode of ``signature``."""
    sig = _as_signature(signature)
    return [embed(annihilation(d), i, sig) for i, d in enumerate(sig.dims)]


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def expm(matrix) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade approximants)."""
    return scipy.linalg.expm(np.asarray(matrix))


# -- coherent states -------------------------------------------------------------

def _check_truncation(beta, dim):
    if abs(beta) ** 2 > dim / 3:
        raise TruncationError(
            f"|beta|^2 = {abs(beta) ** 2:.3g} exceeds truncation budget dim/3 = {dim / 3:.3g}"
        )


def displacement_operator(beta: complex, dim: int) -> Operator:
    """exp(beta a^dag - beta^* a) on the truncated space."""
    if int(dim) < 2:
        raise InvalidDimension(f"dimension {dim} < 2")
    _check_truncation(beta, dim)
    a = annihilation(dim).data
    gen = beta * a.conj().T - np.conj(beta) * a
    return Operator(SpaceSignature((dim,)), expm(gen))


def coherent_amplitudes(beta: complex, dim: int) -> np.ndarray:
    """Fock amplitudes of |beta>, renormalized on the truncated space."""
    n = np.arange(dim)
    log_fact = np.cumsum(np.concatenate([[0.0], np.log(np.arange(1, dim))]))
    mag = np.exp(-0.5 * abs(beta) ** 2 + n * np.log(abs(beta)) - 0.5 * log_fact) if beta != 0 else (n == 0) * 1.0
    phase = np.exp(1j * n * np.angle(beta))
    psi = mag * phase
    return psi / np.linalg.norm(psi)


def coherent_state(beta: complex, dim: int) -> DensityMatrix:
    if int(dim) < 2:
        raise InvalidDimension(f"dimension {dim} < 2")
    _check_truncation(beta, dim)
    return DensityMatrix.from_ket(SpaceSignature((dim,)), coherent_amplitudes(beta, dim))


def fock_state(dim: int, n: int) -> DensityMatrix:
    return DensityMatrix.from_ket(SpaceSignature((dim,)), basis(dim, n))


def thermal_qubit(p_e: float, dim: int = 2) -> DensityMatrix:
    pops = np.zeros(dim)
    pops[0], pops[1] = 1.0 - p_e, p_e
    return DensityMatrix(SpaceSignature((dim,)), np.diag(pops))


def product(*states: Operator) -> DensityMatrix:
    op = tensor(*states)
    return DensityMatrix(op.signature, op.data)


# -- state functionals -----------------------------------------------------------

def partial_trace(rho: Operator, keep_modes: Sequence[int]) -> DensityMatrix:
    sig = rho.signature
    keep = sorted({sig.check_mode(m) for m in keep_modes})
    if not keep:
        raise InvalidMode("keep_modes must name at least one mode")
    n = len(sig.dims)
    t = np.asarray(rho.data).reshape(sig.dims * 2)
    letters = "abcdefghijklmnop"
    row = [letters[i] for i in range(n)]
    col = [letters[i] if i not in keep else letters[i].upper() for i in range(n)]
    out = "".join(letters[i] for i in keep) + "".join(letters[i].upper() for i in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    kdims = tuple(sig.dims[i] for i in keep)
    d = int(np.prod(kdims))
    return DensityMatrix(SpaceSignature(kdims), reduced.reshape(d, d))


def expectation(rho: Operator, op: Operator) -> complex:
    if rho.signature != op.signature:
        raise SignatureMismatch(f"{rho.signature.dims} vs {op.signature.dims}")
    return complex(np.einsum("ij,ji->", rho.data, op.data))


def _clean_spectrum(lam: np.ndarray) -> np.ndarray:
    # eigenvalues at round-off level would otherwise contribute sqrt(eps) each
    floor = lam.size * np.finfo(float).eps * max(float(np.max(np.abs(lam))), 1e-300)
    return np.where(lam > floor, lam, 0.0)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    lam, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(_clean_spectrum(lam))) @ v.conj().T


def fidelity(rho: Operator, sigma: Operator) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    if rho.signature != sigma.signature:
        raise SignatureMismatch(f"{rho.signature.dims} vs {sigma.signature.dims}")
    s = _psd_sqrt(np.asarray(rho.data))
    inner = s @ np.asarray(sigma.data) @ s
    mu = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(_clean_spectrum(mu))) ** 2)
