"""Lindblad propagation with piecewise drives and cached idle propagators.

Density matrices are vectorized row-major, ``vec(rho) = rho.reshape(-1)``, so
``vec(A rho B) = kron(A, B.T) @ vec(rho)``.

Pulsed segments are integrated with fixed-step classic RK4 on the matrix form
of the master equation. Idle segments use ``exp(L dt)``; the idle Liouvillian
of the dispersive Hamiltonian only couples elements with equal excitation
differences, so the exponential is taken block by block on the connected
components of its sparsity graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import IntegrationFailure, SignatureMismatch
from .operators import DensityMatrix, Operator, SpaceSignature, annihilation, embed, expm
from .system import HZ_TO_RAD_PER_US, CollapseChannel, SystemParams, build_hamiltonian, collapse_channels


# -- schedule types --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DriveTerm:
    """``envelope(t) * exp(-i 2pi detuning t) X^dag + h.c.`` on one mode.

    ``envelope`` returns rad/us for local segment time ``t`` in us;
    ``detuning`` is in Hz relative to the mode's rotating frame, or an array
    of detunings, one per row of a batched propagation. ``lowering``
    optionally replaces the embedded mode operator by a full-space matrix
    (e.g. a single projected transition).
    """

    mode: int
    envelope: Callable[[float], complex]
    detuning: float | np.ndarray = 0.0
    lowering: np.ndarray | None = None


@dataclass(frozen=True)
class PulseSegment:
    duration: float
    drives: tuple[DriveTerm, ...] = ()
    max_step: float | None = None
    label: str = ""

    def __post_init__(self):
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValueError(f"segment duration must be positive, got {self.duration!r}")
        object.__setattr__(self, "drives", tuple(self.drives))


@dataclass(frozen=True)
class Delay:
    duration: float
    label: str = "delay"

    def __post_init__(self):
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise ValueError(f"delay duration must be >= 0, got {self.duration!r}")


@dataclass(frozen=True)
class Schedule:
    segments: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(s for s in self.segments if s is not None))

    def __add__(self, other):
        if isinstance(other, Schedule):
            return Schedule(self.segments + other.segments)
        if isinstance(other, (PulseSegment, Delay)):
            return Schedule(self.segments + (other,))
        return NotImplemented

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def __len__(self):
        return len(self.segments)


@dataclass
class Trajectory:
    times: np.ndarray
    states: list = field(default_factory=list)
    expect: dict = field(default_factory=dict)
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def final(self) -> DensityMatrix:
        return self.states[-1]


@dataclass(frozen=True)
class Tolerances:
    step_fraction: float = 1.0 / 50.0  # RK4 step <= step_fraction * segment.max_step (sigma_t)
    state_tol: float = 1e-8
    min_step: float = 1e-7
    max_halvings: int = 8
    trace_tol_per_ms: float = 1e-9
    positivity_tol: float = -1e-8


DEFAULT_TOLERANCES = Tolerances()


# -- generators ------------------------------------------------------------------

def _jump_matrices(channels) -> list[np.ndarray]:
    out = []
    for ch in channels:
        out.append(ch.jump() if isinstance(ch, CollapseChannel) else np.asarray(ch, dtype=complex))
    return out


def _liouvillian_sparse(h: np.ndarray, jumps: Sequence[np.ndarray]) -> sp.csr_matrix:
    n = h.shape[0]
    eye = sp.identity(n, dtype=complex, format="csr")
    hs = sp.csr_matrix(h)
    gen = -1j * (sp.kron(hs, eye) - sp.kron(eye, hs.T))
    for L in jumps:
        Ls = sp.csr_matrix(L)
        LdL = (Ls.conj().T @ Ls).tocsr()
        gen = gen + sp.kron(Ls, Ls.conj()) - 0.5 * sp.kron(LdL, eye) - 0.5 * sp.kron(eye, LdL.T)
    return sp.csr_matrix(gen)


def liouvillian(H, channels) -> np.ndarray:
    """Dense Lindblad generator acting on row-major ``vec(rho)``.

    ``channels`` are :class:`CollapseChannel` objects or bare jump matrices
    already scaled to internal units.
    """
    h = np.asarray(H.data if isinstance(H, Operator) else H, dtype=complex)
    jumps = _jump_matrices(channels)
    for L in jumps:
        if L.shape != h.shape:
            raise SignatureMismatch(f"jump operator shape {L.shape} vs Hamiltonian {h.shape}")
    return _liouvillian_sparse(h, jumps).toarray()


def apply_liouvillian(h: np.ndarray, jumps: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """Matrix form of L[rho]; used by the integrator and as a cross-check."""
    out = -1j * (h @ rho - rho @ h)
    for L in jumps:
        Ld = L.conj().T
        LdL = Ld @ L
        out += L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)
    return out


# -- block propagators -----------------------------------------------------------

class Propagator:
    """Block-diagonal superoperator ``exp(L dt)`` acting on vectorized states."""

    def __init__(self, size: int, blocks: list[tuple[np.ndarray, np.ndarray]]):
        self.size = size
        self.blocks = blocks
        self._pow2 = {0: self}

    @classmethod
    def from_generator(cls, gen: sp.spmatrix, dt: float) -> "Propagator":
        gen = sp.csr_matrix(gen)
        gen.eliminate_zeros()
        pattern = (abs(gen) + abs(gen.T)).tocsr()
        ncomp, labels = connected_components(pattern, directed=False)
        order = np.argsort(labels, kind="stable")
        bounds = np.searchsorted(labels[order], np.arange(ncomp + 1))
        blocks = []
        for k in range(ncomp):
            idx = order[bounds[k]:bounds[k + 1]]
            sub = gen[idx][:, idx].toarray()
            blocks.append((idx, expm(sub * dt)))
        return cls(gen.shape[0], blocks)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        out = np.empty_like(vec, dtype=complex)
        for idx, m in self.blocks:
            out[idx] = m @ vec[idx]
        return out

    def apply_rho(self, rho: np.ndarray) -> np.ndarray:
        n = rho.shape[0]
        return self.apply(rho.reshape(-1)).reshape(n, n)

    def compose(self, other: "Propagator") -> "Propagator":
        """``self @ other``; both must share the block structure."""
        blocks = [(i, m @ m2) for (i, m), (_, m2) in zip(self.blocks, other.blocks)]
        return Propagator(self.size, blocks)

    def _power2(self, j: int) -> "Propagator":
        if j not in self._pow2:
            half = self._power2(j - 1)
            self._pow2[j] = half.compose(half)
        return self._pow2[j]

    def apply_power(self, vec: np.ndarray, k: int) -> np.ndarray:
        """Apply ``self**k`` by binary decomposition of cached squarings."""
        if k < 0:
            raise ValueError("negative power")
        j = 0
        while k:
            if k & 1:
                vec = self._power2(j).apply(vec)
            k >>= 1
            j += 1
        return vec

    def power(self, k: int) -> "Propagator":
        blocks = [(i, np.eye(len(i), dtype=complex)) for i, _ in self.blocks]
        result = Propagator(self.size, blocks)
        j = 0
        while k:
            if k & 1:
                result = result.compose(self._power2(j))
            k >>= 1
            j += 1
        return result

    def dense(self) -> np.ndarray:
        out = np.zeros((self.size, self.size), dtype=complex)
        for idx, m in self.blocks:
            out[np.ix_(idx, idx)] = m
        return out


@lru_cache(maxsize=64)
def _cached_idle(key: tuple, dims: tuple, dt: float) -> Propagator:
    params = SystemParams(*key)
    sig = SpaceSignature(dims)
    h = build_hamiltonian(params, sig).data
    jumps = _jump_matrices(collapse_channels(params, sig))
    return Propagator.from_generator(_liouvillian_sparse(np.asarray(h), jumps), dt)


def idle_propagator(params: SystemParams, dt: float, signature: SpaceSignature) -> Propagator:
    """Cached ``exp(L_idle dt)`` for drive-free evolution (``dt`` in us)."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    return _cached_idle(params.cache_key(), tuple(signature.dims), float(dt))


def clear_propagator_cache():
    _cached_idle.cache_clear()


# -- pulsed integration ----------------------------------------------------------

def _drive_ops(signature: SpaceSignature, segment: PulseSegment):
    terms = []
    for d in segment.drives:
        signature.check_mode(d.mode)
        if d.lowering is not None:
            a = np.asarray(d.lowering, dtype=complex)
            if a.shape != (signature.total,) * 2:
                raise SignatureMismatch(f"drive operator shape {a.shape} does not match {signature.dims}")
        else:
            a = embed(annihilation(signature.dims[d.mode]), d.mode, signature).data
        w = HZ_TO_RAD_PER_US * np.asarray(d.detuning, dtype=float)
        if w.ndim == 1:
            w = w[:, None, None]  # one detuning per batch row
        terms.append((d.envelope, w, a, a.conj().T))
    return terms


def _drive_hamiltonian(terms, t):
    h = None
    for env, w, a, ad in terms:
        c = complex(env(t)) * np.exp(-1j * w * t)
        if not np.any(c):
            continue
        term = c * ad + np.conj(c) * a
        h = term if h is None else h + term
    return h


def rk4_segment(rho: np.ndarray, segment: PulseSegment, h0: np.ndarray, jumps, signature, n_steps: int) -> np.ndarray:
    """Fixed-step classic RK4 over one pulsed segment."""
    terms = _drive_ops(signature, segment)
    heff = h0 - 0.5j * sum((L.conj().T @ L for L in jumps), np.zeros_like(h0))
    heff_d = heff.conj().T
    recycled = [(L, L.conj().T) for L in jumps]

    def rhs(t, r):
        out = -1j * (heff @ r - r @ heff_d)
        for L, Ld in recycled:
            out += L @ r @ Ld
        hd = _drive_hamiltonian(terms, t)
        if hd is not None:
            out += -1j * (hd @ r - r @ hd)
        return out

    h = segment.duration / n_steps
    t = 0.0
    r = np.array(rho, dtype=complex)
    for i in range(n_steps):
        t = i * h
        k1 = rhs(t, r)
        k2 = rhs(t + 0.5 * h, r + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, r + 0.5 * h * k2)
        k4 = rhs(t + h, r + h * k3)
        r = r + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(r)):
        raise IntegrationFailure("non-finite state in RK4", {"segment": segment.label, "steps": n_steps})
    return r


def _generator_scale(h0, jumps, signature, segment) -> float:
    """Crude bound on the generator norm, for the RK4 stability limit."""
    scale = np.max(np.abs(np.diag(h0))) if h0.size else 0.0
    scale += sum(np.linalg.norm(L, 2) ** 2 for L in jumps)
    if segment.drives:
        ts = np.linspace(0.0, segment.duration, 33)
        for d in segment.drives:
            amp = max(abs(complex(d.envelope(t))) for t in ts)
            dim = signature.dims[d.mode]
            scale += 2 * amp * math.sqrt(dim - 1) + float(np.max(np.abs(HZ_TO_RAD_PER_US * np.asarray(d.detuning))))
    return float(scale)


def _initial_steps(segment, h0, jumps, signature, tol: Tolerances) -> int:
    hint = segment.max_step * tol.step_fraction if segment.max_step is not None else segment.duration
    step = min(hint, segment.duration, 1.0 / max(_generator_scale(h0, jumps, signature, segment), 1e-12))
    return max(1, math.ceil(segment.duration / step))


def _converge(run, n: int, segment, tol: Tolerances):
    """Double the RK4 step count until successive results agree to ``state_tol``."""
    coarse = run(n)
    for _ in range(tol.max_halvings):
        if segment.duration / (2 * n) < tol.min_step:
            break
        fine = run(2 * n)
        change = float(np.max(np.abs(fine - coarse)))
        if change < tol.state_tol:
            return fine
        coarse, n = fine, 2 * n
    raise IntegrationFailure(
        "step-size underflow: RK4 did not converge",
        {"segment": segment.label, "steps": n, "step": segment.duration / n, "duration": segment.duration},
    )


def integrate_segment(rho, segment, h0, jumps, signature, tol: Tolerances = DEFAULT_TOLERANCES):
    """RK4 with automatic step halving until successive results agree."""
    n = _initial_steps(segment, h0, jumps, signature, tol)
    return _converge(lambda k: rk4_segment(rho, segment, h0, jumps, signature, k), n, segment, tol)


def evolve_subspace(rho: DensityMatrix, segment: PulseSegment, params: SystemParams, mask: np.ndarray,
                    tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Propagate only the density-matrix elements selected by ``mask``.

    Exact when the generator never feeds selected elements from unselected
    ones, which is checked. A typical use: with no storage drive, the
    storage-diagonal blocks rho_(n,n) evolve on their own, which shrinks a
    qubit-probe problem from N^2 to ds * dq^2 components. Drives may carry
    an array of detunings; the result then has one row per detuning.
    Returns (B, n, n) with unselected elements set to zero.
    """
    sig = rho.signature
    N = sig.total
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (N, N):
        raise SignatureMismatch(f"mask shape {mask.shape} does not match {sig.dims}")
    keep = np.flatnonzero(mask.reshape(-1))
    rest = np.flatnonzero(~mask.reshape(-1))
    h0 = np.asarray(build_hamiltonian(params, sig).data)
    jumps = _jump_matrices(collapse_channels(params, sig))
    eye = sp.identity(N, dtype=complex, format="csr")

    def reduce(M):
        M = sp.csr_matrix(M)
        leak = M[keep][:, rest]
        leak.eliminate_zeros()
        if leak.nnz:
            raise ValueError("selected elements are fed by unselected ones; subspace not closed")
        return M[keep][:, keep].toarray()

    L0 = reduce(_liouvillian_sparse(h0, jumps))
    drives, batch = [], 1
    for env, w, a, ad in _drive_ops(sig, segment):
        w = np.atleast_1d(np.asarray(w, dtype=float)).reshape(-1)
        batch = max(batch, w.size)
        sp_ = -1j * (sp.kron(sp.csr_matrix(ad), eye) - sp.kron(eye, sp.csr_matrix(ad).T))
        sm_ = -1j * (sp.kron(sp.csr_matrix(a), eye) - sp.kron(eye, sp.csr_matrix(a).T))
        drives.append((env, w, reduce(sp_).T.copy(), reduce(sm_).T.copy()))
    L0t = L0.T.copy()
    v0 = np.broadcast_to(np.asarray(rho.data).reshape(-1)[keep], (batch, keep.size)).astype(complex)

    def rhs(t, v):
        out = v @ L0t
        for env, w, spt, smt in drives:
            c = (complex(env(t)) * np.exp(-1j * w * t))[:, None]
            out = out + c * (v @ spt) + np.conj(c) * (v @ smt)
        return out

    def run(n_steps):
        h = segment.duration / n_steps
        v = v0.copy()
        for i in range(n_steps):
            t = i * h
            k1 = rhs(t, v)
            k2 = rhs(t + 0.5 * h, v + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, v + 0.5 * h * k2)
            k4 = rhs(t + h, v + h * k3)
            v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(v)):
            raise IntegrationFailure("non-finite state in RK4", {"segment": segment.label, "steps": n_steps})
        return v

    v = _converge(run, _initial_steps(segment, h0, jumps, sig, tolerances), segment, tolerances)
    out = np.zeros((batch, N * N), dtype=complex)
    out[:, keep] = v
    return out.reshape(batch, N, N)


# -- evolve ----------------------------------------------------------------------

def _as_matrix(rho0):
    if isinstance(rho0, Operator):
        return rho0.signature, np.array(rho0.data)
    raise TypeError("rho0 must be a DensityMatrix")


def evolve(rho0: DensityMatrix, schedule: Schedule, params: SystemParams,
           tolerances: Tolerances = DEFAULT_TOLERANCES, e_ops: dict | None = None,
           store_states: bool = True) -> Trajectory:
    """Propagate ``rho0`` through ``schedule``; samples at every segment end."""
    signature, rho = _as_matrix(rho0)
    h0 = np.asarray(build_hamiltonian(params, signature).data)
    jumps = _jump_matrices(collapse_channels(params, signature))
    e_ops = dict(e_ops or {})

    times, states, labels = [0.0], [], ["start"]
    expect = {k: [] for k in e_ops}

    def record(r, t_ms):
        if store_states:
            states.append(_checked(signature, r, t_ms, tolerances))
        for k, op in e_ops.items():
            m = np.asarray(op.data if isinstance(op, Operator) else op)
            expect[k].append(complex(np.einsum("ij,ji->", r, m)))

    record(rho, 0.0)
    t = 0.0
    for seg in schedule.segments:
        if seg.duration == 0:
            continue
        if isinstance(seg, Delay):
            rho = idle_propagator(params, seg.duration, signature).apply_rho(rho)
        else:
            rho = integrate_segment(rho, seg, h0, jumps, signature, tolerances)
        t_new = t + seg.duration
        if t_new == t:
            # below float resolution of the clock: replace the last sample
            times.pop()
            labels.pop()
            if store_states:
                states.pop()
            for v in expect.values():
                v.pop()
        t = t_new
        times.append(t)
        labels.append(seg.label)
        record(rho, t * 1e-3)
    if not store_states:
        states.append(_checked(signature, rho, t * 1e-3, tolerances))
    return Trajectory(np.array(times), states, {k: np.array(v) for k, v in expect.items()}, labels)


def evolve_batch(rhos: np.ndarray, segment: PulseSegment, params: SystemParams,
                 signature: SpaceSignature, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Propagate a stack of density matrices (B, n, n) through one pulsed segment.

    All rows share the step size, chosen so that every row meets the
    convergence tolerance.
    """
    rhos = np.asarray(rhos, dtype=complex)
    if rhos.ndim != 3 or rhos.shape[1:] != (signature.total,) * 2:
        raise SignatureMismatch(f"expected a (B, {signature.total}, {signature.total}) stack, got {rhos.shape}")
    h0 = np.asarray(build_hamiltonian(params, signature).data)
    jumps = _jump_matrices(collapse_channels(params, signature))
    return integrate_segment(rhos, segment, h0, jumps, signature, tolerances)


def _checked(signature, r, t_ms, tol: Tolerances) -> DensityMatrix:
    trace_tol = max(tol.trace_tol_per_ms * max(t_ms, 1.0), 1e-9)
    return DensityMatrix(signature, r, trace_tol=trace_tol, positivity_tol=tol.positivity_tol)


def propagate_delays(rho: DensityMatrix, delays: Sequence[float], params: SystemParams,
                     quantum: float | None = None) -> list[np.ndarray]:
    """States after each idle delay, reusing one propagator at ``quantum``.

    Delays must be integer multiples of the quantum (in us).
    """
    signature, r = _as_matrix(rho)
    delays = np.asarray(delays, dtype=float)
    if delays.size == 0:
        return []
    if np.any(delays < 0):
        raise ValueError("delays must be >= 0")
    if quantum is None:
        quantum = delay_quantum(delays)
    steps = np.rint(delays / quantum).astype(np.int64)
    if not np.allclose(steps * quantum, delays, rtol=1e-9, atol=1e-12):
        raise ValueError("delays are not integer multiples of the sweep quantum")
    prop = idle_propagator(params, quantum, signature)
    n = r.shape[0]
    order = np.argsort(steps, kind="stable")
    out: list = [None] * len(steps)
    vec = r.reshape(-1).astype(complex)
    done = 0
    for i in order:
        vec = prop.apply_power(vec, int(steps[i] - done))
        done = int(steps[i])
        out[i] = vec.reshape(n, n).copy()
    return out


def delay_quantum(delays) -> float:
    """Largest quantum that divides all delays (to 1e-9 relative)."""
    d = np.asarray([x for x in delays if x > 0], dtype=float)
    if d.size == 0:
        return 1.0
    q = d.min()
    for _ in range(60):
        k = np.rint(d / q)
        if np.allclose(k * q, d, rtol=1e-9, atol=1e-12):
            return float(q)
        q = q / 2
    raise ValueError("delays have no common quantum; place them on a uniform grid")
