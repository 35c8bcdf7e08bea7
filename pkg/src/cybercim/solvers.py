"""Open-loop CIM, closed-loop CIM (chaotic amplitude control), Jacobi SOR and
the alternating L0-regularised compressed-sensing minimiser.

Every runner alternates a local-field pass (``kernel.local_field``) with a
per-spin time-evolution update.  The update is a separate ``*_step``
function taking ``(state, h, pump, ...)`` and returning the next state, so a
different stepper can reuse the same loop.

All dynamical arithmetic runs in the precision of the instance (float32
unless converted).  Energies are evaluated in float64 on the binarised
readout.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng
from .core import (
    EnergyTrace,
    HamiltonianMode,
    SolverState,
    heaviside,
    ising_energy,
    qubo_energy,
    spins_from_amplitudes,
)
from .errors import DivergenceError, ValidationError
from .kernel import CYCLES_PER_UPDATE, TilingConfig, estimate_cycles_sequential, local_field
from .schedules import (
    PumpScheduleClosed,
    PumpScheduleOpen,
    ThresholdSchedule,
    pump_closed,
    pump_open,
    pump_sequence,
)

__all__ = [
    "OpenLoopConfig",
    "ClosedLoopConfig",
    "SorConfig",
    "AlternatingConfig",
    "Recording",
    "RunResult",
    "open_loop_step",
    "closed_loop_step",
    "sor_step",
    "run_open_loop",
    "run_closed_loop",
    "run_jacobi_sor",
    "run_alternating",
    "DIVERGENCE_LIMIT",
]

DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class OpenLoopConfig:
    """Wigner-SDE integration parameters.  ``gs2`` is the squared saturation
    parameter; ``chi`` selects ``F(h) = h`` or ``|h|``."""

    dt: float = 0.1
    k_gain: float = 0.5
    gs2: float = 1e-7
    eta: float = 0.0
    chi: str = "identity"
    p_max: float = 2.0
    n_step: int = 101
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError(f"must be > 0, got {self.dt}", "dt")
        if self.n_step < 1:
            raise ValidationError(f"must be >= 1, got {self.n_step}", "n_step")
        if self.gs2 < 0:
            raise ValidationError(f"must be >= 0, got {self.gs2}", "gs2")
        if self.chi not in ("identity", "absolute"):
            raise ValidationError(f"must be 'identity' or 'absolute', got {self.chi!r}", "chi")

    @property
    def pump(self):
        return PumpScheduleOpen(self.p_max, self.n_step, self.dt)


@dataclass(frozen=True)
class ClosedLoopConfig:
    dt: float = 0.02
    k_gain: float = 0.1
    lam: float = 0.0
    tau: float = 1.0
    beta: float = 1.0
    p_tr: float = 1.0
    dp: float = 0.6
    n_step: int = 501
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError(f"must be > 0, got {self.dt}", "dt")
        if self.n_step < 1:
            raise ValidationError(f"must be >= 1, got {self.n_step}", "n_step")
        if not self.tau > 0:
            raise ValidationError(f"must be > 0, got {self.tau}", "tau")
        if self.beta < 0:
            raise ValidationError(f"must be >= 0, got {self.beta}", "beta")

    @property
    def pump(self):
        return PumpScheduleClosed(self.p_tr, self.dp)


@dataclass(frozen=True)
class SorConfig:
    dt: float = 0.3
    n_step: int = 1001

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError(f"must be > 0, got {self.dt}", "dt")
        if self.n_step < 1:
            raise ValidationError(f"must be >= 1, got {self.n_step}", "n_step")


@dataclass(frozen=True)
class AlternatingConfig:
    inner: object = field(default_factory=lambda: OpenLoopConfig(
        dt=0.1, k_gain=0.25, p_max=1.5, chi="absolute", n_step=51))
    sor: SorConfig = field(default_factory=SorConfig)
    threshold: ThresholdSchedule = field(default_factory=ThresholdSchedule)
    r_init: np.ndarray = None

    def __post_init__(self):
        if not isinstance(self.inner, (OpenLoopConfig, ClosedLoopConfig)):
            raise ValidationError("must be an OpenLoopConfig or ClosedLoopConfig", "inner")

    @property
    def n_outer(self):
        return self.threshold.n_outer


@dataclass(frozen=True)
class Recording:
    """Trajectory capture: the first ``spins`` amplitudes every ``stride``
    steps (step 0 is the initial state)."""

    spins: int = 100
    stride: int = 1


@dataclass
class RunResult:
    algorithm: str
    spins: np.ndarray
    energy: float
    state: SolverState
    trace: EnergyTrace
    seed: int = None
    signal: np.ndarray = None
    residual: float = None
    trajectory: dict = None
    outer: list = field(default_factory=list)
    cycles_per_step: int = None
    wall_time: float = 0.0
    r_full: np.ndarray = None


# -- steppers ---------------------------------------------------------------


def open_loop_step(state, h, p, cfg, mode, noise=None):
    """One Euler-Maruyama step of the open-loop SDE.

    ``noise`` is an ``(n, 2)`` array of standard normals ``(W1, W2)`` or
    ``None`` when the noise amplitude is zero.
    """
    dt = state.c.dtype.type
    c, s = state.c, state.s
    a = c * c + s * s
    drive = np.abs(h) if cfg.chi == "absolute" else h
    step = dt(cfg.dt)
    c_new = c + step * ((dt(-1.0) + p - a) * c + dt(cfg.k_gain) * (drive - dt(cfg.eta)))
    s_new = s + step * ((dt(-1.0) - p - a) * s)
    if noise is not None:
        amp = dt(math.sqrt(cfg.dt) * math.sqrt(cfg.gs2)) * np.sqrt(dt(0.5) + a)
        c_new = c_new + amp * noise[:, 0]
        s_new = s_new + amp * noise[:, 1]
    mu, sigma = _readout(c_new, state.mu, state.sigma, mode)
    return SolverState(c_new, s_new, mu, sigma, state.step + 1)


def closed_loop_step(state, h, p, cfg, mode, r):
    """One Euler step of the mean-field model with amplitude feedback;
    ``state.s`` carries the feedback error ``e``."""
    dt = state.c.dtype.type
    c, e = state.c, state.s
    a = c * c
    step = dt(cfg.dt)
    c_new = c + step * ((dt(-1.0) + p - a) * c + dt(cfg.k_gain) * e * (r * h - dt(cfg.lam)))
    e_new = e + step * dt(cfg.beta) * (dt(cfg.tau) - a) * e
    mu, sigma = _readout(c_new, state.mu, state.sigma, mode)
    return SolverState(c_new, e_new, mu, sigma, state.step + 1)


def sor_step(state, h, relax, d):
    """Relaxed Jacobi update ``r <- r + relax (-r + d h)``; ``state.s`` is ``r``."""
    dt = state.s.dtype.type
    r = state.s
    r_new = r + dt(relax) * (d * h - r)
    return SolverState(state.c, r_new, r_new, state.sigma, state.step + 1)


def _readout(c, mu, sigma, mode):
    if mode is HamiltonianMode.ISING:
        return c, sigma
    return mu, heaviside(c).astype(c.dtype)


# -- helpers ----------------------------------------------------------------


def _initial_factors(inst, mode, r):
    n, dt = inst.n, inst.dtype
    if mode is HamiltonianMode.QUBO:
        return np.array(r, dtype=dt), np.zeros(n, dtype=dt)
    return np.zeros(n, dtype=dt), np.ones(n, dtype=dt)


def _guard(c, step, name="amplitude"):
    bad = ~np.isfinite(c) | (np.abs(c) > DIVERGENCE_LIMIT)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DivergenceError(f"{name} diverged (value {float(c[i]):.6g})", step=step, index=i)


def _energy(inst, c, r, lam):
    if inst.mode is HamiltonianMode.ISING:
        return ising_energy(inst.coupling, inst.zeeman, spins_from_amplitudes(c, inst.mode))
    return qubo_energy(inst.coupling, inst.zeeman, r, heaviside(c), lam)


class _Recorder:
    def __init__(self, record, n):
        self.record = record
        if record is None:
            return
        k = min(record.spins, n)
        self.k = k
        self.steps, self.c, self.s = [], [], []

    def __call__(self, state):
        rec = self.record
        if rec is None or state.step % rec.stride:
            return
        self.steps.append(state.step)
        self.c.append(state.c[: self.k].copy())
        self.s.append(state.s[: self.k].copy())

    def result(self):
        if self.record is None:
            return None
        return {
            "step": np.array(self.steps),
            "c": np.array(self.c),
            "s": np.array(self.s),
        }


def _tiling(inst, tiling):
    return (tiling or TilingConfig.for_size(inst.n)).validate(inst.n)


def _noise_stream(stream):
    return rng.STREAM_SDE + 4 * stream


def _init_stream(stream):
    return rng.STREAM_INIT + 4 * stream


# -- runners ----------------------------------------------------------------


def run_open_loop(inst, cfg, record=None, tiling=None, workers=1, energy_every=1, stream=0):
    """Integrate the open-loop CIM from ``c = s = 0``.

    In QUBO mode the local field multiplies ``aux_r * H(c)`` and the energy
    trace uses ``lambda = eta^2 / 2``.
    """
    t0 = time.perf_counter()
    mode = inst.mode
    n, dtype = inst.n, inst.dtype
    tiling = _tiling(inst, tiling)
    pumps = pump_sequence(pump_open, cfg.pump, cfg.n_step, cfg.dt).astype(dtype)
    mu, sigma = _initial_factors(inst, mode, inst.aux_r)
    state = SolverState(np.zeros(n, dtype), np.zeros(n, dtype), mu, sigma)
    lam = cfg.eta * cfg.eta / 2.0
    trace = EnergyTrace()
    rec = _Recorder(record, n)
    rec(state)
    noisy = cfg.gs2 > 0
    sid = _noise_stream(stream)
    for l in range(1, cfg.n_step + 1):
        h = local_field(inst.coupling, inst.zeeman, state.mu, state.sigma, tiling, workers)
        noise = None
        if noisy:
            noise = rng.normals(cfg.seed, sid, 2 * n * (l - 1), 2 * n).astype(dtype).reshape(n, 2)
        state = open_loop_step(state, h, pumps[l - 1], cfg, mode, noise)
        _guard(state.c, l)
        _guard(state.s, l, "quadrature amplitude")
        rec(state)
        if energy_every and (l % energy_every == 0 or l == cfg.n_step):
            trace.append(l, _energy(inst, state.c, inst.aux_r, lam))
    spins = spins_from_amplitudes(state.c, mode)
    return RunResult(
        algorithm="open-loop",
        spins=spins,
        energy=_energy(inst, state.c, inst.aux_r, lam),
        state=state,
        trace=trace,
        seed=cfg.seed,
        trajectory=rec.result(),
        cycles_per_step=estimate_cycles_sequential(n, tiling, CYCLES_PER_UPDATE["open-loop"]),
        wall_time=time.perf_counter() - t0,
    )


def run_closed_loop(inst, cfg, record=None, tiling=None, workers=1, energy_every=1, stream=0):
    """Integrate the closed-loop CIM from ``c ~ N(0, 0.02)``, ``e = 1``.

    Ising instances use ``r = 1`` regardless of ``aux_r``.
    """
    t0 = time.perf_counter()
    mode = inst.mode
    n, dtype = inst.n, inst.dtype
    tiling = _tiling(inst, tiling)
    pumps = pump_sequence(pump_closed, cfg.pump, cfg.n_step, cfg.dt).astype(dtype)
    r = inst.aux_r if mode is HamiltonianMode.QUBO else np.ones(n, dtype)
    c0 = (math.sqrt(0.02) * rng.normals(cfg.seed, _init_stream(stream), 0, n)).astype(dtype)
    mu, sigma = _initial_factors(inst, mode, r)
    state = SolverState(c0, np.ones(n, dtype), mu, sigma)
    trace = EnergyTrace()
    rec = _Recorder(record, n)
    rec(state)
    for l in range(1, cfg.n_step + 1):
        h = local_field(inst.coupling, inst.zeeman, state.mu, state.sigma, tiling, workers)
        state = closed_loop_step(state, h, pumps[l - 1], cfg, mode, r)
        _guard(state.c, l)
        if not (state.s > 0).all():
            i = int(np.flatnonzero(~(state.s > 0))[0])
            raise DivergenceError("feedback error lost positivity", step=l, index=i)
        _guard(state.s, l, "feedback error")
        rec(state)
        if energy_every and (l % energy_every == 0 or l == cfg.n_step):
            trace.append(l, _energy(inst, state.c, r, cfg.lam))
    return RunResult(
        algorithm="closed-loop",
        spins=spins_from_amplitudes(state.c, mode),
        energy=_energy(inst, state.c, r, cfg.lam),
        state=state,
        trace=trace,
        seed=cfg.seed,
        trajectory=rec.result(),
        cycles_per_step=estimate_cycles_sequential(n, tiling, CYCLES_PER_UPDATE["closed-loop"]),
        wall_time=time.perf_counter() - t0,
    )


def restricted_residual(inst, q, r):
    """Max-norm residual of ``(J (q*r) + g)_i`` over the support of ``q``."""
    x = np.asarray(r, np.float64) * np.asarray(q, np.float64)
    full = inst.coupling.offdiag(np.float64) @ x
    full += inst.coupling.diag.astype(np.float64) * x + inst.zeeman.astype(np.float64)
    on = np.asarray(q) != 0
    return float(np.abs(full[on]).max()) if on.any() else 0.0


def run_jacobi_sor(inst, q, cfg, r0=None, tiling=None, workers=1, residual_every=0):
    """Solve the support-restricted stationarity equations for ``r``.

    Entries off the support follow ``d_i h_i`` during the iteration (the
    closed-loop CIM reads them through ``r_i h_i``) but are zero in the
    returned ``signal``; the unmasked vector is kept in ``r_full``.
    """
    t0 = time.perf_counter()
    if inst.diag_inv is None:
        raise ValidationError("instance has no inverse-diagonal vector", "diag_inv")
    n, dtype = inst.n, inst.dtype
    q = np.asarray(q).ravel()
    if q.shape != (n,) or not np.isin(q, (0, 1)).all():
        raise ValidationError(f"support must be a 0/1 vector of length {n}", "q")
    tiling = _tiling(inst, tiling)
    r = np.zeros(n, dtype) if r0 is None else np.array(r0, dtype=dtype).ravel()
    sigma = q.astype(dtype)
    state = SolverState(np.zeros(n, dtype), r, r, sigma)
    d = inst.diag_inv
    trace = EnergyTrace()
    for l in range(1, cfg.n_step + 1):
        h = local_field(inst.coupling, inst.zeeman, state.mu, state.sigma, tiling, workers)
        state = sor_step(state, h, cfg.dt, d)
        _guard(state.s, l, "signal")
        if residual_every and l % residual_every == 0:
            trace.append(l, restricted_residual(inst, q, state.s))
    r = state.s
    signal = np.where(q != 0, r, 0).astype(dtype)
    return RunResult(
        algorithm="sor",
        spins=q.astype(np.int8),
        energy=qubo_energy(inst.coupling, inst.zeeman, r, q, 0.0),
        state=state,
        trace=trace,
        signal=signal,
        residual=restricted_residual(inst, q, r),
        cycles_per_step=estimate_cycles_sequential(n, tiling, CYCLES_PER_UPDATE["sor"]),
        wall_time=time.perf_counter() - t0,
        r_full=r.copy(),
    )


def run_alternating(inst, cfg, truth=None, tiling=None, workers=1, support_fn=None):
    """Alternate a QUBO CIM solve for the support with Jacobi SOR for the
    values, for ``cfg.threshold.n_outer`` rounds.

    The open-loop inner solver takes ``eta = H_n``; the closed-loop one takes
    ``lambda = H_n^2 / 2``.  ``support_fn(n, inst)`` replaces the CIM solve
    when given (used to pin the support in tests).  When ``truth`` is given,
    each round's RMSE is recorded in ``outer``.
    """
    t0 = time.perf_counter()
    if inst.mode is not HamiltonianMode.QUBO:
        raise ValidationError("alternating minimisation needs a QUBO instance", "mode")
    n, dtype = inst.n, inst.dtype
    r = np.zeros(n, dtype) if cfg.r_init is None else np.array(cfg.r_init, dtype=dtype).ravel()
    if r.shape != (n,):
        raise ValidationError(f"length {r.size} != n = {n}", "r_init")
    tiling = _tiling(inst, tiling)
    closed = isinstance(cfg.inner, ClosedLoopConfig)
    outer = []
    q = np.zeros(n, np.int8)
    sor = None
    inner_cycles = 0
    for k, H in enumerate(cfg.threshold.sequence(), start=1):
        current = inst.with_aux(r)
        if support_fn is not None:
            q = np.asarray(support_fn(k, current), dtype=np.int8)
            eta, lam = H, H * H / 2.0
        elif closed:
            lam = H * H / 2.0
            eta = H
            res = run_closed_loop(current, replace(cfg.inner, lam=lam), tiling=tiling,
                                  workers=workers, energy_every=0, stream=k)
            q = res.spins
            inner_cycles = res.cycles_per_step
        else:
            eta = H
            lam = H * H / 2.0
            res = run_open_loop(current, replace(cfg.inner, eta=eta), tiling=tiling,
                                workers=workers, energy_every=0, stream=k)
            q = res.spins
            inner_cycles = res.cycles_per_step
        sor = run_jacobi_sor(inst, q, cfg.sor, r0=r, tiling=tiling, workers=workers)
        r = sor.r_full
        entry = {
            "n": k,
            "eta": eta,
            "lam": lam,
            "support": int(q.sum()),
            "energy": qubo_energy(inst.coupling, inst.zeeman, r, q, lam),
            "residual": sor.residual,
        }
        if truth is not None:
            entry["rmse"] = float(np.sqrt(np.mean((sor.signal.astype(np.float64) - truth) ** 2)))
        outer.append(entry)
    trace = EnergyTrace(steps=[e["n"] for e in outer], energies=[e["energy"] for e in outer])
    return RunResult(
        algorithm="alternating-" + ("closed-loop" if closed else "open-loop"),
        spins=q,
        energy=outer[-1]["energy"],
        state=sor.state,
        trace=trace,
        seed=cfg.inner.seed,
        signal=sor.signal,
        residual=sor.residual,
        outer=outer,
        cycles_per_step=inner_cycles or sor.cycles_per_step,
        wall_time=time.perf_counter() - t0,
        r_full=r.copy(),
    )
