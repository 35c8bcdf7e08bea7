"""Problem and state types, Hamiltonian evaluation and spin readout."""

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import DimensionError, ValidationError
from .kernel import PackedSymmetricMatrix

__all__ = [
    "HamiltonianMode",
    "ProblemInstance",
    "SolverState",
    "EnergyTrace",
    "ising_energy",
    "qubo_energy",
    "spins_from_amplitudes",
    "heaviside",
    "sign",
]


class HamiltonianMode(str, Enum):
    ISING = "ising"
    QUBO = "qubo"


@dataclass(frozen=True)
class ProblemInstance:
    """Couplings ``J``, Zeeman field ``g`` and the QUBO auxiliaries.

    ``aux_r`` defaults to all ones.  ``diag_inv`` is only needed by Jacobi
    SOR and is left as ``None`` unless supplied.
    """

    coupling: PackedSymmetricMatrix
    zeeman: np.ndarray
    mode: HamiltonianMode = HamiltonianMode.ISING
    aux_r: np.ndarray = None
    diag_inv: np.ndarray = None

    def __post_init__(self):
        n = self.coupling.n
        dt = self.coupling.dtype
        object.__setattr__(self, "mode", HamiltonianMode(self.mode))
        object.__setattr__(self, "zeeman", _vector(self.zeeman, n, "zeeman", dt))
        r = np.ones(n) if self.aux_r is None else self.aux_r
        object.__setattr__(self, "aux_r", _vector(r, n, "aux_r", dt))
        if self.diag_inv is not None:
            object.__setattr__(self, "diag_inv", _vector(self.diag_inv, n, "diag_inv", dt))

    @property
    def n(self):
        return self.coupling.n

    @property
    def dtype(self):
        return self.coupling.dtype

    def astype(self, dtype):
        if np.dtype(dtype) == self.dtype:
            return self
        return ProblemInstance(
            self.coupling.astype(dtype),
            self.zeeman,
            self.mode,
            self.aux_r,
            self.diag_inv,
        )

    def with_aux(self, aux_r):
        return replace(self, aux_r=aux_r)


def _vector(v, n, name, dtype):
    v = np.array(v, dtype=dtype).ravel()
    if v.size != n:
        raise DimensionError(f"length {v.size} != n = {n}", name)
    v.flags.writeable = False
    return v


@dataclass
class SolverState:
    """Per-spin dynamical variables.

    ``s`` holds the quadrature amplitude (open loop), the feedback error
    (closed loop) or the signal ``r`` (Jacobi SOR).  ``mu * sigma`` is the
    vector the local field multiplies.
    """

    c: np.ndarray
    s: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    step: int = 0

    def copy(self):
        return SolverState(self.c.copy(), self.s.copy(), self.mu.copy(), self.sigma.copy(), self.step)


@dataclass
class EnergyTrace:
    steps: list = field(default_factory=list)
    energies: list = field(default_factory=list)

    def append(self, step, energy):
        self.steps.append(int(step))
        self.energies.append(float(energy))

    def __len__(self):
        return len(self.steps)


def sign(x):
    """Sign with ``sign(0) = +1``."""
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


def heaviside(x):
    """Step function with ``H(0) = 0``."""
    return (np.asarray(x) > 0).astype(np.int8)


def spins_from_amplitudes(c, mode):
    if HamiltonianMode(mode) is HamiltonianMode.ISING:
        return sign(c)
    return heaviside(c)


def _check(J, vectors, discrete, allowed):
    for name, v in vectors:
        if v.shape != (J.n,):
            raise DimensionError(f"length {v.size} != n = {J.n}", name)
    if not np.isin(discrete, allowed).all():
        bad = int(np.flatnonzero(~np.isin(discrete, allowed))[0])
        raise ValidationError(
            f"entry {bad} is {discrete[bad]!r}, expected one of {list(allowed)}", "spins"
        )


def ising_energy(J, g, sigma):
    """``-1/2 sum_{i != j} J_ij s_i s_j - sum_i g_i s_i`` in float64."""
    g = np.asarray(g, dtype=np.float64).ravel()
    sigma = np.asarray(sigma).ravel()
    _check(J, [("g", g), ("sigma", sigma)], sigma, (-1, 1))
    s = sigma.astype(np.float64)
    quad = s @ (J.offdiag(np.float64) @ s)
    return float(-0.5 * quad - g @ s)


def qubo_energy(J, g, r, q, lam):
    """``-1/2 sum_{i != j} J_ij r_i r_j q_i q_j - sum_i g_i r_i q_i + lam sum_i q_i``."""
    g = np.asarray(g, dtype=np.float64).ravel()
    r = np.asarray(r, dtype=np.float64).ravel()
    q = np.asarray(q).ravel()
    _check(J, [("g", g), ("r", r), ("q", q)], q, (0, 1))
    x = r * q.astype(np.float64)
    quad = x @ (J.offdiag(np.float64) @ x)
    return float(-0.5 * quad - g @ x + lam * q.sum())
