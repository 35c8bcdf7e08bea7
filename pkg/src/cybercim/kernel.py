"""Packed symmetric coupling storage, the tiled local-field engine and the
closed-form cycle model of the tiled MAC architecture.

The coupling matrix is held as its strictly-upper triangle (row-major) plus a
separate diagonal.  The diagonal is kept because Jacobi SOR needs ``J_ii``,
but it never contributes to a local field.

Local fields are computed tile by tile: a ``p_r x p_c`` block of couplings
times a ``p_c`` slice of ``mu * sigma``.  Inside a tile the products are
reduced with a fixed pairwise tree, and tile sums are accumulated in
ascending column-tile order.  Because every row follows the same recipe, the
result does not depend on how rows are split across workers.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import gcd

import numpy as np

from .errors import AsymmetryError, DimensionError, TilingError, ValidationError

__all__ = [
    "PackedSymmetricMatrix",
    "TilingConfig",
    "pack",
    "local_field",
    "estimate_cycles_sequential",
    "estimate_cycles_overlapped",
    "cycle_ratio",
    "CYCLES_PER_UPDATE",
]

# cycles per time-evolution update on the reference hardware
CYCLES_PER_UPDATE = {"open-loop": 32, "closed-loop": 32, "sor": 4}


class PackedSymmetricMatrix:
    """Symmetric ``n x n`` matrix stored as strictly-upper triangle + diagonal.

    Parameters
    ----------
    upper : array_like
        ``n(n-1)/2`` entries, row-major over ``i < j``.
    diag : array_like
        ``n`` diagonal entries.
    dtype : numpy dtype, optional
        Storage precision, float32 unless given.
    """

    def __init__(self, upper, diag, dtype=np.float32):
        diag = np.array(diag, dtype=dtype).ravel()
        upper = np.array(upper, dtype=dtype).ravel()
        n = diag.size
        if n < 1:
            raise ValidationError("matrix dimension must be >= 1", "n")
        if upper.size != n * (n - 1) // 2:
            raise DimensionError(
                f"packed upper triangle has {upper.size} entries, expected {n * (n - 1) // 2} for n={n}"
            )
        upper.flags.writeable = False
        diag.flags.writeable = False
        self.n = n
        self.upper = upper
        self.diag = diag
        self._offdiag = {}

    @property
    def dtype(self):
        return self.diag.dtype

    def index(self, i, j):
        """Position of ``(i, j)``, ``i != j``, in :attr:`upper`."""
        if i > j:
            i, j = j, i
        return i * self.n - i * (i + 1) // 2 + (j - i - 1)

    def read(self, i, j):
        n = self.n
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"({i}, {j}) outside {n}x{n} matrix")
        if i == j:
            return self.diag[i]
        return self.upper[self.index(i, j)]

    def unpack(self):
        """Dense symmetric matrix including the diagonal."""
        out = self.offdiag().copy()
        out[np.diag_indices(self.n)] = self.diag
        return out

    def offdiag(self, dtype=None):
        """Dense read-only expansion with a zero diagonal.

        This is the row source for the local-field tiles.  It is built once
        per dtype and cached; the packed arrays stay the storage of record.
        """
        dtype = np.dtype(dtype or self.dtype)
        if dtype not in self._offdiag:
            n = self.n
            dense = np.zeros((n, n), dtype=dtype)
            iu = np.triu_indices(n, 1)
            dense[iu] = self.upper
            dense.T[iu] = self.upper
            dense.flags.writeable = False
            self._offdiag[dtype] = dense
        return self._offdiag[dtype]

    def astype(self, dtype):
        if np.dtype(dtype) == self.dtype:
            return self
        return PackedSymmetricMatrix(self.upper, self.diag, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, PackedSymmetricMatrix):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.upper, other.upper)
            and np.array_equal(self.diag, other.diag)
        )

    def __repr__(self):
        return f"PackedSymmetricMatrix(n={self.n}, dtype={self.dtype})"


def pack(matrix, rtol=1e-6, dtype=np.float32):
    """Pack a dense symmetric matrix.

    Symmetry is checked relative to the largest absolute entry; the stored
    upper triangle is taken from the input as is.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    diff = np.abs(m - m.T)
    scale = max(np.abs(m).max(initial=0.0), np.finfo(np.float64).tiny)
    worst = np.unravel_index(np.argmax(diff), diff.shape) if n else (0, 0)
    if n and diff[worst] > rtol * scale:
        raise AsymmetryError(int(worst[0]), int(worst[1]), float(diff[worst]))
    return PackedSymmetricMatrix(m[np.triu_indices(n, 1)], np.diag(m), dtype=dtype)


@dataclass(frozen=True)
class TilingConfig:
    """Parallelism indices of the MAC array.

    ``p_b`` independent blocks, each with ``p_r`` row units that take a
    ``p_c``-wide column slice per cycle.
    """

    p_b: int = 1
    p_r: int = 64
    p_c: int = 32

    def __post_init__(self):
        for name in ("p_b", "p_r", "p_c"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise TilingError(f"must be a positive integer, got {value!r}", name)

    def validate(self, n):
        if n % (self.p_b * self.p_r):
            raise TilingError(
                f"p_b*p_r = {self.p_b * self.p_r} does not divide n = {n}", "tiling"
            )
        if n % self.p_c:
            raise TilingError(f"p_c = {self.p_c} does not divide n = {n}", "tiling")
        return self

    @classmethod
    def for_size(cls, n, p_b=1, p_r=64, p_c=32):
        """Largest tiling no wider than the given one that is valid for ``n``."""
        p_b = gcd(n, p_b)
        p_r = gcd(n // p_b, p_r)
        return cls(p_b, p_r, gcd(n, p_c))


def _pairwise(x):
    # adjacent-pair adder tree over the last axis
    while x.shape[-1] > 1:
        w = x.shape[-1]
        y = x[..., 0 : w - 1 : 2] + x[..., 1:w:2]
        if w % 2:
            y = np.concatenate([y, x[..., w - 1 :]], axis=-1)
        x = y
    return x[..., 0]


def _field_rows(dense, v, g, p_c, lo, hi):
    prod = dense[lo:hi] * v
    tiles = _pairwise(prod.reshape(hi - lo, -1, p_c))
    acc = np.zeros(hi - lo, dtype=dense.dtype)
    for t in range(tiles.shape[1]):
        acc = acc + tiles[:, t]
    return acc + g[lo:hi]


def local_field(J, g, mu, sigma, tiling=None, workers=1):
    """``h_i = g_i + sum_{j != i} J_ij sigma_j mu_j`` in the precision of ``J``.

    Rows are processed in groups of ``p_b * p_r``; with ``workers > 1`` the
    groups are spread over a thread pool.  Output is bit-identical for any
    worker count.
    """
    n = J.n
    dt = J.dtype
    g = np.asarray(g, dtype=dt)
    mu = np.asarray(mu, dtype=dt)
    sigma = np.asarray(sigma, dtype=dt)
    for name, vec in (("g", g), ("mu", mu), ("sigma", sigma)):
        if vec.shape != (n,):
            raise DimensionError(f"length {vec.size} != n = {n}", name)
    tiling = (tiling or TilingConfig.for_size(n)).validate(n)
    dense = J.offdiag()
    v = sigma * mu
    group = tiling.p_b * tiling.p_r
    bounds = [(lo, lo + group) for lo in range(0, n, group)]
    workers = max(1, min(int(workers), len(bounds)))
    if workers == 1:
        parts = [_field_rows(dense, v, g, tiling.p_c, lo, hi) for lo, hi in bounds]
    else:
        # contiguous chunks of row groups, one per worker
        chunks = np.array_split(np.arange(len(bounds)), workers)
        spans = [(bounds[c[0]][0], bounds[c[-1]][1]) for c in chunks if c.size]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(lambda s: _field_rows(dense, v, g, tiling.p_c, *s), spans)
            )
    return np.concatenate(parts)


def _check_divisible(n, tiling):
    if n < 1:
        raise TilingError(f"n must be >= 1, got {n}", "n")
    tiling.validate(n)


def estimate_cycles_sequential(n, tiling, c_e):
    """Cycles per step when the time evolution follows the MAC pass.

    ``(n / (p_b p_r)) * (n / p_c + c_e)``; with ``p_b = 1`` this is the
    row-parallel scheme of the reference FPGA.
    """
    _check_divisible(n, tiling)
    if c_e < 0:
        raise ValidationError(f"must be >= 0, got {c_e}", "c_e")
    return (n // (tiling.p_b * tiling.p_r)) * (n // tiling.p_c + int(c_e))


def estimate_cycles_overlapped(n, tiling):
    """Cycles per step when updates overlap the MAC pass (block-parallel SB
    scheme): one idle pass of ``n / p_c`` cycles is appended."""
    _check_divisible(n, tiling)
    return (n // (tiling.p_b * tiling.p_r) + 1) * (n // tiling.p_c)


def cycle_ratio(alg_cycles, sb_cycles):
    if sb_cycles == 0:
        raise ValidationError("denominator is zero", "sb_cycles")
    return alg_cycles / sb_cycles
