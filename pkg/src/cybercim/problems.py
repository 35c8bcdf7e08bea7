"""Benchmark instances and metrics.

* CDMA multi-user detection (Ising with Zeeman term)
* L0-regularised compressed sensing on random Gaussian matrices (QUBO)
* the same on images, sparse in a 2-D Haar basis and observed through
  undersampled k-space
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .core import HamiltonianMode, ProblemInstance
from .errors import DimensionError, InstanceFormatError, ValidationError
from .kernel import PackedSymmetricMatrix

__all__ = [
    "CdmaInstance",
    "CsInstance",
    "gen_cdma",
    "gen_cs_random",
    "gen_cs_image",
    "cs_instance",
    "ber",
    "rmse",
    "soft_threshold",
    "lasso_init",
    "gauge_transform",
    "haar_matrix",
    "haar_matrix_2d",
    "realified_dft_rows",
    "second_difference",
    "kspace_sample",
    "phantom",
    "sparsify_haar",
    "read_pgm",
    "write_pgm",
    "read_raw_f32",
]


def _round(x):
    return int(math.floor(x + 0.5))


def _packed(dense, dtype):
    n = dense.shape[0]
    return PackedSymmetricMatrix(dense[np.triu_indices(n, 1)], np.diag(dense), dtype=dtype)


# -- CDMA -------------------------------------------------------------------


@dataclass
class CdmaInstance:
    problem: ProblemInstance
    truth: np.ndarray
    spreading: np.ndarray
    received: np.ndarray
    alpha: float
    zeta: float

    @property
    def m(self):
        return self.spreading.shape[0]


def gen_cdma(n, alpha, zeta, seed, truth=None, spreading=None, dtype=np.float32):
    """Random-spreading CDMA detector with ``M = round(alpha n)`` chips.

    ``spreading`` (``M x N`` of +-1) overrides the random codes.  The noise
    is drawn after the codes from the same keyed generator.
    """
    if n < 2:
        raise ValidationError(f"must be >= 2, got {n}", "n")
    if not alpha > 0:
        raise ValidationError(f"must be > 0, got {alpha}", "alpha")
    gen = rng.generator(seed)
    if spreading is None:
        m = _round(alpha * n)
        if m < 1:
            raise ValidationError(f"round(alpha * n) = {m} < 1", "alpha")
        xi = (2 * gen.integers(0, 2, size=(m, n)) - 1).astype(np.float64)
    else:
        xi = np.asarray(spreading, dtype=np.float64)
        m = xi.shape[0]
        if xi.shape != (m, n) or not np.isin(xi, (-1, 1)).all():
            raise ValidationError(f"must be an {m}x{n} matrix of +-1", "spreading")
    sigma = np.ones(n) if truth is None else np.asarray(truth, dtype=np.float64)
    if sigma.shape != (n,):
        raise DimensionError(f"length {sigma.size} != n = {n}", "truth")
    sqm = math.sqrt(m)
    y = xi @ sigma / sqm + zeta * gen.standard_normal(m)
    J = -(xi.T @ xi) / m
    g = xi.T @ y / sqm
    problem = ProblemInstance(_packed(J, dtype), g, HamiltonianMode.ISING)
    return CdmaInstance(problem, sigma.astype(np.int8), xi.astype(np.int8), y, m / n, zeta)


def ber(estimate, truth):
    estimate = np.asarray(estimate).ravel()
    truth = np.asarray(truth).ravel()
    if estimate.shape != truth.shape:
        raise DimensionError(f"lengths {estimate.size} and {truth.size} differ")
    return float(np.mean(estimate != truth))


def rmse(estimate, truth):
    estimate = np.asarray(estimate, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if estimate.shape != truth.shape:
        raise DimensionError(f"lengths {estimate.size} and {truth.size} differ")
    return float(np.sqrt(np.mean((estimate - truth) ** 2)))


# -- compressed sensing -----------------------------------------------------


@dataclass
class CsInstance:
    problem: ProblemInstance
    truth_x: np.ndarray
    observation: np.ndarray
    observed: np.ndarray
    alpha: float
    sparseness: float
    regularizers: list = field(default_factory=list)


def cs_instance(A, y, regularizers=(), dtype=np.float32):
    """QUBO instance for ``1/2 |y - A x|^2 + sum_k gamma_k/2 |G_k x|^2 + lam |x|_0``.

    ``J = -A^T A - sum_k gamma_k G_k^T G_k``, ``g = A^T y``, ``d = -1/J_ii``.
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    J = -(A.T @ A)
    for gamma, op in regularizers:
        op = np.asarray(op, dtype=np.float64)
        J -= gamma * (op.T @ op)
    diag = np.diag(J)
    if (diag == 0).any():
        i = int(np.flatnonzero(diag == 0)[0])
        raise ValidationError(f"J[{i},{i}] is zero, column {i} of A is empty", "observation")
    return ProblemInstance(
        _packed(J, dtype), A.T @ y, HamiltonianMode.QUBO, diag_inv=-1.0 / diag
    )


def gen_cs_random(n, alpha, a, zeta, seed, observation=None, signal=None, dtype=np.float32):
    """Gaussian observation matrix with ``N(0, 1/M)`` entries and a source with
    ``round(a n)`` standard-normal nonzeros on a uniform random support."""
    if not 0 < alpha <= 1:
        raise ValidationError(f"must lie in (0, 1], got {alpha}", "alpha")
    if not 0 < a < 1:
        raise ValidationError(f"must lie in (0, 1), got {a}", "a")
    gen = rng.generator(seed)
    if observation is None:
        m = _round(alpha * n)
        if m < 1:
            raise ValidationError(f"round(alpha * n) = {m} < 1", "alpha")
        A = gen.standard_normal((m, n)) / math.sqrt(m)
    else:
        A = np.asarray(observation, dtype=np.float64)
        m = A.shape[0]
        if A.shape[1] != n:
            raise DimensionError(f"observation has {A.shape[1]} columns, n = {n}")
    if signal is None:
        k = _round(a * n)
        if k == 0:
            raise ValidationError(f"round(a * n) = 0 for a={a}, n={n}", "a")
        x = np.zeros(n)
        x[gen.choice(n, size=k, replace=False)] = gen.standard_normal(k)
    else:
        x = np.asarray(signal, dtype=np.float64)
    y = A @ x + zeta * gen.standard_normal(m)
    return CsInstance(cs_instance(A, y, dtype=dtype), x, A, y, m / n, a)


def soft_threshold(v, t):
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _spectral_norm_sq(A, iters=100, seed=0):
    v = rng.generator(seed, 7).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam


def lasso_init(A, y, l1_weight, iters=500):
    """Iterative shrinkage-thresholding for ``1/2 |y - A x|^2 + l1_weight |x|_1``.

    Step size ``1/L`` with ``L`` a power-iteration estimate of the largest
    eigenvalue of ``A^T A``, inflated by 1% to stay on the safe side.
    """
    if iters < 1:
        raise ValidationError(f"must be >= 1, got {iters}", "iters")
    if l1_weight < 0:
        raise ValidationError(f"must be >= 0, got {l1_weight}", "l1_weight")
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    L = 1.01 * _spectral_norm_sq(A)
    if L == 0.0:
        return np.zeros(A.shape[1])
    x = np.zeros(A.shape[1])
    for _ in range(iters):
        x = soft_threshold(x + A.T @ (y - A @ x) / L, l1_weight / L)
    return x


def lasso_objective(A, y, x, l1_weight):
    return 0.5 * float(np.sum((y - A @ x) ** 2)) + l1_weight * float(np.abs(x).sum())


def gauge_transform(inst, s):
    """``J'_ij = J_ij s_i s_j``, ``g'_i = g_i s_i`` for an Ising instance."""
    if inst.mode is not HamiltonianMode.ISING:
        raise ValidationError("gauge transformation is defined for Ising instances only", "mode")
    s = np.asarray(s).ravel()
    if s.shape != (inst.n,):
        raise DimensionError(f"length {s.size} != n = {inst.n}", "s")
    if not np.isin(s, (-1, 1)).all():
        raise ValidationError("entries must be +1 or -1", "s")
    J = inst.coupling
    iu, ju = np.triu_indices(inst.n, 1)
    flip = (s[iu] * s[ju]).astype(J.dtype)
    coupling = PackedSymmetricMatrix(J.upper * flip, J.diag, dtype=J.dtype)
    return ProblemInstance(coupling, inst.zeeman * s.astype(J.dtype), inst.mode,
                           inst.aux_r, inst.diag_inv)


# -- image compressed sensing -----------------------------------------------


def _check_pow2(size):
    if size < 1 or size & (size - 1):
        raise ValidationError(f"size must be a power of two, got {size}", "image")


def haar_matrix(size):
    """Orthonormal 1-D Haar analysis matrix (rows are basis functions)."""
    _check_pow2(size)
    h = np.ones((1, 1))
    while h.shape[0] < size:
        k = h.shape[0]
        top = np.kron(h, [1.0, 1.0])
        bottom = np.kron(np.eye(k), [1.0, -1.0])
        h = np.vstack([top, bottom]) / math.sqrt(2.0)
    return h


def haar_matrix_2d(size):
    """Separable 2-D Haar transform acting on row-major flattened images."""
    h = haar_matrix(size)
    return np.kron(h, h)


def _dft_matrix(size):
    k = np.arange(size)
    return np.exp(-2j * np.pi * np.outer(k, k) / size) / math.sqrt(size)


def realified_dft_rows(size, rows=None):
    """Real and imaginary parts of selected rows of the unitary 2-D DFT.

    Returns ``vstack([Re F_sel, Im F_sel])``.  Over all rows this preserves
    the norm of real vectors.
    """
    f = np.kron(_dft_matrix(size), _dft_matrix(size))
    if rows is not None:
        f = f[np.asarray(rows)]
    return np.vstack([f.real, f.imag])


def second_difference(size):
    """Tridiagonal ``(1, -2, 1)`` operator with zero boundaries."""
    return -2.0 * np.eye(size) + np.eye(size, k=1) + np.eye(size, k=-1)


def kspace_sample(size, count, seed, spread=0.25):
    """Pick ``count`` flat k-space indices without replacement, weighted by a
    centred 2-D normal density (std ``spread * size`` per axis).  DC is
    always included."""
    n = size * size
    if not 1 <= count <= n:
        raise ValidationError(f"must lie in [1, {n}], got {count}", "alpha")
    freq = np.fft.fftfreq(size) * size
    ky, kx = np.meshgrid(freq, freq, indexing="ij")
    std = spread * size
    w = np.exp(-(kx**2 + ky**2) / (2.0 * std * std)).ravel()
    others = np.arange(1, n)
    rest = []
    if count > 1:
        p = w[others] / w[others].sum()
        rest = rng.generator(seed).choice(others, size=count - 1, replace=False, p=p)
    return np.sort(np.concatenate([[0], rest]).astype(int))


def gen_cs_image(image, alpha, gamma, seed, zeta=0.0, spread=0.25, dtype=np.float32):
    """L0 compressed-sensing instance for an image sparse in the Haar basis.

    ``A = S F Psi^T`` with ``S`` selecting ``round(alpha N)`` k-space samples;
    ``G_1 = D_h Psi^T`` and ``G_2 = D_v Psi^T`` are the horizontal and
    vertical second differences.  The unknowns are Haar coefficients.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ValidationError(f"image must be square, got shape {img.shape}", "image")
    size = img.shape[0]
    _check_pow2(size)
    n = size * size
    m = _round(alpha * n)
    rows = kspace_sample(size, m, seed, spread)
    psi = haar_matrix_2d(size)
    A = realified_dft_rows(size, rows) @ psi.T
    d2 = second_difference(size)
    eye = np.eye(size)
    regs = []
    if gamma:
        regs = [(gamma, np.kron(eye, d2) @ psi.T), (gamma, np.kron(d2, eye) @ psi.T)]
    x = psi @ img.ravel()
    x[np.abs(x) <= 1e-12 * max(1.0, np.abs(x).max())] = 0.0  # transform round-off
    y = A @ x
    if zeta:
        y = y + zeta * rng.generator(seed, 5).standard_normal(y.size)
    k = int(np.count_nonzero(x))
    return CsInstance(cs_instance(A, y, regs, dtype=dtype), x, A, y, alpha, k / n, regs)


def phantom(size=64):
    """Shepp-Logan style head phantom rasterised at ``size x size``."""
    # (intensity, semi-axis a, semi-axis b, x0, y0, angle in degrees)
    ellipses = [
        (1.0, 0.69, 0.92, 0.0, 0.0, 0),
        (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0),
        (-0.2, 0.11, 0.31, 0.22, 0.0, -18),
        (-0.2, 0.16, 0.41, -0.22, 0.0, 18),
        (0.1, 0.21, 0.25, 0.0, 0.35, 0),
        (0.1, 0.046, 0.046, 0.0, 0.1, 0),
        (0.1, 0.046, 0.046, 0.0, -0.1, 0),
        (0.1, 0.046, 0.023, -0.08, -0.605, 0),
        (0.1, 0.023, 0.023, 0.0, -0.606, 0),
        (0.1, 0.023, 0.046, 0.06, -0.605, 0),
    ]
    coords = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    yy, xx = np.meshgrid(-coords, coords, indexing="ij")
    img = np.zeros((size, size))
    for value, a, b, x0, y0, angle in ellipses:
        th = math.radians(angle)
        dx, dy = xx - x0, yy - y0
        u = dx * math.cos(th) + dy * math.sin(th)
        v = -dx * math.sin(th) + dy * math.cos(th)
        img[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += value
    return img


def sparsify_haar(image, keep=0.182):
    """Keep the largest ``keep`` fraction of Haar coefficients.

    Returns ``(sparse_image, coefficients)``.
    """
    img = np.asarray(image, dtype=np.float64)
    size = img.shape[0]
    psi = haar_matrix_2d(size)
    x = psi @ img.ravel()
    k = max(1, _round(keep * x.size))
    order = np.argsort(-np.abs(x), kind="stable")
    kept = np.zeros_like(x)
    kept[order[:k]] = x[order[:k]]
    return (psi.T @ kept).reshape(img.shape), kept


# -- image files ------------------------------------------------------------


def _pgm_tokens(data):
    tokens, i = [], 0
    while len(tokens) < 4:
        while i < len(data) and chr(data[i]).isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < len(data) and not chr(data[i]).isspace():
            i += 1
        if start == i:
            break
        tokens.append(data[start:i].decode("ascii"))
    return tokens, i


def read_pgm(path):
    """Read a plain (P2) or raw (P5) graymap, scaled to ``[0, 1]``."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, end = _pgm_tokens(data)
    if len(tokens) < 4 or tokens[0] not in ("P2", "P5"):
        raise InstanceFormatError(f"{path}: not a P2/P5 graymap")
    width, height, maxval = (int(t) for t in tokens[1:4])
    if tokens[0] == "P2":
        values = np.array(data[end:].split(), dtype=np.float64)
    else:
        dt = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        values = np.frombuffer(data[end + 1 :], dtype=dt).astype(np.float64)
    if values.size < width * height:
        raise InstanceFormatError(f"{path}: expected {width * height} pixels, found {values.size}")
    return values[: width * height].reshape(height, width) / maxval


def write_pgm(path, image, maxval=255):
    img = np.asarray(image, dtype=np.float64)
    lo, hi = img.min(), img.max()
    scaled = np.zeros_like(img) if hi == lo else (img - lo) / (hi - lo)
    pixels = np.rint(scaled * maxval).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_raw_f32(path, shape=None):
    """Little-endian float32 matrix; square shape is inferred when omitted."""
    values = np.fromfile(path, dtype="<f4").astype(np.float64)
    if shape is None:
        side = math.isqrt(values.size)
        if side * side != values.size:
            raise InstanceFormatError(f"{path}: {values.size} values do not form a square image")
        shape = (side, side)
    if values.size != shape[0] * shape[1]:
        raise InstanceFormatError(f"{path}: {values.size} values, expected {shape[0] * shape[1]}")
    return values.reshape(shape)
