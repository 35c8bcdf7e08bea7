"""Instance files, trajectory CSV and result serialisation.

Binary instance layout (little-endian)::

    magic   4 bytes  b"CCIM"
    version u32      1
    n       u32
    mode    u8       0 = Ising, 1 = QUBO
    diag    n x f32
    upper   n(n-1)/2 x f32   strictly-upper triangle, row-major
    g       n x f32
    r       n x f32
    d       n x f32          all NaN when the instance has no inverse diagonal

The text import reads a small instance from CSV: an optional ``ising`` or
``qubo`` line, ``n`` rows of the dense coupling matrix, one row of ``g`` and
optional rows of ``r`` and ``d``.  Lines starting with ``#`` are ignored.
"""

import csv
import json
import struct

import numpy as np

from .core import HamiltonianMode, ProblemInstance
from .errors import InstanceFormatError
from .kernel import PackedSymmetricMatrix, pack

__all__ = [
    "MAGIC",
    "VERSION",
    "write_instance",
    "read_instance",
    "read_instance_csv",
    "write_vector_csv",
    "read_vector_csv",
    "write_trajectory_csv",
    "to_jsonable",
]

MAGIC = b"CCIM"
VERSION = 1
_HEADER = struct.Struct("<4sIIB")
_MODES = {HamiltonianMode.ISING: 0, HamiltonianMode.QUBO: 1}


def write_instance(path, inst):
    n = inst.n
    d = inst.diag_inv if inst.diag_inv is not None else np.full(n, np.nan)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, _MODES[inst.mode]))
        for block in (inst.coupling.diag, inst.coupling.upper, inst.zeeman, inst.aux_r, d):
            fh.write(np.asarray(block, dtype="<f4").tobytes())


def read_instance(path, dtype=np.float32):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise InstanceFormatError(f"{path}: truncated header")
    magic, version, n, mode = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise InstanceFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise InstanceFormatError(f"{path}: unsupported version {version}")
    if mode not in (0, 1):
        raise InstanceFormatError(f"{path}: unknown mode byte {mode}")
    counts = [n, n * (n - 1) // 2, n, n, n]
    expected = _HEADER.size + 4 * sum(counts)
    if len(data) != expected:
        raise InstanceFormatError(f"{path}: size {len(data)} bytes, expected {expected} for n={n}")
    flat = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    blocks, pos = [], 0
    for c in counts:
        blocks.append(flat[pos : pos + c])
        pos += c
    diag, upper, g, r, d = blocks
    return ProblemInstance(
        PackedSymmetricMatrix(upper, diag, dtype=dtype),
        g,
        HamiltonianMode.QUBO if mode else HamiltonianMode.ISING,
        r,
        None if np.isnan(d).all() else d,
    )


def read_instance_csv(path, dtype=np.float32):
    rows, mode = [], HamiltonianMode.ISING
    with open(path, newline="") as fh:
        for line in csv.reader(fh):
            cells = [c.strip() for c in line if c.strip()]
            if not cells or cells[0].startswith("#"):
                continue
            if len(cells) == 1 and cells[0].lower() in ("ising", "qubo"):
                mode = HamiltonianMode(cells[0].lower())
                continue
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise InstanceFormatError(f"{path}: {exc}") from None
    if not rows:
        raise InstanceFormatError(f"{path}: no data rows")
    n = len(rows[0])
    if len(rows) < n + 1 or len(rows) > n + 3 or any(len(r) != n for r in rows):
        raise InstanceFormatError(f"{path}: expected {n} coupling rows of {n} values, then g [, r [, d]]")
    J = np.array(rows[:n])
    extra = rows[n:] + [None] * 3
    return ProblemInstance(pack(J, dtype=dtype), extra[0], mode, extra[1], extra[2])


def write_vector_csv(path, values):
    values = np.asarray(values).ravel()
    with open(path, "w") as fh:
        for v in values.tolist():
            fh.write(f"{v!r}\n")


def read_vector_csv(path):
    with open(path) as fh:
        values = [float(line.split(",")[0]) for line in fh if line.strip() and not line.startswith("#")]
    return np.array(values)


def write_trajectory_csv(path, trajectory):
    """``step,spin,c,s_or_e`` rows for every recorded step and spin."""
    steps, c, s = trajectory["step"], trajectory["c"], trajectory["s"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "spin", "c", "s_or_e"])
        for k, step in enumerate(steps):
            for i in range(c.shape[1]):
                w.writerow([int(step), i, repr(float(c[k, i])), repr(float(s[k, i]))])


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=1, sort_keys=True)
        fh.write("\n")
