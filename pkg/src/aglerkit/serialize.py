"""JSON encoding helpers: complex numbers as ``[re, im]``, matrices as nested row-major lists."""
from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .errors import InvalidInputError

SCHEMA_VERSION = "1"


def complex_to_json(z) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def complex_from_json(v) -> complex:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        out = complex(v)
    elif isinstance(v, (list, tuple)) and len(v) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        out = complex(v[0], v[1])
    else:
        raise InvalidInputError(f"expected a complex number as [re, im], got {v!r}")
    if not np.isfinite(out.real) or not np.isfinite(out.imag):
        raise InvalidInputError("non-finite number")
    return out


def cmat_to_json(M) -> list:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    return [[complex_to_json(x) for x in row] for row in M]


def cmat_from_json(v) -> np.ndarray:
    # a bare scalar is accepted as a 1x1 matrix
    if not isinstance(v, list) or (len(v) == 2 and not isinstance(v[0], list)):
        return np.array([[complex_from_json(v)]])
    rows = [[complex_from_json(x) for x in row] for row in v]
    if not rows or len({len(r) for r in rows}) != 1:
        raise InvalidInputError("ragged matrix")
    return np.array(rows, dtype=complex)


def point_to_json(z) -> list:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.size == 1:
        return complex_to_json(z[0])
    return [complex_to_json(c) for c in z]


def point_from_json(v):
    """A disk point ``[re, im]`` or a polydisk point ``[[re, im], ...]``."""
    if isinstance(v, list) and v and isinstance(v[0], list):
        return np.array([complex_from_json(c) for c in v])
    return complex_from_json(v)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
