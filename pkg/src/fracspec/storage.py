"""Deterministic on-disk formats.

Three writers share one rule: byte-identical output for identical input.
No timestamps, no environment-dependent fields, fixed key order, fixed
float formatting. The binary matrix container is versioned through its
magic so later revisions can change the layout without ambiguity.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"FSPC\x01"

# Payload dtypes are pinned to explicit little-endian codes; the host
# byte order never leaks into a file.
_DTYPES = {"float64": "<f8", "complex128": "<c16"}
_MAX_HEADER = 1 << 20


def format_float(x) -> str:
    """Shortest-round-trip-adjacent fixed format, 17 significant digits."""
    return "%.17g" % float(x)


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_matrix(path, matrix: np.ndarray, meta: dict | None = None) -> None:
    """Write a 2-d array as magic | u32 header length | JSON header | payload.

    The header records dtype, shape, and caller metadata; the payload is
    the raw C-order little-endian bytes. meta must be JSON-serializable
    without NaN or infinity.
    """
    m = np.ascontiguousarray(matrix)
    if m.ndim != 2:
        raise ValueError("only 2-d matrices are stored")
    if np.iscomplexobj(m):
        name = "complex128"
    else:
        name = "float64"
    m = m.astype(_DTYPES[name], copy=False)
    header = _canonical_json(
        {"dtype": name, "shape": list(m.shape), "meta": meta or {}}
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(m.tobytes(order="C"))


def read_matrix(path):
    """Inverse of write_matrix. Returns (matrix, meta).

    Raises ValueError on a bad magic, a corrupt header, or a payload
    whose length disagrees with the declared shape.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise ValueError("not a matrix container (bad magic)")
    off = len(MAGIC)
    if len(blob) < off + 4:
        raise ValueError("truncated container")
    (hlen,) = struct.unpack_from("<I", blob, off)
    off += 4
    if hlen > _MAX_HEADER or len(blob) < off + hlen:
        raise ValueError("corrupt header length")
    try:
        header = json.loads(blob[off : off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError("corrupt header") from exc
    off += hlen
    dtype = header.get("dtype")
    if dtype not in _DTYPES:
        raise ValueError("unknown payload dtype %r" % (dtype,))
    shape = header.get("shape")
    if (
        not isinstance(shape, list)
        or len(shape) != 2
        or not all(isinstance(s, int) and s >= 0 for s in shape)
    ):
        raise ValueError("bad shape in header")
    want = shape[0] * shape[1] * np.dtype(_DTYPES[dtype]).itemsize
    if len(blob) - off != want:
        raise ValueError("payload length disagrees with declared shape")
    m = np.frombuffer(blob, dtype=_DTYPES[dtype], offset=off).reshape(shape)
    return m.copy(), header.get("meta", {})


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_float(v)


def write_csv(path, columns, rows) -> None:
    """Header line then one line per row, 17-digit floats, LF endings."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")
