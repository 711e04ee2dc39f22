"""Interchange-file readers and writers.

Matrices travel as NPY version 1.0 files restricted to C order,
little-endian, dtypes f4/f8/i8. All writes are atomic: content goes to a
temporary file in the target directory and is renamed into place.
"""
from __future__ import annotations

import ast
import json
import os
import struct
import tempfile

import numpy as np

from .errors import FormatError

_MAGIC = b"\x93NUMPY"
_DTYPES = {"f4": "<f4", "f8": "<f8", "i8": "<i8"}


def atomic_write_bytes(path, payload: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_matrix(path, matrix, dtype: str = "f8") -> None:
    """Write an NPY v1.0 file in the exact subset read_matrix accepts."""
    if dtype not in _DTYPES:
        raise FormatError(f"unsupported dtype {dtype!r}; expected one of {sorted(_DTYPES)}")
    arr = np.ascontiguousarray(np.asarray(matrix), dtype=_DTYPES[dtype])
    if arr.ndim not in (1, 2):
        raise FormatError(f"only 1-D and 2-D matrices are supported, got {arr.ndim}-D")
    shape = "(%d,)" % arr.shape if arr.ndim == 1 else "(%d, %d)" % arr.shape
    header = "{'descr': '%s', 'fortran_order': False, 'shape': %s, }" % (
        _DTYPES[dtype], shape
    )
    # Pad with spaces so magic+version+length+header is a multiple of 64,
    # ending in a newline.
    base = len(_MAGIC) + 2 + 2
    total = base + len(header) + 1
    padding = (64 - total % 64) % 64
    header_bytes = (header + " " * padding + "\n").encode("ascii")
    payload = _MAGIC + bytes([1, 0]) + struct.pack("<H", len(header_bytes)) + header_bytes
    atomic_write_bytes(path, payload + arr.tobytes(order="C"))


def read_matrix(path) -> np.ndarray:
    """Read an NPY v1.0 matrix; returns float64 (f4/f8) or int64 (i8) values."""
    with open(path, "rb") as handle:
        data = handle.read()
    if data[:6] != _MAGIC:
        raise FormatError("magic: not an NPY file")
    if len(data) < 10:
        raise FormatError("header: file truncated")
    major, minor = data[6], data[7]
    if (major, minor) != (1, 0):
        raise FormatError(f"version: expected 1.0, got {major}.{minor}")
    (header_len,) = struct.unpack("<H", data[8:10])
    header_end = 10 + header_len
    if len(data) < header_end:
        raise FormatError("header: file truncated")
    try:
        header = ast.literal_eval(data[10:header_end].decode("ascii"))
    except (ValueError, SyntaxError, UnicodeDecodeError) as exc:
        raise FormatError(f"header: cannot parse ({exc})") from exc
    if not isinstance(header, dict):
        raise FormatError("header: expected a dict literal")
    for key in ("descr", "fortran_order", "shape"):
        if key not in header:
            raise FormatError(f"{key}: missing from header")
    descr = header["descr"]
    if descr not in _DTYPES.values():
        raise FormatError(f"descr: unsupported dtype {descr!r}; "
                          f"expected one of {sorted(_DTYPES.values())}")
    if header["fortran_order"] is not False:
        raise FormatError("fortran_order: only C-order payloads are supported")
    shape = header["shape"]
    if (not isinstance(shape, tuple) or len(shape) not in (1, 2)
            or not all(isinstance(s, int) and s >= 0 for s in shape)):
        raise FormatError(f"shape: expected a 1-D or 2-D shape tuple, got {shape!r}")
    dtype = np.dtype(descr)
    expected = int(np.prod(shape)) * dtype.itemsize
    payload = data[header_end:]
    if len(payload) != expected:
        raise FormatError(f"shape: payload has {len(payload)} bytes, "
                          f"expected {expected} for shape {shape}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
    if descr == "<i8":
        return arr.astype(np.int64)
    return arr.astype(np.float64)


def read_lines(path) -> list[str]:
    """Non-empty lines of a UTF-8, LF-terminated text file."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        return [line for line in handle.read().split("\n") if line]


def write_lines(path, lines) -> None:
    atomic_write_text(path, "".join(str(line) + "\n" for line in lines))


def read_json(path):
    with open(path, "r", encoding="utf-8") as handle:
        try:
            return json.load(handle)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: malformed JSON ({exc})") from exc


def write_predictions_csv(path, sample_ids, predicted, probabilities) -> None:
    """Fixed-header predictions table: sample_id,predicted_class,probability."""
    lines = ["sample_id,predicted_class,probability"]
    for sid, pred, prob in zip(sample_ids, predicted, probabilities):
        lines.append(f"{sid},{int(pred)},{format(float(prob), '.17g')}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_predictions_csv(path):
    lines = read_lines(path)
    if not lines or lines[0] != "sample_id,predicted_class,probability":
        raise FormatError("predictions CSV: missing or wrong header")
    ids, preds, probs = [], [], []
    for lineno, line in enumerate(lines[1:], 2):
        fields = line.split(",")
        if len(fields) != 3:
            raise FormatError(f"predictions CSV line {lineno}: expected 3 fields")
        ids.append(fields[0])
        try:
            preds.append(int(fields[1]))
            probs.append(float(fields[2]))
        except ValueError as exc:
            raise FormatError(f"predictions CSV line {lineno}: {exc}") from exc
    return ids, np.array(preds, dtype=np.int64), np.array(probs)
