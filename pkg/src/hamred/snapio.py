"""Binary snapshot persistence and CSV output helpers.

Snapshot file layout (all integers little-endian):

    bytes 0..3    magic "PSDS"
    bytes 4..7    version, u32 = 1
    bytes 8..15   rows, u64
    bytes 16..23  cols, u64
    payload       rows*cols IEEE-754 binary64 values, column-major
    footer        record count, u64 (0 when no provenance, else = cols);
                  then per column one length-prefixed record:
                      u32 byte length L, u32 parameter dimension d,
                      d binary64 parameter components, binary64 time
                      (L = 4 + 8*d + 8)

Round trips are bit-exact.  CSV numeric fields are written with 17
significant digits so they parse back to the identical binary64 value.
"""

import struct

import numpy as np

from .errors import ValidationError

MAGIC = b"PSDS"
VERSION = 1


def write_snapshot(path, matrix, provenance=None):
    """Write a dense matrix (and optional per-column provenance) to `path`."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValidationError("snapshot payload must be a matrix")
    rows, cols = matrix.shape
    if provenance is not None and len(provenance) != cols:
        raise ValidationError(
            f"provenance length {len(provenance)} != column count {cols}"
        )
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<QQ", rows, cols))
        fh.write(np.asfortranarray(matrix).tobytes(order="F"))
        if provenance is None:
            fh.write(struct.pack("<Q", 0))
        else:
            fh.write(struct.pack("<Q", cols))
            for mu, t in provenance:
                mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
                body = struct.pack("<I", mu.size) + mu.tobytes() + struct.pack(
                    "<d", float(t)
                )
                fh.write(struct.pack("<I", len(body)))
                fh.write(body)


def read_snapshot(path):
    """Read a snapshot file; returns (matrix, provenance-or-None)."""
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head != MAGIC:
            raise ValidationError(f"{path}: bad magic {head!r}, expected {MAGIC!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise ValidationError(f"{path}: unsupported version {version}")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        payload = fh.read(rows * cols * 8)
        if len(payload) != rows * cols * 8:
            raise ValidationError(f"{path}: truncated payload")
        matrix = np.frombuffer(payload, dtype="<f8").reshape(
            (rows, cols), order="F"
        ).copy()
        (count,) = struct.unpack("<Q", fh.read(8))
        if count == 0:
            return matrix, None
        if count != cols:
            raise ValidationError(
                f"{path}: provenance count {count} != column count {cols}"
            )
        provenance = []
        for _ in range(count):
            (length,) = struct.unpack("<I", fh.read(4))
            body = fh.read(length)
            if len(body) != length:
                raise ValidationError(f"{path}: truncated provenance record")
            (d,) = struct.unpack("<I", body[:4])
            mu = np.frombuffer(body[4 : 4 + 8 * d], dtype="<f8").copy()
            (t,) = struct.unpack("<d", body[4 + 8 * d :])
            provenance.append((mu, t))
        return matrix, provenance


def format_float(x):
    """17 significant digits: round-trips to the same binary64."""
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    """Write rows of mixed str/float fields; floats get 17 digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fields = [
                value if isinstance(value, str) else format_float(value)
                for value in row
            ]
            fh.write(",".join(fields) + "\n")


def append_csv_row(path, header, row):
    """Append one row, writing the header first if the file is new/empty."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            has_header = bool(fh.readline().strip())
    except FileNotFoundError:
        has_header = False
    with open(path, "a", encoding="utf-8") as fh:
        if not has_header:
            fh.write(",".join(header) + "\n")
        fields = [v if isinstance(v, str) else format_float(v) for v in row]
        fh.write(",".join(fields) + "\n")
