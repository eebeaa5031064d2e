"""Field files, CSV tables and provenance headers.

Binary field layout: magic b"HCSK", then little-endian u32 version, N, n, kind
(20 bytes), then the float64 little-endian payload in row-major node order.
Matrix fields store the four (a, b) entries lexicographically per node, real
part before imaginary part.
"""

import csv
import hashlib
import io
import json
import os
import struct
import tempfile

import numpy as np

MAGIC = b"HCSK"
VERSION = 1
KIND_SCALAR_REAL = 0
KIND_MATRIX_COMPLEX = 1
_HEADER = struct.Struct("<4sIIII")


def atomic_write(path, data):
    """Write bytes or text to ``path`` via a temp file in the same directory and rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_field(field):
    a = np.asarray(field)
    if np.iscomplexobj(a) or a.ndim == 4:
        N = a.shape[0]
        if a.shape != (N, N, 2, 2):
            raise ValueError(f"matrix field must be (N, N, 2, 2), got {a.shape}")
        kind, n, payload = KIND_MATRIX_COMPLEX, 2, a.astype("<c16").tobytes()
    else:
        N, n = a.shape[0], a.ndim
        if a.shape != (N,) * n:
            raise ValueError(f"scalar field must be (N,)*n, got {a.shape}")
        kind, payload = KIND_SCALAR_REAL, a.astype("<f8").tobytes()
    return _HEADER.pack(MAGIC, VERSION, N, n, kind) + payload


def decode_field(blob):
    if len(blob) < _HEADER.size:
        raise ValueError("field file shorter than its header")
    magic, version, N, n, kind = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError("not a field file (bad magic)")
    if version != VERSION:
        raise ValueError(f"unsupported field file version {version}")
    body = blob[_HEADER.size:]
    if kind == KIND_SCALAR_REAL:
        shape, dtype = (N,) * n, "<f8"
    elif kind == KIND_MATRIX_COMPLEX:
        shape, dtype = (N,) * n + (2, 2), "<c16"
    else:
        raise ValueError(f"unknown field kind {kind}")
    want = int(np.prod(shape)) * np.dtype(dtype).itemsize
    if len(body) != want:
        raise ValueError(f"payload has {len(body)} bytes, expected {want}")
    return np.frombuffer(body, dtype=dtype).reshape(shape).astype(
        complex if kind == KIND_MATRIX_COMPLEX else float)


def write_field(path, field):
    atomic_write(path, encode_field(field))


def read_field(path):
    with open(path, "rb") as fh:
        return decode_field(fh.read())


def config_hash(config):
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def provenance(config, grid=None):
    """Header lines: config hash, package and library versions, grid parameters."""
    import scipy

    from . import __version__

    lines = [
        f"config_sha256={config_hash(config)}",
        f"hcsk={__version__} numpy={np.__version__} scipy={scipy.__version__}",
    ]
    if grid is not None:
        lines.append("grid=" + " ".join(f"{k}={v}" for k, v in grid.items()))
    return lines


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header_lines, columns, rows):
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_csv(path, header_lines, columns, rows):
    atomic_write(path, csv_text(header_lines, columns, rows))


def read_csv(path):
    """(columns, rows as lists of strings), skipping '#' header lines."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    r = list(csv.reader(lines))
    return r[0], r[1:]


def field_rows(field):
    """One row per node: y1, y2, then values (Re/Im per matrix entry for complex fields)."""
    a = np.asarray(field)
    N = a.shape[0]
    ys = np.arange(N) / N
    if a.ndim == 4:
        cols = ["y1", "y2"] + [f"{p}{a_}{b}" for a_ in (1, 2) for b in (1, 2) for p in ("re", "im")]
        rows = []
        for i in range(N):
            for j in range(N):
                m = a[i, j]
                vals = []
                for x in m.ravel():
                    vals += [x.real, x.imag]
                rows.append([ys[i], ys[j]] + vals)
        return cols, rows
    if a.ndim == 2:
        return ["y1", "y2", "value"], [[ys[i], ys[j], a[i, j]] for i in range(N) for j in range(N)]
    return ["y1", "value"], [[ys[i], a[i]] for i in range(N)]


def write_jsonl(path, header_lines, records):
    text = "".join(json.dumps({"provenance": ln}) + "\n" for ln in header_lines)
    text += "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    atomic_write(path, text)


def write_json(path, header_lines, payload):
    doc = {"provenance": list(header_lines), **payload}
    atomic_write(path, json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n")
