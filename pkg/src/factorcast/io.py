"""File formats: binary series files, loading-matrix files, plain-text
reports and key-value config files.

Series file layout (all integers little-endian):

    bytes 0-3   magic ``FATT``
    u32         format version (currently 1)
    u32         dtype code (1 = little-endian float64; anything else is
                rejected, including 2, reserved for big-endian float64)
    u32         K, the covariate tensor order
    K x u32     covariate dims d_1..d_K
    u32         q, the response tensor order (0 = no response block)
    q x u32     response dims p_1..p_q
    u64         n, number of time steps
    payload     n * prod(d) float64 covariates (time-major, C-order slices),
                then n * prod(p) float64 responses

Every parse failure raises its own exception type (see errors module) so
callers can distinguish a wrong file from a damaged one.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import (
    BadMagicError,
    ConfigError,
    HeaderInconsistencyError,
    PayloadSizeError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)

SERIES_MAGIC = b"FATT"
SERIES_VERSION = 1
DTYPE_F64_LE = 1
LOADINGS_MAGIC = b"FLDG"
LOADINGS_VERSION = 1

# Header sanity bound; a dimension above this is a corrupt header, not data.
_MAX_DIM = 2**31


def series_to_bytes(covariates: np.ndarray, responses: np.ndarray | None = None) -> bytes:
    covariates = np.ascontiguousarray(covariates, dtype=np.float64)
    if covariates.ndim < 2:
        raise ValueError("covariates must have shape (n, d_1, ..., d_K)")
    n = covariates.shape[0]
    dims = covariates.shape[1:]
    if responses is None:
        pdims = ()
    else:
        responses = np.ascontiguousarray(responses, dtype=np.float64)
        if responses.ndim < 2 or responses.shape[0] != n:
            raise ValueError(
                f"responses must share the time axis: {covariates.shape[0]} vs "
                f"{None if responses is None else responses.shape}"
            )
        pdims = responses.shape[1:]
    head = [SERIES_MAGIC, struct.pack("<III", SERIES_VERSION, DTYPE_F64_LE, len(dims))]
    head.append(struct.pack(f"<{len(dims)}I", *dims))
    head.append(struct.pack("<I", len(pdims)))
    if pdims:
        head.append(struct.pack(f"<{len(pdims)}I", *pdims))
    head.append(struct.pack("<Q", n))
    body = covariates.astype("<f8").tobytes()
    if responses is not None:
        body += responses.astype("<f8").tobytes()
    return b"".join(head) + body


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise PayloadSizeError(
                f"file truncated: wanted {size} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out


def series_from_bytes(data: bytes):
    """Parse a series file; returns ``(covariates, responses_or_None)``."""
    cur = _Cursor(data)
    if len(data) < 4 or data[:4] != SERIES_MAGIC:
        raise BadMagicError(f"not a series file (magic {data[:4]!r})")
    cur.pos = 4
    (version, dtype_code, K) = cur.take("<III")
    if version != SERIES_VERSION:
        raise UnsupportedVersionError(f"unsupported series file version {version}")
    if dtype_code != DTYPE_F64_LE:
        raise UnsupportedDtypeError(
            f"unsupported dtype code {dtype_code} (only little-endian float64 is supported)"
        )
    if not 1 <= K < 256:
        raise HeaderInconsistencyError(f"implausible covariate order K={K}")
    dims = cur.take(f"<{K}I")
    (q,) = cur.take("<I")
    if q >= 256:
        raise HeaderInconsistencyError(f"implausible response order q={q}")
    pdims = cur.take(f"<{q}I") if q else ()
    (n,) = cur.take("<Q")
    if n < 1:
        raise HeaderInconsistencyError("series declares zero time steps")
    for d in dims + pdims:
        if not 1 <= d < _MAX_DIM:
            raise HeaderInconsistencyError(f"implausible dimension {d} in header")

    cov_count = n * int(np.prod(dims))
    resp_count = n * int(np.prod(pdims)) if q else 0
    expected = cur.pos + 8 * (cov_count + resp_count)
    if len(data) != expected:
        raise PayloadSizeError(
            f"payload length mismatch: header implies {expected - cur.pos} payload "
            f"bytes, file has {len(data) - cur.pos}"
        )
    flat = np.frombuffer(data, dtype="<f8", count=cov_count, offset=cur.pos)
    covariates = flat.reshape((n,) + tuple(dims)).copy()
    responses = None
    if q:
        flat = np.frombuffer(data, dtype="<f8", count=resp_count,
                             offset=cur.pos + 8 * cov_count)
        responses = flat.reshape((n,) + tuple(pdims)).copy()
    return covariates, responses


def write_series(path, covariates, responses=None) -> None:
    with open(path, "wb") as fh:
        fh.write(series_to_bytes(covariates, responses))


def read_series(path):
    with open(path, "rb") as fh:
        return series_from_bytes(fh.read())


# -- loading matrices ---------------------------------------------------------

def write_loadings(path, fit) -> None:
    """Store a factor fit's loading matrices (plus iteration metadata)."""
    loadings = fit.loadings
    parts = [
        LOADINGS_MAGIC,
        struct.pack("<II", LOADINGS_VERSION, len(loadings.loadings)),
    ]
    for a in loadings.loadings:
        parts.append(struct.pack("<II", a.shape[0], a.shape[1]))
    parts.append(struct.pack("<Id", fit.iterations_used,
                             fit.final_subspace_change))
    for a in loadings.loadings:
        parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_loadings(path):
    """Returns ``(LoadingSet, iterations_used, final_subspace_change)``."""
    from .factor_model import LoadingSet

    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != LOADINGS_MAGIC:
        raise BadMagicError(f"not a loadings file (magic {data[:4]!r})")
    cur = _Cursor(data)
    cur.pos = 4
    (version, K) = cur.take("<II")
    if version != LOADINGS_VERSION:
        raise UnsupportedVersionError(f"unsupported loadings file version {version}")
    if not 1 <= K < 256:
        raise HeaderInconsistencyError(f"implausible order K={K}")
    shapes = [cur.take("<II") for _ in range(K)]
    for d, r in shapes:
        if not 1 <= r <= d < _MAX_DIM:
            raise HeaderInconsistencyError(f"implausible loading shape ({d}, {r})")
    (iterations, change) = cur.take("<Id")
    mats = []
    for d, r in shapes:
        nbytes = d * r * 8
        if cur.pos + nbytes > len(data):
            raise PayloadSizeError("loadings payload truncated")
        mats.append(
            np.frombuffer(data, dtype="<f8", count=d * r, offset=cur.pos)
            .reshape(d, r)
            .copy()
        )
        cur.pos += nbytes
    if cur.pos != len(data):
        raise PayloadSizeError("trailing bytes after loadings payload")
    return (
        LoadingSet(loadings=mats, ranks=tuple(r for _, r in shapes)),
        iterations,
        change,
    )


# -- plain-text reports and config files --------------------------------------

def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(str(x) for x in v)
    return str(v)


def format_report(fields: dict) -> str:
    """Render a flat mapping as ``key = value`` lines (machine parseable;
    floats use repr so they round-trip exactly)."""
    lines = [f"{key} = {_format_value(value)}" for key, value in fields.items()]
    return "\n".join(lines) + "\n"


def parse_keyvalue(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, blanks ignored.

    Values are returned as strings; callers coerce them.  Raises
    ConfigError with the offending line number on malformed input.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def read_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_keyvalue(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc


def write_report(path, fields: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_report(fields))


def read_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_keyvalue(fh.read())
