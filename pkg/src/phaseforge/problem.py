"""Phase retrieval instances under the Gaussian measurement model.

An instance bundles an m x n sensing matrix ``A`` with independent
complex Gaussian entries of unit mean square, a unit-norm signal
``x0``, and the magnitude data ``b = |A x0|``.  Instances are
immutable, reproducible from a seed, and serialize to a compact binary
``.pri`` container with a checksum.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .randomness import TAG_SENSING, TAG_SIGNAL, complex_gaussian, derive_seed, rng_from

__all__ = [
    "ProblemInstance",
    "InstanceFormatError",
    "UnsupportedVersionError",
    "sample_sensing_matrix",
    "sample_signal",
    "make_instance",
    "save_instance",
    "load_instance",
    "derive_seed",
]

MAGIC = b"\x89PRI"
FORMAT_VERSION = 1


class InstanceFormatError(ValueError):
    """The bytes on disk are not a valid instance container."""


class UnsupportedVersionError(InstanceFormatError):
    """The container declares a format version this build cannot read."""


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, order="C")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ProblemInstance:
    """One phase retrieval problem: recover ``x0`` from ``b = |A x0|``."""

    n: int
    m: int
    A: np.ndarray
    x0: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError(f"dimensions must be positive, got n={self.n}, m={self.m}")
        A = _frozen_array(self.A, np.complex128)
        x0 = _frozen_array(self.x0, np.complex128)
        b = _frozen_array(self.b, np.float64)
        if A.shape != (self.m, self.n):
            raise ValueError(f"A has shape {A.shape}, expected ({self.m}, {self.n})")
        if x0.shape != (self.n,):
            raise ValueError(f"x0 has shape {x0.shape}, expected ({self.n},)")
        if b.shape != (self.m,):
            raise ValueError(f"b has shape {b.shape}, expected ({self.m},)")
        if not (np.all(np.isfinite(A.view(np.float64))) and np.all(np.isfinite(x0.view(np.float64))) and np.all(np.isfinite(b))):
            raise ValueError("instance entries must be finite")
        if np.any(b < 0):
            raise ValueError("b must be entrywise nonnegative")
        expected = np.abs(A @ x0)
        tol = 1e-12 * max(1.0, float(expected.max(initial=0.0)))
        if np.max(np.abs(b - expected), initial=0.0) > tol:
            raise ValueError("b is inconsistent with |A x0|")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "b", b)

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (
            self.n == other.n
            and self.m == other.m
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.x0, other.x0)
            and np.array_equal(self.b, other.b)
        )


def sample_sensing_matrix(m: int, n: int, seed: int) -> np.ndarray:
    """m x n matrix with i.i.d. N(0, 1/2) + i N(0, 1/2) entries."""
    if m < 1 or n < 1:
        raise ValueError(f"dimensions must be positive, got m={m}, n={n}")
    return complex_gaussian(rng_from(seed, TAG_SENSING), (m, n))


def sample_signal(n: int, seed: int) -> np.ndarray:
    """Unit-norm complex Gaussian signal of dimension ``n``."""
    if n < 1:
        raise ValueError(f"dimension must be positive, got n={n}")
    v = complex_gaussian(rng_from(seed, TAG_SIGNAL), n)
    nv = np.linalg.norm(v)
    while nv == 0.0:  # probability zero, but keep the contract airtight
        v = complex_gaussian(rng_from(seed, TAG_SIGNAL, 1), n)
        nv = np.linalg.norm(v)
    return v / nv


def make_instance(n: int, m: int, seed: int) -> ProblemInstance:
    """Sample a fresh instance; ``A`` and ``x0`` use independent streams."""
    A = sample_sensing_matrix(m, n, seed)
    x0 = sample_signal(n, seed)
    return ProblemInstance(n=n, m=m, A=A, x0=x0, b=np.abs(A @ x0))


# Container layout (little-endian throughout):
#   magic (4) | version u32 | n u64 | m u64 | A (m*n c16, row-major)
#   | x0 (n c16) | b (m f8) | crc32 u32 over everything before it
_HEADER = struct.Struct("<IQQ")


def save_instance(instance: ProblemInstance, path) -> None:
    """Write ``instance`` to ``path``; the round trip is bit-exact."""
    parts = [
        MAGIC,
        _HEADER.pack(FORMAT_VERSION, instance.n, instance.m),
        np.ascontiguousarray(instance.A, dtype="<c16").tobytes(),
        np.ascontiguousarray(instance.x0, dtype="<c16").tobytes(),
        np.ascontiguousarray(instance.b, dtype="<f8").tobytes(),
    ]
    body = b"".join(parts)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def load_instance(path) -> ProblemInstance:
    """Read an instance written by :func:`save_instance`."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise InstanceFormatError(f"{path}: not a phase retrieval instance file")
    header_end = len(MAGIC) + _HEADER.size
    if len(data) < header_end:
        raise InstanceFormatError(f"{path}: truncated header")
    version, n, m = _HEADER.unpack(data[len(MAGIC) : header_end])
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{path}: unsupported format version {version} (expected {FORMAT_VERSION})"
        )
    expected_len = header_end + 16 * (m * n + n) + 8 * m + 4
    if len(data) < expected_len:
        raise InstanceFormatError(f"{path}: truncated file")
    if len(data) > expected_len:
        raise InstanceFormatError(f"{path}: trailing bytes after payload")
    (stored_crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != stored_crc:
        raise InstanceFormatError(f"{path}: checksum mismatch")
    offset = header_end
    A = np.frombuffer(data, dtype="<c16", count=m * n, offset=offset).reshape(m, n)
    offset += 16 * m * n
    x0 = np.frombuffer(data, dtype="<c16", count=n, offset=offset)
    offset += 16 * n
    b = np.frombuffer(data, dtype="<f8", count=m, offset=offset)
    return ProblemInstance(
        n=int(n),
        m=int(m),
        A=A.astype(np.complex128),
        x0=x0.astype(np.complex128),
        b=b.astype(np.float64),
    )
