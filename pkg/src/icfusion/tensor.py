"""Rank-4 NCHW tensors backed by numpy arrays.

Stored tensors are float32. Kernels accept float64 tensors as well (the
gradient-check pipeline runs end to end in float64); every operation returns
the dtype of its primary input.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

AXES = ("n", "c", "h", "w")
DTYPES = (np.float32, np.float64)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


class ShapeError(ValueError):
    """Raised when tensor dimensions violate an operation's precondition."""


def check_tensor(t: np.ndarray, name: str = "tensor") -> np.ndarray:
    if not isinstance(t, np.ndarray):
        raise TypeError(f"{name} must be a numpy array, got {type(t).__name__}")
    if t.ndim != 4:
        raise ShapeError(f"{name} must be rank 4 (NCHW), got rank {t.ndim}")
    if min(t.shape) < 1:
        raise ShapeError(f"{name} has an empty axis: {t.shape}")
    if t.dtype not in DTYPES:
        raise TypeError(f"{name} must be float32 or float64, got {t.dtype}")
    return t


def tensor(data, dims: Sequence[int] | None = None, dtype=np.float32) -> np.ndarray:
    """Build a tensor from nested data or a flat sequence plus ``dims``."""
    arr = np.asarray(data, dtype=dtype)
    if dims is not None:
        dims = tuple(int(d) for d in dims)
        if arr.size != int(np.prod(dims)):
            raise ShapeError(f"data length {arr.size} does not match dims {dims}")
        arr = arr.reshape(dims)
    return check_tensor(np.ascontiguousarray(arr))


def zeros(dims: Sequence[int], dtype=np.float32) -> np.ndarray:
    return check_tensor(np.zeros(tuple(dims), dtype=dtype))


def ones(dims: Sequence[int], dtype=np.float32) -> np.ndarray:
    return check_tensor(np.ones(tuple(dims), dtype=dtype))


def full(dims: Sequence[int], value: float, dtype=np.float32) -> np.ndarray:
    return check_tensor(np.full(tuple(dims), value, dtype=dtype))


def concat_channels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    check_tensor(a, "a")
    check_tensor(b, "b")
    for axis in (0, 2, 3):
        if a.shape[axis] != b.shape[axis]:
            kind = "batch" if axis == 0 else "spatial"
            raise ShapeError(
                f"{kind} mismatch on {AXES[axis]}: {a.shape[axis]} vs {b.shape[axis]}"
            )
    if a.dtype != b.dtype:
        raise TypeError(f"dtype mismatch: {a.dtype} vs {b.dtype}")
    return np.concatenate([a, b], axis=1)


def split_channels(t: np.ndarray, parts: int) -> list[np.ndarray]:
    check_tensor(t)
    if parts < 1 or t.shape[1] % parts:
        raise ShapeError(f"{t.shape[1]} channels not divisible into {parts} parts")
    step = t.shape[1] // parts
    return [t[:, i * step:(i + 1) * step].copy() for i in range(parts)]


def _same_dims(a: np.ndarray, b: np.ndarray) -> None:
    check_tensor(a, "a")
    check_tensor(b, "b")
    if a.shape != b.shape:
        for axis, (x, y) in enumerate(zip(a.shape, b.shape)):
            if x != y:
                raise ShapeError(f"shape mismatch on {AXES[axis]}: {a.shape} vs {b.shape}")


def ew_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _same_dims(a, b)
    return np.add(a, b, dtype=a.dtype)


def ew_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _same_dims(a, b)
    return np.multiply(a, b, dtype=a.dtype)


def impulse(dims: Sequence[int], n: int, c: int, y: int, x: int, dtype=np.float32) -> np.ndarray:
    t = zeros(dims, dtype)
    for axis, (idx, size) in enumerate(zip((n, c, y, x), t.shape)):
        if not 0 <= idx < size:
            raise IndexError(f"index {idx} out of bounds on {AXES[axis]} (size {size})")
    t[n, c, y, x] = 1.0
    return t


def splitmix64(counter: np.ndarray, seed: int) -> np.ndarray:
    """splitmix64 output for each entry of a uint64 ``counter`` array.

    state_i = seed + (counter_i + 1) * 0x9E3779B97F4A7C15  (mod 2**64)
    z = (state ^ state >> 30) * 0xBF58476D1CE4E5B9
    z = (z ^ z >> 27) * 0x94D049BB133111EB
    out = z ^ z >> 31
    """
    seed = np.uint64(int(seed) & _MASK64)
    with np.errstate(over="ignore"):
        z = seed + (counter.astype(np.uint64) + np.uint64(1)) * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, index: int) -> int:
    """Child seed number ``index`` of ``seed`` (one splitmix64 draw)."""
    return int(splitmix64(np.array([index], dtype=np.uint64), seed)[0])


def seeded_uniform(dims: Sequence[int], lo: float, hi: float, seed: int,
                   dtype=np.float32) -> np.ndarray:
    """Deterministic uniform draws in [lo, hi).

    Element i (row-major) takes u = (splitmix64(i) >> 40) / 2**24 and maps it to
    lo + (hi - lo) * u in float64. After narrowing to ``dtype``, values that
    rounded outside [lo, hi) are stepped one ulp back inside.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
    dims = tuple(int(d) for d in dims)
    size = int(np.prod(dims))
    bits = splitmix64(np.arange(size, dtype=np.uint64), seed) >> np.uint64(40)
    u = bits.astype(np.float64) / float(1 << 24)
    vals = (lo + (hi - lo) * u).astype(dtype)
    high = vals.astype(np.float64) >= hi
    vals[high] = np.nextafter(vals[high], dtype(lo))
    low = vals.astype(np.float64) < lo
    vals[low] = np.nextafter(vals[low], dtype(hi))
    return check_tensor(vals.reshape(dims))
