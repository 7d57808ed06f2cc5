"""Convolution, GELU and channel shuffle with explicit backward passes."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erfc

from icfusion._kernels import conv_forward_range
from icfusion.tensor import ShapeError, check_tensor, seeded_uniform

_NUM_THREADS = 1


def set_num_threads(n: int) -> None:
    """Worker threads used by ``conv2d``. Results do not depend on this."""
    global _NUM_THREADS
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _NUM_THREADS = int(n)


def get_num_threads() -> int:
    return _NUM_THREADS


@contextmanager
def num_threads(n: int):
    old = _NUM_THREADS
    set_num_threads(n)
    try:
        yield
    finally:
        set_num_threads(old)


@dataclass(frozen=True)
class ConvSpec:
    """Stride-1 2-D convolution. ``padding=None`` means "same" padding."""

    c_in: int
    c_out: int
    k: int
    groups: int = 1
    dilation: int = 1
    padding: int | None = None
    has_bias: bool = True

    def __post_init__(self):
        if min(self.c_in, self.c_out, self.k, self.groups, self.dilation) < 1:
            raise ValueError(f"non-positive field in {self}")
        if self.c_in % self.groups or self.c_out % self.groups:
            raise ShapeError(
                f"channels ({self.c_in} in, {self.c_out} out) not divisible by groups={self.groups}"
            )
        if self.padding is None:
            if self.k % 2 == 0:
                raise ValueError("'same' padding needs an odd kernel size")
            object.__setattr__(self, "padding", self.dilation * (self.k - 1) // 2)
        elif self.padding < 0:
            raise ValueError("padding must be >= 0")

    @property
    def weight_dims(self) -> tuple[int, int, int, int]:
        return (self.c_out, self.c_in // self.groups, self.k, self.k)

    @property
    def fan_in(self) -> int:
        return (self.c_in // self.groups) * self.k * self.k

    def out_size(self, h: int, w: int) -> tuple[int, int]:
        span = self.dilation * (self.k - 1)
        return h + 2 * self.padding - span, w + 2 * self.padding - span

    def without_bias(self) -> ConvSpec:
        return ConvSpec(self.c_in, self.c_out, self.k, self.groups, self.dilation,
                        self.padding, has_bias=False)


def depthwise(c: int, k: int, dilation: int = 1) -> ConvSpec:
    return ConvSpec(c, c, k, groups=c, dilation=dilation)


def pointwise(c_in: int, c_out: int, groups: int = 1) -> ConvSpec:
    return ConvSpec(c_in, c_out, 1, groups=groups)


@dataclass
class ConvWeights:
    weight: np.ndarray
    bias: np.ndarray | None = None

    def check(self, spec: ConvSpec) -> ConvWeights:
        if self.weight.shape != spec.weight_dims:
            raise ShapeError(f"weight dims {self.weight.shape} != {spec.weight_dims} for {spec}")
        if spec.has_bias:
            if self.bias is None or self.bias.shape != (spec.c_out,):
                raise ShapeError(f"bias must have shape ({spec.c_out},)")
        elif self.bias is not None:
            raise ShapeError("bias given for a bias-free spec")
        return self

    def astype(self, dtype) -> ConvWeights:
        bias = None if self.bias is None else self.bias.astype(dtype)
        return ConvWeights(self.weight.astype(dtype), bias)

    def zeros_like(self) -> ConvWeights:
        bias = None if self.bias is None else np.zeros_like(self.bias)
        return ConvWeights(np.zeros_like(self.weight), bias)


def init_conv(spec: ConvSpec, seed: int, dtype=np.float32) -> ConvWeights:
    """Uniform(-b, b) with b = sqrt(1 / fan_in) for weight and bias.

    The weight uses ``seed`` directly and the bias uses ``seed + 1``.
    """
    bound = math.sqrt(1.0 / spec.fan_in)
    weight = seeded_uniform(spec.weight_dims, -bound, bound, seed, dtype)
    bias = None
    if spec.has_bias:
        bias = seeded_uniform((1, spec.c_out, 1, 1), -bound, bound, seed + 1, dtype).reshape(-1)
    return ConvWeights(weight, bias)


def _check_conv_input(x: np.ndarray, spec: ConvSpec, w: ConvWeights) -> tuple[int, int]:
    check_tensor(x, "input")
    w.check(spec)
    if x.shape[1] != spec.c_in:
        raise ShapeError(f"input has {x.shape[1]} channels, spec expects {spec.c_in}")
    h_out, w_out = spec.out_size(x.shape[2], x.shape[3])
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"non-positive output size {h_out}x{w_out}")
    return h_out, w_out


def _pad(x: np.ndarray, p: int) -> np.ndarray:
    x = x.astype(np.float64)
    if p:
        x = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    return np.ascontiguousarray(x)


def conv2d(x: np.ndarray, spec: ConvSpec, w: ConvWeights) -> np.ndarray:
    """Grouped, dilated cross-correlation with zero padding and stride 1.

    Products and sums run in float64; each output element is rounded to the
    input dtype once. Work is split over (batch, output channel) pairs when
    more than one thread is configured.
    """
    h_out, w_out = _check_conv_input(x, spec, w)
    xpad = _pad(x, spec.padding)
    weight = np.ascontiguousarray(w.weight, dtype=np.float64)
    bias = np.zeros(spec.c_out) if w.bias is None else np.asarray(w.bias, dtype=np.float64)
    out = np.empty((x.shape[0], spec.c_out, h_out, w_out), dtype=np.float64)
    jobs = x.shape[0] * spec.c_out
    args = (xpad, weight, bias, spec.has_bias, spec.groups, spec.dilation, out)
    threads = min(_NUM_THREADS, jobs)
    if threads == 1:
        conv_forward_range(*args, 0, jobs)
    else:
        bounds = np.linspace(0, jobs, threads + 1).astype(int)
        with ThreadPoolExecutor(threads) as pool:
            futures = [pool.submit(conv_forward_range, *args, int(a), int(b))
                       for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
            for f in futures:
                f.result()
    return out.astype(x.dtype)


def conv2d_reference(x: np.ndarray, spec: ConvSpec, w: ConvWeights,
                     counter: list[int] | None = None) -> np.ndarray:
    """Direct loop convolution, the correctness anchor for ``conv2d``.

    Out-of-image taps read zero and are still multiplied and accumulated.
    If ``counter`` is given, ``counter[0]`` is incremented once per multiply.
    """
    h_out, w_out = _check_conv_input(x, spec, w)
    n, _, h, wd = x.shape
    cpg = spec.c_in // spec.groups
    copg = spec.c_out // spec.groups
    p, d, k = spec.padding, spec.dilation, spec.k
    xs = x.astype(np.float64).tolist()
    ws = w.weight.astype(np.float64).tolist()
    bs = None if w.bias is None else w.bias.astype(np.float64).tolist()
    out = np.empty((n, spec.c_out, h_out, w_out), dtype=np.float64)
    muls = 0
    for b in range(n):
        for co in range(spec.c_out):
            base = (co // copg) * cpg
            for y in range(h_out):
                for xo in range(w_out):
                    acc = 0.0
                    for ci in range(cpg):
                        plane = xs[b][base + ci]
                        for ky in range(k):
                            iy = y + ky * d - p
                            for kx in range(k):
                                ix = xo + kx * d - p
                                val = plane[iy][ix] if 0 <= iy < h and 0 <= ix < wd else 0.0
                                acc += ws[co][ci][ky][kx] * val
                                muls += 1
                    if spec.has_bias:
                        acc += bs[co]
                    out[b, co, y, xo] = acc
    if counter is not None:
        counter[0] += muls
    return out.astype(x.dtype)


def conv2d_backward(x: np.ndarray, spec: ConvSpec, w: ConvWeights,
                    grad_out: np.ndarray) -> tuple[np.ndarray, ConvWeights]:
    """Gradients of ``conv2d`` with respect to its input, weight and bias."""
    h_out, w_out = _check_conv_input(x, spec, w)
    n = x.shape[0]
    if grad_out.shape != (n, spec.c_out, h_out, w_out):
        raise ShapeError(f"grad_out dims {grad_out.shape} != output dims "
                         f"{(n, spec.c_out, h_out, w_out)}")
    G, k, d, p = spec.groups, spec.k, spec.dilation, spec.padding
    cpg, copg = spec.c_in // G, spec.c_out // G
    xpad = _pad(x, p)
    hp, wp = xpad.shape[2:]
    xg = xpad.reshape(n, G, cpg, hp, wp)
    go = grad_out.astype(np.float64).reshape(n, G, copg, h_out, w_out)
    wg = w.weight.astype(np.float64).reshape(G, copg, cpg, k, k)
    gx = np.zeros_like(xg)
    gw = np.zeros_like(wg)
    for ky in range(k):
        for kx in range(k):
            ys = slice(ky * d, ky * d + h_out)
            xs = slice(kx * d, kx * d + w_out)
            gw[..., ky, kx] = np.einsum("ngohw,ngihw->goi", go, xg[..., ys, xs])
            gx[..., ys, xs] += np.einsum("goi,ngohw->ngihw", wg[..., ky, kx], go)
    gx = gx.reshape(n, spec.c_in, hp, wp)[:, :, p:hp - p, p:wp - p]
    grad_bias = grad_out.astype(np.float64).sum(axis=(0, 2, 3)) if spec.has_bias else None
    dtype = x.dtype
    grads = ConvWeights(gw.reshape(spec.weight_dims).astype(dtype),
                        None if grad_bias is None else grad_bias.astype(dtype))
    return np.ascontiguousarray(gx).astype(dtype), grads


_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def normal_cdf(x):
    # erfc form keeps full relative accuracy in the negative tail
    return 0.5 * erfc(-np.asarray(x, dtype=np.float64) / _SQRT2)


def gelu(t: np.ndarray) -> np.ndarray:
    """Exact GELU, x * Phi(x)."""
    x = t.astype(np.float64)
    return (x * normal_cdf(x)).astype(t.dtype)


def gelu_backward(t: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    x = t.astype(np.float64)
    deriv = normal_cdf(x) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return (grad_out.astype(np.float64) * deriv).astype(t.dtype)


def shuffle_permutation(c: int, g: int) -> np.ndarray:
    """Output channel j of ``channel_shuffle`` reads input channel perm[j]."""
    if g < 1 or c % g:
        raise ShapeError(f"{c} channels not divisible by {g} shuffle groups")
    return np.arange(c).reshape(g, c // g).T.reshape(-1)


def channel_shuffle(t: np.ndarray, g: int) -> np.ndarray:
    check_tensor(t)
    return t[:, shuffle_permutation(t.shape[1], g)]


def channel_shuffle_backward(grad_out: np.ndarray, g: int) -> np.ndarray:
    check_tensor(grad_out)
    c = grad_out.shape[1]
    shuffle_permutation(c, g)
    return channel_shuffle(grad_out, c // g)


def finite_diff_grad(f: Callable[[np.ndarray], float], t: np.ndarray,
                     coords: Iterable[Sequence[int] | int], h: float = 1e-3) -> np.ndarray:
    """Central differences of scalar ``f`` at the given coordinates, in float64."""
    if h <= 0:
        raise ValueError("step must be positive")
    x = t.astype(np.float64)
    flat = x.reshape(-1)
    out = []
    for coord in coords:
        if isinstance(coord, (int, np.integer)):
            if not 0 <= coord < flat.size:
                raise IndexError(f"flat index {coord} out of range for size {flat.size}")
            idx = int(coord)
        else:
            coord = tuple(int(i) for i in coord)
            if len(coord) != x.ndim or any(not 0 <= i < s for i, s in zip(coord, x.shape)):
                raise IndexError(f"coordinate {coord} out of range for dims {x.shape}")
            idx = int(np.ravel_multi_index(coord, x.shape))
        orig = flat[idx]
        flat[idx] = orig + h
        fp = float(f(x))
        flat[idx] = orig - h
        fm = float(f(x))
        flat[idx] = orig
        out.append((fp - fm) / (2.0 * h))
    return np.array(out, dtype=np.float64)


def max_relative_error(analytic, numeric, floor: float = 1e-8) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0
