"""Property checks runnable without pytest (``ic-fusion selftest``)."""

from __future__ import annotations

import tempfile
from pathlib import Path
from typing import Callable

import numpy as np

from icfusion import blocks, io, nn
from icfusion.complexity import count_macs
from icfusion.config import LevelConfig
from icfusion.tensor import concat_channels, derive_seed, impulse, seeded_uniform, split_channels
from icfusion.wavelet import haar_dwt2, haar_idwt2, subband_energy

SHUFFLE_CASES = ((4, 2), (6, 3), (8, 2), (8, 4), (12, 3))


def _bits_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()


def check_concat_split(seed):
    t = seeded_uniform((2, 6, 3, 4), -1, 1, seed)
    parts = split_channels(t, 3)
    back = concat_channels(concat_channels(parts[0], parts[1]), parts[2])
    return _bits_equal(t, back), "split(3) then concat reproduces input"


def check_shuffle(seed):
    ok = True
    for c, g in SHUFFLE_CASES:
        t = seeded_uniform((1, c, 2, 3), -1, 1, derive_seed(seed, c * 16 + g))
        twice = nn.channel_shuffle(nn.channel_shuffle(t, g), c // g)
        ok &= _bits_equal(t, twice)
        ok &= _bits_equal(np.sort(t, axis=None), np.sort(nn.channel_shuffle(t, g), axis=None))
    return ok, f"shuffle(g) then shuffle(c/g) is identity for {len(SHUFFLE_CASES)} cases"


def _random_specs(seed, count):
    rng = np.random.default_rng(seed)
    specs = []
    while len(specs) < count:
        g = int(rng.integers(1, 4))
        k = int(rng.choice([1, 3, 5]))
        d = int(rng.integers(1, 3))
        pad = None if rng.random() < 0.7 else int(rng.integers(0, 3))
        try:
            spec = nn.ConvSpec(g * int(rng.integers(1, 3)), g * int(rng.integers(1, 3)), k,
                               groups=g, dilation=d, padding=pad, has_bias=bool(rng.random() < 0.5))
        except ValueError:
            continue
        if min(spec.out_size(7, 6)) >= 1:
            specs.append(spec)
    return specs


def check_conv_reference(seed):
    ok = True
    for i, spec in enumerate(_random_specs(seed, 6)):
        x = seeded_uniform((2, spec.c_in, 7, 6), -2, 2, derive_seed(seed, i))
        w = nn.init_conv(spec, derive_seed(seed, 100 + i))
        ref = nn.conv2d_reference(x, spec, w)
        ok &= _bits_equal(nn.conv2d(x, spec, w), ref)
        with nn.num_threads(3):
            ok &= _bits_equal(nn.conv2d(x, spec, w), ref)
    return ok, "compiled conv2d equals direct loop bitwise at 1 and 3 threads"


def check_macs(seed):
    ok = True
    for i, spec in enumerate(_random_specs(derive_seed(seed, 1), 10)):
        x = seeded_uniform((1, spec.c_in, 7, 6), -1, 1, i)
        counter = [0]
        nn.conv2d_reference(x, spec, nn.init_conv(spec, i), counter)
        ok &= counter[0] == count_macs(spec, 7, 6)
    return ok, "count_macs equals instrumented multiply count on 10 specs"


def check_gelu(seed):
    x = seeded_uniform((1, 4, 8, 8), -8, 8, seed, np.float64)
    diff = np.max(np.abs(nn.gelu(x) - nn.gelu(-x) - x))
    return bool(diff <= 1e-7), f"max |gelu(x) - gelu(-x) - x| = {diff:.1e}"


def check_residuals(seed):
    x = seeded_uniform((1, 8, 5, 5), -1, 1, seed)
    ccsg = blocks.init_ccsg(8, 2, 2, seed)
    clkg = blocks.init_clkg(8, seed)
    ccsg.g = ccsg.g.zeros_like()
    clkg.dw_a, clkg.dw_b = clkg.dw_a.zeros_like(), clkg.dw_b.zeros_like()
    ok = _bits_equal(blocks.ccsg_forward(x, ccsg), x) and _bits_equal(blocks.clkg_forward(x, clkg), x)
    return ok, "zero gate parameters make CCSG and CLKG return their input"


def check_identity_through(seed):
    p = blocks.identity_through(blocks.init_level_params(LevelConfig(3, 4, 8), seed))
    rgb = seeded_uniform((1, 8, 6, 6), -2, 2, derive_seed(seed, 1))
    ir = seeded_uniform((1, 8, 6, 6), -2, 2, derive_seed(seed, 2))
    out = blocks.fusion_block_forward(rgb, ir, p)
    return _bits_equal(out, nn.gelu(rgb) + nn.gelu(ir)), \
        "identity-through fusion block returns gelu(rgb) + gelu(ir)"


def check_clkg_support(seed):
    c, size = 2, 21
    ones = lambda spec: nn.ConvWeights(np.ones(spec.weight_dims, np.float32), np.zeros(c, np.float32))
    p = blocks.ClkgParams(c, ones(nn.depthwise(c, 5)), ones(nn.depthwise(c, 5, 2)))
    ctx = blocks.clkg_context(impulse((1, c, size, size), 0, 1, 10, 10), p)
    ys, xs = np.nonzero(ctx[0, 1])
    span = (ys.min(), ys.max(), xs.min(), xs.max())
    ok = span == (4, 16, 4, 16) and len(ys) == 169 and not ctx[0, 0].any()
    return ok, f"impulse support rows {span[0]}..{span[1]}, cols {span[2]}..{span[3]}"


def check_batch(seed):
    p = blocks.init_level_params(LevelConfig(4, 4, 8), seed)
    rgb = seeded_uniform((2, 4, 6, 6), -1, 1, derive_seed(seed, 1))
    ir = seeded_uniform((2, 8, 6, 6), -1, 1, derive_seed(seed, 2))
    both = blocks.level_forward(rgb, ir, p)
    ok = all(_bits_equal(both[i:i + 1], blocks.level_forward(rgb[i:i + 1], ir[i:i + 1], p))
             for i in range(2))
    return ok, "batched level equals per-sample runs bitwise"


def check_wavelet(seed):
    img = seeded_uniform((1, 1, 64, 64), 0, 1, seed, np.float64)[0, 0]
    s = haar_dwt2(img)
    err = float(np.max(np.abs(haar_idwt2(s) - img)))
    e = subband_energy(s)
    rel = abs(e.total - float(np.sum(img ** 2))) / float(np.sum(img ** 2))
    return err <= 1e-12 and rel <= 1e-9, f"round-trip {err:.1e} abs, Parseval {rel:.1e} rel"


def check_tensor_file(seed):
    ok = True
    with tempfile.TemporaryDirectory() as tmp:
        for i in range(10):
            t = seeded_uniform((1 + i % 2, 1 + i % 3, 2, 3 + i), -5, 5, derive_seed(seed, i))
            path = Path(tmp) / f"t{i}.icft"
            io.write_tensor(path, t)
            ok &= _bits_equal(io.read_tensor(path), t)
    return ok, "tensor file round trip is bitwise on 10 tensors"


CHECKS: list[tuple[str, Callable]] = [
    ("concat_split_inverse", check_concat_split),
    ("shuffle_algebra", check_shuffle),
    ("conv2d_reference", check_conv_reference),
    ("macs_oracle", check_macs),
    ("gelu_odd_identity", check_gelu),
    ("residual_identity", check_residuals),
    ("identity_through", check_identity_through),
    ("clkg_support", check_clkg_support),
    ("batch_equivariance", check_batch),
    ("wavelet_exactness", check_wavelet),
    ("tensor_file_roundtrip", check_tensor_file),
]


def run_selftest(seed: int = 0) -> list[tuple[str, bool, str]]:
    return [(name, bool(ok), detail)
            for name, fn in CHECKS for ok, detail in [fn(seed)]]
