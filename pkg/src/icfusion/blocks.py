"""Fusion module: MSFD, CSP, CCSG, CLKG and the three-stage fusion block.

Every ``*_forward`` has a matching ``*_backward(x, params, grad_out)`` that
recomputes the forward intermediates and returns ``(grad_input, grad_params)``,
where ``grad_params`` has the same dataclass type as ``params``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from icfusion.config import FusionConfig, LevelConfig
from icfusion.nn import (
    ConvSpec,
    ConvWeights,
    channel_shuffle,
    channel_shuffle_backward,
    conv2d,
    conv2d_backward,
    depthwise,
    gelu,
    gelu_backward,
    init_conv,
    pointwise,
)
from icfusion.tensor import ShapeError, check_tensor, concat_channels, derive_seed, split_channels


def _require_channels(x: np.ndarray, c: int, what: str) -> None:
    check_tensor(x)
    if x.shape[1] != c:
        raise ShapeError(f"{what} expects {c} channels, got {x.shape[1]}")


@dataclass
class CspParams:
    """Channel shuffle, grouped 1x1, GELU, grouped 1x1."""

    c_in: int
    c_mid: int
    c_out: int
    shuffle_groups: int
    groups_g1: int
    groups_g2: int
    g1: ConvWeights
    g2: ConvWeights

    @property
    def spec_g1(self) -> ConvSpec:
        return pointwise(self.c_in, self.c_mid, self.groups_g1)

    @property
    def spec_g2(self) -> ConvSpec:
        return pointwise(self.c_mid, self.c_out, self.groups_g2)


@dataclass
class CcsgParams:
    c: int
    shuffle_groups: int
    groups: int
    g: ConvWeights

    @property
    def spec(self) -> ConvSpec:
        return pointwise(self.c, self.c, self.groups)


@dataclass
class ClkgParams:
    c: int
    dw_a: ConvWeights
    dw_b: ConvWeights

    @property
    def spec_a(self) -> ConvSpec:
        return depthwise(self.c, 5)

    @property
    def spec_b(self) -> ConvSpec:
        return depthwise(self.c, 5, dilation=2)


@dataclass
class MsfdParams:
    c: int
    dw3: ConvWeights
    dw5: ConvWeights
    dw5d: ConvWeights
    csp: CspParams

    @property
    def branch_specs(self) -> tuple[ConvSpec, ConvSpec, ConvSpec]:
        return depthwise(self.c, 3), depthwise(self.c, 5), depthwise(self.c, 5, dilation=2)

    @property
    def c_out(self) -> int:
        return self.csp.c_out


@dataclass
class FusionLevelParams:
    c_rgb: int
    c_ir: int
    msfd: MsfdParams
    ccsg: CcsgParams
    clkg: ClkgParams
    csp_out: CspParams

    def named_weights(self) -> dict[str, ConvWeights]:
        return {
            "msfd.dw3": self.msfd.dw3,
            "msfd.dw5": self.msfd.dw5,
            "msfd.dw5d": self.msfd.dw5d,
            "msfd.csp.g1": self.msfd.csp.g1,
            "msfd.csp.g2": self.msfd.csp.g2,
            "ccsg.g": self.ccsg.g,
            "clkg.dw_a": self.clkg.dw_a,
            "clkg.dw_b": self.clkg.dw_b,
            "csp_out.g1": self.csp_out.g1,
            "csp_out.g2": self.csp_out.g2,
        }


def level_conv_specs(cfg: LevelConfig) -> dict[str, ConvSpec]:
    """Every convolution of one level, keyed like ``named_weights``.

    MSFD projects 4*c_rgb -> 4*c_rgb -> c_ir; the gate stages run on the
    2*c_ir concatenation and the output projection keeps 2*c_ir throughout.
    """
    c_cat = 4 * cfg.c_rgb
    c_fuse = 2 * cfg.c_ir
    return {
        "msfd.dw3": depthwise(cfg.c_rgb, 3),
        "msfd.dw5": depthwise(cfg.c_rgb, 5),
        "msfd.dw5d": depthwise(cfg.c_rgb, 5, dilation=2),
        "msfd.csp.g1": pointwise(c_cat, c_cat, cfg.msfd_groups),
        "msfd.csp.g2": pointwise(c_cat, cfg.c_ir, cfg.msfd_groups),
        "ccsg.g": pointwise(c_fuse, c_fuse, cfg.ccsg_groups),
        "clkg.dw_a": depthwise(c_fuse, 5),
        "clkg.dw_b": depthwise(c_fuse, 5, dilation=2),
        "csp_out.g1": pointwise(c_fuse, c_fuse, cfg.tail_groups),
        "csp_out.g2": pointwise(c_fuse, c_fuse, cfg.tail_groups),
    }


def build_level_params(cfg: LevelConfig, weights: dict[str, ConvWeights]) -> FusionLevelParams:
    specs = level_conv_specs(cfg)
    missing = set(specs) - set(weights)
    if missing:
        raise KeyError(f"missing weights for {sorted(missing)}")
    for name, spec in specs.items():
        weights[name].check(spec)
    c_cat, c_fuse = 4 * cfg.c_rgb, 2 * cfg.c_ir
    for c, g in ((c_cat, cfg.msfd_shuffle_groups), (c_fuse, cfg.ccsg_shuffle_groups),
                 (c_fuse, cfg.tail_shuffle_groups)):
        if g < 1 or c % g:
            raise ShapeError(f"{c} channels not divisible by {g} shuffle groups")
    msfd = MsfdParams(
        cfg.c_rgb, weights["msfd.dw3"], weights["msfd.dw5"], weights["msfd.dw5d"],
        CspParams(c_cat, c_cat, cfg.c_ir, cfg.msfd_shuffle_groups, cfg.msfd_groups,
                  cfg.msfd_groups, weights["msfd.csp.g1"], weights["msfd.csp.g2"]),
    )
    ccsg = CcsgParams(c_fuse, cfg.ccsg_shuffle_groups, cfg.ccsg_groups, weights["ccsg.g"])
    clkg = ClkgParams(c_fuse, weights["clkg.dw_a"], weights["clkg.dw_b"])
    tail = CspParams(c_fuse, c_fuse, c_fuse, cfg.tail_shuffle_groups, cfg.tail_groups,
                     cfg.tail_groups, weights["csp_out.g1"], weights["csp_out.g2"])
    return FusionLevelParams(cfg.c_rgb, cfg.c_ir, msfd, ccsg, clkg, tail)


def init_level_params(cfg: LevelConfig, seed: int, dtype=np.float32) -> FusionLevelParams:
    """Seeded init. Layer i (in ``level_conv_specs`` order) of level l uses
    ``derive_seed(derive_seed(seed, l), i)``."""
    level_seed = derive_seed(seed, cfg.level)
    weights = {name: init_conv(spec, derive_seed(level_seed, i), dtype)
               for i, (name, spec) in enumerate(level_conv_specs(cfg).items())}
    return build_level_params(cfg, weights)


def init_params(cfg: FusionConfig, seed: int, dtype=np.float32) -> dict[int, FusionLevelParams]:
    return {lc.level: init_level_params(lc, seed, dtype) for lc in cfg.levels}


def init_csp(c_in: int, c_mid: int, c_out: int, shuffle_groups: int, groups_g1: int,
             groups_g2: int, seed: int, dtype=np.float32) -> CspParams:
    g1 = init_conv(pointwise(c_in, c_mid, groups_g1), derive_seed(seed, 0), dtype)
    g2 = init_conv(pointwise(c_mid, c_out, groups_g2), derive_seed(seed, 1), dtype)
    return CspParams(c_in, c_mid, c_out, shuffle_groups, groups_g1, groups_g2, g1, g2)


def init_ccsg(c: int, shuffle_groups: int, groups: int, seed: int, dtype=np.float32) -> CcsgParams:
    return CcsgParams(c, shuffle_groups, groups,
                      init_conv(pointwise(c, c, groups), derive_seed(seed, 0), dtype))


def init_clkg(c: int, seed: int, dtype=np.float32) -> ClkgParams:
    return ClkgParams(c, init_conv(depthwise(c, 5), derive_seed(seed, 0), dtype),
                      init_conv(depthwise(c, 5, dilation=2), derive_seed(seed, 1), dtype))


# --- CSP ---------------------------------------------------------------------

def csp_forward(t: np.ndarray, p: CspParams) -> np.ndarray:
    _require_channels(t, p.c_in, "CSP")
    s = channel_shuffle(t, p.shuffle_groups)
    return conv2d(gelu(conv2d(s, p.spec_g1, p.g1)), p.spec_g2, p.g2)


def csp_backward(t: np.ndarray, p: CspParams, grad_out: np.ndarray):
    s = channel_shuffle(t, p.shuffle_groups)
    a = conv2d(s, p.spec_g1, p.g1)
    z = gelu(a)
    gz, gg2 = conv2d_backward(z, p.spec_g2, p.g2, grad_out)
    gs, gg1 = conv2d_backward(s, p.spec_g1, p.g1, gelu_backward(a, gz))
    return channel_shuffle_backward(gs, p.shuffle_groups), replace(p, g1=gg1, g2=gg2)


# --- MSFD --------------------------------------------------------------------

def msfd_forward(f_rgb: np.ndarray, p: MsfdParams) -> np.ndarray:
    _require_channels(f_rgb, p.c, "MSFD")
    s3, s5, s5d = p.branch_specs
    cat = f_rgb
    for spec, w in ((s3, p.dw3), (s5, p.dw5), (s5d, p.dw5d)):
        cat = concat_channels(cat, conv2d(f_rgb, spec, w))
    return csp_forward(cat, p.csp)


def msfd_backward(f_rgb: np.ndarray, p: MsfdParams, grad_out: np.ndarray):
    _require_channels(f_rgb, p.c, "MSFD")
    branches = list(zip(p.branch_specs, (p.dw3, p.dw5, p.dw5d)))
    cat = f_rgb
    for spec, w in branches:
        cat = concat_channels(cat, conv2d(f_rgb, spec, w))
    gcat, gcsp = csp_backward(cat, p.csp, grad_out)
    g_parts = split_channels(gcat, 4)
    gx = g_parts[0]
    branch_grads = []
    for (spec, w), g in zip(branches, g_parts[1:]):
        gxi, gw = conv2d_backward(f_rgb, spec, w, g)
        gx = gx + gxi
        branch_grads.append(gw)
    return gx, replace(p, dw3=branch_grads[0], dw5=branch_grads[1], dw5d=branch_grads[2], csp=gcsp)


# --- CCSG --------------------------------------------------------------------

def ccsg_forward(f_in: np.ndarray, p: CcsgParams) -> np.ndarray:
    _require_channels(f_in, p.c, "CCSG")
    shuffled = channel_shuffle(f_in, p.shuffle_groups)
    gate = gelu(conv2d(shuffled, p.spec, p.g)) * shuffled
    return f_in + gate


def ccsg_backward(f_in: np.ndarray, p: CcsgParams, grad_out: np.ndarray):
    _require_channels(f_in, p.c, "CCSG")
    shuffled = channel_shuffle(f_in, p.shuffle_groups)
    fg = conv2d(shuffled, p.spec, p.g)
    g_fg = gelu_backward(fg, grad_out * shuffled)
    g_shuf, gw = conv2d_backward(shuffled, p.spec, p.g, g_fg)
    g_shuf = g_shuf + grad_out * gelu(fg)
    return grad_out + channel_shuffle_backward(g_shuf, p.shuffle_groups), replace(p, g=gw)


# --- CLKG --------------------------------------------------------------------

def clkg_context(f_in: np.ndarray, p: ClkgParams) -> np.ndarray:
    """The large-kernel block: 5x5 depthwise, then dilated 5x5 depthwise."""
    _require_channels(f_in, p.c, "CLKG")
    return conv2d(conv2d(f_in, p.spec_a, p.dw_a), p.spec_b, p.dw_b)


def clkg_forward(f_in: np.ndarray, p: ClkgParams) -> np.ndarray:
    return f_in + gelu(clkg_context(f_in, p)) * f_in


def clkg_backward(f_in: np.ndarray, p: ClkgParams, grad_out: np.ndarray):
    _require_channels(f_in, p.c, "CLKG")
    a = conv2d(f_in, p.spec_a, p.dw_a)
    ctx = conv2d(a, p.spec_b, p.dw_b)
    g_ctx = gelu_backward(ctx, grad_out * f_in)
    g_a, g_b = conv2d_backward(a, p.spec_b, p.dw_b, g_ctx)
    g_x, g_aw = conv2d_backward(f_in, p.spec_a, p.dw_a, g_a)
    gx = grad_out + grad_out * gelu(ctx) + g_x
    return gx, replace(p, dw_a=g_aw, dw_b=g_b)


# --- fusion block ------------------------------------------------------------

def _check_pair(f_rgb_hat: np.ndarray, f_ir: np.ndarray, c_ir: int) -> None:
    _require_channels(f_rgb_hat, c_ir, "fusion block (refined RGB)")
    _require_channels(f_ir, c_ir, "fusion block (IR)")


def fusion_block_forward(f_rgb_hat: np.ndarray, f_ir: np.ndarray, p: FusionLevelParams) -> np.ndarray:
    """CCSG -> CLKG -> CSP on [RGB, IR], then split in two halves and add them."""
    _check_pair(f_rgb_hat, f_ir, p.c_ir)
    x = concat_channels(f_rgb_hat, f_ir)
    x = csp_forward(clkg_forward(ccsg_forward(x, p.ccsg), p.clkg), p.csp_out)
    first, second = split_channels(x, 2)
    return first + second


def fusion_block_backward(f_rgb_hat: np.ndarray, f_ir: np.ndarray, p: FusionLevelParams,
                          grad_out: np.ndarray):
    """Returns ``(grad_rgb_hat, grad_ir, grad_params)``; MSFD grads are zero."""
    _check_pair(f_rgb_hat, f_ir, p.c_ir)
    x0 = concat_channels(f_rgb_hat, f_ir)
    x1 = ccsg_forward(x0, p.ccsg)
    x2 = clkg_forward(x1, p.clkg)
    g3 = concat_channels(grad_out, grad_out)
    g2, g_tail = csp_backward(x2, p.csp_out, g3)
    g1, g_clkg = clkg_backward(x1, p.clkg, g2)
    g0, g_ccsg = ccsg_backward(x0, p.ccsg, g1)
    g_rgb, g_ir = split_channels(g0, 2)
    zero_msfd = _zero_msfd(p.msfd)
    return g_rgb, g_ir, replace(p, msfd=zero_msfd, ccsg=g_ccsg, clkg=g_clkg, csp_out=g_tail)


def level_forward(f_rgb: np.ndarray, f_ir: np.ndarray, p: FusionLevelParams) -> np.ndarray:
    """MSFD refinement of the RGB feature followed by the fusion block."""
    return fusion_block_forward(msfd_forward(f_rgb, p.msfd), f_ir, p)


def level_backward(f_rgb: np.ndarray, f_ir: np.ndarray, p: FusionLevelParams, grad_out: np.ndarray):
    f_hat = msfd_forward(f_rgb, p.msfd)
    g_hat, g_ir, grads = fusion_block_backward(f_hat, f_ir, p, grad_out)
    g_rgb, g_msfd = msfd_backward(f_rgb, p.msfd, g_hat)
    return g_rgb, g_ir, replace(grads, msfd=g_msfd)


def _zero_msfd(m: MsfdParams) -> MsfdParams:
    csp = replace(m.csp, g1=m.csp.g1.zeros_like(), g2=m.csp.g2.zeros_like())
    return replace(m, dw3=m.dw3.zeros_like(), dw5=m.dw5.zeros_like(),
                   dw5d=m.dw5d.zeros_like(), csp=csp)


# --- degenerate configurations ----------------------------------------------

def group_identity(c: int, groups: int, dtype=np.float32) -> ConvWeights:
    """Grouped 1x1 weights acting as the identity, with zero bias."""
    cpg = c // groups
    weight = np.zeros((c, cpg, 1, 1), dtype=dtype)
    weight[np.arange(c), np.arange(c) % cpg, 0, 0] = 1.0
    return ConvWeights(weight, np.zeros(c, dtype=dtype))


def identity_through_csp(p: CspParams) -> CspParams:
    """Shuffle of 1 group and identity projections: the CSP reduces to GELU."""
    if not p.c_in == p.c_mid == p.c_out:
        raise ShapeError("identity-through CSP needs equal widths")
    dtype = p.g1.weight.dtype
    return replace(p, shuffle_groups=1, g1=group_identity(p.c_mid, p.groups_g1, dtype),
                   g2=group_identity(p.c_out, p.groups_g2, dtype))


def zero_gates(p: FusionLevelParams) -> FusionLevelParams:
    """Zero every CCSG and CLKG parameter so both stages pass their input through."""
    ccsg = replace(p.ccsg, g=p.ccsg.g.zeros_like())
    clkg = replace(p.clkg, dw_a=p.clkg.dw_a.zeros_like(), dw_b=p.clkg.dw_b.zeros_like())
    return replace(p, ccsg=ccsg, clkg=clkg)


def identity_through(p: FusionLevelParams) -> FusionLevelParams:
    p = zero_gates(p)
    return replace(p, csp_out=identity_through_csp(p.csp_out))


# --- pyramid -----------------------------------------------------------------

@dataclass
class FeaturePyramid:
    levels: dict[int, np.ndarray]
    modality: str

    def __post_init__(self):
        ids = sorted(self.levels)
        for l in ids:
            check_tensor(self.levels[l], f"{self.modality} level {l}")
        for lo, hi in zip(ids, ids[1:]):
            a, b = self.levels[lo], self.levels[hi]
            scale = 2 ** (hi - lo)
            if a.shape[2] != scale * b.shape[2] or a.shape[3] != scale * b.shape[3]:
                raise ShapeError(
                    f"{self.modality} pyramid: level {lo} is {a.shape[2]}x{a.shape[3]}, "
                    f"level {hi} is {b.shape[2]}x{b.shape[3]} (expected factor {scale})"
                )


def pyramid_fuse(rgb: FeaturePyramid, ir: FeaturePyramid,
                 params: dict[int, FusionLevelParams]) -> FeaturePyramid:
    fused = {}
    for level in sorted(params):
        for pyr in (rgb, ir):
            if level not in pyr.levels:
                raise ShapeError(f"{pyr.modality} pyramid is missing level {level}")
        f_rgb, f_ir = rgb.levels[level], ir.levels[level]
        for axis, name in ((0, "n"), (2, "h"), (3, "w")):
            if f_rgb.shape[axis] != f_ir.shape[axis]:
                raise ShapeError(f"level {level}: rgb/ir mismatch on {name}: "
                                 f"{f_rgb.shape[axis]} vs {f_ir.shape[axis]}")
        fused[level] = level_forward(f_rgb, f_ir, params[level])
    return FeaturePyramid(fused, "fused")
