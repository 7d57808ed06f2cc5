"""Parameter and MAC accounting for the fusion module.

One MAC is one multiply plus one add. Bias additions and activations are not
counted. Totals cover the fusion module only; backbones and the detection
transformer are outside this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from icfusion.blocks import level_conv_specs
from icfusion.config import FusionConfig, dump_config
from icfusion.nn import ConvSpec

# Whole-detector figures for the fusion model (both backbones + encoder/decoder).
PUBLISHED_FULL_MODEL = {"params_m": 56.04, "macs_g": 87.97}


def count_params(spec: ConvSpec) -> int:
    return spec.c_out * (spec.c_in // spec.groups) * spec.k ** 2 + (spec.c_out if spec.has_bias else 0)


def count_macs(spec: ConvSpec, h: int, w: int) -> int:
    """Multiplies executed by the direct kernel, including zero-padded taps."""
    h_out, w_out = spec.out_size(h, w)
    return spec.c_out * (spec.c_in // spec.groups) * spec.k ** 2 * max(h_out, 0) * max(w_out, 0)


@dataclass(frozen=True)
class LayerCost:
    name: str
    params: int
    macs: int
    h: int
    w: int


@dataclass
class CostReport:
    layers: list[LayerCost] = field(default_factory=list)
    config: str = ""

    @property
    def total_params(self) -> int:
        return sum(l.params for l in self.layers)

    @property
    def total_macs(self) -> int:
        return sum(l.macs for l in self.layers)

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "layers": [{"name": l.name, "params": l.params, "macs": l.macs, "h": l.h, "w": l.w}
                       for l in self.layers],
            "total_params": self.total_params,
            "total_macs": self.total_macs,
            "note": ("fusion module only; the published full-model figures "
                     f"({PUBLISHED_FULL_MODEL['params_m']} M params, {PUBLISHED_FULL_MODEL['macs_g']} G MACs) "
                     "also include both backbones and the encoder/decoder, so they are not comparable"),
        }


def report_fusion_config(cfg: FusionConfig) -> CostReport:
    layers = []
    for lc in cfg.levels:
        side = cfg.spatial(lc)
        for name, spec in level_conv_specs(lc).items():
            layers.append(LayerCost(f"level{lc.level}.{name}", count_params(spec),
                                    count_macs(spec, side, side), side, side))
    return CostReport(layers, dump_config(cfg))
