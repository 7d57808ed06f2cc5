import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from icfusion import nn
from icfusion.blocks import level_conv_specs
from icfusion.complexity import count_macs, count_params, report_fusion_config
from icfusion.config import FusionConfig, build_config, default_config
from icfusion.nn import ConvSpec
from icfusion.tensor import seeded_uniform


def spreadsheet(c_rgb, c_ir, side):
    """Per-level totals written out by hand from the layer list."""
    r, i, hw = c_rgb, c_ir, side * side
    params = (9 * r + r) + (25 * r + r) + (25 * r + r) \
        + (4 * r * r + 4 * r) + (i * r + i) \
        + (2 * i * i + 2 * i) + 2 * (50 * i + 2 * i) + 2 * (2 * i * i + 2 * i)
    macs = (9 * r + 25 * r + 25 * r + 4 * r * r + i * r + 2 * i * i + 100 * i + 4 * i * i) * hw
    return params, macs


def test_formulas():
    assert count_params(nn.depthwise(16, 5)) == 416
    assert count_params(nn.pointwise(8, 8, 2)) == 40
    assert count_params(ConvSpec(4, 8, 3, has_bias=False)) == 288
    assert count_macs(ConvSpec(4, 8, 3), 10, 10) == 28_800
    assert count_macs(nn.depthwise(16, 5), 20, 20) == 160_000


specs = st.builds(
    lambda g, ci, co, k, d, pad, bias: ConvSpec(g * ci, g * co, k, groups=g, dilation=d,
                                                padding=pad, has_bias=bias),
    st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.sampled_from([1, 3, 5]),
    st.integers(1, 3), st.none() | st.integers(0, 3), st.booleans(),
)


@given(specs, st.integers(3, 8), st.integers(3, 8))
def test_macs_match_instrumented_loop(spec, h, w):
    if min(spec.out_size(h, w)) < 1:
        return
    counter = [0]
    nn.conv2d_reference(seeded_uniform((1, spec.c_in, h, w), -1, 1, 0), spec, nn.init_conv(spec, 1), counter)
    assert counter[0] == count_macs(spec, h, w)


@given(specs, st.integers(1, 50), st.integers(1, 50))
def test_macs_params_identity(spec, h, w):
    spec = ConvSpec(spec.c_in, spec.c_out, spec.k, spec.groups, spec.dilation, None, spec.has_bias)
    assert count_macs(spec, h, w) == count_params(spec.without_bias()) * h * w


def test_default_config_matches_spreadsheet():
    rep = report_fusion_config(default_config())
    expected_p, expected_m = 0, 0
    for c_rgb, c_ir, side in ((128, 512, 80), (256, 1024, 40), (512, 2048, 20)):
        p, m = spreadsheet(c_rgb, c_ir, side)
        expected_p += p
        expected_m += m
    assert (rep.total_params, rep.total_macs) == (expected_p, expected_m)
    assert (rep.total_params, rep.total_macs) == (36_239_616, 33_373_593_600)
    assert len(rep.layers) == 30


def test_empty_config():
    rep = report_fusion_config(FusionConfig((), 640))
    assert rep.total_params == 0 and rep.total_macs == 0


def test_doubling_widths():
    cfg = default_config()
    base = {l.name: l for l in report_fusion_config(cfg).layers}
    double = {l.name: l for l in report_fusion_config(cfg.scaled(2)).layers}
    predicted = 0
    for name, layer in base.items():
        ratio = 2 if ".dw" in name else 4  # depthwise groups track width; 1x1 groups stay fixed
        assert double[name].macs == ratio * layer.macs
        predicted += ratio * layer.macs
    assert sum(l.macs for l in double.values()) == predicted


def test_totals_permutation_invariant():
    rep = report_fusion_config(default_config())
    rng = np.random.default_rng(0)
    shuffled = [rep.layers[i] for i in rng.permutation(len(rep.layers))]
    assert sum(l.macs for l in shuffled) == rep.total_macs
    assert sum(l.params for l in shuffled) == rep.total_params


def test_report_dict_and_spatial_sizes():
    cfg = build_config({"input_size": 320})
    d = report_fusion_config(cfg).as_dict()
    sides = {l["name"].split(".")[0]: l["h"] for l in d["layers"]}
    assert sides == {"level3": 40, "level4": 20, "level5": 10}
    assert "56.04" in d["note"]
    assert d["total_macs"] == sum(l["macs"] for l in d["layers"])


def test_layer_list_matches_level_specs():
    cfg = default_config()
    rep = report_fusion_config(cfg)
    names = [l.name for l in rep.layers]
    assert names[:10] == [f"level3.{n}" for n in level_conv_specs(cfg.levels[0])]
