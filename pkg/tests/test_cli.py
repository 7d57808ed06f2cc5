import json

import numpy as np
import pytest

from icfusion import blocks, io
from icfusion.cli import main
from icfusion.config import parse_config
from icfusion.tensor import seeded_uniform

SMALL = "levels = 3,4,5\nc_rgb = 4,4,8\nc_ir = 8,8,16\ninput_size = 64\n"


@pytest.fixture
def small_setup(tmp_path):
    cfg_path = tmp_path / "cfg.txt"
    cfg_path.write_text(SMALL)
    cfg = parse_config(SMALL)
    for modality, key in (("rgb", "c_rgb"), ("ir", "c_ir")):
        levels = {lc.level: seeded_uniform((1, getattr(lc, key), 64 // lc.stride, 64 // lc.stride),
                                           -1, 1, lc.level + (0 if modality == "rgb" else 10))
                  for lc in cfg.levels}
        io.write_pyramid(tmp_path / modality, levels)
    return tmp_path, cfg_path, cfg


def test_fuse(small_setup, capsys):
    tmp, cfg_path, cfg = small_setup
    rc = main(["fuse", str(tmp / "rgb"), str(tmp / "ir"), "--out", str(tmp / "out"),
               "--config", str(cfg_path), "--seed", "3"])
    assert rc == 0
    assert "level3.icft 1x8x8x8" in capsys.readouterr().out
    params = blocks.init_params(cfg, 3)
    rgb = io.read_pyramid(tmp / "rgb", (3, 4, 5))
    ir = io.read_pyramid(tmp / "ir", (3, 4, 5))
    for l in (3, 4, 5):
        expected = blocks.level_forward(rgb[l], ir[l], params[l])
        assert io.read_tensor(tmp / "out" / f"level{l}.icft").tobytes() == expected.tobytes()


def test_fuse_with_param_dir(small_setup):
    tmp, cfg_path, _ = small_setup
    assert main(["init-params", "--out", str(tmp / "params"), "--config", str(cfg_path), "--seed", "3"]) == 0
    assert main(["fuse", str(tmp / "rgb"), str(tmp / "ir"), "--out", str(tmp / "a"),
                 "--config", str(cfg_path), "--params", str(tmp / "params")]) == 0
    assert main(["fuse", str(tmp / "rgb"), str(tmp / "ir"), "--out", str(tmp / "b"),
                 "--config", str(cfg_path), "--seed", "3"]) == 0
    for l in (3, 4, 5):
        assert (tmp / "a" / f"level{l}.icft").read_bytes() == (tmp / "b" / f"level{l}.icft").read_bytes()


def test_fuse_mismatch_exits_1(small_setup, capsys):
    tmp, cfg_path, _ = small_setup
    io.write_tensor(tmp / "ir" / "level4.icft", seeded_uniform((1, 8, 5, 5), -1, 1, 0))
    rc = main(["fuse", str(tmp / "rgb"), str(tmp / "ir"), "--out", str(tmp / "out"),
               "--config", str(cfg_path)])
    captured = capsys.readouterr()
    assert rc == 1
    assert captured.out == ""
    assert "level 3 is 8x8, level 4 is 5x5" in captured.err


def test_fuse_spatial_mismatch_names_axis(small_setup, capsys):
    tmp, cfg_path, _ = small_setup
    for l, s in ((3, 16), (4, 8), (5, 4)):
        io.write_tensor(tmp / "ir" / f"level{l}.icft", seeded_uniform((1, 8 if l < 5 else 16, s, s), -1, 1, l))
    rc = main(["fuse", str(tmp / "rgb"), str(tmp / "ir"), "--out", str(tmp / "out"),
               "--config", str(cfg_path)])
    assert rc == 1
    assert "mismatch on h" in capsys.readouterr().err


def test_fuse_channel_mismatch(small_setup, capsys):
    tmp, cfg_path, _ = small_setup
    io.write_tensor(tmp / "rgb" / "level3.icft", seeded_uniform((1, 5, 8, 8), -1, 1, 0))
    assert main(["fuse", str(tmp / "rgb"), str(tmp / "ir"), "--out", str(tmp / "o"),
                 "--config", str(cfg_path)]) == 1
    assert "channel mismatch on c" in capsys.readouterr().err


def test_wavelet_command(tmp_path, capsys):
    rng = np.random.default_rng(0)
    io.write_pgm(tmp_path / "a.pgm", rng.random((16, 16)))
    io.write_ppm(tmp_path / "b.ppm", rng.random((16, 16, 3)))
    assert main(["wavelet", str(tmp_path / "a.pgm"), str(tmp_path / "b.ppm"), "--levels", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["schema"] == "ic-fusion/report/v1" and doc["tool"] == "wavelet"
    level = doc["results"]["per_level"][0]
    assert 0 <= level["rgb"]["hf_ratio"] <= 1 and 0 <= level["ir"]["hf_ratio"] <= 1
    assert len(doc["results"]["per_level"]) == 2


def test_wavelet_bad_image(tmp_path, capsys):
    (tmp_path / "a.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
    assert main(["wavelet", str(tmp_path / "a.pgm"), str(tmp_path / "a.pgm")]) == 1
    assert "unsupported format" in capsys.readouterr().err


def test_count_command(tmp_path):
    out = tmp_path / "r.json"
    assert main(["count", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["results"]["total_macs"] == 33_373_593_600
    assert main(["count", "--out", str(tmp_path / "r2.json")]) == 0
    assert out.read_bytes() == (tmp_path / "r2.json").read_bytes()


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--seed", "7"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 5 and all(l.startswith("PASS") for l in lines)


def test_selftest_command(capsys):
    assert main(["selftest"]) == 0
    assert "FAIL" not in capsys.readouterr().out


@pytest.mark.parametrize("argv", [["bogus"], ["count", "--nope"], [], ["selftest", "--threads", "0"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    captured = capsys.readouterr()
    assert captured.out == "" and captured.err


def test_missing_file(tmp_path, capsys):
    assert main(["count", "--config", str(tmp_path / "missing.txt")]) == 1
    assert capsys.readouterr().err


def test_internal_error_exit_2(monkeypatch, capsys):
    import icfusion.cli as cli

    def boom(seed, coords):
        raise RuntimeError("kaboom")

    monkeypatch.setattr(cli, "run_gradcheck", boom)
    assert main(["gradcheck"]) == 2
    assert "internal error" in capsys.readouterr().err
