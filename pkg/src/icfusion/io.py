"""Binary tensor files, PGM/PPM ingestion, parameter directories and reports.

Tensor file layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"ICFT"
    4       4     u32 version = 1
    8       4     u32 ndim = 4
    12      32    u64 dims[4]  (n, c, h, w)
    44      1     u8 dtype = 1 (float32)
    45      ...   float32 payload, row-major NCHW, 4 * n*c*h*w bytes
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from icfusion.blocks import FusionLevelParams, build_level_params, level_conv_specs
from icfusion.config import FusionConfig
from icfusion.nn import ConvWeights
from icfusion.tensor import check_tensor
from icfusion.wavelet import pad_to_even

MAGIC = b"ICFT"
VERSION = 1
DTYPE_F32 = 1
_HEADER = struct.Struct("<4sII4QB")
HEADER_SIZE = _HEADER.size

LUMA = (0.299, 0.587, 0.114)
REPORT_SCHEMA = "ic-fusion/report/v1"


class FormatError(ValueError):
    pass


def encode_tensor(t: np.ndarray) -> bytes:
    check_tensor(t)
    data = np.ascontiguousarray(t, dtype="<f4")
    return _HEADER.pack(MAGIC, VERSION, 4, *t.shape, DTYPE_F32) + data.tobytes()


def decode_tensor(buf: bytes) -> np.ndarray:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise FormatError("bad magic: not an ICFT tensor file")
    if len(buf) < HEADER_SIZE:
        raise FormatError(f"truncated header: {len(buf)} of {HEADER_SIZE} bytes")
    _, version, ndim, n, c, h, w, dtype = _HEADER.unpack_from(buf)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if ndim != 4:
        raise FormatError(f"unsupported ndim {ndim}")
    if dtype != DTYPE_F32:
        raise FormatError(f"unsupported dtype code {dtype}")
    if min(n, c, h, w) < 1:
        raise FormatError(f"zero dimension in header: {(n, c, h, w)}")
    expected = 4 * n * c * h * w
    payload = len(buf) - HEADER_SIZE
    if payload != expected:
        raise FormatError(f"payload length mismatch: expected {expected} bytes, found {payload}")
    arr = np.frombuffer(buf, dtype="<f4", offset=HEADER_SIZE).reshape(n, c, h, w)
    return arr.astype(np.float32)


def write_tensor(path: str | Path, t: np.ndarray) -> None:
    Path(path).write_bytes(encode_tensor(t))


def read_tensor(path: str | Path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())


# --- images ------------------------------------------------------------------

def _parse_netpbm(buf: bytes) -> tuple[bytes, int, int, int, bytes]:
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated image header")
        fields.append(buf[start:pos])
        if len(fields) == 1 and fields[0] not in (b"P5", b"P6"):
            raise FormatError(f"unsupported format {fields[0][:2].decode(errors='replace')!r}: "
                              "only binary PGM (P5) and PPM (P6)")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise FormatError("malformed image header") from None
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}: only 255")
    return fields[0], width, height, maxval, buf[pos + 1:]


def read_netpbm(path: str | Path) -> np.ndarray:
    """Raw pixels scaled to [0, 1]: (h, w) for P5, (h, w, 3) for P6."""
    magic, width, height, _, raster = _parse_netpbm(Path(path).read_bytes())
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    if len(raster) < need:
        raise FormatError(f"truncated raster: expected {need} bytes, found {len(raster)}")
    pixels = np.frombuffer(raster[:need], dtype=np.uint8).astype(np.float64) / 255.0
    return pixels.reshape((height, width) if channels == 1 else (height, width, 3))


def to_gray(rgb: np.ndarray) -> np.ndarray:
    return rgb[..., 0] * LUMA[0] + rgb[..., 1] * LUMA[1] + rgb[..., 2] * LUMA[2]


def read_image(path: str | Path, pad: bool = True) -> np.ndarray:
    """Grayscale image in [0, 1]; colour input goes through the luminance weights."""
    pixels = read_netpbm(path)
    gray = pixels if pixels.ndim == 2 else to_gray(pixels)
    return pad_to_even(gray) if pad else gray


def write_pgm(path: str | Path, img: np.ndarray) -> None:
    data = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    h, w = data.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + data.tobytes())


def write_ppm(path: str | Path, img: np.ndarray) -> None:
    data = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    h, w, _ = data.shape
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + data.tobytes())


# --- parameters and pyramids -------------------------------------------------

def write_params(directory: str | Path, params: dict[int, FusionLevelParams]) -> list[Path]:
    """One tensor file per weight and bias; biases are stored as (1, c, 1, 1)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for level in sorted(params):
        for name, w in params[level].named_weights().items():
            stem = directory / f"level{level}.{name}"
            path = stem.with_name(stem.name + ".weight.icft")
            write_tensor(path, w.weight.astype(np.float32))
            written.append(path)
            if w.bias is not None:
                path = stem.with_name(stem.name + ".bias.icft")
                write_tensor(path, w.bias.astype(np.float32).reshape(1, -1, 1, 1))
                written.append(path)
    return written


def read_params(directory: str | Path, cfg: FusionConfig) -> dict[int, FusionLevelParams]:
    directory = Path(directory)
    out = {}
    for lc in cfg.levels:
        weights = {}
        for name, spec in level_conv_specs(lc).items():
            weight = read_tensor(directory / f"level{lc.level}.{name}.weight.icft")
            bias = None
            if spec.has_bias:
                bias = read_tensor(directory / f"level{lc.level}.{name}.bias.icft").reshape(-1)
            weights[name] = ConvWeights(weight, bias)
        out[lc.level] = build_level_params(lc, weights)
    return out


def read_pyramid(directory: str | Path, levels) -> dict[int, np.ndarray]:
    directory = Path(directory)
    return {l: read_tensor(directory / f"level{l}.icft") for l in levels}


def write_pyramid(directory: str | Path, levels: dict[int, np.ndarray]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for l in sorted(levels):
        write_tensor(directory / f"level{l}.icft", levels[l])


# --- reports -----------------------------------------------------------------

def report_doc(tool: str, config: dict, results: dict) -> str:
    """Report document: JSON with sorted keys, two-space indent, trailing newline."""
    doc = {"schema": REPORT_SCHEMA, "tool": tool, "config": config, "results": results}
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
