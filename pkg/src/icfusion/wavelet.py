"""Orthonormal 2-D Haar decomposition and sub-band energy statistics.

For each 2x2 block [[a, b], [c, d]]:

    LL = (a + b + c + d) / 2      LH = ((a + b) - (c + d)) / 2
    HL = ((a + c) - (b + d)) / 2  HH = (a - b - c + d) / 2

LH responds to variation down the rows (horizontal edges), HL to variation
across columns (vertical edges).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SubbandSet:
    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray


@dataclass(frozen=True)
class EnergyReport:
    e_ll: float
    e_lh: float
    e_hl: float
    e_hh: float

    @property
    def total(self) -> float:
        return self.e_ll + self.e_lh + self.e_hl + self.e_hh

    @property
    def hf_ratio(self) -> float:
        total = self.total
        return 0.0 if total == 0.0 else (self.e_lh + self.e_hl + self.e_hh) / total

    @property
    def edge_ratio(self) -> float:
        """Share of energy in LH + HL."""
        total = self.total
        return 0.0 if total == 0.0 else (self.e_lh + self.e_hl) / total

    def as_dict(self) -> dict:
        return {"e_ll": self.e_ll, "e_lh": self.e_lh, "e_hl": self.e_hl, "e_hh": self.e_hh,
                "hf_ratio": self.hf_ratio, "lh_hl_ratio": self.edge_ratio}


def _check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or min(img.shape) < 1:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return img


def pad_to_even(img: np.ndarray) -> np.ndarray:
    """Append one reflected row/column to odd dimensions."""
    img = _check_image(img)
    pads = [(0, s % 2) for s in img.shape]
    if not any(p for _, p in pads):
        return img
    mode = "reflect" if min(img.shape) > 1 else "edge"
    return np.pad(img, pads, mode=mode)


def haar_dwt2(img: np.ndarray) -> SubbandSet:
    img = _check_image(img)
    h, w = img.shape
    if h % 2 or w % 2:
        raise ValueError(f"image dims must be even, got {h}x{w}")
    a = img[0::2, 0::2]
    b = img[0::2, 1::2]
    c = img[1::2, 0::2]
    d = img[1::2, 1::2]
    return SubbandSet(
        ll=(a + b + c + d) / 2,
        lh=((a + b) - (c + d)) / 2,
        hl=((a + c) - (b + d)) / 2,
        hh=(a - b - c + d) / 2,
    )


def haar_idwt2(s: SubbandSet) -> np.ndarray:
    shape = s.ll.shape
    if any(np.shape(band) != shape for band in (s.lh, s.hl, s.hh)) or len(shape) != 2:
        raise ValueError("sub-bands must share one 2-D shape")
    out = np.empty((2 * shape[0], 2 * shape[1]), dtype=np.float64)
    out[0::2, 0::2] = (s.ll + s.lh + s.hl + s.hh) / 2
    out[0::2, 1::2] = (s.ll + s.lh - s.hl - s.hh) / 2
    out[1::2, 0::2] = (s.ll - s.lh + s.hl - s.hh) / 2
    out[1::2, 1::2] = (s.ll - s.lh - s.hl + s.hh) / 2
    return out


def subband_energy(s: SubbandSet) -> EnergyReport:
    return EnergyReport(*(float(np.sum(np.square(b))) for b in (s.ll, s.lh, s.hl, s.hh)))


def decompose(img: np.ndarray, levels: int = 1) -> list[SubbandSet]:
    """Multi-level decomposition recursing on LL (odd LL dims are padded first)."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    out = []
    current = pad_to_even(img)
    for _ in range(levels):
        s = haar_dwt2(current)
        out.append(s)
        current = pad_to_even(s.ll)
    return out


def analyze_pair(rgb: np.ndarray, ir: np.ndarray, levels: int = 1) -> dict:
    """Per-modality, per-level energy reports plus the LH+HL comparison."""
    rgb, ir = _check_image(rgb), _check_image(ir)
    if rgb.shape != ir.shape:
        raise ValueError(f"image dims differ: rgb {rgb.shape} vs ir {ir.shape}")
    result = {"levels": levels, "shape": list(rgb.shape), "per_level": []}
    for lvl, (s_rgb, s_ir) in enumerate(zip(decompose(rgb, levels), decompose(ir, levels)), 1):
        e_rgb, e_ir = subband_energy(s_rgb), subband_energy(s_ir)
        result["per_level"].append({
            "level": lvl,
            "rgb": e_rgb.as_dict(),
            "ir": e_ir.as_dict(),
            "lh_hl_ratio_ir_minus_rgb": e_ir.edge_ratio - e_rgb.edge_ratio,
        })
    return result
