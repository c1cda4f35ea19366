"""Color spaces, CIELAB binning, perceptual distance, and the code vocabulary.

All conversions run in float64.  sRGB follows IEC 61966-2-1 with the D65 /
2-degree white point; the perceptual metric is CIEDE2000 including the
rotation term.  Colors are discretized on a fixed CIELAB grid and named by
their bin indices as "li_ai_bi" strings, which is the token vocabulary the
rest of the package speaks.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RgbColor",
    "LabColor",
    "ColorCode",
    "VocabConfig",
    "Vocabulary",
    "PAD_TOKEN",
    "SEP_TOKEN",
    "MASK_TOKEN",
    "srgb_to_lab",
    "lab_to_srgb",
    "srgb_array_to_lab",
    "lab_array_to_srgb",
    "quantize_lab",
    "code_center",
    "display_rgb",
    "ciede2000",
    "ciede2000_many",
    "build_vocabulary",
]

# sRGB linear-light to XYZ (D65).  The inverse is computed from the forward
# matrix so round trips do not pick up the rounding error of the published
# 4-digit inverse, and the white point is the matrix row sums so that
# R=G=B lands on exactly neutral CIELAB (a*=b*=0).
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE = _RGB_TO_XYZ.sum(axis=1)

_DELTA = 6.0 / 29.0
_CODE_RE = re.compile(r"^(\d+)_(\d+)_(\d+)$")

PAD_TOKEN = "[PAD]"
SEP_TOKEN = "[SEP]"
MASK_TOKEN = "[MASK]"


@dataclass(frozen=True)
class RgbColor:
    """8-bit sRGB triple."""

    r: int
    g: int
    b: int

    def __post_init__(self):
        for name in ("r", "g", "b"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= v <= 255:
                raise ValueError(f"channel {name}={v!r} outside 0..255")

    @classmethod
    def from_hex(cls, text: str) -> "RgbColor":
        t = text.strip()
        if t.startswith("#"):
            t = t[1:]
        if len(t) != 6:
            raise ValueError(f"expected #RRGGBB, got {text!r}")
        return cls(int(t[0:2], 16), int(t[2:4], 16), int(t[4:6], 16))

    def to_hex(self) -> str:
        return f"#{self.r:02x}{self.g:02x}{self.b:02x}"


@dataclass(frozen=True)
class LabColor:
    """CIELAB coordinates (D65/2deg reference white)."""

    l: float
    a: float
    b: float

    def as_array(self) -> np.ndarray:
        return np.array([self.l, self.a, self.b], dtype=np.float64)


@dataclass(frozen=True, order=True)
class ColorCode:
    """Index triple on the quantized CIELAB grid."""

    li: int
    ai: int
    bi: int

    def text(self) -> str:
        return f"{self.li}_{self.ai}_{self.bi}"

    @classmethod
    def parse(cls, text: str, bins: int = 16) -> "ColorCode":
        m = _CODE_RE.match(text.strip())
        if not m:
            raise ValueError(f"not a color code: {text!r}")
        li, ai, bi = (int(g) for g in m.groups())
        if not (0 <= li < bins and 0 <= ai < bins and 0 <= bi < bins):
            raise ValueError(f"code {text!r} outside {bins}^3 grid")
        return cls(li, ai, bi)


@dataclass(frozen=True)
class VocabConfig:
    """Grid resolution plus the reserved special-token ids."""

    bins_per_axis: int = 16
    pad_id: int = 0
    sep_id: int = 1
    mask_id: int = 2

    @property
    def num_special(self) -> int:
        return 3


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------

def srgb_array_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert an (..., 3) array of 8-bit sRGB values to CIELAB float64."""
    u = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(u <= 0.04045, u / 12.92, ((u + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB_TO_XYZ.T
    t = xyz / _WHITE
    f = np.where(t > _DELTA ** 3, np.cbrt(t), t / (3.0 * _DELTA ** 2) + 4.0 / 29.0)
    out = np.empty_like(f)
    out[..., 0] = 116.0 * f[..., 1] - 16.0
    out[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    out[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return out


def lab_array_to_srgb(lab: np.ndarray) -> np.ndarray:
    """Convert (..., 3) CIELAB to 8-bit sRGB, clamping out-of-gamut values."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    t = np.where(f > _DELTA, f ** 3, 3.0 * _DELTA ** 2 * (f - 4.0 / 29.0))
    xyz = t * _WHITE
    lin = xyz @ _XYZ_TO_RGB.T
    lin = np.clip(lin, 0.0, 1.0)
    u = np.where(lin <= 0.0031308, lin * 12.92, 1.055 * lin ** (1.0 / 2.4) - 0.055)
    return np.clip(np.round(u * 255.0), 0, 255).astype(np.uint8)


def srgb_to_lab(color: RgbColor) -> LabColor:
    l, a, b = srgb_array_to_lab(np.array([color.r, color.g, color.b]))
    return LabColor(float(l), float(a), float(b))


def lab_to_srgb(color: LabColor) -> RgbColor:
    r, g, b = lab_array_to_srgb(color.as_array())
    return RgbColor(int(r), int(g), int(b))


# ---------------------------------------------------------------------------
# Quantization
# ---------------------------------------------------------------------------

def _scale_lab(lab: np.ndarray) -> np.ndarray:
    """Map CIELAB axes onto the shared 0..255 range used by the grid."""
    scaled = np.empty_like(lab)
    scaled[..., 0] = lab[..., 0] * (255.0 / 100.0)
    scaled[..., 1] = lab[..., 1] + 128.0
    scaled[..., 2] = lab[..., 2] + 128.0
    return np.clip(scaled, 0.0, 255.0)


def quantize_lab(color: LabColor, config: VocabConfig = VocabConfig()) -> ColorCode:
    """Snap a CIELAB color to its grid cell."""
    bins = config.bins_per_axis
    width = 256.0 / bins
    idx = np.floor(_scale_lab(color.as_array()) / width).astype(int)
    idx = np.minimum(idx, bins - 1)
    return ColorCode(int(idx[0]), int(idx[1]), int(idx[2]))


def quantize_lab_array(lab: np.ndarray, config: VocabConfig = VocabConfig()) -> np.ndarray:
    bins = config.bins_per_axis
    width = 256.0 / bins
    idx = np.floor(_scale_lab(np.asarray(lab, dtype=np.float64)) / width).astype(int)
    return np.minimum(idx, bins - 1)


def code_center(code: ColorCode, config: VocabConfig = VocabConfig()) -> LabColor:
    """CIELAB coordinates of the center of a grid cell."""
    width = 256.0 / config.bins_per_axis
    sl = (code.li + 0.5) * width
    sa = (code.ai + 0.5) * width
    sb = (code.bi + 0.5) * width
    return LabColor(sl * (100.0 / 255.0), sa - 128.0, sb - 128.0)


def display_rgb(code: ColorCode, config: VocabConfig = VocabConfig()) -> RgbColor:
    """An sRGB representative of the cell that quantizes back to the code.

    The cell center is used when it survives the RGB round trip.  Cells that
    only clip the gamut at a corner fall back to interior scans; the first
    surviving sample in scan order keeps the choice deterministic.  Cells
    with no displayable point at all (codes never produced by quantizing a
    real color) raise ValueError.
    """
    center = code_center(code, config)
    rgb = lab_to_srgb(center)
    if quantize_lab(srgb_to_lab(rgb), config) == code:
        return rgb
    width = 256.0 / config.bins_per_axis
    base = np.array([code.li, code.ai, code.bi], dtype=np.float64) * width
    for n_steps in (5, 11):
        steps = np.linspace(0.05, 0.95, n_steps)
        for fl in steps:
            for fa in steps:
                for fb in steps:
                    s = base + np.array([fl, fa, fb]) * width
                    lab = LabColor(s[0] * (100.0 / 255.0), s[1] - 128.0, s[2] - 128.0)
                    cand = lab_to_srgb(lab)
                    if quantize_lab(srgb_to_lab(cand), config) == code:
                        return cand
    raise ValueError(f"code {code.text()} has no displayable color")


# ---------------------------------------------------------------------------
# CIEDE2000
# ---------------------------------------------------------------------------

def ciede2000_many(ref: np.ndarray, others: np.ndarray) -> np.ndarray:
    """CIEDE2000 between one CIELAB color and a batch of them.

    Vectorized in radians; `ref` is shape (3,), `others` is (n, 3).
    """
    lab1 = np.asarray(ref, dtype=np.float64)
    lab2 = np.atleast_2d(np.asarray(others, dtype=np.float64))

    l1, a1, b1 = lab1
    l2, a2, b2 = lab2[:, 0], lab2[:, 1], lab2[:, 2]

    c1 = np.hypot(a1, b1)
    c2 = np.hypot(a2, b2)
    c_bar = 0.5 * (c1 + c2)
    c_bar7 = c_bar ** 7
    g = 0.5 * (1.0 - np.sqrt(c_bar7 / (c_bar7 + 25.0 ** 7)))
    a1p = (1.0 + g) * a1
    a2p = (1.0 + g) * a2
    c1p = np.hypot(a1p, b1)
    c2p = np.hypot(a2p, b2)

    h1p = np.arctan2(b1, a1p)
    h1p = np.where((a1p == 0.0) & (b1 == 0.0), 0.0, np.where(h1p < 0, h1p + 2 * np.pi, h1p))
    h2p = np.arctan2(b2, a2p)
    h2p = np.where((a2p == 0.0) & (b2 == 0.0), 0.0, np.where(h2p < 0, h2p + 2 * np.pi, h2p))

    dl = l2 - l1
    dc = c2p - c1p
    zero = c1p * c2p == 0.0
    dh_raw = h2p - h1p
    dh_ang = np.where(
        np.abs(dh_raw) <= np.pi,
        dh_raw,
        np.where(dh_raw > np.pi, dh_raw - 2 * np.pi, dh_raw + 2 * np.pi),
    )
    dh_ang = np.where(zero, 0.0, dh_ang)
    dh = 2.0 * np.sqrt(c1p * c2p) * np.sin(dh_ang / 2.0)

    l_bar = 0.5 * (l1 + l2)
    cp_bar = 0.5 * (c1p + c2p)
    h_sum = h1p + h2p
    h_bar = np.where(
        np.abs(h1p - h2p) <= np.pi,
        0.5 * h_sum,
        np.where(h_sum < 2 * np.pi, 0.5 * (h_sum + 2 * np.pi), 0.5 * (h_sum - 2 * np.pi)),
    )
    h_bar = np.where(zero, h_sum, h_bar)

    t = (1.0
         - 0.17 * np.cos(h_bar - np.pi / 6.0)
         + 0.24 * np.cos(2.0 * h_bar)
         + 0.32 * np.cos(3.0 * h_bar + np.pi / 30.0)
         - 0.20 * np.cos(4.0 * h_bar - 63.0 * np.pi / 180.0))
    h_bar_deg = np.degrees(h_bar)
    d_theta = 30.0 * np.exp(-(((h_bar_deg - 275.0) / 25.0) ** 2))
    cp_bar7 = cp_bar ** 7
    r_c = 2.0 * np.sqrt(cp_bar7 / (cp_bar7 + 25.0 ** 7))
    s_l = 1.0 + 0.015 * (l_bar - 50.0) ** 2 / np.sqrt(20.0 + (l_bar - 50.0) ** 2)
    s_c = 1.0 + 0.045 * cp_bar
    s_h = 1.0 + 0.015 * cp_bar * t
    r_t = -np.sin(2.0 * np.radians(d_theta)) * r_c

    return np.sqrt(
        (dl / s_l) ** 2
        + (dc / s_c) ** 2
        + (dh / s_h) ** 2
        + r_t * (dc / s_c) * (dh / s_h)
    )


def ciede2000(first: LabColor, second: LabColor) -> float:
    """Perceptual distance between two CIELAB colors."""
    return float(ciede2000_many(first.as_array(), second.as_array()[None, :])[0])


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------

@dataclass
class Vocabulary:
    """Observed color codes with stable integer ids.

    Ids 0..2 are PAD/SEP/MASK; codes occupy 3.. in ascending (li, ai, bi)
    order so rebuilding from the same corpus reproduces the same table.
    Codes never seen in training are resolved to the perceptually nearest
    known code (CIEDE2000 between cell centers).
    """

    config: VocabConfig
    codes: tuple[ColorCode, ...]
    counts: tuple[int, ...] = ()
    _id_of: dict = field(default_factory=dict, repr=False)
    _centers: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if list(self.codes) != sorted(set(self.codes)):
            raise ValueError("vocabulary codes must be sorted and unique")
        if self.counts and len(self.counts) != len(self.codes):
            raise ValueError("counts length must match codes")
        self._id_of = {c: self.config.num_special + i for i, c in enumerate(self.codes)}
        self._centers = np.array(
            [code_center(c, self.config).as_array() for c in self.codes]
        ) if self.codes else np.zeros((0, 3))

    @property
    def size(self) -> int:
        """Total table size including specials."""
        return self.config.num_special + len(self.codes)

    @property
    def code_ids(self) -> np.ndarray:
        return np.arange(self.config.num_special, self.size)

    def id_of(self, code: ColorCode) -> int | None:
        return self._id_of.get(code)

    def id_of_nearest(self, code: ColorCode) -> int:
        """Id of the code, or of its nearest known neighbor when unseen."""
        known = self._id_of.get(code)
        if known is not None:
            return known
        if not self.codes:
            raise ValueError("empty vocabulary")
        d = ciede2000_many(code_center(code, self.config).as_array(), self._centers)
        return self.config.num_special + int(np.argmin(d))

    def code_of(self, token_id: int) -> ColorCode:
        idx = token_id - self.config.num_special
        if not 0 <= idx < len(self.codes):
            raise KeyError(f"id {token_id} is not a color code id")
        return self.codes[idx]

    def to_json(self) -> str:
        return json.dumps(
            {
                "bins_per_axis": self.config.bins_per_axis,
                "codes": [c.text() for c in self.codes],
                "counts": list(self.counts),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        data = json.loads(text)
        cfg = VocabConfig(bins_per_axis=data["bins_per_axis"])
        codes = tuple(ColorCode.parse(c, cfg.bins_per_axis) for c in data["codes"])
        return cls(cfg, codes, tuple(data.get("counts", ())))


def build_vocabulary(corpus, config: VocabConfig = VocabConfig()) -> Vocabulary:
    """Collect the distinct color codes of a corpus into a Vocabulary.

    `corpus` is any iterable whose items expose `color_codes()` (sequences do).
    """
    tally: dict[ColorCode, int] = {}
    for item in corpus:
        for code in item.color_codes():
            tally[code] = tally.get(code, 0) + 1
    ordered = sorted(tally)
    return Vocabulary(config, tuple(ordered), tuple(tally[c] for c in ordered))
