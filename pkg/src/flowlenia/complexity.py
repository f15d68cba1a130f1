"""Multi-scale compressibility measure and the complexity-target fitness.

Pipeline: quantize the state to an 8-bit RGB image, re-rasterize it in polar
coordinates about the (toroidal) center of mass, box-downsample it per dyadic
scale, and take the PNG-compressed byte length over the raw byte length as
the per-scale complexity. Fitness is the mean absolute deviation of the
profile from the target T.

The PNG encoder is pinned here (truecolor 8-bit, zlib level 9, adaptive
per-row filter selection by minimum absolute sum) so that compressed byte
counts are reproducible; its identity is recorded in run manifests.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np


class ChannelMismatch(ValueError):
    """State does not have exactly 3 channels."""


class CenterOutOfBounds(ValueError):
    """Polar origin lies outside the image."""


class IndivisibleScale(ValueError):
    """2^s does not divide the image dimensions."""


class EncodeFailure(RuntimeError):
    """The PNG codec failed."""


class EmptyProfile(ValueError):
    """Fitness of a zero-length profile is undefined."""


ENCODER_INFO = {
    "name": "flowlenia-png",
    "version": 1,
    "color_type": 2,
    "bit_depth": 8,
    "interlace": 0,
    "zlib_level": 9,
    "filtering": "adaptive per-row, minimum absolute sum, ties to lowest id",
    "zlib_runtime": zlib.ZLIB_RUNTIME_VERSION,
}

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def _filter_scanlines(pixels: np.ndarray) -> bytes:
    """Per-row adaptive PNG filtering (types 0-4) of (H, W, 3) uint8 pixels."""
    H, W, _ = pixels.shape
    bpp = 3
    cur = pixels.reshape(H, W * bpp).astype(np.int32)
    left = np.zeros_like(cur)
    left[:, bpp:] = cur[:, :-bpp]
    up = np.zeros_like(cur)
    up[1:] = cur[:-1]
    upleft = np.zeros_like(cur)
    upleft[1:, bpp:] = cur[:-1, :-bpp]

    # Paeth predictor
    p = left + up - upleft
    pa = np.abs(p - left)
    pb = np.abs(p - up)
    pc = np.abs(p - upleft)
    paeth = np.where((pa <= pb) & (pa <= pc), left, np.where(pb <= pc, up, upleft))

    candidates = np.stack(
        [
            cur,
            (cur - left) & 0xFF,
            (cur - up) & 0xFF,
            (cur - (left + up) // 2) & 0xFF,
            (cur - paeth) & 0xFF,
        ]
    ).astype(np.uint8)

    # minimum-sum-of-absolute-differences heuristic, bytes as signed
    signed = np.where(candidates < 128, candidates.astype(np.int32), 256 - candidates.astype(np.int32))
    scores = signed.sum(axis=2)  # (5, H)
    choice = scores.argmin(axis=0)  # first minimum wins ties

    scan = np.empty((H, 1 + W * bpp), dtype=np.uint8)
    scan[:, 0] = choice
    scan[:, 1:] = np.take_along_axis(candidates, choice[None, :, None], axis=0)[0]
    return scan.tobytes()


def encode_png(pixels: np.ndarray) -> bytes:
    """Encode (H, W, 3) uint8 pixels with the pinned PNG settings."""
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ChannelMismatch(f"expected (H, W, 3) pixels, got {pixels.shape}")
    if pixels.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {pixels.dtype}")
    H, W, _ = pixels.shape
    if H == 0 or W == 0:
        raise ValueError("image dimensions must be positive")
    ihdr = struct.pack(">IIBBBBB", W, H, 8, 2, 0, 0, 0)
    try:
        idat = zlib.compress(_filter_scanlines(pixels), ENCODER_INFO["zlib_level"])
    except zlib.error as exc:  # pragma: no cover - zlib does not fail on valid input
        raise EncodeFailure(str(exc)) from exc
    return b"".join(
        [_PNG_SIG, _chunk(b"IHDR", ihdr), _chunk(b"IDAT", idat), _chunk(b"IEND", b"")]
    )


def write_png(path, pixels: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_png(pixels))


def compression_complexity(img: np.ndarray) -> float:
    """PNG-compressed byte length over raw byte length (H * W * 3).

    Values land in (0, 1] for ordinary images; fixed file overhead can push
    tiny images above 1.
    """
    H, W, _ = img.shape
    return len(encode_png(img)) / float(H * W * 3)


def _quantize_u8(values: np.ndarray) -> np.ndarray:
    """Round half away from zero (values are non-negative here)."""
    return np.floor(values + 0.5).astype(np.uint8)


def state_to_image(state: np.ndarray) -> np.ndarray:
    """Map mass densities to 8-bit RGB: clamp to [0, 1], scale, round."""
    if state.ndim != 3 or state.shape[2] != 3:
        raise ChannelMismatch(f"expected (H, W, 3) state, got {state.shape}")
    return _quantize_u8(np.clip(state, 0.0, 1.0) * 255.0)


def mass_center(state: np.ndarray) -> tuple[float, float]:
    """Toroidal center of mass (y, x) of the summed channels.

    Uses the circular mean per axis so patterns straddling the wrap get a
    sensible center; falls back to the geometric center when the state is
    (numerically) empty.
    """
    w = state.sum(axis=2) if state.ndim == 3 else state
    H, W = w.shape
    total = float(w.sum())
    if total < 1e-9:
        return (H / 2.0, W / 2.0)

    def circular(weights: np.ndarray, n: int) -> float:
        ang = 2.0 * np.pi * np.arange(n) / n
        s = float(np.sum(weights * np.sin(ang)))
        c = float(np.sum(weights * np.cos(ang)))
        mean = np.arctan2(s, c)
        return (mean / (2.0 * np.pi) * n) % n

    return (circular(w.sum(axis=1), H), circular(w.sum(axis=0), W))


def _bilinear(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear sample of (H, W, 3) float pixels; outside reads 0."""
    H, W = img.shape[:2]
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    fy = ys - y0
    fx = xs - x0
    y0 = y0.astype(np.int64)
    x0 = x0.astype(np.int64)
    out = np.zeros(ys.shape + (3,))
    for dy, dx, wgt in (
        (0, 0, (1 - fy) * (1 - fx)),
        (0, 1, (1 - fy) * fx),
        (1, 0, fy * (1 - fx)),
        (1, 1, fy * fx),
    ):
        yi = y0 + dy
        xi = x0 + dx
        valid = (yi >= 0) & (yi < H) & (xi >= 0) & (xi < W)
        yc = np.clip(yi, 0, H - 1)
        xc = np.clip(xi, 0, W - 1)
        out += (wgt * valid)[..., None] * img[yc, xc, :]
    return out


def polar_resample(img: np.ndarray, center: tuple[float, float]) -> np.ndarray:
    """Re-rasterize an (H, W, 3) uint8 image onto (angle, radius) axes.

    Output keeps the input's H x W: row j is angle 2*pi*j/H, column i is
    radius i * R_max / (W - 1) with R_max the half-diagonal, sampled
    bilinearly about `center` = (y, x); samples outside the frame read 0.
    """
    H, W = img.shape[:2]
    cy, cx = center
    if not (0.0 <= cy < H and 0.0 <= cx < W):
        raise CenterOutOfBounds(f"center {center} outside {H}x{W} image")
    if W < 2:
        raise ValueError("image must be at least 2 pixels wide")
    theta = 2.0 * np.pi * np.arange(H) / H
    r_max = 0.5 * np.hypot(H, W)
    rho = np.arange(W) * (r_max / (W - 1))
    ys = cy + rho[None, :] * np.sin(theta)[:, None]
    xs = cx + rho[None, :] * np.cos(theta)[:, None]
    return _quantize_u8(_bilinear(img.astype(np.float64), ys, xs))


def downsample(img: np.ndarray, s: int) -> np.ndarray:
    """Box-average an (H, W, 3) uint8 image down by 2^s per axis."""
    if s < 0:
        raise ValueError(f"scale must be >= 0, got {s}")
    if s == 0:
        return img.copy()
    f = 1 << s
    H, W = img.shape[:2]
    if H % f or W % f:
        raise IndivisibleScale(f"2^{s} does not divide {H}x{W}")
    blocks = img.reshape(H // f, f, W // f, f, 3).astype(np.float64)
    return _quantize_u8(blocks.mean(axis=(1, 3)))


def complexity_profile(state: np.ndarray, scales: int, polar: bool = True) -> np.ndarray:
    """Per-scale inverse compression ratios [C_0 .. C_scales] of a state."""
    img = state_to_image(state)
    if polar:
        img = polar_resample(img, mass_center(state))
    return np.array([compression_complexity(downsample(img, s)) for s in range(scales + 1)])


def image_profile(img: np.ndarray, scales: int, polar: bool = True) -> np.ndarray:
    """Like complexity_profile but starting from (H, W, 3) uint8 pixels."""
    if polar:
        img = polar_resample(img, mass_center(img.astype(np.float64) / 255.0))
    return np.array([compression_complexity(downsample(img, s)) for s in range(scales + 1)])


def fitness(profile, target: float) -> float:
    """Mean absolute deviation of the profile from the target (minimized)."""
    p = np.asarray(profile, dtype=np.float64)
    if p.size == 0:
        raise EmptyProfile("profile has no entries")
    return float(np.mean(np.abs(p - target)))


def write_profile_csv(path, profile) -> None:
    with open(path, "w") as fh:
        fh.write("scale,ratio\n")
        for s, v in enumerate(profile):
            fh.write(f"{s},{float(v)!r}\n")
