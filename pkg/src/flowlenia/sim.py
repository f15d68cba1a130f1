"""Mass-conserving Flow Lenia dynamics on a toroidal grid.

A world state is an (H, W, C) float64 array of non-negative mass densities.
Each update convolves the channels with ring-shaped kernels, maps the
activations through a bell growth function into per-channel affinity fields,
and transports mass along a blend of the affinity gradient and an
anti-crowding gradient using reintegration tracking, so the total mass per
channel is conserved to float round-off.

Displacement fields carry (dx, dy) in their last axis: component 0 moves
mass along x (columns), component 1 along y (rows).

The three per-step hot kernels (growth accumulation, flow blend, advection)
live in a compiled extension with a pure-numpy fallback selected at import;
set FLF_NO_EXT=1 to force the fallback.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as fft

from . import _kernels_py

try:
    from . import _kernels as _kernels_ext
except ImportError:
    _kernels_ext = None

if _kernels_ext is not None and not os.environ.get("FLF_NO_EXT"):
    _backend = _kernels_ext
else:
    _backend = _kernels_py


def _make_fft_pair():
    """Forward/inverse real 2-D FFT callables for the hot loop.

    scipy's pypocketfft is called directly when its interface checks out
    (skips ~20us of wrapper overhead per transform); otherwise the public
    scipy.fft API is used. Both produce identical transforms.
    """
    try:
        from scipy.fft._pocketfft.pypocketfft import c2r, r2c

        probe = np.arange(12.0).reshape(3, 4)
        spec = r2c(probe, (0, 1), True, 0, None, 1)
        back = c2r(spec, (0, 1), 4, False, 2, None, 1)
        if np.allclose(spec, fft.rfft2(probe)) and np.allclose(back, probe):
            return (
                lambda a: r2c(a, (0, 1), True, 0, None, 1),
                lambda s, shape: c2r(s, (0, 1), shape[1], False, 2, None, 1),
            )
    except Exception:
        pass
    return (lambda a: fft.rfft2(a), lambda s, shape: fft.irfft2(s, s=shape))


_rfft2, _irfft2 = _make_fft_pair()


def backend_name() -> str:
    """Name of the hot-kernel backend selected at import time."""
    return "cython" if _backend is _kernels_ext else "numpy"


class ZeroKernel(ValueError):
    """Every unnormalized kernel value is zero (no ring mass in support)."""


class DimensionMismatch(ValueError):
    """Field shape does not match the kernel's precomputed world size."""


class DisplacementTooLarge(ValueError):
    """A displacement component exceeds the per-axis clamp d_max."""


@dataclass(frozen=True)
class Ring:
    """One Gaussian ring of a kernel profile, on normalized radius u."""

    a: float  # ring center in [0, 1]
    b: float  # ring height in [0, 1]
    w: float  # ring width in [0.01, 0.5]


@dataclass(frozen=True)
class KernelSpec:
    """Evolvable parameters of one kernel and its channel wiring."""

    r: float  # relative radius in (0, 1]; support radius is R * r cells
    h: float  # affinity weight in [0, 1]
    mu: float  # growth center
    sigma: float  # growth width
    rings: tuple[Ring, Ring, Ring]
    src: int = 0  # channel the kernel reads
    dst: int = 0  # channel whose affinity it feeds


@dataclass(frozen=True)
class DynamicsParams:
    """Non-evolved constants of the update rule."""

    dt: float = 0.2  # integration step
    theta_a: float = 2.0  # crowding threshold
    n_alpha: float = 2.0  # crowding exponent
    ell: float = 0.5  # reintegration half-width, cells
    d_max: float = 1.0  # per-axis displacement clamp, cells


@dataclass(frozen=True)
class UpdateRule:
    """Global radius scale, kernel set, and dynamics constants."""

    R: float
    kernels: tuple[KernelSpec, ...]
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)

    def validate(self, channels: int | None = None) -> None:
        dyn = self.dynamics
        if self.R <= 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if not self.kernels:
            raise ValueError("rule needs at least one kernel")
        if dyn.dt <= 0:
            raise ValueError(f"dt must be positive, got {dyn.dt}")
        if not 0.0 < dyn.ell <= 0.5:
            raise ValueError(f"ell must be in (0, 0.5], got {dyn.ell}")
        if channels is not None:
            for k in self.kernels:
                if not (0 <= k.src < channels and 0 <= k.dst < channels):
                    raise ValueError(f"kernel wiring ({k.src}->{k.dst}) outside [0, {channels})")


class KernelField:
    """Discretized radial kernel plus its spectrum at a fixed world size."""

    __slots__ = ("values", "spectrum", "world")

    def __init__(self, values: np.ndarray, spectrum: np.ndarray, world: tuple[int, int]):
        self.values = values
        self.spectrum = spectrum
        self.world = world


def build_kernel(R: float, spec: KernelSpec, world: tuple[int, int]) -> KernelField:
    """Rasterize a sum-of-rings kernel and precompute its FFT for `world`.

    Cell values depend only on normalized distance u = d / (R * r): the sum
    of the three Gaussian rings for u <= 1, zero beyond, normalized to unit
    total. Raises ZeroKernel when nothing survives inside the support.
    """
    rho = R * spec.r
    if rho <= 0:
        raise ValueError(f"kernel radius R*r must be positive, got {rho}")
    half = math.ceil(rho)
    side = 2 * half + 1
    H, W = world
    if side > min(H, W):
        raise DimensionMismatch(f"kernel side {side} exceeds world {world}")

    yy, xx = np.mgrid[-half : half + 1, -half : half + 1]
    u = np.sqrt(yy * yy + xx * xx) / rho
    inside = u <= 1.0
    ui = u[inside]
    acc = np.zeros_like(ui)
    for ring in spec.rings:
        if ring.b > 0.0:
            acc += ring.b * np.exp(-((ui - ring.a) ** 2) / (2.0 * ring.w * ring.w))
    values = np.zeros((side, side))
    values[inside] = acc
    total = values.sum()
    if total <= 0.0:
        raise ZeroKernel("kernel has no mass inside its support")
    values /= total

    padded = np.zeros(world)
    padded[:side, :side] = values
    padded = np.roll(padded, (-half, -half), axis=(0, 1))  # center at origin
    return KernelField(values, fft.rfft2(padded), world)


def convolve(grid: np.ndarray, kernel: KernelField) -> np.ndarray:
    """Toroidal convolution of an (H, W) field via the kernel's spectrum."""
    if grid.shape != kernel.world:
        raise DimensionMismatch(f"field {grid.shape} vs kernel world {kernel.world}")
    return fft.irfft2(fft.rfft2(grid) * kernel.spectrum, s=kernel.world)


def growth(u, mu: float, sigma: float):
    """Bell growth 2*exp(-(u - mu)^2 / (2 sigma^2)) - 1, range (-1, 1]."""
    d = (np.asarray(u, dtype=np.float64) - mu) / sigma
    return 2.0 * np.exp(-0.5 * d * d) - 1.0


class CompiledRule:
    """Update rule with kernels rasterized and transformed for one world.

    Kernels whose ring profile vanishes are kept as None and contribute a
    zero affinity, so arbitrary (degenerate) parameter sets still run.
    Instances are immutable after construction and safe to share across
    concurrent rollouts.
    """

    __slots__ = ("rule", "world", "fields", "degenerate", "_spectra", "_src", "_dst", "_h", "_mu", "_inv_sigma")

    def __init__(self, rule: UpdateRule, world: tuple[int, int]):
        if rule.dynamics.d_max > min(world) / 4:
            raise ValueError(
                f"d_max {rule.dynamics.d_max} exceeds min(H, W)/4 for world {world}"
            )
        self.rule = rule
        self.world = world
        self.fields: list[KernelField | None] = []
        self.degenerate = False
        for spec in rule.kernels:
            try:
                self.fields.append(build_kernel(rule.R, spec, world))
            except ZeroKernel:
                self.fields.append(None)
                self.degenerate = True
        # active kernels only (non-degenerate, nonzero weight), stacked for the hot path
        active = [
            (spec, kf)
            for spec, kf in zip(rule.kernels, self.fields)
            if kf is not None and spec.h != 0.0
        ]
        self._spectra = [kf.spectrum for _, kf in active]
        self._src = [spec.src for spec, _ in active]
        self._dst = np.array([spec.dst for spec, _ in active], dtype=np.int64)
        self._h = np.array([spec.h for spec, _ in active])
        self._mu = np.array([spec.mu for spec, _ in active])
        self._inv_sigma = np.array([1.0 / spec.sigma for spec, _ in active])


def _growth_accumulate(conv, h, mu, inv_sigma, dst, channels):
    """Growth-bell responses of (K, H, W) activations summed into (C, H, W).

    Computes sum_k h_k * (2 * exp(-((conv_k - mu_k) / sigma_k)^2 / 2) - 1)
    per target channel as 2 * sum(h_k * e_k) - sum(h_k), using the bells
    in place of `conv` (which is scratch).
    """
    conv -= mu[:, None, None]
    conv *= inv_sigma[:, None, None]
    conv *= conv
    conv *= -0.5
    np.exp(conv, out=conv)
    out = np.zeros((channels,) + conv.shape[1:])
    for k in range(len(h)):
        out[dst[k]] += h[k] * conv[k]
    out *= 2.0
    out -= np.bincount(dst, weights=h, minlength=channels)[:, None, None]
    return out


def _affinity_chw(a: np.ndarray, comp: CompiledRule) -> np.ndarray:
    """Affinity per channel for a (C, H, W) state."""
    C, H, W = a.shape
    n_active = len(comp._spectra)
    if n_active == 0:
        return np.zeros((C, H, W))
    chan_spec: list[np.ndarray | None] = [None] * C
    conv = np.empty((n_active, H, W))
    for k in range(n_active):
        src = comp._src[k]
        s = chan_spec[src]
        if s is None:
            s = chan_spec[src] = _rfft2(a[src])
        conv[k] = _irfft2(s * comp._spectra[k], (H, W))
    return _growth_accumulate(conv, comp._h, comp._mu, comp._inv_sigma, comp._dst, C)


def _flow_chw(u: np.ndarray, a: np.ndarray, rule: UpdateRule) -> tuple[np.ndarray, np.ndarray]:
    """Clamped displacement (dx, dy), each (C, H, W)."""
    dyn = rule.dynamics
    a_sum = a.sum(axis=0)
    return _backend.flow_chw(u, a_sum, dyn.dt, dyn.theta_a, dyn.n_alpha, dyn.d_max)


def affinity(state: np.ndarray, rule: UpdateRule) -> np.ndarray:
    """Per-channel affinity field U for an (H, W, C) state.

    U^c sums h_k * growth(convolve(A^src_k, K_k), mu_k, sigma_k) over the
    kernels targeting channel c; channels nobody feeds stay zero.
    """
    comp = CompiledRule(rule, state.shape[:2])
    a = np.ascontiguousarray(np.moveaxis(state, 2, 0))
    return np.moveaxis(_affinity_chw(a, comp), 0, 2)


def flow_field(u: np.ndarray, state: np.ndarray, rule: UpdateRule) -> np.ndarray:
    """Per-cell displacement (H, W, C, 2), last axis (dx, dy).

    Blends the affinity gradient against the anti-crowding gradient of the
    summed channels: F^c = (1 - alpha) * grad(U^c) - alpha * grad(A_total)
    with alpha = clamp((A_total / theta_a)^n_alpha, 0, 1), gradients by
    central differences with toroidal wrap, then scales by dt and clamps
    each component to +-d_max.
    """
    a = np.ascontiguousarray(np.moveaxis(state, 2, 0))
    u_chw = np.ascontiguousarray(np.moveaxis(u, 2, 0))
    dx, dy = _flow_chw(u_chw, a, rule)
    return np.moveaxis(np.stack([dx, dy], axis=-1), 0, 2)


def advect(state: np.ndarray, disp: np.ndarray, ell: float, d_max: float = 1.0) -> np.ndarray:
    """Reintegration transport of an (H, W, C) state by (H, W, C, 2) disp.

    Each cell's mass is a 2*ell x 2*ell square centered at the displaced
    cell center and is split over the target cells it overlaps, with
    toroidal wrap. Conserves per-channel mass to round-off and never
    produces negative cells.
    """
    if not 0.0 < ell <= 0.5:
        raise ValueError(f"ell must be in (0, 0.5], got {ell}")
    if disp.shape != state.shape + (2,):
        raise DimensionMismatch(f"displacement {disp.shape} vs state {state.shape}")
    amax = float(np.max(np.abs(disp))) if disp.size else 0.0
    if amax > d_max + 1e-12:
        raise DisplacementTooLarge(f"|D| max {amax} exceeds d_max {d_max}")
    a = np.ascontiguousarray(np.moveaxis(state, 2, 0))
    dx = np.ascontiguousarray(np.moveaxis(disp[..., 0], 2, 0))
    dy = np.ascontiguousarray(np.moveaxis(disp[..., 1], 2, 0))
    return np.moveaxis(_backend.advect_chw(a, dx, dy, ell), 0, 2)


def _step_chw(a: np.ndarray, comp: CompiledRule) -> np.ndarray:
    u = _affinity_chw(a, comp)
    dx, dy = _flow_chw(u, a, comp.rule)
    return _backend.advect_chw(a, dx, dy, comp.rule.dynamics.ell)


def step(state: np.ndarray, rule: UpdateRule) -> np.ndarray:
    """One update of an (H, W, C) state: affinity -> flow -> advection."""
    comp = CompiledRule(rule, state.shape[:2])
    a = np.ascontiguousarray(np.moveaxis(state, 2, 0))
    return np.moveaxis(_step_chw(a, comp), 0, 2)


def run(rule: UpdateRule, init: np.ndarray, steps: int, compiled: CompiledRule | None = None) -> np.ndarray:
    """Apply `step` `steps` times and return the final state."""
    comp = compiled if compiled is not None else CompiledRule(rule, init.shape[:2])
    a = np.ascontiguousarray(np.moveaxis(init, 2, 0))
    for _ in range(steps):
        a = _step_chw(a, comp)
    return np.ascontiguousarray(np.moveaxis(a, 0, 2))


def init_state(seed, H: int = 256, W: int = 256, C: int = 3, patch_side: int = 64) -> np.ndarray:
    """Zero state with a centered patch of i.i.d. uniform [0, 1) mass.

    `seed` is anything numpy's default_rng accepts (int or SeedSequence).
    """
    rng = np.random.default_rng(seed)
    grid = np.zeros((H, W, C))
    if patch_side > 0:
        p = patch_side
        y0 = (H - p) // 2
        x0 = (W - p) // 2
        grid[y0 : y0 + p, x0 : x0 + p, :] = rng.random((p, p, C))
    return grid


def total_mass(state: np.ndarray) -> float:
    return float(state.sum())


_STATE_MAGIC = b"FLST"
_STATE_VERSION = 1


def save_state(path, state: np.ndarray) -> None:
    """Write a state file: magic FLST, u32 version/H/W/C, f32 (y, x, c) data."""
    H, W, C = state.shape
    with open(path, "wb") as fh:
        fh.write(_STATE_MAGIC)
        fh.write(struct.pack("<IIII", _STATE_VERSION, H, W, C))
        fh.write(np.ascontiguousarray(state, dtype="<f4").tobytes())


def load_state(path) -> np.ndarray:
    """Read a state file written by save_state; returns float64 (H, W, C)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _STATE_MAGIC:
        raise ValueError(f"{path}: not a state file (bad magic)")
    version, H, W, C = struct.unpack_from("<IIII", raw, 4)
    if version != _STATE_VERSION:
        raise ValueError(f"{path}: unsupported state version {version}")
    data = np.frombuffer(raw, dtype="<f4", count=H * W * C, offset=20)
    return data.reshape(H, W, C).astype(np.float64)
