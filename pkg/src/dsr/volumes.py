"""Space-time volumes, the sampling forward model, noise injection and metrics.

A volume is a scalar field over a W x H x T pixel grid stored as a flat
float64 array in frame-major, row-major order: ``index = t*W*H + y*W + x``.
Coordinates are (x right, y down, t forward). Measurement operators are pure
selections (decimation grids or boolean masks), so their normal matrix is
diagonal with 0/1 entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = [
    "FrameDims",
    "DepthVolume",
    "IntensityVolume",
    "SamplingOperator",
    "Measurements",
    "apply_sampling",
    "adjoint_sampling",
    "occupancy",
    "add_noise",
    "snr_db",
    "per_frame_snr",
    "linear_interpolate",
    "mask_fill",
    "luma",
]


@dataclass(frozen=True)
class FrameDims:
    """Pixel grid dimensions of a video volume."""

    width: int
    height: int
    frames: int

    def __post_init__(self):
        for name in ("width", "height", "frames"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v <= 0:
                raise DataError(f"{name} must be a positive integer, got {v!r}")

    @property
    def pixels_per_frame(self) -> int:
        return self.width * self.height

    @property
    def total_voxels(self) -> int:
        return self.width * self.height * self.frames


def _as_volume_values(values, dims: FrameDims) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size != dims.total_voxels:
        raise DataError(
            f"value array has {arr.size} entries, dims require {dims.total_voxels}"
        )
    if not np.all(np.isfinite(arr)):
        raise DataError("volume values must be finite")
    return arr


@dataclass
class DepthVolume:
    """Dense depth sequence in scene-relative units."""

    dims: FrameDims
    values: np.ndarray

    def __post_init__(self):
        self.values = _as_volume_values(self.values, self.dims)

    @classmethod
    def from_frames(cls, frames: np.ndarray) -> "DepthVolume":
        """Build from a (T, H, W) array."""
        arr = np.asarray(frames, dtype=np.float64)
        if arr.ndim != 3:
            raise DataError(f"expected (T, H, W) array, got shape {arr.shape}")
        t, h, w = arr.shape
        return cls(FrameDims(w, h, t), arr.reshape(-1))

    def frames(self) -> np.ndarray:
        """Values reshaped to (T, H, W)."""
        d = self.dims
        return self.values.reshape(d.frames, d.height, d.width)


@dataclass
class IntensityVolume:
    """Dense intensity sequence, values normalized to [0, 1]."""

    dims: FrameDims
    values: np.ndarray

    def __post_init__(self):
        self.values = _as_volume_values(self.values, self.dims)
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise DataError("intensity values must lie in [0, 1]")

    @classmethod
    def from_frames(cls, frames: np.ndarray) -> "IntensityVolume":
        arr = np.asarray(frames, dtype=np.float64)
        if arr.ndim != 3:
            raise DataError(f"expected (T, H, W) array, got shape {arr.shape}")
        t, h, w = arr.shape
        return cls(FrameDims(w, h, t), arr.reshape(-1))

    def frames(self) -> np.ndarray:
        d = self.dims
        return self.values.reshape(d.frames, d.height, d.width)


class SamplingOperator:
    """Selection-type measurement operator.

    Either a regular decimation grid (every ``factor``-th pixel per spatial
    axis, phase (0, 0), all frames) or an arbitrary boolean mask over voxels.
    Each measurement reads exactly one voxel; measurements are ordered by the
    flat voxel index of the selected voxels.
    """

    def __init__(self, kind: str, dims: FrameDims, factor: int | None = None,
                 mask: np.ndarray | None = None):
        if kind not in ("decimation", "mask"):
            raise DataError(f"unknown sampling kind {kind!r}")
        self.kind = kind
        self.dims = dims
        self.factor = factor
        if kind == "decimation":
            if factor is None or factor < 1:
                raise DataError("decimation factor must be >= 1")
            w, h = dims.width, dims.height
            sel = np.zeros((h, w), dtype=bool)
            sel[::factor, ::factor] = True
            self.mask = np.tile(sel.reshape(-1), dims.frames)
        else:
            m = np.asarray(mask, dtype=bool).reshape(-1)
            if m.size != dims.total_voxels:
                raise DataError(
                    f"mask has {m.size} entries, dims require {dims.total_voxels}"
                )
            self.mask = m
        self.indices = np.flatnonzero(self.mask)

    @classmethod
    def decimation(cls, dims: FrameDims, factor: int) -> "SamplingOperator":
        return cls("decimation", dims, factor=factor)

    @classmethod
    def from_mask(cls, dims: FrameDims, mask: np.ndarray) -> "SamplingOperator":
        return cls("mask", dims, mask=mask)

    @property
    def n_measurements(self) -> int:
        return int(self.indices.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SamplingOperator):
            return NotImplemented
        return (self.kind == other.kind and self.dims == other.dims
                and np.array_equal(self.mask, other.mask))

    def __repr__(self) -> str:
        if self.kind == "decimation":
            return f"SamplingOperator(decimation x{self.factor}, {self.dims})"
        return f"SamplingOperator(mask, M={self.n_measurements}, {self.dims})"


@dataclass
class Measurements:
    """Measured depth values paired with the operator that produced them."""

    values: np.ndarray
    operator: SamplingOperator

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size != self.operator.n_measurements:
            raise DataError(
                f"{self.values.size} values for an operator with "
                f"{self.operator.n_measurements} measurements"
            )


def apply_sampling(op: SamplingOperator, vol: DepthVolume) -> Measurements:
    """Read the selected voxels of ``vol`` in fixed scan order."""
    if vol.dims != op.dims:
        raise DataError(f"volume dims {vol.dims} do not match operator dims {op.dims}")
    return Measurements(vol.values[op.indices].copy(), op)


def adjoint_sampling(op: SamplingOperator, m: Measurements) -> DepthVolume:
    """Scatter measurements back onto the voxel grid; unmeasured voxels are 0."""
    if m.operator != op:
        raise DataError("measurements were not produced by this operator")
    out = np.zeros(op.dims.total_voxels)
    out[op.indices] = m.values
    return DepthVolume(op.dims, out)


def occupancy(op: SamplingOperator) -> np.ndarray:
    """Per-voxel measurement indicator, the diagonal of the operator's normal matrix."""
    return op.mask.astype(np.int64)


def snr_db(ref, est) -> float:
    """Signal-to-noise ratio 10*log10(||ref||^2 / ||ref - est||^2) in dB.

    Returns +inf when the estimate equals the reference exactly.
    """
    r = np.asarray(ref, dtype=np.float64).reshape(-1)
    e = np.asarray(est, dtype=np.float64).reshape(-1)
    if r.size != e.size:
        raise DataError(f"length mismatch: ref has {r.size}, est has {e.size}")
    ref_power = float(r @ r)
    if ref_power == 0.0:
        raise DataError("SNR undefined for an all-zero reference")
    diff = r - e
    err_power = float(diff @ diff)
    if err_power == 0.0:
        return float(np.inf)
    return 10.0 * float(np.log10(ref_power / err_power))


def per_frame_snr(ref: DepthVolume, est: DepthVolume) -> np.ndarray:
    """SNR in dB of each frame separately, in frame order."""
    if ref.dims != est.dims:
        raise DataError(f"dims mismatch: ref {ref.dims}, est {est.dims}")
    r = ref.frames()
    e = est.frames()
    return np.array([snr_db(r[k], e[k]) for k in range(ref.dims.frames)])


def add_noise(m: Measurements, target_snr_db: float, seed: int) -> Measurements:
    """Add white Gaussian noise rescaled to hit the target SNR exactly.

    The noise realization is seeded and then scaled so that
    ``snr_db(m.values, out.values)`` equals ``target_snr_db`` up to float
    rounding, which keeps acceptance thresholds reproducible. A target of
    +inf disables noise and returns a copy.
    """
    if np.isinf(target_snr_db) and target_snr_db > 0:
        return Measurements(m.values.copy(), m.operator)
    if not np.isfinite(target_snr_db):
        raise DataError(f"target SNR must be finite or +inf, got {target_snr_db}")
    signal_norm = float(np.linalg.norm(m.values))
    if signal_norm == 0.0:
        raise DataError("cannot set an SNR target on all-zero measurements")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(m.values.size)
    scale = signal_norm * 10.0 ** (-target_snr_db / 20.0) / float(np.linalg.norm(noise))
    return Measurements(m.values + scale * noise, m.operator)


def _bilinear_axis(coords: np.ndarray, step: int, n_samples: int):
    """Lower sample index and fractional weight for each target coordinate."""
    i0 = np.minimum(coords // step, n_samples - 1)
    i1 = np.minimum(i0 + 1, n_samples - 1)
    frac = (coords - i0 * step) / float(step)
    # beyond the last sample i1 == i0, so the frac term cancels (edge replication)
    return i0, i1, frac


def linear_interpolate(m: Measurements, hi_dims: FrameDims) -> DepthVolume:
    """Per-frame bilinear upsampling of decimation measurements to the full grid.

    Exact at sample locations; rows/columns beyond the last sample replicate
    the nearest sampled value.
    """
    op = m.operator
    if op.kind != "decimation":
        raise DataError("linear_interpolate requires a decimation operator "
                        "(use mask_fill for mask measurements)")
    if op.dims != hi_dims:
        raise DataError(f"operator dims {op.dims} do not match target dims {hi_dims}")
    f = op.factor
    w, h, t = hi_dims.width, hi_dims.height, hi_dims.frames
    nx = len(range(0, w, f))
    ny = len(range(0, h, f))
    low = m.values.reshape(t, ny, nx)

    xi0, xi1, xf = _bilinear_axis(np.arange(w), f, nx)
    yi0, yi1, yf = _bilinear_axis(np.arange(h), f, ny)
    xf = xf[np.newaxis, :]
    yf = yf[:, np.newaxis]

    out = np.empty((t, h, w))
    for k in range(t):
        g = low[k]
        top = g[np.ix_(yi0, xi0)] * (1.0 - xf) + g[np.ix_(yi0, xi1)] * xf
        bot = g[np.ix_(yi1, xi0)] * (1.0 - xf) + g[np.ix_(yi1, xi1)] * xf
        out[k] = top * (1.0 - yf) + bot * yf
    return DepthVolume(hi_dims, out.reshape(-1))


def mask_fill(m: Measurements, chunk: int = 4096) -> DepthVolume:
    """Fill unmeasured voxels with the nearest measured voxel in the same frame.

    Distance is Euclidean in pixel coordinates; ties go to the measured voxel
    with the smallest scan index. Measured voxels keep their values.
    """
    op = m.operator
    if op.kind != "mask":
        raise DataError("mask_fill requires a mask operator")
    w, h, t = op.dims.width, op.dims.height, op.dims.frames
    n = op.dims.pixels_per_frame
    mask = op.mask.reshape(t, n)
    out = np.zeros((t, n))
    out.reshape(-1)[op.indices] = m.values

    for k in range(t):
        meas_idx = np.flatnonzero(mask[k])  # ascending scan order
        if meas_idx.size == 0:
            raise DataError(f"frame {k} has no measurements to fill from")
        miss_idx = np.flatnonzero(~mask[k])
        if miss_idx.size == 0:
            continue
        mx = (meas_idx % w).astype(np.float64)
        my = (meas_idx // w).astype(np.float64)
        vals = out[k, meas_idx]
        for lo in range(0, miss_idx.size, chunk):
            part = miss_idx[lo:lo + chunk]
            px = (part % w).astype(np.float64)
            py = (part // w).astype(np.float64)
            d2 = (px[:, None] - mx[None, :]) ** 2 + (py[:, None] - my[None, :]) ** 2
            nearest = np.argmin(d2, axis=1)  # first minimum = smallest scan index
            out[k, part] = vals[nearest]
    return DepthVolume(op.dims, out.reshape(-1))


def luma(rgb_frames: np.ndarray) -> IntensityVolume:
    """Convert (T, H, W, 3) RGB data in [0, 1] to a luma intensity volume."""
    arr = np.asarray(rgb_frames, dtype=np.float64)
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise DataError(f"expected (T, H, W, 3) RGB data, got shape {arr.shape}")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise DataError("RGB values must lie in [0, 1]")
    y = 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
    return IntensityVolume.from_frames(np.clip(y, 0.0, 1.0))
