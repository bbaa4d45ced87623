"""Deterministic, seedable randomization of box parameters and scanner poses.

Randomness is built on counter-based Philox4x64 streams keyed by
(master_seed, sample_index), so every sample owns a statistically
independent stream that is a pure function of the two integers, regardless
of thread count or generation order. Draws are derived from the raw 64-bit
Philox output and nothing else:

    u    = ((raw >> 11) + 0.5) * 2**-53          # uniform, strictly in (0, 1)
    x    = mu + sigma * Phi^-1(u)                # normal via inverse CDF
    d    = lo + (hi - lo) * u                    # uniform on an interval

This derivation is recorded in dataset manifests as RNG_ID.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from statistics import NormalDist

import numpy as np

from .boxmodel import BoxParams

__all__ = [
    "RNG_ID",
    "Stream",
    "derive_stream",
    "ParamSpec",
    "GenerationConfig",
    "ConfigError",
    "RigidPose",
    "truncate",
    "sample_truncated",
    "sample_box_params",
    "sample_camera_pose",
    "look_at",
    "default_config",
    "load_config",
]

RNG_ID = "philox4x64(key=[master_seed,sample_index]); u=((raw>>11)+0.5)/2^53; normal=mu+sigma*ndtri(u)"

_STD_NORMAL = NormalDist()


class Stream:
    """One deterministic draw stream (see module docstring for derivation)."""

    def __init__(self, master_seed: int, sample_index: int):
        if not 0 <= master_seed < 2**64:
            raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {master_seed}")
        if not 0 <= sample_index < 2**64:
            raise ValueError(f"sample_index must be a 64-bit unsigned integer, got {sample_index}")
        self.master_seed = master_seed
        self.sample_index = sample_index
        self._bg = np.random.Philox(key=np.array([master_seed, sample_index], dtype=np.uint64))

    def raw(self, n: int | None = None):
        return self._bg.random_raw(n)

    def uniform01(self, n: int | None = None):
        raw = self._bg.random_raw(n)
        if n is None:
            return (float(int(raw) >> 11) + 0.5) * 2.0**-53
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        return mu + sigma * _STD_NORMAL.inv_cdf(self.uniform01())

    def normals(self, n: int, mu: float = 0.0, sigma: float = 1.0) -> np.ndarray:
        u = self.uniform01(n)
        return mu + sigma * np.array([_STD_NORMAL.inv_cdf(float(x)) for x in u])

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform01()


def derive_stream(master_seed: int, sample_index: int) -> Stream:
    """Independent per-sample stream; pure function of (seed, index)."""
    return Stream(master_seed, sample_index)


# ---------------------------------------------------------------------------
# parameter specs and truncated-normal sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamSpec:
    """Additive base plus a clamped Gaussian: base + clip(N(mu, sigma^2), +-sigma*gamma)."""

    base: float
    sigma: float
    gamma: float = 2.0
    mu: float = 0.0

    def validate(self, name: str) -> None:
        if not (self.sigma >= 0.0 and math.isfinite(self.sigma)):
            raise ConfigError(f"{name}.sigma must be >= 0, got {self.sigma}")
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise ConfigError(f"{name}.gamma must be > 0, got {self.gamma}")
        if not (math.isfinite(self.base) and math.isfinite(self.mu)):
            raise ConfigError(f"{name}: base and mu must be finite")

    @property
    def lo(self) -> float:
        return self.base - self.sigma * self.gamma

    @property
    def hi(self) -> float:
        return self.base + self.sigma * self.gamma

    def to_dict(self) -> dict:
        return {"base": self.base, "mu": self.mu, "sigma": self.sigma, "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d: dict) -> "ParamSpec":
        return cls(
            base=float(d["base"]),
            sigma=float(d["sigma"]),
            gamma=float(d.get("gamma", 2.0)),
            mu=float(d.get("mu", 0.0)),
        )


def truncate(draw: float, spec: ParamSpec) -> float:
    """base + min(max(-sigma*gamma, draw), sigma*gamma)."""
    cap = spec.sigma * spec.gamma
    return spec.base + min(max(-cap, draw), cap)


def sample_truncated(stream: Stream, spec: ParamSpec) -> float:
    return truncate(stream.normal(spec.mu, spec.sigma), spec)


# ---------------------------------------------------------------------------
# rigid poses and camera sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RigidPose:
    """Rotation (3x3, det +1) plus translation; here always camera/box-to-world."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64))

    def validate(self) -> None:
        r = self.rotation
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-9:
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(float(np.linalg.det(r)) - 1.0) > 1e-9:
            raise ValueError("rotation determinant is not +1 within 1e-9")

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation


def look_at(eye, target, up_hint=None) -> RigidPose:
    """Camera-to-world pose with X right, Y down, Z forward toward `target`.

    Falls back to a +y up hint when the view direction is (anti)parallel to
    the hint (within 1e-6).
    """
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    forward = target - eye
    dist = float(np.linalg.norm(forward))
    if dist == 0.0:
        raise ValueError("look_at: eye and target coincide")
    z = forward / dist
    up = np.array([0.0, 0.0, 1.0]) if up_hint is None else np.asarray(up_hint, dtype=np.float64)
    up = up / np.linalg.norm(up)
    if abs(float(np.dot(z, up))) > 1.0 - 1e-6:
        up = np.array([0.0, 1.0, 0.0])
    x = np.cross(z, up)
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    rotation = np.column_stack([x, y, z])
    return RigidPose(rotation=rotation, translation=eye)


def _octant_direction(stream: Stream) -> np.ndarray:
    """Uniform unit vector with all components >= 0: uniform on the full
    sphere (area-preserving cylindrical map), then component-wise |.|."""
    z = 1.0 - 2.0 * stream.uniform01()
    phi = 2.0 * math.pi * stream.uniform01()
    s = math.sqrt(max(0.0, 1.0 - z * z))
    v = np.array([s * math.cos(phi), s * math.sin(phi), z])
    return np.abs(v)


def sample_camera_pose(stream: Stream, cfg: "GenerationConfig") -> RigidPose:
    """Scanner pose: eye on the positive octant shell at a uniform random
    distance, looking at the world origin. Direction drawn first, then distance."""
    direction = _octant_direction(stream)
    dist = stream.uniform(cfg.camera_distance_min, cfg.camera_distance_max)
    return look_at(direction * dist, np.zeros(3))


# ---------------------------------------------------------------------------
# generation config
# ---------------------------------------------------------------------------


class ConfigError(ValueError):
    """Generation config is malformed or can produce invalid box parameters."""


# box parameters drawn per sample, in draw order
_BOX_SPECS = (
    "size_x",
    "size_y",
    "size_z",
    "flap_length",
    "flap_taper",
    "open",
    "thickness",
    "bevel_radius",
)

# sharpest wall/flap fold the inward thickness offset can survive (see
# GenerationConfig.validate); tan(2.9/2) ~ 8.2 stays under the solidify cap
_MAX_OPEN = 2.9


@dataclass(frozen=True)
class GenerationConfig:
    master_seed: int = 0
    width: int = 640
    height: int = 480
    horizontal_fov: float = math.pi / 3
    camera_distance_min: float = 1.0
    camera_distance_max: float = 1.7
    size_x: ParamSpec = field(default_factory=lambda: ParamSpec(0.25, 0.1, 2.0))
    size_y: ParamSpec = field(default_factory=lambda: ParamSpec(0.25, 0.1, 2.0))
    size_z: ParamSpec = field(default_factory=lambda: ParamSpec(0.25, 0.1, 2.0))
    flap_length: ParamSpec = field(default_factory=lambda: ParamSpec(0.12, 0.03, 2.0))
    flap_taper: ParamSpec = field(default_factory=lambda: ParamSpec(0.010, 0.004, 2.0))
    open: ParamSpec = field(default_factory=lambda: ParamSpec(math.pi / 2, 0.5, 2.0))
    thickness: ParamSpec = field(default_factory=lambda: ParamSpec(0.004, 0.001, 2.0))
    bevel_radius: ParamSpec = field(default_factory=lambda: ParamSpec(0.011, 0.002, 2.0))
    bevel_segments: int = 4
    random_yaw: bool = False
    noise_sigma: float = 0.0
    projector_offset: tuple[float, float, float] | None = None

    def validate(self) -> None:
        if not (isinstance(self.master_seed, int) and 0 <= self.master_seed < 2**64):
            raise ConfigError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if not (isinstance(self.width, int) and self.width >= 1):
            raise ConfigError(f"width must be an integer >= 1, got {self.width}")
        if not (isinstance(self.height, int) and self.height >= 1):
            raise ConfigError(f"height must be an integer >= 1, got {self.height}")
        if not (0.0 < self.horizontal_fov < math.pi):
            raise ConfigError(f"horizontal_fov must be in (0, pi), got {self.horizontal_fov}")
        if not (0.0 < self.camera_distance_min < self.camera_distance_max):
            raise ConfigError(
                "camera distances must satisfy 0 < min < max, got "
                f"({self.camera_distance_min}, {self.camera_distance_max})"
            )
        for name in _BOX_SPECS:
            getattr(self, name).validate(name)
        if not (isinstance(self.bevel_segments, int) and self.bevel_segments >= 1):
            raise ConfigError(f"bevel_segments must be an integer >= 1, got {self.bevel_segments}")
        if not (self.noise_sigma >= 0.0 and math.isfinite(self.noise_sigma)):
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.projector_offset is not None and len(self.projector_offset) != 3:
            raise ConfigError("projector_offset must be null or a 3-vector")

        # every sampleable BoxParams must satisfy the box invariants and
        # survive beveling + solidification; check the range extremes
        size_lo = min(self.size_x.lo, self.size_y.lo, self.size_z.lo)
        size_lo_xy = min(self.size_x.lo, self.size_y.lo)
        if size_lo <= 0.0:
            raise ConfigError(f"size range reaches {size_lo:.6g} <= 0; shrink sigma*gamma")
        if self.flap_length.lo < 0.0:
            raise ConfigError(f"flap_length range reaches {self.flap_length.lo:.6g} < 0")
        if self.flap_taper.lo < 0.0:
            raise ConfigError(f"flap_taper range reaches {self.flap_taper.lo:.6g} < 0")
        if self.flap_taper.hi > size_lo_xy / 2:
            raise ConfigError(
                f"flap_taper can reach {self.flap_taper.hi:.6g} > min(size_x, size_y)/2 = {size_lo_xy / 2:.6g}"
            )
        if self.thickness.lo < 0.0:
            raise ConfigError(f"thickness range reaches {self.thickness.lo:.6g} < 0")
        if self.thickness.hi >= size_lo_xy / 2:
            raise ConfigError(
                f"thickness can reach {self.thickness.hi:.6g} >= min(size_x, size_y)/2 = {size_lo_xy / 2:.6g}"
            )
        if self.bevel_radius.lo < 0.0:
            raise ConfigError(f"bevel_radius range reaches {self.bevel_radius.lo:.6g} < 0")
        if self.bevel_radius.hi > 0.0:
            if self.bevel_radius.hi >= size_lo / 2:
                raise ConfigError(
                    f"bevel_radius can reach {self.bevel_radius.hi:.6g} >= min(size)/2 = {size_lo / 2:.6g}"
                )
            if self.thickness.hi > 0.0 and self.bevel_radius.lo <= self.thickness.hi:
                raise ConfigError(
                    "bevel_radius range must stay above the thickness range "
                    f"(fillet inner radius would vanish): bevel lo {self.bevel_radius.lo:.6g} "
                    f"<= thickness hi {self.thickness.hi:.6g}"
                )
            if self.flap_length.hi > 0.0 and self.flap_length.lo < 2.0 * self.bevel_radius.hi:
                raise ConfigError(
                    "flap_length range must stay above twice the bevel radius "
                    f"(fillet would not fit next to the hinge): flap lo {self.flap_length.lo:.6g} "
                    f"< 2 * bevel hi {2.0 * self.bevel_radius.hi:.6g}"
                )
        if self.thickness.hi > 0.0 and min(math.pi, self.open.hi) > _MAX_OPEN:
            raise ConfigError(
                f"open range reaches {min(math.pi, self.open.hi):.6g} rad > {_MAX_OPEN}; "
                "a nearly folded-flat flap cannot be thickened"
            )

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "camera": {
                "width": self.width,
                "height": self.height,
                "horizontal_fov": self.horizontal_fov,
                "distance_min": self.camera_distance_min,
                "distance_max": self.camera_distance_max,
            },
            "box": {
                **{name: getattr(self, name).to_dict() for name in _BOX_SPECS},
                "bevel_segments": self.bevel_segments,
            },
            "scan": {
                "noise_sigma": self.noise_sigma,
                "projector_offset": list(self.projector_offset)
                if self.projector_offset is not None
                else None,
            },
            "random_yaw": self.random_yaw,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationConfig":
        try:
            cam = d.get("camera", {})
            box = d.get("box", {})
            scan = d.get("scan", {})
            specs = {
                name: ParamSpec.from_dict(box[name]) for name in _BOX_SPECS if name in box
            }
            offset = scan.get("projector_offset")
            cfg = cls(
                master_seed=int(d.get("master_seed", 0)),
                width=int(cam.get("width", 640)),
                height=int(cam.get("height", 480)),
                horizontal_fov=float(cam.get("horizontal_fov", math.pi / 3)),
                camera_distance_min=float(cam.get("distance_min", 1.0)),
                camera_distance_max=float(cam.get("distance_max", 1.7)),
                bevel_segments=int(box.get("bevel_segments", 4)),
                random_yaw=bool(d.get("random_yaw", False)),
                noise_sigma=float(scan.get("noise_sigma", 0.0)),
                projector_offset=tuple(float(v) for v in offset) if offset is not None else None,
                **specs,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg.validate()
        return cfg

    def with_seed(self, seed: int) -> "GenerationConfig":
        return replace(self, master_seed=seed)


def default_config(seed: int = 0) -> GenerationConfig:
    cfg = GenerationConfig(master_seed=seed)
    cfg.validate()
    return cfg


def load_config(path) -> GenerationConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return GenerationConfig.from_dict(data)


def sample_box_params(stream: Stream, cfg: GenerationConfig) -> BoxParams:
    """Draw one BoxParams. Fixed draw order (size_x, size_y, size_z,
    flap_length, flap_taper, open[0..3], thickness, bevel_radius) keeps
    streams reproducible; open angles are additionally clamped to [0, pi]."""
    size = tuple(sample_truncated(stream, getattr(cfg, n)) for n in ("size_x", "size_y", "size_z"))
    flap_length = sample_truncated(stream, cfg.flap_length)
    flap_taper = sample_truncated(stream, cfg.flap_taper)
    open_angles = tuple(
        min(max(sample_truncated(stream, cfg.open), 0.0), math.pi) for _ in range(4)
    )
    thickness = sample_truncated(stream, cfg.thickness)
    bevel_radius = sample_truncated(stream, cfg.bevel_radius)
    params = BoxParams(
        size=size,
        flap_length=flap_length,
        flap_taper=flap_taper,
        open=open_angles,
        thickness=thickness,
        bevel_radius=bevel_radius,
        bevel_segments=cfg.bevel_segments,
    )
    params.validate()
    return params
