"""Domain types, parameter validation and initial configurations."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Union

import numpy as np

from . import rng

LEFT, BLOCKADE, RIGHT = -1, 0, 1


class ParameterError(ValueError):
    """Raised when reaction parameters or a configuration are invalid."""


@dataclass(frozen=True)
class ReactionParams:
    """The four reaction probabilities of the model.

    ``a``: arrow-arrow collision leaves one arrow (each direction a/2);
    ``b``: arrow-arrow collision coalesces into a blockade;
    ``alpha``: arrow survives a blockade collision (strong);
    ``beta``: blockade survives an arrow collision (weak).
    """

    a: float
    b: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("a", "b", "alpha", "beta"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite real, got {value!r}")
            if not 0.0 <= value < 1.0:
                raise ParameterError(f"0 <= {name} < 1 violated: {name}={value}")
        if self.a + self.b > 1.0:
            raise ParameterError(f"a + b <= 1 violated: a + b = {self.a + self.b}")
        if self.alpha + self.beta > 1.0:
            raise ParameterError(f"alpha + beta <= 1 violated: alpha + beta = {self.alpha + self.beta}")

    @property
    def c(self) -> float:
        """Arrow-arrow mutual annihilation probability."""
        return 1.0 - (self.a + self.b)

    @property
    def xi(self) -> float:
        """Arrow-blockade mutual annihilation probability."""
        return 1.0 - (self.alpha + self.beta)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.alpha, self.beta)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "alpha": self.alpha, "beta": self.beta}


def validate_params(a: float, b: float, alpha: float, beta: float) -> ReactionParams:
    return ReactionParams(float(a), float(b), float(alpha), float(beta))


class Origin(enum.Enum):
    ORIGINAL = "original"
    GENERATED = "generated"


@dataclass(frozen=True)
class Species:
    """Velocity class of a particle; blockades also carry their origin."""

    velocity: int
    origin: Origin = Origin.ORIGINAL

    @property
    def is_blockade(self) -> bool:
        return self.velocity == BLOCKADE

    def symbol(self) -> str:
        if self.velocity == LEFT:
            return "<-"
        if self.velocity == RIGHT:
            return "->"
        return "b^" if self.origin is Origin.GENERATED else "b."

    def __str__(self) -> str:
        return self.symbol()


LeftArrow = Species(LEFT)
RightArrow = Species(RIGHT)
OriginalBlockade = Species(BLOCKADE, Origin.ORIGINAL)
GeneratedBlockade = Species(BLOCKADE, Origin.GENERATED)


class Side(str, enum.Enum):
    RIGHT_HALF_LINE = "right"
    TWO_SIDED = "two-sided"


@dataclass(frozen=True)
class Exponential:
    mean: float = 1.0

    def __post_init__(self):
        if not self.mean > 0:
            raise ParameterError(f"exponential spacing needs mean > 0, got {self.mean}")

    def transform(self, u: np.ndarray) -> np.ndarray:
        return -self.mean * np.log(u)

    def to_dict(self) -> dict:
        return {"kind": "exponential", "mean": self.mean}


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not (0 <= self.lo < self.hi and math.isfinite(self.hi)):
            raise ParameterError(f"uniform spacing needs 0 <= lo < hi, got ({self.lo}, {self.hi})")

    def transform(self, u: np.ndarray) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * u

    def to_dict(self) -> dict:
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}


Spacing = Union[Exponential, Uniform]


def spacing_from_spec(spec) -> Spacing:
    """Build a spacing law from ``"exponential"``, ``"uniform:lo,hi"`` or a dict."""
    if isinstance(spec, (Exponential, Uniform)):
        return spec
    if spec is None:
        return Exponential()
    if isinstance(spec, str):
        kind, _, rest = spec.partition(":")
        args = [float(x) for x in rest.split(",") if x.strip()]
        spec = {"kind": kind, **(dict(zip(("mean",), args)) if kind == "exponential" else dict(zip(("lo", "hi"), args)))}
    kind = spec.get("kind", "exponential")
    if kind == "exponential":
        return Exponential(float(spec.get("mean", 1.0)))
    if kind == "uniform":
        return Uniform(float(spec["lo"]), float(spec["hi"]))
    raise ParameterError(f"unknown spacing kind {kind!r}")


@dataclass(frozen=True)
class InitialConfig:
    n: int
    p: float
    side: Side = Side.RIGHT_HALF_LINE
    spacing: Spacing = field(default_factory=Exponential)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        object.__setattr__(self, "spacing", spacing_from_spec(self.spacing))
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n!r}")
        if not (isinstance(self.p, (int, float)) and 0.0 <= self.p <= 1.0):
            raise ParameterError(f"blockade density p must lie in [0, 1], got {self.p!r}")

    def to_dict(self) -> dict:
        return {"n": int(self.n), "p": self.p, "side": self.side.value,
                "spacing": self.spacing.to_dict(), "seed": int(self.seed)}


@dataclass
class Particle:
    id: int
    species: Species
    birth_position: float
    birth_time: float = 0.0
    alive: bool = True
    weak_hits_right: int = 0
    weak_hits_left: int = 0

    def position(self, t: float) -> float:
        return self.birth_position + self.species.velocity * (t - self.birth_time)


@dataclass(frozen=True)
class Configuration:
    """A sampled initial configuration, sorted by position.

    ``keys`` are the lattice indices ``k`` of the particles (``x_k``); they
    seed the collision randomness and stay fixed when the window grows.
    """

    positions: np.ndarray
    velocities: np.ndarray
    keys: np.ndarray
    config: InitialConfig | None = None

    def __len__(self) -> int:
        return len(self.positions)

    def __getitem__(self, i: int) -> Particle:
        v = int(self.velocities[i])
        return Particle(id=i, species=Species(v), birth_position=float(self.positions[i]))

    def __iter__(self) -> Iterator[Particle]:
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_species(cls, positions, species) -> "Configuration":
        """Hand-built configuration, e.g. ``from_species([0, 2], "><")``.

        ``species`` is a sequence of velocities or a string over ``<``, ``>``, ``b``.
        """
        lookup = {"<": LEFT, ">": RIGHT, "b": BLOCKADE, ".": BLOCKADE}
        vel = [lookup[s] if isinstance(s, str) else int(s) for s in species]
        pos = np.asarray(positions, dtype=np.float64)
        if len(pos) != len(vel):
            raise ParameterError("positions and species differ in length")
        if np.any(np.diff(pos) <= 0):
            raise ParameterError("positions must be strictly increasing")
        keys = np.arange(1, len(pos) + 1, dtype=np.int64)
        return cls(pos, np.asarray(vel, dtype=np.int8), keys)

    def restrict(self, lo: float = -math.inf, hi: float = math.inf) -> "Configuration":
        """Particles with initial position strictly inside (lo, hi)."""
        m = (self.positions > lo) & (self.positions < hi)
        return Configuration(self.positions[m], self.velocities[m], self.keys[m], self.config)

    def mirrored(self, about: float = 0.0) -> "Configuration":
        """Reflect space about ``about``: positions and velocities change sign."""
        pos = (2 * about - self.positions)[::-1].copy()
        return Configuration(pos, (-self.velocities[::-1]).astype(np.int8), self.keys[::-1].copy(), self.config)


def sample_initial_config(cfg: InitialConfig) -> Configuration:
    """Sample positions and velocities; deterministic in ``cfg.seed``.

    Draws for particle ``k`` come from counter-based streams indexed by ``k``, so
    the first ``n`` particles of an ``m > n`` window coincide with the ``n``-window.
    """
    if cfg.side is Side.RIGHT_HALF_LINE:
        idx = np.arange(1, cfg.n + 1, dtype=np.int64)
        gaps = cfg.spacing.transform(rng.index_uniforms(cfg.seed, rng.TAG_SPACING, idx, open_interval=True))
        positions = np.cumsum(gaps)
    else:
        n_left = (cfg.n - 1) // 2
        n_right = cfg.n - 1 - n_left
        right_idx = np.arange(1, n_right + 1, dtype=np.int64)
        left_idx = -np.arange(1, n_left + 1, dtype=np.int64)
        right = np.cumsum(cfg.spacing.transform(rng.index_uniforms(cfg.seed, rng.TAG_SPACING, right_idx, True)))
        left = -np.cumsum(cfg.spacing.transform(rng.index_uniforms(cfg.seed, rng.TAG_SPACING, left_idx, True)))
        idx = np.concatenate([left_idx[::-1], [0], right_idx])
        positions = np.concatenate([left[::-1], [0.0], right])
    u = rng.index_uniforms(cfg.seed, rng.TAG_SPECIES, idx)
    right_cut = cfg.p + (1.0 - cfg.p) / 2.0
    velocities = np.where(u < cfg.p, BLOCKADE, np.where(u < right_cut, RIGHT, LEFT)).astype(np.int8)
    return Configuration(positions, velocities, idx, cfg)
