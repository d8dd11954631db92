"""Exact event-driven simulation of a finite configuration and trial classification.

Origin certification for a configuration on (0, x_n]: particles beyond x_n move
at speed at most one, so they can only affect space-time points with
``y + t >= x_{n+1} > x_n``. A left arrow born at ``x_k <= x_n`` that reaches the
origin travels on the line ``y + t = x_k``, so every origin visit seen in the
window also happens in the infinite system. A non-visit can never be certified
that way (an outside arrow may always break through), so it is declared
certified only when at least ``shield_depth`` blockades survive in the window,
or when the density is p = 1 and no arrow exists anywhere.

The default depth grows like ``sqrt(n)``: near criticality the number of left
arrows that the rest of the line sends into the window fluctuates on that
scale, and a fixed depth is broken regularly. It is further scaled by the mean
number of blockades one arrow can destroy, ``(1 - beta) / (1 - alpha)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import _backend
from ._kernel_py import (COALESCE, HIT_MUTUAL, HIT_STRONG, HIT_WEAK, LEFT_ARROW_SURVIVES, MUTUAL,
                         RIGHT_ARROW_SURVIVES, WEAK_FROM_LEFT, WEAK_FROM_RIGHT)
from .model import (BLOCKADE, LEFT, RIGHT, Configuration, GeneratedBlockade, Particle, ReactionParams,
                    Side, Species)
from .rng import KeyedStream

DEFAULT_SHIELD_DEPTH = 8  # floor of the window-dependent depth
SHIELD_SCALE = 2.0


def default_shield_depth(n: int, params: ReactionParams) -> float:
    """Surviving blockades required to certify a non-visit in an ``n``-particle window."""
    if params.alpha >= 1:
        return math.inf
    per_arrow = max(1.0, (1 - params.beta) / (1 - params.alpha))
    return math.ceil(max(DEFAULT_SHIELD_DEPTH, SHIELD_SCALE * math.sqrt(n)) * per_arrow)


class EngineError(AssertionError):
    """Internal consistency failure; indicates a bug, never bad input."""


class MisuseError(ValueError):
    pass


class EventKind(enum.IntEnum):
    MUTUAL = MUTUAL
    LEFT_ARROW_SURVIVES = LEFT_ARROW_SURVIVES
    RIGHT_ARROW_SURVIVES = RIGHT_ARROW_SURVIVES
    WEAK_FROM_LEFT = WEAK_FROM_LEFT
    WEAK_FROM_RIGHT = WEAK_FROM_RIGHT
    COALESCE = COALESCE


class Hit(enum.IntEnum):
    NONE = 0
    STRONG = HIT_STRONG
    WEAK = HIT_WEAK
    MUTUAL = HIT_MUTUAL


@dataclass(frozen=True)
class Event:
    time: float
    position: float
    kind: EventKind
    participant_ids: tuple[int, int]
    created_id: Optional[int] = None


class ExitKind(enum.Enum):
    CROSSED_LEFT_OF_ORIGIN = "crossed"
    STILL_ALIVE = "alive"


@dataclass(frozen=True)
class Survivor:
    particle: Particle
    exit: ExitKind
    value: float  # crossing time, or position at the time of the last event


class OriginStatus(enum.Enum):
    VISITED_CERTIFIED = "visited"
    NOT_VISITED_CERTIFIED = "not-visited"
    UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class OriginOutcome:
    status: OriginStatus
    first_visit_time: Optional[float] = None

    def __post_init__(self):
        if self.status is OriginStatus.VISITED_CERTIFIED and self.first_visit_time is None:
            raise EngineError("a certified visit needs its time")


@dataclass(frozen=True)
class VisitSequence:
    u: float
    from_right_times: tuple[float, ...] = ()
    from_left_times: tuple[float, ...] = ()


class Flag(enum.Enum):
    FIRST_LEFT = "L1"
    FIRST_BLOCKADE = "B1"
    FIRST_RIGHT = "R1"
    VISITED = "B"
    UNCERTAIN = "uncertain"
    R1_SURVIVED = "R1-survived"
    R1_KILLED_BY_LEFT_ARROW = "R1-killed-by-left-arrow"
    R1_COALESCED = "R1-coalesced"
    R1_MUTUAL_ARROW = "R1-mutual-with-arrow"
    R1_KILLED_BY_ORIGINAL_BLOCKADE = "R1-killed-by-original-blockade"
    R1_KILLED_BY_GENERATED_BLOCKADE = "R1-killed-by-generated-blockade"
    R1_WEAK_DEATH = "R1-weak-death"
    R1_MUTUAL_BLOCKADE = "R1-mutual-with-blockade"
    S_EVENT = "s"
    R_EVENT = "r"
    PHAT_EVENT = "p-hat"


# fate codes of the first particle when it is a right arrow
FATE_NONE, FATE_ALIVE, FATE_BY_LEFT, FATE_COALESCE, FATE_MUTUAL_ARROW = 0, 1, 2, 3, 4
FATE_WEAK_ORIGINAL, FATE_MUTUAL_ORIGINAL, FATE_WEAK_GENERATED, FATE_MUTUAL_GENERATED = 5, 6, 7, 8
FATES_BY_BLOCKADE = (FATE_WEAK_ORIGINAL, FATE_MUTUAL_ORIGINAL, FATE_WEAK_GENERATED, FATE_MUTUAL_GENERATED)


def right_arrow_fate(raw: dict, s: int) -> int:
    """Fate code of the right arrow in slot ``s``."""
    kind = raw["death_kind"][s]
    if kind == 0:
        return FATE_ALIVE
    if kind == COALESCE:
        return FATE_COALESCE
    if kind == LEFT_ARROW_SURVIVES:
        return FATE_BY_LEFT
    other = raw["partner"][s]
    if raw["vel"][other] == LEFT:
        if kind != MUTUAL:
            raise EngineError(f"right arrow {s} died in a {kind} event against a left arrow")
        return FATE_MUTUAL_ARROW
    generated = bool(raw["generated"][other])
    if kind == WEAK_FROM_LEFT:
        return FATE_WEAK_GENERATED if generated else FATE_WEAK_ORIGINAL
    if kind == MUTUAL:
        return FATE_MUTUAL_GENERATED if generated else FATE_MUTUAL_ORIGINAL
    raise EngineError(f"right arrow {s} has impossible death kind {kind}")


@dataclass
class Trace:
    """Full record of one run: event log plus final state of every particle."""

    config: Configuration
    params: ReactionParams
    side: Side
    raw: dict = field(repr=False)

    @property
    def n_original(self) -> int:
        return len(self.config)

    @property
    def n_slots(self) -> int:
        return int(self.raw["n_slots"])

    @property
    def window_edge(self) -> float:
        """Largest initial position x_n (the light-cone anchor)."""
        return float(self.config.positions[-1]) if len(self.config) else 0.0

    @property
    def end_time(self) -> float:
        k = int(self.raw["n_events"])
        return float(self.raw["ev_time"][k - 1]) if k and len(self.raw["ev_time"]) else 0.0

    @cached_property
    def events(self) -> list[Event]:
        r = self.raw
        out = []
        for k in range(int(r["n_events"])):
            created = int(r["ev_created"][k])
            out.append(Event(float(r["ev_time"][k]), float(r["ev_pos"][k]), EventKind(int(r["ev_kind"][k])),
                             (int(r["ev_left"][k]), int(r["ev_right"][k])), created if created >= 0 else None))
        return out

    def species(self, s: int) -> Species:
        v = int(self.raw["vel"][s])
        if v == BLOCKADE and self.raw["generated"][s]:
            return GeneratedBlockade
        return Species(v)

    def particle(self, s: int) -> Particle:
        r = self.raw
        return Particle(id=s, species=self.species(s), birth_position=float(r["birth_pos"][s]),
                        birth_time=float(r["birth_time"][s]), alive=bool(r["death_kind"][s] == 0),
                        weak_hits_right=int(r["weak_right"][s]), weak_hits_left=int(r["weak_left"][s]))

    def particles(self) -> list[Particle]:
        return [self.particle(s) for s in range(self.n_slots)]

    @property
    def alive_mask(self) -> np.ndarray:
        return self.raw["death_kind"][: self.n_slots] == 0

    @property
    def survivors(self) -> list[Survivor]:
        out = []
        t_end = self.end_time
        for s in np.flatnonzero(self.alive_mask):
            p = self.particle(int(s))
            v = p.species.velocity
            if v == LEFT and self.side is Side.RIGHT_HALF_LINE:
                out.append(Survivor(p, ExitKind.CROSSED_LEFT_OF_ORIGIN, p.birth_position))
            else:
                out.append(Survivor(p, ExitKind.STILL_ALIVE, p.position(max(t_end, p.birth_time))))
        return out

    def visit_times(self) -> np.ndarray:
        """Origin visit times of a one-sided run, increasing."""
        if self.side is not Side.RIGHT_HALF_LINE:
            raise MisuseError("origin visits are defined for right-half-line runs")
        m = self.alive_mask & (self.raw["vel"][: self.n_slots] == LEFT)
        return np.sort(self.raw["birth_pos"][: self.n_slots][m])

    def validate(self) -> None:
        """Check the log against the final state; raises :class:`EngineError`."""
        r = self.raw
        span = max(self.window_edge - float(self.config.positions[0]) if len(self.config) else 1.0, 1.0)
        last = -math.inf
        seen_dead = set()
        for ev in self.events:
            if ev.time < last:
                raise EngineError("event times decrease")
            last = ev.time
            i, j = ev.participant_ids
            for s in (i, j):
                if s in seen_dead:
                    raise EngineError(f"particle {s} referenced after its death")
                if r["birth_time"][s] > ev.time:
                    raise EngineError(f"particle {s} referenced before its birth")
                pos = r["birth_pos"][s] + r["vel"][s] * (ev.time - r["birth_time"][s])
                if abs(pos - ev.position) > 1e-9 * span:
                    raise EngineError(f"particle {s} is not at the collision point")
            vi, vj = int(r["vel"][i]), int(r["vel"][j])
            if vi <= vj:
                raise EngineError("collision between non-approaching particles")
            for s in (i, j):
                if r["death_time"][s] == ev.time and r["partner"][s] in (i, j) and r["death_kind"][s] == ev.kind:
                    seen_dead.add(s)


def _reaction_seed(config: Configuration, stream) -> tuple[int, object]:
    if stream is None:
        seed = config.config.seed if config.config is not None else 0
        return KeyedStream(seed).reaction_seed, None
    if isinstance(stream, KeyedStream):
        return stream.reaction_seed, None
    return 0, stream


def evolve_config(config: Configuration, params: ReactionParams, stream=None, record: bool = True,
                  backend: Optional[str] = None) -> dict:
    seed, custom = _reaction_seed(config, stream)
    if custom is not None:
        evolve = _backend.evolve_python
    elif backend is None:
        evolve = _backend.evolve
    else:
        evolve = _backend.evolve_with(backend)
    return evolve(config.positions, config.velocities, config.keys, seed, params.a, params.b,
                  params.alpha, params.beta, record, custom)


def run(config: Configuration, params: ReactionParams, stream=None, *, side: Optional[Side] = None,
        backend: Optional[str] = None) -> Trace:
    """Simulate ``config`` to completion.

    ``stream`` defaults to keyed randomness seeded by the configuration's seed;
    any object with ``uniform(key_left, key_right)`` may be passed instead.
    """
    if side is None:
        if config.config is not None:
            side = config.config.side
        elif len(config) and config.positions[0] <= 0:
            side = Side.TWO_SIDED
        else:
            side = Side.RIGHT_HALF_LINE
    side = Side(side)
    if len(config) and np.any(np.diff(config.positions) <= 0):
        raise MisuseError("configuration positions must be strictly increasing")
    if side is Side.RIGHT_HALF_LINE and len(config) and config.positions[0] <= 0:
        raise MisuseError("right-half-line configurations live on (0, inf)")
    raw = evolve_config(config, params, stream, record=True, backend=backend)
    return Trace(config, params, side, raw)


def _density_is_one(config: Configuration) -> bool:
    return config.config is not None and config.config.p >= 1.0


def origin_outcome(trace: Trace, shield_depth: Optional[float] = None) -> OriginOutcome:
    if trace.side is not Side.RIGHT_HALF_LINE:
        raise MisuseError("origin_outcome is defined for right-half-line traces only")
    visits = trace.visit_times()
    if len(visits):
        if visits[0] > trace.window_edge:
            raise EngineError("visit outside the light cone")
        return OriginOutcome(OriginStatus.VISITED_CERTIFIED, float(visits[0]))
    if shield_depth is None:
        shield_depth = default_shield_depth(trace.n_original, trace.params)
    alive = trace.alive_mask
    shield = int(np.count_nonzero(alive & (trace.raw["vel"][: trace.n_slots] == BLOCKADE)))
    if _density_is_one(trace.config) or shield >= shield_depth:
        return OriginOutcome(OriginStatus.NOT_VISITED_CERTIFIED)
    return OriginOutcome(OriginStatus.UNCERTAIN)


def run_restricted(config: Configuration, params: ReactionParams, u: float, from_right: bool,
                   stream=None, backend: Optional[str] = None) -> np.ndarray:
    """Visit times of ``u`` in the system restricted to one side of ``u``."""
    if from_right:
        sub = config.restrict(lo=u)
        sub = Configuration(sub.positions - u, sub.velocities, sub.keys, sub.config)
    else:
        sub = config.restrict(hi=u).mirrored(about=u)
        sub = Configuration(sub.positions - u, sub.velocities, sub.keys, sub.config)
    if not len(sub):
        return np.empty(0)
    raw = evolve_config(sub, params, stream, record=False, backend=backend)
    n = int(raw["n_slots"])
    m = (raw["death_kind"][:n] == 0) & (raw["vel"][:n] == LEFT)
    return np.sort(raw["birth_pos"][:n][m])


class VisitSide(str, enum.Enum):
    FROM_RIGHT = "right"
    FROM_LEFT = "left"


def visit_sequence(trace: Trace, u: float, side: VisitSide | str = VisitSide.FROM_RIGHT, stream=None) -> VisitSequence:
    """Times at which ``u`` is visited by particles started on one side of it.

    The visits are computed in a fresh run restricted to that side's particles.
    """
    side = VisitSide(side)
    times = run_restricted(trace.config, trace.params, u, side is VisitSide.FROM_RIGHT, stream)
    times = tuple(float(t) for t in times)
    if side is VisitSide.FROM_RIGHT:
        return VisitSequence(u, from_right_times=times)
    return VisitSequence(u, from_left_times=times)


@dataclass(frozen=True)
class TrialRecord:
    """Per-trial summary used by the estimators (one-sided runs)."""

    first_vel: int
    n_visits: int
    first_visit: float
    visits: np.ndarray
    uncertain: bool
    r1_fate: int
    b1_first_right: int
    shield: int
    window_edge: float


def trial_record(raw: dict, positions: np.ndarray, velocities: np.ndarray, shield_depth: float,
                 density_one: bool, k_max: int = 0) -> TrialRecord:
    n_slots = int(raw["n_slots"])
    alive = raw["death_kind"][:n_slots] == 0
    vel = raw["vel"][:n_slots]
    visits = np.sort(raw["birth_pos"][:n_slots][alive & (vel == LEFT)])
    shield = int(np.count_nonzero(alive & (vel == BLOCKADE)))
    n_visits = len(visits)
    first_vel = int(velocities[0]) if len(velocities) else 0
    fate = right_arrow_fate(raw, 0) if first_vel == RIGHT else FATE_NONE
    b1 = int(raw["first_right"][0]) if first_vel == BLOCKADE else 0
    uncertain = n_visits == 0 and not density_one and shield < shield_depth
    return TrialRecord(first_vel, n_visits, float(visits[0]) if n_visits else math.inf, visits[:k_max],
                       uncertain, fate, b1, shield, float(positions[-1]) if len(positions) else 0.0)


def classify_trial(trace: Trace, shield_depth: Optional[float] = None) -> frozenset[Flag]:
    if trace.side is not Side.RIGHT_HALF_LINE:
        raise MisuseError("classify_trial is defined for right-half-line traces only")
    if shield_depth is None:
        shield_depth = default_shield_depth(trace.n_original, trace.params)
    rec = trial_record(trace.raw, trace.config.positions, trace.config.velocities, shield_depth,
                       _density_is_one(trace.config))
    return flags_of(rec)


def flags_of(rec: TrialRecord) -> frozenset[Flag]:
    flags = set()
    flags.add({LEFT: Flag.FIRST_LEFT, BLOCKADE: Flag.FIRST_BLOCKADE, RIGHT: Flag.FIRST_RIGHT}[rec.first_vel])
    visited = rec.n_visits > 0
    if visited:
        flags.add(Flag.VISITED)
    if rec.uncertain:
        flags.add(Flag.UNCERTAIN)
    fate = rec.r1_fate
    flags |= {
        FATE_ALIVE: {Flag.R1_SURVIVED},
        FATE_BY_LEFT: {Flag.R1_KILLED_BY_LEFT_ARROW},
        FATE_COALESCE: {Flag.R1_COALESCED, Flag.PHAT_EVENT},
        FATE_MUTUAL_ARROW: {Flag.R1_MUTUAL_ARROW},
        FATE_WEAK_ORIGINAL: {Flag.R1_KILLED_BY_ORIGINAL_BLOCKADE, Flag.R1_WEAK_DEATH},
        FATE_MUTUAL_ORIGINAL: {Flag.R1_KILLED_BY_ORIGINAL_BLOCKADE, Flag.R1_MUTUAL_BLOCKADE},
        FATE_WEAK_GENERATED: {Flag.R1_KILLED_BY_GENERATED_BLOCKADE, Flag.R1_WEAK_DEATH},
        FATE_MUTUAL_GENERATED: {Flag.R1_KILLED_BY_GENERATED_BLOCKADE, Flag.R1_MUTUAL_BLOCKADE},
    }.get(fate, set())
    if fate in FATES_BY_BLOCKADE:
        flags.add(Flag.S_EVENT if visited else Flag.R_EVENT)
    return frozenset(flags)


def blockade_survival_counts(raw: dict, positions: np.ndarray, velocities: np.ndarray,
                             central_fraction: float) -> tuple[int, int]:
    if not 0 < central_fraction <= 1:
        raise MisuseError("central_fraction must lie in (0, 1]")
    n = len(positions)
    if n == 0:
        return 0, 0
    lo, hi = float(positions[0]), float(positions[-1])
    mid, half = (lo + hi) / 2.0, central_fraction * (hi - lo) / 2.0
    window = (positions >= mid - half) & (positions <= mid + half) & (velocities == BLOCKADE)
    survived = window & (raw["death_kind"][:n] == 0)
    return int(np.count_nonzero(survived)), int(np.count_nonzero(window))


def blockade_survival(trace: Trace, central_fraction: float) -> tuple[int, int]:
    """(surviving, total) original blockades whose start lies in the central window."""
    if trace.side is not Side.TWO_SIDED:
        raise MisuseError("blockade_survival expects a two-sided trace")
    return blockade_survival_counts(trace.raw, trace.config.positions, trace.config.velocities, central_fraction)
