"""Pure-Python event-driven kernel (reference implementation and fallback).

Alive particles form a doubly-linked list in spatial order. Candidate
collisions between adjacent approaching pairs sit in a heap keyed by
``(time, position, left slot)``; stale entries are discarded on pop.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from .rng import MASK64, child_key, pair_uniform

MUTUAL = 1
LEFT_ARROW_SURVIVES = 2
RIGHT_ARROW_SURVIVES = 3
WEAK_FROM_LEFT = 4
WEAK_FROM_RIGHT = 5
COALESCE = 6

HIT_STRONG = 1
HIT_WEAK = 2
HIT_MUTUAL = 3


def _allocate(n: int, record: bool) -> dict:
    cap = n + n // 2 + 1
    out = {
        "vel": np.zeros(cap, np.int8),
        "generated": np.zeros(cap, np.bool_),
        "birth_pos": np.zeros(cap, np.float64),
        "birth_time": np.zeros(cap, np.float64),
        "death_time": np.full(cap, np.inf),
        "death_pos": np.full(cap, np.nan),
        "death_kind": np.zeros(cap, np.int8),
        "partner": np.full(cap, -1, np.int64),
        "weak_left": np.zeros(cap, np.int32),
        "weak_right": np.zeros(cap, np.int32),
        "first_left": np.zeros(cap, np.int8),
        "first_right": np.zeros(cap, np.int8),
        "parent_left": np.full(cap, -1, np.int64),
        "parent_right": np.full(cap, -1, np.int64),
    }
    ecap = n if record else 0
    out.update({
        "ev_time": np.zeros(ecap, np.float64),
        "ev_pos": np.zeros(ecap, np.float64),
        "ev_kind": np.zeros(ecap, np.int8),
        "ev_left": np.zeros(ecap, np.int64),
        "ev_right": np.zeros(ecap, np.int64),
        "ev_created": np.zeros(ecap, np.int64),
    })
    return out


def evolve(positions, velocities, keys, reaction_seed, a, b, alpha, beta, record=True, stream=None) -> dict:
    """Run the dynamics of a finite configuration until no pair approaches.

    ``stream`` optionally overrides the keyed collision randomness with any
    object exposing ``uniform(key_left, key_right)``.
    """
    n = len(positions)
    out = _allocate(n, record)
    vel = [int(v) for v in velocities]
    inter = [float(x) for x in positions]  # position(t) = inter + vel * t
    key = [int(k) & MASK64 for k in np.asarray(keys).astype(np.int64).view(np.uint64)]
    alive = [True] * n
    left = list(range(-1, n - 1))
    right = list(range(1, n + 1))
    if n:
        right[-1] = -1
    out["vel"][:n] = velocities
    out["birth_pos"][:n] = positions
    first_left = out["first_left"]
    first_right = out["first_right"]
    weak_left = out["weak_left"]
    weak_right = out["weak_right"]
    seed = int(reaction_seed) & MASK64
    t_a, t_ab, t_al, t_alb = a / 2.0, a, a + b, alpha + beta

    heap: list = []

    def schedule(i: int, j: int, now: float) -> None:
        vi, vj = vel[i], vel[j]
        if vi <= vj:
            return
        t = (inter[j] - inter[i]) / (vi - vj)
        if t < now:
            t = now
        heapq.heappush(heap, (t, inter[i] + vi * t, i, j))

    for i in range(n - 1):
        schedule(i, i + 1, 0.0)

    n_slots = n
    n_events = 0

    def kill(s: int, t: float, x: float, kind: int, other: int) -> None:
        alive[s] = False
        out["death_time"][s] = t
        out["death_pos"][s] = x
        out["death_kind"][s] = kind
        out["partner"][s] = other
        ls, rs = left[s], right[s]
        if ls >= 0:
            right[ls] = rs
        if rs >= 0:
            left[rs] = ls

    while heap:
        t, x, i, j = heapq.heappop(heap)
        if not (alive[i] and alive[j] and right[i] == j):
            continue
        if stream is None:
            u = pair_uniform(seed, key[i], key[j])
        else:
            u = stream.uniform(key[i], key[j])
        vi, vj = vel[i], vel[j]
        created = -1
        if vi == 1 and vj == -1:
            if u < t_a:
                kind = LEFT_ARROW_SURVIVES
                kill(i, t, x, kind, j)
                if left[j] >= 0:
                    schedule(left[j], j, t)
            elif u < t_ab:
                kind = RIGHT_ARROW_SURVIVES
                kill(j, t, x, kind, i)
                if right[i] >= 0:
                    schedule(i, right[i], t)
            elif u < t_al:
                kind = COALESCE
                g = n_slots
                n_slots += 1
                created = g
                lo, hi = left[i], right[j]
                kill(i, t, x, kind, j)
                kill(j, t, x, kind, i)
                vel.append(0)
                inter.append(x)
                key.append(child_key(key[i], key[j]))
                alive.append(True)
                left.append(lo)
                right.append(hi)
                if lo >= 0:
                    right[lo] = g
                if hi >= 0:
                    left[hi] = g
                out["vel"][g] = 0
                out["generated"][g] = True
                out["birth_pos"][g] = x
                out["birth_time"][g] = t
                out["parent_left"][g] = i
                out["parent_right"][g] = j
                if lo >= 0:
                    schedule(lo, g, t)
                if hi >= 0:
                    schedule(g, hi, t)
            else:
                kind = MUTUAL
                lo, hi = left[i], right[j]
                kill(i, t, x, kind, j)
                kill(j, t, x, kind, i)
                if lo >= 0 and hi >= 0:
                    schedule(lo, hi, t)
        elif vi == 1:
            # right arrow i meets blockade j from the left
            if u < alpha:
                kind, hit = RIGHT_ARROW_SURVIVES, HIT_STRONG
                kill(j, t, x, kind, i)
                if right[i] >= 0:
                    schedule(i, right[i], t)
            elif u < t_alb:
                kind, hit = WEAK_FROM_LEFT, HIT_WEAK
                weak_left[j] += 1
                kill(i, t, x, kind, j)
                if left[j] >= 0:
                    schedule(left[j], j, t)
            else:
                kind, hit = MUTUAL, HIT_MUTUAL
                lo, hi = left[i], right[j]
                kill(i, t, x, kind, j)
                kill(j, t, x, kind, i)
                if lo >= 0 and hi >= 0:
                    schedule(lo, hi, t)
            if first_left[j] == 0:
                first_left[j] = hit
        else:
            # blockade i is hit by left arrow j from the right
            if u < alpha:
                kind, hit = LEFT_ARROW_SURVIVES, HIT_STRONG
                kill(i, t, x, kind, j)
                if left[j] >= 0:
                    schedule(left[j], j, t)
            elif u < t_alb:
                kind, hit = WEAK_FROM_RIGHT, HIT_WEAK
                weak_right[i] += 1
                kill(j, t, x, kind, i)
                if right[i] >= 0:
                    schedule(i, right[i], t)
            else:
                kind, hit = MUTUAL, HIT_MUTUAL
                lo, hi = left[i], right[j]
                kill(i, t, x, kind, j)
                kill(j, t, x, kind, i)
                if lo >= 0 and hi >= 0:
                    schedule(lo, hi, t)
            if first_right[i] == 0:
                first_right[i] = hit
        if record:
            out["ev_time"][n_events] = t
            out["ev_pos"][n_events] = x
            out["ev_kind"][n_events] = kind
            out["ev_left"][n_events] = i
            out["ev_right"][n_events] = j
            out["ev_created"][n_events] = created
        n_events += 1

    out["n_slots"] = n_slots
    out["n_events"] = n_events
    return out
