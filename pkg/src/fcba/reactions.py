"""Collision outcome tables.

Each collision consumes exactly one uniform ``u`` which is partitioned by the
cumulative probabilities in a fixed order:

* arrow-arrow: left arrow survives ``a/2``, right arrow survives ``a/2``,
  coalescence into a blockade ``b``, mutual annihilation ``c``;
* arrow-blockade: arrow survives ``alpha``, blockade survives ``beta``,
  mutual annihilation ``xi``.

The collision engines (compiled and pure Python) use the same thresholds.
"""

from __future__ import annotations

import enum

from .model import ReactionParams


class ArrowArrowOutcome(enum.IntEnum):
    LEFT_SURVIVES = 1
    RIGHT_SURVIVES = 2
    COALESCE = 3
    MUTUAL = 4


class BlockadeArrowOutcome(enum.IntEnum):
    ARROW_SURVIVES = 1
    BLOCKADE_SURVIVES = 2
    MUTUAL = 3


def arrow_arrow_outcome(params: ReactionParams, u: float) -> ArrowArrowOutcome:
    if u < params.a / 2.0:
        return ArrowArrowOutcome.LEFT_SURVIVES
    if u < params.a:
        return ArrowArrowOutcome.RIGHT_SURVIVES
    if u < params.a + params.b:
        return ArrowArrowOutcome.COALESCE
    return ArrowArrowOutcome.MUTUAL


def blockade_arrow_outcome(params: ReactionParams, u: float) -> BlockadeArrowOutcome:
    if u < params.alpha:
        return BlockadeArrowOutcome.ARROW_SURVIVES
    if u < params.alpha + params.beta:
        return BlockadeArrowOutcome.BLOCKADE_SURVIVES
    return BlockadeArrowOutcome.MUTUAL


def resolve_arrow_arrow(params: ReactionParams, stream) -> ArrowArrowOutcome:
    """Sample a right-arrow/left-arrow collision using one ``stream.random()`` draw."""
    return arrow_arrow_outcome(params, stream.random())


def resolve_blockade_arrow(params: ReactionParams, stream) -> BlockadeArrowOutcome:
    """Sample an arrow/blockade collision (either side) using one draw."""
    return blockade_arrow_outcome(params, stream.random())


def arrow_arrow_probabilities(params: ReactionParams) -> dict[ArrowArrowOutcome, float]:
    return {
        ArrowArrowOutcome.LEFT_SURVIVES: params.a / 2.0,
        ArrowArrowOutcome.RIGHT_SURVIVES: params.a / 2.0,
        ArrowArrowOutcome.COALESCE: params.b,
        ArrowArrowOutcome.MUTUAL: params.c,
    }


def blockade_arrow_probabilities(params: ReactionParams) -> dict[BlockadeArrowOutcome, float]:
    return {
        BlockadeArrowOutcome.ARROW_SURVIVES: params.alpha,
        BlockadeArrowOutcome.BLOCKADE_SURVIVES: params.beta,
        BlockadeArrowOutcome.MUTUAL: params.xi,
    }
