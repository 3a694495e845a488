"""Judge candidate modification repairs with the repair-state model.

A candidate gap is scored twice: once assuming it is the interruption
point of a modification repair and once assuming fluent speech.  Each
path is the sum of five log terms: the state prior given the category
before the gap, the category transition across the gap under that
state, and the output probabilities of the fragment, editing-term and
word-match evidence.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .patterns import CorrKind, RepairPattern, TurnContext, pattern_letters, is_repetition
from .tagger import (
    E_VALUES,
    F_VALUES,
    FLUENT_STATE,
    M_VALUES,
    REPAIR_STATE,
    TaggerModel,
    editing_class,
)


@dataclass(frozen=True)
class RepairEvidence:
    """Clue observations at a candidate gap: (F, E, M)."""

    fragment: str
    editing: str
    matches: str

    def __post_init__(self):
        if self.fragment not in F_VALUES:
            raise ValueError(f"bad fragment value {self.fragment!r}")
        if self.editing not in E_VALUES:
            raise ValueError(f"bad editing-term value {self.editing!r}")
        if self.matches not in M_VALUES:
            raise ValueError(f"bad match value {self.matches!r}")


class Verdict(enum.Enum):
    REPAIR = "repair"
    FLUENT = "fluent"


@dataclass(frozen=True)
class GapDecision:
    """Both path scores at one gap; ties go to fluent speech."""

    gap: int
    repair_terms: tuple[float, float, float, float, float]
    fluent_terms: tuple[float, float, float, float, float]

    @property
    def repair_logprob(self) -> float:
        return sum(self.repair_terms)

    @property
    def fluent_logprob(self) -> float:
        return sum(self.fluent_terms)

    @property
    def verdict(self) -> Verdict:
        if self.repair_logprob > self.fluent_logprob:
            return Verdict.REPAIR
        return Verdict.FLUENT


def evidence_from_pattern(pattern: RepairPattern, ctx: TurnContext) -> RepairEvidence:
    fragment = "present" if pattern.fragment is not None else "absent"

    editing = "none"
    if pattern.editing_range is not None:
        first = next(
            (p for p in range(*pattern.editing_range) if ctx.active[p]), None
        )
        if first is not None:
            editing = editing_class(ctx.word(first))

    kinds = {c.kind for c in pattern.correspondences}
    if not kinds:
        matches = "none"
    elif kinds == {CorrKind.MATCH}:
        pairs = sorted(pattern.correspondences, key=lambda c: c.left_pos)
        double = any(
            ctx.raw_count_between(a.left_pos, b.left_pos) == 0
            and ctx.raw_count_between(a.right_pos, b.right_pos) == 0
            for a, b in zip(pairs, pairs[1:])
        )
        matches = "double" if double else "single"
    elif kinds == {CorrKind.REPLACEMENT}:
        matches = "replacement"
    else:
        matches = "mixed"
    return RepairEvidence(fragment, editing, matches)


def score_gap(
    gap: int,
    left_tag: int,
    right_tag: Optional[int],
    evidence: RepairEvidence,
    model: TaggerModel,
) -> GapDecision:
    """Score the repair and fluent paths at one candidate gap.

    ``left_tag`` is the category of the last removed-text word and
    ``right_tag`` that of the first resumed-text word (editing terms
    skipped); a missing resumed text contributes no transition term.
    """

    def path(state: str) -> tuple[float, float, float, float, float]:
        transition = 0.0
        if right_tag is not None:
            transition = model.log_transition(left_tag, right_tag, state)
        return (
            model.log_state_prior(left_tag, state),
            transition,
            model.log_clue("F", state, evidence.fragment),
            model.log_clue("E", state, evidence.editing),
            model.log_clue("M", state, evidence.matches),
        )

    return GapDecision(gap=gap, repair_terms=path(REPAIR_STATE), fluent_terms=path(FLUENT_STATE))


class Outcome(enum.Enum):
    ACCEPT_MODIFICATION = "modification"
    ACCEPT_ABRIDGED = "abridged"
    REJECT = "reject"


@dataclass(frozen=True)
class Classification:
    outcome: Outcome
    route: str  # "outright" | "scored" | "fallback"
    decision: Optional[GapDecision] = None


def classify_candidate(
    pattern: RepairPattern,
    ctx: TurnContext,
    left_tag: Optional[int],
    right_tag: Optional[int],
    model: TaggerModel,
) -> Classification:
    """Route a judgeable pattern per the combined decision procedure.

    Abridged forms and pure word repetitions are accepted outright; the
    rest are scored.  A scored rejection that still carries a fragment
    or filled pause degrades to an abridged repair instead of being
    dropped.
    """
    if not pattern.correspondences:
        return Classification(Outcome.ACCEPT_ABRIDGED, "outright")
    if is_repetition(pattern, ctx):
        return Classification(Outcome.ACCEPT_MODIFICATION, "outright")

    if left_tag is None:
        raise ValueError("scoring a modification candidate requires context tags")
    evidence = evidence_from_pattern(pattern, ctx)
    decision = score_gap(pattern.resolved_gap(), left_tag, right_tag, evidence, model)
    if decision.verdict is Verdict.REPAIR:
        return Classification(Outcome.ACCEPT_MODIFICATION, "scored", decision)

    has_pause = pattern.editing_range is not None and any(
        ctx.active[p] and ctx.is_filled_pause(p) for p in range(*pattern.editing_range)
    )
    if pattern.fragment is not None or has_pause:
        return Classification(Outcome.ACCEPT_ABRIDGED, "fallback", decision)
    return Classification(Outcome.REJECT, "scored", decision)
