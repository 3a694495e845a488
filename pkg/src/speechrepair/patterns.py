"""Incremental construction of candidate repair patterns.

A pattern accumulates, one word at a time, the pieces of a potential
repair: a word fragment, a run of editing terms, and word
correspondences (matches and same-category replacements) between the
removed and resumed text.  Additions are policed by ten well-formedness
rules; conflicts are resolved in favor of the most recent pair of words.

Positions are original token indices within one turn. Tokens deleted by
earlier accepted repairs are deactivated, so all distance counts run
over the corrected stream.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

from .corpus import Token

RULE_ET_ADJACENT = 1
RULE_ET_AT_GAP = 2
RULE_FRAGMENT_AT_GAP = 3
RULE_STRADDLE = 4
RULE_CROSS_SERIAL = 5
RULE_FIRST_DISTANCE = 6
RULE_REMOVED_GAP = 7
RULE_RESUMED_GAP = 8
RULE_DROPPED_WORDS = 9
RULE_LONE_REPLACEMENT = 10


class CorrKind(enum.Enum):
    MATCH = "m"
    REPLACEMENT = "r"


class PatternStatus(enum.Enum):
    BUILDING = "building"
    JUDGEABLE = "judgeable"
    REJECTED = "rejected"


class Judgement(enum.Enum):
    NOT_A_REPAIR = "not_a_repair"
    JUDGEABLE = "judgeable"
    STILL_BUILDING = "still_building"


@dataclass(frozen=True)
class Correspondence:
    kind: CorrKind
    left_pos: int
    right_pos: int
    pair_index: int = 0

    def __post_init__(self):
        if self.left_pos >= self.right_pos:
            raise ValueError("correspondence must run left to right")


class ClueKind(enum.Enum):
    FRAGMENT = "fragment"
    EDITING_TERM = "editing_term"
    DOUBLE_MATCH = "double_match"
    SINGLE_MATCH = "single_match"
    ADJACENT_REPLACEMENT = "adjacent_replacement"


CLUE_PRIORITY = {
    ClueKind.FRAGMENT: 0,
    ClueKind.EDITING_TERM: 1,
    ClueKind.DOUBLE_MATCH: 2,
    ClueKind.SINGLE_MATCH: 3,
    ClueKind.ADJACENT_REPLACEMENT: 4,
}


@dataclass(frozen=True)
class Clue:
    kind: ClueKind
    anchors: tuple[int, ...]


@dataclass
class RepairPattern:
    """A candidate repair under construction (mutable until flushed)."""

    correspondences: list[Correspondence] = field(default_factory=list)
    editing_range: Optional[tuple[int, int]] = None
    fragment: Optional[int] = None
    interruption_gap: Optional[int] = None
    status: PatternStatus = PatternStatus.BUILDING
    _next_pair_index: int = 1

    @property
    def lefts(self) -> list[int]:
        return sorted(c.left_pos for c in self.correspondences)

    @property
    def rights(self) -> list[int]:
        return sorted(c.right_pos for c in self.correspondences)

    @property
    def et_start(self) -> Optional[int]:
        return None if self.editing_range is None else self.editing_range[0]

    @property
    def et_end_pos(self) -> Optional[int]:
        return None if self.editing_range is None else self.editing_range[1]

    def in_editing_range(self, pos: int) -> bool:
        return self.editing_range is not None and self.editing_range[0] <= pos < self.editing_range[1]

    def occupies(self, pos: int) -> bool:
        if self.fragment == pos or self.in_editing_range(pos):
            return True
        return any(pos in (c.left_pos, c.right_pos) for c in self.correspondences)

    @property
    def start_pos(self) -> Optional[int]:
        """Leftmost token belonging to the repair."""
        if self.correspondences:
            return min(c.left_pos for c in self.correspondences)
        if self.fragment is not None:
            return self.fragment
        return self.et_start

    def known_gap(self) -> Optional[int]:
        """Interruption gap when pinned by a fragment or editing terms."""
        if self.fragment is not None:
            return self.fragment + 1
        if self.editing_range is not None:
            return self.editing_range[0]
        return None

    def resolved_gap(self) -> int:
        if self.interruption_gap is not None:
            return self.interruption_gap
        gap = self.known_gap()
        if gap is None:
            if not self.correspondences:
                raise ValueError("pattern has no interruption point yet")
            gap = max(c.left_pos for c in self.correspondences) + 1
        return gap


class TurnContext:
    """Shared view of one turn for the builder: tokens, liveness, categories.

    ``category_of`` maps a position to the context-free likely category
    used for replacement candidacy.
    """

    def __init__(
        self,
        tokens: Sequence[Token],
        *,
        filled_pauses: Sequence[str],
        cue_phrases: Sequence[str],
        category_of: Callable[[int], object],
        history_window: int = 10,
        single_match_max_gap: int = 3,
        double_match_max_gap: int = 6,
        removed_gap_max: int = 4,
        resumed_gap_max: int = 4,
    ):
        self.tokens = list(tokens)
        self.active = [True] * len(tokens)
        self.filled_pauses = frozenset(filled_pauses)
        self.cue_phrases = tuple(
            tuple(p.split()) for p in sorted(cue_phrases, key=lambda p: -len(p.split()))
        )
        self.category_of = category_of
        self.history_window = history_window
        self.single_match_max_gap = single_match_max_gap
        self.double_match_max_gap = double_match_max_gap
        self.removed_gap_max = removed_gap_max
        self.resumed_gap_max = resumed_gap_max

    def word(self, pos: int) -> str:
        return self.tokens[pos].surface

    def is_fragment(self, pos: int) -> bool:
        return self.tokens[pos].is_fragment

    def is_filled_pause(self, pos: int) -> bool:
        return self.word(pos) in self.filled_pauses

    def deactivate(self, positions: Iterable[int]) -> None:
        for pos in positions:
            self.active[pos] = False

    def active_between(self, lo: int, hi: int) -> list[int]:
        return [p for p in range(lo + 1, hi) if self.active[p]]

    def raw_count_between(self, lo: int, hi: int) -> int:
        return len(self.active_between(lo, hi))

    def content_count_between(
        self, lo: int, hi: int, pattern: Optional[RepairPattern] = None
    ) -> int:
        """Active tokens strictly between, excluding fragments and editing
        terms (the pattern's marked run plus filled-pause words)."""
        count = 0
        for p in self.active_between(lo, hi):
            if self.is_fragment(p) or self.is_filled_pause(p):
                continue
            if pattern is not None and pattern.in_editing_range(p):
                continue
            count += 1
        return count

    def recent_active(self, before: int, limit: Optional[int] = None) -> list[int]:
        """Active positions strictly before ``before``, most recent first,
        capped at the history window."""
        if limit is None:
            limit = self.history_window
        out = []
        pos = before - 1
        while pos >= 0 and len(out) < limit:
            if self.active[pos]:
                out.append(pos)
            pos -= 1
        return out

    def corr_candidate(self, pos: int) -> bool:
        """Whether a token may take part in a correspondence at all."""
        return self.active[pos] and not self.is_fragment(pos) and not self.is_filled_pause(pos)


# ---------------------------------------------------------------------------
# Trace events


@dataclass(frozen=True)
class ClueEvent:
    pos: int
    clue: Clue


@dataclass(frozen=True)
class CorrEvent:
    """One attempted correspondence: accepted (rule None) or rejected."""

    corr: Correspondence
    rule: Optional[int]
    from_clue: bool = False

    @property
    def accepted(self) -> bool:
        return self.rule is None


@dataclass(frozen=True)
class MarkEvent:
    kind: str  # "fragment" | "editing_terms" | "start" | "flush"
    detail: tuple


Trace = list


# ---------------------------------------------------------------------------
# Clue detection


def _cue_phrase_end(ctx: TurnContext, pos: int) -> Optional[int]:
    """Start position of the longest cue phrase ending at ``pos``."""
    for phrase in ctx.cue_phrases:
        k = len(phrase)
        span = []
        p = pos
        while p >= 0 and len(span) < k:
            if ctx.active[p]:
                span.append(p)
            p -= 1
        if len(span) < k:
            continue
        span.reverse()
        if tuple(ctx.word(q) for q in span) == phrase:
            return span[0]
    return None


def detect_clues(
    ctx: TurnContext, pos: int, pattern: Optional[RepairPattern] = None
) -> list[Clue]:
    """All detection clues anchored at the current token, strongest first."""
    clues: list[Clue] = []
    word = ctx.word(pos)

    if ctx.is_fragment(pos):
        clues.append(Clue(ClueKind.FRAGMENT, (pos,)))

    if ctx.is_filled_pause(pos):
        clues.append(Clue(ClueKind.EDITING_TERM, (pos, pos + 1)))
    else:
        start = _cue_phrase_end(ctx, pos)
        if start is not None:
            clues.append(Clue(ClueKind.EDITING_TERM, (start, pos + 1)))

    if ctx.corr_candidate(pos):
        history = [p for p in ctx.recent_active(pos) if ctx.corr_candidate(p)]

        def usable(left: int, right: int) -> bool:
            """Free of the current pattern, or already paired exactly so."""
            if pattern is None:
                return True
            if any(
                (c.left_pos, c.right_pos) == (left, right)
                for c in pattern.correspondences
            ):
                return True
            return not (pattern.occupies(left) or pattern.occupies(right))

        # Nearest content word to the left; "adjacent" means nothing but
        # fragments and editing terms in between.
        prev = next(
            (p for p in history if ctx.content_count_between(p, pos, pattern) == 0),
            None,
        )

        if prev is not None and ctx.word(prev) != word:
            for b in history:
                if b >= prev or ctx.word(b) != word:
                    continue
                a = next(
                    (
                        p
                        for p in history
                        if p < b and ctx.content_count_between(p, b, pattern) == 0
                    ),
                    None,
                )
                if (
                    a is not None
                    and ctx.word(a) == ctx.word(prev)
                    and usable(a, prev)
                    and usable(b, pos)
                    and ctx.content_count_between(b, prev, pattern)
                    <= ctx.double_match_max_gap
                ):
                    clues.append(Clue(ClueKind.DOUBLE_MATCH, (a, b, prev, pos)))

        for l in history:
            if (
                ctx.word(l) == word
                and usable(l, pos)
                and ctx.content_count_between(l, pos, pattern) <= ctx.single_match_max_gap
            ):
                clues.append(Clue(ClueKind.SINGLE_MATCH, (l, pos)))

        if (
            prev is not None
            and ctx.word(prev) != word
            and usable(prev, pos)
            and ctx.category_of(prev) == ctx.category_of(pos)
        ):
            clues.append(Clue(ClueKind.ADJACENT_REPLACEMENT, (prev, pos)))

    clues.sort(key=lambda c: CLUE_PRIORITY[c.kind])
    return clues


# ---------------------------------------------------------------------------
# Rule checking and correspondence addition


def _rule_violation(
    pattern: RepairPattern,
    corr: Correspondence,
    ctx: TurnContext,
    from_clue: bool,
) -> Optional[int]:
    l, r = corr.left_pos, corr.right_pos

    # Rule 4: straddle the interruption point, never on fragments or
    # editing terms.
    if not ctx.corr_candidate(l) or not ctx.corr_candidate(r):
        return RULE_STRADDLE
    if pattern.occupies(l) or pattern.occupies(r):
        return RULE_STRADDLE
    gap = pattern.known_gap()
    if gap is not None:
        et_end = pattern.et_end_pos if pattern.editing_range is not None else gap
        if not (l < gap <= r and r >= et_end):
            return RULE_STRADDLE
    else:
        lefts = pattern.lefts + [l]
        rights = pattern.rights + [r]
        if max(lefts) >= min(rights):
            return RULE_STRADDLE

    # Rule 5: cross-serial only.
    for other in pattern.correspondences:
        if (other.left_pos < l) != (other.right_pos < r):
            return RULE_CROSS_SERIAL

    # Rule 6: a first correspondence must be close by.  Correspondences
    # proposed by a detection clue are their own detection evidence and
    # bypass this, which is what lets the wider double-match clue work.
    if not pattern.correspondences and not from_clue:
        if ctx.content_count_between(l, r, pattern) > ctx.single_match_max_gap:
            return RULE_FIRST_DISTANCE

    # Rules 7-9: distances between adjacent correspondences.
    pairs = sorted(pattern.correspondences + [corr], key=lambda c: c.left_pos)
    for a, b in zip(pairs, pairs[1:]):
        x = ctx.raw_count_between(a.left_pos, b.left_pos)
        y = ctx.raw_count_between(a.right_pos, b.right_pos)
        if x > ctx.removed_gap_max:
            return RULE_REMOVED_GAP
        if y > ctx.resumed_gap_max:
            return RULE_RESUMED_GAP
        if x > y + 1:
            return RULE_DROPPED_WORDS

    # Rule 10: replacements must be anchored, unless a clue proposed them.
    if corr.kind is CorrKind.REPLACEMENT and not from_clue:
        if ctx.content_count_between(l, r, pattern) != 0:
            idx = pairs.index(corr)
            anchored = False
            for neighbor in (pairs[idx - 1] if idx > 0 else None, pairs[idx + 1] if idx + 1 < len(pairs) else None):
                if neighbor is None:
                    continue
                lo, hi = sorted((neighbor.left_pos, corr.left_pos))
                x = ctx.raw_count_between(lo, hi)
                lo, hi = sorted((neighbor.right_pos, corr.right_pos))
                y = ctx.raw_count_between(lo, hi)
                if x == 0 and y == 0:
                    anchored = True
            if not anchored:
                return RULE_LONE_REPLACEMENT

    return None


def try_add(
    pattern: RepairPattern,
    corr: Correspondence,
    ctx: TurnContext,
    from_clue: bool = False,
) -> Optional[int]:
    """Add a correspondence if no rule forbids it.

    Returns None on acceptance (the pattern is updated in place) or the
    lowest violated rule id as a diagnostic.
    """
    if pattern.status is not PatternStatus.BUILDING:
        raise ValueError("cannot extend a pattern that has been judged")
    rule = _rule_violation(pattern, corr, ctx, from_clue)
    if rule is not None:
        return rule
    stamped = replace(corr, pair_index=pattern._next_pair_index)
    pattern._next_pair_index += 1
    pattern.correspondences.append(stamped)
    return None


def prefer(a: Correspondence, b: Correspondence) -> Correspondence:
    """Of two addable but conflicting candidates, keep the most recent."""
    if (a.right_pos, a.left_pos) >= (b.right_pos, b.left_pos):
        return a
    return b


def _candidate_corrs(
    pattern: RepairPattern, ctx: TurnContext, upto: int
) -> list[Correspondence]:
    """Match then replacement candidates for the current pattern, most
    recent first, over tokens seen so far (positions <= ``upto``)."""
    gap = pattern.known_gap()
    lefts_bound = gap if gap is not None else (min(pattern.rights) if pattern.correspondences else upto + 1)
    right_lo = pattern.et_end_pos if pattern.editing_range is not None else (
        gap if gap is not None else (max(pattern.lefts) + 1 if pattern.correspondences else 0)
    )

    left_candidates = [
        p
        for p in ctx.recent_active(lefts_bound)
        if ctx.corr_candidate(p) and not pattern.occupies(p)
    ]
    right_candidates = [
        p
        for p in range(right_lo, upto + 1)
        if ctx.corr_candidate(p) and not pattern.occupies(p)
    ]
    right_candidates.reverse()

    matches = []
    replacements = []
    for r in right_candidates:
        for l in left_candidates:
            if l >= r:
                continue
            if ctx.word(l) == ctx.word(r):
                matches.append(Correspondence(CorrKind.MATCH, l, r))
            elif ctx.category_of(l) == ctx.category_of(r):
                replacements.append(Correspondence(CorrKind.REPLACEMENT, l, r))
    return matches + replacements


def sanctioned_search(
    pattern: RepairPattern,
    ctx: TurnContext,
    upto: int,
    trace: Optional[list] = None,
) -> RepairPattern:
    """Fixed point: keep adding sanctioned correspondences while any fits.

    Candidates are evaluated matches first in recency order; among the
    addable ones the most recent pair wins each round.
    """
    while True:
        addable: list[Correspondence] = []
        for cand in _candidate_corrs(pattern, ctx, upto):
            rule = _rule_violation(pattern, cand, ctx, from_clue=False)
            if rule is None:
                addable.append(cand)
            elif trace is not None:
                trace.append(CorrEvent(cand, rule))
        if not addable:
            return pattern
        best = addable[0]
        for cand in addable[1:]:
            best = prefer(best, cand)
        result = try_add(pattern, best, ctx, from_clue=False)
        assert result is None
        if trace is not None:
            trace.append(CorrEvent(best, None))


# ---------------------------------------------------------------------------
# Judging and correction


def _unaccounted_between_corrs(pattern: RepairPattern, ctx: TurnContext) -> int:
    lefts, rights = pattern.lefts, pattern.rights
    count = 0
    for p in ctx.active_between(max(lefts), min(rights)):
        if ctx.is_fragment(p) or pattern.in_editing_range(p):
            continue
        count += 1
    return count


def strongly_complete(pattern: RepairPattern, ctx: TurnContext) -> bool:
    """A correspondence pins the interruption point and every word
    between the pattern's innermost pair is accounted for."""
    if not pattern.correspondences:
        return False
    return _unaccounted_between_corrs(pattern, ctx) == 0


def judge_locally(pattern: RepairPattern, ctx: TurnContext) -> Judgement:
    """Classify a flushed pattern: discardable, judgeable, or incomplete."""
    has_pause = False
    if pattern.editing_range is not None:
        for p in range(*pattern.editing_range):
            if ctx.active[p] and ctx.is_filled_pause(p):
                has_pause = True
    if (
        not pattern.correspondences
        and pattern.fragment is None
        and pattern.editing_range is not None
        and not has_pause
    ):
        return Judgement.NOT_A_REPAIR
    if pattern.fragment is not None or pattern.editing_range is not None:
        return Judgement.JUDGEABLE
    if pattern.correspondences and _unaccounted_between_corrs(pattern, ctx) == 0:
        return Judgement.JUDGEABLE
    return Judgement.STILL_BUILDING


def removed_start(pattern: RepairPattern) -> int:
    if pattern.correspondences:
        return min(pattern.lefts)
    if pattern.fragment is not None:
        return pattern.fragment
    return pattern.resolved_gap()


def pattern_letters(pattern: RepairPattern, ctx: TurnContext) -> str:
    """Pattern string of a built pattern, e.g. ``mm-.emm``."""
    gap = pattern.resolved_gap()
    start = removed_start(pattern)
    et_end = pattern.et_end_pos if pattern.editing_range is not None else gap
    resumed_end = (max(pattern.rights) + 1) if pattern.correspondences else et_end

    kind_at = {}
    for corr in pattern.correspondences:
        kind_at[corr.left_pos] = corr.kind.value
        kind_at[corr.right_pos] = corr.kind.value

    def letter(p: int) -> str:
        if ctx.is_fragment(p):
            return "-"
        if pattern.in_editing_range(p):
            return "e"
        return kind_at.get(p, "x")

    out = [letter(p) for p in range(start, gap) if ctx.active[p]]
    out.append(".")
    out.extend(letter(p) for p in range(gap, et_end) if ctx.active[p])
    out.extend(letter(p) for p in range(et_end, resumed_end) if ctx.active[p])
    return "".join(out)


def is_repetition(pattern: RepairPattern, ctx: TurnContext) -> bool:
    """Word repetitions: all-match patterns with nothing unaccounted.

    Fragments and editing terms are immaterial (the pattern string,
    stripped of ``e`` and ``-``, must look like m+.m+).
    """
    if not pattern.correspondences:
        return False
    if any(c.kind is not CorrKind.MATCH for c in pattern.correspondences):
        return False
    stripped = pattern_letters(pattern, ctx).replace("e", "").replace("-", "")
    left, _, right = stripped.partition(".")
    return bool(left) and left == right and set(left) == {"m"}


def derive_correction(
    pattern: RepairPattern, ctx: TurnContext, abridged_only: bool = False
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Original-index sets to delete: (removed text, editing terms).

    With ``abridged_only`` the pattern is downgraded to its fragment and
    editing terms (the rejection fallback for patterns that still carry
    a fragment or filled pause).
    """
    gap = pattern.resolved_gap()
    if abridged_only:
        start = pattern.fragment if pattern.fragment is not None else gap
    else:
        start = removed_start(pattern)
    et = pattern.editing_range or (gap, gap)
    removed = tuple(p for p in range(start, gap) if ctx.active[p])
    editing = tuple(p for p in range(*et) if ctx.active[p])
    return removed, editing


def pattern_from_gold(turn, repair) -> RepairPattern:
    """Reconstruct a RepairPattern from a gold annotation, for replaying
    hand- or machine-annotated repairs through the rule validator."""
    from .corpus import LabelKind  # local import avoids a cycle at module load

    gap = repair.interruption_gap
    pattern = RepairPattern()
    if repair.editing_span[0] != repair.editing_span[1]:
        pattern.editing_range = repair.editing_span
    if gap > 0 and turn.tokens[gap - 1].is_fragment:
        pattern.fragment = gap - 1
    pairs: dict[tuple, list[int]] = {}
    lo, hi = repair.removed_span[0], repair.resumed_span[1]
    for pos in range(lo, hi):
        label = turn.labels[pos]
        if label.kind in (LabelKind.MATCH, LabelKind.REPLACEMENT):
            pairs.setdefault((label.kind, label.pair_index), []).append(pos)
    for (kind, index), members in sorted(pairs.items(), key=lambda kv: kv[1]):
        if len(members) != 2:
            continue
        corr_kind = CorrKind.MATCH if kind is LabelKind.MATCH else CorrKind.REPLACEMENT
        pattern.correspondences.append(
            Correspondence(corr_kind, members[0], members[1], index)
        )
    pattern.interruption_gap = gap
    return pattern


# ---------------------------------------------------------------------------
# Whole-pattern rule validation (used by the synthesizer oracle and tests)


def validate_pattern(pattern: RepairPattern, ctx: TurnContext) -> list[int]:
    """All rules violated by a complete pattern, in ascending order."""
    violations = []
    gap = pattern.resolved_gap()
    et = pattern.editing_range
    if et is not None:
        if not all(ctx.active[p] for p in range(*et)) or et[0] >= et[1]:
            violations.append(RULE_ET_ADJACENT)
        if et[0] != gap:
            violations.append(RULE_ET_AT_GAP)
    if pattern.fragment is not None and pattern.fragment != gap - 1:
        violations.append(RULE_FRAGMENT_AT_GAP)

    et_end = et[1] if et is not None else gap
    for corr in pattern.correspondences:
        l, r = corr.left_pos, corr.right_pos
        onto_marker = (
            ctx.is_fragment(l)
            or ctx.is_fragment(r)
            or pattern.in_editing_range(l)
            or pattern.in_editing_range(r)
        )
        if not (l < gap <= r and r >= et_end) or onto_marker:
            violations.append(RULE_STRADDLE)
            break

    pairs = sorted(pattern.correspondences, key=lambda c: c.left_pos)
    rights = [c.right_pos for c in pairs]
    if rights != sorted(rights) or len(set(rights)) != len(rights):
        violations.append(RULE_CROSS_SERIAL)

    if pairs:
        best = min(
            ctx.content_count_between(c.left_pos, c.right_pos, pattern) for c in pairs
        )
        if best > ctx.single_match_max_gap:
            violations.append(RULE_FIRST_DISTANCE)

    for a, b in zip(pairs, pairs[1:]):
        x = ctx.raw_count_between(a.left_pos, b.left_pos)
        y = ctx.raw_count_between(a.right_pos, b.right_pos)
        if x > ctx.removed_gap_max and RULE_REMOVED_GAP not in violations:
            violations.append(RULE_REMOVED_GAP)
        if y > ctx.resumed_gap_max and RULE_RESUMED_GAP not in violations:
            violations.append(RULE_RESUMED_GAP)
        if x > y + 1 and RULE_DROPPED_WORDS not in violations:
            violations.append(RULE_DROPPED_WORDS)

    for corr in pairs:
        if corr.kind is not CorrKind.REPLACEMENT:
            continue
        if ctx.content_count_between(corr.left_pos, corr.right_pos, pattern) == 0:
            continue
        idx = pairs.index(corr)
        anchored = False
        for neighbor in (
            pairs[idx - 1] if idx > 0 else None,
            pairs[idx + 1] if idx + 1 < len(pairs) else None,
        ):
            if neighbor is None:
                continue
            x = ctx.raw_count_between(*sorted((neighbor.left_pos, corr.left_pos)))
            y = ctx.raw_count_between(*sorted((neighbor.right_pos, corr.right_pos)))
            if x == 0 and y == 0:
                anchored = True
        if not anchored:
            violations.append(RULE_LONE_REPLACEMENT)
            break

    return sorted(set(violations))
