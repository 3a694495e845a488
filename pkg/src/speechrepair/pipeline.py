"""End-to-end streaming detection and correction.

Words are fed one at a time to a part-of-speech chain and the pattern
builder in lockstep.  Flushed patterns are judged locally, classified by
the statistical filter, and accepted repairs are deleted from the
stream before processing continues, so later correspondence searches
run over the corrected text.  Token positions are original indices
throughout; deleting never renumbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .config import RunConfig
from .corpus import AnnotatedTurn, RepairClass, Token, apply_freshstart_breaks
from .patterns import (
    Clue,
    ClueEvent,
    ClueKind,
    CorrEvent,
    Correspondence,
    CorrKind,
    Judgement,
    MarkEvent,
    PatternStatus,
    RepairPattern,
    TurnContext,
    derive_correction,
    detect_clues,
    judge_locally,
    pattern_letters,
    sanctioned_search,
    strongly_complete,
    try_add,
)
from .statistical_filter import Classification, Outcome, classify_candidate
from .tagger import TaggerModel, likely_category


@dataclass(frozen=True)
class JudgedRepair:
    """An accepted repair, in original token coordinates."""

    turn_id: str
    klass: RepairClass
    removed: tuple[int, ...]
    editing: tuple[int, ...]
    interruption_gap: int
    pattern: str
    route: str

    @property
    def deleted_indices(self) -> frozenset[int]:
        return frozenset(self.removed) | frozenset(self.editing)


@dataclass(frozen=True)
class CorrectionEvent:
    repair: JudgedRepair
    text_after: tuple[str, ...]


@dataclass(frozen=True)
class FlushEvent:
    reason: str
    judgement: Judgement
    letters: str
    pattern: RepairPattern


@dataclass
class TurnResult:
    turn_id: str
    corrected: tuple[str, ...]
    repairs: tuple[JudgedRepair, ...]
    trace: list


class _TagChain:
    """Greedy online tag commitment over the corrected stream.

    Each token gets the last tag of the best path through everything
    still active before it; deletions relink the chain from the last
    survivor and recommit everything downstream.
    """

    def __init__(self, model: TaggerModel):
        self.model = model
        self.n = len(model.tagset)
        self.vectors: dict[int, list[float]] = {}
        self.tags: dict[int, int] = {}

    def _step(self, token: Token, prev_vec: Optional[list[float]]) -> list[float]:
        model = self.model
        vec = [-math.inf] * self.n
        for c in model.candidate_tags(token):
            if prev_vec is None:
                score = model._log_start[c]
            else:
                score = -math.inf
                for p in range(self.n):
                    if prev_vec[p] == -math.inf:
                        continue
                    s = prev_vec[p] + model._log_fluent[p][c]
                    if s > score:
                        score = s
            vec[c] = score + model.log_emission(token.surface, c)
        return vec

    def _commit(self, vec: list[float]) -> int:
        best, tag = -math.inf, 0
        for c in range(self.n):
            if vec[c] > best:
                best, tag = vec[c], c
        return tag

    def extend(self, ctx: TurnContext, pos: int) -> int:
        prev = next((p for p in range(pos - 1, -1, -1) if ctx.active[p]), None)
        prev_vec = self.vectors[prev] if prev is not None else None
        vec = self._step(ctx.tokens[pos], prev_vec)
        self.vectors[pos] = vec
        self.tags[pos] = self._commit(vec)
        return self.tags[pos]

    def relink(self, ctx: TurnContext, from_pos: int, upto: int) -> None:
        """Recompute commitments for active tokens in [from_pos, upto]."""
        for pos in range(from_pos, upto + 1):
            if ctx.active[pos]:
                self.extend(ctx, pos)


class _Run:
    def __init__(self, turn: AnnotatedTurn, model: TaggerModel, config: RunConfig):
        self.turn = turn
        self.model = model
        self.config = config
        self._likely: dict[int, int] = {}
        self.ctx = TurnContext(
            turn.tokens,
            filled_pauses=model.filled_pauses,
            cue_phrases=model.cue_phrases,
            category_of=self._category_of,
            history_window=config.history_window,
            single_match_max_gap=config.single_match_max_gap,
            double_match_max_gap=config.double_match_max_gap,
            removed_gap_max=config.removed_gap_max,
            resumed_gap_max=config.resumed_gap_max,
        )
        self.chain = _TagChain(model)
        self.pattern: Optional[RepairPattern] = None
        self.trace: list = []
        self.repairs: list[JudgedRepair] = []

    def _category_of(self, pos: int) -> int:
        if pos not in self._likely:
            self._likely[pos] = likely_category(self.ctx.word(pos), self.model).id
        return self._likely[pos]

    # -- pattern lifecycle ------------------------------------------------

    def _start_from_clue(self, clue: Clue, pos: int) -> Optional[RepairPattern]:
        ctx = self.ctx
        pattern = RepairPattern()
        if clue.kind is ClueKind.FRAGMENT:
            pattern.fragment = clue.anchors[0]
            self.trace.append(MarkEvent("fragment", clue.anchors))
        elif clue.kind is ClueKind.EDITING_TERM:
            pattern.editing_range = (clue.anchors[0], clue.anchors[1])
            self.trace.append(MarkEvent("editing_terms", clue.anchors))
        elif clue.kind is ClueKind.DOUBLE_MATCH:
            a, b, c, d = clue.anchors
            for corr in (
                Correspondence(CorrKind.MATCH, a, c),
                Correspondence(CorrKind.MATCH, b, d),
            ):
                rule = try_add(pattern, corr, ctx, from_clue=True)
                self.trace.append(CorrEvent(corr, rule, from_clue=True))
                if rule is not None:
                    return None
        else:
            kind = (
                CorrKind.MATCH
                if clue.kind is ClueKind.SINGLE_MATCH
                else CorrKind.REPLACEMENT
            )
            corr = Correspondence(kind, clue.anchors[0], clue.anchors[1])
            rule = try_add(pattern, corr, ctx, from_clue=True)
            self.trace.append(CorrEvent(corr, rule, from_clue=True))
            if rule is not None:
                return None
        sanctioned_search(pattern, ctx, pos, self.trace)
        return pattern

    def _integrate_clue(self, clue: Clue, pos: int) -> bool:
        pattern, ctx = self.pattern, self.ctx
        assert pattern is not None
        if clue.kind is ClueKind.FRAGMENT:
            return False
        if clue.kind is ClueKind.EDITING_TERM:
            start, end = clue.anchors
            if any(
                pattern.occupies(p) and not pattern.in_editing_range(p)
                for p in range(start, end)
            ):
                return False
            if pattern.editing_range is None:
                gap = pattern.known_gap()
                if gap is not None:
                    if start != gap:
                        return False
                else:
                    lefts, rights = pattern.lefts, pattern.rights
                    if not (lefts and max(lefts) < start and min(rights) >= end):
                        return False
                pattern.editing_range = (start, end)
            else:
                if start != pattern.editing_range[1]:
                    return False
                pattern.editing_range = (pattern.editing_range[0], end)
            self.trace.append(MarkEvent("editing_terms", clue.anchors))
            return True
        if clue.kind is ClueKind.DOUBLE_MATCH:
            a, b, c, d = clue.anchors
            wanted = [
                Correspondence(CorrKind.MATCH, a, c),
                Correspondence(CorrKind.MATCH, b, d),
            ]
            added = 0
            for corr in wanted:
                present = any(
                    x.kind is corr.kind
                    and (x.left_pos, x.right_pos) == (corr.left_pos, corr.right_pos)
                    for x in pattern.correspondences
                )
                if present:
                    continue
                rule = try_add(pattern, corr, ctx, from_clue=True)
                self.trace.append(CorrEvent(corr, rule, from_clue=True))
                if rule is not None:
                    for _ in range(added):
                        pattern.correspondences.pop()
                    return False
                added += 1
            sanctioned_search(pattern, ctx, pos, self.trace)
            return True
        kind = (
            CorrKind.MATCH if clue.kind is ClueKind.SINGLE_MATCH else CorrKind.REPLACEMENT
        )
        corr = Correspondence(kind, clue.anchors[0], clue.anchors[1])
        if pattern.occupies(corr.left_pos) or pattern.occupies(corr.right_pos):
            return False
        rule = try_add(pattern, corr, ctx, from_clue=True)
        self.trace.append(CorrEvent(corr, rule, from_clue=True))
        if rule is not None:
            return False
        sanctioned_search(pattern, ctx, pos, self.trace)
        return True

    def _search_word(self, pos: int) -> None:
        """Match-only correspondence search for the current word."""
        pattern, ctx = self.pattern, self.ctx
        assert pattern is not None
        if pattern.occupies(pos) or not ctx.corr_candidate(pos):
            return
        gap = pattern.known_gap()
        if gap is None:
            lefts_bound = min(pattern.rights) if pattern.correspondences else pos
        else:
            lefts_bound = gap
        added = False
        for l in ctx.recent_active(lefts_bound):
            if (
                not ctx.corr_candidate(l)
                or pattern.occupies(l)
                or ctx.word(l) != ctx.word(pos)
            ):
                continue
            corr = Correspondence(CorrKind.MATCH, l, pos)
            rule = try_add(pattern, corr, ctx, from_clue=False)
            self.trace.append(CorrEvent(corr, rule))
            if rule is None:
                added = True
                break
        if added:
            sanctioned_search(pattern, ctx, pos, self.trace)

    def _horizon_passed(self, pos: int) -> bool:
        pattern, ctx = self.pattern, self.ctx
        assert pattern is not None
        if pattern.correspondences:
            return (
                ctx.raw_count_between(max(pattern.rights), pos) > ctx.resumed_gap_max
            )
        anchor = (
            pattern.et_end_pos
            if pattern.editing_range is not None
            else pattern.resolved_gap()
        )
        return ctx.content_count_between(anchor - 1, pos, pattern) > ctx.double_match_max_gap

    # -- flushing ----------------------------------------------------------

    def _flush(self, reason: str) -> None:
        pattern, ctx = self.pattern, self.ctx
        assert pattern is not None
        self.pattern = None
        judgement = judge_locally(pattern, ctx)
        letters = ""
        if judgement is Judgement.JUDGEABLE:
            pattern.interruption_gap = pattern.resolved_gap()
            pattern.status = PatternStatus.JUDGEABLE
            letters = pattern_letters(pattern, ctx)
        else:
            pattern.status = PatternStatus.REJECTED
        self.trace.append(FlushEvent(reason, judgement, letters, pattern))
        if judgement is not Judgement.JUDGEABLE:
            return

        gap = pattern.interruption_gap
        left_tag = self.chain.tags.get(gap - 1) if gap > 0 else None
        et_end = pattern.et_end_pos if pattern.editing_range is not None else gap
        right_pos = next(
            (p for p in range(et_end, len(ctx.tokens)) if ctx.active[p]), None
        )
        # The chain's left context for the first resumed word is exactly
        # the disrupted stretch, so its committed tag is unreliable there;
        # use the context-free category instead (same basis the builder
        # used for replacement candidacy).
        right_tag = self._category_of(right_pos) if right_pos is not None else None

        result = classify_candidate(pattern, ctx, left_tag, right_tag, self.model)
        self.trace.append(result)
        if result.outcome is Outcome.REJECT:
            return

        abridged_only = result.outcome is Outcome.ACCEPT_ABRIDGED
        removed, editing = derive_correction(pattern, ctx, abridged_only=abridged_only)
        if not removed and not editing:
            return
        klass = (
            RepairClass.ABRIDGED if abridged_only else RepairClass.MODIFICATION
        )
        repair = JudgedRepair(
            turn_id=self.turn.turn_id,
            klass=klass,
            removed=removed,
            editing=editing,
            interruption_gap=gap,
            pattern=letters,
            route=result.route,
        )
        self.repairs.append(repair)
        deleted = repair.deleted_indices
        ctx.deactivate(deleted)
        self.chain.relink(ctx, min(deleted), self._last_fed)
        self.trace.append(
            CorrectionEvent(
                repair,
                tuple(ctx.word(p) for p in range(len(ctx.tokens)) if ctx.active[p]),
            )
        )

    # -- main loop ----------------------------------------------------------

    def run(self) -> TurnResult:
        ctx = self.ctx
        self._last_fed = -1
        for pos in range(len(ctx.tokens)):
            self._last_fed = pos
            self.chain.extend(ctx, pos)

            if self.pattern is not None and self._horizon_passed(pos):
                self._flush("horizon")

            clues = detect_clues(ctx, pos, self.pattern)
            if clues:
                self.trace.append(ClueEvent(pos, clues[0]))
            consumed = False
            if clues:
                clue = clues[0]
                if self.pattern is None:
                    self.pattern = self._start_from_clue(clue, pos)
                    consumed = self.pattern is not None
                elif self._integrate_clue(clue, pos):
                    consumed = True
                else:
                    self._flush("clue_conflict")
                    fresh = detect_clues(ctx, pos, None)
                    if fresh:
                        self.pattern = self._start_from_clue(fresh[0], pos)
                        consumed = self.pattern is not None

            if not consumed and self.pattern is not None:
                self._search_word(pos)

            if self.pattern is not None and strongly_complete(self.pattern, ctx):
                self._flush("complete")

        if self.pattern is not None:
            self._flush("turn_end")

        corrected = tuple(
            ctx.word(p) for p in range(len(ctx.tokens)) if ctx.active[p]
        )
        return TurnResult(
            turn_id=self.turn.turn_id,
            corrected=corrected,
            repairs=tuple(self.repairs),
            trace=self.trace,
        )


def render_trace(result: TurnResult) -> list[str]:
    """One line per builder event, for --trace output and regression pins."""
    lines = [f"turn {result.turn_id}"]
    for event in result.trace:
        if isinstance(event, ClueEvent):
            lines.append(
                f"  clue @{event.pos} {event.clue.kind.value} anchors={event.clue.anchors}"
            )
        elif isinstance(event, CorrEvent):
            corr = event.corr
            verdict = "add" if event.rule is None else f"rule {event.rule}"
            lines.append(
                f"  corr {corr.kind.value}({corr.left_pos},{corr.right_pos}) -> {verdict}"
            )
        elif isinstance(event, MarkEvent):
            lines.append(f"  mark {event.kind} {event.detail}")
        elif isinstance(event, FlushEvent):
            detail = f" pattern={event.letters}" if event.letters else ""
            lines.append(f"  flush {event.reason} -> {event.judgement.value}{detail}")
        elif isinstance(event, Classification):
            lines.append(f"  classify {event.outcome.value} via {event.route}")
        elif isinstance(event, CorrectionEvent):
            repair = event.repair
            lines.append(
                f"  correct gap={repair.interruption_gap} class={repair.klass.value}"
                f" removed={repair.removed} editing={repair.editing}"
                f' text="{" ".join(event.text_after)}"'
            )
    return lines


def process_turn(
    turn: AnnotatedTurn, model: TaggerModel, config: Optional[RunConfig] = None
) -> TurnResult:
    """Detect and correct repairs in one break-free turn."""
    if config is None:
        config = RunConfig()
    if not turn.tokens:
        return TurnResult(turn.turn_id, (), (), [])
    return _Run(turn, model, config).run()


@dataclass
class CorpusStats:
    turns: int = 0
    repairs: int = 0
    by_class: dict = field(default_factory=dict)
    by_route: dict = field(default_factory=dict)


def process_corpus(
    turns: Sequence[AnnotatedTurn],
    model: TaggerModel,
    config: Optional[RunConfig] = None,
) -> tuple[list[TurnResult], CorpusStats]:
    """Apply fresh-start breaks, then fold process_turn over every segment."""
    if config is None:
        config = RunConfig()
    results = []
    stats = CorpusStats()
    for turn in turns:
        for segment in apply_freshstart_breaks(turn, model.filled_pauses + model.cue_phrases):
            result = process_turn(segment, model, config)
            results.append(result)
            stats.turns += 1
            stats.repairs += len(result.repairs)
            for repair in result.repairs:
                stats.by_class[repair.klass.value] = (
                    stats.by_class.get(repair.klass.value, 0) + 1
                )
                stats.by_route[repair.route] = stats.by_route.get(repair.route, 0) + 1
    return results, stats
