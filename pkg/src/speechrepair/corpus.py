"""Turn-segmented transcript corpus: parsing, annotation, serialization.

File format (UTF-8, line based): one turn per line, ``turnID: tokens``.
Tokens are whitespace separated; each may carry an optional ``/TAG``
(uppercase part-of-speech mnemonic) and an optional ``/label`` where the
label is one of ``m<k>``, ``r<k>``, ``x`` or ``et``.  The standalone
pseudo-tokens ``<int>`` and ``<break>`` mark interruption points and
fresh-start break points in the gap before the next real token.  Lines
starting with ``#`` are comments.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional, Sequence

FRAGMENT_MARKER = "-"

_LABEL_RE = re.compile(r"^(m\d+|r\d+|x|et)$")
_TAG_RE = re.compile(r"^[A-Z][A-Z0-9_]*$")


class CorpusError(ValueError):
    """Malformed corpus input; carries the offending line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LabelKind(enum.Enum):
    MATCH = "m"
    REPLACEMENT = "r"
    OTHER = "x"
    EDITING_TERM = "et"
    FRAGMENT = "-"
    NONE = ""


@dataclass(frozen=True)
class AnnotationLabel:
    kind: LabelKind = LabelKind.NONE
    pair_index: Optional[int] = None

    def __post_init__(self):
        paired = self.kind in (LabelKind.MATCH, LabelKind.REPLACEMENT)
        if paired and (self.pair_index is None or self.pair_index <= 0):
            raise ValueError("match/replacement labels need a positive pair index")
        if not paired and self.pair_index is not None:
            raise ValueError(f"{self.kind.name} label cannot carry a pair index")


NO_LABEL = AnnotationLabel()


@dataclass(frozen=True)
class Token:
    """One transcribed word.  A trailing hyphen marks a word fragment."""

    surface: str
    position: int
    turn_id: str
    is_fragment: bool = False

    def __post_init__(self):
        if not self.surface:
            raise ValueError("empty token surface")
        if self.is_fragment != self.surface.endswith(FRAGMENT_MARKER):
            raise ValueError(f"fragment flag inconsistent with surface {self.surface!r}")
        if self.is_fragment and len(self.surface) < 2:
            raise ValueError("a fragment needs at least one character before the hyphen")


def make_token(raw: str, position: int, turn_id: str) -> Token:
    surface = raw.lower()
    return Token(
        surface=surface,
        position=position,
        turn_id=turn_id,
        is_fragment=surface.endswith(FRAGMENT_MARKER),
    )


@dataclass(frozen=True)
class AnnotatedTurn:
    """A turn's tokens plus per-token labels and gap annotations.

    Gap index i names the gap between token i-1 and token i; gap 0 is
    turn initial.  ``gold_tags`` is present only for training corpora.
    """

    turn_id: str
    tokens: tuple[Token, ...]
    labels: tuple[AnnotationLabel, ...]
    interruption_points: frozenset[int] = frozenset()
    freshstart_breaks: frozenset[int] = frozenset()
    gold_tags: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if len(self.tokens) != len(self.labels):
            raise ValueError("labels and tokens must have equal length")
        if self.gold_tags is not None and len(self.gold_tags) != len(self.tokens):
            raise ValueError("gold tags and tokens must have equal length")
        n = len(self.tokens)
        for gap in self.interruption_points | self.freshstart_breaks:
            if not 0 <= gap <= n:
                raise ValueError(f"gap index {gap} outside turn of length {n}")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.tokens)


class RepairClass(enum.Enum):
    MODIFICATION = "modification"
    ABRIDGED = "abridged"


@dataclass(frozen=True)
class GoldRepair:
    """A hand-annotated repair: half-open token spans, in order.

    The removed span ends at the interruption point and the editing span
    starts there; the resumed span follows the editing span.
    """

    removed_span: tuple[int, int]
    editing_span: tuple[int, int]
    resumed_span: tuple[int, int]
    klass: RepairClass

    def __post_init__(self):
        r0, r1 = self.removed_span
        e0, e1 = self.editing_span
        s0, s1 = self.resumed_span
        if not (r0 <= r1 == e0 <= e1 == s0 <= s1):
            raise ValueError(
                f"repair spans out of order: {self.removed_span} "
                f"{self.editing_span} {self.resumed_span}"
            )

    @property
    def interruption_gap(self) -> int:
        return self.removed_span[1]

    @property
    def deleted_indices(self) -> frozenset[int]:
        return frozenset(range(self.removed_span[0], self.editing_span[1]))


# ---------------------------------------------------------------------------
# Parsing and serialization


def _parse_piece(piece: str, line_no: int):
    """Classify one '/'-suffix piece as a tag name or an annotation label."""
    m = _LABEL_RE.match(piece)
    if m:
        text = m.group(1)
        if text == "x":
            return None, AnnotationLabel(LabelKind.OTHER)
        if text == "et":
            return None, AnnotationLabel(LabelKind.EDITING_TERM)
        kind = LabelKind.MATCH if text[0] == "m" else LabelKind.REPLACEMENT
        return None, AnnotationLabel(kind, int(text[1:]))
    if _TAG_RE.match(piece):
        return piece, None
    raise CorpusError(f"malformed label token {piece!r}", line_no)


def _check_pairs(labels: Sequence[AnnotationLabel], ints: set[int], line_no: int) -> None:
    pairs: dict[tuple[LabelKind, int], list[int]] = {}
    for pos, label in enumerate(labels):
        if label.kind in (LabelKind.MATCH, LabelKind.REPLACEMENT):
            pairs.setdefault((label.kind, label.pair_index), []).append(pos)
    for (kind, index), members in pairs.items():
        if len(members) != 2:
            raise CorpusError(f"dangling correspondence index {index}", line_no)
        left, right = members
        if not any(left < gap <= right for gap in ints):
            raise CorpusError(
                f"correspondence pair {index} does not straddle an interruption point",
                line_no,
            )


def parse_turn_line(line: str, line_no: int = 0) -> AnnotatedTurn:
    head, sep, body = line.partition(":")
    if not sep:
        raise CorpusError("missing 'turnID:' prefix", line_no)
    turn_id = head.strip()
    if not turn_id:
        raise CorpusError("empty turn id", line_no)

    tokens: list[Token] = []
    labels: list[AnnotationLabel] = []
    tags: list[Optional[str]] = []
    ints: set[int] = set()
    breaks: set[int] = set()

    for raw in body.split():
        if raw == "<int>":
            ints.add(len(tokens))
            continue
        if raw == "<break>":
            breaks.add(len(tokens))
            continue
        pieces = raw.split("/")
        word, suffixes = pieces[0], pieces[1:]
        if not word:
            raise CorpusError(f"malformed token {raw!r}", line_no)
        if len(suffixes) > 2:
            raise CorpusError(f"too many '/' fields in {raw!r}", line_no)
        tag: Optional[str] = None
        label = NO_LABEL
        for piece in suffixes:
            got_tag, got_label = _parse_piece(piece, line_no)
            if got_tag is not None:
                if tag is not None:
                    raise CorpusError(f"duplicate tag on {raw!r}", line_no)
                tag = got_tag
            else:
                if label is not NO_LABEL:
                    raise CorpusError(f"duplicate label on {raw!r}", line_no)
                label = got_label
        try:
            token = make_token(word, len(tokens), turn_id)
        except ValueError as exc:
            raise CorpusError(str(exc), line_no) from None
        if token.is_fragment and label is NO_LABEL:
            label = AnnotationLabel(LabelKind.FRAGMENT)
        tokens.append(token)
        labels.append(label)
        tags.append(tag)

    if not tokens and (ints or breaks):
        raise CorpusError("interruption point outside turn", line_no)

    _check_pairs(labels, ints, line_no)

    gold: Optional[tuple[str, ...]] = None
    if any(t is not None for t in tags):
        if any(t is None for t in tags):
            raise CorpusError("gold tags must cover every token or none", line_no)
        gold = tuple(tags)  # type: ignore[arg-type]

    return AnnotatedTurn(
        turn_id=turn_id,
        tokens=tuple(tokens),
        labels=tuple(labels),
        interruption_points=frozenset(ints),
        freshstart_breaks=frozenset(breaks),
        gold_tags=gold,
    )


def parse_turns(stream: Iterable[str]) -> Iterator[AnnotatedTurn]:
    """Parse a corpus stream (an iterable of lines) into turns."""
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        yield parse_turn_line(line, line_no)


def parse_corpus_file(path) -> list[AnnotatedTurn]:
    with open(path, encoding="utf-8") as fh:
        return list(parse_turns(fh))


def _label_text(label: AnnotationLabel) -> str:
    if label.kind in (LabelKind.MATCH, LabelKind.REPLACEMENT):
        return f"{label.kind.value}{label.pair_index}"
    if label.kind in (LabelKind.OTHER, LabelKind.EDITING_TERM):
        return label.kind.value
    return ""


def serialize_turn(turn: AnnotatedTurn) -> str:
    parts = [f"{turn.turn_id}:"]
    for pos, (token, label) in enumerate(zip(turn.tokens, turn.labels)):
        if pos in turn.freshstart_breaks:
            parts.append("<break>")
        if pos in turn.interruption_points:
            parts.append("<int>")
        piece = token.surface
        if turn.gold_tags is not None:
            piece += f"/{turn.gold_tags[pos]}"
        text = _label_text(label)
        if text:
            piece += f"/{text}"
        parts.append(piece)
    n = len(turn.tokens)
    if n in turn.freshstart_breaks:
        parts.append("<break>")
    if n in turn.interruption_points:
        parts.append("<int>")
    return " ".join(parts)


def serialize_turns(turns: Iterable[AnnotatedTurn]) -> str:
    return "\n".join(serialize_turn(t) for t in turns) + "\n"


def write_corpus_file(turns: Iterable[AnnotatedTurn], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_turns(turns))


# ---------------------------------------------------------------------------
# Repair patterns and gold-repair extraction


def pattern_string(turn: AnnotatedTurn, repair: GoldRepair) -> str:
    """Label-letter summary of a repair, e.g. ``mm-.emm``.

    One letter per token across the removed/editing/resumed spans, with a
    period at the interruption point: m/r/x from the annotation, ``-``
    for fragments and ``e`` for editing terms.
    """
    n = len(turn.tokens)
    for span in (repair.removed_span, repair.editing_span, repair.resumed_span):
        if not (0 <= span[0] <= span[1] <= n):
            raise ValueError(f"span {span} outside turn of length {n}")

    def letter(pos: int) -> str:
        if turn.tokens[pos].is_fragment:
            return "-"
        kind = turn.labels[pos].kind
        if kind is LabelKind.EDITING_TERM:
            return "e"
        if kind is LabelKind.MATCH:
            return "m"
        if kind is LabelKind.REPLACEMENT:
            return "r"
        return "x"

    out = [letter(p) for p in range(*repair.removed_span)]
    out.append(".")
    out.extend(letter(p) for p in range(*repair.editing_span))
    out.extend(letter(p) for p in range(*repair.resumed_span))
    return "".join(out)


def extract_gold_repairs(turn: AnnotatedTurn) -> list[GoldRepair]:
    """Derive per-repair spans from a turn's flat annotation.

    Each interruption point anchors one repair: its editing span is the
    contiguous et-labeled run at the gap, correspondence pairs straddling
    the gap plus adjoining x/fragment tokens delimit removed and resumed
    text.  Overlapping repairs are resolved left to right.
    """
    labels = turn.labels
    n = len(labels)
    repairs = []
    for gap in sorted(turn.interruption_points):
        et_end = gap
        while et_end < n and labels[et_end].kind is LabelKind.EDITING_TERM:
            et_end += 1

        def is_pair(label: AnnotationLabel) -> bool:
            return label.kind in (LabelKind.MATCH, LabelKind.REPLACEMENT)

        pair_keys = set()
        for pos in range(gap):
            if is_pair(labels[pos]):
                mate = next(
                    (
                        q
                        for q in range(et_end, n)
                        if labels[q].kind is labels[pos].kind
                        and labels[q].pair_index == labels[pos].pair_index
                    ),
                    None,
                )
                if mate is not None:
                    pair_keys.add((labels[pos].kind, labels[pos].pair_index))

        def in_this_repair(pos: int) -> bool:
            label = labels[pos]
            if is_pair(label):
                return (label.kind, label.pair_index) in pair_keys
            return label.kind in (LabelKind.OTHER, LabelKind.FRAGMENT)

        removed_start = gap
        while removed_start > 0 and in_this_repair(removed_start - 1):
            removed_start -= 1
        resumed_end = et_end
        while resumed_end < n and in_this_repair(resumed_end):
            resumed_end += 1

        klass = RepairClass.ABRIDGED
        for pos in list(range(removed_start, gap)) + list(range(et_end, resumed_end)):
            if labels[pos].kind in (LabelKind.MATCH, LabelKind.REPLACEMENT, LabelKind.OTHER):
                klass = RepairClass.MODIFICATION
                break

        if klass is RepairClass.ABRIDGED:
            # Abridged removed text is at most the fragment itself.
            start = gap
            if gap > 0 and turn.tokens[gap - 1].is_fragment:
                start = gap - 1
            removed_start, resumed_end = start, et_end

        repairs.append(
            GoldRepair(
                removed_span=(removed_start, gap),
                editing_span=(gap, et_end),
                resumed_span=(et_end, resumed_end),
                klass=klass,
            )
        )
    return repairs


# ---------------------------------------------------------------------------
# Fresh starts


def _match_editing_run(words: Sequence[str], start: int, editing_terms: Sequence[str]) -> int:
    """Length (in tokens) of the editing-term run beginning at ``start``.

    Multi-word cue phrases are matched greedily, longest first.
    """
    pos = start
    entries = [tuple(e.split()) for e in sorted(editing_terms, key=lambda e: -len(e.split()))]
    while pos < len(words):
        for entry in entries:
            k = len(entry)
            if tuple(words[pos : pos + k]) == entry:
                pos += k
                break
        else:
            break
    return pos - start


def apply_freshstart_breaks(
    turn: AnnotatedTurn, editing_terms: Sequence[str] = ()
) -> list[AnnotatedTurn]:
    """Split a turn at its fresh-start break points.

    Editing terms immediately after a break belong to the cancelled
    utterance and are dropped.  Downstream processing never crosses a
    break, so each segment comes back as an independent turn; a turn
    without breaks is returned unchanged (singleton list).
    """
    if not turn.freshstart_breaks:
        return [turn]

    words = turn.words
    cuts = sorted(turn.freshstart_breaks)
    segments: list[AnnotatedTurn] = []
    bounds = []
    start = 0
    for cut in cuts:
        bounds.append((start, cut))
        start = cut + _match_editing_run(words, cut, editing_terms)
    bounds.append((start, len(turn.tokens)))

    for index, (lo, hi) in enumerate(bounds):
        if lo >= hi:
            continue
        seg_id = f"{turn.turn_id}.s{index}" if len(bounds) > 1 else turn.turn_id
        tokens = tuple(
            replace(tok, position=pos - lo, turn_id=seg_id)
            for pos, tok in enumerate(turn.tokens[lo:hi], start=lo)
        )
        segments.append(
            AnnotatedTurn(
                turn_id=seg_id,
                tokens=tokens,
                labels=turn.labels[lo:hi],
                interruption_points=frozenset(
                    g - lo for g in turn.interruption_points if lo < g <= hi
                ),
                freshstart_breaks=frozenset(),
                gold_tags=None if turn.gold_tags is None else turn.gold_tags[lo:hi],
            )
        )
    return segments
