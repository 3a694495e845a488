"""Synthesis of gold-annotated corpora with injected repairs.

Fluent turns come from a small template grammar over an unambiguous
lexicon; repairs of the configured types are spliced in with gold
labels, interruption points, and part-of-speech tags attached.  Every
injected repair is rule-conformant by construction, and turns are
resampled until no accidental word correspondence interferes with a
gold repair, so the clue inventory can in principle find everything.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .corpus import (
    AnnotatedTurn,
    AnnotationLabel,
    GoldRepair,
    LabelKind,
    RepairClass,
    Token,
)

LEXICON = {
    "N": (
        "oranges", "bananas", "boxcar", "boxcars", "train", "tanker", "engine",
        "juice", "load", "factory", "warehouse", "corning", "dansville", "avon",
        "bath", "elmira", "city", "track", "plan", "hour", "station", "cargo",
    ),
    "V": (
        "take", "bring", "send", "move", "ship", "pick", "drop", "need",
        "want", "go", "get", "have", "make", "fill", "start", "manage", "think",
    ),
    "AUX": ("can", "will", "should", "could", "must"),
    "D": ("the", "a", "that", "this"),
    "P": ("to", "at", "from", "in", "with", "up", "of", "by"),
    "PRO": ("i", "we", "you", "it", "they"),
    "ADJ": ("entire", "empty", "full", "quick", "orange", "loaded", "new", "slow"),
    "ADV": ("quickly", "then", "there", "now", "first", "instead"),
    "CONJ": ("and", "so", "but", "or"),
    "NUM": ("one", "two", "three", "four", "five"),
}

# Natural tags for cue-phrase words when they appear as editing terms.
CUE_WORD_TAGS = {
    "i": "PRO", "mean": "V", "guess": "V", "well": "ADV", "sorry": "ADJ",
    "okay": "INTJ", "let's": "V", "see": "V",
}

FILLED_PAUSES = ("um", "uh", "er")
CUE_PHRASES = ("i mean", "i guess", "well", "okay")

# Subject VP [PP] [ADV] templates; weights keep same-tag adjacency rare
# but present (ADJ ADJ) so the filter has fluent replacements to refuse.
_NP = (("D", "N"), ("PRO",), ("D", "ADJ", "N"), ("NUM", "N"), ("D", "ADJ", "ADJ", "N"))
_NP_WEIGHTS = (10, 8, 5, 4, 1)
_VP = (
    ("V", "NP"),
    ("AUX", "V", "NP"),
    ("V", "NP", "P", "NP"),
    ("V", "P", "NP"),
    ("V", "NP", "ADV"),
)
_VP_WEIGHTS = (10, 5, 6, 4, 3)

REPAIR_TYPES = ("repetition", "larger_repetition", "replacement", "other", "abridged")


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters.

    Type weights are relative (Table-1-style counts work directly); the
    *_rate fields are probabilities and must lie in [0, 1].
    """

    turns: int = 100
    min_words: int = 6
    max_words: int = 14
    repair_turn_rate: float = 0.25
    second_repair_rate: float = 0.25
    repetition_weight: float = 179.0
    larger_repetition_weight: float = 58.0
    replacement_weight: float = 72.0
    other_weight: float = 141.0
    abridged_weight: float = 267.0
    fragment_rate: float = 0.15
    editing_term_rate: float = 0.20

    def __post_init__(self):
        for name in (
            "repair_turn_rate",
            "second_repair_rate",
            "fragment_rate",
            "editing_term_rate",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        for name in REPAIR_TYPES:
            if getattr(self, f"{name}_weight") < 0:
                raise ValueError(f"{name}_weight must be non-negative")

    @property
    def type_weights(self) -> list[float]:
        return [getattr(self, f"{name}_weight") for name in REPAIR_TYPES]


class _Cell:
    __slots__ = ("word", "tag", "label")

    def __init__(self, word: str, tag: str, label: AnnotationLabel = AnnotationLabel()):
        self.word = word
        self.tag = tag
        self.label = label


def _weighted(rng: random.Random, options, weights):
    return rng.choices(options, weights=weights, k=1)[0]


def _fluent_turn(rng: random.Random, spec: SynthSpec) -> list[tuple[str, str]]:
    words: list[tuple[str, str]] = []

    def emit(tag: str):
        words.append((rng.choice(LEXICON[tag]), tag))

    def emit_np():
        for tag in _weighted(rng, _NP, _NP_WEIGHTS):
            emit(tag)

    target = rng.randint(spec.min_words, spec.max_words)
    while len(words) < target:
        if words and rng.random() < 0.3:
            emit("CONJ")
        emit_np()
        for tag in _weighted(rng, _VP, _VP_WEIGHTS):
            if tag == "NP":
                emit_np()
            else:
                emit(tag)
    return words


def _sample_editing_terms(rng: random.Random, allow_cue: bool = True) -> list[tuple[str, str]]:
    roll = rng.random()
    if roll < 0.40 or (not allow_cue and roll >= 0.75):
        word = "um"
    elif roll < 0.65:
        word = "uh"
    elif roll < 0.75:
        word = "er"
    else:
        phrase = rng.choice(CUE_PHRASES)
        return [(w, CUE_WORD_TAGS[w]) for w in phrase.split()]
    return [(word, "FILLED_PAUSE")]


def _sample_fragment(rng: random.Random) -> str:
    pool = LEXICON["N"] + LEXICON["V"] + LEXICON["ADJ"]
    word = rng.choice(pool)
    cut = rng.randint(1, max(1, len(word) - 2))
    return word[:cut] + "-"


def _other_word(rng: random.Random, tag: str, avoid: str) -> Optional[str]:
    pool = [w for w in LEXICON[tag] if w != avoid]
    return rng.choice(pool) if pool else None


class _Injection:
    def __init__(self, site: int, kind: str):
        self.site = site
        self.kind = kind


def _plan_repairs(rng, spec, fluent) -> list[_Injection]:
    if rng.random() >= spec.repair_turn_rate:
        return []
    weights = spec.type_weights
    if sum(weights) == 0:
        return []
    count = 2 if rng.random() < spec.second_repair_rate else 1

    def usable(site: int, kind: str) -> bool:
        n = len(fluent)
        if not 2 <= site <= n - 2:
            return False
        if fluent[site - 1][1] == fluent[site][1]:
            return False
        if kind == "larger_repetition" and site + 3 > n:
            return False
        if kind == "replacement" and fluent[site][1] not in ("N", "V", "NUM", "PRO"):
            return False
        return True

    plans: list[_Injection] = []
    sites = list(range(2, len(fluent) - 1))
    rng.shuffle(sites)
    for site in sites:
        if len(plans) == count:
            break
        if any(abs(site - p.site) < 13 for p in plans):
            continue
        kind = _weighted(rng, REPAIR_TYPES, weights)
        if usable(site, kind):
            plans.append(_Injection(site, kind))
    plans.sort(key=lambda p: p.site)
    return plans


def _build_turn(
    rng: random.Random, spec: SynthSpec, turn_id: str
) -> Optional[tuple[AnnotatedTurn, list[GoldRepair]]]:
    fluent = _fluent_turn(rng, spec)
    plans = _plan_repairs(rng, spec, fluent)

    cells: list[_Cell] = []
    ints: list[int] = []
    gold: list[GoldRepair] = []
    pair_counter = 0
    pending: dict[int, AnnotationLabel] = {}
    by_site = {p.site: p for p in plans}

    def fragment_cell() -> _Cell:
        return _Cell(_sample_fragment(rng), "FRAG", AnnotationLabel(LabelKind.FRAGMENT))

    def editing_cells(allow_cue: bool = True) -> list[_Cell]:
        return [
            _Cell(w, t, AnnotationLabel(LabelKind.EDITING_TERM))
            for w, t in _sample_editing_terms(rng, allow_cue)
        ]

    def inject(plan: _Injection, idx: int) -> bool:
        nonlocal pair_counter
        word, tag = fluent[idx]
        use_frag = rng.random() < spec.fragment_rate
        use_et = rng.random() < spec.editing_term_rate
        start = len(cells)

        if plan.kind == "abridged":
            if not use_frag and not use_et:
                use_et = True
            if use_frag:
                cells.append(fragment_cell())
            gap = len(cells)
            # Without a fragment, a cue-phrase-only pattern would be
            # judged as not a repair, so keep those to filled pauses.
            ets = editing_cells(allow_cue=use_frag) if use_et else []
            cells.extend(ets)
            ints.append(gap)
            gold.append(
                GoldRepair(
                    removed_span=(start, gap),
                    editing_span=(gap, gap + len(ets)),
                    resumed_span=(gap + len(ets), gap + len(ets)),
                    klass=RepairClass.ABRIDGED,
                )
            )
            return True

        insertion = False
        if plan.kind in ("repetition", "larger_repetition"):
            k = 1 if plan.kind == "repetition" else rng.randint(2, 3)
            if idx + k > len(fluent):
                return False
            for j in range(k):
                pair_counter += 1
                w, t = fluent[idx + j]
                cells.append(_Cell(w, t, AnnotationLabel(LabelKind.MATCH, pair_counter)))
                pending[idx + j] = AnnotationLabel(LabelKind.MATCH, pair_counter)
            resumed_len = k
        elif plan.kind == "replacement":
            alt = _other_word(rng, tag, word)
            if alt is None:
                return False
            pair_counter += 1
            cells.append(_Cell(alt, tag, AnnotationLabel(LabelKind.REPLACEMENT, pair_counter)))
            pending[idx] = AnnotationLabel(LabelKind.REPLACEMENT, pair_counter)
            resumed_len = 1
        else:  # "other": deletion (mx.em) or insertion (m.exm) variant
            insertion = rng.random() < 0.5
            use_et = True
            # The unmatched word must not share a tag with anything close
            # enough to sanction a spurious replacement.
            nearby = {t for _, t in fluent[max(0, idx - 3) : idx + 4]} | {tag}
            pool = [t for t in ("N", "V", "ADV", "NUM", "ADJ") if t not in nearby]
            if not pool:
                return False
            extra_tag = rng.choice(pool)
            extra = rng.choice(LEXICON[extra_tag])
            pair_counter += 1
            cells.append(_Cell(word, tag, AnnotationLabel(LabelKind.MATCH, pair_counter)))
            pending[idx] = AnnotationLabel(LabelKind.MATCH, pair_counter)
            if not insertion:
                # An extra removed-text word the resumed text drops.
                cells.append(_Cell(extra, extra_tag, AnnotationLabel(LabelKind.OTHER)))
            resumed_len = 2 if insertion else 1

        if use_frag:
            cells.append(fragment_cell())
        gap = len(cells)
        ets = editing_cells() if use_et else []
        cells.extend(ets)
        ints.append(gap)
        et_end = gap + len(ets)

        if insertion:
            # The extra word goes to the resumed text instead.
            cells.append(_Cell(extra, extra_tag, AnnotationLabel(LabelKind.OTHER)))
        gold.append(
            GoldRepair(
                removed_span=(start, gap),
                editing_span=(gap, et_end),
                resumed_span=(et_end, et_end + resumed_len),
                klass=RepairClass.MODIFICATION,
            )
        )
        return True

    for idx, (word, tag) in enumerate(fluent):
        plan = by_site.get(idx)
        if plan is not None and not inject(plan, idx):
            return None
        label = pending.pop(idx, AnnotationLabel())
        cells.append(_Cell(word, tag, label))

    if pending:
        return None
    if not _is_clean(cells, gold):
        return None

    tokens = tuple(
        Token(
            surface=c.word,
            position=i,
            turn_id=turn_id,
            is_fragment=c.word.endswith("-"),
        )
        for i, c in enumerate(cells)
    )
    turn = AnnotatedTurn(
        turn_id=turn_id,
        tokens=tokens,
        labels=tuple(c.label for c in cells),
        interruption_points=frozenset(ints),
        gold_tags=tuple(c.tag for c in cells),
    )
    return turn, gold


def _is_clean(cells: Sequence[_Cell], gold: Sequence[GoldRepair]) -> bool:
    """Reject turns where accidental correspondences could mislead the
    detector: equal words or repeated bigrams close together that are
    not gold pairs, or a same-tag pair hugging an abridged gap.

    Cue-phrase words stay scannable: unlike filled pauses they are
    legitimate correspondence candidates and can collide with content
    words (a subject "i" near "i guess").
    """

    def scannable(i: int) -> bool:
        c = cells[i]
        return not c.word.endswith("-") and c.word not in FILLED_PAUSES

    gold_pairs = set()
    by_index: dict[int, list[int]] = {}
    for i, c in enumerate(cells):
        if c.label.kind in (LabelKind.MATCH, LabelKind.REPLACEMENT):
            by_index.setdefault(c.label.pair_index, []).append(i)
    for members in by_index.values():
        if len(members) == 2:
            gold_pairs.add(tuple(members))

    n = len(cells)
    for i in range(n):
        if not scannable(i):
            continue
        for j in range(i + 1, min(n, i + 8)):
            if not scannable(j):
                continue
            if cells[i].word == cells[j].word and (i, j) not in gold_pairs:
                return False
    for i in range(n - 1):
        for j in range(i + 1, min(n - 1, i + 10)):
            if (
                scannable(i)
                and scannable(i + 1)
                and scannable(j)
                and scannable(j + 1)
                and cells[i].word == cells[j].word
                and cells[i + 1].word == cells[j + 1].word
            ):
                if (i, j) not in gold_pairs or (i + 1, j + 1) not in gold_pairs:
                    return False

    for repair in gold:
        if repair.klass is not RepairClass.ABRIDGED:
            continue
        gap = repair.interruption_gap
        left = next(
            (p for p in range(repair.removed_span[0] - 1, -1, -1) if scannable(p)), None
        )
        right = next(
            (p for p in range(repair.editing_span[1], n) if scannable(p)), None
        )
        if left is not None and right is not None and cells[left].tag == cells[right].tag:
            return False

    # A same-tag pair sitting right next to a gold correspondence would
    # get sanctioned as a spurious anchored replacement.
    for l, r in gold_pairs:
        for cand in ((l - 1, r - 1), (l + 1, r + 1)):
            cl, cr = cand
            if not (0 <= cl < cr < n) or cand in gold_pairs:
                continue
            if not (scannable(cl) and scannable(cr)):
                continue
            if cells[cl].word != cells[cr].word and cells[cl].tag == cells[cr].tag:
                return False
    return True


def synthesize_corpus(
    spec: SynthSpec, seed: int
) -> list[tuple[AnnotatedTurn, list[GoldRepair]]]:
    """Deterministic corpus of annotated turns with gold repairs."""
    rng = random.Random(seed)
    out = []
    for i in range(spec.turns):
        turn_id = f"t{i:05d}"
        for _ in range(400):
            built = _build_turn(rng, spec, turn_id)
            if built is not None:
                break
        else:
            raise RuntimeError(f"could not synthesize a clean turn for {turn_id}")
        out.append(built)
    return out
