"""First-order Markov part-of-speech tagger with a repair-state extension.

The model tags words with categories via Viterbi decoding over fluent
transitions, and additionally carries the parameters needed to judge
candidate repairs: per-category repair priors, separate transition
tables for repair and fluent gap states, and factored output
distributions for the fragment / editing-term / word-match clues
observed at a gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .config import RunConfig
from .corpus import (
    AnnotatedTurn,
    LabelKind,
    RepairClass,
    Token,
    _match_editing_run,
    extract_gold_repairs,
)

FRAG_TAG = "FRAG"
FILLED_PAUSE_TAG = "FILLED_PAUSE"

# Value spaces for the factored clue-output distributions.
F_VALUES = ("absent", "present")
E_VALUES = ("none", "uh", "um", "cue")
M_VALUES = ("none", "single", "double", "replacement", "mixed")
CLUE_SPACES = {"F": F_VALUES, "E": E_VALUES, "M": M_VALUES}

REPAIR_STATE = "tau"
FLUENT_STATE = "phi"

MODEL_FORMAT_VERSION = 1


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class Category:
    id: int
    name: str


class TaggerModel:
    """Immutable after construction; all tables are proper distributions."""

    def __init__(
        self,
        *,
        tagset: Sequence[str],
        alpha: float,
        open_class_tag: str,
        filled_pauses: Sequence[str],
        cue_phrases: Sequence[str],
        lexical: dict,
        lexical_floor: Sequence[float],
        unknown: Sequence[float],
        start: Sequence[float],
        unigram: Sequence[float],
        trans_fluent: Sequence[Sequence[float]],
        trans_repair: Sequence[Sequence[float]],
        repair_prior: Sequence[float],
        clue_output: dict,
    ):
        self.tagset = tuple(Category(i, name) for i, name in enumerate(tagset))
        self.tag_ids = {c.name: c.id for c in self.tagset}
        self.alpha = alpha
        self.open_class_tag = open_class_tag
        self.filled_pauses = tuple(filled_pauses)
        self.cue_phrases = tuple(cue_phrases)
        self.lexical = {w: dict(cols) for w, cols in lexical.items()}
        self.lexical_floor = tuple(lexical_floor)
        self.unknown = tuple(unknown)
        self.start = tuple(start)
        self.unigram = tuple(unigram)
        self.trans_fluent = tuple(tuple(row) for row in trans_fluent)
        self.trans_repair = tuple(tuple(row) for row in trans_repair)
        self.repair_prior = tuple(repair_prior)
        self.clue_output = {
            var: {state: dict(dist) for state, dist in states.items()}
            for var, states in clue_output.items()
        }
        self.vocab = frozenset(self.lexical)
        self._validate()
        n = len(self.tagset)
        self._log_start = tuple(math.log(p) for p in self.start)
        self._log_fluent = tuple(
            tuple(math.log(p) for p in row) for row in self.trans_fluent
        )
        self._log_repair = tuple(
            tuple(math.log(p) for p in row) for row in self.trans_repair
        )
        self.frag_id = self.tag_ids[FRAG_TAG]
        self.filled_pause_id = self.tag_ids[FILLED_PAUSE_TAG]
        self.open_class_id = self.tag_ids[open_class_tag]

    # -- validation ---------------------------------------------------------

    def _validate(self, tol: float = 1e-9) -> None:
        n = len(self.tagset)
        for name, vec in (("start", self.start), ("unigram", self.unigram)):
            if len(vec) != n or abs(sum(vec) - 1.0) > tol:
                raise ValueError(f"{name} distribution is not proper")
        for name, table in (
            ("trans_fluent", self.trans_fluent),
            ("trans_repair", self.trans_repair),
        ):
            if len(table) != n:
                raise ValueError(f"{name} has wrong shape")
            for row in table:
                if len(row) != n or abs(sum(row) - 1.0) > tol:
                    raise ValueError(f"{name} row is not proper")
                if any(p <= 0.0 for p in row):
                    raise ValueError(f"{name} row has nonpositive mass")
        if len(self.repair_prior) != n or any(not 0.0 < p < 1.0 for p in self.repair_prior):
            raise ValueError("repair prior must lie strictly inside (0,1)")
        for var, space in CLUE_SPACES.items():
            for state in (REPAIR_STATE, FLUENT_STATE):
                dist = self.clue_output[var][state]
                if set(dist) != set(space) or abs(sum(dist.values()) - 1.0) > tol:
                    raise ValueError(f"clue distribution {var}/{state} is not proper")
        for tag_id in range(n):
            total = self.unknown[tag_id]
            seen = 0
            for cols in self.lexical.values():
                if tag_id in cols:
                    total += cols[tag_id]
                    seen += 1
            total += self.lexical_floor[tag_id] * (len(self.lexical) - seen)
            if abs(total - 1.0) > 1e-6:
                raise ValueError(f"lexical row for tag {tag_id} sums to {total}")

    # -- lookups ------------------------------------------------------------

    def category(self, tag_id: int) -> Category:
        return self.tagset[tag_id]

    def emission(self, word: str, tag_id: int) -> float:
        cols = self.lexical.get(word)
        if cols is None:
            return self.unknown[tag_id]
        return cols.get(tag_id, self.lexical_floor[tag_id])

    def log_emission(self, word: str, tag_id: int) -> float:
        return math.log(self.emission(word, tag_id))

    def forced_tag(self, token: Token) -> Optional[int]:
        if token.is_fragment:
            return self.frag_id
        if token.surface in self.filled_pauses:
            return self.filled_pause_id
        return None

    def candidate_tags(self, token: Token) -> range | tuple[int]:
        forced = self.forced_tag(token)
        if forced is not None:
            return (forced,)
        return range(len(self.tagset))

    def log_transition(self, prev: int, cur: int, state: str) -> float:
        table = self._log_repair if state == REPAIR_STATE else self._log_fluent
        return table[prev][cur]

    def log_state_prior(self, tag_id: int, state: str) -> float:
        p = self.repair_prior[tag_id]
        return math.log(p if state == REPAIR_STATE else 1.0 - p)

    def log_clue(self, var: str, state: str, value: str) -> float:
        return math.log(self.clue_output[var][state][value])


# ---------------------------------------------------------------------------
# Decoding


def viterbi(tokens: Sequence[Token], model: TaggerModel) -> list[Category]:
    """Best fluent-transition tag path; ties break toward lower tag ids."""
    if not tokens:
        raise ValueError("cannot decode an empty token sequence")
    deltas: list[dict[int, float]] = []
    back: list[dict[int, int]] = []
    first = tokens[0]
    deltas.append(
        {
            c: model._log_start[c] + model.log_emission(first.surface, c)
            for c in model.candidate_tags(first)
        }
    )
    back.append({})
    for token in tokens[1:]:
        prev = deltas[-1]
        cur: dict[int, float] = {}
        ptr: dict[int, int] = {}
        for c in model.candidate_tags(token):
            best_score = -math.inf
            best_prev = -1
            for p in sorted(prev):
                score = prev[p] + model._log_fluent[p][c]
                if score > best_score:
                    best_score, best_prev = score, p
            cur[c] = best_score + model.log_emission(token.surface, c)
            ptr[c] = best_prev
        deltas.append(cur)
        back.append(ptr)
    last = deltas[-1]
    tag = min(last, key=lambda c: (-last[c], c))
    path = [tag]
    for ptr in reversed(back[1:]):
        tag = ptr[tag]
        path.append(tag)
    path.reverse()
    return [model.category(c) for c in path]


def likely_category(word: str, model: TaggerModel) -> Category:
    """Context-free best category: argmax P(w|C)P(C), open class for OOV."""
    word = word.lower()
    if word.endswith("-") and len(word) > 1:
        return model.category(model.frag_id)
    if word in model.filled_pauses:
        return model.category(model.filled_pause_id)
    cols = model.lexical.get(word)
    if cols is None:
        return model.category(model.open_class_id)
    best = min(cols, key=lambda c: (-cols[c] * model.unigram[c], c))
    return model.category(best)


# ---------------------------------------------------------------------------
# Training


def _smooth(counts: Sequence[float], alpha: float, size: int) -> list[float]:
    total = sum(counts)
    return [(c + alpha) / (total + alpha * size) for c in counts]


def _gold_tag_ids(turn: AnnotatedTurn, tag_ids: dict) -> list[int]:
    if turn.gold_tags is None:
        raise TrainingError(f"turn {turn.turn_id}: token with no gold tag")
    ids = []
    for pos, (token, name) in enumerate(zip(turn.tokens, turn.gold_tags)):
        if name not in tag_ids:
            raise TrainingError(f"turn {turn.turn_id}: unknown tag {name!r}")
        if token.is_fragment:
            ids.append(tag_ids[FRAG_TAG])
        else:
            ids.append(tag_ids[name])
    return ids


def lexical_gap_evidence(
    turn: AnnotatedTurn, gap: int, tags: Sequence[int], model_ctx: "_EvidenceContext"
) -> tuple[str, str, str]:
    """Surface-derived (F, E, M) evidence at a gap of a raw turn.

    This mirrors what the detector can observe: a fragment just before
    the gap, the editing-term run starting at it, and word matches or an
    adjacent same-category replacement straddling it.
    """
    words = turn.words
    n = len(words)
    frag = "present" if gap > 0 and turn.tokens[gap - 1].is_fragment else "absent"

    run = _match_editing_run(words, gap, model_ctx.editing_terms)
    if run == 0:
        e_class = "none"
    else:
        e_class = editing_class(words[gap])
    et_end = gap + run

    def skippable(pos: int) -> bool:
        return turn.tokens[pos].is_fragment or words[pos] in model_ctx.filled_pauses

    def content_between(lo: int, hi: int) -> int:
        return sum(
            1 for p in range(lo + 1, hi) if not (skippable(p) or gap <= p < et_end)
        )

    single = False
    double = False
    replacement = False
    left_lo = max(0, gap - model_ctx.window)
    for r in range(et_end, min(n, et_end + model_ctx.single_gap + 2)):
        if skippable(r):
            continue
        for l in range(left_lo, gap):
            if skippable(l):
                continue
            if words[l] == words[r] and content_between(l, r) <= model_ctx.single_gap:
                single = True
    for r in range(et_end, min(n - 1, et_end + model_ctx.double_gap + 2)):
        for l in range(left_lo, gap - 1):
            if (
                words[l] == words[r]
                and words[l + 1] == words[r + 1]
                and l + 1 < gap
                and content_between(l + 1, r) <= model_ctx.double_gap
            ):
                double = True
    lefts = [p for p in range(gap - 1, -1, -1) if not skippable(p)]
    rights = [p for p in range(et_end, n) if not skippable(p)]
    if lefts and rights:
        l, r = lefts[0], rights[0]
        if content_between(l, r) == 0 and words[l] != words[r] and tags[l] == tags[r]:
            replacement = True

    if (single or double) and replacement:
        m_class = "mixed"
    elif double:
        m_class = "double"
    elif single:
        m_class = "single"
    elif replacement:
        m_class = "replacement"
    else:
        m_class = "none"
    return frag, e_class, m_class


def editing_class(first_word: str) -> str:
    if first_word in ("uh", "er"):
        return "uh"
    if first_word == "um":
        return "um"
    return "cue"


def gold_repair_evidence(turn: AnnotatedTurn, repair) -> tuple[str, str, str]:
    """(F, E, M) evidence of a gold modification repair, from its labels."""
    gap = repair.interruption_gap
    frag = "present" if gap > 0 and turn.tokens[gap - 1].is_fragment else "absent"
    e0, e1 = repair.editing_span
    e_class = "none" if e0 == e1 else editing_class(turn.words[e0])

    pairs: dict[tuple[LabelKind, int], list[int]] = {}
    lo, hi = repair.removed_span[0], repair.resumed_span[1]
    for pos in range(lo, hi):
        label = turn.labels[pos]
        if label.kind in (LabelKind.MATCH, LabelKind.REPLACEMENT):
            pairs.setdefault((label.kind, label.pair_index), []).append(pos)
    matches = sorted(v for (k, _), v in pairs.items() if k is LabelKind.MATCH and len(v) == 2)
    repls = [v for (k, _), v in pairs.items() if k is LabelKind.REPLACEMENT and len(v) == 2]
    double = any(
        b[0] - a[0] == 1 and b[1] - a[1] == 1 for a, b in zip(matches, matches[1:])
    )
    if matches and repls:
        m_class = "mixed"
    elif double:
        m_class = "double"
    elif matches:
        m_class = "single"
    elif repls:
        m_class = "replacement"
    else:
        m_class = "none"
    return frag, e_class, m_class


class _EvidenceContext:
    def __init__(self, config: RunConfig):
        self.editing_terms = config.editing_terms
        self.filled_pauses = set(config.filled_pauses)
        self.window = config.history_window
        self.single_gap = config.single_match_max_gap
        self.double_gap = config.double_match_max_gap


def train(turns: Iterable[AnnotatedTurn], config: RunConfig) -> TaggerModel:
    """Maximum-likelihood estimation with add-alpha smoothing throughout.

    Repair-state events are exactly the gold interruption points of
    modification repairs; abridged interruption points and all other
    gaps count as fluent.
    """
    turns = list(turns)
    if not turns:
        raise TrainingError("empty training corpus")

    tagset = config.tagset
    tag_ids = {name: i for i, name in enumerate(tagset)}
    n_tags = len(tagset)
    alpha = config.alpha
    ctx = _EvidenceContext(config)

    word_tag: dict[str, dict[int, int]] = {}
    word_total: dict[str, int] = {}
    tag_total = [0] * n_tags
    start_counts = [0] * n_tags
    fluent_counts = [[0] * n_tags for _ in range(n_tags)]
    repair_counts = [[0] * n_tags for _ in range(n_tags)]
    gap_left = [0] * n_tags
    tau_left = [0] * n_tags
    clue_counts = {
        var: {state: {v: 0 for v in space} for state in (REPAIR_STATE, FLUENT_STATE)}
        for var, space in CLUE_SPACES.items()
    }

    for turn in turns:
        if not turn.tokens:
            continue
        tags = _gold_tag_ids(turn, tag_ids)
        words = turn.words
        start_counts[tags[0]] += 1
        for w, t in zip(words, tags):
            word_tag.setdefault(w, {}).setdefault(t, 0)
            word_tag[w][t] += 1
            word_total[w] = word_total.get(w, 0) + 1
            tag_total[t] += 1

        repairs = extract_gold_repairs(turn)
        mod_repairs = {
            r.interruption_gap: r for r in repairs if r.klass is RepairClass.MODIFICATION
        }
        n = len(words)
        for gap in range(1, n):
            left = tags[gap - 1]
            gap_left[left] += 1
            repair = mod_repairs.get(gap)
            if repair is not None:
                tau_left[left] += 1
                resumed = repair.editing_span[1]
                if resumed < n:
                    repair_counts[left][tags[resumed]] += 1
                f, e, m = gold_repair_evidence(turn, repair)
                state = REPAIR_STATE
            else:
                fluent_counts[left][tags[gap]] += 1
                f, e, m = lexical_gap_evidence(turn, gap, tags, ctx)
                state = FLUENT_STATE
            clue_counts["F"][state][f] += 1
            clue_counts["E"][state][e] += 1
            clue_counts["M"][state][m] += 1

    vocab = sorted(word_tag)
    v_size = len(vocab) + 1  # one extra slot for unseen words
    hapax = [0] * n_tags
    for w, total in word_total.items():
        if total == 1:
            (t,) = word_tag[w].keys()
            hapax[t] += 1

    lexical: dict[str, dict[int, float]] = {}
    lexical_floor = []
    unknown = []
    for t in range(n_tags):
        denom = tag_total[t] + hapax[t] + alpha * v_size
        lexical_floor.append(alpha / denom)
        unknown.append((hapax[t] + alpha) / denom)
    for w in vocab:
        cols = {}
        for t, c in word_tag[w].items():
            denom = tag_total[t] + hapax[t] + alpha * v_size
            cols[t] = (c + alpha) / denom
        lexical[w] = cols

    n_gaps = [gap_left[t] for t in range(n_tags)]
    repair_prior = [
        (tau_left[t] + alpha) / (n_gaps[t] + 2 * alpha) for t in range(n_tags)
    ]
    clue_output = {
        var: {
            state: dict(
                zip(space, _smooth([clue_counts[var][state][v] for v in space], alpha, len(space)))
            )
            for state in (REPAIR_STATE, FLUENT_STATE)
        }
        for var, space in CLUE_SPACES.items()
    }

    return TaggerModel(
        tagset=tagset,
        alpha=alpha,
        open_class_tag=config.open_class_tag,
        filled_pauses=config.filled_pauses,
        cue_phrases=config.cue_phrases,
        lexical=lexical,
        lexical_floor=lexical_floor,
        unknown=unknown,
        start=_smooth(start_counts, alpha, n_tags),
        unigram=_smooth(tag_total, alpha, n_tags),
        trans_fluent=[_smooth(row, alpha, n_tags) for row in fluent_counts],
        trans_repair=[_smooth(row, alpha, n_tags) for row in repair_counts],
        repair_prior=repair_prior,
        clue_output=clue_output,
    )


# ---------------------------------------------------------------------------
# Model file I/O: sectioned key-value text, floats via repr (round-trips)


def save_model(model: TaggerModel, path) -> None:
    lines = ["# speechrepair tagger model"]

    def section(name):
        lines.append("")
        lines.append(f"[{name}]")

    section("meta")
    lines.append(f"format_version {MODEL_FORMAT_VERSION}")
    lines.append(f"alpha {model.alpha!r}")
    lines.append(f"open_class {model.open_class_tag}")
    section("tagset")
    for cat in model.tagset:
        lines.append(f"{cat.id} {cat.name}")
    section("editing_terms")
    for w in model.filled_pauses:
        lines.append(f"filled_pause {w}")
    for p in model.cue_phrases:
        lines.append(f"cue_phrase {p}")
    for name, vec in (
        ("start", model.start),
        ("unigram", model.unigram),
        ("repair_prior", model.repair_prior),
        ("lexical_floor", model.lexical_floor),
        ("unknown", model.unknown),
    ):
        section(name)
        for cat in model.tagset:
            lines.append(f"{cat.name} {vec[cat.id]!r}")
    section("lexical")
    for word in sorted(model.lexical):
        for t in sorted(model.lexical[word]):
            lines.append(f"{word} {model.tagset[t].name} {model.lexical[word][t]!r}")
    for name, table in (("trans_fluent", model.trans_fluent), ("trans_repair", model.trans_repair)):
        section(name)
        for a in model.tagset:
            for b in model.tagset:
                lines.append(f"{a.name} {b.name} {table[a.id][b.id]!r}")
    section("clue_output")
    for var in sorted(CLUE_SPACES):
        for state in (REPAIR_STATE, FLUENT_STATE):
            for value in CLUE_SPACES[var]:
                lines.append(f"{var} {state} {value} {model.clue_output[var][state][value]!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> TaggerModel:
    sections: dict[str, list[list[str]]] = {}
    current = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                sections[current] = []
                continue
            if current is None:
                raise ValueError(f"model file: data before first section: {line!r}")
            sections[current].append(line.split())

    def need(name: str) -> list[list[str]]:
        if name not in sections:
            raise ValueError(f"model file missing [{name}] section")
        return sections[name]

    meta = {row[0]: row[1] for row in need("meta")}
    if int(meta.get("format_version", -1)) != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {meta.get('format_version')}")
    tag_rows = sorted(need("tagset"), key=lambda r: int(r[0]))
    tagset = [r[1] for r in tag_rows]
    ids = {name: i for i, name in enumerate(tagset)}
    n = len(tagset)

    filled, cues = [], []
    for row in need("editing_terms"):
        (filled if row[0] == "filled_pause" else cues).append(" ".join(row[1:]))

    def vector(name: str) -> list[float]:
        vec = [0.0] * n
        for row in need(name):
            vec[ids[row[0]]] = float(row[1])
        return vec

    def table(name: str) -> list[list[float]]:
        t = [[0.0] * n for _ in range(n)]
        for row in need(name):
            t[ids[row[0]]][ids[row[1]]] = float(row[2])
        return t

    lexical: dict[str, dict[int, float]] = {}
    for row in need("lexical"):
        word, tag, prob = row[0], row[1], float(row[2])
        lexical.setdefault(word, {})[ids[tag]] = prob

    clue_output: dict = {
        var: {REPAIR_STATE: {}, FLUENT_STATE: {}} for var in CLUE_SPACES
    }
    for var, state, value, prob in need("clue_output"):
        clue_output[var][state][value] = float(prob)

    return TaggerModel(
        tagset=tagset,
        alpha=float(meta["alpha"]),
        open_class_tag=meta["open_class"],
        filled_pauses=filled,
        cue_phrases=cues,
        lexical=lexical,
        lexical_floor=vector("lexical_floor"),
        unknown=vector("unknown"),
        start=vector("start"),
        unigram=vector("unigram"),
        trans_fluent=table("trans_fluent"),
        trans_repair=table("trans_repair"),
        repair_prior=vector("repair_prior"),
        clue_output=clue_output,
    )
