"""Run configuration: lexicons, tagset, smoothing, and distance thresholds."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

CONFIG_VERSION = 1

# Compact tagset for dialog transcripts.  FRAG and FILLED_PAUSE are
# reserved: fragments and filled pauses are forced onto them at tagging
# time so their distributions never contaminate content-tag transitions.
DEFAULT_TAGSET = (
    "N", "V", "AUX", "D", "P", "PRO", "ADJ", "ADV", "CONJ", "NUM",
    "WH", "NEG", "INTJ", "PART", "OTHER", "FILLED_PAUSE", "FRAG",
)

DEFAULT_FILLED_PAUSES = ("um", "uh", "er")
DEFAULT_CUE_PHRASES = ("i mean", "i guess", "let's see", "well", "sorry", "okay")


@dataclass(frozen=True)
class RunConfig:
    """One versioned bundle of every tunable constant.

    The distance thresholds (3/6/4/4) are the single-match gap, the
    double-match gap, and the removed/resumed inter-correspondence gaps.
    """

    version: int = CONFIG_VERSION
    tagset: tuple[str, ...] = DEFAULT_TAGSET
    filled_pauses: tuple[str, ...] = DEFAULT_FILLED_PAUSES
    cue_phrases: tuple[str, ...] = DEFAULT_CUE_PHRASES
    alpha: float = 0.1
    open_class_tag: str = "N"
    history_window: int = 10
    single_match_max_gap: int = 3
    double_match_max_gap: int = 6
    removed_gap_max: int = 4
    resumed_gap_max: int = 4

    def __post_init__(self):
        if not 0.0 < self.alpha:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.open_class_tag not in self.tagset:
            raise ValueError(f"open-class tag {self.open_class_tag!r} not in tagset")
        for reserved in ("FRAG", "FILLED_PAUSE"):
            if reserved not in self.tagset:
                raise ValueError(f"tagset must contain reserved tag {reserved}")

    @property
    def editing_terms(self) -> tuple[str, ...]:
        """All editing-term entries, cue phrases first, longest first."""
        phrases = sorted(self.cue_phrases, key=lambda p: -len(p.split()))
        return tuple(phrases) + tuple(self.filled_pauses)

    def is_filled_pause(self, word: str) -> bool:
        return word in self.filled_pauses

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        version = data.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {version}")
        for key in ("tagset", "filled_pauses", "cue_phrases"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return RunConfig.from_json(fh.read())


def save_config(config: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config.to_json() + "\n")


def load_tagset(path) -> tuple[str, ...]:
    """Read a tagset file: one tag mnemonic per line, '#' comments."""
    tags = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                tags.append(line)
    if len(set(tags)) != len(tags):
        raise ValueError("duplicate tags in tagset file")
    return tuple(tags)
