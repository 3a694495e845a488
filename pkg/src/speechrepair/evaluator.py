"""Detection and correction recall/precision against gold annotations.

A prediction detects a gold repair iff their interruption gaps coincide
(no partial credit); it properly corrects iff, over the gold repair's
extent, the token sequence left behind by the prediction's deletions
equals the gold correction.  Gold repairs are matched greedily left to
right, at most once each.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .corpus import GoldRepair
from .pipeline import JudgedRepair


@dataclass(frozen=True)
class EvalReport:
    gold_total: int
    predicted_total: int
    detected: int
    corrected: int

    def _ratio(self, num: int, denom: int) -> Optional[Fraction]:
        if denom == 0:
            return None
        return Fraction(num, denom)

    @property
    def detection_recall(self) -> Optional[Fraction]:
        return self._ratio(self.detected, self.gold_total)

    @property
    def detection_precision(self) -> Optional[Fraction]:
        return self._ratio(self.detected, self.predicted_total)

    @property
    def correction_recall(self) -> Optional[Fraction]:
        return self._ratio(self.corrected, self.gold_total)

    @property
    def correction_precision(self) -> Optional[Fraction]:
        return self._ratio(self.corrected, self.predicted_total)

    def as_lines(self) -> list[str]:
        """Machine-readable key-value lines."""
        def fmt(value: Optional[Fraction]) -> str:
            return "n/a" if value is None else f"{float(value):.6f}"

        return [
            f"gold_repairs {self.gold_total}",
            f"predicted_repairs {self.predicted_total}",
            f"detected {self.detected}",
            f"properly_corrected {self.corrected}",
            f"detection_recall {fmt(self.detection_recall)} {self.detected}/{self.gold_total}",
            f"detection_precision {fmt(self.detection_precision)} {self.detected}/{self.predicted_total}",
            f"correction_recall {fmt(self.correction_recall)} {self.corrected}/{self.gold_total}",
            f"correction_precision {fmt(self.correction_precision)} {self.corrected}/{self.predicted_total}",
        ]

    def as_table(self) -> str:
        def cell(value: Optional[Fraction]) -> str:
            return " n/a " if value is None else f"{100 * float(value):5.1f}%"

        return "\n".join(
            [
                "                     recall   precision",
                f"detection            {cell(self.detection_recall)}   {cell(self.detection_precision)}",
                f"correction           {cell(self.correction_recall)}   {cell(self.correction_precision)}",
            ]
        )


def score_turn(
    gold: Sequence[GoldRepair], predicted: Sequence[JudgedRepair]
) -> tuple[int, int]:
    """(detected, properly corrected) for one turn."""
    gold = sorted(gold, key=lambda r: r.interruption_gap)
    matched = [False] * len(gold)
    detected = 0
    corrected = 0
    for pred in sorted(predicted, key=lambda r: r.interruption_gap):
        for i, g in enumerate(gold):
            if matched[i] or g.interruption_gap != pred.interruption_gap:
                continue
            matched[i] = True
            detected += 1
            if pred.deleted_indices == g.deleted_indices:
                corrected += 1
            break
    return detected, corrected


def score(
    gold: Mapping[str, Sequence[GoldRepair]],
    predicted: Mapping[str, Sequence[JudgedRepair]],
) -> EvalReport:
    unknown = set(predicted) - set(gold)
    if unknown:
        raise ValueError(f"predictions for unknown turn ids: {sorted(unknown)[:5]}")
    gold_total = sum(len(v) for v in gold.values())
    predicted_total = sum(len(v) for v in predicted.values())
    detected = 0
    corrected = 0
    for turn_id, gold_repairs in gold.items():
        d, c = score_turn(gold_repairs, predicted.get(turn_id, ()))
        detected += d
        corrected += c
    return EvalReport(
        gold_total=gold_total,
        predicted_total=predicted_total,
        detected=detected,
        corrected=corrected,
    )
