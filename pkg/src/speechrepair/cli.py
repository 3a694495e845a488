"""Command-line entry points: train, detect, eval, synth.

Exit codes: 0 success, 1 usage error, 2 data error.  All commands are
deterministic given their inputs (and seed, where one applies).
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter

from . import evaluator, synth
from .config import RunConfig, load_config, load_tagset
from .corpus import (
    AnnotatedTurn,
    CorpusError,
    GoldRepair,
    RepairClass,
    apply_freshstart_breaks,
    extract_gold_repairs,
    parse_corpus_file,
    pattern_string,
    write_corpus_file,
)
from .pipeline import JudgedRepair, process_corpus, render_trace
from .tagger import TrainingError, load_model, save_model, train

USAGE_EXIT = 1
DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="speechrepair", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="estimate a model from a gold-tagged corpus")
    p.add_argument("corpus")
    p.add_argument("model_out")
    p.add_argument("--tagset", help="tagset file, one tag per line")
    p.add_argument("--alpha", type=float, help="add-alpha smoothing constant")
    p.add_argument("--config", help="run configuration JSON")

    p = sub.add_parser("detect", help="detect and correct repairs in a corpus")
    p.add_argument("model")
    p.add_argument("corpus")
    p.add_argument("--corrected-out", help="write corrected turns here (default stdout)")
    p.add_argument("--repairs-out", help="write repair spans as JSON lines")
    p.add_argument("--trace", action="store_true", help="emit builder trace to stderr")
    p.add_argument("--config", help="run configuration JSON")

    p = sub.add_parser("eval", help="score predictions against a gold corpus")
    p.add_argument("gold")
    p.add_argument("predictions", help="repairs JSON-lines file from detect")
    p.add_argument("--config", help="run configuration JSON")

    p = sub.add_parser("synth", help="synthesize a gold-annotated corpus")
    p.add_argument("spec", help="generator parameters as JSON")
    p.add_argument("output")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _load_run_config(args) -> RunConfig:
    config = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    if getattr(args, "alpha", None) is not None:
        overrides["alpha"] = args.alpha
    if getattr(args, "tagset", None):
        overrides["tagset"] = load_tagset(args.tagset)
    if overrides:
        config = RunConfig(**{**_config_dict(config), **overrides})
    return config


def _config_dict(config: RunConfig) -> dict:
    return json.loads(config.to_json())


def _breakdown(turns_with_gold) -> Counter:
    counts: Counter = Counter()
    for turn, repairs in turns_with_gold:
        for repair in repairs:
            if repair.klass is RepairClass.ABRIDGED:
                counts["abridged"] += 1
                continue
            letters = pattern_string(turn, repair).replace("e", "").replace("-", "")
            left, _, right = letters.partition(".")
            if left == right and set(left) == {"m"}:
                counts["word repetition" if len(left) == 1 else "larger repetition"] += 1
            elif left == right == "r":
                counts["word replacement"] += 1
            else:
                counts["other"] += 1
    return counts


def cmd_train(args) -> int:
    config = _load_run_config(args)
    turns = parse_corpus_file(args.corpus)
    segments = []
    for turn in turns:
        segments.extend(apply_freshstart_breaks(turn, config.editing_terms))
    model = train(segments, config)
    save_model(model, args.model_out)
    with_gold = [(t, extract_gold_repairs(t)) for t in segments]
    counts = _breakdown(with_gold)
    total = sum(counts.values())
    print(f"trained on {len(segments)} turns, {total} gold repairs")
    for name in ("word repetition", "larger repetition", "word replacement", "other", "abridged"):
        print(f"  {name:18s} {counts.get(name, 0)}")
    print(f"model written to {args.model_out}")
    return 0


def _repair_json(repair: JudgedRepair) -> str:
    return json.dumps(
        {
            "turn": repair.turn_id,
            "gap": repair.interruption_gap,
            "removed": list(repair.removed),
            "editing": list(repair.editing),
            "class": repair.klass.value,
            "pattern": repair.pattern,
        },
        sort_keys=True,
    )


def cmd_detect(args) -> int:
    config = _load_run_config(args)
    model = load_model(args.model)
    turns = parse_corpus_file(args.corpus)
    results, stats = process_corpus(turns, model, config)

    corrected_lines = [f"{r.turn_id}: {' '.join(r.corrected)}" for r in results]
    if args.corrected_out:
        with open(args.corrected_out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(corrected_lines) + "\n")
    else:
        for line in corrected_lines:
            print(line)
    if args.repairs_out:
        with open(args.repairs_out, "w", encoding="utf-8") as fh:
            for result in results:
                for repair in result.repairs:
                    fh.write(_repair_json(repair) + "\n")
    if args.trace:
        for result in results:
            for line in render_trace(result):
                print(line, file=sys.stderr)
    print(
        f"processed {stats.turns} turns: {stats.repairs} repairs "
        f"({stats.by_class.get('modification', 0)} modification, "
        f"{stats.by_class.get('abridged', 0)} abridged)",
        file=sys.stderr,
    )
    return 0


def _load_predictions(path) -> dict[str, list[JudgedRepair]]:
    out: dict[str, list[JudgedRepair]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
                repair = JudgedRepair(
                    turn_id=data["turn"],
                    klass=RepairClass(data["class"]),
                    removed=tuple(data["removed"]),
                    editing=tuple(data["editing"]),
                    interruption_gap=data["gap"],
                    pattern=data.get("pattern", ""),
                    route="loaded",
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise CorpusError(f"bad prediction record: {exc}", line_no) from None
            out.setdefault(repair.turn_id, []).append(repair)
    return out


def cmd_eval(args) -> int:
    config = _load_run_config(args)
    turns = parse_corpus_file(args.gold)
    gold: dict[str, list[GoldRepair]] = {}
    for turn in turns:
        for segment in apply_freshstart_breaks(turn, config.editing_terms):
            gold[segment.turn_id] = extract_gold_repairs(segment)
    predicted = _load_predictions(args.predictions)
    report = evaluator.score(gold, predicted)
    print(report.as_table())
    for line in report.as_lines():
        print(line)
    return 0


def cmd_synth(args) -> int:
    with open(args.spec, encoding="utf-8") as fh:
        spec = synth.SynthSpec(**json.load(fh))
    pairs = synth.synthesize_corpus(spec, args.seed)
    write_corpus_file((turn for turn, _ in pairs), args.output)
    total = sum(len(g) for _, g in pairs)
    print(f"wrote {len(pairs)} turns with {total} gold repairs to {args.output}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "detect": cmd_detect,
    "eval": cmd_eval,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (CorpusError, TrainingError) as exc:
        print(f"speechrepair: {exc}", file=sys.stderr)
        return DATA_EXIT
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"speechrepair: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
