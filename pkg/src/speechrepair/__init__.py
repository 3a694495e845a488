"""Streaming detection and correction of speech repairs in dialog transcripts."""

from .config import RunConfig
from .corpus import (
    AnnotatedTurn,
    AnnotationLabel,
    CorpusError,
    GoldRepair,
    LabelKind,
    RepairClass,
    Token,
    apply_freshstart_breaks,
    extract_gold_repairs,
    parse_turns,
    pattern_string,
    serialize_turns,
)
from .evaluator import EvalReport, score
from .patterns import (
    Clue,
    ClueKind,
    Correspondence,
    CorrKind,
    Judgement,
    RepairPattern,
    TurnContext,
    derive_correction,
    detect_clues,
    judge_locally,
    prefer,
    sanctioned_search,
    try_add,
    validate_pattern,
)
from .pipeline import JudgedRepair, TurnResult, process_corpus, process_turn
from .statistical_filter import (
    GapDecision,
    Outcome,
    RepairEvidence,
    Verdict,
    classify_candidate,
    score_gap,
)
from .synth import SynthSpec, synthesize_corpus
from .tagger import Category, TaggerModel, likely_category, load_model, save_model, train, viterbi

__version__ = "0.1.0"
