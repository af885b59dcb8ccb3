"""Corrupt video captions into scored training data; evaluate caption scorers."""

from .builder import BalanceConfig, InstructionRecord, balance_labels, export_instruction_records
from .gateway import ChatRequest, GatewayConfig, HttpGateway, StubGateway, gateway_from_config
from .harness import (
    ScorerAdapter,
    correlation_eval,
    judge_explanations,
    parse_evaluator_output,
    score_dataset,
    stability_check,
)
from .metrics import aggregate_human_ratings, kendall_tau_b, pearson_r, rouge_l_f, spearman_rho
from .pipeline import PipelineConfig, generate_pseudo_captions, run
from .records import (
    CaptionRecord,
    CorrelationReport,
    FactualElements,
    PseudoCaption,
    RatedCandidate,
    ReplacementSet,
    load_records,
    parse_records,
    save_records,
    write_records,
)
from .scoring import quality_score, score_to_label

__version__ = "0.1.0"

__all__ = [
    "BalanceConfig",
    "CaptionRecord",
    "ChatRequest",
    "CorrelationReport",
    "FactualElements",
    "GatewayConfig",
    "HttpGateway",
    "InstructionRecord",
    "PipelineConfig",
    "PseudoCaption",
    "RatedCandidate",
    "ReplacementSet",
    "ScorerAdapter",
    "StubGateway",
    "aggregate_human_ratings",
    "balance_labels",
    "correlation_eval",
    "export_instruction_records",
    "gateway_from_config",
    "generate_pseudo_captions",
    "judge_explanations",
    "kendall_tau_b",
    "load_records",
    "parse_evaluator_output",
    "parse_records",
    "pearson_r",
    "quality_score",
    "rouge_l_f",
    "run",
    "save_records",
    "score_dataset",
    "score_to_label",
    "spearman_rho",
    "stability_check",
    "write_records",
]
