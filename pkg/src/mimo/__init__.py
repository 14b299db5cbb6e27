"""MIMO: a two-level multi-agent engine for ad banner generation.

The inner level (core) runs a supervisor-routed create/evaluate/revise
pipeline over one banner; the outer level (loop) runs several styled cores
in parallel, has a five-judge panel vote on the candidates, and eliminates
the most-rejected style each round until one winner remains.
"""

from .config import EngineConfig
from .core import CoreLimits, CoreResult, CoreRunner, run_core
from .costs import CostLedger, PricingTable, cost_report, merge, total, total_micro
from .domain import (
    AgentRole,
    BannerDraft,
    CampaignRequest,
    ContextMemory,
    FeedbackItem,
    ImageRef,
    JudgeCriterion,
    JudgeVerdict,
    JUDGE_PANEL,
    MediaType,
    MemoryEntry,
    MemoryKind,
    RouteTarget,
    RoutingDecision,
    StylePrompt,
    Vote,
    memory_append,
    memory_digest,
)
from .evaluation import (
    PairReport,
    ScoreTable,
    SixWayReport,
    aggregate,
    evaluate_pair,
    evaluate_six_way,
    parse_metric_payload,
    spearman,
)
from .gateway import CallKind, ChatTurn, LiveBackend, ModelGateway, UsageEvent
from .loop import (
    LoopResult,
    RoundRecord,
    VerdictMatrix,
    eliminate,
    judge_round,
    propose_styles,
    run_loop,
    select_styles,
)
from .prompts import get_template, list_templates, render
from .runstore import Run, RunEvent, RunStore
from .scripting import ScriptBuilder, ScriptedBackend, ScriptedBackendSpec, Strictness, load_script

__version__ = "0.1.0"
