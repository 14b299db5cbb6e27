"""Script builders shared by the core/loop tests and the acceptance suite."""

from __future__ import annotations

import random

from mimo.domain import (
    BACKGROUND_EVALUATOR,
    COPYWRITER,
    CORE_SUPERVISOR,
    CREATE_SUPERVISOR,
    EVAL_SUPERVISOR,
    GRAPHIC_REVISOR,
    IMAGE_RESEARCHER,
    LAYOUT_EVALUATOR,
    LAYOUT_PLANNER,
    TEXT_EVALUATOR,
)
from mimo.scripting import ScriptBuilder, Strictness


def golden_core_builder() -> ScriptBuilder:
    """Create -> Eval -> Revise -> Eval -> FINISH; hand-traced to
    steps_taken=5 and revisions=1."""
    b = ScriptBuilder(Strictness.STRICT_ORDER)
    b.complete(CORE_SUPERVISOR, "ContentCreationTeam")
    b.complete(CREATE_SUPERVISOR, "Copywriter, ImageResearcher")
    b.complete(COPYWRITER, "Headline: Beat the Heat. Subheadline: Solar power. CTA: Shop Now")
    b.generate_image(IMAGE_RESEARCHER)
    b.complete(CORE_SUPERVISOR, "EvaluationTeam")
    b.complete(EVAL_SUPERVISOR, "TextContentEvaluator, LayoutEvaluator, BackgroundImageEvaluator")
    b.complete(TEXT_EVALUATOR, "CTA text too small")
    b.complete(BACKGROUND_EVALUATOR, "Background works well")
    b.complete(LAYOUT_EVALUATOR, "Logo overlaps headline")
    b.complete(CORE_SUPERVISOR, "GraphicRevisor")
    b.complete(GRAPHIC_REVISOR, "Enlarge CTA text and move logo to top-right")
    b.edit_image(GRAPHIC_REVISOR)
    b.complete(CORE_SUPERVISOR, "EvaluationTeam")
    b.complete(EVAL_SUPERVISOR, "TextContentEvaluator")
    b.complete(TEXT_EVALUATOR, "No changes needed")
    b.complete(CORE_SUPERVISOR, "FINISH")
    return b


ROUTE_POOL = [
    "ContentCreationTeam",
    "EvaluationTeam",
    "GraphicRevisor",
    "FINISH",
    "EvaluationTeam",
    "GraphicRevisor",
    "GraphicRevisor",
]

GARBAGE_ROUTES = ["banana", "", "do everything at once", "ContentCreationTeam and FINISH"]

SELECTION_POOL = [
    "Copywriter, ImageResearcher",
    "ImageResearcher",
    "Copywriter, LayoutPlanner, ImageResearcher",
    "Copywriter",
    "whatever you think is best",
]

EVAL_SELECTION_POOL = [
    "TextContentEvaluator",
    "TextContentEvaluator, LayoutEvaluator, BackgroundImageEvaluator",
    "BackgroundImageEvaluator",
    "LayoutEvaluator, TextContentEvaluator",
    "alle",
]

FEEDBACK_POOL = [
    "No changes needed",
    "CTA needs more contrast",
    "Logo is too small",
    "Background distracts from the headline",
]


def loop_script(n: int, k: int = 5, panel_size: int = 5) -> ScriptBuilder:
    """Tournament script for n styles: clean first drafts, each round rejects
    the highest surviving style id, survivors re-evaluate clean. Style 0 wins.
    """
    import json

    from mimo.domain import JUDGE_PANEL, STYLE_PROPOSER, STYLE_SELECTOR, AgentRole
    from mimo.fixtures import DEMO_STYLES

    assert 1 <= n <= k <= len(DEMO_STYLES)
    panel = JUDGE_PANEL[:panel_size]
    styles = DEMO_STYLES[:k]
    b = ScriptBuilder(Strictness.KEYED_LOOKUP)
    b.complete(
        STYLE_PROPOSER,
        json.dumps({f"style_{i + 1}": d for i, d in enumerate(styles)}),
    )
    if n < k:
        b.complete(STYLE_SELECTOR, ", ".join(f"style_{i + 1}" for i in range(n)))

    def core_steps(sid: int):
        tag = styles[sid]
        b.complete(CORE_SUPERVISOR, "ContentCreationTeam", match=tag)
        b.complete(CREATE_SUPERVISOR, "Copywriter, ImageResearcher", match=tag)
        b.complete(COPYWRITER, f"copy for style {sid}", match=tag)
        b.generate_image(IMAGE_RESEARCHER, match=tag)
        b.complete(CORE_SUPERVISOR, "EvaluationTeam", match=tag)
        b.complete(EVAL_SUPERVISOR, "TextContentEvaluator", match=tag)
        b.complete(TEXT_EVALUATOR, "No changes needed", match=tag)
        b.complete(CORE_SUPERVISOR, "FINISH", match=tag)

    for sid in range(n):
        core_steps(sid)

    survivors = list(range(n))
    round_index = 0
    while len(survivors) > 1:
        rejected = max(survivors)
        for sid in sorted(survivors):
            tag = f"Candidate style_{sid + 1}, elimination round {round_index + 1}."
            for i, criterion in enumerate(panel):
                text = (
                    f"REJECTED — weak {criterion.value}"
                    if sid == rejected and i < 2
                    else f"RECOMMENDED — fine {criterion.value}"
                )
                b.complete(AgentRole.judge(criterion), text, match=tag)
        survivors.remove(rejected)
        for sid in survivors:
            tag = styles[sid]
            b.complete(EVAL_SUPERVISOR, "TextContentEvaluator", match=tag)
            b.complete(TEXT_EVALUATOR, "No changes needed", match=tag)
        round_index += 1
    return b


def adversarial_core_builder(rng: random.Random, allow_garbage: bool = True) -> ScriptBuilder:
    """Hostile but inexhaustible script: random routing, random selections.

    Keyed lookup with deep per-key pools, so the run never starves before the
    step cap; with ``allow_garbage`` the supervisor occasionally emits
    unparseable routes (which must surface as RoutingParseFailure, still
    within bounds).
    """
    b = ScriptBuilder(Strictness.KEYED_LOOKUP)
    routes = ROUTE_POOL + (GARBAGE_ROUTES if allow_garbage else [])
    for _ in range(40):
        b.complete(CORE_SUPERVISOR, rng.choice(routes))
    for _ in range(20):
        b.complete(CREATE_SUPERVISOR, rng.choice(SELECTION_POOL))
        b.complete(COPYWRITER, f"copy variant {rng.randrange(1_000_000)}")
        b.complete(LAYOUT_PLANNER, f"layout directive {rng.randrange(1_000_000)}")
        b.generate_image(IMAGE_RESEARCHER)
        b.complete(EVAL_SUPERVISOR, rng.choice(EVAL_SELECTION_POOL))
    for _ in range(30):
        b.complete(TEXT_EVALUATOR, rng.choice(FEEDBACK_POOL))
        b.complete(BACKGROUND_EVALUATOR, rng.choice(FEEDBACK_POOL))
        b.complete(LAYOUT_EVALUATOR, rng.choice(FEEDBACK_POOL))
    for _ in range(12):
        b.complete(GRAPHIC_REVISOR, f"edit instruction {rng.randrange(1_000_000)}")
        b.edit_image(GRAPHIC_REVISOR)
    return b
