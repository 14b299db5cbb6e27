"""Ready-made script fixtures for the scripted backend.

Each builder yields a complete, deterministic pipeline whose metered token
and image totals land exactly on one of the four reference cost
configurations:

* ``single_agent_script``  - 500 in / 500 out / 1 image   -> $0.15
* ``core_light_script``    - 2,000 / 2,000 / 1 image      -> $0.33 (no revision)
* ``core_full_script``     - 5,400 / 5,400 / 3 images     -> $0.91 (two revisions)
* ``full_pipeline_script`` - 21,000 / 21,000 / 4 images   -> $2.87 (3-style tournament)

The tournament script uses keyed lookup with per-style match strings, so it
replays identically whether the three pipelines run sequentially or
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

from .domain import (
    BACKGROUND_EVALUATOR,
    COPYWRITER,
    CORE_SUPERVISOR,
    CREATE_SUPERVISOR,
    EVAL_SUPERVISOR,
    GRAPHIC_REVISOR,
    IMAGE_RESEARCHER,
    JUDGE_PANEL,
    LAYOUT_EVALUATOR,
    STYLE_PROPOSER,
    STYLE_SELECTOR,
    AgentRole,
    TEXT_EVALUATOR,
)
from .gateway import CallKind
from .scripting import ScriptBuilder, Strictness

DEMO_STYLES: tuple[str, ...] = (
    "minimalist black and white luxury layout with generous whitespace and bold serif headline",
    "vibrant gradient background with energetic diagonal composition and rounded friendly type",
    "warm earthy palette with natural textures, soft shadows, and an organic handcrafted feel",
    "futuristic neon accents over a dark background with a glowing call-to-action button",
    "retro poster style with flat colors, thick outlines, and playful oversized typography",
)


@dataclass
class _PendingStep:
    actor: AgentRole
    call_kind: CallKind
    text: str = ""
    match: str | None = None


def _spread(total: int, parts: int) -> list[int]:
    """Split ``total`` into ``parts`` near-equal non-negative integers."""
    if parts == 0:
        return []
    base, remainder = divmod(total, parts)
    return [base + 1 if i < remainder else base for i in range(parts)]


def _emit(steps: list[_PendingStep], input_tokens: int, output_tokens: int,
          strictness: Strictness) -> ScriptBuilder:
    """Assign token budgets across steps and write them into a builder.

    Input tokens spread over every call; output tokens over text calls only
    (generated images are billed via the per-image output-token rule).
    """
    text_steps = [s for s in steps if s.call_kind is CallKind.COMPLETE]
    inputs = _spread(input_tokens, len(steps))
    outputs = iter(_spread(output_tokens, len(text_steps)))
    builder = ScriptBuilder(strictness)
    for step, tokens_in in zip(steps, inputs):
        tokens_out = next(outputs) if step.call_kind is CallKind.COMPLETE else 0
        builder.respond(
            step.actor,
            step.call_kind,
            text=step.text,
            input_tokens=tokens_in,
            output_tokens=tokens_out,
            match=step.match,
        )
    return builder


def single_agent_script() -> ScriptBuilder:
    """One-shot baseline: one completion plus one image."""
    builder = ScriptBuilder(Strictness.STRICT_ORDER)
    builder.complete(
        CORE_SUPERVISOR,
        "Square banner, bold headline over product hero shot, logo top-left, "
        "CTA button bottom-right reading 'Shop Now'.",
        input_tokens=500,
        output_tokens=500,
    )
    builder.generate_image(CORE_SUPERVISOR)
    return builder


def core_light_script() -> ScriptBuilder:
    """Single pipeline that passes evaluation on the first draft (1 image)."""
    steps = [
        _PendingStep(CORE_SUPERVISOR, CallKind.COMPLETE, "ContentCreationTeam"),
        _PendingStep(CREATE_SUPERVISOR, CallKind.COMPLETE, "Copywriter, ImageResearcher"),
        _PendingStep(
            COPYWRITER, CallKind.COMPLETE,
            "Headline: Pure Morning Energy. Subheadline: Brewed by sunlight. CTA: Shop Now",
        ),
        _PendingStep(IMAGE_RESEARCHER, CallKind.GENERATE_IMAGE),
        _PendingStep(CORE_SUPERVISOR, CallKind.COMPLETE, "EvaluationTeam"),
        _PendingStep(EVAL_SUPERVISOR, CallKind.COMPLETE, "TextContentEvaluator"),
        _PendingStep(TEXT_EVALUATOR, CallKind.COMPLETE, "No changes needed"),
        _PendingStep(CORE_SUPERVISOR, CallKind.COMPLETE, "FINISH"),
    ]
    return _emit(steps, 2000, 2000, Strictness.STRICT_ORDER)


def core_full_script() -> ScriptBuilder:
    """Single pipeline with two revision cycles (3 images total)."""
    steps = [
        _PendingStep(CORE_SUPERVISOR, CallKind.COMPLETE, "ContentCreationTeam"),
        _PendingStep(CREATE_SUPERVISOR, CallKind.COMPLETE, "Copywriter, ImageResearcher"),
        _PendingStep(
            COPYWRITER, CallKind.COMPLETE,
            "Headline: Light Your Trail. Subheadline: Built for dusk rides. CTA: Ride Now",
        ),
        _PendingStep(IMAGE_RESEARCHER, CallKind.GENERATE_IMAGE),
        _PendingStep(CORE_SUPERVISOR, CallKind.COMPLETE, "EvaluationTeam"),
        _PendingStep(
            EVAL_SUPERVISOR, CallKind.COMPLETE,
            "TextContentEvaluator, LayoutEvaluator, BackgroundImageEvaluator",
        ),
        _PendingStep(TEXT_EVALUATOR, CallKind.COMPLETE, "CTA text is hard to read when small"),
        _PendingStep(BACKGROUND_EVALUATOR, CallKind.COMPLETE, "Background is too busy behind the headline"),
        _PendingStep(LAYOUT_EVALUATOR, CallKind.COMPLETE, "Logo crowds the headline"),
        _PendingStep(CORE_SUPERVISOR, CallKind.COMPLETE, "GraphicRevisor"),
        _PendingStep(
            GRAPHIC_REVISOR, CallKind.COMPLETE,
            "Enlarge the CTA text, calm the background behind the headline, move the logo up",
        ),
        _PendingStep(GRAPHIC_REVISOR, CallKind.EDIT_IMAGE),
        _PendingStep(CORE_SUPERVISOR, CallKind.COMPLETE, "EvaluationTeam"),
        _PendingStep(EVAL_SUPERVISOR, CallKind.COMPLETE, "TextContentEvaluator"),
        _PendingStep(TEXT_EVALUATOR, CallKind.COMPLETE, "Headline still clips the safe margin"),
        _PendingStep(CORE_SUPERVISOR, CallKind.COMPLETE, "GraphicRevisor"),
        _PendingStep(
            GRAPHIC_REVISOR, CallKind.COMPLETE,
            "Pull the headline inside the safe margin and add padding",
        ),
        _PendingStep(GRAPHIC_REVISOR, CallKind.EDIT_IMAGE),
        _PendingStep(CORE_SUPERVISOR, CallKind.COMPLETE, "EvaluationTeam"),
        _PendingStep(EVAL_SUPERVISOR, CallKind.COMPLETE, "TextContentEvaluator"),
        _PendingStep(TEXT_EVALUATOR, CallKind.COMPLETE, "No changes needed"),
        _PendingStep(CORE_SUPERVISOR, CallKind.COMPLETE, "FINISH"),
    ]
    return _emit(steps, 5400, 5400, Strictness.STRICT_ORDER)


def _style_json(descriptions: tuple[str, ...]) -> str:
    lines = ",\n".join(
        f'  "style_{i + 1}": "{d}"' for i, d in enumerate(descriptions)
    )
    return "{\n" + lines + "\n}"


def full_pipeline_script(rejected_round_1: int = 2, rejected_round_2: int = 1) -> ScriptBuilder:
    """Three-style tournament: 3 parallel pipelines (one image each), two
    judging rounds, and a single final refinement on the winner (4th image).

    ``rejected_round_1`` and ``rejected_round_2`` are the style ids voted
    out in each round; the remaining style wins.
    """
    styles = DEMO_STYLES
    selected = [0, 1, 2]
    if rejected_round_1 not in selected or rejected_round_2 not in selected:
        raise ValueError("rejected styles must be among style ids 0..2")
    if rejected_round_1 == rejected_round_2:
        raise ValueError("cannot reject the same style twice")
    winner = next(s for s in selected if s not in (rejected_round_1, rejected_round_2))

    steps: list[_PendingStep] = [
        _PendingStep(STYLE_PROPOSER, CallKind.COMPLETE, _style_json(styles)),
        _PendingStep(STYLE_SELECTOR, CallKind.COMPLETE, "style_1, style_2, style_3"),
    ]

    copy_lines = {
        0: "Headline: Quiet Luxury. Subheadline: Crafted to last. CTA: Discover",
        1: "Headline: Feel the Pulse. Subheadline: Energy in every detail. CTA: Grab Yours",
        2: "Headline: Rooted in Nature. Subheadline: Honest materials. CTA: Explore",
    }
    for sid in selected:
        style_match = styles[sid]
        steps += [
            _PendingStep(CORE_SUPERVISOR, CallKind.COMPLETE, "ContentCreationTeam", style_match),
            _PendingStep(CREATE_SUPERVISOR, CallKind.COMPLETE, "Copywriter, ImageResearcher", style_match),
            _PendingStep(COPYWRITER, CallKind.COMPLETE, copy_lines[sid], style_match),
            _PendingStep(IMAGE_RESEARCHER, CallKind.GENERATE_IMAGE, "", style_match),
            _PendingStep(CORE_SUPERVISOR, CallKind.COMPLETE, "EvaluationTeam", style_match),
            _PendingStep(EVAL_SUPERVISOR, CallKind.COMPLETE, "TextContentEvaluator", style_match),
            _PendingStep(TEXT_EVALUATOR, CallKind.COMPLETE, "No changes needed", style_match),
            _PendingStep(CORE_SUPERVISOR, CallKind.COMPLETE, "FINISH", style_match),
        ]

    def judge_steps(candidates: list[int], rejected: int, round_index: int, reject_votes: int):
        for sid in sorted(candidates):
            tag = f"Candidate style_{sid + 1}, elimination round {round_index + 1}."
            rejections = reject_votes if sid == rejected else 0
            for j, criterion in enumerate(JUDGE_PANEL):
                judge = AgentRole.judge(criterion)
                if j < rejections:
                    text = f"REJECTED — weak {criterion.value} on this candidate"
                else:
                    text = f"RECOMMENDED — solid {criterion.value}"
                steps.append(_PendingStep(judge, CallKind.COMPLETE, text, tag))

    def refine_steps(survivor: int, feedback: str):
        style_match = styles[survivor]
        steps.append(
            _PendingStep(EVAL_SUPERVISOR, CallKind.COMPLETE, "TextContentEvaluator", style_match)
        )
        steps.append(_PendingStep(TEXT_EVALUATOR, CallKind.COMPLETE, feedback, style_match))

    # round 1: three candidates, one eliminated, survivors evaluate clean
    judge_steps(selected, rejected_round_1, 0, reject_votes=3)
    for survivor in sorted(s for s in selected if s != rejected_round_1):
        refine_steps(survivor, "No changes needed")

    # round 2: two candidates, one eliminated, winner revises once
    round_2 = sorted(s for s in selected if s != rejected_round_1)
    judge_steps(round_2, rejected_round_2, 1, reject_votes=2)
    refine_steps(winner, "The CTA button should be larger for small placements")
    steps.append(
        _PendingStep(
            GRAPHIC_REVISOR, CallKind.COMPLETE,
            "Enlarge the CTA button and thicken its label", styles[winner],
        )
    )
    steps.append(_PendingStep(GRAPHIC_REVISOR, CallKind.EDIT_IMAGE))

    return _emit(steps, 21000, 21000, Strictness.KEYED_LOOKUP)
