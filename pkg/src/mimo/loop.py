"""Outer tournament: propose and select styles, run one inner pipeline per
style (optionally in parallel), then alternate judging rounds and shared
feedback refinement, eliminating one candidate per round until a winner
remains.

Elimination removes the candidate with the highest rejection count; ties
break to the lowest style id, and one candidate is always eliminated even
when every vote is RECOMMENDED (flagged on the round record), so a run of
``n`` candidates takes exactly ``n - 1`` rounds. All aggregation is ordered
by style id then criterion, so concurrent and sequential execution produce
identical results under a deterministic backend.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .core import CoreLimits, CoreResult, CoreRunner, CoreState
from .costs import CostLedger, merge
from .domain import (
    JUDGE_PANEL,
    STYLE_PROPOSER,
    STYLE_SELECTOR,
    AgentRole,
    BannerDraft,
    CampaignRequest,
    JudgeCriterion,
    JudgeVerdict,
    StylePrompt,
    Vote,
)
from .errors import MimoError, StyleParseFailure, VerdictParseFailure
from .gateway import ChatTurn, ModelGateway
from .prompts import render
from .runstore import Action, CounterClock, NullTranscriptWriter, Run

CRITERION_FOCUS: dict[JudgeCriterion, str] = {
    JudgeCriterion.VISUAL_DESIGN: "visual design",
    JudgeCriterion.COPYWRITING_QUALITY: "copywriting quality",
    JudgeCriterion.BRAND_CONSISTENCY: "brand consistency",
    JudgeCriterion.USER_EXPERIENCE: "user experience",
    JudgeCriterion.TECHNICAL_FIDELITY: "technical fidelity",
}

_VOTE_RE = re.compile(r"(?<![A-Za-z])(RECOMMENDED|REJECTED)(?![A-Za-z])", re.IGNORECASE)
_STYLE_KEY_RE = re.compile(r"style[_\s]?(\d+)", re.IGNORECASE)
_BRACE_RE = re.compile(r"\{")


@dataclass
class VerdictMatrix:
    """All verdicts of one round, complete over (panel criterion, candidate)."""

    round: int
    verdicts: dict[tuple[JudgeCriterion, int], JudgeVerdict]
    panel: tuple[JudgeCriterion, ...] = JUDGE_PANEL

    def __post_init__(self):
        candidates = self.candidates()
        expected = {(c, sid) for sid in candidates for c in self.panel}
        if set(self.verdicts) != expected:
            raise ValueError("verdict matrix incomplete: need one verdict per (criterion, candidate)")

    def candidates(self) -> list[int]:
        return sorted({sid for _, sid in self.verdicts})

    def ordered(self) -> list[JudgeVerdict]:
        return [
            self.verdicts[(criterion, sid)]
            for sid in self.candidates()
            for criterion in self.panel
        ]

    def rejection_counts(self) -> dict[int, int]:
        counts = {sid: 0 for sid in self.candidates()}
        for verdict in self.verdicts.values():
            if verdict.vote is Vote.REJECTED:
                counts[verdict.candidate] += 1
        return counts


@dataclass
class RoundRecord:
    round: int
    survivors_before: list[int]
    eliminated: int
    rejection_counts: dict[int, int]
    feedback_bundle: list[str]
    all_recommended: bool = False

    def to_dict(self) -> dict:
        return {
            "all_recommended": self.all_recommended,
            "eliminated": self.eliminated,
            "feedback_bundle": self.feedback_bundle,
            "rejection_counts": {str(k): v for k, v in sorted(self.rejection_counts.items())},
            "round": self.round,
            "survivors_before": self.survivors_before,
        }


@dataclass
class LoopResult:
    winner: BannerDraft
    rounds: list[RoundRecord]
    per_style_results: dict[int, CoreResult]
    ledger: CostLedger
    styles: list[StylePrompt] = field(default_factory=list)


def extract_json_object(text: str) -> dict | None:
    """First balanced brace block parsed as JSON, or None."""
    for start_match in _BRACE_RE.finditer(text):
        start = start_match.start()
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    try:
                        payload = json.loads(text[start : i + 1])
                    except json.JSONDecodeError:
                        return None
                    return payload if isinstance(payload, dict) else None
        break
    return None


def _parse_styles(text: str, k: int) -> list[StylePrompt] | None:
    payload = extract_json_object(text)
    if payload is None:
        return None
    expected = [f"style_{i + 1}" for i in range(k)]
    if set(payload) != set(expected):
        return None
    descriptions = []
    for key in expected:
        value = payload[key]
        if not isinstance(value, str) or not value.strip():
            return None
        descriptions.append(value.strip())
    if len(set(descriptions)) != len(descriptions):
        return None  # duplicates violate the distinctness requirement
    return [StylePrompt(style_id=i, description=d) for i, d in enumerate(descriptions)]


def propose_styles(
    request: CampaignRequest,
    gateway: ModelGateway,
    k: int = 5,
    *,
    ledger: CostLedger | None = None,
    writer=None,
) -> list[StylePrompt]:
    """Ask the proposer for k distinct keyed styles; one corrective retry."""
    ledger = ledger if ledger is not None else CostLedger()
    writer = writer if writer is not None else NullTranscriptWriter()
    bindings = {
        "product": request.product.strip() or request.prompt,
        "logo": f"Brand logo image ({request.logo.media_type.value}, id {request.logo.id[:12]})",
    }
    body = render("style_prompting", bindings)
    if k != 5:
        body += (
            f"\n\nGenerate exactly {k} distinct style prompts instead of five, "
            f"keyed style_1 through style_{k}."
        )
    turns = [ChatTurn.user(body, (request.logo,))]
    text, usage = gateway.complete(STYLE_PROPOSER, turns)
    ledger.add(usage)
    writer.log(Action.PROPOSE_STYLES, {"call": "propose_styles"},
               actor=STYLE_PROPOSER.token(), usage=usage)
    styles = _parse_styles(text, k)
    if styles is None:
        retry = turns + [
            ChatTurn.assistant(text),
            ChatTurn.user(
                f"Your previous reply was not valid. Return exactly {k} distinct "
                f"style prompts as JSON keyed style_1 through style_{k}."
            ),
        ]
        text, usage = gateway.complete(STYLE_PROPOSER, retry)
        ledger.add(usage)
        writer.log(Action.PROPOSE_STYLES, {"call": "propose_styles_retry"},
                   actor=STYLE_PROPOSER.token(), usage=usage)
        styles = _parse_styles(text, k)
        if styles is None:
            writer.log(Action.ERROR, {"error": "StyleParseFailure", "text": text})
            raise StyleParseFailure(f"unparseable style proposal: {text!r}")
    writer.log(
        Action.PROPOSE_STYLES,
        {"styles": [{"style_id": s.style_id, "description": s.description} for s in styles]},
    )
    return styles


def select_styles(
    pool: Sequence[StylePrompt],
    request: CampaignRequest,
    n: int,
    gateway: ModelGateway,
    *,
    ledger: CostLedger | None = None,
    writer=None,
) -> list[StylePrompt]:
    """Pick n styles from the pool by model-ranked compatibility; fail-open."""
    if n > len(pool):
        raise ValueError("cannot select more styles than the pool holds")
    ledger = ledger if ledger is not None else CostLedger()
    writer = writer if writer is not None else NullTranscriptWriter()
    if n == len(pool):
        writer.log(
            Action.SELECT_STYLES,
            {"fallback": False, "identity": True,
             "selected": [s.style_id for s in pool]},
        )
        return list(pool)

    listing = "\n".join(f"style_{s.style_id + 1}: {s.description}" for s in pool)
    prompt = (
        f"Campaign prompt: {request.prompt}\n"
        f"Product: {request.product or request.prompt}\n\n"
        f"Candidate styles:\n{listing}\n\n"
        f"Select the {n} styles most compatible with the product and brand logo. "
        f"Respond with their keys, comma-separated (for example: style_1, style_3)."
    )
    text, usage = gateway.complete(STYLE_SELECTOR, [ChatTurn.user(prompt, (request.logo,))])
    ledger.add(usage)
    writer.log(Action.SELECT_STYLES, {"call": "select_styles"},
               actor=STYLE_SELECTOR.token(), usage=usage)

    pool_ids = [s.style_id for s in pool]
    parsed: list[int] = []
    for match in _STYLE_KEY_RE.finditer(text):
        sid = int(match.group(1)) - 1
        if sid in pool_ids and sid not in parsed:
            parsed.append(sid)
    if len(parsed) >= n:
        chosen, fallback = parsed[:n], False
    else:
        chosen, fallback = pool_ids[:n], True  # unparseable selection: first n, logged
    writer.log(Action.SELECT_STYLES, {"fallback": fallback, "identity": False,
                                      "selected": chosen})
    by_id = {s.style_id: s for s in pool}
    return [by_id[sid] for sid in chosen]


def _judge_system(criterion: JudgeCriterion) -> str:
    focus = CRITERION_FOCUS[criterion]
    return (
        f"You are the {focus} judge on an ad-banner review panel. Evaluate the "
        f"candidate banner strictly on {focus}. Respond with RECOMMENDED or "
        f"REJECTED, followed by a short reason."
    )


def _parse_vote(text: str) -> tuple[Vote, str] | None:
    matches = _VOTE_RE.findall(text)
    if len({m.upper() for m in matches}) != 1:
        return None
    first = _VOTE_RE.search(text)
    vote = Vote(first.group(1).upper())
    reason = text[first.end():].lstrip(" \t\r\n-—–:;,.").strip()
    return vote, reason


def judge_round(
    candidates: Mapping[int, BannerDraft],
    gateway: ModelGateway,
    *,
    request: CampaignRequest | None = None,
    round_index: int = 0,
    panel: tuple[JudgeCriterion, ...] = JUDGE_PANEL,
    ledger: CostLedger | None = None,
    writer=None,
) -> VerdictMatrix:
    """Collect one verdict per (panel criterion, candidate), independently.

    Each vote is parsed against the two-token set with one corrective retry;
    a failure identifies the judge and candidate.
    """
    if len(candidates) < 2:
        raise ValueError("judging requires at least 2 candidates")
    ledger = ledger if ledger is not None else CostLedger()
    writer = writer if writer is not None else NullTranscriptWriter()

    verdicts: dict[tuple[JudgeCriterion, int], JudgeVerdict] = {}
    for sid in sorted(candidates):
        draft = candidates[sid]
        for criterion in panel:
            judge = AgentRole.judge(criterion)
            context = f"Candidate style_{sid + 1}, elimination round {round_index + 1}."
            if request is not None:
                context += f"\nCampaign prompt: {request.prompt}"
            attachments = (draft.image,) if request is None else (request.logo, draft.image)
            turns = [
                ChatTurn.system(_judge_system(criterion)),
                ChatTurn.user(context, attachments),
            ]
            text, usage = gateway.complete(judge, turns)
            ledger.add(usage)
            writer.log(
                Action.JUDGE,
                {"call": "judge", "candidate": sid, "criterion": criterion.value,
                 "round": round_index},
                actor=judge.token(), usage=usage,
            )
            parsed = _parse_vote(text)
            if parsed is None:
                retry = turns + [
                    ChatTurn.assistant(text),
                    ChatTurn.user(
                        "Your previous reply did not contain a valid vote. Respond "
                        "with RECOMMENDED or REJECTED, followed by a short reason."
                    ),
                ]
                text, usage = gateway.complete(judge, retry)
                ledger.add(usage)
                writer.log(
                    Action.JUDGE,
                    {"call": "judge_retry", "candidate": sid,
                     "criterion": criterion.value, "round": round_index},
                    actor=judge.token(), usage=usage,
                )
                parsed = _parse_vote(text)
                if parsed is None:
                    writer.log(
                        Action.ERROR,
                        {"candidate": sid, "criterion": criterion.value,
                         "error": "VerdictParseFailure", "text": text},
                    )
                    raise VerdictParseFailure(judge.token(), sid, text)
            vote, reason = parsed
            verdicts[(criterion, sid)] = JudgeVerdict(
                judge=judge, candidate=sid, vote=vote, reason=reason
            )
    matrix = VerdictMatrix(round=round_index, verdicts=verdicts, panel=panel)
    writer.log(
        Action.JUDGE,
        {
            "round": round_index,
            "verdicts": [v.to_dict() for v in matrix.ordered()],
        },
    )
    return matrix


def eliminate(matrix: VerdictMatrix) -> RoundRecord:
    """Remove the candidate with the highest rejection count.

    Ties break to the lowest style id; exactly one candidate goes even when
    every count is zero (flagged ``all_recommended``). The feedback bundle
    carries every reason from the round, shared with all survivors.
    """
    counts = matrix.rejection_counts()
    worst = max(counts.values())
    eliminated = min(sid for sid, count in counts.items() if count == worst)
    return RoundRecord(
        round=matrix.round,
        survivors_before=matrix.candidates(),
        eliminated=eliminated,
        rejection_counts=counts,
        feedback_bundle=[v.reason for v in matrix.ordered()],
        all_recommended=worst == 0,
    )


def run_loop(
    request: CampaignRequest,
    gateway: ModelGateway,
    limits: CoreLimits | None = None,
    *,
    run: Run | None = None,
    jobs: int | None = None,
    layout_planner_enabled: bool = True,
    panel: tuple[JudgeCriterion, ...] = JUDGE_PANEL,
    counter_clocks: bool = False,
    post_process: Callable[[BannerDraft], BannerDraft] | None = None,
) -> LoopResult:
    """Full tournament: propose, select, run cores, judge and eliminate.

    ``jobs`` caps concurrent inner pipelines (default: one per style).
    ``post_process`` is a hook applied to the winning draft (identity by
    default; logo/product replacement is a manual step outside the engine).
    """
    limits = limits or CoreLimits()
    k, n = request.style_pool_size, request.styles_to_run
    writer = run.transcript if run is not None else NullTranscriptWriter()
    loop_ledger = CostLedger()

    pool = propose_styles(request, gateway, k, ledger=loop_ledger, writer=writer)
    selected = select_styles(pool, request, n, gateway, ledger=loop_ledger, writer=writer)

    def candidate_writer(style_id: int):
        if run is None:
            return NullTranscriptWriter()
        clock = CounterClock() if counter_clocks else run.clock
        return run.candidate_writer(style_id, clock)

    runners: dict[int, CoreRunner] = {}
    states: dict[int, CoreState] = {}

    def run_one(style: StylePrompt) -> tuple[CoreRunner, CoreState]:
        runner = CoreRunner(
            request, style, gateway, limits,
            writer=candidate_writer(style.style_id),
            layout_planner_enabled=layout_planner_enabled,
        )
        return runner, runner.run_to_state()

    workers = jobs if jobs is not None else max(1, len(selected))
    order = sorted(selected, key=lambda s: s.style_id)
    if workers <= 1:
        for style in order:
            runners[style.style_id], states[style.style_id] = _run_with_style_tag(
                run_one, style
            )
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool_exec:
            futures = [(style, pool_exec.submit(run_one, style)) for style in order]
            for style, future in futures:
                runners[style.style_id], states[style.style_id] = _collect_with_style_tag(
                    future, style
                )

    survivors = sorted(states)
    rounds: list[RoundRecord] = []
    round_index = 0
    while len(survivors) > 1:
        candidates = {sid: states[sid].draft for sid in survivors}
        matrix = judge_round(
            candidates, gateway, request=request, round_index=round_index,
            panel=panel, ledger=loop_ledger, writer=writer,
        )
        record = eliminate(matrix)
        rounds.append(record)
        survivors = [sid for sid in survivors if sid != record.eliminated]
        writer.log(Action.ELIMINATE, record.to_dict())
        # shared feedback refinement: every survivor sees the round's rationales
        for sid in survivors:
            runner = runners[sid]
            state = runner.inject_judge_feedback(states[sid], record.feedback_bundle)
            states[sid], _ = _run_with_style_tag_state(runner.refine_once, state, sid)
        round_index += 1

    winner_id = survivors[0]
    winner = states[winner_id].draft
    if post_process is not None:
        winner = post_process(winner)

    per_style_results = {sid: runners[sid].result(states[sid]) for sid in sorted(states)}
    ledger = merge(
        [loop_ledger] + [per_style_results[sid].ledger for sid in sorted(per_style_results)]
    )
    writer.log(
        Action.FINISH,
        {
            "rounds": len(rounds),
            "winner_image": winner.image.to_dict(),
            "winner_style": winner_id,
        },
    )
    return LoopResult(
        winner=winner,
        rounds=rounds,
        per_style_results=per_style_results,
        ledger=ledger,
        styles=list(selected),
    )


def _tag(exc: Exception, style_id: int):
    if isinstance(exc, MimoError) and not hasattr(exc, "style_id"):
        exc.style_id = style_id
        exc.args = (f"style_{style_id + 1}: {exc}",)
    return exc


def _run_with_style_tag(fn, style: StylePrompt):
    try:
        return fn(style)
    except Exception as exc:
        raise _tag(exc, style.style_id)


def _collect_with_style_tag(future, style: StylePrompt):
    try:
        return future.result()
    except Exception as exc:
        raise _tag(exc, style.style_id)


def _run_with_style_tag_state(fn, state: CoreState, style_id: int):
    try:
        return fn(state)
    except Exception as exc:
        raise _tag(exc, style_id)
