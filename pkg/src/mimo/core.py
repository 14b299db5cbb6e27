"""Inner pipeline: a supervisor loop that routes between the creation team,
evaluation team, and graphic revisor until the banner is done.

The supervisor emits one token from a closed set each iteration; every other
decision point (team membership, votes) is likewise parsed against closed
sets with a single corrective retry. Hard guarantees enforced here:

* the first activated team is always the creation team (no draft exists yet);
* at most ``max_revisions`` revisions ever happen in one run;
* the loop halts within ``max_steps`` supervisor iterations no matter what
  the backend replies, finishing with the newest draft;
* each step's memory extends the previous step's memory (append-only).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .costs import CostLedger
from .domain import (
    BACKGROUND_EVALUATOR,
    COPYWRITER,
    CORE_SUPERVISOR,
    CREATE_SUPERVISOR,
    EVAL_SUPERVISOR,
    GRAPHIC_REVISOR,
    IMAGE_RESEARCHER,
    LAYOUT_PLANNER,
    AgentRole,
    BannerDraft,
    CampaignRequest,
    ContextMemory,
    FeedbackItem,
    MemoryEntry,
    MemoryKind,
    RouteTarget,
    RoutingDecision,
    StylePrompt,
    LAYOUT_EVALUATOR,
    TEXT_EVALUATOR,
)
from .errors import NoDraftProduced, RevisionCapReached, RoutingParseFailure
from .gateway import ChatTurn, ModelGateway
from .prompts import render
from .runstore import Action, NullTranscriptWriter

ROUTE_TOKENS: dict[str, RouteTarget] = {
    "ContentCreationTeam": RouteTarget.CREATE_TEAM,
    "EvaluationTeam": RouteTarget.EVAL_TEAM,
    "GraphicRevisor": RouteTarget.REVISOR,
    "FINISH": RouteTarget.FINISH,
}

ROUTING_INSTRUCTION = (
    "Decide which team acts next. Respond with exactly one of: "
    "ContentCreationTeam, EvaluationTeam, GraphicRevisor, FINISH."
)

# Agent names accepted in team-selection replies, mapped to roles; both the
# prompt-template spellings and the short role names parse.
CREATE_AGENT_TOKENS: dict[str, AgentRole] = {
    "Copywriter": COPYWRITER,
    "ImageResearcher": IMAGE_RESEARCHER,
    "LayoutPlanner": LAYOUT_PLANNER,
}
EVAL_AGENT_TOKENS: dict[str, AgentRole] = {
    "TextContentEvaluator": TEXT_EVALUATOR,
    "TextEvaluator": TEXT_EVALUATOR,
    "LayoutEvaluator": LAYOUT_EVALUATOR,
    "BackgroundImageEvaluator": BACKGROUND_EVALUATOR,
    "BackgroundEvaluator": BACKGROUND_EVALUATOR,
}

EVALUATOR_TEMPLATES = {
    TEXT_EVALUATOR: "text_evaluator",
    BACKGROUND_EVALUATOR: "background_evaluator",
    LAYOUT_EVALUATOR: "layout_evaluator",
}

# The layout planner has no registry template; it contributes a layout
# directive that is folded into the image-generation prompt.
LAYOUT_PLANNER_SYSTEM = (
    "You are a Layout Planner responsible for proposing the arrangement of the "
    "headline, subheadline, CTA button, logo, and product imagery on the AD banner. "
    "Reply with one short layout directive."
)

CLEAN_FEEDBACK = "no changes needed"


def is_clean_feedback(comment: str) -> bool:
    return comment.strip().lower().startswith(CLEAN_FEEDBACK)


@dataclass(frozen=True)
class CoreLimits:
    max_revisions: int = 3
    max_steps: int = 12

    def __post_init__(self):
        if self.max_revisions < 0:
            raise ValueError("max_revisions must be non-negative")
        # room for at least one create and one evaluate
        if self.max_steps < self.max_revisions + 2:
            raise ValueError("max_steps must be >= max_revisions + 2")


@dataclass(frozen=True)
class CoreState:
    draft: BannerDraft | None
    memory: ContextMemory
    step: int
    revisions: int
    finished: bool
    pending_feedback: tuple[FeedbackItem, ...] = ()

    def __post_init__(self):
        if self.finished and self.draft is None:
            raise ValueError("a finished state must hold a draft")


@dataclass
class CoreResult:
    final_draft: BannerDraft
    transcript: list[MemoryEntry]
    ledger: CostLedger
    steps_taken: int


def _parse_single_token(text: str, tokens: dict) -> object | None:
    stripped = text.strip()
    if stripped in tokens:
        return tokens[stripped]
    found = {
        value
        for token, value in tokens.items()
        if re.search(rf"(?<![A-Za-z]){re.escape(token)}(?![A-Za-z])", text)
    }
    if len(found) == 1:
        return found.pop()
    return None


def _parse_agent_list(text: str, tokens: dict[str, AgentRole]) -> list[AgentRole]:
    selected: list[AgentRole] = []
    for token, role in tokens.items():
        if re.search(rf"(?<![A-Za-z]){re.escape(token)}(?![A-Za-z])", text):
            if role not in selected:
                selected.append(role)
    return selected


class CoreRunner:
    """Drives one banner instance; owns its memory, ledger, and transcript."""

    def __init__(
        self,
        request: CampaignRequest,
        style: StylePrompt,
        gateway: ModelGateway,
        limits: CoreLimits,
        *,
        ledger: CostLedger | None = None,
        writer=None,
        layout_planner_enabled: bool = True,
    ):
        self.request = request
        self.style = style
        self.gateway = gateway
        self.limits = limits
        self.ledger = ledger if ledger is not None else CostLedger()
        self.writer = writer if writer is not None else NullTranscriptWriter()
        self.layout_planner_enabled = layout_planner_enabled
        self._item = request.product.strip() or request.prompt
        self._logged_upto = 0  # memory entries already captured in a summary event

    # -- plumbing -----------------------------------------------------------

    def _complete(self, actor: AgentRole, turns: list[ChatTurn], action: Action, label: str) -> str:
        text, usage = self.gateway.complete(actor, turns)
        self.ledger.add(usage)
        self.writer.log(action, {"call": label}, actor=actor.token(), usage=usage)
        return text

    def _generate(self, actor: AgentRole, prompt: str, action: Action, label: str):
        ref, usage = self.gateway.generate_image(
            actor, prompt, self.request.banner_width, self.request.banner_height
        )
        self.ledger.add(usage)
        self.writer.log(
            action, {"call": label, "image": ref.to_dict()}, actor=actor.token(), usage=usage
        )
        return ref

    def _edit(self, actor: AgentRole, base, instruction: str, action: Action, label: str):
        ref, usage = self.gateway.edit_image(actor, base, instruction)
        self.ledger.add(usage)
        self.writer.log(
            action, {"call": label, "image": ref.to_dict()}, actor=actor.token(), usage=usage
        )
        return ref

    def _summary_payload(self, memory: ContextMemory, **extra) -> dict:
        """Everything appended since the last summary, so transcripts replay
        the whole memory evolution."""
        payload = {
            "appended": [e.to_dict() for e in memory.entries[self._logged_upto:]],
            "memory_digest": memory.digest(),
            "memory_len": len(memory),
        }
        self._logged_upto = len(memory)
        payload.update(extra)
        return payload

    def _context_text(self, state: CoreState) -> str:
        lines = [
            f"Campaign prompt: {self.request.prompt}",
            f"Product: {self.request.product or self._item}",
            f"Style direction: {self.style.description}",
            f"Banner size: {self.request.banner_width}x{self.request.banner_height}",
        ]
        if state.draft is None:
            lines.append("Current draft: none")
        else:
            lines.append(
                f"Current draft: image {state.draft.image.id[:12]} "
                f"(step {state.draft.step}, {state.draft.revisions_applied} revisions applied)"
            )
        lines.append(f"Revisions used: {state.revisions} of {self.limits.max_revisions}")
        lines.append("Shared memory:")
        for entry in state.memory:
            lines.append(f"[{entry.seq}] {entry.author.token()}/{entry.kind.value}: {entry.body}")
        return "\n".join(lines)

    def _attachments(self, state: CoreState) -> tuple:
        refs = [self.request.logo]
        if state.draft is not None:
            refs.append(state.draft.image)
        return tuple(refs)

    def _turns(self, system: str, state: CoreState, instruction: str) -> list[ChatTurn]:
        user = self._context_text(state)
        if instruction:
            user = f"{user}\n\n{instruction}"
        return [ChatTurn.system(system), ChatTurn.user(user, self._attachments(state))]

    # -- state machine ---------------------------------------------------------

    def initial_state(self) -> CoreState:
        memory = ContextMemory()
        body = f"Campaign prompt: {self.request.prompt}"
        if self.request.product:
            body += f"\nProduct: {self.request.product}"
        memory = memory.add(
            CORE_SUPERVISOR, MemoryKind.USER_INPUT, body, attachments=(self.request.logo,)
        )
        memory = memory.add(
            CORE_SUPERVISOR,
            MemoryKind.USER_INPUT,
            f"Style direction: {self.style.description}",
        )
        return CoreState(draft=None, memory=memory, step=0, revisions=0, finished=False)

    def route_supervisor(self, state: CoreState) -> tuple[RoutingDecision, CoreState]:
        if state.finished:
            raise ValueError("cannot route a finished run")
        system = render("core_team_root", {"item": self._item}) + "\n\n" + ROUTING_INSTRUCTION
        turns = self._turns(system, state, "")
        text = self._complete(CORE_SUPERVISOR, turns, Action.ROUTE, "route_supervisor")
        target = _parse_single_token(text, ROUTE_TOKENS)
        if target is None:
            retry_turns = turns + [
                ChatTurn.assistant(text),
                ChatTurn.user(
                    "Your previous reply did not name a valid route. " + ROUTING_INSTRUCTION
                ),
            ]
            text = self._complete(CORE_SUPERVISOR, retry_turns, Action.ROUTE, "route_supervisor_retry")
            target = _parse_single_token(text, ROUTE_TOKENS)
            if target is None:
                self.writer.log(
                    Action.ERROR,
                    {"error": "RoutingParseFailure", "text": text},
                    actor=CORE_SUPERVISOR.token(),
                )
                raise RoutingParseFailure(f"unparseable supervisor route: {text!r}")

        original = target
        if state.draft is None and target is not RouteTarget.CREATE_TEAM:
            target = RouteTarget.CREATE_TEAM
        elif target is RouteTarget.REVISOR and state.revisions >= self.limits.max_revisions:
            # revision budget exhausted: the protocol says to finish instead
            target = RouteTarget.FINISH
        elif target is RouteTarget.REVISOR and not state.pending_feedback:
            # nothing actionable to revise against; gather feedback first
            target = RouteTarget.EVAL_TEAM

        directive = "" if target is RouteTarget.FINISH else text
        decision = RoutingDecision(target=target, directive=directive)

        note = f"Route decision: {target.value}"
        if target is not original:
            note += f" (overridden from {original.value})"
        memory = state.memory.add(CORE_SUPERVISOR, MemoryKind.TOOL_LOG, note)
        new_state = replace(state, memory=memory)
        self.writer.log(
            Action.ROUTE,
            self._summary_payload(
                memory,
                decision=target.value,
                original=original.value if target is not original else None,
                overridden=target is not original,
                step=state.step,
            ),
            actor=CORE_SUPERVISOR.token(),
        )
        return decision, new_state

    def _route_team(
        self,
        state: CoreState,
        supervisor: AgentRole,
        template_id: str,
        tokens: dict[str, AgentRole],
        available: list[AgentRole],
        action: Action,
    ) -> tuple[list[AgentRole], bool]:
        names = sorted({t for t, role in tokens.items() if role in available})
        instruction = (
            "Select the agent(s) to act now. Respond with a comma-separated list from: "
            + ", ".join(names)
            + "."
        )
        turns = self._turns(render(template_id, {}), state, instruction)
        text = self._complete(supervisor, turns, action, f"route_{supervisor.token()}")
        selected = [r for r in _parse_agent_list(text, tokens) if r in available]
        if not selected:
            # unparseable selection fails open: the whole team acts
            return list(available), True
        return selected, False

    def step_create(self, state: CoreState) -> CoreState:
        available = [COPYWRITER]
        if self.layout_planner_enabled:
            available.append(LAYOUT_PLANNER)
        available.append(IMAGE_RESEARCHER)
        selected, fallback = self._route_team(
            state, CREATE_SUPERVISOR, "content_creation_team",
            CREATE_AGENT_TOKENS, available, Action.CREATE,
        )
        memory = state.memory
        copy_text = ""
        layout_directive = ""

        if COPYWRITER in selected:
            copy_text = self._complete(
                COPYWRITER,
                self._turns(
                    render("copywriter", {}),
                    replace(state, memory=memory),
                    "Write the headline, subheadline, and CTA text for this banner.",
                ),
                Action.CREATE,
                "copywriter",
            )
            memory = memory.add(COPYWRITER, MemoryKind.CREATION, copy_text)

        if LAYOUT_PLANNER in selected:
            layout_directive = self._complete(
                LAYOUT_PLANNER,
                self._turns(LAYOUT_PLANNER_SYSTEM, replace(state, memory=memory), ""),
                Action.CREATE,
                "layout_planner",
            )
            memory = memory.add(LAYOUT_PLANNER, MemoryKind.CREATION, layout_directive)

        draft = state.draft
        if IMAGE_RESEARCHER in selected:
            prompt = self._image_prompt(copy_text, layout_directive)
            ref = self._generate(IMAGE_RESEARCHER, prompt, Action.CREATE, "image_researcher")
            draft = BannerDraft(
                image=ref, style_id=self.style.style_id, step=state.step + 1,
                revisions_applied=0,
            )
            memory = memory.add(
                IMAGE_RESEARCHER,
                MemoryKind.CREATION,
                f"Generated banner draft {ref.id[:12]}",
                attachments=(ref,),
            )

        new_state = replace(state, draft=draft, memory=memory)
        self.writer.log(
            Action.CREATE,
            self._summary_payload(
                memory,
                selected=[r.token() for r in selected],
                selection_fallback=fallback,
                image=draft.image.to_dict() if draft is not None else None,
            ),
            actor=CREATE_SUPERVISOR.token(),
        )
        return new_state

    def _image_prompt(self, copy_text: str, layout_directive: str) -> str:
        parts = [
            f"Ad banner image for {self._item}.",
            f"Campaign prompt: {self.request.prompt}",
        ]
        if copy_text:
            parts.append(f"Banner copy: {copy_text}")
        if layout_directive:
            parts.append(f"Layout: {layout_directive}")
        parts.append(f"Style: {self.style.description}")
        parts.append(
            "Include a CTA button icon and the brand logo. Only 1 logo in the image. "
            "All text must be high contrast and visible."
        )
        parts.append(
            f"Canvas {self.request.banner_width}x{self.request.banner_height} pixels."
        )
        return "\n".join(parts)

    def step_evaluate(self, state: CoreState) -> tuple[CoreState, list[FeedbackItem]]:
        if state.draft is None:
            raise ValueError("cannot evaluate before a draft exists")
        available = [TEXT_EVALUATOR, BACKGROUND_EVALUATOR, LAYOUT_EVALUATOR]
        selected, fallback = self._route_team(
            state, EVAL_SUPERVISOR, "evaluation_team",
            EVAL_AGENT_TOKENS, available, Action.EVALUATE,
        )
        # keep a stable execution order regardless of reply order
        selected = [r for r in available if r in selected]
        memory = state.memory
        items: list[FeedbackItem] = []
        for role in selected:
            comment = self._complete(
                role,
                self._turns(
                    render(EVALUATOR_TEMPLATES[role], {}),
                    replace(state, memory=memory),
                    "Evaluate the current banner draft.",
                ),
                Action.EVALUATE,
                role.token(),
            )
            items.append(FeedbackItem(agent=role, comment=comment))
            memory = memory.add(role, MemoryKind.FEEDBACK, comment)
        new_state = replace(
            state, memory=memory, pending_feedback=state.pending_feedback + tuple(items)
        )
        self.writer.log(
            Action.EVALUATE,
            self._summary_payload(
                memory,
                selected=[r.token() for r in selected],
                selection_fallback=fallback,
                feedback=[{"agent": i.agent.token(), "comment": i.comment} for i in items],
            ),
            actor=EVAL_SUPERVISOR.token(),
        )
        return new_state, items

    def step_revise(self, state: CoreState, feedback: tuple[FeedbackItem, ...]) -> CoreState:
        if state.draft is None:
            raise ValueError("cannot revise before a draft exists")
        if state.revisions >= self.limits.max_revisions:
            raise RevisionCapReached(
                f"revision cap of {self.limits.max_revisions} already reached"
            )
        if not feedback:
            raise ValueError("revision requires feedback")
        feedback_text = "\n".join(f"- {i.agent.token()}: {i.comment}" for i in feedback)
        instruction = self._complete(
            GRAPHIC_REVISOR,
            self._turns(
                render("graphic_revisor", {}),
                state,
                "Feedback to address:\n"
                + feedback_text
                + "\n\nReply with one precise edit instruction for the image editing tool.",
            ),
            Action.REVISE,
            "graphic_revisor",
        )
        ref = self._edit(
            GRAPHIC_REVISOR, state.draft.image, instruction, Action.REVISE, "edit_image"
        )
        draft = BannerDraft(
            image=ref,
            style_id=self.style.style_id,
            step=state.step + 1,
            revisions_applied=state.draft.revisions_applied + 1,
        )
        memory = state.memory.add(
            GRAPHIC_REVISOR, MemoryKind.REVISION_INSTRUCTION, instruction, attachments=(ref,)
        )
        new_state = replace(
            state,
            draft=draft,
            memory=memory,
            revisions=state.revisions + 1,
            pending_feedback=(),
        )
        self.writer.log(
            Action.REVISE,
            self._summary_payload(
                memory,
                image=ref.to_dict(),
                instruction=instruction,
                revisions=new_state.revisions,
            ),
            actor=GRAPHIC_REVISOR.token(),
        )
        return new_state

    def run_to_state(self) -> CoreState:
        """Drive the supervisor loop until FINISH or forced termination."""
        state = self.initial_state()
        while state.step < self.limits.max_steps:
            decision, state = self.route_supervisor(state)
            if decision.target is RouteTarget.FINISH:
                state = replace(state, step=state.step + 1, finished=True)
                self.writer.log(
                    Action.FINISH,
                    {
                        "draft": state.draft.image.to_dict(),
                        "forced": False,
                        "revisions": state.revisions,
                        "steps_taken": state.step,
                    },
                    actor=CORE_SUPERVISOR.token(),
                )
                return state
            if decision.target is RouteTarget.CREATE_TEAM:
                state = self.step_create(state)
            elif decision.target is RouteTarget.EVAL_TEAM:
                state, _ = self.step_evaluate(state)
            elif decision.target is RouteTarget.REVISOR:
                state = self.step_revise(state, state.pending_feedback)
            state = replace(state, step=state.step + 1)

        # supervisor never said FINISH: force termination with the newest draft
        if state.draft is None:
            self.writer.log(
                Action.ERROR, {"error": "NoDraftProduced", "steps_taken": state.step}
            )
            raise NoDraftProduced(
                f"no draft after forced termination at {state.step} steps"
            )
        state = replace(state, finished=True)
        self.writer.log(
            Action.FINISH,
            {
                "draft": state.draft.image.to_dict(),
                "forced": True,
                "revisions": state.revisions,
                "steps_taken": state.step,
            },
            actor=CORE_SUPERVISOR.token(),
        )
        return state

    def inject_judge_feedback(self, state: CoreState, reasons: list[str]) -> CoreState:
        """Append shared judging rationales to memory as judge_feedback entries."""
        memory = state.memory
        for reason in reasons:
            memory = memory.add(CORE_SUPERVISOR, MemoryKind.JUDGE_FEEDBACK, reason)
        return replace(state, memory=memory)

    def refine_once(self, state: CoreState) -> tuple[CoreState, bool]:
        """One bounded evaluate+revise cycle (used between elimination rounds).

        Revises only when some evaluator reported an actionable problem and
        the run's revision budget is not exhausted. Returns (state, revised).
        """
        state = replace(state, finished=False)
        state, items = self.step_evaluate(state)
        state = replace(state, step=state.step + 1)
        actionable = [i for i in state.pending_feedback if not is_clean_feedback(i.comment)]
        revised = False
        if actionable and state.revisions < self.limits.max_revisions:
            state = self.step_revise(state, state.pending_feedback)
            state = replace(state, step=state.step + 1)
            revised = True
        return replace(state, finished=True), revised

    def result(self, state: CoreState) -> CoreResult:
        if state.draft is None:
            raise NoDraftProduced("run ended without a draft")
        return CoreResult(
            final_draft=state.draft,
            transcript=list(state.memory),
            ledger=self.ledger,
            steps_taken=state.step,
        )


def run_core(
    request: CampaignRequest,
    style: StylePrompt,
    gateway: ModelGateway,
    limits: CoreLimits | None = None,
    *,
    writer=None,
    ledger: CostLedger | None = None,
    layout_planner_enabled: bool = True,
) -> CoreResult:
    """Run one banner pipeline to completion and return its result."""
    runner = CoreRunner(
        request,
        style,
        gateway,
        limits or CoreLimits(),
        writer=writer,
        ledger=ledger,
        layout_planner_enabled=layout_planner_enabled,
    )
    state = runner.run_to_state()
    return runner.result(state)
