from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mimo.domain import (
    COPYWRITER,
    CORE_SUPERVISOR,
    EMPTY_MEMORY_DIGEST,
    EVAL_SUPERVISOR,
    TEXT_EVALUATOR,
    AgentRole,
    BannerDraft,
    CampaignRequest,
    ContextMemory,
    FeedbackItem,
    ImageRef,
    JudgeCriterion,
    JudgeVerdict,
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
from mimo.errors import SeqMismatch


def entry(seq: int, body: str = "x") -> MemoryEntry:
    return MemoryEntry(seq=seq, author=CORE_SUPERVISOR, kind=MemoryKind.TOOL_LOG, body=body)


# -- memory_append -----------------------------------------------------------


def test_append_to_empty_memory():
    memory = memory_append(ContextMemory(), entry(0))
    assert len(memory) == 1


def test_append_preserves_existing_entries():
    memory = ContextMemory()
    for i in range(3):
        memory = memory_append(memory, entry(i, body=f"b{i}"))
    extended = memory_append(memory, entry(3))
    assert len(extended) == 4
    assert extended.entries[:3] == memory.entries
    assert memory.is_prefix_of(extended)


def test_append_seq_mismatch():
    memory = ContextMemory()
    for i in range(3):
        memory = memory_append(memory, entry(i))
    with pytest.raises(SeqMismatch):
        memory_append(memory, entry(5))


def test_seq_values_are_dense():
    memory = ContextMemory()
    for i in range(5):
        memory = memory.add(COPYWRITER, MemoryKind.CREATION, f"c{i}")
    assert [e.seq for e in memory] == list(range(5))


@given(st.lists(st.text(max_size=20), max_size=12))
def test_append_only_prefix_law(bodies):
    memory = ContextMemory()
    versions = [memory]
    for body in bodies:
        memory = memory.add(CORE_SUPERVISOR, MemoryKind.TOOL_LOG, body)
        versions.append(memory)
    for earlier, later in zip(versions, versions[1:]):
        assert earlier.is_prefix_of(later)


# -- memory_digest -------------------------------------------------------------


def test_digest_deterministic_for_identical_sequences():
    def build():
        m = ContextMemory()
        m = m.add(COPYWRITER, MemoryKind.CREATION, "headline")
        m = m.add(TEXT_EVALUATOR, MemoryKind.FEEDBACK, "looks good")
        return m

    assert memory_digest(build()) == memory_digest(build())


def test_digest_changes_on_single_character_edit():
    base = ContextMemory().add(COPYWRITER, MemoryKind.CREATION, "headline")
    changed = ContextMemory().add(COPYWRITER, MemoryKind.CREATION, "Headline")
    assert memory_digest(base) != memory_digest(changed)


def test_empty_memory_digest_pinned_constant():
    # sha256 of the canonical empty encoding "[]", computed independently
    assert memory_digest(ContextMemory()) == (
        "4f53cda18c2baa0c0354bb5f9a3ecbe5ed12ab4d8e11ba873c2f11161202b945"
    )
    assert EMPTY_MEMORY_DIGEST == memory_digest(ContextMemory())


def test_digest_depends_on_order():
    a = ContextMemory().add(COPYWRITER, MemoryKind.CREATION, "x").add(
        TEXT_EVALUATOR, MemoryKind.FEEDBACK, "y"
    )
    b = ContextMemory().add(TEXT_EVALUATOR, MemoryKind.FEEDBACK, "y").add(
        COPYWRITER, MemoryKind.CREATION, "x"
    )
    assert a.digest() != b.digest()


# -- types -----------------------------------------------------------------------


def test_image_ref_is_deterministic_over_bytes():
    a = ImageRef.for_bytes(b"pixels", MediaType.PNG)
    b = ImageRef.for_bytes(b"pixels", MediaType.PNG)
    assert a == b
    assert a.locator.startswith("images/")


def test_campaign_request_invariants(logo):
    with pytest.raises(ValueError):
        CampaignRequest(prompt="   ", logo=logo)
    with pytest.raises(ValueError):
        CampaignRequest(prompt="p", logo=logo, styles_to_run=6, style_pool_size=5)
    with pytest.raises(ValueError):
        CampaignRequest(prompt="p", logo=logo, banner_width=0)


def test_judge_role_requires_exactly_one_criterion():
    judge = AgentRole.judge(JudgeCriterion.VISUAL_DESIGN)
    assert judge.token() == "Judge:VisualDesign"
    assert AgentRole.from_token("Judge:VisualDesign") == judge
    with pytest.raises(ValueError):
        AgentRole("Judge")
    with pytest.raises(ValueError):
        AgentRole("Copywriter", JudgeCriterion.VISUAL_DESIGN)


def test_feedback_item_must_come_from_evaluation_team():
    FeedbackItem(agent=TEXT_EVALUATOR, comment="ok")
    FeedbackItem(agent=EVAL_SUPERVISOR, comment="ok")
    with pytest.raises(ValueError):
        FeedbackItem(agent=COPYWRITER, comment="not my team")


def test_verdict_vote_domain():
    judge = AgentRole.judge(JudgeCriterion.BRAND_CONSISTENCY)
    verdict = JudgeVerdict(judge=judge, candidate=0, vote=Vote.REJECTED, reason="off-brand")
    assert verdict.vote is Vote.REJECTED
    with pytest.raises(ValueError):
        JudgeVerdict(judge=COPYWRITER, candidate=0, vote=Vote.REJECTED, reason="")


def test_finish_decision_carries_empty_directive():
    RoutingDecision(RouteTarget.FINISH, "")
    with pytest.raises(ValueError):
        RoutingDecision(RouteTarget.FINISH, "keep going")


def test_style_prompt_validation():
    with pytest.raises(ValueError):
        StylePrompt(-1, "desc")
    with pytest.raises(ValueError):
        StylePrompt(0, "   ")


def test_draft_validation(logo):
    draft = BannerDraft(image=logo, style_id=0, step=1, revisions_applied=2)
    assert draft.revisions_applied == 2
    with pytest.raises(ValueError):
        BannerDraft(image=logo, style_id=0, step=-1)


def test_memory_entry_round_trips():
    e = MemoryEntry(
        seq=0,
        author=AgentRole.judge(JudgeCriterion.USER_EXPERIENCE),
        kind=MemoryKind.JUDGE_FEEDBACK,
        body="too cluttered",
    )
    assert MemoryEntry.from_dict(e.to_dict()) == e
