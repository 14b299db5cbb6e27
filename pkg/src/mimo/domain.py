"""Shared domain types: campaign inputs, banner drafts, agent roles,
judge verdicts, and the append-only context memory both orchestration
levels read and extend.

Memory is an ordered log, not a set. Agents consume conversational
history, so order is preserved and duplicates are allowed. Entries hold
image references only; the image bytes live in the run store.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Mapping

from .errors import SeqMismatch

# Digest of the canonical encoding of an empty memory (sha256 of "[]").
EMPTY_MEMORY_DIGEST = "4f53cda18c2baa0c0354bb5f9a3ecbe5ed12ab4d8e11ba873c2f11161202b945"


class MediaType(str, Enum):
    PNG = "png"
    JPEG = "jpeg"

    @property
    def extension(self) -> str:
        return self.value

    @staticmethod
    def from_extension(ext: str) -> "MediaType":
        ext = ext.lower().lstrip(".")
        if ext in ("jpg", "jpeg"):
            return MediaType.JPEG
        if ext == "png":
            return MediaType.PNG
        raise ValueError(f"unsupported image extension: {ext!r}")


@dataclass(frozen=True)
class ImageRef:
    """Content-addressed reference to an image stored under a run directory.

    ``id`` is the sha256 hex digest of the image bytes, so equal bytes always
    produce equal references. ``locator`` is an opaque path that resolves
    within the run store.
    """

    id: str
    media_type: MediaType
    locator: str

    @staticmethod
    def for_bytes(data: bytes, media_type: MediaType) -> "ImageRef":
        digest = hashlib.sha256(data).hexdigest()
        return ImageRef(
            id=digest,
            media_type=media_type,
            locator=f"images/{digest}.{media_type.extension}",
        )

    def to_dict(self) -> dict:
        return {"id": self.id, "locator": self.locator, "media_type": self.media_type.value}

    @staticmethod
    def from_dict(data: Mapping) -> "ImageRef":
        return ImageRef(
            id=str(data["id"]),
            media_type=MediaType(data["media_type"]),
            locator=str(data["locator"]),
        )


class JudgeCriterion(str, Enum):
    VISUAL_DESIGN = "VisualDesign"
    COPYWRITING_QUALITY = "CopywritingQuality"
    BRAND_CONSISTENCY = "BrandConsistency"
    USER_EXPERIENCE = "UserExperience"
    TECHNICAL_FIDELITY = "TechnicalFidelity"


# Canonical panel order; one judge per criterion, each exactly once.
JUDGE_PANEL: tuple[JudgeCriterion, ...] = (
    JudgeCriterion.VISUAL_DESIGN,
    JudgeCriterion.COPYWRITING_QUALITY,
    JudgeCriterion.BRAND_CONSISTENCY,
    JudgeCriterion.USER_EXPERIENCE,
    JudgeCriterion.TECHNICAL_FIDELITY,
)

_ROLE_NAMES = frozenset(
    {
        "CoreSupervisor",
        "CreateSupervisor",
        "Copywriter",
        "ImageResearcher",
        "LayoutPlanner",
        "EvalSupervisor",
        "TextEvaluator",
        "BackgroundEvaluator",
        "LayoutEvaluator",
        "GraphicRevisor",
        "StyleProposer",
        "StyleSelector",
        "Judge",
    }
)


@dataclass(frozen=True)
class AgentRole:
    """An agent identity. ``Judge`` carries exactly one criterion; every other
    role carries none."""

    name: str
    criterion: JudgeCriterion | None = None

    def __post_init__(self):
        if self.name not in _ROLE_NAMES:
            raise ValueError(f"unknown agent role: {self.name!r}")
        if self.name == "Judge" and self.criterion is None:
            raise ValueError("Judge role requires a criterion")
        if self.name != "Judge" and self.criterion is not None:
            raise ValueError(f"{self.name} must not carry a criterion")

    @staticmethod
    def judge(criterion: JudgeCriterion) -> "AgentRole":
        return AgentRole("Judge", criterion)

    def token(self) -> str:
        """Stable serialization token, e.g. ``Copywriter`` or ``Judge:VisualDesign``."""
        if self.criterion is not None:
            return f"{self.name}:{self.criterion.value}"
        return self.name

    @staticmethod
    def from_token(token: str) -> "AgentRole":
        if ":" in token:
            name, crit = token.split(":", 1)
            return AgentRole(name, JudgeCriterion(crit))
        return AgentRole(token)


CORE_SUPERVISOR = AgentRole("CoreSupervisor")
CREATE_SUPERVISOR = AgentRole("CreateSupervisor")
COPYWRITER = AgentRole("Copywriter")
IMAGE_RESEARCHER = AgentRole("ImageResearcher")
LAYOUT_PLANNER = AgentRole("LayoutPlanner")
EVAL_SUPERVISOR = AgentRole("EvalSupervisor")
TEXT_EVALUATOR = AgentRole("TextEvaluator")
BACKGROUND_EVALUATOR = AgentRole("BackgroundEvaluator")
LAYOUT_EVALUATOR = AgentRole("LayoutEvaluator")
GRAPHIC_REVISOR = AgentRole("GraphicRevisor")
STYLE_PROPOSER = AgentRole("StyleProposer")
STYLE_SELECTOR = AgentRole("StyleSelector")

# Membership sets used by routing and by FeedbackItem validation.
CREATE_TEAM: tuple[AgentRole, ...] = (COPYWRITER, LAYOUT_PLANNER, IMAGE_RESEARCHER)
EVAL_TEAM: tuple[AgentRole, ...] = (
    EVAL_SUPERVISOR,
    TEXT_EVALUATOR,
    BACKGROUND_EVALUATOR,
    LAYOUT_EVALUATOR,
)


class MemoryKind(str, Enum):
    USER_INPUT = "user_input"
    CREATION = "creation"
    FEEDBACK = "feedback"
    REVISION_INSTRUCTION = "revision_instruction"
    JUDGE_FEEDBACK = "judge_feedback"
    TOOL_LOG = "tool_log"


@dataclass(frozen=True)
class MemoryEntry:
    seq: int
    author: AgentRole
    kind: MemoryKind
    body: str
    attachments: tuple[ImageRef, ...] = ()

    def __post_init__(self):
        if self.seq < 0:
            raise ValueError("seq must be non-negative")

    def to_dict(self) -> dict:
        return {
            "attachments": [ref.to_dict() for ref in self.attachments],
            "author": self.author.token(),
            "body": self.body,
            "kind": self.kind.value,
            "seq": self.seq,
        }

    @staticmethod
    def from_dict(data: Mapping) -> "MemoryEntry":
        return MemoryEntry(
            seq=int(data["seq"]),
            author=AgentRole.from_token(data["author"]),
            kind=MemoryKind(data["kind"]),
            body=str(data["body"]),
            attachments=tuple(ImageRef.from_dict(a) for a in data["attachments"]),
        )


@dataclass(frozen=True)
class ContextMemory:
    """Append-only ordered log of typed entries.

    Immutable: ``append`` returns a new memory whose entry list extends this
    one, so every earlier version remains a valid prefix of every later one.
    """

    entries: tuple[MemoryEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[MemoryEntry]:
        return iter(self.entries)

    def append(self, entry: MemoryEntry) -> "ContextMemory":
        if entry.seq != len(self.entries):
            raise SeqMismatch(expected=len(self.entries), got=entry.seq)
        return ContextMemory(self.entries + (entry,))

    def add(self, author: AgentRole, kind: MemoryKind, body: str,
            attachments: tuple[ImageRef, ...] = ()) -> "ContextMemory":
        """Append a new entry with the next sequence number."""
        return self.append(
            MemoryEntry(
                seq=len(self.entries),
                author=author,
                kind=kind,
                body=body,
                attachments=attachments,
            )
        )

    def canonical_encoding(self) -> bytes:
        return json.dumps(
            [e.to_dict() for e in self.entries],
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=True,
        ).encode("utf-8")

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_encoding()).hexdigest()

    def is_prefix_of(self, other: "ContextMemory") -> bool:
        return len(self) <= len(other) and other.entries[: len(self)] == self.entries


def memory_append(memory: ContextMemory, entry: MemoryEntry) -> ContextMemory:
    """Return a new memory extending ``memory`` with ``entry``.

    Raises SeqMismatch unless ``entry.seq`` equals the current length.
    """
    return memory.append(entry)


def memory_digest(memory: ContextMemory) -> str:
    """Hash of the canonical encoding; a pure function of entry contents and order."""
    return memory.digest()


@dataclass(frozen=True)
class CampaignRequest:
    """The user input pair (prompt, logo) plus product metadata and
    generation parameters."""

    prompt: str
    logo: ImageRef
    product: str = ""
    style_pool_size: int = 5
    styles_to_run: int = 3
    banner_width: int = 512
    banner_height: int = 512

    def __post_init__(self):
        if not self.prompt.strip():
            raise ValueError("prompt must be non-empty")
        if self.style_pool_size < 1:
            raise ValueError("style_pool_size must be >= 1")
        if self.styles_to_run < 1:
            raise ValueError("styles_to_run must be >= 1")
        if self.styles_to_run > self.style_pool_size:
            raise ValueError("styles_to_run must not exceed style_pool_size")
        if self.banner_width < 1 or self.banner_height < 1:
            raise ValueError("banner dimensions must be positive")


@dataclass(frozen=True)
class BannerDraft:
    """A versioned visual draft: the image produced at one pipeline step."""

    image: ImageRef
    style_id: int
    step: int
    revisions_applied: int = 0

    def __post_init__(self):
        if self.step < 0:
            raise ValueError("step must be non-negative")
        if self.revisions_applied < 0:
            raise ValueError("revisions_applied must be non-negative")


@dataclass(frozen=True)
class FeedbackItem:
    """One evaluation comment, attributed to a member of the evaluation team."""

    agent: AgentRole
    comment: str

    def __post_init__(self):
        if self.agent not in EVAL_TEAM:
            raise ValueError(f"{self.agent.token()} is not an evaluation-team member")


@dataclass(frozen=True)
class StylePrompt:
    """A short textual visual direction conditioning one core instance.

    ``style_id`` is assigned at proposal time (0..k-1) and never reused
    within a run, so it stays a stable key across elimination rounds.
    """

    style_id: int
    description: str

    def __post_init__(self):
        if self.style_id < 0:
            raise ValueError("style_id must be non-negative")
        if not self.description.strip():
            raise ValueError("description must be non-empty")


class Vote(str, Enum):
    RECOMMENDED = "RECOMMENDED"
    REJECTED = "REJECTED"


@dataclass(frozen=True)
class JudgeVerdict:
    judge: AgentRole
    candidate: int
    vote: Vote
    reason: str

    def __post_init__(self):
        if self.judge.name != "Judge":
            raise ValueError("verdict must come from a Judge role")

    def to_dict(self) -> dict:
        return {
            "candidate": self.candidate,
            "judge": self.judge.token(),
            "reason": self.reason,
            "vote": self.vote.value,
        }


class RouteTarget(str, Enum):
    CREATE_TEAM = "CreateTeam"
    EVAL_TEAM = "EvalTeam"
    REVISOR = "Revisor"
    FINISH = "Finish"


@dataclass(frozen=True)
class RoutingDecision:
    target: RouteTarget
    directive: str = ""

    def __post_init__(self):
        if self.target is RouteTarget.FINISH and self.directive:
            raise ValueError("Finish carries an empty directive")
