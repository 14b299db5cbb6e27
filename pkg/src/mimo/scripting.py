"""Deterministic scripted backend: replays canned responses for testing.

A script is an ordered list of steps keyed by (actor, call_kind). In
``strict_order`` mode the engine must consume steps exactly in sequence;
``keyed_lookup`` buckets steps per key and is safe for concurrent runs.
A step may carry a ``match`` substring that must appear in the call text,
which pins responses to specific calls independently of scheduling order,
as required when concurrent pipelines share one script.

Script files are newline-delimited JSON using the transcript event encoding
with a ``respond`` action.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from .domain import AgentRole, ImageRef, MediaType
from .errors import AttachmentMissing, CorruptTranscript, ScriptExhausted
from .gateway import (
    CallKind,
    ChatTurn,
    ImageStore,
    UsageEvent,
    placeholder_png,
    validate_image_request,
    validate_turns,
)


class Strictness(str, Enum):
    STRICT_ORDER = "strict_order"
    KEYED_LOOKUP = "keyed_lookup"


@dataclass(frozen=True)
class ScriptedStep:
    actor: AgentRole
    call_kind: CallKind
    text: str = ""
    input_tokens: int = 0
    output_tokens: int = 0
    images_generated: int = 0
    match: str | None = None

    def key(self) -> tuple[str, str]:
        return (self.actor.token(), self.call_kind.value)

    def usage(self) -> UsageEvent:
        return UsageEvent(
            input_tokens=self.input_tokens,
            output_tokens=self.output_tokens,
            images_generated=self.images_generated,
            actor=self.actor,
            call_kind=self.call_kind,
        )

    def to_payload(self) -> dict:
        payload = {
            "call_kind": self.call_kind.value,
            "images_generated": self.images_generated,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "text": self.text,
        }
        if self.match is not None:
            payload["match"] = self.match
        return payload


@dataclass(frozen=True)
class ScriptedBackendSpec:
    steps: tuple[ScriptedStep, ...]
    strictness: Strictness = Strictness.KEYED_LOOKUP


def _default_images(call_kind: CallKind) -> int:
    return 0 if call_kind is CallKind.COMPLETE else 1


class ScriptBuilder:
    """Convenience writer for script specs and files."""

    def __init__(self, strictness: Strictness = Strictness.KEYED_LOOKUP):
        self.strictness = strictness
        self._steps: list[ScriptedStep] = []

    def respond(
        self,
        actor: AgentRole,
        call_kind: CallKind,
        text: str = "",
        input_tokens: int = 0,
        output_tokens: int = 0,
        images_generated: int | None = None,
        match: str | None = None,
    ) -> "ScriptBuilder":
        if images_generated is None:
            images_generated = _default_images(call_kind)
        self._steps.append(
            ScriptedStep(
                actor=actor,
                call_kind=call_kind,
                text=text,
                input_tokens=input_tokens,
                output_tokens=output_tokens,
                images_generated=images_generated,
                match=match,
            )
        )
        return self

    def complete(self, actor: AgentRole, text: str, **kwargs) -> "ScriptBuilder":
        return self.respond(actor, CallKind.COMPLETE, text=text, **kwargs)

    def generate_image(self, actor: AgentRole, **kwargs) -> "ScriptBuilder":
        return self.respond(actor, CallKind.GENERATE_IMAGE, **kwargs)

    def edit_image(self, actor: AgentRole, **kwargs) -> "ScriptBuilder":
        return self.respond(actor, CallKind.EDIT_IMAGE, **kwargs)

    def spec(self) -> ScriptedBackendSpec:
        return ScriptedBackendSpec(steps=tuple(self._steps), strictness=self.strictness)

    def backend(self, image_store: ImageStore) -> "ScriptedBackend":
        return ScriptedBackend(self.spec(), image_store)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        lines = []
        for seq, step in enumerate(self._steps):
            event = {
                "action": "respond",
                "actor": step.actor.token(),
                "clock": seq,
                "payload": step.to_payload(),
                "seq": seq,
            }
            lines.append(json.dumps(event, sort_keys=True, separators=(",", ":")))
        header = json.dumps(
            {
                "action": "respond",
                "actor": "engine",
                "clock": 0,
                "payload": {"call_kind": "script_header", "strictness": self.strictness.value},
                "seq": -1,
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        path.write_text("\n".join([header] + lines) + "\n", encoding="utf-8")
        return path


def load_script(path: str | Path, strictness: Strictness | None = None) -> ScriptedBackendSpec:
    """Parse a script file into a spec. A header line may set strictness;
    an explicit ``strictness`` argument wins."""
    path = Path(path)
    steps: list[ScriptedStep] = []
    file_strictness: Strictness | None = None
    with path.open(encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                event = json.loads(line)
                payload = event["payload"]
                kind = payload["call_kind"]
                if kind == "script_header":
                    file_strictness = Strictness(payload["strictness"])
                    continue
                steps.append(
                    ScriptedStep(
                        actor=AgentRole.from_token(event["actor"]),
                        call_kind=CallKind(kind),
                        text=str(payload.get("text", "")),
                        input_tokens=int(payload.get("input_tokens", 0)),
                        output_tokens=int(payload.get("output_tokens", 0)),
                        images_generated=int(
                            payload.get("images_generated", _default_images(CallKind(kind)))
                        ),
                        match=payload.get("match"),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise CorruptTranscript(str(path), line_number, f"bad script line: {exc}") from exc
    chosen = strictness or file_strictness or Strictness.KEYED_LOOKUP
    return ScriptedBackendSpec(steps=tuple(steps), strictness=chosen)


class ScriptedBackend:
    """Replays a script; fully deterministic and thread-safe.

    Identical call sequences yield identical (text, ImageRef, UsageEvent)
    sequences: responses come from the script and generated images are
    derived from content hashes (prompt, or base id plus instruction).
    """

    def __init__(self, spec: ScriptedBackendSpec, image_store: ImageStore):
        self.spec = spec
        self.image_store = image_store
        self._lock = threading.Lock()
        self._consumed = [False] * len(spec.steps)
        self._cursor = 0  # strict_order position

    def remaining(self) -> int:
        with self._lock:
            return self._consumed.count(False)

    def _take(self, actor: AgentRole, call_kind: CallKind, call_text: str) -> ScriptedStep:
        key = (actor.token(), call_kind.value)
        with self._lock:
            if self.spec.strictness is Strictness.STRICT_ORDER:
                if self._cursor >= len(self.spec.steps):
                    raise ScriptExhausted(f"script finished; unexpected call {key}")
                step = self.spec.steps[self._cursor]
                if step.key() != key or (step.match is not None and step.match not in call_text):
                    raise ScriptExhausted(
                        f"out-of-order call {key}; script expects {step.key()}"
                        + (f" matching {step.match!r}" if step.match else "")
                    )
                self._cursor += 1
                return step
            for i, step in enumerate(self.spec.steps):
                if self._consumed[i] or step.key() != key:
                    continue
                if step.match is not None and step.match not in call_text:
                    continue
                self._consumed[i] = True
                return step
            raise ScriptExhausted(f"no remaining script step for {key}")

    # -- gateway interface ----------------------------------------------------

    def complete(self, actor: AgentRole, turns: Sequence[ChatTurn]) -> tuple[str, UsageEvent]:
        validate_turns(turns, self.image_store)
        call_text = "\n".join(turn.text for turn in turns)
        step = self._take(actor, CallKind.COMPLETE, call_text)
        return step.text, step.usage()

    def generate_image(
        self, actor: AgentRole, prompt: str, width: int, height: int
    ) -> tuple[ImageRef, UsageEvent]:
        validate_image_request(prompt, width, height)
        step = self._take(actor, CallKind.GENERATE_IMAGE, prompt)
        ref = self.image_store.store_image(placeholder_png(prompt), MediaType.PNG)
        return ref, step.usage()

    def edit_image(
        self, actor: AgentRole, base: ImageRef, instruction: str
    ) -> tuple[ImageRef, UsageEvent]:
        if not instruction.strip():
            raise ValueError("instruction must be non-empty")
        if not self.image_store.has_image(base):
            raise AttachmentMissing(f"base image {base.id} not found at {base.locator}")
        step = self._take(actor, CallKind.EDIT_IMAGE, instruction)
        ref = self.image_store.store_image(
            placeholder_png(f"{base.id}\x00{instruction}"), MediaType.PNG
        )
        return ref, step.usage()
