"""Uniform access to a multimodal model: text completion, image generation,
and image editing, with per-call usage metering.

Two backends implement the same interface: a live OpenAI-compatible HTTP
backend (this module) and a deterministic scripted backend (``scripting``).
Every call returns exactly one UsageEvent; no call path bypasses metering.
The gateway never parses model output; decision parsing lives in callers.
"""

from __future__ import annotations

import base64
import hashlib
import io
import os
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Protocol, Sequence

import httpx

from .domain import AgentRole, ImageRef, MediaType
from .errors import AttachmentMissing, BackendUnavailable

API_KEY_ENV = "MIMO_API_KEY"

# Decoding temperature default; overridable per config.
DEFAULT_TEMPERATURE = 0.0


class CallKind(str, Enum):
    COMPLETE = "complete"
    GENERATE_IMAGE = "generate_image"
    EDIT_IMAGE = "edit_image"


class TurnRole(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatTurn:
    role: TurnRole
    text: str
    attachments: tuple[ImageRef, ...] = ()

    @staticmethod
    def system(text: str) -> "ChatTurn":
        return ChatTurn(TurnRole.SYSTEM, text)

    @staticmethod
    def user(text: str, attachments: tuple[ImageRef, ...] = ()) -> "ChatTurn":
        return ChatTurn(TurnRole.USER, text, attachments)

    @staticmethod
    def assistant(text: str) -> "ChatTurn":
        return ChatTurn(TurnRole.ASSISTANT, text)


@dataclass(frozen=True)
class UsageEvent:
    """Metering record for one gateway call."""

    input_tokens: int
    output_tokens: int
    images_generated: int
    actor: AgentRole
    call_kind: CallKind

    def __post_init__(self):
        if min(self.input_tokens, self.output_tokens, self.images_generated) < 0:
            raise ValueError("usage counts must be non-negative")
        if self.call_kind is not CallKind.COMPLETE and self.images_generated < 1:
            raise ValueError(f"{self.call_kind.value} events require images_generated >= 1")

    def to_dict(self) -> dict:
        return {
            "actor": self.actor.token(),
            "call_kind": self.call_kind.value,
            "images_generated": self.images_generated,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
        }

    @staticmethod
    def from_dict(data: dict) -> "UsageEvent":
        return UsageEvent(
            input_tokens=int(data["input_tokens"]),
            output_tokens=int(data["output_tokens"]),
            images_generated=int(data["images_generated"]),
            actor=AgentRole.from_token(data["actor"]),
            call_kind=CallKind(data["call_kind"]),
        )


class ImageStore(Protocol):
    """Where a backend persists and resolves image bytes."""

    def store_image(self, data: bytes, media_type: MediaType) -> ImageRef: ...

    def has_image(self, ref: ImageRef) -> bool: ...

    def load_image(self, ref: ImageRef) -> bytes: ...


class ModelGateway(Protocol):
    def complete(self, actor: AgentRole, turns: Sequence[ChatTurn]) -> tuple[str, UsageEvent]: ...

    def generate_image(
        self, actor: AgentRole, prompt: str, width: int, height: int
    ) -> tuple[ImageRef, UsageEvent]: ...

    def edit_image(
        self, actor: AgentRole, base: ImageRef, instruction: str
    ) -> tuple[ImageRef, UsageEvent]: ...


def validate_turns(turns: Sequence[ChatTurn], store: ImageStore) -> None:
    if not turns:
        raise ValueError("turns must be non-empty")
    for i, turn in enumerate(turns):
        if turn.role is TurnRole.SYSTEM and i != 0:
            raise ValueError("system turns may appear only at position 0")
        for ref in turn.attachments:
            if not store.has_image(ref):
                raise AttachmentMissing(f"attachment {ref.id} not found at {ref.locator}")


def validate_image_request(prompt: str, width: int, height: int) -> None:
    if not prompt.strip():
        raise ValueError("prompt must be non-empty")
    if width < 1 or height < 1:
        raise ValueError("image dimensions must be positive")


def placeholder_png(seed: str, width: int = 4, height: int = 4) -> bytes:
    """Tiny valid PNG whose pixels are derived from sha256 of ``seed``.

    Keeps end-to-end file plumbing exercised without a real model: equal
    seeds produce byte-identical images.
    """
    from PIL import Image

    digest = hashlib.sha256(seed.encode("utf-8")).digest()
    need = width * height * 3
    pixels = (digest * (need // len(digest) + 1))[:need]
    img = Image.frombytes("RGB", (width, height), pixels)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


class LiveBackend:
    """OpenAI-compatible HTTP backend.

    Transient failures (network errors, 5xx) are retried with capped
    exponential backoff, at most ``max_attempts`` attempts in total.
    4xx responses are never retried.
    """

    def __init__(
        self,
        image_store: ImageStore,
        base_url: str,
        model_name: str,
        temperature: float = DEFAULT_TEMPERATURE,
        api_key: str | None = None,
        timeout: float = 120.0,
        max_attempts: int = 3,
        transport: httpx.BaseTransport | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.image_store = image_store
        self.base_url = base_url.rstrip("/")
        self.model_name = model_name
        self.temperature = temperature
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.max_attempts = max_attempts
        self._sleeper = sleeper
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    # -- retry plumbing ------------------------------------------------------

    def _request(self, path: str, *, json: dict | None = None,
                 data: dict | None = None, files: dict | None = None) -> dict:
        url = f"{self.base_url}{path}"
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleeper(min(0.5 * 2 ** (attempt - 1), 4.0))
            try:
                response = self._client.post(url, json=json, data=data, files=files, headers=headers)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = BackendUnavailable(f"{url} returned {response.status_code}")
                continue
            if response.status_code >= 400:
                raise BackendUnavailable(
                    f"{url} returned {response.status_code}: {response.text[:200]}"
                )
            return response.json()
        raise BackendUnavailable(f"{url} failed after {self.max_attempts} attempts: {last_error}")

    # -- operations ------------------------------------------------------------

    def complete(self, actor: AgentRole, turns: Sequence[ChatTurn]) -> tuple[str, UsageEvent]:
        validate_turns(turns, self.image_store)
        payload = {
            "model": self.model_name,
            "temperature": self.temperature,
            "messages": [self._encode_turn(t) for t in turns],
        }
        body = self._request("/chat/completions", json=payload)
        try:
            text = body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"malformed chat response: {exc}") from exc
        usage = body.get("usage", {})
        event = UsageEvent(
            input_tokens=int(usage.get("prompt_tokens", 0)),
            output_tokens=int(usage.get("completion_tokens", 0)),
            images_generated=0,
            actor=actor,
            call_kind=CallKind.COMPLETE,
        )
        return text, event

    def generate_image(
        self, actor: AgentRole, prompt: str, width: int, height: int
    ) -> tuple[ImageRef, UsageEvent]:
        validate_image_request(prompt, width, height)
        body = self._request(
            "/images/generations",
            json={
                "model": self.model_name,
                "prompt": prompt,
                "size": f"{width}x{height}",
                "response_format": "b64_json",
            },
        )
        ref = self._store_image_response(body)
        event = self._image_usage(body, actor, CallKind.GENERATE_IMAGE)
        return ref, event

    def edit_image(
        self, actor: AgentRole, base: ImageRef, instruction: str
    ) -> tuple[ImageRef, UsageEvent]:
        if not instruction.strip():
            raise ValueError("instruction must be non-empty")
        if not self.image_store.has_image(base):
            raise AttachmentMissing(f"base image {base.id} not found at {base.locator}")
        raw = self.image_store.load_image(base)
        body = self._request(
            "/images/edits",
            data={
                "model": self.model_name,
                "prompt": instruction,
                "response_format": "b64_json",
            },
            files={"image": (f"{base.id}.{base.media_type.extension}", raw, f"image/{base.media_type.value}")},
        )
        ref = self._store_image_response(body)
        event = self._image_usage(body, actor, CallKind.EDIT_IMAGE)
        return ref, event

    # -- helpers ---------------------------------------------------------------

    def _encode_turn(self, turn: ChatTurn) -> dict:
        if not turn.attachments:
            return {"role": turn.role.value, "content": turn.text}
        parts: list[dict] = [{"type": "text", "text": turn.text}]
        for ref in turn.attachments:
            encoded = base64.b64encode(self.image_store.load_image(ref)).decode("ascii")
            parts.append(
                {
                    "type": "image_url",
                    "image_url": {"url": f"data:image/{ref.media_type.value};base64,{encoded}"},
                }
            )
        return {"role": turn.role.value, "content": parts}

    def _store_image_response(self, body: dict) -> ImageRef:
        try:
            encoded = body["data"][0]["b64_json"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"malformed image response: {exc}") from exc
        return self.image_store.store_image(base64.b64decode(encoded), MediaType.PNG)

    @staticmethod
    def _image_usage(body: dict, actor: AgentRole, kind: CallKind) -> UsageEvent:
        usage = body.get("usage", {})
        return UsageEvent(
            input_tokens=int(usage.get("prompt_tokens", usage.get("input_tokens", 0))),
            output_tokens=int(usage.get("completion_tokens", usage.get("output_tokens", 0))),
            images_generated=max(1, len(body.get("data", []) or [])),
            actor=actor,
            call_kind=kind,
        )
