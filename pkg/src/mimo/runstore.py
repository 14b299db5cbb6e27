"""Run persistence: append-only NDJSON transcripts plus content-addressed
image artifacts in a deterministic directory layout.

    runs/<run_id>/
        config.json
        transcript.ndjson
        report.json
        images/<sha256>.<ext>
        candidates/<style_id>/transcript.ndjson

Transcript objects are key-sorted so byte-identical replays are diffable.
The clock is injected: wall-clock milliseconds in production, a monotone
counter in tests, which makes transcript bytes reproducible.
"""

from __future__ import annotations

import json
import os
import random
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Mapping

from .domain import ImageRef, MediaType
from .errors import CorruptTranscript, RunNotFound, SeqMismatch, StoreIOError
from .gateway import UsageEvent

ENGINE_ACTOR = "engine"


class Action(str, Enum):
    ROUTE = "route"
    CREATE = "create"
    EVALUATE = "evaluate"
    REVISE = "revise"
    PROPOSE_STYLES = "propose_styles"
    SELECT_STYLES = "select_styles"
    JUDGE = "judge"
    ELIMINATE = "eliminate"
    FINISH = "finish"
    ERROR = "error"


class WallClock:
    """Milliseconds since the epoch."""

    def now(self) -> int:
        return int(time.time() * 1000)


class CounterClock:
    """Monotone counter for byte-stable test transcripts."""

    def __init__(self, start: int = 0):
        self._value = start
        self._lock = threading.Lock()

    def now(self) -> int:
        with self._lock:
            value = self._value
            self._value += 1
            return value


@dataclass(frozen=True)
class RunEvent:
    seq: int
    clock: int
    actor: str  # AgentRole token or "engine"
    action: Action
    payload: dict
    usage: UsageEvent | None = None

    def to_dict(self) -> dict:
        return {
            "action": self.action.value,
            "actor": self.actor,
            "clock": self.clock,
            "payload": self.payload,
            "seq": self.seq,
            "usage": self.usage.to_dict() if self.usage else None,
        }

    @staticmethod
    def from_dict(data: Mapping) -> "RunEvent":
        usage = data.get("usage")
        return RunEvent(
            seq=int(data["seq"]),
            clock=int(data["clock"]),
            actor=str(data["actor"]),
            action=Action(data["action"]),
            payload=dict(data["payload"]),
            usage=UsageEvent.from_dict(usage) if usage else None,
        )


def _encode(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


class TranscriptWriter:
    """Single-writer append-only NDJSON transcript with dense sequencing."""

    def __init__(self, path: Path, clock):
        self.path = path
        self.clock = clock
        # resume sequencing if the transcript already has events
        self._count = (
            sum(1 for line in path.read_text(encoding="utf-8").splitlines() if line.strip())
            if path.is_file()
            else 0
        )
        self._lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    def _write_locked(self, event: RunEvent) -> None:
        try:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(_encode(event.to_dict()) + "\n")
                fh.flush()
        except OSError as exc:
            raise StoreIOError(f"cannot append to {self.path}: {exc}") from exc
        self._count += 1

    def append_event(self, event: RunEvent) -> None:
        with self._lock:
            if event.seq != self._count:
                raise SeqMismatch(expected=self._count, got=event.seq)
            self._write_locked(event)

    def log(
        self,
        action: Action,
        payload: dict,
        actor: str = ENGINE_ACTOR,
        usage: UsageEvent | None = None,
    ) -> RunEvent:
        with self._lock:
            event = RunEvent(
                seq=self._count, clock=self.clock.now(), actor=actor,
                action=action, payload=payload, usage=usage,
            )
            self._write_locked(event)
        return event


class NullTranscriptWriter:
    """Discards events; for library use without a run directory."""

    count = 0

    def append_event(self, event: RunEvent) -> None:
        pass

    def log(self, action, payload, actor=ENGINE_ACTOR, usage=None) -> None:
        return None


def _read_events(path: Path) -> list[RunEvent]:
    events: list[RunEvent] = []
    with path.open(encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                events.append(RunEvent.from_dict(json.loads(stripped)))
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                raise CorruptTranscript(str(path), line_number, str(exc)) from exc
    for i, event in enumerate(events):
        if event.seq != i:
            raise CorruptTranscript(str(path), i + 1, f"seq {event.seq}, expected {i}")
        if i and event.clock < events[i - 1].clock:
            raise CorruptTranscript(str(path), i + 1, "clock went backwards")
    return events


class Run:
    """Handle to one run directory; doubles as the backend image store."""

    def __init__(self, root: Path, run_id: str, clock):
        self.root = root
        self.run_id = run_id
        self.dir = root / run_id
        self.clock = clock
        self.transcript = TranscriptWriter(self.dir / "transcript.ndjson", clock)
        self._image_lock = threading.Lock()

    # -- image store -----------------------------------------------------------

    def store_image(self, data: bytes, media_type: MediaType) -> ImageRef:
        ref = ImageRef.for_bytes(data, media_type)
        path = self.dir / ref.locator
        with self._image_lock:
            if not path.exists():
                try:
                    path.parent.mkdir(parents=True, exist_ok=True)
                    tmp = path.with_suffix(path.suffix + ".tmp")
                    tmp.write_bytes(data)
                    os.replace(tmp, path)
                except OSError as exc:
                    raise StoreIOError(f"cannot store image {ref.id}: {exc}") from exc
        return ref

    def has_image(self, ref: ImageRef) -> bool:
        return (self.dir / ref.locator).is_file()

    def load_image(self, ref: ImageRef) -> bytes:
        path = self.dir / ref.locator
        if not path.is_file():
            raise StoreIOError(f"image {ref.id} missing at {path}")
        return path.read_bytes()

    def image_path(self, ref: ImageRef) -> Path:
        return self.dir / ref.locator

    # -- candidate sub-transcripts ------------------------------------------------

    def candidate_writer(self, style_id: int, clock) -> TranscriptWriter:
        cdir = self.dir / "candidates" / str(style_id)
        try:
            cdir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StoreIOError(f"cannot create {cdir}: {exc}") from exc
        return TranscriptWriter(cdir / "transcript.ndjson", clock)

    def write_report(self, report: dict) -> Path:
        path = self.dir / "report.json"
        path.write_text(
            json.dumps(report, sort_keys=True, indent=2, ensure_ascii=True) + "\n",
            encoding="utf-8",
        )
        return path


class RunStore:
    """Creates and loads runs under a root directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def create_run(self, config: dict, *, clock=None, seed: int | None = None) -> Run:
        """Create ``runs/<run_id>/`` with a config snapshot and empty transcript.

        ``run_id`` is the UTC date (per the injected clock) plus a short
        random suffix; a fixed seed gives a fixed suffix for tests.
        """
        clock = clock if clock is not None else WallClock()
        rng = random.Random(seed)
        date = datetime.fromtimestamp(clock.now() / 1000, tz=timezone.utc).strftime("%Y%m%d")
        run_id = f"{date}-{rng.getrandbits(24):06x}"
        run_dir = self.root / run_id
        try:
            run_dir.mkdir(parents=True, exist_ok=False)
            (run_dir / "images").mkdir()
            (run_dir / "transcript.ndjson").touch()
            (run_dir / "config.json").write_text(
                json.dumps(config, sort_keys=True, indent=2, ensure_ascii=True) + "\n",
                encoding="utf-8",
            )
        except OSError as exc:
            raise StoreIOError(f"cannot create run at {run_dir}: {exc}") from exc
        return Run(self.root, run_id, clock)

    def open_run(self, run_id: str) -> Run:
        run_dir = self.root / run_id
        if not run_dir.is_dir():
            raise RunNotFound(f"no run directory at {run_dir}")
        return Run(self.root, run_id, WallClock())

    def load_run(self, run_id: str) -> tuple[dict, list[RunEvent]]:
        """Round-trips losslessly: serialize then parse is the identity."""
        run_dir = self.root / run_id
        config_path = run_dir / "config.json"
        transcript_path = run_dir / "transcript.ndjson"
        if not config_path.is_file() or not transcript_path.is_file():
            raise RunNotFound(f"no run named {run_id!r} under {self.root}")
        config = json.loads(config_path.read_text(encoding="utf-8"))
        return config, _read_events(transcript_path)

    def load_candidates(self, run_id: str) -> dict[int, list[RunEvent]]:
        """Per-style sub-transcripts, keyed by style id, each independently dense."""
        cdir = self.root / run_id / "candidates"
        if not cdir.is_dir():
            return {}
        out: dict[int, list[RunEvent]] = {}
        for sub in sorted(cdir.iterdir(), key=lambda p: int(p.name)):
            out[int(sub.name)] = _read_events(sub / "transcript.ndjson")
        return out

    def merged_events(self, run_id: str) -> list[RunEvent]:
        """Main events plus candidate events, candidates ordered by
        (style_id, seq), the deterministic barrier merge order."""
        _, main = self.load_run(run_id)
        merged = list(main)
        for _, events in sorted(self.load_candidates(run_id).items()):
            merged.extend(events)
        return merged


class InMemoryImageStore:
    """Image store without a run directory; for desk tests of backends."""

    def __init__(self):
        self._blobs: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def store_image(self, data: bytes, media_type: MediaType) -> ImageRef:
        ref = ImageRef.for_bytes(data, media_type)
        with self._lock:
            self._blobs[ref.id] = data
        return ref

    def has_image(self, ref: ImageRef) -> bool:
        return ref.id in self._blobs

    def load_image(self, ref: ImageRef) -> bytes:
        if ref.id not in self._blobs:
            raise StoreIOError(f"image {ref.id} not stored")
        return self._blobs[ref.id]
