"""Cost accounting for gateway usage.

All arithmetic happens in integer micro-dollars so totals are exact and
platform-independent; conversion to display dollars happens only at report
time (rounding half-up to cents). Generated images are billed as a fixed
number of output tokens rather than a flat fee.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import TYPE_CHECKING, Iterable, Mapping

from .errors import ConfigError

if TYPE_CHECKING:
    from .gateway import UsageEvent

_MICRO = Decimal(10) ** 6


def _to_micro(price: Decimal | str | int, name: str) -> int:
    micro = Decimal(price) * _MICRO
    if micro != micro.to_integral_value():
        raise ConfigError(f"{name} must be representable in whole micro-dollars, got {price}")
    if micro < 0:
        raise ConfigError(f"{name} must be non-negative")
    return int(micro)


@dataclass(frozen=True)
class PricingTable:
    """Per-token prices in dollars plus the output-token equivalent of one image."""

    input_token_price: Decimal = Decimal("0.00004")
    output_token_price: Decimal = Decimal("0.00008")
    image_output_tokens: int = 1105

    def __post_init__(self):
        object.__setattr__(self, "input_token_price", Decimal(self.input_token_price))
        object.__setattr__(self, "output_token_price", Decimal(self.output_token_price))
        if self.image_output_tokens < 0:
            raise ConfigError("image_output_tokens must be non-negative")
        # validate representability eagerly
        self.input_micro
        self.output_micro

    @property
    def input_micro(self) -> int:
        return _to_micro(self.input_token_price, "input_token_price")

    @property
    def output_micro(self) -> int:
        return _to_micro(self.output_token_price, "output_token_price")

    def event_micro(self, event: "UsageEvent") -> int:
        return (
            event.input_tokens * self.input_micro
            + event.output_tokens * self.output_micro
            + event.images_generated * self.image_output_tokens * self.output_micro
        )

    def to_dict(self) -> dict:
        return {
            "image_output_tokens": self.image_output_tokens,
            "input_token_price": str(self.input_token_price),
            "output_token_price": str(self.output_token_price),
        }

    @staticmethod
    def from_dict(data: Mapping) -> "PricingTable":
        return PricingTable(
            input_token_price=Decimal(str(data["input_token_price"])),
            output_token_price=Decimal(str(data["output_token_price"])),
            image_output_tokens=int(data["image_output_tokens"]),
        )


@dataclass
class CostLedger:
    """Append-only list of usage events accumulated by one pipeline owner."""

    events: list["UsageEvent"] = field(default_factory=list)

    def add(self, event: "UsageEvent") -> None:
        self.events.append(event)

    def extend(self, events: Iterable["UsageEvent"]) -> None:
        self.events.extend(events)

    def __len__(self) -> int:
        return len(self.events)

    @property
    def input_tokens(self) -> int:
        return sum(e.input_tokens for e in self.events)

    @property
    def output_tokens(self) -> int:
        return sum(e.output_tokens for e in self.events)

    @property
    def images_generated(self) -> int:
        return sum(e.images_generated for e in self.events)


def total_micro(ledger: CostLedger, pricing: PricingTable) -> int:
    """Exact ledger total in integer micro-dollars."""
    return sum(pricing.event_micro(e) for e in ledger.events)


def total(ledger: CostLedger, pricing: PricingTable) -> Decimal:
    """Exact ledger total in dollars (no display rounding)."""
    return Decimal(total_micro(ledger, pricing)) / _MICRO


def merge(ledgers: Iterable[CostLedger]) -> CostLedger:
    """Concatenate ledgers; the merged total is the exact sum of the parts."""
    merged = CostLedger()
    for ledger in ledgers:
        merged.extend(ledger.events)
    return merged


def micro_to_display(micro: int) -> str:
    """Format micro-dollars as dollars rounded half-up to cents, e.g. ``$2.87``."""
    cents = (Decimal(micro) / _MICRO).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return f"${cents}"


def micro_to_exact(micro: int) -> str:
    """Format micro-dollars as an exact dollar string, e.g. ``$2.8736``."""
    dollars = Decimal(micro) / _MICRO
    return f"${dollars.normalize() if dollars else Decimal('0')}"


def cost_report(ledger: CostLedger, pricing: PricingTable) -> dict:
    """Deterministic per-actor, per-call-kind breakdown plus grand total.

    Keys are sorted strings so the JSON encoding is byte-stable.
    """
    by_actor: dict[str, dict] = {}
    for event in ledger.events:
        actor = by_actor.setdefault(
            event.actor.token(),
            {"calls": {}, "micro_dollars": 0},
        )
        kind = actor["calls"].setdefault(
            event.call_kind.value,
            {"calls": 0, "images_generated": 0, "input_tokens": 0, "output_tokens": 0},
        )
        kind["calls"] += 1
        kind["images_generated"] += event.images_generated
        kind["input_tokens"] += event.input_tokens
        kind["output_tokens"] += event.output_tokens
        actor["micro_dollars"] += pricing.event_micro(event)

    grand = total_micro(ledger, pricing)
    return {
        "by_actor": {k: by_actor[k] for k in sorted(by_actor)},
        "grand_total": {
            "display": micro_to_display(grand),
            "images_generated": ledger.images_generated,
            "input_tokens": ledger.input_tokens,
            "micro_dollars": grand,
            "output_tokens": ledger.output_tokens,
        },
        "pricing": pricing.to_dict(),
    }
