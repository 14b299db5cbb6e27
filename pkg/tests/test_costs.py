from __future__ import annotations

from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mimo.costs import (
    CostLedger,
    PricingTable,
    cost_report,
    merge,
    micro_to_display,
    micro_to_exact,
    total,
    total_micro,
)
from mimo.domain import CORE_SUPERVISOR, IMAGE_RESEARCHER
from mimo.errors import ConfigError
from mimo.gateway import CallKind, UsageEvent

PRICING = PricingTable()


def ledger_for(input_tokens: int, output_tokens: int, images: int) -> CostLedger:
    ledger = CostLedger()
    ledger.add(
        UsageEvent(input_tokens, output_tokens, 0, CORE_SUPERVISOR, CallKind.COMPLETE)
    )
    if images:
        ledger.add(
            UsageEvent(0, 0, images, IMAGE_RESEARCHER, CallKind.GENERATE_IMAGE)
        )
    return ledger


# the four reference configurations, exact to the micro-dollar
@pytest.mark.parametrize(
    "tokens_in,tokens_out,images,micro,display",
    [
        (500, 500, 1, 148400, "$0.15"),
        (2000, 2000, 1, 328400, "$0.33"),
        (5400, 5400, 3, 913200, "$0.91"),
        (21000, 21000, 4, 2873600, "$2.87"),
    ],
)
def test_reference_totals_exact(tokens_in, tokens_out, images, micro, display):
    ledger = ledger_for(tokens_in, tokens_out, images)
    assert total_micro(ledger, PRICING) == micro
    assert micro_to_display(micro) == display


def test_exact_decimal_totals():
    assert total(ledger_for(500, 500, 1), PRICING) == Decimal("0.1484")
    assert total(ledger_for(21000, 21000, 4), PRICING) == Decimal("2.8736")
    assert micro_to_exact(148400) == "$0.1484"


def test_zero_ledger():
    assert total_micro(CostLedger(), PRICING) == 0
    assert micro_to_display(0) == "$0.00"


def test_image_billed_as_output_tokens():
    only_image = ledger_for(0, 0, 1)
    assert total_micro(only_image, PRICING) == 1105 * 80  # $0.0884


def test_merge_concatenates():
    assert len(merge([])) == 0
    merged = merge([ledger_for(1, 1, 0), ledger_for(2, 2, 0)])
    assert len(merged) == 2


usage_events = st.builds(
    UsageEvent,
    input_tokens=st.integers(min_value=0, max_value=10_000),
    output_tokens=st.integers(min_value=0, max_value=10_000),
    images_generated=st.just(0),
    actor=st.just(CORE_SUPERVISOR),
    call_kind=st.just(CallKind.COMPLETE),
)


@given(st.lists(st.lists(usage_events, max_size=6), max_size=5))
def test_merge_total_additivity(event_lists):
    ledgers = []
    for events in event_lists:
        ledger = CostLedger()
        ledger.extend(events)
        ledgers.append(ledger)
    merged = merge(ledgers)
    # integer micro-dollar oracle: sum event costs directly
    oracle = sum(
        e.input_tokens * 40 + e.output_tokens * 80 for events in event_lists for e in events
    )
    assert total_micro(merged, PRICING) == oracle
    assert total_micro(merged, PRICING) == sum(total_micro(l, PRICING) for l in ledgers)


@given(st.lists(usage_events, max_size=10))
def test_total_monotone_under_append(events):
    ledger = CostLedger()
    previous = 0
    for event in events:
        ledger.add(event)
        current = total_micro(ledger, PRICING)
        assert current >= previous
        previous = current


def test_pricing_requires_whole_micro_dollars():
    with pytest.raises(ConfigError):
        PricingTable(input_token_price=Decimal("0.0000004"))
    with pytest.raises(ConfigError):
        PricingTable(output_token_price=Decimal("-0.00008"))


def test_cost_report_breakdown_shape():
    ledger = ledger_for(500, 500, 1)
    report = cost_report(ledger, PRICING)
    assert report["grand_total"]["micro_dollars"] == 148400
    assert report["grand_total"]["display"] == "$0.15"
    assert set(report["by_actor"]) == {"CoreSupervisor", "ImageResearcher"}
    calls = report["by_actor"]["ImageResearcher"]["calls"]["generate_image"]
    assert calls["images_generated"] == 1


def test_pricing_round_trip():
    table = PricingTable.from_dict(PRICING.to_dict())
    assert table == PRICING
