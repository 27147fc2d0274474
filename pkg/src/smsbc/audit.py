"""Independent replay checks over the event log.

These deliberately reconstruct state from log records alone, so they can
cross-examine what the live objects claim: final balances must equal initial
balances plus the applied deltas, and no transaction id may be applied twice.
"""

from __future__ import annotations

from collections import Counter

from .events import EventRecord


def replayed_balances(records: list[EventRecord], component: str) -> dict[int, int]:
    """Initial balances plus every applied delta, for one site, from the log."""
    balances: dict[int, int] = {}
    for record in records:
        if record.component != component:
            continue
        if record.event == "ledger_init":
            balances[record.details["account"]] = record.details["balance"]
        elif record.event == "ledger_apply":
            balances[record.details["account"]] += record.details["delta"]
    return balances


def sms_apply_counts(records: list[EventRecord], component: str) -> Counter:
    """How many times each transaction id was applied from the SMS channel."""
    counts: Counter = Counter()
    for record in records:
        if (record.component == component and record.event == "ledger_apply"
                and record.details.get("source") == "SMS"):
            counts[record.details["msgid"]] += 1
    return counts


def double_applied(records: list[EventRecord], component: str) -> list[str]:
    return sorted(m for m, n in sms_apply_counts(records, component).items() if n > 1)
