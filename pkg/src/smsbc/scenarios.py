"""The four scripted continuity scenarios, each runnable twice for reliability.

Every scenario drives a fresh world from site1, asserting after each step on
ledger values, the outbound log, the gateway tables, and the phone inboxes.
A failing step stops the script and is reported instead of raised.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import site as site_mod
from . import wire
from .config import WorldConfig
from .events import EventRecord
from .site import CONFIRMED, FULFILLED, LinkDown, SmsLogRecord
from .world import World, build_world

SCENARIO_NUMBERS = (1, 2, 3, 4)


@dataclass
class StepOutcome:
    label: str
    passed: bool
    detail: str


@dataclass
class ScenarioReport:
    scenario: int
    steps: list[StepOutcome]
    passed: bool
    events: list[EventRecord]

    def log_lines(self) -> list[str]:
        return [record.to_json() for record in self.events]


class _StepFailed(Exception):
    pass


def _check(condition: bool, detail: str) -> None:
    if not condition:
        raise _StepFailed(detail)


def _alerts_of(world: World, number: str, code: str) -> list[wire.Alert]:
    return [m for m in world.phone_messages(number)
            if isinstance(m, wire.Alert) and m.code == code]


def _record(world: World, msgid: wire.MessageId) -> SmsLogRecord:
    return world.site1.records_by_id[msgid]


def _out_segments(site, msgid: wire.MessageId) -> list[wire.SmsSegment]:
    return [seg for seg in site.gateway.out_rows if seg.msgid == msgid]


def _scenario_one(world: World, steps: "_Script") -> None:
    account = min(world.config.accounts)
    delta = -25000
    before = world.site2.read_balance(account)

    def step1():
        _check(world.site1.flags.link_up, "link expected up in a fresh world")
        outcome = world.site1.remote_update(account, delta, world.clock)
        _check(outcome is None, "link-up update should apply synchronously")

    def step2():
        got = world.site2.read_balance(account)
        _check(got == before + delta, f"remote balance {got} != {before + delta}")

    def step3():
        world.set_link(False)
        try:
            world.site1.remote_update(account, delta, world.clock)
        except LinkDown:
            pass
        else:
            raise _StepFailed("update with link down and model off must be rejected")
        got = world.site2.read_balance(account)
        _check(got == before + delta, "rejected update must not change the remote balance")
        _check(not world.site1.outbox, "rejected update must not queue outbox rows")

    def step4():
        world.set_sms_model(True)
        msgid = world.site1.remote_update(account, delta, world.clock)
        _check(msgid is not None, "expected the update to be queued for SMS")
        expected = before + 2 * delta

        def settled(w: World) -> bool:
            return (w.site2.read_balance(account) == expected
                    and _record(w, msgid).status == CONFIRMED
                    and bool(_alerts_of(w, w.config.key_person_number, wire.LINK)))

        try:
            world.run_until(settled, world.config.settle_ticks)
        except Exception as exc:
            raise _StepFailed(f"failover did not settle: {exc}") from exc

    steps.run("step1 link up: modify remote account balance", step1)
    steps.run("step2 verify the modification occurred", step2)
    steps.run("step3 link disrupted, model OFF: modification not submitted", step3)
    steps.run("step4 link disrupted, model ON: modification submitted via SMS", step4)


def _scenario_two(world: World, steps: "_Script") -> None:
    account = min(world.config.accounts)
    delta = world.config.allowable_amount + 5000
    before = world.site1.read_balance(account)
    alert_ids: list[wire.MessageId] = []

    def step1():
        world.set_sms_model(True)
        balance = world.site1.local_update(account, delta, world.clock)
        _check(balance == before + delta, "local modification must apply")

    def step2():
        susp = [r for r in world.site1.outbox
                if isinstance(r.message, wire.Alert) and r.message.code == wire.SUSP]
        _check(len(susp) == 1, f"expected exactly one suspicious-amount row, got {len(susp)}")
        alert_ids.append(susp[0].id)

    def step3():
        def delivered(w: World) -> bool:
            return bool(_alerts_of(w, w.config.key_person_number, wire.SUSP))

        try:
            world.run_until(delivered, world.config.settle_ticks)
        except Exception as exc:
            raise _StepFailed(f"alert not delivered: {exc}") from exc
        _check(bool(_out_segments(world.site1, alert_ids[0])),
               "alert segments missing from the outgoing gateway table")
        alerts = _alerts_of(world, world.config.key_person_number, wire.SUSP)
        _check(any(str(account) in a.text for a in alerts),
               "delivered alert does not name the account")

    steps.run("step1 model ON: local modification exceeding the allowable value", step1)
    steps.run("step2 alert row present in the outbound log table", step2)
    steps.run("step3 outgoing message staged and received by the key person", step3)


def _scenario_three(world: World, steps: "_Script") -> None:
    name = sorted(world.site1.objects)[0]
    alert_ids: list[wire.MessageId] = []

    def step1():
        world.set_sms_model(True)
        world.site1.invalidate_object(name, world.clock)
        _check(not world.site1.objects[name].valid, "object must be invalid")

    def step2():
        def row_present(w: World) -> bool:
            return any(isinstance(r.message, wire.Alert) and r.message.code == wire.IOBJ
                       for r in w.site1.outbox)

        try:
            world.run_until(row_present, world.config.settle_ticks)
        except Exception as exc:
            raise _StepFailed(f"invalid-object row never appeared: {exc}") from exc
        rows = [r for r in world.site1.outbox
                if isinstance(r.message, wire.Alert) and r.message.code == wire.IOBJ]
        _check(len(rows) == 1, f"expected exactly one invalid-object row, got {len(rows)}")
        alert_ids.append(rows[0].id)

    def step3():
        def delivered(w: World) -> bool:
            return bool(_alerts_of(w, w.config.dba_number, wire.IOBJ))

        try:
            world.run_until(delivered, world.config.settle_ticks)
        except Exception as exc:
            raise _StepFailed(f"alert not delivered to the DBA: {exc}") from exc
        _check(bool(_out_segments(world.site1, alert_ids[0])),
               "alert segments missing from the outgoing gateway table")
        alerts = _alerts_of(world, world.config.dba_number, wire.IOBJ)
        _check(any(a.text == name for a in alerts), "alert does not name the object")

    steps.run("step1 model ON: enforce a database object to become invalid", step1)
    steps.run("step2 alert row inserted into the outbound log table", step2)
    steps.run("step3 outgoing message staged and received by the DBA", step3)


def _scenario_four(world: World, steps: "_Script") -> None:
    account = min(world.config.accounts)

    def step1():
        balance = world.site1.remote_query(account, world.clock)
        _check(balance == world.site2.read_balance(account),
               "link-up query must return the remote balance")

    def step2():
        world.set_link(False)
        try:
            world.site1.remote_query(account, world.clock)
        except LinkDown:
            pass
        else:
            raise _StepFailed("query with link down and model off must not be fetched")

    def step3():
        world.set_sms_model(True)
        handle = world.site1.remote_query(account, world.clock)
        _check(isinstance(handle, site_mod.PendingQuery), "expected a pending query handle")

        try:
            world.run_until(lambda w: handle.state == FULFILLED, world.config.settle_ticks)
        except Exception as exc:
            raise _StepFailed(f"query not fulfilled: {exc} (state={handle.state})") from exc
        _check(handle.balance == world.site2.read_balance(account),
               f"retrieved balance {handle.balance} is not the remote balance")

    steps.run("step1 link up: query the remote account balance", step1)
    steps.run("step2 link disrupted, model OFF: query not fetched", step2)
    steps.run("step3 link disrupted, model ON: data retrieved via SMS", step3)


_SCRIPTS: dict[int, Callable[[World, "_Script"], None]] = {
    1: _scenario_one,
    2: _scenario_two,
    3: _scenario_three,
    4: _scenario_four,
}


class _Script:
    def __init__(self, world: World, scenario: int):
        self.world = world
        self.scenario = scenario
        self.outcomes: list[StepOutcome] = []
        self.failed = False

    def run(self, label: str, fn: Callable[[], None]) -> None:
        if self.failed:
            return
        try:
            fn()
        except _StepFailed as exc:
            self.failed = True
            self.outcomes.append(StepOutcome(label, False, str(exc)))
        except Exception as exc:  # never panic; report the step instead
            self.failed = True
            self.outcomes.append(StepOutcome(label, False, f"{type(exc).__name__}: {exc}"))
        else:
            self.outcomes.append(StepOutcome(label, True, "ok"))
        last = self.outcomes[-1]
        self.world.log.emit(self.world.clock, "harness", "step",
                            scenario=self.scenario, label=last.label,
                            passed=last.passed, detail=last.detail)


def run_scenario(scenario: int, world: World) -> ScenarioReport:
    if scenario not in _SCRIPTS:
        raise ValueError(f"scenario must be one of {SCENARIO_NUMBERS}, got {scenario}")
    world.log.emit(world.clock, "harness", "scenario_start", scenario=scenario)
    script = _Script(world, scenario)
    _SCRIPTS[scenario](world, script)
    passed = bool(script.outcomes) and all(s.passed for s in script.outcomes)
    world.log.emit(world.clock, "harness", "scenario_end", scenario=scenario, passed=passed)
    return ScenarioReport(scenario, script.outcomes, passed, world.log.records)


def run_twice(scenario: int, config: WorldConfig,
              sink=None) -> tuple[ScenarioReport, ScenarioReport, bool]:
    """Run a scenario in two independent worlds built from one config.

    identical is true when both runs pass and their event logs match
    byte for byte, the test-retest reliability check.
    """
    first = run_scenario(scenario, build_world(config, sink))
    second = run_scenario(scenario, build_world(config, sink))
    identical = (first.passed and second.passed
                 and first.log_lines() == second.log_lines())
    return first, second, identical
