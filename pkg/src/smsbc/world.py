"""Two-site world wiring and the tick loop that drives it.

A tick advances the clock, runs the message center once, then each site's
listener in fixed order (site1 before site2), which makes every run a pure
function of the configuration and the calls made between ticks.
"""

from __future__ import annotations

from typing import Callable

from . import wire
from .config import InvalidConfig, WorldConfig
from .events import EventLog
from .site import BusinessRules, CHANNEL, JOB, LINK, SiteNode
from .smsc import FaultModel, MessageCenter, PHONE, SITE_GATEWAY

DEFAULT_OBJECT = "PKG_BILLING"


class Timeout(Exception):
    """A run_until predicate did not hold within its tick budget."""


class World:
    def __init__(self, config: WorldConfig, sink: Callable[[str], None] | None = None):
        config.validate()
        self.config = config
        self.clock = 0
        self.log = EventLog(sink=sink)
        faults = FaultModel(config.loss_prob, config.dup_prob,
                            config.delay_min, config.delay_max, config.seed)
        self.smsc = MessageCenter(faults, config.validity_period, self.log)
        self.smsc.register_endpoint(config.site1_number, SITE_GATEWAY)
        self.smsc.register_endpoint(config.site2_number, SITE_GATEWAY)
        self.smsc.register_endpoint(config.key_person_number, PHONE)
        self.smsc.register_endpoint(config.dba_number, PHONE)

        def make_site(name: str, tag: int, number: str, peer_number: str) -> SiteNode:
            return SiteNode(name, tag, number, peer_number, config.key, self.smsc,
                            BusinessRules(config.allowable_amount), config.accounts,
                            config.key_person_number, config.dba_number,
                            config.max_retries, config.query_timeout, self.log)

        self.site1 = make_site("site1", 1, config.site1_number, config.site2_number)
        self.site2 = make_site("site2", 2, config.site2_number, config.site1_number)
        self.site1.peer = self.site2
        self.site2.peer = self.site1
        for site in (self.site1, self.site2):
            site.register_object(DEFAULT_OBJECT)
            for account in sorted(site.ledger):
                self.log.emit(0, site.name, "ledger_init",
                              account=account, balance=site.ledger[account])
        self.log.emit(0, "world", "world_built",
                      seed=config.seed, loss_prob=config.loss_prob,
                      dup_prob=config.dup_prob, delay_min=config.delay_min,
                      delay_max=config.delay_max, validity_period=config.validity_period,
                      allowable_amount=config.allowable_amount,
                      max_retries=config.max_retries, query_timeout=config.query_timeout)

    # -- clock ----------------------------------------------------------------

    def tick(self) -> None:
        self.clock += 1
        self.smsc.tick(self.clock)
        self.site1.poll(self.clock)
        self.site2.poll(self.clock)

    def run_until(self, predicate: Callable[["World"], bool], max_ticks: int) -> int:
        """Tick until the predicate holds; returns ticks used, raises Timeout."""
        if max_ticks < 0:
            raise ValueError("max_ticks must be non-negative")
        if predicate(self):
            return 0
        for elapsed in range(1, max_ticks + 1):
            self.tick()
            if predicate(self):
                return elapsed
        raise Timeout(f"predicate still false after {max_ticks} ticks")

    # -- harness conveniences ---------------------------------------------------

    def set_link(self, up: bool) -> None:
        self.site1.set_control(LINK, up, self.clock)
        self.site2.set_control(LINK, up, self.clock)

    def set_sms_model(self, on: bool) -> None:
        """Both sites' channel and job together, as the scenarios switch them."""
        for site in (self.site1, self.site2):
            site.set_control(CHANNEL, on, self.clock)
            site.set_control(JOB, on, self.clock)

    def phone_messages(self, number: str) -> list[wire.LogicalMessage]:
        """Decode complete message groups sitting in a phone's inbox."""
        groups: dict[wire.MessageId, list[wire.SmsSegment]] = {}
        for seg in self.smsc.inbox(number):
            groups.setdefault(seg.msgid, []).append(seg)
        messages = []
        for group in groups.values():
            try:
                messages.append(wire.unpack_message(group, self.config.key))
            except wire.Incomplete:
                continue
        return messages


def build_world(config: WorldConfig, sink: Callable[[str], None] | None = None) -> World:
    """Construct a fresh world; raises InvalidConfig with a field-level reason."""
    try:
        return World(config, sink)
    except InvalidConfig:
        raise
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from exc


def run_until(world: World, predicate: Callable[[World], bool], max_ticks: int) -> int:
    return world.run_until(predicate, max_ticks)
