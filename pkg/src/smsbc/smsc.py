"""Store-and-forward short message center with seeded fault injection.

Segments submitted to the center are held per recipient and delivered on
explicit clock ticks. A delivery attempt can be lost (retried next tick),
duplicated, or delayed; records that outlive the validity period are dropped
with an EXPIRED report instead of a DELIVERED one. All randomness comes from
one splitmix64 stream, so equal seeds and schedules replay identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .events import EventLog
from .rng import Splitmix64
from .wire import MessageId, SmsSegment

SITE_GATEWAY = "SITE_GATEWAY"
PHONE = "PHONE"

DELIVERED = "DELIVERED"
EXPIRED = "EXPIRED"

DEFAULT_VALIDITY_PERIOD = 1000


class InvalidNumber(Exception):
    pass


class DuplicateNumber(Exception):
    pass


class UnknownNumber(Exception):
    pass


class ClockRegression(Exception):
    pass


def validate_number(number: str) -> str:
    if not (5 <= len(number) <= 15) or not number.isdigit():
        raise InvalidNumber(f"phone number must be 5-15 decimal digits, got {number!r}")
    return number


@dataclass
class FaultModel:
    loss_prob: float = 0.0
    dup_prob: float = 0.0
    delay_min: int = 1
    delay_max: int = 1
    seed: int = 1

    def validate(self) -> None:
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError(f"loss_prob out of [0,1]: {self.loss_prob}")
        if not 0.0 <= self.dup_prob <= 1.0:
            raise ValueError(f"dup_prob out of [0,1]: {self.dup_prob}")
        if not 0 <= self.delay_min <= self.delay_max:
            raise ValueError(f"bad delay range [{self.delay_min}, {self.delay_max}]")


@dataclass
class Endpoint:
    number: str
    kind: str
    reachable: bool = True
    inbox: list[SmsSegment] = field(default_factory=list)


@dataclass
class InTransitRecord:
    segment: SmsSegment
    sender: str
    recipient: str
    submitted_at: int
    earliest_attempt: int
    sub_id: int
    attempts: int = 0
    expired: bool = False


@dataclass(frozen=True)
class DeliveryReport:
    msgid: MessageId
    seq: int
    outcome: str
    at: int


class MessageCenter:
    """The simulated SMSC; single-threaded, driven by submit() and tick()."""

    def __init__(self, faults: FaultModel | None = None,
                 validity_period: int = DEFAULT_VALIDITY_PERIOD,
                 log: EventLog | None = None):
        self.faults = faults or FaultModel()
        self.faults.validate()
        if validity_period < 1:
            raise ValueError("validity_period must be at least 1 tick")
        self.validity_period = validity_period
        self.log = log or EventLog()
        self.endpoints: dict[str, Endpoint] = {}
        self._in_transit: list[InTransitRecord] = []
        self._reports: dict[str, list[DeliveryReport]] = {}
        self._rng = Splitmix64(self.faults.seed)
        self._next_sub_id = 0
        self._last_tick: int | None = None
        self._clock = 0

    # -- endpoints ---------------------------------------------------------

    def register_endpoint(self, number: str, kind: str) -> Endpoint:
        validate_number(number)
        if kind not in (SITE_GATEWAY, PHONE):
            raise ValueError(f"unknown endpoint kind {kind!r}")
        if number in self.endpoints:
            raise DuplicateNumber(number)
        endpoint = Endpoint(number, kind)
        self.endpoints[number] = endpoint
        self._reports[number] = []
        self.log.emit(self._clock, "smsc", "endpoint_registered", number=number, kind=kind)
        return endpoint

    def _endpoint(self, number: str) -> Endpoint:
        try:
            return self.endpoints[number]
        except KeyError:
            raise UnknownNumber(number) from None

    def set_reachable(self, number: str, reachable: bool) -> None:
        endpoint = self._endpoint(number)
        if endpoint.reachable != reachable:
            endpoint.reachable = reachable
            self.log.emit(self._clock, "smsc", "reachable_set", number=number, reachable=reachable)

    def inbox(self, number: str) -> list[SmsSegment]:
        """Non-draining view of an endpoint's received segments."""
        return list(self._endpoint(number).inbox)

    def take_inbox(self, number: str) -> list[SmsSegment]:
        endpoint = self._endpoint(number)
        taken, endpoint.inbox = endpoint.inbox, []
        return taken

    # -- store and forward ---------------------------------------------------

    def submit(self, sender: str, recipient: str, segment: SmsSegment, now: int) -> int:
        self._endpoint(sender)
        self._endpoint(recipient)
        delay = self._rng.randint(self.faults.delay_min, self.faults.delay_max)
        record = InTransitRecord(
            segment=segment,
            sender=sender,
            recipient=recipient,
            submitted_at=now,
            earliest_attempt=now + delay,
            sub_id=self._next_sub_id,
        )
        self._next_sub_id += 1
        self._in_transit.append(record)
        self.log.emit(now, "smsc", "submitted",
                      sender=sender, recipient=recipient, msgid=str(segment.msgid),
                      seq=segment.seq, earliest_attempt=record.earliest_attempt,
                      frame=segment.frame())
        return record.sub_id

    def tick(self, now: int) -> list[tuple[str, SmsSegment]]:
        """One clock step: expire aged records, then attempt eligible deliveries."""
        if self._last_tick is not None and now <= self._last_tick:
            raise ClockRegression(f"tick {now} after {self._last_tick}")
        self._last_tick = now
        self._clock = now

        deliveries: list[tuple[str, SmsSegment]] = []
        remaining: list[InTransitRecord] = []
        for record in sorted(self._in_transit, key=lambda r: (r.earliest_attempt, r.sub_id)):
            seg = record.segment
            if now - record.submitted_at >= self.validity_period:
                record.expired = True
                self._report(record, EXPIRED, now)
                self.log.emit(now, "smsc", "expired",
                              recipient=record.recipient, msgid=str(seg.msgid), seq=seg.seq)
                continue
            endpoint = self.endpoints[record.recipient]
            if record.earliest_attempt > now or not endpoint.reachable:
                remaining.append(record)
                continue
            record.attempts += 1
            if self._rng.chance(self.faults.loss_prob):
                self.log.emit(now, "smsc", "attempt_lost",
                              recipient=record.recipient, msgid=str(seg.msgid),
                              seq=seg.seq, attempts=record.attempts)
                remaining.append(record)
                continue
            copies = 2 if self._rng.chance(self.faults.dup_prob) else 1
            for _ in range(copies):
                endpoint.inbox.append(seg)
                deliveries.append((record.recipient, seg))
                self.log.emit(now, "smsc", "delivered",
                              recipient=record.recipient, msgid=str(seg.msgid),
                              seq=seg.seq, frame=seg.frame())
            self._report(record, DELIVERED, now)
        self._in_transit = remaining
        return deliveries

    def _report(self, record: InTransitRecord, outcome: str, now: int) -> None:
        seg = record.segment
        self._reports[record.sender].append(DeliveryReport(seg.msgid, seg.seq, outcome, now))
        self.log.emit(now, "smsc", "delivery_report",
                      sender=record.sender, msgid=str(seg.msgid), seq=seg.seq, outcome=outcome)

    def take_delivery_reports(self, sender: str) -> list[DeliveryReport]:
        self._endpoint(sender)
        taken, self._reports[sender] = self._reports[sender], []
        return taken

    def in_transit_count(self) -> int:
        return len(self._in_transit)
