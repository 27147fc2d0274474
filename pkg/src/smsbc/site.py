"""One site's application package: ledger, outbound continuity log, and listener.

The outbound queue (logged under the table name SMS_LISTENER_LOG) holds logical
messages awaiting transmission. A poll() pass plays the programmed listener:
scan invalid objects, drain PENDING rows into gateway frames (OZEKIMESSAGEOUT)
and the message center, consume delivery reports, then reassemble and execute
whatever landed in OZEKIMESSAGEIN. Incoming transactions are applied at most
once, keyed by message id.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import wire
from .events import EventLog
from .smsc import DELIVERED as REPORT_DELIVERED
from .smsc import EXPIRED as REPORT_EXPIRED
from .smsc import MessageCenter
from .wire import Alert, LogicalMessage, MessageId, QueryReq, QueryResp, Result, SmsSegment, Txn

SMS_LISTENER_LOG = "SMS_LISTENER_LOG"
OZEKIMESSAGEOUT = "OZEKIMESSAGEOUT"
OZEKIMESSAGEIN = "OZEKIMESSAGEIN"

PENDING = "PENDING"
SENT = "SENT"
DELIVERED = "DELIVERED"
CONFIRMED = "CONFIRMED"
FAILED = "FAILED"
_STATUS_ORDER = {PENDING: 0, SENT: 1, DELIVERED: 2, CONFIRMED: 3}

WAITING = "WAITING"
FULFILLED = "FULFILLED"
TIMED_OUT = "TIMED_OUT"

LINK = "LINK"
CHANNEL = "CHANNEL"
JOB = "JOB"

SOURCE_LOCAL = "LOCAL"
SOURCE_LINK = "LINK"
SOURCE_SMS = "SMS"


class UnknownAccount(Exception):
    pass


class UnknownObject(Exception):
    pass


class LinkDown(Exception):
    pass


@dataclass
class ControlFlags:
    link_up: bool = True
    sms_channel_on: bool = False
    sms_job_on: bool = False


@dataclass
class BusinessRules:
    allowable_amount: int

    def __post_init__(self):
        if self.allowable_amount <= 0:
            raise ValueError("allowable_amount must be positive")


@dataclass
class SmsLogRecord:
    id: MessageId
    message: LogicalMessage
    destination: str
    status: str
    created_at: int
    updated_at: int
    retries: int = 0
    # transmission bookkeeping, filled at first send
    segments: list[SmsSegment] = field(default_factory=list)
    delivered_seqs: set[int] = field(default_factory=set)


@dataclass
class GatewayTables:
    out_rows: list[SmsSegment] = field(default_factory=list)
    in_rows: dict[MessageId, list[SmsSegment]] = field(default_factory=dict)
    quarantined: set[MessageId] = field(default_factory=set)


@dataclass
class DbObject:
    name: str
    valid: bool = True
    alerted: bool = False


@dataclass
class PendingQuery:
    id: MessageId
    account: int
    issued_at: int
    state: str = WAITING
    balance: int | None = None


class SiteNode:
    def __init__(self, name: str, site_tag: int, number: str, peer_number: str,
                 key: int, smsc: MessageCenter, rules: BusinessRules,
                 accounts: dict[int, int], key_person_number: str, dba_number: str,
                 max_retries: int = 3, query_timeout: int = 50,
                 log: EventLog | None = None):
        self.name = name
        self.site_tag = site_tag
        self.number = number
        self.peer_number = peer_number
        self.key = key
        self.smsc = smsc
        self.rules = rules
        self.key_person_number = key_person_number
        self.dba_number = dba_number
        self.max_retries = max_retries
        self.query_timeout = query_timeout
        self.log = log or EventLog()

        self.flags = ControlFlags()
        self.ledger: dict[int, int] = dict(accounts)
        self.outbox: list[SmsLogRecord] = []
        self.records_by_id: dict[MessageId, SmsLogRecord] = {}
        self.gateway = GatewayTables()
        self.applied: set[MessageId] = set()
        self.queries: dict[MessageId, PendingQuery] = {}
        self.objects: dict[str, DbObject] = {}
        self.peer: SiteNode | None = None
        self._counter = 0

    # -- helpers -------------------------------------------------------------

    def _next_id(self) -> MessageId:
        self._counter += 1
        return MessageId(self.site_tag, self._counter)

    def _emit(self, now: int, event: str, **details) -> None:
        self.log.emit(now, self.name, event, **details)

    def _enqueue(self, message: LogicalMessage, destination: str, now: int) -> SmsLogRecord:
        record = SmsLogRecord(message.id, message, destination, PENDING, now, now)
        self.outbox.append(record)
        self.records_by_id[record.id] = record
        self._emit(now, "outbox_insert", table=SMS_LISTENER_LOG, msgid=str(record.id),
                   kind=type(message).__name__, destination=destination, status=PENDING)
        return record

    def _set_status(self, record: SmsLogRecord, status: str, now: int) -> None:
        if status == record.status:
            return
        if record.status in (CONFIRMED, FAILED):
            self._emit(now, "anomaly", reason="status_change_after_terminal",
                       msgid=str(record.id), have=record.status, want=status)
            return
        if status != FAILED and _STATUS_ORDER[status] < _STATUS_ORDER[record.status]:
            self._emit(now, "anomaly", reason="backward_status_change",
                       msgid=str(record.id), have=record.status, want=status)
            return
        record.status = status
        record.updated_at = now
        self._emit(now, "outbox_status", msgid=str(record.id), status=status,
                   retries=record.retries)

    # -- control and ledger ----------------------------------------------------

    def set_control(self, which: str, on: bool, now: int = 0) -> None:
        if which == LINK:
            self.flags.link_up = on
        elif which == CHANNEL:
            self.flags.sms_channel_on = on
        elif which == JOB:
            self.flags.sms_job_on = on
        else:
            raise ValueError(f"unknown control {which!r}")
        self._emit(now, "control_set", control=which, on=on)

    def read_balance(self, account: int) -> int:
        try:
            return self.ledger[account]
        except KeyError:
            raise UnknownAccount(account) from None

    def _apply(self, account: int, delta: int, source: str, now: int,
               msgid: MessageId | None = None) -> int:
        if account not in self.ledger:
            raise UnknownAccount(account)
        self.ledger[account] += delta
        details = {"account": account, "delta": delta,
                   "balance": self.ledger[account], "source": source}
        if msgid is not None:
            details["msgid"] = str(msgid)
        self._emit(now, "ledger_apply", **details)
        return self.ledger[account]

    def local_update(self, account: int, delta: int, now: int) -> int:
        """Apply a local transaction, then run the suspicious-amount trigger."""
        balance = self._apply(account, delta, SOURCE_LOCAL, now)
        if abs(delta) > self.rules.allowable_amount:
            alert = Alert(self._next_id(), wire.SUSP, f"ACCT {account} DELTA {delta:+d}")
            self._enqueue(alert, self.key_person_number, now)
            self._emit(now, "trigger_fired", rule="allowable_amount", account=account,
                       delta=delta, msgid=str(alert.id))
        return balance

    def remote_update(self, account: int, delta: int, now: int) -> MessageId | None:
        """Apply at the peer over the link, or queue for the standby SMS channel.

        Returns None when applied synchronously over the link, else the id of
        the queued transaction. Raises LinkDown when the link is broken and the
        SMS channel is off; nothing is queued and no ledger changes.
        """
        if self.peer is None:
            raise RuntimeError("peer site not configured")
        if self.flags.link_up:
            self.peer._apply(account, delta, SOURCE_LINK, now)
            self._emit(now, "remote_update_link", account=account, delta=delta)
            return None
        if not self.flags.sms_channel_on:
            self._emit(now, "remote_update_rejected", account=account, delta=delta)
            raise LinkDown("link down and SMS channel off; modification not submitted")
        txn = Txn(self._next_id(), account, delta)
        self._enqueue(txn, self.peer_number, now)
        alert = Alert(self._next_id(), wire.LINK,
                      f"LINK DOWN ACCT {account} DELTA {delta:+d} TXN {txn.id}")
        self._enqueue(alert, self.key_person_number, now)
        self._emit(now, "remote_update_queued", account=account, delta=delta,
                   msgid=str(txn.id))
        return txn.id

    def remote_query(self, account: int, now: int) -> int | PendingQuery:
        """Read the peer balance over the link, or issue a query over SMS."""
        if self.peer is None:
            raise RuntimeError("peer site not configured")
        if self.flags.link_up:
            balance = self.peer.read_balance(account)
            self._emit(now, "remote_query_link", account=account, balance=balance)
            return balance
        if not self.flags.sms_channel_on:
            self._emit(now, "remote_query_rejected", account=account)
            raise LinkDown("link down and SMS channel off; query not fetched")
        req = QueryReq(self._next_id(), account)
        self._enqueue(req, self.peer_number, now)
        query = PendingQuery(req.id, account, now)
        self.queries[req.id] = query
        self._emit(now, "query_issued", account=account, msgid=str(req.id))
        return query

    # -- database objects --------------------------------------------------------

    def register_object(self, name: str) -> DbObject:
        obj = DbObject(name)
        self.objects[name] = obj
        return obj

    def invalidate_object(self, name: str, now: int) -> None:
        try:
            obj = self.objects[name]
        except KeyError:
            raise UnknownObject(name) from None
        if obj.valid:
            obj.valid = False
            self._emit(now, "object_invalid", name=name)

    # -- the programmed listener ---------------------------------------------------

    def poll(self, now: int) -> None:
        """One listener pass; a no-op unless both the channel and the job are on."""
        if not (self.flags.sms_job_on and self.flags.sms_channel_on):
            return
        self._sweep_query_timeouts(now)
        self._scan_objects(now)
        self._send_pending(now)
        self._consume_reports(now)
        self._receive(now)

    def _sweep_query_timeouts(self, now: int) -> None:
        for query in self.queries.values():
            if query.state == WAITING and now - query.issued_at >= self.query_timeout:
                query.state = TIMED_OUT
                self._emit(now, "query_timeout", msgid=str(query.id), account=query.account)

    def _scan_objects(self, now: int) -> None:
        for obj in self.objects.values():
            if not obj.valid and not obj.alerted:
                alert = Alert(self._next_id(), wire.IOBJ, obj.name)
                self._enqueue(alert, self.dba_number, now)
                obj.alerted = True
                self._emit(now, "object_alert", name=obj.name, msgid=str(alert.id))

    def _send_pending(self, now: int) -> None:
        for record in self.outbox:
            if record.status != PENDING:
                continue
            record.segments = wire.pack_message(record.message, self.key,
                                                self.number, record.destination)
            for seg in record.segments:
                self.gateway.out_rows.append(seg)
                self._emit(now, "gateway_out", table=OZEKIMESSAGEOUT, msgid=str(seg.msgid),
                           seq=seg.seq, total=seg.total, destination=record.destination,
                           frame=seg.frame())
                self.smsc.submit(self.number, record.destination, seg, now)
            self._set_status(record, SENT, now)

    def _consume_reports(self, now: int) -> None:
        for report in self.smsc.take_delivery_reports(self.number):
            record = self.records_by_id.get(report.msgid)
            if record is None:
                self._emit(now, "anomaly", reason="report_without_record",
                           msgid=str(report.msgid), seq=report.seq)
                continue
            if record.status in (CONFIRMED, FAILED):
                continue
            if report.outcome == REPORT_DELIVERED:
                record.delivered_seqs.add(report.seq)
                if record.status == SENT and len(record.delivered_seqs) == len(record.segments):
                    self._set_status(record, DELIVERED, now)
            elif report.outcome == REPORT_EXPIRED:
                if record.retries < self.max_retries:
                    record.retries += 1
                    seg = next(s for s in record.segments if s.seq == report.seq)
                    self.smsc.submit(self.number, record.destination, seg, now)
                    self._emit(now, "resubmitted", msgid=str(record.id), seq=report.seq,
                               retries=record.retries)
                else:
                    self._set_status(record, FAILED, now)

    def _receive(self, now: int) -> None:
        for seg in self.smsc.take_inbox(self.number):
            self._emit(now, "gateway_in", table=OZEKIMESSAGEIN, msgid=str(seg.msgid),
                       seq=seg.seq, total=seg.total, frame=seg.frame())
            self.gateway.in_rows.setdefault(seg.msgid, []).append(seg)
        for msgid in list(self.gateway.in_rows):
            if msgid in self.gateway.quarantined:
                continue
            group = self.gateway.in_rows[msgid]
            try:
                message = wire.unpack_message(group, self.key)
            except wire.Incomplete:
                continue
            except wire.WireError as exc:
                self.gateway.quarantined.add(msgid)
                self._emit(now, "quarantined", msgid=str(msgid), reason=str(exc))
                continue
            if message.id != msgid:
                self.gateway.quarantined.add(msgid)
                self._emit(now, "quarantined", msgid=str(msgid), reason="msgid mismatch")
                continue
            del self.gateway.in_rows[msgid]
            self.dispatch_incoming(message, now)

    # -- execution of incoming messages ---------------------------------------------

    def dispatch_incoming(self, message: LogicalMessage, now: int) -> None:
        if isinstance(message, Txn):
            self._dispatch_txn(message, now)
        elif isinstance(message, QueryReq):
            self._dispatch_query(message, now)
        elif isinstance(message, QueryResp):
            self._dispatch_response(message, now)
        elif isinstance(message, Result):
            self._dispatch_result(message, now)
        elif isinstance(message, Alert):
            # alerts terminate at phones, never at a site gateway
            self._emit(now, "anomaly", reason="alert_at_gateway", msgid=str(message.id))
        else:
            self._emit(now, "anomaly", reason="undispatchable_message")

    def _dispatch_txn(self, txn: Txn, now: int) -> None:
        if txn.id in self.applied:
            self._emit(now, "txn_duplicate", msgid=str(txn.id))
            reply = Result(self._next_id(), txn.id, wire.OK, "DUPLICATE")
        elif txn.account not in self.ledger:
            self._emit(now, "txn_unknown_account", msgid=str(txn.id), account=txn.account)
            reply = Result(self._next_id(), txn.id, wire.ERR, "NO_ACCOUNT")
        else:
            self._apply(txn.account, txn.delta, SOURCE_SMS, now, msgid=txn.id)
            self.applied.add(txn.id)
            reply = Result(self._next_id(), txn.id, wire.OK, "APPLIED")
        self._enqueue(reply, self.peer_number, now)

    def _dispatch_query(self, req: QueryReq, now: int) -> None:
        if req.id in self.applied:
            self._emit(now, "query_duplicate", msgid=str(req.id))
            return
        self.applied.add(req.id)
        if req.account not in self.ledger:
            self._emit(now, "query_unknown_account", msgid=str(req.id), account=req.account)
            reply: LogicalMessage = Result(self._next_id(), req.id, wire.ERR, "NO_ACCOUNT")
        else:
            balance = self.ledger[req.account]
            self._emit(now, "query_answered", msgid=str(req.id), account=req.account,
                       balance=balance)
            reply = QueryResp(self._next_id(), req.id, req.account, balance)
        self._enqueue(reply, self.peer_number, now)

    def _dispatch_response(self, resp: QueryResp, now: int) -> None:
        query = self.queries.get(resp.in_reply_to)
        if query is None or query.state != WAITING:
            self._emit(now, "response_unmatched", in_reply_to=str(resp.in_reply_to))
            return
        query.state = FULFILLED
        query.balance = resp.balance
        self._emit(now, "query_fulfilled", msgid=str(query.id), account=resp.account,
                   balance=resp.balance)
        record = self.records_by_id.get(resp.in_reply_to)
        if record is not None:
            self._set_status(record, CONFIRMED, now)

    def _dispatch_result(self, result: Result, now: int) -> None:
        record = self.records_by_id.get(result.in_reply_to)
        if record is None:
            self._emit(now, "anomaly", reason="result_without_record",
                       in_reply_to=str(result.in_reply_to))
            return
        self._emit(now, "result_received", msgid=str(record.id), status=result.status,
                   detail=result.detail)
        self._set_status(record, CONFIRMED if result.status == wire.OK else FAILED, now)
