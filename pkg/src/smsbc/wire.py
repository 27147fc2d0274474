"""Message grammar, keystream cipher, checksum, and SMS segmentation.

Logical messages are '|'-delimited text:

    TXN|<msgid>|<account>|<delta>
    ALR|<msgid>|<code>|<text>
    QRY|<msgid>|<account>
    QRS|<msgid>|<in_reply_to>|<account>|<balance>
    RES|<msgid>|<in_reply_to>|<status>|<detail>

The encoded text is XOR-encrypted with a splitmix64 keystream, hex-encoded,
and split into frames of at most 160 characters:

    S|<msgid 8 hex>|<seq 2 dec>|<total 2 dec>|<crc 4 hex>|<body 0-138 hex>

Header overhead is a fixed 22 characters, leaving 138 body characters per
frame; the two-digit seq/total fields cap a message at 99 frames.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .rng import Splitmix64

BODY_CHARS = 138
MAX_SEGMENTS = 99
FRAME_OVERHEAD = 22
MAX_FRAME_CHARS = 160
MAX_PAYLOAD = MAX_SEGMENTS * BODY_CHARS

SUSP = "SUSP"
IOBJ = "IOBJ"
LINK = "LINK"
ALERT_CODES = (SUSP, IOBJ, LINK)

OK = "OK"
ERR = "ERR"

_HEX_RE = re.compile(r"[0-9A-F]*\Z")
_INT_RE = re.compile(r"-?[0-9]+\Z")
_MSGID_RE = re.compile(r"[0-9A-F]{8}\Z")


class WireError(Exception):
    """Base for codec and framing failures."""


class IllegalCharacter(WireError):
    pass


class Malformed(WireError):
    pass


class PayloadTooLarge(WireError):
    pass


class Incomplete(WireError):
    pass


class ChecksumMismatch(WireError):
    pass


class Inconsistent(WireError):
    pass


@dataclass(frozen=True, order=True)
class MessageId:
    """Site tag (0-255) plus per-site counter (0-16777215), rendered as 8 hex chars."""

    site: int
    counter: int

    def __post_init__(self):
        if not 0 <= self.site <= 0xFF:
            raise ValueError(f"site tag out of range: {self.site}")
        if not 0 <= self.counter <= 0xFFFFFF:
            raise ValueError(f"counter out of range: {self.counter}")

    def render(self) -> str:
        return f"{self.site:02X}{self.counter:06X}"

    def __str__(self) -> str:
        return self.render()

    @classmethod
    def parse(cls, text: str) -> "MessageId":
        if not _MSGID_RE.match(text):
            raise Malformed(f"bad msgid {text!r}")
        return cls(int(text[:2], 16), int(text[2:], 16))


@dataclass(frozen=True)
class Txn:
    id: MessageId
    account: int
    delta: int

    def __post_init__(self):
        if self.account < 0:
            raise ValueError("account must be non-negative")


@dataclass(frozen=True)
class Alert:
    id: MessageId
    code: str
    text: str

    def __post_init__(self):
        if self.code not in ALERT_CODES:
            raise ValueError(f"unknown alert code {self.code!r}")


@dataclass(frozen=True)
class QueryReq:
    id: MessageId
    account: int

    def __post_init__(self):
        if self.account < 0:
            raise ValueError("account must be non-negative")


@dataclass(frozen=True)
class QueryResp:
    id: MessageId
    in_reply_to: MessageId
    account: int
    balance: int

    def __post_init__(self):
        if self.account < 0:
            raise ValueError("account must be non-negative")


@dataclass(frozen=True)
class Result:
    id: MessageId
    in_reply_to: MessageId
    status: str
    detail: str

    def __post_init__(self):
        if self.status not in (OK, ERR):
            raise ValueError(f"unknown result status {self.status!r}")


LogicalMessage = Txn | Alert | QueryReq | QueryResp | Result


def text_field_ok(text: str) -> bool:
    """Free-text fields: printable ASCII without the '|' delimiter."""
    return all(0x20 <= ord(ch) <= 0x7E and ch != "|" for ch in text)


def encode_message(msg: LogicalMessage) -> str:
    if isinstance(msg, Txn):
        return f"TXN|{msg.id}|{msg.account}|{msg.delta}"
    if isinstance(msg, Alert):
        if not text_field_ok(msg.text):
            raise IllegalCharacter(f"alert text not encodable: {msg.text!r}")
        return f"ALR|{msg.id}|{msg.code}|{msg.text}"
    if isinstance(msg, QueryReq):
        return f"QRY|{msg.id}|{msg.account}"
    if isinstance(msg, QueryResp):
        return f"QRS|{msg.id}|{msg.in_reply_to}|{msg.account}|{msg.balance}"
    if isinstance(msg, Result):
        if not text_field_ok(msg.detail):
            raise IllegalCharacter(f"result detail not encodable: {msg.detail!r}")
        return f"RES|{msg.id}|{msg.in_reply_to}|{msg.status}|{msg.detail}"
    raise TypeError(f"not a logical message: {msg!r}")


def _int_field(field: str) -> int:
    if not _INT_RE.match(field):
        raise Malformed(f"non-numeric field {field!r}")
    return int(field)


def _uint_field(field: str) -> int:
    value = _int_field(field)
    if value < 0:
        raise Malformed(f"negative account {field!r}")
    return value


def decode_message(text: str) -> LogicalMessage:
    parts = text.split("|")
    tag = parts[0]
    if tag == "TXN":
        if len(parts) != 4:
            raise Malformed(f"TXN wants 4 fields, got {len(parts)}")
        return Txn(MessageId.parse(parts[1]), _uint_field(parts[2]), _int_field(parts[3]))
    if tag == "ALR":
        if len(parts) != 4:
            raise Malformed(f"ALR wants 4 fields, got {len(parts)}")
        if parts[2] not in ALERT_CODES:
            raise Malformed(f"unknown alert code {parts[2]!r}")
        if not text_field_ok(parts[3]):
            raise Malformed(f"alert text has illegal characters: {parts[3]!r}")
        return Alert(MessageId.parse(parts[1]), parts[2], parts[3])
    if tag == "QRY":
        if len(parts) != 3:
            raise Malformed(f"QRY wants 3 fields, got {len(parts)}")
        return QueryReq(MessageId.parse(parts[1]), _uint_field(parts[2]))
    if tag == "QRS":
        if len(parts) != 5:
            raise Malformed(f"QRS wants 5 fields, got {len(parts)}")
        return QueryResp(
            MessageId.parse(parts[1]),
            MessageId.parse(parts[2]),
            _uint_field(parts[3]),
            _int_field(parts[4]),
        )
    if tag == "RES":
        if len(parts) != 5:
            raise Malformed(f"RES wants 5 fields, got {len(parts)}")
        if parts[3] not in (OK, ERR):
            raise Malformed(f"unknown result status {parts[3]!r}")
        if not text_field_ok(parts[4]):
            raise Malformed(f"result detail has illegal characters: {parts[4]!r}")
        return Result(MessageId.parse(parts[1]), MessageId.parse(parts[2]), parts[3], parts[4])
    raise Malformed(f"unknown tag {tag!r}")


def keystream(key: int, n: int) -> bytes:
    """First n bytes of the splitmix64 stream seeded with key, little-endian words."""
    if n < 0:
        raise ValueError("byte count must be non-negative")
    gen = Splitmix64(key)
    out = bytearray()
    while len(out) < n:
        out += gen.next_u64().to_bytes(8, "little")
    return bytes(out[:n])


def xor_crypt(data: bytes, key: int) -> bytes:
    """XOR with the keystream; self-inverse, length-preserving."""
    return bytes(b ^ k for b, k in zip(data, keystream(key, len(data))))


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, xorout 0."""
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x1021) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
    return crc


@dataclass(frozen=True)
class SmsSegment:
    """One framed SMS: header (msgid, seq/total, body checksum) plus hex body."""

    msgid: MessageId
    seq: int
    total: int
    crc: int
    body: str
    sender: str
    recipient: str

    def __post_init__(self):
        if not 1 <= self.total <= MAX_SEGMENTS:
            raise ValueError(f"total out of range: {self.total}")
        if not 1 <= self.seq <= self.total:
            raise ValueError(f"seq {self.seq} outside 1..{self.total}")
        if not 0 <= self.crc <= 0xFFFF:
            raise ValueError(f"crc out of range: {self.crc}")
        if len(self.body) > BODY_CHARS or not _HEX_RE.match(self.body):
            raise ValueError(f"bad segment body: {self.body!r}")
        assert len(self.frame()) <= MAX_FRAME_CHARS

    def frame(self) -> str:
        return f"S|{self.msgid}|{self.seq:02d}|{self.total:02d}|{self.crc:04X}|{self.body}"

    @classmethod
    def from_frame(cls, frame: str, sender: str, recipient: str) -> "SmsSegment":
        if len(frame) > MAX_FRAME_CHARS:
            raise Malformed(f"frame longer than {MAX_FRAME_CHARS} chars")
        parts = frame.split("|")
        if len(parts) != 6 or parts[0] != "S":
            raise Malformed(f"bad frame structure: {frame!r}")
        _, msgid, seq, total, crc, body = parts
        if not re.fullmatch(r"[0-9]{2}", seq) or not re.fullmatch(r"[0-9]{2}", total):
            raise Malformed(f"bad seq/total fields: {seq!r}/{total!r}")
        if not re.fullmatch(r"[0-9A-F]{4}", crc):
            raise Malformed(f"bad crc field: {crc!r}")
        if not _HEX_RE.match(body):
            raise Malformed(f"non-hex body: {body!r}")
        try:
            return cls(MessageId.parse(msgid), int(seq), int(total), int(crc, 16), body, sender, recipient)
        except ValueError as exc:
            raise Malformed(str(exc)) from exc


def segment(msgid: MessageId, hex_payload: str, sender: str, recipient: str) -> list[SmsSegment]:
    """Split a hex payload into ordered frames; empty payloads still get one frame."""
    if not _HEX_RE.match(hex_payload):
        raise IllegalCharacter("payload must be uppercase hex")
    if len(hex_payload) > MAX_PAYLOAD:
        raise PayloadTooLarge(f"{len(hex_payload)} chars > {MAX_PAYLOAD}")
    chunks = [hex_payload[i : i + BODY_CHARS] for i in range(0, len(hex_payload), BODY_CHARS)] or [""]
    total = len(chunks)
    return [
        SmsSegment(msgid, i, total, crc16(chunk.encode("ascii")), chunk, sender, recipient)
        for i, chunk in enumerate(chunks, start=1)
    ]


def reassemble(segments) -> str:
    """Rebuild the hex payload from an unordered, possibly duplicated collection."""
    segments = list(segments)
    if not segments:
        raise Incomplete("no segments")
    if len({s.msgid for s in segments}) != 1:
        raise Inconsistent("mixed msgids")
    if len({s.total for s in segments}) != 1:
        raise Inconsistent("conflicting totals")
    by_seq: dict[int, SmsSegment] = {}
    for seg in segments:
        kept = by_seq.setdefault(seg.seq, seg)
        if kept.body != seg.body:
            raise Inconsistent(f"conflicting bodies for seq {seg.seq}")
    total = segments[0].total
    missing = [i for i in range(1, total + 1) if i not in by_seq]
    if missing:
        raise Incomplete(f"missing seqs {missing}")
    for seg in by_seq.values():
        if crc16(seg.body.encode("ascii")) != seg.crc:
            raise ChecksumMismatch(f"seq {seg.seq} crc does not verify")
    return "".join(by_seq[i].body for i in range(1, total + 1))


def pack_message(msg: LogicalMessage, key: int, sender: str, recipient: str) -> list[SmsSegment]:
    """encode -> xor-encrypt -> hex -> segment, keyed by the message's own id."""
    plain = encode_message(msg).encode("ascii")
    payload = xor_crypt(plain, key).hex().upper()
    return segment(msg.id, payload, sender, recipient)


def unpack_message(segments, key: int) -> LogicalMessage:
    """Inverse of pack_message over a complete segment collection."""
    payload = reassemble(segments)
    try:
        cipher = bytes.fromhex(payload)
    except ValueError as exc:
        raise Malformed(f"bad hex payload: {exc}") from exc
    try:
        text = xor_crypt(cipher, key).decode("ascii")
    except UnicodeDecodeError as exc:
        raise Malformed("decrypted payload is not ASCII") from exc
    return decode_message(text)
