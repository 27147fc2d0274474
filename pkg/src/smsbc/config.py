"""World configuration: defaults, validation, and the line-oriented config parser.

Config files are `key = value` lines; '#' starts a comment and blank lines are
skipped. Unknown keys are rejected so a run is fully described by its file.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

MAX_U64 = (1 << 64) - 1


class InvalidConfig(Exception):
    pass


@dataclass
class WorldConfig:
    seed: int = 1
    key: int = 1
    loss_prob: float = 0.0
    dup_prob: float = 0.0
    delay_min: int = 1
    delay_max: int = 1
    validity_period: int = 1000
    allowable_amount: int = 10000
    max_retries: int = 3
    query_timeout: int = 50
    settle_ticks: int = 100
    accounts: dict[int, int] = field(default_factory=lambda: {1001: 100000})
    site1_number: str = "10001"
    site2_number: str = "10002"
    key_person_number: str = "79001"
    dba_number: str = "79002"

    def validate(self) -> None:
        for name in ("seed", "key"):
            value = getattr(self, name)
            if not 0 <= value <= MAX_U64:
                raise InvalidConfig(f"{name} must fit in 64 bits, got {value}")
        for name in ("loss_prob", "dup_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidConfig(f"{name} must be in [0, 1], got {value}")
        if not 0 <= self.delay_min <= self.delay_max:
            raise InvalidConfig(
                f"need 0 <= delay_min <= delay_max, got [{self.delay_min}, {self.delay_max}]")
        if self.validity_period < 1:
            raise InvalidConfig(f"validity_period must be >= 1, got {self.validity_period}")
        if self.allowable_amount <= 0:
            raise InvalidConfig(f"allowable_amount must be positive, got {self.allowable_amount}")
        if self.max_retries < 0:
            raise InvalidConfig(f"max_retries must be >= 0, got {self.max_retries}")
        if self.query_timeout < 0:
            raise InvalidConfig(f"query_timeout must be >= 0, got {self.query_timeout}")
        if self.settle_ticks < 0:
            raise InvalidConfig(f"settle_ticks must be >= 0, got {self.settle_ticks}")
        if not self.accounts:
            raise InvalidConfig("at least one account is required")
        for account in self.accounts:
            if account < 0:
                raise InvalidConfig(f"negative account number {account}")
        numbers = [self.site1_number, self.site2_number,
                   self.key_person_number, self.dba_number]
        for number in numbers:
            if not (5 <= len(number) <= 15) or not number.isdigit():
                raise InvalidConfig(f"phone number must be 5-15 digits, got {number!r}")
        if len(set(numbers)) != len(numbers):
            raise InvalidConfig(f"phone numbers must be distinct, got {numbers}")

    def with_overrides(self, **kwargs) -> "WorldConfig":
        cfg = replace(self, **kwargs)
        cfg.validate()
        return cfg


_INT_KEYS = ("seed", "key", "delay_min", "delay_max", "validity_period",
             "allowable_amount", "max_retries", "query_timeout", "settle_ticks")
_FLOAT_KEYS = ("loss_prob", "dup_prob")
_NUMBER_KEYS = ("site1_number", "site2_number", "key_person_number", "dba_number")


def _check_key_range(cfg: WorldConfig, key: str, where: str) -> None:
    """Range-check a single just-assigned key so errors carry line context."""
    if key in ("seed", "key") and not 0 <= getattr(cfg, key) <= MAX_U64:
        raise InvalidConfig(f"{where}: must fit in 64 bits")
    if key in _FLOAT_KEYS and not 0.0 <= getattr(cfg, key) <= 1.0:
        raise InvalidConfig(f"{where}: out of range [0, 1]")
    if key in ("delay_min", "delay_max", "max_retries", "query_timeout",
               "settle_ticks") and getattr(cfg, key) < 0:
        raise InvalidConfig(f"{where}: must be non-negative")
    if key == "validity_period" and getattr(cfg, key) < 1:
        raise InvalidConfig(f"{where}: must be at least 1")
    if key == "allowable_amount" and getattr(cfg, key) <= 0:
        raise InvalidConfig(f"{where}: must be positive")
    if key in _NUMBER_KEYS:
        number = getattr(cfg, key)
        if not (5 <= len(number) <= 15) or not number.isdigit():
            raise InvalidConfig(f"{where}: phone number must be 5-15 digits")


def _parse_accounts(value: str, where: str) -> dict[int, int]:
    accounts: dict[int, int] = {}
    for pair in value.split(","):
        pair = pair.strip()
        if "=" not in pair:
            raise InvalidConfig(f"{where}: account entry {pair!r} is not ACCT=BALANCE")
        acct_text, bal_text = (p.strip() for p in pair.split("=", 1))
        try:
            accounts[int(acct_text)] = int(bal_text)
        except ValueError:
            raise InvalidConfig(f"{where}: bad account entry {pair!r}") from None
    return accounts


def parse_config(text: str) -> WorldConfig:
    """Parse config-file contents; missing keys keep their defaults."""
    cfg = WorldConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        where = f"line {lineno}: key '{key}'"
        if key in _INT_KEYS:
            try:
                setattr(cfg, key, int(value))
            except ValueError:
                raise InvalidConfig(f"{where}: not an integer: {value!r}") from None
        elif key in _FLOAT_KEYS:
            try:
                setattr(cfg, key, float(value))
            except ValueError:
                raise InvalidConfig(f"{where}: not a number: {value!r}") from None
        elif key in _NUMBER_KEYS:
            setattr(cfg, key, value)
        elif key == "accounts":
            cfg.accounts = _parse_accounts(value, where)
        else:
            raise InvalidConfig(f"{where}: unknown key")
        _check_key_range(cfg, key, where)
    cfg.validate()
    return cfg
