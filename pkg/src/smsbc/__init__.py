"""Two-site account replication with a standby SMS channel, simulated deterministically.

Two ledger-bearing sites replicate transactions over a primary link; when the
link breaks, transactions, alerts, and remote queries travel as encrypted,
segmented text messages through a store-and-forward center with injectable
loss, duplication, and delay. Everything runs on an explicit tick clock, so a
configuration replays byte-for-byte.
"""

from .config import InvalidConfig, WorldConfig, parse_config
from .scenarios import ScenarioReport, run_scenario, run_twice
from .world import Timeout, World, build_world, run_until

__version__ = "0.1.0"

__all__ = [
    "InvalidConfig",
    "ScenarioReport",
    "Timeout",
    "World",
    "WorldConfig",
    "build_world",
    "parse_config",
    "run_scenario",
    "run_twice",
    "run_until",
    "__version__",
]
