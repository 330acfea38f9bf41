"""Scenario configuration: the single source of every physical and
experimental parameter, loadable from an INI file.

Key names in the file must match the dataclass fields exactly; unknown
keys or sections are hard errors because a silently ignored typo in a
physics parameter is the worst failure mode this tool has.
"""

import configparser
from dataclasses import dataclass, fields

from .errors import ConfigError


@dataclass(frozen=True)
class ScenarioConfig:
    """All tunables of a simulated mission.

    Units are embedded in the names: _db/_dbm logarithmic powers, _m
    meters, _s seconds, _mps meters/second, _nats information.
    """

    k0_db: float = -30.0          # channel gain at 1 m
    sigma2_dbm: float = -70.0     # receiver noise power
    A_m: float = 10.0             # flight altitude
    eta: float = 0.5              # energy-harvesting efficiency
    M: int = 3                    # antennas (1 transmit + M-1 receive)
    delta_m: float = 0.1          # antenna spacing
    v_max_mps: float = 10.0       # top speed
    T_s: float = 1000.0           # mission time budget (throughput mode)
    D_range_m: tuple = (20.0, 30.0)     # leg-length draw range [lo, hi)
    ytilde_range_m: tuple = (0.0, 5.0)  # flight-row offset draw range
    K: int = 20                   # sensors
    N: int = 4                    # serving groups
    pt_db: float = 4.0            # transmit power, dBW
    I_nats: float = 10.0          # per-sensor information demand
    d_max_m: float = 35.0         # max effective power-transfer distance
    trials: int = 1000
    seed: int = 1

    def validate(self) -> "ScenarioConfig":
        def positive(name, value):
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")

        positive("A_m", self.A_m)
        positive("delta_m", self.delta_m)
        positive("v_max_mps", self.v_max_mps)
        positive("T_s", self.T_s)
        positive("I_nats", self.I_nats)
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError(f"eta must lie in (0, 1], got {self.eta}")
        if self.M < 2:
            raise ConfigError("need M >= 2 antennas")
        if self.K < 1 or self.N < 1:
            raise ConfigError("K and N must be at least 1")
        if self.N > self.K:
            raise ConfigError(f"cannot serve K={self.K} sensors in "
                              f"N={self.N} groups")
        if self.d_max_m <= self.A_m:
            raise ConfigError("d_max_m must exceed the altitude A_m")
        for name in ("D_range_m", "ytilde_range_m"):
            rng = getattr(self, name)
            if len(rng) != 2 or not rng[1] > rng[0]:
                raise ConfigError(f"{name} must be a nonempty (lo, hi) range")
        if self.D_range_m[0] <= 0.0:
            raise ConfigError("leg lengths must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        return self


_INT_FIELDS = {"M", "K", "N", "trials", "seed"}
_RANGE_FIELDS = {"D_range_m", "ytilde_range_m"}


def _parse_range(name: str, raw: str) -> tuple:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{name} must be 'lo,hi', got {raw!r}")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def load_config(path) -> ScenarioConfig:
    """Read a ScenarioConfig from an INI file with one [scenario] section."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # field names are case-sensitive (K vs k0_db)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc

    sections = parser.sections()
    if sections != ["scenario"]:
        raise ConfigError(
            f"config must contain exactly one [scenario] section, "
            f"found {sections or 'none'}")

    known = {f.name for f in fields(ScenarioConfig)}
    values = {}
    for key, raw in parser.items("scenario"):
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            if key in _RANGE_FIELDS:
                values[key] = _parse_range(key, raw)
            elif key in _INT_FIELDS:
                values[key] = int(raw)
            else:
                values[key] = float(raw)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    return ScenarioConfig(**values).validate()
