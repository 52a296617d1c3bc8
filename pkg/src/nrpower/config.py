"""Scenario configuration: TOML loading, validation, presets and echo."""
from __future__ import annotations

import copy
import dataclasses
import enum
import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, get_type_hints

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .energy import EnergyModel
from .link import LinkConfig
from .paging import EpiMode, PagingConfig
from .rrc import DrxConfig, RrcConfig
from .scheduler import PdcchGrid, PolicyKind, SchedulerConfig, SchedulingPolicy
from .sim import SCS_KHZ, TTI_SYMBOLS
from .traffic import Direction, TrafficConfig
from .uplink import RachSteps, UplinkConfig, UplinkModeKind


class ConfigError(ValueError):
    pass


class ScenarioKind(enum.Enum):
    DOWNLINK = "downlink"
    UPLINK = "uplink"
    PAGING = "paging"


@dataclass
class Numerology:
    scs_khz: int = SCS_KHZ
    tti_symbols: int = TTI_SYMBOLS

    def validate(self) -> None:
        if self.scs_khz != SCS_KHZ or self.tti_symbols != TTI_SYMBOLS:
            raise ValueError(
                f"numerology is fixed at scs_khz={SCS_KHZ}, tti_symbols={TTI_SYMBOLS}"
            )


@dataclass
class GridConfig:
    """Flat view of the scheduler knobs that are not part of the policy."""
    pdcch_period_symbols: int = TTI_SYMBOLS
    capacity_grants_per_occasion: int = 2
    sched_delay_symbols: int = 4
    ue_decode_symbols: int = 4
    pf_alpha: float = 0.01


@dataclass
class ScenarioConfig:
    scenario: str = "custom"
    kind: ScenarioKind = ScenarioKind.DOWNLINK
    cells: int = 18
    ues_per_cell: int = 10
    duration_s: float = 10.0
    drain_s: float = 1.0
    seeds: list[int] = field(default_factory=lambda: [1])
    outage_p: float = 1e-3
    numerology: Numerology = field(default_factory=Numerology)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    policy: SchedulingPolicy = field(default_factory=SchedulingPolicy)
    scheduler: GridConfig = field(default_factory=GridConfig)
    drx: DrxConfig = field(default_factory=DrxConfig)
    rrc: RrcConfig = field(default_factory=RrcConfig)
    paging: PagingConfig = field(default_factory=PagingConfig)
    uplink: UplinkConfig = field(default_factory=UplinkConfig)
    energy: EnergyModel = field(default_factory=EnergyModel)

    def scheduler_config(self) -> SchedulerConfig:
        g = self.scheduler
        return SchedulerConfig(
            policy=self.policy,
            grid=PdcchGrid(g.pdcch_period_symbols, g.capacity_grants_per_occasion),
            sched_delay_symbols=g.sched_delay_symbols,
            ue_decode_symbols=g.ue_decode_symbols,
            pf_alpha=g.pf_alpha,
        )

    def validate(self) -> None:
        checks = [
            ("cells", self.cells >= 1, "cells must be >= 1"),
            ("ues_per_cell", self.ues_per_cell >= 1, "ues_per_cell must be >= 1"),
            ("duration_s", self.duration_s > 0, "duration_s must be > 0"),
            ("drain_s", self.drain_s >= 0, "drain_s must be >= 0"),
            ("seeds", len(self.seeds) >= 1, "seeds must not be empty"),
            ("seeds", len(set(self.seeds)) == len(self.seeds), "seeds must be distinct"),
            ("outage_p", 0 < self.outage_p < 1, "outage_p must be in (0, 1)"),
        ]
        for _, ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        try:
            self.numerology.validate()
            self.traffic.validate()
            self.link.validate()
            self.policy.validate()
            self.scheduler_config().validate(self.link)
            self.drx.validate()
            self.rrc.validate()
            self.paging.validate()
            self.uplink.validate(self.ues_per_cell if self.kind is ScenarioKind.UPLINK else None)
            self.energy.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict[str, Any]:
        return _to_plain(self)

    def echo(self) -> str:
        """Fully resolved TOML; loading it back reproduces this config."""
        return tomli_w.dumps(self.to_dict())

    def digest(self) -> str:
        return hashlib.sha256(self.echo().encode()).hexdigest()


def _to_plain(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, list):
        return [_to_plain(v) for v in obj]
    return obj


# -- presets -------------------------------------------------------------------

def _fig7(policy: SchedulingPolicy) -> ScenarioConfig:
    cfg = ScenarioConfig(kind=ScenarioKind.DOWNLINK, ues_per_cell=10, duration_s=10.0)
    cfg.traffic = TrafficConfig(per_ue_arrival_rate=100.0, packet_size_bytes=50)
    # short HARQ loop of a URLLC-tuned carrier; see README for the rationale
    cfg.link = LinkConfig(harq_rtt_symbols=10)
    cfg.policy = policy
    return cfg


def _fig8(mode: UplinkModeKind, ues: int, pool: int, dedicated: bool = False,
          steps: RachSteps = RachSteps.FOUR) -> ScenarioConfig:
    cfg = ScenarioConfig(kind=ScenarioKind.UPLINK, ues_per_cell=ues, duration_s=15.0)
    cfg.traffic = TrafficConfig(per_ue_arrival_rate=40.0, packet_size_bytes=50,
                                direction=Direction.UL)
    cfg.uplink = UplinkConfig(mode=mode, preamble_pool=pool, dedicated=dedicated,
                              rach_steps=steps)
    # each payload finds the UE back in Inactive
    cfg.rrc = RrcConfig(suspend_inactivity_ms=0.0)
    return cfg


def _fig9(mode: EpiMode, idle_rs: bool) -> ScenarioConfig:
    cfg = ScenarioConfig(kind=ScenarioKind.PAGING, ues_per_cell=100, duration_s=20.0)
    cfg.traffic = TrafficConfig(per_ue_arrival_rate=0.0)
    cfg.link = LinkConfig(sinr_mean_db=2.0)
    cfg.rrc = RrcConfig(suspend_inactivity_ms=0.0)
    cfg.paging = PagingConfig(
        epi_mode=mode,
        idle_rs=idle_rs,
        # without RS the indication follows the first pre-sync burst
        epi_lead_ms=5.0 if idle_rs else 78.0,
        num_groups=8,
        page_rate_per_s=0.063,
    )
    return cfg


_PRESETS = {
    "fig7-instant": lambda: _fig7(SchedulingPolicy(PolicyKind.INSTANT)),
    "fig7-fixed": lambda: _fig7(SchedulingPolicy(PolicyKind.FIXED, k_min_symbols=14)),
    "fig7-dynamic": lambda: _fig7(SchedulingPolicy(PolicyKind.DYNAMIC, 14, 56)),
    "fig7-skipping": lambda: _fig7(SchedulingPolicy(PolicyKind.INSTANT, skip_slots=5,
                                                    skip_fraction=1.0)),
    "fig8-rrc": lambda: _fig8(UplinkModeKind.RRC, 10, 4),
    "fig8-cg-dedicated": lambda: _fig8(UplinkModeKind.CG, 10, 10, dedicated=True),
    "fig8-cg-contended-5ue": lambda: _fig8(UplinkModeKind.CG, 5, 4),
    "fig8-cg-contended-10ue": lambda: _fig8(UplinkModeKind.CG, 10, 4),
    "fig8-rach-sdt": lambda: _fig8(UplinkModeKind.RACH, 10, 4, steps=RachSteps.TWO),
    "fig9-drx-ssb": lambda: _fig9(EpiMode.NONE, False),
    "fig9-epi-common": lambda: _fig9(EpiMode.COMMON, False),
    "fig9-epi-group": lambda: _fig9(EpiMode.GROUPED, False),
    "fig9-epi-group-rs": lambda: _fig9(EpiMode.GROUPED, True),
}


def preset_names() -> list[str]:
    return list(_PRESETS)


def preset(name: str) -> ScenarioConfig:
    try:
        cfg = _PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}") from None
    cfg.scenario = name
    return cfg


# -- loading -------------------------------------------------------------------

def _coerce(value: Any, typ: Any, where: str) -> Any:
    if isinstance(typ, type) and issubclass(typ, enum.Enum):
        try:
            return typ(value)
        except ValueError:
            allowed = ", ".join(repr(m.value) for m in typ)
            raise ConfigError(f"{where}: {value!r} is not one of {allowed}") from None
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    if getattr(typ, "__origin__", None) is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        (inner,) = typ.__args__
        return [_coerce(v, inner, f"{where}[{i}]") for i, v in enumerate(value)]
    raise ConfigError(f"{where}: unsupported field type")


def _apply(target: Any, data: dict[str, Any], prefix: str) -> None:
    hints = get_type_hints(type(target))
    names = {f.name for f in dataclasses.fields(target)}
    for key, value in data.items():
        where = f"{prefix}{key}"
        if key not in names:
            raise ConfigError(f"unknown key {where!r}")
        typ = hints[key]
        current = getattr(target, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: expected a table")
            _apply(current, value, f"{where}.")
        else:
            if isinstance(value, dict):
                raise ConfigError(f"{where}: expected a value, got a table")
            setattr(target, key, _coerce(value, typ, where))


def config_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    data = copy.deepcopy(data)
    name = data.pop("scenario", None)
    if name is not None and not isinstance(name, str):
        raise ConfigError("scenario: expected a string")
    cfg = preset(name) if name is not None and name != "custom" else ScenarioConfig()
    _apply(cfg, data, "")
    cfg.validate()
    return cfg


def parse_config(text: str, scenario: str | None = None) -> ScenarioConfig:
    """Parse TOML text; `scenario` replaces the file's own scenario key."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None
    if scenario is not None:
        data["scenario"] = scenario
    return config_from_dict(data)


def load_config(path: str | Path, scenario: str | None = None) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
    return parse_config(text, scenario)
