"""Scenario files: a flat key/value + sections text format (schema v1).

A scenario declares the topology, static FIB, traffic endpoints, the
strategy placement, link instability events and run/replication settings.
Unknown sections or keys are rejected; validation errors name the field.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

from .core import Name

SCHEMA_VERSION = 1

STRATEGY_NAMES = ("best-route", "multicast", "asf", "dq-learning", "dqn-af")

_KNOWN_KEYS = {
    "scenario": {"schema_version", "duration_s", "runs", "base_seed", "interest_lifetime_ms"},
    "nodes": {"names"},
    "consumer": {"node", "prefix", "rate", "start_s", "stop_s"},
    "producer": {"node", "prefix", "payload_bytes"},
    "strategy": None,  # default/measure_node/count_probes plus node.<name> overrides
    "asf": {"probe_interval_ms", "timeout_ms"},
    "dq": {"alpha", "gamma", "loss_penalty_ms", "q_floor_ms",
           "suppression_losses", "suppression_span_ms"},
    "dqnaf": {"learning_rate", "optimizer", "gamma", "epsilon_init", "epsilon_decay",
              "epsilon_min", "kappa", "rho", "psi", "reward_cap_ms", "reward_mode",
              "greedy"},
    "output": {"dir", "weight_mode"},
}


class MissingFile(FileNotFoundError):
    pass


class ParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ValidationError(ValueError):
    def __init__(self, field: str, message: str = ""):
        super().__init__(f"{field}: {message}" if message else field)
        self.field = field


@dataclass
class LinkSpec:
    a: str
    b: str
    delay_ms: float
    bandwidth_bps: float
    queue_capacity: int


@dataclass
class RouteSpec:
    node: str
    prefix: Name
    nexthop: str
    cost: int


@dataclass
class EventSpec:
    kind: str  # "outage" | "burst"
    links: list
    start_s: float
    stop_s: float
    rate: Optional[float] = None
    mean_burst: Optional[float] = None


@dataclass
class ScenarioConfig:
    duration_s: float = 30.0
    runs: int = 25
    base_seed: int = 1
    interest_lifetime_ms: float = 2000.0
    nodes: list = dc_field(default_factory=list)
    links: list = dc_field(default_factory=list)
    routes: list = dc_field(default_factory=list)
    consumer_node: str = ""
    prefix: Name = Name(("content",))
    consumer_rate: float = 100.0
    consumer_start_s: float = 0.0
    consumer_stop_s: float = 30.0
    producer_node: str = ""
    payload_bytes: int = 1024
    strategy_default: str = "best-route"
    strategy_overrides: dict = dc_field(default_factory=dict)
    measure_node: str = ""
    count_probes: bool = True
    asf_params: dict = dc_field(default_factory=dict)
    dq_params: dict = dc_field(default_factory=dict)
    dqnaf_params: dict = dc_field(default_factory=dict)
    events: list = dc_field(default_factory=list)
    output_dir: str = "out"
    weight_mode: str = "fresh"

    @property
    def duration_ms(self) -> float:
        return self.duration_s * 1000.0

    def link_pairs(self) -> set:
        pairs = set()
        for link in self.links:
            pairs.add((link.a, link.b))
            pairs.add((link.b, link.a))
        return pairs


def _get_float(section, key, fieldname) -> float:
    try:
        return float(section[key])
    except (KeyError, ValueError):
        raise ValidationError(fieldname, f"expected a number, got {section.get(key)!r}")


def _get_int(section, key, fieldname) -> int:
    try:
        return int(section[key])
    except (KeyError, ValueError):
        raise ValidationError(fieldname, f"expected an integer, got {section.get(key)!r}")


def _get_bool(raw: str, fieldname) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValidationError(fieldname, f"expected a boolean, got {raw!r}")


def _parse_link_ref(token: str, fieldname) -> tuple[str, str]:
    parts = token.split(":")
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise ValidationError(fieldname, f"expected node:node, got {token!r}")
    return parts[0], parts[1]


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    return parse_scenario(path.read_text(encoding="utf-8"))


def parse_scenario(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str  # keep keys case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ParseError(str(exc), line)

    for section in parser.sections():
        base = section.split(".")[0]
        if base not in _KNOWN_KEYS and section not in ("links", "fib", "events"):
            raise ValidationError(section, "unknown section")

    cfg = ScenarioConfig()

    # [scenario]
    if "scenario" not in parser:
        raise ValidationError("scenario", "missing section")
    sec = parser["scenario"]
    _reject_unknown(sec, "scenario")
    version = _get_int(sec, "schema_version", "scenario.schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError("scenario.schema_version", f"unsupported version {version}")
    cfg.duration_s = _get_float(sec, "duration_s", "scenario.duration_s")
    if cfg.duration_s <= 0:
        raise ValidationError("scenario.duration_s", "must be > 0")
    cfg.runs = _get_int(sec, "runs", "scenario.runs") if "runs" in sec else 1
    if cfg.runs < 1:
        raise ValidationError("scenario.runs", "must be >= 1")
    cfg.base_seed = _get_int(sec, "base_seed", "scenario.base_seed") if "base_seed" in sec else 1
    if "interest_lifetime_ms" in sec:
        cfg.interest_lifetime_ms = _get_float(sec, "interest_lifetime_ms",
                                              "scenario.interest_lifetime_ms")
        if cfg.interest_lifetime_ms <= 0:
            raise ValidationError("scenario.interest_lifetime_ms", "must be > 0")

    # [nodes]
    if "nodes" not in parser:
        raise ValidationError("nodes", "missing section")
    _reject_unknown(parser["nodes"], "nodes")
    cfg.nodes = parser["nodes"]["names"].split()
    if not cfg.nodes or len(set(cfg.nodes)) != len(cfg.nodes):
        raise ValidationError("nodes.names", "must be non-empty and unique")

    # [links]
    if "links" not in parser:
        raise ValidationError("links", "missing section")
    for key, raw in parser["links"].items():
        fieldname = f"links.{key}"
        parts = raw.split()
        if len(parts) != 4:
            raise ValidationError(fieldname, "expected: a:b delay_ms bandwidth_bps queue")
        a, b = _parse_link_ref(parts[0], fieldname)
        for node in (a, b):
            if node not in cfg.nodes:
                raise ValidationError(fieldname, f"unknown node {node!r}")
        try:
            delay, bw, queue = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError:
            raise ValidationError(fieldname, "bad numeric field")
        if delay < 0 or bw <= 0 or queue < 0:
            raise ValidationError(fieldname, "delay >= 0, bandwidth > 0, queue >= 0")
        cfg.links.append(LinkSpec(a, b, delay, bw, queue))

    # [fib]
    if "fib" not in parser:
        raise ValidationError("fib", "missing section")
    pairs = cfg.link_pairs()
    for key, raw in parser["fib"].items():
        fieldname = f"fib.{key}"
        parts = raw.split()
        if len(parts) != 4:
            raise ValidationError(fieldname, "expected: node prefix nexthop cost")
        node, prefix, nexthop, cost_raw = parts
        if node not in cfg.nodes:
            raise ValidationError(fieldname, f"unknown node {node!r}")
        if nexthop not in cfg.nodes:
            raise ValidationError(fieldname, f"unknown nexthop {nexthop!r}")
        if (node, nexthop) not in pairs:
            raise ValidationError(fieldname, f"{node!r} and {nexthop!r} are not linked")
        try:
            cost = int(cost_raw)
        except ValueError:
            raise ValidationError(fieldname, "bad cost")
        cfg.routes.append(RouteSpec(node, Name.from_uri(prefix), nexthop, cost))

    # [consumer] / [producer]
    for name in ("consumer", "producer"):
        if name not in parser:
            raise ValidationError(name, "missing section")
        _reject_unknown(parser[name], name)
    sec = parser["consumer"]
    cfg.consumer_node = sec.get("node", "")
    if cfg.consumer_node not in cfg.nodes:
        raise ValidationError("consumer.node", f"unknown node {cfg.consumer_node!r}")
    cfg.consumer_rate = _get_float(sec, "rate", "consumer.rate")
    if cfg.consumer_rate <= 0:
        raise ValidationError("consumer.rate", "must be > 0")
    cfg.consumer_start_s = _get_float(sec, "start_s", "consumer.start_s") if "start_s" in sec else 0.0
    cfg.consumer_stop_s = _get_float(sec, "stop_s", "consumer.stop_s") if "stop_s" in sec else cfg.duration_s
    if not (0 <= cfg.consumer_start_s < cfg.consumer_stop_s <= cfg.duration_s):
        raise ValidationError("consumer.start_s", "need 0 <= start < stop <= duration")

    sec = parser["producer"]
    cfg.producer_node = sec.get("node", "")
    if cfg.producer_node not in cfg.nodes:
        raise ValidationError("producer.node", f"unknown node {cfg.producer_node!r}")
    prefix_c = parser["consumer"].get("prefix", "")
    prefix_p = sec.get("prefix", "")
    if not prefix_p or prefix_c != prefix_p:
        raise ValidationError("producer.prefix", "must match consumer.prefix")
    cfg.prefix = Name.from_uri(prefix_p)
    if len(cfg.prefix) == 0:
        raise ValidationError("producer.prefix", "must be non-empty")
    cfg.payload_bytes = _get_int(sec, "payload_bytes", "producer.payload_bytes")
    if cfg.payload_bytes < 0:
        raise ValidationError("producer.payload_bytes", "must be >= 0")

    # [strategy]
    if "strategy" in parser:
        sec = parser["strategy"]
        for key, raw in sec.items():
            if key == "default":
                cfg.strategy_default = raw.strip()
            elif key == "measure_node":
                cfg.measure_node = raw.strip()
            elif key == "count_probes":
                cfg.count_probes = _get_bool(raw, "strategy.count_probes")
            elif key.startswith("node."):
                cfg.strategy_overrides[key[5:]] = raw.strip()
            else:
                raise ValidationError(f"strategy.{key}", "unknown key")
        for node, strat in list(cfg.strategy_overrides.items()):
            if node not in cfg.nodes:
                raise ValidationError(f"strategy.node.{node}", "unknown node")
            if strat not in STRATEGY_NAMES:
                raise ValidationError(f"strategy.node.{node}", f"unknown strategy {strat!r}")
    if cfg.strategy_default not in STRATEGY_NAMES:
        raise ValidationError("strategy.default", f"unknown strategy {cfg.strategy_default!r}")
    if not cfg.measure_node:
        cfg.measure_node = cfg.nodes[1] if len(cfg.nodes) > 1 else cfg.nodes[0]
    if cfg.measure_node not in cfg.nodes:
        raise ValidationError("strategy.measure_node", f"unknown node {cfg.measure_node!r}")

    # strategy parameter sections
    for section, target in (("asf", cfg.asf_params), ("dq", cfg.dq_params),
                            ("dqnaf", cfg.dqnaf_params)):
        if section in parser:
            sec = parser[section]
            _reject_unknown(sec, section)
            for key, raw in sec.items():
                if key in ("optimizer", "reward_mode", "greedy"):
                    target[key] = raw.strip()
                elif key in ("kappa", "rho", "psi", "suppression_losses"):
                    target[key] = _get_int(sec, key, f"{section}.{key}")
                else:
                    target[key] = _get_float(sec, key, f"{section}.{key}")

    # [events]
    if "events" in parser:
        for i, (key, raw) in enumerate(parser["events"].items()):
            fieldname = f"events[{i}]"
            parts = raw.split()
            if not parts or parts[0] not in ("outage", "burst"):
                raise ValidationError(fieldname, "kind must be outage or burst")
            kind = parts[0]
            expected = 4 if kind == "outage" else 6
            if len(parts) != expected:
                raise ValidationError(fieldname, f"expected {expected} fields for {kind}")
            refs = [_parse_link_ref(tok, fieldname) for tok in parts[1].split(",")]
            for a, b in refs:
                if (a, b) not in pairs:
                    raise ValidationError(fieldname, f"no link {a}:{b}")
            try:
                start, stop = float(parts[2]), float(parts[3])
            except ValueError:
                raise ValidationError(fieldname, "bad window")
            if not (0 <= start < stop <= cfg.duration_s):
                raise ValidationError(fieldname, "window must lie within [0, duration]")
            event = EventSpec(kind=kind, links=refs, start_s=start, stop_s=stop)
            if kind == "burst":
                try:
                    event.rate, event.mean_burst = float(parts[4]), float(parts[5])
                except ValueError:
                    raise ValidationError(fieldname, "bad burst parameters")
                if not (0 <= event.rate <= 1) or event.mean_burst < 1:
                    raise ValidationError(fieldname, "need 0 <= rate <= 1, mean_burst >= 1")
            cfg.events.append(event)

    # [output]
    if "output" in parser:
        sec = parser["output"]
        _reject_unknown(sec, "output")
        cfg.output_dir = sec.get("dir", cfg.output_dir)
        cfg.weight_mode = sec.get("weight_mode", cfg.weight_mode)
    if cfg.weight_mode not in ("fresh", "persist"):
        raise ValidationError("output.weight_mode", f"must be fresh or persist, got {cfg.weight_mode!r}")

    return cfg


def _reject_unknown(section, name: str):
    allowed = _KNOWN_KEYS.get(name)
    if allowed is None:
        return
    for key in section:
        if key not in allowed:
            raise ValidationError(f"{name}.{key}", "unknown key")


def bundled_scenario_path(name: str = "paper") -> Path:
    return Path(__file__).parent / "scenarios" / f"{name}.scenario"
