"""Command line: scenario files, single episodes, batches and reports.

Scenario files are TOML. Top-level keys ``controller``, ``net_model`` and
``seed`` select the combination; sections ``[sim]``, ``[elastic]``, ``[net]``,
``[contact]``, ``[gains]``, ``[guidance]``, ``[orbit]``, ``[debris]`` (with
``[[debris.boxes]]``) and ``[batch]`` override individual fields. Anything
left out keeps its default.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import re
import sys
import typing
from enum import Enum
from pathlib import Path

import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from netcapture import harness
from netcapture.config import (
    BatchSpec,
    BoxPrimitive,
    ConfigError,
    ControllerKind,
    NetModelKind,
    SimConfig,
    to_plain,
)
from netcapture.sim import run_episode, write_metrics_json

# scenario section -> attribute of SimConfig
SECTIONS = {
    "elastic": "elastic",
    "net": "net",
    "contact": "contact",
    "gains": "controller",
    "guidance": "guidance",
    "orbit": "orbit",
    "debris": "debris",
}
SIM_KEYS = ("control_dt", "substeps", "timeout")
TOP_KEYS = ("controller", "net_model", "seed", "sim", "batch") + tuple(SECTIONS)


# --------------------------------------------------------------------------
# loading

def _locate(text: str, path: list[str]) -> int | None:
    """Best-effort line number of a dotted key in TOML source."""
    table: list[str] = []
    header = re.compile(r"^\s*\[\[?\s*([^\]]+?)\s*\]\]?\s*(#.*)?$")
    keyline = re.compile(r"^\s*([A-Za-z0-9_\-\"']+)\s*=")
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = header.match(line)
        if m:
            table = [p.strip().strip("\"'") for p in m.group(1).split(".")]
            if table == path:
                return lineno
            continue
        m = keyline.match(line)
        if m and table + [m.group(1).strip("\"'")] == path:
            return lineno
    return None


def _convert(value, hint, key: str, line):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union or (origin is not None and type(None) in args):
        inner = [a for a in args if a is not type(None)]
        if value is False:
            return None  # TOML has no null; false switches an optional feature off
        return _convert(value, inner[0], key, line)
    if isinstance(hint, type) and issubclass(hint, Enum):
        try:
            return hint(value)
        except ValueError:
            choices = ", ".join(repr(m.value) for m in hint)
            raise ConfigError(key, f"must be one of {choices}", line) from None
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(key, "must be true or false", line)
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, "must be an integer", line)
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, "must be a number", line)
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(key, "must be a string", line)
        return value
    if origin is tuple:
        if not isinstance(value, list) or len(value) != len(args):
            raise ConfigError(key, f"must be a list of {len(args)} values", line)
        return tuple(_convert(v, a, f"{key}[{i}]", line) for i, (v, a) in enumerate(zip(value, args)))
    raise ConfigError(key, f"unsupported field type {hint}", line)


def _apply(obj, table: dict, path: list[str], text: str) -> None:
    hints = typing.get_type_hints(type(obj))
    names = {f.name for f in dataclasses.fields(obj)}
    for key, value in table.items():
        kpath = path + [key]
        dotted = ".".join(kpath)
        line = _locate(text, kpath)
        if key not in names:
            raise ConfigError(dotted, "unknown key", line)
        hint = hints[key]
        if isinstance(obj, type(SimConfig().debris)) and key == "boxes":
            if not isinstance(value, list):
                raise ConfigError(dotted, "must be an array of tables", line)
            boxes = []
            for i, item in enumerate(value):
                if not isinstance(item, dict):
                    raise ConfigError(f"{dotted}[{i}]", "must be a table", line)
                if "half_extents" not in item:
                    raise ConfigError(f"{dotted}[{i}].half_extents", "is required", line)
                box = BoxPrimitive(half_extents=(1.0, 1.0, 1.0))
                _apply(box, item, kpath, text)
                boxes.append(box)
            setattr(obj, key, boxes)
        elif dataclasses.is_dataclass(getattr(obj, key)):
            if not isinstance(value, dict):
                raise ConfigError(dotted, "must be a table", line)
            _apply(getattr(obj, key), value, kpath, text)
        else:
            setattr(obj, key, _convert(value, hint, dotted, line))


def _combinations(value, text: str) -> list:
    line = _locate(text, ["batch", "combinations"])
    if not isinstance(value, list) or not value:
        raise ConfigError("batch.combinations", "must be a non-empty list", line)
    out = []
    for i, item in enumerate(value):
        if isinstance(item, str):
            item = item.split("-", 1)
        if not isinstance(item, list) or len(item) != 2:
            raise ConfigError(f"batch.combinations[{i}]", "must be [controller, net_model]", line)
        out.append((_convert(item[0], ControllerKind, f"batch.combinations[{i}]", line),
                    _convert(item[1], NetModelKind, f"batch.combinations[{i}]", line)))
    return out


def parse_scenario(text: str) -> tuple[SimConfig, BatchSpec]:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError("<document>", f"parse error: {exc}", int(m.group(1)) if m else None) from None
    cfg = SimConfig()
    batch = BatchSpec()
    for key, value in doc.items():
        line = _locate(text, [key])
        if key not in TOP_KEYS:
            raise ConfigError(key, "unknown key", line)
        if key == "controller":
            if isinstance(value, dict):
                raise ConfigError(key, "controller selects the kind; put gains under [gains]", line)
            cfg.controller.kind = _convert(value, ControllerKind, key, line)
        elif key == "net_model":
            cfg.net_model = _convert(value, NetModelKind, key, line)
        elif key == "seed":
            cfg.seed = _convert(value, int, key, line)
            batch.seed = cfg.seed
        elif key == "sim":
            if not isinstance(value, dict):
                raise ConfigError(key, "must be a table", line)
            for k, v in value.items():
                if k not in SIM_KEYS:
                    raise ConfigError(f"sim.{k}", "unknown key", _locate(text, ["sim", k]))
            hints = typing.get_type_hints(SimConfig)
            for k, v in value.items():
                setattr(cfg, k, _convert(v, hints[k], f"sim.{k}", _locate(text, ["sim", k])))
        elif key == "batch":
            if not isinstance(value, dict):
                raise ConfigError(key, "must be a table", line)
            value = dict(value)
            if "combinations" in value:
                batch.combinations = _combinations(value.pop("combinations"), text)
            _apply(batch, value, ["batch"], text)
        else:
            if not isinstance(value, dict):
                raise ConfigError(key, "must be a table", line)
            _apply(getattr(cfg, SECTIONS[key]), value, [key], text)
    _validate(cfg, batch, text)
    return cfg, batch


def _validate(cfg: SimConfig, batch: BatchSpec, text: str) -> None:
    sections_back = {v: k for k, v in SECTIONS.items()}
    try:
        cfg.validate()
        batch.validate()
    except ConfigError as exc:
        parts = exc.key.split(".")
        if parts[0] in sections_back:
            parts[0] = sections_back[parts[0]]
        key = ".".join(parts)
        raise ConfigError(key, str(exc).split(": ", 1)[1], _locate(text, parts)) from None


def load_scenario(path) -> tuple[SimConfig, BatchSpec]:
    """Read and validate a scenario file; defaults fill everything left out."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read scenario {p}: {exc.strerror}") from None
    try:
        return parse_scenario(text)
    except ConfigError as exc:
        raise ConfigError(exc.key, f"{p}: {str(exc).split(': ', 1)[1]}", exc.line) from None


def _drop_none(obj):
    if isinstance(obj, dict):
        return {k: _drop_none(v) for k, v in obj.items() if v is not None or k == "initial_clearance"}
    if isinstance(obj, list):
        return [_drop_none(v) for v in obj]
    return obj


def dump_scenario(cfg: SimConfig, batch: BatchSpec | None = None) -> str:
    """Effective configuration as a scenario file that reloads to the same config."""
    plain = to_plain(cfg)
    doc = {
        "controller": plain["controller"].pop("kind"),
        "net_model": plain.pop("net_model"),
        "seed": plain.pop("seed"),
        "sim": {k: plain.pop(k) for k in SIM_KEYS},
    }
    for section, attr in SECTIONS.items():
        doc[section] = plain[attr]
    if doc["net"]["initial_clearance"] is None:
        doc["net"]["initial_clearance"] = False
    if batch is not None:
        b = to_plain(batch)
        b.pop("seed")
        doc["batch"] = b
    return tomli_w.dumps(_drop_none(doc))


# --------------------------------------------------------------------------
# commands

def _cmd_run(args) -> int:
    cfg, _ = load_scenario(args.scenario) if args.scenario else (SimConfig().validate(), None)
    metrics, record = run_episode(cfg, record=args.record is not None)
    doc = {"metrics": metrics.to_dict()}
    doc["metrics"].pop("histograms")
    if args.record is not None:
        out = Path(args.record)
        out.parent.mkdir(parents=True, exist_ok=True)
        record.write_csv(out)
        write_metrics_json(metrics, cfg, out.with_suffix(".metrics.json"))
        out.with_suffix(".scenario.toml").write_text(dump_scenario(cfg))
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _cmd_batch(args) -> int:
    cfg, batch = load_scenario(args.scenario) if args.scenario else (SimConfig().validate(), BatchSpec())
    batch.out_dir = args.out
    if args.workers is not None:
        batch.workers = args.workers
    elif harness.default_workers() > 1:
        batch.workers = harness.default_workers()
    if args.samples is not None:
        batch.samples = args.samples
    batch.validate()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_scenario.toml").write_text(dump_scenario(cfg, batch))
    summary = harness.run_batch(batch, cfg)
    _print_table(summary)
    for err in summary.io_errors:
        print(f"error: {err}", file=sys.stderr)
    return 1 if summary.io_errors else 0


def _cmd_report(args) -> int:
    src = Path(args.input)
    rows = harness.read_rows(src / "episodes.csv")
    details = None
    detail_path = src / "episodes_detail.jsonl"
    if detail_path.exists():
        details = [json.loads(line) for line in detail_path.read_text().splitlines() if line.strip()]
        if len(details) != len(rows):
            details = None
    summary = harness.summarize(rows, details)
    errors = harness.write_outputs(summary, src, details, svg=args.svg)
    _print_table(summary)
    for err in errors:
        print(f"error: {err}", file=sys.stderr)
    return 1 if errors else 0


def _print_table(summary) -> None:
    print(f"{'combination':28s} {'episodes':>8s} {'captured':>8s} {'capture %':>9s} {'median t [s]':>12s} {'median fuel [kg]':>16s}")
    for label, c in summary.combinations.items():
        t = f"{c.capture_time.median:.1f}" if c.capture_time else "-"
        f = f"{c.fuel.median:.4f}" if c.fuel else "-"
        print(f"{label:28s} {c.episodes:8d} {c.captured:8d} {c.capture_percentage:9.1f} {t:>12s} {f:>16s}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netcapture", description="Soft-net debris capture simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one episode and print its metrics as JSON")
    run.add_argument("--scenario", help="scenario TOML file (defaults if omitted)")
    run.add_argument("--record", metavar="CSV", help="write the per-step trajectory here")
    run.set_defaults(func=_cmd_run)
    batch = sub.add_parser("batch", help="run the start-point batch for every combination")
    batch.add_argument("--scenario", help="scenario TOML file (defaults if omitted)")
    batch.add_argument("--out", required=True, help="output directory")
    batch.add_argument("--workers", type=int, help="worker processes (env NETCAPTURE_WORKERS)")
    batch.add_argument("--samples", type=int, help="override the number of start points")
    batch.set_defaults(func=_cmd_batch)
    report = sub.add_parser("report", help="re-aggregate a batch directory")
    report.add_argument("--in", dest="input", required=True, help="batch output directory")
    report.add_argument("--svg", action="store_true", help="also write the scatter plots")
    report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
