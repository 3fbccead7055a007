"""Scenario files, report serialization, and the embedded reference tables.

Scenario files are TOML with the keys n, hop_mean, hop_var, deadline, p_tr,
hop_distance and an optional [sim] block (trials, seed, policy, t_tr).
Unknown keys are rejected and every validation error carries the offending
line.  Reports serialize to an aligned table, CSV, or JSON; JSON is
lossless and versioned, and :func:`read_report` restores the exact object.
"""

from __future__ import annotations

import io
import json
import re
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as tomllib

from .analysis import ReturnProfile, Scenario
from .planner import WasteReport
from .simulate import SimConfig, SimReport

__all__ = [
    "ScenarioFileError",
    "load_scenario",
    "write_report",
    "read_report",
    "GoldenValue",
    "GoldenTable",
    "golden_tables",
]

SCHEMA_VERSION = 1

_SCENARIO_KEYS = ("n", "hop_mean", "hop_var", "deadline", "p_tr", "hop_distance")
_REQUIRED_KEYS = ("n", "hop_mean", "hop_var", "deadline", "p_tr")
_SIM_KEYS = ("trials", "seed", "policy", "t_tr")
_DEFAULT_TRIALS = 1_000_000
_DEFAULT_SEED = 0


class ScenarioFileError(ValueError):
    """Malformed or invalid scenario/report file, with location when known."""

    def __init__(self, message: str, path=None, line: int | None = None, field: str | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        self.field = field
        where = self.path or "<input>"
        if line is not None:
            where += f":{line}"
        if field is not None:
            where += f": {field}"
        super().__init__(f"{where}: {message}")


def _key_line(text: str, key: str) -> int | None:
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if pattern.match(line):
            return lineno
    return None


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def load_scenario(path) -> tuple[Scenario, SimConfig | None]:
    """Parse and validate a scenario file.

    Defaults: hop_distance falls back to hop_mean (so distance- and
    time-unit waste formulas agree), seed to 0, trials to 10^6.
    Returns the scenario and the [sim] block's config, or None without one.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioFileError(f"cannot read: {exc.strerror or exc}", path=path) from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioFileError(f"parse error: {exc}", path=path) from exc

    def fail(field: str, message: str):
        raise ScenarioFileError(message, path=path, line=_key_line(text, field), field=field)

    for key in data:
        if key not in _SCENARIO_KEYS + ("sim",):
            fail(key, f"unknown key {key!r}")
    for key in _REQUIRED_KEYS:
        if key not in data:
            raise ScenarioFileError(f"missing required key {key!r}", path=path, field=key)

    n = data["n"]
    if not _is_int(n):
        fail("n", f"n must be an integer, got {n!r}")
    if n < 2:
        fail("n", "n ≥ 2 required")
    for key in ("hop_mean", "hop_var", "deadline"):
        v = data[key]
        if not _is_number(v) or v <= 0:
            fail(key, f"{key} must be a positive number, got {v!r}")
    p_tr = data["p_tr"]
    if not _is_number(p_tr) or not (0.0 < p_tr < 1.0):
        fail("p_tr", "p_tr must lie strictly inside (0,1)")
    hop_distance = data.get("hop_distance")
    if hop_distance is not None and (not _is_number(hop_distance) or hop_distance <= 0):
        fail("hop_distance", f"hop_distance must be a positive number, got {hop_distance!r}")

    scenario = Scenario(
        n=n,
        hop_mean=float(data["hop_mean"]),
        hop_var=float(data["hop_var"]),
        deadline=float(data["deadline"]),
        p_tr=float(p_tr),
        hop_distance=None if hop_distance is None else float(hop_distance),
    )

    sim_cfg = None
    if "sim" in data:
        sim = data["sim"]
        if not isinstance(sim, dict):
            fail("sim", "sim must be a table ([sim] block)")
        for key in sim:
            if key not in _SIM_KEYS:
                fail(key, f"unknown sim key {key!r}")
        trials = sim.get("trials", _DEFAULT_TRIALS)
        if not _is_int(trials) or trials < 1:
            fail("trials", f"trials must be an integer ≥ 1, got {trials!r}")
        seed = sim.get("seed", _DEFAULT_SEED)
        if not _is_int(seed):
            fail("seed", f"seed must be an integer, got {seed!r}")
        policy = sim.get("policy", "quantile")
        if policy not in ("quantile", "rest_time"):
            fail("policy", f"policy must be 'quantile' or 'rest_time', got {policy!r}")
        t_tr = sim.get("t_tr")
        if policy == "rest_time":
            if t_tr is None:
                fail("policy", "rest_time policy requires t_tr")
            if not _is_number(t_tr) or not (0.0 < t_tr < scenario.deadline):
                fail("t_tr", "t_tr must lie strictly between 0 and deadline")
            t_tr = float(t_tr)
        elif t_tr is not None:
            fail("t_tr", "t_tr is only meaningful for the rest_time policy")
        sim_cfg = SimConfig(trials=trials, seed=seed, policy=policy, t_tr=t_tr)
    return scenario, sim_cfg


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------


_KINDS = {
    ReturnProfile: "return_profile",
    SimReport: "sim_report",
    WasteReport: "waste_report",
}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _to_dict(report) -> dict:
    kind = _KINDS.get(type(report))
    if kind is None:
        raise TypeError(f"cannot serialize {type(report).__name__}")
    out = {"schema_version": SCHEMA_VERSION, "kind": kind}
    out.update(asdict(report))
    if isinstance(report, SimReport):
        out["profile"] = {"schema_version": SCHEMA_VERSION, "kind": "return_profile"} | out["profile"]
    return out


def _profile_rows(profile: ReturnProfile, ci=None):
    rows = []
    for k, p in enumerate(profile.p_return, start=1):
        if p is None:
            continue
        rows.append((str(k), k, p, None if ci is None else ci[k - 1]))
    if profile.p_success is not None:
        rows.append(("success", None, profile.p_success, None if ci is None else ci[-1]))
    return rows


def _csv_text(report) -> str:
    buf = io.StringIO()
    if isinstance(report, (ReturnProfile, SimReport)):
        profile = report.profile if isinstance(report, SimReport) else report
        ci = report.ci_halfwidth if isinstance(report, SimReport) else None
        buf.write("node,k,probability,ci_halfwidth,method\n")
        for node, k, p, halfwidth in _profile_rows(profile, ci):
            buf.write(f"{node},{_fmt(k)},{_fmt(p)},{_fmt(halfwidth)},{profile.method}\n")
    elif isinstance(report, WasteReport):
        buf.write("metric,value\n")
        for key, value in asdict(report).items():
            buf.write(f"{key},{_fmt(value)}\n")
    else:
        raise TypeError(f"cannot serialize {type(report).__name__}")
    return buf.getvalue()


def _table_text(report) -> str:
    lines = []
    if isinstance(report, (ReturnProfile, SimReport)):
        profile = report.profile if isinstance(report, SimReport) else report
        ci = report.ci_halfwidth if isinstance(report, SimReport) else None
        lines.append(f"method: {profile.method}")
        header = f"{'node':<8} {'probability':>12}"
        if ci is not None:
            header += f" {'ci99':>12}"
        lines.append(header)
        for node, _k, p, halfwidth in _profile_rows(profile, ci):
            row = f"{node:<8} {_fmt(p):>12}"
            if ci is not None:
                row += f" {_fmt(halfwidth):>12}"
            lines.append(row)
        if isinstance(report, SimReport):
            lines.append(f"trials: {report.trials}    seed: {report.seed}    policy: {report.policy}")
            if report.on_time_fraction is not None:
                lines.append(f"on_time_fraction: {_fmt(report.on_time_fraction)}")
        elif profile.method == "grid":
            lines.append(f"mass_defect: {_fmt(profile.mass_defect)}")
            if profile.quality_warning:
                lines.append("quality_warning: grid too coarse (Richardson check failed)")
    elif isinstance(report, WasteReport):
        width = max(len(k) for k in asdict(report))
        for key, value in asdict(report).items():
            lines.append(f"{key:<{width}} {_fmt(value)}")
    else:
        raise TypeError(f"cannot serialize {type(report).__name__}")
    return "\n".join(lines) + "\n"


def write_report(report, format: str = "table", destination=None) -> None:
    """Write a profile, simulation, or waste report as table, csv, or json.

    ``destination`` may be a path, an open text stream, or None for stdout.
    """
    if format == "table":
        text = _table_text(report)
    elif format == "csv":
        text = _csv_text(report)
    elif format == "json":
        text = json.dumps(_to_dict(report), indent=2) + "\n"
    else:
        raise ValueError(f"unknown format {format!r} (expected table, csv, or json)")
    if destination is None:
        sys.stdout.write(text)
    elif hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text)


def _profile_from_dict(d: dict) -> ReturnProfile:
    return ReturnProfile(
        p_return=tuple(d["p_return"]),
        p_success=d["p_success"],
        method=d["method"],
        mass_defect=d.get("mass_defect"),
        richardson_error=d.get("richardson_error"),
        quality_warning=d.get("quality_warning", False),
    )


def read_report(source):
    """Restore a report written by :func:`write_report` in json format."""
    if hasattr(source, "read"):
        text = source.read()
        path = getattr(source, "name", None)
    else:
        path = source
        text = Path(source).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(f"parse error: {exc}", path=path) from exc
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioFileError(f"unsupported schema_version {version!r}", path=path)
    kind = d.get("kind")
    if kind == "return_profile":
        return _profile_from_dict(d)
    if kind == "sim_report":
        return SimReport(
            counts=tuple(d["counts"]),
            profile=_profile_from_dict(d["profile"]),
            ci_halfwidth=tuple(d["ci_halfwidth"]),
            on_time_fraction=d["on_time_fraction"],
            seed=d["seed"],
            trials=d["trials"],
            policy=d["policy"],
            t_tr=d["t_tr"],
        )
    if kind == "waste_report":
        fields = {k: d[k] for k in (
            "waste_per_attempt", "waste_per_success", "expected_total_distance",
            "attempts_per_success", "p_success", "hop_cost", "n", "source",
            "attempts", "successes", "seed",
        )}
        return WasteReport(**fields)
    raise ScenarioFileError(f"unknown report kind {kind!r}", path=path)


# ---------------------------------------------------------------------------
# embedded reference tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GoldenValue:
    """One expected value with its comparison tolerance.

    basis: "calculated" entries gate the analytic engine directly;
    "simulation" entries are single-run references checked against the
    analytic engine with a wide band; "approx" entries gate the coarse
    approximation; "waste" gates the retry cost formula exactly.
    """

    label: str
    expected: float
    tol: float
    basis: str


@dataclass(frozen=True)
class GoldenTable:
    """A benchmark scenario and its published expected values."""

    name: str
    scenario: Scenario | None
    values: tuple[GoldenValue, ...]
    waste_profile: tuple[float, ...] | None = None
    waste_p_success: float | None = None


def _profile_table(name, deadline, calc, sim, success, success_tol) -> GoldenTable:
    scenario = Scenario(n=6, hop_mean=3.0, hop_var=1.0, deadline=deadline, p_tr=0.9)
    values = [
        GoldenValue(f"P{k}", v, 0.005, "calculated") for k, v in enumerate(calc, start=1)
    ]
    values += [
        GoldenValue(f"P{k}", v, 0.03, "simulation") for k, v in enumerate(sim, start=1)
    ]
    values.append(GoldenValue("success", success, success_tol, "simulation"))
    return GoldenTable(name, scenario, tuple(values))


def golden_tables() -> tuple[GoldenTable, ...]:
    """The five embedded reference tables: three benchmark deadline rows,
    the coarse-approximation example, and the worked retry-waste example."""
    rows = (
        _profile_table(
            "deadline-16",
            16.0,
            calc=(0.193, 0.194, 0.138, 0.103),
            sim=(0.21, 0.194, 0.128, 0.103, 0.073),
            success=0.288,
            success_tol=0.02,
        ),
        _profile_table(
            "deadline-15",
            15.0,
            calc=(0.553, 0.159, 0.081, 0.052),
            sim=(0.54, 0.15, 0.085, 0.054, 0.039),
            success=0.125,
            success_tol=0.02,
        ),
        _profile_table(
            "deadline-14",
            14.0,
            calc=(0.872, 0.056, 0.023, 0.014),
            sim=(0.848, 0.076, 0.021, 0.018, 0.01),
            success=0.026,
            success_tol=0.015,
        ),
        GoldenTable(
            "approx-example",
            Scenario(n=6, hop_mean=3.0, hop_var=1.0, deadline=16.0, p_tr=0.9),
            (
                GoldenValue("P3", 0.11, 0.015, "approx"),
                GoldenValue("P5", 0.08, 0.015, "approx"),
            ),
        ),
        GoldenTable(
            "waste-example",
            None,
            (GoldenValue("waste_per_success", 32.0, 1e-12, "waste"),),
            waste_profile=(0.2, 0.7),
            waste_p_success=0.1,
        ),
    )
    return rows
