"""Experiment configuration, suite orchestration and report serialization."""
from __future__ import annotations

import csv
import io
import json
import math
import subprocess
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import yaml

from . import __version__
from .errors import ConfigError
from .model import ClusterConfig, VmSpec, flavor_set_of
from .reassigner import IntensifierConfig, parse_alpha, plan_for
from .schedulers import RandomSearch, SchedulerKind, kind_from_name
from .sim import SuiteStats, algorithm_label, run_suite
from .trace import (
    DEFAULT_FLAVORS, FilterKind, SynthConfig, Trace, apply_filter, load_csv, mixed_preset,
    sample_scenarios, synth_generate,
)

SCHEDULER_NAMES = ("ff", "bf", "bf2", "random")
FILTER_NAMES = FilterKind.NAMES


@dataclass
class ExperimentConfig:
    pms: int = 20
    pm_cpu: int = 128
    pm_mem: int = 160
    numa: int = 1
    schedulers: List[str] = field(default_factory=lambda: ["ff"])
    reassigner: bool = False
    baseline: bool = True
    lam: float = 0.5
    alphas: List[str] = field(default_factory=lambda: ["0.3N"])
    plan: Optional[Tuple[int, int]] = None
    emergent: bool = True
    imbalance: bool = True
    trace: Optional[str] = None
    synth: Dict[str, Any] = field(default_factory=lambda: {"preset": "mixed"})
    flavors: Optional[List[str]] = None
    scenarios: int = 60
    seed: int = 0
    filters: List[str] = field(default_factory=lambda: ["all"])
    filter_threshold: int = 32
    restarts: int = 20
    workers: int = 1
    out: Optional[str] = None

    def validate(self) -> "ExperimentConfig":
        for name in ("pms", "pm_cpu", "pm_mem", "numa", "scenarios", "restarts", "workers"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name}: expected a positive integer, got {value!r}")
        for s in self.schedulers:
            if s not in SCHEDULER_NAMES:
                raise ConfigError(f"schedulers: unknown scheduler {s!r}")
        for f in self.filters:
            FilterKind(f, self.filter_threshold)
        if not 0 <= self.lam <= 1:
            raise ConfigError(f"lambda: must lie in [0, 1], got {self.lam}")
        for a in self.alphas:
            parse_alpha(a, self.pms)
        if not self.alphas:
            raise ConfigError("alpha: need at least one value")
        if not self.schedulers:
            raise ConfigError("schedulers: need at least one")
        self.cluster()
        return self

    def cluster(self) -> ClusterConfig:
        return ClusterConfig(self.pms, self.pm_cpu, self.pm_mem, numa_per_pm=self.numa)

    def kinds(self) -> List[SchedulerKind]:
        return [kind_from_name(s, restarts=self.restarts, seed=self.seed) for s in self.schedulers]

    def intensifiers(self) -> List[IntensifierConfig]:
        return [IntensifierConfig(lam=self.lam, alpha=a, plan=self.plan, emergent=self.emergent,
                                  imbalance=self.imbalance) for a in self.alphas]

    def resolved(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["plan"] = None if self.plan is None else list(self.plan)
        return d


# config-file key -> (dataclass field, converter)
_FILE_KEYS = {
    "pms": "pms", "pm_cpu": "pm_cpu", "pm_mem": "pm_mem", "numa": "numa",
    "schedulers": "schedulers", "reassigner": "reassigner", "baseline": "baseline",
    "lambda": "lam", "alpha": "alphas", "plan": "plan", "emergent": "emergent",
    "imbalance": "imbalance", "trace": "trace", "synth": "synth", "flavors": "flavors",
    "scenarios": "scenarios", "seed": "seed", "filters": "filters",
    "filter_threshold": "filter_threshold", "restarts": "restarts", "workers": "workers",
    "out": "out",
}


def _as_list(value) -> List[str]:
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def apply_settings(cfg: ExperimentConfig, settings: Mapping[str, Any], source: str) -> ExperimentConfig:
    """Overlay a flat mapping of settings (from a file or the command line)."""
    for key, value in settings.items():
        if value is None:
            continue
        if key not in _FILE_KEYS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        attr = _FILE_KEYS[key]
        try:
            if attr in ("schedulers", "filters", "alphas"):
                value = _as_list(value)
                if attr != "alphas":
                    value = [v.lower() for v in value]
            elif attr == "flavors":
                value = _as_list(value)
            elif attr == "plan":
                value = tuple(int(v) for v in _as_list(value))
                if len(value) != 2:
                    raise ValueError("plan needs two integers c1,m1")
            elif attr == "lam":
                value = float(value)
            elif attr == "synth":
                if not isinstance(value, Mapping):
                    raise ValueError("synth must be a mapping")
                value = dict(value)
            elif attr in ("trace", "out"):
                value = str(value)
            elif isinstance(getattr(cfg, attr), bool):
                if not isinstance(value, bool):
                    raise ValueError("expected true/false")
            elif isinstance(getattr(cfg, attr), int):
                if isinstance(value, bool) or int(value) != float(value):
                    raise ValueError("expected an integer")
                value = int(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}: field {key!r}: {exc}") from None
        setattr(cfg, attr, value)
    return cfg


def load_config_file(path: str) -> Dict[str, Any]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{p}{where}: invalid YAML") from None
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{p}: top level must be a mapping")
    flat = dict(data)
    cluster = flat.pop("cluster", None)
    if cluster is not None:
        if not isinstance(cluster, Mapping):
            raise ConfigError(f"{p}: 'cluster' must be a mapping")
        flat.update(cluster)
    return flat


def parse_flavor(text: str) -> VmSpec:
    t = text.strip().upper()
    try:
        cpu, rest = t.split("U", 1)
        if not rest.endswith("G"):
            raise ValueError
        return VmSpec.of(int(cpu), int(rest[:-1]))
    except ValueError:
        raise ConfigError(f"bad flavor {text!r}; expected e.g. 12U8G") from None


def synth_config(settings: Mapping[str, Any]) -> SynthConfig:
    s = dict(settings)
    preset = s.pop("preset", "mixed")
    try:
        if preset == "mixed":
            base = mixed_preset()
        elif preset == "uniform":
            base = SynthConfig()
        else:
            raise ConfigError(f"synth.preset: unknown preset {preset!r} (mixed or uniform)")
        return replace(base, **s)
    except TypeError as exc:
        raise ConfigError(f"synth: {exc}") from None


def load_trace(cfg: ExperimentConfig) -> Trace:
    if cfg.trace is not None:
        return load_csv(cfg.trace)
    return synth_generate(synth_config(cfg.synth))


def flavors_for(cfg: ExperimentConfig, trace: Optional[Trace]):
    if cfg.flavors:
        return flavor_set_of(parse_flavor(f) for f in cfg.flavors)
    if trace is not None:
        return trace.flavor_set
    return flavor_set_of(DEFAULT_FLAVORS)


def provenance() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
        described = out.stdout.strip() if out.returncode == 0 else ""
    except (OSError, subprocess.SubprocessError):
        described = ""
    return f"{__version__} ({described or 'no-git'})"


# ---------------------------------------------------------------- reports

COLUMNS = ("filter", "algorithm", "alpha", "n", "average", "q1", "q2", "q3",
           "alw_mem_mean", "alw_mem_std", "alw_cpu_mean", "alw_cpu_std",
           "unassign_emergent", "unassign_imbalance")


def _num(x: float) -> float:
    return round(float(x), 4)


def stats_row(filter_name: str, label: str, alpha: str, stats: SuiteStats,
              counts: Tuple[float, float]) -> dict:
    return {
        "filter": filter_name, "algorithm": label, "alpha": alpha, "n": stats.n,
        "average": _num(stats.mean), "q1": _num(stats.q1), "q2": _num(stats.median),
        "q3": _num(stats.q3), "alw_mem_mean": _num(stats.alw_mem_mean),
        "alw_mem_std": _num(stats.alw_mem_std), "alw_cpu_mean": _num(stats.alw_cpu_mean),
        "alw_cpu_std": _num(stats.alw_cpu_std), "unassign_emergent": _num(counts[0]),
        "unassign_imbalance": _num(counts[1]),
    }


def run_cells(cfg: ExperimentConfig, trace: Trace, *, optimal: bool = False) -> List[dict]:
    """One row per (filter, scheduler, intensifier) cell, in a fixed order."""
    cluster = cfg.cluster()
    rows = []
    for fname in cfg.filters:
        t = apply_filter(trace, FilterKind(fname, cfg.filter_threshold), cfg.pm_cpu, cfg.pm_mem)
        scenarios = sample_scenarios(t, cfg.scenarios, cfg.seed)
        cells: List[Tuple[SchedulerKind, Optional[IntensifierConfig]]] = []
        for kind in cfg.kinds():
            if cfg.baseline or not cfg.reassigner:
                cells.append((kind, None))
            if cfg.reassigner:
                cells.extend((kind, ic) for ic in cfg.intensifiers())
        if optimal and not any(isinstance(k, RandomSearch) and ic is None for k, ic in cells):
            cells.append((RandomSearch(cfg.restarts, cfg.seed), None))
        for kind, ic in cells:
            stats, results = run_suite(t, scenarios, cluster, kind, ic, workers=cfg.workers)
            n = len(results)
            counts = (sum(r.unassign_counts["emergent"] for r in results) / n,
                      sum(r.unassign_counts["imbalance"] for r in results) / n)
            alpha = "" if ic is None else str(ic.alpha)
            rows.append(stats_row(fname, algorithm_label(kind, ic), alpha, stats, counts))
    return rows


def render_csv(rows: Sequence[dict], header: Mapping[str, Any]) -> str:
    buf = io.StringIO()
    for key, value in header.items():
        buf.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def render_json(rows: Sequence[dict], header: Mapping[str, Any]) -> str:
    return json.dumps({**header, "rows": list(rows)}, indent=2, sort_keys=True) + "\n"


def render_table(rows: Sequence[dict]) -> str:
    """Human-readable table with mean±std ALW columns."""
    head = ("filter", "algorithm", "alpha", "average", "q1", "q2", "q3", "alw_memory", "alw_cpu")
    lines = [head]
    for r in rows:
        lines.append((r["filter"], r["algorithm"], r["alpha"] or "-", f"{r['average']:.2f}",
                      f"{r['q1']:.2f}", f"{r['q2']:.2f}", f"{r['q3']:.2f}",
                      f"{r['alw_mem_mean']:.2f}±{r['alw_mem_std']:.2f}",
                      f"{r['alw_cpu_mean']:.2f}±{r['alw_cpu_std']:.2f}"))
    widths = [max(len(str(line[i])) for line in lines) for i in range(len(head))]
    return "\n".join("  ".join(str(c).ljust(w) for c, w in zip(line, widths)).rstrip()
                     for line in lines) + "\n"


def report_header(command: str, cfg: ExperimentConfig, trace: Trace) -> dict:
    if cfg.trace is None:
        source = {"synth": synth_config(cfg.synth).describe()}
    else:
        source = {"csv": cfg.trace, "dropped_deletes": trace.dropped_deletes}
    return {"command": command, "version": provenance(), "config": cfg.resolved(),
            "trace_source": source}


def write_reports(out_dir: str, stem: str, rows: Sequence[dict], header: Mapping[str, Any]) -> List[Path]:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    paths = [d / f"{stem}.csv", d / f"{stem}.json"]
    paths[0].write_text(render_csv(rows, header), encoding="utf-8")
    paths[1].write_text(render_json(rows, header), encoding="utf-8")
    return paths


def assignment_report(cfg: ExperimentConfig, trace: Optional[Trace]) -> dict:
    flavors = flavors_for(cfg, trace)
    plan = plan_for(flavors, cfg.cluster(), cfg.lam, cfg.plan)
    d = plan.as_dict()
    if isinstance(d.get("objective"), float) and math.isnan(d["objective"]):
        d["objective"] = None
    d["flavors"] = sorted(str(f) for f in flavors)
    return d
