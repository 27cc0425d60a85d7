"""Frozen envelope constants and drift reports.

A baseline is a JSON object ``{suite: {key: value}}``.  Freezing writes the
envelopes measured by a run; comparing flags keys whose relative drift exceeds
``DRIFT_LIMIT``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

DRIFT_LIMIT = 0.05
PACKAGED = "baseline.json"


class MissingBaseline(LookupError):
    pass


def packaged_path() -> Path:
    return Path(str(resources.files("heatlab") / "data" / PACKAGED))


def load_baseline(path=None) -> dict:
    path = Path(path) if path is not None else packaged_path()
    if not path.exists():
        raise MissingBaseline(f"no baseline at {path}: run a suite with --freeze {path} first")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def dump_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def freeze_baseline(suites: dict, output, merge: bool = True) -> dict:
    """Write ``{suite: {key: value}}`` to ``output``, keeping other suites already there."""
    output = Path(output)
    data = {}
    if merge and output.exists():
        data = load_baseline(output)
    for name, values in suites.items():
        data[name] = {k: float(v) for k, v in values.items()}
    output.parent.mkdir(parents=True, exist_ok=True)
    dump_json(data, output)
    return data


@dataclass
class DriftEntry:
    key: str
    frozen: float
    current: float

    @property
    def drift(self) -> float:
        if self.frozen == self.current:
            return 0.0
        return abs(self.current - self.frozen) / max(abs(self.frozen), 1e-300)


@dataclass
class DriftReport:
    suite: str
    entries: list = field(default_factory=list)
    missing: list = field(default_factory=list)
    limit: float = DRIFT_LIMIT

    @property
    def max_drift(self) -> float:
        return max((e.drift for e in self.entries), default=0.0)

    @property
    def flagged(self) -> list:
        return [e.key for e in self.entries if e.drift > self.limit]

    @property
    def ok(self) -> bool:
        return not self.flagged and not self.missing

    def rows(self):
        for e in self.entries:
            yield self.suite, e.key, e.frozen, e.current, e.drift, e.drift <= self.limit


def compare_baseline(suite: str, current: dict, baseline: dict, limit: float = DRIFT_LIMIT) -> DriftReport:
    if suite not in baseline:
        raise MissingBaseline(f"baseline has no suite {suite!r}: freeze it with --freeze")
    frozen = baseline[suite]
    rep = DriftReport(suite, limit=limit)
    for k, v in sorted(current.items()):
        if k not in frozen:
            rep.missing.append(k)
            continue
        if not (math.isfinite(v) and math.isfinite(frozen[k])):
            rep.missing.append(k)
            continue
        rep.entries.append(DriftEntry(k, float(frozen[k]), float(v)))
    return rep
