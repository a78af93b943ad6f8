"""JSON cost reports with a stable layout."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from fractions import Fraction

from .bounds import theorem_bound
from .engine import CHANNELS, JobResult

PARAM_NAMES = ("n", "c", "w", "h", "r", "k", "p", "m", "q")


@dataclass
class CostReport:
    mode: str
    channels: dict
    rounds: dict
    totals: dict
    params: dict
    bounds: dict = field(default_factory=dict)
    classic_total: int | None = None
    savings: int | None = None
    rehash_count: int = 0
    outputs: int = 0

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CostReport":
        return cls(**json.loads(text))


def build_report(result: JobResult, params: dict | None = None, *,
                 baseline: JobResult | None = None, bound_kinds=()) -> CostReport:
    """Summarize ``result``; ``baseline`` is the classic run the savings are measured against."""
    led = result.ledger
    params = {p: (params or {}).get(p) for p in PARAM_NAMES}
    bounds = {kind: theorem_bound(kind, **{k: v for k, v in params.items() if v is not None})
              for kind in bound_kinds}
    params = {k: float(v) if isinstance(v, Fraction) else v for k, v in params.items()}
    if result.mode == "classic":
        classic_total = led.total
    else:
        classic_total = baseline.ledger.total if baseline is not None else None
    totals = {
        "total": led.total,
        "metadata": led.by_kind["meta"],
        "data": led.by_kind["data"],
        "signal": led.by_kind["signal"],
        "metadata_records": led.metadata_records,
        "theorem_relevant": led.theorem_relevant,
        "participating_map_to_reduce": led.participating_map_to_reduce,
        "discarded": led.discarded,
    }
    return CostReport(
        mode=result.mode,
        channels={ch: led.channels[ch] for ch in CHANNELS},
        rounds={label: dict(per) for label, per in sorted(led.rounds.items())},
        totals=totals,
        params=params,
        bounds=bounds,
        classic_total=classic_total,
        savings=None if classic_total is None else classic_total - led.total,
        rehash_count=result.rehash_count,
        outputs=len(result.outputs),
    )


def emit_report(result: JobResult, params: dict | None = None, path: str | None = None, *,
                baseline: JobResult | None = None, bound_kinds=()) -> CostReport:
    report = build_report(result, params, baseline=baseline, bound_kinds=bound_kinds)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    return report
