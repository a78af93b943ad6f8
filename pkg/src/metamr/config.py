"""INI plan files.

    [job]
    mode = meta
    q = 4
    seed = 0
    unit_cost = true
    hashed = false
    co_located = false
    size_field_bits = 0
    rehash_limit = 8

    [round1]
    key = B
    strategy = key-group

Rounds are read in numeric order; ``key`` may list several attributes
separated by commas.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, replace

from .engine import REHASH_LIMIT, JobPlan, PlanError, Round
from .model import CostModel


@dataclass(frozen=True)
class PlanConfig:
    plan: JobPlan
    q: int = 1 << 62
    seed: int = 0
    workers: int = 1

    def override(self, *, q=None, seed=None, mode=None, unit_cost=None, workers=None) -> "PlanConfig":
        plan = self.plan
        if mode is not None:
            plan = replace(plan, mode=mode)
        if unit_cost:
            plan = replace(plan, cost=replace(plan.cost, unit_cost=True))
        return PlanConfig(plan, self.q if q is None else q, self.seed if seed is None else seed,
                          self.workers if workers is None else workers)


def parse_plan(text: str) -> PlanConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise PlanError(f"unreadable plan: {exc}") from None
    job = cp["job"] if cp.has_section("job") else cp["DEFAULT"]
    try:
        cost = CostModel(unit_cost=job.getboolean("unit_cost", False),
                         size_field_bits=job.getint("size_field_bits", 0))
        names = sorted((s for s in cp.sections() if s.startswith("round")),
                       key=lambda s: int(s[len("round"):]))
        rounds = tuple(Round(tuple(k.strip() for k in cp[s]["key"].split(",") if k.strip()),
                             cp[s].get("strategy", "key-group"), cp[s].get("map", "join"))
                       for s in names)
        plan = JobPlan(job.get("mode", "meta"), rounds,
                       co_located=job.getboolean("co_located", False),
                       hashed=job.getboolean("hashed", False), cost=cost,
                       rehash_limit=job.getint("rehash_limit", REHASH_LIMIT))
        return PlanConfig(plan, job.getint("q", 1 << 62), job.getint("seed", 0),
                          job.getint("workers", 1))
    except (KeyError, ValueError) as exc:
        if isinstance(exc, PlanError):
            raise
        raise PlanError(f"bad plan: {exc}") from None


def load_plan(path: str) -> PlanConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_plan(fh.read())
