"""Reducer assignment under a capacity bound.

Capacities and sizes are always ORIGINAL data sizes: a reducer that only
ever sees metadata must still be able to hold the tuples it will later call.
Inputs are identified by any hashable, sortable id; the public functions
also accept :class:`~metamr.model.MetaRecord` sequences, in which case the id
is the record's origin and the size its ``original_bits``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence, Union

from .model import MetaRecord


class SchemaInfeasible(ValueError):
    """No mapping schema exists for the inputs under capacity ``q``."""


class OversizedGroup(SchemaInfeasible):
    """A key group is larger than one reducer; route it through skew_assign."""

    def __init__(self, key, size, q):
        super().__init__(f"key group {key!r} holds {size} bits, reducer capacity is {q}")
        self.key, self.size, self.q = key, size, q


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class ReducerSpec:
    q: int
    count_hint: int | None = None

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError("reducer capacity must be positive")


@dataclass(frozen=True)
class MappingSchema:
    reducers: tuple[frozenset, ...] = ()
    labels: tuple = ()

    def replication(self) -> dict:
        counts: dict = {}
        for red in self.reducers:
            for i in red:
                counts[i] = counts.get(i, 0) + 1
        return counts

    def __len__(self):
        return len(self.reducers)


@dataclass
class ValidityReport:
    capacity_violations: list = field(default_factory=list)
    uncovered: set = field(default_factory=set)
    replication_rate: float = 0.0

    @property
    def valid(self) -> bool:
        return not self.capacity_violations and not self.uncovered


Inputs = Union[Mapping[Hashable, int], Iterable[MetaRecord]]


def _sizes(inputs: Inputs) -> dict:
    if isinstance(inputs, Mapping):
        return dict(inputs)
    return {r.origin: r.original_bits for r in inputs}


def _fits(load: int, q: int, k: int = 1) -> bool:
    # load <= q/k without fractions
    return load * k <= q


def validate_schema(s: MappingSchema, sizes: Mapping, q: int, coverage: Iterable = ()) -> ValidityReport:
    report = ValidityReport()
    for idx, red in enumerate(s.reducers):
        unknown = [i for i in red if i not in sizes]
        if unknown:
            raise ValidationError(f"reducer {idx} holds unknown inputs {unknown}")
        load = sum(sizes[i] for i in red)
        if load > q:
            report.capacity_violations.append((idx, load))
    pairs = list(coverage)
    for a, b in pairs:
        if a not in sizes or b not in sizes:
            raise ValidationError(f"coverage pair ({a!r}, {b!r}) names an unknown input")
    if pairs:
        covered = set()
        for red in s.reducers:
            for a, b in itertools.combinations(red, 2):
                covered.add((a, b))
                covered.add((b, a))
        report.uncovered = {p for p in pairs if p not in covered and p[0] != p[1]}
    if sizes:
        report.replication_rate = sum(len(r) for r in s.reducers) / len(sizes)
    return report


def key_group_assign(metas: Sequence[MetaRecord], q: int) -> MappingSchema:
    groups: dict = {}
    for rec in metas:
        groups.setdefault(_key_sort(rec.key_material), []).append(rec)
    reducers, labels = [], []
    for key in sorted(groups):
        recs = groups[key]
        size = sum(r.original_bits for r in recs)
        if size > q:
            raise OversizedGroup(key, size, q)
        reducers.append(frozenset(r.origin for r in recs))
        labels.append(key)
    return MappingSchema(tuple(reducers), tuple(labels))


def _key_sort(material) -> bytes:
    from .model import Digest
    if isinstance(material, Digest):
        return material.to_bytes()
    return material.value.payload


def first_fit_decreasing(sizes: Mapping, capacity_num: int, capacity_den: int = 1) -> list[list]:
    """Pack inputs into bins of capacity ``capacity_num / capacity_den``.

    Ties in size are broken by input id so the packing is reproducible.
    """
    bins: list[list] = []
    loads: list[int] = []
    for i in sorted(sizes, key=lambda i: (-sizes[i], i)):
        s = sizes[i]
        if s * capacity_den > capacity_num:
            raise SchemaInfeasible(f"input {i!r} of size {s} exceeds bin capacity "
                                   f"{capacity_num}/{capacity_den}")
        for b, load in enumerate(loads):
            if (load + s) * capacity_den <= capacity_num:
                bins[b].append(i)
                loads[b] += s
                break
        else:
            bins.append([i])
            loads.append(s)
    return bins


def skew_assign(x_group: Inputs, y_group: Inputs, q: int) -> MappingSchema:
    """Cover every (x, y) pair of one key group that is too big for one reducer.

    Each side is packed into bins of q/2 and every X-bin meets every Y-bin.
    """
    xs, ys = _sizes(x_group), _sizes(y_group)
    if _fits(sum(xs.values()) + sum(ys.values()), q):
        both = frozenset(xs) | frozenset(ys)
        return MappingSchema((both,) if both else (), (0,) if both else ())
    for i, s in itertools.chain(xs.items(), ys.items()):
        if not _fits(s, q, 2):
            raise SchemaInfeasible(f"input {i!r} of size {s} is larger than q/2 = {q / 2}")
    x_bins = first_fit_decreasing(xs, q, 2)
    y_bins = first_fit_decreasing(ys, q, 2)
    reducers, labels = [], []
    for (a, xb), (b, yb) in itertools.product(enumerate(x_bins), enumerate(y_bins)):
        reducers.append(frozenset(xb) | frozenset(yb))
        labels.append((a, b))
    return MappingSchema(tuple(reducers), tuple(labels))


def bin_pack_assign(inputs: Inputs, q: int, k: int = 2) -> MappingSchema:
    """Co-assign every pair of inputs, each at most q/k in size.

    Inputs are packed into bins of q/k; bins are grouped k//2 at a time and
    each pair of groups gets one reducer, so a reducer holds at most q.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    sizes = _sizes(inputs)
    for i, s in sizes.items():
        if not _fits(s, q, k):
            raise SchemaInfeasible(f"input {i!r} of size {s} exceeds q/k = {q / k}")
    bins = first_fit_decreasing(sizes, q, k)
    per_group = k // 2
    groups = [frozenset(itertools.chain.from_iterable(bins[g:g + per_group]))
              for g in range(0, len(bins), per_group)]
    if len(groups) == 1:
        if len(groups[0]) < 2:
            return MappingSchema()
        return MappingSchema((groups[0],), ((0,),))
    reducers, labels = [], []
    for a, b in itertools.combinations(range(len(groups)), 2):
        reducers.append(groups[a] | groups[b])
        labels.append((a, b))
    return MappingSchema(tuple(reducers), tuple(labels))
