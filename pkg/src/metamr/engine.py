"""In-process execution of classic and metadata-first MapReduce jobs.

Every byte that crosses a boundary is charged to a :class:`CostLedger`
channel. In ``classic`` mode mappers and reducers see whole tuples. In
``meta`` mode they see only key material plus size descriptors, and the
reducers of the final round call the original tuples they need through
the user-site index.

Rows flowing between rounds keep the set of base tuples they were built
from, so the final round knows exactly which originals to fetch.
"""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

from .hashing import HashConfig, rehash, required_digest_bits
from .model import (DEFAULT_COST, AttributeValue, CostModel, Digest, IntegrityError, Literal,
                    Origin, Relation, SchemaError, Site, Tuple, UserIndex, build_index,
                    make_meta, tuple_size_bits)
from .schema import OversizedGroup, bin_pack_assign, skew_assign

log = logging.getLogger(__name__)

CHANNELS = ("user_to_map", "map_to_reduce", "call_signal", "user_to_reduce_fetch", "inter_cluster")
STRATEGIES = ("key-group", "skew", "bin-pack")
MODES = ("classic", "meta")
REHASH_LIMIT = 8


class DigestCollision(RuntimeError):
    """Fetched originals disagree on an attribute whose digests matched."""


class HashExhausted(RuntimeError):
    pass


class PlanError(ValueError):
    pass


# ---------------------------------------------------------------------------
# ledger

class CostLedger:
    """Bits moved per channel, with a per-round breakdown.

    ``participating_map_to_reduce`` is the share of the shuffle spent on
    records that end up in an output; cost bounds are stated in terms of it.
    ``discarded`` holds what aborted attempts (digest collisions) moved.
    """

    def __init__(self):
        self.channels = dict.fromkeys(CHANNELS, 0)
        self.rounds: dict[str, dict[str, int]] = {}
        self.by_kind = {"meta": 0, "data": 0, "signal": 0}
        self.participating_map_to_reduce = 0
        self.metadata_records = 0
        self.discarded = 0

    def charge(self, channel: str, bits: int, round_label: str = "", kind: str = "data",
               records: int = 0) -> None:
        if bits < 0:
            raise ValueError("negative charge")
        self.channels[channel] += bits
        per = self.rounds.setdefault(round_label, dict.fromkeys(CHANNELS, 0))
        per[channel] += bits
        self.by_kind[kind] += bits
        if kind == "meta":
            self.metadata_records += records

    def merge(self, other: "CostLedger") -> None:
        for ch, v in other.channels.items():
            self.channels[ch] += v
        for label, per in other.rounds.items():
            mine = self.rounds.setdefault(label, dict.fromkeys(CHANNELS, 0))
            for ch, v in per.items():
                mine[ch] += v
        for k, v in other.by_kind.items():
            self.by_kind[k] += v
        self.participating_map_to_reduce += other.participating_map_to_reduce
        self.metadata_records += other.metadata_records
        self.discarded += other.discarded

    @property
    def total(self) -> int:
        return sum(self.channels.values())

    def __getitem__(self, channel):
        return self.channels[channel]

    @property
    def theorem_relevant(self) -> int:
        """Upload + participating shuffle + fetch; signalling is left out."""
        return (self.channels["user_to_map"] + self.participating_map_to_reduce
                + self.channels["user_to_reduce_fetch"])

    def as_dict(self) -> dict:
        return {
            "channels": dict(self.channels),
            "rounds": {k: dict(v) for k, v in self.rounds.items()},
            "by_kind": dict(self.by_kind),
            "participating_map_to_reduce": self.participating_map_to_reduce,
            "metadata_records": self.metadata_records,
            "discarded": self.discarded,
            "total": self.total,
        }


# ---------------------------------------------------------------------------
# plans and topology

@dataclass(frozen=True)
class Round:
    key: tuple[str, ...]
    strategy: str = "key-group"
    map: str = "join"

    def __post_init__(self):
        key = (self.key,) if isinstance(self.key, str) else tuple(self.key)
        object.__setattr__(self, "key", key)
        if self.strategy not in STRATEGIES:
            raise PlanError(f"unknown schema strategy {self.strategy!r}")
        if self.map != "join":
            raise PlanError(f"unknown map function {self.map!r}")
        if not key:
            raise PlanError("a round needs at least one key attribute")


@dataclass(frozen=True)
class JobPlan:
    mode: str
    rounds: tuple[Round, ...]
    co_located: bool = False
    digester: HashConfig | None = None
    hashed: bool = False
    cost: CostModel = DEFAULT_COST
    rehash_limit: int = REHASH_LIMIT

    def __post_init__(self):
        if self.mode not in MODES:
            raise PlanError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "rounds", tuple(self.rounds))
        if not self.rounds:
            raise PlanError("a plan needs at least one round")


@dataclass(frozen=True)
class Topology:
    sites: tuple[Site, ...] = (Site("user", "user"), Site("cloud", "compute-cluster"))
    placement: Mapping[str, str] = field(default_factory=dict)
    compute_site: str = "cloud"
    global_site: str | None = None

    def __post_init__(self):
        ids = [s.site_id for s in self.sites]
        if len(set(ids)) != len(ids):
            raise PlanError("site ids must be unique")
        unknown = set(self.placement.values()) - set(ids)
        if unknown:
            raise PlanError(f"relations placed at unknown sites {sorted(unknown)}")
        if self.global_site is not None and self.global_site not in ids:
            raise PlanError(f"global site {self.global_site!r} is not a site")

    def site_of(self, rel: Relation) -> str:
        return self.placement.get(rel.name, rel.home_site)


DEFAULT_TOPOLOGY = Topology()


@dataclass(frozen=True)
class Cluster:
    site_id: str
    relations: tuple[Relation, ...]
    rounds: tuple[Round, ...] = ()


@dataclass
class JobResult:
    output_attrs: tuple[str, ...]
    outputs: list[tuple[AttributeValue, ...]]
    provenance: list[tuple[Origin, ...]]
    ledger: CostLedger
    rounds_executed: int
    rehash_count: int = 0
    mode: str = "meta"
    fetched: dict = field(default_factory=dict)
    replication: dict = field(default_factory=dict)
    digester: HashConfig | None = None
    extras: dict = field(default_factory=dict)

    def output_set(self) -> list[tuple[bytes, ...]]:
        """Outputs as sorted payload tuples, for multiset comparisons."""
        return sorted(tuple(v.payload for v in t) for t in self.outputs)

    def fetched_origins(self) -> set[Origin]:
        return {o for per in self.fetched.values() for o in per}


# ---------------------------------------------------------------------------
# rows

@dataclass(frozen=True)
class MetaCell:
    """One attribute of a metadata row: key material, or just a size."""
    material: Union[Literal, Digest, None]
    orig_bits: int


Cell = Union[AttributeValue, MetaCell]


@dataclass(frozen=True, eq=False)
class Row:
    rid: int
    attrs: tuple[str, ...]
    cells: tuple[Cell, ...]
    origins: tuple[Origin, ...]
    parents: tuple[int, ...] = ()

    def cell(self, attr: str) -> Cell:
        return self.cells[self.attrs.index(attr)]


def match_key(cell: Cell):
    if isinstance(cell, AttributeValue):
        return cell.payload
    m = cell.material
    if m is None:
        raise PlanError("attribute carried as a size descriptor cannot be compared")
    if isinstance(m, Digest):
        return m.to_bytes() + bytes([m.width & 0xFF])
    return m.value.payload


def orig_bits(row: Row) -> int:
    return sum(c.size_bits if isinstance(c, AttributeValue) else c.orig_bits for c in row.cells)


def wire_bits(row: Row, cost: CostModel) -> int:
    if row.cells and isinstance(row.cells[0], AttributeValue):
        return sum(c.size_bits for c in row.cells)
    key_bits = sum(c.material.bit_length for c in row.cells if c.material is not None)
    n_desc = sum(1 for c in row.cells if c.material is None)
    return cost.meta_bits(key_bits, n_desc)


@dataclass
class ReducerTrace:
    label: tuple
    inputs: list[tuple[int, Row]]          # (side, row) in canonical order
    produced: list[Row] = field(default_factory=list)

    def producers(self) -> set[int]:
        return {p for o in self.produced for p in o.parents}


@dataclass
class RoundTrace:
    label: str
    outputs: list[Row]
    reducers: list[ReducerTrace]
    assignments: int
    inputs: int
    resident: frozenset = frozenset()

    @property
    def replication_rate(self) -> float:
        return self.assignments / self.inputs if self.inputs else 0.0


@dataclass(frozen=True)
class Decision:
    """A reducer's call for one intermediate input: request originals or not."""
    reducer: object
    origins: tuple[Origin, ...]
    request: bool


# ---------------------------------------------------------------------------
# execution

def dominating_attributes(relations: Sequence[Relation]) -> set[str]:
    counts: dict[str, int] = {}
    for rel in relations:
        for a in set(rel.attributes):
            counts[a] = counts.get(a, 0) + 1
    return {a for a, n in counts.items() if n >= 2}


class _Execution:
    def __init__(self, mode: str, cost: CostModel, q: int, ledger: CostLedger,
                 relations: Mapping[str, Relation], workers: int = 1):
        self.mode = mode
        self.cost = cost
        self.q = q
        self.ledger = ledger
        self.relations = dict(relations)
        self.workers = max(1, workers)
        self._rid = itertools.count()
        self.parents: dict[int, tuple[int, ...]] = {}
        self.wires: dict[int, int] = {}

    @property
    def kind(self) -> str:
        return "meta" if self.mode == "meta" else "data"

    def _new_row(self, attrs, cells, origins, parents=()) -> Row:
        row = Row(next(self._rid), tuple(attrs), tuple(cells), tuple(origins), tuple(parents))
        self.parents[row.rid] = row.parents
        return row

    def base_rows(self, rel: Relation, key_attrs, digester: HashConfig | None,
                  site_id: str | None = None) -> list[Row]:
        site = site_id or rel.home_site
        if site != rel.home_site:
            rel = rel.at(site)
            self.relations[rel.name] = rel
        rows = []
        for t in rel.tuples:
            origin = Origin(rel.name, t.tuple_id, site)
            if self.mode == "classic":
                rows.append(self._new_row(rel.attributes, t.values, (origin,)))
                continue
            meta = make_meta(t, rel, [a for a in rel.attributes if a in key_attrs], digester,
                             self.cost)
            keys = dict(meta.keys)
            cells = [MetaCell(keys[a], v.size_bits) if a in keys else MetaCell(None, v.size_bits)
                     for a, v in zip(rel.attributes, t.values)]
            rows.append(self._new_row(rel.attributes, cells, (meta.origin,)))
        return rows

    def charge_rows(self, channel: str, rows: Sequence[Row], label: str) -> None:
        bits = sum(self._map(lambda r: wire_bits(r, self.cost), rows))
        self.ledger.charge(channel, bits, label, self.kind, len(rows))

    def _map(self, fn, items):
        items = list(items)
        if self.workers == 1 or len(items) < 64:
            return [fn(x) for x in items]
        chunk = (len(items) + self.workers - 1) // self.workers
        parts = [items[i:i + chunk] for i in range(0, len(items), chunk)]
        with ThreadPoolExecutor(self.workers) as pool:
            done = pool.map(lambda part: [fn(x) for x in part], parts)
        return [y for part in done for y in part]

    def join_round(self, left: Sequence[Row], right: Sequence[Row], rnd: Round, label: str,
                   resident: frozenset = frozenset()) -> RoundTrace:
        q = self.q
        for side, rows in ((0, left), (1, right)):
            for r in rows[:1]:
                missing = [a for a in rnd.key if a not in r.attrs]
                if missing:
                    raise PlanError(f"{label}: key attributes {missing} missing from input {side}")

        def emit(item):
            side, row = item
            return tuple(match_key(row.cell(a)) for a in rnd.key), side, row, wire_bits(row, self.cost)

        mapped = self._map(emit, itertools.chain(((0, r) for r in left), ((1, r) for r in right)))
        groups: dict[tuple, tuple[list, list]] = {}
        for key, side, row, w in mapped:
            groups.setdefault(key, ([], []))[side].append(row)
            self.wires[row.rid] = w

        reducers: list[ReducerTrace] = []
        assignments = 0
        for key in sorted(groups):
            xs, ys = groups[key]
            xs.sort(key=lambda r: r.origins)
            ys.sort(key=lambda r: r.origins)
            for sub, members in self._assign(key, xs, ys, rnd.strategy):
                side_of = {r.rid: 0 for r in xs}
                side_of.update({r.rid: 1 for r in ys})
                by_rid = {r.rid: r for r in itertools.chain(xs, ys)}
                inputs = sorted(((side_of[i], by_rid[i]) for i in members),
                                key=lambda sr: (sr[0], sr[1].origins))
                reducers.append(ReducerTrace((key, sub), inputs))
                assignments += len(inputs)

        shuffled = [row for red in reducers for _, row in red.inputs if row.rid not in resident]
        self.ledger.charge("map_to_reduce", sum(self.wires[r.rid] for r in shuffled), label,
                           self.kind, len(shuffled))

        emitted: set[tuple[int, int]] = set()
        outputs: list[Row] = []
        for red in reducers:
            ls = [r for s, r in red.inputs if s == 0]
            rs = [r for s, r in red.inputs if s == 1]
            for lrow in ls:
                for rrow in rs:
                    pair = (lrow.rid, rrow.rid)
                    if pair in emitted or not _joinable(lrow, rrow):
                        continue
                    emitted.add(pair)
                    out = self._joined(lrow, rrow)
                    red.produced.append(out)
                    outputs.append(out)
        return RoundTrace(label, outputs, reducers, assignments, len(left) + len(right),
                          frozenset(resident))

    def _assign(self, key, xs, ys, strategy):
        sizes = {r.rid: orig_bits(r) for r in itertools.chain(xs, ys)}
        total = sum(sizes.values())
        if total <= self.q:
            return [(0, list(sizes))]
        if strategy == "key-group":
            raise OversizedGroup(key, total, self.q)
        if strategy == "skew":
            schema = skew_assign({r.rid: sizes[r.rid] for r in xs},
                                 {r.rid: sizes[r.rid] for r in ys}, self.q)
        else:
            schema = bin_pack_assign(sizes, self.q, 2)
        return [(lab, sorted(red)) for lab, red in zip(schema.labels, schema.reducers)]

    def _joined(self, lrow: Row, rrow: Row) -> Row:
        attrs = list(lrow.attrs)
        cells = list(lrow.cells)
        for a, c in zip(rrow.attrs, rrow.cells):
            if a not in attrs:
                attrs.append(a)
                cells.append(c)
        return self._new_row(attrs, cells, lrow.origins + rrow.origins, (lrow.rid, rrow.rid))

    def cascade(self, inputs: Sequence[Sequence[Row]], rounds: Sequence[Round], prefix: str,
                resident_first: frozenset = frozenset()) -> list[RoundTrace]:
        if len(rounds) != len(inputs) - 1:
            raise PlanError(f"{prefix}: {len(inputs)} inputs need {len(inputs) - 1} rounds, "
                            f"got {len(rounds)}")
        traces = []
        running = list(inputs[0])
        for i, rnd in enumerate(rounds):
            trace = self.join_round(running, list(inputs[i + 1]), rnd, f"{prefix}round{i + 1}",
                                    resident_first if i == 0 else frozenset())
            traces.append(trace)
            running = trace.outputs
        return traces

    def account_participation(self, traces: Sequence[RoundTrace]) -> set[int]:
        """Charge the shuffle share of rows that reach a final output."""
        useful: set[int] = set()
        stack = [o.rid for o in traces[-1].outputs]
        while stack:
            rid = stack.pop()
            if rid in useful:
                continue
            useful.add(rid)
            stack.extend(self.parents.get(rid, ()))
        bits = 0
        for trace in traces:
            for red in trace.reducers:
                part = {p for o in red.produced if o.rid in useful for p in o.parents}
                bits += sum(self.wires[r.rid] for _, r in red.inputs
                            if r.rid in part and r.rid not in trace.resident)
        self.ledger.participating_map_to_reduce += bits
        return useful

    @staticmethod
    def participating_copies(trace: RoundTrace) -> int:
        """Base tuples used per reducer in ``trace``, summed over reducers."""
        total = 0
        for red in trace.reducers:
            total += len({o for row in red.produced for o in row.origins})
        return total

    def decisions(self, trace: RoundTrace) -> list[Decision]:
        out = []
        for red in trace.reducers:
            producers = red.producers()
            for _, row in red.inputs:
                out.append(Decision(red.label, row.origins, row.rid in producers))
        return out

    def materialize(self, trace: RoundTrace, fetched: Mapping) -> tuple[list, list, tuple]:
        """Rebuild output tuples from fetched originals, checking digest matches."""
        outputs, provenance = [], []
        attrs: tuple = ()
        for red in trace.reducers:
            have = fetched.get(red.label, {})
            for o in red.produced:
                values: dict[str, AttributeValue] = {}
                for origin in o.origins:
                    rel = self.relations[origin.relation]
                    t = have[origin]
                    for a, v in zip(rel.attributes, t.values):
                        if a in values and values[a] != v:
                            raise DigestCollision(
                                f"{a}: {values[a].payload!r} vs {v.payload!r} in reducer {red.label}")
                        values.setdefault(a, v)
                attrs = o.attrs
                outputs.append(tuple(values[a] for a in o.attrs))
                provenance.append(o.origins)
        return outputs, provenance, attrs


def _joinable(lrow: Row, rrow: Row) -> bool:
    for a, c in zip(rrow.attrs, rrow.cells):
        if a in lrow.attrs and match_key(lrow.cell(a)) != match_key(c):
            return False
    return True


def call_fetch(decisions: Sequence[Decision], index: Mapping[str, UserIndex], ledger: CostLedger,
               cost: CostModel = DEFAULT_COST,
               channel_for: Callable[[Origin], str] | None = None,
               round_label: str = "fetch") -> dict:
    """Run the call protocol for one round of reducer decisions.

    Every decision costs a signal; every requested origin is resolved through
    the index of its relation and delivered once per reducer. Returns
    ``{reducer: {origin: Tuple}}``.
    """
    fetched: dict = {}
    signal = cost.signal()
    for d in decisions:
        ledger.charge("call_signal", signal, round_label, "signal")
        if not d.request:
            continue
        per = fetched.setdefault(d.reducer, {})
        for origin in d.origins:
            if origin in per:
                continue
            try:
                idx = index[origin.relation]
            except KeyError:
                raise IntegrityError(f"no index for relation {origin.relation}") from None
            t = idx.resolve(origin.tuple_id)
            channel = channel_for(origin) if channel_for else "user_to_reduce_fetch"
            ledger.charge(channel, tuple_size_bits(t), round_label, "data")
            per[origin] = t
    return fetched


def _classic_outputs(trace: RoundTrace):
    outputs, provenance, attrs = [], [], ()
    for red in trace.reducers:
        for o in red.produced:
            attrs = o.attrs
            outputs.append(tuple(o.cells))
            provenance.append(o.origins)
    return outputs, provenance, attrs


def _sorted_outputs(outputs, provenance):
    order = sorted(range(len(outputs)),
                   key=lambda i: (tuple(v.payload for v in outputs[i]), provenance[i]))
    return [outputs[i] for i in order], [provenance[i] for i in order]


def _indexes(relations: Sequence[Relation], key_attrs) -> dict[str, UserIndex]:
    out = {}
    for rel in relations:
        attr = next((a for a in rel.attributes if a in key_attrs), rel.attributes[0])
        out[rel.name] = build_index(rel, attr)
    return out


def _initial_digester(plan: JobPlan, m: int, seed: int) -> HashConfig | None:
    if plan.digester is not None:
        return plan.digester
    if plan.hashed:
        return HashConfig(seed, required_digest_bits(max(m, 1)))
    return None


def _next_digester(cfg: HashConfig, m: int) -> HashConfig:
    nxt = rehash(cfg)
    need = required_digest_bits(max(m, 1))
    if nxt.output_bits < need:
        # a width below the m -> m^3 rule is the likely culprit; widen as well
        nxt = HashConfig(nxt.seed, need, nxt.family_round)
    return nxt


def _retrying(plan: JobPlan, m: int, seed: int, attempt: Callable[[HashConfig | None, CostLedger], JobResult]) -> JobResult:
    cfg = _initial_digester(plan, m, seed)
    discarded = 0
    for rehashes in range(plan.rehash_limit + 1):
        ledger = CostLedger()
        try:
            result = attempt(cfg, ledger)
        except DigestCollision as exc:
            if cfg is None:
                raise
            log.info("digest collision (%s); rehashing", exc)
            discarded += ledger.total
            cfg = _next_digester(cfg, m)
            continue
        result.ledger.discarded = discarded
        result.rehash_count = rehashes
        result.digester = cfg
        return result
    raise HashExhausted(f"still colliding after {plan.rehash_limit} rehashes")


def _check_unique_names(relations: Sequence[Relation]) -> None:
    names = [r.name for r in relations]
    if len(set(names)) != len(names):
        raise PlanError(f"relation names must be unique: {names}")


def run_round(rnd: Round, inputs: Sequence[Relation], q: int, ledger: CostLedger, *,
              mode: str = "meta", cost: CostModel = DEFAULT_COST, co_located: bool = False,
              digester: HashConfig | None = None, workers: int = 1) -> RoundTrace:
    """Upload and shuffle one two-way join round; no fetch happens here."""
    if len(inputs) != 2:
        raise PlanError("a join round takes exactly two inputs")
    _check_unique_names(inputs)
    ex = _Execution(mode, cost, q, ledger, {r.name: r for r in inputs}, workers)
    keys = dominating_attributes(inputs)
    sides = [ex.base_rows(rel, keys, digester) for rel in inputs]
    if not co_located:
        for rel, rows in zip(inputs, sides):
            ex.charge_rows("user_to_map", rows, "round1")
    return ex.join_round(sides[0], sides[1], rnd, "round1")


def run_job(plan: JobPlan, relations: Sequence[Relation], topology: Topology = DEFAULT_TOPOLOGY,
            q: int = 1 << 62, seed: int = 0, workers: int = 1) -> JobResult:
    """Cascade-join ``relations`` in order; round i joins the running result with relation i+1."""
    relations = [r.at(topology.site_of(r)) for r in relations]
    _check_unique_names(relations)
    if len(plan.rounds) != len(relations) - 1:
        raise PlanError(f"{len(relations)} relations need {len(relations) - 1} rounds, "
                        f"plan has {len(plan.rounds)}")
    keys = dominating_attributes(relations)
    m = sum(len(r) for r in relations)
    indexes = _indexes(relations, keys)

    def attempt(cfg, ledger):
        ex = _Execution(plan.mode, plan.cost, q, ledger, {r.name: r for r in relations}, workers)
        sides = [ex.base_rows(rel, keys, cfg) for rel in relations]
        if not plan.co_located:
            for rows in sides:
                ex.charge_rows("user_to_map", rows, "upload")
        traces = ex.cascade(sides, plan.rounds, "")
        ex.account_participation(traces)
        final = traces[-1]
        fetched: dict = {}
        if plan.mode == "meta":
            fetched = call_fetch(ex.decisions(final), indexes, ledger, plan.cost,
                                 round_label=final.label)
            outputs, provenance, attrs = ex.materialize(final, fetched)
        else:
            outputs, provenance, attrs = _classic_outputs(final)
        outputs, provenance = _sorted_outputs(outputs, provenance)
        if not attrs:
            attrs = _output_attrs(relations)
        return JobResult(attrs, outputs, provenance, ledger, len(traces), mode=plan.mode,
                         fetched=fetched,
                         replication={t.label: t.replication_rate for t in traces},
                         extras={"participating_copies": ex.participating_copies(final)})

    return _retrying(plan, m, seed, attempt)


def _output_attrs(relations: Sequence[Relation]) -> tuple[str, ...]:
    attrs: list[str] = []
    for rel in relations:
        attrs.extend(a for a in rel.attributes if a not in attrs)
    return tuple(attrs)


def run_hierarchical(clusters: Sequence[Cluster], global_plan: JobPlan, topology: Topology,
                     q: int = 1 << 62, seed: int = 0, workers: int = 1) -> JobResult:
    """Per-cluster joins, partial outputs shipped to the global site, global cascade.

    Data is already resident at each cluster's mappers, so nothing is
    uploaded. Partial outputs of clusters other than the global one cross
    ``inter_cluster``. The global cluster's own partial output is already at
    the reducers that produced it, which also serve the first global round,
    so it is not shuffled again there. In meta mode the final reducers call
    originals from every cluster; remote calls are charged to
    ``inter_cluster``.
    """
    if topology.global_site is None:
        raise PlanError("hierarchical execution needs a global site")
    if not clusters:
        raise PlanError("no clusters")
    gsite = topology.global_site
    site_ids = {s.site_id for s in topology.sites}
    for cl in clusters:
        if cl.site_id not in site_ids:
            raise PlanError(f"cluster site {cl.site_id!r} missing from topology")
        if len(cl.rounds) != len(cl.relations) - 1:
            raise PlanError(f"cluster {cl.site_id}: {len(cl.relations)} relations need "
                            f"{len(cl.relations) - 1} rounds")
    # a single cluster has no global work; its own last round is final
    if len(clusters) > 1 and len(global_plan.rounds) != len(clusters) - 1:
        raise PlanError(f"{len(clusters)} clusters need {len(clusters) - 1} global rounds")
    relations = [rel.at(cl.site_id) for cl in clusters for rel in cl.relations]
    _check_unique_names(relations)
    keys = dominating_attributes(relations)
    m = sum(len(r) for r in relations)
    indexes = _indexes(relations, keys)
    mode, cost = global_plan.mode, global_plan.cost

    def attempt(cfg, ledger):
        ex = _Execution(mode, cost, q, ledger, {r.name: r for r in relations}, workers)
        traces: list[RoundTrace] = []
        partials = []
        for cl in clusters:
            sides = [ex.base_rows(rel, keys, cfg, cl.site_id) for rel in cl.relations]
            if cl.rounds:
                ctraces = ex.cascade(sides, cl.rounds, f"{cl.site_id}/")
                traces.extend(ctraces)
                partials.append(ctraces[-1].outputs)
            else:
                partials.append(sides[0])
        for cl, part in zip(clusters, partials):
            if cl.site_id != gsite:
                ex.charge_rows("inter_cluster", part, f"ship/{cl.site_id}")
        if len(clusters) > 1:
            first_two = [i for i, cl in enumerate(clusters[:2]) if cl.site_id == gsite]
            resident = frozenset(r.rid for i in first_two for r in partials[i])
            traces.extend(ex.cascade(partials, global_plan.rounds, f"{gsite}/global-", resident))
        if not traces:
            raise PlanError("nothing to join")
        ex.account_participation(traces)
        final = traces[-1]
        fetched: dict = {}
        if mode == "meta":
            def channel_for(origin: Origin) -> str:
                return "user_to_reduce_fetch" if origin.site_id == gsite else "inter_cluster"

            fetched = call_fetch(ex.decisions(final), indexes, ledger, cost, channel_for,
                                 round_label=final.label)
            outputs, provenance, attrs = ex.materialize(final, fetched)
        else:
            outputs, provenance, attrs = _classic_outputs(final)
        outputs, provenance = _sorted_outputs(outputs, provenance)
        return JobResult(attrs or _output_attrs(relations), outputs, provenance, ledger,
                         len(traces), mode=mode, fetched=fetched,
                         replication={t.label: t.replication_rate for t in traces},
                         extras={"participating_copies": ex.participating_copies(final)})

    return _retrying(global_plan, m, seed, attempt)
