"""Relations, tuples, sites and the per-tuple metadata that stands in for them.

Sizes are carried in bits. Fixtures that count abstract units (one tuple
costs one unit, a value costs two units, ...) declare those numbers as the
``size_bits`` of each value through a sizes sidecar, so the same arithmetic
serves both bit-level and unit-level accounting.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union


class SchemaError(ValueError):
    """Unknown attribute, arity mismatch or duplicate attribute names."""


class IntegrityError(RuntimeError):
    """A requested tuple could not be resolved through the user-site index."""


SITE_KINDS = ("user", "compute-cluster", "global-cluster")


@dataclass(frozen=True)
class AttributeValue:
    payload: bytes
    size_bits: int

    def __post_init__(self):
        if self.size_bits < 0:
            raise ValueError("size_bits must be non-negative")

    @classmethod
    def of(cls, value: Union[str, bytes, "AttributeValue"], size_bits: int | None = None) -> "AttributeValue":
        if isinstance(value, AttributeValue):
            return value if size_bits is None else cls(value.payload, size_bits)
        payload = value.encode("utf-8") if isinstance(value, str) else bytes(value)
        return cls(payload, 8 * len(payload) if size_bits is None else size_bits)

    def text(self) -> str:
        return self.payload.decode("utf-8")

    def __eq__(self, other):
        # byte equality only; declared sizes do not take part
        if not isinstance(other, AttributeValue):
            return NotImplemented
        return self.payload == other.payload

    def __hash__(self):
        return hash(self.payload)

    def __repr__(self):
        return f"AttributeValue({self.payload!r}, {self.size_bits})"


@dataclass(frozen=True)
class Tuple:
    tuple_id: int
    values: tuple[AttributeValue, ...]


@dataclass(frozen=True)
class Site:
    site_id: str
    kind: str = "user"

    def __post_init__(self):
        if self.kind not in SITE_KINDS:
            raise ValueError(f"unknown site kind {self.kind!r}")


@dataclass(frozen=True)
class Relation:
    name: str
    attributes: tuple[str, ...]
    tuples: tuple[Tuple, ...]
    home_site: str = "user"

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "tuples", tuple(self.tuples))
        if len(set(self.attributes)) != len(self.attributes):
            raise SchemaError(f"duplicate attribute names in {self.name}: {self.attributes}")
        seen = set()
        for t in self.tuples:
            if len(t.values) != len(self.attributes):
                raise SchemaError(
                    f"tuple {t.tuple_id} of {self.name} has arity {len(t.values)}, "
                    f"expected {len(self.attributes)}")
            if t.tuple_id in seen:
                raise SchemaError(f"duplicate tuple_id {t.tuple_id} in {self.name}")
            seen.add(t.tuple_id)

    @classmethod
    def from_rows(cls, name: str, attributes: Sequence[str], rows: Iterable[Sequence],
                  home_site: str = "user", sizes: Mapping[str, int] | None = None) -> "Relation":
        """Build a relation with dense tuple ids; ``sizes`` overrides per-attribute bit sizes."""
        attributes = tuple(attributes)
        sizes = dict(sizes or {})
        unknown = set(sizes) - set(attributes)
        if unknown:
            raise SchemaError(f"size override for unknown attributes {sorted(unknown)}")
        tuples = []
        for i, row in enumerate(rows):
            row = list(row)
            if len(row) != len(attributes):
                raise SchemaError(f"row {i} of {name} has {len(row)} fields, expected {len(attributes)}")
            values = tuple(AttributeValue.of(v, sizes.get(a)) for a, v in zip(attributes, row))
            tuples.append(Tuple(i, values))
        return cls(name, attributes, tuple(tuples), home_site)

    def position(self, attr: str) -> int:
        try:
            return self.attributes.index(attr)
        except ValueError:
            raise SchemaError(f"relation {self.name} has no attribute {attr!r}") from None

    def value(self, t: Tuple, attr: str) -> AttributeValue:
        return t.values[self.position(attr)]

    def tuple(self, tuple_id: int) -> Tuple:
        # ids are dense for loaded relations; fall back to a scan otherwise
        if 0 <= tuple_id < len(self.tuples) and self.tuples[tuple_id].tuple_id == tuple_id:
            return self.tuples[tuple_id]
        for t in self.tuples:
            if t.tuple_id == tuple_id:
                return t
        raise KeyError(tuple_id)

    def __len__(self):
        return len(self.tuples)

    def at(self, site_id: str) -> "Relation":
        return Relation(self.name, self.attributes, self.tuples, site_id)


def tuple_size_bits(t: Tuple) -> int:
    return sum(v.size_bits for v in t.values)


# ---------------------------------------------------------------------------
# metadata

@dataclass(frozen=True, order=True)
class Origin:
    relation: str
    tuple_id: int
    site_id: str = "user"


@dataclass(frozen=True)
class Literal:
    value: AttributeValue

    @property
    def bit_length(self) -> int:
        return self.value.size_bits


@dataclass(frozen=True)
class Digest:
    """Fixed-width hash of a key value; ``value`` holds the bits as an integer."""
    value: int
    width: int

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("digest width must be positive")
        if not 0 <= self.value < (1 << self.width):
            raise ValueError("digest value does not fit its width")

    @property
    def bit_length(self) -> int:
        return self.width

    @property
    def bits(self) -> str:
        return format(self.value, f"0{self.width}b")

    def __len__(self):
        return self.width

    def to_bytes(self) -> bytes:
        return self.value.to_bytes((self.width + 7) // 8, "big")

    @classmethod
    def concat(cls, parts: Sequence["Digest"]) -> "Digest":
        value, width = 0, 0
        for d in parts:
            value = (value << d.width) | d.value
            width += d.width
        return cls(value, width)


KeyMaterial = Union[Literal, Digest]


@dataclass(frozen=True)
class CostModel:
    """How records are priced when they cross a channel.

    ``size_field_bits`` is charged per size descriptor (0 keeps metadata
    upload at exactly the key size). With ``unit_cost`` set, metadata and
    call signals are free and data is priced at its declared ``size_bits``.
    """
    unit_cost: bool = False
    size_field_bits: int = 0
    signal_bits: int = 1

    def meta_bits(self, key_bits: int, n_descriptors: int) -> int:
        if self.unit_cost:
            return 0
        return key_bits + n_descriptors * self.size_field_bits

    def signal(self) -> int:
        return 0 if self.unit_cost else self.signal_bits


DEFAULT_COST = CostModel()


@dataclass(frozen=True)
class MetaRecord:
    origin: Origin
    keys: tuple[tuple[str, KeyMaterial], ...]
    size_descriptors: tuple[tuple[str, int], ...]
    wire_bits: int
    original_bits: int

    @property
    def key_material(self) -> KeyMaterial:
        """The record's key; multi-attribute keys concatenate in attribute order."""
        materials = [k for _, k in self.keys]
        if len(materials) == 1:
            return materials[0]
        if all(isinstance(k, Digest) for k in materials):
            return Digest.concat(materials)
        payload = b"\x00".join(k.value.payload if isinstance(k, Literal) else k.to_bytes()
                               for k in materials)
        return Literal(AttributeValue(payload, sum(k.bit_length for k in materials)))


def make_meta(t: Tuple, rel: Relation, key_attrs: Iterable[str], digester=None,
              cost: CostModel = DEFAULT_COST) -> MetaRecord:
    """Strip ``t`` down to its key material plus the sizes of everything else.

    ``digester`` is a :class:`metamr.hashing.HashConfig`; when given, key
    values are replaced by digests of ``digester.output_bits`` bits.
    """
    from .hashing import digest

    key_attrs = set(key_attrs)
    for a in key_attrs:
        rel.position(a)
    try:
        belongs = rel.tuple(t.tuple_id) == t
    except KeyError:
        belongs = False
    if not belongs:
        raise SchemaError(f"tuple {t.tuple_id} does not belong to {rel.name}")
    keys, descriptors = [], []
    for attr, v in zip(rel.attributes, t.values):
        if attr in key_attrs:
            keys.append((attr, Literal(v) if digester is None else digest(v, digester)))
        else:
            descriptors.append((attr, v.size_bits))
    key_bits = sum(k.bit_length for _, k in keys)
    return MetaRecord(
        origin=Origin(rel.name, t.tuple_id, rel.home_site),
        keys=tuple(keys),
        size_descriptors=tuple(descriptors),
        wire_bits=cost.meta_bits(key_bits, len(descriptors)),
        original_bits=tuple_size_bits(t),
    )


# ---------------------------------------------------------------------------
# user-site index

@dataclass(frozen=True)
class UserIndex:
    relation: Relation
    attribute: str
    by_key: Mapping[bytes, tuple[int, ...]] = field(repr=False)

    def lookup(self, key: Union[AttributeValue, bytes, str]) -> list[int]:
        if isinstance(key, AttributeValue):
            key = key.payload
        elif isinstance(key, str):
            key = key.encode("utf-8")
        return list(self.by_key.get(key, ()))

    def resolve(self, tuple_id: int) -> Tuple:
        """Fetch the original tuple, checking the index actually lists it."""
        try:
            t = self.relation.tuple(tuple_id)
        except KeyError:
            raise IntegrityError(f"{self.relation.name} has no tuple {tuple_id}") from None
        key = self.relation.value(t, self.attribute).payload
        if tuple_id not in self.by_key.get(key, ()):
            raise IntegrityError(
                f"index on {self.relation.name}.{self.attribute} does not cover tuple {tuple_id}")
        return t


def build_index(rel: Relation, attr: str) -> UserIndex:
    pos = rel.position(attr)
    by_key: dict[bytes, list[int]] = {}
    for t in rel.tuples:
        by_key.setdefault(t.values[pos].payload, []).append(t.tuple_id)
    return UserIndex(rel, attr, {k: tuple(v) for k, v in by_key.items()})


# ---------------------------------------------------------------------------
# text ingestion

def sidecar_path(path: str) -> str:
    return path + ".sizes.json"


def load_relation(path: str, name: str | None = None, home_site: str = "user",
                  sizes: Mapping[str, int] | None = None) -> Relation:
    """Read a tab-separated relation file with a header line.

    A ``<path>.sizes.json`` sidecar, if present, maps attribute names to the
    bit size every value of that attribute should report.
    """
    if name is None:
        name = os.path.splitext(os.path.basename(path))[0]
    if sizes is None and os.path.exists(sidecar_path(path)):
        with open(sidecar_path(path), encoding="utf-8") as fh:
            sizes = json.load(fh)
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SchemaError(f"{path}: missing header line")
    header = lines[0].split("\t")
    rows = [line.split("\t") for line in lines[1:]]
    return Relation.from_rows(name, header, rows, home_site, sizes)


def dump_relation(rel: Relation, path: str, sizes: Mapping[str, int] | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(rel.attributes) + "\n")
        for t in rel.tuples:
            fh.write("\t".join(v.text() for v in t.values) + "\n")
    if sizes:
        with open(sidecar_path(path), "w", encoding="utf-8") as fh:
            json.dump(dict(sizes), fh, sort_keys=True)
            fh.write("\n")
