"""Value types for data-flow items: payloads, total-order keys, elements.

Everything here is immutable and hashable. Payloads form a closed union and
serialize to canonical JSON (sorted field names), which is what element
identity, deduplication, and byte-for-byte run comparison are built on.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Union


# ---------------------------------------------------------------------------
# Payloads
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Text:
    value: str


@dataclass(frozen=True)
class IntValue:
    value: int


@dataclass(frozen=True)
class Document:
    doc_id: int
    text: str


@dataclass(frozen=True)
class WordPosting:
    word: str
    doc_id: int
    positions: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(p < 0 for p in self.positions):
            raise ValueError(f"negative position in posting for {self.word!r}")
        if any(a >= b for a, b in zip(self.positions, self.positions[1:])):
            raise ValueError(f"positions not strictly increasing for {self.word!r}")


@dataclass(frozen=True)
class IndexChange:
    word: str
    ordinal: int
    postings: tuple[WordPosting, ...]

    def __post_init__(self) -> None:
        if self.ordinal < 1:
            raise ValueError(f"index change ordinal must be >= 1, got {self.ordinal}")


@dataclass(frozen=True)
class StringWindow:
    """Ordered window of recent strings; the state shape of windowed concat."""

    items: tuple[str, ...]


Payload = Union[Text, IntValue, Document, WordPosting, IndexChange, StringWindow]

_PAYLOAD_TAGS: dict[type, str] = {
    Text: "text",
    IntValue: "int",
    Document: "document",
    WordPosting: "word_posting",
    IndexChange: "index_change",
    StringWindow: "string_window",
}


def payload_to_obj(p: Payload) -> dict:
    if isinstance(p, Text):
        body = {"value": p.value}
    elif isinstance(p, IntValue):
        body = {"value": p.value}
    elif isinstance(p, Document):
        body = {"doc_id": p.doc_id, "text": p.text}
    elif isinstance(p, WordPosting):
        body = {"word": p.word, "doc_id": p.doc_id, "positions": list(p.positions)}
    elif isinstance(p, IndexChange):
        body = {
            "word": p.word,
            "ordinal": p.ordinal,
            "postings": [payload_to_obj(x) for x in p.postings],
        }
    elif isinstance(p, StringWindow):
        body = {"items": list(p.items)}
    else:
        raise TypeError(f"not a payload: {p!r}")
    body["type"] = _PAYLOAD_TAGS[type(p)]
    return body


def payload_from_obj(obj: dict) -> Payload:
    tag = obj["type"]
    if tag == "text":
        return Text(obj["value"])
    if tag == "int":
        return IntValue(obj["value"])
    if tag == "document":
        return Document(obj["doc_id"], obj["text"])
    if tag == "word_posting":
        return WordPosting(obj["word"], obj["doc_id"], tuple(obj["positions"]))
    if tag == "index_change":
        postings = tuple(payload_from_obj(x) for x in obj["postings"])
        return IndexChange(obj["word"], obj["ordinal"], postings)
    if tag == "string_window":
        return StringWindow(tuple(obj["items"]))
    raise ValueError(f"unknown payload type tag {tag!r}")


def canonical_json(obj) -> str:
    """Canonical JSON: lexicographically sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def payload_text(p: Payload) -> str:
    return canonical_json(payload_to_obj(p))


# ---------------------------------------------------------------------------
# Order keys
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class OrderKey:
    """Hierarchical total-order key: producer sequence plus child path.

    Comparison is producer_seq first, then child_path lexicographically with
    a shorter prefix sorting first, which is exactly tuple ordering on the
    dataclass fields.
    """

    producer_seq: int
    child_path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.producer_seq < 0 or any(c < 0 for c in self.child_path):
            raise ValueError(f"order key components must be non-negative: {self}")

    def to_obj(self) -> list:
        return [self.producer_seq, list(self.child_path)]

    @classmethod
    def from_obj(cls, obj) -> OrderKey:
        return cls(obj[0], tuple(obj[1]))


def derive_order_key(parent: OrderKey, child_index: int) -> OrderKey:
    """Key of the child_index-th derivative of an element keyed by parent."""
    if child_index < 0:
        raise ValueError("child_index must be non-negative")
    return OrderKey(parent.producer_seq, parent.child_path + (child_index,))


def compare_order_keys(a: OrderKey, b: OrderKey) -> int:
    """-1, 0 or 1 for a < b, a == b, a > b under the total order."""
    ta = (a.producer_seq, a.child_path)
    tb = (b.producer_seq, b.child_path)
    return -1 if ta < tb else (0 if ta == tb else 1)


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Element:
    """A data-flow item: payload plus order key and provenance bookkeeping.

    provenance holds the producer sequence numbers of every root input this
    element (transitively) derives from. Operation states are elements too;
    a state that never saw an input has empty provenance.
    """

    id: int
    key: OrderKey
    payload: Payload
    provenance: frozenset[int]

    def to_obj(self) -> dict:
        return {
            "id": self.id,
            "key": self.key.to_obj(),
            "payload": payload_to_obj(self.payload),
            "provenance": sorted(self.provenance),
        }

    @classmethod
    def from_obj(cls, obj: dict) -> Element:
        return cls(
            id=obj["id"],
            key=OrderKey.from_obj(obj["key"]),
            payload=payload_from_obj(obj["payload"]),
            provenance=frozenset(obj["provenance"]),
        )


def stable_hash64(data: str) -> int:
    return int.from_bytes(hashlib.blake2b(data.encode(), digest_size=8).digest(), "big")


def element_id(key: OrderKey, payload: Payload) -> int:
    """Deterministic 64-bit id; replayed recomputation yields the same id."""
    return stable_hash64(canonical_json([key.to_obj(), payload_to_obj(payload)]))


def make_element(key: OrderKey, payload: Payload, provenance) -> Element:
    return Element(element_id(key, payload), key, payload, frozenset(provenance))


def input_element(producer_seq: int, payload: Payload) -> Element:
    """Root input: keyed by its producer sequence, provenance = itself."""
    key = OrderKey(producer_seq)
    return make_element(key, payload, {producer_seq})
