"""Operation specifications and the dataflow DAG.

A graph is a validated DAG with exactly one source and one sink. Transitions
are pure functions (state payload, element) -> (state payload, derived
payloads); the runtime and the reference oracle both drive them through
apply_operation so they derive identical keys, ids, and provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .model import (
    Element,
    Payload,
    derive_order_key,
    make_element,
    payload_text,
    stable_hash64,
)


class GraphError(Exception):
    pass


class CycleDetected(GraphError):
    pass


class DanglingEdge(GraphError):
    pass


class MultipleSources(GraphError):
    pass


class MultipleSinks(GraphError):
    pass


class TransitionPanic(Exception):
    """A user transition function raised; carries op name and element id."""

    def __init__(self, op_name: str, elem_id: int, cause: BaseException):
        super().__init__(f"transition of {op_name!r} failed on element {elem_id}: {cause!r}")
        self.op_name = op_name
        self.elem_id = elem_id
        self.cause = cause


Transition = Callable[[Optional[Payload], Element], tuple[Optional[Payload], list[Payload]]]

KINDS = ("map", "flat_map", "stateful")


@dataclass(frozen=True)
class OperationSpec:
    name: str
    kind: str
    transition: Transition
    commutative: bool = True
    order_sensitive: bool = False
    initial_state: Optional[Payload] = None
    parallelism: int = 1
    partition_by: Optional[Callable[[Element], str]] = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown operation kind {self.kind!r}")
        if not self.commutative and not self.order_sensitive:
            raise ValueError(f"{self.name}: non-commutative operations must be order-sensitive")
        if self.kind != "stateful" and self.initial_state is not None:
            raise ValueError(f"{self.name}: only stateful operations carry initial state")
        if self.parallelism < 1:
            raise ValueError(f"{self.name}: parallelism must be positive")


@dataclass(frozen=True)
class DataflowGraph:
    operations: tuple[OperationSpec, ...]
    edges: tuple[tuple[str, str], ...]
    source_name: str
    sink_name: str
    topo_order: tuple[str, ...]
    _by_name: dict = field(repr=False, hash=False, compare=False, default_factory=dict)

    def op(self, name: str) -> OperationSpec:
        return self._by_name[name]

    def downstream(self, name: str) -> tuple[str, ...]:
        return tuple(b for a, b in self.edges if a == name)

    def upstream(self, name: str) -> tuple[str, ...]:
        return tuple(a for a, b in self.edges if b == name)

    def has_non_commutative(self) -> bool:
        return any(not op.commutative for op in self.operations)


def build_graph(ops: list[OperationSpec], edges: list[tuple[str, str]]) -> DataflowGraph:
    """Validate and freeze a dataflow DAG; topological order is recorded with
    stable tie-breaking by operation name."""
    names = [op.name for op in ops]
    if len(set(names)) != len(names):
        raise ValueError("operation names must be unique")
    if not ops:
        raise ValueError("graph needs at least one operation")
    by_name = {op.name: op for op in ops}
    for a, b in edges:
        if a not in by_name or b not in by_name:
            raise DanglingEdge(f"edge ({a!r}, {b!r}) references an undeclared operation")
    if len(set(edges)) != len(edges):
        raise ValueError("duplicate edges")

    incoming = {n: 0 for n in names}
    for _, b in edges:
        incoming[b] += 1

    # Kahn's algorithm; the ready set is kept sorted so the order is stable
    # across processes regardless of declaration order.
    ready = sorted(n for n in names if incoming[n] == 0)
    remaining = dict(incoming)
    topo: list[str] = []
    while ready:
        n = ready.pop(0)
        topo.append(n)
        added = []
        for a, b in edges:
            if a == n:
                remaining[b] -= 1
                if remaining[b] == 0:
                    added.append(b)
        for b in sorted(added):
            ready.append(b)
        ready.sort()
    if len(topo) != len(names):
        raise CycleDetected(f"cycle among operations {sorted(set(names) - set(topo))}")

    sources = [n for n in names if incoming[n] == 0]
    outgoing = {n: 0 for n in names}
    for a, _ in edges:
        outgoing[a] += 1
    sinks = [n for n in names if outgoing[n] == 0]
    if len(sources) != 1:
        raise MultipleSources(f"expected exactly one source, found {sources}")
    if len(sinks) != 1:
        raise MultipleSinks(f"expected exactly one sink, found {sinks}")
    if by_name[sources[0]].parallelism != 1:
        raise ValueError("source operation must have parallelism 1")

    return DataflowGraph(
        operations=tuple(ops),
        edges=tuple(edges),
        source_name=sources[0],
        sink_name=sinks[0],
        topo_order=tuple(topo),
        _by_name=by_name,
    )


def apply_operation(
    op: OperationSpec, state: Optional[Element], elem: Element
) -> tuple[Optional[Element], list[Element]]:
    """Run one transition. Derived elements are keyed as children 0..k-1 of
    the triggering element; a stateful op's new state becomes child k so it
    never collides with a data key. Provenance of everything derived is the
    union of the element's and the state's provenance."""
    state_payload = state.payload if state is not None else op.initial_state
    try:
        new_payload, outs = op.transition(state_payload, elem)
    except Exception as exc:
        raise TransitionPanic(op.name, elem.id, exc) from exc

    prov = elem.provenance | (state.provenance if state is not None else frozenset())
    derived = [
        make_element(derive_order_key(elem.key, i), p, prov) for i, p in enumerate(outs)
    ]
    if op.kind == "stateful":
        if new_payload is None:
            raise TransitionPanic(op.name, elem.id, ValueError("stateful transition returned no state"))
        new_state = make_element(derive_order_key(elem.key, len(outs)), new_payload, prov)
    else:
        if new_payload is not None:
            raise TransitionPanic(op.name, elem.id, ValueError("stateless transition returned state"))
        new_state = None
        if op.kind == "map" and len(outs) != 1:
            raise TransitionPanic(op.name, elem.id, ValueError("map must yield exactly one payload"))
    return new_state, derived


def partition_key(op: OperationSpec, elem: Element) -> str:
    """State-slot key and routing key; empty string when the op is unkeyed."""
    return op.partition_by(elem) if op.partition_by is not None else ""


def route_task(op: OperationSpec, elem: Element) -> int:
    """Task index an element visits; same partition key, same task."""
    if op.parallelism == 1:
        return 0
    return stable_hash64("route:" + partition_key(op, elem)) % op.parallelism


def element_sort_key(elem: Element) -> tuple:
    return (elem.key.producer_seq, elem.key.child_path, payload_text(elem.payload))
