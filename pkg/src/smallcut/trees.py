"""Tree construction and the aggregation primitives built on top of it.

Everything downstream runs over one rooted BFS spanning tree.  This
module builds that tree distributedly (``build_bfs``), provides the two
pipelined dissemination patterns — every node's one-word message to its
whole subtree (``broadcast_t1``) and every node's word *list* to its
subtree (``broadcast_t2``) — and implements the generic bottom-up fold
engine (``trsf_compute``) that evaluates, for every node ``v``, the
semigroup fold of per-node atomic values over the subtree below ``v``,
while every node ``a`` also learns the partial folds of its own subtree
toward each of its ancestors.

The fold engine is wave-scheduled: a node at level ``l_v`` stays silent
for ``depth - l_v`` rounds and then emits one record per round, for
ancestor levels in increasing order.  When a record fits one round's
budget this reproduces the canonical schedule exactly (a node at level
``l_v`` sends the record for ancestor level ``l`` in phase round
``depth - l_v + l + 1``), and the engine asserts that discipline.
Larger or variable-size elements fall back to eager data-driven
emission and let the per-edge queues pace the wire.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .graphs import RootedTree
from .runtime import Engine, NodeHandle, WordProgram

LABEL_BFS = "bfs"
LABEL_BCAST1 = "broadcast1"
LABEL_BCAST2 = "broadcast2"


class SemigroupError(ValueError):
    """The supplied combine operation is not commutative/associative."""


# ---------------------------------------------------------------------------
# BFS tree construction


@dataclass
class NodeBfs:
    """Everything one node knows about the tree after construction."""

    id: int
    root: int
    n: int
    level: int
    parent: int | None
    parent_eid: int | None
    children: tuple[tuple[int, int], ...]  # (child id, edge id), sorted
    ancestors: tuple[int, ...]  # root .. self, inclusive
    depth: int
    neighbor_levels: dict[int, int]  # edge id -> neighbor's level

    @property
    def is_root(self) -> bool:
        return self.parent is None

    def alpha(self, l: int) -> int:
        """Ancestor at level ``l`` (``l`` may be ``level`` itself)."""
        return self.ancestors[l]


class BfsInfo:
    """Collected per-node views plus centralized conveniences for tests."""

    def __init__(self, nodes: Sequence[NodeBfs], root: int):
        self.nodes = tuple(nodes)
        self.root = root
        self.depth = self.nodes[root].depth

    def __getitem__(self, v: int) -> NodeBfs:
        return self.nodes[v]

    def tree(self) -> RootedTree:
        return RootedTree([nb.parent for nb in self.nodes], self.root)


class _LevelProgram(WordProgram):
    """Flood levels outward; adopt the smallest proposer as parent."""

    def __init__(self, node: NodeHandle, root: int):
        super().__init__(node)
        self.is_root = node.id == root
        self.level: int | None = 0 if self.is_root else None
        self.parent: int | None = None
        self.parent_eid: int | None = None
        self.neighbor_levels: dict[int, int] = {}
        self._proposals: list[tuple[int, int, int]] = []

    def start(self):
        for nbr, eid in self.node.ports:
            self.expect(eid, 1, lambda rec, b=nbr, e=eid: self._announced(b, e, rec[0]))
        if self.is_root:
            self._announce()

    def _announce(self):
        for _, eid in self.node.ports:
            self.send(eid, self.level)
        self.finish()

    def _announced(self, nbr: int, eid: int, lvl: int):
        self.neighbor_levels[eid] = lvl
        if self.level is None:
            self._proposals.append((nbr, eid, lvl))

    def tick(self):
        if self.level is not None or not self._proposals:
            return
        # Synchronous flooding delivers all proposals of the winning level
        # in one round, before anything from further away.
        assert len({lvl for _, _, lvl in self._proposals}) == 1
        nbr, eid, lvl = min(self._proposals)
        self.level = lvl + 1
        self.parent = nbr
        self.parent_eid = eid
        self._proposals.clear()
        self._announce()


class _JoinProgram(WordProgram):
    """Tell the chosen parent about the adoption; collect own children."""

    def __init__(self, node: NodeHandle, parent_eid: int | None):
        super().__init__(node)
        self.parent_eid = parent_eid
        self.children: list[tuple[int, int]] = []

    def start(self):
        if self.parent_eid is not None:
            self.send(self.parent_eid, 1)
        self.finish()

    def on_chunk(self, eid, words):
        # The only traffic in this phase is one join token per new child.
        self.children.append((self.node.neighbor(eid), eid))


class _DepthProgram(WordProgram):
    """Convergecast the maximum level, then broadcast it back down."""

    def __init__(self, node: NodeHandle, level: int, parent_eid: int | None,
                 children: tuple[tuple[int, int], ...]):
        super().__init__(node)
        self.level = level
        self.parent_eid = parent_eid
        self.children = children
        self.depth: int | None = None
        self._highest = level
        self._waiting = len(children)

    def start(self):
        for _, eid in self.children:
            self.expect(eid, 1, self._from_child)
        if self._waiting == 0:
            self._up()

    def _from_child(self, rec):
        self._highest = max(self._highest, rec[0])
        self._waiting -= 1
        if self._waiting == 0:
            self._up()

    def _up(self):
        if self.parent_eid is None:
            self._announce(self._highest)
        else:
            self.send(self.parent_eid, self._highest)
            self.expect(self.parent_eid, 1, lambda rec: self._announce(rec[0]))

    def _announce(self, depth: int):
        self.depth = depth
        for _, eid in self.children:
            self.send(eid, depth)
        self.finish()


class _AncestorProgram(WordProgram):
    """Pipeline ancestor ids downward: own id first, then the parent's stream."""

    def __init__(self, node: NodeHandle, level: int, parent_eid: int | None,
                 children: tuple[tuple[int, int], ...]):
        super().__init__(node)
        self.level = level
        self.parent_eid = parent_eid
        self.children = children
        self._chain = [node.id]  # self upward, as words arrive

    def start(self):
        for _, eid in self.children:
            self.send(eid, self.node.id)
        if self.parent_eid is None:
            self.finish()
        else:
            self.expect(self.parent_eid, 1, self._word)

    def _word(self, rec):
        self._chain.append(rec[0])
        for _, eid in self.children:
            self.send(eid, rec[0])
        if len(self._chain) <= self.level:
            self.expect(self.parent_eid, 1, self._word)
        else:
            self.finish()

    @property
    def ancestors(self) -> tuple[int, ...]:
        return tuple(reversed(self._chain))


def build_bfs(engine: Engine, root: int | None = None) -> BfsInfo:
    """Grow a rooted BFS tree and give every node its place in it.

    ``root=None`` means the lowest-id policy, which with contiguous ids
    is always vertex 0.  Four sub-phases run under the ``bfs`` label:
    level flooding with lowest-proposer parent adoption, child
    registration, depth agreement, and pipelined ancestor-list
    dissemination.  Afterwards every node knows its level, parent,
    children, full ancestor list, the tree depth, and the level of each
    neighbor.
    """
    g = engine.g
    if root is None:
        root = 0
    if not 0 <= root < g.n:
        raise ValueError(f"root {root} out of range")

    levels = [_LevelProgram(h, root) for h in engine.handles]
    engine.run_phase(LABEL_BFS, levels)
    joins = [_JoinProgram(h, levels[v].parent_eid) for v, h in enumerate(engine.handles)]
    engine.run_phase(LABEL_BFS, joins)
    kids = [tuple(sorted(j.children)) for j in joins]
    depths = [
        _DepthProgram(h, levels[v].level, levels[v].parent_eid, kids[v])
        for v, h in enumerate(engine.handles)
    ]
    engine.run_phase(LABEL_BFS, depths)
    ancs = [
        _AncestorProgram(h, levels[v].level, levels[v].parent_eid, kids[v])
        for v, h in enumerate(engine.handles)
    ]
    engine.run_phase(LABEL_BFS, ancs)

    nodes = []
    for v in range(g.n):
        nb = NodeBfs(
            id=v,
            root=root,
            n=g.n,
            level=levels[v].level,
            parent=levels[v].parent,
            parent_eid=levels[v].parent_eid,
            children=kids[v],
            ancestors=ancs[v].ancestors,
            depth=depths[v].depth,
            neighbor_levels=levels[v].neighbor_levels,
        )
        assert len(nb.ancestors) == nb.level + 1
        assert nb.ancestors[-1] == v and nb.ancestors[0] == root
        assert len(nb.neighbor_levels) == len(engine.handles[v].ports)
        nodes.append(nb)
    assert nodes[root].level == 0
    for nb in nodes:
        if not nb.is_root:
            assert nb.level == nodes[nb.parent].level + 1
            assert (nb.id, nb.parent_eid) in nodes[nb.parent].children
        assert nb.depth == nodes[root].depth
    return BfsInfo(nodes, root)


# ---------------------------------------------------------------------------
# Broadcasts


class _Downcast(WordProgram):
    """Shared shape of both broadcasts: own block first, then relay."""

    def __init__(self, node: NodeHandle, nb: NodeBfs, block: Sequence[int], width: int):
        super().__init__(node)
        self.nb = nb
        self.block = tuple(block)
        self.width = width
        self.received: dict[int, tuple[int, ...]] = {nb.id: self.block}
        self._stream: list[int] = []

    def start(self):
        assert len(self.block) == self.width
        for _, eid in self.nb.children:
            self.send(eid, *self.block)
        if self.nb.parent_eid is None:
            self.finish()
        else:
            self.expect(self.nb.parent_eid, 1, self._word)

    def _word(self, rec):
        w = rec[0]
        self._stream.append(w)
        for _, eid in self.nb.children:
            self.send(eid, w)
        if len(self._stream) < self.nb.level * self.width:
            self.expect(self.nb.parent_eid, 1, self._word)
        else:
            # Blocks arrive nearest ancestor first.
            for i in range(self.nb.level):
                who = self.nb.ancestors[self.nb.level - 1 - i]
                chunk = tuple(self._stream[i * self.width:(i + 1) * self.width])
                self.received[who] = chunk
            self.finish()


def broadcast_t1(
    engine: Engine,
    info: BfsInfo,
    values: Sequence[int],
    label: str = LABEL_BCAST1,
) -> list[dict[int, int]]:
    """Deliver each node's single word to its entire subtree.

    Returns, per node ``u``, a map from every ancestor of ``u``
    (including ``u`` itself) to that ancestor's word.  Pipelining keeps
    the cost linear in the tree depth.
    """
    programs = [
        _Downcast(h, info[v], (values[v],), 1) for v, h in enumerate(engine.handles)
    ]
    engine.run_phase(label, programs)
    return [{who: blk[0] for who, blk in p.received.items()} for p in programs]


def broadcast_t2(
    engine: Engine,
    info: BfsInfo,
    lists: Sequence[Sequence[int]],
    width: int,
    pad: int = 0,
    label: str = LABEL_BCAST2,
) -> list[dict[int, tuple[int, ...]]]:
    """Deliver each node's word list to its entire subtree.

    Lists are padded to the fixed ``width`` so that receivers can frame
    the incoming stream without headers; callers use position metadata
    (every receiver knows each ancestor's level) to ignore the padding.
    Cost is one pipelined pass of ``width`` words per ancestor, i.e.
    quadratic in depth when ``width`` is itself of depth order.
    """
    padded = []
    for v, lst in enumerate(lists):
        lst = list(lst)
        if len(lst) > width:
            raise ValueError(f"node {v} list length {len(lst)} exceeds width {width}")
        padded.append(lst + [pad] * (width - len(lst)))
    programs = [
        _Downcast(h, info[v], padded[v], width) for v, h in enumerate(engine.handles)
    ]
    engine.run_phase(label, programs)
    return [dict(p.received) for p in programs]


# ---------------------------------------------------------------------------
# Tree-restricted semigroup folds


@dataclass
class SemigroupSpec:
    """A fold instance: domain, operation, atoms, and wire encoding.

    ``atomic(state, l)`` yields the node's atomic element toward its
    ancestor at level ``l``; ``state`` is whatever per-node object the
    caller passed to :func:`trsf_compute`.  ``encode``/``decode``
    translate elements to word tuples.  Fixed-size elements declare
    ``head_words`` alone; variable-size elements also supply
    ``tail_words``, which reads the head and answers how many words
    follow.  Elements must support ``==`` (used for the algebra
    self-check).
    """

    name: str
    combine: Callable[[object, object], object]
    atomic: Callable[[object, int], object]
    encode: Callable[[object], tuple[int, ...]]
    decode: Callable[[tuple[int, ...]], object]
    head_words: int = 1
    tail_words: Callable[[tuple[int, ...]], int] | None = None
    identity: object = None


@dataclass
class TrsfNodeResult:
    """Per-node fold outputs.

    ``partials[l]`` is the fold of the node's own subtree toward its
    level-``l`` ancestor; ``f`` (the full-subtree value) is the partial
    at the node's own level.  ``from_child`` keeps each child's
    contribution per ancestor level — several consumers need exactly
    those terms, so the engine exposes rather than discards them.
    """

    partials: dict[int, object] = field(default_factory=dict)
    from_child: dict[int, dict[int, object]] = field(default_factory=dict)
    f: object = None


@dataclass
class TrsfRun:
    results: list[TrsfNodeResult]
    emit_log: list[tuple[int, int, int]]  # (node, ancestor level, phase round)
    strict_schedule: bool


class _TrsfProgram(WordProgram):
    _UNSET = object()

    def __init__(self, node: NodeHandle, nb: NodeBfs, spec: SemigroupSpec,
                 state: object, lo: int, strict: bool,
                 log: list[tuple[int, int, int]]):
        super().__init__(node)
        self.nb = nb
        self.spec = spec
        self.state = state
        self.lo = lo
        self.strict = strict
        self.log = log
        self.acc: dict[int, object] = {}
        self.pending: dict[int, set[int]] = {}
        self.from_child: dict[int, dict[int, object]] = {}
        self.f: object = self._UNSET
        self.next_l = lo
        self._round = 0

    def start(self):
        lv = self.nb.level
        if lv >= self.lo:
            for l in range(self.lo, lv + 1):
                self.acc[l] = self.spec.atomic(self.state, l)
                self.pending[l] = {cid for cid, _ in self.nb.children}
            for cid, eid in self.nb.children:
                self.from_child[cid] = {}
                self._await_record(eid, cid)
        self._settle()

    def _await_record(self, eid: int, cid: int):
        self.expect(
            eid, 1 + self.spec.head_words,
            lambda rec: self._head(eid, cid, rec[0], rec[1:]),
        )

    def _head(self, eid: int, cid: int, l: int, head: tuple[int, ...]):
        tail_n = self.spec.tail_words(head) if self.spec.tail_words else 0
        if tail_n:
            self.expect(
                eid, tail_n,
                lambda tail: self._record(eid, cid, l, head + tail),
            )
        else:
            self._record(eid, cid, l, head)

    def _record(self, eid: int, cid: int, l: int, words: tuple[int, ...]):
        elem = self.spec.decode(words)
        assert l in self.pending and cid in self.pending[l], "record out of range"
        self.pending[l].discard(cid)
        self.from_child[cid][l] = elem
        self.acc[l] = self.spec.combine(self.acc[l], elem)
        if l < self.nb.level:
            self._await_record(eid, cid)
        self._settle()

    def tick(self):
        self._round += 1
        self._settle()

    def _ready(self, l: int) -> bool:
        return not self.pending[l]

    def _settle(self):
        lv = self.nb.level
        if lv < self.lo:
            if not self.done:
                self.finish()
            return
        if self.strict:
            # One record per round, on the wave schedule; readiness at the
            # scheduled round is the wave-safety property itself.
            if (
                self.next_l < lv
                and self._round == self.nb.depth - lv + (self.next_l - self.lo) + 1
            ):
                assert self._ready(self.next_l), (
                    f"node {self.nb.id} not ready for level {self.next_l} "
                    f"at its scheduled round"
                )
                self._emit(self.next_l)
                self.next_l += 1
        else:
            while self.next_l < lv and self._ready(self.next_l):
                self._emit(self.next_l)
                self.next_l += 1
        if self.f is self._UNSET and self._ready(lv):
            self.f = self.acc[lv]
        if not self.done and self.next_l >= lv and self.f is not self._UNSET:
            self.finish()

    def _emit(self, l: int):
        words = (l,) + tuple(self.spec.encode(self.acc[l]))
        self.send(self.nb.parent_eid, *words)
        self.log.append((self.nb.id, l, self._round))


def _check_algebra(spec: SemigroupSpec, seen: list[object]) -> None:
    sample = []
    for elem in seen:
        if elem not in sample:
            sample.append(elem)
        if len(sample) >= 5:
            break
    if spec.identity is not None and spec.identity not in sample:
        sample.append(spec.identity)
    for a in sample:
        for b in sample:
            if spec.combine(a, b) != spec.combine(b, a):
                raise SemigroupError(
                    f"{spec.name}: combine is not commutative on {a!r}, {b!r}"
                )
            for c in sample:
                if spec.combine(a, spec.combine(b, c)) != spec.combine(
                    spec.combine(a, b), c
                ):
                    raise SemigroupError(
                        f"{spec.name}: combine is not associative on "
                        f"{a!r}, {b!r}, {c!r}"
                    )


def trsf_compute(
    engine: Engine,
    info: BfsInfo,
    spec: SemigroupSpec,
    states: Sequence[object],
    min_level: int = 0,
    validate: bool = True,
) -> TrsfRun:
    """Fold atomic values over every subtree, one wave up the tree.

    Every node ``a`` at level ``l_a >= min_level`` ends up with its
    partial fold toward each ancestor level in ``[min_level, l_a]``
    (the one at ``l_a`` being the node's own subtree value ``f``).
    ``min_level`` restricts the fold to the forest of subtrees rooted
    at that level, which is how per-pivot instances reuse this engine.
    Records that fit one round follow the strict wave schedule; the
    returned ``emit_log`` records (node, level, phase round) for every
    emission so callers can audit the discipline.
    """
    if not 0 <= min_level <= max(info.depth, 0):
        raise ValueError(f"min_level {min_level} outside tree depth {info.depth}")
    fixed = spec.tail_words is None
    strict = fixed and (1 + spec.head_words) <= engine.config.word_bits
    log: list[tuple[int, int, int]] = []
    programs = [
        _TrsfProgram(h, info[v], spec, states[v], min_level, strict, log)
        for v, h in enumerate(engine.handles)
    ]
    engine.run_phase(f"trsf:{spec.name}", programs)
    results = []
    seen: list[object] = []
    for p in programs:
        if p.nb.level >= min_level:
            assert p.next_l == p.nb.level and p.f is not _TrsfProgram._UNSET
        f = None if p.f is _TrsfProgram._UNSET else p.f
        results.append(TrsfNodeResult(partials=dict(p.acc), from_child=p.from_child, f=f))
        seen.extend(p.acc.values())
    if validate:
        _check_algebra(spec, seen)
    return TrsfRun(results=results, emit_log=log, strict_schedule=strict)
