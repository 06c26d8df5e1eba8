"""Finding every cut of size one and two.

The whole stage runs on top of one BFS tree.  Each node first learns, for
every ancestor ``v``, how many of its own edges leave ``desc(v)``; folding
those per-node counts up the tree gives ``eta(v) = |boundary(desc(v))|``
for every vertex at once.  A bridge is a tree edge with ``eta(v) = 1``.

Size-2 cuts split into three shapes, each decided by a local test:

* one tree edge plus one other edge -- exactly the nodes with ``eta(v) = 2``;
* two nested tree edges -- a subtree-crossing count drops both boundaries
  to one;
* two disjoint tree edges -- found by folding a small four-field algebra
  (:class:`Zeta`) that tracks where a subtree's outgoing edges land.

Detected cuts are collected by the observer, never shipped over the
simulated network.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .graphs import Graph, boundary, edge_pairs
from .runtime import Engine, WordProgram
from .trees import BfsInfo, SemigroupSpec, broadcast_t1, trsf_compute

LABEL_ETA_PRE = "eta:pre"
LABEL_ZETA_PRE = "zeta:pre"

CASE_ONE_RESPECT = "1-respect"
CASE_NESTED = "2-nested"
CASE_DISJOINT = "2-disjoint"

_CASE_RANK = {CASE_ONE_RESPECT: 0, CASE_NESTED: 1, CASE_DISJOINT: 2}

TAG_IDENTITY = 0
TAG_ABSORBING = 1
TAG_CANDIDATE = 2


class Zeta(NamedTuple):
    """Element of the fold algebra behind the disjoint-pair search.

    A candidate ``<w, parent, eta, gamma>`` says: every non-tree edge seen
    so far that leaves the reference subtree lands inside ``desc(w)``, and
    there are ``gamma`` of them.  The identity means "no such edge yet";
    absorbing means the edges already scatter over two different targets
    (or escape above the reference level), so no single partner exists.
    """

    tag: int
    w: int = 0
    parent: int = 0
    eta: int = 0
    gamma: int = 0

    def is_candidate(self) -> bool:
        return self.tag == TAG_CANDIDATE


ZETA_IDENTITY = Zeta(TAG_IDENTITY)
ZETA_ABSORBING = Zeta(TAG_ABSORBING)


def zeta_candidate(w: int, parent: int, eta: int, gamma: int) -> Zeta:
    if gamma < 1:
        raise ValueError("candidate without any witnessed edge")
    return Zeta(TAG_CANDIDATE, w, parent, eta, gamma)


def zeta_combine(z1: Zeta, z2: Zeta) -> Zeta:
    """Merge two fold elements (commutative and associative)."""
    if z1.tag == TAG_IDENTITY:
        return z2
    if z2.tag == TAG_IDENTITY:
        return z1
    if z1.tag == TAG_ABSORBING or z2.tag == TAG_ABSORBING:
        return ZETA_ABSORBING
    if (z1.w, z1.parent, z1.eta) == (z2.w, z2.parent, z2.eta):
        return Zeta(TAG_CANDIDATE, z1.w, z1.parent, z1.eta, z1.gamma + z2.gamma)
    return ZETA_ABSORBING


def _encode_zeta(z: Zeta) -> tuple[int, ...]:
    if z.tag == TAG_CANDIDATE:
        return (TAG_CANDIDATE, z.w, z.parent, z.eta, z.gamma)
    return (z.tag,)


def _decode_zeta(words: tuple[int, ...]) -> Zeta:
    if words[0] == TAG_CANDIDATE:
        return Zeta(TAG_CANDIDATE, *words[1:])
    return Zeta(words[0])


@dataclass(frozen=True)
class CutReport:
    """One detected cut: canonical edge pairs plus how it was found."""

    edges: tuple[tuple[int, int], ...]
    case: str
    detected_by: int

    @property
    def size(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class EtaState:
    """Everything the size-1/2 tests need, as each node ends up knowing it.

    ``own_cross[a][v]`` counts edges at ``a`` leaving ``desc(v)``;
    ``subtree_cross[a][v]`` sums that over ``desc(a)``; ``anc_eta[a]``
    maps every ancestor ``v`` of ``a`` to ``eta(v)``.
    """

    info: BfsInfo
    eta: tuple[int, ...]
    own_cross: tuple[dict[int, int], ...]
    subtree_cross: tuple[dict[int, int], ...]
    anc_eta: tuple[dict[int, int], ...]


class _ListExchange(WordProgram):
    """Stream a fixed word list over selected edges, collect the replies."""

    def __init__(self, node, outgoing: dict[int, tuple[int, ...]],
                 incoming: dict[int, int]):
        super().__init__(node)
        self._outgoing = outgoing
        self._incoming = incoming
        self.received: dict[int, tuple[int, ...]] = {}

    def start(self) -> None:
        for eid, words in sorted(self._outgoing.items()):
            if words:
                self.node.send(eid, *words)
        self._waiting = len(self._incoming)
        for eid, nwords in self._incoming.items():
            if nwords == 0:
                self.received[eid] = ()
                self._waiting -= 1
            else:
                self.expect(eid, nwords, self._stash(eid))
        if self._waiting == 0:
            self.finish()

    def _stash(self, eid: int):
        def handler(words: tuple[int, ...]) -> None:
            self.received[eid] = words
            self._waiting -= 1
            if self._waiting == 0:
                self.finish()

        return handler

    def output(self) -> dict[int, tuple[int, ...]]:
        return self.received


class PreEta(NamedTuple):
    """Ancestor lists as heard from every neighbour, plus the crossing counts."""

    own_cross: tuple[dict[int, int], ...]
    neighbor_ancestors: tuple[dict[int, tuple[int, ...]], ...]


def preprocess_eta(engine: Engine, info: BfsInfo) -> PreEta:
    """Exchange ancestor lists with all neighbours; count escaping edges.

    An edge (a, b) leaves ``desc(v)`` exactly when v is not an ancestor
    of b, so after one pipelined exchange every node can fill in its own
    crossing table locally.  Runs in O(depth) rounds.
    """
    g = engine.g
    programs = []
    for a in range(g.n):
        nb = info[a]
        outgoing = {eid: nb.ancestors for _, eid in g.inc[a]}
        incoming = {eid: nb.neighbor_levels[eid] + 1 for _, eid in g.inc[a]}
        programs.append(_ListExchange(engine.handles[a], outgoing, incoming))
    engine.run_phase(LABEL_ETA_PRE, programs)

    own_cross = []
    neighbor_ancestors = []
    for a in range(g.n):
        heard = programs[a].output()
        by_eid = {eid: tuple(words) for eid, words in heard.items()}
        neighbor_ancestors.append(by_eid)
        sets = [set(words) for words in by_eid.values()]
        own_cross.append(
            {v: sum(1 for s in sets if v not in s) for v in info[a].ancestors}
        )
    return PreEta(tuple(own_cross), tuple(neighbor_ancestors))


def compute_eta(engine: Engine, info: BfsInfo, pre: PreEta) -> EtaState:
    """Fold the crossing counts into eta(v) for every v, then push each
    eta(v) back down to desc(v)."""
    n = engine.g.n
    m = engine.g.m
    spec = SemigroupSpec(
        name="eta",
        combine=lambda x, y: x + y,
        atomic=lambda by_level, l: by_level[l],
        encode=lambda x: (x,),
        decode=lambda words: words[0],
        identity=0,
    )
    states = [
        [pre.own_cross[a][v] for v in info[a].ancestors] for a in range(n)
    ]
    run = trsf_compute(engine, info, spec, states)

    eta = tuple(run.results[a].f for a in range(n))
    anc_eta = tuple(broadcast_t1(engine, info, list(eta)))
    subtree_cross = tuple(
        {info[a].ancestors[l]: val for l, val in run.results[a].partials.items()}
        for a in range(n)
    )

    assert eta[info.root] == 0
    for a in range(n):
        if a != info.root:
            assert eta[a] >= 1, "subtree boundary empty in a connected graph"
        assert subtree_cross[a][a] == eta[a]
        for v in info[a].ancestors:
            assert 0 <= pre.own_cross[a][v] <= subtree_cross[a][v]
            assert subtree_cross[a][v] <= anc_eta[a][v] <= m
    return EtaState(info, eta, pre.own_cross, subtree_cross, anc_eta)


def detect_1cuts(state: EtaState) -> list[CutReport]:
    """A tree edge (parent(v), v) is a bridge exactly when eta(v) = 1."""
    reports = []
    for v in range(len(state.eta)):
        if v != state.info.root and state.eta[v] == 1:
            p = state.info[v].parent
            reports.append(
                CutReport(((min(p, v), max(p, v)),), CASE_ONE_RESPECT, v)
            )
    return reports


def preprocess_zeta(
    engine: Engine, info: BfsInfo, state: EtaState
) -> tuple[dict[int, tuple[tuple[int, int, int], ...]], ...]:
    """Exchange (level, eta, id) annotated ancestor lists over non-tree edges.

    Returns, per node, a map from non-tree edge id to the neighbour's
    annotated ancestor list in root-to-node order.
    """
    g = engine.g
    programs = []
    for a in range(g.n):
        nb = info[a]
        child_eids = {eid for _, eid in nb.children}
        words = []
        for lvl, u in enumerate(nb.ancestors):
            words.extend((lvl, state.anc_eta[a][u], u))
        outgoing = {}
        incoming = {}
        for _, eid in g.inc[a]:
            if eid == nb.parent_eid or eid in child_eids:
                continue
            outgoing[eid] = tuple(words)
            incoming[eid] = 3 * (nb.neighbor_levels[eid] + 1)
        programs.append(_ListExchange(engine.handles[a], outgoing, incoming))
    engine.run_phase(LABEL_ZETA_PRE, programs)

    annotated = []
    for a in range(g.n):
        heard = programs[a].output()
        per_edge = {}
        for eid, words in heard.items():
            per_edge[eid] = tuple(
                (words[i], words[i + 1], words[i + 2])
                for i in range(0, len(words), 3)
            )
        annotated.append(per_edge)
    return tuple(annotated)


def _zeta_atom(node_state, l: int) -> Zeta:
    """Where do this node's non-tree edges land, seen from ancestor level l?"""
    nb, per_edge = node_state
    v = nb.ancestors[l]
    best: Zeta | None = None
    for triples in per_edge.values():
        if len(triples) - 1 < l:
            return ZETA_ABSORBING  # the edge climbs above level l entirely
        _, eta_w, w = triples[l]
        if w == v:
            continue  # edge stays inside desc(v)
        parent_w = triples[l - 1][2]
        if best is None:
            best = zeta_candidate(w, parent_w, eta_w, 1)
        elif best.w == w:
            best = best._replace(gamma=best.gamma + 1)
        else:
            return ZETA_ABSORBING
    return ZETA_IDENTITY if best is None else best


def compute_zeta(
    engine: Engine,
    info: BfsInfo,
    state: EtaState,
    annotated=None,
) -> tuple[dict[int, Zeta], ...]:
    """Fold the landing algebra over each subtree.

    Returns, per node a, a map v -> fold over desc(a) for every ancestor
    v of a (including a itself).
    """
    if annotated is None:
        annotated = preprocess_zeta(engine, info, state)
    n = engine.g.n
    spec = SemigroupSpec(
        name="zeta",
        combine=zeta_combine,
        atomic=_zeta_atom,
        encode=_encode_zeta,
        decode=_decode_zeta,
        head_words=1,
        tail_words=lambda head: 4 if head[0] == TAG_CANDIDATE else 0,
        identity=ZETA_IDENTITY,
    )
    states = [(info[a], annotated[a]) for a in range(n)]
    run = trsf_compute(engine, info, spec, states)
    tables = tuple(
        {info[a].ancestors[l]: z for l, z in run.results[a].partials.items()}
        for a in range(n)
    )
    for table in tables:
        for z in table.values():
            if z.is_candidate():
                # In a real run the witnessed edges all sit on the
                # boundary of desc(w), so the count can never exceed it.
                assert 1 <= z.gamma <= z.eta and z.w != info.root
    return tables


def detect_2cuts(
    g: Graph, state: EtaState, zeta: tuple[dict[int, Zeta], ...]
) -> list[CutReport]:
    """All induced two-edge cuts, each reported once.

    The raw output is every induced cut of size two; whether those are
    minimum cuts depends on the graph (the caller gates on the size-1
    stage coming up empty).
    """
    info = state.info
    tree = info.tree()
    found: list[CutReport] = []

    for v in range(g.n):
        if v != info.root and state.eta[v] == 2:
            edges = edge_pairs(g, boundary(g, tree.desc(v)))
            found.append(CutReport(edges, CASE_ONE_RESPECT, v))

    for a in range(g.n):
        if a == info.root:
            continue
        pa = info[a].parent
        own_edge = (min(pa, a), max(pa, a))
        for v in info[a].ancestors[:-1]:
            cross = state.subtree_cross[a][v]
            if state.anc_eta[a][v] - cross == 1 and state.eta[a] - cross == 1:
                pv = info[v].parent
                pair = tuple(sorted({(min(pv, v), max(pv, v)), own_edge}))
                found.append(CutReport(pair, CASE_NESTED, a))
        for v, z in zeta[a].items():
            if not z.is_candidate():
                continue
            if state.eta[a] - z.gamma == 1 and z.eta - z.gamma == 1:
                other = (min(z.parent, z.w), max(z.parent, z.w))
                pair = tuple(sorted({other, own_edge}))
                found.append(CutReport(pair, CASE_DISJOINT, a))

    found.sort(key=lambda r: (_CASE_RANK[r.case], r.detected_by, r.edges))
    unique: dict[tuple, CutReport] = {}
    for r in found:
        unique.setdefault(r.edges, r)
    return sorted(unique.values(), key=lambda r: r.edges)


@dataclass(frozen=True)
class SmallCutResult:
    """Outcome of the size-1/2 stage for one rooted run."""

    lambda_detected: int | None
    reports: tuple[CutReport, ...]
    state: EtaState
    zeta: tuple[dict[int, Zeta], ...] | None
    induced: tuple[CutReport, ...]


def run_small_cut_stage(
    engine: Engine,
    info: BfsInfo,
    verbose: bool = False,
    always_continue: bool = False,
) -> SmallCutResult:
    """Run the full size-1 then size-2 search on an existing BFS tree.

    Stops after the bridge test when a bridge exists (the two-edge
    reports would not be minimum cuts then), unless asked to continue
    for diagnostics.  ``verbose`` additionally exposes every induced cut
    the detectors saw, regardless of the minimum.
    """
    pre = preprocess_eta(engine, info)
    state = compute_eta(engine, info, pre)
    bridges = detect_1cuts(state)

    zeta = None
    pairs: list[CutReport] = []
    if not bridges or verbose or always_continue:
        zeta = compute_zeta(engine, info, state)
        pairs = detect_2cuts(engine.g, state, zeta)

    if bridges:
        lam, reports = 1, bridges
    elif pairs:
        lam, reports = 2, pairs
    else:
        lam, reports = None, []
    return SmallCutResult(
        lambda_detected=lam,
        reports=tuple(reports),
        state=state,
        zeta=zeta,
        induced=tuple(bridges + pairs) if verbose else (),
    )
