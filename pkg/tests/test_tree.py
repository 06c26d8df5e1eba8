"""BFS construction, broadcasts, and the subtree fold engine."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smallcut.graphs import Graph, RootedTree, generate
from smallcut.runtime import Engine, SimulatorConfig, measure_diameter
from smallcut.trees import (
    SemigroupError,
    SemigroupSpec,
    broadcast_t1,
    broadcast_t2,
    build_bfs,
    trsf_compute,
)


def strict_engine(g, **kw):
    return Engine(g, SimulatorConfig(strict_bandwidth=True, **kw))


def counting_spec(name="size"):
    return SemigroupSpec(
        name=name,
        combine=lambda a, b: a + b,
        atomic=lambda state, l: 1,
        encode=lambda x: (x,),
        decode=lambda w: w[0],
        identity=0,
    )


def test_bfs_square_levels_and_tie_break():
    g = generate("cycle", 4)
    engine = strict_engine(g)
    info = build_bfs(engine, 0)
    assert [info[v].level for v in range(4)] == [0, 1, 2, 1]
    assert info[2].parent == 1  # both 1 and 3 propose; lowest id wins
    assert info[1].parent == 0 and info[3].parent == 0
    assert info.depth == 2
    assert info[2].ancestors == (0, 1, 2)
    assert info[0].children == ((1, 0), (3, 3))
    assert info[3].neighbor_levels == {3: 0, 2: 2}


def test_bfs_star_depth_one():
    g = Graph(6, [(0, i) for i in range(1, 6)])
    info = build_bfs(strict_engine(g), 0)
    assert info.depth == 1
    assert all(info[v].parent == 0 for v in range(1, 6))


def test_bfs_single_vertex():
    info = build_bfs(strict_engine(Graph(1, [])), 0)
    assert info.depth == 0
    assert info[0].ancestors == (0,)
    assert info[0].children == ()


def test_bfs_rounds_linear_in_diameter():
    for side in (4, 6, 8):
        g = generate("grid", side * side)
        engine = strict_engine(g)
        build_bfs(engine, 0)
        d = measure_diameter(g)
        assert engine.stats.per_phase["bfs"].rounds <= 5 * d + 10


@settings(deadline=None, max_examples=50)
@given(st.integers(0, 10_000), st.integers(0, 10))
def test_bfs_matches_centralized_reference(seed, root_pick):
    g = generate("random_connected", 11, seed=seed, p=0.35)
    root = root_pick % g.n
    info = build_bfs(strict_engine(g), root)
    ref = RootedTree.bfs(g, root)
    assert [info[v].level for v in range(g.n)] == list(ref.level)
    assert [info[v].parent for v in range(g.n)] == list(ref.parent)
    assert info.depth == ref.depth
    for v in range(g.n):
        assert info[v].ancestors == ref.ancestors(v)
        assert info[v].children == tuple((c, g.eid(v, c)) for c in ref.children[v])
        assert info[v].neighbor_levels == {e: ref.level[w] for w, e in g.inc[v]}
    assert info.tree().parent == ref.parent


def test_broadcast1_path_delivers_all_ancestor_ids():
    g = generate("path", 4)
    engine = strict_engine(g)
    info = build_bfs(engine, 0)
    got = broadcast_t1(engine, info, values=[v for v in range(4)])
    assert got[3] == {0: 0, 1: 1, 2: 2, 3: 3}
    assert got[0] == {0: 0}


def test_broadcast1_single_vertex_sends_nothing():
    g = Graph(1, [])
    engine = strict_engine(g)
    info = build_bfs(engine, 0)
    got = broadcast_t1(engine, info, values=[3])
    assert got == [{0: 3}]
    assert engine.stats.total_messages == 0


@settings(deadline=None, max_examples=25)
@given(st.integers(0, 10_000))
def test_broadcast1_rounds_linear_in_depth(seed):
    g = generate("random_connected", 14, seed=seed, p=0.25)
    engine = strict_engine(g)
    info = build_bfs(engine, 0)
    values = [(v * 3) % g.n for v in range(g.n)]
    got = broadcast_t1(engine, info, values)
    for v in range(g.n):
        assert got[v] == {a: values[a] for a in info[v].ancestors}
    assert engine.stats.per_phase["broadcast1"].rounds <= 2 * info.depth + 4


def test_broadcast2_path_delivers_ancestor_tables():
    g = generate("path", 4)
    engine = strict_engine(g)
    info = build_bfs(engine, 0)
    width = info.depth + 1
    lists = [list(info[v].ancestors) for v in range(4)]
    got = broadcast_t2(engine, info, lists, width=width)
    for v in range(4):
        for a in info[v].ancestors:
            block = got[v][a]
            k = info[a].level + 1
            assert block[:k] == info[a].ancestors
            assert all(w == 0 for w in block[k:])


def test_broadcast2_rejects_oversized_lists():
    g = generate("path", 3)
    engine = strict_engine(g)
    info = build_bfs(engine, 0)
    with pytest.raises(ValueError, match="exceeds width"):
        broadcast_t2(engine, info, [[1, 2], [1], [1]], width=1)


def test_broadcast2_quadratic_cost_on_grids():
    for side in (4, 6):
        g = generate("grid", side * side)
        engine = strict_engine(g)
        info = build_bfs(engine, 0)
        width = info.depth + 1
        lists = [[1] * (info[v].level + 1) for v in range(g.n)]
        broadcast_t2(engine, info, lists, width=width)
        assert engine.stats.per_phase["broadcast2"].rounds <= (info.depth + 1) ** 2 + 4


def test_subtree_sizes_by_counting_fold():
    g = generate("cycle", 4)
    engine = strict_engine(g)
    info = build_bfs(engine, 0)
    run = trsf_compute(engine, info, counting_spec(), [None] * 4)
    assert run.strict_schedule
    ref = info.tree()
    for v in range(4):
        assert run.results[v].f == len(ref.desc(v))
    assert engine.stats.per_phase["trsf:size"].rounds == info.depth + 1


def test_max_id_fold():
    g = generate("random_connected", 9, seed=11)
    engine = strict_engine(g)
    info = build_bfs(engine, 0)
    spec = SemigroupSpec(
        name="maxid",
        combine=max,
        atomic=lambda state, l: state,
        encode=lambda x: (x,),
        decode=lambda w: w[0],
    )
    run = trsf_compute(engine, info, spec, list(range(g.n)))
    ref = info.tree()
    for v in range(g.n):
        assert run.results[v].f == max(ref.desc(v))


@settings(deadline=None, max_examples=30)
@given(st.integers(0, 10_000))
def test_fold_partials_and_wave_schedule(seed):
    g = generate("random_connected", 12, seed=seed, p=0.3)
    engine = strict_engine(g)
    info = build_bfs(engine, 0)
    # Atom toward the level-l ancestor is l+1, so each partial is
    # (subtree size) * (l+1) -- l-dependence included on purpose.
    spec = SemigroupSpec(
        name="weighted",
        combine=lambda a, b: a + b,
        atomic=lambda state, l: l + 1,
        encode=lambda x: (x,),
        decode=lambda w: w[0],
    )
    run = trsf_compute(engine, info, spec, [None] * g.n)
    ref = info.tree()
    for v in range(g.n):
        size = len(ref.desc(v))
        assert run.results[v].f == size * (info[v].level + 1)
        for l, val in run.results[v].partials.items():
            assert val == size * (l + 1)
        for c, _ in info[v].children:
            csize = len(ref.desc(c))
            for l in range(0, info[v].level + 1):
                assert run.results[v].from_child[c][l] == csize * (l + 1)
    assert run.strict_schedule
    for node, l, rnd in run.emit_log:
        assert rnd == info.depth - info[node].level + l + 1


def test_fold_with_min_level_restricts_to_deep_forest():
    g = generate("path", 6)
    engine = strict_engine(g)
    info = build_bfs(engine, 0)
    run = trsf_compute(engine, info, counting_spec("deep"), [None] * 6, min_level=2)
    ref = info.tree()
    for v in range(6):
        if info[v].level < 2:
            assert run.results[v].f is None
            assert run.results[v].partials == {}
        else:
            assert run.results[v].f == len(ref.desc(v))
            assert sorted(run.results[v].partials) == list(range(2, info[v].level + 1))


def test_variable_length_fold_collects_subtree_ids():
    g = generate("random_connected", 10, seed=23, p=0.35)
    engine = strict_engine(g)
    info = build_bfs(engine, 0)
    spec = SemigroupSpec(
        name="members",
        combine=lambda a, b: tuple(sorted(a + b)),
        atomic=lambda state, l: (state,),
        encode=lambda x: (len(x),) + tuple(x),
        decode=lambda w: tuple(w[1:]),
        head_words=1,
        tail_words=lambda head: head[0],
        identity=(),
    )
    run = trsf_compute(engine, info, spec, list(range(g.n)))
    assert not run.strict_schedule
    ref = info.tree()
    for v in range(g.n):
        assert run.results[v].f == tuple(sorted(ref.desc(v)))


def test_fold_rejects_broken_algebra():
    g = generate("path", 4)
    engine = strict_engine(g)
    info = build_bfs(engine, 0)
    lopsided = SemigroupSpec(
        name="sub",
        combine=lambda a, b: a - b,
        atomic=lambda state, l: 1,
        encode=lambda x: (abs(x),),
        decode=lambda w: w[0],
    )
    with pytest.raises(SemigroupError, match="not (commutative|associative)"):
        trsf_compute(engine, info, lopsided, [None] * 4)
    engine2 = strict_engine(g)
    info2 = build_bfs(engine2, 0)
    drifting = SemigroupSpec(
        name="drift",
        combine=lambda a, b: a * b + 1,
        atomic=lambda state, l: 1,
        encode=lambda x: (x,),
        decode=lambda w: w[0],
    )
    with pytest.raises(SemigroupError, match="not associative"):
        trsf_compute(engine2, info2, drifting, [None] * 4)


def test_fold_single_vertex():
    engine = strict_engine(Graph(1, []))
    info = build_bfs(engine, 0)
    run = trsf_compute(engine, info, counting_spec(), [None])
    assert run.results[0].f == 1
    assert run.results[0].partials == {0: 1}
