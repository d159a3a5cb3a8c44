import pytest

import storyplot as sp


def test_select_objects_top5_ties_dedup():
    dets = [
        ("dog", 0.90, 0),
        ("dog", 0.50, 0),  # duplicate keeps the higher score
        ("ball", 0.85, 0),
        ("park", 0.55, 0),
        ("bench", 0.55, 0),  # ties break alphabetically
        ("tree", 0.30, 0),
        ("owner", 0.20, 0),  # sixth place drops
        ("cat", 0.70, 2),
    ]
    bags = sp.select_objects(dets)
    assert len(bags) == 5
    assert bags[0] == ["dog", "ball", "bench", "park", "tree"]
    assert bags[2] == ["cat"]
    assert bags[4] == []


def test_golden_storyline_chain():
    sentences = [
        (["the", "dog", "chased", "the", "ball"], ["dog", "ball"],
         [("self_motion", "dog", "ball")]),
        (["the", "ball", "hit", "a", "tree"], ["ball", "tree"], []),
    ]
    hops, count = sp.golden_storyline(sentences)
    assert count == 2
    assert hops[0] == ("<s_0>", "empty_frame", "dog")
    assert ("dog", "self_motion", "ball") in hops
    assert ("ball", "empty_frame", "tree") in hops
    assert hops[-1] == ("tree", "empty_frame", "<s_2>")
    for prev, cur in zip(hops, hops[1:]):
        assert prev[2] == cur[0]
    assert sp.golden_invariants_hold(hops, count)
    assert not sp.golden_invariants_hold(hops[:-1], count)


def test_knowledge_graph_counts_and_merge():
    g1 = sp.KnowledgeGraph()
    g1.add("dog", "self_motion", "park")
    g1.add("dog", "self_motion", "park")  # dedup
    g1.add("park", "empty_frame", "bench")
    g2 = sp.KnowledgeGraph()
    g2.add("dog", "self_motion", "park")
    g2.add("cat", "placing", "dog")

    assert (g1.node_count(), g1.frame_count(), g1.edge_count()) == (3, 2, 2)
    merged = sp.merge(g1, g2)
    assert merged.edge_count() == 3
    assert merged.frame_count() == 3
    assert merged.outgoing("dog") == [("self_motion", "park")]
    assert merged.stats().startswith("nodes=4 relations=3 ")


def test_mtld_values_and_error():
    assert sp.mtld(["same"] * 10) == 2.0
    assert sp.mtld(["a", "b", "c", "a", "a", "a", "b", "a"]) > 0.0
    with pytest.raises(RuntimeError, match="zero diversity factors"):
        sp.mtld(["all", "tokens", "distinct"])


def test_reward_arithmetic():
    assert sp.reward(0.25) == 1.25
    assert sp.reward(0.5) == 1.0
    for p in (0.001, 0.42, 0.999):
        assert 0.5 < sp.reward(p) < 1.5
