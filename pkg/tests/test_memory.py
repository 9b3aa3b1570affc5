"""Fragment memory: retrieval order, duplicate refresh, eviction utility."""

from __future__ import annotations

import numpy as np
import pytest

from agentnet.backends import hash_embedding
from agentnet.errors import ConfigurationError, ShapeError
from agentnet.memory import (
    ROLE_EXECUTOR,
    ROLE_ROUTER,
    EvictionWeights,
    MemoryModule,
    embed_key,
)


def unit(*values: float) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    return vec / np.linalg.norm(vec)


def embedder(text: str) -> np.ndarray:
    return hash_embedding(text, dim=16)


def fill(module: MemoryModule, n: int, dim: int = 16) -> None:
    for i in range(n):
        module.insert(f"obs {i}", f"ctx {i}", f"act {i}", hash_embedding(f"frag {i}", dim=dim))


def test_module_validation():
    MemoryModule(ROLE_ROUTER)
    MemoryModule(ROLE_EXECUTOR, capacity=1)
    with pytest.raises(ConfigurationError):
        MemoryModule("other")
    with pytest.raises(ConfigurationError):
        MemoryModule(ROLE_ROUTER, capacity=0)
    with pytest.raises(ConfigurationError):
        EvictionWeights(freq=-0.1)
    with pytest.raises(ConfigurationError):
        EvictionWeights(freq=0.0, rec=0.0, uniq=0.0)


def test_embed_key_combines_observation_and_context():
    assert embed_key("obs", "ctx") == "obs\nctx"


def test_select_empty_store_skips_embedder():
    module = MemoryModule(ROLE_ROUTER)
    calls = []

    def counting(text: str) -> np.ndarray:
        calls.append(text)
        return np.ones(4)

    assert module.select("q", "", k=3, embedder=counting) == []
    assert calls == []


def test_select_orders_by_similarity():
    module = MemoryModule(ROLE_ROUTER, capacity=10)
    module.insert("east", "", "a", unit(1.0, 0.0))
    module.insert("north", "", "b", unit(0.0, 1.0))
    module.insert("northeast", "", "c", unit(1.0, 1.0))
    query = unit(1.0, 0.2)
    got = module.select("q", "", k=2, embedder=lambda _: query)
    assert [f.observation for f in got] == ["east", "northeast"]
    got_all = module.select("q", "", k=10, embedder=lambda _: query)
    assert [f.observation for f in got_all] == ["east", "northeast", "north"]


def test_select_breaks_ties_toward_older_fragment():
    module = MemoryModule(ROLE_ROUTER, capacity=10)
    same = unit(1.0, 0.0)
    module.insert("first", "", "a", same)
    module.insert("second", "", "b", same)
    got = module.select("q", "", k=1, embedder=lambda _: same)
    assert got[0].observation == "first"


def test_select_usage_accounting_and_frozen_mode():
    module = MemoryModule(ROLE_ROUTER, capacity=10)
    v = unit(1.0, 0.0)
    module.insert("obs", "", "act", v)
    frag = module.fragments[0]
    before = (frag.use_count, frag.last_used)
    module.select("q", "", k=1, embedder=lambda _: v, record_usage=False)
    assert (frag.use_count, frag.last_used) == before
    module.select("q", "", k=1, embedder=lambda _: v)
    assert frag.use_count == before[0] + 1
    assert frag.last_used > before[1]


def test_select_validates_inputs():
    module = MemoryModule(ROLE_ROUTER)
    with pytest.raises(ConfigurationError):
        module.select("q", "", k=0, embedder=lambda _: np.ones(2))
    module.insert("obs", "", "act", np.ones(4))
    with pytest.raises(ShapeError):
        module.select("q", "", k=1, embedder=lambda _: np.ones(3))


def test_insert_below_capacity_and_ids():
    module = MemoryModule(ROLE_EXECUTOR, capacity=3)
    r1 = module.insert("o1", "c", "a", unit(1.0, 0.0))
    r2 = module.insert("o2", "c", "a", unit(0.0, 1.0))
    assert r1.inserted is not None and r1.inserted.fragment_id == "exe-0"
    assert r2.inserted is not None and r2.inserted.fragment_id == "exe-1"
    assert len(module) == 2


def test_duplicate_triple_refreshes_instead_of_duplicating():
    module = MemoryModule(ROLE_ROUTER, capacity=5)
    module.insert("obs", "ctx", "act", unit(1.0, 0.0))
    result = module.insert("obs", "ctx", "act", unit(1.0, 0.0))
    assert result.refreshed is not None
    assert len(module) == 1
    assert module.fragments[0].use_count == 1
    # any differing field makes it a new fragment
    module.insert("obs", "ctx", "other act", unit(1.0, 0.0))
    assert len(module) == 2


def test_embedding_shape_must_match_store():
    module = MemoryModule(ROLE_ROUTER)
    module.insert("o", "c", "a", np.ones(4))
    with pytest.raises(ShapeError):
        module.insert("o2", "c", "a", np.ones(5))


def test_eviction_picks_lowest_utility():
    # near-duplicate pair: the unused copy has low uniqueness and no usage,
    # so it loses to both the used fragment and the distinct newcomer
    module = MemoryModule(ROLE_ROUTER, capacity=2)
    module.insert("used", "", "a", unit(1.0, 0.0, 0.0))
    module.insert("dup", "", "b", unit(1.0, 0.02, 0.0))
    module.select("q", "", k=1, embedder=lambda _: unit(1.0, 0.0, 0.0))  # bumps "used"
    result = module.insert("fresh", "", "c", unit(0.0, 0.0, 1.0))
    assert result.evicted is not None
    assert result.evicted.observation == "dup"
    assert sorted(f.observation for f in module.fragments) == ["fresh", "used"]


def test_candidate_itself_can_be_rejected():
    # store holds two orthogonal, recently used fragments; the candidate
    # duplicates one of them (uniqueness 0) with no usage history
    module = MemoryModule(ROLE_ROUTER, capacity=2)
    module.insert("a", "", "x", unit(1.0, 0.0))
    module.insert("b", "", "y", unit(0.0, 1.0))
    for _ in range(3):
        module.select("q", "", k=2, embedder=lambda _: unit(1.0, 1.0))
    result = module.insert("c", "", "z", unit(1.0, 0.0))
    assert result.rejected
    assert result.inserted is None
    assert sorted(f.observation for f in module.fragments) == ["a", "b"]


def test_eviction_judge_override_and_fallback():
    module = MemoryModule(ROLE_ROUTER, capacity=2)
    module.insert("keep0", "", "a", unit(1.0, 0.0))
    module.insert("target", "", "b", unit(0.0, 1.0))
    result = module.insert("new", "", "c", unit(1.0, 1.0), judge=lambda pool: 1)
    assert result.evicted is not None and result.evicted.observation == "target"
    # out-of-range judge answer falls back to the utility formula
    module2 = MemoryModule(ROLE_ROUTER, capacity=1)
    module2.insert("old", "", "a", unit(1.0, 0.0))
    result2 = module2.insert("new", "", "b", unit(0.0, 1.0), judge=lambda pool: 99)
    assert result2.rejected or result2.evicted is not None


def test_pool_utilities_hand_checked():
    # two orthogonal fragments, same clock state: uniqueness 1 each (max
    # cosine 0), recency 1 for the newer one
    module = MemoryModule(ROLE_ROUTER, capacity=5, weights=EvictionWeights(0.0, 0.0, 1.0))
    module.insert("a", "", "x", unit(1.0, 0.0))
    module.insert("b", "", "y", unit(0.0, 1.0))
    utils = module.pool_utilities(module.fragments, now=2)
    assert utils == [1.0, 1.0]
    # anti-correlated embeddings clamp at uniqueness 1, not above
    module2 = MemoryModule(ROLE_ROUTER, capacity=5, weights=EvictionWeights(0.0, 0.0, 1.0))
    module2.insert("a", "", "x", unit(1.0, 0.0))
    module2.insert("b", "", "y", unit(-1.0, 0.0))
    utils2 = module2.pool_utilities(module2.fragments, now=2)
    assert utils2 == [1.0, 1.0]


def test_capacity_invariant_randomized():
    rng = np.random.default_rng(7)
    for capacity in (1, 3, 8):
        module = MemoryModule(ROLE_EXECUTOR, capacity=capacity)
        for i in range(100):
            emb = rng.standard_normal(8)
            module.insert(f"obs {i}", "", f"act {i}", emb / np.linalg.norm(emb))
            assert len(module) <= capacity
            if rng.random() < 0.3:
                module.select("q", "", k=2, embedder=lambda _: rng.standard_normal(8))


def test_doc_round_trip_preserves_behavior():
    module = MemoryModule(ROLE_ROUTER, capacity=3)
    fill(module, 3)
    module.select("warm", "", k=2, embedder=embedder)
    doc = module.to_doc()
    clone = MemoryModule.from_doc(doc)
    assert clone.to_doc() == doc
    # both sides retrieve and evict identically afterward
    emb = hash_embedding("incoming", dim=16)
    a = module.insert("new obs", "", "new act", emb)
    b = clone.insert("new obs", "", "new act", emb)
    assert (a.rejected, a.evicted is None) == (b.rejected, b.evicted is None)
    if a.evicted is not None:
        assert a.evicted.fragment_id == b.evicted.fragment_id
    assert module.to_doc() == clone.to_doc()
    with pytest.raises(ConfigurationError):
        MemoryModule.from_doc({"role": ROLE_ROUTER})
