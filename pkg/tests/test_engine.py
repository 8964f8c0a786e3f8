import pytest

from cogmem.embedding import EmbedderConfig, HashingEmbedder
from cogmem.engine import MemoryEngine
from cogmem.params import HyperParams


def _engine(**overrides):
    defaults = {"consolidation_n": 5}
    defaults.update(overrides)
    return MemoryEngine(params=HyperParams(**defaults))


JACKET_TURNS = [
    ("my jacket is green", "green suits you"),
    ("i wore the jacket downtown", "sounds stylish"),
    ("the jacket kept me warm", "good jacket"),
    ("i bought the jacket on sale", "lucky find"),
    ("the jacket has deep pockets", "useful"),
]


def test_auto_consolidation_cadence():
    engine = _engine()
    for i in range(10):
        engine.append(f"turn number {i} about ordinary things", "reply")
    stats = engine.stats()
    assert stats["turns_ingested"] == 10
    assert stats["consolidations"] == 2


def test_auto_consolidation_can_be_disabled():
    engine = MemoryEngine(params=HyperParams(consolidation_n=2),
                          auto_consolidate=False)
    for i in range(6):
        engine.append(f"turn {i}", "reply")
    assert engine.stats()["consolidations"] == 0


def test_default_timestamps_are_turn_indices():
    engine = _engine()
    engine.append("first", "one")
    engine.append("second", "two")
    stamps = [engine.graph.episodic[i].timestamp
              for i in engine.graph.episodic_ids()]
    assert stamps == [0.0, 1.0]


def test_explicit_timestamps_respected():
    engine = _engine()
    engine.append("first", "one", timestamp=100.0)
    engine.append("second", "two", timestamp=160.0)
    stamps = [engine.graph.episodic[i].timestamp
              for i in engine.graph.episodic_ids()]
    assert stamps == [100.0, 160.0]


def test_query_peaks_feed_dormancy():
    engine = _engine()
    for user, reply in JACKET_TURNS[:4]:
        engine.append(user, reply)
    engine.query("is my jacket green")
    assert engine.window_peaks  # peaks recorded for the window
    engine.append(*JACKET_TURNS[4])  # 5th turn triggers consolidation
    assert engine.window_peaks == {}  # folded and cleared
    streaks = {i: engine.graph.node(i).dormancy_streak
               for i in engine.graph.node_ids()}
    # The activated jacket chain stays fresh; anything untouched ages.
    assert any(streak == 0 for streak in streaks.values())


def test_unqueried_nodes_age_and_compact_archives():
    engine = _engine(consolidation_n=1, dormancy_w=3)
    for i in range(4):
        engine.append(f"forgettable moment {i}", "ok")
    # Four consolidations passed with no queries: every node aged past W.
    outcome = engine.compact()
    assert outcome["archived_nodes"]
    for node_id in outcome["archived_nodes"]:
        assert node_id in engine.graph.archive
    # Archived nodes left the lexical index too.
    assert engine.lexical.doc_count == engine.graph.live_count


def test_restore_reindexes():
    engine = _engine(consolidation_n=1, dormancy_w=2)
    engine.append("memorable green jacket story", "nice")
    engine.append("another quiet day", "ok")
    engine.append("a third entry", "ok")
    archived = engine.compact()["archived_nodes"]
    assert archived
    before = engine.lexical.doc_count
    engine.restore(archived)
    assert engine.lexical.doc_count == before + len(archived)
    assert engine.graph.archive == {}


def test_prior_refreshes_on_consolidation_cadence():
    engine = _engine(consolidation_n=2)
    engine.append("one", "a")
    assert engine.prior.computed_at == 0
    engine.append("two", "b")
    assert engine.prior.computed_at == 1
    assert engine.prior.scores  # non-empty after first refresh


def test_embedder_dimension_mismatch_rejected():
    with pytest.raises(ValueError, match="dimension"):
        MemoryEngine(params=HyperParams(embed_dim=384),
                     embedder=HashingEmbedder(EmbedderConfig(dimension=64)))


def test_failed_consolidation_leaves_engine_untouched():
    class Exploder:
        def extract(self, turns):
            raise RuntimeError("nope")

    engine = MemoryEngine(params=HyperParams(consolidation_n=5),
                          extractor=Exploder())
    for i in range(4):
        engine.append(f"turn {i} with Kendall", "ok")
    engine.query("kendall")
    peaks_before = dict(engine.window_peaks)
    fingerprint = engine.graph.fingerprint()
    report = engine.consolidate()
    assert not report.ok
    assert engine.graph.fingerprint() == fingerprint
    assert engine.window_peaks == peaks_before
    assert engine.prior.computed_at == 0
