import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capforge.curation import CuratedSet, StrategySpec
from capforge.errors import DomainError
from capforge.textmetrics import (
    default_noun_lexicon,
    default_visual_vocab,
    diversity_curve,
    entry_caption,
    grounding_ratio,
    load_token_file,
    sample_subset,
    tokenize,
    unique_nouns,
    unique_trigrams,
    word_count,
)
from helpers import RAW, oracle_trigrams


def test_tokenize_paper_caption():
    assert tokenize("Italien - Ligurien") == ["italien", "ligurien"]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_punctuation_and_digits():
    assert tokenize("C240 sedan, Leather!") == ["c240", "sedan", "leather"]


def test_tokenize_unicode_nfc():
    # decomposed e + combining acute normalizes, then drops to separator
    assert tokenize("café dog") == ["caf", "dog"]
    assert tokenize("Ünal") == ["nal"]


@given(st.text(max_size=60))
@settings(max_examples=200, deadline=None)
def test_tokenize_idempotent_on_own_output(text):
    tokens = tokenize(text)
    assert tokenize(" ".join(tokens)) == tokens


def test_word_count_examples():
    assert word_count("") == 0
    assert word_count("a white button with the word more info") == 8
    assert word_count("single") == 1


def test_grounding_ratio_examples():
    assert grounding_ratio("a red dog runs", {"dog", "red"}) == pytest.approx(0.5)
    assert grounding_ratio("dog red", {"dog", "red"}) == 1.0
    assert grounding_ratio("", {"dog"}) == 0.0
    with pytest.raises(DomainError):
        grounding_ratio("x", set())


def test_unique_trigrams_examples():
    assert unique_trigrams(["a b c d"]) == 2
    assert unique_trigrams(["a b"]) == 0
    assert unique_trigrams(["a b c", "a b c"]) == 1


def test_unique_trigrams_matches_bruteforce_oracle():
    rng = np.random.default_rng(0)
    words = [f"w{i}" for i in range(30)]
    captions = [
        " ".join(rng.choice(words, size=rng.integers(0, 9)))
        for _ in range(400)
    ]
    assert unique_trigrams(captions) == oracle_trigrams(captions, tokenize)


def test_unique_trigrams_union_monotone():
    rng = np.random.default_rng(1)
    words = [f"w{i}" for i in range(12)]
    captions = [" ".join(rng.choice(words, size=5)) for _ in range(120)]
    for _ in range(20):
        cut = int(rng.integers(1, len(captions)))
        a, b = captions[:cut], captions[cut:]
        whole = unique_trigrams(captions)
        assert whole >= max(unique_trigrams(a), unique_trigrams(b))


def test_unique_nouns_examples():
    lex = {"dog", "cat"}
    assert unique_nouns(["dog cat dog"], lex) == 2
    assert unique_nouns(["xyz"], lex) == 0
    assert unique_nouns(["dog here", "there cat"], lex) == 2
    with pytest.raises(DomainError):
        unique_nouns(["x"], set())


def test_metrics_order_independent():
    rng = np.random.default_rng(9)
    words = [f"w{i}" for i in range(15)]
    captions = [" ".join(rng.choice(words, size=6)) for _ in range(80)]
    lex = set(words[:7])
    shuffled = list(reversed(captions))
    assert unique_trigrams(captions) == unique_trigrams(shuffled)
    assert unique_nouns(captions, lex) == unique_nouns(shuffled, lex)


# ---------------------------------------------------------------------------
# sampling


def _curated(n):
    return CuratedSet(
        entries=[(i, RAW) for i in range(n)], spec=StrategySpec("raw_all")
    )


def test_sample_subset_full_is_identity():
    c = _curated(20)
    assert sample_subset(c, 20, seed=3).entries == c.entries


def test_sample_subset_empty():
    assert sample_subset(_curated(5), 0, seed=0).entries == []


def test_sample_subset_deterministic_and_sorted():
    c = _curated(50)
    a = sample_subset(c, 10, seed=7)
    b = sample_subset(c, 10, seed=7)
    assert a.entries == b.entries
    assert a.entries == sorted(a.entries)
    assert sample_subset(c, 10, seed=8).entries != a.entries


def test_sample_subset_out_of_range():
    with pytest.raises(DomainError):
        sample_subset(_curated(3), 4, seed=0)


def test_sample_subset_uniformity_smoke():
    # every entry should appear at roughly the expected frequency
    c = _curated(10)
    counts = np.zeros(10)
    for seed in range(300):
        for i, _ in sample_subset(c, 5, seed=seed).entries:
            counts[i] += 1
    assert counts.min() > 0.5 * 150
    assert counts.max() < 1.5 * 150


# ---------------------------------------------------------------------------
# diversity curves


def test_entry_caption_resolution(gen_pool):
    rec = gen_pool.record(3)
    assert entry_caption(gen_pool, (rec.id, RAW)) == rec.raw_caption
    assert entry_caption(gen_pool, (rec.id, 1)) == rec.synthetic_variants[1].text


def test_diversity_curve_full_size_matches_whole_set(gen_pool):
    lexicon = default_noun_lexicon()
    entries = [(r.id, RAW) for r in gen_pool.records()[:400]]
    curated = CuratedSet(entries=entries, spec=StrategySpec("raw_all"))
    points = diversity_curve(gen_pool, curated, [400], seed=0, noun_lexicon=lexicon)
    captions = [entry_caption(gen_pool, e) for e in curated.entries]
    assert points[0].unique_trigrams == unique_trigrams(captions)
    assert points[0].unique_nouns == unique_nouns(captions, lexicon)


def test_diversity_curve_nested_and_monotone(gen_pool):
    lexicon = default_noun_lexicon()
    entries = [(r.id, RAW) for r in gen_pool.records()]
    curated = CuratedSet(entries=entries, spec=StrategySpec("raw_all"))
    sizes = [100, 500, 1000, 3000]
    points = diversity_curve(gen_pool, curated, sizes, seed=1, noun_lexicon=lexicon)
    assert [p.subset_size for p in points] == sizes
    for a, b in zip(points, points[1:]):
        assert b.unique_trigrams >= a.unique_trigrams
        assert b.unique_nouns >= a.unique_nouns


def test_diversity_curve_syn_below_raw_at_every_size(tmp_path):
    from capforge.pool import open_pool
    from capforge.poolgen import GenConfig, SynSource, generate_pool

    config = GenConfig(
        num_records=4000,
        seed=13,
        records_per_shard=1000,
        syn_sources=[SynSource("blip2", 0.75, 0.5)],
    )
    generate_pool(config, tmp_path)
    handle = open_pool(tmp_path)
    lexicon = default_noun_lexicon()
    raw = CuratedSet(
        entries=[(r.id, RAW) for r in handle.records()], spec=StrategySpec("raw_all")
    )
    syn = CuratedSet(
        entries=[(r.id, 0) for r in handle.records()],
        spec=StrategySpec("syn_all", syn_source="blip2"),
    )
    sizes = [100, 400, 1000, 2500, 4000]
    raw_pts = diversity_curve(handle, raw, sizes, seed=2, noun_lexicon=lexicon)
    syn_pts = diversity_curve(handle, syn, sizes, seed=2, noun_lexicon=lexicon)
    for rp, sp in zip(raw_pts, syn_pts):
        assert sp.unique_trigrams < rp.unique_trigrams, rp.subset_size
        assert sp.unique_nouns < rp.unique_nouns, rp.subset_size


def test_diversity_curve_validation(gen_pool):
    curated = CuratedSet(
        entries=[(r.id, RAW) for r in gen_pool.records()[:10]],
        spec=StrategySpec("raw_all"),
    )
    lexicon = {"dog"}
    with pytest.raises(DomainError):
        diversity_curve(gen_pool, curated, [5, 5], seed=0, noun_lexicon=lexicon)
    with pytest.raises(DomainError):
        diversity_curve(gen_pool, curated, [4, 11], seed=0, noun_lexicon=lexicon)
    assert diversity_curve(gen_pool, curated, [], seed=0, noun_lexicon=lexicon) == []


# ---------------------------------------------------------------------------
# vocabulary files


def test_load_token_file(tmp_path):
    path = tmp_path / "vocab.txt"
    path.write_text("# comment\ndog\n\ncat\n")
    assert load_token_file(path) == {"dog", "cat"}


def test_default_files_load():
    vocab = default_visual_vocab()
    lexicon = default_noun_lexicon()
    assert "dog" in vocab and "red" in vocab
    assert len(vocab) > 300
    assert "dog" in lexicon
    assert len(lexicon) == 4000
