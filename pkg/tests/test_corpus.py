"""Corpus ingestion rules: extraction, filtering, stats, splits."""

import json

import numpy as np
import pytest

from segtag.corpus import (
    CorpusStats,
    ExtractionError,
    PostRecord,
    corpus_stats,
    coverage_95,
    extract_hashtags,
    filter_records,
    load_raw_records,
    read_records,
    render_post,
    split_corpus,
    stats_table,
    write_records,
)
from segtag.tokenizer import tokenize_text


def word_tok(s):
    return tokenize_text(s, "word")


class TestTwitterExtraction:
    def test_trailing_only(self):
        assert extract_hashtags("text text #tag1 #tag2", "twitter") == (
            "text text",
            ["tag1", "tag2"],
        )

    def test_middle_tag_stays_in_body(self):
        assert extract_hashtags("a #mid b #end", "twitter") == ("a #mid b", ["end"])

    def test_no_tags(self):
        assert extract_hashtags("no tags here", "twitter") == ("no tags here", [])

    def test_leading_tags(self):
        assert extract_hashtags("#news #live quake hits town", "twitter") == (
            "quake hits town",
            ["news", "live"],
        )

    def test_bare_hash_is_not_a_tag(self):
        body, tags = extract_hashtags("some text #", "twitter")
        assert tags == []
        assert "#" in body

    def test_order_is_leading_then_trailing(self):
        body, tags = extract_hashtags("#a body words #b #c", "twitter")
        assert body == "body words"
        assert tags == ["a", "b", "c"]


class TestWeiboExtraction:
    def test_trailing_pair_span(self):
        assert extract_hashtags("今天天气很好 #天气#", "weibo") == ("今天天气很好", ["天气"])

    def test_leading_and_trailing(self):
        body, tags = extract_hashtags("#头条#正文内容在此#尾巴#", "weibo")
        assert body == "正文内容在此"
        assert tags == ["头条", "尾巴"]

    def test_middle_span_stays(self):
        body, tags = extract_hashtags("前文 #中间# 后文 #结尾#", "weibo")
        assert body == "前文 #中间# 后文"
        assert tags == ["结尾"]

    def test_unterminated_marking_raises(self):
        with pytest.raises(ExtractionError, match="unterminated"):
            extract_hashtags("正文 #断掉的", "weibo")

    def test_no_tags(self):
        assert extract_hashtags("没有标签", "weibo") == ("没有标签", [])


class TestRoundTrip:
    """extract(render(body, tags)) recovers boundary-only records."""

    @pytest.mark.parametrize("style", ["twitter", "weibo"])
    def test_random_records(self, style):
        rng = np.random.default_rng(17)
        words = [f"w{i}" for i in range(30)]
        for _ in range(100):
            body = " ".join(rng.choice(words, size=rng.integers(3, 12)))
            n_tags = int(rng.integers(1, 4))
            if style == "twitter":
                tags = [str(rng.choice(words)) for _ in range(n_tags)]
            else:
                tags = [" ".join(rng.choice(words, size=rng.integers(1, 3))) for _ in range(n_tags)]
            raw = render_post(body, tags, style)
            got_body, got_tags = extract_hashtags(raw, style)
            assert got_body == body
            assert got_tags == tags


class TestFilter:
    def test_char_length_boundary(self):
        recs = [
            PostRecord("x" * 59, ["a"], "1"),
            PostRecord("y" * 61, ["b"], "2"),
        ]
        kept = filter_records(recs, 60)
        assert [r.source_id for r in kept] == ["2"]

    def test_exact_duplicates_removed(self):
        rec = PostRecord("body text", ["tag"], "1")
        dup = PostRecord("body text", ["tag"], "2")
        assert len(filter_records([rec, dup], 0)) == 1

    def test_empty_input(self):
        assert filter_records([], 10) == []

    def test_records_without_tags_dropped(self):
        assert filter_records([PostRecord("long enough body", [], "1")], 0) == []

    def test_idempotent(self):
        rng = np.random.default_rng(23)
        recs = [
            PostRecord("b" * int(rng.integers(1, 100)), [f"t{rng.integers(3)}"], str(i))
            for i in range(50)
        ]
        once = filter_records(recs, 40)
        twice = filter_records(once, 40)
        assert [r.key() for r in once] == [r.key() for r in twice]


class TestStats:
    def test_avg_source_len(self):
        recs = [PostRecord("a b c d", ["t"], "1"), PostRecord("a b c d e f", ["t"], "2")]
        stats = corpus_stats(recs, word_tok)
        assert stats.avg_source_len == 5.0

    def test_coverage_over_1_to_100(self):
        # brute-force oracle: smallest L with >= 95% of lengths <= L
        lengths = list(range(1, 101))
        brute = min(L for L in lengths if sum(x <= L for x in lengths) / len(lengths) >= 0.95)
        assert brute == 95
        assert coverage_95(lengths) == brute

    def test_coverage_matches_brute_force_on_random_lists(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            lengths = [int(x) for x in rng.integers(1, 60, size=rng.integers(1, 40))]
            brute = min(
                L for L in sorted(set(lengths))
                if sum(x <= L for x in lengths) / len(lengths) >= 0.95
            )
            assert coverage_95(lengths) == brute
            covered = sum(x <= coverage_95(lengths) for x in lengths) / len(lengths)
            assert covered >= 0.95

    def test_avg_hashtags(self):
        recs = [
            PostRecord("a", ["1", "2", "3", "4"], "1"),
            PostRecord("b", ["1", "2"], "2"),
        ]
        assert corpus_stats(recs, word_tok).avg_hashtags == 3.0

    def test_empty_corpus_raises(self):
        with pytest.raises(ValueError, match="empty"):
            corpus_stats([], word_tok)

    def test_table_render(self):
        recs = [PostRecord("a b", ["t"], "1")]
        table = stats_table(corpus_stats(recs, word_tok))
        assert "avg hashtags" in table


class TestSplit:
    def _records(self, n):
        return [PostRecord(f"body {i}", [f"t{i}"], str(i)) for i in range(n)]

    def test_sizes(self):
        train, dev, test = split_corpus(self._records(10), (0.8, 0.1, 0.1), seed=7)
        assert (len(train), len(dev), len(test)) == (8, 1, 1)

    def test_same_seed_identical(self):
        recs = self._records(23)
        a = split_corpus(recs, (0.7, 0.2, 0.1), seed=5)
        b = split_corpus(recs, (0.7, 0.2, 0.1), seed=5)
        for pa, pb in zip(a, b):
            assert [r.source_id for r in pa] == [r.source_id for r in pb]

    def test_invalid_ratios(self):
        with pytest.raises(ValueError, match="ratios"):
            split_corpus(self._records(4), (0.5, 0.6, 0.1), seed=1)

    def test_partitions_disjoint_and_cover(self):
        recs = self._records(37)
        train, dev, test = split_corpus(recs, (0.6, 0.2, 0.2), seed=3)
        ids = [r.source_id for part in (train, dev, test) for r in part]
        assert sorted(ids) == sorted(r.source_id for r in recs)
        assert len(set(ids)) == len(ids)


class TestJsonlIO:
    def test_load_extracts_and_reports(self, tmp_path):
        path = tmp_path / "raw.jsonl"
        lines = [
            {"post": "good text here #tag"},
            {"post": "no tags at all"},
            {"post": "pre-split body", "hashtags": ["x", "y"]},
            "not json",
        ]
        with open(path, "w") as fh:
            for obj in lines:
                fh.write((json.dumps(obj) if isinstance(obj, dict) else obj) + "\n")
        records, diagnostics = load_raw_records(path, "twitter")
        assert [r.hashtags for r in records] == [["tag"], ["x", "y"]]
        assert len(diagnostics) == 2  # no-tag line and the unparsable line

    def test_presplit_tags_are_sanitized(self, tmp_path):
        path = tmp_path / "raw.jsonl"
        path.write_text(json.dumps({"post": "body", "hashtags": ["#inner#", "  ", "ok"]}) + "\n")
        records, _ = load_raw_records(path, "twitter")
        assert records[0].hashtags == ["inner", "ok"]

    def test_write_read_round_trip(self, tmp_path):
        recs = [PostRecord("some body", ["a", "b c"], "id9")]
        write_records(tmp_path / "out.jsonl", recs)
        back = read_records(tmp_path / "out.jsonl")
        assert back[0].key() == recs[0].key()
        assert back[0].source_id == "id9"
