from __future__ import annotations

import json
import logging
from pathlib import Path

import pytest

from cgec_kit import (
    AuthenticationError,
    ConfigurationError,
    ErrorType,
    GenerationRequest,
    PairSource,
    TransportError,
    ValidationError,
    build_prompt,
    cached_generate,
    complete_chat,
    generate_many,
    parse_sentences,
    validate_generated,
)
from cgec_kit.llm import cache_key


def rc_request(n: int = 5, **kwargs) -> GenerationRequest:
    prompt = build_prompt(ErrorType.RC, ("超过", "左右"), n)
    return GenerationRequest(prompt=prompt, model_name="stub-model", **kwargs)


class TestParseSentences:
    def test_numbered_dot(self):
        assert parse_sentences("1. 句子A\n2. 句子B") == ("句子A", "句子B")

    def test_numbered_chinese_comma(self):
        assert parse_sentences("1、句子A\n2、句子B") == ("句子A", "句子B")

    def test_bare_lines(self):
        assert parse_sentences("句子A\n句子B\n") == ("句子A", "句子B")

    def test_dedup_and_blank_removal(self):
        assert parse_sentences("1. 甲\n\n2. 甲\n3. 乙") == ("甲", "乙")

    def test_whitespace_only(self):
        assert parse_sentences("  \n\t\n") == ()


class TestRequestValidation:
    def test_bad_temperature(self):
        with pytest.raises(ValidationError):
            rc_request(temperature=-0.1)

    def test_bad_max_tokens(self):
        with pytest.raises(ValidationError):
            rc_request(max_tokens=0)


class TestCompleteChat:
    def test_parses_stub_reply(self, chat_stub):
        stub = chat_stub(content="1. 句子A\n2. 句子B")
        result = complete_chat(rc_request(), stub.endpoint, "key", backoff_base=0.0)
        assert result.parsed_sentences == ("句子A", "句子B")
        assert result.cache_hit is False
        assert result.attempts == 1
        assert stub.auth_headers == ["Bearer key"]

    def test_retry_then_succeed(self, chat_stub):
        stub = chat_stub(script=[(500, "boom"), (500, "boom"), (200, "1. 句子A")])
        result = complete_chat(rc_request(), stub.endpoint, "key", backoff_base=0.0)
        assert result.attempts == 3
        assert stub.total_requests == 3
        assert result.parsed_sentences == ("句子A",)

    def test_exhausted_retries(self, chat_stub):
        stub = chat_stub(script=[(503, "down")] * 10)
        with pytest.raises(TransportError, match="5 attempts"):
            complete_chat(rc_request(), stub.endpoint, "key", backoff_base=0.0)
        assert stub.total_requests == 5

    def test_auth_failure_not_retried(self, chat_stub):
        stub = chat_stub(script=[(401, "who are you")])
        with pytest.raises(AuthenticationError):
            complete_chat(rc_request(), stub.endpoint, "bad-key", backoff_base=0.0)
        assert stub.total_requests == 1

    def test_missing_credentials_no_network(self, chat_stub):
        stub = chat_stub()
        with pytest.raises(ConfigurationError):
            complete_chat(rc_request(), stub.endpoint, None)
        with pytest.raises(ConfigurationError):
            complete_chat(rc_request(), stub.endpoint, "")
        assert stub.total_requests == 0

    def test_malformed_body(self, chat_stub):
        stub = chat_stub(script=[(200, b"this is not json")])
        with pytest.raises(TransportError, match="malformed"):
            complete_chat(rc_request(), stub.endpoint, "key", backoff_base=0.0)

    def test_unparseable_reply_preserves_raw(self, chat_stub, caplog):
        stub = chat_stub(content="   \n  ")
        with caplog.at_level(logging.WARNING):
            result = complete_chat(rc_request(), stub.endpoint, "key", backoff_base=0.0)
        assert result.parsed_sentences == ()
        assert result.raw_text == "   \n  "
        assert "no parseable" in caplog.text


class TestCachedGenerate:
    def test_second_call_hits_cache(self, chat_stub, tmp_path):
        stub = chat_stub(content="1. 句子A")
        cache_dir = str(tmp_path / "cache")
        first = cached_generate(rc_request(), stub.endpoint, "key", cache_dir)
        second = cached_generate(rc_request(), stub.endpoint, "key", cache_dir)
        assert first.cache_hit is False
        assert second.cache_hit is True
        assert second.parsed_sentences == first.parsed_sentences
        assert stub.total_requests == 1

    def test_changed_temperature_misses(self, chat_stub, tmp_path):
        stub = chat_stub()
        cache_dir = str(tmp_path / "cache")
        cached_generate(rc_request(temperature=0.2), stub.endpoint, "key", cache_dir)
        cached_generate(rc_request(temperature=0.9), stub.endpoint, "key", cache_dir)
        assert stub.total_requests == 2
        assert cache_key(rc_request(temperature=0.2)) != cache_key(rc_request(temperature=0.9))

    def test_deleted_entry_regenerated(self, chat_stub, tmp_path):
        stub = chat_stub()
        cache_dir = tmp_path / "cache"
        cached_generate(rc_request(), stub.endpoint, "key", str(cache_dir))
        for entry in cache_dir.iterdir():
            entry.unlink()
        result = cached_generate(rc_request(), stub.endpoint, "key", str(cache_dir))
        assert result.cache_hit is False
        assert stub.total_requests == 2

    def test_corrupt_entry_overwritten(self, chat_stub, tmp_path, caplog):
        stub = chat_stub()
        cache_dir = tmp_path / "cache"
        cached_generate(rc_request(), stub.endpoint, "key", str(cache_dir))
        entry = next(cache_dir.iterdir())
        entry.write_text("{ not json", encoding="utf-8")
        with caplog.at_level(logging.WARNING):
            result = cached_generate(rc_request(), stub.endpoint, "key", str(cache_dir))
        assert result.cache_hit is False
        assert "corrupt cache entry" in caplog.text
        assert json.loads(entry.read_text(encoding="utf-8"))["raw_text"]

    def test_warm_cache_needs_no_credentials(self, chat_stub, tmp_path):
        stub = chat_stub()
        cache_dir = str(tmp_path / "cache")
        cached_generate(rc_request(), stub.endpoint, "key", cache_dir)
        result = cached_generate(rc_request(), stub.endpoint, None, cache_dir)
        assert result.cache_hit is True


class TestGenerateMany:
    def test_bounded_concurrency(self, chat_stub, tmp_path):
        stub = chat_stub(content="1. 句子A", delay=0.15)
        requests_batch = [rc_request(n) for n in range(1, 9)]  # distinct cache keys
        results = generate_many(
            requests_batch,
            stub.endpoint,
            "key",
            str(tmp_path / "cache"),
            max_concurrency=3,
            backoff_base=0.0,
        )
        assert len(results) == 8
        assert stub.total_requests == 8
        assert stub.max_in_flight <= 3

    def test_results_keep_input_order(self, chat_stub, tmp_path):
        stub = chat_stub()
        requests_batch = [rc_request(n) for n in (3, 1, 2)]
        results = generate_many(
            requests_batch, stub.endpoint, "key", str(tmp_path / "cache"), max_concurrency=2
        )
        assert [r.cache_hit for r in results] == [False, False, False]
        # warm second pass returns hits in the same order
        warm = generate_many(
            requests_batch, stub.endpoint, "key", str(tmp_path / "cache"), max_concurrency=2
        )
        assert [r.cache_hit for r in warm] == [True, True, True]


class TestValidateGenerated:
    def test_example_sentence_repaired(self):
        sentence = "这座卫星城的人口估计超过一百万左右。"
        pairs = validate_generated([sentence], ("超过", "左右"))
        assert len(pairs) == 1
        assert pairs[0].ungrammatical == sentence
        assert pairs[0].grammatical == "这座卫星城的人口估计超过一百万。"
        assert "左右" not in pairs[0].grammatical
        assert pairs[0].source is PairSource.LLM_GENERATED
        assert pairs[0].error_type is ErrorType.RC

    def test_missing_clue_discarded(self):
        assert validate_generated(["人口超过一百万。"], ("超过", "左右")) == []

    def test_repair_noop_discarded(self):
        # both clues present but not in the rule's pattern shape
        assert validate_generated(["左右人口超过了。"], ("超过", "左右")) == []

    def test_duplicates_collapse(self):
        sentence = "人口超过一百万左右。"
        pairs = validate_generated([sentence, sentence], ("超过", "左右"))
        assert len(pairs) == 1

    def test_unknown_clue_pair_rejected(self):
        with pytest.raises(ValidationError, match="no repair rule"):
            validate_generated(["whatever"], ("东", "西"))

    def test_pairs_pass_round_trip(self):
        sentences = [
            "今年报名人数超过两千左右。",
            "预算超过五百万左右引发讨论。",
        ]
        pairs = validate_generated(sentences, ("超过", "左右"))
        assert len(pairs) == 2
        for pair in pairs:
            assert "超过" in pair.ungrammatical and "左右" in pair.ungrammatical
            assert pair.grammatical != pair.ungrammatical
