"""Data model and strict JSON round-trip tests."""

import json

import pytest
from hypothesis import given, strategies as st

from tupex.corpus import (
    AnnotatedSentence,
    CorpusError,
    Dataset,
    EntitySpan,
    EntityType,
    TupleRecord,
    parse_dataset,
    serialize_dataset,
    split_by_tuple_count,
    stats,
    train_val_split,
)


def span(etype, start, end, text):
    return EntitySpan(etype, start, end, text)


def simple_sentence(sid="s-0"):
    text = "CoCr shows hardness of 450 HV."
    rec = TupleRecord(
        span(EntityType.MATERIAL, 0, 4, "CoCr"),
        span(EntityType.PROPERTY, 11, 19, "hardness"),
        span(EntityType.PROPERTY_VALUE, 23, 29, "450 HV"),
    )
    return AnnotatedSentence(sid, text, (rec,))


def conditioned_sentence(sid="s-1"):
    text = "CoCr shows hardness of 450 HV at a temperature of RT."
    rec = TupleRecord(
        span(EntityType.MATERIAL, 0, 4, "CoCr"),
        span(EntityType.PROPERTY, 11, 19, "hardness"),
        span(EntityType.PROPERTY_VALUE, 23, 29, "450 HV"),
        span(EntityType.CONDITION, 35, 46, "temperature"),
        span(EntityType.CONDITION_VALUE, 50, 52, "RT"),
    )
    return AnnotatedSentence(sid, text, (rec,))


class TestModel:
    def test_span_rejects_bad_offsets(self):
        with pytest.raises(CorpusError):
            EntitySpan(EntityType.MATERIAL, -1, 3, "abc")
        with pytest.raises(CorpusError):
            EntitySpan(EntityType.MATERIAL, 3, 3, "")
        with pytest.raises(CorpusError):
            EntitySpan(EntityType.MATERIAL, 5, 2, "x")

    def test_span_rejects_non_integer_offsets(self):
        with pytest.raises(CorpusError):
            EntitySpan(EntityType.MATERIAL, 0.0, 3, "abc")

    def test_condition_value_requires_condition(self):
        with pytest.raises(CorpusError, match="condition_value"):
            TupleRecord(
                span(EntityType.MATERIAL, 0, 4, "CoCr"),
                span(EntityType.PROPERTY, 11, 19, "hardness"),
                span(EntityType.PROPERTY_VALUE, 23, 29, "450 HV"),
                None,
                span(EntityType.CONDITION_VALUE, 50, 52, "RT"),
            )

    def test_condition_alone_is_fine(self):
        rec = TupleRecord(
            span(EntityType.MATERIAL, 0, 4, "CoCr"),
            span(EntityType.PROPERTY, 11, 19, "hardness"),
            span(EntityType.PROPERTY_VALUE, 23, 29, "450 HV"),
            span(EntityType.CONDITION, 35, 46, "temperature"),
        )
        assert rec.condition_value is None

    def test_slot_type_mismatch_rejected(self):
        with pytest.raises(CorpusError, match="slot material"):
            TupleRecord(
                span(EntityType.PROPERTY, 0, 4, "CoCr"),
                span(EntityType.PROPERTY, 11, 19, "hardness"),
                span(EntityType.PROPERTY_VALUE, 23, 29, "450 HV"),
            )

    def test_sentence_rejects_span_text_mismatch(self):
        with pytest.raises(CorpusError, match="does not"):
            AnnotatedSentence(
                "bad",
                "CoCr shows hardness of 450 HV.",
                (
                    TupleRecord(
                        span(EntityType.MATERIAL, 0, 4, "XXXX"),
                        span(EntityType.PROPERTY, 11, 19, "hardness"),
                        span(EntityType.PROPERTY_VALUE, 23, 29, "450 HV"),
                    ),
                ),
            )

    def test_sentence_rejects_span_past_end(self):
        with pytest.raises(CorpusError, match="exceeds"):
            AnnotatedSentence(
                "bad",
                "CoCr",
                (
                    TupleRecord(
                        span(EntityType.MATERIAL, 0, 99, "CoCr" + "x" * 95),
                        span(EntityType.PROPERTY, 0, 4, "CoCr"),
                        span(EntityType.PROPERTY_VALUE, 0, 4, "CoCr"),
                    ),
                ),
            )

    def test_dataset_rejects_duplicate_ids(self):
        with pytest.raises(CorpusError, match="duplicate"):
            Dataset((simple_sentence("same"), simple_sentence("same")))

    def test_offsets_are_code_points(self):
        # A two-code-point prefix shifts offsets by 2, not by its UTF-8 length.
        text = "σ: CoCr shows hardness of 450 HV."
        rec = TupleRecord(
            span(EntityType.MATERIAL, 3, 7, "CoCr"),
            span(EntityType.PROPERTY, 14, 22, "hardness"),
            span(EntityType.PROPERTY_VALUE, 26, 32, "450 HV"),
        )
        s = AnnotatedSentence("uni", text, (rec,))
        assert parse_dataset(serialize_dataset(Dataset((s,)))) == Dataset((s,))


class TestSerialization:
    def test_empty_dataset_bytes(self):
        assert serialize_dataset(Dataset()) == b'{"sentences":[]}'

    def test_round_trip(self):
        ds = Dataset((simple_sentence(), conditioned_sentence()))
        assert parse_dataset(serialize_dataset(ds)) == ds

    def test_round_trip_is_byte_stable(self):
        ds = Dataset((conditioned_sentence(),))
        raw = serialize_dataset(ds)
        assert serialize_dataset(parse_dataset(raw)) == raw

    def test_no_trailing_newline_and_sorted_keys(self):
        raw = serialize_dataset(Dataset((conditioned_sentence(),)))
        assert not raw.endswith(b"\n")
        doc = json.loads(raw)
        tup = doc["sentences"][0]["tuples"][0]
        assert list(tup) == sorted(tup)

    def test_non_ascii_not_escaped(self):
        text = "σ test σ CoCr shows hardness of 450 HV."
        rec = TupleRecord(
            span(EntityType.MATERIAL, 9, 13, "CoCr"),
            span(EntityType.PROPERTY, 20, 28, "hardness"),
            span(EntityType.PROPERTY_VALUE, 32, 38, "450 HV"),
        )
        raw = serialize_dataset(Dataset((AnnotatedSentence("u", text, (rec,)),)))
        assert "σ".encode() in raw
        assert b"\\u03c3" not in raw

    def test_optional_slots_serialize_as_null(self):
        raw = serialize_dataset(Dataset((simple_sentence(),)))
        doc = json.loads(raw)
        tup = doc["sentences"][0]["tuples"][0]
        assert tup["condition"] is None and tup["condition_value"] is None

    def test_parse_accepts_omitted_optional_slots(self):
        doc = {
            "sentences": [
                {
                    "id": "s-0",
                    "text": "CoCr shows hardness of 450 HV.",
                    "tuples": [
                        {
                            "material": {"start": 0, "end": 4, "text": "CoCr"},
                            "property": {"start": 11, "end": 19, "text": "hardness"},
                            "property_value": {"start": 23, "end": 29, "text": "450 HV"},
                        }
                    ],
                }
            ]
        }
        ds = parse_dataset(json.dumps(doc))
        assert ds.sentences[0].tuples[0].condition is None

    def test_meta_key_accepted_and_dropped(self):
        ds = Dataset((simple_sentence(),))
        raw = serialize_dataset(ds, meta={"tool": "x", "seed": 3})
        assert parse_dataset(raw) == ds
        assert json.loads(raw)["meta"] == {"tool": "x", "seed": 3}

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d.update(extra=1),
            lambda d: d["sentences"][0].update(extra=1),
            lambda d: d["sentences"][0]["tuples"][0].update(extra=1),
            lambda d: d["sentences"][0]["tuples"][0]["material"].update(extra=1),
        ],
    )
    def test_unknown_keys_rejected(self, mutate):
        doc = json.loads(serialize_dataset(Dataset((simple_sentence(),))))
        mutate(doc)
        with pytest.raises(CorpusError):
            parse_dataset(json.dumps(doc))

    @pytest.mark.parametrize(
        "raw",
        [
            b"",
            b"[]",
            b"{}",
            b'{"sentences": {}}',
            b'{"sentences": [42]}',
            b"{not json",
        ],
    )
    def test_malformed_documents_rejected(self, raw):
        with pytest.raises(CorpusError):
            parse_dataset(raw)

    def test_missing_mandatory_slot_rejected(self):
        doc = json.loads(serialize_dataset(Dataset((simple_sentence(),))))
        del doc["sentences"][0]["tuples"][0]["property"]
        with pytest.raises(CorpusError):
            parse_dataset(json.dumps(doc))


class TestSplits:
    def make(self, ks):
        sentences = []
        for i, k in enumerate(ks):
            text = " ".join(["CoCr shows hardness of 450 HV."] * 1)
            recs = []
            for _ in range(k):
                recs.append(
                    TupleRecord(
                        span(EntityType.MATERIAL, 0, 4, "CoCr"),
                        span(EntityType.PROPERTY, 11, 19, "hardness"),
                        span(EntityType.PROPERTY_VALUE, 23, 29, "450 HV"),
                    )
                )
            sentences.append(AnnotatedSentence(f"s-{i}", text, tuple(recs)))
        return Dataset(tuple(sentences))

    def test_buckets(self):
        ds = self.make([1, 2, 2, 3, 4, 6])
        buckets = split_by_tuple_count(ds)
        assert [len(buckets[k]) for k in (1, 2, 3, 4)] == [1, 2, 1, 1]
        assert len(buckets["excluded"]) == 1
        assert buckets["excluded"].sentences[0].id == "s-5"

    def test_zero_tuples_is_an_error(self):
        ds = Dataset((AnnotatedSentence("empty", "no facts here."),))
        with pytest.raises(CorpusError, match="no tuples"):
            split_by_tuple_count(ds)

    def test_stats(self):
        ds = self.make([1, 1, 2, 4])
        st_ = stats(ds)
        assert st_.total_sentences == 4
        assert st_.total_tuples == 8
        by_k = {sl.k: sl for sl in st_.per_k}
        assert by_k[1].sentences == 2 and by_k[1].tuples == 2
        assert by_k[1].proportion == pytest.approx(0.5)
        assert by_k[4].tuples == 4

    def test_train_val_split_sizes_and_partition(self):
        ds = self.make([1] * 25)
        train, val = train_val_split(ds, seed=3)
        assert len(val) == 3  # round(25 / 10) half-up
        assert len(train) == 22
        ids = {s.id for s in train.sentences} | {s.id for s in val.sentences}
        assert ids == {s.id for s in ds.sentences}

    def test_train_val_split_deterministic_and_seed_sensitive(self):
        ds = self.make([1] * 40)
        a = train_val_split(ds, seed=5)
        b = train_val_split(ds, seed=5)
        c = train_val_split(ds, seed=6)
        assert a == b
        assert [s.id for s in a[1].sentences] != [s.id for s in c[1].sentences]

    def test_train_val_split_too_small(self):
        ds = self.make([1] * 9)
        with pytest.raises(CorpusError, match="at least 10"):
            train_val_split(ds, seed=0)


@given(st.integers(10, 60), st.integers(0, 2**32 - 1))
def test_split_partition_property(n, seed):
    sentences = tuple(
        AnnotatedSentence(
            f"s-{i}",
            "CoCr shows hardness of 450 HV.",
            (
                TupleRecord(
                    EntitySpan(EntityType.MATERIAL, 0, 4, "CoCr"),
                    EntitySpan(EntityType.PROPERTY, 11, 19, "hardness"),
                    EntitySpan(EntityType.PROPERTY_VALUE, 23, 29, "450 HV"),
                ),
            ),
        )
        for i in range(n)
    )
    train, val = train_val_split(Dataset(sentences), seed)
    assert len(val) == (n + 5) // 10
    assert len(train) + len(val) == n
    assert {s.id for s in train.sentences}.isdisjoint(s.id for s in val.sentences)
