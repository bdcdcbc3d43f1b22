import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bigan_ids import kdd
from bigan_ids.kdd import (
    ANOMALOUS,
    NORMAL,
    EncodingSchema,
    InsufficientDataError,
    KddParseError,
    assign_classes,
    compose_test_set,
    decode,
    encode,
    encode_features,
    encode_many,
    fit_schema,
    parse_kdd,
    plan_test_set,
    read_encoded_csv,
    read_kdd,
    records_to_text,
    split,
    swap_labels,
    write_encoded_csv,
)
from bigan_ids.synthetic import kdd_fixture

CONT = [n for n in kdd.FEATURE_NAMES if n not in kdd.CATEGORICAL]


def line(label="smurf.", protocol="tcp", service="http", flag="SF", **numbers):
    vals = []
    for name in kdd.FEATURE_NAMES:
        if name == "protocol_type":
            vals.append(protocol)
        elif name == "service":
            vals.append(service)
        elif name == "flag":
            vals.append(flag)
        else:
            vals.append(str(numbers.get(name, 0)))
    return ",".join(vals + [label])


def test_field_layout():
    assert len(kdd.FEATURE_NAMES) == 41 and kdd.N_FIELDS == 42
    assert kdd.FEATURE_NAMES[1:4] == ("protocol_type", "service", "flag")


def test_parse_strips_trailing_period():
    recs = parse_kdd([line("smurf."), "", line("normal")])
    assert [r.label for r in recs] == ["smurf", "normal"]
    assert recs[0].value("service") == "http"
    assert [r.line for r in recs] == [1, 3]


def test_parse_collects_every_bad_line():
    bad = [line(), "1,2,3", line(), line()[: line().rindex(",")] + ",", "a," * 50 + "x"]
    with pytest.raises(KddParseError) as err:
        parse_kdd(bad)
    assert [n for n, _ in err.value.problems] == [2, 4, 5]


def test_label_swap():
    recs = parse_kdd([line("normal."), line("smurf."), line("neptune.")])
    swapped = assign_classes(recs, swap=True)
    assert [r.record_class for r in swapped] == [ANOMALOUS, NORMAL, NORMAL]
    plain = assign_classes(recs, swap=False)
    assert [r.record_class for r in plain] == [NORMAL, ANOMALOUS, ANOMALOUS]
    assert [r.record_class for r in swap_labels(swapped)] == [r.record_class for r in plain]
    assert [r.record_class for r in swap_labels(swap_labels(swapped))] == [r.record_class for r in swapped]


def test_schema_widths():
    recs = parse_kdd([line(protocol=p, service=s) for p, s in
                      [("tcp", "http"), ("udp", "http"), ("icmp", "ecr_i"), ("tcp", "smtp")]])
    schema = fit_schema(recs)
    blocks = {f.name: sl for f, sl in schema.blocks()}
    assert blocks["protocol_type"].stop - blocks["protocol_type"].start == 3
    assert blocks["service"].stop - blocks["service"].start == 3
    assert schema.width == 38 + 3 + 3 + 1
    dummy = fit_schema(recs, dummy=True)
    assert dummy.width == 38 + 2 + 2 + 0


def test_one_hot_block_example():
    recs = parse_kdd([line(protocol=p) for p in ["icmp", "tcp", "udp"]])
    schema = fit_schema(recs)
    sl = dict((f.name, s) for f, s in schema.blocks())["protocol_type"]
    # vocabulary is sorted: icmp, tcp, udp
    assert list(encode_features(recs[1], schema)[sl]) == [0.0, 1.0, 0.0]
    dummy = fit_schema(recs, dummy=True)
    sl = dict((f.name, s) for f, s in dummy.blocks())["protocol_type"]
    assert list(encode_features(recs[0], dummy)[sl]) == [0.0, 0.0]
    assert list(encode_features(recs[2], dummy)[sl]) == [0.0, 1.0]


def test_min_max_scaling_and_clamping():
    train = parse_kdd([line(src_bytes=10), line(src_bytes=30), line(src_bytes=20)])
    schema = fit_schema(train)
    j = dict((f.name, s) for f, s in schema.blocks())["src_bytes"].start
    assert [encode_features(r, schema)[j] for r in train] == [0.0, 1.0, 0.5]
    unseen = parse_kdd([line(src_bytes=50), line(src_bytes=-5)])
    assert [encode_features(r, schema)[j] for r in unseen] == [1.0, 0.0]


def test_constant_column_encodes_zero():
    schema = fit_schema(parse_kdd([line(duration=7), line(duration=7)]))
    j = dict((f.name, s) for f, s in schema.blocks())["duration"].start
    assert encode_features(parse_kdd([line(duration=9)])[0], schema)[j] == 0.0


def test_unseen_category_is_all_zeros():
    schema = fit_schema(parse_kdd([line(service="http"), line(service="smtp")]))
    sl = dict((f.name, s) for f, s in schema.blocks())["service"]
    vec = encode_features(parse_kdd([line(service="gopher")])[0], schema)
    assert not vec[sl].any()
    assert decode(vec, schema)[2] is None


def test_non_numeric_continuous_field_rejected():
    rec = parse_kdd([line().replace(",0,", ",abc,", 1)])
    with pytest.raises(ValueError):
        fit_schema(rec)


def test_decode_round_trip_on_fixture():
    recs = kdd_fixture(200, seed=3)
    schema = fit_schema(recs)
    for r in recs[:50]:
        back = decode(encode_features(r, schema), schema)
        for j, name in enumerate(kdd.FEATURE_NAMES):
            if name in kdd.CATEGORICAL:
                assert back[j] == r.fields[j]
            else:
                assert back[j] == pytest.approx(float(r.fields[j]), rel=1e-9, abs=1e-9)


def test_encoded_sample_and_schema_persistence(tmp_path):
    recs = kdd_fixture(100, seed=4)
    schema = fit_schema(recs)
    schema.save(tmp_path / "s.json")
    back = EncodingSchema.load(tmp_path / "s.json")
    assert back.width == schema.width
    X1, y1 = encode_many(recs, schema)
    X2, y2 = encode_many(recs, back)
    assert np.array_equal(X1, X2) and np.array_equal(y1, y2)
    s = encode(recs[0], schema, sample_id=12)
    assert s.sample_id == 12 and s.truth in (NORMAL, ANOMALOUS)
    write_encoded_csv(tmp_path / "x.csv", X1, y1, range(100))
    X3, y3, ids = read_encoded_csv(tmp_path / "x.csv")
    assert np.array_equal(X1, X3) and np.array_equal(y1, y3) and list(ids) == list(range(100))


def test_fixture_text_round_trip(tmp_path):
    recs = kdd_fixture(50, seed=5)
    path = tmp_path / "f.csv"
    path.write_text(records_to_text(recs))
    back = read_kdd(path)
    assert [r.fields for r in back] == [r.fields for r in recs]
    assert [r.label for r in back] == [r.label for r in recs]


# -- splitting -------------------------------------------------------------------

def _toy_records(n_normal, n_anomalous):
    lines = [line("smurf.")] * n_normal + [line("normal.")] * n_anomalous
    return parse_kdd(lines)


def test_split_toy_composition():
    recs = _toy_records(800, 200)
    s = split(recs, seed=3, contamination=0.2)
    is_anom = np.array([kdd.record_class(r) == ANOMALOUS for r in recs])
    assert not is_anom[s.train_index].any()
    assert set(s.train_index).isdisjoint(s.test_index)
    assert set(s.test_index) <= set(s.pool_index)
    n_test = len(s.test_index)
    assert is_anom[s.test_index].sum() == int(np.floor(0.2 * n_test + 0.5))
    assert len(s.train) == len(s.train_index) and len(s.test) == n_test


def test_split_is_seeded():
    recs = _toy_records(300, 100)
    a, b = split(recs, 5, 0.1), split(recs, 5, 0.1)
    assert np.array_equal(a.train_index, b.train_index) and np.array_equal(a.test_index, b.test_index)
    c = split(recs, 6, 0.1)
    assert not np.array_equal(a.test_index, c.test_index)


def test_split_zero_contamination_has_no_anomalies():
    recs = _toy_records(300, 100)
    s = split(recs, 1, 0.0)
    assert all(kdd.record_class(r) == NORMAL for r in s.test)


def test_insufficient_anomalies_reported():
    with pytest.raises(InsufficientDataError, match="maximum achievable"):
        plan_test_set(100, 3, 0.2, test_size=50)
    with pytest.raises(InsufficientDataError):
        plan_test_set(100, 0, 0.1)
    with pytest.raises(ValueError):
        plan_test_set(100, 10, 1.5)


def test_plan_picks_largest_supported_size():
    # 100 normals, 10 anomalies at c=0.2: 50 samples need exactly 10 anomalies
    assert plan_test_set(100, 10, 0.2) == (52, 10)
    assert plan_test_set(100, 10, 0.0) == (100, 0)
    assert plan_test_set(5, 10, 1.0) == (10, 10)


@settings(max_examples=100, deadline=None)
@given(n_norm=st.integers(0, 60), n_anom=st.integers(0, 60), c=st.sampled_from([0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0]))
def test_plan_is_maximal_and_exact(n_norm, n_anom, c):
    k = lambda t: int(np.floor(c * t + 0.5))  # noqa: E731
    feasible = [t for t in range(1, n_norm + n_anom + 1) if k(t) <= n_anom and t - k(t) <= n_norm]
    if not feasible or (c > 0 and n_anom == 0):
        with pytest.raises(InsufficientDataError):
            plan_test_set(n_norm, n_anom, c)
        return
    size, anoms = plan_test_set(n_norm, n_anom, c)
    assert size == max(feasible) and anoms == k(size)


def test_compose_respects_candidates():
    y = np.array([False] * 50 + [True] * 50)
    idx = compose_test_set(y, 0, 0.1, candidates=np.arange(0, 100, 2))
    assert np.all(idx % 2 == 0)
    assert y[idx].sum() == int(np.floor(0.1 * len(idx) + 0.5))
