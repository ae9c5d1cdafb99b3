import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oclep import detector
from oclep.dataset import (
    CATEGORICAL,
    NUMERICAL,
    Instance,
    build_schema,
    fit_discretizer,
    itemize,
    itemize_all,
)
from oclep.detector import (
    INCLUSIVE,
    INTRUDER,
    NORMAL,
    STRICT,
    DetectorModel,
    HyperParams,
    classify,
    cutoff,
    draw_sample,
    explain,
    probe_order,
    score,
    train,
)
from oclep.errors import DataError, UsageError
from oclep.miner import INF

from conftest import brute_force_min_length


def toy_N():
    # 8 distinct instances over 4 attributes, one item per attribute
    rows = [
        [0, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 1], [0, 1, 1, 1],
        [1, 1, 1, 1], [1, 0, 1, 0], [1, 1, 0, 0], [0, 1, 0, 1],
    ]
    return np.asarray(rows) + 2 * np.arange(4)


def oracle_lengths(N):
    sets = [set(r.tolist()) for r in N]
    return [brute_force_min_length(sets[j], sets[:j] + sets[j + 1:]) for j in range(len(sets))]


def test_percentile_one_selects_minimum():
    N = toy_N()
    model = train(N, HyperParams(k=8, m=7, r=1, p=1.0))
    assert model.kappa == min(oracle_lengths(N))


def test_percentile_half_against_oracle():
    N = toy_N()
    model = train(N, HyperParams(k=8, m=7, r=1, p=0.5, seed=3))
    expected = sorted(oracle_lengths(N), reverse=True)[3]
    assert model.kappa == expected
    assert model.training_lengths == sorted(oracle_lengths(N), reverse=True)
    assert model.kappa in model.training_lengths


def test_train_preconditions():
    N = toy_N()
    with pytest.raises(UsageError):
        train(N, HyperParams(k=9, m=3))
    with pytest.raises(UsageError):
        train(N[:1], HyperParams(k=1, m=1))
    with pytest.raises(UsageError):
        HyperParams(p=0)
    with pytest.raises(UsageError):
        HyperParams(statistic="median")


def test_m_lowered_when_normal_set_is_small(caplog):
    model = train(toy_N(), HyperParams(k=4, m=400, r=1))
    assert model.params.m == 7
    assert "m=400" in caplog.text


def test_score_worked_example(worked_example):
    x, N = worked_example
    assert score(x, N, HyperParams(k=1, m=3, r=1)) == 1


def test_score_duplicate_is_infinite():
    N = np.array([[0, 2, 4]] * 5)
    assert score(N[0], N, HyperParams(k=1, m=3, r=2)) == INF


def test_score_deterministic_under_seed():
    N = toy_N()
    rng = np.random.default_rng(1)
    x = rng.integers(0, 2, 4) + 2 * np.arange(4)
    params = HyperParams(k=1, m=4, r=3, seed=17)
    assert score(x, N, params, key=5) == score(x, N, params, key=5)


def test_score_too_small_normal_set():
    with pytest.raises(UsageError):
        score([1], [{1}, {2}], HyperParams(k=1, m=3, r=1))


@pytest.mark.parametrize(
    "ml, kappa, rule, expected",
    [
        (3, 3, INCLUSIVE, NORMAL),
        (2, 3, INCLUSIVE, INTRUDER),
        (3, 3, STRICT, INTRUDER),
        (4, 3, STRICT, NORMAL),
        (INF, 3, INCLUSIVE, NORMAL),
        (INF, 3, STRICT, NORMAL),
        (INF, INF, STRICT, NORMAL),
    ],
)
def test_classify(ml, kappa, rule, expected):
    assert classify(ml, kappa, rule) == expected


lengths = st.one_of(st.integers(1, 41).map(float), st.just(INF))


@given(a=lengths, b=lengths, kappa=st.integers(1, 41), rule=st.sampled_from([INCLUSIVE, STRICT]))
def test_classify_monotone(a, b, kappa, rule):
    hi, lo = max(a, b), min(a, b)
    if classify(lo, kappa, rule) == NORMAL:
        assert classify(hi, kappa, rule) == NORMAL


@given(ls=st.lists(lengths, min_size=1, max_size=50),
       p1=st.floats(0.01, 1.0), p2=st.floats(0.01, 1.0))
def test_cutoff_nonincreasing_in_p(ls, p1, p2):
    lo, hi = sorted((p1, p2))
    assert cutoff(ls, hi) <= cutoff(ls, lo)
    assert cutoff(ls, lo) in ls


def test_percentile_index_exact_products():
    # 0.95 * 800 must select the 760th element, not the 761st
    assert detector.percentile_index(800, 0.95) == 759
    assert detector.percentile_index(8, 0.5) == 3
    assert detector.percentile_index(10, 0.01) == 0


def test_infinity_sorts_first():
    assert detector.sort_lengths([2, INF, 3]) == [INF, 3, 2]


def test_draw_sample_excludes_and_is_distinct():
    for key in range(30):
        idx = draw_sample(20, 19, seed=1, domain=0, key=key, i=0, exclude=key % 20)
        assert len(set(idx.tolist())) == 19
        assert key % 20 not in idx


def random_N(n=40, n_attr=8, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 3, size=(n, n_attr)) + 3 * np.arange(n_attr)


def test_nested_r_never_raises_min():
    N = random_N()
    x = random_N(1, seed=99)[0]
    small = HyperParams(k=1, m=10, r=2, seed=4)
    large = replace(small, r=6)
    assert score(x, N, large, key=0) <= score(x, N, small, key=0)


def test_score_reproduces_training_statistic():
    N = random_N()
    params = HyperParams(k=10, m=15, r=3, seed=8)
    probes, res = detector.training_statistics(N, params)
    for t, pm in zip(probes, res):
        assert score(N[t], N, params, key=int(t), exclude=int(t), domain=detector.TRAIN) == pm[-1]


def test_probe_prefixes_nested():
    assert list(probe_order(50, 3)[:10]) == list(probe_order(50, 3)[:10])
    assert sorted(probe_order(50, 3)) == list(range(50))


def test_train_invariant_under_reordering_given_same_samples():
    N = random_N()
    params = HyperParams(k=40, m=39, r=1, p=0.8)
    perm = np.random.default_rng(2).permutation(len(N))
    # m = |N|-1 makes every sample the whole remainder, so draws coincide
    assert train(N, params).kappa == train(N[perm], params).kappa
    assert train(N, params).training_lengths == train(N[perm], params).training_lengths


def test_mean_statistic_mode():
    N = toy_N()
    model = train(N, HyperParams(k=8, m=7, r=1, p=0.5, statistic="mean"))
    assert all(1 <= v <= 4 for v in model.training_lengths if v != INF)
    assert model.kappa in model.training_lengths


def test_train_parallel_equals_serial():
    N = random_N(60)
    params = HyperParams(k=30, m=20, r=3, seed=5)
    assert train(N, params, threads=1) == train(N, params, threads=2)


def test_model_round_trip(tmp_path):
    rows = [["tcp", "1"], ["udp", "9"]]
    schema = build_schema(rows, [CATEGORICAL, NUMERICAL], ["proto", "bytes"])
    fit_discretizer(schema, [Instance(("tcp", 1.0)), Instance(("udp", 9.0))], bins=3)
    model = DetectorModel(kappa=3, params=HyperParams(seed=11), schema=schema,
                          training_lengths=[INF, 5, 3, 3, 2])
    path = tmp_path / "model.json"
    model.save(path)
    again = DetectorModel.load(path)
    assert again == model
    assert again.dumps() == path.read_text()


def test_model_load_errors(tmp_path):
    with pytest.raises(DataError):
        DetectorModel.load(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": 99}')
    with pytest.raises(DataError):
        DetectorModel.load(bad)


def test_explain_worked_example(worked_example):
    x, N = worked_example
    exp = explain(x, N, HyperParams(k=1, m=3, r=1))
    assert sorted(p.length for p in exp.patterns) == [1, 3]
    assert [p.items for p in exp.shortest] == [frozenset({1})]
    assert exp.ml == 1


def test_explain_indistinguishable():
    N = np.array([[0, 2, 4]] * 4)
    exp = explain(N[0], N, HyperParams(k=1, m=3, r=1))
    assert exp.ml == INF
    assert "indistinguishable" in exp.render()[0]


def test_explain_unknown_value():
    rows = [[p, str(b)] for p, b in itertools.product(["tcp", "udp"], [1, 2, 3])]
    schema = build_schema(rows, [CATEGORICAL, NUMERICAL], ["proto", "bytes"])
    insts = [Instance((p, float(b))) for p, b in rows]
    fit_discretizer(schema, insts, bins=3)
    N = itemize_all(insts, schema).matrix
    x = itemize(Instance(("gre", 2.0)), schema)
    exp = explain(x, N, HyperParams(k=1, m=5, r=2))
    assert exp.ml == 1
    assert exp.render(schema) == ["proto = <unknown>"]
