import json

import pytest

from dlocontact import harness as H
from dlocontact.contact_model import ClipModel, DloState, SensorModel
from dlocontact.estimators import DETACHED, ESTABLISHED, RE_ESTABLISHED
from dlocontact.scenario import ConfigError, Scenario


def test_fmt():
    assert H.fmt(0.1) == "0.1" and float(H.fmt(1 / 3)) == 1 / 3
    assert H.fmt(float("nan")) == "" and H.fmt(None) == ""
    assert H.fmt(True) == "1" and H.fmt(7) == "7"


def test_score_window():
    assert H.score(100, 90) and H.score(100, 200)
    assert not H.score(100, 89) and not H.score(100, 201)
    assert not H.score(-1, 100) and not H.score(100, -1)


def test_parse_fixture():
    f = H.parse_fixture("C3@+5", "L")
    assert f.delta_z == pytest.approx(0.005) and f.name == "C3@+5mm"
    assert H.parse_fixture("U1@-10", "L").delta_z == pytest.approx(-0.010)
    with pytest.raises(ConfigError):
        H.parse_fixture("Q9@0", "L")


def test_comparison_trial_noiseless():
    out = H.comparison_trial(ClipModel(), DloState(), SensorModel(0.0), "linear")
    assert out.true_detach > 0 and out.true_establish > 0
    for name in ("rho_c", "df_c/dt"):
        assert 0 <= out.detections[name] - out.true_detach <= 10
    assert H.score(out.true_establish, out.detections["rho_e"])


def small_compare(**kw):
    sc = Scenario.builtin("rising_patterns").with_overrides(compare__configs="P1", **kw)
    return sc


def test_comparison_rows_and_summary():
    sc = Scenario.builtin("rising_patterns")
    rep = H.run_indicator_comparison(sc, seeds=range(2), workers=1)
    assert len(rep.rows) == 3 * 3 * 2 * len(H.INDICATORS)
    for ind in H.INDICATORS:
        assert sum(r[3] == ind for r in rep.rows) == 18
    assert len(rep.summary_rows()) == 4 * 3 * 3
    assert "overall" in rep.table()
    names = [c[0] for c in H.check_comparison(rep, sc)]
    assert "rho_c overall" in names


def test_comparison_workers_identical():
    sc = small_compare()
    a = H.run_indicator_comparison(sc, seeds=range(3), workers=1)
    b = H.run_indicator_comparison(sc, seeds=range(3), workers=2)
    assert a.rows == b.rows


def test_kind_mismatch():
    with pytest.raises(ConfigError):
        H.run_single_trace(Scenario.builtin("rising_patterns"))
    with pytest.raises(ConfigError):
        H.run_bench(Scenario.builtin("trace_ideal"))


def test_validate_rejects_bad_models():
    with pytest.raises(ConfigError):
        H.validate(Scenario.builtin("trace_ideal").with_overrides(config="Z9"))
    with pytest.raises(ConfigError):
        H.validate(Scenario.builtin("trace_ideal").with_overrides(push__shape="square"))
    with pytest.raises(ConfigError):
        H.validate(Scenario.builtin("board").with_overrides(board__fixtures="C1@0, XX@1"))


def events(res):
    return [e for _, e in res.events]


def test_trace_examples():
    ideal = H.run_single_trace(Scenario.builtin("trace_ideal"))
    assert events(ideal) == [ESTABLISHED, DETACHED]
    over = H.run_single_trace(Scenario.builtin("trace_overforce"))
    assert events(over) == [ESTABLISHED, DETACHED, RE_ESTABLISHED]
    missed = H.run_single_trace(Scenario.builtin("trace_missed"))
    assert events(missed) == []
    sc = Scenario.builtin("trace_ideal")
    assert all(ok for _, ok, _ in H.check_trace([(0, ideal)], sc))
    assert not any(ok for _, ok, _ in H.check_trace([(0, over)], sc))


def test_trace_csv_and_manifest(tmp_path):
    sc = Scenario.builtin("trace_ideal")
    res = H.run_single_trace(sc)
    p = H.write_trace(res, tmp_path / "t.csv")
    lines = p.read_text().splitlines()
    assert lines[0].startswith("# ") and lines[1].split(",")[0] == "tick"
    assert len(lines) == res.ticks + 2
    m = H.write_manifest(tmp_path, sc, [0], "dlocontact trace", [p])
    data = json.loads(m.read_text())
    assert data["scenario_sha256"] == sc.digest()
    assert data["outputs"] == {"t.csv": H.file_sha256(p)}
    assert data["seeds"] == [0]
    assert "time" not in json.dumps(data).lower()


def test_board_experiment():
    sc = Scenario.builtin("board")
    runs = H.run_board_experiment(sc, seeds=[0, 1], workers=1)
    assert [r.seed for r in runs] == [0, 1]
    assert all(ok for _, ok, _ in H.check_board(runs, sc))
    rows = H.board_rows(runs)
    assert {r[1] for r in rows} == {"naive", "adaptive"}
    assert "adaptive: 2/2" in H.board_summary(runs)


def test_bench_small():
    sc = Scenario.builtin("bench").with_overrides(
        bench__ticks=2000, bench__warmup=100, bench__realtime_ticks=2000,
        bench__alloc_ticks=2000)
    rep = H.run_bench(sc)
    assert rep.ticks == 2000 and rep.p50_us > 0 and rep.p99_us >= rep.p50_us
    assert len(H.check_bench(rep, sc)) == 3


def test_pipeline_restarts_each_cycle():
    sc = Scenario.builtin("bench")
    pipe = H._pipeline(sc, 0)
    for _ in range(pipe.cycle * 3 + 5):
        pipe.tick()
    assert pipe.k == 5 and pipe.events > 0
