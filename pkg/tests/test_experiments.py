import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monocoint.chains import (AR1, ChainSpec, GaussianRandomWalk, LazySRW,
                              Window, invariant_cdf, simulate)
from monocoint.experiments import (ExperimentReport, Record, ScenarioConfig,
                                   chain_from_params, config_from_dict,
                                   config_to_dict, loglog_slope, moment_ratio,
                                   parse_config_text, read_report,
                                   run_consistency, run_gc, run_occupation,
                                   run_rate, run_replications, sup_deviation,
                                   synthesize, write_report)
from monocoint.rng import derive

RW = ChainSpec(GaussianRandomWalk())
AR = ChainSpec(AR1(rho=0.5))
LAZY = ChainSpec(LazySRW())


# -- config ------------------------------------------------------------------------

def test_config_validation():
    ScenarioConfig(AR)
    for kwargs in [dict(link="bogus"), dict(noise_sd=-1), dict(noise_sd=math.inf),
                   dict(n_grid=(100, 10)), dict(n_grid=()), dict(reps=0), dict(seed=-1)]:
        with pytest.raises(ValueError):
            ScenarioConfig(AR, **kwargs)


def test_config_dict_round_trip():
    c = ScenarioConfig(ChainSpec(AR1(rho=-0.3, increment_sd=2.0)), Window(0.25, 0.75),
                       "exp_decay", 0.5, (10, 100), 7, 3)
    assert config_from_dict(json.loads(json.dumps(config_to_dict(c)))) == c


def test_chain_from_params():
    assert chain_from_params("rw") == RW
    assert chain_from_params("ar1", {"rho": "0.5"}) == AR
    assert chain_from_params("lazy", {"hold": "0.25"}).model == LazySRW(0.25)
    with pytest.raises(ValueError):
        chain_from_params("bogus")
    with pytest.raises(ValueError):
        chain_from_params("rw", {"rho": "0.2"})


def test_parse_config_text():
    out = parse_config_text("""
        # rate check
        experiment = rate, gc
        chain = ar1
        rho = 0.5
        sigma = 1
        n_grid = 2^10..2^12
        reps = 5
        seed = 9
        format = csv
        out = ar1
    """)
    c = out["config"]
    assert out["experiments"] == ("rate", "gc") and out["format"] == "csv"
    assert c.n_grid == (1024, 2048, 4096) and c.reps == 5 and c.seed == 9
    assert c.chain == AR and out["out"] == "ar1" and out["workers"] == 1
    assert parse_config_text("chain=rw\nn_grid=10,100")["experiments"] == (
        "consistency", "rate", "gc", "occupation")
    for bad in ["chain=rw", "chain=rw\nn_grid=10\nbogus=1", "chain=rw\nn_grid=10\nreps=0",
                "chain=rw\nn_grid=10\nexperiment=foo", "chain=rw\nchain=rw\nn_grid=1",
                "just text"]:
        with pytest.raises(ValueError):
            parse_config_text(bad)


# -- synthesize ------------------------------------------------------------------------

def test_synthesize_zero_noise():
    c = ScenarioConfig(AR, noise_sd=0.0, seed=4)
    s = synthesize(c, 500, 0)
    assert np.array_equal(s.zs, -np.arctan(s.xs))
    assert np.array_equal(s.xs, simulate(AR, 500, derive(4, 500, 0)))


def test_synthesize_arithmetic():
    c = ScenarioConfig(RW, link="neg_identity")
    assert c.f0(np.array([2.0]))[0] + 0.1 == pytest.approx(-1.9, abs=1e-15)


def test_synthesize_noise_clt():
    sigma = 2.0
    c = ScenarioConfig(AR, noise_sd=sigma, seed=1)
    n = 100_000
    s = synthesize(c, n, 0)
    w = s.zs - c.f0(s.xs)
    assert abs(w.mean()) < 3 * sigma / math.sqrt(w.size)
    assert np.array_equal(s.zs, synthesize(c, n, 0).zs)
    assert not np.array_equal(s.zs, synthesize(c, n, 1).zs)


# -- sup deviation ---------------------------------------------------------------------

@pytest.mark.parametrize("y1", [-0.5, -0.2, 0.0, 0.3, 0.5])
def test_sup_deviation_one_point(y1):
    w = Window(0.0, 0.5)
    F = invariant_cdf(RW, w, y1)
    got = sup_deviation(np.array([y1]), np.array([1.0]), spec=RW, window=w)
    assert got == pytest.approx(max(F, 1 - F), abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-0.5, 0.5), min_size=1, max_size=30),
       st.sampled_from([RW, AR, LAZY]))
def test_sup_deviation_against_dense_grid(points, spec):
    w = Window(0.0, 0.5) if spec is not LAZY else Window(0.0, 2.5)
    pts = np.asarray(points) * (5 if spec is LAZY else 1)
    if spec is LAZY:
        pts = np.round(pts)
    knots, counts = np.unique(pts, return_counts=True)
    heights = np.cumsum(counts) / pts.size
    exact = sup_deviation(knots, heights, spec=spec, window=w)
    # Dense grid plus both sides of every jump is a lower bound converging to it.
    grid = np.concatenate((np.linspace(w.lo - 0.1, w.hi + 0.1, 4001), knots,
                           np.nextafter(knots, -np.inf)))
    Fn = np.concatenate(([0.0], heights))[np.searchsorted(knots, grid, side="right")]
    approx = np.max(np.abs(Fn - invariant_cdf(spec, w, grid)))
    assert approx <= exact + 1e-12
    assert exact - approx < 1e-3


# -- summaries ------------------------------------------------------------------------

def test_loglog_slope():
    ns = [10, 100, 1000]
    slope, se = loglog_slope(ns, [1.0, 0.1, 0.01])
    assert slope == pytest.approx(-1.0) and se == pytest.approx(0.0, abs=1e-12)
    slope, se = loglog_slope([10, 100], [1.0, 0.5])
    assert slope == pytest.approx(math.log(0.5) / math.log(10)) and se is None
    assert loglog_slope(ns, [0.0, 0.0, 0.0]) == (None, None)


def test_moment_ratio():
    assert moment_ratio([3.0]) == 1.0
    assert moment_ratio([1.0, 3.0]) == pytest.approx(5 / 4)
    assert moment_ratio([0.0, 0.0]) is None


# -- experiments ----------------------------------------------------------------------

def test_consistency_degenerate_single_record():
    rep = run_consistency(ScenarioConfig(AR, n_grid=(100,), reps=1))
    assert len(rep.records) == 1
    assert rep.summary["slope"] is None
    assert rep.summary["flags"]["sufficient_grid"] is False
    assert rep.summary["pass"] is False


def test_zero_noise_errors_are_exactly_zero():
    c = ScenarioConfig(RW, n_grid=(50, 200, 1000), reps=10, noise_sd=0.0)
    rep = run_consistency(c)
    used = [r for r in rep.records if not r.excluded]
    assert used and all(r.error == 0.0 for r in used)
    assert rep.summary["flags"]["degenerate"] is True


def test_rate_zero_noise_is_degenerate():
    c = ScenarioConfig(RW, n_grid=tuple(2 ** k for k in range(6, 12)), reps=3, noise_sd=0.0)
    rep = run_rate(c)
    assert rep.summary["flags"]["degenerate"] is True
    assert rep.summary["slope"] is None and rep.summary["pass"] is False
    assert rep.summary["flags"]["sufficient_grid"] is True


def test_exclusions_accounted():
    # A window the walk rarely reaches at small n.
    c = ScenarioConfig(RW, window=Window(30.0, 0.5), n_grid=(10, 100), reps=20,
                       link="neg_identity")
    rep = run_consistency(c)
    s = rep.summary
    assert s["n_excluded"] == len(s["excluded"]) == sum(r.excluded for r in rep.records)
    assert s["n_records"] == 40
    assert s["exclusions_ok"] is False and s["pass"] is False


def test_consistency_on_ar1_decreases():
    c = ScenarioConfig(AR, n_grid=(100, 1000, 10_000), reps=40, seed=2)
    rep = run_consistency(c)
    assert rep.summary["flags"]["decreasing"] and rep.summary["pass"]
    assert rep.summary["flags"]["sufficient_grid"]


def test_gc_runs():
    c = ScenarioConfig(AR, n_grid=(100, 1000, 10_000), reps=30, seed=3)
    rep = run_gc(c)
    med = [row["median_sup_dev"] for row in rep.summary["per_n"]]
    assert rep.summary["flags"]["decreasing"] and med[-1] < med[0]


def test_occupation_reps_one_is_flagged():
    rep = run_occupation(ScenarioConfig(LAZY, n_grid=(1000,), reps=1))
    assert rep.summary["per_n"][-1]["moment_ratio"] in (1.0, None)
    assert rep.summary["flags"]["sufficient_reps"] is False and not rep.passed


def test_occupation_positive_recurrent_near_one():
    rep = run_occupation(ScenarioConfig(AR, n_grid=(20_000,), reps=40))
    assert rep.summary["target_ratio"] == pytest.approx(1.0)
    assert abs(rep.summary["per_n"][-1]["moment_ratio"] - 1.0) < 0.02


def test_parallel_matches_serial():
    c = ScenarioConfig(RW, n_grid=(100, 400), reps=6, seed=5)
    assert run_replications(c, 1) == run_replications(c, 2)


# -- report I/O -----------------------------------------------------------------------

def _small_report():
    c = ScenarioConfig(RW, window=Window(5.0, 0.5), n_grid=(20, 200), reps=3,
                       link="neg_identity")
    return run_consistency(c)


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_report_round_trip(tmp_path, fmt):
    rep = _small_report()
    assert any(r.excluded for r in rep.records)  # covers empty cells
    p = tmp_path / f"r.{fmt}"
    write_report(rep, p, fmt)
    back = read_report(p)
    assert back.records == rep.records
    assert back.summary == json.loads(json.dumps(rep.summary))
    assert back.experiment == rep.experiment and back.config == rep.config


def test_empty_report_csv_is_header_only(tmp_path):
    header = "n,rep,error,inv_error,sup_dev,tn,u_n\n"
    p = tmp_path / "e.csv"
    write_report(ExperimentReport("", {}, [], {}), p, "csv")
    assert p.read_text() == header
    assert read_report(p).records == []
    write_report(ExperimentReport("consistency", {}, [], {}), p, "csv")
    assert p.read_text() == header + "# experiment: consistency\n"
    assert read_report(p).experiment == "consistency"


def test_json_summary_schema(tmp_path):
    p = tmp_path / "r.json"
    write_report(_small_report(), p, "json")
    summary = json.loads(p.read_text())["summary"]
    assert {"slope", "slope_se", "pass"} <= set(summary)


def test_report_io_errors(tmp_path):
    with pytest.raises(OSError, match="nope"):
        write_report(_small_report(), tmp_path / "nope" / "r.json", "json")
    with pytest.raises(ValueError):
        write_report(_small_report(), tmp_path / "r.xml", "xml")


def test_record_excluded():
    assert Record(10, 0, None, None, None, 0, 3.0).excluded
    assert not Record(10, 0, 0.1, 0.1, 0.1, 1, 3.0).excluded
