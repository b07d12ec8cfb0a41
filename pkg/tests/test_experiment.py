import json
import math
from dataclasses import replace

import mpmath
import numpy as np
import pytest

from poissonlab.errors import PreconditionError
from poissonlab.experiment import (ExperimentConfig, error_budget, gap_statistics,
                                   minami_check, run_campaign, verify_run, wegner_check)
from poissonlab.experiment.analysis import (feasible, minami_bound, proof_a_interval,
                                            spacing_statistics, wegner_bound)
from poissonlab.experiment.campaign import RECORDS, SUMMARY, CampaignError, iter_records
from poissonlab.experiment.cli import main
from poissonlab.experiment.config import ENV_OUTPUT_DIR, ENV_WORKERS, ConfigError
from poissonlab.graph import random_regular

SMALL = {
    "graph": {"n": 60, "degree": 3, "seed": 5},
    "alpha": 15.0,
    "I": [-20.0, 20.0],
    "aux": {"source": "manual", "R": 1, "tau": 0.3},
    "realizations": 8,
    "base_seed": 42,
    "gap_window": None,
    "count_intervals": [[-0.5, 0.5]],
    "lemma_checks": True,
}


def small_cfg(**kw) -> ExperimentConfig:
    d = json.loads(json.dumps(SMALL))
    d.update(kw)
    return ExperimentConfig.from_dict(d)


# -- configuration ------------------------------------------------------------

def test_config_roundtrip_and_hash(tmp_path):
    cfg = small_cfg()
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    back = ExperimentConfig.load(path)
    assert back == cfg
    assert back.config_hash == cfg.config_hash
    assert replace(cfg, workers=4, output_dir="x").config_hash == cfg.config_hash
    assert replace(cfg, base_seed=1).config_hash != cfg.config_hash


@pytest.mark.parametrize("change", [
    {"alpha": -1.0},
    {"I": [1.0, 1.0]},
    {"realizations": -1},
    {"eigensolver": "magic"},
    {"workers": 0},
    {"family": "cauchy"},
    {"count_intervals": [[0.1, 0.0]]},
    {"aux": {"source": "manual", "R": 1}},
    {"aux": {"source": "schedule", "mu_s": 30.0}},
    {"aux": {"source": "other"}},
    {"graph": {"n": 10}},
    {"unknown_key": 1},
])
def test_config_rejects(change):
    with pytest.raises((ConfigError, ValueError)):
        small_cfg(**change)


def test_env_overrides():
    cfg = small_cfg()
    out = cfg.with_env({ENV_OUTPUT_DIR: "/tmp/somewhere", ENV_WORKERS: "3"})
    assert out.output_dir == "/tmp/somewhere" and out.workers == 3
    assert cfg.with_env({}) == cfg
    with pytest.raises(ConfigError):
        cfg.with_env({ENV_WORKERS: "many"})


def test_density_and_windows():
    cfg = small_cfg()
    assert cfg.density_sup == pytest.approx(0.5 / 15)
    w = cfg.window(60)
    assert w.interval == pytest.approx((-20 / 60, 20 / 60))
    assert small_cfg(gap_window=6.0).gap_interval(60) == pytest.approx((-0.05, 0.05))


# -- campaigns ----------------------------------------------------------------

def test_zero_realizations(tmp_path):
    s = run_campaign(small_cfg(realizations=0), output_dir=tmp_path)
    assert s.records == [] and s.aggregates["realizations"] == 0
    assert (tmp_path / RECORDS).read_text() == ""
    assert json.loads((tmp_path / SUMMARY).read_text())["mean_nu"] is None
    _, bad = verify_run(tmp_path)
    assert bad == []


def test_campaign_records_and_verify(tmp_path):
    s = run_campaign(small_cfg(), output_dir=tmp_path)
    assert len(s.records) == 8
    assert [r["index"] for r in s.records] == list(range(8))
    assert len({r["seed"] for r in s.records}) == 8
    for r in s.records:
        assert set(r) >= {"nu", "counts", "aux", "lemma"}
        assert r["lemma"]["failures"] == 0
        if r["aux"]["flags"]["omega"]:
            assert r["aux"]["eta"] <= r["nu"]
    assert s.hard_failures == []
    agg, bad = verify_run(tmp_path)
    assert bad == []
    stored = (tmp_path / SUMMARY).read_text()
    assert json.dumps(agg, sort_keys=True, indent=1) + "\n" == stored


def test_tampered_summary_detected(tmp_path):
    run_campaign(small_cfg(), output_dir=tmp_path)
    d = json.loads((tmp_path / SUMMARY).read_text())
    d["mean_nu"] += 1
    (tmp_path / SUMMARY).write_text(json.dumps(d))
    _, bad = verify_run(tmp_path)
    assert any("summary" in b for b in bad)


def test_truncated_records_detected(tmp_path):
    run_campaign(small_cfg(), output_dir=tmp_path)
    lines = (tmp_path / RECORDS).read_text().splitlines()
    (tmp_path / RECORDS).write_text("\n".join(lines[:-1]) + "\n")
    (tmp_path / SUMMARY).unlink()
    _, bad = verify_run(tmp_path)
    assert any("record count" in b for b in bad)


def test_deterministic_across_runs_and_workers():
    cfg = small_cfg(lemma_checks=False, realizations=6)
    g = cfg.graph.build()
    a = list(iter_records(cfg, g, workers=1))
    assert a == list(iter_records(cfg, g, workers=1))
    assert a == list(iter_records(cfg, g, workers=2))


def test_precondition_failure_before_any_realization(tmp_path):
    cfg = small_cfg(aux={"source": "manual", "R": 1, "tau": 0.3, "mu": 0.1})
    with pytest.raises(PreconditionError):
        run_campaign(cfg, output_dir=tmp_path)
    assert not (tmp_path / RECORDS).exists()


def test_failure_tagged_and_partial_records_flushed(tmp_path, monkeypatch):
    from poissonlab.experiment import campaign

    real = campaign.run_realization

    def flaky(cfg, g, p, index):
        if index == 3:
            raise ArithmeticError("boom")
        return real(cfg, g, p, index)

    monkeypatch.setattr(campaign, "run_realization", flaky)
    with pytest.raises(CampaignError) as info:
        run_campaign(small_cfg(lemma_checks=False), output_dir=tmp_path)
    assert info.value.index == 3 and isinstance(info.value.cause, ArithmeticError)
    lines = (tmp_path / RECORDS).read_text().splitlines()
    assert [json.loads(x)["index"] for x in lines] == [0, 1, 2]


# -- Wegner and Minami --------------------------------------------------------

def test_bound_arithmetic():
    assert wegner_bound(0.5, 500, 0.01) == pytest.approx(2.5)
    assert minami_bound(0.5, 500, 0.02, 2) == pytest.approx(12.5)
    assert minami_bound(0.5, 500, 0.002, 2) == pytest.approx(0.125)
    # k = 1 is the probability form of the Wegner bound
    assert minami_bound(0.5, 500, 0.003, 1) == wegner_bound(0.5, 500, 0.003)


def _fake_records(counts):
    return [{"counts": list(c)} for c in counts]


def test_wegner_and_minami_rows():
    cfg = small_cfg(alpha=1.0, count_intervals=[[0.0, 0.01], [0.0, 0.02], [0.0, 0.002]])
    rng = np.random.default_rng(0)
    counts = np.stack([rng.poisson(1.0, 200), rng.poisson(2.0, 200),
                       rng.poisson(0.05, 200)], axis=1)
    rows = wegner_check(_fake_records(counts), cfg, 500)
    assert [r.bound for r in rows] == pytest.approx([2.5, 5.0, 0.5])
    assert all(r.holds for r in rows)
    m = minami_check(_fake_records(counts), cfg, 500)
    assert m[1].bound == pytest.approx(12.5) and m[1].vacuous and m[1].holds is None
    assert m[2].bound == pytest.approx(0.125) and not m[2].vacuous and m[2].holds
    bad = wegner_check(_fake_records(counts + 10), cfg, 500)
    assert not bad[2].holds


def test_wegner_outside_enclosure_is_zero():
    cfg = small_cfg(count_intervals=[[100.0, 101.0]])
    rows = wegner_check(_fake_records(np.zeros((100, 1), int)), cfg, 60)
    assert rows[0].mean == 0 and rows[0].ratio == 0


def test_sample_size_preconditions():
    cfg = small_cfg()
    with pytest.raises(PreconditionError):
        wegner_check(_fake_records([[0]] * 99), cfg, 60)
    with pytest.raises(PreconditionError):
        minami_check(_fake_records([[0]] * 10), cfg, 60)
    with pytest.raises(PreconditionError):
        wegner_check(_fake_records([[]] * 100), small_cfg(count_intervals=[]), 60)


# -- gap statistics -----------------------------------------------------------

def test_exponential_gaps_ks():
    gaps = np.random.default_rng(1).exponential(size=10**5)
    st = spacing_statistics([np.concatenate([[0.0], np.cumsum(gaps)])])
    assert st.n_gaps == 10**5
    assert st.ks_statistic <= 0.01
    assert sum(st.histogram_counts) <= st.n_gaps


def test_picket_fence_ratio():
    st = spacing_statistics([np.arange(2001.0)])
    assert st.spacing_ratio_mean == 1.0
    assert st.ks_statistic > 0.5


def test_uniform_levels_ratio_matches_oracle():
    oracle_levels = np.random.default_rng(2).random(10**6)
    s = np.diff(np.sort(oracle_levels))
    oracle = np.mean(np.minimum(s[:-1], s[1:]) / np.maximum(s[:-1], s[1:]))
    assert oracle == pytest.approx(2 * math.log(2) - 1, abs=0.002)
    sets = np.random.default_rng(3).random((200, 40))
    st = spacing_statistics(sets)
    assert st.n_gaps == 200 * 39 and st.n_ratios == 200 * 38
    assert abs(st.spacing_ratio_mean - oracle) <= 0.01


def test_gap_statistics_from_records_and_minimum():
    recs = [{"points": list(np.random.default_rng(i).random(30))} for i in range(50)]
    assert gap_statistics(recs).n_gaps == 50 * 29
    with pytest.raises(PreconditionError):
        gap_statistics(recs[:10])


# -- error budget -------------------------------------------------------------

def test_feasibility_flags():
    K = 2
    lo, hi = proof_a_interval(K, 43 * math.log(K))
    assert lo == pytest.approx(1.975669, abs=1e-6)
    assert hi == pytest.approx(2 - 1 / 42, abs=1e-9)
    assert feasible(K, 43 * math.log(K), 0.5 * (lo + hi))
    for a in (1.1, 2.0, 5.0, 100.0):
        assert not feasible(K, 34 * math.log(K), a)
        assert not error_budget(K, 10**6, 34 * math.log(K), a)["feasible"]


def test_budget_reference_values():
    K, n, a = 2, 10**6, 1.9
    mu_s = 43 * math.log(2)
    rep = error_budget(K, n, mu_s, a)
    assert rep["R"] == 3
    mp = mpmath.mp
    mp.dps = 40
    R = 3
    tau = mpmath.mpf(2) ** (8 * R) / mpmath.mpf(n) ** 3
    q = mpmath.mpf(a - 1) / a
    want = [mpmath.mpf(2) ** (8 * R) / n, tau * n**2,
            tau ** (-4 * q) * mpmath.exp(-2 * (mpmath.mpf(mu_s) - 2 * mpmath.log(2)) * R * q) * n]
    assert rep["tau"] == pytest.approx(float(tau), rel=1e-12)
    for got, w in zip(rep["terms"], want):
        assert got == pytest.approx(float(w), rel=1e-9)
    assert rep["terms"][0] == pytest.approx(16.777216)
    assert rep["max"] == max(rep["terms"])
    assert rep["schedule_consistent"]


def test_budget_no_admissible_a():
    with pytest.raises(PreconditionError):
        proof_a_interval(2, 30 * math.log(2))


# -- command line -------------------------------------------------------------

def test_cli_roundtrip(tmp_path, capsys):
    edges = tmp_path / "g.txt"
    assert main(["generate", "--n", "60", "--seed", "5", "--out", str(edges)]) == 0
    g = random_regular(60, 3, 5)
    d = dict(SMALL, graph={"edgelist": str(edges)}, gap_window=40.0)
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(d))
    run_dir = tmp_path / "run"
    assert main(["run", str(cfg_path), "--output-dir", str(run_dir), "--workers", "2"]) == 0
    cfg = ExperimentConfig.from_dict(json.loads((run_dir / "config.json").read_text()))
    assert cfg.graph.build().fingerprint == g.fingerprint
    assert main(["verify-bounds", str(run_dir)]) == 0
    assert "comparison" in capsys.readouterr().out
    assert main(["analyze", str(run_dir), "--out", str(tmp_path / "an")]) == 0
    lines = (tmp_path / "an" / "laplace.csv").read_text().splitlines()
    assert lines[0] == "t,empirical,reference,gap,stderr" and len(lines) == 22
    assert main(["schedule", "--n", "1000000", "--mu-s", str(43 * math.log(2)), "--a", "1.9"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["params"]["R"] == 3 and rep["budget"]["feasible"] is True


def test_cli_exit_codes(tmp_path, monkeypatch):
    assert main(["run", str(tmp_path / "missing.json"), "--output-dir", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(dict(SMALL, alpha=-2)))
    assert main(["run", str(bad), "--output-dir", str(tmp_path)]) == 2
    good = tmp_path / "good.json"
    good.write_text(json.dumps(SMALL))
    monkeypatch.delenv(ENV_OUTPUT_DIR, raising=False)
    assert main(["run", str(good)]) == 2
    monkeypatch.setenv(ENV_OUTPUT_DIR, str(tmp_path / "envrun"))
    monkeypatch.setenv(ENV_WORKERS, "1")
    assert main(["run", str(good)]) == 0
    assert (tmp_path / "envrun" / RECORDS).exists()
    # a tampered record breaks the recomputed summary
    rec = tmp_path / "envrun" / RECORDS
    lines = rec.read_text().splitlines()
    first = json.loads(lines[0])
    first["nu"] += 3
    rec.write_text("\n".join([json.dumps(first, sort_keys=True)] + lines[1:]) + "\n")
    assert main(["verify-bounds", str(tmp_path / "envrun")]) == 1


@pytest.mark.slow
def test_reference_campaign_pinned(tmp_path):
    from pathlib import Path

    cfg = ExperimentConfig.load(Path(__file__).with_name("reference_campaign.json"))
    s = run_campaign(cfg, output_dir=tmp_path)
    a = s.aggregates
    assert a["config_hash"] == "fc36c5a9cd853f32"
    assert a["graph"] == "8cfce7b261e767f3"
    assert a["realizations"] == 200
    assert sum(r["nu"] for r in s.records) == 23
    assert a["omega_count"] == 131 and a["omega_prime_count"] == 0
    assert a["upper_violations"] == 0 and a["mean_eta"] == 0.0
    assert a["eta_equals_nu_fraction"] == pytest.approx(0.885)
    assert a["wegner"][0]["mean"] == pytest.approx(0.14)
    assert a["minami"][0]["probability"] == 0.0
    assert s.hard_failures == []
    assert verify_run(tmp_path)[1] == []
