"""Realization-parallel campaigns with deterministic, index-ordered output."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..auxprocess import (AuxParams, ball_geometry, compare_eta_nu, detect_events,
                          locminami_bound, outcome_record, run_aux)
from ..errors import PreconditionError
from ..graph import Graph, VertexSet
from ..hamiltonian import assemble, sample_disorder
from ..localization import check_approx_eigenvector, envelope_constant
from ..poisson import (BernoulliFieldStats, aux_poisson_bound, chen_stein_bound,
                       laplace_table)
from ..seeding import mix_seed
from ..spectral import count_values, eigendecompose
from .analysis import error_budget, gap_statistics, minami_check, wegner_check
from .config import ExperimentConfig

RECORDS = "records.jsonl"
SUMMARY = "summary.json"
CONFIG = "config.json"


class CampaignError(RuntimeError):
    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"realization {index} failed: {cause}")
        self.index = index
        self.cause = cause


# -- single realization -------------------------------------------------------

def approx_lemma_sweep(g: Graph, h, es, R: int) -> dict:
    """Run the approximate-eigenvector check on every eigenvector of every R-ball restriction."""
    checks = failures = 0
    worst = 0.0
    for x, b in enumerate(ball_geometry(g, R)):
        sub = h.matrix[np.ix_(b.members, b.members)]
        vals, vecs = np.linalg.eigh(sub)
        bset = VertexSet(tuple(b.members.tolist()), g.fingerprint)
        for j in range(vals.size):
            psi = np.zeros(g.n)
            psi[b.members] = vecs[:, j]
            try:
                rep = check_approx_eigenvector(h, psi, bset, float(vals[j]), es)
            except PreconditionError:
                continue
            checks += 1
            failures += not rep.holds
            if rep.bound > 0:
                worst = max(worst, rep.gap / rep.bound)
    return {"checks": checks, "failures": failures, "max_gap_over_bound": worst}


def run_realization(cfg: ExperimentConfig, g: Graph, p: AuxParams | None, index: int) -> dict:
    seed = mix_seed(cfg.base_seed, index)
    w = sample_disorder(g.n, cfg.disorder, cfg.alpha, seed)
    h = assemble(g, w)
    need_vectors = cfg.lemma_checks or (p is not None and p.mu is not None)
    es = eigendecompose(h, vectors=need_vectors, method=cfg.eigensolver)
    window = cfg.window(g.n)
    rec = {"index": index, "seed": seed,
           "nu": count_values(es.values, *window.interval),
           "counts": [count_values(es.values, a, b) for a, b in cfg.count_intervals]}
    gi = cfg.gap_interval(g.n)
    if gi is not None:
        lo, hi = gi
        inside = es.values[(es.values > lo) & (es.values < hi)]
        rec["points"] = (g.n * (inside - cfg.E)).tolist()
    if p is not None:
        outcome = run_aux(g, w, window, p, method=cfg.eigensolver, h=h)
        X_n = envelope_constant(es, g, window.interval, p.mu) if p.mu is not None else None
        flags = detect_events(es, outcome, window, p, X_n)
        cmp = compare_eta_nu(outcome, es, window, flags, seed=seed, dump_dir=cfg.output_dir)
        aux = outcome_record(seed, outcome, cmp, verbose=cfg.verbose)
        aux.pop("seed")
        aux.pop("nu")
        aux["E"] = np.flatnonzero(outcome.in_E).tolist()
        rec["aux"] = aux
    if cfg.lemma_checks:
        R = p.R if p is not None else 2
        rec["lemma"] = approx_lemma_sweep(g, h, es, R)
    return rec


def encode(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, allow_nan=False)


# -- pool plumbing ------------------------------------------------------------

_STATE = {}


def _init_worker(cfg, g, p):
    _STATE["job"] = (cfg, g, p)


def _work(index):
    cfg, g, p = _STATE["job"]
    try:
        return encode(run_realization(cfg, g, p, index))
    except Exception as exc:  # re-raised in the parent with the index attached
        return CampaignError(index, exc)


def iter_records(cfg: ExperimentConfig, g: Graph, workers: int | None = None):
    """Encoded records in index order.  Raises CampaignError at the first failure."""
    p = cfg.aux_params(g)
    workers = cfg.workers if workers is None else workers
    indices = range(cfg.realizations)
    if workers <= 1:
        for i in indices:
            try:
                yield encode(run_realization(cfg, g, p, i))
            except Exception as exc:
                raise CampaignError(i, exc) from exc
        return
    chunk = max(1, min(16, cfg.realizations // (4 * workers)))
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(cfg, g, p)) as pool:
        for item in pool.map(_work, indices, chunksize=chunk):
            if isinstance(item, CampaignError):
                raise item
            yield item


# -- summary ------------------------------------------------------------------

def _mean(xs) -> float | None:
    xs = list(xs)
    return float(np.mean(xs)) if xs else None


def _json_float(x):
    return None if x is None or not math.isfinite(x) else float(x)


def summarize(records: list[dict], cfg: ExperimentConfig, g: Graph) -> dict:
    """Aggregates computed only from the records, the config and the graph."""
    n = g.n
    out = {"config_hash": cfg.config_hash, "graph": g.fingerprint, "n": n, "K": g.K,
           "realizations": len(records)}
    nus = [r["nu"] for r in records]
    out["mean_nu"] = _mean(nus)
    out["nu_per_unit_length"] = None if not nus else out["mean_nu"] / (cfg.I[1] - cfg.I[0])
    if nus:
        out["laplace_nu"] = [r.__dict__ for r in laplace_table(nus, out["mean_nu"], cfg.t_grid)]

    p = cfg.aux_params(g)
    if p is not None:
        out["aux_params"] = {k: _json_float(v) if isinstance(v, float) else v
                             for k, v in p.to_dict().items()}
        aux = [r["aux"] for r in records]
        etas = [a["eta"] for a in aux]
        flags = [a["flags"] for a in aux]
        out["mean_eta"] = _mean(etas)
        out["eta_equals_nu_fraction"] = _mean(int(e == v) for e, v in zip(etas, nus))
        out["omega_count"] = sum(f["omega"] for f in flags)
        out["omega_prime_count"] = sum(f["omega_prime"] for f in flags)
        out["omega_nonempty_count"] = sum(f["omega"] and v > 0 for f, v in zip(flags, nus))
        out["upper_violations"] = sum(f["omega"] and e > v for f, e, v in zip(flags, etas, nus))
        out["equality_violations"] = sum(f["omega_prime"] and e != v
                                         for f, e, v in zip(flags, etas, nus))
        out["mean_F_size"] = _mean(a["F_size"] for a in aux)
        out["event_rates"] = {k: _mean(int(bool(f[k])) for f in flags)
                              for k in ("endpoint_clear", "no_double", "no_double_strict",
                                        "local_no_double", "local_no_double_strict",
                                        "no_ties", "envelope_ok")}
        I_len = cfg.I[1] - cfg.I[0]
        out["locminami_bound"] = _json_float(
            locminami_bound(cfg.density_sup, I_len, g.K, p.R, n, p.tau))
        out["aux_poisson_bound"] = _json_float(
            aux_poisson_bound(cfg.density_sup, I_len, g.K, p.R, n))
        if records:
            b = np.zeros((len(records), n), dtype=np.uint8)
            for i, a in enumerate(aux):
                b[i, a["E"]] = 1
            st = BernoulliFieldStats.from_samples(b, g, 6 * p.R)
            out["lambda_bar"] = st.lambda_bar
            out["chen_stein_bound"] = chen_stein_bound(st, g)
            out["laplace_eta"] = [r.__dict__ for r in laplace_table(etas, st.lambda_bar,
                                                                     cfg.t_grid)]
        if p.source == "schedule":
            out["error_budget"] = {k: ([_json_float(t) for t in v] if isinstance(v, list)
                                       else _json_float(v) if isinstance(v, float) else v)
                                   for k, v in error_budget(g.K, n, p.mu_s, p.a).items()}

    if cfg.count_intervals and len(records) >= 100:
        out["wegner"] = [r.__dict__ for r in wegner_check(records, cfg, n)]
        out["minami"] = [r.to_dict() for r in minami_check(records, cfg, n)]
    if cfg.gap_window is not None:
        try:
            out["gaps"] = gap_statistics(records, cfg).to_dict()
        except PreconditionError as exc:
            out["gaps"] = {"skipped": str(exc)}
    if cfg.lemma_checks:
        out["lemma"] = {"checks": sum(r["lemma"]["checks"] for r in records),
                        "failures": sum(r["lemma"]["failures"] for r in records),
                        "max_gap_over_bound": max((r["lemma"]["max_gap_over_bound"]
                                                   for r in records), default=0.0)}
    return out


def hard_failures(summary: dict) -> list[str]:
    """Names of violated theorem-level checks in a summary."""
    bad = []
    if summary.get("upper_violations"):
        bad.append("eta <= nu on Omega_n")
    if summary.get("equality_violations"):
        bad.append("eta = nu on Omega'_n")
    for row in summary.get("wegner", []):
        if not row["holds"]:
            bad.append(f"wegner {row['interval']}")
    for row in summary.get("minami", []):
        if row["holds"] is False:
            bad.append(f"minami {row['interval']}")
    if summary.get("lemma", {}).get("failures"):
        bad.append("approximate eigenvector bound")
    return bad


# -- driver -------------------------------------------------------------------

@dataclass
class ExperimentSummary:
    records: list[dict]
    aggregates: dict

    @property
    def hard_failures(self) -> list[str]:
        return hard_failures(self.aggregates)


def run_campaign(cfg: ExperimentConfig, g: Graph | None = None, workers: int | None = None,
                 output_dir: str | Path | None = None) -> ExperimentSummary:
    """Run every realization, write records (and summary) and return both.

    Records are appended in index order by this process only.  On failure the
    records preceding the failing index are already on disk.
    """
    if g is None:
        g = cfg.graph.build()
    cfg.aux_params(g)  # surface parameter preconditions before touching the output directory
    out = Path(output_dir or cfg.output_dir) if (output_dir or cfg.output_dir) else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / CONFIG).write_text(cfg.to_json() + "\n")
    lines = []
    fh = open(out / RECORDS, "w") if out is not None else None
    try:
        for line in iter_records(cfg, g, workers):
            lines.append(line)
            if fh is not None:
                fh.write(line + "\n")
                fh.flush()
    finally:
        if fh is not None:
            fh.close()
    records = [json.loads(s) for s in lines]
    agg = summarize(records, cfg, g)
    if out is not None:
        (out / SUMMARY).write_text(json.dumps(agg, sort_keys=True, indent=1) + "\n")
    return ExperimentSummary(records, agg)


def read_records(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def verify_run(run_dir, g: Graph | None = None) -> tuple[dict, list[str]]:
    """Recompute the summary from stored records and list any hard failures.

    Also re-checks the per-record comparison flags and that the recomputed
    summary matches the stored one.
    """
    run_dir = Path(run_dir)
    cfg = ExperimentConfig.from_dict(json.loads((run_dir / CONFIG).read_text()))
    if g is None:
        g = cfg.graph.build()
    records = read_records(run_dir / RECORDS)
    agg = summarize(records, cfg, g)
    bad = hard_failures(agg)
    if len(records) != cfg.realizations:
        bad.append(f"record count {len(records)} != {cfg.realizations}")
    stored = run_dir / SUMMARY
    if stored.exists() and json.loads(stored.read_text()) != json.loads(
            json.dumps(agg, sort_keys=True)):
        bad.append("stored summary differs from the one recomputed from records")
    return agg, bad

