"""Suite-level orchestration: batch decode, benchmark reports, oracle checks.

Benchmark oracle policy: positives decode through their on-disk lattice
(replay path; file load time is charged to total wall time), negatives decode
generatively against every keyword under test (a v1 lattice stores only one
keyword conditioning). ASR baseline rows always use the generative oracle.

With --jobs N, per-utterance decodes run in a process pool; results are
aggregated in manifest order and wall counters are sums of per-decode
durations, so N never changes any deterministic output.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from time import perf_counter
from typing import Iterable, Sequence

import numpy as np

from .baselines import AsrConfig, Hypothesis, beam_search, greedy_search, keyword_hit
from .brute_force import brute_force_score
from .decoder import (
    DecodeConfig,
    decode_kws,
    detect_events,
    peak_events,
    scorestream_record,
)
from .emissions import KeywordSpec, NEG_INF
from .errors import ValidationError
from .lattice import FileLatticeOracle, LatticeData, load_lattice
from .metrics import RecallAtFar, SpeedCounters, macro_recall, recall_at_far, speedup
from .suite import SuiteManifest
from .synthetic import SyntheticJoinerConfig, SyntheticOracle

REPORT_SCHEMA = "kws-bench-report@1"


def _encode_float(value: float) -> float | str:
    if value == NEG_INF:
        return "-inf"
    if value == math.inf:
        return "inf"
    return float(value)


def _config_echo(config: DecodeConfig) -> dict:
    echo = asdict(config)
    echo["threshold_log"] = _encode_float(config.threshold_log)
    return echo


# One decode job, picklable for process pools.
@dataclass(frozen=True)
class _DecodeJob:
    utt_id: str
    kind: str  # "file" | "synth"
    lattice_path: str | None
    synth: dict | None
    keyword_name: str
    keyword_tokens: tuple[int, ...]
    config: tuple  # (mode, d_max, zero_duration_policy, threshold_log, refractory_frames)
    full_record: bool
    # "causal": the live gate (streaming semantics, honors the threshold).
    # "peaks": threshold-free non-maximum suppression, for benchmark sweeps.
    event_policy: str = "causal"


def _job_config(job: _DecodeJob) -> DecodeConfig:
    mode, d_max, policy, threshold_log, refractory = job.config
    return DecodeConfig(
        mode=mode,
        d_max=d_max,
        zero_duration_policy=policy,
        threshold_log=threshold_log,
        refractory_frames=refractory,
    )


def _run_decode_job(job: _DecodeJob) -> dict:
    config = _job_config(job)
    keyword = KeywordSpec(job.keyword_name, job.keyword_tokens)
    counters = SpeedCounters()
    if job.kind == "file":
        tick = perf_counter()
        oracle = load_lattice(job.lattice_path)
        counters.total_wall_seconds += perf_counter() - tick
    else:
        oracle = SyntheticOracle(SyntheticJoinerConfig.from_json_dict(job.synth))
    stream = decode_kws(oracle, keyword, config, utt_id=job.utt_id, counters=counters)
    if job.event_policy == "peaks":
        events = peak_events(stream, config.refractory_frames)
    else:
        events = detect_events(stream, config)
    out = {
        "utt_id": job.utt_id,
        "event_scores": [e.log_score for e in events],
        "counters": (
            counters.columns_evaluated,
            counters.oracle_queries,
            counters.search_wall_seconds,
            counters.total_wall_seconds,
        ),
    }
    if job.full_record:
        out["record"] = scorestream_record(stream, events)
    return out


def _run_jobs(jobs: Sequence[_DecodeJob], workers: int) -> list[dict]:
    if workers <= 1 or len(jobs) <= 1:
        return [_run_decode_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_decode_job, jobs, chunksize=8))


def _config_tuple(config: DecodeConfig) -> tuple:
    return (
        config.mode,
        config.d_max,
        config.zero_duration_policy,
        config.threshold_log,
        config.refractory_frames,
    )


def decode_suite(suite: SuiteManifest, config: DecodeConfig, jobs: int = 1) -> list[dict]:
    """Decode every utterance against its lattice keyword; returns JSONL records."""
    by_name = suite.keywords_by_name
    decode_jobs = []
    for utt in sorted(suite.utterances, key=lambda u: u.utt_id):
        keyword = by_name[utt.lattice_keyword]
        decode_jobs.append(
            _DecodeJob(
                utt_id=utt.utt_id,
                kind="file",
                lattice_path=str(suite.lattice_path(utt)),
                synth=None,
                keyword_name=keyword.name,
                keyword_tokens=keyword.tokens,
                config=_config_tuple(config),
                full_record=True,
            )
        )
    results = _run_jobs(decode_jobs, jobs)
    return [r["record"] for r in sorted(results, key=lambda r: r["utt_id"])]


def _counters_from(results: Iterable[dict]) -> SpeedCounters:
    total = SpeedCounters()
    for r in results:
        c, q, s, t = r["counters"]
        total.add(SpeedCounters(c, q, s, t))
    return total


def _recall_entry(keyword: str, rar: RecallAtFar, negative_events: int) -> dict:
    return {
        "keyword": keyword,
        "recall": rar.recall,
        "threshold": _encode_float(rar.threshold),
        "false_alarms": rar.false_alarms,
        "fa_per_hour": rar.fa_per_hour,
        # All events observed on negative audio, before any thresholding.
        "negative_events": negative_events,
    }


def _bench_one_run(
    suite: SuiteManifest,
    epsilon: float,
    config: DecodeConfig,
    target_far: float,
    jobs: int,
) -> tuple[dict, SpeedCounters]:
    # Events are collected with an open threshold; operating points are swept
    # afterwards from the observed scores.
    collect = replace(config, threshold_log=NEG_INF)
    negatives = sorted(suite.negatives(epsilon), key=lambda u: u.utt_id)
    neg_hours = sum(u.duration_seconds for u in negatives) / 3600.0
    counters = SpeedCounters()
    per_keyword = []
    for keyword in suite.keywords:
        positives = sorted(suite.positives(keyword.name, epsilon), key=lambda u: u.utt_id)
        pos_jobs = [
            _DecodeJob(
                utt_id=u.utt_id,
                kind="file",
                lattice_path=str(suite.lattice_path(u)),
                synth=None,
                keyword_name=keyword.name,
                keyword_tokens=keyword.tokens,
                config=_config_tuple(collect),
                full_record=False,
                event_policy="peaks",
            )
            for u in positives
        ]
        neg_jobs = [
            _DecodeJob(
                utt_id=u.utt_id,
                kind="synth",
                lattice_path=None,
                synth=u.synth.to_json_dict(),
                keyword_name=keyword.name,
                keyword_tokens=keyword.tokens,
                config=_config_tuple(collect),
                full_record=False,
                event_policy="peaks",
            )
            for u in negatives
        ]
        pos_results = _run_jobs(pos_jobs, jobs)
        neg_results = _run_jobs(neg_jobs, jobs)
        counters.add(_counters_from(pos_results))
        counters.add(_counters_from(neg_results))
        pos_scores = [
            max(r["event_scores"], default=NEG_INF) for r in pos_results
        ]
        neg_scores = [s for r in neg_results for s in r["event_scores"]]
        rar = recall_at_far(pos_scores, neg_scores, neg_hours, target_far)
        per_keyword.append(_recall_entry(keyword.name, rar, len(neg_scores)))
    run = {
        "per_keyword": per_keyword,
        "macro_recall": macro_recall([e["recall"] for e in per_keyword]),
        "counters": counters.to_json_dict(),
    }
    return run, counters


def _asr_transcripts(
    suite: SuiteManifest, epsilon: float, config: AsrConfig, beam_width: int | None
) -> dict[str, Hypothesis]:
    """Transcribe every utterance in the epsilon group once (label-independent)."""
    transcripts = {}
    utts = [u for u in suite.utterances if u.epsilon == epsilon]
    for utt in sorted(utts, key=lambda u: u.utt_id):
        oracle = SyntheticOracle(utt.synth)
        if beam_width is None:
            transcripts[utt.utt_id] = greedy_search(oracle, config)
        else:
            transcripts[utt.utt_id] = beam_search(oracle, beam_width, config)[0]
    return transcripts


def _asr_row(
    suite: SuiteManifest,
    epsilon: float,
    transcripts: dict[str, Hypothesis],
    target_far: float,
) -> dict:
    """Containment recall at the FA budget, from degenerate hit/miss scores."""
    negatives = sorted(suite.negatives(epsilon), key=lambda u: u.utt_id)
    neg_hours = sum(u.duration_seconds for u in negatives) / 3600.0
    per_keyword = []
    for keyword in suite.keywords:
        positives = sorted(suite.positives(keyword.name, epsilon), key=lambda u: u.utt_id)
        pos_scores = [
            0.0 if keyword_hit(transcripts[u.utt_id], keyword)[0] else NEG_INF
            for u in positives
        ]
        neg_scores = [
            0.0 for u in negatives if keyword_hit(transcripts[u.utt_id], keyword)[0]
        ]
        rar = recall_at_far(pos_scores, neg_scores, neg_hours, target_far)
        per_keyword.append(_recall_entry(keyword.name, rar, len(neg_scores)))
    return {
        "per_keyword": per_keyword,
        "macro_recall": macro_recall([e["recall"] for e in per_keyword]),
    }


def bench(
    suite: SuiteManifest,
    baseline: DecodeConfig,
    candidate: DecodeConfig,
    target_far: float,
    also_asr_baselines: bool = False,
    beam_width: int = 10,
    jobs: int = 1,
) -> dict:
    """Full benchmark report across the suite's epsilon groups."""
    if target_far < 0:
        raise ValidationError("target_far must be >= 0")
    groups = []
    for epsilon in sorted(set(u.epsilon for u in suite.utterances)):
        baseline_run, baseline_counters = _bench_one_run(
            suite, epsilon, baseline, target_far, jobs
        )
        candidate_run, candidate_counters = _bench_one_run(
            suite, epsilon, candidate, target_far, jobs
        )
        group = {
            "epsilon": epsilon,
            "negative_hours": sum(u.duration_seconds for u in suite.negatives(epsilon))
            / 3600.0,
            "baseline": baseline_run,
            "candidate": candidate_run,
            "speedup": speedup(baseline_counters, candidate_counters).to_json_dict(),
        }
        if also_asr_baselines:
            asr = {}
            greedy_cfg = AsrConfig(mode="rnnt")
            asr["greedy_rnnt"] = _asr_row(
                suite, epsilon, _asr_transcripts(suite, epsilon, greedy_cfg, None), target_far
            )
            asr[f"beam{beam_width}_rnnt"] = _asr_row(
                suite,
                epsilon,
                _asr_transcripts(suite, epsilon, greedy_cfg, beam_width),
                target_far,
            )
            if suite.d_max > 0:
                tdt_cfg = AsrConfig(
                    mode="tdt",
                    d_max=candidate.d_max if candidate.mode == "tdt" else suite.d_max,
                )
                asr["greedy_tdt"] = _asr_row(
                    suite, epsilon, _asr_transcripts(suite, epsilon, tdt_cfg, None), target_far
                )
            group["asr"] = asr
        groups.append(group)
    return {
        "schema": REPORT_SCHEMA,
        "suite_seed": suite.seed,
        "target_far": target_far,
        "beam_width": beam_width if also_asr_baselines else None,
        "runs": {"baseline": _config_echo(baseline), "candidate": _config_echo(candidate)},
        "groups": groups,
    }


def format_report_table(report: dict) -> str:
    """Fixed-width stdout table mirroring the decoding-comparison layout."""
    lines = []
    base_cfg = report["runs"]["baseline"]
    cand_cfg = report["runs"]["candidate"]
    for group in report["groups"]:
        lines.append(
            f"epsilon={group['epsilon']:.2f}  negatives={group['negative_hours']:.3f}h  "
            f"target_far={report['target_far']:g}/h"
        )
        header = f"  {'model':<12}{'algorithm':<16}{'macro-recall':>12}{'columns':>12}{'col-ratio':>11}"
        lines.append(header)
        rows = [
            (base_cfg["mode"], "proposed", group["baseline"], ""),
            (cand_cfg["mode"], "proposed", group["candidate"], f"{group['speedup']['column_ratio']:.2f}x"),
        ]
        for model, algorithm, run, ratio in rows:
            lines.append(
                f"  {model:<12}{algorithm:<16}{run['macro_recall']:>12.3f}"
                f"{run['counters']['columns_evaluated']:>12}{ratio:>11}"
            )
        for name, row in group.get("asr", {}).items():
            algorithm, _, model = name.partition("_")
            lines.append(
                f"  {model:<12}{algorithm + '-asr':<16}{row['macro_recall']:>12.3f}"
                f"{'':>12}{'':>11}"
            )
        lines.append("")
    return "\n".join(lines)


def random_proper_lattice(
    rng: np.random.Generator,
    t_max: int = 12,
    u_max: int = 4,
    d_max: int = 0,
    duration_value: int | None = None,
    keyword_name: str = "kw",
    frame_seconds: float = 0.03,
) -> LatticeData:
    """Random normalized lattice: one Dirichlet draw per (t, u) node."""
    T = int(rng.integers(1, t_max + 1))
    U = int(rng.integers(1, u_max + 1))
    V = max(U, int(rng.integers(2, 7)))
    tokens = tuple(int(t) + 1 for t in rng.permutation(V)[:U])
    dist = rng.dirichlet(np.ones(V + 1), size=(T, U + 1))
    with np.errstate(divide="ignore"):
        log_dist = np.log(dist)
    log_phi = log_dist[:, :, 0].astype(np.float32)
    log_y = np.empty((T, U), dtype=np.float32)
    for u, token in enumerate(tokens):
        log_y[:, u] = log_dist[:, u, token]
    greedy_tokens = greedy_durations = None
    if d_max > 0:
        greedy_tokens = rng.integers(0, V + 1, size=T).astype(np.uint32)
        if duration_value is None:
            greedy_durations = rng.integers(0, d_max + 1, size=T).astype(np.uint16)
        else:
            greedy_durations = np.full(T, duration_value, dtype=np.uint16)
    return LatticeData(
        keyword=KeywordSpec(keyword_name, tokens),
        frame_seconds=frame_seconds,
        log_y=log_y,
        log_phi=log_phi,
        d_max=d_max,
        greedy_tokens=greedy_tokens,
        greedy_durations=greedy_durations,
    )


def oracle_check(cases: int, seed: int, t_max: int = 12, u_max: int = 4) -> dict:
    """DP-vs-brute-force equivalence sweep over random proper lattices."""
    if cases < 1:
        raise ValidationError("cases must be >= 1")
    if t_max > 12 or u_max > 4:
        raise ValidationError("brute force is capped at t_max <= 12, u_max <= 4")
    rng = np.random.default_rng(seed)
    config = DecodeConfig(mode="rnnt")
    max_dev = 0.0
    for case in range(cases):
        data = random_proper_lattice(rng, t_max=t_max, u_max=u_max)
        oracle = FileLatticeOracle(data)
        stream = decode_kws(oracle, data.keyword, config)
        for t in range(1, oracle.num_frames + 1):
            reference, _ = brute_force_score(oracle, data.keyword, t)
            got = float(stream.scores[t - 1])
            if math.isinf(reference) and math.isinf(got):
                continue
            max_dev = max(max_dev, abs(reference - got))
    return {"cases": cases, "seed": seed, "max_abs_deviation": max_dev}
