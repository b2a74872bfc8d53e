"""Streaming keyword-spotting DP search over transducer emission lattices.

The search maintains, per processed frame t, the column delta(t, 0..U) where
delta(t, u) is the best log-score over all monotonic alignment paths that have
consumed the first u keyword tokens by frame t. Recursion per column:

    delta(t, 0) = 0                                   (keyword may start anywhere)
    delta(t, u) = max(delta(t, u-1) + log_y(t, u-1),  (consume token u)
                      delta(t', u) + log_phi(t', u))  (blank over the hop)
    score(t)    = delta(t, U) + log_phi(t, U)

where t' is the previously processed frame. Ties prefer the token-consuming
transition. The first processed column has no horizontal terms (the virtual
t = 0 column contributes probability zero). In RNN-T mode every frame is
processed; in TDT mode the oracle's greedy track predicts a duration d and
frames t+1 .. t+d-1 are skipped outright (their score stays -inf and no
column is computed for them).

Everything accumulates in f64 even though oracles store f32.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from time import perf_counter
from typing import Callable, Iterable, Sequence

import numpy as np

from .emissions import EmissionOracle, KeywordSpec, NEG_INF
from .errors import ModeError, ProtocolError, ValidationError
from .metrics import SpeedCounters

RNNT = "rnnt"
TDT = "tdt"
ZERO_DURATION_POLICIES = ("clamp", "error")


@dataclass(frozen=True)
class DecodeConfig:
    """Search-time knobs; oracle-independent."""

    mode: str = RNNT
    d_max: int = 0
    zero_duration_policy: str = "clamp"
    threshold_log: float = NEG_INF
    refractory_frames: int = 34

    def __post_init__(self) -> None:
        if self.mode not in (RNNT, TDT):
            raise ValidationError(f"mode must be '{RNNT}' or '{TDT}', got {self.mode!r}")
        if self.mode == TDT and self.d_max < 1:
            raise ValidationError("TDT mode requires d_max >= 1")
        if self.zero_duration_policy not in ZERO_DURATION_POLICIES:
            raise ValidationError(
                f"zero_duration_policy must be one of {ZERO_DURATION_POLICIES}"
            )
        if math.isnan(self.threshold_log):
            raise ValidationError("threshold_log must not be NaN")
        if self.refractory_frames < 0:
            raise ValidationError("refractory_frames must be >= 0")


@dataclass
class DpColumn:
    """State carried between processed frames."""

    t_last: int
    delta: np.ndarray
    phi_last: np.ndarray


@dataclass(frozen=True)
class DetectionEvent:
    keyword: str
    frame: int
    log_score: float


@dataclass
class ScoreStream:
    """Per-frame keyword confidence for one utterance/keyword pair."""

    utt_id: str
    keyword: str
    frame_seconds: float
    scores: np.ndarray
    processed: np.ndarray
    columns_evaluated: int


class _EventGate:
    """Threshold + refractory logic shared by streaming and offline paths."""

    def __init__(self, keyword: str, config: DecodeConfig) -> None:
        self._keyword = keyword
        self._threshold = config.threshold_log
        self._refractory = config.refractory_frames
        self._last_fire: int | None = None

    def offer(self, t: int, score: float) -> DetectionEvent | None:
        if not math.isfinite(score) or score < self._threshold:
            return None
        if self._last_fire is not None and t - self._last_fire < self._refractory:
            return None
        self._last_fire = t
        return DetectionEvent(keyword=self._keyword, frame=t, log_score=score)


class StreamingDecoder:
    """Frame-at-a-time DP search; never reads ahead of the delivered frame.

    Drive it by calling ``push(t)`` for t = 1..T in order; each call returns
    the detection events fired at that frame (empty for skipped frames).
    """

    def __init__(
        self,
        oracle: EmissionOracle,
        keyword: KeywordSpec,
        config: DecodeConfig,
        utt_id: str = "",
        counters: SpeedCounters | None = None,
        column_sink: Callable[[int, list[float]], None] | None = None,
    ) -> None:
        if config.mode == TDT and not oracle.supports_tdt:
            raise ModeError(
                f"TDT decode requested but oracle has no duration track (d_max={oracle.d_max})"
            )
        self._oracle = oracle
        self._keyword = keyword
        self._config = config
        self._utt_id = utt_id
        self.counters = counters if counters is not None else SpeedCounters()
        self._column_sink = column_sink

        T = oracle.num_frames
        self._scores = np.full(T, NEG_INF, dtype=np.float64)
        self._processed = np.zeros(T, dtype=bool)
        self._columns = 0
        self._next_deliver = 1
        self._next_process = 1
        self._delta: list[float] | None = None
        self._phi_last: list[float] | None = None
        self._t_last = 0
        self._greedy_state: object = oracle.initial_greedy_state()
        self._gate = _EventGate(keyword.name, config)
        self.events: list[DetectionEvent] = []
        self._finished = False

    @property
    def column(self) -> DpColumn | None:
        """Most recently processed column, exposed for inspection."""
        if self._delta is None:
            return None
        return DpColumn(
            t_last=self._t_last,
            delta=np.asarray(self._delta, dtype=np.float64),
            phi_last=np.asarray(self._phi_last, dtype=np.float64),
        )

    def push(self, t: int) -> list[DetectionEvent]:
        """Announce that frame t is available; process or skip it."""
        if self._finished:
            raise ProtocolError("decoder already finished")
        if t != self._next_deliver:
            raise ProtocolError(
                f"frames must arrive in order: expected {self._next_deliver}, got {t}"
            )
        if t > self._oracle.num_frames:
            raise ProtocolError(f"frame {t} beyond oracle's {self._oracle.num_frames} frames")
        self._next_deliver += 1
        if t < self._next_process:
            return []  # skipped by a duration hop; score stays -inf
        return self._process(t)

    def _process(self, t: int) -> list[DetectionEvent]:
        row_y, row_phi = self._oracle.emission_rows(self._keyword, t)
        self.counters.oracle_queries += 1
        y = row_y.tolist()
        phi = row_phi.tolist()
        U = self._keyword.num_tokens

        tick = perf_counter()
        delta = [0.0] * (U + 1)
        prev_delta = self._delta
        if prev_delta is None:
            # First processed column: the virtual t=0 column carries
            # probability zero, leaving only the vertical chain.
            for u in range(1, U + 1):
                delta[u] = delta[u - 1] + y[u - 1]
        else:
            prev_phi = self._phi_last
            for u in range(1, U + 1):
                vertical = delta[u - 1] + y[u - 1]
                horizontal = prev_delta[u] + prev_phi[u]
                delta[u] = vertical if vertical >= horizontal else horizontal
        score = delta[U] + phi[U]
        self.counters.search_wall_seconds += perf_counter() - tick

        self._delta = delta
        self._phi_last = phi
        self._t_last = t
        self._scores[t - 1] = score
        self._processed[t - 1] = True
        self._columns += 1
        self.counters.columns_evaluated += 1
        if self._column_sink is not None:
            self._column_sink(t, list(delta))

        if self._config.mode == TDT:
            step, self._greedy_state = self._oracle.greedy_step(t, self._greedy_state)
            self.counters.oracle_queries += 1
            d = min(step.duration, self._config.d_max)
            if d < 1:
                if self._config.zero_duration_policy == "error":
                    raise ValidationError(
                        f"greedy track predicted duration 0 at frame {t} "
                        "(zero_duration_policy='error')"
                    )
                d = 1
            self._next_process = t + d
        else:
            self._next_process = t + 1

        event = self._gate.offer(t, score)
        if event is None:
            return []
        self.events.append(event)
        return [event]

    def finish(self) -> ScoreStream:
        self._finished = True
        return ScoreStream(
            utt_id=self._utt_id,
            keyword=self._keyword.name,
            frame_seconds=self._oracle.frame_seconds,
            scores=self._scores,
            processed=self._processed,
            columns_evaluated=self._columns,
        )


def decode_kws(
    oracle: EmissionOracle,
    keyword: KeywordSpec,
    config: DecodeConfig,
    utt_id: str = "",
    counters: SpeedCounters | None = None,
) -> ScoreStream:
    """Whole-utterance decode; returns the full ScoreStream."""
    tick = perf_counter()
    decoder = StreamingDecoder(oracle, keyword, config, utt_id=utt_id, counters=counters)
    for t in range(1, oracle.num_frames + 1):
        decoder.push(t)
    stream = decoder.finish()
    decoder.counters.total_wall_seconds += perf_counter() - tick
    return stream


def decode_kws_streaming(
    oracle: EmissionOracle,
    keyword: KeywordSpec,
    config: DecodeConfig,
    event_sink: Callable[[DetectionEvent], None] | None = None,
    utt_id: str = "",
    counters: SpeedCounters | None = None,
) -> list[DetectionEvent]:
    """Frame-at-a-time decode delivering events as they fire."""
    tick = perf_counter()
    decoder = StreamingDecoder(oracle, keyword, config, utt_id=utt_id, counters=counters)
    for t in range(1, oracle.num_frames + 1):
        for event in decoder.push(t):
            if event_sink is not None:
                event_sink(event)
    events = decoder.events
    decoder.finish()
    decoder.counters.total_wall_seconds += perf_counter() - tick
    return events


def detect_events(stream: ScoreStream, config: DecodeConfig) -> list[DetectionEvent]:
    """Recover detection events from an already-computed ScoreStream.

    Uses the same gate as the streaming path, so results are identical.
    """
    gate = _EventGate(stream.keyword, config)
    events = []
    for idx, flag in enumerate(stream.processed):
        if not flag:
            continue
        event = gate.offer(idx + 1, float(stream.scores[idx]))
        if event is not None:
            events.append(event)
    return events


def peak_events(stream: ScoreStream, refractory_frames: int) -> list[DetectionEvent]:
    """Threshold-free event extraction: greedy non-maximum suppression.

    Repeatedly takes the highest finite score (earliest frame on ties) and
    suppresses +-refractory_frames around it. The causal gate above is the
    live-detection path; this offline form yields the per-utterance event
    list that threshold sweeps rank, since the event at a peak would fire at
    any threshold at or below its score.
    """
    if refractory_frames < 0:
        raise ValidationError("refractory_frames must be >= 0")
    scores = stream.scores
    n = len(scores)
    order = np.lexsort((np.arange(n), -scores))
    suppressed = np.zeros(n, dtype=bool)
    events = []
    for idx in order:
        score = float(scores[idx])
        if suppressed[idx] or math.isinf(score):
            continue
        events.append(DetectionEvent(stream.keyword, int(idx) + 1, score))
        lo = max(0, idx - refractory_frames)
        suppressed[lo : idx + refractory_frames + 1] = True
    events.sort(key=lambda e: e.frame)
    return events


def dump_delta_matrix(oracle: EmissionOracle, keyword: KeywordSpec, config: DecodeConfig) -> str:
    """CSV of delta(t, u) over all processed frames; skipped frames are empty cells."""
    captured: dict[int, list[float]] = {}
    decoder = StreamingDecoder(
        oracle, keyword, config, column_sink=lambda t, delta: captured.__setitem__(t, delta)
    )
    for t in range(1, oracle.num_frames + 1):
        decoder.push(t)
    decoder.finish()

    U = keyword.num_tokens
    lines = ["t," + ",".join(f"u{u}" for u in range(U + 1))]
    for t in range(1, oracle.num_frames + 1):
        delta = captured.get(t)
        if delta is None:
            lines.append(str(t) + "," * (U + 1))
        else:
            lines.append(str(t) + "," + ",".join(repr(v) for v in delta))
    return "\n".join(lines) + "\n"


def _encode_float(value: float) -> float | str:
    if value == NEG_INF:
        return "-inf"
    if value == math.inf:
        return "inf"
    return float(value)


def _decode_float(value: float | str) -> float:
    if isinstance(value, str):
        return float(value)
    return float(value)


def scorestream_record(stream: ScoreStream, events: Sequence[DetectionEvent]) -> dict:
    """JSON-safe record for one utterance (-inf encoded as the string "-inf")."""
    return {
        "utt_id": stream.utt_id,
        "keyword": stream.keyword,
        "frame_seconds": stream.frame_seconds,
        "scores": [_encode_float(s) for s in stream.scores.tolist()],
        "processed": [bool(p) for p in stream.processed.tolist()],
        "columns_evaluated": stream.columns_evaluated,
        "events": [
            {"keyword": e.keyword, "frame": e.frame, "log_score": _encode_float(e.log_score)}
            for e in events
        ],
    }


def parse_scorestream_record(record: dict) -> tuple[ScoreStream, list[DetectionEvent]]:
    stream = ScoreStream(
        utt_id=record["utt_id"],
        keyword=record["keyword"],
        frame_seconds=record["frame_seconds"],
        scores=np.array([_decode_float(s) for s in record["scores"]], dtype=np.float64),
        processed=np.array(record["processed"], dtype=bool),
        columns_evaluated=record["columns_evaluated"],
    )
    events = [
        DetectionEvent(
            keyword=e["keyword"], frame=e["frame"], log_score=_decode_float(e["log_score"])
        )
        for e in record.get("events", [])
    ]
    return stream, events


def write_scorestream_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
