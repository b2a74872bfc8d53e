"""Generative synthetic emission oracle built from a planted alignment.

The utterance timeline is a list of non-overlapping token segments; frames not
covered by any segment are gaps (ideal symbol = blank). Emission distributions
mix a point mass on the ideal symbol with uniform noise mass epsilon spread
over all V+1 symbols:

    mass(sym) = epsilon / (V + 1) + (1 - epsilon) * [sym == ideal]

so at epsilon = 0 distributions are point masses and at epsilon = 0.5, V = 9
the ideal symbol carries 0.55 and every other symbol 0.05.

Ideal symbols per track:

* keyword track at (t, u): blank on gaps; inside a matched keyword occurrence
  whose position within the keyword is m, blank when m <= u (that token is
  already consumed by the prefix) else the segment token; the segment token on
  filler segments. This is the minimal conditioning under which the planted
  alignment path scores 1 at epsilon = 0.
* generative track at (t, n) where n = emitted non-blank token count: blank on
  gaps; blank when the covering segment's ordinal j satisfies j <= n; else the
  segment token.

The duration track is history-independent: at every frame of a segment the
ideal duration is min(segment duration, D_max); on gaps it is 1. The duration
distribution puts ``duration_concentration`` mass on the ideal duration and
spreads the rest uniformly over the other D_max values of {0..D_max}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .emissions import BLANK_ID, EmissionOracle, GreedyStepOutput, KeywordSpec, NEG_INF
from .errors import ModeError, ValidationError


@dataclass(frozen=True)
class SyntheticJoinerConfig:
    """Planted ground truth plus noise/duration knobs for one utterance.

    ``alignment`` entries are (token_id, start_frame, duration_frames) with
    1-based start frames. ``seed`` records the RNG state that drew the
    alignment (suite generation); emissions themselves are a closed-form
    function of the alignment and epsilon.
    """

    vocab_size: int
    num_frames: int
    alignment: tuple[tuple[int, int, int], ...]
    epsilon: float = 0.0
    d_max: int = 0
    duration_concentration: float = 1.0
    seed: int = 0
    frame_seconds: float = 0.03

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "alignment",
            tuple((int(a), int(b), int(c)) for a, b, c in self.alignment),
        )
        if self.vocab_size < 1:
            raise ValidationError("vocab_size must be >= 1")
        if self.num_frames < 1:
            raise ValidationError("num_frames must be >= 1")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValidationError(f"epsilon must be in [0, 1), got {self.epsilon}")
        if self.d_max < 0:
            raise ValidationError("d_max must be >= 0")
        if not 0.0 < self.duration_concentration <= 1.0:
            raise ValidationError("duration_concentration must be in (0, 1]")
        if self.frame_seconds <= 0:
            raise ValidationError("frame_seconds must be > 0")
        last_end = 0
        for token, start, duration in sorted(self.alignment, key=lambda s: s[1]):
            if not 1 <= token <= self.vocab_size:
                raise ValidationError(f"segment token {token} outside [1, {self.vocab_size}]")
            if duration < 1:
                raise ValidationError("segment duration must be >= 1")
            if start < 1 or start + duration - 1 > self.num_frames:
                raise ValidationError(
                    f"segment ({token},{start},{duration}) outside frames [1, {self.num_frames}]"
                )
            if start <= last_end:
                raise ValidationError("segments overlap")
            last_end = start + duration - 1

    def to_json_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "num_frames": self.num_frames,
            "alignment": [list(seg) for seg in self.alignment],
            "epsilon": self.epsilon,
            "d_max": self.d_max,
            "duration_concentration": self.duration_concentration,
            "seed": self.seed,
            "frame_seconds": self.frame_seconds,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SyntheticJoinerConfig":
        return cls(
            vocab_size=data["vocab_size"],
            num_frames=data["num_frames"],
            alignment=tuple(tuple(seg) for seg in data["alignment"]),
            epsilon=data["epsilon"],
            d_max=data["d_max"],
            duration_concentration=data["duration_concentration"],
            seed=data["seed"],
            frame_seconds=data["frame_seconds"],
        )


class SyntheticOracle(EmissionOracle):
    """Emission oracle answering all tracks for one SyntheticJoinerConfig."""

    def __init__(self, config: SyntheticJoinerConfig) -> None:
        self._cfg = config
        segments = sorted(config.alignment, key=lambda s: s[1])
        self._seg_tokens = tuple(token for token, _, _ in segments)

        T = config.num_frames
        # Per-frame planted state, 0-indexed by t-1: covering token (0 = gap),
        # covering segment ordinal (1-based, 0 = gap), covering segment duration.
        self._content = np.zeros(T, dtype=np.int64)
        self._seg_ord = np.zeros(T, dtype=np.int64)
        self._seg_dur = np.zeros(T, dtype=np.int64)
        for ordinal, (token, start, duration) in enumerate(segments, start=1):
            sl = slice(start - 1, start - 1 + duration)
            self._content[sl] = token
            self._seg_ord[sl] = ordinal
            self._seg_dur[sl] = duration

        V = config.vocab_size
        eps = config.epsilon
        # eps/(V+1) can underflow to exactly 0 for subnormal eps; log(0) = -inf.
        noise = eps / (V + 1)
        self._log_noise = math.log(noise) if noise > 0 else NEG_INF
        self._log_ideal = math.log(noise + (1.0 - eps))

        self._grid_cache: dict[tuple[str, tuple[int, ...]], tuple[np.ndarray, np.ndarray]] = {}
        self._kw_pos_cache: dict[tuple[int, ...], np.ndarray] = {}

    @property
    def config(self) -> SyntheticJoinerConfig:
        return self._cfg

    @property
    def num_frames(self) -> int:
        return self._cfg.num_frames

    @property
    def d_max(self) -> int:
        return self._cfg.d_max

    @property
    def frame_seconds(self) -> float:
        return self._cfg.frame_seconds

    @property
    def is_generative(self) -> bool:
        return True

    @property
    def vocab_size(self) -> int:
        return self._cfg.vocab_size

    # Keyword track

    def _keyword_positions(self, keyword: KeywordSpec) -> np.ndarray:
        """Per-frame keyword position m in [1, U] inside matched occurrences, else 0.

        Occurrences are non-overlapping runs of consecutive segments whose
        tokens equal keyword.tokens, matched greedily left to right.
        """
        key = keyword.tokens
        cached = self._kw_pos_cache.get(key)
        if cached is not None:
            return cached
        if any(t > self._cfg.vocab_size for t in key):
            raise ValidationError(
                f"keyword {keyword.name!r} has token-ids above vocab_size {self._cfg.vocab_size}"
            )
        U = len(key)
        pos = np.zeros(self._cfg.num_frames, dtype=np.int64)
        toks = self._seg_tokens
        i = 0
        while i + U <= len(toks):
            if toks[i : i + U] == key:
                for j in range(U):
                    pos[self._seg_ord == i + 1 + j] = j + 1
                i += U
            else:
                i += 1
        self._kw_pos_cache[key] = pos
        return pos

    def _grids(self, keyword: KeywordSpec) -> tuple[np.ndarray, np.ndarray]:
        """f32 grids (log_y (T,U), log_phi (T,U+1)) for one keyword conditioning."""
        key = (keyword.name, keyword.tokens)
        cached = self._grid_cache.get(key)
        if cached is not None:
            return cached
        T = self._cfg.num_frames
        U = keyword.num_tokens
        pos = self._keyword_positions(keyword)
        log_y = np.empty((T, U), dtype=np.float32)
        log_phi = np.empty((T, U + 1), dtype=np.float32)
        content = self._content
        for u in range(U + 1):
            ideal = content.copy()
            ideal[(pos > 0) & (pos <= u)] = BLANK_ID
            log_phi[:, u] = np.where(ideal == BLANK_ID, self._log_ideal, self._log_noise)
            if u < U:
                log_y[:, u] = np.where(ideal == keyword.tokens[u], self._log_ideal, self._log_noise)
        grids = (log_y, log_phi)
        self._grid_cache[key] = grids
        return grids

    def emission_rows(self, keyword: KeywordSpec, t: int) -> tuple[np.ndarray, np.ndarray]:
        self._check_frame(t)
        log_y, log_phi = self._grids(keyword)
        return log_y[t - 1], log_phi[t - 1]

    def keyword_conditional_log_probs(self, keyword: KeywordSpec, t: int, u: int) -> np.ndarray:
        """Full V+1 distribution behind the keyword-track node (t, u)."""
        self._check_frame(t)
        if not 0 <= u <= keyword.num_tokens:
            raise ValidationError(f"prefix length {u} out of range [0, {keyword.num_tokens}]")
        pos = self._keyword_positions(keyword)
        ideal = int(self._content[t - 1])
        m = int(pos[t - 1])
        if m and m <= u:
            ideal = BLANK_ID
        vec = np.full(self._cfg.vocab_size + 1, self._log_noise, dtype=np.float64)
        vec[ideal] = self._log_ideal
        return vec

    # Generative track

    def _generative_ideal(self, t: int, emitted: int) -> int:
        ordinal = int(self._seg_ord[t - 1])
        if ordinal == 0 or ordinal <= emitted:
            return BLANK_ID
        return int(self._content[t - 1])

    def token_log_probs(self, t: int, history: Sequence[int]) -> np.ndarray:
        self._check_frame(t)
        ideal = self._generative_ideal(t, len(history))
        vec = np.full(self._cfg.vocab_size + 1, self._log_noise, dtype=np.float64)
        vec[ideal] = self._log_ideal
        return vec

    def duration_log_probs(self, t: int, history: Sequence[int] = ()) -> np.ndarray:
        if not self.supports_tdt:
            raise ModeError("oracle has no duration track (d_max=0)")
        self._check_frame(t)
        gamma = self._cfg.duration_concentration
        d_max = self._cfg.d_max
        with np.errstate(divide="ignore"):
            vec = np.full(d_max + 1, np.log((1.0 - gamma) / d_max), dtype=np.float64)
        vec[self._ideal_duration(t)] = math.log(gamma)
        return vec

    def _ideal_duration(self, t: int) -> int:
        if self._seg_ord[t - 1] == 0:
            return 1
        return int(min(self._seg_dur[t - 1], self._cfg.d_max))

    # Greedy track

    def initial_greedy_state(self) -> int:
        return 0

    def greedy_step(self, t: int, state: object) -> tuple[GreedyStepOutput, int]:
        if not self.supports_tdt:
            raise ModeError("oracle has no duration track (d_max=0)")
        self._check_frame(t)
        emitted = int(state) if state is not None else 0
        # The mixed distribution's argmax is the ideal symbol for every
        # epsilon < 1 (it carries strictly more mass), so no vector is built.
        token = self._generative_ideal(t, emitted)
        duration_vec = self.duration_log_probs(t)
        duration = int(np.argmax(duration_vec))
        out = GreedyStepOutput(
            token=token,
            duration=duration,
            log_token_prob=self._log_ideal,
            log_duration_prob=float(duration_vec[duration]),
        )
        return out, emitted + (1 if token != BLANK_ID else 0)

    def canonical_greedy_track(self) -> tuple[np.ndarray, np.ndarray]:
        """One greedy step per frame t = 1..T threading the history state.

        This pass defines the greedy channel stored in snapshot files.
        """
        T = self._cfg.num_frames
        tokens = np.zeros(T, dtype=np.uint32)
        durations = np.zeros(T, dtype=np.uint16)
        state: object = self.initial_greedy_state()
        for t in range(1, T + 1):
            out, state = self.greedy_step(t, state)
            tokens[t - 1] = out.token
            durations[t - 1] = out.duration
        return tokens, durations
