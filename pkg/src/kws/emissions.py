"""Keyword specs and the emission-oracle interface.

An emission oracle stands in for a trained transducer joiner. Decoders ask it
two kinds of questions:

* keyword-track emissions: the log-probability of the next keyword token
  (``log_y``) or of blank (``log_phi``) at lattice node (t, u), where u is the
  number of keyword tokens already consumed;
* greedy-track steps (duration-aware oracles only): the argmax token and
  duration at frame t given an opaque greedy-history handle.

Generative oracles additionally answer full-vocabulary queries conditioned on
an arbitrary emitted-token history, which is what the ASR baselines need.

Oracles are immutable after construction and safe to share across concurrent
decoders; greedy-history handles are per-stream values.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapabilityError, ModeError, ValidationError

BLANK_ID = 0
NEG_INF = float("-inf")


@dataclass(frozen=True)
class KeywordSpec:
    """A keyword as a sequence of non-blank token-ids (blank y0 is implicit)."""

    name: str
    tokens: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if not self.name:
            raise ValidationError("keyword name must be non-empty")
        if len(self.tokens) < 1:
            raise ValidationError(f"keyword {self.name!r} must have at least one token")
        if any(t < 1 for t in self.tokens):
            raise ValidationError(
                f"keyword {self.name!r} has token-ids below 1 (0 is reserved for blank)"
            )

    @property
    def num_tokens(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class EmissionQuery:
    """A lattice node address: frame t in [1, T], prefix length u in [0, U]."""

    t: int
    u: int


@dataclass(frozen=True)
class KeywordEmissions:
    """log y(t,u) (next keyword token) and log phi(t,u) (blank) at one node.

    ``log_y`` is the sentinel -inf at u = U, where no next token exists.
    """

    log_y: float
    log_phi: float


@dataclass(frozen=True)
class GreedyStepOutput:
    """Argmax token/duration at one frame of the greedy track."""

    token: int
    duration: int
    log_token_prob: float
    log_duration_prob: float


class EmissionOracle(ABC):
    """Source of the log-probabilities a trained joiner would produce."""

    @property
    @abstractmethod
    def num_frames(self) -> int:
        """Total frame count T; frames are addressed 1..T."""

    @property
    @abstractmethod
    def d_max(self) -> int:
        """Maximum predictable duration; 0 means no duration track (RNN-T only)."""

    @property
    @abstractmethod
    def frame_seconds(self) -> float:
        """Wall-clock seconds represented by one frame."""

    @property
    def supports_tdt(self) -> bool:
        return self.d_max > 0

    @property
    def is_generative(self) -> bool:
        """Whether arbitrary-history full-vocabulary queries are answerable."""
        return False

    @property
    def duration_seconds(self) -> float:
        return self.num_frames * self.frame_seconds

    def _check_frame(self, t: int) -> None:
        if not 1 <= t <= self.num_frames:
            raise ValidationError(
                f"frame index {t} out of range [1, {self.num_frames}]"
            )

    @abstractmethod
    def emission_rows(self, keyword: KeywordSpec, t: int) -> tuple[np.ndarray, np.ndarray]:
        """Keyword-track emissions for one frame.

        Returns ``(log_y_row, log_phi_row)`` where ``log_y_row[u]`` is
        log y(t, u) for u in [0, U-1] and ``log_phi_row[u]`` is log phi(t, u)
        for u in [0, U]. Rows are f32 and must not be mutated by callers.
        """

    def keyword_emissions(self, keyword: KeywordSpec, query: EmissionQuery) -> KeywordEmissions:
        """Answer one (t, u) node query; see EmissionQuery for bounds."""
        self._check_frame(query.t)
        if not 0 <= query.u <= keyword.num_tokens:
            raise ValidationError(
                f"prefix length {query.u} out of range [0, {keyword.num_tokens}]"
            )
        log_y_row, log_phi_row = self.emission_rows(keyword, query.t)
        if query.u < keyword.num_tokens:
            log_y = float(log_y_row[query.u])
        else:
            log_y = NEG_INF
        return KeywordEmissions(log_y=log_y, log_phi=float(log_phi_row[query.u]))

    def initial_greedy_state(self) -> object:
        return None

    @abstractmethod
    def greedy_step(self, t: int, state: object) -> tuple[GreedyStepOutput, object]:
        """Argmax token and duration at frame t given greedy history ``state``.

        Raises ModeError when the oracle has no duration track (d_max = 0).
        """

    # Generative interface; non-generative oracles inherit the refusals.

    @property
    def vocab_size(self) -> int:
        raise CapabilityError(f"{type(self).__name__} is not generative")

    def token_log_probs(self, t: int, history: Sequence[int]) -> np.ndarray:
        """Full token distribution (V+1 log-probs, index 0 = blank) at frame t
        given the emitted non-blank token history."""
        raise CapabilityError(f"{type(self).__name__} is not generative")

    def duration_log_probs(self, t: int, history: Sequence[int] = ()) -> np.ndarray:
        """Duration distribution (D_max+1 log-probs over {0..D_max}) at frame t."""
        if not self.supports_tdt:
            raise ModeError(f"{type(self).__name__} has no duration track (d_max=0)")
        raise CapabilityError(f"{type(self).__name__} is not generative")


def query_keyword_emissions(
    oracle: EmissionOracle, keyword: KeywordSpec, query: EmissionQuery
) -> KeywordEmissions:
    """Module-level spelling of EmissionOracle.keyword_emissions."""
    return oracle.keyword_emissions(keyword, query)
