"""Brute-force alignment enumeration for property-testing the DP search.

A path emits the keyword's U tokens in order. It starts with a vertical
(token-consuming) move at any processed frame; at zero prior cost, mirroring
the search's free start delta(t, 0) = 1. From node (f, u) it may move
vertically to (f, u+1) at cost log_y(f, u) or horizontally to the next
processed frame f' at cost log_phi(f, u). A path is complete when it sits at
(end_frame, U); the caller's Score adds log_phi(end_frame, U) on top.

Pinning the first move to be vertical makes every path unique (a leading
horizontal would be identical to starting later), so with m processed frames
the path count is exactly C(m - 1 + U, U).

This is exponential by design and hard-capped at end_frame <= 12, U <= 4;
larger instances raise instead of approximating.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Iterator, Sequence

from .emissions import EmissionOracle, KeywordSpec, NEG_INF
from .errors import SizeLimitError, ValidationError

MAX_END_FRAME = 12
MAX_TOKENS = 4

VERTICAL = "vertical"
HORIZONTAL = "horizontal"


@dataclass(frozen=True)
class AlignmentPath:
    """entries = (t, u, move) after each move; log_score sums the move costs."""

    entries: tuple[tuple[int, int, str], ...]
    log_score: float


def count_alignment_paths(num_processed: int, num_tokens: int) -> int:
    """Closed form for the number of paths ending at the last processed frame."""
    if num_processed < 1:
        return 0
    return comb(num_processed - 1 + num_tokens, num_tokens)


def _check_size(end_frame: int, keyword: KeywordSpec) -> None:
    if end_frame > MAX_END_FRAME or keyword.num_tokens > MAX_TOKENS:
        raise SizeLimitError(
            f"brute force capped at end_frame <= {MAX_END_FRAME} and U <= {MAX_TOKENS}; "
            f"got end_frame={end_frame}, U={keyword.num_tokens}"
        )


def _frames_upto(
    oracle: EmissionOracle, end_frame: int, hop_sequence: Sequence[int] | None
) -> list[int]:
    if end_frame < 1 or end_frame > oracle.num_frames:
        raise ValidationError(f"end_frame {end_frame} outside [1, {oracle.num_frames}]")
    if hop_sequence is None:
        return list(range(1, end_frame + 1))
    frames = [int(f) for f in hop_sequence]
    if any(b <= a for a, b in zip(frames, frames[1:])):
        raise ValidationError("hop_sequence must be strictly increasing")
    if frames and frames[0] < 1:
        raise ValidationError("hop_sequence frames must be >= 1")
    # Hops beyond end_frame cannot matter to paths ending there.
    return [f for f in frames if f <= end_frame]


def enumerate_alignment_paths(
    oracle: EmissionOracle,
    keyword: KeywordSpec,
    end_frame: int,
    hop_sequence: Sequence[int] | None = None,
) -> Iterator[AlignmentPath]:
    """Yield every complete path ending at (end_frame, U), scores excluded
    of the final blank factor."""
    _check_size(end_frame, keyword)
    frames = _frames_upto(oracle, end_frame, hop_sequence)
    if not frames or frames[-1] != end_frame:
        return
    U = keyword.num_tokens
    y = []
    phi = []
    for f in frames:
        row_y, row_phi = oracle.emission_rows(keyword, f)
        y.append([float(v) for v in row_y])
        phi.append([float(v) for v in row_phi])
    last = len(frames) - 1

    def walk(i: int, u: int, score: float, entries: list) -> Iterator[AlignmentPath]:
        if u == U:
            if i == last:
                yield AlignmentPath(tuple(entries), score)
        else:
            entries.append((frames[i], u + 1, VERTICAL))
            yield from walk(i, u + 1, score + y[i][u], entries)
            entries.pop()
        if i < last:
            entries.append((frames[i + 1], u, HORIZONTAL))
            yield from walk(i + 1, u, score + phi[i][u], entries)
            entries.pop()

    for start in range(len(frames)):
        # First move is the vertical at the start frame.
        entries = [(frames[start], 1, VERTICAL)]
        yield from walk(start, 1, y[start][0], entries)


def brute_force_score(
    oracle: EmissionOracle,
    keyword: KeywordSpec,
    end_frame: int,
    hop_sequence: Sequence[int] | None = None,
) -> tuple[float, AlignmentPath | None]:
    """Reference Score[end_frame]: max path score plus log_phi(end_frame, U).

    ``hop_sequence`` lists the processed frames (all frames when None).
    Returns (-inf, None) when end_frame is not a processed frame.
    """
    _check_size(end_frame, keyword)
    frames = _frames_upto(oracle, end_frame, hop_sequence)
    if not frames or frames[-1] != end_frame:
        return NEG_INF, None
    U = keyword.num_tokens
    y = []
    phi = []
    for f in frames:
        row_y, row_phi = oracle.emission_rows(keyword, f)
        y.append([float(v) for v in row_y])
        phi.append([float(v) for v in row_phi])
    last = len(frames) - 1

    best_score = NEG_INF
    best_path: AlignmentPath | None = None
    # Score-only DFS mirroring enumerate_alignment_paths; left-to-right
    # accumulation matches the DP's association order, so agreement is exact.
    stack: list[tuple[int, int, float, tuple]] = []
    for start in range(len(frames)):
        stack.append((start, 1, y[start][0], ((frames[start], 1, VERTICAL),)))
    while stack:
        i, u, score, entries = stack.pop()
        if u == U and i == last:
            if best_path is None or score > best_score:
                best_score = score
                best_path = AlignmentPath(entries, score)
            continue
        if u < U:
            stack.append((i, u + 1, score + y[i][u], entries + ((frames[i], u + 1, VERTICAL),)))
        if i < last:
            stack.append(
                (i + 1, u, score + phi[i][u], entries + ((frames[i + 1], u, HORIZONTAL),))
            )
    if best_path is None:
        return NEG_INF, None
    return best_score + phi[last][U], best_path
