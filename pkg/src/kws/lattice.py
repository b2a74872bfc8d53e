"""KWL1 binary lattice files: bit-exact replayable keyword-conditioned emissions.

Layout (all little-endian):

    header (20 bytes, struct ``<4sHIIHf``):
        magic ``KWL1`` | version u16 = 1 | T u32 | U u32 | D_max u16 | frame_seconds f32
    body:
        log_y   f32[T][U]      keyword-track next-token log-probs
        log_phi f32[T][U+1]    keyword-track blank log-probs
        if D_max > 0:
            greedy_token    u32[T]
            greedy_duration u16[T]

A JSON sidecar (same basename, ``.json``) stores the keyword name, token-ids,
and provenance metadata. Sidecars carry no timestamps so identical content
always produces identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .emissions import EmissionOracle, GreedyStepOutput, KeywordSpec
from .errors import (
    BadMagicError,
    DimensionMismatchError,
    LatticeValueError,
    ModeError,
    SidecarError,
    TruncatedLatticeError,
    UnsupportedVersionError,
    ValidationError,
)

MAGIC = b"KWL1"
VERSION = 1
_HEADER = struct.Struct("<4sHIIHf")


@dataclass
class LatticeData:
    """In-memory image of one KWL1 file."""

    keyword: KeywordSpec
    frame_seconds: float
    log_y: np.ndarray
    log_phi: np.ndarray
    d_max: int = 0
    greedy_tokens: np.ndarray | None = None
    greedy_durations: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def num_frames(self) -> int:
        return int(self.log_y.shape[0])

    @property
    def num_tokens(self) -> int:
        return int(self.log_y.shape[1])

    def validate(self) -> None:
        T, U = self.log_y.shape
        if T < 1 or U < 1:
            raise ValidationError("lattice needs T >= 1 and U >= 1")
        if U != self.keyword.num_tokens:
            raise DimensionMismatchError(
                f"log_y has U={U} but keyword {self.keyword.name!r} "
                f"has {self.keyword.num_tokens} tokens"
            )
        if self.log_phi.shape != (T, U + 1):
            raise DimensionMismatchError(
                f"log_phi shape {self.log_phi.shape} != {(T, U + 1)}"
            )
        for name, arr in (("log_y", self.log_y), ("log_phi", self.log_phi)):
            if np.isnan(arr).any():
                raise LatticeValueError(f"{name} contains NaN")
            if (arr > 0).any():
                raise LatticeValueError(f"{name} contains log-probabilities > 0")
        if self.d_max > 0:
            if self.greedy_tokens is None or self.greedy_durations is None:
                raise ValidationError("d_max > 0 requires a greedy-track channel")
            if self.greedy_tokens.shape != (T,) or self.greedy_durations.shape != (T,):
                raise DimensionMismatchError("greedy-track channel must have one entry per frame")
            if (self.greedy_durations > self.d_max).any():
                raise LatticeValueError(
                    f"greedy_duration exceeds D_max={self.d_max}"
                )
        if self.frame_seconds <= 0:
            raise ValidationError("frame_seconds must be > 0")


def save_lattice(data: LatticeData, path: str | Path) -> Path:
    """Write ``data`` to ``path`` plus its JSON sidecar; returns the lattice path."""
    data.validate()
    path = Path(path)
    T, U = data.log_y.shape
    parts = [
        _HEADER.pack(MAGIC, VERSION, T, U, data.d_max, data.frame_seconds),
        np.ascontiguousarray(data.log_y, dtype="<f4").tobytes(),
        np.ascontiguousarray(data.log_phi, dtype="<f4").tobytes(),
    ]
    if data.d_max > 0:
        parts.append(np.ascontiguousarray(data.greedy_tokens, dtype="<u4").tobytes())
        parts.append(np.ascontiguousarray(data.greedy_durations, dtype="<u2").tobytes())
    path.write_bytes(b"".join(parts))
    sidecar = {
        "keyword": {"name": data.keyword.name, "tokens": list(data.keyword.tokens)},
        "provenance": data.provenance,
    }
    path.with_suffix(".json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n"
    )
    return path


def read_lattice(path: str | Path) -> LatticeData:
    """Parse and validate one KWL1 file plus its sidecar."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a KWL1 file (magic {raw[:4]!r})")
    if len(raw) < _HEADER.size:
        raise TruncatedLatticeError(
            f"{path}: header needs {_HEADER.size} bytes, file has {len(raw)}"
        )
    _, version, T, U, d_max, frame_seconds = _HEADER.unpack_from(raw)
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: version {version} unsupported (reader speaks {VERSION})")
    if T < 1 or U < 1:
        raise LatticeValueError(f"{path}: header T={T}, U={U}; both must be >= 1")
    expected = 4 * T * U + 4 * T * (U + 1) + (6 * T if d_max > 0 else 0)
    actual = len(raw) - _HEADER.size
    if actual != expected:
        raise TruncatedLatticeError(
            f"{path}: body has {actual} bytes, header dimensions require {expected}"
        )
    offset = _HEADER.size
    log_y = np.frombuffer(raw, dtype="<f4", count=T * U, offset=offset).reshape(T, U).copy()
    offset += 4 * T * U
    log_phi = (
        np.frombuffer(raw, dtype="<f4", count=T * (U + 1), offset=offset).reshape(T, U + 1).copy()
    )
    offset += 4 * T * (U + 1)
    greedy_tokens = greedy_durations = None
    if d_max > 0:
        greedy_tokens = np.frombuffer(raw, dtype="<u4", count=T, offset=offset).copy()
        offset += 4 * T
        greedy_durations = np.frombuffer(raw, dtype="<u2", count=T, offset=offset).copy()

    sidecar_path = path.with_suffix(".json")
    try:
        sidecar = json.loads(sidecar_path.read_text())
    except FileNotFoundError as exc:
        raise SidecarError(f"{path}: missing sidecar {sidecar_path.name}") from exc
    except json.JSONDecodeError as exc:
        raise SidecarError(f"{sidecar_path}: invalid JSON ({exc})") from exc
    try:
        keyword = KeywordSpec(
            name=sidecar["keyword"]["name"],
            tokens=tuple(sidecar["keyword"]["tokens"]),
        )
    except (KeyError, TypeError, ValidationError) as exc:
        raise SidecarError(f"{sidecar_path}: bad keyword record ({exc})") from exc
    if keyword.num_tokens != U:
        raise SidecarError(
            f"{sidecar_path}: keyword has {keyword.num_tokens} tokens, header says U={U}"
        )

    data = LatticeData(
        keyword=keyword,
        frame_seconds=frame_seconds,
        log_y=log_y,
        log_phi=log_phi,
        d_max=d_max,
        greedy_tokens=greedy_tokens,
        greedy_durations=greedy_durations,
        provenance=sidecar.get("provenance", {}),
    )
    try:
        data.validate()
    except ValidationError as exc:
        if isinstance(exc, LatticeValueError):
            raise
        raise LatticeValueError(f"{path}: {exc}") from exc
    return data


class FileLatticeOracle(EmissionOracle):
    """Replay oracle over one keyword-conditioned LatticeData."""

    def __init__(self, data: LatticeData) -> None:
        data.validate()
        self._data = data

    @property
    def data(self) -> LatticeData:
        return self._data

    @property
    def keyword(self) -> KeywordSpec:
        return self._data.keyword

    @property
    def num_frames(self) -> int:
        return self._data.num_frames

    @property
    def d_max(self) -> int:
        return self._data.d_max

    @property
    def frame_seconds(self) -> float:
        return float(self._data.frame_seconds)

    def _check_keyword(self, keyword: KeywordSpec) -> None:
        stored = self._data.keyword
        if keyword.num_tokens != stored.num_tokens:
            raise DimensionMismatchError(
                f"lattice stores U={stored.num_tokens} for {stored.name!r}; "
                f"queried keyword {keyword.name!r} has U={keyword.num_tokens}"
            )
        if keyword.tokens != stored.tokens:
            raise ValidationError(
                f"lattice is conditioned on keyword {stored.name!r} "
                f"{stored.tokens}; cannot answer for {keyword.name!r} {keyword.tokens}"
            )

    def emission_rows(self, keyword: KeywordSpec, t: int) -> tuple[np.ndarray, np.ndarray]:
        self._check_frame(t)
        self._check_keyword(keyword)
        return self._data.log_y[t - 1], self._data.log_phi[t - 1]

    def greedy_step(self, t: int, state: object) -> tuple[GreedyStepOutput, object]:
        if not self.supports_tdt:
            raise ModeError("lattice has no greedy track (D_max=0); TDT mode unavailable")
        self._check_frame(t)
        # Replay carries argmax identities only; no distribution survives in
        # the file, so both log-probs report 0.0.
        out = GreedyStepOutput(
            token=int(self._data.greedy_tokens[t - 1]),
            duration=int(self._data.greedy_durations[t - 1]),
            log_token_prob=0.0,
            log_duration_prob=0.0,
        )
        return out, state


def load_lattice(path: str | Path) -> FileLatticeOracle:
    """Open a KWL1 file as a file-backed emission oracle."""
    return FileLatticeOracle(read_lattice(path))


def snapshot(oracle, keyword: KeywordSpec, provenance: dict | None = None) -> LatticeData:
    """Freeze an oracle's keyword-conditioned view (plus greedy track) to LatticeData."""
    T = oracle.num_frames
    U = keyword.num_tokens
    log_y = np.empty((T, U), dtype=np.float32)
    log_phi = np.empty((T, U + 1), dtype=np.float32)
    for t in range(1, T + 1):
        row_y, row_phi = oracle.emission_rows(keyword, t)
        log_y[t - 1] = row_y
        log_phi[t - 1] = row_phi
    greedy_tokens = greedy_durations = None
    if oracle.d_max > 0:
        # Canonical greedy pass: one step per frame, threading the history state.
        greedy_tokens = np.zeros(T, dtype=np.uint32)
        greedy_durations = np.zeros(T, dtype=np.uint16)
        state = oracle.initial_greedy_state()
        for t in range(1, T + 1):
            out, state = oracle.greedy_step(t, state)
            greedy_tokens[t - 1] = out.token
            greedy_durations[t - 1] = out.duration
    return LatticeData(
        keyword=keyword,
        frame_seconds=oracle.frame_seconds,
        log_y=log_y,
        log_phi=log_phi,
        d_max=oracle.d_max,
        greedy_tokens=greedy_tokens,
        greedy_durations=greedy_durations,
        provenance=provenance or {},
    )
