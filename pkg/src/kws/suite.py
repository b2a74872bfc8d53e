"""Deterministic synthetic evaluation suites.

A suite is a directory:

    suite/
      manifest.json
      lattices/{utt_id}.kwl
      lattices/{utt_id}.json

Every utterance timeline is fully tiled with segments (no gaps): positives
carry exactly one keyword occurrence at a uniformly random slot among filler
segments; negatives are all fillers. Filler tokens come from a pool disjoint
from every keyword's token range, so keyword tokens never appear outside
planted occurrences. Each utterance's planted alignment is embedded in the
manifest (so generative decoding can reconstruct the oracle) and also frozen
to a keyword-conditioned KWL1 lattice: positives conditioned on their label
keyword, negatives on a round-robin keyword recorded as ``lattice_keyword``.

Alignments are drawn from per-utterance child seeds (suite_seed, utt_index),
so generation order and parallelism never change output; a fixed seed yields
byte-identical trees.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .emissions import KeywordSpec
from .errors import ValidationError
from .lattice import LatticeData, save_lattice, snapshot
from .synthetic import SyntheticJoinerConfig, SyntheticOracle

MANIFEST_SCHEMA = "kws-suite-manifest@1"

DEFAULT_KEYWORD_NAMES = (
    "almost", "anything", "behind", "captain", "children",
    "company", "continued", "country", "everything", "hardly",
    "himself", "husband", "moment", "morning", "necessary",
    "perhaps", "silent", "something", "therefore", "together",
)


@dataclass(frozen=True)
class SuiteGenSpec:
    """Everything gen_suite needs; defaults give a small smoke-scale suite."""

    keywords: tuple[str, ...] = DEFAULT_KEYWORD_NAMES
    n_pos: int = 10
    n_neg: int = 20
    frames_min: int = 120
    frames_max: int = 240
    duration_min: int = 2
    duration_max: int = 4
    epsilons: tuple[float, ...] = (0.0,)
    d_max: int = 4
    duration_concentration: float = 1.0
    seed: int = 0
    frame_seconds: float = 0.03
    filler_pool: int = 40
    keyword_len_min: int = 3
    keyword_len_max: int = 6

    def __post_init__(self) -> None:
        if len(self.keywords) < 1:
            raise ValidationError("need at least one keyword name")
        if len(set(self.keywords)) != len(self.keywords):
            raise ValidationError("keyword names must be unique")
        if self.n_pos < 1 or self.n_neg < 1:
            raise ValidationError("n_pos and n_neg must be >= 1")
        if not 1 <= self.frames_min <= self.frames_max:
            raise ValidationError("need 1 <= frames_min <= frames_max")
        if not 1 <= self.duration_min <= self.duration_max:
            raise ValidationError("need 1 <= duration_min <= duration_max")
        for eps in self.epsilons:
            if not 0.0 <= eps < 1.0:
                raise ValidationError(f"epsilon must be in [0, 1), got {eps}")
        if len(self.epsilons) < 1:
            raise ValidationError("need at least one epsilon")
        if self.d_max < 0:
            raise ValidationError("d_max must be >= 0")
        if not 1 <= self.keyword_len_min <= self.keyword_len_max:
            raise ValidationError("bad keyword length range")
        if self.filler_pool < 1:
            raise ValidationError("filler_pool must be >= 1")


def _draw_keywords(spec: SuiteGenSpec) -> tuple[tuple[KeywordSpec, ...], int]:
    """Keyword token sequences on disjoint id blocks; returns (keywords, vocab_size)."""
    rng = np.random.default_rng([spec.seed, 0])
    keywords = []
    next_id = 1
    for name in spec.keywords:
        length = int(rng.integers(spec.keyword_len_min, spec.keyword_len_max + 1))
        ids = list(range(next_id, next_id + length))
        rng.shuffle(ids)
        next_id += length
        keywords.append(KeywordSpec(name=name, tokens=tuple(ids)))
    vocab_size = next_id - 1 + spec.filler_pool
    return tuple(keywords), vocab_size


def _tile_segments(
    rng: np.random.Generator,
    spec: SuiteGenSpec,
    num_frames: int,
    keyword: KeywordSpec | None,
    filler_tokens: np.ndarray,
) -> tuple[tuple[int, int, int], ...]:
    """Cover frames [1, num_frames] with segments; plant the keyword if given."""
    durations: list[int] = []
    total = 0
    while total < num_frames:
        d = int(rng.integers(spec.duration_min, spec.duration_max + 1))
        d = min(d, num_frames - total)  # final slot absorbs the remainder
        durations.append(d)
        total += d
    truncated_last = durations[-1] < spec.duration_min

    slots = len(durations)
    tokens = [int(rng.choice(filler_tokens)) for _ in range(slots)]
    if keyword is not None:
        U = keyword.num_tokens
        usable = slots - (1 if truncated_last else 0)
        if usable < U:
            raise ValidationError(
                f"keyword {keyword.name!r} ({U} segments) does not fit in "
                f"{num_frames} frames at these durations"
            )
        at = int(rng.integers(0, usable - U + 1))
        tokens[at : at + U] = list(keyword.tokens)

    segments = []
    start = 1
    for token, duration in zip(tokens, durations):
        segments.append((token, start, duration))
        start += duration
    return tuple(segments)


def _utterance_config(
    spec: SuiteGenSpec,
    utt_index: int,
    epsilon: float,
    vocab_size: int,
    keyword: KeywordSpec | None,
    filler_tokens: np.ndarray,
) -> SyntheticJoinerConfig:
    rng = np.random.default_rng([spec.seed, 1 + utt_index])
    num_frames = int(rng.integers(spec.frames_min, spec.frames_max + 1))
    alignment = _tile_segments(rng, spec, num_frames, keyword, filler_tokens)
    return SyntheticJoinerConfig(
        vocab_size=vocab_size,
        num_frames=num_frames,
        alignment=alignment,
        epsilon=epsilon,
        d_max=spec.d_max,
        duration_concentration=spec.duration_concentration,
        seed=spec.seed,
        frame_seconds=spec.frame_seconds,
    )


def gen_suite(out_dir: str | Path, spec: SuiteGenSpec) -> Path:
    """Write one suite tree; returns the manifest path."""
    out_dir = Path(out_dir)
    lattice_dir = out_dir / "lattices"
    lattice_dir.mkdir(parents=True, exist_ok=True)

    keywords, vocab_size = _draw_keywords(spec)
    filler_tokens = np.arange(vocab_size - spec.filler_pool + 1, vocab_size + 1)

    # Even the worst duration draws must leave room to plant the longest keyword.
    guaranteed_slots = spec.frames_min // spec.duration_max
    longest = max(kw.num_tokens for kw in keywords)
    if longest > guaranteed_slots:
        raise ValidationError(
            f"longest keyword needs {longest} segments but frames_min={spec.frames_min} "
            f"guarantees only {guaranteed_slots} full slots at duration_max={spec.duration_max}"
        )

    # (utt stem, label keyword or None, lattice keyword, utt_index for seeding)
    plans: list[tuple[str, KeywordSpec | None, KeywordSpec, int]] = []
    index = 0
    for kw in keywords:
        for i in range(spec.n_pos):
            plans.append((f"pos-{kw.name}-{i:03d}", kw, kw, index))
            index += 1
    for j in range(spec.n_neg):
        round_robin = keywords[j % len(keywords)]
        plans.append((f"neg-{j:03d}", None, round_robin, index))
        index += 1

    utterances = []
    for stem, label_kw, lattice_kw, utt_index in plans:
        for epsilon in spec.epsilons:
            utt_id = f"{stem}-e{epsilon:.2f}"
            cfg = _utterance_config(spec, utt_index, epsilon, vocab_size, label_kw, filler_tokens)
            oracle = SyntheticOracle(cfg)
            data = snapshot(
                oracle,
                lattice_kw,
                provenance={
                    "generator": "kws.suite",
                    "suite_seed": spec.seed,
                    "utt_id": utt_id,
                    "epsilon": epsilon,
                },
            )
            save_lattice(data, lattice_dir / f"{utt_id}.kwl")
            utterances.append(
                {
                    "utt_id": utt_id,
                    "label": label_kw.name if label_kw is not None else None,
                    "epsilon": epsilon,
                    "num_frames": cfg.num_frames,
                    "duration_seconds": cfg.num_frames * cfg.frame_seconds,
                    "lattice": f"lattices/{utt_id}.kwl",
                    "lattice_keyword": lattice_kw.name,
                    "synth": cfg.to_json_dict(),
                }
            )

    manifest = {
        "schema": MANIFEST_SCHEMA,
        "seed": spec.seed,
        "frame_seconds": spec.frame_seconds,
        "d_max": spec.d_max,
        "duration_concentration": spec.duration_concentration,
        "vocab_size": vocab_size,
        "epsilons": list(spec.epsilons),
        "keywords": [{"name": kw.name, "tokens": list(kw.tokens)} for kw in keywords],
        "utterances": utterances,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest_path


def snapshot_generative(oracle: SyntheticOracle, keyword: KeywordSpec, path: str | Path) -> Path:
    """Freeze one keyword-conditioned view of a generative oracle to a KWL1 file."""
    data = snapshot(oracle, keyword)
    return save_lattice(data, path)


@dataclass(frozen=True)
class Utterance:
    utt_id: str
    label: str | None
    epsilon: float
    num_frames: int
    duration_seconds: float
    lattice: str
    lattice_keyword: str
    synth: SyntheticJoinerConfig


@dataclass(frozen=True)
class SuiteManifest:
    root: Path
    seed: int
    frame_seconds: float
    d_max: int
    epsilons: tuple[float, ...]
    keywords: tuple[KeywordSpec, ...]
    utterances: tuple[Utterance, ...]

    @property
    def keywords_by_name(self) -> dict[str, KeywordSpec]:
        return {kw.name: kw for kw in self.keywords}

    def positives(self, keyword: str, epsilon: float | None = None) -> list[Utterance]:
        return [
            u
            for u in self.utterances
            if u.label == keyword and (epsilon is None or u.epsilon == epsilon)
        ]

    def negatives(self, epsilon: float | None = None) -> list[Utterance]:
        return [
            u
            for u in self.utterances
            if u.label is None and (epsilon is None or u.epsilon == epsilon)
        ]

    def lattice_path(self, utt: Utterance) -> Path:
        return self.root / utt.lattice


def load_manifest(suite_dir: str | Path) -> SuiteManifest:
    suite_dir = Path(suite_dir)
    manifest_path = suite_dir / "manifest.json"
    raw = json.loads(manifest_path.read_text())
    if raw.get("schema") != MANIFEST_SCHEMA:
        raise ValidationError(
            f"{manifest_path}: schema {raw.get('schema')!r}, expected {MANIFEST_SCHEMA!r}"
        )
    keywords = tuple(
        KeywordSpec(name=k["name"], tokens=tuple(k["tokens"])) for k in raw["keywords"]
    )
    names = {kw.name for kw in keywords}
    utterances = []
    for rec in raw["utterances"]:
        if rec["label"] is not None and rec["label"] not in names:
            raise ValidationError(f"utterance {rec['utt_id']}: unknown label {rec['label']!r}")
        if rec["duration_seconds"] <= 0:
            raise ValidationError(f"utterance {rec['utt_id']}: duration_seconds must be > 0")
        utterances.append(
            Utterance(
                utt_id=rec["utt_id"],
                label=rec["label"],
                epsilon=rec["epsilon"],
                num_frames=rec["num_frames"],
                duration_seconds=rec["duration_seconds"],
                lattice=rec["lattice"],
                lattice_keyword=rec["lattice_keyword"],
                synth=SyntheticJoinerConfig.from_json_dict(rec["synth"]),
            )
        )
    return SuiteManifest(
        root=suite_dir,
        seed=raw["seed"],
        frame_seconds=raw["frame_seconds"],
        d_max=raw["d_max"],
        epsilons=tuple(raw["epsilons"]),
        keywords=keywords,
        utterances=tuple(utterances),
    )
