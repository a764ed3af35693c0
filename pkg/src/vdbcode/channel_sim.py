"""Channel simulation and distortion-distribution analytics.

Monte Carlo validation draws words, flips bits with the code-table
probabilities, and checks the observed distortion masses and tails
against the constraint with binomial 3-sigma slack.  The exhaustive
counterpart sums over every (word, error) outcome and is the ground
truth the simulator converges to.  The forced-value channel (errors
overwrite a bit with a target value, so matching targets are masked) is
covered by the same exhaustive sweep plus the single-error analytic
form, which is checked against a restricted enumeration rather than
trusted.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

from . import _kernels
from .codegen import CodeTable, TailConstraint
from .combinatorics import masks_up_to_weight, reach_chunk_rows
from .core import ParameterError, SYMMETRIC, WordSpec, distortion_range

GENERATOR_ID = "pcg64"
UPSETS_FORMAT = "vdb-upsets-v1"

PROVENANCE_MONTE_CARLO = "monte_carlo"
PROVENANCE_EXACT = "exact_enumeration"
PROVENANCE_SINGLE_ERROR = "analytic_single_error"

MODE_FLIP = "independent-flip"
MODE_CAPPED = "cap-weight"

_SHARD_SIZE = 1 << 16
_MAX_EXACT_L = 16


@dataclass(frozen=True)
class EmpiricalPMF:
    """Probability mass function over L-bit values."""

    L: int
    mass: dict[int, float]
    sample_count: int | None = None

    def __post_init__(self) -> None:
        n = 1 << self.L
        for v in self.mass:
            if not 0 <= v < n:
                raise ParameterError(f"value {v} outside [0, {n})")
        total = math.fsum(self.mass.values())
        if abs(total - 1.0) > 1e-9:
            raise ParameterError(f"masses sum to {total}, not 1")

    def to_array(self) -> np.ndarray:
        arr = np.zeros(1 << self.L, dtype=np.float64)
        for v, p in self.mass.items():
            arr[v] = p
        return arr

    @classmethod
    def uniform(cls, L: int) -> "EmpiricalPMF":
        n = 1 << L
        return cls(L, {v: 1.0 / n for v in range(n)})

    @classmethod
    def point_mass(cls, L: int, value: int) -> "EmpiricalPMF":
        return cls(L, {value: 1.0})

    @classmethod
    def from_counts(cls, L: int, counts: Mapping[int, int]) -> "EmpiricalPMF":
        total = sum(counts.values())
        if total <= 0:
            raise ParameterError("no samples")
        return cls(L, {v: c / total for v, c in counts.items() if c}, sample_count=total)


@dataclass(frozen=True)
class UpsetModel:
    """Forced-value channel: per-bit upset probability and target-bit law."""

    L: int
    upset_prob: tuple[float, ...]
    forced_one_prob: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.upset_prob) != self.L or len(self.forced_one_prob) != self.L:
            raise ParameterError(f"need {self.L} per-bit entries")
        for name, probs in (("upset_prob", self.upset_prob), ("forced_one_prob", self.forced_one_prob)):
            for i, p in enumerate(probs):
                if not 0.0 <= p <= 1.0:
                    raise ParameterError(f"{name}[{i}]={p} outside [0, 1]")

    def force_probability(self, i: int, bit: int) -> float:
        """Probability that position i is upset and forced to `bit`."""
        if bit == 1:
            return self.upset_prob[i] * self.forced_one_prob[i]
        return self.upset_prob[i] * (1.0 - self.forced_one_prob[i])

    def force_to_one(self) -> np.ndarray:
        return np.array([self.force_probability(i, 1) for i in range(self.L)])

    def force_to_zero(self) -> np.ndarray:
        return np.array([self.force_probability(i, 0) for i in range(self.L)])


@dataclass(frozen=True)
class DistortionDistribution:
    """PMF over integer distortion m, with provenance metadata."""

    mass: dict[int, float]
    provenance: str
    trials: int | None = None
    seed: int | None = None
    generator: str | None = None

    def __post_init__(self) -> None:
        total = math.fsum(self.mass.values())
        if abs(total - 1.0) > 1e-9:
            raise ParameterError(f"masses sum to {total}, not 1")

    def at(self, m: int) -> float:
        return self.mass.get(m, 0.0)


def tail_of(d: DistortionDistribution) -> dict[int, float]:
    """Complementary cumulative masses Pr(M > m) for m = 0..max support."""
    if not d.mass:
        return {}
    top = max(d.mass)
    tails = {}
    running = 0.0
    for m in range(top, -1, -1):
        tails[m] = running
        running += d.mass.get(m, 0.0)
    return dict(sorted(tails.items()))


# ---------------------------------------------------------------------------
# Monte Carlo simulation


@dataclass(frozen=True)
class CheckRow:
    m: int
    mass: float
    tail: float
    bound: float
    slack: float
    mass_ok: bool
    tail_ok: bool


@dataclass(frozen=True)
class SimulationResult:
    distribution: DistortionDistribution
    rows: tuple[CheckRow, ...]
    passed: bool
    mode: str


def _worker_count(n_shards: int) -> int:
    cap = os.environ.get("VDBCODE_THREADS", "")
    workers = min(4, os.cpu_count() or 1, n_shards)
    if cap.strip():
        workers = max(1, min(workers, int(cap)))
    return workers


def _value_probs(value_source: Union[str, EmpiricalPMF], L: int) -> np.ndarray | None:
    if isinstance(value_source, EmpiricalPMF):
        if value_source.L != L:
            raise ParameterError(f"PMF is {value_source.L}-bit but table is {L}-bit")
        return value_source.to_array()
    if value_source == "uniform":
        return None
    raise ParameterError(f"unknown value source {value_source!r}")


def _simulate_shard(
    seed_seq: np.random.SeedSequence,
    n: int,
    probs: np.ndarray,
    value_probs: np.ndarray | None,
    cap_weight: int | None,
) -> np.ndarray:
    L = probs.shape[0]
    n_words = 1 << L
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    if value_probs is None:
        words = rng.integers(0, n_words, size=n, dtype=np.int64)
    else:
        words = rng.choice(n_words, size=n, p=value_probs).astype(np.int64)
    uniforms = rng.random((n, L))
    if cap_weight is None:
        m = _kernels.trial_distortions(words, uniforms, probs)
    else:
        # Rejection: redraw any trial whose error exceeds the weight cap,
        # realizing the conditional <=k-upsets channel.
        bits = uniforms < probs[None, :]
        for _ in range(100_000):
            bad = bits.sum(axis=1) > cap_weight
            if not bad.any():
                break
            bits[bad] = rng.random((int(bad.sum()), L)) < probs[None, :]
        else:
            raise ParameterError("cap-weight rejection did not converge; are all p_i = 1?")
        masks = bits.astype(np.int64) @ (np.int64(1) << np.arange(L, dtype=np.int64))
        m = np.abs(words - (words ^ masks))
    return np.bincount(m, minlength=n_words)


def simulate(
    table: CodeTable,
    constraint: TailConstraint,
    trials: int,
    seed: int,
    value_source: Union[str, EmpiricalPMF] = "uniform",
    cap_weight: int | None = None,
) -> SimulationResult:
    """Monte Carlo channel run followed by the constraint check.

    Each trial draws a word, flips bit i independently with probability
    p_i, and records the integer distortion.  The check requires every
    per-m mass and every tail Pr(M > m) to stay within the constraint
    plus 3-sigma binomial slack.  Trials are generated in fixed-size
    shards with spawned sub-seeds, so results do not depend on how many
    workers process them.
    """
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    if seed < 0:
        raise ParameterError(f"seed must be >= 0, got {seed}")
    if (table.L, table.k) != (constraint.L, constraint.k):
        raise ParameterError(
            f"table is (L={table.L}, k={table.k}) but constraint is (L={constraint.L}, k={constraint.k})"
        )
    probs = np.asarray(table.p_vec, dtype=np.float64)
    value_probs = _value_probs(value_source, table.L)

    shard_sizes = [_SHARD_SIZE] * (trials // _SHARD_SIZE)
    if trials % _SHARD_SIZE:
        shard_sizes.append(trials % _SHARD_SIZE)
    seqs = np.random.SeedSequence(seed).spawn(len(shard_sizes))

    def run(args):
        seq, n = args
        return _simulate_shard(seq, n, probs, value_probs, cap_weight)

    workers = _worker_count(len(shard_sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = sum(pool.map(run, zip(seqs, shard_sizes)))
    else:
        counts = sum(run(args) for args in zip(seqs, shard_sizes))

    mass = {int(m): int(c) / trials for m, c in enumerate(counts) if c}
    dist = DistortionDistribution(
        mass, PROVENANCE_MONTE_CARLO, trials=trials, seed=seed, generator=GENERATOR_ID
    )
    mode = MODE_FLIP if cap_weight is None else f"{MODE_CAPPED}<={cap_weight}"
    rows, passed = check_against_constraint(dist, constraint, trials)
    return SimulationResult(dist, rows, passed, mode)


def check_against_constraint(
    dist: DistortionDistribution, constraint: TailConstraint, trials: int
) -> tuple[tuple[CheckRow, ...], bool]:
    """Per-m mass and tail checks with 3-sigma binomial slack."""
    tails = tail_of(dist)
    top = max(max(dist.mass, default=0), constraint.m_max)
    rows = []
    for m in range(1, top + 1):
        bound = constraint.bound(m)
        slack = 3.0 * math.sqrt(bound * (1.0 - bound) / trials)
        mass = dist.at(m)
        tail = tails.get(m, 0.0)
        rows.append(
            CheckRow(
                m=m,
                mass=mass,
                tail=tail,
                bound=bound,
                slack=slack,
                mass_ok=mass <= bound + slack,
                tail_ok=tail <= bound + slack,
            )
        )
    return tuple(rows), all(r.mass_ok and r.tail_ok for r in rows)


# ---------------------------------------------------------------------------
# Exhaustive oracles


def exact_distortion(
    model: Union[CodeTable, UpsetModel], value_source: Union[str, EmpiricalPMF] = "uniform"
) -> DistortionDistribution:
    """Exact f_M by summing over all words and all error outcomes."""
    L = model.L
    if L > _MAX_EXACT_L:
        raise ParameterError(f"exact enumeration supports L <= {_MAX_EXACT_L}, got {L}")
    value_probs = _value_probs(value_source, L)
    if value_probs is None:
        value_probs = np.full(1 << L, 1.0 / (1 << L))
    if isinstance(model, CodeTable):
        probs = np.asarray(model.p_vec, dtype=np.float64)
        pmf = _kernels.distortion_pmf_flip(probs, value_probs)
    else:
        pmf = _kernels.distortion_pmf_forced(
            model.force_to_one(), model.force_to_zero(), value_probs
        )
    mass = {int(m): float(p) for m, p in enumerate(pmf) if p}
    return DistortionDistribution(mass, PROVENANCE_EXACT)


def placement_mass(table: CodeTable, k: int | None = None) -> dict[int, float]:
    """Per-m probability of drawing an error placement that can realize m.

    A mask's full probability is credited to every distortion it can
    produce, which is exactly the left-hand side the solvers constrain;
    this recomputes it from mask reachability alone, independent of the
    placement-set construction.
    """
    k = table.k if k is None else k
    _, m_max = distortion_range(WordSpec(table.L, SYMMETRIC), k)
    masks = masks_up_to_weight(table.L, k)
    p = np.asarray(table.p_vec, dtype=np.float64)
    terms = np.ones(masks.size, dtype=np.float64)
    for i in range(table.L):
        bit = (masks >> i) & 1
        terms *= np.where(bit == 1, p[i], 1.0 - p[i])
    out = {m: 0.0 for m in range(1, m_max + 1)}
    step = reach_chunk_rows(table.L)
    for start in range(0, masks.size, step):
        reach = _kernels.reach_matrix(table.L, masks[start : start + step])
        for j in range(reach.shape[0]):
            for m in np.nonzero(reach[j])[0]:
                if m >= 1:
                    out[int(m)] += float(terms[start + j])
    return out


# ---------------------------------------------------------------------------
# Single-error analytic form (forced-value channel)


@dataclass(frozen=True)
class DivergenceReport:
    rows: dict[int, tuple[float, float]]
    max_abs: float
    agreed: bool


def single_error_oracle(pmf: EmpiricalPMF, upsets: UpsetModel) -> DistortionDistribution:
    """Distortion from enumerating the exactly-one-upset outcomes.

    Masses for m >= 1 come from unmasked single upsets; everything else
    (no upset, masked upsets, multi-upset outcomes) is attributed to m=0.
    """
    if pmf.L != upsets.L:
        raise ParameterError("PMF and upset model have different word lengths")
    L = pmf.L
    no_upset = [1.0 - upsets.upset_prob[i] for i in range(L)]
    mass: dict[int, float] = {}
    for a, pa in pmf.mass.items():
        for i in range(L):
            others = 1.0
            for j in range(L):
                if j != i:
                    others *= no_upset[j]
            a_i = (a >> i) & 1
            flip_prob = upsets.force_probability(i, 1 - a_i)
            if flip_prob:
                m = 1 << i
                mass[m] = mass.get(m, 0.0) + pa * flip_prob * others
    mass[0] = 1.0 - math.fsum(v for m, v in mass.items() if m != 0)
    return DistortionDistribution(mass, PROVENANCE_EXACT)


def analytic_single_error(
    pmf: EmpiricalPMF, upsets: UpsetModel
) -> tuple[DistortionDistribution, DivergenceReport]:
    """Single-upset analytic distortion law, with its oracle comparison.

    Evaluates, for each m >= 1,

        f_M(m) = sum_a B(a) * (f_V(a - m) + f_V(a + m))
        B(a) = sum_i f_V(a + 2**i) q_i(0) + sum_i f_V(a - 2**i) q_i(1)
               + f_V(a) * sum_i q_i(a_i)

    where q_i(b) is the probability position i is upset and forced to b;
    the remaining mass is assigned to m=0.  The transcription is
    known-suspect for spread-out value distributions (the masked-upset
    term leaks into m >= 1), so the result always ships with a
    per-m comparison against the single-upset enumeration oracle.
    """
    if pmf.L != upsets.L:
        raise ParameterError("PMF and upset model have different word lengths")
    L = pmf.L
    n = 1 << L
    fv = pmf.to_array()

    bracket = np.zeros(n, dtype=np.float64)
    for a in range(n):
        acc = 0.0
        for i in range(L):
            q0 = upsets.force_probability(i, 0)
            q1 = upsets.force_probability(i, 1)
            hi = a + (1 << i)
            lo = a - (1 << i)
            if hi < n:
                acc += fv[hi] * q0
            if lo >= 0:
                acc += fv[lo] * q1
            acc += fv[a] * upsets.force_probability(i, (a >> i) & 1)
        bracket[a] = acc

    mass: dict[int, float] = {}
    for m in range(1, n):
        total = 0.0
        for a in range(n):
            if a - m >= 0:
                total += bracket[a] * fv[a - m]
            if a + m < n:
                total += bracket[a] * fv[a + m]
        if total:
            mass[m] = float(total)
    mass[0] = 1.0 - math.fsum(v for m, v in mass.items() if m != 0)
    analytic = DistortionDistribution(mass, PROVENANCE_SINGLE_ERROR)

    oracle = single_error_oracle(pmf, upsets)
    ms = sorted(set(analytic.mass) | set(oracle.mass))
    rows = {m: (analytic.at(m), oracle.at(m)) for m in ms}
    max_abs = max((abs(a - b) for a, b in rows.values()), default=0.0)
    return analytic, DivergenceReport(rows, max_abs, max_abs <= 1e-9)


# ---------------------------------------------------------------------------
# Trace ingestion and file formats


def ingest_trace(
    stream: Iterable[str],
    column: int,
    L: int,
    signed_offset: int = 0,
    *,
    clamp: bool = False,
    skip_header: int = 0,
) -> EmpiricalPMF:
    """Histogram a CSV column of integers into an L-bit value PMF."""
    WordSpec(L, SYMMETRIC)
    n = 1 << L
    counts: dict[int, int] = {}
    reader = csv.reader(stream)
    for rownum, row in enumerate(reader, start=1):
        if rownum <= skip_header or not row:
            continue
        if column >= len(row):
            raise ParameterError(f"row {rownum}: no column {column} (row has {len(row)})")
        text = row[column].strip()
        try:
            value = int(text)
        except ValueError:
            raise ParameterError(
                f"row {rownum}, column {column}: cannot parse {text!r} as integer"
            ) from None
        value += signed_offset
        if not 0 <= value < n:
            if not clamp:
                raise ParameterError(
                    f"row {rownum}: value {value} outside [0, {n}) after offset {signed_offset}"
                )
            value = min(max(value, 0), n - 1)
        counts[value] = counts.get(value, 0) + 1
    return EmpiricalPMF.from_counts(L, counts)


def format_distribution_csv(d: DistortionDistribution) -> str:
    lines = [f"# provenance={d.provenance}"]
    if d.trials is not None:
        lines.append(f"# trials={d.trials}")
    if d.seed is not None:
        lines.append(f"# seed={d.seed}")
    if d.generator is not None:
        lines.append(f"# generator={d.generator}")
    lines.append("m,mass,tail")
    tails = tail_of(d)
    top = max(d.mass, default=0)
    for m in range(0, top + 1):
        lines.append(f"{m},{d.at(m)!r},{tails.get(m, 0.0)!r}")
    return "\n".join(lines) + "\n"


def write_distribution_csv(d: DistortionDistribution, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_distribution_csv(d))


def format_pmf_csv(pmf: EmpiricalPMF) -> str:
    lines = [f"# L={pmf.L}"]
    if pmf.sample_count is not None:
        lines.append(f"# sample_count={pmf.sample_count}")
    lines.append("value,mass")
    lines += [f"{v},{pmf.mass[v]!r}" for v in sorted(pmf.mass)]
    return "\n".join(lines) + "\n"


def write_pmf_csv(pmf: EmpiricalPMF, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_pmf_csv(pmf))


def parse_pmf_csv(text: str) -> EmpiricalPMF:
    L = None
    sample_count = None
    mass: dict[int, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key == "L":
                L = int(value)
            elif key == "sample_count":
                sample_count = int(value)
            continue
        if line == "value,mass":
            continue
        v_text, _, p_text = line.partition(",")
        try:
            mass[int(v_text)] = float(p_text)
        except ValueError:
            raise ParameterError(f"line {lineno}: bad row {line!r}") from None
    if L is None:
        raise ParameterError("PMF file missing '# L=' header")
    return EmpiricalPMF(L, mass, sample_count)


def load_pmf_csv(path) -> EmpiricalPMF:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_pmf_csv(fh.read())


def serialize_upsets(model: UpsetModel) -> str:
    lines = [f"format={UPSETS_FORMAT}", f"L={model.L}"]
    lines += [
        f"{i},{model.upset_prob[i]!r},{model.forced_one_prob[i]!r}" for i in range(model.L)
    ]
    return "\n".join(lines) + "\n"


def parse_upsets(text: str) -> UpsetModel:
    L = None
    rows: dict[int, tuple[float, float]] = {}
    saw_format = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not saw_format:
            if line != f"format={UPSETS_FORMAT}":
                raise ParameterError(f"line {lineno}: expected format={UPSETS_FORMAT}")
            saw_format = True
            continue
        if line.startswith("L="):
            L = int(line[2:])
            continue
        parts = line.split(",")
        try:
            bit = int(parts[0])
            rows[bit] = (float(parts[1]), float(parts[2]))
        except (ValueError, IndexError):
            raise ParameterError(f"line {lineno}: bad row {line!r}") from None
    if L is None:
        raise ParameterError("upsets file missing L= header")
    upset = [0.0] * L
    forced_one = [0.0] * L
    for bit, (u, f1) in rows.items():
        if not 0 <= bit < L:
            raise ParameterError(f"bit {bit} outside [0, {L})")
        upset[bit] = u
        forced_one[bit] = f1
    return UpsetModel(L, tuple(upset), tuple(forced_one))


def load_upsets(path) -> UpsetModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_upsets(fh.read())
