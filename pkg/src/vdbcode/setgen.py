"""Construction of the per-distortion placement-set family.

For each integer distortion m, the placement set S_m holds every error
mask of weight <= k that can change some word's value by exactly m.  Two
independent constructions are provided: the brute-force route enumerates
all (word, mask) pairs, while the fast route enumerates signed-binary
representations of m (digits -1/0/+1 over powers of two) and takes their
supports: a mask can realize m precisely when m has a signed-binary
expansion living on that mask.  Their exact agreement is the correctness
anchor for the fast route.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from . import _kernels
from .combinatorics import masks_up_to_weight, reach_chunk_rows
from .core import ParameterError, SYMMETRIC, WordSpec, distortion_range

SETS_FORMAT = "vdb-sets-v1"


@dataclass(frozen=True)
class SignedDigitVector:
    """Length-L digit vector over {-1, 0, +1}; digit i weighs 2**i."""

    digits: tuple[int, ...]

    @property
    def value(self) -> int:
        return sum(d << i for i, d in enumerate(self.digits))

    @property
    def support(self) -> int:
        mask = 0
        for i, d in enumerate(self.digits):
            if d != 0:
                mask |= 1 << i
        return mask

    @property
    def weight(self) -> int:
        return sum(1 for d in self.digits if d != 0)

    def mirror(self) -> "SignedDigitVector":
        """The sign-mirrored vector representing the negated value."""
        return SignedDigitVector(tuple(-d for d in self.digits))


@dataclass(frozen=True)
class PlacementSets:
    """Map from distortion m to the set of masks that can realize it."""

    L: int
    k: int
    sets: dict[int, frozenset[int]]

    def cardinalities(self) -> dict[int, int]:
        return {m: len(s) for m, s in sorted(self.sets.items())}


def _range_for(L: int, k: int) -> tuple[int, int]:
    return distortion_range(WordSpec(L, SYMMETRIC), k)


def sets_bruteforce(L: int, k: int) -> PlacementSets:
    """Placement sets by exhaustive enumeration of all (word, mask) pairs.

    Every ordered pair at Hamming distance <= k is one (x, x ^ e); the
    differing-bit mask e joins the set of the pair's integer distance.
    Masks are processed in chunks to bound the reach-matrix memory.
    """
    _, m_max = _range_for(L, k)
    masks = masks_up_to_weight(L, k)
    collected: dict[int, set[int]] = {m: set() for m in range(1, m_max + 1)}
    step = reach_chunk_rows(L)
    for start in range(0, masks.size, step):
        chunk = masks[start : start + step]
        reach = _kernels.reach_matrix(L, chunk)
        for m in range(1, m_max + 1):
            collected[m].update(int(e) for e in chunk[reach[:, m]])
    return PlacementSets(L, k, {m: frozenset(s) for m, s in collected.items()})


def signed_digit_reps(m: int, L: int, max_weight: int) -> frozenset[SignedDigitVector]:
    """All signed-binary expansions of +m with at most max_weight nonzero digits.

    Branches digit by digit from the least significant position: the
    running remainder fixes the parity of the next digit, an odd remainder
    forks into the +1 and -1 choices, and branches die when the remainder
    outgrows what the remaining positions can represent or the weight
    budget is spent.  The expansions of -m are the sign mirrors of these
    (see SignedDigitVector.mirror) and share their supports, so only the
    +m family is returned.
    """
    if L < 1:
        raise ParameterError(f"L must be >= 1, got {L}")
    if not 1 <= m <= (1 << L) - 1:
        raise ParameterError(f"m must be in [1, {(1 << L) - 1}], got {m}")
    if max_weight < 0:
        raise ParameterError(f"max_weight must be >= 0, got {max_weight}")

    found: list[SignedDigitVector] = []
    digits = [0] * L

    def branch(i: int, remainder: int, nonzeros: int) -> None:
        if remainder == 0:
            # Zero has no nonzero signed-binary expansion, so the
            # remaining digits must all stay 0: record and stop.
            found.append(SignedDigitVector(tuple(digits)))
            return
        if i == L or abs(remainder) > (1 << (L - i)) - 1:
            return
        if remainder % 2 == 0:
            digits[i] = 0
            branch(i + 1, remainder // 2, nonzeros)
        elif nonzeros < max_weight:
            for d in (1, -1):
                digits[i] = d
                branch(i + 1, (remainder - d) // 2, nonzeros + 1)
            digits[i] = 0

    branch(0, m, 0)
    return frozenset(found)


def sets_fast(L: int, k: int) -> PlacementSets:
    """Placement sets via signed-digit enumeration; equals sets_bruteforce."""
    _, m_max = _range_for(L, k)
    sets = {
        m: frozenset(d.support for d in signed_digit_reps(m, L, k))
        for m in range(1, m_max + 1)
    }
    return PlacementSets(L, k, sets)


def values_at_distance(s: int, m: int, L: int) -> set[int]:
    """The L-bit values at integer distance exactly m from s."""
    spec = WordSpec(L, SYMMETRIC)
    spec.validate_word(s)
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    return {v for v in (s - m, s + m) if 0 <= v < (1 << L)}


def serialize_sets(ps: PlacementSets) -> str:
    """Text form: header lines, then one `m,mask` row per member, sorted."""
    lines = [f"format={SETS_FORMAT}", f"L={ps.L}", f"k={ps.k}"]
    for m in sorted(ps.sets):
        for mask in sorted(ps.sets[m]):
            lines.append(f"{m},{mask:0{ps.L}b}")
    return "\n".join(lines) + "\n"


def _parse_header(lines: Iterator[tuple[int, str]], expected_format: str) -> dict[str, str]:
    header = {}
    lineno, first = next(lines)
    if first != f"format={expected_format}":
        raise ParameterError(f"line {lineno}: expected format={expected_format}")
    for key in ("L", "k"):
        lineno, line = next(lines)
        name, _, value = line.partition("=")
        if name != key:
            raise ParameterError(f"line {lineno}: expected {key}=<int>")
        header[key] = value
    return header


def parse_sets(text: str) -> PlacementSets:
    lines = (
        (i, line.strip())
        for i, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.strip().startswith("#")
    )
    try:
        header = _parse_header(lines, SETS_FORMAT)
    except StopIteration:
        raise ParameterError("truncated sets file") from None
    try:
        L, k = int(header["L"]), int(header["k"])
    except ValueError:
        raise ParameterError(f"sets file has non-integer L/k headers: {header}") from None
    _, m_max = _range_for(L, k)
    sets: dict[int, set[int]] = {m: set() for m in range(1, m_max + 1)}
    for lineno, line in lines:
        m_text, _, mask_text = line.partition(",")
        try:
            m = int(m_text)
            mask = int(mask_text, 2)
        except ValueError:
            raise ParameterError(f"line {lineno}: bad row {line!r}") from None
        if not 1 <= m <= m_max:
            raise ParameterError(f"line {lineno}: m={m} outside [1, {m_max}]")
        sets[m].add(mask)
    return PlacementSets(L, k, {m: frozenset(s) for m, s in sets.items()})
