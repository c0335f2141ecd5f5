"""Regular data-assignment matrices: which worker holds which sample.

An assignment is an n x p binary matrix with every column summing to exactly
rho (each sample replicated rho times) and every row summing to at least 1
(no idle worker). Workers and samples are 0-indexed in memory; logs and the
text format are 1-indexed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import GenerationFailedError, InvalidParamsError


@dataclass(frozen=True)
class AssignmentMatrix:
    n: int
    p: int
    bits: tuple[tuple[int, ...], ...]  # bits[j][i] == 1 iff sample i is on worker j

    def column_sum(self, i: int) -> int:
        return sum(row[i] for row in self.bits)

    def row_sum(self, j: int) -> int:
        return sum(self.bits[j])

    def assigned_workers(self, i: int) -> list[int]:
        return [j for j in range(self.n) if self.bits[j][i]]

    def zero_set(self, i: int) -> list[int]:
        """Workers that do not hold sample i."""
        return [j for j in range(self.n) if not self.bits[j][i]]

    def samples_of(self, j: int) -> list[int]:
        return [i for i in range(self.p) if self.bits[j][i]]


def validate_regular(a: AssignmentMatrix, rho: int) -> bool:
    """True iff every column sums to rho and every row sums to >= 1."""
    if any(len(row) != a.p for row in a.bits) or len(a.bits) != a.n:
        return False
    for i in range(a.p):
        if a.column_sum(i) != rho:
            return False
    return all(a.row_sum(j) >= 1 for j in range(a.n))


def _finish(n: int, p: int, rho: int, bits: list[list[int]], kind: str) -> AssignmentMatrix:
    a = AssignmentMatrix(n, p, tuple(tuple(row) for row in bits))
    if not validate_regular(a, rho):
        raise InvalidParamsError(
            f"{kind} layout with n={n}, p={p}, rho={rho} leaves some worker idle"
        )
    return a


def make_cyclic(n: int, p: int, rho: int) -> AssignmentMatrix:
    """Cyclic repetition: worker j holds the samples i with (i - j) mod n < rho.

    Reproduces the usual staircase layout; with n = p = rho it degenerates to
    the all-one matrix.
    """
    if not (1 <= rho <= n) or p < 1:
        raise InvalidParamsError(f"need 1 <= rho <= n and p >= 1, got n={n}, p={p}, rho={rho}")
    bits = [[1 if (i - j) % n < rho else 0 for i in range(p)] for j in range(n)]
    return _finish(n, p, rho, bits, "cyclic")


def make_fractional(n: int, p: int, rho: int) -> AssignmentMatrix:
    """Fractional repetition: n/rho worker groups, each holding one sample slice.

    When p is not divisible by the group count, remainder samples go to the
    first groups, keeping slice sizes within 1 of each other.
    """
    if not (1 <= rho <= n) or p < 1:
        raise InvalidParamsError(f"need 1 <= rho <= n and p >= 1, got n={n}, p={p}, rho={rho}")
    if n % rho != 0:
        raise InvalidParamsError(f"fractional repetition needs rho | n, got n={n}, rho={rho}")
    groups = n // rho
    if p < groups:
        raise InvalidParamsError(
            f"fractional repetition needs p >= n/rho groups, got p={p}, groups={groups}"
        )
    base, extra = divmod(p, groups)
    bits = [[0] * p for _ in range(n)]
    start = 0
    for g in range(groups):
        size = base + (1 if g < extra else 0)
        for j in range(g * rho, (g + 1) * rho):
            for i in range(start, start + size):
                bits[j][i] = 1
        start += size
    return _finish(n, p, rho, bits, "fractional")


def make_random_regular(n: int, p: int, rho: int, seed: int) -> AssignmentMatrix:
    """Seeded random member of the regular family.

    Columns are sampled independently (rho workers each); empty rows are then
    repaired by moving a sample away from a worker that holds at least two.
    """
    if not (1 <= rho <= n) or p < 1:
        raise InvalidParamsError(f"need 1 <= rho <= n and p >= 1, got n={n}, p={p}, rho={rho}")
    if rho * p < n:
        raise InvalidParamsError(
            f"no regular assignment exists with rho*p = {rho * p} < n = {n}"
        )
    rng = random.Random(seed)
    bits = [[0] * p for _ in range(n)]
    for i in range(p):
        for j in rng.sample(range(n), rho):
            bits[j][i] = 1
    for _ in range(1000):
        empty = [j for j in range(n) if not any(bits[j])]
        if not empty:
            break
        j = empty[0]
        candidates = [
            (jj, i)
            for jj in range(n)
            if sum(bits[jj]) >= 2
            for i in range(p)
            if bits[jj][i] and not bits[j][i]
        ]
        if not candidates:
            raise GenerationFailedError("no repair move available")
        jj, i = rng.choice(candidates)
        bits[jj][i] = 0
        bits[j][i] = 1
    else:
        raise GenerationFailedError("row repair did not converge within 1000 passes")
    return _finish(n, p, rho, bits, "random-regular")


def assignment_to_text(a: AssignmentMatrix, rho: int) -> str:
    """Plain-text form: header "n p rho", then n rows of p '0'/'1' characters."""
    lines = [f"{a.n} {a.p} {rho}"]
    lines.extend("".join(map(str, row)) for row in a.bits)
    return "\n".join(lines) + "\n"


def assignment_from_text(text: str) -> tuple[AssignmentMatrix, int]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InvalidParamsError("empty assignment text")
    try:
        n, p, rho = map(int, lines[0].split())
    except ValueError as e:
        raise InvalidParamsError(f"bad assignment header: {lines[0]!r}") from e
    if len(lines) != n + 1:
        raise InvalidParamsError(f"expected {n} matrix rows, got {len(lines) - 1}")
    bits = []
    for ln in lines[1:]:
        if len(ln) != p or set(ln) - {"0", "1"}:
            raise InvalidParamsError(f"bad assignment row: {ln!r}")
        bits.append(tuple(int(ch) for ch in ln))
    return AssignmentMatrix(n, p, tuple(bits)), rho
