"""Gradient code construction over a prime field.

The generator matrix F is a (r+1) x n Vandermonde on distinct nonzero
evaluation points, so every r+1 columns form an invertible block (MDS).
Worker j's coefficients for a queried combination a are column j of
W = (Q | a) F, where each row of Q is pinned by forcing zeros at the workers
that do not hold the corresponding sample. Any r+1 workers then suffice to
recover the combination via a closed-form combining vector, and identified
workers can be treated as erasures by an exhaustive errors-and-erasures
decoder on the punctured code.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

from .assignment import AssignmentMatrix
from .errors import (
    AssignmentMismatchError,
    DecodeFailureError,
    DimensionError,
    InvalidParamsError,
    ProtocolInvariantViolation,
)
from .field import DEFAULT_MODULUS, PrimeField
from .linalg import Matrix, solve_linear, vandermonde, vandermonde_inverse_last_column


@dataclass(frozen=True)
class CodeContext:
    """Shared code parameters: n workers, s malicious, u redundancy, r = n-(s+u)."""

    n: int
    s: int
    u: int
    r: int
    field: PrimeField
    eval_points: tuple[int, ...]
    generator: Matrix  # (r+1) x n, entry [k][j] = eval_points[j]**k


def build_code_context(
    n: int,
    s: int,
    u: int,
    q: int = DEFAULT_MODULUS,
    eval_points: Sequence[int] | None = None,
) -> CodeContext:
    if not (1 <= u <= s + 1):
        raise InvalidParamsError(f"need 1 <= u <= s+1, got s={s}, u={u}")
    if n < s + u:
        raise InvalidParamsError(f"need n >= s+u, got n={n}, s={s}, u={u}")
    field = PrimeField(q)
    if q <= n:
        raise InvalidParamsError(f"modulus must exceed worker count, got q={q}, n={n}")
    if eval_points is None:
        eval_points = tuple(range(1, n + 1))
    else:
        eval_points = tuple(x % q for x in eval_points)
    if len(eval_points) != n:
        raise InvalidParamsError("need one evaluation point per worker")
    if 0 in eval_points or len(set(eval_points)) != n:
        raise InvalidParamsError("evaluation points must be distinct and nonzero")
    r = n - (s + u)
    generator = vandermonde(field, eval_points, r + 1).transpose()
    return CodeContext(n, s, u, r, field, eval_points, generator)


@dataclass(frozen=True)
class EncodingMatrix:
    """Query coefficients a together with the worker coefficient matrix W (p x n)."""

    a: tuple[int, ...]
    w: Matrix


def build_encoding_matrix(ctx: CodeContext, a_mat: AssignmentMatrix, a: Sequence[int]) -> EncodingMatrix:
    """Solve the per-sample zero constraints and assemble W = (Q | a) F.

    Requires each sample to be missing from exactly r workers, which is what
    a regular assignment with replication s+u guarantees.
    """
    field = ctx.field
    q = field.q
    n, r = ctx.n, ctx.r
    p = a_mat.p
    if a_mat.n != n:
        raise AssignmentMismatchError(f"assignment has {a_mat.n} workers, code has {n}")
    if len(a) != p:
        raise DimensionError(f"query vector length {len(a)} != p = {p}")
    f_rows = ctx.generator.to_rows()  # r+1 rows of length n
    unit_cache: dict[tuple[int, ...], list[int]] = {}
    w_rows: list[list[int]] = []
    for i in range(p):
        zero_set = tuple(a_mat.zero_set(i))
        if len(zero_set) != r:
            raise AssignmentMismatchError(
                f"sample {i + 1} is missing from {len(zero_set)} workers, expected r={r}"
            )
        ai = a[i] % q
        if ai == 0:
            # Homogeneous constraints with an invertible block force q_i = 0.
            w_rows.append([0] * n)
            continue
        if r == 0:
            qi: list[int] = []
        else:
            unit = unit_cache.get(zero_set)
            if unit is None:
                # Solve the a_i = 1 instance once per zero pattern; the
                # constraints are linear in a_i, so other values just scale it.
                top_t = Matrix.from_rows(
                    field, [[f_rows[k][j] for k in range(r)] for j in zero_set]
                )
                rhs = Matrix.column(field, [-f_rows[r][j] for j in zero_set])
                out = solve_linear(top_t, rhs)
                if out.kind != "unique":
                    raise ProtocolInvariantViolation(
                        "zero-constraint system is not uniquely solvable; "
                        "Vandermonde block should be invertible"
                    )
                unit = [out.solution.at(k, 0) for k in range(r)]
                unit_cache[zero_set] = unit
            qi = [ai * v % q for v in unit]
        row = []
        for j in range(n):
            acc = ai * f_rows[r][j]
            for k in range(r):
                acc += qi[k] * f_rows[k][j]
            row.append(acc % q)
        w_rows.append(row)
    return EncodingMatrix(tuple(v % q for v in a), Matrix.from_rows(field, w_rows))


def restrict_encoding(enc: EncodingMatrix, mask: Iterable[int]) -> EncodingMatrix:
    """Encoding for a 0/1 sub-query: zero the rows outside the mask.

    Only valid when enc was built for the all-one query; workers never solve
    the coefficient system afresh mid-protocol.
    """
    if any(v != 1 for v in enc.a):
        raise InvalidParamsError("restriction requires the all-one base encoding")
    keep = set(mask)
    p, n = enc.w.rows, enc.w.cols
    zeros = [0] * n
    rows = [enc.w.row_values(i) if i in keep else list(zeros) for i in range(p)]
    a = tuple(1 if i in keep else 0 for i in range(p))
    return EncodingMatrix(a, Matrix.from_rows(enc.w.field, rows))


def combining_vector(ctx: CodeContext, group: Sequence[int]) -> list[int]:
    """Length-n coefficients fusing a size-(r+1) group's responses into G @ a.

    Entry j for a group member is 1 / prod over the other members' evaluation
    point differences; entries outside the group are zero.
    """
    members = list(group)
    if len(members) != ctx.r + 1 or len(set(members)) != len(members):
        raise InvalidParamsError(f"group must contain r+1 = {ctx.r + 1} distinct workers")
    pts = [ctx.eval_points[j] for j in members]
    coeffs = vandermonde_inverse_last_column(ctx.field, pts)
    b = [0] * ctx.n
    for j, c in zip(members, coeffs):
        b[j] = c
    return b


@dataclass(frozen=True)
class DecodingMatrix:
    groups: tuple[tuple[int, ...], ...]
    b: Matrix  # n x m, column k = combining vector of group k


def build_decoding_matrix(ctx: CodeContext, groups: Sequence[Sequence[int]]) -> DecodingMatrix:
    cols = [combining_vector(ctx, g) for g in groups]
    data = [cols[k][j] for j in range(ctx.n) for k in range(len(cols))]
    b = Matrix(ctx.field, ctx.n, len(cols), data)
    return DecodingMatrix(tuple(tuple(g) for g in groups), b)


def worker_response(gradients: Matrix, enc: EncodingMatrix, j: int) -> list[int]:
    """Honest response of worker j: G @ W[:, j], a length-d vector."""
    q = gradients.field.q
    d, p = gradients.rows, gradients.cols
    if p != enc.w.rows:
        raise DimensionError("gradient matrix width must equal sample count")
    col = enc.w.col_values(j)
    out = []
    for t in range(d):
        grow = gradients.row_values(t)
        out.append(sum(g * c for g, c in zip(grow, col)) % q)
    return out


def response_matrix(gradients: Matrix, enc: EncodingMatrix) -> Matrix:
    """All honest responses at once: Z = G @ W, shape d x n."""
    return gradients * enc.w


@dataclass(frozen=True)
class ResponseMatrix:
    """Received responses for one query: possibly corrupted columns of G @ W."""

    values: Matrix  # d x n
    query: tuple[int, ...]
    present: tuple[bool, ...]


def ecc_decode(
    ctx: CodeContext, received: ResponseMatrix, identified: Iterable[int]
) -> list[int]:
    """Recover the full gradient from the all-one responses by errors-and-erasures.

    Identified workers are erased outright. Among the rest, every error
    pattern of weight at most u-1 is tried: erase it, decode the information
    word from one r+1 column block, and accept iff the re-encoded codeword
    matches every remaining column. The punctured code has minimum distance
    2u-1, so within budget exactly one decoding survives; its last
    information symbol is the full gradient.
    """
    if any(v != 1 for v in received.query):
        raise InvalidParamsError("errors-and-erasures decoding runs on the all-one query")
    erased = set(identified)
    avail = [j for j in range(ctx.n) if received.present[j] and j not in erased]
    k = ctx.r + 1
    f = ctx.generator
    z = received.values
    budget = ctx.u - 1
    for t_size in range(budget + 1):
        for trial in combinations(avail, t_size):
            keep = [j for j in avail if j not in trial]
            if len(keep) < k:
                continue
            info_set = keep[:k]
            out = solve_linear(
                f.take_columns(info_set).transpose(), z.take_columns(info_set).transpose()
            )
            if out.kind != "unique":
                raise ProtocolInvariantViolation("generator block must be invertible")
            c = out.solution.transpose()  # d x (r+1)
            if c * f.take_columns(keep) == z.take_columns(keep):
                return c.col_values(k - 1)
    raise DecodeFailureError(
        f"no codeword within {budget} errors over {len(avail)} available workers"
    )
