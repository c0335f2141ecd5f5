"""Main-node state machine: grouping, comparison, dispute resolution.

One run proceeds as follows. Every worker first transmits its coded
all-one response. While more unidentified malicious workers remain than the
code's residual error-correction capability (u-1), the main node forms
s_t + 1 groups of r+1 workers sharing an r-worker root and decodes each
group's claimed full gradient from the initial responses. If all groups
agree the value is correct and the run ends. Otherwise two disagreeing
groups play a match: a binary search over sums of sample intervals, one
field symbol per competing worker per level, that corners the dispute into
a single sample. Computing that sample locally exposes at least one
provably lying worker, which is eliminated. Once at most u-1 malicious
workers remain, the gradient is decoded directly with errors-and-erasures.

All bookkeeping uses 0-based indices; transcript events are 1-based.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .assignment import AssignmentMatrix
from .coding import (
    CodeContext,
    EncodingMatrix,
    ResponseMatrix,
    build_encoding_matrix,
    combining_vector,
    ecc_decode,
    worker_response,
)
from .errors import (
    AdversaryBudgetExceededError,
    DecodeFailureError,
    InfeasibleStateError,
    ProtocolInvariantViolation,
)
from .linalg import Matrix


# ---------------------------------------------------------------------------
# Match tree


@dataclass(frozen=True)
class TreeNode:
    """Contiguous 0-based sample interval [lo, hi)."""

    lo: int
    hi: int

    @property
    def size(self) -> int:
        return self.hi - self.lo

    @property
    def is_leaf(self) -> bool:
        return self.size == 1

    @property
    def mid(self) -> int:
        # First child takes the larger half when the interval is odd.
        return self.lo + (self.size + 1) // 2

    @property
    def left(self) -> "TreeNode":
        return TreeNode(self.lo, self.mid)

    @property
    def right(self) -> "TreeNode":
        return TreeNode(self.mid, self.hi)


class MatchTree:
    """Full binary tree over sample indices; leaves are single samples."""

    def __init__(self, p: int):
        if p < 1:
            raise ValueError("need at least one sample")
        self.p = p
        self.root = TreeNode(0, p)

    @property
    def height(self) -> int:
        return (self.p - 1).bit_length()

    def leaves(self) -> list[int]:
        out: list[int] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node.lo)
            else:
                stack.append(node.right)
                stack.append(node.left)
        return out

    def leaf_depth(self, i: int) -> int:
        node = self.root
        depth = 0
        while not node.is_leaf:
            node = node.left if i < node.mid else node.right
            depth += 1
        return depth


# ---------------------------------------------------------------------------
# Grouping and contradiction detection


@dataclass(frozen=True)
class GroupingPlan:
    root: tuple[int, ...]
    satellites: tuple[int, ...]
    groups: tuple[tuple[int, ...], ...]


def form_groups(
    active: Sequence[int], r: int, s_t: int, order: Sequence[int] | None = None
) -> GroupingPlan:
    """Pick r root workers plus s_t + 1 satellites from the active set.

    Group k is the root together with satellite k, so any two groups overlap
    in exactly the root. By default the lowest-index active workers are used;
    an explicit order exercises other choices.
    """
    pool = list(order) if order is not None else sorted(active)
    need = r + s_t + 1
    if len(pool) < need:
        raise InfeasibleStateError(
            f"need {need} active workers to form groups, have {len(pool)}"
        )
    root = tuple(pool[:r])
    satellites = tuple(pool[r : r + s_t + 1])
    groups = tuple(tuple(sorted(root + (sat,))) for sat in satellites)
    return GroupingPlan(root, satellites, groups)


@dataclass(frozen=True)
class Agreement:
    value: tuple[int, ...]


@dataclass(frozen=True)
class Conflict:
    first: int
    second: int
    coordinate: int


def detect_contradiction(responses: Sequence[Sequence[int]]) -> Agreement | Conflict:
    """Agreement if all group responses match; else the lowest differing pair.

    The conflicting pair is the lexicographically first (k1, k2) and the
    coordinate is the first position where those two differ.
    """
    if not responses:
        raise ValueError("need at least one group response")
    m = len(responses)
    for k1 in range(m):
        for k2 in range(k1 + 1, m):
            a, b = responses[k1], responses[k2]
            for coord, (x, y) in enumerate(zip(a, b)):
                if x != y:
                    return Conflict(k1, k2, coord)
    return Agreement(tuple(responses[0]))


def group_response(received: Matrix, b: Sequence[int]) -> list[int]:
    """Decode one group's claim: received (d x n) times the combining vector."""
    q = received.field.q
    out = []
    for t in range(received.rows):
        row = received.row_values(t)
        out.append(sum(v * c for v, c in zip(row, b)) % q)
    return out


# ---------------------------------------------------------------------------
# Transcript and oracle


class Transcript:
    """Ordered event log plus the run totals used as figures of merit."""

    def __init__(self):
        self.events: list[dict] = []
        self.local_computations = 0
        self.comm_overhead = 0
        self.downlink_bits = 0
        self.rounds = 0

    def add(self, event: str, **fields) -> None:
        self.events.append({"event": event, **fields})

    def eliminated_workers(self) -> list[int]:
        """1-based eliminated workers in elimination order."""
        out: list[int] = []
        for ev in self.events:
            if ev["event"] == "elimination":
                out.extend(ev["workers"])
        return out


class GradientOracle:
    """Ground-truth source for the main node's local computations."""

    def __init__(self, gradients: Matrix):
        self.gradients = gradients
        self.calls = 0

    def compute(self, i: int) -> list[int]:
        self.calls += 1
        return self.gradients.col_values(i)


def local_compute(oracle: GradientOracle, i: int) -> list[int]:
    return oracle.compute(i)


# ---------------------------------------------------------------------------
# Queries seen by the adversary


@dataclass(frozen=True)
class Query:
    """What the main node asks for; the adversary sees these in causal order."""

    kind: str  # "initial" or "match"
    round: int
    level: int | None
    mask: tuple[int, int]  # 0-based inclusive-exclusive sample interval
    coordinate: int | None


@dataclass(frozen=True)
class MatchResult:
    leaf: int
    claims: dict[int, int]
    truth: int
    malicious: tuple[int, ...]
    levels: int


@dataclass
class ProtocolResult:
    gradient: list[int]
    transcript: Transcript
    eliminated: tuple[int, ...]
    outcome: str


# ---------------------------------------------------------------------------
# Protocol engine


class ProtocolRun:
    """Single simulated run binding code, assignment, gradients and adversary."""

    def __init__(
        self,
        ctx: CodeContext,
        a_mat: AssignmentMatrix,
        gradients: Matrix,
        adversary,
        *,
        grouping: str = "lowest",
        grouping_rng: Optional[random.Random] = None,
        meta: Optional[dict] = None,
        enc: Optional[EncodingMatrix] = None,
    ):
        if a_mat.n != ctx.n or gradients.cols != a_mat.p:
            raise InfeasibleStateError("code, assignment and gradients disagree on shape")
        if grouping not in ("lowest", "shuffled"):
            raise ValueError(f"unknown grouping mode {grouping!r}")
        if grouping == "shuffled" and grouping_rng is None:
            raise ValueError("shuffled grouping needs an rng")
        self.ctx = ctx
        self.a_mat = a_mat
        self.gradients = gradients
        self.adversary = adversary
        self.grouping = grouping
        self.grouping_rng = grouping_rng
        self.tree = MatchTree(a_mat.p)
        self.enc = enc if enc is not None else build_encoding_matrix(ctx, a_mat, [1] * a_mat.p)
        self.oracle = GradientOracle(gradients)
        self.transcript = Transcript()
        self.active = list(range(ctx.n))
        self.eliminated: list[int] = []
        meta = dict(meta or {})
        self.transcript.add(
            "start",
            n=ctx.n,
            s=ctx.s,
            u=ctx.u,
            r=ctx.r,
            p=a_mat.p,
            d=gradients.rows,
            q=ctx.field.q,
            eval_points=list(ctx.eval_points),
            grouping=grouping,
            **meta,
        )

    # -- queries ------------------------------------------------------------

    def _transmit_initial(self) -> ResponseMatrix:
        ctx = self.ctx
        query = Query("initial", 1, None, (0, self.a_mat.p), None)
        self.adversary.record(query)
        cols: list[list[int]] = []
        for j in range(ctx.n):
            honest = worker_response(self.gradients, self.enc, j)
            if j in self.adversary.controlled:
                cols.append([v % ctx.field.q for v in self.adversary.initial_response(j, honest)])
            else:
                cols.append(honest)
        d = self.gradients.rows
        data = [cols[j][t] for t in range(d) for j in range(ctx.n)]
        values = Matrix(ctx.field, d, ctx.n, data)
        self.transcript.add(
            "query", t=1, kind="initial", mask=[1, self.a_mat.p], coordinate=None,
            workers=[j + 1 for j in range(ctx.n)],
        )
        self.transcript.add(
            "response_set", t=1, kind="initial",
            workers=[j + 1 for j in range(ctx.n)],
            values=[cols[j] for j in range(ctx.n)],
        )
        return ResponseMatrix(values, tuple([1] * self.a_mat.p), tuple([True] * ctx.n))

    def _query_match(
        self, t: int, level: int, node: TreeNode, coord: int, workers: Sequence[int]
    ) -> dict[int, int]:
        """One tournament query: each competing worker sends one field symbol."""
        ctx = self.ctx
        q = ctx.field.q
        query = Query("match", t, level, (node.lo, node.hi), coord)
        self.adversary.record(query)
        grow = self.gradients.row_values(coord)
        w = self.enc.w
        out: dict[int, int] = {}
        for j in workers:
            honest = sum(grow[i] * w.at(i, j) for i in range(node.lo, node.hi)) % q
            if j in self.adversary.controlled:
                out[j] = self.adversary.match_response(j, query, honest) % q
            else:
                out[j] = honest
        self.transcript.comm_overhead += len(workers)
        self.transcript.downlink_bits += 1
        self.transcript.add(
            "query", t=t, kind="match", level=level,
            mask=[node.lo + 1, node.hi], coordinate=coord + 1,
            workers=[j + 1 for j in workers],
        )
        self.transcript.add(
            "response_set", t=t, kind="match", level=level,
            workers=[j + 1 for j in workers], values=[out[j] for j in workers],
        )
        return out

    def _local_compute(self, t: int, i: int) -> list[int]:
        value = local_compute(self.oracle, i)
        self.transcript.local_computations += 1
        self.transcript.add("local_compute", t=t, sample=i + 1, value=value)
        return value

    # -- tournament ---------------------------------------------------------

    def run_match(
        self,
        t: int,
        plan: GroupingPlan,
        conflict: Conflict,
        initial: ResponseMatrix,
        group_claims: Sequence[Sequence[int]],
    ) -> MatchResult:
        """Binary-search the dispute between two groups down to one sample.

        Every level queries the left child interval of the current node; the
        unqueried child's per-worker commitment follows by subtracting from
        the parent commitment. At the leaf each worker's committed symbol is
        checked against truth times its known coefficient, which is a proof
        of deviation whenever it fails.
        """
        ctx = self.ctx
        q = ctx.field.q
        coord = conflict.coordinate
        g1 = plan.groups[conflict.first]
        g2 = plan.groups[conflict.second]
        union = sorted(set(g1) | set(g2))
        b1 = combining_vector(ctx, g1)
        b2 = combining_vector(ctx, g2)
        # Per-worker commitments for the current node, seeded by the initial
        # responses at the disputed coordinate.
        commit = {j: initial.values.at(coord, j) for j in union}
        label1 = group_claims[conflict.first][coord]
        label2 = group_claims[conflict.second][coord]
        if label1 == label2:
            raise ProtocolInvariantViolation("match started without a dispute")
        node = self.tree.root
        levels = 0
        while not node.is_leaf:
            levels += 1
            left = node.left
            resp = self._query_match(t, levels, left, coord, union)
            lc1 = sum(resp[j] * b1[j] for j in g1) % q
            lc2 = sum(resp[j] * b2[j] for j in g2) % q
            rc1 = (label1 - lc1) % q
            rc2 = (label2 - lc2) % q
            if lc1 != lc2:
                descend = "left"
                for j in union:
                    commit[j] = resp[j]
                label1, label2 = lc1, lc2
                nxt = left
            else:
                if rc1 == rc2:
                    raise ProtocolInvariantViolation(
                        "groups agree on both children of a disputed node"
                    )
                descend = "right"
                for j in union:
                    commit[j] = (commit[j] - resp[j]) % q
                label1, label2 = rc1, rc2
                nxt = node.right
            self.transcript.add(
                "match_level", t=t, level=levels,
                node=[node.lo + 1, node.hi],
                queried=[left.lo + 1, left.hi],
                left_claims=[lc1, lc2], right_claims=[rc1, rc2],
                descend=descend,
            )
            node = nxt
        leaf = node.lo
        truth_vec = self._local_compute(t, leaf)
        truth = truth_vec[coord]
        w = self.enc.w
        malicious = []
        for j in union:
            wij = w.at(leaf, j)
            if self.a_mat.bits[j][leaf] and wij == 0:
                raise ProtocolInvariantViolation(
                    f"assigned worker {j + 1} has zero coefficient for sample {leaf + 1}"
                )
            if commit[j] != truth * wij % q:
                malicious.append(j)
        if not malicious:
            raise ProtocolInvariantViolation("match reached a leaf but found no liar")
        self.transcript.add(
            "elimination", t=t, leaf=leaf + 1,
            claims=[[j + 1, commit[j]] for j in union],
            truth_coordinate=truth,
            workers=[j + 1 for j in malicious],
        )
        return MatchResult(leaf, commit, truth, tuple(malicious), levels)

    # -- main loop ----------------------------------------------------------

    def run(self) -> ProtocolResult:
        ctx = self.ctx
        self.adversary.bind(ctx, self.a_mat, self.enc)
        initial = self._transmit_initial()
        t = 1
        while True:
            s_t = ctx.s - len(self.eliminated)
            if s_t < 0:
                raise AdversaryBudgetExceededError(
                    "more workers eliminated than the declared budget"
                )
            if s_t <= ctx.u - 1:
                try:
                    gradient = ecc_decode(ctx, initial, self.eliminated)
                except DecodeFailureError as e:
                    raise AdversaryBudgetExceededError(
                        "errors-and-erasures decoding failed; corruption exceeds budget"
                    ) from e
                self.transcript.add(
                    "ecc_decode",
                    identified=[j + 1 for j in sorted(self.eliminated)],
                    gradient=gradient,
                )
                return self._finish("ecc", gradient)
            order = None
            if self.grouping == "shuffled":
                order = list(self.active)
                self.grouping_rng.shuffle(order)
            plan = form_groups(self.active, ctx.r, s_t, order)
            claims = [
                group_response(initial.values, combining_vector(ctx, g))
                for g in plan.groups
            ]
            self.transcript.rounds += 1
            self.transcript.add(
                "decode", t=t,
                groups=[[j + 1 for j in g] for g in plan.groups],
                values=claims,
            )
            outcome = detect_contradiction(claims)
            if isinstance(outcome, Agreement):
                self.transcript.add("agreement", t=t, value=list(outcome.value))
                return self._finish("agreement", list(outcome.value))
            self.transcript.add(
                "conflict", t=t,
                first=outcome.first + 1, second=outcome.second + 1,
                coordinate=outcome.coordinate + 1,
            )
            result = self.run_match(t, plan, outcome, initial, claims)
            for j in result.malicious:
                self.active.remove(j)
                self.eliminated.append(j)
            t += 1

    def _finish(self, outcome: str, gradient: list[int]) -> ProtocolResult:
        tr = self.transcript
        tr.add(
            "final", outcome=outcome, gradient=gradient,
            local_computations=tr.local_computations,
            comm_overhead=tr.comm_overhead,
            rounds=tr.rounds,
            downlink_bits=tr.downlink_bits,
            eliminated=[j + 1 for j in self.eliminated],
        )
        return ProtocolResult(gradient, tr, tuple(self.eliminated), outcome)


def run_protocol(
    ctx: CodeContext,
    a_mat: AssignmentMatrix,
    gradients: Matrix,
    adversary,
    *,
    grouping: str = "lowest",
    grouping_rng: Optional[random.Random] = None,
    meta: Optional[dict] = None,
    enc: Optional[EncodingMatrix] = None,
) -> ProtocolResult:
    """Run one full protocol instance and return gradient plus transcript."""
    run = ProtocolRun(
        ctx, a_mat, gradients, adversary,
        grouping=grouping, grouping_rng=grouping_rng, meta=meta, enc=enc,
    )
    return run.run()
