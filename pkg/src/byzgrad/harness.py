"""Simulation harness: configuration, metrics, sweeps, transcript replay.

A run is fully determined by its SimulationConfig; identical configs produce
byte-identical transcripts and metrics. The per-run CSV schema is

    n,s,u,p,d,q,assignment,adversary,seed,correct,c,C_oh,rounds,downlink_bits,eliminated

with eliminated as a semicolon-joined list of 1-based worker ids.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from functools import lru_cache
from multiprocessing import Pool
from typing import Iterable, Optional, Sequence

from . import adversary as adv
from .assignment import (
    AssignmentMatrix,
    assignment_from_text,
    assignment_to_text,
    make_cyclic,
    make_fractional,
    make_random_regular,
    validate_regular,
)
from .coding import (
    CodeContext,
    EncodingMatrix,
    ResponseMatrix,
    build_code_context,
    build_encoding_matrix,
    combining_vector,
    ecc_decode,
)
from .errors import InvalidParamsError, TranscriptReplayError
from .field import DEFAULT_MODULUS, is_prime
from .linalg import Matrix
from .protocol import (
    Agreement,
    MatchTree,
    ProtocolResult,
    detect_contradiction,
    group_response,
    run_protocol,
)

METRICS_HEADER = "n,s,u,p,d,q,assignment,adversary,seed,correct,c,C_oh,rounds,downlink_bits,eliminated"

ADVERSARY_NAMES = (
    "honest",
    "random-always",
    "random-initial-only",
    "random-coin",
    "tournament-liar",
    "symmetrization",
)

ASSIGNMENT_KINDS = ("cyclic", "fractional", "random", "file")


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class SimulationConfig:
    n: int
    s: int
    u: int
    p: int
    d: int = 1
    q: int = DEFAULT_MODULUS
    assignment: str = "cyclic"
    adversary: str = "honest"
    seed: int = 0
    grouping: str = "lowest"
    controlled: str = "random"  # "random" | "first" | "last" | "1;3" explicit 1-based
    lie_plan: str = "consistent"
    corruption_offset: int = 1
    assignment_path: Optional[str] = None

    @property
    def rho(self) -> int:
        return self.s + self.u

    def validate(self) -> None:
        if self.s < 1:
            raise InvalidParamsError(f"need s >= 1, got s={self.s}")
        if not (1 <= self.u <= self.s + 1):
            raise InvalidParamsError(f"need 1 <= u <= s+1, got s={self.s}, u={self.u}")
        if self.n < self.rho:
            raise InvalidParamsError(f"need n >= s+u, got n={self.n}, s+u={self.rho}")
        if self.p < 1 or self.d < 1:
            raise InvalidParamsError("need p >= 1 and d >= 1")
        if not is_prime(self.q):
            raise InvalidParamsError(f"q must be prime, got {self.q}")
        if self.q <= max(self.n, self.p):
            raise InvalidParamsError(f"need q > max(n, p), got q={self.q}")
        if self.assignment not in ASSIGNMENT_KINDS:
            raise InvalidParamsError(f"unknown assignment kind {self.assignment!r}")
        if self.assignment == "file" and not self.assignment_path:
            raise InvalidParamsError("assignment 'file' needs assignment_path")
        if self.adversary not in ADVERSARY_NAMES:
            raise InvalidParamsError(f"unknown adversary {self.adversary!r}")
        if self.grouping not in ("lowest", "shuffled"):
            raise InvalidParamsError(f"unknown grouping mode {self.grouping!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise InvalidParamsError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def assignment_feasible(kind: str, n: int, p: int, rho: int) -> tuple[bool, str]:
    """Whether a regular assignment of this kind exists for the parameters."""
    if rho > n:
        return False, "rho exceeds n"
    if rho * p < n:
        return False, "rho*p < n leaves some worker idle"
    if kind == "cyclic" and p + rho - 1 < n:
        return False, "cyclic layout leaves some worker idle"
    if kind == "fractional":
        if n % rho != 0:
            return False, "fractional needs rho | n"
        if p < n // rho:
            return False, "fractional needs p >= n/rho"
    return True, ""


def build_assignment(config: SimulationConfig) -> AssignmentMatrix:
    rho = config.rho
    if config.assignment == "cyclic":
        return make_cyclic(config.n, config.p, rho)
    if config.assignment == "fractional":
        return make_fractional(config.n, config.p, rho)
    if config.assignment == "random":
        return make_random_regular(config.n, config.p, rho, config.seed)
    with open(config.assignment_path, "r", encoding="ascii") as fh:
        a_mat, file_rho = assignment_from_text(fh.read())
    if a_mat.n != config.n or a_mat.p != config.p or file_rho != rho:
        raise InvalidParamsError("assignment file disagrees with config dimensions")
    if not validate_regular(a_mat, rho):
        raise InvalidParamsError("assignment file is not regular")
    return a_mat


def resolve_controlled(config: SimulationConfig) -> tuple[int, ...]:
    """0-based controlled worker set of size at most s."""
    rule = config.controlled
    if rule == "random":
        rng = random.Random(f"{config.seed}:controlled")
        return tuple(sorted(rng.sample(range(config.n), config.s)))
    if rule == "first":
        return tuple(range(config.s))
    if rule == "last":
        return tuple(range(config.n - config.s, config.n))
    ids = [int(tok) for tok in rule.replace(",", ";").split(";") if tok.strip()]
    if any(not (1 <= j <= config.n) for j in ids):
        raise InvalidParamsError(f"controlled workers out of range: {rule!r}")
    if len(set(ids)) > config.s:
        raise InvalidParamsError(f"at most s={config.s} workers may be controlled")
    return tuple(sorted(j - 1 for j in set(ids)))


def make_adversary(config: SimulationConfig):
    name = config.adversary
    if name == "honest":
        return adv.honest()
    if name == "symmetrization":
        return adv.symmetrization(config.seed, config.corruption_offset)
    controlled = resolve_controlled(config)
    if name == "random-always":
        return adv.random_corruption(controlled, config.seed, "always")
    if name == "random-initial-only":
        return adv.random_corruption(controlled, config.seed, "initial_only")
    if name == "random-coin":
        return adv.random_corruption(controlled, config.seed, "per_query_coin")
    if name == "tournament-liar":
        return adv.tournament_liar(controlled, config.lie_plan, config.seed)
    raise InvalidParamsError(f"unknown adversary {name!r}")


@lru_cache(maxsize=256)
def _cached_instance(
    n: int, s: int, u: int, q: int, p: int, kind: str, seed: int
) -> tuple[CodeContext, AssignmentMatrix, EncodingMatrix]:
    ctx = build_code_context(n, s, u, q)
    if kind == "cyclic":
        a_mat = make_cyclic(n, p, s + u)
    elif kind == "fractional":
        a_mat = make_fractional(n, p, s + u)
    else:
        a_mat = make_random_regular(n, p, s + u, seed)
    enc = build_encoding_matrix(ctx, a_mat, [1] * p)
    return ctx, a_mat, enc


# ---------------------------------------------------------------------------
# Metrics


def ceil_log2(p: int) -> int:
    return (p - 1).bit_length()


@dataclass(frozen=True)
class RunMetrics:
    n: int
    s: int
    u: int
    p: int
    d: int
    q: int
    assignment: str
    adversary: str
    seed: int
    correct: bool
    c: int
    c_oh: int
    rounds: int
    downlink_bits: int
    eliminated: tuple[int, ...]  # 1-based

    def bound_violations(self) -> list[str]:
        r = self.n - self.s - self.u
        budget = self.s + 1 - self.u
        out = []
        if self.c > budget:
            out.append(f"local computations {self.c} > {budget}")
        if self.c_oh > (r + 2) * budget * ceil_log2(self.p):
            out.append(
                f"communication overhead {self.c_oh} > {(r + 2) * budget * ceil_log2(self.p)}"
            )
        if self.rounds > budget:
            out.append(f"rounds {self.rounds} > {budget}")
        return out

    def csv_row(self) -> str:
        elim = ";".join(map(str, self.eliminated))
        return (
            f"{self.n},{self.s},{self.u},{self.p},{self.d},{self.q},"
            f"{self.assignment},{self.adversary},{self.seed},"
            f"{'true' if self.correct else 'false'},{self.c},{self.c_oh},"
            f"{self.rounds},{self.downlink_bits},{elim}"
        )


@dataclass
class SimulationOutput:
    config: SimulationConfig
    metrics: RunMetrics
    result: ProtocolResult
    truth: list[int]


def run_simulation(config: SimulationConfig) -> SimulationOutput:
    """Build the instance from the config, run the protocol, collect metrics."""
    config.validate()
    if config.assignment == "file":
        ctx = build_code_context(config.n, config.s, config.u, config.q)
        a_mat = build_assignment(config)
        enc = build_encoding_matrix(ctx, a_mat, [1] * config.p)
    else:
        ok, reason = assignment_feasible(config.assignment, config.n, config.p, config.rho)
        if not ok:
            raise InvalidParamsError(reason)
        aseed = config.seed if config.assignment == "random" else 0
        ctx, a_mat, enc = _cached_instance(
            config.n, config.s, config.u, config.q, config.p, config.assignment, aseed
        )
    grad_rng = random.Random(f"{config.seed}:gradients")
    gradients = Matrix(
        ctx.field,
        config.d,
        config.p,
        [grad_rng.randrange(config.q) for _ in range(config.d * config.p)],
    )
    strategy = make_adversary(config)
    grouping_rng = (
        random.Random(f"{config.seed}:grouping") if config.grouping == "shuffled" else None
    )
    meta = {
        "assignment": assignment_to_text(a_mat, config.rho),
        "assignment_kind": config.assignment,
        "adversary": config.adversary,
        "seed": config.seed,
    }
    result = run_protocol(
        ctx,
        a_mat,
        gradients,
        strategy,
        grouping=config.grouping,
        grouping_rng=grouping_rng,
        meta=meta,
        enc=enc,
    )
    q = config.q
    truth = [sum(gradients.row_values(t)) % q for t in range(config.d)]
    tr = result.transcript
    metrics = RunMetrics(
        n=config.n,
        s=config.s,
        u=config.u,
        p=config.p,
        d=config.d,
        q=config.q,
        assignment=config.assignment,
        adversary=config.adversary,
        seed=config.seed,
        correct=result.gradient == truth,
        c=tr.local_computations,
        c_oh=tr.comm_overhead,
        rounds=tr.rounds,
        downlink_bits=tr.downlink_bits,
        eliminated=tuple(j + 1 for j in result.eliminated),
    )
    return SimulationOutput(config, metrics, result, truth)


# ---------------------------------------------------------------------------
# Sweeps


@dataclass(frozen=True)
class SkippedRow:
    params: dict
    reason: str


@dataclass
class SweepReport:
    rows: list[RunMetrics]
    skipped: list[SkippedRow]

    def violations(self) -> list[tuple[RunMetrics, str]]:
        out = []
        for m in self.rows:
            for v in m.bound_violations():
                out.append((m, v))
            if not m.correct:
                out.append((m, "incorrect gradient"))
        return out

    def summary(self) -> str:
        rows = self.rows
        nruns = len(rows)
        bad = self.violations()
        lines = [
            f"runs: {nruns}  skipped: {len(self.skipped)}  "
            f"violations: {len(bad)}  incorrect: {sum(not m.correct for m in rows)}"
        ]
        if rows:
            for label, key in (
                ("c", lambda m: m.c),
                ("C_oh", lambda m: m.c_oh),
                ("rounds", lambda m: m.rounds),
                ("downlink_bits", lambda m: m.downlink_bits),
            ):
                vals = [key(m) for m in rows]
                lines.append(
                    f"{label}: max {max(vals)}  mean {sum(vals) / nruns:.3f}"
                )
        return "\n".join(lines)


def grid_configs(
    ns: Sequence[int],
    ss: Sequence[int],
    us: Sequence[int] | str,
    ps: Sequence[int],
    ds: Sequence[int],
    assignments: Sequence[str],
    adversaries: Sequence[str],
    seeds: int,
    q: int = DEFAULT_MODULUS,
    grouping: str = "lowest",
) -> Iterable[SimulationConfig | SkippedRow]:
    """Cartesian product of the grid; infeasible combos become SkippedRow."""
    for n in ns:
        for s in ss:
            if us == "auto":
                u_list = list(range(1, min(s + 1, n - s) + 1))
            else:
                u_list = list(us)
            for u in u_list:
                if u < 1 or u > s + 1 or n < s + u:
                    yield SkippedRow(
                        {"n": n, "s": s, "u": u},
                        "parameters outside 1 <= u <= s+1 and n >= s+u",
                    )
                    continue
                rho = s + u
                for p in ps:
                    for kind in assignments:
                        ok, reason = assignment_feasible(kind, n, p, rho)
                        if not ok:
                            yield SkippedRow(
                                {"n": n, "s": s, "u": u, "p": p, "assignment": kind},
                                reason,
                            )
                            continue
                        for d in ds:
                            for name in adversaries:
                                for seed in range(seeds):
                                    yield SimulationConfig(
                                        n=n, s=s, u=u, p=p, d=d, q=q,
                                        assignment=kind, adversary=name,
                                        seed=seed, grouping=grouping,
                                    )


def _run_one(config: SimulationConfig) -> RunMetrics:
    return run_simulation(config).metrics


def run_sweep(
    items: Iterable[SimulationConfig | SkippedRow], jobs: int | None = None
) -> SweepReport:
    configs: list[SimulationConfig] = []
    skipped: list[SkippedRow] = []
    for item in items:
        if isinstance(item, SkippedRow):
            skipped.append(item)
        else:
            configs.append(item)
    if jobs and jobs > 1 and len(configs) > 1:
        with Pool(jobs) as pool:
            rows = pool.map(_run_one, configs, chunksize=64)
    else:
        rows = [_run_one(c) for c in configs]
    return SweepReport(rows, skipped)


# ---------------------------------------------------------------------------
# Transcript IO and replay


def write_transcript(result: ProtocolResult, path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for ev in result.transcript.events:
            fh.write(json.dumps(ev, separators=(",", ":")) + "\n")


def read_events(path: str) -> list[dict]:
    with open(path, "r", encoding="ascii") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def replay_transcript(path: str) -> list[int]:
    """Re-execute the main node's decisions from the recorded wire data.

    Rebuilds the code and encoding from the header, recomputes every decode,
    match walk, elimination and the final decode from the recorded responses,
    and cross-checks each against the recorded events. Returns the recomputed
    gradient, which must equal the recorded one.
    """
    events = read_events(path)
    if not events or events[0]["event"] != "start":
        raise TranscriptReplayError("transcript must begin with a start event")
    hdr = events[0]
    if "assignment" not in hdr:
        raise TranscriptReplayError("transcript lacks the embedded assignment text")
    ctx = build_code_context(
        hdr["n"], hdr["s"], hdr["u"], hdr["q"], eval_points=hdr["eval_points"]
    )
    a_mat, rho = assignment_from_text(hdr["assignment"])
    if rho != hdr["s"] + hdr["u"]:
        raise TranscriptReplayError("assignment replication disagrees with header")
    enc = build_encoding_matrix(ctx, a_mat, [1] * a_mat.p)
    tree = MatchTree(a_mat.p)
    q = ctx.field.q
    d = hdr["d"]
    pos = 1

    def expect(kind: str) -> dict:
        nonlocal pos
        if pos >= len(events) or events[pos]["event"] != kind:
            got = events[pos]["event"] if pos < len(events) else "end of file"
            raise TranscriptReplayError(f"expected {kind} event, got {got}")
        ev = events[pos]
        pos += 1
        return ev

    expect("query")
    init = expect("response_set")
    cols = init["values"]
    if len(cols) != ctx.n or any(len(c) != d for c in cols):
        raise TranscriptReplayError("initial response set has wrong shape")
    ztilde = Matrix(
        ctx.field, d, ctx.n, [cols[j][t] % q for t in range(d) for j in range(ctx.n)]
    )
    eliminated: list[int] = []
    groups: list[tuple[int, ...]] = []
    claims: list[list[int]] = []
    gradient: Optional[list[int]] = None
    while pos < len(events):
        ev = events[pos]
        pos += 1
        kind = ev["event"]
        if kind == "decode":
            groups = [tuple(j - 1 for j in g) for g in ev["groups"]]
            claims = [
                group_response(ztilde, combining_vector(ctx, g)) for g in groups
            ]
            if claims != ev["values"]:
                raise TranscriptReplayError("recorded group decode does not reproduce")
        elif kind == "agreement":
            out = detect_contradiction(claims)
            if not isinstance(out, Agreement) or list(out.value) != ev["value"]:
                raise TranscriptReplayError("recorded agreement does not reproduce")
            gradient = list(out.value)
        elif kind == "conflict":
            out = detect_contradiction(claims)
            if isinstance(out, Agreement):
                raise TranscriptReplayError("recorded conflict does not reproduce")
            if (out.first + 1, out.second + 1, out.coordinate + 1) != (
                ev["first"], ev["second"], ev["coordinate"],
            ):
                raise TranscriptReplayError("conflict pair or coordinate mismatch")
            g1, g2 = groups[out.first], groups[out.second]
            union = sorted(set(g1) | set(g2))
            b1 = combining_vector(ctx, g1)
            b2 = combining_vector(ctx, g2)
            coord = out.coordinate
            commit = {j: ztilde.at(coord, j) for j in union}
            label1 = claims[out.first][coord]
            label2 = claims[out.second][coord]
            node = tree.root
            while not node.is_leaf:
                expect("query")
                rs = expect("response_set")
                resp = {
                    j - 1: v % q for j, v in zip(rs["workers"], rs["values"])
                }
                lc1 = sum(resp[j] * b1[j] for j in g1) % q
                lc2 = sum(resp[j] * b2[j] for j in g2) % q
                rc1 = (label1 - lc1) % q
                rc2 = (label2 - lc2) % q
                level = expect("match_level")
                if lc1 != lc2:
                    if level["descend"] != "left":
                        raise TranscriptReplayError("descent direction mismatch")
                    commit = {j: resp[j] for j in union}
                    label1, label2 = lc1, lc2
                    node = node.left
                else:
                    if level["descend"] != "right":
                        raise TranscriptReplayError("descent direction mismatch")
                    commit = {j: (commit[j] - resp[j]) % q for j in union}
                    label1, label2 = rc1, rc2
                    node = node.right
            lc_ev = expect("local_compute")
            if lc_ev["sample"] != node.lo + 1:
                raise TranscriptReplayError("locally computed sample mismatch")
            truth = lc_ev["value"][coord] % q
            malicious = [
                j for j in union if commit[j] != truth * enc.w.at(node.lo, j) % q
            ]
            elim = expect("elimination")
            if [j + 1 for j in malicious] != elim["workers"]:
                raise TranscriptReplayError("recorded eliminations do not reproduce")
            eliminated.extend(malicious)
        elif kind == "ecc_decode":
            received = ResponseMatrix(
                ztilde, tuple([1] * a_mat.p), tuple([True] * ctx.n)
            )
            gradient = ecc_decode(ctx, received, eliminated)
            if gradient != ev["gradient"]:
                raise TranscriptReplayError("recorded final decode does not reproduce")
        elif kind == "final":
            if gradient is None or gradient != ev["gradient"]:
                raise TranscriptReplayError("final gradient does not reproduce")
            return gradient
        else:
            raise TranscriptReplayError(f"unexpected event {kind!r}")
    raise TranscriptReplayError("transcript ended without a final event")
