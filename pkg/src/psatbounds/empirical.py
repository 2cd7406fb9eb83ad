"""Random k-CNF sampling, exhaustive evaluation and Monte Carlo checks.

Every stochastic routine takes a master seed.  Sample ``i`` draws from
``numpy.random.Generator(PCG64(SeedSequence([seed, i])))`` so results do not
depend on how samples are spread over threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np
from scipy.special import logsumexp

from psatbounds import _kernels
from psatbounds.analytic import ProblemParams
from psatbounds.errors import DomainError
from psatbounds.moments import WeightPair

MODELS = ("iid", "proper", "no_replacement")
RNG_NAME = "numpy PCG64 seeded by SeedSequence([seed, sample_index])"
THREADS_ENV = "PSAT_THREADS"
MAX_EXHAUSTIVE_N = 25


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


@dataclass
class Formula:
    """m clauses of k literals over variables 1..n.

    ``clauses[c, j]`` is a signed 1-based variable index, negative for a
    negated literal.
    """

    n: int
    k: int
    clauses: np.ndarray
    model: str = "iid"

    def __post_init__(self):
        self.clauses = np.asarray(self.clauses, dtype=np.int64).reshape(-1, self.k)
        if self.clauses.size and (np.any(self.clauses == 0) or np.abs(self.clauses).max() > self.n):
            raise DomainError("literal indices must lie in [1, n]")

    @property
    def m(self) -> int:
        return self.clauses.shape[0]

    @property
    def var(self) -> np.ndarray:
        return np.abs(self.clauses) - 1

    @property
    def sign(self) -> np.ndarray:
        return (self.clauses > 0).astype(np.int8)

    def improper_count(self) -> int:
        """Clauses with a repeated or complementary variable."""
        if self.m == 0:
            return 0
        v = np.sort(self.var, axis=1)
        return int(np.any(v[:, 1:] == v[:, :-1], axis=1).sum())


def sample_formula(n: int, m: int, k: int, model: str = "iid",
                   rng: np.random.Generator | None = None) -> Formula:
    if model not in MODELS:
        raise DomainError(f"model must be one of {MODELS}")
    if k < 1 or n < 1 or m < 0:
        raise DomainError("need n >= 1, k >= 1, m >= 0")
    rng = rng if rng is not None else np.random.default_rng()
    if model == "iid":
        var = rng.integers(1, n + 1, size=(m, k))
        neg = rng.integers(0, 2, size=(m, k)).astype(bool)
        return Formula(n, k, np.where(neg, -var, var), model)
    if n < k:
        raise DomainError(f"{model} model needs n >= k (got n={n}, k={k})")
    if model == "proper":
        var = np.argsort(rng.random((m, n)), axis=1)[:, :k] + 1
        neg = rng.integers(0, 2, size=(m, k)).astype(bool)
        return Formula(n, k, np.where(neg, -var, var), model)
    total = math.comb(n, k) * 2**k
    if m > total:
        raise DomainError(f"only {total} distinct proper clauses exist")
    seen = set()
    rows = []
    while len(rows) < m:
        var = rng.choice(n, size=k, replace=False) + 1
        neg = rng.integers(0, 2, size=k).astype(bool)
        lits = np.where(neg, -var, var)
        key = tuple(sorted(lits.tolist()))
        if key in seen:
            continue
        seen.add(key)
        rows.append(lits)
    return Formula(n, k, np.array(rows, dtype=np.int64).reshape(m, k), model)


def planted_formula(n: int, m: int, k: int, rng: np.random.Generator):
    """Proper clauses kept only if satisfied by a hidden random assignment."""
    hidden = rng.integers(0, 2, size=n).astype(bool)
    rows = []
    while len(rows) < m:
        var = rng.choice(n, size=k, replace=False)
        neg = rng.integers(0, 2, size=k).astype(bool)
        if np.any(hidden[var] != neg):
            rows.append(np.where(neg, -(var + 1), var + 1))
    return Formula(n, k, np.array(rows).reshape(m, k), "proper"), hidden


def evaluate_assignment(formula: Formula, bits) -> tuple[int, int, int]:
    """Return ``(H, U, satisfied)`` for a Boolean assignment of length n."""
    bits = np.asarray(bits, dtype=bool)
    if bits.shape != (formula.n,):
        raise DomainError("assignment length must equal n")
    if formula.m == 0:
        return 0, 0, 0
    true_lit = bits[formula.var] == formula.sign.astype(bool)
    sat_occ = int(true_lit.sum())
    h = 2 * sat_occ - formula.k * formula.m
    u = int((~true_lit.any(axis=1)).sum())
    return h, u, formula.m - u


def _exhaustive_guard(formula: Formula):
    if formula.n > MAX_EXHAUSTIVE_N:
        raise DomainError(f"exhaustive evaluation limited to n <= {MAX_EXHAUSTIVE_N}")


def profile(formula: Formula) -> np.ndarray:
    """Histogram of assignments by (H, U); row i is H = 2i - k m."""
    _exhaustive_guard(formula)
    return _kernels.profile_histogram(formula.var, formula.sign, formula.n)


def log_weighted_sum_X(formula: Formula, w: WeightPair, u0: float) -> float:
    """ln of X = sum over all assignments of gamma^H eta^(U - u0 m)."""
    hist = profile(formula)
    km, m = formula.k * formula.m, formula.m
    rows, cols = np.nonzero(hist)
    h = 2.0 * rows - km
    log_w = h * math.log(w.gamma)
    if w.eta == 0.0:
        if u0 > 0:
            raise DomainError("eta = 0 requires u0 = 0")
        keep = cols == 0  # 0^0 = 1, 0^U = 0 otherwise
        rows, cols, log_w = rows[keep], cols[keep], log_w[keep]
        if rows.size == 0:
            return -math.inf
    else:
        log_w = log_w + (cols - u0 * m) * math.log(w.eta)
    return float(logsumexp(log_w + np.log(hist[rows, cols])))


def weighted_sum_X(formula: Formula, w: WeightPair, u0: float) -> float:
    return math.exp(log_weighted_sum_X(formula, w, u0))


def max_sat_exact(formula: Formula) -> tuple[np.ndarray, int]:
    """Exact maximum number of satisfiable clauses by branch and bound."""
    _exhaustive_guard(formula)
    if formula.m == 0:
        return np.zeros(formula.n, dtype=bool), 0
    best, bits = min_unsat(formula)
    return bits, formula.m - best


def min_unsat(formula: Formula, below: int | None = None) -> tuple[int, np.ndarray]:
    """Minimum number of unsatisfied clauses.

    With ``below`` set, the search only looks for assignments leaving fewer
    than ``below`` clauses unsatisfied and returns ``below`` if none exists.
    """
    var, sign = formula.var, formula.sign
    hint, hint_bits = _kernels.walksat(var, sign, formula.n, 20 * formula.n + 200, 0.3,
                                       10**9, 12345)
    bound = formula.m + 1 if below is None else below
    if hint < bound:
        bound = hint + 1
    best, bits = _kernels.min_unsat_bnb(var, sign, formula.n, bound)
    if best == bound and hint < bound:
        best, bits = hint, hint_bits
    return int(best), bits.astype(bool)


def max_sat_local(formula: Formula, steps: int, rng: np.random.Generator,
                  noise: float = 0.3, restart: int | None = None) -> tuple[np.ndarray, int]:
    """Noisy greedy local search (WalkSAT style); a lower bound on the optimum."""
    if steps < 1:
        raise DomainError("steps >= 1 required")
    if formula.m == 0:
        return np.zeros(formula.n, dtype=bool), 0
    restart = restart or 100 * formula.n
    seed = int(rng.integers(0, 2**62))
    best, bits = _kernels.walksat(formula.var, formula.sign, formula.n, steps, noise,
                                  restart, seed)
    return bits.astype(bool), formula.m - int(best)


@dataclass
class ExperimentStats:
    kind: str
    samples: int
    seed: int
    values: list
    mean: float
    stderr: float
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    rng: str = RNG_NAME

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "samples": self.samples, "seed": self.seed, "rng": self.rng,
            "params": self.params, "mean": self.mean, "stderr": self.stderr,
            **self.extra, "values": self.values,
        }


def _mean_stderr(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()) if x.size else math.nan, math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _map_samples(fn, samples: int, threads: int | None = None, chunk: int = 64) -> list:
    """Apply ``fn(index)`` to every sample index; output order is the index order."""
    threads = threads or thread_count()
    blocks = [range(i, min(i + chunk, samples)) for i in range(0, samples, chunk)]

    def run(block):
        return [fn(i) for i in block]

    if threads <= 1 or len(blocks) <= 1:
        out = [run(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(run, blocks))
    return [x for part in out for x in part]


def estimate_moments(n: int, m: int, k: int, p: float, w: WeightPair, samples: int,
                     seed: int, threads: int | None = None) -> dict:
    """Monte Carlo mean of X and X^2 over random formulas, with standard errors."""
    if n > 20:
        raise DomainError("estimate_moments is limited to n <= 20")
    u0 = ProblemParams(k, p).u0

    def one(i):
        f = sample_formula(n, m, k, "iid", sample_rng(seed, i))
        return log_weighted_sum_X(f, w, u0)

    logx = np.array(_map_samples(one, samples, threads))
    x = np.exp(logx)
    mx, sx = _mean_stderr(x)
    mx2, sx2 = _mean_stderr(x * x)
    return {"mean_x": mx, "stderr_x": sx, "mean_x2": mx2, "stderr_x2": sx2,
            "samples": samples, "seed": seed, "rng": RNG_NAME}


def unsat_threshold(u0: float, m: int) -> int:
    """Largest number of unsatisfied clauses still counted as p-satisfying."""
    return int(math.floor(u0 * m + 1e-9))


def psat_frequency(n: int, r: float, params: ProblemParams, samples: int,
                   solver: str = "exact", seed: int = 0, steps: int | None = None,
                   threads: int | None = None) -> ExperimentStats:
    """Fraction of random formulas F(n, round(r n)) that are p-satisfiable.

    With the local solver this is a lower bound on the true frequency.
    """
    m = int(round(r * n))
    k = params.k
    thr = unsat_threshold(params.u0, m)
    if solver not in ("exact", "local"):
        raise DomainError("solver must be 'exact' or 'local'")
    if solver == "exact" and n > MAX_EXHAUSTIVE_N:
        raise DomainError(f"exact solver limited to n <= {MAX_EXHAUSTIVE_N}")
    steps = steps or 1000 * n

    def one(i):
        if m == 0:
            return 1
        rng = sample_rng(seed, i)
        f = sample_formula(n, m, k, "iid", rng)
        if solver == "exact":
            best, _ = min_unsat(f, below=thr + 1)
            return int(best <= thr)
        _, s = max_sat_local(f, steps, rng)
        return int(m - s <= thr)

    hits = np.array(_map_samples(one, samples, threads), dtype=float)
    mean, se = _mean_stderr(hits)
    return ExperimentStats("psat", samples, seed, hits.astype(int).tolist(), mean, se,
                           params={"n": n, "r": r, "m": m, "k": k, "p": params.p,
                                   "solver": solver, "unsat_threshold": thr},
                           extra={"frequency": mean})


def max_sat_values(n: int, m: int, k: int, samples: int, seed: int,
                   threads: int | None = None) -> np.ndarray:
    def one(i):
        f = sample_formula(n, m, k, "iid", sample_rng(seed, i))
        return max_sat_exact(f)[1]

    return np.array(_map_samples(one, samples, threads), dtype=np.int64)


def concentration_check(n: int, m: int, k: int, samples: int, t_values: Iterable[float],
                        seed: int = 0, threads: int | None = None) -> ExperimentStats:
    """Empirical tails of the MAX-SAT value against 2 exp(-2 t^2 / m)."""
    s = max_sat_values(n, m, k, samples, seed, threads)
    mean, se = _mean_stderr(s)
    rows = []
    for t in t_values:
        tail = float(np.mean(np.abs(s - mean) > t))
        bound = 2.0 * math.exp(-2.0 * t * t / m) if m else 2.0
        sigma = math.sqrt(max(tail * (1 - tail), 1.0 / samples) / samples)
        rows.append({"t": float(t), "tail": tail, "bound": bound,
                     "violation": tail > bound + 4.0 * sigma})
    return ExperimentStats("concentration", samples, seed, s.tolist(), mean, se,
                           params={"n": n, "m": m, "k": k}, extra={"tails": rows})


def write_dimacs(formula: Formula, out: TextIO, comment: str | None = None) -> None:
    if comment:
        for line in comment.splitlines():
            out.write(f"c {line}\n")
    out.write(f"p cnf {formula.n} {formula.m}\n")
    for row in formula.clauses:
        out.write(" ".join(str(int(x)) for x in row) + " 0\n")


def read_dimacs(text: str) -> Formula:
    n = None
    clauses, cur = [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            _, fmt, nv, _nc = line.split()
            if fmt != "cnf":
                raise ValueError("not a cnf file")
            n = int(nv)
            continue
        for tok in line.split():
            x = int(tok)
            if x == 0:
                clauses.append(cur)
                cur = []
            else:
                cur.append(x)
    if n is None:
        raise ValueError("missing problem line")
    widths = {len(c) for c in clauses}
    if len(widths) > 1:
        raise ValueError("clauses of mixed width")
    k = widths.pop() if widths else 1
    return Formula(n, k, np.array(clauses, dtype=np.int64).reshape(len(clauses), k))
