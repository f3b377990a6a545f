"""Monte Carlo harness: estimators with standard errors, error-vs-steps tables
and path dumps.

Randomness is counter based. Paths are cut into blocks of ``BLOCK`` and each
(seed, block, slot) triple keys its own Philox stream, so path j at step i
always sees the same numbers whatever the number of worker threads. Blocks
are evaluated in parallel and stitched back in block order before any
reduction, which makes every estimate bitwise reproducible.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .scheme import SCHEMES, Discretization, Draws, run

BLOCK = 8192
SLOT_IG_NORMAL, SLOT_IG_UNIFORM, SLOT_PRICE_NORMAL = 0, 1, 2
DEFAULT_PATHS = 200_000
MAX_DUMP_PATHS = 100


@dataclass(frozen=True)
class LaplaceU:
    w: float = -1.0

    def __post_init__(self):
        if not self.w <= 0:
            raise ConfigError("experiment.w", f"must be <= 0, got {self.w}")

    needs_price = False

    def columns(self, batch):
        return np.exp(self.w * batch.U_total)[:, None]


@dataclass(frozen=True)
class Calls:
    """Call payoffs (S_T - K)^+ for one or more strikes; ``None`` means ATM."""

    strikes: tuple = (None,)

    needs_price = True

    def resolved(self, S0):
        return tuple(S0 if k is None else float(k) for k in self.strikes)

    def columns(self, batch, S0=1.0):
        ks = np.asarray(self.resolved(S0))
        return np.maximum(batch.S_T[:, None] - ks[None, :], 0.0)


def ATMCall():
    return Calls()


@dataclass(frozen=True)
class PathSample:
    needs_price = True


@dataclass
class ExperimentConfig:
    params: object
    scheme: str = "ivi"
    steps_list: tuple = (100,)
    paths: int = DEFAULT_PATHS
    seed: int = 0
    target: object = field(default_factory=LaplaceU)
    antithetic: bool = False
    resolvent: bool = False
    threads: int | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError("scheme", f"must be one of {SCHEMES}, got {self.scheme!r}")
        self.steps_list = tuple(int(n) for n in np.atleast_1d(self.steps_list))
        if not self.steps_list or min(self.steps_list) < 1:
            raise ConfigError("experiment.steps", "need at least one step count, all >= 1")
        if any(b <= a for a, b in zip(self.steps_list, self.steps_list[1:])):
            raise ConfigError("experiment.steps", "must be strictly increasing")
        if int(self.paths) < 1:
            raise ConfigError("experiment.paths", f"must be >= 1, got {self.paths}")
        if self.antithetic and self.paths % 2:
            raise ConfigError("experiment.paths", "antithetic sampling needs an even path count")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("rng.seed", f"must be a 64-bit unsigned integer, got {self.seed}")
        if self.threads is not None and int(self.threads) < 1:
            raise ConfigError("threads", f"must be >= 1, got {self.threads}")


@dataclass
class MCEstimate:
    value: float
    std_error: float
    paths: int
    steps: int
    seed: int
    wall_time: float
    degenerate: bool = False


@dataclass
class ErrorRow:
    scheme: str
    steps: int
    value: float
    error: float
    std_error: float
    reference: float


def _stream(seed, block, slot):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(block), int(slot)))
    return np.random.Generator(np.random.Philox(ss))


def block_draws(seed, block, paths, n, with_price):
    """Draws for ``paths`` paths of block ``block``, shaped (paths, n)."""
    xi = _stream(seed, block, SLOT_IG_NORMAL).standard_normal((paths, n))
    eta = _stream(seed, block, SLOT_IG_UNIFORM).random((paths, n))
    normal = _stream(seed, block, SLOT_PRICE_NORMAL).standard_normal((paths, n)) if with_price else None
    return Draws(xi, eta, normal)


def _blocks(paths):
    full, rest = divmod(paths, BLOCK)
    return [BLOCK] * full + ([rest] if rest else [])


def _default_threads():
    return os.cpu_count() or 1


def sample_functionals(disc, target, scheme, paths, seed, S0=1.0, antithetic=False, threads=None):
    """Per-sample functional values, shape (samples, q).

    With antithetic sampling a sample is the average over a mirrored pair, so
    there are paths // 2 samples.
    """
    with_price = target.needs_price

    def evaluate(batch):
        if isinstance(target, Calls):
            return target.columns(batch, S0)
        return target.columns(batch)

    def work(args):
        block, size = args
        base = size // 2 if antithetic else size
        draws = block_draws(seed, block, base, disc.n, with_price)
        vals = evaluate(run(disc, draws, scheme, with_price))
        if antithetic:
            vals = 0.5 * (vals + evaluate(run(disc, draws.antithetic(), scheme, with_price)))
        return vals

    jobs = list(enumerate(_blocks(paths)))
    threads = min(threads or _default_threads(), len(jobs))
    if threads <= 1:
        parts = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, jobs))
    return np.concatenate(parts, axis=0)


def _summarize(values, paths, steps, seed, wall):
    samples = values.shape[0]
    means = values.mean(axis=0)
    if samples > 1:
        ses = values.std(axis=0, ddof=1) / math.sqrt(samples)
    else:
        ses = np.zeros_like(means)
    return [
        MCEstimate(float(m), float(s), paths, steps, seed, wall, degenerate=paths == 1)
        for m, s in zip(means, ses)
    ]


def estimate_many(params, target, n, paths, seed, scheme="ivi", antithetic=False, resolvent=False, threads=None):
    start = time.perf_counter()
    disc = Discretization.build(params, n, resolvent=resolvent)
    values = sample_functionals(disc, target, scheme, int(paths), seed, params.S0, antithetic, threads)
    return _summarize(values, int(paths), n, seed, time.perf_counter() - start)


def estimate(config, steps=None):
    """MCEstimate of the configured target at ``steps`` (default: last of steps_list)."""
    n = config.steps_list[-1] if steps is None else int(steps)
    target = config.target
    if isinstance(target, PathSample):
        raise DomainError("PathSample has no scalar estimate, use path_dump")
    if isinstance(target, Calls) and len(target.strikes) != 1:
        raise DomainError("estimate takes a single strike, use estimate_calls")
    return estimate_many(
        config.params, target, n, config.paths, config.seed, config.scheme,
        config.antithetic, config.resolvent, config.threads,
    )[0]


def estimate_calls(params, strikes, n, paths, seed, scheme="ivi", antithetic=False, resolvent=False, threads=None):
    """One MCEstimate per strike, all from the same paths."""
    return estimate_many(params, Calls(tuple(float(k) for k in strikes)), n, paths, seed, scheme, antithetic, resolvent, threads)


def reference_value(params, target):
    if isinstance(target, LaplaceU):
        from .riccati import laplace_U

        return laplace_U(params, target.w)
    if isinstance(target, Calls):
        from .pricing import call_price_fourier

        if len(target.strikes) != 1:
            raise DomainError("reference_value takes a single strike")
        return float(call_price_fourier(params, target.resolved(params.S0)[0]))
    raise DomainError(f"no reference for target {type(target).__name__}")


def error_table(config, schemes=None, reference=None):
    """One row per (scheme, n); schemes default to both, iVi first."""
    schemes = SCHEMES if schemes is None else tuple(schemes)
    for s in schemes:
        if s not in SCHEMES:
            raise ConfigError("scheme", f"unknown scheme {s!r}")
    if reference is None:
        reference = reference_value(config.params, config.target)
    rows = []
    for s in schemes:
        for n in config.steps_list:
            est = estimate_many(
                config.params, config.target, n, config.paths, config.seed, s,
                config.antithetic, config.resolvent, config.threads,
            )[0]
            rows.append(ErrorRow(s, n, est.value, abs(est.value - reference), est.std_error, reference))
    return rows


PATH_COLUMNS = ("path", "i", "t_i", "U", "Z", "V", "logS")


def path_dump(config, n_paths_small, steps=None):
    """Rows (path, i, t_i, U, Z, V, logS) for i = 1..n.

    U, Z and logS are the cumulative values at t_i and V = U_{i-1,i} / h is
    the discrete derivative of U over the step ending at t_i.
    """
    if not 1 <= n_paths_small <= MAX_DUMP_PATHS:
        raise ConfigError("experiment.paths", f"path dumps take 1 to {MAX_DUMP_PATHS} paths, got {n_paths_small}")
    n = config.steps_list[-1] if steps is None else int(steps)
    disc = Discretization.build(config.params, n, resolvent=config.resolvent)
    draws = block_draws(config.seed, 0, n_paths_small, n, True)
    batch = run(disc, draws, config.scheme, with_price=True)
    h = disc.T / n
    U = np.cumsum(batch.U_inc, axis=1)
    Z = np.cumsum(batch.Z_inc, axis=1)
    V = batch.U_inc / h
    logS = batch.logS_path
    rows = []
    for p in range(n_paths_small):
        for i in range(n):
            rows.append((p, i + 1, (i + 1) * h, U[p, i], Z[p, i], V[p, i], logS[p, i]))
    return rows


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(x) for x in row])
    return path
