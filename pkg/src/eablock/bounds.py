"""Monte Carlo and analytic checks of the half-normal, Gaussian CDF and aggregate-influence tail bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .instance import beta_critical
from .streams import generator


@dataclass
class TailCheckReport:
    """One-sided check: ``empirical <= bound + 3 * stderr``."""

    name: str
    parameters: dict
    empirical: float
    bound: float
    stderr: float
    trials: int
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = self.empirical <= self.bound + 3.0 * self.stderr
        return bool(ok and all(v for k, v in self.extra.items() if k.endswith("_ok")))

    def as_dict(self) -> dict:
        out = {"name": self.name, **self.parameters, "empirical": self.empirical, "bound": self.bound,
               "stderr": self.stderr, "trials": self.trials, "passed": self.passed}
        out.update(self.extra)
        return out


def _chunks(trials: int, chunk: int):
    done = 0
    i = 0
    while done < trials:
        size = min(chunk, trials - done)
        yield i, size
        done += size
        i += 1


def half_normal_mean(N: int, sigma: float) -> float:
    return N * sigma * math.sqrt(2.0 / math.pi)


def half_normal_tail_bound(N: int, delta: float) -> float:
    return math.exp(-N * delta * delta / math.pi)


def half_normal_tail_check(N: int, sigma: float, delta: float, trials: int, seed: int, chunk: int = 1 << 16) -> TailCheckReport:
    """Sum of ``N`` absolute Gaussians: exceedance of ``(1+delta)`` times its mean, and the mean itself."""
    if N < 1 or sigma <= 0 or delta < 0:
        raise ValueError("need N >= 1, sigma > 0, delta >= 0")
    if trials < 10_000:
        raise ValueError("use at least 10^4 trials")
    mean = half_normal_mean(N, sigma)
    level = (1.0 + delta) * mean
    hits = 0
    s1 = 0.0
    s2 = 0.0
    rows = max(1, chunk // N)
    for i, size in _chunks(trials, rows):
        rng = generator(seed, "half-normal", i)
        x = np.abs(rng.standard_normal((size, N))).sum(axis=1) * sigma
        hits += int(np.count_nonzero(x > level))
        s1 += float(x.sum())
        s2 += float((x * x).sum())
    freq = hits / trials
    m = s1 / trials
    var = max(s2 / trials - m * m, 0.0)
    mean_se = math.sqrt(var / trials)
    return TailCheckReport(
        "half_normal_tail",
        {"N": N, "sigma": sigma, "delta": delta},
        freq,
        half_normal_tail_bound(N, delta),
        math.sqrt(freq * (1.0 - freq) / trials),
        trials,
        {
            "mean_empirical": m,
            "mean_theory": mean,
            "mean_stderr": mean_se,
            "mean_ok": abs(m - mean) <= 3.0 * mean_se,
        },
    )


@dataclass
class PhiReport:
    points: int
    min_margin: float
    argmin: float
    passed: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def phi_bound_check(grid, tol: float = 1e-12) -> PhiReport:
    """``Phi(x) <= 1/2 + x / sqrt(2 pi)`` pointwise for ``x >= 0``."""
    x = np.asarray(grid, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty grid")
    if np.any(x < 0):
        raise ValueError("grid points must be non-negative")
    margin = 0.5 + x / math.sqrt(2.0 * math.pi) - ndtr(x)
    i = int(np.argmin(margin))
    return PhiReport(int(x.size), float(margin[i]), float(x[i]), bool(margin[i] >= -tol))


def aggregate_tail_bound(d: float, epsilon: float) -> float:
    return math.exp(-(epsilon**4) * d / (8.0 * math.pi))


def aggregate_tail_check(
    d: float,
    epsilon: float,
    trials: int,
    seed: int,
    n: int = 10_000,
    beta: float | None = None,
    chunk: int = 1 << 15,
) -> TailCheckReport:
    """Exceedance of ``mean + epsilon/2`` by the aggregate influence at one vertex of ``G(n, d/n)``.

    The degree is Binomial(n, d/n) and the couplings standard Gaussian; the
    mean is estimated from the same draws.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if beta is None:
        beta = (1.0 - epsilon) * beta_critical(d)
    samples = np.empty(trials)
    pos = 0
    for i, size in _chunks(trials, chunk):
        rng = generator(seed, "aggregate-tail", i)
        deg = rng.binomial(n, d / n, size=size)
        J = rng.standard_normal(int(deg.sum()))
        gam = np.abs(np.tanh(0.5 * beta * J))
        owner = np.repeat(np.arange(size), deg)
        samples[pos : pos + size] = np.bincount(owner, weights=gam, minlength=size)
        pos += size
    mean = float(samples.mean())
    mean_se = float(samples.std(ddof=1) / math.sqrt(trials))
    freq = float(np.count_nonzero(samples >= mean + epsilon / 2.0) / trials)
    return TailCheckReport(
        "aggregate_tail",
        {"d": d, "epsilon": epsilon, "beta": beta, "n": n},
        freq,
        aggregate_tail_bound(d, epsilon),
        math.sqrt(freq * (1.0 - freq) / trials),
        trials,
        {
            "mean_aggregate": mean,
            "mean_stderr": mean_se,
            "mean_limit": 1.0 - epsilon,
            "mean_ok": mean <= 1.0 - epsilon + 3.0 * mean_se,
        },
    )
