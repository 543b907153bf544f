"""Independent cross-checks for the click kernel.

``simulate_clicks`` samples the physical process photon by photon.
``exact_dp_oracle`` conditions the multinomial photon routing one detector
at a time; every quantity it touches is a probability, so it has no
alternating sums to go wrong.

Random numbers come from numpy's PCG64.  Samples are cut into fixed-size
shards and shard ``i`` draws from ``SeedSequence(seed, spawn_key=(i,))``, so
the counts only depend on ``(seed, samples)`` and not on how many workers
ran the shards.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from .errors import BudgetExceededError, DomainError, ValidationError
from .kernel import ClickDistribution, DetectorConfig, total_variation
from .states import PhotonNumberDistribution

__all__ = [
    "SHARD_SIZE",
    "SimOptions",
    "SimResult",
    "simulate_clicks",
    "exact_dp_oracle",
    "compare_distributions",
]

SHARD_SIZE = 1 << 16
DEFAULT_WORK_BUDGET = 200_000_000
_CHUNK_CELLS = 1 << 22


@dataclass(frozen=True)
class SimOptions:
    samples: int
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if int(self.samples) != self.samples or self.samples < 1:
            raise ValidationError(f"samples must be a positive integer, got {self.samples!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")


@dataclass(frozen=True)
class SimResult:
    counts: NDArray[np.int64]
    samples: int
    seed: int

    def __post_init__(self) -> None:
        if int(self.counts.sum()) != self.samples:
            raise ValidationError("histogram does not add up to the sample count")

    @property
    def empirical(self) -> ClickDistribution:
        return ClickDistribution(self.counts / self.samples, self.counts.size - 1)


def _run_shard(
    rng: np.random.Generator,
    size: int,
    photon_p: NDArray[np.float64],
    weights: NDArray[np.float64] | None,
    cfg: DetectorConfig,
) -> NDArray[np.int64]:
    big_n = cfg.n_detectors
    counts = np.zeros(big_n + 1, dtype=np.int64)
    p_dark = -math.expm1(-cfg.nu)
    chunk = max(1, _CHUNK_CELLS // big_n)
    for start in range(0, size, chunk):
        m = min(chunk, size - start)
        n_photons = rng.choice(photon_p.size, size=m, p=photon_p)
        # keep each photon with probability eta before routing it
        kept = rng.binomial(n_photons, cfg.eta) if cfg.eta < 1 else n_photons
        owner = np.repeat(np.arange(m), kept)
        if weights is None:
            where = rng.integers(0, big_n, size=owner.size)
        else:
            where = rng.choice(big_n, size=owner.size, p=weights)
        fired = np.zeros((m, big_n), dtype=bool)
        fired[owner, where] = True
        if p_dark > 0:
            fired |= rng.random((m, big_n)) < p_dark
        counts += np.bincount(fired.sum(axis=1), minlength=big_n + 1)
    return counts


def simulate_clicks(
    pnd: PhotonNumberDistribution, cfg: DetectorConfig, opts: SimOptions
) -> SimResult:
    """Monte Carlo histogram of total clicks.

    Per sample: draw n from ``pnd``, keep each photon with probability eta,
    send every kept photon to detector i with probability ``weights[i]``,
    add an independent dark click with probability 1 - exp(-nu) per
    detector, and count detectors that fired.
    """
    photon_p = pnd.probs / pnd.probs.sum()
    weights = None if cfg.is_uniform else cfg.weight_array()
    n_shards = -(-opts.samples // SHARD_SIZE)
    sizes = [min(SHARD_SIZE, opts.samples - i * SHARD_SIZE) for i in range(n_shards)]

    def shard(i: int) -> NDArray[np.int64]:
        ss = np.random.SeedSequence(opts.seed, spawn_key=(i,))
        return _run_shard(np.random.Generator(np.random.PCG64(ss)), sizes[i], photon_p, weights, cfg)

    if opts.workers > 1 and n_shards > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            parts = list(pool.map(shard, range(n_shards)))
    else:
        parts = [shard(i) for i in range(n_shards)]
    return SimResult(np.sum(parts, axis=0), opts.samples, opts.seed)


def exact_dp_oracle(
    pnd: PhotonNumberDistribution,
    cfg: DetectorConfig,
    work_budget: int = DEFAULT_WORK_BUDGET,
) -> ClickDistribution:
    """Exact click distribution by sequential multinomial conditioning.

    With r photons still unrouted and R detectors left, the next detector
    receives m ~ Binomial(r, 1/R) of them and fires with probability
    1 - (1 - eta)^m exp(-nu).  The table state is (photons left, clicks).
    """
    if not cfg.is_uniform:
        raise DomainError("exact_dp_oracle supports uniform splitting only")
    big_n, n_max = cfg.n_detectors, pnd.n_max
    work = big_n * (n_max + 1) ** 2 * (big_n + 1)
    if work > work_budget:
        raise BudgetExceededError(
            f"DP oracle needs ~{work} operations, budget is {work_budget}", required=work
        )
    no_dark = math.exp(-cfg.nu)
    m = np.arange(n_max + 1)
    # fire[m]: probability that a detector hit by m photons clicks
    fire = 1.0 - (1.0 - cfg.eta) ** m * no_dark
    if cfg.eta == 1.0:
        fire[0] = 1.0 - no_dark
        fire[1:] = 1.0
    # table[r, c]
    table = np.zeros((n_max + 1, big_n + 1))
    table[:, 0] = pnd.probs
    for i in range(big_n):
        left = big_n - i
        new = np.zeros_like(table)
        for r in range(n_max + 1):
            row = table[r]
            if not row.any():
                continue
            split = stats.binom.pmf(m[: r + 1], r, 1.0 / left)
            for mm in range(r + 1):
                w = split[mm]
                if w == 0.0:
                    continue
                f = fire[mm]
                new[r - mm, 1:] += w * f * row[:-1]
                new[r - mm, :] += w * (1.0 - f) * row
        table = new
    # every photon has been routed once the last detector is processed
    probs = table[0]
    return ClickDistribution(probs, big_n)


def compare_distributions(
    a: ClickDistribution,
    b: ClickDistribution,
    samples: int | None = None,
) -> tuple[float, float]:
    """Total-variation distance and a Pearson chi-square statistic.

    ``a`` is treated as observed and ``b`` as expected.  With ``samples``
    given, cells whose expected count is below 5 are pooled and the
    statistic is the usual goodness-of-fit sum; without it the statistic
    is the chi-square divergence over cells with positive expectation.
    """
    if a.n_detectors != b.n_detectors:
        raise DomainError(f"cannot compare N={a.n_detectors} with N={b.n_detectors}")
    tv = total_variation(a, b)
    pa, pb = a.probs, b.probs
    if samples is None:
        pos = pb > 0
        if np.any(pa[~pos] > 0):
            return tv, math.inf
        return tv, math.fsum((pa[pos] - pb[pos]) ** 2 / pb[pos])
    obs = pa * samples
    exp = pb * samples
    small = exp < 5
    o = list(obs[~small])
    e = list(exp[~small])
    if small.any():
        o.append(obs[small].sum())
        e.append(exp[small].sum())
    chi2 = 0.0
    for oi, ei in zip(o, e):
        if ei > 0:
            chi2 += (oi - ei) ** 2 / ei
        elif oi > 0:
            return tv, math.inf
    return tv, chi2
