"""Click-counting statistics of N on/off detectors behind a uniform splitter.

Two evaluation routes are provided for the Fock-diagonal POVM
``c[k|n] = P(k clicks | n photons)``:

* ``fock_click_prob`` evaluates the closed inclusion-exclusion sum

      C(N,k) sum_j C(k,j) (-1)^j exp(-(N-k+j) nu) (1 - (N-k+j) eta / N)^n

  term by term in log-domain, adds the terms with an exactly rounded
  summation and escalates to multiprecision arithmetic whenever the
  estimated cancellation error would exceed ``FLOAT_ABS_ERR``.

* ``povm_fock_matrix`` and ``click_distribution`` propagate the occupancy
  Markov chain instead: start from Binomial(N, 1 - e^-nu) dark clicks and let
  every photon switch an idle detector on with probability eta (N - k) / N.
  Only non-negative numbers are ever added, so no cancellation occurs.

Mandel's photo-counting statistics, the Q parameter and the N -> infinity
comparison live here as well.
"""
from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats

from .errors import (
    BudgetExceededError,
    DomainError,
    InsufficientSupportError,
    KernelOverflowError,
    StabilityError,
    ValidationError,
)
from .states import PhotonNumberDistribution

__all__ = [
    "NEG_CLAMP",
    "STABILITY_LIMIT",
    "DetectorConfig",
    "Diagnostics",
    "ClickDistribution",
    "PovmDiagonal",
    "fock_click_prob",
    "fock_click_prob_info",
    "exact_ideal_click_prob",
    "stirling2",
    "log_stirling2_table",
    "ideal_povm_stirling",
    "povm_fock_matrix",
    "click_distribution",
    "coherent_click_distribution",
    "coherent_click_nonuniform",
    "mandel_distribution",
    "mandel_q",
    "coherent_click_q_closed",
    "moments",
    "total_variation",
    "limit_compare",
]

NEG_CLAMP = 1e-12
STABILITY_LIMIT = 1e-9
WEIGHT_TOL = 1e-12
MASS_TOL = 1e-9
FLOAT_ABS_ERR = 1e-14
MAX_DPS = 4000
DEFAULT_CELL_BUDGET = 50_000_000

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class DetectorConfig:
    """N on/off detectors with efficiency ``eta`` and per-detector noise ``nu``.

    ``nu`` is the exponent of the no-dark-click probability, so a single idle
    detector fires with probability 1 - exp(-nu).  ``weights`` are splitting
    intensities |u_i|^2; None means the uniform 1/N split.
    """

    n_detectors: int
    eta: float = 1.0
    nu: float = 0.0
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if isinstance(self.n_detectors, bool) or int(self.n_detectors) != self.n_detectors:
            raise ValidationError(f"n_detectors must be an integer, got {self.n_detectors!r}")
        object.__setattr__(self, "n_detectors", int(self.n_detectors))
        if self.n_detectors < 1:
            raise ValidationError(f"n_detectors must be >= 1, got {self.n_detectors}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValidationError(f"eta must lie in [0, 1], got {self.eta!r}")
        if not (self.nu >= 0.0 and math.isfinite(self.nu)):
            raise ValidationError(f"nu must be finite and >= 0, got {self.nu!r}")
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "nu", float(self.nu))
        if self.weights is not None:
            w = _validate_weights(self.weights)
            if w.size != self.n_detectors:
                raise ValidationError(
                    f"{w.size} splitting weights given for {self.n_detectors} detectors"
                )
            object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @property
    def is_uniform(self) -> bool:
        if self.weights is None:
            return True
        return max(abs(w - 1.0 / self.n_detectors) for w in self.weights) <= WEIGHT_TOL

    def weight_array(self) -> NDArray[np.float64]:
        if self.weights is None:
            return np.full(self.n_detectors, 1.0 / self.n_detectors)
        return np.asarray(self.weights, dtype=np.float64)


def _validate_weights(weights: ArrayLike) -> NDArray[np.float64]:
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.size == 0:
        raise ValidationError("splitting weights are empty")
    if not np.all(np.isfinite(w)):
        bad = int(np.flatnonzero(~np.isfinite(w))[0])
        raise ValidationError(f"splitting weight {bad} is not finite", index=bad)
    if np.any(w < 0):
        bad = int(np.flatnonzero(w < 0)[0])
        raise ValidationError(f"splitting weight {bad} is negative: {w[bad]!r}", index=bad)
    total = math.fsum(w)
    if abs(total - 1.0) > WEIGHT_TOL:
        raise ValidationError(f"splitting weights sum to {total!r}, expected 1")
    return w


def _require_uniform(cfg: DetectorConfig, what: str) -> None:
    if not cfg.is_uniform:
        raise DomainError(
            f"{what} supports uniform splitting only; non-uniform weights are "
            "available for coherent input through coherent_click_nonuniform"
        )


@dataclass(frozen=True)
class Diagnostics:
    """Bookkeeping for clamped rounding residue.

    ``clamp_count`` counts entries in ``[-NEG_CLAMP, 0)`` that were set to
    zero; ``soft_clamp_count`` counts the rarer ones in
    ``[-STABILITY_LIMIT, -NEG_CLAMP)``.  ``precision_escalations`` counts
    closed-sum evaluations that needed multiprecision arithmetic.
    """

    clamp_count: int = 0
    soft_clamp_count: int = 0
    max_negative_excursion: float = 0.0
    precision_escalations: int = 0
    stability_failures: int = 0

    def merge(self, other: Diagnostics) -> Diagnostics:
        return Diagnostics(
            self.clamp_count + other.clamp_count,
            self.soft_clamp_count + other.soft_clamp_count,
            min(self.max_negative_excursion, other.max_negative_excursion),
            self.precision_escalations + other.precision_escalations,
            self.stability_failures + other.stability_failures,
        )

    def as_dict(self) -> dict[str, float | int]:
        return {
            "clamp_count": self.clamp_count,
            "soft_clamp_count": self.soft_clamp_count,
            "max_negative_excursion": self.max_negative_excursion,
            "precision_escalations": self.precision_escalations,
            "stability_failures": self.stability_failures,
        }


def _clamp(values: NDArray[np.float64], what: str) -> tuple[NDArray[np.float64], Diagnostics]:
    values = np.array(values, dtype=np.float64)
    neg = values < 0
    if not neg.any():
        return values, Diagnostics()
    worst = float(values.min())
    if worst < -STABILITY_LIMIT:
        k = int(np.argmin(values))
        raise StabilityError(f"{what}: entry {k} is {worst!r}, below -{STABILITY_LIMIT:g}")
    soft = int(np.count_nonzero(values < -NEG_CLAMP))
    hard = int(np.count_nonzero(neg)) - soft
    values[neg] = 0.0
    return values, Diagnostics(hard, soft, worst)


@dataclass(frozen=True)
class ClickDistribution:
    """Probabilities of k = 0..N total clicks."""

    probs: NDArray[np.float64]
    n_detectors: int
    diagnostics: Diagnostics = field(default_factory=Diagnostics, compare=False)

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=np.float64).ravel()
        if probs.size != self.n_detectors + 1:
            raise ValidationError(
                f"click distribution for N={self.n_detectors} needs {self.n_detectors + 1} "
                f"entries, got {probs.size}"
            )
        if probs.size and probs.min() < -NEG_CLAMP:
            raise ValidationError(f"click probability {probs.min()!r} below -{NEG_CLAMP:g}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def total(self) -> float:
        return math.fsum(self.probs)

    def mode(self) -> int:
        return int(np.argmax(self.probs))


@dataclass(frozen=True)
class PovmDiagonal:
    """``coeffs[k, n]``: probability of k clicks given the Fock state |n>."""

    coeffs: NDArray[np.float64]
    config: DetectorConfig
    diagnostics: Diagnostics = field(default_factory=Diagnostics, compare=False)

    @property
    def n_max(self) -> int:
        return self.coeffs.shape[1] - 1

    def apply(self, pnd: PhotonNumberDistribution) -> ClickDistribution:
        if pnd.n_max > self.n_max:
            raise DomainError(f"distribution reaches n={pnd.n_max}, POVM only n={self.n_max}")
        probs = self.coeffs[:, : pnd.n_max + 1] @ pnd.probs
        probs, diag = _clamp(probs, "povm apply")
        return ClickDistribution(probs, self.config.n_detectors, self.diagnostics.merge(diag))


# ---------------------------------------------------------------------------
# closed inclusion-exclusion sum


def _log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _closed_sum_float(n: int, k: int, big_n: int, eta: float, nu: float) -> tuple[float, float] | None:
    """Float evaluation plus a running-error estimate; None on overflow."""
    log_pref = _log_binom(big_n, k)
    terms = []
    err = 0.0
    for j in range(k + 1):
        off = big_n - k + j
        base = (big_n - off * eta) / big_n
        if base <= 0.0:
            if n > 0:
                continue
            log_pow = 0.0
        else:
            log_pow = n * math.log(base)
        log_t = log_pref + _log_binom(k, j) - off * nu + log_pow
        if log_t > 700.0:
            return None
        t = math.exp(log_t)
        terms.append(-t if j & 1 else t)
        # relative error of exp(log_t): rounding of log_t plus n-fold base error
        err += t * _EPS * (4.0 + abs(log_t) + 2.0 * n)
    return math.fsum(terms), err


def _closed_sum_mp(n: int, k: int, big_n: int, eta: float, nu: float, dps: int) -> float:
    with mpmath.workdps(dps):
        eta_m = mpmath.mpf(eta)
        nu_m = mpmath.mpf(nu)
        nn = mpmath.mpf(big_n)
        acc = mpmath.mpf(0)
        for j in range(k + 1):
            off = big_n - k + j
            base = (nn - off * eta_m) / nn
            if base <= 0:
                if n > 0:
                    continue
                powv = mpmath.mpf(1)
            else:
                powv = base ** n
            t = mpmath.binomial(k, j) * mpmath.exp(-off * nu_m) * powv
            acc += -t if j & 1 else t
        return float(mpmath.binomial(big_n, k) * acc)


def _closed_sum(n: int, k: int, cfg: DetectorConfig) -> tuple[float, bool]:
    big_n, eta, nu = cfg.n_detectors, cfg.eta, cfg.nu
    res = _closed_sum_float(n, k, big_n, eta, nu)
    if res is not None and res[1] <= FLOAT_ABS_ERR:
        return res[0], False
    # magnitude of the largest term decides how many digits cancel
    log_big = _log_binom(big_n, k) + max(
        _log_binom(k, j) + (n * math.log(b) if (b := (big_n - (big_n - k + j) * eta) / big_n) > 0 else 0.0)
        for j in range(k + 1)
    )
    dps = 20 + max(0, math.ceil(log_big / math.log(10))) + len(str(n))
    if dps > MAX_DPS:
        raise KernelOverflowError(
            f"closed sum at (k={k}, n={n}) needs {dps} digits, limit is {MAX_DPS}", k=k, n=n
        )
    return _closed_sum_mp(n, k, big_n, eta, nu, dps), True


def fock_click_prob(n: int, k: int, cfg: DetectorConfig) -> float:
    """Probability of ``k`` clicks when the Fock state |n> is detected.

    Raises StabilityError if the evaluated sum lands further than
    ``STABILITY_LIMIT`` outside [0, 1].
    """
    value, _ = fock_click_prob_info(n, k, cfg)
    return value


def fock_click_prob_info(n: int, k: int, cfg: DetectorConfig) -> tuple[float, bool]:
    """``fock_click_prob`` plus whether multiprecision arithmetic was needed."""
    _require_uniform(cfg, "fock_click_prob")
    if n < 0 or int(n) != n:
        raise DomainError(f"photon number must be a non-negative integer, got {n!r}")
    if int(k) != k or not 0 <= k <= cfg.n_detectors:
        raise DomainError(f"click number {k!r} outside 0..{cfg.n_detectors}")
    if cfg.nu == 0 and k > n:
        # without noise every click needs its own photon
        return 0.0, False
    raw, escalated = _closed_sum(int(n), int(k), cfg)
    if raw < -STABILITY_LIMIT or raw > 1 + STABILITY_LIMIT:
        raise StabilityError(f"closed sum at (k={k}, n={n}) evaluated to {raw!r}")
    return min(max(raw, 0.0), 1.0), escalated


# ---------------------------------------------------------------------------
# Stirling numbers and the ideal-detector POVM


@lru_cache(maxsize=None)
def _stirling_row(n: int) -> tuple[int, ...]:
    if n == 0:
        return (1,)
    prev = _stirling_row(n - 1)
    row = [0] * (n + 1)
    for k in range(1, n + 1):
        row[k] = (k * prev[k] if k < n else 0) + prev[k - 1]
    return tuple(row)


def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind, exact, via S(n,k) = k S(n-1,k) + S(n-1,k-1)."""
    if n < 0 or k < 0:
        raise DomainError("Stirling numbers need non-negative arguments")
    if k > n:
        return 0
    for m in range(0, n, 256):  # warm the cache bottom-up to keep recursion shallow
        _stirling_row(m)
    return _stirling_row(n)[k]


def exact_ideal_click_prob(n: int, k: int, n_detectors: int) -> Fraction:
    """C(N,k) k! S(n,k) / N^n as an exact rational (eta = 1, nu = 0)."""
    if not 0 <= k <= n_detectors:
        raise DomainError(f"click number {k} outside 0..{n_detectors}")
    return Fraction(
        math.comb(n_detectors, k) * math.factorial(k) * stirling2(n, k), n_detectors ** n
    )


def log_stirling2_table(n_max: int, k_max: int | None = None) -> NDArray[np.float64]:
    """``table[n, k] = log S(n, k)`` (``-inf`` where S vanishes), float recurrence."""
    k_max = n_max if k_max is None else min(k_max, n_max)
    table = np.full((n_max + 1, k_max + 1), -np.inf)
    table[0, 0] = 0.0
    log_k = np.log(np.arange(1, k_max + 1))
    for n in range(1, n_max + 1):
        prev = table[n - 1]
        table[n, 1:] = np.logaddexp(log_k + prev[1:], prev[:-1])
    return table


def ideal_povm_stirling(n_detectors: int, n_max: int) -> NDArray[np.float64]:
    """Ideal POVM ``C(N,k) k! S(n,k) / N^n`` from log-domain Stirling numbers."""
    k_max = min(n_detectors, n_max)
    logs = log_stirling2_table(n_max, k_max)
    ks = np.arange(k_max + 1)
    ns = np.arange(n_max + 1)
    big_n = n_detectors
    log_comb = np.array([_log_binom(big_n, k) + math.lgamma(k + 1) for k in ks])
    with np.errstate(invalid="ignore"):
        log_c = log_comb[None, :] + logs - ns[:, None] * math.log(big_n)
    out = np.zeros((big_n + 1, n_max + 1))
    out[: k_max + 1, :] = np.exp(log_c).T
    return out


# ---------------------------------------------------------------------------
# occupancy-chain route


def _dark_column(cfg: DetectorConfig) -> NDArray[np.float64]:
    big_n = cfg.n_detectors
    if cfg.nu == 0:
        col = np.zeros(big_n + 1)
        col[0] = 1.0
        return col
    return stats.binom.pmf(np.arange(big_n + 1), big_n, -math.expm1(-cfg.nu))


def _switch_on_probs(cfg: DetectorConfig) -> NDArray[np.float64]:
    big_n = cfg.n_detectors
    return cfg.eta * (big_n - np.arange(big_n + 1)) / big_n


def povm_fock_matrix(
    cfg: DetectorConfig, n_max: int, cell_budget: int = DEFAULT_CELL_BUDGET
) -> PovmDiagonal:
    """Fock-diagonal POVM for photon numbers ``0..n_max``."""
    _require_uniform(cfg, "povm_fock_matrix")
    if n_max < 0 or int(n_max) != n_max:
        raise DomainError(f"n_max must be a non-negative integer, got {n_max!r}")
    cells = (cfg.n_detectors + 1) * (int(n_max) + 1)
    if cells > cell_budget:
        raise BudgetExceededError(
            f"POVM matrix needs {cells} cells, budget is {cell_budget}", required=cells
        )
    coeffs = np.empty((cfg.n_detectors + 1, int(n_max) + 1))
    col = _dark_column(cfg)
    up = _switch_on_probs(cfg)
    stay = 1.0 - up
    coeffs[:, 0] = col
    for n in range(1, int(n_max) + 1):
        nxt = col * stay
        nxt[1:] += col[:-1] * up[:-1]
        col = nxt
        coeffs[:, n] = col
    coeffs.setflags(write=False)
    return PovmDiagonal(coeffs, cfg)


def click_distribution(pnd: PhotonNumberDistribution, cfg: DetectorConfig) -> ClickDistribution:
    """Click-count distribution of an arbitrary Fock-diagonal state."""
    _require_uniform(cfg, "click_distribution")
    col = _dark_column(cfg)
    up = _switch_on_probs(cfg)
    stay = 1.0 - up
    acc = pnd.probs[0] * col
    for n in range(1, pnd.n_max + 1):
        nxt = col * stay
        nxt[1:] += col[:-1] * up[:-1]
        col = nxt
        p = pnd.probs[n]
        if p:
            acc += p * col
    acc, diag = _clamp(acc, "click_distribution")
    return ClickDistribution(acc, cfg.n_detectors, diag)


def coherent_click_distribution(alpha2: float, cfg: DetectorConfig) -> ClickDistribution:
    """Binomial(N, 1 - exp(-(eta alpha2 / N + nu))); exact, no truncation."""
    if not alpha2 >= 0 or not math.isfinite(alpha2):
        raise DomainError(f"alpha2 must be finite and >= 0, got {alpha2!r}")
    if not cfg.is_uniform:
        return coherent_click_nonuniform(alpha2, cfg.weights, cfg.eta, cfg.nu)
    big_n = cfg.n_detectors
    q = -math.expm1(-(cfg.eta * alpha2 / big_n + cfg.nu))
    probs = stats.binom.pmf(np.arange(big_n + 1), big_n, q)
    return ClickDistribution(probs, big_n)


def coherent_click_nonuniform(
    alpha2: float, weights: Sequence[float], eta: float = 1.0, nu: float = 0.0
) -> ClickDistribution:
    """Poisson-binomial click distribution for an unequal coherent split.

    Detector i fires independently with probability
    1 - exp(-(eta w_i alpha2 + nu)); the count distribution is built by
    convolving one Bernoulli factor at a time.
    """
    if not alpha2 >= 0 or not math.isfinite(alpha2):
        raise DomainError(f"alpha2 must be finite and >= 0, got {alpha2!r}")
    w = _validate_weights(weights)
    cfg = DetectorConfig(w.size, eta, nu)  # validates eta, nu
    q = -np.expm1(-(cfg.eta * w * alpha2 + cfg.nu))
    pmf = np.zeros(w.size + 1)
    pmf[0] = 1.0
    for i, qi in enumerate(q):
        head = pmf[: i + 2].copy()
        pmf[: i + 2] = head * (1.0 - qi)
        pmf[1 : i + 2] += head[: i + 1] * qi
    return ClickDistribution(pmf, w.size)


# ---------------------------------------------------------------------------
# Mandel reference statistics and moments


def default_k_max(n_max: int, nu: float) -> int:
    return n_max + math.ceil(nu + 10 * math.sqrt(nu) + 10)


def mandel_distribution(
    pnd: PhotonNumberDistribution,
    eta: float = 1.0,
    nu: float = 0.0,
    k_max: int | None = None,
) -> NDArray[np.float64]:
    """Photo-counts of an ideal counter: Binomial(n, eta) survivors plus Poisson(nu) noise."""
    DetectorConfig(1, eta, nu)  # parameter validation only
    if k_max is None:
        k_max = default_k_max(pnd.n_max, nu)
    if k_max < 0:
        raise DomainError(f"k_max must be >= 0, got {k_max}")
    # survivors: thin each Fock column by eta, photon by photon
    col = np.zeros(pnd.n_max + 1)
    col[0] = 1.0
    surv = pnd.probs[0] * col
    for n in range(1, pnd.n_max + 1):
        nxt = col * (1.0 - eta)
        nxt[1:] += col[:-1] * eta
        col = nxt
        if pnd.probs[n]:
            surv = surv + pnd.probs[n] * col
    if nu > 0:
        noise = stats.poisson.pmf(np.arange(k_max + 1), nu)
        out = np.convolve(surv, noise)[: k_max + 1]
    else:
        out = surv[: k_max + 1]
    if out.size < k_max + 1:
        out = np.concatenate([out, np.zeros(k_max + 1 - out.size)])
    remaining = math.fsum(pnd.probs) - math.fsum(out)
    if remaining > MASS_TOL:
        raise InsufficientSupportError(
            f"k_max={k_max} omits probability mass {remaining:.3g}", remaining=remaining
        )
    return out


def _as_probs(dist: ClickDistribution | ArrayLike) -> NDArray[np.float64]:
    if isinstance(dist, ClickDistribution):
        return dist.probs
    return np.asarray(dist, dtype=np.float64).ravel()


def moments(dist: ClickDistribution | ArrayLike) -> tuple[float, float]:
    """Mean and variance by direct summation over the support."""
    p = _as_probs(dist)
    k = np.arange(p.size, dtype=np.float64)
    total = math.fsum(p)
    mean = math.fsum(k * p) / total
    var = math.fsum((k - mean) ** 2 * p) / total
    return mean, var


def mandel_q(probs: ClickDistribution | ArrayLike) -> float:
    """variance / mean - 1."""
    mean, var = moments(probs)
    if mean <= 0:
        raise DomainError("Mandel Q is undefined for a distribution with zero mean")
    return var / mean - 1.0


def coherent_click_q_closed(alpha2: float, n_detectors: int) -> float:
    """exp(-alpha2 / N) - 1, the Q parameter of clicks from a coherent state."""
    if n_detectors < 1:
        raise DomainError("n_detectors must be >= 1")
    return math.expm1(-alpha2 / n_detectors)


def total_variation(a: ClickDistribution | ArrayLike, b: ClickDistribution | ArrayLike) -> float:
    """Half the L1 distance; the shorter vector is zero-padded."""
    pa, pb = _as_probs(a), _as_probs(b)
    size = max(pa.size, pb.size)
    pa = np.pad(pa, (0, size - pa.size))
    pb = np.pad(pb, (0, size - pb.size))
    return 0.5 * math.fsum(np.abs(pa - pb))


def limit_compare(
    pnd: PhotonNumberDistribution,
    eta: float,
    nu_total: float,
    n_detectors_list: Sequence[int],
) -> list[tuple[int, float]]:
    """TV distance between N-detector clicks and Mandel counts, per N.

    The click side uses per-detector noise ``nu_total / N`` so that both
    sides carry the same total noise.
    """
    mandel = mandel_distribution(pnd, eta, nu_total)
    out = []
    for big_n in n_detectors_list:
        cfg = DetectorConfig(big_n, eta, nu_total / big_n)
        out.append((int(big_n), total_variation(click_distribution(pnd, cfg), mandel)))
    return out
