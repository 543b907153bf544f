"""Truncated photon-number distributions.

Every state is reduced to its Fock diagonal P(n) = <n|rho|n>.  The click
POVM is diagonal in the Fock basis, so nothing downstream needs coherences.

Constructors pick the truncation point adaptively: entries are generated in
log-domain one photon number at a time until an analytic bound on the
omitted tail drops below ``trunc_tol``.  Entries never depend on where the
loop stops, so tightening the tolerance only appends entries.
"""
from __future__ import annotations

import json
import math
from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass, field
from os import PathLike
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .errors import DomainError, ValidationError

__all__ = [
    "NORM_EPS",
    "DEFAULT_TRUNC_TOL",
    "PhotonNumberDistribution",
    "fock_pnd",
    "coherent_pnd",
    "squeezed_vacuum_pnd",
    "odd_coherent_pnd",
    "load_pnd",
]

NORM_EPS = 1e-12
DEFAULT_TRUNC_TOL = 1e-12
DEFAULT_LOAD_TOL = 1e-9

# hard stop for the adaptive loops; far beyond anything physically sensible
_MAX_TERMS = 10_000_000

_DOC_FIELDS = frozenset({"probabilities", "tail_bound"})


@dataclass(frozen=True)
class PhotonNumberDistribution:
    """Probability vector over photon numbers ``0..n_max``.

    ``tail_bound`` is a guaranteed upper bound on the probability mass that
    lies beyond ``n_max``.
    """

    probs: NDArray[np.float64]
    tail_bound: float = 0.0
    label: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=np.float64).ravel()
        if probs.size == 0:
            raise ValidationError("photon-number distribution is empty")
        if not np.all(np.isfinite(probs)):
            bad = int(np.flatnonzero(~np.isfinite(probs))[0])
            raise ValidationError(f"non-finite probability at n={bad}", index=bad)
        if np.any(probs < 0):
            bad = int(np.flatnonzero(probs < 0)[0])
            raise ValidationError(f"negative probability {probs[bad]!r} at n={bad}", index=bad)
        tail = float(self.tail_bound)
        if not (tail >= 0 and math.isfinite(tail)):
            raise ValidationError(f"tail_bound must be a finite non-negative number, got {tail!r}")
        total = math.fsum(probs)
        if abs(total - 1.0) > tail + NORM_EPS:
            raise ValidationError(
                f"probabilities sum to {total!r}; allowed deviation from 1 is {tail + NORM_EPS:.3g}"
            )
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "tail_bound", tail)

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    def mean(self) -> float:
        return math.fsum(np.arange(self.probs.size) * self.probs)

    def to_document(self) -> dict[str, Any]:
        return {"probabilities": self.probs.tolist(), "tail_bound": self.tail_bound}


def _check_tol(trunc_tol: float) -> None:
    if not trunc_tol > 0:
        raise DomainError(f"trunc_tol must be positive, got {trunc_tol!r}")


def _truncate(
    log_terms: Iterator[tuple[int, float]],
    log_tail: Callable[[int, float], float | None],
    trunc_tol: float,
    label: str,
) -> PhotonNumberDistribution:
    """Collect ``(n, log p_n)`` until ``log_tail`` certifies the remainder.

    ``log_tail(n, log_p_n)`` returns the log of a bound on the mass beyond
    ``n`` or None when no bound is available yet.  Entries not yielded are
    zero.
    """
    log_tol = math.log(trunc_tol)
    entries: dict[int, float] = {}
    for n, lp in log_terms:
        entries[n] = lp
        lt = log_tail(n, lp)
        if lt is not None and lt <= log_tol:
            probs = np.zeros(n + 1)
            idx = np.fromiter(entries.keys(), dtype=np.int64)
            probs[idx] = np.exp(np.fromiter(entries.values(), dtype=np.float64))
            return PhotonNumberDistribution(probs, min(math.exp(lt), trunc_tol), label)
        if n > _MAX_TERMS:
            break
    raise DomainError(f"{label}: no truncation below {trunc_tol:g} within {_MAX_TERMS} terms")


def fock_pnd(n: int) -> PhotonNumberDistribution:
    """Photon-number eigenstate |n>."""
    if int(n) != n or n < 0:
        raise DomainError(f"photon number must be a non-negative integer, got {n!r}")
    probs = np.zeros(int(n) + 1)
    probs[-1] = 1.0
    return PhotonNumberDistribution(probs, 0.0, f"fock:{int(n)}")


def _poisson_log_terms(alpha2: float, offset: float, start: int, step: int) -> Iterator[tuple[int, float]]:
    log_a = math.log(alpha2)
    n = start
    while True:
        yield n, offset - alpha2 + n * log_a - math.lgamma(n + 1)
        n += step


def coherent_pnd(alpha2: float, trunc_tol: float = DEFAULT_TRUNC_TOL) -> PhotonNumberDistribution:
    """Poisson photon statistics of a coherent state with mean ``alpha2``."""
    if not alpha2 >= 0 or not math.isfinite(alpha2):
        raise DomainError(f"alpha2 must be finite and >= 0, got {alpha2!r}")
    _check_tol(trunc_tol)
    label = f"coherent:{alpha2:g}"
    if alpha2 == 0:
        return PhotonNumberDistribution(np.ones(1), 0.0, label)
    log_a = math.log(alpha2)

    def log_tail(n: int, lp: float) -> float | None:
        # ratio p_{m+1}/p_m = a/(m+1) is at most a/(n+2) for every m > n
        ratio = alpha2 / (n + 2)
        if ratio >= 1:
            return None
        lp_next = lp + log_a - math.log(n + 1)
        return lp_next - math.log1p(-ratio)

    return _truncate(_poisson_log_terms(alpha2, 0.0, 0, 1), log_tail, trunc_tol, label)


def _log_cosh(x: float) -> float:
    return x + math.log1p(math.exp(-2 * x)) - math.log(2)


def squeezed_vacuum_pnd(xi: float, trunc_tol: float = DEFAULT_TRUNC_TOL) -> PhotonNumberDistribution:
    """Squeezed vacuum: weight only on even photon numbers.

    P(2m) = tanh(xi)^(2m) (2m)! / (cosh(xi) 4^m (m!)^2)
    """
    if not xi >= 0 or not math.isfinite(xi):
        raise DomainError(f"squeeze parameter must be finite and >= 0, got {xi!r}")
    _check_tol(trunc_tol)
    label = f"squeezed:{xi:g}"
    if xi == 0:
        return PhotonNumberDistribution(np.ones(1), 0.0, label)
    log_t2 = 2 * math.log(math.tanh(xi))
    log_c = _log_cosh(xi)

    def terms() -> Iterator[tuple[int, float]]:
        m = 0
        while True:
            yield 2 * m, (m * log_t2 + math.lgamma(2 * m + 1) - log_c
                          - 2 * (m * math.log(2) + math.lgamma(m + 1)))
            m += 1

    def log_tail(n: int, lp: float) -> float | None:
        m = n // 2
        # successive ratios t^2 (2m+1)/(2m+2) < t^2, and 1/(1 - t^2) = cosh^2
        lp_next = lp + log_t2 + math.log(2 * m + 1) - math.log(2 * m + 2)
        return lp_next + 2 * log_c

    return _truncate(terms(), log_tail, trunc_tol, label)


def odd_coherent_pnd(alpha2: float, trunc_tol: float = DEFAULT_TRUNC_TOL) -> PhotonNumberDistribution:
    """Odd coherent state N(|a> - |-a>): Poisson weights on odd n, rescaled."""
    if not alpha2 > 0 or not math.isfinite(alpha2):
        raise DomainError(f"odd coherent state needs finite alpha2 > 0, got {alpha2!r}")
    _check_tol(trunc_tol)
    label = f"odd:{alpha2:g}"
    # 4 N^2 = 2 / (1 - exp(-2 a))
    offset = math.log(2) - math.log(-math.expm1(-2 * alpha2))
    log_a = math.log(alpha2)

    def log_tail(n: int, lp: float) -> float | None:
        ratio = alpha2 ** 2 / ((n + 3) * (n + 4))
        if ratio >= 1:
            return None
        lp_next = lp + 2 * log_a - math.log(n + 1) - math.log(n + 2)
        return lp_next - math.log1p(-ratio)

    return _truncate(_poisson_log_terms(alpha2, offset, 1, 2), log_tail, trunc_tol, label)


def load_pnd(
    source: Mapping[str, Any] | str | PathLike[str],
    tol: float = DEFAULT_LOAD_TOL,
) -> PhotonNumberDistribution:
    """Build a distribution from ``{"probabilities": [...], "tail_bound": t}``.

    ``source`` is either the mapping itself or a path to a JSON file holding
    it.  Accepted sums lie in ``[1 - tail_bound - tol, 1 + tol]``.  A small
    excess over 1 is scaled away; a small deficit is added to ``tail_bound``.
    """
    if isinstance(source, Mapping):
        doc = source
        label = "document"
    else:
        with open(source, encoding="utf-8") as fh:
            doc = json.load(fh)
        label = f"file:{source}"
        if not isinstance(doc, Mapping):
            raise ValidationError("document root must be an object")

    extra = set(doc) - _DOC_FIELDS
    if extra:
        raise ValidationError(f"unexpected field(s): {', '.join(sorted(extra))}")
    if "probabilities" not in doc:
        raise ValidationError("missing field 'probabilities'")
    raw = doc["probabilities"]
    if isinstance(raw, (str, bytes)) or not hasattr(raw, "__iter__"):
        raise ValidationError("'probabilities' must be an array of numbers")
    raw = list(raw)
    if not raw:
        raise ValidationError("'probabilities' is empty")
    for i, x in enumerate(raw):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise ValidationError(f"entry {i} is not a finite number: {x!r}", index=i)
        if x < 0:
            raise ValidationError(f"entry {i} is negative: {x!r}", index=i)
    declared = doc.get("tail_bound", 0.0)
    if isinstance(declared, bool) or not isinstance(declared, (int, float)) or not declared >= 0:
        raise ValidationError(f"'tail_bound' must be a non-negative number, got {declared!r}")

    probs = np.asarray(raw, dtype=np.float64)
    total = math.fsum(raw)
    if total > 1 + tol or total < 1 - declared - tol:
        raise ValidationError(
            f"probabilities sum to {total!r}, outside [{1 - declared - tol!r}, {1 + tol!r}]"
        )
    if total > 1:
        probs = probs / total
        total = math.fsum(probs)
    tail = max(float(declared), 1.0 - total)
    return PhotonNumberDistribution(probs, tail, label)
