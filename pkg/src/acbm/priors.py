"""Beta-Binomial conjugate marginals and MFM partition-prior coefficients.

All probability arithmetic is done in log space; the V_n(t) tables of the
mixture-of-finite-mixtures prior are accumulated with log-sum-exp and cached
per (n_items, k_max, gamma, alpha) key.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import BlockCountExceedsSupport, NonFiniteResult

NEG_INF = float("-inf")


def log_beta_binomial_marginal(s: int, f: int, a0: float, b0: float) -> float:
    """Log marginal probability of a specific binary sequence with s ones
    and f zeros under theta ~ Beta(a0, b0): log B(a0+s, b0+f) - log B(a0, b0).
    No binomial coefficient; entries are individually observed."""
    if s < 0 or f < 0:
        raise ValueError(f"counts must be nonnegative, got s={s}, f={f}")
    if a0 <= 0 or b0 <= 0:
        raise ValueError(f"Beta shapes must be positive, got a0={a0}, b0={b0}")
    out = (
        math.lgamma(a0 + s)
        + math.lgamma(b0 + f)
        - math.lgamma(a0 + b0 + s + f)
        - math.lgamma(a0)
        - math.lgamma(b0)
        + math.lgamma(a0 + b0)
    )
    if not math.isfinite(out):
        raise NonFiniteResult(f"log marginal overflowed for s={s}, f={f}, a0={a0}, b0={b0}")
    return out


def log_predictive(s_add: int, f_add: int, S: int, F: int, a0: float, b0: float) -> float:
    """Log probability of s_add additional ones and f_add additional zeros
    given a block with existing counts (S, F). Reduces to the marginal when
    S = F = 0."""
    if min(s_add, f_add, S, F) < 0:
        raise ValueError("counts must be nonnegative")
    out = (
        math.lgamma(a0 + S + s_add)
        + math.lgamma(b0 + F + f_add)
        - math.lgamma(a0 + b0 + S + F + s_add + f_add)
        - math.lgamma(a0 + S)
        - math.lgamma(b0 + F)
        + math.lgamma(a0 + b0 + S + F)
    )
    if not math.isfinite(out):
        raise NonFiniteResult(f"log predictive overflowed for S={S}, F={F}")
    return out


def _logsumexp2(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    m = a if a > b else b
    return m + math.log(math.exp(a - m) + math.exp(b - m))


@dataclass(frozen=True)
class MfmCoefficients:
    """log V_n(t) table of the MFM exchangeable partition prior.

    k_max is None for the unbounded (column-level) prior; finite k_max
    encodes the truncated component-count prior of the examinee level.
    Entries with t beyond the support hold -inf.
    """

    n_items: int
    k_max: int | None
    gamma: float
    alpha: float
    log_v: np.ndarray  # index t = 0..t_max, entry 0 unused (-inf)

    @property
    def t_max(self) -> int:
        return len(self.log_v) - 1

    def log_v_at(self, t: int) -> float:
        if t < 1:
            raise ValueError(f"t must be >= 1, got {t}")
        if t > self.t_max:
            return NEG_INF
        return float(self.log_v[t])


def _log_poisson_pmf(k: int, gamma: float) -> float:
    return -gamma + k * math.log(gamma) - math.lgamma(k + 1)


def _log_v_term(k: int, t: int, n: int, alpha: float, log_pk: float) -> float:
    # log [ p(k) * k!/(k-t)! / (k*alpha)^{(n)} ]
    falling = sum(math.log(k - j) for j in range(t))
    rising = math.lgamma(k * alpha + n) - math.lgamma(k * alpha)
    return log_pk + falling - rising


def build_mfm_coefficients(
    n_items: int, gamma: float, alpha: float, k_max: int | None = None
) -> MfmCoefficients:
    """Compute log V_n(t) for t = 1..t_max.

    V_n(t) = sum_{k >= t} p(k) * k!/(k-t)! / (k*alpha)^{(n)}, with p the
    Poisson(gamma) pmf restricted to {1..k_max} (finite support) or to
    {1, 2, ...} (unbounded), renormalized either way. The unbounded series
    is summed until the tail is negligible relative to the running sum.
    """
    if n_items < 1:
        raise ValueError(f"n_items must be >= 1, got {n_items}")
    if gamma <= 0 or alpha <= 0:
        raise ValueError("gamma and alpha must be positive")
    if k_max is not None and k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")

    key = (n_items, k_max, float(gamma), float(alpha))
    with _cache_lock:
        hit = _cache.get(key)
    if hit is not None:
        return hit

    if k_max is not None:
        # renormalize the Poisson over {1..k_max}
        log_mass = NEG_INF
        for k in range(1, k_max + 1):
            log_mass = _logsumexp2(log_mass, _log_poisson_pmf(k, gamma))
        t_max = min(k_max, n_items)
        log_v = np.full(t_max + 1, NEG_INF)
        for t in range(1, t_max + 1):
            acc = NEG_INF
            for k in range(t, k_max + 1):
                lp = _log_poisson_pmf(k, gamma) - log_mass
                acc = _logsumexp2(acc, _log_v_term(k, t, n_items, alpha, lp))
            log_v[t] = acc
    else:
        log_mass = math.log1p(-math.exp(-gamma)) if gamma < 700 else 0.0
        t_max = n_items
        log_v = np.full(t_max + 1, NEG_INF)
        log_tol = math.log(1e-12)
        for t in range(1, t_max + 1):
            acc = NEG_INF
            k = t
            while True:
                lp = _log_poisson_pmf(k, gamma) - log_mass
                term = _log_v_term(k, t, n_items, alpha, lp)
                acc = _logsumexp2(acc, term)
                # Poisson tails decay superexponentially: stop once the term
                # is negligible and we are well past the bulk of the pmf.
                if (term - acc < log_tol and k > gamma + 10 * math.sqrt(gamma) + t) or (
                    k > t + 100000
                ):
                    break
                k += 1
            log_v[t] = acc

    coeffs = MfmCoefficients(n_items=n_items, k_max=k_max, gamma=float(gamma),
                             alpha=float(alpha), log_v=log_v)
    with _cache_lock:
        _cache.setdefault(key, coeffs)
        coeffs = _cache[key]
    return coeffs


_cache: dict = {}
_cache_lock = threading.Lock()


def clear_coefficient_cache():
    with _cache_lock:
        _cache.clear()


def log_partition_prior(partition, coeffs: MfmCoefficients) -> float:
    """EPPF mass: log V_n(t) + sum over blocks of log alpha^{(|b|)}.

    `partition` is a label vector over exactly coeffs.n_items items.
    """
    labels = np.asarray(partition)
    if len(labels) != coeffs.n_items:
        raise ValueError(
            f"partition over {len(labels)} items, coefficients built for {coeffs.n_items}"
        )
    sizes = np.bincount(labels - labels.min())
    sizes = sizes[sizes > 0]
    t = len(sizes)
    if coeffs.k_max is not None and t > coeffs.k_max:
        raise BlockCountExceedsSupport(
            f"{t} blocks with k_max={coeffs.k_max}"
        )
    out = coeffs.log_v_at(t)
    a = coeffs.alpha
    lga = math.lgamma(a)
    for b in sizes:
        out += math.lgamma(a + int(b)) - lga
    return out
