"""Heavy-tail fitting, likelihood-ratio tests and rank tests for integer data.

All three tail families are discrete and supported on ``x >= xmin``:

* ``powerlaw``            p(x) = x**-alpha / zeta(alpha, xmin)
* ``exponential``         p(x) = (1 - e**-lam) * e**(-lam * (x - xmin))
* ``truncated_powerlaw``  p(x) = x**-alpha * e**(-lam * x) / Z(alpha, lam, xmin)
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import mpmath
import numpy as np
from scipy import optimize, special

SIGNIFICANCE = 0.05
FAMILIES = ("exponential", "powerlaw", "truncated_powerlaw")


class FitError(RuntimeError):
    pass


@dataclass
class FitResult:
    family: str
    params: dict
    xmin: int
    loglik: float
    n_tail: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LrtResult:
    R: float  # normalised log-likelihood ratio, positive favours the first model
    p_value: float
    preferred: str | None
    loglik_ratio: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def shannon_entropy(p) -> float:
    """Entropy in bits, with 0 * log 0 = 0."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("probabilities must be non-negative")
    if not np.isclose(p.sum(), 1.0, rtol=0, atol=1e-9):
        raise ValueError(f"probabilities sum to {p.sum()}, not 1")
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum()) + 0.0


def _tail(data, xmin) -> np.ndarray:
    x = np.asarray(data)
    if x.size and (np.any(x != np.round(x)) or np.any(x < 1)):
        raise ValueError("tail fitting expects positive integers")
    x = x[x >= xmin].astype(np.float64)
    return x


def hill_estimator(data, xmin, discrete: bool = True) -> float:
    """Closed-form alpha estimate 1 + n / sum(log(x / x0)).

    ``x0`` is ``xmin - 0.5`` for the discrete approximation and ``xmin`` for the
    continuous estimator.
    """
    x = _tail(data, xmin)
    x0 = xmin - 0.5 if discrete else xmin
    s = np.log(x / x0).sum()
    if s <= 0:
        raise FitError("degenerate tail: all values equal xmin")
    return 1.0 + len(x) / s


def _check_tail(x, min_n=10):
    if len(x) < min_n:
        raise FitError(f"need at least {min_n} tail observations, got {len(x)}")
    if np.all(x == x[0]):
        raise FitError("degenerate tail: all values equal")


# --- pure power law -------------------------------------------------------

def _powerlaw_logz(alpha, xmin):
    return np.log(special.zeta(alpha, xmin))


def powerlaw_loglik(x, alpha, xmin) -> np.ndarray:
    return -alpha * np.log(x) - _powerlaw_logz(alpha, xmin)


def fit_powerlaw(data, xmin: int = 1) -> FitResult:
    x = _tail(data, xmin)
    _check_tail(x)
    n, slog = len(x), np.log(x).sum()
    start = hill_estimator(x, xmin, discrete=True)

    def nll(a):
        return a * slog + n * _powerlaw_logz(a, xmin)

    lo = 1.0 + 1e-9
    hi = max(2.0 * start, start + 5.0)
    res = optimize.minimize_scalar(nll, bracket=None, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10, "maxiter": 500})
    if not res.success or not np.isfinite(res.fun):
        raise FitError(f"power-law fit did not converge: {res.message}")
    alpha = float(res.x)
    return FitResult("powerlaw", {"alpha": alpha}, int(xmin), float(-res.fun), n,
                     {"alpha_start": float(start), "iterations": int(res.nfev)})


# --- discrete exponential -------------------------------------------------

def exponential_loglik(x, lam, xmin) -> np.ndarray:
    return np.log1p(-np.exp(-lam)) - lam * (x - xmin)


def fit_exponential(data, xmin: int = 1) -> FitResult:
    x = _tail(data, xmin)
    _check_tail(x, min_n=2)
    excess = x.mean() - xmin
    lam = float(np.log1p(1.0 / excess))
    ll = float(exponential_loglik(x, lam, xmin).sum())
    return FitResult("exponential", {"lambda": lam}, int(xmin), ll, len(x), {"closed_form": True})


# --- truncated power law --------------------------------------------------

_SUM_CUTOFF = 10_000


def truncated_powerlaw_logz(alpha, lam, xmin) -> float:
    """log of sum_{x >= xmin} x**-alpha e**(-lam x).

    Terms are summed directly up to a cutoff; the remainder is the midpoint
    integral from cutoff + 1/2, via the upper incomplete gamma function.
    """
    if lam < 0 or alpha < 0:
        return math.inf
    M = xmin + _SUM_CUTOFF
    k = np.arange(xmin, M + 1, dtype=np.float64)
    logs = -alpha * np.log(k) - lam * k
    head_max = logs.max()
    head = np.exp(logs - head_max).sum()
    u = M + 0.5
    if lam == 0:
        if alpha <= 1:
            return math.inf
        tail = u ** (1 - alpha) / (alpha - 1)
    else:
        tail = float(mpmath.power(lam, alpha - 1) * mpmath.gammainc(1 - alpha, lam * u))
    return head_max + math.log(head + tail * math.exp(-head_max))


def truncated_powerlaw_loglik(x, alpha, lam, xmin) -> np.ndarray:
    if lam == 0.0:
        return powerlaw_loglik(x, alpha, xmin)
    return -alpha * np.log(x) - lam * x - truncated_powerlaw_logz(alpha, lam, xmin)


def fit_truncated_powerlaw(data, xmin: int = 1, max_iter: int = 500) -> FitResult:
    """Two-parameter MLE with alpha >= 0 and lam >= 0 (alpha may drop below 1 when lam > 0).

    lam is optimised on a log scale from several starting points; the lam = 0
    boundary (a pure power law) is always a candidate, so the result is never
    worse than :func:`fit_powerlaw`.
    """
    x = _tail(data, xmin)
    _check_tail(x)
    n, slog, ssum = len(x), np.log(x).sum(), x.sum()

    def nll(alpha, lam):
        logz = truncated_powerlaw_logz(alpha, lam, xmin)
        if not np.isfinite(logz):
            return 1e300
        return alpha * slog + lam * ssum + n * logz

    candidates = []
    try:
        pl = fit_powerlaw(x, xmin)
        candidates.append((pl.params["alpha"], 0.0, -pl.loglik, "boundary"))
    except FitError:
        pl = None
    lam_exp = fit_exponential(x, xmin).params["lambda"]
    a0 = pl.params["alpha"] if pl else 1.5
    starts = [(a0, 1e-6), (a0, 1e-3), (max(a0 - 0.5, 0.1), 1e-2), (0.5, lam_exp)]
    failures = []
    for a_start, l_start in starts:
        res = optimize.minimize(lambda t: nll(t[0], math.exp(t[1])),
                                x0=[a_start, math.log(l_start)], method="L-BFGS-B",
                                bounds=[(0.0, 20.0), (-40.0, 3.0)],
                                options={"maxiter": max_iter})
        if np.isfinite(res.fun) and res.fun < 1e299:
            candidates.append((float(res.x[0]), math.exp(res.x[1]), float(res.fun), res.message))
        else:
            failures.append(str(res.message))
    if not candidates:
        raise FitError(f"truncated power-law fit did not converge: {failures}")
    alpha, lam, fun, msg = min(candidates, key=lambda c: c[2])
    ll = float(truncated_powerlaw_loglik(x, alpha, lam, xmin).sum())
    if pl is not None and (lam == 0.0 or ll < pl.loglik):
        # the nested boundary is exact via the Hurwitz zeta
        alpha, lam, ll, msg = pl.params["alpha"], 0.0, pl.loglik, "boundary"
    return FitResult("truncated_powerlaw", {"alpha": alpha, "lambda": lam}, int(xmin), ll, n,
                     {"n_starts": len(starts), "converged_starts": len(candidates),
                      "message": str(msg)})


def pointwise_loglik(fit: FitResult, data) -> np.ndarray:
    x = _tail(data, fit.xmin)
    if fit.family == "powerlaw":
        return powerlaw_loglik(x, fit.params["alpha"], fit.xmin)
    if fit.family == "exponential":
        return exponential_loglik(x, fit.params["lambda"], fit.xmin)
    if fit.family == "truncated_powerlaw":
        return truncated_powerlaw_loglik(x, fit.params["alpha"], fit.params["lambda"], fit.xmin)
    raise ValueError(f"unknown family {fit.family!r}")


FITTERS = {"exponential": fit_exponential, "powerlaw": fit_powerlaw,
           "truncated_powerlaw": fit_truncated_powerlaw}


def likelihood_ratio_test(data, fit_a: FitResult, fit_b: FitResult,
                          significance: float = SIGNIFICANCE) -> LrtResult:
    """Normalised (Vuong) log-likelihood ratio of two non-nested fits.

    R = sum(l_a - l_b) / (sigma * sqrt(n)), two-sided p from the normal tail.
    """
    if fit_a.xmin != fit_b.xmin:
        raise ValueError("both fits must use the same xmin")
    diff = pointwise_loglik(fit_a, data) - pointwise_loglik(fit_b, data)
    n = len(diff)
    total = float(diff.sum())
    if np.all(diff == 0):
        return LrtResult(0.0, 1.0, None, 0.0)
    sigma = diff.std()
    if sigma == 0 or n < 2:
        raise ValueError("indistinguishable: pointwise log-likelihood differences have zero variance")
    R = total / (sigma * math.sqrt(n))
    p = float(special.erfc(abs(R) / math.sqrt(2)))
    preferred = None
    if p < significance:
        preferred = fit_a.family if R > 0 else fit_b.family
    return LrtResult(float(R), p, preferred, total)


def powerlaw_ks_distance(x, alpha, xmin) -> float:
    x = np.sort(_tail(x, xmin))
    vals, counts = np.unique(x, return_counts=True)
    emp_ccdf = 1.0 - np.concatenate([[0], np.cumsum(counts)[:-1]]) / len(x)
    model_ccdf = special.zeta(alpha, vals) / special.zeta(alpha, xmin)
    return float(np.max(np.abs(emp_ccdf - model_ccdf)))


def scan_xmin(data, min_tail: int = 10) -> tuple[int, FitResult]:
    """Choose xmin minimising the KS distance of the power-law fit to the tail."""
    x = np.asarray(data)
    best = None
    for xm in np.unique(x):
        if (x >= xm).sum() < min_tail:
            break
        try:
            fit = fit_powerlaw(x, int(xm))
        except FitError:
            continue
        d = powerlaw_ks_distance(x, fit.params["alpha"], int(xm))
        if best is None or d < best[0]:
            best = (d, int(xm), fit)
    if best is None:
        raise FitError("no admissible xmin")
    best[2].diagnostics["ks_distance"] = best[0]
    return best[1], best[2]


def compare_tail_models(data, xmin: int = 1) -> dict:
    """Fit all three families and run the pairwise likelihood-ratio tests."""
    fits, errors = {}, {}
    for fam, fitter in FITTERS.items():
        try:
            fits[fam] = fitter(data, xmin)
        except FitError as exc:
            errors[fam] = str(exc)
    tests = {}
    for a, b in [("powerlaw", "exponential"), ("truncated_powerlaw", "exponential"),
                 ("truncated_powerlaw", "powerlaw")]:
        if a in fits and b in fits:
            try:
                tests[f"{a}_vs_{b}"] = likelihood_ratio_test(data, fits[a], fits[b]).to_dict()
            except ValueError as exc:
                tests[f"{a}_vs_{b}"] = {"error": str(exc)}
    return {"xmin": int(xmin), "fits": {k: v.to_dict() for k, v in fits.items()},
            "errors": errors, "tests": tests}


# --- Wilcoxon rank-sum ----------------------------------------------------

EXACT_MAX_N = 12


def _rank_sum_counts(n, N) -> np.ndarray:
    """Number of size-n subsets of {1..N} per rank sum (index = sum)."""
    max_sum = n * (2 * N - n + 1) // 2
    table = np.zeros((n + 1, max_sum + 1), dtype=object)
    table[0, 0] = 1
    for r in range(1, N + 1):
        for k in range(min(r, n), 0, -1):
            table[k, r:] = table[k, r:] + table[k - 1, :max_sum + 1 - r]
    return table[n]


def wilcoxon_rank_sum(x, y, method: str = "auto") -> tuple[float, float]:
    """Two-sided rank-sum test; returns ``(W, p)`` with W the midrank sum of ``x``.

    ``auto`` uses the exact null distribution for tie-free samples with
    ``len(x) + len(y) <= 12`` and the tie- and continuity-corrected normal
    approximation otherwise.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("both samples must be non-empty")
    n, m = len(x), len(y)
    N = n + m
    from scipy.stats import rankdata
    ranks = rankdata(np.concatenate([x, y]))
    W = float(ranks[:n].sum())
    _, tie_counts = np.unique(ranks, return_counts=True)
    has_ties = np.any(tie_counts > 1)
    if method == "auto":
        method = "exact" if (N <= EXACT_MAX_N and not has_ties) else "normal"
    if method == "exact":
        if has_ties:
            raise ValueError("exact test requires tie-free samples")
        counts = _rank_sum_counts(n, N)
        total = counts.sum()
        w = int(round(W))
        lower = counts[:w + 1].sum() / total
        upper = counts[w:].sum() / total
        return W, float(min(1.0, 2 * min(lower, upper)))
    if method != "normal":
        raise ValueError(f"unknown method {method!r}")
    mu = n * (N + 1) / 2.0
    tie_term = (tie_counts ** 3 - tie_counts).sum() / (N * (N - 1)) if N > 1 else 0.0
    var = n * m / 12.0 * ((N + 1) - tie_term)
    if var <= 0:
        return W, 1.0
    z = max(abs(W - mu) - 0.5, 0.0) / math.sqrt(var)
    return W, float(min(1.0, special.erfc(z / math.sqrt(2))))
