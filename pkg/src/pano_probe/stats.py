"""Nonparametric test machinery: one-sided Wilcoxon signed-rank, Shapiro-Wilk
normality (Royston's AS R94 approximation), quartiles and the Tukey upper-fence
stability bound.

Everything here is pure and deterministic; all intermediate arithmetic is
64-bit float regardless of input dtype, because rank tests downstream are
sensitive to ties introduced by lower precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSampleError, ValidationError

__all__ = [
    "TestResult",
    "StabilityBound",
    "wilcoxon_one_sided",
    "superiority_test",
    "stability_test",
    "shapiro_wilk",
    "quartiles",
    "stability_bound",
]

# Exact enumeration of the signed-rank distribution is feasible below this n;
# the paper-scale n = 2386 is firmly asymptotic.
EXACT_CUTOFF = 25


@dataclass(frozen=True)
class TestResult:
    """Outcome of a single hypothesis test.

    statistic is the W+ rank sum for the signed-rank test and the W statistic
    for Shapiro-Wilk.  p_value is the raw one-sided p, never display-clamped
    here (rendering applies its own clamp).
    """

    statistic: float
    p_value: float
    n_effective: int
    alternative: str  # "greater" | "less"
    method: str  # "exact" | "normal_approx"

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n_effective": self.n_effective,
            "alternative": self.alternative,
            "method": self.method,
        }


@dataclass(frozen=True)
class StabilityBound:
    """Tukey upper fence of flip-induced absolute score differences,
    together with the quartile evidence it was derived from."""

    beta: float
    q1: float
    q3: float
    iqr: float
    sample_size: int

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "q1": self.q1,
            "q3": self.q3,
            "iqr": self.iqr,
            "sample_size": self.sample_size,
        }


def _norm_sf(z: float) -> float:
    """Upper tail of the standard normal, accurate far into the tail."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _rank_average(a: np.ndarray) -> np.ndarray:
    """Ranks 1..n with average ranks assigned to tied groups."""
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(a.size, dtype=float)
    sorted_a = a[order]
    i = 0
    while i < a.size:
        j = i
        while j + 1 < a.size and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        # positions i..j (0-based) share the average of ranks i+1..j+1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _tie_group_sizes(a: np.ndarray) -> list[int]:
    _, counts = np.unique(a, return_counts=True)
    return [int(c) for c in counts if c > 1]


def _signed_rank_counts(n: int) -> np.ndarray:
    """Distribution of the positive rank sum under H0 for tie-free ranks 1..n.

    Returns integer counts over rank sums 0..n(n+1)/2; each of the 2^n sign
    assignments contributes one count (subset-sum convolution).
    """
    total = n * (n + 1) // 2
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in range(1, n + 1):
        counts[r:] += counts[:-r].copy()
    return counts


def _exact_p(w_plus: float, n: int, alternative: str) -> float:
    counts = _signed_rank_counts(n)
    w = int(round(w_plus))
    if alternative == "greater":
        tail = int(counts[w:].sum())
    else:
        tail = int(counts[: w + 1].sum())
    return tail / 2.0**n


def _normal_approx_p(
    w_plus: float, n: int, tie_sizes: list[int], alternative: str
) -> float:
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    # tie-corrected variance; clamping scores at zero can create tied |d|
    var -= sum(t**3 - t for t in tie_sizes) / 48.0
    sd = math.sqrt(var)
    if alternative == "greater":
        z = (w_plus - mean - 0.5) / sd  # continuity correction
        return _norm_sf(z)
    z = (w_plus - mean + 0.5) / sd
    return _norm_cdf(z)


def wilcoxon_one_sided(
    values, alternative: str, method: str = "auto"
) -> TestResult:
    """One-sided Wilcoxon signed-rank test of the median of `values` against 0.

    Zero differences are discarded before ranking (classical convention), the
    remaining absolute values are ranked with average ranks for ties, and the
    statistic is the sum of ranks of positive values (W+).  The exact null
    distribution is enumerated when the effective sample is small and tie-free;
    otherwise a tie-corrected normal approximation with continuity correction
    is used.

    alternative "greater" tests median > 0, "less" tests median < 0.
    """
    if alternative not in ("greater", "less"):
        raise ValidationError(f"unknown alternative {alternative!r}")
    if method not in ("auto", "exact", "normal_approx"):
        raise ValidationError(f"unknown method {method!r}")
    d = np.asarray(values, dtype=float)
    if d.ndim != 1 or d.size == 0:
        raise ValidationError("values must be a non-empty 1-d sequence")
    d = d[d != 0.0]
    if d.size == 0:
        raise DegenerateSampleError("all differences are zero")
    n = int(d.size)
    abs_d = np.abs(d)
    ranks = _rank_average(abs_d)
    w_plus = float(ranks[d > 0].sum())
    tie_sizes = _tie_group_sizes(abs_d)

    if method == "auto":
        method = "exact" if (n <= EXACT_CUTOFF and not tie_sizes) else "normal_approx"
    if method == "exact":
        if tie_sizes:
            raise ValidationError("exact method requires tie-free absolute values")
        if n > EXACT_CUTOFF:
            raise ValidationError(f"exact method limited to n <= {EXACT_CUTOFF}")
        p = _exact_p(w_plus, n, alternative)
    else:
        p = _normal_approx_p(w_plus, n, tie_sizes, alternative)
    p = min(max(p, 0.0), 1.0)
    return TestResult(w_plus, p, n, alternative, method)


def superiority_test(original, generic, alpha: float):
    """Paired one-sided test that original scores exceed generic scores.

    Runs the signed-rank test on d_i = original_i - generic_i with
    alternative "greater".  Returns (TestResult, reject) where reject is
    True iff p < alpha, i.e. the no-benefit null is rejected.
    """
    o = np.asarray(original, dtype=float)
    g = np.asarray(generic, dtype=float)
    if o.shape != g.shape:
        raise ValidationError(
            f"paired score lists differ in length: {o.shape} vs {g.shape}"
        )
    result = wilcoxon_one_sided(o - g, "greater")
    return result, bool(result.p_value < alpha)


def stability_test(original, shifted, bound: StabilityBound, alpha: float):
    """Paired one-sided test that |original - shifted| stays below the bound.

    Forms x_i = |original_i - shifted_i| - beta and runs the signed-rank test
    with alternative "less".  Returns (TestResult, reject); rejection of the
    non-stability null means the model is stable at this shift.
    """
    o = np.asarray(original, dtype=float)
    s = np.asarray(shifted, dtype=float)
    if o.shape != s.shape:
        raise ValidationError(
            f"paired score lists differ in length: {o.shape} vs {s.shape}"
        )
    if not bound.beta > 0:
        raise ValidationError(f"stability bound must be positive, got {bound.beta}")
    result = wilcoxon_one_sided(np.abs(o - s) - bound.beta, "less")
    return result, bool(result.p_value < alpha)


# ---------------------------------------------------------------------------
# Shapiro-Wilk (Royston AS R94 approximation)
# ---------------------------------------------------------------------------

# Polynomial coefficients from Royston's algorithm, constant term first.
_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)


def _poly(coefs, x: float) -> float:
    return sum(c * x**k for k, c in enumerate(coefs))


def _norm_ppf(p: np.ndarray) -> np.ndarray:
    """Inverse standard normal CDF (Acklam's rational approximation refined
    by one Halley step, giving near machine precision)."""
    a = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
         1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
    b = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
         6.680131188771972e01, -1.328068155288572e01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
         -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
         3.754408661907416e00)
    p = np.asarray(p, dtype=float)
    x = np.empty_like(p)
    plow, phigh = 0.02425, 1 - 0.02425

    lo = p < plow
    hi = p > phigh
    mid = ~(lo | hi)
    if lo.any():
        q = np.sqrt(-2.0 * np.log(p[lo]))
        x[lo] = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    if hi.any():
        q = np.sqrt(-2.0 * np.log(1.0 - p[hi]))
        x[hi] = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        x[mid] = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
            ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        )
    # one Halley refinement against the exact CDF
    e = 0.5 * np.array([math.erfc(-v / math.sqrt(2.0)) for v in x.ravel()]).reshape(x.shape) - p
    u = e * math.sqrt(2.0 * math.pi) * np.exp(x * x / 2.0)
    x = x - u / (1.0 + x * u / 2.0)
    return x


def _shapiro_weights(n: int) -> np.ndarray:
    """Approximate normal-scores coefficients a_i with sum(a^2) == 1."""
    if n == 3:
        return np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    m = _norm_ppf((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    mssq = float((m * m).sum())
    c = m / math.sqrt(mssq)
    u = 1.0 / math.sqrt(n)
    a_n = (c[-1] + 0.221157 * u - 0.147981 * u**2 - 2.071190 * u**3
           + 4.434685 * u**4 - 2.706056 * u**5)
    if n > 5:
        a_n1 = (c[-2] + 0.042981 * u - 0.293762 * u**2 - 1.752461 * u**3
                + 5.682633 * u**4 - 3.582633 * u**5)
        phi = (mssq - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
            1.0 - 2.0 * a_n**2 - 2.0 * a_n1**2
        )
        a = m / math.sqrt(phi)
        a[-1], a[0] = a_n, -a_n
        a[-2], a[1] = a_n1, -a_n1
    else:
        phi = (mssq - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n**2)
        a = m / math.sqrt(phi)
        a[-1], a[0] = a_n, -a_n
    return a


def shapiro_wilk(values) -> TestResult:
    """Shapiro-Wilk normality test via Royston's AS R94 approximation.

    Valid for 3 <= n <= 5000.  The W statistic correlates the order
    statistics with expected normal scores; the p-value comes from the
    algorithm's sample-size-dependent transformation of W to a standard
    normal deviate (exact arcsine form at n == 3).
    """
    x = np.sort(np.asarray(values, dtype=float))
    n = int(x.size)
    if n < 3 or n > 5000:
        raise ValidationError(f"sample size {n} outside [3, 5000]")
    if x[-1] - x[0] == 0.0:
        raise ValidationError("constant sample has zero variance")

    a = _shapiro_weights(n)
    centered = x - x.mean()
    w = float((a * x).sum() ** 2 / (centered * centered).sum())
    w = min(w, 1.0)

    if n == 3:
        # exact lower-tail probability in arcsine form
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return TestResult(w, min(max(p, 0.0), 1.0), n, "less", "exact")

    if w == 1.0:
        return TestResult(w, 1.0, n, "less", "normal_approx")
    y = math.log(1.0 - w)
    if n <= 11:
        gamma = -2.273 + 0.459 * n
        if y >= gamma:
            return TestResult(w, 0.0, n, "less", "normal_approx")
        y = -math.log(gamma - y)
        mu = _poly(_C3, n)
        sigma = math.exp(_poly(_C4, n))
    else:
        ln_n = math.log(n)
        mu = _poly(_C5, ln_n)
        sigma = math.exp(_poly(_C6, ln_n))
    p = _norm_sf((y - mu) / sigma)
    return TestResult(w, min(max(p, 0.0), 1.0), n, "less", "normal_approx")


# ---------------------------------------------------------------------------
# Quartiles and the stability bound
# ---------------------------------------------------------------------------


def quartiles(values) -> tuple[float, float]:
    """(Q1, Q3) by linear interpolation between closest ranks (position
    p*(n-1)), the rule declared in all output metadata."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValidationError("quartiles of an empty sample")
    q1, q3 = np.percentile(v, [25.0, 75.0])
    return float(q1), float(q3)


def stability_bound(flip_abs_diffs) -> StabilityBound:
    """Tukey upper fence beta = Q3 + 1.5 * IQR of flip score differences."""
    v = np.asarray(flip_abs_diffs, dtype=float)
    q1, q3 = quartiles(v)
    iqr = q3 - q1
    beta = q3 + 1.5 * iqr
    return StabilityBound(beta=beta, q1=q1, q3=q3, iqr=iqr, sample_size=int(v.size))
