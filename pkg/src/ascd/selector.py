"""Coordinate selection rules.

Uniform and steepest selection are one-liners.  The approximate-steepest
machinery maintains, for every coordinate, an estimate of the smooth partial
gradient together with a certified error radius.  From those it derives
safe upper/lower bounds on the gradient magnitudes, builds the smallest
"active set" of coordinates that provably contains the steepest one, and
picks among the best lower bounds.  Composite variants score coordinates by
the steepest directional derivative (gs-s), the longest model step (gs-r)
or the best model decrease (gs-q) instead of the raw gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import Regularizer, model_value

__all__ = [
    "GradientEstimate",
    "Bounds",
    "ActiveSet",
    "GsqBounds",
    "compute_bounds",
    "active_set",
    "select_ucd",
    "select_scd",
    "select_ascd",
    "heuristic_active_set",
    "update_estimates",
    "gss_score_interval",
    "gsr_bounds",
    "gsq_bounds",
    "gsq_active_set",
    "select_gsq",
]


@dataclass
class GradientEstimate:
    """Tracked gradient vector with per-coordinate error radii.

    Whenever the radii are sound, the true smooth partial gradient of
    coordinate i lies in ``[g[i] - r[i], g[i] + r[i]]``.  Radii may be
    ``+inf`` (nothing is known, e.g. before the first refresh).
    """

    g: np.ndarray
    r: np.ndarray

    @classmethod
    def uninformed(cls, n: int) -> "GradientEstimate":
        return cls(g=np.zeros(n), r=np.full(n, np.inf))

    @classmethod
    def exact(cls, gradient: np.ndarray) -> "GradientEstimate":
        g = np.array(gradient, dtype=np.float64)
        return cls(g=g, r=np.zeros_like(g))


@dataclass
class Bounds:
    """Per-coordinate bounds ``lower <= |grad_i| <= upper``."""

    upper: np.ndarray
    lower: np.ndarray


@dataclass
class ActiveSet:
    """Index set that provably contains the best coordinate.

    ``avg_score`` is the exclusion threshold av(I): every excluded
    coordinate was certified strictly worse than this in-set average.
    """

    indices: np.ndarray
    avg_score: float

    def __len__(self) -> int:
        return int(self.indices.size)


def compute_bounds(estimate: GradientEstimate) -> Bounds:
    """Interval arithmetic on ``g +- r``.

    The upper bound is the larger endpoint magnitude; the lower bound is 0
    when the interval straddles zero and the smaller endpoint magnitude
    otherwise.  Radius ``+inf`` yields ``(upper, lower) = (inf, 0)``.
    """
    g, r = estimate.g, estimate.r
    lo_end, hi_end = g - r, g + r
    upper = np.maximum(np.abs(lo_end), np.abs(hi_end))
    lower = np.where((lo_end <= 0.0) & (hi_end >= 0.0), 0.0,
                     np.minimum(np.abs(lo_end), np.abs(hi_end)))
    return Bounds(upper=upper, lower=lower)


def _smallest_valid_prefix(score: np.ndarray, exclude_val: np.ndarray,
                           descending: bool) -> tuple[np.ndarray, float]:
    """Shared prefix construction for the active sets.

    Sort by ``score`` (descending for gradient bounds, ascending for model
    values), then return the shortest prefix I such that every coordinate
    outside it satisfies the strict exclusion test against av(I), the mean
    of ``score`` over I.  Exclusion means ``exclude_val[j] < av(I)`` in the
    descending case and ``> av(I)`` ascending.  Falls back to all of [n].
    """
    n = score.size
    sign = -1.0 if descending else 1.0
    order = np.argsort(sign * score, kind="stable")
    av = np.cumsum(score[order]) / np.arange(1, n + 1)
    # worst excluded value for every prefix size: max over the tail when
    # excluding needs "< av", min over the tail when it needs "> av"
    tail = np.empty(n)
    rev = exclude_val[order][::-1]
    if descending:
        tail[:n - 1] = np.maximum.accumulate(rev)[::-1][1:]
        tail[n - 1] = -np.inf
        valid = tail < av
    else:
        tail[:n - 1] = np.minimum.accumulate(rev)[::-1][1:]
        tail[n - 1] = np.inf
        valid = tail > av
    k = int(np.argmax(valid)) + 1 if valid.any() else n
    return np.sort(order[:k]), float(av[k - 1])


def active_set(bounds: Bounds) -> ActiveSet:
    """Smallest prefix (in squared-lower-bound descending order) whose
    average squared lower bound strictly dominates every excluded
    coordinate's squared upper bound.  ``O(n log n)`` by sorting.
    """
    idx, av = _smallest_valid_prefix(bounds.lower ** 2, bounds.upper ** 2,
                                     descending=True)
    return ActiveSet(indices=idx, avg_score=av)


def select_ucd(n: int, rng: np.random.Generator) -> int:
    """Uniform draw over the n coordinates."""
    if n < 1:
        raise ValueError("need at least one coordinate")
    return int(rng.integers(n))


def select_scd(gradient: np.ndarray) -> int:
    """Steepest coordinate: argmax of |gradient|, lowest index on ties."""
    if gradient.size < 1:
        raise ValueError("need at least one coordinate")
    return int(np.argmax(np.abs(gradient)))


def select_ascd(bounds: Bounds, aset: ActiveSet,
                rng: np.random.Generator) -> int:
    """Uniform draw among the maximisers of the lower bound over the set."""
    sub = bounds.lower[aset.indices]
    cands = aset.indices[sub == sub.max()]
    return int(cands[rng.integers(cands.size)])


def heuristic_active_set(variant: str, bounds: Bounds) -> ActiveSet:
    """O(n) replacements for the sorted active set.

    ``u-ascd`` keeps the upper-bound argmax, ``l-ascd`` the lower-bound
    argmax, and ``a-ascd`` every coordinate whose upper bound reaches the
    best lower bound.  Only a-ascd is guaranteed to contain the true
    steepest coordinate.
    """
    u, low = bounds.upper, bounds.lower
    if variant == "u-ascd":
        idx = np.flatnonzero(u == u.max())
    elif variant == "l-ascd":
        idx = np.flatnonzero(low == low.max())
    elif variant == "a-ascd":
        idx = np.flatnonzero(u >= low.max())
    else:
        raise ValueError(f"unknown heuristic variant {variant!r}")
    return ActiveSet(indices=idx, avg_score=float(np.mean(low[idx] ** 2)))


def update_estimates(estimate: GradientEstimate, i_t: int, gamma: float,
                     row_estimate: np.ndarray, row_error: np.ndarray,
                     active_output: tuple[float, float]) -> GradientEstimate:
    """One bookkeeping step after moving coordinate ``i_t`` by ``gamma``.

    Passive coordinates get ``g += gamma * g_ij`` and ``r += |gamma| *
    delta_ij``; the active coordinate is overwritten with the update rule's
    own output.  A zero step leaves the passive entries untouched (this
    also avoids 0 * inf).  Mutates and returns ``estimate``.
    """
    if not np.isfinite(gamma):
        raise ValueError("non-finite step")
    if gamma != 0.0:
        old_g, old_r = estimate.g[i_t], estimate.r[i_t]
        estimate.g += gamma * row_estimate
        estimate.r += abs(gamma) * row_error
        estimate.g[i_t], estimate.r[i_t] = old_g, old_r
    g_new, r_new = active_output
    estimate.g[i_t] = g_new
    estimate.r[i_t] = r_new
    return estimate


# ---------------------------------------------------------------------------
# composite scores
# ---------------------------------------------------------------------------


def _abs_interval(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Range of |t| for t in [lo, hi]."""
    straddle = (lo <= 0.0) & (hi >= 0.0)
    amin = np.where(straddle, 0.0, np.minimum(np.abs(lo), np.abs(hi)))
    amax = np.maximum(np.abs(lo), np.abs(hi))
    return amin, amax


def gss_score_interval(estimate: GradientEstimate, x: np.ndarray,
                       reg: Regularizer) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate interval for the steepest-direction score.

    For an l1 penalty the exact score at gradient value g is
    ``max(|g| - lam, 0)`` when ``x_i = 0`` and ``|g + lam * sign(x_i)|``
    otherwise; with the gradient only known to lie in ``g +- r`` the score
    is bracketed by evaluating the monotone pieces.  ``lam = 0`` reduces to
    the plain gradient magnitude bounds.
    """
    if reg.kind not in ("none", "l1"):
        raise ValueError("gs-s scores support only the l1 penalty")
    lam = reg.lam
    g, r = estimate.g, estimate.r
    lo_end, hi_end = g - r, g + r

    # x_i != 0: |g + lam * s| over the shifted interval
    shift = lam * np.sign(x)
    lo_nz, hi_nz = _abs_interval(lo_end + shift, hi_end + shift)

    # x_i == 0: max(|g| - lam, 0); zero iff the interval meets [-lam, lam]
    amin, amax = _abs_interval(lo_end, hi_end)
    lo_z = np.maximum(amin - lam, 0.0)
    hi_z = np.maximum(amax - lam, 0.0)

    at_zero = x == 0.0
    return (np.where(at_zero, lo_z, lo_nz), np.where(at_zero, hi_z, hi_nz))


def gsr_bounds(estimate: GradientEstimate, x: np.ndarray, lipschitz: float,
               reg: Regularizer) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate interval for the model step length |y*|.

    The model minimiser is nonincreasing in the gradient value, so over
    ``g +- r`` it sweeps the segment between the minimisers at the two
    endpoints; the |y| range over that segment is returned.
    """
    g, r = estimate.g, estimate.r
    with np.errstate(invalid="ignore"):
        y_hi = reg.model_argmin(x, g - r, lipschitz)
        y_lo = reg.model_argmin(x, g + r, lipschitz)
    # infinite radii: the segment is the whole line
    unknown = ~np.isfinite(r)
    if unknown.any():
        y_lo = np.where(unknown, -np.inf, y_lo)
        y_hi = np.where(unknown, np.inf, y_hi)
    return _abs_interval(y_lo, y_hi)


@dataclass
class GsqBounds:
    """Bounds on the best model decrease ``min_y V_i``.

    ``v <= min_y V_i(x, y, grad_i) <= w`` whenever the gradient estimate is
    sound; ``u_star`` and ``l_star`` are the model minimisers at the signed
    interval endpoints.
    """

    v: np.ndarray
    w: np.ndarray
    u_star: np.ndarray
    l_star: np.ndarray


def gsq_bounds(estimate: GradientEstimate, x: np.ndarray, lipschitz: float,
               reg: Regularizer) -> GsqBounds:
    """Sandwich the best model decrease using the signed gradient interval.

    Evaluates the model at the minimisers for the two endpoint slopes; the
    lower bound is the better of the two values, the upper bound corrects
    each endpoint value by the worst-case slope mismatch and keeps the
    ``y = 0`` fallback ``psi(x_i)``.  Coordinates with infinite radius get
    the vacuous ``(-inf, psi(x_i))``.
    """
    if reg.kind not in ("none", "l1", "l2"):
        raise ValueError(f"unsupported regularizer {reg.kind!r}")
    g, r = estimate.g, estimate.r
    hi = g + r
    lo = g - r
    finite = np.isfinite(r)
    hi_f = np.where(finite, hi, 0.0)
    lo_f = np.where(finite, lo, 0.0)

    u_star = reg.model_argmin(x, hi_f, lipschitz)
    l_star = reg.model_argmin(x, lo_f, lipschitz)
    val_u = model_value(x, u_star, hi_f, lipschitz, reg)
    val_l = model_value(x, l_star, lo_f, lipschitz, reg)
    omega_u = val_u + np.maximum(0.0, u_star * (lo_f - hi_f))
    omega_l = val_l + np.maximum(0.0, l_star * (hi_f - lo_f))
    psi0 = reg.psi(x)

    v = np.where(finite, np.minimum(val_u, val_l), -np.inf)
    w = np.where(finite, np.minimum(np.minimum(omega_u, omega_l), psi0), psi0)
    u_star = np.where(finite, u_star, -np.inf)
    l_star = np.where(finite, l_star, np.inf)
    return GsqBounds(v=v, w=w, u_star=u_star, l_star=l_star)


def gsq_active_set(gsq: GsqBounds) -> ActiveSet:
    """Smallest prefix (in upper-bound ascending order) whose average upper
    bound strictly undercuts every excluded coordinate's lower bound.
    Contains the exact best-model-decrease coordinate.
    """
    idx, av = _smallest_valid_prefix(gsq.w, gsq.v, descending=False)
    return ActiveSet(indices=idx, avg_score=av)


def select_gsq(gsq: GsqBounds, aset: ActiveSet,
               rng: np.random.Generator) -> int:
    """Uniform draw among the minimisers of the model upper bound."""
    sub = gsq.w[aset.indices]
    cands = aset.indices[sub == sub.min()]
    return int(cands[rng.integers(cands.size)])
