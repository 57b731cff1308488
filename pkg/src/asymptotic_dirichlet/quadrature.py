"""Adaptive quadrature in log space.

The improper integrals this package decides (tail integrals of
``psi**(1-m)``, nested growth integrals, barrier offsets) have integrands
spanning hundreds of orders of magnitude: ``exp(r**3)`` overflows float64
near ``r = 9``.  Every routine here therefore consumes *log-integrands*
(callables returning ``log f``, vectorized over ndarrays, ``-inf`` allowed)
and accumulates panel values with log-sum-exp.

Panels use the embedded 7-point Gauss / 15-point Kronrod pair; the local
error estimate is the scaled difference of the two rules.  Integrands with
a steep exponential layer at one interval end get initial breakpoints
spaced by the local e-folding length, so the adaptive refinement is not
spent discovering the layer.  Improper ranges are truncated at a radius
that doubles until the last doubling changes the running value by less
than half the requested tolerance twice in a row (Cauchy criterion); eight
consecutive non-decreasing increments are declared divergence.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DivergentIntegralError, QuadratureError

__all__ = [
    "QuadratureResult",
    "quad_log",
    "improper_log",
    "layer_breakpoints",
    "cumulative_log_integral",
    "TailIntegral",
]

# 7-15 Gauss-Kronrod pair on [-1, 1]; Kronrod nodes (positive half) and
# weights, with the embedded Gauss rule living on every second node.
_XK_HALF = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WK_HALF = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG_HALF = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_XK = np.concatenate([-_XK_HALF[:-1], _XK_HALF[::-1]])
_WK = np.concatenate([_WK_HALF[:-1], _WK_HALF[::-1]])
_WG = np.zeros_like(_WK)
_WG[1:-1:2] = np.concatenate([_WG_HALF[:-1], _WG_HALF[::-1]])

_EFOLDS_PER_PANEL = 3.0
_LAYER_EFOLDS = 45.0


@dataclass
class QuadratureResult:
    """Outcome of an improper integral evaluation.

    ``value`` may underflow to 0.0 for strongly decaying tails; ``log_value``
    keeps the usable magnitude.  ``converged`` implies the error estimate is
    below the tolerance that was requested.
    """

    value: float
    abs_error_estimate: float
    converged: bool
    truncation_radius: float
    divergent: bool = False
    log_value: float = -np.inf


def _panel(logf, a, b):
    """Scaled K15/G7 evaluation of ``exp(logf)`` on [a, b].

    Returns ``(log_integral, log_error)``.
    """
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid + half * _XK
    g = np.asarray(logf(x), dtype=float)
    if np.any(np.isnan(g)) or np.any(g == np.inf):
        raise QuadratureError(
            f"non-finite integrand sample on [{a!r}, {b!r}]"
        )
    s = np.max(g)
    if s == -np.inf:
        return -np.inf, -np.inf
    w = np.exp(g - s)
    fk = float(np.dot(_WK, w))
    fg = float(np.dot(_WG, w))
    log_half = np.log(half)
    log_val = s + np.log(fk) + log_half
    diff = abs(fk - fg)
    log_err = (s + np.log(diff) + log_half) if diff > 0.0 else -np.inf
    return log_val, log_err


def layer_breakpoints(a, b, rate_left=0.0, rate_right=0.0):
    """Initial breakpoints resolving an exponential layer at either end.

    ``rate_left`` is the e-folding rate of decay away from ``a``;
    ``rate_right`` the rate of growth toward ``b``.  Returns None when the
    integrand has no layer the plain adaptive splitting would not find
    cheaply.  Spacing starts at a few e-folds per panel and doubles once
    the layer (several dozen e-folds) is covered; widths are floored at a
    multiple of the local ulp so panels never degenerate.
    """
    width = b - a
    pts = set()
    for rate, anchor, sign in ((rate_left, a, 1.0), (rate_right, b, -1.0)):
        if rate <= 0 or rate * width <= 2.0 * _EFOLDS_PER_PANEL:
            continue
        delta = _EFOLDS_PER_PANEL / rate
        delta = max(delta, 8.0 * np.spacing(abs(anchor) + delta))
        x = 0.0
        n_const = int(np.ceil(_LAYER_EFOLDS / _EFOLDS_PER_PANEL))
        for _ in range(n_const):
            x += delta
            if x >= width:
                break
            pts.add(anchor + sign * x)
        while x < width and len(pts) < 96:
            delta *= 2.0
            x += delta
            if x >= width:
                break
            pts.add(anchor + sign * x)
    if not pts:
        return None
    return np.array(sorted(pts))


def quad_log(logf, a, b, rel_tol=1e-11, max_panels=1024, points=None):
    """Adaptive panel integration of ``exp(logf)`` over [a, b] in log space.

    Returns ``(log_value, log_error)``.  ``points`` seeds the panel set with
    interior breakpoints (used for integrands with known steep layers).
    """
    if not b > a:
        return -np.inf, -np.inf
    if points is None:
        # a single wide panel can fool the embedded error estimate on
        # smooth integrands; always start from a modest subdivision
        edges = list(np.linspace(a, b, 5))
    else:
        interior = [p for p in np.atleast_1d(points) if a < p < b]
        edges = [a] + sorted(interior) + [b]
    heap = []
    counter = 0
    log_total = -np.inf
    log_err = -np.inf
    for qa, qb in zip(edges[:-1], edges[1:]):
        lv, le = _panel(logf, qa, qb)
        heapq.heappush(heap, (-le, counter, qa, qb, lv, le))
        counter += 1
        log_total = np.logaddexp(log_total, lv)
        log_err = np.logaddexp(log_err, le)
    # refinement cannot push the error below the roundoff of the log
    # values themselves: |logf| * eps is an absolute error on logf, hence
    # a relative error on the integrand
    stalled = 0
    best_err = log_err
    while len(heap) < max_panels:
        noise_floor = log_total + np.log(
            max(rel_tol, 8.0 * np.spacing(max(abs(log_total), 1.0))))
        if log_err == -np.inf or log_err <= noise_floor or stalled >= 8:
            break
        neg_err, _, pa, pb, pv, pe = heapq.heappop(heap)
        if pe == -np.inf:
            heapq.heappush(heap, (neg_err, 0, pa, pb, pv, pe))
            break
        pm = 0.5 * (pa + pb)
        if not (pa < pm < pb):
            heapq.heappush(heap, (neg_err, 0, pa, pb, pv, pe))
            break
        for qa, qb in ((pa, pm), (pm, pb)):
            lv, le = _panel(logf, qa, qb)
            heapq.heappush(heap, (-le, counter, qa, qb, lv, le))
            counter += 1
        # recompute accumulated value/error from the heap contents
        log_total = logsumexp([p[4] for p in heap])
        log_err = logsumexp([p[5] for p in heap])
        if log_err < best_err - 0.1:
            best_err = log_err
            stalled = 0
        else:
            stalled += 1
    return float(log_total), float(log_err)


@dataclass
class _Expansion:
    """Doubling expansion of an integral over [start, inf)."""

    start: float
    anchors: list          # truncation radii, increasing
    log_increments: list   # log integral over each [anchors[i], anchors[i+1]]
    log_errors: list
    converged: bool
    divergent: bool

    @property
    def radius(self):
        return self.anchors[-1]

    def log_total(self):
        if not self.log_increments:
            return -np.inf
        return float(logsumexp(self.log_increments))

    def log_suffix(self):
        """log of the integral from each anchor to the truncation radius."""
        n = len(self.log_increments)
        out = np.full(n + 1, -np.inf)
        for i in range(n - 1, -1, -1):
            out[i] = np.logaddexp(out[i + 1], self.log_increments[i])
        return out


_RADIUS_CAP = 1e300


def improper_log(logf, start, tol, *, rel_tol=1e-11, first_step=None,
                 max_doublings=1024, cauchy_passes=2, diverge_run=8,
                 min_radius=None, max_panels=1024, points_fn=None):
    """Expand ``integral of exp(logf) over [start, inf)`` by radius doubling.

    The truncation radius doubles until the increment added by the last
    doubling stays below ``tol / 2`` for ``cauchy_passes`` consecutive
    doublings.  ``diverge_run`` consecutive non-decreasing increments flag
    divergence.  ``min_radius`` forces the expansion to continue (cheaply)
    beyond convergence, which callers use to anchor later partial lookups.
    ``points_fn(a, b)`` may seed layer breakpoints for each segment.

    Integrands with logarithmically slow tails can exhaust double
    precision before meeting the Cauchy criterion; the expansion then
    stops at the largest representable radius with both flags down
    (finite so far, undecided at this tolerance).
    """
    if first_step is None:
        r_next = max(2.0 * start, start + 1.0)
    else:
        r_next = start + first_step
    anchors = [start]
    log_incs = []
    log_errs = []
    log_half_tol = np.log(tol / 2.0)
    cauchy = 0
    nondecreasing = 0
    converged = False
    divergent = False
    for _ in range(max_doublings):
        a = anchors[-1]
        b = r_next
        pts = points_fn(a, b) if points_fn is not None else None
        lv, le = quad_log(logf, a, b, rel_tol=rel_tol, max_panels=max_panels,
                          points=pts)
        anchors.append(b)
        if log_incs and lv >= log_incs[-1] - 1e-12:
            nondecreasing += 1
        else:
            nondecreasing = 0
        log_incs.append(lv)
        log_errs.append(le)
        if lv < log_half_tol:
            cauchy += 1
        else:
            cauchy = 0
        if not converged and cauchy >= cauchy_passes:
            converged = True
        if nondecreasing >= diverge_run:
            divergent = True
            converged = False
            break
        if converged and (min_radius is None or b >= min_radius):
            break
        if b >= _RADIUS_CAP:
            break
        r_next = 2.0 * b
    return _Expansion(start, anchors, log_incs, log_errs, converged, divergent)


def _expansion_result(exp_: _Expansion) -> QuadratureResult:
    log_total = exp_.log_total()
    if exp_.divergent:
        return QuadratureResult(
            value=np.inf, abs_error_estimate=np.inf, converged=False,
            truncation_radius=exp_.radius, divergent=True, log_value=np.inf,
        )
    panel_err = logsumexp(exp_.log_errors) if exp_.log_errors else -np.inf
    trunc_err = exp_.log_increments[-1] if exp_.log_increments else -np.inf
    err = float(np.exp(np.logaddexp(panel_err, trunc_err)))
    return QuadratureResult(
        value=float(np.exp(log_total)),
        abs_error_estimate=err,
        converged=exp_.converged,
        truncation_radius=exp_.radius,
        divergent=False,
        log_value=log_total,
    )


def expansion_result(expansion: _Expansion) -> QuadratureResult:
    """Public wrapper used by the hypothesis checks."""
    return _expansion_result(expansion)


def cumulative_log_integral(logf, nodes, start=0.0, rel_tol=1e-11,
                            growth_rate_fn=None):
    """log of ``integral from start to nodes[i]`` for an increasing node set.

    ``growth_rate_fn(b)`` gives the e-folding growth rate of the integrand
    at the right end of a segment (integrands like ``psi**(m-1)`` pile all
    their mass there); it seeds layer breakpoints.
    """
    nodes = np.asarray(nodes, dtype=float)
    out = np.empty(nodes.shape[0])
    running = -np.inf
    prev = start
    for i, r in enumerate(nodes):
        if r > prev:
            pts = None
            if growth_rate_fn is not None:
                pts = layer_breakpoints(prev, r,
                                        rate_right=growth_rate_fn(r))
            lv, _ = quad_log(logf, prev, r, rel_tol=rel_tol, points=pts)
            running = np.logaddexp(running, lv)
        out[i] = running
        prev = r
    return out


class TailIntegral:
    """Memoized evaluation of ``I(r) = integral of psi**(1-m) over [r, inf)``.

    The expansion anchors are built once (doubling from ``r = 1``) and
    extended in place when a larger radius is requested; partial lookups
    integrate from ``r`` to the next anchor and reuse the cached suffix.
    Values are held in log space: ``I(r)`` itself underflows for strongly
    growing profiles while products like ``I(r) * psi**(m-1)`` stay
    moderate.
    """

    def __init__(self, manifold, tol=1e-9, rel_tol=1e-11):
        self.manifold = manifold
        self.tol = float(tol)
        self.rel_tol = float(rel_tol)
        m = manifold.dim
        profile = manifold.profile
        self._decay = lambda r: (m - 1.0) * float(profile.drift_ratio(r))
        self.logf = lambda x: (1.0 - m) * profile.log_eval(x)
        self._exp = improper_log(self.logf, 1.0, self.tol, rel_tol=rel_tol,
                                 points_fn=self._points)
        self.divergent = self._exp.divergent
        self.converged = self._exp.converged
        self._suffix = self._exp.log_suffix() if not self.divergent else None
        self._cache = {}

    def _points(self, a, b):
        return layer_breakpoints(a, b, rate_left=max(self._decay(a), 0.0))

    @property
    def truncation_radius(self):
        return self._exp.radius

    def _extend_to(self, r):
        """Append doubling anchors until the last one exceeds ``r``."""
        exp_ = self._exp
        while exp_.anchors[-1] <= min(r, _RADIUS_CAP / 2.0) \
                and len(exp_.anchors) < 4096:
            a = exp_.anchors[-1]
            b = 2.0 * a
            pts = self._points(a, b)
            lv, le = quad_log(self.logf, a, b, rel_tol=self.rel_tol,
                              points=pts, max_panels=256)
            exp_.anchors.append(b)
            exp_.log_increments.append(lv)
            exp_.log_errors.append(le)
        self._suffix = exp_.log_suffix()

    def log_at(self, r):
        """log I(r) for scalar r > 0."""
        if self.divergent:
            raise DivergentIntegralError(
                "tail integral of the profile diverges; the manifold fails "
                "the finiteness condition"
            )
        r = float(r)
        if r <= 0:
            raise ValueError("tail integral requires r > 0")
        hit = self._cache.get(r)
        if hit is not None:
            return hit
        if r >= self._exp.anchors[-1]:
            self._extend_to(r)
        anchors = self._exp.anchors
        idx = int(np.searchsorted(anchors, r, side="right"))
        # anchors[idx-1] <= r < anchors[idx]
        pts = self._points(r, anchors[idx])
        lv, _ = quad_log(self.logf, r, anchors[idx], rel_tol=self.rel_tol,
                         points=pts, max_panels=256)
        val = float(np.logaddexp(lv, self._suffix[idx]))
        self._cache[r] = val
        return val

    def log_at_many(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return np.array([self.log_at(x) for x in r])

    def result(self, r) -> QuadratureResult:
        """Full quadrature record for I(r)."""
        if self.divergent:
            return _expansion_result(self._exp)
        log_val = self.log_at(r)
        base = _expansion_result(self._exp)
        return QuadratureResult(
            value=float(np.exp(log_val)),
            abs_error_estimate=base.abs_error_estimate,
            converged=base.converged,
            truncation_radius=max(base.truncation_radius, float(r)),
            divergent=False,
            log_value=log_val,
        )
