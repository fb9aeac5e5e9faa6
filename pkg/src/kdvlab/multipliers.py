"""Exhaustive lattice scans of frequency multipliers.

Every multiplier is a product of powers of ``<xi_j>``, ``|xi_j|``, pair sums and
``xi_max``; the modulation factors ``L_max^{...}`` are set to 1. A scan visits
all admissible tuples with ``|xi_j| <= N`` up to the symmetries of the
formula and returns the supremum and a canonical maximiser.

Symmetry pruning and the canonical argmax: every formula is invariant under
the global sign flip, and four of them under ``xi1 <-> xi2`` as well. The scan
only visits orbit representatives with ``xi1 > 0`` (and ``xi1 >= |xi2|`` for
swap-symmetric kinds). Among maximisers (values within ``1e-12`` of the sup)
the lexicographically smallest representative is reported.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numba
import numpy as np

from .errors import ConfigError, NumericFailure

# avoids probing for an incompatible TBB; scans are CPU-bound loops anyway
numba.config.THREADING_LAYER = "workqueue"

TIE_TOL = 1e-12
# M3* comes from the regime where all frequencies are comparable; outside it
# the formula is not the relevant bound (and is unbounded). Tuples with
# max/min of {|xi|, |xi_j|} above this ratio are rejected.
M3_STAR_RATIO = 4.0


class Kind(Enum):
    M_EPS = "M_eps"
    M_MBOUND = "M_mbound"
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M3_STAR = "M3_star"
    LB1 = "LB1"
    LB2 = "LB2"


SWAP_SYMMETRIC = {Kind.M_MBOUND, Kind.M2, Kind.M3, Kind.LB2}

CONSTRAINTS = {
    Kind.M_EPS: "xi = xi1 + xi2, xi*xi1*xi2 != 0, |xi1| >= |xi2|",
    Kind.M_MBOUND: "xi = xi1+xi2+xi3 != 0, xi_j != 0, (xi1+xi2)(xi2+xi3)(xi3+xi1) != 0",
}
for _k in (Kind.M1, Kind.M2, Kind.M3, Kind.LB1, Kind.LB2):
    CONSTRAINTS[_k] = CONSTRAINTS[Kind.M_MBOUND]
CONSTRAINTS[Kind.M3_STAR] = CONSTRAINTS[Kind.M_MBOUND] + \
    f", max/min of {{|xi|, |xi_j|}} <= {M3_STAR_RATIO:g}"


class Rejection:
    """Returned by :func:`evaluate` for tuples outside the constraint set."""

    def __init__(self, reason):
        self.reason = reason

    def __bool__(self):
        return False

    def __repr__(self):
        return f"Rejection({self.reason!r})"


@dataclass(frozen=True)
class MultiplierSpec:
    """A multiplier kind with its exponents.

    ``gamma`` defaults to ``1 - 10*delta``. ``eps`` is only used by ``M_eps``.
    Parameters are taken as given (no regularity validation) so that scans can
    probe invalid exponents on purpose.
    """

    kind: Kind
    s: float = 0.0
    delta: float = 0.0
    gamma: float | None = None
    eps: float = 0.1

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, Kind) else Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.gamma is None:
            object.__setattr__(self, "gamma", 1.0 - 10.0 * self.delta)

    @property
    def name(self):
        return self.kind.value

    @property
    def arity(self):
        return 2 if self.kind is Kind.M_EPS else 3

    @property
    def constraint(self):
        return CONSTRAINTS[self.kind]

    def to_dict(self):
        d = {"kind": self.kind.value, "s": self.s, "delta": self.delta, "gamma": self.gamma}
        if self.kind is Kind.M_EPS:
            d = {"kind": self.kind.value, "s": self.s, "eps": self.eps}
        return d

    # exponents of: <xi1>, <xi2>, <xi3>, <xi>, |pair sums| (product),
    # xi_max, min |pair sum|
    def exponents(self):
        s, d, g = self.s, self.delta, self.gamma
        k = self.kind
        if k is Kind.M_MBOUND:
            return (s + d, s + d, -(1 - s - d), -s, -(1 - 2 * d) / 2, 0.0, 0.0)
        if k is Kind.M1:
            return (-(g - s - d), s + d, -(1 - s - d), g - s, -(0.5 - 3 * d), 0.0, 0.0)
        if k is Kind.M2:
            return (s + d, s + d, -(1 + g - s - 2 * d), g - s, -(0.5 - 3 * d), 0.0, 0.0)
        if k is Kind.M3:
            return (s + d, s + d, -(1 - s - d), g - s, 0.0, -(1 - 6 * d), -(0.5 - 3 * d))
        if k is Kind.M3_STAR:
            return (-(1 - s), s + d, -(1 - s - d), g - s + d, 0.0, 12 * d, 0.0)
        if k is Kind.LB1:
            return (3 * s - 1 + d, s + d, -(1 - s - d), g - s, -(1.5 - 2 * d), 0.0, 0.0)
        if k is Kind.LB2:
            return (s + d, s + d, -(2 - 3 * s - d), g - s, -(1.5 - 2 * d), 0.0, 0.0)
        raise ValueError(f"{k} has no trilinear exponents")


ALL_KINDS = list(Kind)


def all_specs(s, delta, gamma=None, eps=0.1):
    return [MultiplierSpec(k, s, delta, gamma, eps) for k in ALL_KINDS]


def _br(x):
    return 1.0 + abs(x)


def evaluate(spec, freqs):
    """Exact value of the multiplier at an integer tuple, or a :class:`Rejection`."""
    freqs = tuple(int(x) for x in freqs)
    if len(freqs) != spec.arity:
        raise ValueError(f"{spec.name} takes {spec.arity} frequencies")
    s, d, g = spec.s, spec.delta, spec.gamma
    if spec.kind is Kind.M_EPS:
        x1, x2 = freqs
        x = x1 + x2
        if x1 == 0 or x2 == 0 or x == 0:
            return Rejection("xi*xi1*xi2 = 0")
        if abs(x1) < abs(x2):
            return Rejection("|xi1| < |xi2|")
        e = spec.eps
        return _br(x1) ** s * _br(x2) ** s * _br(x) ** (1 - s) / (abs(x1) * abs(x2) ** (0.5 - e))
    x1, x2, x3 = freqs
    x = x1 + x2 + x3
    if x1 == 0 or x2 == 0 or x3 == 0:
        return Rejection("some xi_j = 0")
    if x == 0:
        return Rejection("xi = 0")
    p12, p23, p31 = abs(x1 + x2), abs(x2 + x3), abs(x3 + x1)
    if p12 * p23 * p31 == 0:
        return Rejection("(xi1+xi2)(xi2+xi3)(xi3+xi1) = 0")
    pi = float(p12) * p23 * p31
    b1, b2, b3, b = _br(x1), _br(x2), _br(x3), _br(x)
    k = spec.kind
    if k is Kind.M_MBOUND:
        return b1 ** (s + d) * b2 ** (s + d) / (b3 ** (1 - s - d) * b ** s * pi ** ((1 - 2 * d) / 2))
    if k is Kind.M1:
        return b2 ** (s + d) * b ** (g - s) / (b1 ** (g - s - d) * b3 ** (1 - s - d) * pi ** (0.5 - 3 * d))
    if k is Kind.M2:
        return b1 ** (s + d) * b2 ** (s + d) * b ** (g - s) / (b3 ** (1 + g - s - 2 * d) * pi ** (0.5 - 3 * d))
    mags = (abs(x), abs(x1), abs(x2), abs(x3))
    xmax = max(mags)
    if k is Kind.M3:
        pmin = min(p12, p23, p31)
        return b1 ** (s + d) * b2 ** (s + d) * b ** (g - s) / (
            b3 ** (1 - s - d) * xmax ** (1 - 6 * d) * pmin ** (0.5 - 3 * d))
    if k is Kind.M3_STAR:
        if xmax > M3_STAR_RATIO * min(mags):
            return Rejection("frequencies not comparable")
        return xmax ** (12 * d) * b2 ** (s + d) * b ** (g - s + d) / (b1 ** (1 - s) * b3 ** (1 - s - d))
    if k is Kind.LB1:
        return b1 ** (3 * s - 1 + d) * b2 ** (s + d) * b ** (g - s) / (b3 ** (1 - s - d) * pi ** (1.5 - 2 * d))
    if k is Kind.LB2:
        return b1 ** (s + d) * b2 ** (s + d) * b ** (g - s) / (b3 ** (2 - 3 * s - d) * pi ** (1.5 - 2 * d))
    raise ValueError(k)


# -- numba kernels -----------------------------------------------------------

@numba.njit(cache=True, parallel=True)
def _scan3(n, lb, la, ex, sym, ratio):
    """Per-row maxima in log space for trilinear kinds.

    ``lb[k] = log(1+k)`` and ``la[k] = log(k)`` for ``k = 0..3n``. Rows are
    ``xi1 = 1..n``; within a row tuples are visited in lexicographic order
    and a later tuple only wins if it beats the row best by more than the
    tie tolerance.
    """
    c1, c2, c3, c0, cp, cx, cm = ex[0], ex[1], ex[2], ex[3], ex[4], ex[5], ex[6]
    best = np.full(n, -np.inf)
    arg = np.zeros((n, 3), dtype=np.int64)
    cnt = np.zeros(n, dtype=np.int64)
    use_x = cx != 0.0 or ratio > 0.0
    for r in numba.prange(n):
        x1 = r + 1
        b = -np.inf
        thr = 0.0
        a2 = 0
        a3 = 0
        c = 0
        lo2 = -x1 if sym else -n
        hi2 = x1 if sym else n
        for x2 in range(lo2, hi2 + 1):
            s12 = x1 + x2
            if x2 == 0 or s12 == 0:
                continue
            base = c1 * lb[x1] + c2 * lb[abs(x2)] + cp * la[abs(s12)]
            for x3 in range(-n, n + 1):
                x = s12 + x3
                s23 = x2 + x3
                s31 = x3 + x1
                if x3 == 0 or x == 0 or s23 == 0 or s31 == 0:
                    continue
                v = base + c3 * lb[abs(x3)] + c0 * lb[abs(x)] + cp * (la[abs(s23)] + la[abs(s31)])
                if use_x:
                    ax = abs(x)
                    m = max(ax, x1, abs(x2), abs(x3))
                    if ratio > 0.0:
                        mn = min(ax, x1, abs(x2), abs(x3))
                        if m > ratio * mn:
                            continue
                    v += cx * la[m]
                if cm != 0.0:
                    pm = min(abs(s12), abs(s23), abs(s31))
                    v += cm * la[pm]
                c += 1
                if v > b + thr:
                    b = v
                    thr = TIE_TOL * math.exp(-v)
                    a2 = x2
                    a3 = x3
        best[r] = b
        arg[r, 0] = x1
        arg[r, 1] = a2
        arg[r, 2] = a3
        cnt[r] = c
    return best, arg, cnt


@numba.njit(cache=True)
def _scan2(n, lb, la, s, eps):
    best = np.full(n, -np.inf)
    arg = np.zeros((n, 2), dtype=np.int64)
    cnt = np.zeros(n, dtype=np.int64)
    for r in range(n):
        x1 = r + 1
        b = -np.inf
        thr = 0.0
        a2 = 0
        c = 0
        for x2 in range(-x1, x1 + 1):
            x = x1 + x2
            if x2 == 0 or x == 0:
                continue
            v = s * lb[x1] + s * lb[abs(x2)] + (1 - s) * lb[abs(x)] - la[x1] - (0.5 - eps) * la[abs(x2)]
            c += 1
            if v > b + thr:
                b = v
                thr = TIE_TOL * math.exp(-v)
                a2 = x2
        best[r] = b
        arg[r, 0] = x1
        arg[r, 1] = a2
        cnt[r] = c
    return best, arg, cnt


@dataclass(frozen=True)
class ScanResult:
    spec: MultiplierSpec
    box_size: int
    sup_value: float
    argmax: tuple
    evaluations: int
    wall_ms: float = field(default=0.0, compare=False)

    def csv_row(self):
        a = list(self.argmax) + [""] * (3 - len(self.argmax))
        return [self.spec.name, self.box_size, repr(self.sup_value), *a,
                self.evaluations, f"{self.wall_ms:.1f}"]


def _tables(n):
    k = np.arange(3 * n + 1, dtype=float)
    lb = np.log1p(k)
    with np.errstate(divide="ignore"):
        la = np.log(k)
    return lb, la


def scan(spec, n):
    """Supremum of ``spec`` over admissible tuples with ``|xi_j| <= n``."""
    if n < 4:
        raise ConfigError("scan needs N >= 4")
    t0 = time.perf_counter()
    lb, la = _tables(n)
    if spec.kind is Kind.M_EPS:
        best, arg, cnt = _scan2(n, lb, la, float(spec.s), float(spec.eps))
    else:
        ratio = M3_STAR_RATIO if spec.kind is Kind.M3_STAR else 0.0
        ex = np.array(spec.exponents(), dtype=float)
        best, arg, cnt = _scan3(n, lb, la, ex, spec.kind in SWAP_SYMMETRIC, ratio)
    # deterministic reduction in ascending row order with exact re-evaluation
    sup, where = -math.inf, None
    for r in range(n):
        if not np.isfinite(best[r]):
            continue
        tup = tuple(int(x) for x in arg[r])
        val = evaluate(spec, tup)
        if isinstance(val, Rejection):
            raise NumericFailure(f"scan produced an inadmissible argmax {tup}")
        if val > sup + TIE_TOL:
            sup, where = val, tup
    if where is None:
        raise NumericFailure(f"{spec.name}: no admissible tuple for N = {n}")
    wall = (time.perf_counter() - t0) * 1e3
    return ScanResult(spec, n, float(sup), where, int(cnt.sum()), wall)


def _canonical(spec, tup):
    """True when ``tup`` lies in the region visited by :func:`scan`."""
    if tup[0] <= 0:
        return False
    if spec.kind in SWAP_SYMMETRIC:
        return tup[0] >= abs(tup[1])
    return True


def naive_scan(spec, n):
    """Unpruned reference loop over the full box (small N only)."""
    rng = range(-n, n + 1)
    vals = {}
    if spec.arity == 2:
        tuples = ((a, b) for a in rng for b in rng)
    else:
        tuples = ((a, b, c) for a in rng for b in rng for c in rng)
    for t in tuples:
        v = evaluate(spec, t)
        if not isinstance(v, Rejection):
            vals[t] = v
    sup = max(vals.values())
    cands = sorted(t for t, v in vals.items() if v >= sup - TIE_TOL and _canonical(spec, t))
    return ScanResult(spec, n, float(sup), cands[0], len(vals))


def growth_trend(spec, ns, results=None):
    """Least-squares slope of ``log sup`` against ``log N``."""
    ns = list(ns)
    if len(ns) < 3 or sorted(ns) != ns:
        raise ConfigError("growth_trend needs at least three ascending box sizes")
    if results is None:
        results = [scan(spec, n) for n in ns]
    sups = np.array([r.sup_value for r in results])
    if not np.all(np.isfinite(sups)) or np.any(sups <= 0):
        raise NumericFailure("degenerate scan values; cannot fit a growth exponent")
    x, y = np.log(np.asarray(ns, dtype=float)), np.log(sups)
    if np.ptp(y) == 0:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def doubling_growth(results):
    """Relative growth ``sup(2N) / sup(N) - 1`` between consecutive results."""
    return [b.sup_value / a.sup_value - 1.0 for a, b in zip(results[:-1], results[1:])]
