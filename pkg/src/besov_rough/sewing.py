"""Sewing on dyadic grids: the integral path, the remainder, and rate
certificates for the compensated-sum construction.

On sampled data the "limit" integral is *defined* as the finest-grid
compensated sum; its convergence content is exposed as per-level
diagnostics: the two-parameter norms of successive dyadic Riemann sum
differences, whose decay rate certifies the regularity hypothesis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy.stats import linregress

from .errors import RegimeError
from .grid import GridPath, TwoParamField
from .norms import INF, EndpointModulus, _band_lp, _mags, _q_sum, two_param_norm

__all__ = [
    "SewingInput",
    "SewingResult",
    "dyadic_riemann",
    "sew",
    "rate_certificate",
    "small_oscillation_check",
]


class _BandCache:
    """Band and strided-suffix-sum cache for a germ field.

    suffix(w)[i] = sum of band_w entries at i, i+w, i+2w, ...; compensated
    Riemann sums over cells of width w are then O(1) per pair:
    I_{P}A_{i,i+h} = suffix(w)[i] - suffix(w)[i+h].
    """

    def __init__(self, field: TwoParamField):
        self.field = field
        self.n = field.grid.n
        self._bands: dict[int, np.ndarray] = {}
        self._suffix: dict[int, np.ndarray] = {}

    def band(self, k: int) -> np.ndarray:
        out = self._bands.get(k)
        if out is None:
            out = self.field.band(k)
            self._bands[k] = out
        return out

    def suffix(self, w: int) -> np.ndarray:
        out = self._suffix.get(w)
        if out is None:
            band = self.band(w)  # length n - w
            m = band.shape[1]
            rows = -(-self.n // w)  # ceil: cover indices 0..n-1 plus padding
            padded = np.zeros((rows * w + w, m))
            padded[: self.n - w] = band
            arr = padded.reshape(rows + 1, w, m)
            out = np.flip(np.cumsum(np.flip(arr, 0), 0), 0).reshape(-1, m)
            self._suffix[w] = out
        return out

    def riemann_band(self, h: int, w: int) -> np.ndarray:
        """Compensated sum over cells of width w, for all pairs (i, i+h)."""
        s = self.suffix(w)
        return s[: self.n - h] - s[h : self.n]


@dataclass(frozen=True)
class SewingInput:
    """Germ plus the regularity/integrability parameters of the sewing target.

    Non-endpoint: gamma > max(1, 1/p2).  Endpoint (gamma = max(1, 1/p2)):
    requires q2 <= min(1, p2) and measures the remainder against the
    log-corrected modulus omega_{q2}.
    """

    germ: TwoParamField
    gamma: float
    p2: float
    q2: float = INF
    endpoint: bool = False
    epsilon: float = 0.1

    def __post_init__(self):
        crit = max(1.0, 1.0 / self.p2)
        if self.endpoint:
            if self.q2 > min(1.0, self.p2):
                raise RegimeError(
                    f"endpoint sewing needs q2 <= min(1, p2); got q2={self.q2}"
                )
            if abs(self.gamma - crit) > 1e-12:
                raise RegimeError(
                    f"endpoint sewing needs gamma = max(1, 1/p2) = {crit},"
                    f" got {self.gamma}"
                )
        elif not self.gamma > crit:
            raise RegimeError(
                f"sewing needs gamma > max(1, 1/p2) = {crit}, got {self.gamma}"
            )

    @property
    def critical_exponent(self) -> float:
        return max(1.0, 1.0 / self.p2)

    def modulus(self) -> Optional[EndpointModulus]:
        if not self.endpoint:
            return None
        return EndpointModulus(
            r=self.q2, exponent=self.critical_exponent, epsilon=self.epsilon
        )


@dataclass
class SewingResult:
    """Integral path (starting at 0), remainder field, per-level diagnostics."""

    input: SewingInput
    integral: GridPath
    remainder: TwoParamField
    levels: list = dc_field(default_factory=list)  # [{"n": int, "diff_norm": float}]

    @property
    def remainder_norm(self) -> float:
        inp = self.input
        mod = inp.modulus()
        if mod is None:
            return two_param_norm(self.remainder, inp.gamma, inp.p2, inp.q2)
        return two_param_norm(
            self.remainder, inp.gamma, inp.p2, inp.q2, modulus=mod.omega
        )


def dyadic_riemann(A: TwoParamField, n: int) -> TwoParamField:
    """Compensated-sum field over the dyadic partition P_n.

    Defined on pairs (i, j) whose index difference is divisible by 2^n (so
    all partition points are grid nodes); other pairs raise.  Always lazy.
    """
    if n < 0:
        raise ValueError("partition level must be nonnegative")
    if n == 0:
        return A
    step = 1 << n
    cache = _BandCache(A)

    def germ(ii, jj):
        span = jj - ii
        if np.any(span % step):
            raise IndexError(
                f"pair not admissible for P_{n}: index difference must be"
                f" divisible by {step}"
            )
        out = np.zeros((len(ii), A.dim))
        for diff in np.unique(span):
            if diff == 0:
                continue
            w = int(diff) // step
            sel = span == diff
            s = cache.suffix(w)
            out[sel] = s[ii[sel]] - s[jj[sel]]
        return out

    return TwoParamField(A.grid, A.dim, germ=germ)


def _diff_level_norm(cache, grid, n, p2, q2, denom) -> float:
    """Norm of I_{P_{n+1}}A - I_{P_n}A over admissible shifts h = j*2^{n+1}."""
    step = 1 << (n + 1)
    max_j = (grid.n_cells // 2) // step
    if max_j < 1:
        return math.nan
    mesh = grid.mesh
    band_norms = {}
    for j in range(1, max_j + 1):
        h = j * step
        d = cache.riemann_band(h, j) - cache.riemann_band(h, 2 * j)
        band_norms[h] = _band_lp(_mags(d), mesh, p2)
    ratios = []
    for lev in range(1, grid.level + 1):
        k_max = 1 << (grid.level - lev)
        avail = [v for h, v in band_norms.items() if h <= k_max]
        if not avail:
            continue
        ratios.append(max(avail) / denom(grid.horizon * 2.0**-lev))
    return _q_sum(np.asarray(ratios), q2, log_weight=True)


def sew(input: SewingInput, diagnostics: bool = True) -> SewingResult:
    """Construct the integral path and remainder of a germ.

    The integral path is the finest-grid compensated sum from 0; the
    remainder is the lazy field (delta I)A - A.  Diagnostics record, for each
    n, the two-parameter norm of I_{P_{n+1}}A - I_{P_n}A measured at
    (gamma, p2, q2) (against the omega modulus in the endpoint case).
    """
    A = input.germ
    grid = A.grid
    consec = A.band(1)
    if not np.all(np.isfinite(consec)):
        raise RegimeError("germ is not finite on consecutive grid pairs")
    ia = np.vstack([np.zeros((1, A.dim)), np.cumsum(consec, axis=0)])
    integral = GridPath(grid, ia)

    def rem_germ(ii, jj):
        return ia[jj] - ia[ii] - A.pairs(ii, jj)

    remainder = TwoParamField(grid, A.dim, germ=rem_germ)

    levels = []
    if diagnostics:
        mod = input.modulus()
        denom = (
            (lambda tau: tau**input.gamma) if mod is None else mod.omega
        )
        cache = _BandCache(A)
        for n in range(0, grid.level - 1):
            norm = _diff_level_norm(cache, grid, n, input.p2, input.q2, denom)
            if not math.isnan(norm):
                levels.append({"n": n, "diff_norm": norm})
    return SewingResult(input=input, integral=integral, remainder=remainder,
                        levels=levels)


_ZERO_FLOOR = 1e-300


def rate_certificate(
    result: SewingResult,
    gamma: float | None = None,
    p2: float | None = None,
    q2: float | None = None,
    n_range: tuple[int, int] | None = None,
) -> dict:
    """log2-regression of successive-difference norms against the level.

    Expected slope is -(gamma - max(1, 1/p2)); a germ that is already an
    increment has all-zero differences and reports slope -inf.  In the
    endpoint case the expected slope is 0 and the report carries a
    boundedness flag instead.
    """
    inp = result.input
    gamma = inp.gamma if gamma is None else gamma
    p2 = inp.p2 if p2 is None else p2
    q2 = inp.q2 if q2 is None else q2
    expected = -(gamma - max(1.0, 1.0 / p2))
    rows = result.levels
    if n_range is not None:
        rows = [r for r in rows if n_range[0] <= r["n"] <= n_range[1]]
    if not rows:
        raise ValueError("no diagnostic levels available; run sew(diagnostics=True)")
    ns = np.array([r["n"] for r in rows], dtype=float)
    vals = np.array([r["diff_norm"] for r in rows], dtype=float)
    # already-additive germ: remainder identically zero up to roundoff, all
    # successive differences are float noise -> -inf sentinel
    grid = result.input.germ.grid
    rem_scale = max(
        float(_mags(result.remainder.band(1 << (grid.level - lev))).max())
        for lev in range(1, grid.level + 1)
    )
    ia_scale = float(np.abs(result.integral.values).max())
    if rem_scale <= 1e-12 * max(1.0, ia_scale):
        return {"slope": -INF, "expected": expected, "r2": 1.0, "levels": rows,
                "bounded": True}
    keep = vals > _ZERO_FLOOR
    fit = linregress(ns[keep], np.log2(vals[keep]))
    bounded = bool(vals.max() <= 2.0 * max(vals[0], _ZERO_FLOOR))
    return {
        "slope": float(fit.slope),
        "expected": expected,
        "r2": float(fit.rvalue**2),
        "levels": rows,
        "bounded": bounded,
    }


def small_oscillation_check(R: TwoParamField, p2: float) -> dict:
    """Profile tau -> sup_{h <= tau} Omega_{p2}(R, tau)/tau^{max(1,1/p2)}.

    Membership in the little space shows up as a profile decreasing toward
    the smallest resolved tau.
    """
    grid = R.grid
    crit = max(1.0, 1.0 / p2)
    mesh = grid.mesh
    max_shift = 1 << (grid.level - 1)
    s = np.zeros(max_shift)
    for k in range(1, max_shift + 1):
        s[k - 1] = _band_lp(_mags(R.band(k)), mesh, p2)
    running = np.maximum.accumulate(s)
    taus, profile = [], []
    for n in range(1, grid.level + 1):
        tau = grid.horizon * 2.0**-n
        k = 1 << (grid.level - n)
        taus.append(tau)
        profile.append(float(running[k - 1] / tau**crit))
    decreasing = profile[-1] <= profile[0] + 1e-12
    return {"taus": taus, "profile": profile, "decreasing": bool(decreasing)}
