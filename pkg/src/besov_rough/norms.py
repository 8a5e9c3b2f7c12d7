"""One- and two-parameter seminorms on sampled paths.

Conventions, fixed so that reported numbers are bit-stable:

* L^p sums use left-endpoint Riemann weights: ``mesh`` per node over
  [0, T-h], last node excluded (p = infinity takes the max over all nodes).
* The shift supremum in the moduli runs over every grid shift h = k*mesh
  up to tau, not only dyadic ones.
* d(tau)/tau integrals are discretized over the dyadic levels
  tau_n = T*2^{-n}, n = 1..level, with weight log(2) per level; the dyadic
  form of the one-parameter seminorm is the plain ell^q sum over the exact
  shifts 2^{-n}T with factor (2^n/T)^alpha and no log weight.
* Reductions are fixed-order, independent of any parallelism.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RegimeError
from .grid import GridPath, TwoParamField

INF = math.inf

__all__ = [
    "BesovParams",
    "EndpointModulus",
    "lp_norm",
    "lp_modulus",
    "besov_seminorm",
    "besov_level_table",
    "besov_metric",
    "two_param_norm",
    "two_param_metric",
    "delta2_norm",
    "holder_seminorm",
    "pvariation",
    "oscillation_variation",
    "campanato_ratio",
    "check_embedding",
    "interpolation_check",
    "band_lp_norms",
]


@dataclass(frozen=True)
class BesovParams:
    """(alpha, p, q) with regime flags for the Young / level-2 / level-N theory."""

    alpha: float
    p: float
    q: float

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise RegimeError(f"alpha must be in (0, 1], got {self.alpha}")
        if not self.p > 0 or not self.q > 0:
            raise RegimeError(f"p, q must be positive (or inf), got {self.p}, {self.q}")
        if self.alpha > max(1.0, 1.0 / self.p):
            raise RegimeError(
                f"alpha={self.alpha} > max(1, 1/p): the space is trivial"
            )

    @property
    def as_tuple(self):
        return (self.alpha, self.p, self.q)

    @property
    def young_ok(self) -> bool:
        if not (0.5 <= self.alpha < 1 and self.p > 1 / self.alpha):
            return False
        if self.alpha == 0.5:
            return self.q <= 2
        return True

    @property
    def level2_ok(self) -> bool:
        return self.levelN_ok(2)

    def levelN_ok(self, n_level: int) -> bool:
        lo = 1.0 / (n_level + 1)
        if not (lo <= self.alpha < 1 and self.p > 1 / self.alpha):
            return False
        if self.alpha == lo:
            return self.q <= n_level + 1
        return True


@dataclass(frozen=True)
class EndpointModulus:
    """Log-corrected critical modulus: omega_r(h) = h^exponent * ell_r(h).

    ell_r(h) = |log(min(h, 1/2))|^{1/r + epsilon}, ell_inf = 1.  `exponent`
    is max(1, 1/p2) in the sewing endpoint case.
    """

    r: float
    exponent: float = 1.0
    epsilon: float = 0.1

    def __post_init__(self):
        if self.r <= 0 or self.epsilon <= 0:
            raise RegimeError("EndpointModulus needs r > 0 and epsilon > 0")

    def ell(self, h):
        h = np.asarray(h, dtype=float)
        if self.r == INF:
            return np.ones_like(h)
        return np.abs(np.log(np.minimum(h, 0.5))) ** (1.0 / self.r + self.epsilon)

    def omega(self, h):
        h = np.asarray(h, dtype=float)
        return h**self.exponent * self.ell(h)

    def check_integrable(self, horizon: float = 1.0) -> float:
        """Numerical value of the dh/h integral of ell_r^{-r} on [2^-40, T]."""
        if self.r == INF:
            return INF
        hs = horizon * 2.0 ** (-np.arange(1, 41, dtype=float))
        return float(np.sum(self.ell(hs) ** (-self.r)) * math.log(2.0))


# ---------------------------------------------------------------------------
# shared kernels


def _mags(diff: np.ndarray) -> np.ndarray:
    """Euclidean magnitudes of an (k, m) increment block."""
    if diff.shape[1] == 1:
        return np.abs(diff[:, 0])
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def _band_lp(mag: np.ndarray, mesh: float, p: float) -> float:
    """L^p over [0, T-h]: left-endpoint weights, last band node excluded."""
    if p == INF:
        return float(mag.max()) if len(mag) else 0.0
    if len(mag) <= 1:
        return 0.0
    return float((np.sum(mag[:-1] ** p) * mesh) ** (1.0 / p))


def band_lp_norms(obj, p: float, max_shift: int) -> np.ndarray:
    """Per-shift L^p increment norms s_k, k = 1..max_shift.

    `obj` is a GridPath (increments f_{i+k} - f_i) or a TwoParamField
    (band entries A[i, i+k]).
    """
    mesh = obj.grid.mesh
    out = np.zeros(max_shift)
    if isinstance(obj, GridPath):
        v = obj.values
        for k in range(1, max_shift + 1):
            out[k - 1] = _band_lp(_mags(v[k:] - v[:-k]), mesh, p)
    elif isinstance(obj, TwoParamField):
        for k in range(1, max_shift + 1):
            out[k - 1] = _band_lp(_mags(obj.band(k)), mesh, p)
    else:
        raise TypeError(f"expected GridPath or TwoParamField, got {type(obj)}")
    return out


def lp_norm(f: GridPath, p: float) -> float:
    """L^p norm of the path itself (same Riemann-weight convention)."""
    return _band_lp(_mags(f.values), f.grid.mesh, p)


def lp_modulus(f: GridPath, p: float, tau: float) -> float:
    """omega_p(f, tau): sup over grid shifts h = k*mesh <= tau of |delta_h f|_{L^p}."""
    if not tau > 0:
        raise RegimeError(f"tau must be positive, got {tau}")
    k_max = min(int(tau / f.grid.mesh + 1e-9), f.grid.n_cells)
    if k_max < 1:
        return 0.0
    return float(band_lp_norms(f, p, k_max).max())


def _q_sum(ratios: np.ndarray, q: float, log_weight: bool) -> float:
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size == 0:
        return 0.0
    if q == INF:
        return float(ratios.max())
    w = math.log(2.0) if log_weight else 1.0
    return float((w * np.sum(ratios**q)) ** (1.0 / q))


def _dyadic_ratio_profile(obj, p, denom, max_level=None):
    """Per-level ratios Omega_p(., tau_n)/denom(tau_n) for n = 1..level.

    Omega is the running sup of the per-shift norms, so it is nondecreasing
    in tau by construction.
    """
    level = obj.grid.level if max_level is None else min(max_level, obj.grid.level)
    horizon = obj.grid.horizon
    s = band_lp_norms(obj, p, 1 << (level - 1)) if level >= 1 else np.zeros(0)
    running = np.maximum.accumulate(s) if len(s) else s
    ratios = []
    for n in range(1, level + 1):
        tau = horizon * 2.0 ** (-n)
        k = 1 << (level - n)
        ratios.append(running[k - 1] / denom(tau))
    return np.asarray(ratios)


# ---------------------------------------------------------------------------
# one-parameter seminorms


def _check_nontrivial(alpha, p):
    if alpha > max(1.0, 1.0 / p):
        raise RegimeError(f"alpha={alpha} > max(1, 1/p={p}): trivial space")


def besov_seminorm(
    f: GridPath, alpha: float, p: float, q: float, form: str = "dyadic"
) -> float:
    """[f]_{B^alpha_pq} in dyadic or integral form.

    dyadic:    ( sum_n ((2^n/T)^alpha * |f - f(.+2^-n T)|_{L^p})^q )^{1/q}
    integral:  dtau/tau discretization of (omega_p(f,tau)/tau^alpha)^q over
               dyadic tau levels, weight log 2 per level.
    """
    _check_nontrivial(alpha, p)
    grid = f.grid
    if form == "dyadic":
        ratios = []
        v = f.values
        for n in range(1, grid.level + 1):
            k = 1 << (grid.level - n)
            s = _band_lp(_mags(v[k:] - v[:-k]), grid.mesh, p)
            ratios.append((2.0**n / grid.horizon) ** alpha * s)
        return _q_sum(np.asarray(ratios), q, log_weight=False)
    if form == "integral":
        ratios = _dyadic_ratio_profile(f, p, lambda tau: tau**alpha)
        return _q_sum(ratios, q, log_weight=True)
    raise ValueError(f"unknown form {form!r}")


def besov_level_table(f: GridPath, alpha: float, p: float, q: float):
    """Per-level table [(n, h, lp_increment_norm)] behind the dyadic form."""
    grid = f.grid
    rows = []
    v = f.values
    for n in range(1, grid.level + 1):
        k = 1 << (grid.level - n)
        s = _band_lp(_mags(v[k:] - v[:-k]), grid.mesh, p)
        rows.append({"n": n, "h": grid.horizon * 2.0**-n, "lp_increment_norm": s})
    return rows


def besov_metric(f: GridPath, g: GridPath, alpha: float, p: float, q: float) -> float:
    """Complete-metric distance on B^alpha_pq, split by the (p, q) cases."""
    _check_same_shape(f, g)
    diff = f - g
    base = lp_norm(diff, p)
    ratios = _dyadic_ratio_profile(diff, p, lambda tau: tau**alpha)
    if p >= 1 and q >= 1:
        return base + _q_sum(ratios, q, log_weight=True)
    integral = float(math.log(2.0) * np.sum(ratios**q)) if q != INF else float(
        ratios.max()
    )
    if q <= p < 1:
        return base**p + integral
    if q < 1 <= p:
        return base + integral
    # 0 < p < 1 and q > p
    return base**p + integral ** (p / q)


def _check_same_shape(f, g):
    if f.grid != g.grid or f.dim != g.dim:
        raise ValueError("paths must share grid and dimension")


# ---------------------------------------------------------------------------
# two-parameter seminorms


def two_param_norm(
    A: TwoParamField,
    gamma: float,
    p: float,
    q: float,
    modulus=None,
    band_norms: np.ndarray | None = None,
) -> float:
    """|A|_{B^gamma_pq}: dtau/tau discretization with Omega_p(A, tau).

    `modulus`, when given, replaces tau^gamma as the denominator (endpoint
    norms).  `band_norms` allows reuse of precomputed per-shift norms.
    """
    if modulus is None and not gamma > 0:
        raise RegimeError(f"gamma must be positive, got {gamma}")
    denom = (lambda tau: tau**gamma) if modulus is None else modulus
    if band_norms is None:
        ratios = _dyadic_ratio_profile(A, p, denom)
    else:
        running = np.maximum.accumulate(band_norms)
        grid = A.grid
        ratios = []
        for n in range(1, grid.level + 1):
            k = 1 << (grid.level - n)
            if k > len(running):
                continue
            ratios.append(running[k - 1] / denom(grid.horizon * 2.0**-n))
        ratios = np.asarray(ratios)
    return _q_sum(ratios, q, log_weight=True)


def two_param_metric(
    A: TwoParamField, B: TwoParamField, gamma: float, p: float, q: float, modulus=None
) -> float:
    """Complete-metric distance on the two-parameter space (three cases)."""
    diff = A - B
    if p >= 1 and q >= 1:
        return two_param_norm(diff, gamma, p, q, modulus=modulus)
    denom = (lambda tau: tau**gamma) if modulus is None else modulus
    ratios = _dyadic_ratio_profile(diff, p, denom)
    integral = float(math.log(2.0) * np.sum(ratios**q)) if q != INF else float(
        ratios.max()
    )
    if q < 1 and q <= p:
        return integral
    return integral ** (p / q)


def delta2_norm(
    A: TwoParamField, gamma: float, p: float, q: float, theta_level: int = 4,
    modulus=None,
) -> float:
    """|delta^2 A| in the barred two-parameter norm.

    The inner sup over theta is discretized on {j/2^theta_level}; this is a
    lower bound on the continuum sup.
    """
    grid = A.grid
    denom = (lambda tau: tau**gamma) if modulus is None else modulus
    thetas = np.arange(1 << theta_level, dtype=float) / (1 << theta_level)
    max_shift = 1 << (grid.level - 1) if grid.level >= 1 else 0
    s = np.zeros(max_shift)
    for k in range(1, max_shift + 1):
        offs = np.unique(np.rint(thetas[1:] * k).astype(int))
        offs = offs[(offs > 0) & (offs < k)]
        best = 0.0
        for u in offs:
            best = max(best, _band_lp(_mags(A.delta2_bands(u, k)), grid.mesh, p))
        s[k - 1] = best
    return two_param_norm(A, gamma, p, q, modulus=modulus, band_norms=s)


def holder_seminorm(obj, beta: float) -> float:
    """sup over grid pairs of |increment| / (t-s)^beta.

    Accepts a GridPath (increments of f) or a TwoParamField (entries of A).
    """
    grid = obj.grid
    best = 0.0
    if isinstance(obj, GridPath):
        v = obj.values
        for k in range(1, grid.n):
            m = _mags(v[k:] - v[:-k]).max()
            best = max(best, m / (k * grid.mesh) ** beta)
    elif isinstance(obj, TwoParamField):
        for k in range(1, grid.n):
            band = obj.band(k)
            if band.size:
                best = max(best, _mags(band).max() / (k * grid.mesh) ** beta)
    else:
        raise TypeError(f"expected GridPath or TwoParamField, got {type(obj)}")
    return float(best)


# ---------------------------------------------------------------------------
# variation functionals


def pvariation(f: GridPath, p: float, return_partition: bool = False):
    """Exact sup over grid partitions of (sum |delta f|^p)^{1/p}, by dynamic
    programming; ties break toward the earlier partition point."""
    if p < 1:
        raise RegimeError(f"pvariation needs p >= 1, got {p}")
    v = f.values
    n = len(v)
    best = np.zeros(n)
    prev = np.zeros(n, dtype=int)
    for j in range(1, n):
        cand = best[:j] + _mags(v[j] - v[:j]) ** p
        i = int(np.argmax(cand))  # argmax returns the first maximizer
        best[j] = cand[i]
        prev[j] = i
    value = float(best[-1] ** (1.0 / p))
    if not return_partition:
        return value
    points = [n - 1]
    while points[-1] > 0:
        points.append(int(prev[points[-1]]))
    return value, points[::-1]


def oscillation_variation(f: GridPath, p: float) -> float:
    """Oscillation variant: block cost inf_c |f - c|_{sup;[s,t]} = (max-min)/2."""
    if p < 1:
        raise RegimeError(f"oscillation_variation needs p >= 1, got {p}")
    if f.dim != 1:
        raise ValueError("oscillation_variation is defined for scalar paths")
    v = f.values[:, 0]
    n = len(v)
    best = np.zeros(n)
    for j in range(1, n):
        seg = v[j::-1]
        mx = np.maximum.accumulate(seg)[:0:-1]
        mn = np.minimum.accumulate(seg)[:0:-1]
        cand = best[:j] + ((mx - mn) / 2.0) ** p
        best[j] = cand.max()
    return float(best[-1] ** (1.0 / p))


# ---------------------------------------------------------------------------
# Campanato ratio and inequality reports


def campanato_ratio(
    f: GridPath, beta: float, max_window_nodes: int = 256
) -> float:
    """Discretized sup over centers and dyadic radii of
    r^{-beta} (2r)^{-2} * double integral of |f_s - f_t| over the window.

    Windows wider than `max_window_nodes` are subsampled with a stride, so the
    reported value is a lower bound on the full double-sum version.
    """
    grid = f.grid
    v = f.values
    n = grid.n
    best = 0.0
    center_stride = max(1, (n - 1) // 64)
    for kr in range(1, grid.level):
        w = 1 << (grid.level - kr)  # radius in nodes; r = w*mesh
        r = w * grid.mesh
        for c in range(w, n - w, center_stride):
            lo, hi = c - w, c + w
            idx = np.arange(lo, hi)
            stride = max(1, len(idx) // max_window_nodes)
            sub = v[idx[::stride]]
            weight = (stride * grid.mesh) ** 2
            diff = sub[:, None, :] - sub[None, :, :]
            dbl = float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).sum()) * weight
            val = dbl / (2 * r) ** 2 / r**beta
            best = max(best, val)
    return best


def _ratio(lhs: float, rhs: float) -> float:
    if rhs == 0.0:
        return 0.0
    return lhs / rhs


def check_embedding(
    obj, alpha: float, p: float, q: float, target: str = "holder"
) -> dict:
    """Compute both sides of a claimed embedding and report the ratio.

    No constant is asserted; callers judge stability across resolutions.
    For paths: target 'holder' compares the (alpha - 1/p)-Hoelder seminorm to
    the Besov seminorm; target 'variation' compares the critical-Besov dyadic
    seminorm at (1/p, p, inf) to the p-variation.  For fields: 'holder'
    compares the (gamma - 1/p) field Hoelder norm to the two-parameter norm.
    """
    if isinstance(obj, TwoParamField):
        lhs = holder_seminorm(obj, alpha - 1.0 / p)
        rhs = two_param_norm(obj, alpha, p, q)
        return {"lhs": lhs, "rhs": rhs, "ratio": _ratio(lhs, rhs), "target": "holder"}
    if target == "holder":
        if alpha <= 1.0 / p:
            raise RegimeError("Hoelder embedding needs alpha > 1/p")
        lhs = holder_seminorm(obj, alpha - 1.0 / p)
        rhs = besov_seminorm(obj, alpha, p, q, form="integral")
    elif target == "variation":
        lhs = besov_seminorm(obj, 1.0 / p, p, INF, form="dyadic")
        rhs = pvariation(obj, p)
    else:
        raise ValueError(f"unknown target {target!r}")
    return {"lhs": lhs, "rhs": rhs, "ratio": _ratio(lhs, rhs), "target": target}


def interpolation_check(
    A: TwoParamField,
    alpha: float,
    gamma: float,
    p: float,
    r: float,
    q: float,
    delta: float,
) -> dict:
    """Loss-of-regularity / gain-of-integrability interpolation report:

        |A|_{B^alpha_{r,q}}  vs  T^e * |A|_{C^delta}^{1-p/r} |A|_{B^gamma_{p,q}}^{p/r}

    with e = delta*(1 - p/r) + gamma*p/r - alpha.  Returns both sides and the
    implied constant (their ratio).
    """
    if not (0 < alpha < gamma and 0 < p < r):
        raise RegimeError("interpolation needs 0 < alpha < gamma and p < r")
    exponent = delta * (1 - p / r) + gamma * p / r - alpha
    if exponent <= 0:
        raise RegimeError("interpolation exponent must be positive")
    lhs = two_param_norm(A, alpha, r, q)
    holder = holder_seminorm(A, delta)
    coarse = two_param_norm(A, gamma, p, q)
    rhs = A.grid.horizon**exponent * holder ** (1 - p / r) * coarse ** (p / r)
    return {"lhs": lhs, "rhs": rhs, "ratio": _ratio(lhs, rhs), "T_exponent": exponent}
