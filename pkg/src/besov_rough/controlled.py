"""Level-2 controlled rough paths: rough integration, composition, the RDE
solver, Davie residuals, and the Ito-Lyons stability probe.

Index conventions: a controlled pair (Y, Y') has Y values of shape
(nodes, *vs) and Y' of shape (nodes, *vs, n), the trailing axis contracting
against driver increments.  Second-level entries XX[k, j] carry the inner
(earlier) index first, matching the left-point iterated sums of the lifts, so
the Davie expansion contracts as sum_{j,k} (Df f)[a,j,k] XX[k,j].
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.stats import linregress

from .errors import NonContractionError, RegimeError
from .grid import GridPath, TwoParamField
from .norms import (
    INF,
    BesovParams,
    EndpointModulus,
    besov_metric,
    besov_seminorm,
    holder_seminorm,
    two_param_metric,
    two_param_norm,
    _band_lp,
    _mags,
    _q_sum,
)
from .rough import RoughPath, rough_metric
from .young import VectorField, field_distance_proxy, _probe_cloud

__all__ = [
    "ControlledPath",
    "controlled_norm",
    "controlled_distance",
    "remainder_bounds_check",
    "rough_integral",
    "compose_controlled",
    "rde_solve",
    "RdeResult",
    "davie_residual",
    "rde_stability_probe",
]


class ControlledPath:
    """Pair (Y, Y') with the derived remainder field R = dY - Y' dX."""

    def __init__(self, X: RoughPath, Y: np.ndarray, Yp: np.ndarray):
        Y = np.asarray(Y, dtype=float)
        Yp = np.asarray(Yp, dtype=float)
        nodes = X.grid.n
        if Y.shape[0] != nodes or Yp.shape[0] != nodes:
            raise ValueError("Y and Y' must be sampled on the driver grid")
        if Yp.shape != Y.shape + (X.n,):
            raise ValueError(
                f"Y' must have shape {Y.shape + (X.n,)}, got {Yp.shape}"
            )
        self.X = X
        self.Y = Y
        self.Yp = Yp
        self._remainder = None

    @property
    def value_shape(self):
        return self.Y.shape[1:]

    @property
    def flat_dim(self) -> int:
        return int(np.prod(self.value_shape, dtype=int)) if self.value_shape else 1

    def y_path(self) -> GridPath:
        return GridPath(self.X.grid, self.Y.reshape(self.X.grid.n, -1))

    def yp_path(self) -> GridPath:
        return GridPath(self.X.grid, self.Yp.reshape(self.X.grid.n, -1))

    @property
    def remainder(self) -> TwoParamField:
        """Lazy cache of R[i][j] = dY - Y'_i dX[i][j] (recomputable exactly)."""
        if self._remainder is None:
            grid = self.X.grid
            yflat = self.Y.reshape(grid.n, -1)
            ypflat = self.Yp.reshape(grid.n, -1, self.X.n)
            base = self.X.base_path().values

            def germ(ii, jj):
                dx = base[jj] - base[ii]
                lead = np.einsum("bmn,bn->bm", ypflat[ii], dx)
                return yflat[jj] - yflat[ii] - lead

            self._remainder = TwoParamField(grid, self.flat_dim, germ=germ)
        return self._remainder


def controlled_norm(cp: ControlledPath, params: BesovParams | None = None) -> float:
    """[Y']_{B^a_pq} + |R|_{B^{2a}_{p/2,q/2}}."""
    params = params or cp.X.params
    alpha, p, q = params.as_tuple
    part1 = besov_seminorm(cp.yp_path(), alpha, p, q, form="integral")
    part2 = two_param_norm(cp.remainder, 2 * alpha, p / 2,
                           q / 2 if q != INF else INF)
    return part1 + part2


def controlled_distance(
    cp1: ControlledPath, cp2: ControlledPath, params: BesovParams | None = None
) -> float:
    """Metric distance of the Gubinelli derivatives plus the remainders."""
    if cp1.value_shape != cp2.value_shape or cp1.X.grid != cp2.X.grid:
        raise ValueError("controlled paths not comparable")
    params = params or cp1.X.params
    alpha, p, q = params.as_tuple
    d1 = besov_metric(cp1.yp_path(), cp2.yp_path(), alpha, p, q)
    d2 = two_param_metric(cp1.remainder, cp2.remainder, 2 * alpha, p / 2,
                          q / 2 if q != INF else INF)
    return d1 + d2


def remainder_bounds_check(cp: ControlledPath, beta: float | None = None) -> dict:
    """Both sides of the Hoelder remainder bound and the path-norm control.

    beta must lie in (alpha + 1/p, 2*alpha]; ratios are reported for fitting.
    """
    alpha, p, q = cp.X.params.as_tuple
    inv_p = 0.0 if p == INF else 1.0 / p
    if beta is None:
        beta = 2 * alpha
    if not alpha + inv_p < beta <= 2 * alpha + 1e-12:
        raise RegimeError(f"beta must be in (alpha+1/p, 2 alpha], got {beta}")
    x_norm = besov_seminorm(cp.X.base_path(), alpha, p, q, form="integral")
    yp_norm = besov_seminorm(cp.yp_path(), alpha, p, q, form="integral")
    r_beta = two_param_norm(cp.remainder, beta, p / 2, q / 2 if q != INF else INF)
    holder_lhs = holder_seminorm(cp.remainder, beta - 2 * inv_p)
    holder_rhs = r_beta + yp_norm * x_norm
    y_norm = besov_seminorm(cp.y_path(), alpha, p, q, form="integral")
    horizon = cp.X.grid.horizon
    t_pow = max(horizon ** (beta - alpha - inv_p), horizon ** (alpha - inv_p))
    y_rhs = float(np.linalg.norm(cp.Yp[0])) * x_norm + t_pow * (
        yp_norm * x_norm + r_beta
    )
    return {
        "beta": beta,
        "holder": {"lhs": holder_lhs, "rhs": holder_rhs,
                   "ratio": 0.0 if holder_rhs == 0 else holder_lhs / holder_rhs},
        "path_norm": {"lhs": y_norm, "rhs": y_rhs,
                      "ratio": 0.0 if y_rhs == 0 else y_norm / y_rhs},
    }


# ---------------------------------------------------------------------------
# rough integral


def _level2_modulus(params: BesovParams):
    """(gamma, modulus) for the sewing target at level 3 alpha."""
    alpha, _, q = params.as_tuple
    if alpha > 1.0 / 3.0 + 1e-12:
        return 3 * alpha, None
    mod = EndpointModulus(r=q / 3 if q != INF else INF, exponent=1.0)
    return 1.0, mod


def _integrand_arrays(cp: ControlledPath):
    if len(cp.value_shape) < 1 or cp.value_shape[-1] != cp.X.n:
        raise ValueError(
            "rough integrand must have a trailing driver axis: shape"
            f" (*, {cp.X.n}), got {cp.value_shape}"
        )
    grid_n = cp.X.grid.n
    y = cp.Y.reshape(grid_n, -1, cp.X.n)
    yp = cp.Yp.reshape(grid_n, -1, cp.X.n, cp.X.n)
    return y, yp


def rough_integral(
    cp: ControlledPath, report: bool = False
):
    """Z = int Y dX by the finest compensated sum of Y dX + Y' XX; Z' = Y.

    With report=True also returns the two-parameter norm of
    dZ - Y dX - Y' XX at (3a, p/3, q/3) (omega modulus at the endpoint).
    """
    X = cp.X
    params = X.params
    if not params.level2_ok:
        raise RegimeError(
            f"(alpha,p,q)={params.as_tuple} violates the level-2 conditions"
        )
    y, yp = _integrand_arrays(cp)
    grid = X.grid
    base = X.base_path().values
    dx = np.diff(base, axis=0)
    xx_cons = X.level(2).band(1).reshape(grid.n - 1, X.n, X.n)
    incs = np.einsum("bmn,bn->bm", y[:-1], dx) + np.einsum(
        "bmjk,bkj->bm", yp[:-1], xx_cons
    )
    z = np.vstack([np.zeros((1, incs.shape[1])), np.cumsum(incs, axis=0)])
    out_shape = cp.value_shape[:-1]
    z_out = z.reshape((grid.n,) + out_shape)
    result = ControlledPath(X, z_out, cp.Y.reshape(z_out.shape + (X.n,)))
    if not report:
        return result

    xx_field = X.level(2)

    def germ(ii, jj):
        dxp = base[jj] - base[ii]
        xx = xx_field.pairs(ii, jj).reshape(len(ii), X.n, X.n)
        a = np.einsum("bmn,bn->bm", y[ii], dxp) + np.einsum(
            "bmjk,bkj->bm", yp[ii], xx
        )
        return z[jj] - z[ii] - a

    rem = TwoParamField(grid, z.shape[1], germ=germ)
    gamma, mod = _level2_modulus(params)
    alpha, p, q = params.as_tuple
    if mod is None:
        norm = two_param_norm(rem, gamma, p / 3, q / 3 if q != INF else INF)
        rep = {"remainder_norm": norm, "endpoint": False}
    else:
        norm = two_param_norm(rem, gamma, p / 3, INF, modulus=mod.omega)
        rep = {"remainder_norm": norm, "endpoint": True}
    return result, rep


def compose_controlled(F: VectorField, cp: ControlledPath, report: bool = False):
    """(f(Y), Df(Y) Y') as a controlled pair; optional norm-bound report."""
    if len(cp.value_shape) != 1:
        raise ValueError("compose_controlled expects a state-valued pair (m,)")
    if F.order < 2:
        raise RegimeError("composition requires a C^2 (or better) field")
    values = F.values_along(cp.Y)  # (nodes, m', n')
    dvals = F.d_along(cp.Y)        # (nodes, m', n', m)
    yp_new = np.einsum("bajc,bck->bajk", dvals, cp.Yp)
    out = ControlledPath(cp.X, values, yp_new)
    if not report:
        return out
    params = cp.X.params
    alpha, p, q = params.as_tuple
    x_norm = besov_seminorm(cp.X.base_path(), alpha, p, q, form="integral")
    base_norm = float(np.linalg.norm(cp.Yp[0])) + controlled_norm(cp)
    sup_f = max(
        float(np.abs(values).max()),
        float(np.abs(dvals).max()),
    )
    rhs = sup_f * (1 + x_norm) * max(base_norm, base_norm**2)
    lhs = controlled_norm(out)
    return out, {"lhs": lhs, "rhs": rhs,
                 "ratio": 0.0 if rhs == 0 else lhs / rhs}


# ---------------------------------------------------------------------------
# RDE solver


@dataclass
class RdeResult:
    controlled: ControlledPath
    iterations: list
    subintervals: list
    report: dict = dc_field(default_factory=dict)

    @property
    def path(self) -> GridPath:
        return self.controlled.y_path()


def _require_level2_field(F: VectorField, params: BesovParams):
    alpha, p, _ = params.as_tuple
    if alpha > 1.0 / 3.0 + 1e-12:
        ok = (
            F.order >= 2
            and (2 + F.delta) * alpha > 1
            and (p == INF or F.delta * alpha > 1.0 / p)
        )
        if not ok:
            raise RegimeError(
                f"field class C^{{{F.order},{F.delta}}} too weak:"
                f" need (2+delta)*alpha > 1 and delta*alpha > 1/p"
            )
    else:
        if F.order < 3:
            raise RegimeError("the critical level-2 regime needs a C^3 field")


def _dyadic_gauge_path(diff: np.ndarray, grid, alpha, p, q) -> float:
    path = GridPath(grid, diff.reshape(grid.n, -1))
    return besov_seminorm(path, alpha, p, q, form="dyadic")


def _dyadic_gauge_remainder(dz, zp, base, grid, alpha, p, q) -> float:
    """Dyadic-shift gauge of the remainder difference field of two iterates.

    dz, zp: differences of values/derivatives; O(n log n), used only as the
    Picard contraction gauge.
    """
    ratios = []
    for lev in range(1, grid.level + 1):
        k = 1 << (grid.level - lev)
        dx = base[k:] - base[:-k]
        r = dz[k:] - dz[:-k] - np.einsum("bmn,bn->bm", zp[:-k], dx)
        tau = grid.horizon * 2.0**-lev
        ratios.append(_band_lp(_mags(r), grid.mesh, p) / tau ** (2 * alpha))
    return _q_sum(np.asarray(ratios), q, log_weight=False)


def rde_solve(
    F: VectorField,
    X: RoughPath,
    y0,
    tol: float = 1e-9,
    max_iter: int = 100,
    max_halvings: int = 12,
) -> RdeResult:
    """Solve dY = F(Y) dX by the controlled Picard map on adaptive
    subintervals, seeded with the first-order Davie expansion."""
    params = X.params
    if not params.level2_ok:
        raise RegimeError(
            f"(alpha,p,q)={params.as_tuple} violates the level-2 conditions"
        )
    _require_level2_field(F, params)
    alpha, p, q = params.as_tuple
    grid = X.grid
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    m = len(y0)
    base = X.base_path().values
    dx_all = np.diff(base, axis=0)
    xx_all = X.level(2).band(1).reshape(grid.n - 1, X.n, X.n)
    Y = np.empty((grid.n, m))
    Y[0] = y0
    a = 0
    span = grid.n_cells
    iterations, subintervals = [], []
    halvings = 0
    p2 = p / 2 if p != INF else INF
    q2 = q / 2 if q != INF else INF
    while a < grid.n_cells:
        span = min(span, grid.n_cells - a)
        b = a + span
        sub_grid = X.restrict(a, b).grid
        ya = Y[a]
        f_ya = F(ya)
        seed = ya[None, :] + np.einsum("mn,bn->bm", f_ya, base[a:b + 1] - base[a])
        cur = seed
        cur_p = np.repeat(f_ya[None, :, :], span + 1, axis=0)
        converged = False
        prev_dist = None
        for it in range(1, max_iter + 1):
            fv = F.values_along(cur)          # (span+1, m, n)
            dfv = F.d_along(cur)              # (span+1, m, n, m)
            wp = np.einsum("bajc,bck->bajk", dfv, fv)
            incs = np.einsum("bmn,bn->bm", fv[:-1], dx_all[a:b]) + np.einsum(
                "bmjk,bkj->bm", wp[:-1], xx_all[a:b]
            )
            nxt = np.vstack([ya[None, :], ya + np.cumsum(incs, axis=0)])
            dist = _dyadic_gauge_path(fv - cur_p, sub_grid, alpha, p, q)
            dist += _dyadic_gauge_remainder(
                nxt - cur, fv - cur_p, base[a:b + 1] - base[a],
                sub_grid, alpha, p2, q2,
            )
            cur, cur_p = nxt, fv
            if dist < tol * max(1.0, float(np.abs(cur).max())):
                converged = True
                break
            if prev_dist is not None and prev_dist > 0 \
                    and dist / prev_dist >= 0.5 and it >= 3:
                break
            prev_dist = dist
        if not converged:
            halvings += 1
            if halvings > max_halvings or span == 1:
                raise NonContractionError(
                    f"no contraction on [{a}, {b}] after {halvings - 1} halvings"
                )
            span = max(1, span // 2)
            continue
        Y[a:b + 1] = cur
        iterations.append(it)
        subintervals.append((a, b))
        a = b
    yp = F.values_along(Y)
    cp = ControlledPath(X, Y, yp)
    t0 = subintervals[0][1] * grid.mesh if subintervals else grid.horizon
    inv_p = 0.0 if p == INF else 1.0 / p
    report = {
        "halvings": halvings,
        "smallness_monitor": t0 ** (alpha - inv_p),
        "sup": float(np.abs(Y).max()),
    }
    return RdeResult(controlled=cp, iterations=iterations,
                     subintervals=subintervals, report=report)


# ---------------------------------------------------------------------------
# Davie residual and stability


def davie_residual(
    cp: ControlledPath,
    F: VectorField,
    X: RoughPath | None = None,
    h_range: tuple[float, float] | None = None,
) -> dict:
    """Residual D = dY - f(Y_s) dX - Df(Y_s) f(Y_s) XX, its two-parameter norm
    at (3a, p/3, q/3) (endpoint: the omega profile), and the log-log slope of
    sup_{|t-s|=h} |D| over dyadic h."""
    X = X or cp.X
    grid = X.grid
    params = X.params
    alpha, p, q = params.as_tuple
    Y = cp.Y
    fv = F.values_along(Y)
    dfv = F.d_along(Y)
    wp = np.einsum("bajc,bck->bajk", dfv, fv)
    base = X.base_path().values
    xx_field = X.level(2)
    yflat = Y.reshape(grid.n, -1)

    def germ(ii, jj):
        dx = base[jj] - base[ii]
        xx = xx_field.pairs(ii, jj).reshape(len(ii), X.n, X.n)
        lead = np.einsum("bmn,bn->bm", fv[ii], dx) + np.einsum(
            "bmjk,bkj->bm", wp[ii], xx
        )
        return yflat[jj] - yflat[ii] - lead

    D = TwoParamField(grid, yflat.shape[1], germ=germ)
    endpoint = alpha <= 1.0 / 3.0 + 1e-12
    if endpoint:
        norm = two_param_norm(D, 1.0, p / 3, INF)
        profile = _osc_profile(D, p / 3)
    else:
        norm = two_param_norm(D, 3 * alpha, p / 3, q / 3 if q != INF else INF)
        profile = None
    if h_range is None:
        h_range = (grid.mesh * 4, grid.horizon / 8)
    hs, sups = [], []
    for lev in range(1, grid.level + 1):
        h = grid.horizon * 2.0**-lev
        if h_range[0] - 1e-15 <= h <= h_range[1] + 1e-15:
            k = 1 << (grid.level - lev)
            sup = float(_mags(D.band(k)).max())
            if sup > 0:
                hs.append(h)
                sups.append(sup)
    if len(hs) >= 2:
        fit = linregress(np.log(hs), np.log(sups))
        slope, r2 = float(fit.slope), float(fit.rvalue**2)
    else:
        slope, r2 = INF, 1.0
    return {"field": D, "norm": norm, "slope": slope, "r2": r2,
            "endpoint": endpoint, "profile": profile}


def _osc_profile(D: TwoParamField, p: float) -> list:
    from .sewing import small_oscillation_check

    return small_oscillation_check(D, p)["profile"]


def rde_stability_probe(
    F1: VectorField, F2: VectorField,
    X1: RoughPath, X2: RoughPath,
    y1, y2,
) -> dict:
    """Ito-Lyons local-Lipschitz probe: controlled distance of the two
    solutions over the distance of the data."""
    s1 = rde_solve(F1, X1, y1)
    s2 = rde_solve(F2, X2, y2)
    num = controlled_distance(s1.controlled, s2.controlled, X1.params)
    y1 = np.atleast_1d(np.asarray(y1, dtype=float))
    y2 = np.atleast_1d(np.asarray(y2, dtype=float))
    cloud = _probe_cloud(s1.controlled.Y, s2.controlled.Y)
    proxy = field_distance_proxy(F1, F2, cloud)
    d2_gap = max(
        float(np.abs(F1.d2(y) - F2.d2(y)).max())
        for y in cloud[:: max(1, len(cloud) // 32)]
    )
    proxy += d2_gap
    den = float(np.linalg.norm(y1 - y2)) + rough_metric(X1, X2) + proxy
    return {
        "output_dist": num,
        "input_dist": den,
        "ratio": 0.0 if den == 0 else num / den,
        "solution_sup": (s1.report["sup"], s2.report["sup"]),
    }
