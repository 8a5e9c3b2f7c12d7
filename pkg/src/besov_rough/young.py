"""Young integration and differential equations driven by Besov paths.

The integral germ is the left-point product f_s * (g_t - g_s); the ODE solver
iterates Y <- y0 + int F(Y) dX with a trapezoid-compensated germ
(1/2)(F(Y_s) + F(Y_t)) dX_{st}, which sews to the same integral (the germs
differ by (1/2) dF dX, of coboundary order) and keeps the discrete fixed
point second-order accurate on sampled smooth drivers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonContractionError, RegimeError
from .grid import GridPath, TwoParamField
from .norms import BesovParams, INF, besov_seminorm, lp_norm
from .sewing import SewingInput, SewingResult, sew

__all__ = [
    "YoungRegime",
    "VectorField",
    "linear_field",
    "rotation_field",
    "sigmoid_field",
    "scalar_linear_field",
    "young_integral",
    "YoungIntegralResult",
    "besov_composition_check",
    "young_ode_solve",
    "OdeSolution",
    "ito_lyons_probe_young",
]


def _harmonic(a: float, b: float) -> float:
    if a == INF and b == INF:
        return INF
    inv = (0.0 if a == INF else 1.0 / a) + (0.0 if b == INF else 1.0 / b)
    return INF if inv == 0.0 else 1.0 / inv


@dataclass(frozen=True)
class YoungRegime:
    """Parameter bookkeeping for the product germ f_s * dg.

    gamma = alpha0 + alpha1 and the Hoelder-conjugate p2, q2.  Case 'a' is
    gamma > max(1, 1/p2); case 'b' the critical gamma = max(1, 1/p2) <= 1/q2.
    """

    f_params: BesovParams
    g_params: BesovParams

    @property
    def gamma(self) -> float:
        return self.f_params.alpha + self.g_params.alpha

    @property
    def p2(self) -> float:
        return _harmonic(self.f_params.p, self.g_params.p)

    @property
    def q2(self) -> float:
        return _harmonic(self.f_params.q, self.g_params.q)

    @property
    def case(self) -> str:
        crit = max(1.0, 1.0 / self.p2)
        if self.gamma > crit + 1e-12:
            return "a"
        q2 = self.q2
        if abs(self.gamma - crit) <= 1e-12 and (
            q2 != INF and self.gamma <= 1.0 / q2 + 1e-12
        ):
            return "b"
        raise RegimeError(
            f"Young regime violated: gamma={self.gamma}, max(1,1/p2)="
            f"{crit}, 1/q2={0.0 if q2 == INF else 1.0 / q2}"
        )

    def sewing_input(self, germ: TwoParamField) -> SewingInput:
        endpoint = self.case == "b"
        gamma = max(1.0, 1.0 / self.p2) if endpoint else self.gamma
        return SewingInput(
            germ=germ, gamma=gamma, p2=self.p2, q2=self.q2, endpoint=endpoint
        )


class VectorField:
    """Nonlinearity y -> f(y) in R^{m x n} with analytic derivatives.

    `order` is the number of supplied derivatives; `delta` the Hoelder
    exponent of the highest one (class C^{order,delta}).
    """

    def __init__(self, fun, dfun, d2fun=None, order=1, delta=1.0, name="field",
                 state_dim=1, fun_batch=None, dfun_batch=None, d2fun_batch=None):
        self.fun = fun
        self.dfun = dfun
        self.d2fun = d2fun
        self.order = order
        self.delta = delta
        self.name = name
        self.state_dim = state_dim
        self._fun_batch = fun_batch
        self._dfun_batch = dfun_batch
        self._d2fun_batch = d2fun_batch

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self.fun(np.asarray(y, dtype=float))

    def d(self, y: np.ndarray) -> np.ndarray:
        return self.dfun(np.asarray(y, dtype=float))

    def d2(self, y: np.ndarray) -> np.ndarray:
        if self.d2fun is None:
            raise RegimeError(f"{self.name}: second derivative not supplied")
        return self.d2fun(np.asarray(y, dtype=float))

    def validate(self, rng, points: int = 20, step: float = 1e-6,
                 rtol: float = 1e-5, scale: float = 1.0) -> float:
        """Max relative error of dfun against finite differences of fun."""
        worst = 0.0
        for _ in range(points):
            y = rng.standard_normal(self.state_dim) * scale
            d_exact = self.d(y)
            for b in range(len(y)):
                e = np.zeros_like(y)
                e[b] = step
                fd = (self(y + e) - self(y - e)) / (2 * step)
                denom = max(1.0, float(np.abs(d_exact[..., b]).max()))
                worst = max(worst, float(np.abs(fd - d_exact[..., b]).max()) / denom)
        if worst > rtol:
            raise RegimeError(
                f"{self.name}: derivative inconsistent with finite differences"
                f" (rel err {worst:.2e} > {rtol:g})"
            )
        return worst

    def values_along(self, Y: np.ndarray) -> np.ndarray:
        """f(Y_t) for all nodes, shape (nodes, m, n)."""
        if self._fun_batch is not None:
            return self._fun_batch(Y)
        return np.stack([self.fun(y) for y in Y])

    def d_along(self, Y: np.ndarray) -> np.ndarray:
        if self._dfun_batch is not None:
            return self._dfun_batch(Y)
        return np.stack([self.dfun(y) for y in Y])

    def d2_along(self, Y: np.ndarray) -> np.ndarray:
        if self._d2fun_batch is not None:
            return self._d2fun_batch(Y)
        return np.stack([self.d2fun(y) for y in Y])


def _mk_field(fun, dfun, d2fun, order, delta, name, state_dim, **batch):
    return VectorField(fun, dfun, d2fun=d2fun, order=order, delta=delta,
                       name=name, state_dim=state_dim, **batch)


def linear_field(matrices) -> VectorField:
    """f(y)[:, j] = A_j y for a list of (m, m) matrices, one per driver channel."""
    mats = np.stack([np.asarray(a, dtype=float) for a in matrices], axis=-1)
    m = mats.shape[0]
    dmat = np.transpose(mats, (0, 2, 1))

    def fun(y):
        return np.einsum("abj,b->aj", mats, y)

    def dfun(y):
        return dmat

    def d2fun(y):
        return np.zeros((m, mats.shape[2], m, m))

    return _mk_field(
        fun, dfun, d2fun, 3, 1.0, "linear", m,
        fun_batch=lambda Y: np.einsum("abj,kb->kaj", mats, Y),
        dfun_batch=lambda Y: np.broadcast_to(dmat, (len(Y),) + dmat.shape).copy(),
        d2fun_batch=lambda Y: np.zeros((len(Y), m, mats.shape[2], m, m)),
    )


def rotation_field() -> VectorField:
    """Two noncommuting linear channels on R^2 (rotation + shear generators)."""
    return linear_field([
        np.array([[0.0, -1.0], [1.0, 0.0]]),
        np.array([[1.0, 0.0], [0.0, -1.0]]),
    ])


def scalar_linear_field() -> VectorField:
    """dY = Y dX in one dimension."""
    return linear_field([np.array([[1.0]])])


def sigmoid_field(m: int = 1, n: int = 1, gain: float = 1.0) -> VectorField:
    """Bounded C^3 saturating field: f[a, j] = tanh(gain * w_{aj} . y)."""
    w = np.zeros((m, n, m))
    for a in range(m):
        for j in range(n):
            w[a, j, (a + j) % m] = 1.0
    w = gain * w

    def pre(y):
        return np.einsum("ajb,b->aj", w, y)

    def fun(y):
        return np.tanh(pre(y))

    def dfun(y):
        s = 1.0 - np.tanh(pre(y)) ** 2
        return s[:, :, None] * w

    def d2fun(y):
        t = np.tanh(pre(y))
        s = 1.0 - t**2
        return (-2.0 * t * s)[:, :, None, None] * w[:, :, :, None] * w[:, :, None, :]

    def fun_batch(Y):
        return np.tanh(np.einsum("ajb,kb->kaj", w, Y))

    def dfun_batch(Y):
        s = 1.0 - np.tanh(np.einsum("ajb,kb->kaj", w, Y)) ** 2
        return s[:, :, :, None] * w[None, :, :, :]

    return _mk_field(fun, dfun, d2fun, 3, 1.0, "sigmoid", m,
                     fun_batch=fun_batch, dfun_batch=dfun_batch)


# ---------------------------------------------------------------------------
# integration


@dataclass
class YoungIntegralResult:
    integral: GridPath
    remainder_norm: float
    sewing: SewingResult

    @property
    def endpoint(self) -> bool:
        return self.sewing.input.endpoint


def product_germ(f: GridPath, g: GridPath, mode: str = "lazy") -> TwoParamField:
    """Left-point germ f_s (g_t - g_s), one component per (i, j) pair of
    coordinates of f and g."""
    if f.grid != g.grid:
        raise ValueError("paths must share a grid")
    fv, gv = f.values, g.values
    dim = f.dim * g.dim

    def germ(ii, jj):
        return np.einsum("ka,kb->kab", fv[ii], gv[jj] - gv[ii]).reshape(len(ii), dim)

    return TwoParamField.from_germ(f.grid, dim, germ, mode=mode)


def young_integral(
    f: GridPath, g: GridPath, regime: YoungRegime, diagnostics: bool = False
) -> YoungIntegralResult:
    """int f dg by sewing the left-point product germ.

    The remainder report is the (gamma, p2, q2) two-parameter norm of
    (delta I) - f dg, against the omega modulus in the critical case.
    """
    regime.case  # validates
    germ = product_germ(f, g, mode="lazy")
    result = sew(regime.sewing_input(germ), diagnostics=diagnostics)
    return YoungIntegralResult(
        integral=result.integral,
        remainder_norm=result.remainder_norm,
        sewing=result,
    )


def besov_composition_check(
    F: VectorField,
    Y: GridPath,
    params: BesovParams,
    delta: float | None = None,
    Y_tilde: GridPath | None = None,
) -> dict:
    """Both sides of the composition bound
    [f(Y)]_{B^{d a}_{p, q/d}} <= [f]_{C^d} T^{(1-d)/p} [Y]_{B^a_pq}^d,
    plus (when Y_tilde is given and alpha > 1/p) the difference variant.
    Reports ratios; constants are fitted by the caller, never asserted.
    """
    delta = F.delta if delta is None else delta
    alpha, p, q = params.as_tuple
    fY = GridPath(Y.grid, F.values_along(Y.values).reshape(Y.grid.n, -1))
    lhs = besov_seminorm(fY, delta * alpha, p, q / delta if q != INF else INF,
                         form="integral")
    cloud = Y.values[:: max(1, Y.grid.n // 512)]
    fc = F.values_along(cloud).reshape(len(cloud), -1)
    dmat = np.sqrt(
        np.sum((cloud[:, None, :] - cloud[None, :, :]) ** 2, axis=-1)
    )
    fdiff = np.sqrt(np.sum((fc[:, None, :] - fc[None, :, :]) ** 2, axis=-1))
    mask = dmat > 1e-12
    c_delta = float((fdiff[mask] / dmat[mask] ** delta).max()) if mask.any() else 0.0
    t_pow = Y.grid.horizon ** ((1 - delta) / p) if p != INF else 1.0
    rhs = c_delta * t_pow * besov_seminorm(Y, alpha, p, q, form="integral") ** delta
    report = {"lhs": lhs, "rhs": rhs, "ratio": 0.0 if rhs == 0 else lhs / rhs,
              "c_delta": c_delta}
    if Y_tilde is not None:
        if alpha <= 1.0 / p:
            raise RegimeError("difference composition bound needs alpha > 1/p")
        fYt = GridPath(
            Y.grid, F.values_along(Y_tilde.values).reshape(Y.grid.n, -1)
        )
        diff_lhs = besov_seminorm(
            fY - fYt, delta * alpha, p, q / delta if q != INF else INF,
            form="integral",
        )
        drive = (
            float(np.linalg.norm(Y.values[0] - Y_tilde.values[0]))
            + besov_seminorm(Y - Y_tilde, alpha, p, q, form="integral")
        )
        report["difference_lhs"] = diff_lhs
        report["difference_ratio"] = 0.0 if drive == 0 else diff_lhs / drive
    return report


# ---------------------------------------------------------------------------
# Young ODE


@dataclass
class OdeSolution:
    path: GridPath
    iterations: list
    subintervals: list
    bound: dict


def _solver_metric(a: np.ndarray, b: np.ndarray, grid, params: BesovParams) -> float:
    """Cheap contraction gauge: L^p plus the dyadic-form seminorm (O(n log n));
    equivalent, up to constants, to the full integral-form metric."""
    d = GridPath(grid, a - b)
    return lp_norm(d, params.p) + besov_seminorm(
        d, params.alpha, params.p, params.q, form="dyadic"
    )


def _require_young_field(F: VectorField, params: BesovParams):
    if params.alpha > 0.5:
        need = (1 + F.delta) * params.alpha > 1 and (
            params.p == INF or F.delta * params.alpha > 1.0 / params.p
        )
        if F.order < 1 or not need:
            raise RegimeError(
                "vector field class too weak for the Young regime:"
                f" order={F.order}, delta={F.delta}, alpha={params.alpha},"
                f" p={params.p}"
            )
    else:
        if F.order < 2:
            raise RegimeError("critical Young regime needs a C^2 field")


def young_ode_solve(
    F: VectorField,
    X: GridPath,
    y0,
    params: BesovParams,
    tol: float = 1e-10,
    max_iter: int = 100,
    max_halvings: int = 12,
) -> OdeSolution:
    """Solve dY = F(Y) dX by Picard iteration on adaptive subintervals.

    Each sweep is Y <- y0 + I(germ) with the trapezoid-compensated germ; a
    subinterval is halved whenever the contraction factor reaches 1/2.
    """
    if not params.young_ok:
        raise RegimeError(f"(alpha,p,q)={params.as_tuple} outside the Young regime")
    _require_young_field(F, params)
    grid = X.grid
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    m = len(y0)
    dX = np.diff(X.values, axis=0)
    Y = np.empty((grid.n, m))
    Y[0] = y0
    a = 0
    span = grid.n_cells
    iterations, subintervals = [], []
    halvings = 0
    while a < grid.n_cells:
        span = min(span, grid.n_cells - a)
        b = a + span
        sub = X.restrict(a, b)
        ya = Y[a]
        cur = np.repeat(ya[None, :], span + 1, axis=0)
        converged = False
        prev_dist = None
        for it in range(1, max_iter + 1):
            fvals = F.values_along(cur)  # (span+1, m, n)
            incs = 0.5 * np.einsum(
                "kmn,kn->km", fvals[:-1] + fvals[1:], dX[a:b]
            )
            nxt = np.vstack([ya[None, :], ya + np.cumsum(incs, axis=0)])
            dist = _solver_metric(nxt, cur, sub.grid, params)
            cur = nxt
            if dist < tol * max(1.0, float(np.abs(cur).max())):
                converged = True
                break
            if prev_dist is not None and prev_dist > 0 and dist / prev_dist >= 0.5 \
                    and it >= 3:
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
    path = GridPath(grid, Y)
    bound = {
        "sup": float(np.abs(Y).max()),
        "seminorm": besov_seminorm(path, params.alpha, params.p, params.q,
                                   form="dyadic"),
        "halvings": halvings,
    }
    return OdeSolution(path=path, iterations=iterations,
                       subintervals=subintervals, bound=bound)


def field_distance_proxy(F1: VectorField, F2: VectorField,
                         cloud: np.ndarray) -> float:
    """Max value plus first-derivative gap over a sample cloud."""
    dv = 0.0
    dd = 0.0
    for y in cloud:
        dv = max(dv, float(np.abs(F1(y) - F2(y)).max()))
        dd = max(dd, float(np.abs(F1.d(y) - F2.d(y)).max()))
    return dv + dd


def _probe_cloud(*paths: np.ndarray) -> np.ndarray:
    pts = np.vstack(paths)
    stride = max(1, len(pts) // 128)
    pts = pts[::stride]
    radius = 2.0 * max(1e-9, float(np.abs(pts).max()))
    offsets = [np.zeros(pts.shape[1])]
    for j in range(pts.shape[1]):
        for s in (0.5, 1.0):
            e = np.zeros(pts.shape[1])
            e[j] = s * radius
            offsets.extend([e, -e])
    return np.vstack([pts + off for off in offsets])


def ito_lyons_probe_young(
    F1: VectorField, F2: VectorField,
    X1: GridPath, X2: GridPath,
    y1, y2,
    params: BesovParams,
) -> dict:
    """Local-Lipschitz probe of the solution map: output distance over input
    distance, with the vector-field distance measured on a sample cloud."""
    s1 = young_ode_solve(F1, X1, y1, params)
    s2 = young_ode_solve(F2, X2, y2, params)
    out = besov_seminorm(s1.path - s2.path, *params.as_tuple, form="integral")
    y1 = np.atleast_1d(np.asarray(y1, dtype=float))
    y2 = np.atleast_1d(np.asarray(y2, dtype=float))
    cloud = _probe_cloud(s1.path.values, s2.path.values)
    inp = (
        float(np.linalg.norm(y1 - y2))
        + besov_seminorm(X1 - X2, *params.as_tuple, form="integral")
        + field_distance_proxy(F1, F2, cloud)
    )
    return {
        "output_dist": out,
        "input_dist": inp,
        "ratio": 0.0 if inp == 0 else out / inp,
    }
