"""Flows, variational equations, period detection and orbit sampling.

A :class:`PeriodicFlow` couples a vector field ``X`` whose orbits are all
periodic with its frequency function ``omega = 2*pi/T``.  The rescaled
generator ``Upsilon = X/omega`` has a flow of period exactly ``2*pi`` and is
what the averaging operators integrate over.

Single trajectories go through ``scipy.integrate.solve_ivp``.  Whole orbit
samples are produced by a batched fixed-step eighth-order Runge-Kutta
integrator that advances many base points at once together with their
variational equations; its accuracy is certified after the fact by the
closure of the orbit (``Fl^{2pi} = id`` and ``D Fl^{2pi} = I``) and the step
is refined until that closure holds.
"""
from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp
from scipy.integrate._ivp import dop853_coefficients as _dop

from .errors import (ClosureError, DomainError, IntegrationError, PeriodDetectionError,
                     SingularPointError)
from .tensor import (CallableField, FDPolicy, SympyField, TensorField, Valence, as_points,
                     exterior_derivative, lie_derivative, wedge)

__all__ = [
    "IntegratorConfig",
    "OrbitSample",
    "PeriodicFlow",
    "flow",
    "flow_with_jacobian",
    "detect_period",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class IntegratorConfig:
    """Settings for trajectory integration.

    ``rtol``/``atol``/``max_step`` drive the adaptive solver.  Orbit samples
    use ``min_substeps`` fixed steps per node interval, doubled up to
    ``max_substeps`` until the orbit closes within ``closure_tol``.
    """

    method: str = "DOP853"
    rtol: float = 1e-10
    atol: float = 1e-10
    max_step: float = np.inf
    min_substeps: int = 1
    max_substeps: int = 64
    closure_tol: float = 1e-10
    jacobian_closure_tol: float = 1e-8

    def __post_init__(self):
        for name in ("rtol", "atol"):
            v = getattr(self, name)
            if not (0.0 < v <= 1e-2):
                raise ValueError(f"{name} must lie in (0, 1e-2], got {v}")
        if self.method not in ("DOP853", "RK45", "Radau", "LSODA"):
            raise ValueError(f"unsupported integrator {self.method!r}")
        if self.min_substeps < 1 or self.max_substeps < self.min_substeps:
            raise ValueError("substep bounds must satisfy 1 <= min <= max")


DEFAULT_CONFIG = IntegratorConfig()


# ---------------------------------------------------------------------------
# adaptive single-trajectory integration
# ---------------------------------------------------------------------------


def _dx_matrix(X: TensorField, x: np.ndarray) -> np.ndarray:
    # jacobian()[p, i, a] = d_i X^a, so DX[a, b] = jac[b, a]
    return np.swapaxes(X.jacobian(x), -1, -2)


def _run_ivp(rhs, y0, t, config: IntegratorConfig, **kw):
    try:
        sol = solve_ivp(rhs, (0.0, float(t)), y0, method=config.method, rtol=config.rtol,
                        atol=config.atol, max_step=config.max_step, **kw)
    except DomainError:
        raise
    if sol.status < 0:
        raise IntegrationError(sol.message)
    if not np.all(np.isfinite(sol.y[:, -1])):
        raise IntegrationError("trajectory became non-finite")
    return sol


def flow(X: TensorField, m, t: float, config: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Time-``t`` flow of ``X`` from ``m`` (one point or a batch of shape ``(P, dim)``)."""
    single = np.ndim(m) == 1
    pts = as_points(m, X.dim)
    X.chart.check(pts, "initial point")
    if t == 0:
        return pts[0].copy() if single else pts.copy()
    P, dim = pts.shape

    def rhs(_, y):
        return X.evaluate(y.reshape(P, dim)).ravel()

    out = _run_ivp(rhs, pts.ravel(), t, config).y[:, -1].reshape(P, dim)
    X.chart.check(out, "flow endpoint")
    return out[0] if single else out


def flow_with_jacobian(X: TensorField, m, t: float, config: IntegratorConfig = DEFAULT_CONFIG):
    """Flow together with its differential ``D_m Fl_X^t`` (variational equation)."""
    single = np.ndim(m) == 1
    pts = as_points(m, X.dim)
    X.chart.check(pts, "initial point")
    P, dim = pts.shape
    eye = np.broadcast_to(np.eye(dim), (P, dim, dim))
    if t == 0:
        return (pts[0].copy(), np.eye(dim)) if single else (pts.copy(), eye.copy())

    def rhs(_, y):
        y = y.reshape(P, dim + dim * dim)
        x, J = y[:, :dim], y[:, dim:].reshape(P, dim, dim)
        v = X.evaluate(x)
        dJ = _dx_matrix(X, x) @ J
        return np.concatenate([v, dJ.reshape(P, -1)], axis=1).ravel()

    y0 = np.concatenate([pts, eye.reshape(P, -1)], axis=1).ravel()
    y = _run_ivp(rhs, y0, t, config).y[:, -1].reshape(P, dim + dim * dim)
    x, J = y[:, :dim], y[:, dim:].reshape(P, dim, dim)
    X.chart.check(x, "flow endpoint")
    return (x[0], J[0]) if single else (x, J)


def _scale(m: np.ndarray) -> np.ndarray:
    return np.maximum(1.0, np.linalg.norm(m, axis=-1))


def detect_period(X: TensorField, m, hint: float, config: IntegratorConfig = DEFAULT_CONFIG,
                  regularity_floor: float = 1e-8, newton_tol: float = 1e-10,
                  max_newton: int = 20) -> float:
    """Minimal period of the orbit of ``X`` through ``m``.

    The orbit is followed until it crosses the hyperplane through ``m``
    normal to ``X(m)`` in the positive direction close to ``m``; the crossing
    time is then refined by Newton iteration on the section condition.
    """
    m = as_points(m, X.dim)[0]
    v0 = X.evaluate(m)[0]
    speed = np.linalg.norm(v0)
    if speed < regularity_floor * _scale(m):
        raise SingularPointError(f"X vanishes at {m.tolist()}; no period defined")
    if not hint > 0:
        raise ValueError("period hint must be positive")
    n = v0 / speed
    size = max(1.0, float(np.linalg.norm(m)))

    chart = X.chart

    def section(_, y):
        return float(np.dot(chart.displacement(m, y), n))

    section.direction = 1.0

    def rhs(_, y):
        return X.evaluate(y)[0]

    sol = _run_ivp(rhs, m.copy(), 4.0 * hint, config, events=section, dense_output=False)
    t_hit = None
    for t_e, y_e in zip(sol.t_events[0], sol.y_events[0]):
        # skip the departure and far-away crossings of the hyperplane
        if t_e > 1e-6 * hint and np.linalg.norm(chart.displacement(m, y_e)) < 1e-3 * size:
            t_hit = float(t_e)
            break
    if t_hit is None:
        raise PeriodDetectionError(f"no return to the section through {m.tolist()} within {4 * hint:g}")

    tight = IntegratorConfig(method=config.method, rtol=min(config.rtol, 1e-12),
                             atol=min(config.atol, 1e-12), max_step=config.max_step)
    t = t_hit
    for _ in range(max_newton):
        y = flow(X, m, t, tight)
        g = float(np.dot(chart.displacement(m, y), n))
        dg = float(np.dot(X.evaluate(y)[0], n))
        step = g / dg
        t -= step
        if abs(step) < newton_tol * max(1.0, t):
            break
    return t


# ---------------------------------------------------------------------------
# batched fixed-step DOP853
# ---------------------------------------------------------------------------

_NS = _dop.N_STAGES
_A = _dop.A[:_NS, :_NS]
_B = _dop.B
_C = _dop.C[:_NS]


def _rk_step(rhs, y: np.ndarray, h) -> np.ndarray:
    K = np.empty((_NS,) + y.shape)
    K[0] = rhs(y)
    for s in range(1, _NS):
        dy = np.tensordot(_A[s, :s], K[:s], axes=(0, 0))
        K[s] = rhs(y + h * dy)
    return y + h * np.tensordot(_B, K, axes=(0, 0))


def _integrate_nodes(rhs, y0: np.ndarray, N: int, substeps: int, span: float = TWO_PI):
    """States at ``t_j = span*j/N``, ``j = 0..N`` (inclusive), shape ``(N+1, P, ...)``."""
    h = span / (N * substeps)
    out = np.empty((N + 1,) + y0.shape)
    out[0] = y0
    y = y0
    for j in range(N):
        for _ in range(substeps):
            y = _rk_step(rhs, y, h)
        out[j + 1] = y
    return out


@dataclass(frozen=True)
class OrbitSample:
    """Uniform samples of the ``Upsilon``-orbits through a batch of base points.

    Attributes
    ----------
    base : (P, dim) base points.
    nodes : (P, N, dim) points ``Fl_Upsilon^{t_j}(base)``, ``t_j = 2*pi*j/N``.
    jacobians : (P, N, dim, dim) ``D_m Fl_Upsilon^{t_j}``.
    inverse_jacobians : (P, N, dim, dim) their inverses.
    closure_error : (P,) ``|Fl^{2pi}(m) - m|``.
    fixed : (P,) True where the constant-orbit shortcut was used.
    """

    base: np.ndarray
    nodes: np.ndarray
    jacobians: np.ndarray
    inverse_jacobians: np.ndarray
    closure_error: np.ndarray
    fixed: np.ndarray
    source: object = field(default=None, compare=False, repr=False)

    @property
    def N(self) -> int:
        return self.nodes.shape[1]

    @property
    def times(self) -> np.ndarray:
        return TWO_PI * np.arange(self.N) / self.N

    def condition_numbers(self) -> np.ndarray:
        return np.linalg.cond(self.jacobians)

    def __len__(self):
        return self.base.shape[0]

    def subset(self, idx) -> "OrbitSample":
        return OrbitSample(self.base[idx], self.nodes[idx], self.jacobians[idx],
                           self.inverse_jacobians[idx], self.closure_error[idx], self.fixed[idx],
                           self.source)


# ---------------------------------------------------------------------------
# periodic flows
# ---------------------------------------------------------------------------


def _sympy_quotient(X: TensorField, omega: TensorField):
    if isinstance(X, SympyField) and isinstance(omega, SympyField):
        w = omega.exprs[0]
        return SympyField(X.chart, Valence.vector(1), [sp.simplify(e / w) for e in X.exprs],
                          label=f"({X.label})/omega")
    return None


class PeriodicFlow:
    """A vector field with periodic orbits and its frequency data.

    Parameters
    ----------
    X : vector field.
    omega : scalar field, the frequency ``2*pi/T``; alternatively give ``period``.
    period : scalar field ``T``.  If neither is given the period is detected
        numerically at each point, starting from ``period_hint``.
    check_points : points at which construction verifies ``omega > 0``,
        ``L_X omega = 0`` and closure of the ``Upsilon``-orbits.
    allow_fixed_points : evaluate at zeros of ``X`` with the constant-orbit
        shortcut instead of raising.
    """

    CHUNK = 256

    def __init__(self, X: TensorField, omega: Optional[TensorField] = None,
                 period: Optional[TensorField] = None, *, period_hint=None,
                 config: IntegratorConfig = DEFAULT_CONFIG, default_nodes: int = 256,
                 regularity_floor: float = 1e-8, allow_fixed_points: bool = False,
                 check_points=None, label: str = "", cache_size: int = 20000):
        if X.valence != Valence.vector(1):
            raise ValueError("PeriodicFlow needs a vector field")
        self.X = X
        self.chart = X.chart
        self.config = config
        self.default_nodes = default_nodes
        self.regularity_floor = regularity_floor
        self.allow_fixed_points = allow_fixed_points
        self.label = label or X.label
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache_size
        self._lock = threading.RLock()
        self.period_hint = period_hint

        if omega is None and period is not None:
            omega = period.apply(lambda T: TWO_PI / T, lambda T: -TWO_PI / T ** 2, "2pi/")
        self.numeric_omega = omega is None
        if omega is None:
            if period_hint is None:
                raise ValueError("numeric period detection needs a period_hint")
            omega = CallableField(self.chart, Valence.scalar(), self._detect_omega,
                                  label="omega(detected)",
                                  fd_policy=FDPolicy(order=4, rel_step=1e-4, abs_step=1e-4))
        self.omega = omega
        self.upsilon = _sympy_quotient(X, omega) or wedge(
            omega.apply(lambda w: 1.0 / w, lambda w: -1.0 / w ** 2, "1/"), X)
        self.upsilon.label = f"Upsilon[{self.label}]"
        self.d_omega = exterior_derivative(omega)

        if check_points is not None:
            self.verify(check_points)

    # -- numeric frequency ---------------------------------------------------
    def _hint_at(self, m):
        h = self.period_hint
        return float(h(m)) if callable(h) else float(h)

    def _detect_omega(self, pts):
        out = np.empty((pts.shape[0], 1))
        for i, m in enumerate(pts):
            out[i, 0] = TWO_PI / detect_period(self.X, m, self._hint_at(m), self.config,
                                               self.regularity_floor)
        return out

    # -- diagnostics -------------------------------------------------------
    def speed_ok(self, pts) -> np.ndarray:
        pts = as_points(pts, self.chart.dim)
        return np.linalg.norm(self.X.evaluate(pts), axis=1) >= self.regularity_floor * _scale(pts)

    def verify(self, pts, tol: float = 1e-7) -> None:
        """Check frequency positivity, first-integral property and orbit closure."""
        pts = as_points(pts, self.chart.dim)
        w = self.omega.evaluate(pts)[:, 0]
        if np.any(w <= 0):
            raise ClosureError("omega must be positive on the chart")
        if not self.numeric_omega:
            lx = lie_derivative(self.X, self.omega).evaluate(pts)[:, 0]
            if np.any(np.abs(lx) > tol * (1.0 + np.abs(w))):
                raise ClosureError(f"omega is not a first integral of X (|L_X omega| = "
                                   f"{np.max(np.abs(lx)):.3g})")
        self.sample(pts[self.speed_ok(pts)])

    # -- orbit sampling ------------------------------------------------------
    def _key(self, m, N):
        return (N, tuple(np.round(m, 12).tolist()))

    def sample(self, pts, N: Optional[int] = None, method: str = "variational") -> OrbitSample:
        """Orbit samples through ``pts`` with ``N`` nodes (a power of two, at least 16)."""
        N = int(N or self.default_nodes)
        if N < 4 or N & (N - 1):
            raise ValueError(f"node count must be a power of two, got {N}")
        pts = as_points(pts, self.chart.dim)
        self.chart.check(pts, "orbit base point")
        if method != "variational":
            return self._compute(pts, N, method)
        keys = [self._key(m, N) for m in pts]
        with self._lock:
            missing = [i for i, k in enumerate(keys) if k not in self._cache]
        # duplicate points within a batch are computed once
        uniq = list(OrderedDict((keys[i], i) for i in missing).values())
        for start in range(0, len(uniq), self.CHUNK):
            idx = uniq[start:start + self.CHUNK]
            res = self._compute(pts[idx], N, method)
            with self._lock:
                for r, i in enumerate(idx):
                    self._cache[keys[i]] = tuple(a[r] for a in (
                        res.base, res.nodes, res.jacobians, res.inverse_jacobians,
                        res.closure_error, res.fixed))
                while len(self._cache) > self._cache_size:
                    self._cache.popitem(last=False)
        with self._lock:
            rows = [self._cache[k] for k in keys]
            for k in keys:
                self._cache.move_to_end(k)
        cols = [np.stack(c) for c in zip(*rows)]
        cols[0] = pts.copy()
        return OrbitSample(*cols, source=self)

    def clear_cache(self):
        with self._lock:
            self._cache.clear()

    def _compute(self, pts: np.ndarray, N: int, method: str) -> OrbitSample:
        P, dim = pts.shape
        fixed = ~self.speed_ok(pts)
        if np.any(fixed) and not self.allow_fixed_points:
            bad = pts[fixed][0]
            raise SingularPointError(f"generator vanishes at {bad.tolist()}")
        nodes = np.repeat(pts[:, None, :], N, axis=1)
        jac = np.broadcast_to(np.eye(dim), (P, N, dim, dim)).copy()
        closure = np.zeros(P)
        reg = np.flatnonzero(~fixed)
        if reg.size:
            if method == "variational":
                n_r, j_r, c_r = self._orbit_variational(pts[reg], N)
            elif method == "rescaled":
                n_r, j_r, c_r = self._orbit_rescaled(pts[reg], N)
            else:
                raise ValueError(f"unknown sampling method {method!r}")
            nodes[reg], jac[reg], closure[reg] = n_r, j_r, c_r
        inv = np.linalg.inv(jac)
        return OrbitSample(pts.copy(), nodes, jac, inv, closure, fixed, source=self)

    def _refine(self, rhs_factory, pts: np.ndarray, N: int):
        """Integrate until orbit and Jacobian closure hold, doubling substeps row-wise."""
        P, dim = pts.shape
        nodes = np.empty((P, N, dim))
        jac = np.empty((P, N, dim, dim))
        closure = np.full(P, np.inf)
        pending = np.arange(P)
        s = self.config.min_substeps
        eye = np.eye(dim)
        while pending.size:
            rhs, finish = rhs_factory(pts[pending])
            y0 = np.concatenate([pts[pending], np.broadcast_to(eye, (pending.size, dim, dim))
                                 .reshape(pending.size, -1)], axis=1)
            with np.errstate(all="ignore"):
                traj = _integrate_nodes(rhs, y0, N, s)
            x = np.moveaxis(traj[..., :dim], 0, 1)  # (P, N+1, dim)
            J = np.moveaxis(traj[..., dim:], 0, 1).reshape(pending.size, N + 1, dim, dim)
            if not np.all(np.isfinite(x)):
                raise IntegrationError("orbit integration produced non-finite values")
            x, J = finish(x, J)
            err = np.linalg.norm(self.chart.displacement(x[:, 0], x[:, N]), axis=1)
            jerr = np.max(np.abs(J[:, N] - eye), axis=(1, 2))
            ok = (err < self.config.closure_tol * _scale(pts[pending])) & \
                 (jerr < self.config.jacobian_closure_tol)
            done = pending[ok]
            nodes[done], jac[done], closure[done] = x[ok, :N], J[ok, :N], err[ok]
            pending = pending[~ok]
            if pending.size and 2 * s > self.config.max_substeps:
                worst = pts[pending[np.argmax(err[~ok])]]
                raise ClosureError(
                    f"orbit through {worst.tolist()} does not close after 2*pi "
                    f"(|Fl(m)-m| = {np.max(err[~ok]):.3g}, |DFl-I| = {np.max(jerr[~ok]):.3g}); "
                    "period data inconsistent")
            s *= 2
        self.chart.check(nodes.reshape(-1, dim), "orbit node")
        return nodes, jac, closure

    def _orbit_variational(self, pts, N):
        U = self.upsilon
        dim = self.chart.dim

        def factory(base):
            P = base.shape[0]

            def rhs(y):
                x = y[:, :dim]
                J = y[:, dim:].reshape(P, dim, dim)
                v, dv = U.value_and_jacobian(x)
                return np.concatenate([v, (np.swapaxes(dv, 1, 2) @ J).reshape(P, -1)], axis=1)

            return rhs, lambda x, J: (x, J)

        return self._refine(factory, pts, N)

    def _orbit_rescaled(self, pts, N):
        """Flow of ``X/omega(m)`` with frozen ``omega`` plus the rank-one correction."""
        X = self.X
        dim = self.chart.dim

        def factory(base):
            P = base.shape[0]
            w0 = self.omega.evaluate(base)[:, 0]
            dw = self.omega.jacobian(base)[:, :, 0]  # (P, dim)

            def rhs(y):
                x = y[:, :dim]
                J = y[:, dim:].reshape(P, dim, dim)
                v, dv = X.value_and_jacobian(x)
                v = v / w0[:, None]
                dJ = (np.swapaxes(dv, 1, 2) @ J) / w0[:, None, None]
                return np.concatenate([v, dJ.reshape(P, -1)], axis=1)

            def finish(x, J):
                t = TWO_PI * np.arange(N + 1) / N
                xv = X.evaluate(x.reshape(-1, dim)).reshape(P, N + 1, dim)
                coef = -t[None, :, None] / w0[:, None, None] ** 2  # (P, N+1, 1)
                corr = xv[..., :, None] * (coef[..., None] * dw[:, None, None, :])
                return x, J + corr

            return rhs, finish

        return self._refine(factory, pts, N)

    # -- convenience ---------------------------------------------------------
    def frequency(self, pts) -> np.ndarray:
        return self.omega.evaluate(pts)[:, 0]

    def period(self, pts) -> np.ndarray:
        return TWO_PI / self.frequency(pts)

    def __repr__(self):
        return f"<PeriodicFlow {self.label!r} on {self.chart.names}>"

