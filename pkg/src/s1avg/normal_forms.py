"""First-order normalization of perturbed vector fields ``P_eps = X + eps W``.

The near-identity transformation is the time-``eps`` flow of the generator

    Z = S(W)/omega + S2(L_W omega) X/omega^3 + Y

and the normalized field is ``X + eps Wbar + O(eps^2)`` with
``Wbar = <W> + L_Y(ln omega) X``.  The order of the remainder is measured by
pulling ``P_eps`` back along ``Phi_eps`` at probe points and fitting the
log-log slope of the residual against ``eps``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .averaging import averaged
from .errors import DegenerateError, DomainError
from .flows import PeriodicFlow
from .homological import check_invariant, solve_vector
from .tensor import (PointwiseField, TensorField, Valence, as_points, interior_form, lie_bracket,
                     lie_derivative, wedge)

__all__ = [
    "DEFAULT_EPSILONS",
    "PerturbedSystem",
    "NormalFormResult",
    "build_generator",
    "averaged_remainder",
    "check_normalization_condition",
    "normalize_first_order",
    "choose_vertical_killer",
    "vertical_coefficient",
    "fit_slope",
]

DEFAULT_EPSILONS = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)


@dataclass
class PerturbedSystem:
    """``P_eps = X + eps W`` where ``X`` generates the periodic flow ``pf``."""

    pf: PeriodicFlow
    W: TensorField
    epsilons: Sequence[float] = DEFAULT_EPSILONS
    nodes: Optional[int] = None

    @property
    def X(self) -> TensorField:
        return self.pf.X

    def field(self, eps: float) -> TensorField:
        return self.pf.X + eps * self.W


@dataclass
class NormalFormResult:
    Z: TensorField
    Wbar: TensorField
    epsilons: np.ndarray
    residuals: np.ndarray
    fitted_order: float
    control_residuals: Optional[np.ndarray] = None
    control_order: float = float("nan")
    extras: dict = field(default_factory=dict)


def build_generator(ps: PerturbedSystem, Y: Optional[TensorField] = None, probes=None) -> TensorField:
    """The generator ``Z`` of the normalizing transformation.

    With ``probes`` the gauge is checked for invariance there.
    """
    return solve_vector(ps.pf, ps.W, Y, probes=probes, N=ps.nodes).solution


def averaged_remainder(ps: PerturbedSystem, Y: Optional[TensorField] = None) -> TensorField:
    """``Wbar = <W> + L_Y(ln omega) X``."""
    return solve_vector(ps.pf, ps.W, Y, N=ps.nodes).remainder


def check_normalization_condition(ps: PerturbedSystem, probes, tol: float = 1e-7,
                                  bracket_tol: float = 1e-6):
    """Evaluate ``L_<W> omega`` at the probes; when it vanishes also check ``[X, Wbar] = 0``.

    Returns ``(holds, witness_or_None, details)``.
    """
    pts = as_points(probes, ps.pf.chart.dim)
    avg = averaged(ps.pf, ps.W, ps.nodes)
    vals = np.abs(lie_derivative(avg, ps.pf.omega).evaluate(pts)[:, 0])
    worst = int(np.argmax(vals))
    details = {"max_L_avgW_omega": float(vals[worst])}
    holds = bool(vals[worst] <= tol)
    if holds:
        Wbar = averaged_remainder(ps)
        br = float(np.max(np.abs(lie_bracket(ps.X, Wbar).evaluate(pts))))
        details["max_bracket_X_Wbar"] = br
        holds = br <= bracket_tol
    return holds, (None if holds else pts[worst]), details


def fit_slope(eps, residuals, floor: float = 1e-11) -> float:
    """Least-squares slope of ``log residual`` against ``log eps`` above the noise floor."""
    eps = np.asarray(eps, dtype=float)
    res = np.asarray(residuals, dtype=float)
    keep = res > floor
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(eps[keep]), np.log(res[keep]), 1)[0])


def _flow_rk4(Z: TensorField, pts: np.ndarray, eps: float, steps: int):
    """Time-``eps`` flow of ``Z`` with its Jacobian by classical RK4."""
    P, dim = pts.shape
    x = pts.copy()
    J = np.broadcast_to(np.eye(dim), (P, dim, dim)).copy()
    h = eps / steps

    def rhs(x, J):
        v, dv = Z.value_and_jacobian(x)
        return v, np.swapaxes(dv, 1, 2) @ J

    for _ in range(steps):
        k1 = rhs(x, J)
        k2 = rhs(x + 0.5 * h * k1[0], J + 0.5 * h * k1[1])
        k3 = rhs(x + 0.5 * h * k2[0], J + 0.5 * h * k2[1])
        k4 = rhs(x + h * k3[0], J + h * k3[1])
        x = x + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        J = J + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    if not np.all(Z.chart.contains(x)):
        raise DomainError(f"probe leaves the chart under the time-{eps:g} flow of the generator")
    return x, J


def normalize_first_order(ps: PerturbedSystem, probes, Y: Optional[TensorField] = None,
                          steps: int = 1, control_offset=None,
                          Wbar: Optional[TensorField] = None) -> NormalFormResult:
    """Measure ``max |(Phi_eps)^* P_eps - X - eps Wbar|`` over the probes for each ``eps``.

    ``control_offset`` (a constant vector) adds a negative control in which
    ``Wbar`` is replaced by ``Wbar + offset``; its residual is first order.
    """
    pts = as_points(probes, ps.pf.chart.dim)
    Z = build_generator(ps, Y)
    Wbar = Wbar if Wbar is not None else averaged_remainder(ps, Y)
    X0 = ps.X.evaluate(pts)
    Wb = Wbar.evaluate(pts)
    offset = None if control_offset is None else np.broadcast_to(
        np.asarray(control_offset, dtype=float), (ps.pf.chart.dim,))
    eps_arr = np.asarray(ps.epsilons, dtype=float)
    res = np.empty(len(eps_arr))
    ctrl = np.empty(len(eps_arr))
    for i, eps in enumerate(eps_arr):
        x, J = _flow_rk4(Z, pts, eps, steps)
        P = ps.X.evaluate(x) + eps * ps.W.evaluate(x)
        pulled = np.linalg.solve(J, P[..., None])[..., 0]
        diff = pulled - X0 - eps * Wb
        res[i] = np.max(np.abs(diff))
        if offset is not None:
            ctrl[i] = np.max(np.abs(diff - eps * offset))
    return NormalFormResult(
        Z, Wbar, eps_arr, res, fit_slope(eps_arr, res),
        ctrl if offset is not None else None,
        fit_slope(eps_arr, ctrl) if offset is not None else float("nan"))


def vertical_coefficient(pf: PeriodicFlow, V: TensorField, frame: Sequence[TensorField]) -> TensorField:
    """Coefficient ``c0`` of ``Upsilon`` in ``V = sum c_i frame_i + c0 Upsilon``."""
    dim = pf.chart.dim
    if len(frame) != dim - 1:
        raise DegenerateError(f"need {dim - 1} horizontal fields, got {len(frame)}")

    def solve(v, *cols):
        M = np.stack(cols, axis=-1)  # (..., dim, dim)
        try:
            c = np.linalg.solve(M, v[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise DegenerateError("frame and generator are linearly dependent") from exc
        return c[..., -1:]

    return PointwiseField([V, *frame, pf.upsilon], solve, Valence.scalar(), f"c0[{V.label}]",
                          natural=True)


def choose_vertical_killer(ps: PerturbedSystem, frame: Sequence[TensorField], probes,
                           floor: float = 1e-8) -> TensorField:
    """Invariant gauge ``Y = -(<c0>/a^2) sum a_i h_i`` with ``a_i = i_{h_i} d omega``.

    ``frame`` lists invariant vector fields ``h_i`` that together with
    ``Upsilon`` span the tangent space.  Then ``i_Y d omega = -<c0>`` and the
    averaged remainder has no component along ``Upsilon``.
    """
    pf = ps.pf
    pts = as_points(probes, pf.chart.dim)
    for h in frame:
        check_invariant(pf, h, pts, what="frame field")
    M = np.stack([h.evaluate(pts) for h in frame] + [pf.upsilon.evaluate(pts)], axis=-1)
    if np.any(np.abs(np.linalg.det(M)) < floor):
        raise DegenerateError("horizontal frame is degenerate at a probe point")
    a = [interior_form(h, pf.d_omega) for h in frame]
    a2 = a[0] * a[0]
    for ai in a[1:]:
        a2 = a2 + ai * ai
    if np.any(a2.evaluate(pts)[:, 0] < floor):
        raise DegenerateError("d omega vanishes at a probe point; the frequency must be nondegenerate")
    c0 = averaged(pf, vertical_coefficient(pf, ps.W, frame), ps.nodes)
    coef = wedge(-c0, a2.apply(lambda s: 1.0 / s, lambda s: -1.0 / s ** 2, "1/"))
    Y = wedge(wedge(coef, a[0]), frame[0])
    for ai, h in zip(a[1:], frame[1:]):
        Y = Y + wedge(wedge(coef, ai), h)
    Y.label = "Y[vertical killer]"
    return Y
