"""Averaging operators realized spectrally on orbit samples.

Along the ``Upsilon``-orbit through ``m`` the pulled-back components

    g(t) = ((Fl_Upsilon^t)^* Xi)(m)

form a ``2*pi``-periodic signal.  With ``g = sum_n g_n exp(i n t)``:

* the average keeps ``g_0``;
* the integral operator ``S Xi = (1/2pi) int_0^{2pi} (t - pi) g(t) dt`` is
  ``sum_{n != 0} g_n / (i n)``;
* ``S^2`` is ``sum_{n != 0} -g_n / n^2``;
* the Lie derivative along ``Upsilon`` is ``sum_n (i n) g_n``.

Each operator is a Fourier multiplier applied to the whole signal, so its
value along the orbit is again a signal.  That is what makes nested
operators (``S`` of a contraction with another ``S``-image, say) cheap:
the pullback is an algebra homomorphism and commutes with every operator
built from the same flow.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

from .errors import ValenceError
from .flows import TWO_PI, OrbitSample, PeriodicFlow
from .tensor import (OPERATOR_FD, TensorField, as_points, interior_form, interior_multivector,
                     pullback_by_evaluation, transport, wedge)

__all__ = [
    "MAX_NODES",
    "OrbitSpectrum",
    "OperatorField",
    "pullback_on_orbit",
    "average",
    "s_op",
    "s_squared",
    "lie_upsilon",
    "lie_X",
    "averaged",
    "s_field",
    "s2_field",
    "lie_upsilon_field",
    "lie_X_field",
    "quadrature_average_and_s",
]

MAX_NODES = 4096
TAIL_TOL = 1e-8

_KINDS = ("average", "S", "S2", "L")


def pullback_on_orbit(orbit: OrbitSample, Xi: TensorField, compose: bool = True) -> np.ndarray:
    """Pulled-back components of ``Xi`` at the orbit nodes, shape ``(P, N, ncomp)``.

    With ``compose=True`` composite fields assemble their samples from their
    operands (cheap and exact for natural operations); ``compose=False``
    forces evaluation of ``Xi`` at every node followed by Jacobian transport.
    """
    if compose:
        return Xi.orbit_signal(orbit)
    return pullback_by_evaluation(orbit, Xi)


def multiplier(kind: str, N: int) -> np.ndarray:
    """Fourier multiplier on the ``rfft`` modes ``n = 0..N/2``."""
    n = np.arange(N // 2 + 1, dtype=float)
    out = np.zeros(N // 2 + 1, dtype=complex)
    inner = slice(1, N // 2)  # the Nyquist mode has no well-defined derivative
    if kind == "average":
        out[0] = 1.0
    elif kind == "S":
        out[inner] = 1.0 / (1j * n[inner])
    elif kind == "S2":
        out[inner] = -1.0 / n[inner] ** 2
    elif kind == "L":
        out[inner] = 1j * n[inner]
    elif kind == "oscillating":
        out[1:] = 1.0
    else:
        raise ValueError(f"unknown operator {kind!r}")
    return out


class OrbitSpectrum:
    """Fourier coefficients of orbit signals along axis 1.

    ``coeffs[p, n, c]`` for ``n = 0..N/2`` are normalized so that
    ``g(t) = sum_n coeffs_n exp(i n t)`` with the negative modes given by
    conjugation.
    """

    def __init__(self, signal: np.ndarray):
        self.signal = np.asarray(signal, dtype=float)
        self.N = self.signal.shape[1]
        self.coeffs = np.fft.rfft(self.signal, axis=1) / self.N

    def apply(self, kind: str) -> np.ndarray:
        """Signal of the operator image along the orbit."""
        m = multiplier(kind, self.N)[None, :, None]
        return np.fft.irfft(self.coeffs * m * self.N, n=self.N, axis=1)

    def at_base(self, kind: str) -> np.ndarray:
        """Operator image at the base point (``t = 0``), shape ``(P, ncomp)``."""
        m = multiplier(kind, self.N)[None, :, None]
        c = self.coeffs * m
        # value at t = 0 of the real signal with these rfft modes
        w = np.full(self.N // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return np.einsum("n,pnc->pc", w, c.real)

    def reconstruct(self) -> np.ndarray:
        return np.fft.irfft(self.coeffs * self.N, n=self.N, axis=1)

    def tail_fraction(self) -> np.ndarray:
        """Fraction of the spectral energy in the top octave, per base point."""
        e = np.abs(self.coeffs) ** 2
        e[:, 1:] *= 2.0
        total = e.sum(axis=(1, 2))
        tail = e[:, self.N // 4:].sum(axis=(1, 2))
        scale = np.maximum(total, 1e-300)
        frac = tail / scale
        # signals that are numerically zero carry no aliasing information
        return np.where(total < 1e-28, 0.0, frac)


class OperatorField(TensorField):
    """Lazy image of ``inner`` under one of the averaging operators of ``pf``.

    Evaluation samples the orbit through each query point (using the flow's
    cache), pulls ``inner`` back along it and applies the Fourier multiplier.
    The node count doubles while the top-octave energy fraction exceeds
    ``TAIL_TOL``, up to ``MAX_NODES``.
    """

    def __init__(self, pf: PeriodicFlow, inner: TensorField, kind: str,
                 N: Optional[int] = None, check_aliasing: bool = True):
        if kind not in _KINDS:
            raise ValueError(f"unknown operator {kind!r}")
        if inner.chart is not pf.chart and inner.chart.names != pf.chart.names:
            raise ValenceError("field and flow live on different charts")
        names = {"average": "<{}>", "S": "S({})", "S2": "S2({})", "L": "L_U({})"}
        super().__init__(pf.chart, inner.valence, names[kind].format(inner.label), OPERATOR_FD)
        self.pf = pf
        self.inner = inner
        self.kind = kind
        self.N = N
        self.check_aliasing = check_aliasing
        self.last_nodes = None

    def _evaluate(self, pts):
        N = self.N or self.pf.default_nodes
        while True:
            orbit = self.pf.sample(pts, N)
            spec = OrbitSpectrum(self.inner.orbit_signal(orbit))
            if not self.check_aliasing or N >= MAX_NODES or np.all(spec.tail_fraction() <= TAIL_TOL):
                break
            N *= 2
        self.last_nodes = N
        return spec.at_base(self.kind)

    def orbit_signal(self, orbit: OrbitSample):
        if orbit.source is self.pf:
            return OrbitSpectrum(self.inner.orbit_signal(orbit)).apply(self.kind)
        return super().orbit_signal(orbit)


# -- field constructors -----------------------------------------------------


def averaged(pf: PeriodicFlow, Xi: TensorField, N: Optional[int] = None) -> OperatorField:
    return OperatorField(pf, Xi, "average", N)


def s_field(pf: PeriodicFlow, Xi: TensorField, N: Optional[int] = None) -> OperatorField:
    return OperatorField(pf, Xi, "S", N)


def s2_field(pf: PeriodicFlow, Xi: TensorField, N: Optional[int] = None) -> OperatorField:
    return OperatorField(pf, Xi, "S2", N)


def lie_upsilon_field(pf: PeriodicFlow, Xi: TensorField, N: Optional[int] = None) -> OperatorField:
    return OperatorField(pf, Xi, "L", N)


def lie_X_field(pf: PeriodicFlow, Xi: TensorField, N: Optional[int] = None) -> TensorField:
    """``L_X`` assembled from ``L_Upsilon`` and the frequency.

    Scalars: ``omega L_U f``.  k-vectors: ``omega L_U A - U ^ i_{d omega} A``.
    k-forms: ``omega L_U theta + d omega ^ i_U theta``.
    """
    base = wedge(pf.omega, lie_upsilon_field(pf, Xi, N))
    kind = Xi.valence.kind
    if kind == "scalar":
        return base
    if kind == "vector":
        return base - wedge(pf.upsilon, interior_multivector(pf.d_omega, Xi))
    return base + wedge(pf.d_omega, interior_form(pf.upsilon, Xi))


# -- pointwise evaluation ---------------------------------------------------


def _at(field: TensorField, m):
    single = np.ndim(m) == 1
    out = field.evaluate(m)
    return out[0] if single else out


def average(pf: PeriodicFlow, Xi: TensorField, m, N: Optional[int] = None) -> np.ndarray:
    """Components of the average of ``Xi`` at ``m``."""
    return _at(averaged(pf, Xi, N), m)


def s_op(pf: PeriodicFlow, Xi: TensorField, m, N: Optional[int] = None) -> np.ndarray:
    return _at(s_field(pf, Xi, N), m)


def s_squared(pf: PeriodicFlow, Xi: TensorField, m, N: Optional[int] = None) -> np.ndarray:
    return _at(s2_field(pf, Xi, N), m)


def lie_upsilon(pf: PeriodicFlow, Xi: TensorField, m, N: Optional[int] = None) -> np.ndarray:
    return _at(lie_upsilon_field(pf, Xi, N), m)


def lie_X(pf: PeriodicFlow, Xi: TensorField, m, N: Optional[int] = None) -> np.ndarray:
    return _at(lie_X_field(pf, Xi, N), m)


# -- quadrature oracle ------------------------------------------------------


def quadrature_average_and_s(pf: PeriodicFlow, Xi: TensorField, m, order: int = 96,
                             rtol: float = 1e-12, atol: float = 1e-12):
    """Average and ``S`` at one point by Gauss-Legendre quadrature in time.

    The orbit and its Jacobians come from an adaptive integration of the
    ``Upsilon``-variational equation, independent of the fixed-step orbit
    sampler and of the FFT.  Used as a test oracle.
    """
    m = as_points(m, pf.chart.dim)[0]
    dim = pf.chart.dim
    U = pf.upsilon
    x_gl, w_gl = leggauss(order)
    t = np.pi * (x_gl + 1.0)
    w = np.pi * w_gl

    def rhs(_, y):
        x = y[:dim][None]
        J = y[dim:].reshape(dim, dim)
        v, dv = U.value_and_jacobian(x)
        return np.concatenate([v[0], (dv[0].T @ J).ravel()])

    y0 = np.concatenate([m, np.eye(dim).ravel()])
    sol = solve_ivp(rhs, (0.0, TWO_PI), y0, method="DOP853", rtol=rtol, atol=atol,
                    t_eval=t, dense_output=True)
    pts = sol.y[:dim].T
    J = sol.y[dim:].T.reshape(-1, dim, dim)
    vals = Xi.evaluate(pts)
    g = transport(vals, Xi.valence, J, np.linalg.inv(J))  # (order, ncomp)
    avg = (w[:, None] * g).sum(axis=0) / TWO_PI
    s = (w[:, None] * (t - np.pi)[:, None] * g).sum(axis=0) / TWO_PI
    return avg, s
