"""Closed-form and quadrature quantities in (R^d, |.|, L^d)."""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gamma

from app.config import settings
from app.models.domain import EuclideanConfig
from app.services.errors import InputError, PreconditionError, QuadratureError

logger = logging.getLogger(__name__)

# First rule size tried by the adaptive quadratures.
_START_NODES = 16


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    nodes: int
    error: float


@dataclass(frozen=True)
class GradientCheck:
    rel_error: float
    numeric: float
    analytic: float
    step_flagged: bool


@dataclass(frozen=True)
class HalfspaceTerms:
    x_term: float
    y_term: float

    @property
    def total(self) -> float:
        return self.x_term + self.y_term


def unit_ball_volume(d: int) -> float:
    """omega_d, the Lebesgue measure of the unit ball of R^d."""
    if d < 1:
        raise InputError("dimension must be at least 1")
    return float(np.pi ** (d / 2) / gamma(d / 2 + 1))


def sphere_area(d: int) -> float:
    """H^{d-1}(S^{d-1}) = d omega_d."""
    return d * unit_ball_volume(d)


def _frame(d: int, axis: Optional[Sequence[float]]) -> np.ndarray:
    """Orthonormal basis of R^d whose first row is ``axis``."""
    if axis is None:
        return np.eye(d)
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    q, _ = np.linalg.qr(np.column_stack([a, np.eye(d)]))
    q = q[:, :d]
    if np.dot(q[:, 0], a) < 0:
        q[:, 0] = -q[:, 0]
    return q.T


def _gauss_panels(breaks: Sequence[float], n: int):
    """Gauss-Legendre nodes and weights on consecutive panels."""
    t, w = leggauss(n)
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        nodes.append((b - a) / 2 * t + (a + b) / 2)
        weights.append((b - a) / 2 * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _sphere_rule(d: int, n: int, frame: np.ndarray, polar_breaks: Sequence[float]):
    """Product rule on S^{d-1} for d in {2, 3}: unit vectors and weights."""
    if d == 2:
        breaks = sorted({0.0, 2 * np.pi, *[b for b in polar_breaks if 0 < b < 2 * np.pi]})
        theta, w = _gauss_panels(breaks, n)
        pts = np.outer(np.cos(theta), frame[0]) + np.outer(np.sin(theta), frame[1])
        return pts, w
    # d == 3: Gauss-Legendre in cos(theta) times periodic trapezoid in phi
    cuts = sorted({-1.0, 1.0, *[np.cos(b) for b in polar_breaks if 0 < b < np.pi]})
    t, wt = _gauss_panels(cuts, n)
    m = 2 * n
    phi = 2 * np.pi * np.arange(m) / m
    sin_t = np.sqrt(np.clip(1 - t ** 2, 0.0, None))
    tt, pp = np.meshgrid(t, phi, indexing="ij")
    st = np.meshgrid(sin_t, phi, indexing="ij")[0]
    pts = (
        np.multiply.outer(tt, frame[0])
        + np.multiply.outer(st * np.cos(pp), frame[1])
        + np.multiply.outer(st * np.sin(pp), frame[2])
    ).reshape(-1, 3)
    weights = np.multiply.outer(wt, np.full(m, 2 * np.pi / m)).reshape(-1)
    return pts, weights


class OracleService:
    """Service for the Euclidean ground-truth quantities."""

    @staticmethod
    def sphere_quadrature(
        d: int,
        f: Callable[[np.ndarray], np.ndarray],
        rtol: float = 1e-10,
        axis: Optional[Sequence[float]] = None,
        polar_breaks: Sequence[float] = (),
        seed: int = 0,
        max_nodes: Optional[int] = None,
    ) -> QuadratureResult:
        """Integral of f over the unit sphere S^{d-1} with adaptive refinement.

        Product Gauss rules for d in {2, 3}; Monte Carlo with standard error
        for d >= 4. ``polar_breaks`` are angles from ``axis`` where f has a
        kink; panels are split there.
        """
        max_nodes = max_nodes or settings.QUADRATURE_MAX_NODES
        if d < 2:
            raise PreconditionError("sphere quadrature needs d >= 2")
        if d >= 4:
            return OracleService._sphere_monte_carlo(d, f, rtol, seed, max_nodes)

        frame = _frame(d, axis)
        n = _START_NODES
        pts, w = _sphere_rule(d, n, frame, polar_breaks)
        previous = float(np.dot(f(pts), w))
        while True:
            n *= 2
            pts, w = _sphere_rule(d, n, frame, polar_breaks)
            if len(w) > max_nodes:
                raise QuadratureError(f"sphere quadrature in d={d} did not converge", nodes=len(w))
            value = float(np.dot(f(pts), w))
            error = abs(value - previous)
            if error <= rtol * max(abs(value), 1e-300):
                logger.debug(f"sphere quadrature d={d}: {value:.12g} with {len(w)} nodes")
                return QuadratureResult(value=value, nodes=len(w), error=error)
            previous = value

    @staticmethod
    def _sphere_monte_carlo(d, f, rtol, seed, max_nodes) -> QuadratureResult:
        rng = np.random.default_rng(seed)
        area = sphere_area(d)
        samples = np.zeros(0)
        n = 1024
        while True:
            pts = rng.standard_normal((n - samples.size, d))
            pts /= np.linalg.norm(pts, axis=1, keepdims=True)
            samples = np.concatenate([samples, f(pts)])
            value = area * samples.mean()
            error = area * samples.std(ddof=1) / np.sqrt(samples.size)
            # Monte Carlo targets are looser than the Gauss rules
            if error <= max(rtol, 1e-3) * max(abs(value), 1e-300):
                return QuadratureResult(value=float(value), nodes=samples.size, error=float(error))
            if 2 * n > max_nodes:
                raise QuadratureError(f"Monte Carlo sphere quadrature in d={d} did not converge", nodes=samples.size)
            n *= 2

    @staticmethod
    def green(d: int, x, z) -> float:
        """Fundamental solution G_x(z) of the Laplacian."""
        if d < 2:
            raise PreconditionError("Green function needs d >= 2")
        r = float(np.linalg.norm(np.asarray(z, dtype=float) - np.asarray(x, dtype=float)))
        if r == 0:
            raise InputError("Green function evaluated at its pole")
        if d == 2:
            return -np.log(r) / (2 * np.pi)
        return r ** (2 - d) / (d * (d - 2) * unit_ball_volume(d))

    @staticmethod
    def riesz_kernel(d: int, x, z) -> float:
        """R_x(z) = omega_d^-1 |x - z|^{1-d}."""
        r = float(np.linalg.norm(np.asarray(z, dtype=float) - np.asarray(x, dtype=float)))
        if r == 0:
            raise InputError("Riesz kernel evaluated at its pole")
        return r ** (1 - d) / unit_ball_volume(d)

    @staticmethod
    def gradient_identity_check(d: int, x, z, step: float) -> GradientCheck:
        """Central-difference |grad G_x|(z) against d^-1 R_x(z).

        Args:
            d: Dimension.
            x: Pole.
            z: Evaluation point, distinct from x.
            step: Central-difference step.
        """
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        if x.shape != (d,) or z.shape != (d,):
            raise InputError("points must have d coordinates")
        dist = float(np.linalg.norm(z - x))
        flagged = step > 1e-2 * dist
        if flagged:
            logger.warning(f"finite-difference step {step:g} is large against |x-z|={dist:g}")
        grad = np.empty(d)
        for k in range(d):
            e = np.zeros(d)
            e[k] = step
            grad[k] = (OracleService.green(d, x, z + e) - OracleService.green(d, x, z - e)) / (2 * step)
        numeric = float(np.linalg.norm(grad))
        analytic = OracleService.riesz_kernel(d, x, z) / d
        return GradientCheck(
            rel_error=abs(numeric - analytic) / analytic,
            numeric=numeric,
            analytic=analytic,
            step_flagged=flagged,
        )

    @staticmethod
    def sphere_energy(d: int, r: float, p: Optional[Sequence[float]] = None, rtol: float = 1e-10) -> QuadratureResult:
        """Integral of R_p over the sphere of radius r around p (equals d)."""
        if r <= 0:
            raise PreconditionError("sphere radius must be positive")
        p = np.zeros(d) if p is None else np.asarray(p, dtype=float)

        def integrand(u):
            z = p + r * u
            dist = np.linalg.norm(z - p, axis=1)
            return r ** (d - 1) * dist ** (1 - d) / unit_ball_volume(d)

        return OracleService.sphere_quadrature(d, integrand, rtol=rtol)

    @staticmethod
    def delta_L(config: EuclideanConfig, rtol: float = 1e-8) -> QuadratureResult:
        """Integral of |R_y - R_x| over the sphere of radius 2L|x-y| around x."""
        d = config.d
        x = np.asarray(config.x, dtype=float)
        y = np.asarray(config.y, dtype=float)
        D = float(np.linalg.norm(y - x))
        rho = 2 * config.L * D
        omega = unit_ball_volume(d)

        def integrand(u):
            z = x + rho * u
            rx = np.linalg.norm(z - x, axis=1) ** (1 - d)
            ry = np.linalg.norm(z - y, axis=1) ** (1 - d)
            return rho ** (d - 1) * np.abs(ry - rx) / omega

        # |z - y| = |z - x| where the angle from x->y has cosine D / (2 rho)
        kink = float(np.arccos(D / (2 * rho)))
        breaks = (kink, 2 * np.pi - kink) if d == 2 else (kink,)
        return OracleService.sphere_quadrature(d, integrand, rtol=rtol, axis=y - x, polar_breaks=breaks)

    @staticmethod
    def _gauss_integral(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                        rtol: float = 1e-12, max_nodes: Optional[int] = None) -> float:
        max_nodes = max_nodes or settings.QUADRATURE_MAX_NODES
        n = _START_NODES
        t, w = _gauss_panels((a, b), n)
        previous = float(np.dot(f(t), w))
        while True:
            n *= 2
            if n > max_nodes:
                raise QuadratureError("one-dimensional Gauss rule did not converge", nodes=n)
            t, w = _gauss_panels((a, b), n)
            value = float(np.dot(f(t), w))
            if abs(value - previous) <= rtol * max(abs(value), 1e-300):
                return value
            previous = value

    @staticmethod
    def halfspace_separator_terms(config: EuclideanConfig) -> HalfspaceTerms:
        """x- and y-pole integrals of R^L_{x,y} over the bisector inside B_{2L|x-y|}(x)."""
        d = config.d
        if d < 2:
            raise PreconditionError("the bisector integral needs d >= 2")
        D = float(np.linalg.norm(np.asarray(config.y) - np.asarray(config.x)))
        T = np.sqrt((2 * config.L * D) ** 2 - D ** 2 / 4)
        # sphere_area(1) = 2 counts the two points of S^0
        factor = sphere_area(d - 1) / unit_ball_volume(d)

        def integrand(t):
            return (D ** 2 / 4 + t ** 2) ** ((1 - d) / 2) * t ** (d - 2)

        term = factor * OracleService._gauss_integral(integrand, 0.0, float(T))
        # reflection through the bisector swaps the two poles
        return HalfspaceTerms(x_term=term, y_term=term)

    @staticmethod
    def halfspace_separator_energy(config: EuclideanConfig) -> float:
        return OracleService.halfspace_separator_terms(config).total

    @staticmethod
    def riesz_ball_mass_analytic(config: EuclideanConfig, r: float, n: int = 64) -> float:
        """m^L_{x,y}(B_r(x)): d r from the x-pole plus the y-pole volume integral."""
        d = config.d
        x = np.asarray(config.x, dtype=float)
        y = np.asarray(config.y, dtype=float)
        D = float(np.linalg.norm(y - x))
        if not 0 < r < D:
            raise PreconditionError(f"radius must lie in (0, |x-y|={D:g})")
        x_term = d * r
        if d == 1:
            # |z - y|^0 = 1 on the interval
            return x_term + 2 * r / unit_ball_volume(1)

        # axisymmetric around x->y: |x + s u - y|^2 = s^2 + D^2 - 2 s D cos(theta)
        s, ws = _gauss_panels((0.0, r), n)
        th, wth = _gauss_panels((0.0, np.pi), n)
        ss, tt = np.meshgrid(s, th, indexing="ij")
        dist = np.sqrt(ss ** 2 + D ** 2 - 2 * ss * D * np.cos(tt))
        integrand = ss ** (d - 1) * np.sin(tt) ** (d - 2) * dist ** (1 - d)
        y_term = sphere_area(d - 1) * float(np.einsum("i,j,ij->", ws, wth, integrand)) / unit_ball_volume(d)
        return x_term + y_term
