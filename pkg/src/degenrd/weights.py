"""Carleman-style spatial weights with closed-form derivatives.

The weight is

    psi(x) = (R^2 - |x|^2) * 2*|x0|*R / (|x0|^2 + R^2 - 2*|x0|*x_1),

positive inside the ball, zero on the boundary, with a nondegenerate
maximum at the interior point x0 = (|x0|, 0, ..., 0).  Two shifted copies
phi1 = psi - psi(x0) and phi3 = -psi - psi(x0) are combined with the
time factor Gamma(t) = T - t + h into the exponents Phi_i = s*phi_i/Gamma
used to tilt the solution components.  All first, second, and third
derivatives are evaluated from the differentiated formulas, never by
numerical differencing.

Geometric constants (the two-sided quadratic pinch around x0 and the
gradient/value comparison constants on the annulus near the boundary) are
obtained as sampled extremal ratios with a 1.05 safety factor; the paper
chain only needs their existence, downstream checks use these reported
values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid, Field, domain_radius

_RATIO_CAP = 1e12


@dataclass(frozen=True)
class WeightParams:
    """Geometry and tilt parameters for the weight machinery.

    x0_abs : distance of the observation center from the origin (> 0);
             the center itself is (x0_abs, 0, ..., 0).
    r      : radius of the observation ball, with x0_abs + r < R.
    s      : tilt strength in (0, 1].
    h      : terminal time-shift in (0, 1].
    T      : terminal time (> 0).
    dim    : ambient dimension (1, 2 or 3).
    """

    x0_abs: float
    r: float
    s: float
    h: float
    T: float
    dim: int = 1

    def __post_init__(self):
        R = domain_radius(self.dim)
        if not self.x0_abs > 0:
            raise ValueError("x0 must be off-center: |x0| > 0 required "
                             "(the weight vanishes identically at x0 = 0)")
        if not (self.r > 0 and self.x0_abs + self.r < R):
            raise ValueError("observation ball must satisfy |x0| + r < R")
        if not 0 < self.s <= 1:
            raise ValueError("s must lie in (0, 1]")
        if not 0 < self.h <= 1:
            raise ValueError("h must lie in (0, 1]")
        if not self.T > 0:
            raise ValueError("T must be positive")

    @property
    def radius(self) -> float:
        return domain_radius(self.dim)

    @property
    def x0_point(self) -> np.ndarray:
        p = np.zeros(self.dim)
        p[0] = self.x0_abs
        return p

    def gamma(self, t: float) -> float:
        """Time factor Gamma(t) = T - t + h."""
        return self.T - t + self.h


def _as_points(params: WeightParams, point) -> tuple[np.ndarray, bool]:
    pts = np.asarray(point, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != params.dim:
        raise ValueError(f"points must have {params.dim} coordinates")
    R = params.radius
    rad = np.linalg.norm(pts, axis=-1)
    if np.any(rad > R * (1 + 1e-12) + 1e-14):
        raise ValueError("point outside the closed domain")
    return pts, scalar


def _den(params: WeightParams, pts: np.ndarray) -> np.ndarray:
    a, R = params.x0_abs, params.radius
    return a * a + R * R - 2.0 * a * pts[..., 0]


def eval_psi(params: WeightParams, point):
    """Weight value psi(x); vanishes on the boundary, peaks at x0."""
    pts, scalar = _as_points(params, point)
    a, R = params.x0_abs, params.radius
    q = 2.0 * a * R
    g = R * R - np.sum(pts * pts, axis=-1)
    out = q * g / _den(params, pts)
    return float(out[0]) if scalar else out


def eval_grad_psi(params: WeightParams, point):
    """Closed-form gradient of psi, shape (..., dim)."""
    pts, scalar = _as_points(params, point)
    a, R = params.x0_abs, params.radius
    q = 2.0 * a * R
    den = _den(params, pts)
    g = R * R - np.sum(pts * pts, axis=-1)
    grad = -2.0 * q * pts / den[..., None]
    grad[..., 0] += 2.0 * a * q * g / (den * den)
    return grad[0] if scalar else grad


def eval_hess_psi(params: WeightParams, point):
    """Closed-form Hessian of psi, shape (..., dim, dim)."""
    pts, scalar = _as_points(params, point)
    a, R, n = params.x0_abs, params.radius, params.dim
    q = 2.0 * a * R
    den = _den(params, pts)
    g = R * R - np.sum(pts * pts, axis=-1)
    m = pts.shape[0]
    H = np.zeros((m, n, n))
    inv = 1.0 / den
    for k in range(n):
        H[:, k, k] += -2.0 * inv
    H[:, 0, :] += -4.0 * a * pts * (inv * inv)[:, None]
    H[:, :, 0] += -4.0 * a * pts * (inv * inv)[:, None]
    H[:, 0, 0] += 8.0 * a * a * g * inv ** 3
    H *= q
    return H[0] if scalar else H


def eval_lap_psi(params: WeightParams, point):
    """Closed-form Laplacian of psi."""
    pts, scalar = _as_points(params, point)
    a, R, n = params.x0_abs, params.radius, params.dim
    q = 2.0 * a * R
    den = _den(params, pts)
    g = R * R - np.sum(pts * pts, axis=-1)
    out = q * (-2.0 * n / den - 8.0 * a * pts[..., 0] / den ** 2
               + 8.0 * a * a * g / den ** 3)
    return float(out[0]) if scalar else out


def eval_grad_lap_psi(params: WeightParams, point):
    """Closed-form gradient of the Laplacian of psi, shape (..., dim)."""
    pts, scalar = _as_points(params, point)
    a, R, n = params.x0_abs, params.radius, params.dim
    q = 2.0 * a * R
    den = _den(params, pts)
    g = R * R - np.sum(pts * pts, axis=-1)
    out = -16.0 * a * a * pts / den[..., None] ** 3
    out[..., 0] += ((-4.0 * n - 8.0) * a / den ** 2
                    - 32.0 * a * a * pts[..., 0] / den ** 3
                    + 48.0 * a ** 3 * g / den ** 4)
    out *= q
    return out[0] if scalar else out


def psi_at_x0(params: WeightParams) -> float:
    """Peak value psi(x0) = 2*|x0|*R (closed form)."""
    return 2.0 * params.x0_abs * params.radius


def eval_phi(params: WeightParams, point, which: int):
    """Shifted weights: phi1 = psi - psi(x0) for i in {1,2};
    phi3 = -psi - psi(x0) for i in {3,4}."""
    psi = eval_psi(params, point)
    peak = psi_at_x0(params)
    if which in (1, 2):
        return psi - peak
    if which in (3, 4):
        return -psi - peak
    raise ValueError("component index must be 1..4")


def component_diffusivity(which: int, d1: float, d2: float) -> float:
    """Diffusivity pairing: components 1 and 3 carry d1, 2 and 4 carry d2."""
    if which in (1, 3):
        return d1
    if which in (2, 4):
        return d2
    raise ValueError("component index must be 1..4")


def eval_Phi_eta(params: WeightParams, which: int, point, t: float,
                 d1: float, d2: float):
    """Tilt exponent Phi_i = s*phi_i/Gamma and multiplier eta_i at (x, t).

    eta_i = s/Gamma^2 * (-|phi_i|/2 + d_i*s*|grad phi_i|^2/4), which is the
    combination eta_i = dPhi_i/dt / 2 + d_i*|grad Phi_i|^2 / 4.
    """
    if not 0 <= t <= params.T:
        raise ValueError("time outside [0, T]")
    gam = params.gamma(t)
    phi = eval_phi(params, point, which)
    d = component_diffusivity(which, d1, d2)
    gp = eval_grad_psi(params, point)
    grad_sq = np.sum(np.atleast_2d(gp) ** 2, axis=-1)
    if np.ndim(phi) == 0:
        grad_sq = float(grad_sq[0])
    s = params.s
    Phi = s * phi / gam
    eta = s / gam ** 2 * (-0.5 * np.abs(phi) + 0.25 * d * s * grad_sq)
    return Phi, eta


@dataclass
class WeightFields:
    """Weight machinery evaluated on every cell of a grid."""

    params: WeightParams
    psi: Field
    phi1: Field
    phi3: Field
    grad_psi: np.ndarray          # (ncells, dim)
    hess_psi: np.ndarray          # (ncells, dim, dim)
    laplacian_psi: Field
    grad_psi_sq: np.ndarray       # |grad psi|^2 per cell

    def phi(self, which: int) -> np.ndarray:
        return self.phi1.values if which in (1, 2) else self.phi3.values

    def Phi(self, which: int, t: float) -> np.ndarray:
        return self.params.s * self.phi(which) / self.params.gamma(t)

    def eta(self, which: int, t: float, d1: float, d2: float) -> np.ndarray:
        s, gam = self.params.s, self.params.gamma(t)
        d = component_diffusivity(which, d1, d2)
        ph = self.phi(which)
        return s / gam ** 2 * (-0.5 * np.abs(ph)
                               + 0.25 * d * s * self.grad_psi_sq)

    def grad_Phi(self, which: int, t: float) -> np.ndarray:
        sign = 1.0 if which in (1, 2) else -1.0
        return (sign * self.params.s / self.params.gamma(t)) * self.grad_psi

    def lap_Phi(self, which: int, t: float) -> np.ndarray:
        sign = 1.0 if which in (1, 2) else -1.0
        return (sign * self.params.s / self.params.gamma(t)) \
            * self.laplacian_psi.values


def weight_fields(params: WeightParams, grid: Grid) -> WeightFields:
    """Evaluate psi, its shifts and derivatives on all cell centers."""
    if grid.domain.dim != params.dim:
        raise ValueError("grid dimension does not match weight parameters")
    pts = grid.centers
    psi = eval_psi(params, pts)
    if np.any(psi <= 0):
        raise ValueError("psi must be positive at interior cells")
    peak = psi_at_x0(params)
    grad = eval_grad_psi(params, pts)
    wf = WeightFields(
        params=params,
        psi=Field(grid, psi),
        phi1=Field(grid, psi - peak),
        phi3=Field(grid, -psi - peak),
        grad_psi=grad,
        hess_psi=eval_hess_psi(params, pts),
        laplacian_psi=Field(grid, eval_lap_psi(params, pts)),
        grad_psi_sq=np.sum(grad * grad, axis=-1),
    )
    if np.any(wf.phi1.values > 1e-12):
        raise ValueError("phi1 must be nonpositive")
    return wf


@dataclass(frozen=True)
class GeometryConstants:
    """Sampled geometric constants of the weight, with 1.05 safety margin.

    c01, c02 : two-sided pinch  c01*|grad psi|^2 <= psi(x0)-psi
               <= c02*|grad psi|^2 near x0.
    c1       : |grad phi_i|^2 <= c1*|phi_i| on the whole domain.
    c2       : |phi_i| <= c2*|grad phi_i|^2 on the outer annulus
               (and for phi1 on its complement).
    c3       : phi3 - phi1 <= -c3 off the outer annulus (c3 = min of 2*psi).
    rho      : inner radius of the outer annulus, (|x0| + R)/2.
    mu0      : phi1 <= -mu0 outside the observation ball.
    mu1      : sup(-phi1) = psi(x0) = 2|x0|R (closed form).
    """

    c01: float
    c02: float
    c1: float
    c2: float
    c3: float
    rho: float
    mu0: float
    mu1: float
    probe_resolution: int

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("c01", "c02", "c1", "c2", "c3", "rho", "mu0", "mu1",
                 "probe_resolution")}


def _sample_points(params: WeightParams, m: int) -> np.ndarray:
    """Deterministic dense sampling of the closed ball.

    1-D: uniform scan of [-R, R].  2-D: polar product grid.  3-D: meridian
    half-disk product grid (psi is axisymmetric about the x1 axis, so a
    meridian scan covers all attained values).
    """
    R = params.radius
    if params.dim == 1:
        return np.linspace(-R, R, m).reshape(m, 1)
    mr = max(int(math.sqrt(m)), 24)
    mt = mr
    rr = R * (np.arange(mr) + 0.5) / mr
    if params.dim == 2:
        tt = 2 * math.pi * np.arange(mt) / mt
    else:
        tt = math.pi * (np.arange(mt) + 0.5) / mt
    rg, tg = np.meshgrid(rr, tt, indexing="ij")
    pts = np.zeros((mr * mt, params.dim))
    pts[:, 0] = (rg * np.cos(tg)).ravel()
    pts[:, 1] = (rg * np.sin(tg)).ravel()
    bnd = np.zeros((max(mt, 2), params.dim))   # boundary ring/pair
    if params.dim == 1:
        return pts  # already includes endpoints via linspace
    bt = tt[: max(mt, 2)]
    bnd[:, 0] = R * np.cos(bt)
    bnd[:, 1] = R * np.sin(bt)
    return np.vstack([pts, bnd])


def _safe_max_ratio(num: np.ndarray, den: np.ndarray, clause: str) -> float:
    mask = den > 0
    if not np.any(mask):
        raise ValueError(f"no valid samples for {clause}")
    ratio = num[mask] / den[mask]
    top = float(np.max(ratio))
    if not np.isfinite(top) or top > _RATIO_CAP:
        raise ValueError(f"sampled ratio unbounded for {clause}")
    return top


def geometry_constants(params: WeightParams,
                       probe_resolution: int = 10_000) -> GeometryConstants:
    """Sampled extremal-ratio constants, refined until stable below 1%."""
    if probe_resolution < 1_000:
        raise ValueError("probe_resolution must be at least 1000")
    prev = None
    m = probe_resolution
    for _ in range(8):
        cur = _geometry_constants_once(params, m)
        if prev is not None:
            drift = max(abs(getattr(cur, k) - getattr(prev, k))
                        / max(abs(getattr(prev, k)), 1e-30)
                        for k in ("c01", "c02", "c1", "c2", "c3", "mu0"))
            if drift < 0.01:
                return cur
        prev = cur
        m *= 2
    return prev


def _geometry_constants_once(params: WeightParams,
                             m: int) -> GeometryConstants:
    R, a = params.radius, params.x0_abs
    pts = _sample_points(params, m)
    peak = psi_at_x0(params)
    psi = eval_psi(params, pts)
    grad = eval_grad_psi(params, pts)
    grad_sq = np.sum(grad * grad, axis=-1)
    phi1 = psi - peak
    phi3 = -psi - peak
    x0 = params.x0_point
    dist0 = np.linalg.norm(pts - x0, axis=-1)
    rad = np.linalg.norm(pts, axis=-1)

    excl_radius = 2.0 * R / max(m, 2) if params.dim == 1 \
        else R / max(int(math.sqrt(m)), 24)
    excl = dist0 <= excl_radius
    rho = 0.5 * (a + R)
    annulus = rad >= rho
    nbhd = dist0 <= 0.5 * (R - a)

    # curvature at the peak: psi(x0) - psi ~ lam/2 d^2, |grad psi|^2 ~
    # lam^2 d^2 with lam = 4|x0|R/(R^2-|x0|^2); supplies the 0/0 limits.
    lam = 4.0 * a * R / (R * R - a * a)
    limit_c1 = 2.0 * lam
    limit_pinch = 1.0 / (2.0 * lam)

    c1 = max(
        _safe_max_ratio(grad_sq[~excl], np.abs(phi1[~excl]),
                        "gradient-value bound for phi1"),
        _safe_max_ratio(grad_sq, np.abs(phi3),
                        "gradient-value bound for phi3"),
        limit_c1,
    ) * 1.05

    c2_cands = [limit_pinch]
    if np.any(annulus):
        c2_cands.append(_safe_max_ratio(
            np.abs(phi1[annulus]), grad_sq[annulus],
            "value-gradient bound for phi1 on the annulus"))
        c2_cands.append(_safe_max_ratio(
            np.abs(phi3[annulus]), grad_sq[annulus],
            "value-gradient bound for phi3 on the annulus"))
    inner = ~annulus & ~excl
    if np.any(inner):
        c2_cands.append(_safe_max_ratio(
            np.abs(phi1[inner]), grad_sq[inner],
            "value-gradient bound for phi1 off the annulus"))
    c2 = max(c2_cands) * 1.05

    if not np.any(~annulus):
        raise ValueError("no samples inside the annulus complement")
    c3 = float(np.min(2.0 * psi[~annulus])) / 1.05
    if c3 <= 0:
        raise ValueError("separation constant c3 is not positive")

    outside = dist0 >= params.r
    mu0 = float(np.min(peak - psi[outside])) / 1.05
    if mu0 <= 0:
        raise ValueError("mu0 is not positive: observation ball too large")

    sel = nbhd & ~excl
    pinch = (peak - psi[sel]) / grad_sq[sel]
    c01 = min(float(np.min(pinch)), limit_pinch) / 1.05
    c02 = max(float(np.max(pinch)), limit_pinch) * 1.05

    return GeometryConstants(
        c01=c01, c02=c02, c1=c1, c2=c2, c3=c3, rho=rho,
        mu0=mu0, mu1=peak, probe_resolution=m)
