"""Scalar time-series containers, decay-rate fitting, and invariant audits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Central tolerance table.  Every audit and acceptance check references
# these values so there is a single source of truth.
TOLERANCES = {
    "mass": 1e-8,              # |total mass - 2|
    "l2_monotone": 1e-8,       # allowed uptick of the squared L2 distance
    "l3_monotone": 1e-6,       # allowed uptick of the cubic-norm sum
    "min_principle": 1e-6,     # allowed dip of min(a,b) below B0
    "mean_zero": 1e-8,         # |integral of (u1+u2)|
    "conservation": 1e-12,     # discrete divergence-theorem identity
    "symmetry": 1e-10,         # volume-weighted operator symmetry
    "identity_order": 1.9,     # required convergence order of residuals
    "norm_floor": 1e-30,       # squared-norm floor below which N(t) is a gap
}


@dataclass
class TraceSeries:
    """Named scalar channels sampled on a strictly increasing time grid."""

    times: np.ndarray
    channels: dict[str, np.ndarray]
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name, ch in self.channels.items():
            ch = np.asarray(ch, float)
            if ch.shape != self.times.shape:
                raise ValueError(f"channel {name!r} length mismatch")
            self.channels[name] = ch

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    def index_at(self, t: float, tol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol + 1e-6 * max(1.0, abs(t)):
            raise KeyError(f"no sample near t={t}")
        return i


def fit_decay_rate(series: TraceSeries, channel: str,
                   window: tuple[float, float] | None = None) -> dict:
    """Least-squares exponential-decay fit of a positive channel.

    Fits log(channel) = intercept - rate * t on the window (defaults to the
    run with the first 10% transient dropped) and returns
    {rate, intercept, r_squared}.
    """
    t = series.times
    y = series[channel]
    if window is None:
        window = (t[0] + 0.1 * (t[-1] - t[0]), t[-1])
    lo, hi = window
    mask = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if np.count_nonzero(mask) < 10:
        raise ValueError("fit window must contain at least 10 samples")
    if np.any(y[mask] <= 0):
        raise ValueError("channel must be positive on the fit window")
    tw, lw = t[mask], np.log(y[mask])
    A = np.column_stack([tw, np.ones_like(tw)])
    sol, *_ = np.linalg.lstsq(A, lw, rcond=None)
    slope, intercept = sol
    pred = A @ sol
    ss_res = float(np.sum((lw - pred) ** 2))
    ss_tot = float(np.sum((lw - np.mean(lw)) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return {"rate": float(-slope), "intercept": float(intercept),
            "r_squared": r2}


def centered_derivative(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Centered finite-difference derivative, one-sided at the ends."""
    return np.gradient(y, t, edge_order=2)


def fd_error_estimate(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pointwise error estimate for the centered derivative.

    Compares the full-resolution derivative with one computed on the
    twice-coarsened samples (three-point Richardson style); the difference
    bounds the differencing noise, floored at rounding scale.
    """
    d_fine = centered_derivative(t, y)
    if t.size >= 7:
        d_coarse = centered_derivative(t[::2], y[::2])
        est = np.abs(np.interp(t, t[::2], d_coarse) - d_fine)
    else:
        est = np.zeros_like(d_fine)
    scale = np.maximum(np.abs(y), np.max(np.abs(y)) * 1e-6)
    dt = np.min(np.diff(t))
    return est + 1e-12 * scale / dt + 1e-300


@dataclass
class CheckResult:
    """One audited inequality: margin >= -tolerance means pass."""

    invariant_id: str
    reference: str
    margin: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tolerance

    def as_dict(self) -> dict:
        return {
            "invariant_id": self.invariant_id,
            "reference": self.reference,
            "pass": bool(self.passed),
            "margin": _clamp(self.margin),
            "tolerance": self.tolerance,
        }


def _clamp(x: float) -> float:
    if x == float("inf") or x > 1e300:
        return 1e300
    if x == float("-inf") or x < -1e300:
        return -1e300
    return float(x)


def energy_identity_residuals(series: TraceSeries) -> np.ndarray:
    """Residual of the two-species energy balance at interior samples.

    Checks d/dt (||u||^2 / 2) + (gradient dissipation) + (reaction
    dissipation) = 0 using centered differences of the recorded squared
    distance; returns |residual| per interior sample.
    """
    t = series.times
    e = series["l2_dist"]
    diss = (series["dissipation_grad_a"] + series["dissipation_grad_b"]
            + series["dissipation_reaction"])
    dedt = centered_derivative(t, e)
    return np.abs(0.5 * dedt + diss)[1:-1]


def audit(run, ledger=None, params=None) -> list[dict]:
    """Full invariant audit of a finished run (see `verify.audit`)."""
    from .verify import audit as _audit
    return _audit(run, ledger=ledger, params=params)


def solver_checks(run, tol=TOLERANCES) -> list[CheckResult]:
    """Conservation/monotonicity/minimum-principle audit of one run."""
    tr = run.trace
    out = [
        CheckResult("mass_conservation",
                    "total mass of a+b stays at 2",
                    -float(np.max(np.abs(tr["mass"] - 2.0))), tol["mass"]),
        CheckResult("l2_monotone",
                    "squared L2 distance to equilibrium is nonincreasing",
                    -float(np.max(np.diff(tr["l2_dist"]), initial=0.0)),
                    tol["l2_monotone"]),
        CheckResult("l3_monotone",
                    "cubic-norm sum never exceeds its initial value",
                    -float(np.max(tr["l3_sum"] - tr["l3_sum"][0])),
                    tol["l3_monotone"]),
        CheckResult("min_principle",
                    "cellwise min(a,b) stays above the initial floor",
                    float(np.min(tr["min_ab"]) - run.B0),
                    tol["min_principle"]),
        CheckResult("mean_zero_shift",
                    "integral of (u1+u2) stays zero",
                    -float(np.max(np.abs(tr["mass"] - 2.0))),
                    tol["mean_zero"]),
    ]
    res = energy_identity_residuals(tr)
    # Tolerance: discretization envelope C*(dt^2 + dx^2) plus the
    # centered-differencing error of an exponential at the locally
    # observed decay rate (third-derivative model rate^3 * e * dt^2 / 6);
    # the refinement tests measure the residual order sharply.
    dt = float(np.min(np.diff(tr.times)))
    e = tr["l2_dist"]
    scale = max(float(np.max(e)), 1e-30)
    rate = 2.0 * (tr["dissipation_grad_a"] + tr["dissipation_grad_b"]
                  + tr["dissipation_reaction"]) / np.maximum(e, 1e-30)
    fd_model = (dt ** 2 / 6.0) * rate ** 3 * e
    allowance = (0.5 * fd_error_estimate(tr.times, e) + fd_model)[1:-1]
    budget = 50.0 * scale * (dt ** 2 + run.grid.spacing ** 2)
    out.append(CheckResult(
        "energy_identity",
        "time derivative of the squared distance balances dissipation "
        "(up to discretization and differencing noise)",
        float(np.min(budget + allowance - res)) / scale
        if res.size else 0.0,
        0.0))
    return out
