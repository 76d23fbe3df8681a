"""Run-level verification: ledger-dependent inequality audits.

Collects every checkable inequality for one finished run into a flat list
of audit entries {invariant_id, reference, pass, margin, tolerance}.  The
solver-level conservation checks live in `diagnostics`; here the ledger
constants and the tilted-norm machinery are brought in.
"""

from __future__ import annotations

import math

import numpy as np

from .diagnostics import TOLERANCES, CheckResult, solver_checks
from .grid import dirichlet_energy, integrate
from .logconv import (frequency_trace, interpolation_window_check,
                      observation_estimate_check, quadratic_forms,
                      sym_form_direct, tilt)
from .solver import RunResult, StatePair
from .grid import Field
from .weights import WeightParams, weight_fields

_FLOOR = TOLERANCES["norm_floor"]


def decay_certificate_check(run: RunResult, ledger) -> CheckResult:
    """ln y(t) <= ln y(0) + 2*beta - beta*t along the whole trace.

    beta comes from the ledger's contraction factor; it is astronomically
    small, so the certified rate is weak but the inequality is genuine.
    """
    tr = run.trace
    beta = ledger.beta
    y = tr["l2_dist"]
    mask = y >= _FLOOR
    if not np.any(mask) or y[0] < _FLOOR:
        return CheckResult("decay_certificate",
                           "certified exponential decay of the squared "
                           "distance (trivial: run starts at equilibrium)",
                           0.0, 0.0)
    ln_y0 = math.log(y[0])
    margins = (ln_y0 + 2.0 * beta - beta * tr.times[mask]
               - np.log(y[mask]))
    return CheckResult("decay_certificate",
                       "certified exponential decay of the squared "
                       "distance to equilibrium",
                       float(np.min(margins)), TOLERANCES["l2_monotone"])


def theta_contraction_check(run: RunResult, ledger) -> CheckResult:
    """y(2m+2) <= theta * y(2m) on every unit-2 subinterval of the run."""
    tr = run.trace
    ln_theta = float(ledger.ln_theta)
    worst = float("inf")
    m = 0
    found = False
    while 2.0 * (m + 1) <= tr.times[-1] + 1e-9:
        try:
            i0 = tr.index_at(2.0 * m)
            i1 = tr.index_at(2.0 * (m + 1))
        except KeyError:
            break
        y0, y1 = tr["l2_dist"][i0], tr["l2_dist"][i1]
        if y0 >= _FLOOR and y1 >= _FLOOR:
            worst = min(worst, math.log(y0) + ln_theta - math.log(y1))
            found = True
        m += 1
    if not found:
        return CheckResult("theta_contraction",
                           "per-window contraction factor (trivial: decayed "
                           "or too-short run)", 0.0, 0.0)
    return CheckResult("theta_contraction",
                       "squared distance contracts by theta over each "
                       "window of length 2",
                       worst, TOLERANCES["l2_monotone"])


def beta1_chain_check(run: RunResult, ledger) -> CheckResult:
    """2*||u||^2 <= 4*beta1*(total dissipation), snapshot by snapshot.

    Valid when the catalyst is bounded below by k0 on the whole domain (the
    spectral-gap route needs the reaction term active everywhere); for a
    degenerate catalyst the check is reported as skipped.
    """
    cfg = run.config
    grid = run.grid
    k_min = float(np.min(cfg.catalyst.values(grid, 0.0)))
    if k_min < ledger.k0 * (1.0 - 1e-9):
        return CheckResult("beta1_dissipation",
                           "dissipation controls the squared distance "
                           "(skipped: catalyst vanishes somewhere)",
                           0.0, 0.0)
    from .grid import ball_mask
    mask = ball_mask(grid, cfg.obs_x0, cfg.obs_r)
    worst = float("inf")
    for (t, a, b) in run.snapshots:
        u1, u2 = a - 1.0, b - 1.0
        total = integrate(grid, u1 * u1 + u2 * u2)
        # accumulated-roundoff noise floor: each implicit solve leaves a
        # relative residual of machine size, so after t/dt steps the field
        # noise is ~eps*(t/dt); below 100x that level (squared) the
        # inequality compares rounding artifacts
        noise = (2.3e-16 * max(t, run.dt) / run.dt) ** 2
        if total < max(_FLOOR, 1e4 * noise):
            continue
        k = cfg.catalyst.values(grid, t)
        diss = (cfg.d1 * dirichlet_energy(grid, u1)
                + cfg.d2 * dirichlet_energy(grid, u2)
                + integrate(grid, k * (a + b) * (u2 - u1) ** 2))
        lhs = 2.0 * float(np.dot(grid.volumes[mask],
                                 (u1 * u1 + u2 * u2)[mask]))
        worst = min(worst, (4.0 * ledger.beta1 * diss - lhs) / (2.0 * total))
    return CheckResult("beta1_dissipation",
                       "dissipation on the observation ball is controlled "
                       "by the spectral-gap constant",
                       worst, 1e-9)


def tilted_form_checks(run: RunResult, params: WeightParams
                       ) -> list[CheckResult]:
    """Residual checks on the tilted quadratic forms at a mid-run state.

    The antisymmetric form and the direct/integrated-by-parts disagreement
    both vanish at discretization order; the budget here is a generous
    O(spacing^2) envelope (the refinement tests measure the order sharply).
    """
    cfg = run.config
    t_mid = min(0.5 * params.T, run.snapshots[-1][0])
    t, a, b = run.snapshot_at(t_mid)
    st = StatePair(Field(run.grid, a), Field(run.grid, b), t)
    ts = tilt(st, params, cfg.catalyst)
    Sff, Aff, _ = quadratic_forms(ts, cfg.d1, cfg.d2)
    Sff_direct = sym_form_direct(ts, cfg.d1, cfg.d2)
    scale = max(ts.norm2(), abs(Sff), _FLOOR)
    budget = 1e4 * run.grid.spacing ** 2 * scale
    return [
        CheckResult("antisymmetric_residual",
                    "the antisymmetric tilted form vanishes at "
                    "discretization order",
                    budget - abs(Aff), 0.0),
        CheckResult("sym_form_two_ways",
                    "direct and integrated-by-parts assemblies of the "
                    "symmetric form agree at discretization order",
                    budget - abs(Sff - Sff_direct), 0.0),
    ]


def _frequency_trace_checks(run: RunResult, ft, ledger,
                            params: WeightParams) -> list[CheckResult]:
    """Inequalities along the frequency trace with ledger constants."""
    from .diagnostics import centered_derivative, fd_error_estimate
    out = []
    n2 = ft.norm2_values
    scale = max(float(np.max(n2)), _FLOOR)
    if params.s <= (ledger.s2 if ledger is not None else 1.0):
        out.append(CheckResult(
            "sym_form_nonnegative",
            "the symmetric tilted form is nonnegative below the smallness "
            "threshold",
            float(np.min(ft.Sff_values)) / scale, 1e-9))
    if ledger is None or ft.times.size < 5:
        return out
    # tilted energy identity: (1/2) d/dt ||f||^2 + <Sf,f> = <source, f>
    dn2 = centered_derivative(ft.times, n2)
    err = fd_error_estimate(ft.times, n2)
    resid = np.abs(0.5 * dn2 + ft.Sff_values - ft.Fdotf_values)
    # differencing allowance: third-derivative model of an exponential at
    # the locally observed frequency (n2' ~ -2 N n2)
    dt = float(np.min(np.diff(ft.times)))
    rate = 2.0 * np.nan_to_num(ft.N_values, nan=0.0)
    fd_model = (dt ** 2 / 6.0) * np.abs(rate) ** 3 * n2
    budget = 0.5 * err + fd_model + 1e4 * run.grid.spacing ** 2 * scale \
        + 50.0 * dt ** 2 * scale
    out.append(CheckResult(
        "tilted_energy_identity",
        "time derivative of the tilted norm balances the symmetric form "
        "and the source pairing (up to discretization noise)",
        float(np.min(budget - resid)) / scale, 1e-9))
    # two-sided derivative bound with ledger C1
    lhs = np.abs(0.5 * dn2 + ft.Sff_values)
    rhs = 0.5 * ft.Sff_values + (ledger.C1 / params.h) * n2
    out.append(CheckResult(
        "tilted_derivative_bound",
        "the tilted-norm derivative obeys the certified two-sided bound",
        float(np.min(rhs + 0.5 * err - lhs)) / scale, 1e-9))
    # source norm bound with ledger C1
    out.append(CheckResult(
        "source_norm_bound",
        "the tilted squared source norm is controlled by the norm and "
        "the symmetric form",
        float(np.min(ledger.C1 * (n2 + ft.Sff_values) - ft.F_norm2))
        / scale, 1e-9))
    return out


def audit(run: RunResult, ledger=None, params: WeightParams | None = None
          ) -> list[dict]:
    """Full audit of one run; returns serializable entries.

    Always performs the conservation/monotonicity checks.  With a ledger the
    decay, contraction, and dissipation checks are added; with weight
    parameters the tilted-form residuals, the frequency growth bound, the
    observation estimate, and the interpolation-window inequalities follow.
    """
    checks = list(solver_checks(run))
    entries = []
    if ledger is not None:
        checks.append(decay_certificate_check(run, ledger))
        checks.append(theta_contraction_check(run, ledger))
        checks.append(beta1_chain_check(run, ledger))
    if params is not None:
        checks.extend(tilted_form_checks(run, params))
        ft = frequency_trace(run, params, ledger)
        checks.append(CheckResult(
            "frequency_growth",
            "finite-difference N'(t) never exceeds its certified growth "
            "bound" if ledger is not None else
            "frequency function evaluated (no ledger: growth bound "
            "not checked)",
            -float(len(ft.flags)), 0.5))
        checks.extend(_frequency_trace_checks(run, ft, ledger, params))
        if ledger is not None:
            obs = observation_estimate_check(run, params, ledger)
            checks.append(CheckResult(
                "observation_estimate",
                "terminal norm controlled by the ball norm and the "
                "initial norm", obs["margin"], 1e-9))
            win = interpolation_window_check(run, params, ledger)
            worst = min(win.get("interpolated_margin", 0.0),
                        win.get("localization_margin", 0.0),
                        win.get("untilting_margin", 0.0))
            checks.append(CheckResult(
                "interpolation_window",
                "three-time interpolation, localization, and untilting "
                "inequalities on the certified window", worst, 1e-9))
    entries.extend(c.as_dict() for c in checks)
    return entries
