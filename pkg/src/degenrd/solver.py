"""IMEX time integration of the two-species reversible reaction system.

The PDE pair

    da/dt - d1*lap(a) =  k(x,t) * (b^2 - a^2)
    db/dt - d2*lap(b) = -k(x,t) * (b^2 - a^2)

is advanced with Crank-Nicolson diffusion (implicit, second order) and an
explicit midpoint-predictor reaction.  The reaction increments applied to a
and b are exactly opposite, and the CN solves preserve the volume-weighted
total of each species, so the total mass of a+b is conserved to rounding
error.  Positivity is monitored, never enforced: a negative concentration
aborts the run with advice to reduce dt, since silently clipping would
invalidate the identities the verification harness checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg

from .grid import Domain, Grid, Field, build_grid, integrate, \
    dirichlet_energy, ball_mask
from .diagnostics import TraceSeries

_CATALYST_KINDS = ("constant", "bump", "annular-zero", "time-modulated-bump")
_INITIAL_KINDS = ("constant", "cosine", "gaussian")


def smoothstep(z: np.ndarray) -> np.ndarray:
    """Quintic smoothstep: 1 for z<=0, 0 for z>=1, C^2 in between."""
    z = np.clip(z, 0.0, 1.0)
    return 1.0 - z ** 3 * (10.0 - 15.0 * z + 6.0 * z * z)


@dataclass(frozen=True)
class CatalystSpec:
    """Reaction-coefficient field k(x, t).

    kinds:
      constant             k = k0 everywhere.
      bump                 k = k0 on the ball B(x0, r), smoothly cut to 0
                           over a transition layer of width `smoothness`.
      annular-zero         k = k_max except on the annulus
                           (annulus_inner, annulus_outer) about the origin
                           where it dips smoothly to 0; the annulus must
                           not meet B(x0, r).
      time-modulated-bump  bump profile times 1 + (k_max/k0 - 1) *
                           sin^2(2*pi*t/period).
    """

    kind: str
    k0: float
    k_max: float | None = None
    x0: float = 0.25
    r: float = 0.1
    smoothness: float | None = None
    annulus_inner: float | None = None
    annulus_outer: float | None = None
    period: float = 1.0

    def __post_init__(self):
        if self.kind not in _CATALYST_KINDS:
            raise ValueError(f"unknown catalyst kind {self.kind!r}")
        if self.k0 < 0 or (self.kind != "constant" and not self.k0 > 0):
            # k0 = 0 is allowed only for the constant kind (pure-diffusion
            # oracle runs); localized kinds need a positive floor.
            raise ValueError("k0 must be positive (floor on the ball)")
        kmax = self.k_max if self.k_max is not None else self.k0
        object.__setattr__(self, "k_max", float(kmax))
        if self.k_max < self.k0:
            raise ValueError("k_max must dominate k0")
        if self.kind == "annular-zero":
            ri, ro = self.annulus_inner, self.annulus_outer
            if ri is None or ro is None or not 0 < ri < ro:
                raise ValueError("annular-zero needs 0 < annulus_inner "
                                 "< annulus_outer")
        if self.kind == "time-modulated-bump" and not self.period > 0:
            raise ValueError("period must be positive")

    def _width(self, grid: Grid) -> float:
        return self.smoothness if self.smoothness is not None \
            else 2.0 * grid.spacing

    def values(self, grid: Grid, t: float) -> np.ndarray:
        """Sample k(., t) at the cell centers."""
        if self.kind == "constant":
            return np.full(grid.ncells, self.k0)
        w = self._width(grid)
        x0 = np.zeros(grid.domain.dim)
        x0[0] = self.x0
        dist = np.linalg.norm(grid.centers - x0, axis=1)
        if self.kind in ("bump", "time-modulated-bump"):
            k = self.k0 * smoothstep((dist - self.r) / w)
            if self.kind == "time-modulated-bump":
                ratio = self.k_max / self.k0
                k = k * (1.0 + (ratio - 1.0)
                         * math.sin(2.0 * math.pi * t / self.period) ** 2)
            return k
        # annular-zero: full strength except a smooth dip on the annulus
        ri, ro = self.annulus_inner, self.annulus_outer
        if ri - w < self.x0 + self.r and ro + w > max(self.x0 - self.r, 0):
            raise ValueError("annulus (with its transition layer) must not "
                             "meet the observation ball")
        rad = np.linalg.norm(grid.centers, axis=1)
        mid_in = smoothstep((ri - rad) / w)    # 0 well inside ri, 1 beyond
        dip = smoothstep((rad - ro) / w) * mid_in
        return self.k_max * (1.0 - dip)


@dataclass(frozen=True)
class InitialSpec:
    """Built-in initial profiles (pre-normalization).

    constant: a = value_a, b = value_b.
    cosine:   a = 1 + amplitude*cos(pi*(x1 + 1/2)),
              b = 1 - amplitude*cos(pi*(x1 + 1/2)).
    gaussian: floor + amplitude*exp(-|x -+ center*e1|^2/(2 width^2)),
              mirrored bumps for a and b.
    """

    kind: str = "cosine"
    amplitude: float = 0.3
    value_a: float = 1.0
    value_b: float = 1.0
    center: float = 0.2
    width: float = 0.1
    floor: float = 0.5

    def __post_init__(self):
        if self.kind not in _INITIAL_KINDS:
            raise ValueError(f"unknown initial kind {self.kind!r}")

    def profiles(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        x1 = grid.centers[:, 0]
        if self.kind == "constant":
            a = np.full(grid.ncells, float(self.value_a))
            b = np.full(grid.ncells, float(self.value_b))
        elif self.kind == "cosine":
            mode = np.cos(math.pi * (x1 + 0.5))
            a = 1.0 + self.amplitude * mode
            b = 1.0 - self.amplitude * mode
        else:
            c = np.zeros(grid.domain.dim)
            c[0] = self.center
            da = np.linalg.norm(grid.centers - c, axis=1)
            db = np.linalg.norm(grid.centers + c, axis=1)
            a = self.floor + self.amplitude * np.exp(-da ** 2
                                                     / (2 * self.width ** 2))
            b = self.floor + self.amplitude * np.exp(-db ** 2
                                                     / (2 * self.width ** 2))
        return a, b


@dataclass
class StatePair:
    """Concentrations a and b on one grid at one time."""

    a: Field
    b: Field
    t: float

    @property
    def grid(self) -> Grid:
        return self.a.grid


@dataclass(frozen=True)
class SimConfig:
    """Full simulation configuration."""

    dim: int = 1
    resolution: int = 256
    d1: float = 1.0
    d2: float = 1.0
    catalyst: CatalystSpec = CatalystSpec(kind="bump", k0=1.0)
    initial: InitialSpec = InitialSpec()
    dt: float | None = None
    t_end: float = 10.0
    record_stride: float = 0.05
    save_fields: bool = True
    field_stride: float = 0.25
    obs_x0: float | None = None
    obs_r: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not (self.d1 > 0 and self.d2 > 0):
            raise ValueError("diffusivities must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.obs_x0 is None:
            object.__setattr__(self, "obs_x0", self.catalyst.x0)
        if self.obs_r is None:
            object.__setattr__(self, "obs_r", self.catalyst.r)


def init_state(grid: Grid, config: SimConfig) -> tuple[StatePair, float]:
    """Sample and normalize initial data; returns (state, B0).

    The raw profiles are rescaled by one common factor so the total mass of
    a+b is exactly 2; B0 is the cellwise floor min(a0, b0) after rescaling.
    """
    a, b = config.initial.profiles(grid)
    if np.min(a) <= 0 or np.min(b) <= 0:
        raise ValueError("initial profiles must be strictly positive")
    total = integrate(grid, a) + integrate(grid, b)
    factor = 2.0 / total
    if not 0.5 <= factor <= 2.0:
        warnings.warn(
            f"initial profiles far from mass-2 normalization "
            f"(rescale factor {factor:.3g})", stacklevel=2)
    a, b = a * factor, b * factor
    B0 = float(min(np.min(a), np.min(b)))
    return StatePair(Field(grid, a), Field(grid, b), 0.0), B0


class Stepper:
    """Cached Crank-Nicolson factorizations for a fixed (grid, dt, d1, d2)."""

    def __init__(self, grid: Grid, dt: float, d1: float, d2: float):
        self.grid, self.dt = grid, dt
        eye = sp.identity(grid.ncells, format="csc")
        L = grid.laplacian.tocsc()
        self.solve = []
        self.forward = []
        for d in (d1, d2):
            A = (eye - (0.5 * dt * d) * L).tocsc()
            try:
                self.solve.append(scipy.sparse.linalg.factorized(A))
            except RuntimeError as exc:
                raise RuntimeError(
                    f"implicit diffusion solve failed to factorize: {exc}"
                ) from exc
            self.forward.append((eye + (0.5 * dt * d) * L).tocsr())


def stability_dt(config: SimConfig, a: np.ndarray, b: np.ndarray) -> float:
    """Explicit-reaction stability bound dt <= 0.5/(k_max * max(a+b))."""
    peak = float(np.max(a + b))
    if config.catalyst.k_max == 0.0:
        return math.inf                      # pure diffusion: unconditional
    return 0.5 / (config.catalyst.k_max * max(peak, 1e-30))


def default_dt(grid: Grid, config: SimConfig, a, b) -> float:
    return min(stability_dt(config, a, b), 0.5 * grid.spacing)


def step(state: StatePair, config: SimConfig, stepper: Stepper) -> StatePair:
    """One IMEX step: CN diffusion + explicit midpoint reaction."""
    grid, dt = state.grid, stepper.dt
    a, b = state.a.values, state.b.values
    if dt > stability_dt(config, a, b) * (1 + 1e-12):
        raise ValueError(
            "dt exceeds the explicit-reaction stability bound; reduce dt")
    k_now = config.catalyst.values(grid, state.t)
    k_half = k_now if config.catalyst.kind != "time-modulated-bump" \
        else config.catalyst.values(grid, state.t + 0.5 * dt)
    # midpoint predictor: backward-Euler half step, reaction frozen at t
    r0 = k_now * (b * b - a * a)
    a_h = stepper.solve[0](a + (0.5 * dt) * r0)
    b_h = stepper.solve[1](b - (0.5 * dt) * r0)
    rh = k_half * (b_h * b_h - a_h * a_h)
    a_new = stepper.solve[0](stepper.forward[0] @ a + dt * rh)
    b_new = stepper.solve[1](stepper.forward[1] @ b - dt * rh)
    if not (np.all(np.isfinite(a_new)) and np.all(np.isfinite(b_new))):
        raise RuntimeError("non-finite state after step; reduce dt")
    if min(a_new.min(), b_new.min()) < 0:
        raise RuntimeError("positivity lost, reduce dt")
    return StatePair(Field(grid, a_new), Field(grid, b_new), state.t + dt)


@dataclass
class RunResult:
    """Trace, snapshots, and provenance of one completed simulation."""

    config: SimConfig
    grid: Grid
    trace: TraceSeries
    snapshots: list  # (t, a_values, b_values)
    B0: float
    dt: float

    def snapshot_at(self, t: float):
        ts = np.array([s[0] for s in self.snapshots])
        i = int(np.argmin(np.abs(ts - t)))
        if abs(ts[i] - t) > 1e-9 + 1e-6 * max(1.0, abs(t)):
            raise KeyError(f"no field snapshot near t={t}")
        return self.snapshots[i]

    def state_at(self, t: float) -> StatePair:
        ts, a, b = self.snapshot_at(t)
        return StatePair(Field(self.grid, a), Field(self.grid, b), ts)


def _record(grid, config, a, b, k, ball):
    u1, u2 = a - 1.0, b - 1.0
    du = u2 - u1
    return {
        "mass": integrate(grid, a + b),
        "l2_dist": integrate(grid, u1 * u1 + u2 * u2),
        "l3_sum": integrate(grid, a ** 3 + b ** 3),
        "min_ab": float(min(a.min(), b.min())),
        "dissipation_grad_a": config.d1 * dirichlet_energy(grid, a),
        "dissipation_grad_b": config.d2 * dirichlet_energy(grid, b),
        "dissipation_reaction": integrate(grid, k * (a + b) * du * du),
        "u_l3_max": max(integrate(grid, np.abs(u1) ** 3),
                        integrate(grid, np.abs(u2) ** 3)),
        "l2_ball": float(np.dot(grid.volumes[ball],
                                (u1 * u1 + u2 * u2)[ball])),
    }


def run(config: SimConfig, grid: Grid | None = None) -> RunResult:
    """Advance the system to t_end, recording traces and snapshots."""
    if grid is None:
        grid = build_grid(Domain(config.dim), config.resolution)
    state, B0 = init_state(grid, config)
    a, b = state.a.values, state.b.values

    dt = config.dt if config.dt is not None else default_dt(grid, config, a, b)
    rec_every = max(1, round(config.record_stride / dt))
    dt = config.record_stride / rec_every if config.dt is None else dt
    nsteps = max(1, round(config.t_end / dt))
    if abs(nsteps * dt - config.t_end) > 1e-9 * config.t_end:
        nsteps = math.ceil(config.t_end / dt - 1e-12)
        dt = config.t_end / nsteps
        rec_every = max(1, round(config.record_stride / dt))

    stepper = Stepper(grid, dt, config.d1, config.d2)
    ball = ball_mask(grid, config.obs_x0, config.obs_r)
    snap_every = max(1, round(config.field_stride / dt)) \
        if config.save_fields else None

    times, rows, snapshots = [], [], []

    def take(n, st):
        k = config.catalyst.values(grid, st.t)
        times.append(st.t)
        rows.append(_record(grid, config, st.a.values, st.b.values, k, ball))
        if config.save_fields and (
                snap_every is None or n % snap_every == 0 or n == nsteps):
            snapshots.append((st.t, st.a.values.copy(), st.b.values.copy()))

    take(0, state)
    for n in range(1, nsteps + 1):
        state = step(state, config, stepper)
        if n % rec_every == 0 or n == nsteps:
            take(n, state)

    channels = {key: np.array([r[key] for r in rows]) for key in rows[0]}
    trace = TraceSeries(np.array(times), channels,
                        meta={"dt": repr(dt), "resolution":
                              str(config.resolution)})
    return RunResult(config=config, grid=grid, trace=trace,
                     snapshots=snapshots, B0=B0, dt=dt)
