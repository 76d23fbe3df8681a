"""The explicit-constant chain: oracles, invariants, determinism.

Frozen oracles:
  * data bound at the normalized constant state a0 = b0 = 1 with unit
    catalyst ceiling: cubic integral 2, so the two branches are
    12^(2/3) ~ 5.2415 and 32; the bound is 32, and it quadruples when the
    catalyst ceiling doubles;
  * the flat-interval constant Cp on the 1-D unit-measure interval is the
    reciprocal of the grid's first nonzero zero-flux eigenvalue, which
    converges to 1/pi^2 = 0.10132...;
  * every functional constant of the reference configuration satisfies the
    order and positivity relations used downstream.
"""

import math

import mpmath as mp
import numpy as np
import pytest

from degenrd.constants import (build_ledger, compute_K0,
                               compute_sobolev_constant)
from degenrd.grid import Domain, build_grid, dirichlet_energy, integrate
from degenrd.weights import eval_lap_psi


# ---------------------------------------------------------------------------
# data bound K0
# ---------------------------------------------------------------------------

def test_K0_constant_state_oracle(grid256):
    ones = np.ones(grid256.ncells)
    assert compute_K0(grid256, ones, ones, k_sup=1.0) \
        == pytest.approx(32.0, rel=1e-12)
    # with a tiny catalyst the data branch 12^(2/3) wins
    assert compute_K0(grid256, ones, ones, k_sup=0.1) \
        == pytest.approx(12.0 ** (2.0 / 3.0), rel=1e-12)


def test_K0_quadruples_with_doubled_catalyst(grid256):
    ones = np.ones(grid256.ncells)
    assert compute_K0(grid256, ones, ones, 2.0) \
        == pytest.approx(4 * compute_K0(grid256, ones, ones, 1.0), rel=1e-12)


# ---------------------------------------------------------------------------
# flat-interval and embedding constants
# ---------------------------------------------------------------------------

def test_Cp_reference_value(ref_ledger):
    assert ref_ledger.Cp == pytest.approx(1.0 / math.pi ** 2, rel=1e-3)


def test_sobolev_constant_lower_bound_and_random_audit(grid256):
    C = compute_sobolev_constant(grid256)
    assert C >= 1.0  # attained by the constant field on unit measure
    rng = np.random.default_rng(101)
    x = grid256.centers[:, 0]
    for _ in range(50):
        coef = rng.standard_normal(5)
        g = coef[0] + sum(c * np.cos((k + 1) * math.pi * (x + 0.5))
                          for k, c in enumerate(coef[1:]))
        lhs = integrate(grid256, g ** 6) ** (1.0 / 3.0)
        rhs = C * (integrate(grid256, g * g) + dirichlet_energy(grid256, g))
        assert lhs <= rhs * (1 + 1e-10)


# ---------------------------------------------------------------------------
# sampled-derivative constants
# ---------------------------------------------------------------------------

def test_C4_dominates_dense_laplacian_scan(ref_ledger, ref_params):
    pts = np.linspace(-0.4999, 0.4999, 50_001).reshape(-1, 1)
    scan = np.max(np.abs(eval_lap_psi(ref_params, pts)))
    assert ref_ledger.C4 >= scan  # 1.05 safety absorbs the finer scan


# ---------------------------------------------------------------------------
# full-chain invariants on the reference ledger
# ---------------------------------------------------------------------------

def test_ledger_order_relations(ref_ledger):
    led = ref_ledger
    assert 0.0 < led.C0 < 1.0
    assert led.C1 >= 1.0
    assert led.s2 <= min(led.s0, led.s1) and led.s2 > 0
    assert led.K0 == pytest.approx(32.0, rel=1e-6)
    assert led.beta1 > 0
    assert led.c > 1 and led.M > 1
    assert led.geometry.mu0 > 0 and led.geometry.mu1 > 0


def test_window_multiplier_admissibility(ref_ledger):
    """The reported multiplier satisfies the selection inequality and the
    quadrature exponent stays under its closed-form bound."""
    led = ref_ledger
    g = led.geometry
    with mp.workdps(60):
        ln_ellp1 = mp.log(led.ell + 1)
        lhs = mp.log(g.mu1) + mp.log(1 + mp.e ** led.ln_M_ell_bound)
        rhs = mp.log(g.mu0 / 2) + ln_ellp1
        assert lhs <= rhs
        assert mp.log(led.M_ell) <= led.ln_M_ell_bound
        assert not led.ell_exact  # chain magnitude forces the log-space solve
        assert led.ell > 10 ** 6


def test_decay_certificate_strictness(ref_ledger):
    """theta < 1 and beta > 0 are certified in log form even when the float
    projections round to 1.0 and 0.0."""
    led = ref_ledger
    assert mp.isfinite(led.log_beta) and led.log_beta < 0
    assert led.beta >= 0.0
    assert led.theta <= 1.0
    assert led.gamma >= 1.0
    assert led.theta * led.gamma == pytest.approx(1.0, rel=1e-12)


def test_ledger_serialization_and_determinism(ref_run, ref_params,
                                              ref_ledger):
    import json
    j1 = ref_ledger.as_json()
    json.dumps(j1)
    for name, ent in j1.items():
        assert "provenance" in ent and "value" in ent
    _, a0, b0 = ref_run.snapshots[0]
    led2 = build_ledger(ref_run.grid, ref_params, a0, b0, ref_run.B0,
                        k0=1.0, k_sup=1.0, d1=1.0, d2=1.0, T=10.0)
    assert json.dumps(j1, sort_keys=True) \
        == json.dumps(led2.as_json(), sort_keys=True)


def test_every_constant_has_provenance(ref_ledger):
    for name, ent in ref_ledger.as_json().items():
        if name in ("M_ell_bound", "mu0", "mu1",
                    "geometry.probe_resolution"):
            continue
        assert ent["provenance"], f"missing provenance for {name}"
