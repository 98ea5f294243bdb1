import math

import numpy as np
import pytest

from conftest import gaussian_field
from stratshear.evolution import (
    RawState,
    StepUnstable,
    coercivity_constants,
    couette_rhs,
    desymmetrize,
    evolve,
    pointwise_energy,
    rhs_couette,
    rhs_full,
    rk4_integrate,
    symmetrize,
    weighted_energy_Es,
)
from stratshear.multipliers import eval_bl, eval_p, eval_p_prime
from stratshear.spectral_ops import FrequencyGrid, SpectralField
from stratshear.weights import WeightSet


def make_state(grid, t=0.0, qc=1.0):
    theta = gaussian_field(grid)
    q = SpectralField(grid, np.exp(-((grid.etas - qc) ** 2) / 2).astype(complex))
    return RawState(theta, q, t)


def test_rhs_couette_substitutions(grid256):
    # with theta = 0 the density feeds theta only: dtheta = -i k R q, dq = 0
    q = gaussian_field(grid256)
    zeros = SpectralField(grid256, np.zeros(grid256.n, complex))
    dtheta, dq = rhs_couette(0.7, RawState(zeros, q, 0.7), 0.0, 2.0)
    assert np.allclose(dtheta, -1j * grid256.k * 2.0 * q.values)
    assert not np.any(dq)
    # R = 0 and beta = 0 freeze theta entirely
    state = make_state(grid256)
    dtheta, dq = rhs_couette(0.0, state, 0.0, 0.0)
    assert not np.any(dtheta)


def symmetric_rhs(t, z1, z2, k, etas, beta, R):
    """Direct right-hand side of the symmetrized 2x2 system (unweighted)."""
    p = eval_p(t, k, etas)
    pp = eval_p_prime(t, k, etas)
    bl = eval_bl(t, k, etas, beta)
    row = k * math.sqrt(R) / np.sqrt(p)
    dz1 = -0.25 * (pp / p) * z1 - row * z2 + 1j * k * beta * bl * z1 / p
    dz2 = row * z1 + 0.25 * (pp / p) * z2 + row * (bl - 1.0) * z1
    return dz1, dz2


@pytest.mark.parametrize("beta", [0.0, 1.0])
def test_raw_step_matches_symmetrized_step(grid256, beta):
    # one RK4 step in raw variables, transformed, against one step of the
    # symmetrized system; agreement far below the O(dt^2) envelope
    R, dt, t0 = 1.0, 0.01, 1.3
    state = make_state(grid256, t=t0)
    sym0 = symmetrize(state, R)

    th, q = rk4_integrate(
        lambda t, a, b: couette_rhs(t, a, b, grid256.k, grid256.etas, beta, R),
        state.theta.values, state.q.values, t0, t0 + dt, dt)
    sym_from_raw = symmetrize(RawState(SpectralField(grid256, th), SpectralField(grid256, q), t0 + dt), R)

    z1, z2 = rk4_integrate(
        lambda t, a, b: symmetric_rhs(t, a, b, grid256.k, grid256.etas, beta, R),
        sym0.z1.values, sym0.z2.values, t0, t0 + dt, dt)

    scale = max(np.max(np.abs(z1)), np.max(np.abs(z2)))
    assert np.max(np.abs(sym_from_raw.z1.values - z1)) <= dt**2 * scale
    assert np.max(np.abs(sym_from_raw.z2.values - z2)) <= dt**2 * scale


@pytest.mark.parametrize("beta", [0.0, 1.0])
def test_full_rhs_reduces_to_couette(grid256, couette_spectrum, beta):
    state = make_state(grid256, t=2.3)
    ref = rhs_couette(2.3, state, beta, 1.0)
    got = rhs_full(2.3, state, couette_spectrum, beta, 1.0)
    assert np.max(np.abs(ref[0] - got[0])) < 1e-14
    assert np.max(np.abs(ref[1] - got[1])) < 1e-14


def test_full_rhs_perturbation_scaling(grid256):
    from stratshear.shear import build_profile, sample_spectrum

    t, beta, R = 1.5, 1.0, 1.0
    state = make_state(grid256, t=t)
    snorm = state.theta.l2() + state.q.l2()
    consts = []
    for a in (0.01, 0.02, 0.04):
        prof = build_profile("perturbed", a=a, sigma=2.0, s=0.0)
        spec = sample_spectrum(prof, grid256)
        dref = rhs_couette(t, state, beta, R)
        dgot = rhs_full(t, state, spec, beta, R)
        diff = np.sqrt(grid256.integrate(np.abs(dgot[0] - dref[0]) ** 2)
                       + grid256.integrate(np.abs(dgot[1] - dref[1]) ** 2))
        consts.append(diff / (prof.epsilon * snorm))
    base = consts[0]
    for c in consts[1:]:
        assert abs(c - base) / base < 0.25


def test_evolve_zero_data_stays_zero(grid256):
    zeros = SpectralField(grid256, np.zeros(grid256.n, complex))
    report, hist = evolve(RawState(zeros, zeros.copy(), 0.0), beta=0.0, R=1.0,
                          t_max=1.0, dt=0.01, record_every=10)
    assert all(not np.any(s.theta.values) and not np.any(s.q.values) for s in hist)
    assert np.all(report.energy == 0.0)


def test_evolve_rejects_unstable_dt(grid256):
    state = make_state(grid256)
    with pytest.raises(ValueError, match="stability"):
        evolve(state, beta=0.0, R=4.0, t_max=1.0, dt=0.05)


def test_evolve_linearity(grid256):
    state = make_state(grid256)
    scaled = RawState(SpectralField(grid256, 2.5 * state.theta.values),
                      SpectralField(grid256, 2.5 * state.q.values), 0.0)
    _, h1 = evolve(state, beta=1.0, R=1.0, t_max=2.0, dt=0.01, record_every=100)
    _, h2 = evolve(scaled, beta=1.0, R=1.0, t_max=2.0, dt=0.01, record_every=100)
    assert np.max(np.abs(h2[-1].theta.values - 2.5 * h1[-1].theta.values)) < 1e-12


def test_single_mode_richardson_reference():
    # k=1, eta=0, beta=0, R=1, theta(0)=1, q(0)=0 over t in [0, 100]:
    # dt = 0.01 against a dt/16 reference, max relative error <= 1e-6
    etas = np.array([0.0])
    rhs = lambda t, a, b: couette_rhs(t, a, b, 1, etas, 0.0, 1.0)
    th0 = np.array([1.0 + 0j])
    q0 = np.array([0.0 + 0j])
    checkpoints = np.arange(0.0, 101.0, 10.0)
    coarse, fine = [], []
    th, q = th0, q0
    thf, qf = th0, q0
    for t_from, t_to in zip(checkpoints[:-1], checkpoints[1:]):
        th, q = rk4_integrate(rhs, th, q, t_from, t_to, 0.01)
        thf, qf = rk4_integrate(rhs, thf, qf, t_from, t_to, 0.01 / 16)
        coarse.append((th[0], q[0]))
        fine.append((thf[0], qf[0]))
    for (tc, qc), (tf_, qf_) in zip(coarse, fine):
        mag = math.hypot(abs(tf_), abs(qf_))
        assert abs(tc - tf_) <= 1e-6 * mag
        assert abs(qc - qf_) <= 1e-6 * mag


def test_rk4_self_convergence_order():
    etas = np.array([0.0])
    rhs = lambda t, a, b: couette_rhs(t, a, b, 1, etas, 0.0, 1.0)
    th0 = np.array([1.0 + 0j])
    q0 = np.array([0.0 + 0j])
    ref_th, ref_q = rk4_integrate(rhs, th0, q0, 0.0, 20.0, 20.0 / 2**15)
    errs = []
    dts = (0.04, 0.02, 0.01)
    for dt in dts:
        th, q = rk4_integrate(rhs, th0, q0, 0.0, 20.0, dt)
        errs.append(math.hypot(abs(th[0] - ref_th[0]), abs(q[0] - ref_q[0])))
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope == pytest.approx(4.0, abs=0.2)


def test_pointwise_energy_values(grid256):
    # Z1 = 1, Z2 = 0 at the critical time (p' = 0) gives density 1/2: build the
    # raw state whose symmetrized image is that
    k = grid256.k
    eta0 = grid256.etas[140]
    t = eta0 / k
    p = grid256.p(t)
    theta = SpectralField(grid256, p**0.25 * np.ones(grid256.n, complex))
    q = SpectralField(grid256, np.zeros(grid256.n, complex))
    e_eta, _ = pointwise_energy(RawState(theta, q, t), R=1.0)
    assert e_eta[140] == pytest.approx(0.5)


def test_pointwise_energy_coercivity_sandwich():
    rng = np.random.default_rng(50)
    grid = FrequencyGrid(k=1, eta_max=10.0, n=64)
    for R in (0.26, 0.5, 1.0, 4.0):
        lo, hi = coercivity_constants(R)
        for _ in range(160):  # 160 states x 64 cells ~ 10^4 samples
            t = rng.uniform(0, 30)
            theta = SpectralField(grid, rng.standard_normal(64) + 1j * rng.standard_normal(64))
            q = SpectralField(grid, rng.standard_normal(64) + 1j * rng.standard_normal(64))
            state = RawState(theta, q, t)
            e_eta, _ = pointwise_energy(state, R)
            sym = symmetrize(state, R)
            quad = np.abs(sym.z1.values) ** 2 + np.abs(sym.z2.values) ** 2
            assert np.all(e_eta >= lo * quad - 1e-12)
            assert np.all(e_eta <= hi * quad + 1e-12)


def test_coercivity_fails_at_and_below_threshold():
    lo_at, _ = coercivity_constants(0.25)
    assert lo_at == pytest.approx(0.0, abs=1e-15)
    lo_below, _ = coercivity_constants(0.2)
    assert lo_below < 0.0


def test_symmetrize_roundtrip(grid256):
    # moderate weight constants keep the inverse weight inside float range
    ws = WeightSet(beta=1.0, R=1.0, delta=0.5, C0=64.0, c_beta=1.5)
    state = make_state(grid256, t=3.0)
    for weights in (None, ws):
        sym = symmetrize(state, 1.0, weights)
        back = desymmetrize(sym, 1.0, weights)
        assert np.max(np.abs(back.theta.values - state.theta.values)) < 1e-12
        assert np.max(np.abs(back.q.values - state.q.values)) < 1e-12


def test_weighted_energy_zero_state(grid256):
    zeros = SpectralField(grid256, np.zeros(grid256.n, complex))
    ws = WeightSet.for_run(1.0, 1.0, 0.02)
    assert weighted_energy_Es(RawState(zeros, zeros.copy(), 1.0), ws) == 0.0


def test_weighted_energy_matches_pointwise_at_t0(grid256):
    # at t = 0 every weight is 1, so with s = 0 the functionals coincide
    ws = WeightSet.for_run(1.0, 0.0, 0.0)  # epsilon 0 -> delta 0
    state = make_state(grid256, t=0.0)
    _, integrated = pointwise_energy(state, 1.0)
    assert weighted_energy_Es(state, ws, s=0.0) == pytest.approx(integrated, rel=1e-12)


def test_recorded_energy_inside_coercivity_envelopes(grid256):
    state = make_state(grid256)
    report, _ = evolve(state, beta=1.0, R=1.0, t_max=20.0, dt=0.01, record_every=20)
    assert np.all(report.energy >= report.energy_lower - 1e-12)
    assert np.all(report.energy <= report.energy_upper + 1e-12)


def test_negative_wavenumber_evolution():
    grid = FrequencyGrid(k=-1, eta_max=16.0, n=256)
    state = make_state(grid)
    report, hist = evolve(state, beta=1.0, R=1.0, t_max=10.0, dt=0.01, record_every=20)
    assert np.all(np.isfinite(report.energy))
    assert report.ratio_max < 50.0 and report.ratio_min > 1.0 / 50.0
    assert np.all(report.energy >= report.energy_lower - 1e-12)


def test_couette_energy_ratio_envelope(grid256):
    # per-cell energy ratio within the explicit envelope for R=1, beta=1
    state = make_state(grid256)
    report, _ = evolve(state, beta=1.0, R=1.0, t_max=50.0, dt=0.01, record_every=20)
    log_env = 4 * math.pi * (1 + 1.0) ** 2 / (2 * math.sqrt(1.0) - 1)
    assert math.log(report.ratio_max) <= log_env
    assert math.log(report.ratio_min) >= -log_env
    assert report.ratio_max >= 1.0 >= report.ratio_min


def test_evolve_blowup_guard(grid256, monkeypatch):
    # an artificial exponential runaway must trip the amplitude guard
    from stratshear import evolution as ev

    def runaway(t, theta, q, k, etas, beta, R):
        return 10.0 * theta, 10.0 * q

    monkeypatch.setattr(ev, "couette_rhs", runaway)
    state = make_state(grid256)
    with pytest.raises(StepUnstable, match="amplitude"):
        ev.evolve(state, beta=0.0, R=1.0, t_max=2.0, dt=0.01, record_every=1)
