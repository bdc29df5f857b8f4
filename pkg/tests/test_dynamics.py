import numpy as np
import pytest

import ringburst as rb
from ringburst.constants import E_CHARGE, HBAR
from ringburst.errors import ConfigError, CutoffSaturationWarning, GridError

from conftest import min_eigenvalue


def test_equilibrium_state_valid(small_ring):
    _, sc = small_ring
    rho = rb.equilibrium_state(sc)
    rho.validate(n_half_trace=80.0)
    assert rb.dipole_moment(rho, small_ring[0]) == (0.0, 0.0)


def test_free_propagate_zero_dt(small_ring):
    _, sc = small_ring
    rho = rb.equilibrium_state(sc)
    assert rb.free_propagate(rho, 0.0, sc) is rho


def test_free_propagate_additivity(small_ring, small_ring_rates):
    _, sc = small_ring
    rho = rb.equilibrium_state(sc)
    u = rb.kick_operator(0.3, "x", sc.m_cut)
    rho = rb.DensityMatrix(rb.apply_kick(rho.data, u), sc.m_cut)
    a = rb.free_propagate(rho, 3.7e-12, sc, small_ring_rates)
    b = rb.free_propagate(
        rb.free_propagate(rho, 1.2e-12, sc, small_ring_rates), 2.5e-12, sc, small_ring_rates
    )
    assert np.abs(a.data - b.data).max() <= 1e-13 * np.abs(a.data).max()
    assert a.time == pytest.approx(b.time)


def test_free_propagate_revival_phase(small_ring):
    # phase drift of an edge coherence after one ballistic period follows the
    # level-spacing bookkeeping: omega_m tau_F = 2 pi (2m-1) / (2 m_F)
    _, sc = small_ring
    rho0 = rb.equilibrium_state(sc)
    u = rb.kick_operator(0.2, "x", sc.m_cut)
    rho = rb.DensityMatrix(rb.apply_kick(rho0.data, u), sc.m_cut)
    out = rb.free_propagate(rho, sc.tau_f, sc, None)
    for m in (sc.m_f, sc.m_f + 1, sc.m_f - 2):
        i = sc.index(m)
        before = rho.data[i, i - 1]
        after = out.data[i, i - 1]
        drift = np.angle(after / before)
        expected = -2.0 * np.pi * (2 * m - 1) / (2 * sc.m_f)
        expected = (expected + np.pi) % (2 * np.pi) - np.pi
        assert drift == pytest.approx(expected, abs=1e-9)


def test_free_propagate_strong_decay(small_ring):
    cfg, sc = small_ring
    rho0 = rb.equilibrium_state(sc)
    u = rb.kick_operator(0.4, "x", sc.m_cut)
    rho = rb.DensityMatrix(rb.apply_kick(rho0.data, u), sc.m_cut)
    n = 2 * sc.m_cut + 1
    big = np.full((n, n), 1e14)
    np.fill_diagonal(big, 0.0)
    table = rb.RateTable(
        m_cut=sc.m_cut,
        gamma_rad=0.0,
        gamma_s=0.0,
        gamma_sp=np.zeros((n, n)),
        gamma_ssp=np.zeros((n, n)),
        gamma_total=big,
    )
    out = rb.free_propagate(rho, 1e-12, sc, table)
    off = np.abs(out.data - np.diag(np.diagonal(out.data))).max()
    assert off < 1e-40
    assert np.allclose(np.diagonal(out.data), np.diagonal(rho.data), atol=0)
    assert rb.dipole_moment(out, cfg) == (0.0, 0.0)


def test_dipole_single_coherence(small_ring):
    # rho_{1,0} = c real: mu_x = 2 * 2 e r0 c with the (negative) electron
    # charge; mu_y = 0
    cfg, sc = small_ring
    n = 2 * sc.m_cut + 1
    data = np.diag(sc.f0).astype(complex)
    c = 1e-3
    i1, i0 = sc.index(1), sc.index(0)
    data[i1, i0] = c
    data[i0, i1] = c
    rho = rb.DensityMatrix(data, sc.m_cut)
    mu_x, mu_y = rb.dipole_moment(rho, cfg)
    assert mu_x == pytest.approx(2.0 * 2.0 * (-E_CHARGE) * cfg.r0 * c, rel=1e-14)
    assert mu_y == 0.0


def test_dipole_starts_at_zero_with_negative_slope(small_ring):
    cfg, sc = small_ring
    rho = rb.equilibrium_state(sc)
    u = rb.kick_operator(0.1, "x", sc.m_cut)
    rho = rb.DensityMatrix(rb.apply_kick(rho.data, u), sc.m_cut)
    mu0 = rb.dipole_moment(rho, cfg)
    assert abs(mu0[0]) < 1e-25 * 1e-6  # zero right after the kick
    later = rb.free_propagate(rho, sc.tau_f / 400, sc, None)
    assert rb.dipole_moment(later, cfg)[0] < 0.0


def test_linear_response_zero_at_origin(small_ring):
    cfg, sc = small_ring
    assert rb.linear_response_dipole(0.0, 0.05, cfg, sc) == 0.0


def test_linear_response_matches_weak_kick(small_ring):
    # full Bessel-kick propagation as oracle; expected error O(alpha^2)
    cfg, sc = small_ring
    alpha = 0.05
    rho = rb.equilibrium_state(sc)
    u = rb.kick_operator(alpha, "x", sc.m_cut)
    rho = rb.DensityMatrix(rb.apply_kick(rho.data, u), sc.m_cut)
    t_grid = np.linspace(0.0, 2 * sc.tau_f, 300)
    full = np.array(
        [rb.dipole_moment(rb.free_propagate(rho, t, sc, None), cfg)[0] for t in t_grid]
    )
    lin = rb.linear_response_dipole(t_grid, alpha, cfg, sc)
    scale = np.abs(lin).max()
    assert np.abs(full - lin).max() / scale < 0.01


def test_linear_response_validity_edge(small_ring):
    # alpha = 0.4 deviates visibly, bounded by ~alpha^2 relative
    cfg, sc = small_ring
    alpha = 0.4
    rho = rb.equilibrium_state(sc)
    u = rb.kick_operator(alpha, "x", sc.m_cut)
    rho = rb.DensityMatrix(rb.apply_kick(rho.data, u), sc.m_cut)
    t_grid = np.linspace(0.0, 2 * sc.tau_f, 300)
    full = np.array(
        [rb.dipole_moment(rb.free_propagate(rho, t, sc, None), cfg)[0] for t in t_grid]
    )
    lin = rb.linear_response_dipole(t_grid, alpha, cfg, sc)
    dev = np.abs(full - lin).max() / np.abs(lin).max()
    assert 0.005 < dev < 2.0 * alpha**2


def test_simulate_no_pulses_rejected_and_empty_quiet(small_ring):
    cfg, sc = small_ring
    with pytest.raises(ConfigError):
        rb.PulseSequence(events=())


def test_simulate_grid_refusal(small_ring, small_ring_rates):
    cfg, sc = small_ring
    seq = rb.PulseSequence(events=(rb.KickEvent(0.0, "x", 0.1),))
    with pytest.raises(GridError):
        rb.simulate(cfg, sc, seq, span=sc.tau_f, samples_per_tauf=32)


def test_simulate_trace_hermiticity_end_to_end(small_ring, small_ring_rates):
    # run the two-kick loop and recheck the final state via a replayed rho
    cfg, sc = small_ring
    seq = rb.PulseSequence(
        events=(
            rb.KickEvent(0.0, "x", 0.4),
            rb.KickEvent(0.25 * sc.tau_f, "y", 0.4),
        )
    )
    rho = rb.equilibrium_state(sc)
    rho = rb.DensityMatrix(rb.apply_kick(rho.data, rb.kick_operator(0.4, "x", sc.m_cut)), sc.m_cut)
    rho = rb.free_propagate(rho, 0.25 * sc.tau_f, sc, small_ring_rates)
    rho = rb.DensityMatrix(rb.apply_kick(rho.data, rb.kick_operator(0.4, "y", sc.m_cut)), sc.m_cut)
    rho = rb.free_propagate(rho, 40 * sc.tau_f, sc, small_ring_rates)
    tr = np.trace(rho.data)
    assert abs(tr.real - 80.0) <= 1e-9 * 80.0
    assert abs(tr.imag) <= 1e-9
    assert np.abs(rho.data - rho.data.conj().T).max() <= 1e-9
    assert min_eigenvalue(rho.data) >= -1e-9


def test_simulate_series_matches_replay(small_ring, small_ring_rates, two_kick_series):
    # spot-check the vectorized series against step-by-step replay
    cfg, sc = small_ring
    series = two_kick_series
    for k in (0, 100, 5000, 20000):
        t = series.times[k]
        rho = rb.equilibrium_state(sc)
        rho = rb.DensityMatrix(
            rb.apply_kick(rho.data, rb.kick_operator(0.4, "x", sc.m_cut)), sc.m_cut
        )
        if t >= 0.25 * sc.tau_f:
            rho = rb.free_propagate(rho, 0.25 * sc.tau_f, sc, small_ring_rates)
            rho = rb.DensityMatrix(
                rb.apply_kick(rho.data, rb.kick_operator(0.4, "y", sc.m_cut)), sc.m_cut
            )
            rho = rb.free_propagate(rho, t - 0.25 * sc.tau_f, sc, small_ring_rates)
        else:
            rho = rb.free_propagate(rho, t, sc, small_ring_rates)
        mu = rb.dipole_moment(rho, cfg)
        scale = max(np.abs(series.mu_x).max(), np.abs(series.mu_y).max())
        assert series.mu_x[k] == pytest.approx(mu[0], abs=1e-10 * scale)
        assert series.mu_y[k] == pytest.approx(mu[1], abs=1e-10 * scale)


def test_acceleration_against_finite_differences(small_ring, small_ring_rates):
    # central differences of mu on a 10x finer grid, away from kick instants
    cfg, sc = small_ring
    seq = rb.PulseSequence(
        events=(
            rb.KickEvent(0.0, "x", 0.4),
            rb.KickEvent(0.25 * sc.tau_f, "y", 0.4),
        )
    )
    coarse = rb.simulate(cfg, sc, seq, span=4 * sc.tau_f, samples_per_tauf=256,
                         rates=small_ring_rates)
    fine = rb.simulate(cfg, sc, seq, span=4 * sc.tau_f, samples_per_tauf=2560,
                       rates=small_ring_rates)
    h = fine.dt
    fd_x = (fine.mu_x[2:] - 2 * fine.mu_x[1:-1] + fine.mu_x[:-2]) / h**2
    scale = np.abs(coarse.acc_x).max()
    for k in range(40, coarse.n - 1, 16):
        t = coarse.times[k]
        if abs(t - 0.25 * sc.tau_f) < 4 * h or t < 4 * h:
            continue
        j = int(round((t - fine.t0) / h))
        assert coarse.acc_x[k] == pytest.approx(fd_x[j - 1], abs=1.2e-4 * scale)


def test_decay_only_removes_coherence(small_ring, small_ring_rates, two_kick_series):
    # with rates on, |mu| stays below the rates-off run wherever the signal
    # is coherent (multimode interference can break this in the dephased
    # troughs, so the check applies above 5% of the global maximum)
    cfg, sc = small_ring
    seq = rb.PulseSequence(
        events=(
            rb.KickEvent(0.0, "x", 0.4),
            rb.KickEvent(0.25 * sc.tau_f, "y", 0.4),
        )
    )
    free = rb.simulate(cfg, sc, seq, span=200 * sc.tau_f, rates=None)
    amp_on = np.hypot(two_kick_series.mu_x, two_kick_series.mu_y)
    amp_off = np.hypot(free.mu_x, free.mu_y)
    mask = amp_off >= 0.05 * amp_off.max()
    assert np.all(amp_on[mask] <= amp_off[mask] * (1 + 1e-9))


def test_simulate_cutoff_window_convergence(small_ring, small_ring_rates):
    # doubling the index window moves the dipole series by < 1e-8 relative
    cfg, sc = small_ring
    cfg2 = rb.make_config(r0=0.3e-6, d=20e-9, n_carriers=160, temperature=4.0,
                          m_cut=2 * sc.m_cut)
    sc2 = rb.derive_scales(cfg2)
    rates2 = rb.build_rate_table(cfg2, sc2)
    seq = rb.PulseSequence(
        events=(
            rb.KickEvent(0.0, "x", 0.4),
            rb.KickEvent(0.25 * sc.tau_f, "y", 0.4),
        )
    )
    a = rb.simulate(cfg, sc, seq, span=20 * sc.tau_f, rates=small_ring_rates)
    b = rb.simulate(cfg2, sc2, seq, span=20 * sc2.tau_f, rates=rates2)
    scale = np.abs(a.mu_x).max()
    assert np.abs(a.mu_x - b.mu_x).max() / scale < 1e-8
    assert np.abs(a.mu_y - b.mu_y).max() / scale < 1e-8


def test_saturation_warning():
    cfg = rb.make_config(r0=0.3e-6, d=20e-9, n_carriers=8, temperature=0.0, m_cut=12)
    sc = rb.derive_scales(cfg)
    seq = rb.PulseSequence(events=(rb.KickEvent(0.0, "x", 2.5),))
    with pytest.warns(CutoffSaturationWarning):
        rb.simulate(cfg, sc, seq, span=sc.tau_f, rates=None)


def test_waveform_event_inside_simulation(small_ring):
    # sampled half-sine inside simulate: observables recorded through the
    # window and the impulsive result recovered afterwards
    cfg, sc = small_ring
    tau_d = sc.tau_f / 100
    wf = rb.hcp_waveform(tau_d, 0.3, "x", cfg.r0)
    seq_wave = rb.PulseSequence(
        events=(rb.WaveformEvent(0.0, wf.dt, wf.ex, wf.ey, wf.kind),)
    )
    seq_kick = rb.PulseSequence(events=(rb.KickEvent(tau_d / 2, "x", 0.3),))
    a = rb.simulate(cfg, sc, seq_wave, span=2 * sc.tau_f, rates=None)
    b = rb.simulate(cfg, sc, seq_kick, span=2 * sc.tau_f, rates=None)
    scale = np.abs(b.mu_x).max()
    late = a.times > 2 * tau_d
    assert np.abs(a.mu_x[late] - b.mu_x[late]).max() < 3e-3 * scale
