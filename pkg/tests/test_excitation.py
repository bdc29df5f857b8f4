import numpy as np
import pytest

import ringburst as rb
from ringburst.constants import E_CHARGE, HBAR
from ringburst.errors import (
    ConfigError,
    EnvelopeBandwidthWarning,
    ImpulsiveValidityWarning,
    StepSizeError,
    TruncationError,
)

from conftest import min_eigenvalue


def bessel_j_series(n, x, terms=40):
    """Power-series Bessel J_n, independent of scipy."""
    import math

    total = 0.0
    for k in range(terms):
        num = (-1) ** k * (x / 2.0) ** (n + 2 * k)
        den = math.factorial(k) * math.factorial(k + n)
        total += num / den
    return total


def test_kick_identity_at_zero(small_ring):
    _, sc = small_ring
    for axis in ("x", "y"):
        u = rb.kick_operator(0.0, axis, sc.m_cut)
        assert np.allclose(u, np.eye(2 * sc.m_cut + 1), atol=1e-15)


@pytest.mark.parametrize("alpha,axis", [(0.4, "x"), (0.4, "y"), (2.0, "x")])
def test_kick_unitarity_interior(alpha, axis, small_ring):
    _, sc = small_ring
    u = rb.kick_operator(alpha, axis, sc.m_cut)
    gram = u @ u.conj().T
    n = 2 * sc.m_cut + 1
    margin = sc.m_cut // 2  # rows this far from the window edge are exact
    interior = slice(margin, n - margin)
    err = np.abs(gram[interior, interior] - np.eye(n)[interior, interior]).max()
    assert err < 1e-10


def test_kick_first_band_bessel_oracle(small_ring):
    _, sc = small_ring
    u = rb.kick_operator(0.4, "x", sc.m_cut)
    j1 = bessel_j_series(1, 0.4)
    assert j1 == pytest.approx(0.1960, abs=5e-5)
    k = sc.index(0)
    assert abs(u[k, k - 1]) == pytest.approx(j1, rel=1e-12)


def test_kick_axis_phase_relation(small_ring):
    # x and y kicks differ by i^(m-m') per band
    _, sc = small_ring
    ux = rb.kick_operator(0.7, "x", sc.m_cut)
    uy = rb.kick_operator(0.7, "y", sc.m_cut)
    k = sc.index(3)
    assert ux[k, k - 1] == pytest.approx(1j * uy[k, k - 1], rel=1e-14)
    assert ux[k, k - 2] == pytest.approx(-uy[k, k - 2], rel=1e-14)


def test_kick_truncation_error():
    with pytest.raises(TruncationError) as err:
        rb.kick_operator(30.0, "x", 20)
    assert "m_cut" in str(err.value)


def test_apply_kick_identity(small_ring):
    _, sc = small_ring
    rho = rb.equilibrium_state(sc)
    out = rb.apply_kick(rho.data, np.eye(2 * sc.m_cut + 1, dtype=complex))
    assert np.allclose(out, rho.data, atol=0)


def test_apply_kick_trace_hermiticity_positivity(small_ring):
    _, sc = small_ring
    rho = rb.equilibrium_state(sc).data
    u = rb.kick_operator(0.4, "x", sc.m_cut)
    out = rb.apply_kick(rho, u)
    assert abs(np.trace(out).real - np.trace(rho).real) <= 1e-12 * abs(np.trace(rho).real)
    assert np.abs(out - out.conj().T).max() == 0.0  # symmetrized exactly
    assert min_eigenvalue(out) >= -1e-9
    # kick creates first coherences out of the diagonal equilibrium
    assert np.abs(np.diagonal(out, -1)).max() > 1e-3


def test_apply_kick_dimension_mismatch(small_ring):
    _, sc = small_ring
    with pytest.raises(ConfigError):
        rb.apply_kick(np.eye(5, dtype=complex), rb.kick_operator(0.1, "x", sc.m_cut))


def hcp_alpha_from_waveform(wf, r0):
    """Kick strength recovered from the sampled field: alpha = r0 p / hbar."""
    e_int = np.trapezoid(wf.ex + wf.ey, dx=wf.dt)
    return r0 * (-E_CHARGE * e_int) / HBAR


@pytest.mark.parametrize("alpha", [0.05, 0.4, 1.3])
def test_hcp_impulse_normalization(alpha):
    r0 = 0.3e-6
    wf = rb.hcp_waveform(0.5e-12, alpha, "x", r0)
    assert hcp_alpha_from_waveform(wf, r0) == pytest.approx(alpha, rel=1e-10)


def test_hcp_peak_field_magnitudes():
    # quoted peaks 33.6 / 8.4 V/cm; the half-sine lobe gives 27.6 / 6.9 V/cm
    # (pulse-shape convention sensitivity, impulse is the binding quantity)
    r0 = 0.3e-6
    wf = rb.hcp_waveform(0.5e-12, 0.4, "x", r0)
    peak = np.abs(wf.ex).max()
    assert peak == pytest.approx(np.pi * HBAR * 0.4 / (2 * E_CHARGE * r0 * 0.5e-12), rel=1e-4)
    assert peak == pytest.approx(33.6e2, rel=0.25)
    assert wf.ex.min() < 0  # lobe opposes the kick direction
    wf_b = rb.hcp_waveform(0.5e-12, 0.1, "y", r0)
    assert np.abs(wf_b.ey).max() == pytest.approx(8.4e2, rel=0.25)


def test_cpp_envelope_normalization(small_ring):
    cfg, sc = small_ring
    alpha_p = 0.4
    wf = rb.cpp_waveform(alpha_p, 3, sc.omega_f, +1, cfg.r0)
    envelope_integral = np.trapezoid(np.hypot(wf.ex, wf.ey), dx=wf.dt)
    p_prime = 2 * HBAR * alpha_p / cfg.r0
    assert E_CHARGE * envelope_integral == pytest.approx(p_prime, rel=1e-10)


def test_cpp_sense_mirror(small_ring):
    cfg, sc = small_ring
    plus = rb.cpp_waveform(0.4, 3, sc.omega_f, +1, cfg.r0)
    minus = rb.cpp_waveform(0.4, 3, sc.omega_f, -1, cfg.r0)
    assert np.array_equal(plus.ex, minus.ex)
    assert np.array_equal(plus.ey, -minus.ey)


def test_cpp_many_cycles_warns(small_ring):
    cfg, sc = small_ring
    with pytest.warns(EnvelopeBandwidthWarning):
        rb.cpp_waveform(0.1, 12, sc.omega_f, +1, cfg.r0)


def test_driven_zero_field_matches_free(small_ring):
    cfg, sc = small_ring
    rho0 = rb.equilibrium_state(sc)
    u = rb.kick_operator(0.3, "x", sc.m_cut)
    start = rb.DensityMatrix(rb.apply_kick(rho0.data, u), sc.m_cut)
    dur = 0.3 * sc.tau_f
    n_samp = 257
    wf = rb.WaveformEvent(0.0, dur / (n_samp - 1), np.zeros(n_samp), np.zeros(n_samp))
    driven = rb.propagate_driven(start.data, wf, sc, cfg.r0)
    free = rb.free_propagate(start, dur, sc, None)
    assert np.abs(driven - free.data).max() <= 1e-10 * np.abs(free.data).max()


def test_driven_step_refusal(small_ring):
    cfg, sc = small_ring
    rho0 = rb.equilibrium_state(sc)
    wf = rb.hcp_waveform(sc.tau_f / 10, 0.1, "x", cfg.r0)
    with pytest.raises(StepSizeError):
        rb.propagate_driven(rho0.data, wf, sc, cfg.r0, dt=sc.tau_f)


def test_driven_impulsive_limit(small_ring):
    # half-sine pulse of duration tau_F/200 against the kick operator applied
    # at the pulse center (free evolution for half the duration on each side)
    cfg, sc = small_ring
    alpha, tau_d = 0.4, sc.tau_f / 200.0
    rho0 = rb.equilibrium_state(sc)
    wf = rb.hcp_waveform(tau_d, alpha, "x", cfg.r0)
    driven = rb.propagate_driven(rho0.data, wf, sc, cfg.r0)
    u = rb.kick_operator(alpha, "x", sc.m_cut)
    half = rb.free_propagate(rho0, tau_d / 2, sc, None)
    kicked = rb.DensityMatrix(rb.apply_kick(half.data, u), sc.m_cut)
    reference = rb.free_propagate(kicked, tau_d / 2, sc, None)
    err = np.linalg.norm(driven - reference.data, 2)
    assert err <= 1e-3
    # trace and Hermiticity survive the stepped propagation
    assert abs(np.trace(driven).real - 80.0) <= 1e-9 * 80.0
    assert np.abs(driven - driven.conj().T).max() <= 1e-9


def dipole_track(rho, sc, cfg, t_grid):
    out = []
    for t in t_grid:
        evolved = rb.free_propagate(rho, t, sc, None)
        out.append(rb.dipole_moment(evolved, cfg))
    return np.asarray(out)


def two_kick_state(sc, alpha):
    rho = rb.equilibrium_state(sc)
    ux = rb.kick_operator(alpha, "x", sc.m_cut)
    uy = rb.kick_operator(alpha, "y", sc.m_cut)
    rho = rb.DensityMatrix(rb.apply_kick(rho.data, ux), sc.m_cut)
    rho = rb.free_propagate(rho, 0.25 * sc.tau_f, sc, None)
    return rb.DensityMatrix(rb.apply_kick(rho.data, uy), sc.m_cut)


def test_cpp_equivalent_to_kick_pair(small_ring):
    # a three-cycle circular pulse at omega_F reproduces the rotating dipole
    # of the quarter-period-delayed perpendicular kick pair within 10%
    cfg, sc = small_ring
    alpha = 0.4
    wf = rb.cpp_waveform(alpha, 3, sc.omega_f, +1, cfg.r0)
    rho0 = rb.equilibrium_state(sc)
    driven = rb.DensityMatrix(rb.propagate_driven(rho0.data, wf, sc, cfg.r0), sc.m_cut)
    t_grid = np.linspace(0.0, sc.tau_f, 200)
    mu_cpp = dipole_track(driven, sc, cfg, t_grid)
    mu_kick = dipole_track(two_kick_state(sc, alpha), sc, cfg, t_grid)
    amp_cpp = np.hypot(mu_cpp[:, 0], mu_cpp[:, 1]).max()
    amp_kick = np.hypot(mu_kick[:, 0], mu_kick[:, 1]).max()
    assert abs(amp_cpp / amp_kick - 1.0) < 0.10
    # same rotation sense
    ang = np.unwrap(np.arctan2(mu_cpp[:, 1], mu_cpp[:, 0]))
    assert ang[-1] - ang[0] > 0


def test_rotating_dipole_chirality(small_ring):
    # x then y advances the dipole angle by +2pi per period (counterclockwise);
    # reversing the kick order reverses the sense
    cfg, sc = small_ring
    t_grid = np.linspace(0.0, sc.tau_f, 400)
    mu = dipole_track(two_kick_state(sc, 0.4), sc, cfg, t_grid)
    ang = np.unwrap(np.arctan2(mu[:, 1], mu[:, 0]))
    assert np.all(np.diff(ang) > 0)
    assert ang[-1] - ang[0] == pytest.approx(2 * np.pi, rel=0.05)

    rho = rb.equilibrium_state(sc)
    rho = rb.DensityMatrix(rb.apply_kick(rho.data, rb.kick_operator(0.4, "y", sc.m_cut)), sc.m_cut)
    rho = rb.free_propagate(rho, 0.25 * sc.tau_f, sc, None)
    rho = rb.DensityMatrix(rb.apply_kick(rho.data, rb.kick_operator(0.4, "x", sc.m_cut)), sc.m_cut)
    mu_r = dipole_track(rho, sc, cfg, t_grid)
    ang_r = np.unwrap(np.arctan2(mu_r[:, 1], mu_r[:, 0]))
    assert np.all(np.diff(ang_r) < 0)
    assert ang_r[-1] - ang_r[0] == pytest.approx(-2 * np.pi, rel=0.05)


def test_positivity_preserved_through_kicks(small_ring):
    _, sc = small_ring
    state = two_kick_state(sc, 0.4)
    assert min_eigenvalue(state.data) >= -1e-9


def test_sequence_validation(small_ring):
    _, sc = small_ring
    with pytest.raises(ConfigError):
        rb.PulseSequence(events=(rb.KickEvent(1.0e-12, "x", 0.1), rb.KickEvent(0.0, "y", 0.1)))
    with pytest.raises(ConfigError):
        rb.PulseSequence(events=(rb.KickEvent(0.0, "x", 0.1),), repeat_period=0.0, repeat_count=3)
    wf = rb.hcp_waveform(1e-12, 0.1, "x", 0.3e-6)
    with pytest.raises(ConfigError):
        rb.PulseSequence(
            events=(
                rb.WaveformEvent(0.0, wf.dt, wf.ex, wf.ey),
                rb.WaveformEvent(0.5e-12, wf.dt, wf.ex, wf.ey),
            )
        )
    seq = rb.PulseSequence(events=(rb.KickEvent(0.0, "x", 0.1, tau_d=sc.tau_f),))
    with pytest.warns(ImpulsiveValidityWarning):
        seq.validate_against(sc)


def test_sequence_expansion():
    seq = rb.PulseSequence(
        events=(rb.KickEvent(0.0, "x", 0.1), rb.KickEvent(1e-12, "y", 0.1)),
        repeat_period=1e-11,
        repeat_count=3,
    )
    expanded = seq.expand()
    assert len(expanded) == 6
    assert expanded[2].t_on == pytest.approx(1e-11)
    assert expanded[5].t_on == pytest.approx(2e-11 + 1e-12)
    assert expanded[5].axis == "y"


def test_waveform_csv_export(tmp_path, small_ring):
    cfg, _ = small_ring
    wf = rb.hcp_waveform(0.5e-12, 0.4, "x", cfg.r0)
    path = tmp_path / "wf.csv"
    from ringburst.excitation import export_waveform_csv

    export_waveform_csv(wf, "x", path)
    body = path.read_text().splitlines()
    assert body[0] == "t_s,e_v_per_m"
    assert len(body) == len(wf.ex) + 1
