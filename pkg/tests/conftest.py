import numpy as np
import pytest

import ringburst as rb


@pytest.fixture(scope="session")
def small_ring():
    """The 0.3 um / N=160 ring at 4 K used by most scenario tests."""
    cfg = rb.make_config(r0=0.3e-6, d=20e-9, n_carriers=160, temperature=4.0)
    return cfg, rb.derive_scales(cfg)


@pytest.fixture(scope="session")
def small_ring_rates(small_ring):
    cfg, scales = small_ring
    return rb.build_rate_table(cfg, scales)


@pytest.fixture(scope="session")
def big_ring():
    """The 1.35 um / N=400 ring at 4 K."""
    cfg = rb.make_config(r0=1.35e-6, d=50e-9, n_carriers=400, temperature=4.0, m_cut=160)
    return cfg, rb.derive_scales(cfg)


@pytest.fixture(scope="session")
def two_kick_series(small_ring, small_ring_rates):
    """Dipole series of the x-then-y alpha=0.4 scenario, rates on, 200 tau_F."""
    cfg, scales = small_ring
    seq = rb.PulseSequence(
        events=(
            rb.KickEvent(0.0, "x", 0.4, 0.5e-12),
            rb.KickEvent(0.25 * scales.tau_f, "y", 0.4, 0.5e-12),
        )
    )
    return rb.simulate(cfg, scales, seq, span=200 * scales.tau_f, rates=small_ring_rates)


def min_eigenvalue(rho: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(rho).min())
