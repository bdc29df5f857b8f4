"""ringburst: quantum-ring pulse excitation, relaxation, and time-resolved
emission polarimetry."""

__version__ = "0.1.0"

from .dynamics import (
    DensityMatrix,
    DipoleSeries,
    dipole_moment,
    equilibrium_state,
    free_propagate,
    linear_response_dipole,
    simulate,
)
from .excitation import (
    KickEvent,
    PulseSequence,
    WaveformEvent,
    apply_kick,
    cpp_waveform,
    hcp_waveform,
    kick_operator,
    propagate_driven,
)
from .polarimetry import (
    DetectorSpec,
    StokesSpectrogram,
    band_integrate,
    circular_polarization_degree,
    gated_transform,
    s_norm,
    stokes_angular,
    stokes_from_intensities,
    stokes_perpendicular,
)
from .relaxation import (
    ArrayInfo,
    RateTable,
    array_decay_rate,
    build_rate_table,
    coherent_phonon_rate,
    effective_dipole_phonon_rate,
    form_factor,
    incoherent_phonon_rate,
    radiative_decay_rate,
    spontaneous_emission_rate,
    spread_time,
    total_coherence_decay,
)
from .ring import (
    MATERIALS,
    RingConfig,
    RingScales,
    derive_scales,
    energy_ladder,
    equilibrium_occupation,
    fermi_index,
    level_energy,
    make_config,
)

__all__ = [name for name in dir() if not name.startswith("_")]
