"""Skyrmion-number modulation over a turbulent free-space optical link.

Vector beams carrying an integer topological charge are synthesized,
propagated through split-step phase screens, measured in Stokes space, and
decoded; the resulting symbol channel is characterized by its transition
matrix, capacity, and error rates.
"""

from .fields import (
    BeamSpec,
    LgIndex,
    SamplingError,
    SamplingGrid,
    StokesField,
    VectorField,
    beam_width,
    lg_mode,
    predicted_nsk,
    rayleigh_range,
    stokes,
    synthesize_skm_beam,
    synthesize_vector_beam,
)
from .topology import (
    MaskSpec,
    NormalizedStokesField,
    SkyrmionDensityField,
    build_mask,
    masked_skyrmion_number,
    normalize_stokes,
    optimize_mask_parameter,
    skyrmion_density,
)
from .turbulence import (
    PhaseScreen,
    TurbulenceProfile,
    classify_regime,
    empirical_structure_function,
    generate_phase_screen,
    kolmogorov_spectrum,
    phase_structure_function,
    rytov_variance,
)
from .propagation import (
    LinkGeometry,
    NoiseSpec,
    apply_aperture,
    measure_stokes,
    propagate_turbulent,
    vacuum_step,
)
from .detection import (
    SYMBOL_SET,
    Constellation,
    DecisionScheme,
    DegenerateStatsError,
    MeanOrderingError,
    SymbolChannelStats,
    fit_symbol_stats,
    hard_decide,
    solve_boundaries,
)
from .dmc import (
    BitMapping,
    DmcModel,
    arimoto_blahut,
    bit_error_rate,
    gray_mapping,
    model_channel,
    symbol_error_rate,
    transition_matrix,
)
from .constellation import ConstellationSearch, SearchSpace, optimize_constellation
from .config import RunConfig, desk_config, load_config, paper_config
from .pipeline import (
    SampleStore,
    characterize,
    derive_stream,
    emit_boxplot_data,
    optimize_mask,
    run_simulation,
    validate_physics,
)

__version__ = "0.1.0"
