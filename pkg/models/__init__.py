from .errors import *
from .spectral import (
    Grid1D, MultiplierSpec, SpaceTimeField, SpaceTimeGrid, SpectralField, airy_flow, apply_multiplier,
    duhamel_integral, interaction_picture, to_frequency, to_mixed, to_physical,
)
from .norms import (
    MixedNormParams, NormParams, cutoff_norm, default_exponents, fl_norm, hrsb_norm, mixed_norm,
    parameter_window, scale_exponent, sobolev_equivalent, xrsb_norm,
)
from .bilinear import (
    i_minus, i_plus, lemma3_closed_form, lemma3_quadrature, lemma3_terms, m_operator, n_operator,
    resonance_data,
)
from .families import Cutoff, FamilySpec, make_family, make_space_time_family
from .probes import EstimateKind, EstimateReport, ProbeConfig, run_probe, scaling_sweep, trilinear_regions
from .solver import (
    PicardConfig, SolveResult, conserved_quantities, kink_coefficients, kink_residual, lipschitz_probe,
    persistence_ratio, picard_solve, reference_integrate, smallness_delta, trajectory_rows,
)
from .db import RecordStore, RunRecord
from .report import emit_report
from .helper_functions import *
