//! holobeam-core: continuous-aperture electromagnetic channels and joint
//! data/energy beamforming.
//!
//! The crate models a planar transmit aperture radiating towards data users
//! (served with information streams) and energy users (served with RF
//! power), and optimizes the shared current distribution:
//!
//! * [`geometry`] — aperture quadrature, the exact dyadic channel kernel and
//!   its Fresnel/paraxial reductions;
//! * [`wavenumber`] — the truncated Fourier current basis and the
//!   mode-domain channel transform;
//! * [`energy`] — receive-power accounting and the nonlinear rectifier;
//! * [`focusing`] — closed-form single-receiver beams and beam patterns;
//! * [`convex`] — the interior-point solver for the beamforming subproblems;
//! * [`optimizer`] — the block-coordinate sum-rate optimizer;
//! * [`baselines`] — discrete-array and matched-filter reference schemes.

pub mod baselines;
pub mod convex;
pub mod energy;
pub mod error;
pub mod focusing;
pub mod geometry;
pub mod linalg;
pub mod optimizer;
pub mod wavenumber;

pub use baselines::{
    build_discrete_array, build_discrete_array_custom, fd_beamformer, fd_effective_channel,
    fd_solve, mf_solve, upper_bound_rate, DiscreteArray,
};
pub use convex::{
    solve as solve_subproblem, AffineConstraint, ConvexSubproblem, QuadTerm, SolveCertificate,
    SolveOptions as SubproblemOptions, SolveStatus,
};
pub use energy::{eh_inverse, eh_output, eh_threshold, poynting_power, EhCircuit, ReceiverGeometry};
pub use error::{Error, Result};
pub use focusing::{
    beam_pattern, beam_pattern_scan, channel_gram, matched_beam, matched_beam_for,
    optimal_eu_combiner, principal_combiner, BeamPattern, FocusSolution, PatternNormalization,
};
pub use geometry::{
    correlation_metric, current_power, dyadic_green, dyadic_green_far, dyadic_green_terms,
    fresnel_channel, radiate_field, sample_user_channel, scalar_green_linear, Aperture,
    ApertureSample, FresnelOrder, GreenTerms, MediumParams, Point3, UserChannel,
};
pub use optimizer::{
    equal_harvest_seed, mmse_combiner, mse_with_combiner, rate_bits, sinr_parts,
    solve as solve_scenario, BasisDescriptor, BcdOptions, Channels, InitScheme, MonotonicityAudit,
    ReqEntry, RunStatus, Scenario, SolveReport,
};
pub use wavenumber::{
    channel_transform, discrete_gram, field_from_weights, make_basis, make_basis_rect,
    power_from_weights, project_current, synthesize, synthesize_on_grid, BeamWeights,
    FourierBasisSet, WavenumberChannel,
};
