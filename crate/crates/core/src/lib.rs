//! Modeling toolkit for series-fed microstrip patch arrays.
//!
//! The pipeline runs closed-form microstrip models ([`mstrip`]) into an ABCD
//! cascade of the feed network ([`network`]), turns the resulting element
//! excitations into a far-field pattern ([`farfield`]), and wraps the whole
//! analysis in a derivative-free tuner ([`optimize`]). [`io`] holds the
//! geometry, Touchstone, CSV and report formats.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod farfield;
pub mod io;
pub mod mstrip;
pub mod network;
pub mod optimize;

pub use error::{Error, Result};
pub use farfield::{
    array_factor, cut_metrics, directivity, patch_element_pattern, pattern_cut, realized_gain,
    total_pattern, CutMetrics, FarFieldPattern, GainSummary, PatternCut, SphericalGrid,
};
pub use io::{
    analyze, design_report, load_geometry, parse_touchstone, read_touchstone, write_cut_csv,
    write_pattern_csv, write_sweep_csv, write_touchstone, Analysis, DesignReport, Geometry,
    GeometryFile, Report, ReportOptions, Touchstone,
};
pub use mstrip::{
    characteristic_impedance, design_patch, effective_permittivity, line_loss,
    patch_slot_admittance, LineParams, MicrostripLine, PatchElement, PatchSynthesis,
    SlotAdmittance, Substrate, ValidityWarning,
};
pub use network::{
    abcd_line, abcd_shunt, analyze_sweep, build_chain, cascade, element_excitations,
    extract_bandwidth, input_impedance, reflection, ArrayLayout, Band, ExcitationVector, Load,
    NetworkOptions, NetworkResult, SlotSusceptance, Sweep, TwoPortAbcd, C64,
};
pub use optimize::{
    nelder_mead, objective_eval, optimize_layout, tune_for_resonance, DesignParam, DesignVector,
    LayoutParam, NelderMeadOptions, Objective, OptResult, TuneOutcome,
};
