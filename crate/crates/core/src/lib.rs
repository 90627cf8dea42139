//! Joinpoint (piecewise-linear) trend analysis for campaign time series.
//!
//! The numerical core is an order-1 ℓ1 trend filter ([`trend_filter`]) that is generic
//! over the floating point type. Around it sit the daily-grid series type
//! ([`timeseries`]), FEC contribution and poll ingestion ([`fec`], [`polls`]), the
//! changepoint analyses ([`analysis`]) and a synthetic signal generator ([`synth`]).

pub mod analysis;
pub mod fec;
pub mod polls;
mod scalar;
pub mod synth;
pub mod timeseries;
pub mod trend_filter;

pub use scalar::Scalar;
pub use timeseries::{DateRange, FillPolicy, TimeSeries};
pub use trend_filter::{
    effective_df, extract_segments, fit_with_target_df, lambda_max, solve_tf, target_df_for_span,
    Segment, SolveError, SolverSettings, TargetedFit, Tolerance, TrendFit,
};

pub type TrendFit64 = TrendFit<f64>;
pub type TrendFit32 = TrendFit<f32>;
pub type SolverSettings64 = SolverSettings<f64>;
pub type SolverSettings32 = SolverSettings<f32>;
pub type Changepoint64 = analysis::Changepoint<f64>;
pub type Changepoint32 = analysis::Changepoint<f32>;
