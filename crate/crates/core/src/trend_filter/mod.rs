//! Order-1 ℓ1 trend filtering.
//!
//! [`solve_tf`] minimizes `½‖y − θ‖² + λ‖Dθ‖₁` where `D` takes second differences. The
//! solution is a continuous piecewise-linear sequence whose bends ("knots") are
//! reported by [`extract_segments`]. [`fit_with_target_df`] picks λ on a geometric grid
//! so that the fit spends a given number of degrees of freedom.

mod banded;
pub mod oracle;
mod solver;

use serde::{Deserialize, Serialize};

use crate::Scalar;
use solver::{ActiveSet, DualPoint, Problem};

pub use oracle::oracle_solve;

/// Number of geometric grid points searched by [`fit_with_target_df`].
pub const LAMBDA_GRID_POINTS: usize = 200;
/// Smallest grid λ as a fraction of λ_max.
pub const LAMBDA_GRID_FLOOR: f64 = 1e-4;
/// Degrees of freedom per 90 days used by [`target_df_for_span`].
pub const DF_PER_90_DAYS: f64 = 12.0;

#[derive(thiserror::Error, Debug, Clone)]
pub enum SolveError<T: Scalar> {
    #[error("input has {len} points, at least 3 are required")]
    TooShort { len: usize },
    #[error("non-finite input at index {index}")]
    NonFinite { index: usize },
    #[error("lambda must be finite and nonnegative, got {0}")]
    InvalidLambda(T),
    #[error("solver settings must be strictly positive")]
    InvalidSettings,
    #[error("target df {target_df} needs at least 2 and at most n - 1 = {max}")]
    InvalidTarget { target_df: usize, max: usize },
    #[error("no convergence after {iterations} iterations, duality gap {gap}")]
    NoConvergence {
        iterations: usize,
        gap: T,
        best: Box<TrendFit<T>>,
    },
}

/// A tolerance either in absolute units or scaled by the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance<T> {
    /// Multiplied by the data scale the tolerance applies to.
    Relative(T),
    Absolute(T),
}

impl<T: Scalar> Tolerance<T> {
    fn resolve(self, scale: T) -> T {
        match self {
            Tolerance::Relative(r) => r * scale,
            Tolerance::Absolute(a) => a,
        }
    }

    fn is_positive(self) -> bool {
        let v = match self {
            Tolerance::Relative(v) | Tolerance::Absolute(v) => v,
        };
        v > T::zero() && v.is_finite()
    }
}

/// Solver controls.
///
/// `eps_gap` relative values scale with `½‖y‖²`; `tol_knot` relative values scale with
/// `max(y) − min(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings<T> {
    pub eps_gap: Tolerance<T>,
    pub max_iter: usize,
    pub tol_knot: Tolerance<T>,
}

impl<T: Scalar> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            // f32 cannot certify 1e-8 relative gaps
            eps_gap: Tolerance::Relative(T::lit(1e-8).max(T::epsilon() * T::lit(100.0))),
            max_iter: 50_000,
            tol_knot: Tolerance::Relative(T::lit(1e-6)),
        }
    }
}

/// Absolute tolerances for one signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedTolerances<T> {
    pub eps_gap: T,
    pub tol_knot: T,
}

impl<T: Scalar> SolverSettings<T> {
    pub fn validate(&self) -> Result<(), SolveError<T>> {
        if self.eps_gap.is_positive() && self.tol_knot.is_positive() && self.max_iter > 0 {
            Ok(())
        } else {
            Err(SolveError::InvalidSettings)
        }
    }

    pub fn resolve(&self, y: &[T]) -> ResolvedTolerances<T> {
        let half_sq = T::lit(0.5) * y.iter().map(|&v| v * v).sum::<T>();
        ResolvedTolerances {
            eps_gap: self.eps_gap.resolve(half_sq.max(T::min_positive_value())),
            tol_knot: self.tol_knot.resolve(knot_scale(y)),
        }
    }
}

/// Range of the data, or its magnitude (at least 1) when the data are constant.
fn knot_scale<T: Scalar>(y: &[T]) -> T {
    let (lo, hi) = y
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if range > T::zero() {
        range
    } else {
        hi.abs().max(T::one())
    }
}

/// A linear piece of the fit between two knot (or end) indices, both inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub start: usize,
    pub end: usize,
    /// Change in fitted value per day.
    pub slope: T,
}

/// Result of a trend-filter solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFit<T> {
    pub lambda: T,
    pub fitted: Vec<T>,
    /// Dual certificate `u`, one entry per interior index, `|uⱼ| ≤ λ`.
    pub dual: Vec<T>,
    /// Interior indices where the fit bends, ascending.
    pub knots: Vec<usize>,
    pub segments: Vec<Segment<T>>,
    pub df: usize,
    pub duality_gap: T,
    pub iterations: usize,
}

impl<T: Scalar> TrendFit<T> {
    pub fn len(&self) -> usize {
        self.fitted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fitted.is_empty()
    }

    /// `Σ |(Dθ)ⱼ|`, the ℓ1 penalty without λ.
    pub fn penalty(&self) -> T {
        solver::second_diff(&self.fitted)
            .iter()
            .map(|v| v.abs())
            .sum()
    }

    /// Slopes of the segments on either side of each knot.
    pub fn knot_slopes(&self) -> impl Iterator<Item = (usize, T, T)> + '_ {
        self.segments
            .windows(2)
            .map(|w| (w[0].end, w[0].slope, w[1].slope))
    }
}

fn validate_input<T: Scalar>(y: &[T]) -> Result<(), SolveError<T>> {
    if y.len() < 3 {
        return Err(SolveError::TooShort { len: y.len() });
    }
    if let Some(index) = y.iter().position(|v| !v.is_finite()) {
        return Err(SolveError::NonFinite { index });
    }
    Ok(())
}

fn finish<T: Scalar>(
    lambda: T,
    point: DualPoint<T>,
    tol_knot: T,
) -> Result<TrendFit<T>, SolveError<T>> {
    let (knots, segments) = extract_segments(&point.theta, tol_knot);
    let fit = TrendFit {
        lambda,
        df: knots.len() + 2,
        fitted: point.theta,
        dual: point.u,
        knots,
        segments,
        duality_gap: point.gap,
        iterations: point.iterations,
    };
    if point.converged {
        Ok(fit)
    } else {
        Err(SolveError::NoConvergence {
            iterations: point.iterations,
            gap: point.gap,
            best: Box::new(fit),
        })
    }
}

/// Solves the trend-filtering problem at a fixed `lambda`.
pub fn solve_tf<T: Scalar>(
    y: &[T],
    lambda: T,
    settings: &SolverSettings<T>,
) -> Result<TrendFit<T>, SolveError<T>> {
    validate_input(y)?;
    settings.validate()?;
    if !(lambda.is_finite() && lambda >= T::zero()) {
        return Err(SolveError::InvalidLambda(lambda));
    }
    let tol = settings.resolve(y);
    let problem = Problem::new(y, tol.eps_gap, knot_scale(y), settings.max_iter);
    finish(lambda, problem.solve(lambda, None), tol.tol_knot)
}

/// `‖(DDᵀ)⁻¹Dy‖∞`. For every λ at or above this value the fit is the least-squares line.
pub fn lambda_max<T: Scalar>(y: &[T]) -> Result<T, SolveError<T>> {
    validate_input(y)?;
    let problem = Problem::new(y, T::one(), T::one(), 1);
    Ok(problem.lambda_max())
}

/// Knots plus the two parameters of the base line.
pub fn effective_df<T>(fit: &TrendFit<T>) -> usize {
    fit.knots.len() + 2
}

/// 12 degrees of freedom per 90 days, never fewer than 2.
pub fn target_df_for_span(n_days: usize) -> usize {
    target_df_for_rate(n_days, DF_PER_90_DAYS)
}

/// `max(2, round(rate · n_days / 90))`.
pub fn target_df_for_rate(n_days: usize, df_per_90_days: f64) -> usize {
    let df = (df_per_90_days * n_days as f64 / 90.0).round();
    (df.max(2.0)) as usize
}

/// Knots are interior indices whose second difference exceeds `tol_knot` in magnitude;
/// segments run between consecutive knots and the series ends.
pub fn extract_segments<T: Scalar>(theta: &[T], tol_knot: T) -> (Vec<usize>, Vec<Segment<T>>) {
    let n = theta.len();
    let knots: Vec<usize> = solver::second_diff(theta)
        .iter()
        .enumerate()
        .filter(|(_, d)| d.abs() > tol_knot)
        .map(|(j, _)| j + 1)
        .collect();
    if n == 0 {
        return (knots, Vec::new());
    }
    let mut bounds = Vec::with_capacity(knots.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(&knots);
    bounds.push(n - 1);
    let segments = bounds
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| Segment {
            start: w[0],
            end: w[1],
            slope: (theta[w[1]] - theta[w[0]]) / T::from_index(w[1] - w[0]),
        })
        .collect();
    (knots, segments)
}

/// A fit chosen for a degrees-of-freedom budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetedFit<T> {
    pub fit: TrendFit<T>,
    pub target_df: usize,
    /// Set when no grid λ produced the requested df exactly and the target exceeds the
    /// largest df seen on the grid.
    pub target_unreachable: bool,
}

/// The λ grid: `LAMBDA_GRID_POINTS` geometric steps from `1e-4·λ_max` up to `λ_max`,
/// in descending order.
pub fn lambda_grid<T: Scalar>(lambda_max: T) -> Vec<T> {
    let steps = (LAMBDA_GRID_POINTS - 1) as f64;
    let floor = LAMBDA_GRID_FLOOR.log10();
    (0..LAMBDA_GRID_POINTS)
        .rev()
        .map(|k| {
            if k == LAMBDA_GRID_POINTS - 1 {
                lambda_max
            } else {
                lambda_max * T::lit(10f64.powf(floor - floor * k as f64 / steps))
            }
        })
        .collect()
}

/// Fits `y` on the λ grid and keeps the fit whose df is closest to `target_df`, preferring
/// the larger λ on ties.
pub fn fit_with_target_df<T: Scalar>(
    y: &[T],
    target_df: usize,
    settings: &SolverSettings<T>,
) -> Result<TargetedFit<T>, SolveError<T>> {
    validate_input(y)?;
    settings.validate()?;
    if target_df < 2 || y.len() < target_df + 1 {
        return Err(SolveError::InvalidTarget {
            target_df,
            max: y.len() - 1,
        });
    }
    let tol = settings.resolve(y);
    let problem = Problem::new(y, tol.eps_gap, knot_scale(y), settings.max_iter);
    let lmax = problem.lambda_max();

    if lmax <= T::zero() {
        let fit = finish(T::zero(), problem.solve(T::zero(), None), tol.tol_knot)?;
        return Ok(TargetedFit {
            target_unreachable: fit.df < target_df,
            fit,
            target_df,
        });
    }

    let mut best: Option<TrendFit<T>> = None;
    let mut max_df = 0;
    let mut warm: Option<ActiveSet> = None;
    // descending λ, so on equal distance the first fit seen is the smoother one
    for lambda in lambda_grid(lmax) {
        let point = problem.solve(lambda, warm.as_ref());
        warm = Some(point.active.clone());
        let fit = finish(lambda, point, tol.tol_knot)?;
        max_df = max_df.max(fit.df);
        let better = best
            .as_ref()
            .is_none_or(|b| fit.df.abs_diff(target_df) < b.df.abs_diff(target_df));
        if better {
            best = Some(fit);
        }
    }
    let fit = best.expect("grid is non-empty");
    Ok(TargetedFit {
        target_unreachable: fit.df != target_df && max_df < target_df,
        fit,
        target_df,
    })
}
