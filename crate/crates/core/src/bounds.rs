//! Closed-form redundancy bounds.
//!
//! Everything here is analytic: the average minimax redundancy of a family
//! at block length `n`, the finite-`n` source-probability bounds for the two
//! code classes (conditional two-stage, i.e. optimal two-part, and plain
//! two-stage), the exact two-stage penalty `g(d)`, and the unit-ball volume
//! `C_d` the two-stage kernel uses.
//!
//! The probability bounds have the common shape
//!
//! > P[ R_n(θ) ≥ (1−ε)·(d/2)·log₂ n ] ≥ 1 − failure(ε)
//!
//! with `failure(ε) = (1/V)·(2π/n^ε)^{d/2}` for conditional two-stage codes
//! and `failure(ε)` smaller by the exact factor `2^{−g(d)}` for plain
//! two-stage codes (`V = ∫√det I`).  A curve fixes a grid of guaranteed
//! probabilities `P0` and solves for the redundancy level `R0`; outside
//! `ε ∈ [0, 1]` the solution is clamped and flagged.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::family::{jeffreys_integral, JeffreysIntegral, ParamFamily};
use crate::{Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;
const PI: f64 = std::f64::consts::PI;

/// Which bound or reference line a curve represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// Lower bound on the redundancy of conditional two-stage codes (the
    /// optimal two-part class).
    CondTwoStageBound,
    /// Lower bound on the redundancy of plain two-stage codes.
    TwoStageBound,
    /// Constant line at the average minimax redundancy.
    MinimaxLine,
    /// Constant line at the two-stage minimax redundancy (minimax + g(d)).
    MinimaxTwoStageLine,
}

/// Clamp status of a curve point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointFlag {
    /// Solved with ε ∈ [0, 1].
    Ok,
    /// Requested P0 is below what the bound already guarantees at ε = 0;
    /// R0 is capped at the full main term (d/2)·log₂ n.
    Saturated,
    /// Bound says nothing at this P0 (would need ε > 1); R0 = 0.
    Vacuous,
}

impl PointFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointFlag::Ok => "ok",
            PointFlag::Saturated => "saturated",
            PointFlag::Vacuous => "vacuous",
        }
    }
}

/// One `(P0, R0)` pair on a bound curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub p0: f64,
    pub r0: f64,
    pub flag: PointFlag,
}

/// A redundancy-versus-probability curve (or a constant reference line).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub kind: CurveKind,
    /// The family, when the curve was built from one (`None` for the
    /// dimension-only main-term curves).
    pub family: Option<ParamFamily>,
    /// Parameter dimension.
    pub d: usize,
    pub n: u64,
    /// The Jeffreys integral used, with its provenance (closed form vs
    /// Monte Carlo ± standard error). `None` when the kernel ran without it.
    pub integral: Option<JeffreysIntegral>,
    /// True for main-term-only curves evaluated without the exact integral.
    pub approximate: bool,
    pub points: Vec<CurvePoint>,
}

impl BoundCurve {
    /// CSV rendering with header `p0,r0,flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p0,r0,flag\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.p0, p.r0, p.flag.as_str()));
        }
        out
    }
}

fn validate_p0_grid(p0_grid: &[f64]) -> Result<()> {
    if p0_grid.is_empty() {
        return Err(Error::InvalidArgument("empty P0 grid".into()));
    }
    for pair in p0_grid.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidArgument(
                "P0 grid must be strictly increasing".into(),
            ));
        }
    }
    if p0_grid.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::InvalidArgument(
            "P0 values must lie strictly inside (0, 1)".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Scalar bounds
// ---------------------------------------------------------------------------

/// Average minimax redundancy in bits:
/// `(d/2)·log₂(n/2π) + log₂ ∫√det I(θ) dθ` (the O(1/n) remainder is
/// dropped throughout).
pub fn minimax_redundancy(family: &ParamFamily, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let integral = jeffreys_integral(family).map_err(with_main_term_hint)?;
    let d = family.d() as f64;
    Ok(d / 2.0 * (n as f64 / (2.0 * PI)).log2() + integral.log2_value)
}

/// Average minimax redundancy of two-stage codes: minimax + g(d).
pub fn minimax_two_stage(family: &ParamFamily, n: u64) -> Result<f64> {
    Ok(minimax_redundancy(family, n)? + two_stage_penalty(family.d())?)
}

fn with_main_term_hint(e: Error) -> Error {
    match e {
        Error::IntegralIntractable { family, reason } => Error::IntegralIntractable {
            family,
            reason: format!("{reason}; only the integral-free main term is available"),
        },
        other => other,
    }
}

/// Volume of the `d`-dimensional unit ball, `C_d = Γ(½)^d / Γ(d/2 + 1)`.
///
/// Computed through log-gamma; underflows to 0 for very large `d` (the
/// penalty `g(d)` has its own log-space form and does not go through this).
pub fn unit_ball_volume(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    let d = d as f64;
    Ok((d * ln_gamma(0.5) - ln_gamma(d / 2.0 + 1.0)).exp())
}

/// `log₂` of the unit-ball volume, exact in log space even where the volume
/// itself underflows (it shrinks super-exponentially in `d`).
pub fn log2_unit_ball_volume(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    let d = d as f64;
    Ok((d * ln_gamma(0.5) - ln_gamma(d / 2.0 + 1.0)) / std::f64::consts::LN_2)
}

/// The exact extra minimax redundancy of two-stage codes, in bits:
/// `g(d) = log₂ Γ(d/2+1) − (d/2)·log₂(d/2e)`.
pub fn two_stage_penalty(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    let d = d as f64;
    Ok((ln_gamma(d / 2.0 + 1.0) - d / 2.0 * (d / (2.0 * std::f64::consts::E)).ln()) / LN_2)
}

/// Large-`d` form of the penalty, `(1/2)·log₂(πd)`; `g(d)` converges to it.
pub fn two_stage_penalty_asymptotic(d: usize) -> f64 {
    0.5 * (PI * d as f64).log2()
}

/// The dominant redundancy term `(1−ε)·(d/2)·log₂ n`.
pub fn main_term(d: usize, n: u64, eps: f64) -> f64 {
    (1.0 - eps) * d as f64 / 2.0 * (n as f64).log2()
}

// ---------------------------------------------------------------------------
// Failure-mass kernels
// ---------------------------------------------------------------------------

/// `log₂` of the conditional-two-stage failure mass
/// `(1/V)·(2π/n^ε)^{d/2}`, with `V` given as `log₂ V`.
pub fn cond_two_stage_log2_failure(d: usize, log2_integral: f64, n: u64, eps: f64) -> f64 {
    let d = d as f64;
    d / 2.0 * ((2.0 * PI).log2() - eps * (n as f64).log2()) - log2_integral
}

/// Failure mass of the conditional-two-stage bound (linear scale).
pub fn cond_two_stage_failure(d: usize, log2_integral: f64, n: u64, eps: f64) -> f64 {
    cond_two_stage_log2_failure(d, log2_integral, n, eps).exp2()
}

/// `log₂` of the two-stage failure mass `(C_d/V)·(d/(e·n^ε))^{d/2}`.
///
/// Identity used: the two-stage mass is exactly the conditional-two-stage
/// mass times `2^{−g(d)}`, since
/// `C_d·(d/2πe)^{d/2} = (d/2e)^{d/2}/Γ(d/2+1) = 2^{−g(d)}`.
pub fn two_stage_log2_failure(d: usize, log2_integral: f64, n: u64, eps: f64) -> f64 {
    cond_two_stage_log2_failure(d, log2_integral, n, eps)
        - two_stage_penalty(d).expect("d ≥ 1 enforced by callers")
}

/// Failure mass of the two-stage bound (linear scale).
pub fn two_stage_failure(d: usize, log2_integral: f64, n: u64, eps: f64) -> f64 {
    two_stage_log2_failure(d, log2_integral, n, eps).exp2()
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

/// Solves `failure(ε) = 1 − P0` for each grid point and converts to `R0`.
///
/// `log2_failure_at_zero` is the log₂ failure mass at ε = 0; the mass decays
/// as `n^{−ε·d/2}`, so
/// `ε = (log2_failure_at_zero − log₂(1−P0)) / ((d/2)·log₂ n)`.
fn solve_points(d: usize, n: u64, log2_failure_at_zero: f64, p0_grid: &[f64]) -> Vec<CurvePoint> {
    let half_d_log_n = d as f64 / 2.0 * (n as f64).log2();
    p0_grid
        .iter()
        .map(|&p0| {
            let eps = (log2_failure_at_zero - (1.0 - p0).log2()) / half_d_log_n;
            let (eps, flag) = if eps < 0.0 {
                (0.0, PointFlag::Saturated)
            } else if eps > 1.0 {
                (1.0, PointFlag::Vacuous)
            } else {
                (eps, PointFlag::Ok)
            };
            CurvePoint {
                p0,
                r0: (1.0 - eps) * half_d_log_n,
                flag,
            }
        })
        .collect()
}

fn curve_common(
    family: &ParamFamily,
    n: u64,
    p0_grid: &[f64],
    kind: CurveKind,
) -> Result<BoundCurve> {
    if n < 2 {
        return Err(Error::InvalidArgument(
            "bound curves need n ≥ 2 (log n must be positive)".into(),
        ));
    }
    validate_p0_grid(p0_grid)?;
    let integral = jeffreys_integral(family).map_err(with_main_term_hint)?;
    let d = family.d();
    let at_zero = match kind {
        CurveKind::CondTwoStageBound => cond_two_stage_log2_failure(d, integral.log2_value, n, 0.0),
        CurveKind::TwoStageBound => two_stage_log2_failure(d, integral.log2_value, n, 0.0),
        _ => unreachable!("curve_common only solves bound kinds"),
    };
    Ok(BoundCurve {
        kind,
        family: Some(*family),
        d,
        n,
        integral: Some(integral),
        approximate: false,
        points: solve_points(d, n, at_zero, p0_grid),
    })
}

/// Redundancy-level curve for conditional two-stage (optimal two-part)
/// codes: for each `P0`, the level `R0` such that at least a `P0`-fraction
/// of sources (under the Jeffreys prior) must incur redundancy ≥ `R0`.
pub fn cond_two_stage_curve(family: &ParamFamily, n: u64, p0_grid: &[f64]) -> Result<BoundCurve> {
    curve_common(family, n, p0_grid, CurveKind::CondTwoStageBound)
}

/// Redundancy-level curve for plain two-stage codes; pointwise exactly
/// `g(d)` bits above [`cond_two_stage_curve`] wherever neither is clamped.
pub fn two_stage_curve(family: &ParamFamily, n: u64, p0_grid: &[f64]) -> Result<BoundCurve> {
    curve_common(family, n, p0_grid, CurveKind::TwoStageBound)
}

/// Integral-free variant of the conditional-two-stage curve for families
/// whose Jeffreys constant is intractable.
///
/// With `log2_integral = Some(v)` this is the exact kernel at that constant;
/// with `None` the `1/V` factor is dropped and the curve is marked
/// approximate either way.
pub fn main_term_only(
    d: usize,
    n: u64,
    p0_grid: &[f64],
    log2_integral: Option<f64>,
) -> Result<BoundCurve> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "bound curves need n ≥ 2 (log n must be positive)".into(),
        ));
    }
    validate_p0_grid(p0_grid)?;
    let at_zero = cond_two_stage_log2_failure(d, log2_integral.unwrap_or(0.0), n, 0.0);
    Ok(BoundCurve {
        kind: CurveKind::CondTwoStageBound,
        family: None,
        d,
        n,
        integral: None,
        approximate: true,
        points: solve_points(d, n, at_zero, p0_grid),
    })
}
