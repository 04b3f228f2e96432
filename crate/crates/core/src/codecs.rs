//! Universal length functions: two-stage, conditional two-stage, and
//! Jeffreys-mixture code lengths, plus the quantized estimate grids they
//! share.
//!
//! A two-stage code spends `m` bits naming a quantized parameter estimate
//! `φ_γ` and then `−log₂ μ_{φ_γ}(x)` bits on the sequence under it.  The
//! conditional variant replaces the second stage with the distribution of
//! `x` *conditioned on the decoded estimate* — each estimate's cell is
//! renormalized by its total mass `A(φ_γ)`, which removes the second
//! stage's built-in slack and realizes the optimal two-part length.  The
//! Jeffreys mixture is the add-½ (Krichevsky–Trofimov) sequential code.
//!
//! Grids are quantile midpoints of the Jeffreys prior pushed through the
//! stick-breaking map, so every cell carries equal prior mass and the grid
//! index costs exactly `m` bits.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use crate::classes::{enumerate_classes, ClassKey};
use crate::family::{seq_log_prob, ParamFamily, ParamVector, SequenceSample};
use crate::{Error, FamilyKind, Result, FORMAT_VERSION};

const LN_2: f64 = std::f64::consts::LN_2;
const PI: f64 = std::f64::consts::PI;

/// Largest supported grid resolution (first-stage bits).
pub const MAX_GRID_BITS: u32 = 24;

// ---------------------------------------------------------------------------
// Model kinds
// ---------------------------------------------------------------------------

/// Which length function a model realizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Non-universal reference: code at a fixed known parameter.
    IdealTheta,
    /// Plain two-stage code over a quantized estimate grid.
    TwoStage,
    /// Conditional two-stage (optimal two-part) code.
    CondTwoStage,
    /// Jeffreys-mixture (add-½ sequential) code.
    JeffreysMixture,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::IdealTheta => "ideal",
            ModelKind::TwoStage => "2p",
            ModelKind::CondTwoStage => "c2p",
            ModelKind::JeffreysMixture => "mixture",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" | "ideal_theta" => Ok(ModelKind::IdealTheta),
            "2p" | "two_stage" | "two-stage" => Ok(ModelKind::TwoStage),
            "c2p" | "cond_two_stage" | "cond-two-stage" => Ok(ModelKind::CondTwoStage),
            "mixture" | "jeffreys" | "jeffreys_mixture" => Ok(ModelKind::JeffreysMixture),
            other => Err(Error::InvalidArgument(format!(
                "unknown model '{other}' (expected ideal|2p|c2p|mixture)"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Estimate grids
// ---------------------------------------------------------------------------

/// A quantized estimate grid: `2^m` interior parameter points addressable
/// by an `m`-bit index (or a single fixed point when `m = 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateGrid {
    family: ParamFamily,
    m: u32,
    points: Vec<ParamVector>,
}

impl EstimateGrid {
    /// Wraps one fixed parameter point as a zero-bit grid, turning the
    /// two-stage machinery into the ideal code at that point.
    pub fn singleton(theta: ParamVector) -> EstimateGrid {
        EstimateGrid {
            family: theta.family(),
            m: 0,
            points: vec![theta],
        }
    }

    pub fn family(&self) -> ParamFamily {
        self.family
    }

    /// First-stage index width in bits.
    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[ParamVector] {
        &self.points
    }

    pub fn point(&self, idx: usize) -> &ParamVector {
        &self.points[idx]
    }
}

/// Inverse CDF of `Beta(1/2, b)`, the Jeffreys stick-breaking coordinate
/// law. `b = 1/2` and `b = 1` have closed forms; the rest go through the
/// generic numeric inverse.
fn stick_coordinate(b: f64, q: f64) -> f64 {
    if b == 0.5 {
        let s = (PI * q / 2.0).sin();
        s * s
    } else if b == 1.0 {
        q * q
    } else {
        Beta::new(0.5, b)
            .expect("valid Beta shape parameters")
            .inverse_cdf(q)
    }
}

/// Builds the canonical `2^m`-point grid for `family`.
///
/// The parameter space factors into stick-breaking coordinates (per
/// transition row for Markov); the `m` index bits are split across
/// coordinates as evenly as possible with earlier coordinates taking the
/// remainder, and each coordinate takes the quantile midpoints
/// `(2i−1)/2^{b+1}` of its marginal. Points come out in row-major order
/// with the last coordinate varying fastest.
///
/// For the one-dimensional binary family the upper half of the grid is
/// materialized as the coordinate-swapped lower half, so symmetric points
/// are exact float mirrors of each other.
pub fn build_grid(family: &ParamFamily, m: u32) -> Result<EstimateGrid> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "m must be at least 1 (use EstimateGrid::singleton for a fixed point)".into(),
        ));
    }
    if m > MAX_GRID_BITS {
        return Err(Error::GridTooLarge {
            m,
            max: MAX_GRID_BITS,
        });
    }
    let k = family.k();
    if family.kind() == FamilyKind::Memoryless && k == 2 {
        return Ok(binary_mirror_grid(*family, m));
    }

    let d = family.d();
    // Bits per stick coordinate, earlier coordinates first for the excess.
    let budgets: Vec<u32> = (0..d)
        .map(|i| m / d as u32 + u32::from((i as u32) < m % d as u32))
        .collect();
    // Per-coordinate quantile-midpoint values. Coordinate j within a row
    // follows Beta(1/2, (k−1−j)/2).
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(d);
    for (i, &b) in budgets.iter().enumerate() {
        let j = i % (k - 1);
        let beta_b = (k - 1 - j) as f64 / 2.0;
        let cnt = 1u64 << b;
        let denom = (2 * cnt) as f64;
        values.push(
            (1..=cnt)
                .map(|ip| stick_coordinate(beta_b, (2 * ip - 1) as f64 / denom))
                .collect(),
        );
    }

    let rows = family.prob_len() / k;
    let total = 1usize << m;
    let mut points = Vec::with_capacity(total);
    let mut digits = vec![0usize; d];
    for idx in 0..total {
        let mut rem = idx;
        for j in (0..d).rev() {
            let mask = (1usize << budgets[j]) - 1;
            digits[j] = rem & mask;
            rem >>= budgets[j];
        }
        let mut probs = Vec::with_capacity(family.prob_len());
        for r in 0..rows {
            let sticks = (0..k - 1).map(|j| values[r * (k - 1) + j][digits[r * (k - 1) + j]]);
            let mut remaining = 1.0;
            for v in sticks {
                let p = v * remaining;
                probs.push(p);
                remaining -= p;
            }
            probs.push(remaining);
        }
        points.push(ParamVector::new(*family, probs)?);
    }
    Ok(EstimateGrid {
        family: *family,
        m,
        points,
    })
}

fn binary_mirror_grid(family: ParamFamily, m: u32) -> EstimateGrid {
    let total = 1usize << m;
    let half = total / 2;
    let denom = (2 * total) as f64;
    let mut points = vec![None; total];
    for i in 0..half {
        let q = (2 * i + 1) as f64 / denom;
        let theta = stick_coordinate(0.5, q);
        points[i] = Some(vec![theta, 1.0 - theta]);
        points[total - 1 - i] = Some(vec![1.0 - theta, theta]);
    }
    EstimateGrid {
        family,
        m,
        points: points
            .into_iter()
            .map(|p| ParamVector::new(family, p.unwrap()).expect("grid points are interior"))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// ML quantization and two-stage lengths
// ---------------------------------------------------------------------------

/// Index and log₂ likelihood of the grid point maximizing the likelihood
/// of the given statistic; ties resolve to the lowest index.
pub fn ml_estimate_class(key: &ClassKey, grid: &EstimateGrid) -> (usize, f64) {
    let mut best_idx = 0;
    let mut best = key.log2_prob(grid.point(0));
    for (i, p) in grid.points().iter().enumerate().skip(1) {
        let s = key.log2_prob(p);
        if s > best {
            best = s;
            best_idx = i;
        }
    }
    (best_idx, best)
}

/// Grid point maximizing the likelihood of `x` (lowest index on ties).
pub fn ml_estimate<'a>(x: &SequenceSample, grid: &'a EstimateGrid) -> (usize, &'a ParamVector) {
    assert_eq!(x.family(), grid.family(), "sequence/grid family mismatch");
    let (idx, _) = ml_estimate_class(&ClassKey::of(x), grid);
    (idx, grid.point(idx))
}

/// Two-stage code length: `m` index bits plus the ideal length at the
/// quantized ML estimate.
pub fn two_stage_length(x: &SequenceSample, grid: &EstimateGrid) -> f64 {
    assert_eq!(x.family(), grid.family(), "sequence/grid family mismatch");
    two_stage_length_class(&ClassKey::of(x), grid)
}

/// [`two_stage_length`] from a sufficient statistic.
pub fn two_stage_length_class(key: &ClassKey, grid: &EstimateGrid) -> f64 {
    let (_, score) = ml_estimate_class(key, grid);
    grid.m() as f64 - score
}

// ---------------------------------------------------------------------------
// Partitions and conditional two-stage lengths
// ---------------------------------------------------------------------------

/// The mass each grid cell captures at a fixed length: `a_values[γ]` is the
/// total probability, under `φ_γ` itself, of the sequences whose ML
/// quantization selects cell `γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    family: ParamFamily,
    n: u64,
    m: u32,
    a_values: Vec<f64>,
}

impl Partition {
    pub fn family(&self) -> ParamFamily {
        self.family
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn a_values(&self) -> &[f64] {
        &self.a_values
    }

    pub fn a_value(&self, idx: usize) -> f64 {
        self.a_values[idx]
    }

    /// Number of cells that win at least one sequence.
    pub fn nonempty_cells(&self) -> usize {
        self.a_values.iter().filter(|&&a| a > 0.0).count()
    }

    /// Kraft sum of the conditional two-stage length, exactly
    /// `nonempty / 2^m`.
    pub fn cond_kraft_sum(&self) -> f64 {
        self.nonempty_cells() as f64 / self.a_values.len() as f64
    }
}

/// Builds the length-`n` partition of a grid by exact enumeration of type
/// classes (every member of a class quantizes identically).
pub fn build_partition(grid: &EstimateGrid, n: u64, class_budget: u64) -> Result<Partition> {
    let classes = enumerate_classes(&grid.family(), n, class_budget)?;
    let mut a_values = vec![0.0f64; grid.len()];
    for class in &classes {
        let (idx, score) = ml_estimate_class(&class.key, grid);
        a_values[idx] += (class.log2_multiplicity + score).exp2();
    }
    Ok(Partition {
        family: grid.family(),
        n,
        m: grid.m(),
        a_values,
    })
}

/// Conditional two-stage code length: `m + log₂ A(φ_γ) − log₂ μ_{φ_γ}(x)`.
///
/// Never longer than [`two_stage_length`]; shorter whenever the winning
/// cell's mass is below 1.
pub fn cond_two_stage_length(x: &SequenceSample, grid: &EstimateGrid, part: &Partition) -> f64 {
    assert_eq!(x.family(), grid.family(), "sequence/grid family mismatch");
    assert_eq!(x.n() as u64, part.n(), "partition built for different n");
    cond_two_stage_length_class(&ClassKey::of(x), grid, part)
}

/// [`cond_two_stage_length`] from a sufficient statistic.
pub fn cond_two_stage_length_class(key: &ClassKey, grid: &EstimateGrid, part: &Partition) -> f64 {
    assert_eq!(grid.family(), part.family(), "grid/partition family mismatch");
    assert_eq!(grid.m(), part.m(), "grid/partition resolution mismatch");
    assert_eq!(key.n(), part.n(), "partition built for different n");
    let (idx, score) = ml_estimate_class(key, grid);
    grid.m() as f64 + part.a_value(idx).log2() - score
}

// ---------------------------------------------------------------------------
// Jeffreys mixture lengths
// ---------------------------------------------------------------------------

/// Jeffreys-mixture (add-½) code length, accumulated sequentially exactly
/// as the arithmetic coder sees it.
///
/// Memoryless: symbol `s` after `t` symbols costs
/// `−log₂ (c_s + ½)/(t + k/2)`. Markov: the first symbol is coded with a
/// count-free add-½ predictor (uniform, `log₂ k` bits), subsequent symbols
/// with the add-½ predictor of their predecessor's row.
pub fn mixture_length(x: &SequenceSample) -> f64 {
    let k = x.family().k();
    let half_k = k as f64 / 2.0;
    let mut total = 0.0;
    match x.family().kind() {
        FamilyKind::Memoryless => {
            let mut counts = vec![0u64; k];
            for (t, &s) in x.symbols().iter().enumerate() {
                let p = (counts[s as usize] as f64 + 0.5) / (t as f64 + half_k);
                total -= p.log2();
                counts[s as usize] += 1;
            }
        }
        FamilyKind::Markov1 => {
            let mut trans = vec![0u64; k * k];
            let mut row_tot = vec![0u64; k];
            let mut prev: Option<usize> = None;
            for &s in x.symbols() {
                let p = match prev {
                    None => 0.5 / half_k,
                    Some(r) => {
                        (trans[r * k + s as usize] as f64 + 0.5) / (row_tot[r] as f64 + half_k)
                    }
                };
                total -= p.log2();
                if let Some(r) = prev {
                    trans[r * k + s as usize] += 1;
                    row_tot[r] += 1;
                }
                prev = Some(s as usize);
            }
        }
    }
    total
}

/// Closed-form [`mixture_length`] from a sufficient statistic: the add-½
/// product telescopes to a ratio of gamma functions of the counts.
pub fn mixture_length_class(key: &ClassKey) -> f64 {
    match key {
        ClassKey::Counts(counts) => kt_block_length(counts),
        ClassKey::Markov { trans, .. } => {
            let k = (trans.len() as f64).sqrt().round() as usize;
            let first_bits = (k as f64).log2();
            first_bits
                + (0..k)
                    .map(|r| kt_block_length(&trans[r * k..(r + 1) * k]))
                    .sum::<f64>()
        }
    }
}

/// `−log₂` of the KT mixture probability of one count vector.
fn kt_block_length(counts: &[u64]) -> f64 {
    let k = counts.len() as f64;
    let n: u64 = counts.iter().sum();
    let ln_p = counts
        .iter()
        .map(|&c| ln_gamma(c as f64 + 0.5) - ln_gamma(0.5))
        .sum::<f64>()
        + ln_gamma(k / 2.0)
        - ln_gamma(n as f64 + k / 2.0);
    -ln_p / LN_2
}

// ---------------------------------------------------------------------------
// Length models
// ---------------------------------------------------------------------------

/// A complete length function over sequences of one family.
#[derive(Clone, Debug)]
pub enum LengthModel {
    /// `−log₂ μ_θ(x)` at a fixed, known parameter (zero redundancy at θ).
    IdealTheta(ParamVector),
    /// Two-stage code over a grid.
    TwoStage(EstimateGrid),
    /// Conditional two-stage code: the grid plus its length-`n` partition.
    CondTwoStage(EstimateGrid, Partition),
    /// Jeffreys-mixture code.
    JeffreysMixture(ParamFamily),
}

impl LengthModel {
    /// Validated constructor for the conditional two-stage variant.
    pub fn cond_two_stage(grid: EstimateGrid, part: Partition) -> Result<LengthModel> {
        if grid.family() != part.family() || grid.m() != part.m() {
            return Err(Error::InvalidArgument(
                "partition does not belong to this grid".into(),
            ));
        }
        if grid.len() != part.a_values().len() {
            return Err(Error::InvalidArgument(
                "partition cell count does not match grid".into(),
            ));
        }
        Ok(LengthModel::CondTwoStage(grid, part))
    }

    pub fn family(&self) -> ParamFamily {
        match self {
            LengthModel::IdealTheta(t) => t.family(),
            LengthModel::TwoStage(g) => g.family(),
            LengthModel::CondTwoStage(g, _) => g.family(),
            LengthModel::JeffreysMixture(f) => *f,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            LengthModel::IdealTheta(_) => ModelKind::IdealTheta,
            LengthModel::TwoStage(_) => ModelKind::TwoStage,
            LengthModel::CondTwoStage(..) => ModelKind::CondTwoStage,
            LengthModel::JeffreysMixture(_) => ModelKind::JeffreysMixture,
        }
    }

    /// Code length of a concrete sequence, in bits (`inf` if the ideal
    /// model assigns it probability zero).
    pub fn length_bits(&self, x: &SequenceSample) -> f64 {
        assert_eq!(x.family(), self.family(), "sequence/model family mismatch");
        match self {
            LengthModel::IdealTheta(t) => -seq_log_prob(t, x),
            LengthModel::TwoStage(g) => two_stage_length(x, g),
            LengthModel::CondTwoStage(g, p) => cond_two_stage_length(x, g, p),
            LengthModel::JeffreysMixture(_) => mixture_length(x),
        }
    }

    /// Code length shared by every sequence with this statistic.
    pub fn length_bits_class(&self, key: &ClassKey) -> f64 {
        match self {
            LengthModel::IdealTheta(t) => -key.log2_prob(t),
            LengthModel::TwoStage(g) => two_stage_length_class(key, g),
            LengthModel::CondTwoStage(g, p) => cond_two_stage_length_class(key, g, p),
            LengthModel::JeffreysMixture(_) => mixture_length_class(key),
        }
    }
}

// ---------------------------------------------------------------------------
// Resolution selection
// ---------------------------------------------------------------------------

/// How to score a candidate grid resolution.
#[derive(Clone, Debug)]
pub enum MSelectCriterion {
    /// Worst-case expected redundancy over the family's reference
    /// parameter grid.
    MinimaxOverGrid,
    /// Expected redundancy at one fixed source.
    ExpectedAt(ParamVector),
}

/// Picks the first-stage resolution `m ∈ [1, m_max]` minimizing the
/// criterion for a two-stage or conditional two-stage code at length `n`,
/// by exact type-class evaluation. Ties go to the smaller `m`.
///
/// Returns `(m, score)`. Fails if exact enumeration is out of budget — use
/// Monte Carlo evaluation directly in that regime.
pub fn optimal_m(
    family: &ParamFamily,
    n: u64,
    kind: ModelKind,
    criterion: &MSelectCriterion,
    m_max: u32,
    class_budget: u64,
) -> Result<(u32, f64)> {
    if !matches!(kind, ModelKind::TwoStage | ModelKind::CondTwoStage) {
        return Err(Error::InvalidArgument(
            "m selection applies to two-stage model kinds only".into(),
        ));
    }
    if m_max == 0 || m_max > MAX_GRID_BITS {
        return Err(Error::InvalidArgument(format!(
            "m_max must be in [1, {MAX_GRID_BITS}]"
        )));
    }
    let thetas: Vec<ParamVector> = match criterion {
        MSelectCriterion::MinimaxOverGrid => crate::eval::minimax_theta_grid(family)?,
        MSelectCriterion::ExpectedAt(t) => {
            if t.family() != *family {
                return Err(Error::InvalidArgument(
                    "criterion parameter belongs to a different family".into(),
                ));
            }
            vec![t.clone()]
        }
    };
    let classes = enumerate_classes(family, n, class_budget)?;
    let entropies: Vec<f64> = thetas
        .iter()
        .map(|t| crate::family::entropy_n(t, n))
        .collect();
    let mut best: Option<(u32, f64)> = None;
    for m in 1..=m_max {
        let grid = build_grid(family, m)?;
        let model = match kind {
            ModelKind::TwoStage => LengthModel::TwoStage(grid),
            _ => {
                let part = build_partition(&grid, n, class_budget)?;
                LengthModel::cond_two_stage(grid, part)?
            }
        };
        let lengths: Vec<f64> = classes
            .iter()
            .map(|c| model.length_bits_class(&c.key))
            .collect();
        let mut score = f64::NEG_INFINITY;
        for (t, h) in thetas.iter().zip(&entropies) {
            let expected: f64 = classes
                .iter()
                .zip(&lengths)
                .map(|(c, l)| (c.log2_multiplicity + c.key.log2_prob(t)).exp2() * l)
                .sum();
            score = score.max(expected - h);
        }
        if best.map_or(true, |(_, s)| score < s) {
            best = Some((m, score));
        }
    }
    Ok(best.expect("m_max ≥ 1 guarantees at least one candidate"))
}

// ---------------------------------------------------------------------------
// Serialization (cache wire formats)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct GridWire {
    format_version: u32,
    kind: FamilyKind,
    k: usize,
    m: u32,
    points: Vec<Vec<f64>>,
}

impl Serialize for EstimateGrid {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GridWire {
            format_version: FORMAT_VERSION,
            kind: self.family.kind(),
            k: self.family.k(),
            m: self.m,
            points: self.points.iter().map(|p| p.probs().to_vec()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for EstimateGrid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = GridWire::deserialize(d)?;
        if w.format_version != FORMAT_VERSION {
            return Err(D::Error::custom(format!(
                "grid format version {} (expected {FORMAT_VERSION})",
                w.format_version
            )));
        }
        let family = ParamFamily::new(w.kind, w.k).map_err(D::Error::custom)?;
        let expected = if w.m == 0 { 1 } else { 1usize << w.m };
        if w.m > MAX_GRID_BITS || w.points.len() != expected {
            return Err(D::Error::custom("grid point count does not match m"));
        }
        let points = w
            .points
            .into_iter()
            .map(|p| ParamVector::new(family, p).map_err(D::Error::custom))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(EstimateGrid {
            family,
            m: w.m,
            points,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PartitionWire {
    format_version: u32,
    kind: FamilyKind,
    k: usize,
    n: u64,
    m: u32,
    a_values: Vec<f64>,
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PartitionWire {
            format_version: FORMAT_VERSION,
            kind: self.family.kind(),
            k: self.family.k(),
            n: self.n,
            m: self.m,
            a_values: self.a_values.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = PartitionWire::deserialize(d)?;
        if w.format_version != FORMAT_VERSION {
            return Err(D::Error::custom(format!(
                "partition format version {} (expected {FORMAT_VERSION})",
                w.format_version
            )));
        }
        let family = ParamFamily::new(w.kind, w.k).map_err(D::Error::custom)?;
        let expected = if w.m == 0 { 1 } else { 1usize << w.m };
        if w.m > MAX_GRID_BITS || w.a_values.len() != expected {
            return Err(D::Error::custom("partition cell count does not match m"));
        }
        if w.a_values
            .iter()
            .any(|a| !a.is_finite() || *a < 0.0 || *a > 1.0 + 1e-9)
        {
            return Err(D::Error::custom("partition cell masses out of range"));
        }
        Ok(Partition {
            family,
            n: w.n,
            m: w.m,
            a_values: w.a_values,
        })
    }
}
