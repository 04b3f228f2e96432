//! Redundancy measurement: exact type-class evaluation, Monte Carlo
//! fallback, empirical exceedance curves over Jeffreys-sampled sources, and
//! reproduction of the four reference figure datasets.
//!
//! Expected redundancy of a length model at a source θ is
//! `E_θ[l(Xⁿ)] − H_n(θ)`. Every model here is constant on type classes, so
//! when the class count fits the budget the expectation is computed exactly
//! as a sum over classes; otherwise it falls back to Monte Carlo over
//! sampled sequences using `l(x) + log₂ μ_θ(x)` as the per-sample statistic
//! (its mean is the redundancy directly, with far lower variance than
//! averaging lengths alone).
//!
//! All sweeps derive per-worker seeds from the master seed with
//! [`crate::subseed`], so results are identical across thread counts.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    cond_two_stage_curve, main_term, main_term_only, minimax_redundancy, minimax_two_stage,
    two_stage_curve, two_stage_penalty, BoundCurve,
};
use crate::classes::enumerate_classes;
use crate::codecs::{optimal_m, LengthModel, MSelectCriterion, ModelKind};
use crate::family::{
    all_sequences, entropy_n, jeffreys_integral, sample_jeffreys, seq_log_prob, ParamFamily,
    ParamVector,
};
use crate::{subseed, Error, FamilyKind, Result, FORMAT_VERSION};

/// 97.5% normal quantile: Wilson 95% intervals and MC error bars.
const Z_95: f64 = 1.959_963_984_540_054;

/// Seed for the fixed Jeffreys reference grid used by minimax criteria for
/// families without a natural 1-D sweep.
const REFERENCE_GRID_SEED: u64 = 0x5245_464C_4142_3031;

// ---------------------------------------------------------------------------
// Expected redundancy
// ---------------------------------------------------------------------------

/// How an estimate was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Exact,
    MonteCarlo,
}

/// An expected-redundancy measurement in bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedundancyEstimate {
    pub value: f64,
    pub mode: EvalMode,
    /// Standard error of `value` (0 in exact mode).
    pub se: f64,
    /// Monte Carlo sample count (0 in exact mode).
    pub samples: u64,
    /// Master seed of the Monte Carlo run, if any.
    pub seed: Option<u64>,
}

/// Evaluation resource limits and Monte Carlo settings.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Exact enumeration allowed up to this many type classes.
    pub class_budget: u64,
    /// Sequence samples per Monte Carlo estimate.
    pub mc_samples: u64,
    /// Fall back to Monte Carlo when enumeration is out of budget
    /// (otherwise the budget error propagates).
    pub allow_mc: bool,
    /// Master seed for Monte Carlo sampling.
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            class_budget: 1_000_000,
            mc_samples: 10_000,
            allow_mc: true,
            seed: 0,
        }
    }
}

/// Expected redundancy of `model` at source `theta` for length-`n`
/// sequences: exact over type classes when within budget, Monte Carlo
/// otherwise.
pub fn expected_redundancy(
    theta: &ParamVector,
    model: &LengthModel,
    n: u64,
    cfg: &EvalConfig,
) -> Result<RedundancyEstimate> {
    if theta.family() != model.family() {
        return Err(Error::InvalidArgument(
            "source and model families differ".into(),
        ));
    }
    match exact_redundancies(model, n, std::slice::from_ref(theta), cfg.class_budget) {
        Ok(values) => Ok(RedundancyEstimate {
            value: values[0],
            mode: EvalMode::Exact,
            se: 0.0,
            samples: 0,
            seed: None,
        }),
        Err(Error::BudgetExceeded { .. }) if cfg.allow_mc => monte_carlo(theta, model, n, cfg),
        Err(e) => Err(e),
    }
}

fn monte_carlo(
    theta: &ParamVector,
    model: &LengthModel,
    n: u64,
    cfg: &EvalConfig,
) -> Result<RedundancyEstimate> {
    if cfg.mc_samples < 2 {
        return Err(Error::InvalidArgument(
            "Monte Carlo needs at least 2 samples".into(),
        ));
    }
    let stats: Vec<f64> = (0..cfg.mc_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, i));
            let x = theta
                .sample_sequence(n as usize, &mut rng)
                .expect("sampling from a validated parameter vector");
            model.length_bits(&x) + seq_log_prob(theta, &x)
        })
        .collect();
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>()
        / (stats.len() as f64 - 1.0);
    Ok(RedundancyEstimate {
        value: mean,
        mode: EvalMode::MonteCarlo,
        se: (var / stats.len() as f64).sqrt(),
        samples: cfg.mc_samples,
        seed: Some(cfg.seed),
    })
}

/// Exact expected redundancy of one model at many sources, sharing a single
/// type-class enumeration and per-class length pass.
pub fn exact_redundancies(
    model: &LengthModel,
    n: u64,
    thetas: &[ParamVector],
    class_budget: u64,
) -> Result<Vec<f64>> {
    let family = model.family();
    let classes = enumerate_classes(&family, n, class_budget)?;
    let lengths: Vec<f64> = classes
        .iter()
        .map(|c| model.length_bits_class(&c.key))
        .collect();
    Ok(thetas
        .par_iter()
        .map(|theta| {
            let mut expected = 0.0;
            for (class, &len) in classes.iter().zip(&lengths) {
                let w = (class.log2_multiplicity + class.key.log2_prob(theta)).exp2();
                if w > 0.0 {
                    expected += w * len;
                }
            }
            expected - entropy_n(theta, n)
        })
        .collect())
}

/// Reference oracle: expected redundancy by direct enumeration of all `k^n`
/// sequences. Exponential in `n`; exists to validate the type-class path.
pub fn naive_expected_redundancy(theta: &ParamVector, model: &LengthModel, n: u64) -> f64 {
    let mut expected = 0.0;
    for x in all_sequences(theta.family(), n as usize) {
        let w = seq_log_prob(theta, &x).exp2();
        if w > 0.0 {
            expected += w * model.length_bits(&x);
        }
    }
    expected - entropy_n(theta, n)
}

/// The θ grid behind minimax criteria: the 99-point interior grid
/// (spacing 0.01, boundary margin 0.01) for binary memoryless sources, and
/// a fixed 256-point Jeffreys sample for every other family.
pub fn minimax_theta_grid(family: &ParamFamily) -> Result<Vec<ParamVector>> {
    if family.kind() == FamilyKind::Memoryless && family.k() == 2 {
        return (1..=99)
            .map(|i| {
                let t = i as f64 / 100.0;
                ParamVector::memoryless(vec![1.0 - t, t])
            })
            .collect();
    }
    (0..256)
        .map(|i| sample_jeffreys(family, subseed(REFERENCE_GRID_SEED, i)))
        .collect()
}

// ---------------------------------------------------------------------------
// Empirical exceedance curves
// ---------------------------------------------------------------------------

/// One point of an empirical exceedance curve: the fraction of sampled
/// sources whose expected redundancy reaches `r0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPoint {
    pub r0: f64,
    pub fraction: f64,
    /// Wilson 95% halfwidth of `fraction`.
    pub ci: f64,
}

/// Empirical counterpart of the bound curves: redundancy exceedance
/// fractions over Jeffreys-sampled sources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCurve {
    pub family: ParamFamily,
    pub n: u64,
    pub kind: ModelKind,
    /// Grid resolution chosen by the minimax criterion (two-stage kinds).
    pub m: Option<u32>,
    pub samples: u64,
    pub seed: u64,
    pub points: Vec<EmpiricalPoint>,
}

impl EmpiricalCurve {
    /// CSV rendering with header `r0,fraction,ci`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r0,fraction,ci\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.r0, p.fraction, p.ci));
        }
        out
    }
}

/// Configuration for [`empirical_curve`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveConfig {
    /// Number of Jeffreys-sampled sources (minimum 100).
    pub theta_samples: u64,
    pub seed: u64,
    /// Redundancy levels to report; empty selects an automatic grid from 0
    /// to the main term plus penalty.
    pub r0_grid: Vec<f64>,
    /// Search ceiling for the minimax-optimal grid resolution.
    pub m_max: u32,
    pub eval: EvalConfig,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig {
            theta_samples: 400,
            seed: 0,
            r0_grid: Vec::new(),
            m_max: 10,
            eval: EvalConfig::default(),
        }
    }
}

fn default_r0_grid(family: &ParamFamily, n: u64) -> Vec<f64> {
    let d = family.d();
    let hi = main_term(d, n, 0.0) + two_stage_penalty(d).unwrap_or(1.0) + 1.0;
    (0..=60).map(|i| hi * i as f64 / 60.0).collect()
}

/// Wilson 95% confidence halfwidth for `successes` out of `trials`.
pub fn wilson_halfwidth(successes: u64, trials: u64) -> f64 {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
}

/// Samples `theta_samples` sources from the Jeffreys prior, measures the
/// model's expected redundancy at each, and reports the exceedance fraction
/// at every requested `r0`.
///
/// Two-stage model kinds first fix the grid resolution with the minimax
/// criterion *once per (family, n)* — a code is a single length function
/// and may not adapt `m` to the source being measured.
pub fn empirical_curve(
    family: &ParamFamily,
    n: u64,
    kind: ModelKind,
    cfg: &CurveConfig,
) -> Result<EmpiricalCurve> {
    if cfg.theta_samples < 100 {
        return Err(Error::InvalidArgument(
            "empirical curves need at least 100 source samples".into(),
        ));
    }
    let r0_grid = if cfg.r0_grid.is_empty() {
        default_r0_grid(family, n)
    } else {
        cfg.r0_grid.clone()
    };
    if r0_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "r0 grid must be strictly increasing".into(),
        ));
    }
    let (model, m) = match kind {
        ModelKind::JeffreysMixture => (LengthModel::JeffreysMixture(*family), None),
        ModelKind::TwoStage | ModelKind::CondTwoStage => {
            let (m, _) = optimal_m(
                family,
                n,
                kind,
                &MSelectCriterion::MinimaxOverGrid,
                cfg.m_max,
                cfg.eval.class_budget,
            )?;
            let grid = crate::cache::grid_cached(family, m)?;
            let model = match kind {
                ModelKind::TwoStage => LengthModel::TwoStage(grid),
                _ => {
                    let part = crate::cache::partition_cached(&grid, n, cfg.eval.class_budget)?;
                    LengthModel::cond_two_stage(grid, part)?
                }
            };
            (model, Some(m))
        }
        ModelKind::IdealTheta => {
            return Err(Error::InvalidArgument(
                "ideal-θ redundancy is identically zero; empirical curves need a universal model"
                    .into(),
            ))
        }
    };
    let thetas: Vec<ParamVector> = (0..cfg.theta_samples)
        .map(|j| sample_jeffreys(family, subseed(cfg.seed, j)))
        .collect::<Result<_>>()?;
    let redundancies = match exact_redundancies(&model, n, &thetas, cfg.eval.class_budget) {
        Ok(v) => v,
        Err(Error::BudgetExceeded { .. }) if cfg.eval.allow_mc => thetas
            .par_iter()
            .enumerate()
            .map(|(j, theta)| {
                let mc_cfg = EvalConfig {
                    seed: subseed(cfg.seed, cfg.theta_samples + j as u64),
                    ..cfg.eval
                };
                monte_carlo(theta, &model, n, &mc_cfg).map(|e| e.value)
            })
            .collect::<Result<Vec<_>>>()?,
        Err(e) => return Err(e),
    };
    let trials = redundancies.len() as u64;
    let points = r0_grid
        .iter()
        .map(|&r0| {
            let successes = redundancies.iter().filter(|&&r| r >= r0).count() as u64;
            EmpiricalPoint {
                r0,
                fraction: successes as f64 / trials as f64,
                ci: wilson_halfwidth(successes, trials),
            }
        })
        .collect();
    Ok(EmpiricalCurve {
        family: *family,
        n,
        kind,
        m,
        samples: cfg.theta_samples,
        seed: cfg.seed,
        points,
    })
}

// ---------------------------------------------------------------------------
// Figure reproduction
// ---------------------------------------------------------------------------

/// The four reference figure datasets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl FigureId {
    pub fn as_str(&self) -> &'static str {
        match self {
            FigureId::Fig1 => "fig1",
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" | "1" => Ok(FigureId::Fig1),
            "fig2" | "2" => Ok(FigureId::Fig2),
            "fig3" | "3" => Ok(FigureId::Fig3),
            "fig4" | "4" => Ok(FigureId::Fig4),
            other => Err(Error::InvalidArgument(format!(
                "unknown figure '{other}' (expected fig1..fig4)"
            ))),
        }
    }
}

/// Options for [`reproduce_figure`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FigureOptions {
    /// Jeffreys θ samples for the empirical overlay at the smallest `n`
    /// (figures 1–3); `None` skips the overlay.
    pub empirical_samples: Option<u64>,
    pub seed: u64,
    pub eval: EvalConfig,
}

impl Default for FigureOptions {
    fn default() -> Self {
        FigureOptions {
            empirical_samples: Some(200),
            seed: 0,
            eval: EvalConfig::default(),
        }
    }
}

/// A written figure dataset: directory, data files, and the parsed
/// `meta.json` content.
#[derive(Clone, Debug)]
pub struct FigureBundle {
    pub id: FigureId,
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub meta: serde_json::Value,
}

struct FigureWriter {
    dir: PathBuf,
    files: Vec<PathBuf>,
    series_meta: Vec<serde_json::Value>,
}

impl FigureWriter {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(FigureWriter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            series_meta: Vec::new(),
        })
    }

    fn write_rows(
        &mut self,
        series: &str,
        n: u64,
        rows: impl Iterator<Item = (f64, f64, f64)>,
        extra: serde_json::Value,
    ) -> Result<()> {
        let mut csv = String::from("series,n,p0_or_r0,value,ci\n");
        for (x, value, ci) in rows {
            csv.push_str(&format!("{series},{n},{x},{value},{ci}\n"));
        }
        let name = format!("{series}_n{n}.csv");
        let path = self.dir.join(&name);
        fs::write(&path, csv)?;
        self.files.push(path);
        let mut meta = serde_json::json!({ "file": name, "series": series, "n": n });
        if let (Some(obj), serde_json::Value::Object(extra)) = (meta.as_object_mut(), extra) {
            obj.extend(extra);
        }
        self.series_meta.push(meta);
        Ok(())
    }

    fn write_bound_curve(&mut self, series: &str, curve: &BoundCurve) -> Result<()> {
        let flags = serde_json::json!({
            "ok": curve.points.iter().filter(|p| p.flag == crate::bounds::PointFlag::Ok).count(),
            "saturated": curve.points.iter().filter(|p| p.flag == crate::bounds::PointFlag::Saturated).count(),
            "vacuous": curve.points.iter().filter(|p| p.flag == crate::bounds::PointFlag::Vacuous).count(),
        });
        self.write_rows(
            series,
            curve.n,
            curve.points.iter().map(|p| (p.p0, p.r0, 0.0)),
            serde_json::json!({ "approximate": curve.approximate, "flags": flags }),
        )
    }

    fn write_line(&mut self, series: &str, n: u64, p0_grid: &[f64], value: f64) -> Result<()> {
        self.write_rows(
            series,
            n,
            p0_grid.iter().map(|&p0| (p0, value, 0.0)),
            serde_json::json!({ "constant": value }),
        )
    }

    fn write_empirical(&mut self, series: &str, curve: &EmpiricalCurve) -> Result<()> {
        self.write_rows(
            series,
            curve.n,
            curve.points.iter().map(|p| (p.r0, p.fraction, p.ci)),
            serde_json::json!({ "samples": curve.samples, "seed": curve.seed, "m": curve.m }),
        )
    }

    fn finish(mut self, id: FigureId, config: serde_json::Value) -> Result<FigureBundle> {
        let meta = serde_json::json!({
            "format_version": FORMAT_VERSION,
            "figure": id.as_str(),
            "config": config,
            "series": self.series_meta,
        });
        let meta_path = self.dir.join("meta.json");
        fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;
        self.files.push(meta_path);
        Ok(FigureBundle {
            id,
            dir: self.dir,
            files: self.files,
            meta,
        })
    }
}

fn percent_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// Writes one figure's dataset bundle (one CSV per curve plus `meta.json`)
/// into `out_dir` and returns the bundle description.
///
/// Figures 1–3 emit the exact bound curves and minimax reference lines for
/// each `n`, plus an optional empirical overlay at the smallest `n`.
/// Figure 4's family (`markov1:256`, d = 65280) has an intractable Jeffreys
/// constant, so it emits integral-free main-term curves flagged
/// approximate, annotated with the exact penalty `g(d)`.
pub fn reproduce_figure(
    id: FigureId,
    out_dir: &Path,
    opts: &FigureOptions,
) -> Result<FigureBundle> {
    let mut w = FigureWriter::new(out_dir)?;
    let p0 = percent_grid();
    match id {
        FigureId::Fig1 | FigureId::Fig2 => {
            let family = match id {
                FigureId::Fig1 => ParamFamily::memoryless(3)?,
                _ => ParamFamily::markov1(2)?,
            };
            let ns: &[u64] = match id {
                FigureId::Fig1 => &[8, 32, 128, 512],
                _ => &[12, 50, 202, 811],
            };
            for &n in ns {
                w.write_bound_curve("c2p_bound", &cond_two_stage_curve(&family, n, &p0)?)?;
                w.write_line("minimax", n, &p0, minimax_redundancy(&family, n)?)?;
            }
            if let Some(samples) = opts.empirical_samples {
                let cfg = CurveConfig {
                    theta_samples: samples,
                    seed: opts.seed,
                    eval: opts.eval,
                    ..CurveConfig::default()
                };
                let emp = empirical_curve(&family, ns[0], ModelKind::CondTwoStage, &cfg)?;
                w.write_empirical("empirical_c2p", &emp)?;
            }
            let integral = jeffreys_integral(&family)?;
            w.finish(
                id,
                serde_json::json!({
                    "family": family.to_string(),
                    "d": family.d(),
                    "ns": ns,
                    "p0_grid": {"start": 0.01, "stop": 0.99, "step": 0.01},
                    "integral": integral,
                    "seed": opts.seed,
                    "empirical_samples": opts.empirical_samples,
                }),
            )
        }
        FigureId::Fig3 => {
            let family = ParamFamily::memoryless(2)?;
            let ns: [u64; 4] = [8, 64, 512, 4096];
            for &n in &ns {
                w.write_bound_curve("c2p_bound", &cond_two_stage_curve(&family, n, &p0)?)?;
                w.write_bound_curve("2p_bound", &two_stage_curve(&family, n, &p0)?)?;
                w.write_line("minimax", n, &p0, minimax_redundancy(&family, n)?)?;
                w.write_line("minimax_2p", n, &p0, minimax_two_stage(&family, n)?)?;
            }
            if let Some(samples) = opts.empirical_samples {
                let cfg = CurveConfig {
                    theta_samples: samples,
                    seed: opts.seed,
                    eval: opts.eval,
                    ..CurveConfig::default()
                };
                for (series, kind) in [
                    ("empirical_c2p", ModelKind::CondTwoStage),
                    ("empirical_2p", ModelKind::TwoStage),
                ] {
                    let emp = empirical_curve(&family, ns[0], kind, &cfg)?;
                    w.write_empirical(series, &emp)?;
                }
            }
            let integral = jeffreys_integral(&family)?;
            w.finish(
                id,
                serde_json::json!({
                    "family": family.to_string(),
                    "d": family.d(),
                    "ns": ns,
                    "p0_grid": {"start": 0.01, "stop": 0.99, "step": 0.01},
                    "integral": integral,
                    "penalty_gap_bits": two_stage_penalty(family.d())?,
                    "seed": opts.seed,
                    "empirical_samples": opts.empirical_samples,
                }),
            )
        }
        FigureId::Fig4 => {
            let family = ParamFamily::markov1(256)?;
            let d = family.d();
            let ns: [u64; 4] = [262_144, 2_097_152, 16_777_216, 134_217_728];
            for &n in &ns {
                let curve = main_term_only(d, n, &p0, None)?;
                w.write_bound_curve("main_term", &curve)?;
            }
            w.finish(
                id,
                serde_json::json!({
                    "family": family.to_string(),
                    "d": d,
                    "ns": ns,
                    "p0_grid": {"start": 0.01, "stop": 0.99, "step": 0.01},
                    "integral": null,
                    "approximate": true,
                    "g_d": two_stage_penalty(d)?,
                    "main_term_at_eps0": ns.iter().map(|&n| main_term(d, n, 0.0)).collect::<Vec<_>>(),
                    "seed": opts.seed,
                }),
            )
        }
    }
}
