//! `redlab` — command-line front end for the redundancy laboratory.
//!
//! Subcommands expose the library's closed-form bounds (`bounds`), the
//! probability-bound curves (`curve`), empirical redundancy measurement
//! (`eval`), reference figure datasets (`figures`), and arithmetic-coder
//! round-trips (`codec`). Every run is deterministic given its
//! configuration and seed; runs that write files also write a `meta.json`
//! capturing the full configuration so any output can be reproduced
//! byte-for-byte.
//!
//! Exit codes: 0 success, 2 configuration error, 3 resource limit
//! (enumeration budget or intractable integral), 4 internal invariant
//! violation.

use std::fmt::Write as _;
use std::fs;
use std::panic;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use redlab::bounds::{
    cond_two_stage_curve, log2_unit_ball_volume, main_term, minimax_redundancy,
    minimax_two_stage, two_stage_curve, two_stage_penalty, unit_ball_volume, BoundCurve,
};
use redlab::cache::grid_cached;
use redlab::codecs::{optimal_m, LengthModel, MSelectCriterion, ModelKind};
use redlab::coder::{decode, decode_container, encode, encode_container};
use redlab::eval::{
    empirical_curve, reproduce_figure, CurveConfig, EvalConfig, FigureId, FigureOptions,
};
use redlab::family::{
    all_sequences, jeffreys_integral, IntegralMode, JeffreysIntegral, ParamFamily, ParamVector,
    SequenceSample,
};
use redlab::{Error, FORMAT_VERSION};

/// Exhaustive codec sweeps enumerate `k^n` sequences; refuse beyond this.
const ROUNDTRIP_BUDGET: u64 = 1 << 22;

#[derive(Parser)]
#[command(
    name = "redlab",
    version,
    about = "Redundancy laboratory for finite-length universal source coding",
    propagate_version = true
)]
struct Cli {
    /// Emit machine-readable JSON at full precision instead of the human
    /// summary (human output rounds to 3 decimals).
    #[arg(long, global = true)]
    json: bool,

    /// Cap the worker thread count. Results are identical for any value.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form redundancy bounds for a family at one n.
    Bounds(BoundsArgs),
    /// Probability-bound curve R0(P0) for one family and n.
    Curve(CurveArgs),
    /// Empirical redundancy exceedance curve over Jeffreys-sampled sources.
    Eval(EvalArgs),
    /// Reproduce a reference figure dataset (fig1..fig4).
    Figures(FiguresArgs),
    /// Arithmetic-coder round-trips for realizable length models.
    Codec(CodecArgs),
}

#[derive(Args)]
struct BoundsArgs {
    /// Source family, `kind:k` (memoryless:K or markov1:K).
    #[arg(long, value_parser = parse_family)]
    family: ParamFamily,

    /// Sequence length; accepts kB/MB suffixes (powers of 1024).
    #[arg(long, value_parser = parse_n)]
    n: u64,

    /// Print only the integral-free main term (1−ε at ε=0) plus g(d);
    /// the only option for families with an intractable Jeffreys integral.
    #[arg(long)]
    main_term_only: bool,

    /// Write the JSON report here (plus a sibling meta.json).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    /// Source family, `kind:k` (memoryless:K or markov1:K).
    #[arg(long, value_parser = parse_family)]
    family: ParamFamily,

    /// Sequence length; accepts kB/MB suffixes (powers of 1024).
    #[arg(long, value_parser = parse_n)]
    n: u64,

    /// Which probability bound: thm1 = conditional two-stage (optimal)
    /// codes, thm2 = plain two-stage codes.
    #[arg(long, value_parser = ["thm1", "thm2"])]
    kind: String,

    /// Evaluate the curve at a single target probability P0.
    #[arg(long, conflicts_with = "p0_grid")]
    p0: Option<f64>,

    /// P0 sweep as start:stop:step, all in (0,1) (default 0.01:0.99:0.01).
    #[arg(long, value_name = "START:STOP:STEP")]
    p0_grid: Option<String>,

    /// Use the integral-free main term (flagged approximate) even when the
    /// exact integral is available.
    #[arg(long)]
    main_term_only: bool,

    /// Write the curve CSV here (plus a sibling meta.json).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Source family, `kind:k` (memoryless:K or markov1:K).
    #[arg(long, value_parser = parse_family)]
    family: ParamFamily,

    /// Sequence length; accepts kB/MB suffixes (powers of 1024).
    #[arg(long, value_parser = parse_n)]
    n: u64,

    /// Length model: mixture, 2p, or c2p (two-stage kinds pick their grid
    /// resolution by the minimax criterion).
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,

    /// Number of Jeffreys-sampled sources (minimum 100).
    #[arg(long, default_value_t = 400)]
    theta_samples: u64,

    /// Master seed; every reported number is a pure function of it.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Exact enumeration allowed up to this many type classes.
    #[arg(long, default_value_t = 1_000_000)]
    class_budget: u64,

    /// Monte Carlo sample count used when enumeration is out of budget.
    #[arg(long, default_value_t = 10_000)]
    mc_samples: u64,

    /// Fail (exit 3) instead of falling back to Monte Carlo.
    #[arg(long)]
    no_mc: bool,

    /// Search ceiling for the minimax-optimal grid resolution m.
    #[arg(long, default_value_t = 10)]
    m_max: u32,

    /// Write the curve CSV here (plus a sibling meta.json).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FiguresArgs {
    /// Figure dataset to reproduce: fig1, fig2, fig3, or fig4.
    #[arg(long, value_parser = parse_figure)]
    id: FigureId,

    /// Output directory (one CSV per curve plus meta.json).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// Master seed for the empirical overlays.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Jeffreys θ samples for the empirical overlay at the smallest n
    /// (figures 1-3).
    #[arg(long, default_value_t = 200)]
    empirical_samples: u64,

    /// Skip the empirical overlays.
    #[arg(long)]
    no_empirical: bool,
}

#[derive(Args)]
struct CodecArgs {
    /// Source family, `kind:k` (memoryless:K or markov1:K).
    #[arg(long, value_parser = parse_family)]
    family: ParamFamily,

    /// Sequence length; accepts kB/MB suffixes (powers of 1024).
    #[arg(long, value_parser = parse_n)]
    n: u64,

    /// Length model to realize: ideal, 2p, or mixture (c2p is not
    /// sequentially decodable).
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,

    /// Source parameters for --model ideal: comma-separated probabilities
    /// (k values for memoryless:K, k*k row-major for markov1:K).
    #[arg(long)]
    theta: Option<String>,

    /// Grid resolution for --model 2p (default: minimax-optimal).
    #[arg(long)]
    m: Option<u32>,

    /// Encode and decode every length-n sequence, verifying identity and
    /// the ceil(ideal)+2 length budget.
    #[arg(long)]
    roundtrip_all: bool,

    /// Encode one sequence given as comma-separated symbols, print the
    /// self-describing container, and decode it back.
    #[arg(long, value_name = "S0,S1,...", conflicts_with = "roundtrip_all")]
    seq: Option<String>,

    /// Exact enumeration allowed up to this many type classes (grid
    /// selection and partitions).
    #[arg(long, default_value_t = 1_000_000)]
    class_budget: u64,
}

// ---------------------------------------------------------------------------
// Value parsers
// ---------------------------------------------------------------------------

fn parse_family(s: &str) -> Result<ParamFamily, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_figure(s: &str) -> Result<FigureId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Sequence lengths with the byte-axis suffixes kB/MB (powers of 1024).
fn parse_n(s: &str) -> Result<u64, String> {
    let (digits, multiplier) = if let Some(v) = s.strip_suffix("kB") {
        (v, 1u64 << 10)
    } else if let Some(v) = s.strip_suffix("MB") {
        (v, 1u64 << 20)
    } else if let Some(v) = s.strip_suffix('B') {
        (v, 1)
    } else {
        (s, 1)
    };
    let base: u64 = digits
        .parse()
        .map_err(|_| format!("invalid length {s:?} (examples: 512, 256kB, 16MB)"))?;
    base.checked_mul(multiplier)
        .ok_or_else(|| format!("length {s:?} overflows"))
}

fn parse_p0_grid(s: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(Error::InvalidArgument(format!(
            "expected START:STOP:STEP, got {s:?}"
        )));
    };
    let parse = |v: &str| -> Result<f64, Error> {
        v.parse()
            .map_err(|_| Error::InvalidArgument(format!("invalid number {v:?} in P0 grid")))
    };
    let (start, stop, step) = (parse(start)?, parse(stop)?, parse(step)?);
    if !(step > 0.0) || stop < start {
        return Err(Error::InvalidArgument(
            "P0 grid needs stop >= start and step > 0".into(),
        ));
    }
    let count = ((stop - start) / step).round() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

fn parse_theta(family: &ParamFamily, s: &str) -> Result<ParamVector, Error> {
    let values: Vec<f64> = s
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("invalid probability {v:?}")))
        })
        .collect::<Result<_, _>>()?;
    match family.kind() {
        redlab::FamilyKind::Memoryless => ParamVector::memoryless(values),
        redlab::FamilyKind::Markov1 => ParamVector::markov1(family.k(), values),
    }
}

fn parse_symbols(family: &ParamFamily, n: u64, s: &str) -> Result<SequenceSample, Error> {
    let symbols: Vec<u16> = s
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("invalid symbol {v:?}")))
        })
        .collect::<Result<_, _>>()?;
    if symbols.len() as u64 != n {
        return Err(Error::InvalidArgument(format!(
            "--seq has {} symbols but --n is {n}",
            symbols.len()
        )));
    }
    SequenceSample::new(*family, symbols)
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

fn integral_provenance(integral: &JeffreysIntegral) -> String {
    match integral.mode {
        IntegralMode::ClosedForm => format!("{:.6} (closed form)", integral.value),
        IntegralMode::MonteCarlo => format!(
            "{:.6} ± {:.6} (Monte Carlo, {} samples)",
            integral.value,
            integral.std_error.unwrap_or(0.0),
            integral.samples
        ),
    }
}

/// Writes `meta.json` next to an output file (or into an output
/// directory), recording the full run configuration.
fn write_meta(out: &Path, command: &str, config: serde_json::Value) -> Result<PathBuf, Error> {
    let meta = serde_json::json!({
        "format_version": FORMAT_VERSION,
        "command": command,
        "config": config,
    });
    let path = if out.is_dir() {
        out.join("meta.json")
    } else {
        let stem = out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".to_string());
        out.with_file_name(format!("{stem}.meta.json"))
    };
    fs::write(&path, serde_json::to_string_pretty(&meta)?)?;
    Ok(path)
}

fn write_or_print(
    out: Option<&Path>,
    content: &str,
    command: &str,
    config: serde_json::Value,
) -> Result<(), Error> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, content)?;
            let meta = write_meta(path, command, config)?;
            println!("wrote {} and {}", path.display(), meta.display());
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn format_volume(c_d: f64, log2_c_d: f64) -> String {
    if c_d >= 1e-9 {
        format!("{c_d:.6}")
    } else {
        format!("2^{log2_c_d:.1}")
    }
}

fn cmd_bounds(json: bool, args: &BoundsArgs) -> Result<(), Error> {
    let family = args.family;
    let (d, n) = (family.d(), args.n);
    let g = two_stage_penalty(d)?;
    let c_d = unit_ball_volume(d)?;
    let log2_c_d = log2_unit_ball_volume(d)?;
    if args.main_term_only {
        let mt = main_term(d, n, 0.0);
        let report = serde_json::json!({
            "family": family.to_string(),
            "d": d,
            "n": n,
            "main_term_bits": mt,
            "g_d_bits": g,
            "c_d": c_d,
            "log2_c_d": log2_c_d,
            "approximate": true,
        });
        if json {
            println!("{}", serde_json::to_string_pretty(&report)?);
        } else {
            println!("family {family} (d = {d}), n = {n}");
            println!("main term (d/2)·log2 n   {mt:.3} bits   [approximate: integral constant omitted]");
            println!("penalty g(d)             {g:.3} bits");
            println!("unit-ball volume C_d     {}", format_volume(c_d, log2_c_d));
        }
        if let Some(out) = &args.out {
            write_or_print(Some(out), &format!("{}\n", serde_json::to_string_pretty(&report)?),
                "bounds", report.clone())?;
        }
        return Ok(());
    }
    let minimax = minimax_redundancy(&family, n)?;
    let two_stage = minimax_two_stage(&family, n)?;
    let integral = jeffreys_integral(&family)?;
    let report = serde_json::json!({
        "family": family.to_string(),
        "d": d,
        "n": n,
        "minimax_bits": minimax,
        "two_stage_minimax_bits": two_stage,
        "g_d_bits": g,
        "c_d": c_d,
        "log2_c_d": log2_c_d,
        "integral": integral,
    });
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("family {family} (d = {d}), n = {n}");
        println!("minimax redundancy       {minimax:.3} bits");
        println!("two-stage minimax        {two_stage:.3} bits");
        println!("penalty g(d)             {g:.3} bits");
        println!("unit-ball volume C_d     {}", format_volume(c_d, log2_c_d));
        println!("Jeffreys integral        {}", integral_provenance(&integral));
    }
    if let Some(out) = &args.out {
        write_or_print(Some(out), &format!("{}\n", serde_json::to_string_pretty(&report)?),
            "bounds", report.clone())?;
    }
    Ok(())
}

fn cmd_curve(json: bool, args: &CurveArgs) -> Result<(), Error> {
    let family = args.family;
    let p0_grid = match (&args.p0, &args.p0_grid) {
        (Some(p0), _) => vec![*p0],
        (None, Some(spec)) => parse_p0_grid(spec)?,
        (None, None) => (1..=99).map(|i| i as f64 / 100.0).collect(),
    };
    let curve: BoundCurve = if args.main_term_only {
        let integral = match jeffreys_integral(&family) {
            Ok(i) => Some(i.log2_value),
            Err(Error::IntegralIntractable { .. }) => None,
            Err(e) => return Err(e),
        };
        let mut c = redlab::bounds::main_term_only(family.d(), args.n, &p0_grid, integral)?;
        if args.kind == "thm2" {
            for p in &mut c.points {
                if p.r0 > 0.0 {
                    p.r0 += two_stage_penalty(family.d())?;
                }
            }
        }
        c
    } else {
        match args.kind.as_str() {
            "thm1" => cond_two_stage_curve(&family, args.n, &p0_grid)?,
            _ => two_stage_curve(&family, args.n, &p0_grid)?,
        }
    };
    let config = serde_json::json!({
        "family": family.to_string(),
        "n": args.n,
        "kind": args.kind,
        "p0_grid": p0_grid,
        "main_term_only": args.main_term_only,
        "approximate": curve.approximate,
    });
    if args.p0.is_some() && args.out.is_none() {
        let point = &curve.points[0];
        if json {
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "config": config,
                    "point": point,
                    "integral": curve.integral,
                }))?
            );
        } else {
            println!(
                "R0 = {:.3} bits at P0 = {} ({}, n = {}, flag {})",
                point.r0,
                point.p0,
                family,
                args.n,
                point.flag.as_str()
            );
        }
        return Ok(());
    }
    if json && args.out.is_none() {
        println!("{}", serde_json::to_string_pretty(&curve)?);
        return Ok(());
    }
    write_or_print(args.out.as_deref(), &curve.to_csv(), "curve", config)
}

fn cmd_eval(json: bool, args: &EvalArgs) -> Result<(), Error> {
    let cfg = CurveConfig {
        theta_samples: args.theta_samples,
        seed: args.seed,
        r0_grid: Vec::new(),
        m_max: args.m_max,
        eval: EvalConfig {
            class_budget: args.class_budget,
            mc_samples: args.mc_samples,
            allow_mc: !args.no_mc,
            seed: args.seed,
        },
    };
    let curve = empirical_curve(&args.family, args.n, args.model, &cfg)?;
    let config = serde_json::json!({
        "family": args.family.to_string(),
        "n": args.n,
        "model": args.model.as_str(),
        "m": curve.m,
        "theta_samples": args.theta_samples,
        "seed": args.seed,
        "class_budget": args.class_budget,
        "mc_samples": args.mc_samples,
        "allow_mc": !args.no_mc,
        "m_max": args.m_max,
    });
    if json && args.out.is_none() {
        println!("{}", serde_json::to_string_pretty(&curve)?);
        return Ok(());
    }
    let mut content = String::new();
    if args.out.is_none() {
        let m_note = curve
            .m
            .map(|m| format!(", minimax-optimal m = {m}"))
            .unwrap_or_default();
        writeln!(
            content,
            "# empirical exceedance: {} {} n = {}{m_note}, {} sources, seed {}",
            args.model.as_str(),
            args.family,
            args.n,
            args.theta_samples,
            args.seed
        )
        .expect("string write");
    }
    content.push_str(&curve.to_csv());
    write_or_print(args.out.as_deref(), &content, "eval", config)
}

fn cmd_figures(json: bool, args: &FiguresArgs) -> Result<(), Error> {
    let opts = FigureOptions {
        empirical_samples: if args.no_empirical {
            None
        } else {
            Some(args.empirical_samples)
        },
        seed: args.seed,
        eval: EvalConfig::default(),
    };
    let bundle = reproduce_figure(args.id, &args.out, &opts)?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "figure": bundle.id.as_str(),
                "dir": bundle.dir,
                "files": bundle.files,
                "meta": bundle.meta,
            }))?
        );
    } else {
        println!(
            "figure {}: wrote {} files to {}",
            bundle.id,
            bundle.files.len(),
            bundle.dir.display()
        );
        for file in &bundle.files {
            println!("  {}", file.display());
        }
    }
    Ok(())
}

/// Builds the realizable length model for `codec`, choosing the
/// minimax-optimal grid resolution when `--m` is not given.
fn codec_model(args: &CodecArgs) -> Result<(LengthModel, Option<u32>), Error> {
    match args.model {
        ModelKind::IdealTheta => {
            let spec = args.theta.as_deref().ok_or_else(|| {
                Error::InvalidArgument("--model ideal requires --theta".into())
            })?;
            Ok((LengthModel::IdealTheta(parse_theta(&args.family, spec)?), None))
        }
        ModelKind::JeffreysMixture => Ok((LengthModel::JeffreysMixture(args.family), None)),
        ModelKind::TwoStage => {
            let m = match args.m {
                Some(m) => m,
                None => {
                    optimal_m(
                        &args.family,
                        args.n,
                        ModelKind::TwoStage,
                        &MSelectCriterion::MinimaxOverGrid,
                        10,
                        args.class_budget,
                    )?
                    .0
                }
            };
            let grid = grid_cached(&args.family, m)?;
            Ok((LengthModel::TwoStage(grid), Some(m)))
        }
        ModelKind::CondTwoStage => Err(Error::InvalidArgument(
            "conditional two-stage lengths are not sequentially decodable; use --model 2p, \
             mixture, or ideal"
                .into(),
        )),
    }
}

fn cmd_codec(json: bool, args: &CodecArgs) -> Result<(), Error> {
    let (model, m) = codec_model(args)?;
    let family = args.family;
    if args.roundtrip_all {
        let total = (family.k() as u64)
            .checked_pow(args.n.try_into().map_err(|_| {
                Error::InvalidArgument("--roundtrip-all needs a small n".into())
            })?)
            .filter(|&t| t <= ROUNDTRIP_BUDGET)
            .ok_or(Error::BudgetExceeded {
                classes: u64::MAX,
                budget: ROUNDTRIP_BUDGET,
            })?;
        let mut ok = 0u64;
        let mut max_bits = 0usize;
        let mut max_overhead = 0.0f64;
        for x in all_sequences(family, args.n as usize) {
            let stream = encode(&x, &model)?;
            let back = decode(&stream, &model, args.n as usize)?;
            if back != x {
                return Err(Error::InvalidArgument(format!(
                    "round-trip mismatch on {x:?}"
                )));
            }
            let ideal = model.length_bits(&x);
            max_bits = max_bits.max(stream.bit_len());
            max_overhead = max_overhead.max(stream.bit_len() as f64 - ideal);
            ok += 1;
        }
        if json {
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "family": family.to_string(),
                    "n": args.n,
                    "model": args.model.as_str(),
                    "m": m,
                    "total": total,
                    "ok": ok,
                    "max_bits": max_bits,
                    "max_overhead_bits": max_overhead,
                }))?
            );
        } else {
            println!(
                "{ok}/{total} round-trips OK ({} {family}, n = {}, max {max_bits} bits, \
                 max overhead {max_overhead:.3} bits)",
                args.model.as_str(),
                args.n
            );
        }
        return Ok(());
    }
    let Some(seq) = args.seq.as_deref() else {
        return Err(Error::InvalidArgument(
            "choose --roundtrip-all or --seq S0,S1,...".into(),
        ));
    };
    let x = parse_symbols(&family, args.n, seq)?;
    let container = encode_container(&x, &model)?;
    let (back, _) = decode_container(&container)?;
    if back != x {
        return Err(Error::InvalidArgument("round-trip mismatch".into()));
    }
    let ideal = model.length_bits(&x);
    let hex: String = container.iter().map(|b| format!("{b:02x}")).collect();
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "family": family.to_string(),
                "n": args.n,
                "model": args.model.as_str(),
                "m": m,
                "ideal_bits": ideal,
                "container_bytes": container.len(),
                "container_hex": hex,
                "roundtrip_ok": true,
            }))?
        );
    } else {
        println!(
            "round-trip OK: ideal {ideal:.3} bits, container {} bytes",
            container.len()
        );
        println!("{hex}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::IntegralIntractable { .. }
        | Error::BudgetExceeded { .. }
        | Error::GridTooLarge { .. }
        | Error::RejectionBudget { .. } => 3,
        _ => 2,
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Bounds(args) => cmd_bounds(cli.json, args),
        Command::Curve(args) => cmd_curve(cli.json, args),
        Command::Eval(args) => cmd_eval(cli.json, args),
        Command::Figures(args) => cmd_figures(cli.json, args),
        Command::Codec(args) => cmd_codec(cli.json, args),
    }
}

fn panic_text(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".to_string()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Ignore failure: the global pool can only be sized once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    // Keep internal-invariant reports concise and stay silent when stdout
    // disappears mid-write (e.g. piping into `head`), per Unix convention.
    panic::set_hook(Box::new(|info| {
        let text = panic_text(info.payload());
        if !text.contains("Broken pipe") {
            eprintln!("error: internal invariant violation: {text}");
        }
    }));
    let outcome = panic::catch_unwind(panic::AssertUnwindSafe(|| run(&cli)));
    let _ = panic::take_hook();
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            eprintln!("error: {err}");
            if matches!(err, Error::IntegralIntractable { .. }) {
                eprintln!("hint: pass --main-term-only for the integral-free main term");
            }
            ExitCode::from(exit_code_for(&err))
        }
        Err(payload) => {
            if panic_text(payload.as_ref()).contains("Broken pipe") {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            }
        }
    }
}
