//! End-to-end acceptance checks for the redundancy laboratory.
//!
//! Each criterion is a separate test that prints one summary line with the
//! measured values before asserting, so a failure report always shows the
//! numbers alongside the target and tolerance.

use redlab::bounds::{
    cond_two_stage_curve, main_term, minimax_redundancy, minimax_two_stage, two_stage_penalty,
    two_stage_penalty_asymptotic,
};
use redlab::codecs::{
    build_grid, build_partition, optimal_m, LengthModel, MSelectCriterion, ModelKind,
};
use redlab::coder::{decode, encode};
use redlab::eval::{
    exact_redundancies, minimax_theta_grid, naive_expected_redundancy, wilson_halfwidth,
};
use redlab::family::{
    all_sequences, jeffreys_integral, sample_jeffreys, IntegralMode, ParamFamily, ParamVector,
};
use redlab::subseed;

fn memo(k: usize) -> ParamFamily {
    ParamFamily::memoryless(k).unwrap()
}

fn kraft_sum(model: &LengthModel, n: usize) -> f64 {
    all_sequences(model.family(), n)
        .map(|x| (-model.length_bits(&x)).exp2())
        .sum()
}

#[test]
fn criterion_01_binary_minimax_anchors() {
    let family = memo(2);
    let minimax = minimax_redundancy(&family, 8).unwrap();
    let two_stage = minimax_two_stage(&family, 8).unwrap();
    let g1 = two_stage_penalty(1).unwrap();
    println!(
        "criterion 01: minimax8 = {minimax:.6} (1.826±0.02), two-stage8 = {two_stage:.6} \
         (2.873±0.05), g(1) = {g1:.6} (1.047±0.002)"
    );
    assert!((minimax - 1.826).abs() <= 0.02);
    assert!((two_stage - 2.873).abs() <= 0.05);
    assert!((g1 - 1.047).abs() <= 0.002);
}

#[test]
fn criterion_02_ternary_bound_curve_points() {
    let family = memo(3);
    let targets = [
        (32u64, 0.4f64, 4.26f64),
        (128, 0.4, 6.26),
        (32, 0.6, 3.67),
        (128, 0.6, 5.68),
    ];
    let mut measured = Vec::new();
    for &(n, p0, want) in &targets {
        let curve = cond_two_stage_curve(&family, n, &[p0]).unwrap();
        measured.push((n, p0, curve.points[0].r0, want));
    }
    println!(
        "criterion 02: {}",
        measured
            .iter()
            .map(|(n, p0, got, want)| format!("R0(n={n},P0={p0}) = {got:.4} ({want}±0.01)"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    for (n, p0, got, want) in measured {
        assert!(
            (got - want).abs() <= 0.01,
            "n={n} P0={p0}: {got} vs {want}"
        );
    }
}

#[test]
fn criterion_03_binary_markov_minimax() {
    let family = ParamFamily::markov1(2).unwrap();
    let integral = jeffreys_integral(&family).unwrap();
    let rel_se = integral.std_error.unwrap() / integral.value;
    let minimax = minimax_redundancy(&family, 12).unwrap();
    println!(
        "criterion 03: markov minimax12 = {minimax:.6} (2.794±0.05), integral = {:.6} \
         rel-SE = {:.4}% (≤0.5%)",
        integral.value,
        100.0 * rel_se
    );
    assert_eq!(integral.mode, IntegralMode::MonteCarlo);
    assert!(rel_se <= 0.005);
    assert!((minimax - 2.794).abs() <= 0.05);
}

#[test]
fn criterion_04_large_alphabet_penalty() {
    let d = 65_280;
    let g = two_stage_penalty(d).unwrap();
    let asym = two_stage_penalty_asymptotic(d);
    println!("criterion 04: g({d}) = {g:.6} (8.82±0.05), asymptote = {asym:.6} (±0.05)");
    assert!((g - 8.82).abs() <= 0.05);
    assert!((g - asym).abs() <= 0.05);
}

#[test]
fn criterion_05_kraft_sums_by_enumeration() {
    let family = memo(2);
    let n = 8;
    let mixture = kraft_sum(&LengthModel::JeffreysMixture(family), n);
    let mut lines = vec![format!("mixture = {mixture:.12}")];
    let mut plain_sums = Vec::new();
    let mut cond_sums = Vec::new();
    for m in 1..=3 {
        let grid = build_grid(&family, m).unwrap();
        let part = build_partition(&grid, n as u64, 10_000).unwrap();
        let plain = kraft_sum(&LengthModel::TwoStage(grid.clone()), n);
        let cond = kraft_sum(&LengthModel::cond_two_stage(grid, part).unwrap(), n);
        lines.push(format!("m={m}: plain = {plain:.12}, cond = {cond:.12}"));
        plain_sums.push(plain);
        cond_sums.push(cond);
    }
    println!("criterion 05: {}", lines.join("; "));
    assert!((mixture - 1.0).abs() <= 1e-9);
    for (m, (plain, cond)) in plain_sums.iter().zip(&cond_sums).enumerate() {
        assert!(*plain < 1.0, "m={}: plain Kraft {plain} not < 1", m + 1);
        assert!((cond - 1.0).abs() <= 1e-9, "m={}: cond Kraft {cond}", m + 1);
    }
}

#[test]
fn criterion_06_conditional_dominates_pointwise() {
    let cases = [(memo(3), 8usize), (memo(2), 16)];
    let mut counts = Vec::new();
    for (family, n) in cases {
        let grid = build_grid(&family, 3).unwrap();
        let part = build_partition(&grid, n as u64, 1_000_000).unwrap();
        let plain = LengthModel::TwoStage(grid.clone());
        let cond = LengthModel::cond_two_stage(grid, part).unwrap();
        let mut total = 0u64;
        for x in all_sequences(family, n) {
            assert!(
                cond.length_bits(&x) <= plain.length_bits(&x) + 1e-12,
                "k={} n={n}: conditional longer on {:?}",
                family.k(),
                x
            );
            total += 1;
        }
        counts.push((family.k(), n, total));
    }
    println!(
        "criterion 06: {}",
        counts
            .iter()
            .map(|(k, n, c)| format!("k={k} n={n}: cond ≤ plain on all {c} sequences"))
            .collect::<Vec<_>>()
            .join("; ")
    );
    assert_eq!(counts[0].2, 6561);
    assert_eq!(counts[1].2, 65536);
}

#[test]
fn criterion_07_type_class_oracle_equivalence() {
    // (family, n, source θ, mismatched ideal θ′)
    let cases = [
        (
            memo(2),
            16u64,
            ParamVector::memoryless(vec![0.3, 0.7]).unwrap(),
            ParamVector::memoryless(vec![0.55, 0.45]).unwrap(),
        ),
        (
            memo(3),
            8,
            ParamVector::memoryless(vec![0.2, 0.5, 0.3]).unwrap(),
            ParamVector::memoryless(vec![0.4, 0.3, 0.3]).unwrap(),
        ),
        (
            ParamFamily::markov1(2).unwrap(),
            10,
            ParamVector::markov1(2, vec![0.8, 0.2, 0.3, 0.7]).unwrap(),
            ParamVector::markov1(2, vec![0.5, 0.5, 0.6, 0.4]).unwrap(),
        ),
    ];
    let mut max_gap = 0.0f64;
    for (family, n, theta, coded) in cases {
        let grid = build_grid(&family, 2).unwrap();
        let part = build_partition(&grid, n, 1_000_000).unwrap();
        let models = [
            LengthModel::IdealTheta(coded),
            LengthModel::TwoStage(grid.clone()),
            LengthModel::cond_two_stage(grid, part).unwrap(),
            LengthModel::JeffreysMixture(family),
        ];
        for model in &models {
            let exact = exact_redundancies(model, n, std::slice::from_ref(&theta), 1_000_000)
                .unwrap()[0];
            let naive = naive_expected_redundancy(&theta, model, n);
            let gap = (exact - naive).abs();
            max_gap = max_gap.max(gap);
            assert!(
                gap <= 1e-9,
                "{} n={n} {:?}: exact {exact} vs naive {naive}",
                family,
                model.kind()
            );
        }
    }
    println!(
        "criterion 07: exact vs naive agree for all four model kinds, max gap = {max_gap:.3e} \
         (≤1e-9)"
    );
}

#[test]
fn criterion_08_probability_bound_validated_empirically() {
    let family = memo(2);
    let n = 16u64;
    let samples = 1000u64;
    let (m, _) = optimal_m(
        &family,
        n,
        ModelKind::CondTwoStage,
        &MSelectCriterion::MinimaxOverGrid,
        10,
        1_000_000,
    )
    .unwrap();
    let grid = build_grid(&family, m).unwrap();
    let part = build_partition(&grid, n, 1_000_000).unwrap();
    let model = LengthModel::cond_two_stage(grid, part).unwrap();
    let thetas: Vec<ParamVector> = (0..samples)
        .map(|j| sample_jeffreys(&family, subseed(0xACCE_0008, j)).unwrap())
        .collect();
    let redundancies = exact_redundancies(&model, n, &thetas, 1_000_000).unwrap();
    let p0s = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
    let curve = cond_two_stage_curve(&family, n, &p0s).unwrap();
    let mut report = Vec::new();
    for point in &curve.points {
        let successes = redundancies.iter().filter(|&&r| r >= point.r0).count() as u64;
        let fraction = successes as f64 / samples as f64;
        let ci = wilson_halfwidth(successes, samples);
        report.push(format!(
            "P0={}: fraction = {fraction:.3} ≥ {:.3}",
            point.p0,
            point.p0 - ci
        ));
        assert!(
            fraction >= point.p0 - ci,
            "P0={} R0={}: fraction {fraction} below bound {} − {ci}",
            point.p0,
            point.r0,
            point.p0
        );
    }
    println!(
        "criterion 08: m = {m}, exceedance fractions dominate the bound: {}",
        report.join("; ")
    );
}

#[test]
fn criterion_09_mixture_saturates_minimax() {
    let family = memo(2);
    let thetas = minimax_theta_grid(&family).unwrap();
    let model = LengthModel::JeffreysMixture(family);
    let mut report = Vec::new();
    for n in [8u64, 64] {
        let values = exact_redundancies(&model, n, &thetas, 1_000_000).unwrap();
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let minimax = minimax_redundancy(&family, n).unwrap();
        report.push(format!(
            "n={n}: max = {max:.4}, minimax = {minimax:.4}, gap = {:+.4}",
            max - minimax
        ));
        assert!(
            (max - minimax).abs() <= 0.5,
            "n={n}: max {max} vs minimax {minimax}"
        );
    }
    println!("criterion 09: worst-case mixture redundancy within ±0.5 bits: {}", report.join("; "));
}

#[test]
fn criterion_10_exhaustive_round_trips() {
    let family = memo(2);
    let n = 8usize;
    let grid = build_grid(&family, 2).unwrap();
    let models = [
        ("mixture", LengthModel::JeffreysMixture(family)),
        ("two-stage", LengthModel::TwoStage(grid)),
    ];
    let mut report = Vec::new();
    for (name, model) in &models {
        let mut ok = 0u32;
        for x in all_sequences(family, n) {
            let stream = encode(&x, model).unwrap();
            let back = decode(&stream, model, n).unwrap();
            assert_eq!(back, x, "{name}: round-trip mismatch");
            let ideal = model.length_bits(&x);
            let budget = ideal.ceil() + 2.0;
            assert!(
                stream.bit_len() as f64 <= budget,
                "{name}: {} bits vs ideal {ideal} (budget {budget})",
                stream.bit_len()
            );
            ok += 1;
        }
        report.push(format!("{name}: {ok}/256 round-trips OK within ⌈ideal⌉+2"));
    }
    println!("criterion 10: {}", report.join("; "));
}

#[test]
fn criterion_11_large_alphabet_figure_arithmetic() {
    let d = 65_280usize; // first-order Markov, k = 256
    let n_256k = 262_144u64;
    let n_16m = 16_777_216u64;
    let mt_256k = main_term(d, n_256k, 0.0);
    let mt_16m = main_term(d, n_16m, 0.0);
    assert!(mt_256k >= 100_000.0);
    // Redundancy level of ~100k bits at 256kB, scaled by main-term growth,
    // against a 1 bit-per-byte entropy budget.
    let anchor = 100_000.0;
    let ratio_256k = anchor / n_256k as f64;
    let ratio_16m = (anchor + (mt_16m - mt_256k)) / n_16m as f64;
    println!(
        "criterion 11: main term(256kB) = {mt_256k:.0} bits (≥100000), overhead = \
         {:.2}% (38±5) and {:.2}% (1.7±5)",
        100.0 * ratio_256k,
        100.0 * ratio_16m
    );
    assert!((ratio_256k - 0.38).abs() <= 0.05);
    assert!((ratio_16m - 0.017).abs() <= 0.05);
}
