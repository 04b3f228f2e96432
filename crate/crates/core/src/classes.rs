//! Type classes: groups of sequences sharing one sufficient statistic.
//!
//! Every length model in this crate assigns equal length to all sequences
//! with the same statistic — symbol counts for memoryless sources, the
//! (first symbol, transition counts) pair for first-order Markov sources.
//! Expectations over `k^n` sequences therefore collapse to sums over type
//! classes weighted by class probability, which keeps exact evaluation
//! feasible far beyond exhaustive enumeration.
//!
//! Multiplicities are carried in log₂ form: binomial coefficients overflow
//! `f64` near `n ≈ 1100` while their logs stay perfectly representable.

use std::collections::BTreeMap;

use statrs::function::gamma::ln_gamma;

use crate::family::{ParamFamily, ParamVector, SequenceSample};
use crate::family::{log2_prob_from_counts, log2_prob_from_transitions};
use crate::{Error, FamilyKind, Result};

const LN_2: f64 = std::f64::consts::LN_2;

/// The sufficient statistic identifying a type class.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassKey {
    /// Memoryless: symbol counts, length `k`.
    Counts(Vec<u64>),
    /// First-order Markov: initial symbol plus row-major `k × k`
    /// transition counts.
    Markov { first: u16, trans: Vec<u64> },
}

impl ClassKey {
    /// The statistic of a concrete sequence under its family.
    pub fn of(x: &SequenceSample) -> ClassKey {
        match x.family().kind() {
            FamilyKind::Memoryless => ClassKey::Counts(x.counts()),
            FamilyKind::Markov1 => {
                let (first, trans) = x.first_and_transitions();
                ClassKey::Markov { first, trans }
            }
        }
    }

    /// Sequence length represented by this statistic.
    pub fn n(&self) -> u64 {
        match self {
            ClassKey::Counts(c) => c.iter().sum(),
            ClassKey::Markov { trans, .. } => 1 + trans.iter().sum::<u64>(),
        }
    }

    /// log₂ probability of any single member sequence under `theta`.
    ///
    /// Panics if the statistic's shape does not match `theta`'s family; keys
    /// and parameters must come from the same family.
    pub fn log2_prob(&self, theta: &ParamVector) -> f64 {
        match (self, theta.family().kind()) {
            (ClassKey::Counts(c), FamilyKind::Memoryless) => {
                assert_eq!(c.len(), theta.k(), "count vector does not match k");
                log2_prob_from_counts(theta, c)
            }
            (ClassKey::Markov { first, trans }, FamilyKind::Markov1) => {
                assert_eq!(
                    trans.len(),
                    theta.k() * theta.k(),
                    "transition matrix does not match k"
                );
                log2_prob_from_transitions(theta, *first, trans)
            }
            _ => panic!("class key kind does not match parameter family"),
        }
    }
}

/// A type class: its key and the log₂ of how many sequences share it.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeClass {
    pub key: ClassKey,
    pub log2_multiplicity: f64,
}

impl TypeClass {
    /// Number of member sequences; overflows to `inf` past ~2¹⁰²⁴.
    pub fn multiplicity(&self) -> f64 {
        self.log2_multiplicity.exp2()
    }
}

/// Number of memoryless type classes, `C(n+k−1, k−1)`, in floating point.
fn memoryless_class_count(k: usize, n: u64) -> f64 {
    let (n, k) = (n as f64, k as f64);
    (ln_gamma(n + k) - ln_gamma(n + 1.0) - ln_gamma(k)).exp().round()
}

/// Enumerates every type class of length-`n` sequences, in ascending key
/// order, refusing to materialize more than `budget` classes.
///
/// The budget also caps the Markov dynamic program's working set (which
/// tracks the last symbol and is therefore slightly larger than the final
/// class list).
pub fn enumerate_classes(family: &ParamFamily, n: u64, budget: u64) -> Result<Vec<TypeClass>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    match family.kind() {
        FamilyKind::Memoryless => enumerate_memoryless(family.k(), n, budget),
        FamilyKind::Markov1 => enumerate_markov(family.k(), n, budget),
    }
}

fn enumerate_memoryless(k: usize, n: u64, budget: u64) -> Result<Vec<TypeClass>> {
    let count = memoryless_class_count(k, n);
    if count > budget as f64 {
        return Err(Error::BudgetExceeded {
            classes: if count < u64::MAX as f64 {
                count as u64
            } else {
                u64::MAX
            },
            budget,
        });
    }
    let ln_n_fact = ln_gamma(n as f64 + 1.0);
    let mut out = Vec::with_capacity(count as usize);
    let mut counts = vec![0u64; k];
    compositions(&mut counts, 0, n, &mut |c: &[u64]| {
        let ln_mult = ln_n_fact - c.iter().map(|&ci| ln_gamma(ci as f64 + 1.0)).sum::<f64>();
        out.push(TypeClass {
            key: ClassKey::Counts(c.to_vec()),
            log2_multiplicity: ln_mult / LN_2,
        });
    });
    Ok(out)
}

/// Visits all count vectors summing to `rem` over positions `at..`, in
/// ascending lexicographic order.
fn compositions(counts: &mut Vec<u64>, at: usize, rem: u64, visit: &mut impl FnMut(&[u64])) {
    if at == counts.len() - 1 {
        counts[at] = rem;
        visit(counts);
        return;
    }
    for c in 0..=rem {
        counts[at] = c;
        compositions(counts, at + 1, rem - c, visit);
    }
}

fn enumerate_markov(k: usize, n: u64, budget: u64) -> Result<Vec<TypeClass>> {
    // State: (first symbol, last symbol, transition counts) → path count.
    // Path counts stay well inside f64 (≤ k^n with n capped by the budget).
    let mut states: BTreeMap<(u16, u16, Vec<u64>), f64> = BTreeMap::new();
    for s in 0..k as u16 {
        states.insert((s, s, vec![0u64; k * k]), 1.0);
    }
    for _ in 1..n {
        let mut next: BTreeMap<(u16, u16, Vec<u64>), f64> = BTreeMap::new();
        for ((first, last, trans), cnt) in &states {
            for a in 0..k as u16 {
                let mut t = trans.clone();
                t[*last as usize * k + a as usize] += 1;
                *next.entry((*first, a, t)).or_insert(0.0) += cnt;
            }
            if next.len() as u64 > budget {
                return Err(Error::BudgetExceeded {
                    classes: next.len() as u64,
                    budget,
                });
            }
        }
        states = next;
    }
    let mut merged: BTreeMap<(u16, Vec<u64>), f64> = BTreeMap::new();
    for ((first, _last, trans), cnt) in states {
        *merged.entry((first, trans)).or_insert(0.0) += cnt;
    }
    if merged.len() as u64 > budget {
        return Err(Error::BudgetExceeded {
            classes: merged.len() as u64,
            budget,
        });
    }
    Ok(merged
        .into_iter()
        .map(|((first, trans), cnt)| TypeClass {
            key: ClassKey::Markov { first, trans },
            log2_multiplicity: cnt.log2(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::all_sequences;
    use std::collections::HashMap;

    fn memo(k: usize) -> ParamFamily {
        ParamFamily::memoryless(k).unwrap()
    }
    fn markov(k: usize) -> ParamFamily {
        ParamFamily::markov1(k).unwrap()
    }

    #[test]
    fn binary_counts_are_binomial() {
        let classes = enumerate_classes(&memo(2), 8, 1000).unwrap();
        assert_eq!(classes.len(), 9);
        let binom = [1.0, 8.0, 28.0, 56.0, 70.0, 56.0, 28.0, 8.0, 1.0];
        for (i, class) in classes.iter().enumerate() {
            assert_eq!(class.key, ClassKey::Counts(vec![i as u64, 8 - i as u64]));
            assert!((class.multiplicity() - binom[i]).abs() < 1e-9);
        }
        let total: f64 = classes.iter().map(|c| c.multiplicity()).sum();
        assert!((total - 256.0).abs() < 1e-9);
    }

    #[test]
    fn class_counts_match_stars_and_bars() {
        assert_eq!(enumerate_classes(&memo(3), 2, 100).unwrap().len(), 6);
        assert_eq!(enumerate_classes(&memo(3), 3, 100).unwrap().len(), 10);
        assert_eq!(enumerate_classes(&memo(4), 5, 1000).unwrap().len(), 56);
    }

    #[test]
    fn classes_partition_probability_mass() {
        let theta = ParamVector::memoryless(vec![0.3, 0.7]).unwrap();
        for n in [8u64, 64] {
            let classes = enumerate_classes(&memo(2), n, 1000).unwrap();
            let total: f64 = classes
                .iter()
                .map(|c| (c.log2_multiplicity + c.key.log2_prob(&theta)).exp2())
                .sum();
            assert!((total - 1.0).abs() < 1e-10, "n={n}: mass {total}");
        }
    }

    #[test]
    fn markov_small_lengths() {
        // n = 2 and n = 3: every sequence is alone in its class.
        for (n, want) in [(2u64, 4usize), (3, 8)] {
            let classes = enumerate_classes(&markov(2), n, 1000).unwrap();
            assert_eq!(classes.len(), want);
            for c in &classes {
                assert!((c.multiplicity() - 1.0).abs() < 1e-12);
                assert_eq!(c.key.n(), n);
            }
        }
    }

    #[test]
    fn markov_classes_match_brute_force() {
        // n = 5: 00110 and 01100 share (first=0, T=[1,1,1,1]), so some
        // classes have multiplicity ≥ 2. Tally all 32 sequences directly.
        let fam = markov(2);
        let mut tally: HashMap<ClassKey, u64> = HashMap::new();
        for x in all_sequences(fam, 5) {
            *tally.entry(ClassKey::of(&x)).or_insert(0) += 1;
        }
        let classes = enumerate_classes(&fam, 5, 1000).unwrap();
        assert_eq!(classes.len(), tally.len());
        let mut max_mult = 0.0f64;
        for c in &classes {
            let want = tally[&c.key] as f64;
            assert!((c.multiplicity() - want).abs() < 1e-9);
            max_mult = max_mult.max(c.multiplicity());
        }
        assert!(max_mult >= 2.0);
        let total: f64 = classes.iter().map(|c| c.multiplicity()).sum();
        assert!((total - 32.0).abs() < 1e-9);
    }

    #[test]
    fn markov_classes_partition_probability_mass() {
        let theta = ParamVector::markov1(2, vec![0.9, 0.1, 0.3, 0.7]).unwrap();
        let classes = enumerate_classes(&markov(2), 9, 100_000).unwrap();
        let total: f64 = classes
            .iter()
            .map(|c| (c.log2_multiplicity + c.key.log2_prob(&theta)).exp2())
            .sum();
        assert!((total - 1.0).abs() < 1e-10, "mass {total}");
    }

    #[test]
    fn key_log2_prob_agrees_with_sequence_scorer() {
        let theta = ParamVector::memoryless(vec![0.2, 0.5, 0.3]).unwrap();
        let x = SequenceSample::new(memo(3), vec![0, 2, 2, 1, 0, 1, 1]).unwrap();
        let key = ClassKey::of(&x);
        assert!((key.log2_prob(&theta) - crate::family::seq_log_prob(&theta, &x)).abs() < 1e-12);
        assert_eq!(key.n(), 7);

        let theta = ParamVector::markov1(2, vec![0.6, 0.4, 0.25, 0.75]).unwrap();
        let x = SequenceSample::new(markov(2), vec![1, 0, 0, 1, 1, 1, 0]).unwrap();
        let key = ClassKey::of(&x);
        assert!((key.log2_prob(&theta) - crate::family::seq_log_prob(&theta, &x)).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        match enumerate_classes(&memo(2), 100, 50) {
            Err(Error::BudgetExceeded { classes, budget }) => {
                assert_eq!(classes, 101);
                assert_eq!(budget, 50);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
        assert!(matches!(
            enumerate_classes(&markov(2), 60, 100),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn enumeration_is_sorted_and_deterministic() {
        let a = enumerate_classes(&markov(2), 7, 100_000).unwrap();
        let b = enumerate_classes(&markov(2), 7, 100_000).unwrap();
        assert_eq!(a, b);
        for pair in a.windows(2) {
            assert!(pair[0].key < pair[1].key);
        }
    }

    #[test]
    fn large_n_log_multiplicities_stay_finite() {
        let classes = enumerate_classes(&memo(2), 4096, 10_000).unwrap();
        assert_eq!(classes.len(), 4097);
        // C(4096, 2048) overflows f64, but its log is fine.
        let mid = &classes[2048];
        assert!(mid.log2_multiplicity > 4080.0 && mid.log2_multiplicity < 4096.0);
        assert!(mid.multiplicity().is_infinite());
        let theta = ParamVector::memoryless(vec![0.5, 0.5]).unwrap();
        let total: f64 = classes
            .iter()
            .map(|c| (c.log2_multiplicity + c.key.log2_prob(&theta)).exp2())
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}
