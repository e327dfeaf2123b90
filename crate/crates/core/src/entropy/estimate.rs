//! Entropy rates from spanning counts, the spectral formula and their reconciliation.

use serde::{Deserialize, Serialize};

use super::spanning::{CoverMethod, SpanningSet};
use crate::error::{Error, Result};
use crate::sets::{CellSet, TransitionGraph, WeightKind};
use crate::spectra::{morse_spectrum_bounds, HyperbolicSplittingEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMethod {
    /// All counts come from exact minimum covers.
    SpanningExact,
    /// Some count is a greedy cover, so the rate is an upper estimate.
    SpanningGreedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// `(τ, r(τ))`, sorted by `τ`.
    pub counts: Vec<(f64, u64)>,
    /// Least-squares slope of `log r(τ)` against `τ`, nats per unit time.
    pub h: f64,
    /// `min_τ log r(τ) / τ`.
    pub fekete_bound: f64,
    pub method: EntropyMethod,
    pub greedy_upper_bound: bool,
    pub notes: Vec<String>,
}

impl EntropyEstimate {
    pub fn h_bits(&self) -> f64 {
        self.h * std::f64::consts::LOG2_E
    }

    /// Rows `tau,r,log_r_over_tau`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,r,log_r_over_tau\n");
        for &(t, r) in &self.counts {
            s.push_str(&format!("{t},{r},{}\n", (r as f64).ln() / t));
        }
        s
    }
}

/// Rate estimate from at least three counts `r(τ)`.
pub fn entropy_from_counts(counts: &[(f64, u64)]) -> Result<EntropyEstimate> {
    if counts.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 values of tau, got {}", counts.len())));
    }
    let mut counts = counts.to_vec();
    if counts.iter().any(|&(t, r)| !(t > 0.0) || r == 0) {
        return Err(Error::InvalidArgument("counts need positive tau and r".into()));
    }
    counts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if counts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidArgument("duplicate tau in counts".into()));
    }
    let n = counts.len() as f64;
    let mt = counts.iter().map(|c| c.0).sum::<f64>() / n;
    let ml = counts.iter().map(|c| (c.1 as f64).ln()).sum::<f64>() / n;
    let sxy: f64 = counts.iter().map(|c| (c.0 - mt) * ((c.1 as f64).ln() - ml)).sum();
    let sxx: f64 = counts.iter().map(|c| (c.0 - mt).powi(2)).sum();
    let h = sxy / sxx;
    let fekete_bound = counts.iter().map(|c| (c.1 as f64).ln() / c.0).fold(f64::INFINITY, f64::min);
    let mut notes = Vec::new();
    for w in counts.windows(2) {
        for a in &counts {
            for b in &counts {
                if (a.0 + b.0 - w[1].0).abs() < 1e-9 && w[1].1 > a.1 * b.1 {
                    notes.push(format!("r({}) = {} exceeds r({})·r({}) = {}", w[1].0, w[1].1, a.0, b.0, a.1 * b.1));
                }
            }
        }
    }
    notes.dedup();
    Ok(EntropyEstimate {
        counts,
        h,
        fekete_bound,
        method: EntropyMethod::SpanningGreedy,
        greedy_upper_bound: true,
        notes,
    })
}

/// As [`entropy_from_counts`], labelled by how the covers were obtained.
pub fn entropy_from_spanning_sets(sets: &[SpanningSet]) -> Result<EntropyEstimate> {
    let counts: Vec<(f64, u64)> = sets.iter().map(|s| (s.tau, s.len() as u64)).collect();
    let mut est = entropy_from_counts(&counts)?;
    let exact = sets.iter().all(|s| s.method == CoverMethod::Exact);
    est.method = if exact { EntropyMethod::SpanningExact } else { EntropyMethod::SpanningGreedy };
    est.greedy_upper_bound = !exact;
    for s in sets.iter().filter(|s| s.budget_exhausted) {
        est.notes.push(format!("candidate budget exhausted at tau = {}", s.tau));
    }
    Ok(est)
}

/// Spectral invariance entropy: the lower Morse bound of `γ` at the
/// unstable dimension of a trusted hyperbolic splitting.
pub fn h_inv_spectral(
    graph: &TransitionGraph,
    component: &CellSet,
    splitting: &HyperbolicSplittingEstimate,
) -> Result<f64> {
    if !splitting.trusted {
        return Err(Error::UntrustedSplitting(splitting.notes.join("; ")));
    }
    Ok(morse_spectrum_bounds(graph, component, WeightKind::Gamma { k: splitting.unstable_dim })?.lo)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconcileReport {
    pub spanning_h: f64,
    pub fekete_bound: f64,
    pub spectral: f64,
    /// `fekete_bound − spectral`.
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub diagnostics: Vec<String>,
}

/// Checks `spectral ≤ fekete_bound + tolerance`.
pub fn reconcile(spanning: &EntropyEstimate, spectral: f64, tolerance: f64) -> ReconcileReport {
    let gap = spanning.fekete_bound - spectral;
    let pass = spectral <= spanning.fekete_bound + tolerance;
    let mut diagnostics = Vec::new();
    if !pass {
        diagnostics.push(format!(
            "spectral value {spectral} exceeds the spanning bound {} by more than {tolerance}",
            spanning.fekete_bound
        ));
    }
    if (spanning.h - spectral).abs() > tolerance {
        diagnostics.push(format!("fitted slope {} differs from spectral value {spectral}", spanning.h));
    }
    if spanning.greedy_upper_bound {
        diagnostics.push("spanning counts are greedy upper estimates".into());
    }
    ReconcileReport {
        spanning_h: spanning.h,
        fekete_bound: spanning.fekete_bound,
        spectral,
        gap,
        tolerance,
        pass,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_counts_have_zero_rate() {
        let e = entropy_from_counts(&[(1.0, 1), (2.0, 1), (3.0, 1)]).unwrap();
        assert_eq!(e.h, 0.0);
        assert_eq!(e.fekete_bound, 0.0);
    }

    #[test]
    fn exponential_counts() {
        let c: Vec<(f64, u64)> = (1..=6).map(|t| (t as f64, (t as f64).exp().ceil() as u64)).collect();
        let e = entropy_from_counts(&c).unwrap();
        assert!((e.h - 1.0).abs() < 0.05, "{}", e.h);
    }

    #[test]
    fn too_few_counts() {
        assert!(matches!(entropy_from_counts(&[(1.0, 2), (2.0, 4)]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn reconcile_directions() {
        let mut e = entropy_from_counts(&[(1.0, 3), (2.0, 9), (3.0, 27)]).unwrap();
        let same = reconcile(&e, e.fekete_bound, 0.05);
        assert!(same.pass && same.gap == 0.0);
        e.fekete_bound = 1.1;
        let r = reconcile(&e, 1.0, 0.05);
        assert!(r.pass && (r.gap - 0.1).abs() < 1e-12);
        assert!(!reconcile(&e, 1.3, 0.05).pass);
    }
}
