//! Parameter sweeps of the pipeline and continuity diagnostics of the
//! control sets, chain control sets and spectral entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::pipeline::{
    compute_sets, resolve_k_q, select_control_set, spanning_entropy, spectral_entropy, PipelineOptions, SetsOutput,
    SpanningPlan,
};
use crate::sets::{hausdorff_distance, match_by_overlap, one_sided_deviation, CellSet, GridPartition};
use crate::spectra::SpectrumEstimate;
use crate::system::ControlSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Values of the swept parameter; sorted before running.
    pub alphas: Vec<f64>,
    /// Reference value `α⁰`; must be one of `alphas`.
    pub reference: f64,
    /// Position of the swept entry in the parameter vector.
    pub param_index: usize,
    pub pipeline: PipelineOptions,
    pub spanning: Option<SpanningPlan>,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub control_set: Option<CellSet>,
    pub chain_set: Option<CellSet>,
    pub h_spectral: Option<f64>,
    pub h_spanning: Option<f64>,
    pub unstable_dim: Option<usize>,
    pub lambda: Option<f64>,
    pub c: Option<f64>,
    pub trusted: bool,
    pub spectrum: Option<SpectrumEstimate>,
    pub hausdorff_to_ref: Option<f64>,
    pub chain_hausdorff_to_ref: Option<f64>,
    /// Failure recorded at this point instead of aborting the sweep.
    pub error: Option<String>,
    pub non_hyperbolic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub reference: f64,
    pub param_index: usize,
    pub grid: GridPartition,
    pub points: Vec<SweepPoint>,
}

fn empty_point(alpha: f64) -> SweepPoint {
    SweepPoint {
        alpha,
        control_set: None,
        chain_set: None,
        h_spectral: None,
        h_spanning: None,
        unstable_dim: None,
        lambda: None,
        c: None,
        trusted: false,
        spectrum: None,
        hausdorff_to_ref: None,
        chain_hausdorff_to_ref: None,
        error: None,
        non_hyperbolic: false,
    }
}

fn run_point(
    sys: &ControlSystem,
    alpha: f64,
    cfg: &SweepConfig,
    reference: Option<&CellSet>,
) -> (SweepPoint, Option<SetsOutput>) {
    let mut p = empty_point(alpha);
    let mut params = sys.params().to_vec();
    params[cfg.param_index] = alpha;
    let res = (|| -> Result<SetsOutput> {
        let sys = sys.with_params(params.clone())?;
        let sets = compute_sets(&sys, &cfg.pipeline)?;
        let d = match reference.and_then(|r| match_by_overlap(r, &sets.control_sets)) {
            Some(d) => d,
            None => select_control_set(&sets, &cfg.pipeline.selector)?,
        };
        p.control_set = Some(sets.control_sets[d].clone());
        let spec = spectral_entropy(&sys, &sets, d, &cfg.pipeline);
        match spec {
            Ok(s) => {
                p.chain_set = Some(sets.chain_control_sets[s.chain_set].clone());
                p.h_spectral = Some(s.h);
                p.unstable_dim = Some(s.splitting.unstable_dim);
                p.lambda = Some(s.splitting.lambda);
                p.c = Some(s.splitting.c);
                p.trusted = s.splitting.trusted;
                p.spectrum = Some(s.spectrum);
            }
            Err(e) => {
                p.chain_set = sets.chain_of(d).map(|e| sets.chain_control_sets[e].clone());
                p.non_hyperbolic = matches!(e, Error::NonHyperbolic { .. });
                return Err(e);
            }
        }
        if let Some(plan) = &cfg.spanning {
            let grid = match &plan.resolution {
                Some(r) => PipelineOptions { resolution: r.clone(), ..cfg.pipeline.clone() }.grid(&sys)?,
                None => sets.grid.clone(),
            };
            let (k, q) = resolve_k_q(&grid, Some((&sets, d)), plan)?;
            p.h_spanning = Some(spanning_entropy(&sys, &grid, &k, &q, plan)?.estimate.fekete_bound);
        }
        Ok(sets)
    })();
    match res {
        Ok(sets) => (p, Some(sets)),
        Err(e) => {
            p.error = Some(e.to_string());
            (p, None)
        }
    }
}

/// Runs the pipeline at every `α` on one shared grid. The reference point
/// runs first; its control set anchors the overlap matching elsewhere.
pub fn sweep(family: &ControlSystem, cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.param_index >= family.params().len() {
        return Err(Error::InvalidArgument(format!("parameter index {} out of range", cfg.param_index)));
    }
    let mut alphas = cfg.alphas.clone();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    if !alphas.iter().any(|&a| a == cfg.reference) {
        return Err(Error::InvalidArgument(format!("reference {} is not on the sweep grid", cfg.reference)));
    }
    let grid = cfg.pipeline.grid(family)?;
    let (ref_point, _) = run_point(family, cfg.reference, cfg, None);
    if let Some(e) = &ref_point.error {
        return Err(Error::ReferenceFailed(e.clone()));
    }
    let ref_d = ref_point.control_set.clone().expect("reference succeeded");
    let ref_e = ref_point.chain_set.clone();
    let mut points = par::map(cfg.execution, &alphas, |&a| {
        if a == cfg.reference {
            ref_point.clone()
        } else {
            run_point(family, a, cfg, Some(&ref_d)).0
        }
    });
    for p in &mut points {
        if let Some(d) = &p.control_set {
            p.hausdorff_to_ref = hausdorff_distance(d, &ref_d, &grid).ok();
        }
        if let (Some(e), Some(r)) = (&p.chain_set, &ref_e) {
            p.chain_hausdorff_to_ref = hausdorff_distance(e, r, &grid).ok();
        }
    }
    Ok(SweepReport { reference: cfg.reference, param_index: cfg.param_index, grid, points })
}

impl SweepReport {
    /// Rows `alpha,h_spectral,h_spanning,d_H_to_ref,k,lambda,c,trusted,non_hyperbolic,error`.
    pub fn to_csv(&self) -> String {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(|x| x.to_string()).unwrap_or_default()
        }
        let mut s = String::from("alpha,h_spectral,h_spanning,d_H_to_ref,k,lambda,c,trusted,non_hyperbolic,error\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                p.alpha,
                opt(&p.h_spectral),
                opt(&p.h_spanning),
                opt(&p.hausdorff_to_ref),
                opt(&p.unstable_dim),
                opt(&p.lambda),
                opt(&p.c),
                p.trusted,
                p.non_hyperbolic,
                p.error.as_deref().unwrap_or("").replace(',', ";"),
            ));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemicontinuityEvidence {
    /// Largest excess of a neighbouring Morse interval beyond the reference one.
    pub upper_deviation: f64,
    /// Largest excess of the reference Morse interval beyond a neighbouring one.
    pub lower_deviation: f64,
    /// Largest `sup_{x ∈ D^α} dist(x, D^{α⁰})` over the neighbours.
    pub set_upper_deviation: f64,
    /// Largest `sup_{x ∈ D^{α⁰}} dist(x, D^α)` over the neighbours.
    pub set_lower_deviation: f64,
    pub tolerance: f64,
    pub upper_pass: bool,
    pub lower_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityDiagnostics {
    /// `max d_H(cl D^α, cl D^{α'}) / |α − α'|` over adjacent grid points.
    pub hausdorff_modulus: f64,
    pub chain_hausdorff_modulus: f64,
    /// `max |h(α) − h(α')| / |α − α'|` over adjacent hyperbolic points.
    pub entropy_modulus: f64,
    /// Largest `|h_i − (h_{i−1} + h_{i+1})/2|` relative to three error bars.
    pub max_jump_ratio: f64,
    pub jump_pass: bool,
    pub semicontinuity: SemicontinuityEvidence,
}

/// Single-point error bar: spread of the Morse interval plus a floor.
pub fn error_bar(p: &SweepPoint) -> f64 {
    p.spectrum.as_ref().map(|s| s.hi - s.lo).unwrap_or(0.0) + 0.01
}

/// Moduli of continuity and one-sided semicontinuity evidence at `α⁰`,
/// using the grid neighbours of the reference on each side.
pub fn continuity_diagnostics(report: &SweepReport, tolerance: f64) -> Result<ContinuityDiagnostics> {
    let pts = &report.points;
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 sweep points, got {}", pts.len())));
    }
    let mut hm: f64 = 0.0;
    let mut chm: f64 = 0.0;
    let mut em: f64 = 0.0;
    for w in pts.windows(2) {
        let da = (w[1].alpha - w[0].alpha).abs();
        if let (Some(a), Some(b)) = (&w[0].control_set, &w[1].control_set) {
            hm = hm.max(hausdorff_distance(a, b, &report.grid)? / da);
        }
        if let (Some(a), Some(b)) = (&w[0].chain_set, &w[1].chain_set) {
            chm = chm.max(hausdorff_distance(a, b, &report.grid)? / da);
        }
        if let (Some(a), Some(b)) = (w[0].h_spectral, w[1].h_spectral) {
            em = em.max((a - b).abs() / da);
        }
    }
    let mut jump: f64 = 0.0;
    for w in pts.windows(3) {
        if let (Some(a), Some(b), Some(c)) = (w[0].h_spectral, w[1].h_spectral, w[2].h_spectral) {
            let t = (w[1].alpha - w[0].alpha) / (w[2].alpha - w[0].alpha);
            let interp = a + t * (c - a);
            let bar = error_bar(&w[0]).max(error_bar(&w[1])).max(error_bar(&w[2]));
            jump = jump.max((b - interp).abs() / (3.0 * bar));
        }
    }

    let r = pts.iter().position(|p| p.alpha == report.reference).ok_or_else(|| {
        Error::InvalidArgument("reference point missing from the report".into())
    })?;
    let neighbours: Vec<&SweepPoint> = [r.checked_sub(1), Some(r + 1)]
        .into_iter()
        .flatten()
        .filter_map(|i| pts.get(i))
        .collect();
    let reference = &pts[r];
    let mut ev = SemicontinuityEvidence {
        upper_deviation: 0.0,
        lower_deviation: 0.0,
        set_upper_deviation: 0.0,
        set_lower_deviation: 0.0,
        tolerance,
        upper_pass: true,
        lower_pass: true,
    };
    if let Some(s0) = &reference.spectrum {
        for n in &neighbours {
            if let Some(s) = &n.spectrum {
                ev.upper_deviation = ev.upper_deviation.max((s0.lo - s.lo).max(s.hi - s0.hi).max(0.0));
                ev.lower_deviation = ev.lower_deviation.max((s.lo - s0.lo).max(s0.hi - s.hi).max(0.0));
            }
        }
    }
    if let Some(d0) = &reference.control_set {
        for n in &neighbours {
            if let Some(d) = &n.control_set {
                ev.set_upper_deviation = ev.set_upper_deviation.max(one_sided_deviation(d, d0, &report.grid)?);
                ev.set_lower_deviation = ev.set_lower_deviation.max(one_sided_deviation(d0, d, &report.grid)?);
            }
        }
    }
    ev.upper_pass = ev.upper_deviation <= tolerance;
    ev.lower_pass = ev.lower_deviation <= tolerance;
    Ok(ContinuityDiagnostics {
        hausdorff_modulus: hm,
        chain_hausdorff_modulus: chm,
        entropy_modulus: em,
        max_jump_ratio: jump,
        jump_pass: jump <= 1.0,
        semicontinuity: ev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{ControlRange, ScalarLinear, StateBox};
    use std::sync::Arc;

    fn family() -> ControlSystem {
        ControlSystem::new(
            Arc::new(ScalarLinear::default()),
            vec![1.0],
            ControlRange::new(vec![-1.0], vec![1.0]).unwrap(),
            StateBox::new(vec![-2.5], vec![2.5]).unwrap(),
        )
        .unwrap()
    }

    fn cfg(alphas: Vec<f64>) -> SweepConfig {
        SweepConfig {
            alphas,
            reference: 1.0,
            param_index: 0,
            pipeline: PipelineOptions { resolution: vec![100], ..Default::default() },
            spanning: None,
            execution: Execution::Parallel,
        }
    }

    #[test]
    fn scalar_sweep_tracks_alpha() {
        let rep = sweep(&family(), &cfg(vec![0.8, 0.9, 1.0, 1.1, 1.2])).unwrap();
        for p in &rep.points {
            assert!((p.h_spectral.unwrap() - p.alpha).abs() < 0.07, "{p:?}");
        }
        let diag = continuity_diagnostics(&rep, 0.1).unwrap();
        assert!((diag.entropy_modulus - 1.0).abs() < 0.05);
        assert!(diag.jump_pass && diag.semicontinuity.upper_pass);
    }

    #[test]
    fn crossing_zero_is_flagged() {
        let rep = sweep(&family(), &cfg(vec![-0.5, 0.0, 1.0])).unwrap();
        let zero = rep.points.iter().find(|p| p.alpha == 0.0).unwrap();
        assert!(zero.h_spectral.is_none());
        assert!(zero.error.is_some());
    }

    #[test]
    fn constant_family_has_zero_moduli() {
        let mut c = cfg(vec![0.0, 1.0, 2.0]);
        c.param_index = 0;
        let fam = ControlSystem::new(
            Arc::new(crate::system::ClosureFamily::new("const", 1, 1, 1, |_a, x, out| {
                out[0] = x[0];
                out[1] = 1.0;
            })),
            vec![0.0],
            ControlRange::new(vec![-1.0], vec![1.0]).unwrap(),
            StateBox::new(vec![-2.5], vec![2.5]).unwrap(),
        )
        .unwrap();
        let rep = sweep(&fam, &c).unwrap();
        let d = continuity_diagnostics(&rep, 0.1).unwrap();
        assert_eq!((d.hausdorff_modulus, d.entropy_modulus), (0.0, 0.0));
        assert!(rep.points.windows(2).all(|w| w[0].h_spectral == w[1].h_spectral));
    }

    #[test]
    fn failing_reference() {
        let mut c = cfg(vec![-1.0, 0.0, 1.0]);
        c.reference = 0.0;
        assert!(matches!(sweep(&family(), &c), Err(Error::ReferenceFailed(_))));
    }
}
