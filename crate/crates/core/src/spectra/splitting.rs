//! Finite-time estimate of a hyperbolic splitting `E⁻ ⊕ E⁺` and its constants.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::cocycle::{right_singular, CocycleOptions};
use super::floquet::{equilibrium_orbit, shoot_periodic_orbit, PeriodicOrbit};
use crate::error::{Error, Result};
use crate::sets::{CellSet, GridPartition};
use crate::system::{fundamental_chunks, ControlSignal, ControlSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingOptions {
    /// Exponents closer than this to zero make the splitting non-hyperbolic.
    pub delta_gap: f64,
    pub horizon: f64,
    pub cocycle: CocycleOptions,
}

impl Default for SplittingOptions {
    fn default() -> Self {
        Self { delta_gap: 0.05, horizon: 20.0, cocycle: CocycleOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingSample {
    pub time: f64,
    /// Orthonormal columns, stored column by column.
    pub unstable_basis: Vec<Vec<f64>>,
    pub stable_basis: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicSplittingEstimate {
    pub unstable_dim: usize,
    pub dim: usize,
    /// Finite-time Lyapunov exponents, decreasing.
    pub exponents: Vec<f64>,
    pub c: f64,
    pub lambda: f64,
    pub horizon: f64,
    pub samples: Vec<SplittingSample>,
    pub trusted: bool,
    pub notes: Vec<String>,
}

fn columns(m: &DMatrix<f64>, start: usize, count: usize) -> Vec<Vec<f64>> {
    (start..start + count).map(|j| m.column(j).iter().copied().collect()).collect()
}

/// QR (Benettin) estimate of the Lyapunov exponents along `(u, x)` over
/// `horizon`, with bases of `E⁺` from the QR frames and of `E⁻` from the
/// weakest right singular vectors of the remaining propagator.
pub fn estimate_splitting(
    sys: &ControlSystem,
    x: &[f64],
    u: &ControlSignal,
    horizon: f64,
    opts: &SplittingOptions,
) -> Result<HyperbolicSplittingEstimate> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let d = sys.dim();
    let sig = if u.is_periodic() { u.clone() } else { u.extended(horizon)? };
    let co = &opts.cocycle;
    let (_, chunks) = fundamental_chunks(sys, x, &sig, horizon, &co.integration, co.chunk)?;

    let mut q = DMatrix::<f64>::identity(d, d);
    let mut logs = vec![0.0; d];
    let mut frames = vec![q.clone()];
    let mut cumulative = vec![DMatrix::<f64>::identity(d, d)];
    for c in &chunks {
        let qr = (c * &q).qr();
        let r = qr.r();
        for i in 0..d {
            logs[i] += r[(i, i)].abs().ln();
        }
        q = qr.q();
        frames.push(q.clone());
        cumulative.push(c * cumulative.last().unwrap());
    }
    let mut exponents: Vec<f64> = logs.iter().map(|l| l / horizon).collect();
    exponents.sort_by(|a, b| b.total_cmp(a));
    if let Some(&e) = exponents.iter().find(|e| e.abs() < opts.delta_gap) {
        return Err(Error::NonHyperbolic { exponent: e, gap: opts.delta_gap });
    }
    let k = exponents.iter().filter(|&&e| e > 0.0).count();
    let lambda = exponents.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);

    let times: Vec<f64> = {
        let mut t = vec![0.0];
        let mut acc = 0.0;
        for _ in &chunks {
            acc += co.chunk;
            t.push(acc.min(horizon));
        }
        t
    };
    let n = chunks.len();
    let total = cumulative[n].clone();
    let mut samples = Vec::new();
    let mut c_est: f64 = 1.0;
    let mut stable0: Option<DMatrix<f64>> = None;
    let mut quot0: Option<DMatrix<f64>> = None;
    for j in 0..=n {
        if times[j] > 0.5 * horizon {
            break;
        }
        let inv = cumulative[j].clone().try_inverse().ok_or(Error::NonFinite { time: times[j] })?;
        let rest = &total * inv;
        let (_, v) = right_singular(&rest);
        let stable = v.columns(k, d - k).into_owned();
        let quot = v.columns(0, k).into_owned();
        let unstable_basis = if j == 0 { columns(&v, 0, k) } else { columns(&frames[j], 0, k) };
        samples.push(SplittingSample {
            time: times[j],
            unstable_basis,
            stable_basis: columns(&v, k, d - k),
        });
        if j == 0 {
            stable0 = Some(stable);
            quot0 = Some(quot);
            continue;
        }
        let t = times[j];
        let dt = &cumulative[j];
        if k < d {
            let s = dt * stable0.as_ref().unwrap();
            let (sv, _) = right_singular(&s);
            c_est = c_est.min((-lambda * t).exp() / sv[0]);
        }
        if k > 0 {
            let m = quot.transpose() * dt * quot0.as_ref().unwrap();
            let (sv, _) = right_singular(&m);
            c_est = c_est.min(sv[k - 1] / (lambda * t).exp());
        }
    }
    let mut notes = Vec::new();
    let trusted = c_est > 1e-6 && c_est.is_finite();
    if !trusted {
        notes.push(format!("transient constant c = {c_est:e} is degenerate"));
    }
    Ok(HyperbolicSplittingEstimate {
        unstable_dim: k,
        dim: d,
        exponents,
        c: c_est.clamp(0.0, 1.0),
        lambda,
        horizon,
        samples,
        trusted,
        notes,
    })
}

/// Periodic orbits through a component: equilibria of every constant letter,
/// then two-letter shooting orbits if no equilibrium lies in the component.
pub fn component_orbits(
    sys: &ControlSystem,
    grid: &GridPartition,
    component: &CellSet,
    opts: &CocycleOptions,
) -> Vec<PeriodicOrbit> {
    let near = component.dilate(grid, 1).mask(grid);
    let inside = |x: &[f64]| grid.cell_of(x).map(|c| near[c]).unwrap_or(false);
    let stride = (component.len() / 8).max(1);
    let seeds: Vec<Vec<f64>> = component.cells.iter().step_by(stride).map(|&c| grid.center(c)).collect();
    let letters = &sys.control_range().letters;
    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    let push = |o: PeriodicOrbit, orbits: &mut Vec<PeriodicOrbit>| {
        let dup = orbits.iter().any(|p| {
            p.signal == o.signal && p.x.iter().zip(&o.x).all(|(a, b)| (a - b).abs() < 1e-8)
        });
        if !dup && inside(&o.x) {
            orbits.push(o);
        }
    };
    for l in letters {
        for s in &seeds {
            if let Ok(o) = equilibrium_orbit(sys, s, l, 1.0, opts) {
                push(o, &mut orbits);
            }
        }
    }
    if orbits.is_empty() {
        for (a, la) in letters.iter().enumerate() {
            for lb in &letters[a + 1..] {
                let Ok(u) = ControlSignal::from_pieces(&[0.5, 0.5], vec![la.clone(), lb.clone()]) else {
                    continue;
                };
                for s in &seeds {
                    if let Ok(o) = shoot_periodic_orbit(sys, s, &u, opts) {
                        push(o, &mut orbits);
                    }
                }
            }
        }
    }
    orbits
}

/// Splitting over a component, estimated along its periodic orbits; the
/// unstable dimension must agree on all of them.
pub fn component_splitting(
    sys: &ControlSystem,
    grid: &GridPartition,
    component: &CellSet,
    opts: &SplittingOptions,
) -> Result<HyperbolicSplittingEstimate> {
    let orbits = component_orbits(sys, grid, component, &opts.cocycle);
    if orbits.is_empty() {
        return Err(Error::InsufficientData("no periodic orbit found in the component".into()));
    }
    let mut first: Option<HyperbolicSplittingEstimate> = None;
    let mut lambda = f64::INFINITY;
    let mut c: f64 = 1.0;
    for o in &orbits {
        let est = estimate_splitting(sys, &o.x, &o.signal, opts.horizon, opts)?;
        lambda = lambda.min(est.lambda);
        c = c.min(est.c);
        match &first {
            None => first = Some(est),
            Some(f) if f.unstable_dim != est.unstable_dim => {
                let weakest = est.exponents.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
                log::warn!(
                    "unstable dimension varies over the component ({} vs {})",
                    f.unstable_dim,
                    est.unstable_dim
                );
                return Err(Error::NonHyperbolic { exponent: weakest, gap: opts.delta_gap });
            }
            Some(_) => {}
        }
    }
    let mut est = first.unwrap();
    est.lambda = lambda;
    est.c = c;
    est.notes.push(format!("estimated along {} periodic orbit(s)", orbits.len()));
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{ControlRange, DiagLinear2d, StateBox};
    use std::sync::Arc;

    fn diag(a1: f64, a2: f64, inputs: usize) -> ControlSystem {
        let (b, lo, hi) = if inputs == 2 {
            (DiagLinear2d::default(), vec![-1.0, -1.0], vec![1.0, 1.0])
        } else {
            (DiagLinear2d::new(vec![0.0, 0.0], 1), vec![-1.0], vec![1.0])
        };
        ControlSystem::new(
            Arc::new(b),
            vec![a1, a2],
            ControlRange::new(lo, hi).unwrap(),
            StateBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn saddle_splitting() {
        let sys = diag(1.0, -1.0, 2);
        let u = ControlSignal::constant(vec![0.0, 0.0], 1.0).unwrap();
        let est = estimate_splitting(&sys, &[0.0, 0.0], &u, 20.0, &SplittingOptions::default()).unwrap();
        assert_eq!(est.unstable_dim, 1);
        assert!((est.lambda - 1.0).abs() < 1e-6);
        assert!((est.c - 1.0).abs() < 1e-6);
        let s = &est.samples[3];
        assert!((s.unstable_basis[0][0].abs() - 1.0).abs() < 1e-9);
        assert!((s.stable_basis[0][1].abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn repeller_has_full_unstable_dim() {
        let sys = diag(1.0, 2.0, 2);
        let u = ControlSignal::constant(vec![0.0, 0.0], 1.0).unwrap();
        let est = estimate_splitting(&sys, &[0.0, 0.0], &u, 20.0, &SplittingOptions::default()).unwrap();
        assert_eq!(est.unstable_dim, 2);
    }

    #[test]
    fn zero_exponent_is_not_hyperbolic() {
        let sys = diag(0.0, -1.0, 1);
        let u = ControlSignal::constant(vec![0.0], 1.0).unwrap();
        let r = estimate_splitting(&sys, &[0.0, 0.0], &u, 20.0, &SplittingOptions::default());
        assert!(matches!(r, Err(Error::NonHyperbolic { .. })));
    }
}
