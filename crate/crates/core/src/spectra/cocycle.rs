//! The additive unstable-determinant cocycle `γ` and the subadditive
//! exterior-norm cocycle `κ`.
//!
//! `γ_t(u,x)` is evaluated as the log-determinant of the map induced by
//! `dφ_{t,u}(x)` on the quotient `ℝ^d / E⁻`, where the stable subspace `E⁻` is
//! obtained from forward singular vectors over a look-ahead horizon. The
//! quotient is identified with `(E⁻)^⊥`, so the induced map in orthonormal
//! coordinates is `B_yᵀ D B_x`. This cocycle differs from `log J⁺` by a
//! bounded coboundary: growth rates, Floquet exponents and Morse spectra
//! coincide, and additivity holds exactly whenever `E⁻` is invariant.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{fundamental_chunks, ControlSignal, ControlSystem, IntegrationOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocycleOptions {
    pub integration: IntegrationOptions,
    /// Re-orthonormalization cadence in time units.
    pub chunk: f64,
    /// Look-ahead used to resolve the stable subspace.
    pub stable_horizon: f64,
}

impl Default for CocycleOptions {
    fn default() -> Self {
        Self { integration: IntegrationOptions::unbounded(1e-2), chunk: 0.5, stable_horizon: 12.0 }
    }
}

/// `γ_t` together with the subspace-alignment error of the quotient bases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaValue {
    pub value: f64,
    pub alignment_error: f64,
}

/// Cocycle weights of one `(state, constant letter, duration)` edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeWeights {
    /// `γ` for every unstable dimension `k = 0..=d`.
    pub gamma: Vec<f64>,
    pub kappa: f64,
}

/// Continuation of `u` from time `t` over a further `horizon`; finite signals
/// hold their last value, periodic ones keep cycling.
pub(crate) fn tail(u: &ControlSignal, t: f64, horizon: f64) -> Result<ControlSignal> {
    if u.is_periodic() {
        return u.shift(t);
    }
    u.extended(t + horizon)?.shift(t)
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("cocycle time must be non-negative, got {t}")));
    }
    Ok(())
}

/// Orthonormal right singular vectors of `m`, ordered by decreasing singular value.
pub(crate) fn right_singular(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let n = m.ncols();
    let mut v = DMatrix::zeros(n, order.len());
    for (j, &i) in order.iter().enumerate() {
        v.set_column(j, &v_t.row(i).transpose());
    }
    (order.iter().map(|&i| svd.singular_values[i]).collect(), v)
}

fn product(chunks: &[DMatrix<f64>], d: usize) -> DMatrix<f64> {
    chunks.iter().fold(DMatrix::identity(d, d), |acc, c| c * acc)
}

/// Right singular vectors of the look-ahead propagator from `x` along `u`,
/// plus the projector drift between the full and half horizon for each `k`.
fn lookahead_frames(
    sys: &ControlSystem,
    x: &[f64],
    u: &ControlSignal,
    opts: &CocycleOptions,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let d = sys.dim();
    let mut horizon = opts.stable_horizon;
    loop {
        let attempt = (|| -> Result<(DMatrix<f64>, Vec<f64>)> {
            let sig = if u.is_periodic() { u.clone() } else { u.extended(horizon)? };
            let (_, chunks) =
                fundamental_chunks(sys, x, &sig, horizon, &opts.integration, opts.chunk)?;
            let full = product(&chunks, d);
            let half = product(&chunks[..chunks.len().div_ceil(2)], d);
            if full.iter().chain(half.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { time: horizon });
            }
            let (_, vf) = right_singular(&full);
            let (_, vh) = right_singular(&half);
            let drift = (0..=d)
                .map(|k| {
                    if k == 0 || k == d {
                        return 0.0;
                    }
                    let pf = vf.columns(0, k) * vf.columns(0, k).transpose();
                    let ph = vh.columns(0, k) * vh.columns(0, k).transpose();
                    (pf - ph).norm()
                })
                .collect();
            Ok((vf, drift))
        })();
        match attempt {
            Err(Error::NonFinite { .. }) | Err(Error::StateEscaped { .. }) if horizon > 1.0 => {
                horizon *= 0.5;
            }
            other => return other,
        }
    }
}

/// `γ_t` for every unstable dimension `k = 0..=d`.
pub fn gamma_cocycle_all(
    sys: &ControlSystem,
    x: &[f64],
    u: &ControlSignal,
    t: f64,
    opts: &CocycleOptions,
) -> Result<Vec<GammaValue>> {
    check_time(t)?;
    let d = sys.dim();
    let zero = GammaValue { value: 0.0, alignment_error: 0.0 };
    if t == 0.0 {
        return Ok(vec![zero; d + 1]);
    }
    let sig = if u.is_periodic() { u.clone() } else { u.extended(t)? };
    let (y, chunks) = fundamental_chunks(sys, x, &sig, t, &opts.integration, opts.chunk)?;
    let mut out = vec![zero; d + 1];
    out[d].value = chunks.iter().map(|c| c.determinant().abs().ln()).sum();
    if d == 1 {
        return Ok(out);
    }
    let (vx, ex) = lookahead_frames(sys, x, u, opts)?;
    let (vy, ey) = lookahead_frames(sys, &y, &tail(u, t, opts.stable_horizon)?, opts)?;
    for k in 1..d {
        let mut frame = vx.columns(0, k).into_owned();
        let mut logdet = 0.0;
        for c in &chunks {
            let qr = (c * &frame).qr();
            logdet += qr.r().diagonal().iter().map(|r| r.abs().ln()).sum::<f64>();
            frame = qr.q();
        }
        let tail_det = (vy.columns(0, k).transpose() * frame).determinant().abs().ln();
        out[k] = GammaValue { value: logdet + tail_det, alignment_error: ex[k].max(ey[k]) };
    }
    Ok(out)
}

/// `γ_t` at unstable dimension `k`, with the alignment error of the quotient bases.
pub fn gamma_cocycle_detailed(
    sys: &ControlSystem,
    x: &[f64],
    u: &ControlSignal,
    t: f64,
    k: usize,
    opts: &CocycleOptions,
) -> Result<GammaValue> {
    let d = sys.dim();
    if k > d {
        return Err(Error::InvalidDim { k, dim: d });
    }
    check_time(t)?;
    if t == 0.0 || k == 0 {
        return Ok(GammaValue { value: 0.0, alignment_error: 0.0 });
    }
    Ok(gamma_cocycle_all(sys, x, u, t, opts)?[k])
}

/// Unstable determinant cocycle `γ_t(u,x)` in nats.
pub fn gamma_cocycle(
    sys: &ControlSystem,
    x: &[f64],
    u: &ControlSignal,
    t: f64,
    k: usize,
    opts: &CocycleOptions,
) -> Result<f64> {
    Ok(gamma_cocycle_detailed(sys, x, u, t, k, opts)?.value)
}

/// `k`-th compound matrix: minors indexed by lexicographically ordered `k`-subsets.
pub fn compound(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let subsets = k_subsets(m.nrows(), k);
    let n = subsets.len();
    let mut out = DMatrix::zeros(n, n);
    for (i, rows) in subsets.iter().enumerate() {
        for (j, cols) in subsets.iter().enumerate() {
            let sub = DMatrix::from_fn(k, k, |a, b| m[(rows[a], cols[b])]);
            out[(i, j)] = sub.determinant();
        }
    }
    out
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Running product of compound matrices with logarithmic rescaling.
#[derive(Debug, Clone)]
pub(crate) struct ScaledProduct {
    pub m: DMatrix<f64>,
    pub log_scale: f64,
}

impl ScaledProduct {
    pub fn identity(n: usize) -> Self {
        Self { m: DMatrix::identity(n, n), log_scale: 0.0 }
    }

    pub fn left_mul(&mut self, c: &DMatrix<f64>) {
        self.m = c * &self.m;
        self.rescale();
    }

    pub fn square(&mut self) {
        self.m = &self.m * &self.m;
        self.log_scale *= 2.0;
        self.rescale();
    }

    fn rescale(&mut self) {
        let n = self.m.norm();
        if n > 0.0 && n.is_finite() && !(1e-50..=1e50).contains(&n) {
            self.m /= n;
            self.log_scale += n.ln();
        }
    }

    pub fn log_norm(&self) -> f64 {
        let (s, _) = right_singular(&self.m);
        s[0].ln() + self.log_scale
    }
}

/// `max(0, max_k log‖C_k(D)‖)` for a fundamental matrix given as chunks.
pub(crate) fn kappa_of_chunks(chunks: &[DMatrix<f64>], d: usize) -> f64 {
    let mut best = 0.0f64;
    for k in 1..=d {
        let mut acc = ScaledProduct::identity(k_subsets(d, k).len());
        for c in chunks {
            acc.left_mul(&compound(c, k));
        }
        best = best.max(acc.log_norm());
    }
    best
}

/// Subadditive cocycle `κ_t(u,x) = log⁺‖dφ_{t,u}(x)^∧‖` in nats, the norm being
/// taken on the full exterior algebra.
pub fn kappa_cocycle(
    sys: &ControlSystem,
    x: &[f64],
    u: &ControlSignal,
    t: f64,
    opts: &CocycleOptions,
) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let sig = if u.is_periodic() { u.clone() } else { u.extended(t)? };
    let (_, chunks) = fundamental_chunks(sys, x, &sig, t, &opts.integration, opts.chunk)?;
    Ok(kappa_of_chunks(&chunks, sys.dim()))
}

/// Weights of the edge applying the constant control `value` from `x` for `duration`.
pub fn edge_weights(
    sys: &ControlSystem,
    x: &[f64],
    value: &[f64],
    duration: f64,
    opts: &CocycleOptions,
) -> Result<EdgeWeights> {
    let u = ControlSignal::constant(value.to_vec(), duration)?;
    let gamma = gamma_cocycle_all(sys, x, &u, duration, opts)?.iter().map(|g| g.value).collect();
    let kappa = kappa_cocycle(sys, x, &u, duration, opts)?;
    Ok(EdgeWeights { gamma, kappa })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{ControlRange, DiagLinear2d, ScalarLinear, StateBox};
    use std::sync::Arc;

    fn diag(a1: f64, a2: f64) -> ControlSystem {
        ControlSystem::new(
            Arc::new(DiagLinear2d::default()),
            vec![a1, a2],
            ControlRange::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
            StateBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_time_is_zero() {
        let sys = diag(1.0, -1.0);
        let u = ControlSignal::constant(vec![0.0, 0.0], 1.0).unwrap();
        let o = CocycleOptions::default();
        assert_eq!(gamma_cocycle(&sys, &[0.0, 0.0], &u, 0.0, 1, &o).unwrap(), 0.0);
        assert_eq!(kappa_cocycle(&sys, &[0.0, 0.0], &u, 0.0, &o).unwrap(), 0.0);
    }

    #[test]
    fn scalar_gamma_is_linear_in_time() {
        let sys = ControlSystem::new(
            Arc::new(ScalarLinear::default()),
            vec![1.0],
            ControlRange::new(vec![-1.0], vec![1.0]).unwrap(),
            StateBox::new(vec![-2.0], vec![2.0]).unwrap(),
        )
        .unwrap();
        for v in [-1.0, 0.3, 1.0] {
            let u = ControlSignal::constant(vec![v], 3.0).unwrap();
            let g = gamma_cocycle(&sys, &[0.2], &u, 3.0, 1, &CocycleOptions::default()).unwrap();
            assert!((g - 3.0).abs() < 1e-5);
        }
    }

    #[test]
    fn saddle_gamma_and_kappa() {
        let sys = diag(1.0, -1.0);
        let u = ControlSignal::constant(vec![0.5, -0.5], 2.0).unwrap();
        let o = CocycleOptions::default();
        let g = gamma_cocycle_detailed(&sys, &[0.1, 0.1], &u, 2.0, 1, &o).unwrap();
        assert!((g.value - 2.0).abs() < 1e-5, "{g:?}");
        assert!(g.alignment_error < 1e-8);
        let k = kappa_cocycle(&sys, &[0.1, 0.1], &u, 2.0, &o).unwrap();
        assert!((k - 2.0).abs() < 1e-5);
    }

    #[test]
    fn kappa_sums_positive_exponents() {
        let sys = diag(0.5, 2.0);
        let u = ControlSignal::constant(vec![0.0, 0.0], 1.0).unwrap();
        let k = kappa_cocycle(&sys, &[0.0, 0.0], &u, 1.0, &CocycleOptions::default()).unwrap();
        assert!((k - 2.5).abs() < 1e-4);
    }

    #[test]
    fn invalid_dim() {
        let sys = diag(1.0, -1.0);
        let u = ControlSignal::constant(vec![0.0, 0.0], 1.0).unwrap();
        let r = gamma_cocycle(&sys, &[0.0, 0.0], &u, 1.0, 3, &CocycleOptions::default());
        assert_eq!(r, Err(Error::InvalidDim { k: 3, dim: 2 }));
    }

    #[test]
    fn compound_of_product_is_product_of_compounds() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, -1.0, 0.3, 2.0, 0.0, 1.0, 1.5]);
        let b = DMatrix::from_row_slice(3, 3, &[0.2, -1.0, 1.0, 1.0, 1.0, 0.0, 2.0, 0.1, -0.4]);
        for k in 1..=3 {
            let lhs = compound(&(&a * &b), k);
            let rhs = compound(&a, k) * compound(&b, k);
            assert!((lhs - rhs).norm() < 1e-12);
        }
        assert!((compound(&a, 3)[(0, 0)] - a.determinant()).abs() < 1e-12);
    }
}
