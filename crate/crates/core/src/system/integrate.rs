//! Fixed-step classical Runge–Kutta integration of the state and variational flows.
//!
//! Steps are snapped to signal breakpoints: every constant piece of length `L`
//! is split into `ceil(L / step)` equal substeps. The variational equation
//! `Ḋ = J(x,u) D` is integrated with the same stages as the state, so `D` is
//! the exact derivative of the discrete flow map.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ControlSignal, ControlSystem, StateBox};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationOptions {
    /// Maximal substep length.
    pub step: f64,
    /// Escape is reported once a sample leaves the state box grown by this
    /// factor of its width; `None` disables the check.
    pub escape_inflation: Option<f64>,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self { step: 1e-2, escape_inflation: Some(0.5) }
    }
}

impl IntegrationOptions {
    pub fn with_step(step: f64) -> Self {
        Self { step, ..Self::default() }
    }

    /// No escape checking; used for linearization quantities.
    pub fn unbounded(step: f64) -> Self {
        Self { step, escape_inflation: None }
    }

    pub(crate) fn substeps(&self, len: f64) -> usize {
        ((len / self.step) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Sampled solution `φ(t, x₀, u)` with optional fundamental matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Row-major `d×d` fundamental matrices `D(t_j)`.
    pub fundamentals: Option<Vec<Vec<f64>>>,
    pub signal: ControlSignal,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    pub fn final_fundamental(&self) -> Option<DMatrix<f64>> {
        let d = self.states[0].len();
        self.fundamentals
            .as_ref()
            .map(|f| DMatrix::from_row_slice(d, d, f.last().unwrap()))
    }
}

/// Reusable RK4 stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    d: usize,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    jac: Vec<f64>,
    dk: [Vec<f64>; 4],
    dtmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(d: usize) -> Self {
        let v = || vec![0.0; d];
        let m = || vec![0.0; d * d];
        Self { d, k: [v(), v(), v(), v()], tmp: v(), jac: m(), dk: [m(), m(), m(), m()], dtmp: m() }
    }

    pub fn step(&mut self, sys: &ControlSystem, x: &mut [f64], u: &[f64], h: f64) {
        let d = self.d;
        sys.rhs(x, u, &mut self.k[0]);
        for (stage, c) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            for i in 0..d {
                self.tmp[i] = x[i] + c * h * self.k[stage - 1][i];
            }
            let (_, rest) = self.k.split_at_mut(stage);
            sys.rhs(&self.tmp, u, &mut rest[0]);
        }
        for i in 0..d {
            x[i] += h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
    }

    pub fn step_variational(
        &mut self,
        sys: &ControlSystem,
        x: &mut [f64],
        dm: &mut [f64],
        u: &[f64],
        h: f64,
    ) {
        let d = self.d;
        sys.rhs(x, u, &mut self.k[0]);
        sys.rhs_jacobian(x, u, &mut self.jac);
        matmul(d, &self.jac, dm, &mut self.dk[0]);
        for (stage, c) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            for i in 0..d {
                self.tmp[i] = x[i] + c * h * self.k[stage - 1][i];
            }
            for i in 0..d * d {
                self.dtmp[i] = dm[i] + c * h * self.dk[stage - 1][i];
            }
            let (_, rest) = self.k.split_at_mut(stage);
            sys.rhs(&self.tmp, u, &mut rest[0]);
            sys.rhs_jacobian(&self.tmp, u, &mut self.jac);
            let (_, drest) = self.dk.split_at_mut(stage);
            matmul(d, &self.jac, &self.dtmp, &mut drest[0]);
        }
        for i in 0..d {
            x[i] += h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
        for i in 0..d * d {
            dm[i] +=
                h / 6.0 * (self.dk[0][i] + 2.0 * self.dk[1][i] + 2.0 * self.dk[2][i] + self.dk[3][i]);
        }
    }
}

fn matmul(d: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a[i * d + k] * b[k * d + j];
            }
            out[i * d + j] = s;
        }
    }
}

pub(crate) fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

/// Integrates along the canonical restriction of `u` to `[0, t]`, calling
/// `visit(t_j, x_j, D_j)` after every substep. The visitor may overwrite `D_j`,
/// which is how chunked propagation resets the running fundamental matrix.
pub(crate) fn drive<F>(
    sys: &ControlSystem,
    x0: &[f64],
    u: &ControlSignal,
    t: f64,
    opts: &IntegrationOptions,
    variational: bool,
    mut visit: F,
) -> Result<(Vec<f64>, Option<Vec<f64>>)>
where
    F: FnMut(f64, &[f64], Option<&mut [f64]>),
{
    if !(opts.step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {}", opts.step)));
    }
    if x0.len() != sys.dim() {
        return Err(Error::InvalidArgument("initial state has wrong dimension".into()));
    }
    let d = sys.dim();
    let mut x = x0.to_vec();
    let mut dm = variational.then(|| identity(d));
    if t == 0.0 {
        return Ok((x, dm));
    }
    let pieces = u.restrict(t)?;
    let guard: Option<StateBox> = opts.escape_inflation.map(|f| sys.state_box().inflated(f));
    let mut rk = Rk4::new(d);
    for (s, e, v) in pieces.pieces() {
        if v.len() != sys.inputs() {
            return Err(Error::InvalidArgument("control value has wrong dimension".into()));
        }
        let n = opts.substeps(e - s);
        let h = (e - s) / n as f64;
        for k in 1..=n {
            match dm.as_mut() {
                Some(m) => rk.step_variational(sys, &mut x, m, v, h),
                None => rk.step(sys, &mut x, v, h),
            }
            let tk = if k == n { e } else { s + k as f64 * h };
            if x.iter().any(|c| !c.is_finite())
                || dm.as_ref().map(|m| m.iter().any(|c| !c.is_finite())).unwrap_or(false)
            {
                return Err(Error::NonFinite { time: tk });
            }
            if let Some(g) = &guard {
                if !g.contains(&x) {
                    return Err(Error::StateEscaped { time: tk, state: x });
                }
            }
            visit(tk, &x, dm.as_deref_mut());
        }
    }
    Ok((x, dm))
}

fn check_start(sys: &ControlSystem, x0: &[f64], t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be non-negative, got {t}")));
    }
    if !sys.state_box().contains(x0) {
        return Err(Error::InvalidArgument(format!("initial state {x0:?} outside state box")));
    }
    Ok(())
}

/// Samples `φ(t, x₀, u)` on the breakpoint-aligned step grid over `[0, horizon]`.
pub fn integrate(
    sys: &ControlSystem,
    x0: &[f64],
    u: &ControlSignal,
    horizon: f64,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    run_sampled(sys, x0, u, horizon, opts, false)
}

/// As [`integrate`], also recording the fundamental matrices `dφ_{t,u}(x₀)`.
pub fn integrate_with_variational(
    sys: &ControlSystem,
    x0: &[f64],
    u: &ControlSignal,
    horizon: f64,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    run_sampled(sys, x0, u, horizon, opts, true)
}

fn run_sampled(
    sys: &ControlSystem,
    x0: &[f64],
    u: &ControlSignal,
    horizon: f64,
    opts: &IntegrationOptions,
    variational: bool,
) -> Result<Trajectory> {
    check_start(sys, x0, horizon)?;
    let d = sys.dim();
    let mut times = vec![0.0];
    let mut states = vec![x0.to_vec()];
    let mut fundamentals = variational.then(|| vec![identity(d)]);
    drive(sys, x0, u, horizon, opts, variational, |t, x, m| {
        times.push(t);
        states.push(x.to_vec());
        if let (Some(f), Some(m)) = (fundamentals.as_mut(), m) {
            f.push(m.to_vec());
        }
    })?;
    let signal = if horizon > 0.0 { u.restrict(horizon)? } else { ControlSignal::empty() };
    Ok(Trajectory { times, states, fundamentals, signal })
}

/// Final state `φ(t, x₀, u)` without storing samples.
pub fn flow_end(
    sys: &ControlSystem,
    x0: &[f64],
    u: &ControlSignal,
    t: f64,
    opts: &IntegrationOptions,
) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    Ok(drive(sys, x0, u, t, opts, false, |_, _, _| {})?.0)
}

/// Fundamental matrix `dφ_{t,u}(x₀)` solving `Ḋ = J(t) D`, `D(0) = I`.
pub fn variational_flow(
    sys: &ControlSystem,
    x0: &[f64],
    u: &ControlSignal,
    t: f64,
    opts: &IntegrationOptions,
) -> Result<DMatrix<f64>> {
    Ok(state_and_fundamental(sys, x0, u, t, opts)?.1)
}

/// `(φ(t, x₀, u), dφ_{t,u}(x₀))` without the start-in-box check.
pub(crate) fn state_and_fundamental(
    sys: &ControlSystem,
    x0: &[f64],
    u: &ControlSignal,
    t: f64,
    opts: &IntegrationOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    let d = sys.dim();
    let (x, m) = drive(sys, x0, u, t, opts, true, |_, _, _| {})?;
    Ok((x, DMatrix::from_row_slice(d, d, &m.unwrap())))
}

/// Final state and the fundamental matrices of consecutive chunks of `[0, t]`.
///
/// A chunk closes at the first substep reaching `chunk` time units or a
/// running norm above `1e6`; the product of the chunks (last first) is
/// `dφ_{t,u}(x₀)`. The substep grid is that of [`variational_flow`], so the
/// product agrees with it up to rounding.
pub(crate) fn fundamental_chunks(
    sys: &ControlSystem,
    x0: &[f64],
    u: &ControlSignal,
    t: f64,
    opts: &IntegrationOptions,
    chunk: f64,
) -> Result<(Vec<f64>, Vec<DMatrix<f64>>)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    let d = sys.dim();
    let mut chunks = Vec::new();
    let mut start = 0.0;
    let (x, last) = drive(sys, x0, u, t, opts, true, |tk, _, m| {
        let m = m.unwrap();
        let big = m.iter().fold(0.0f64, |a, v| a.max(v.abs())) > 1e6;
        if tk - start >= chunk - 1e-12 || big {
            chunks.push(DMatrix::from_row_slice(d, d, m));
            m.copy_from_slice(&identity(d));
            start = tk;
        }
    })?;
    let last = DMatrix::from_row_slice(d, d, &last.unwrap());
    if chunks.is_empty() || last != DMatrix::identity(d, d) {
        chunks.push(last);
    }
    Ok((x, chunks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{ControlRange, DiagLinear2d, ScalarLinear};
    use std::sync::Arc;

    fn scalar(a: f64) -> ControlSystem {
        ControlSystem::new(
            Arc::new(ScalarLinear::default()),
            vec![a],
            ControlRange::new(vec![-1.0], vec![1.0]).unwrap(),
            StateBox::new(vec![-2.0], vec![2.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_horizon_is_identity() {
        let sys = scalar(1.0);
        let u = ControlSignal::constant(vec![0.3], 1.0).unwrap();
        let tr = integrate(&sys, &[0.7], &u, 0.0, &IntegrationOptions::default()).unwrap();
        assert_eq!(tr.states, vec![vec![0.7]]);
        let d = variational_flow(&sys, &[0.7], &u, 0.0, &IntegrationOptions::default()).unwrap();
        assert_eq!(d, DMatrix::identity(1, 1));
    }

    #[test]
    fn scalar_growth_matches_exponential() {
        let sys = scalar(1.0);
        let u = ControlSignal::constant(vec![0.0], 1.0).unwrap();
        let x = flow_end(&sys, &[1.0], &u, 1.0, &IntegrationOptions::with_step(1e-2)).unwrap();
        assert!((x[0] - std::f64::consts::E).abs() < 1e-6);
    }

    #[test]
    fn equilibrium_stays_put() {
        let sys = scalar(1.0);
        let u = ControlSignal::constant(vec![-1.0], 5.0).unwrap();
        let tr = integrate(&sys, &[1.0], &u, 5.0, &IntegrationOptions::default()).unwrap();
        assert!(tr.states.iter().all(|x| (x[0] - 1.0).abs() < 1e-14));
    }

    #[test]
    fn variational_is_control_independent_for_linear() {
        let sys = scalar(1.0);
        for v in [-1.0, 0.0, 0.5] {
            let u = ControlSignal::constant(vec![v], 2.0).unwrap();
            let d = variational_flow(&sys, &[0.1], &u, 2.0, &IntegrationOptions::unbounded(1e-2))
                .unwrap();
            assert!((d[(0, 0)] - 2f64.exp()).abs() < 1e-5);
        }
    }

    #[test]
    fn decoupled_plane_fundamental_matrix() {
        let sys = ControlSystem::new(
            Arc::new(DiagLinear2d::new(vec![1.0, 0.0], 1)),
            vec![1.0, -1.0],
            ControlRange::new(vec![-1.0], vec![1.0]).unwrap(),
            StateBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap(),
        )
        .unwrap();
        let u = ControlSignal::constant(vec![0.4], 1.0).unwrap();
        let d = variational_flow(&sys, &[0.1, 0.2], &u, 1.0, &IntegrationOptions::default()).unwrap();
        let e = std::f64::consts::E;
        assert!((d[(0, 0)] - e).abs() < 1e-5);
        assert!((d[(1, 1)] - 1.0 / e).abs() < 1e-5);
        assert!(d[(0, 1)].abs() < 1e-12 && d[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn escape_is_reported() {
        let sys = scalar(1.0);
        let u = ControlSignal::constant(vec![1.0], 10.0).unwrap();
        let r = integrate(&sys, &[1.5], &u, 10.0, &IntegrationOptions::default());
        assert!(matches!(r, Err(Error::StateEscaped { .. })));
    }

    #[test]
    fn breakpoints_are_on_the_grid() {
        let sys = scalar(1.0);
        let u = ControlSignal::from_pieces(&[0.123, 0.5], vec![vec![0.0], vec![1.0]]).unwrap();
        let tr = integrate(&sys, &[0.0], &u, 0.623, &IntegrationOptions::with_step(0.05)).unwrap();
        assert!(tr.times.iter().any(|t| (t - 0.123).abs() < 1e-15));
        assert!((tr.times.last().unwrap() - 0.623).abs() < 1e-15);
    }

    #[test]
    fn chunk_product_matches_direct_flow() {
        let sys = ControlSystem::new(
            Arc::new(crate::system::Bilinear2d::default()),
            vec![1.0],
            ControlRange::new(vec![-1.0], vec![1.0]).unwrap(),
            StateBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap(),
        )
        .unwrap();
        let u = ControlSignal::from_pieces(&[0.7, 1.1, 0.4], vec![vec![1.0], vec![-0.5], vec![0.0]])
            .unwrap();
        let opts = IntegrationOptions::unbounded(1e-2);
        let direct = variational_flow(&sys, &[0.1, -0.2], &u, 2.2, &opts).unwrap();
        let (_, chunks) = fundamental_chunks(&sys, &[0.1, -0.2], &u, 2.2, &opts, 0.5).unwrap();
        assert!(chunks.len() >= 4);
        let prod = chunks.iter().fold(DMatrix::identity(2, 2), |acc, c| c * acc);
        assert!((prod - &direct).norm() <= 1e-12 * direct.norm());
    }

    #[test]
    fn fourth_order_convergence() {
        let sys = scalar(1.0);
        let u = ControlSignal::constant(vec![0.0], 1.0).unwrap();
        let err = |h: f64| {
            let x = flow_end(&sys, &[1.0], &u, 1.0, &IntegrationOptions::with_step(h)).unwrap();
            (x[0] - std::f64::consts::E).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio >= 12.0, "ratio {ratio}");
    }
}
