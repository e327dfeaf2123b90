//! Parametrized control-affine systems `ẋ = f₀(α,x) + Σ uᵢ fᵢ(α,x)`.

mod families;
mod integrate;
mod signal;
mod spec;

pub use families::{Bilinear2d, ClosureFamily, DiagLinear2d, Duffing, ScalarLinear};
pub use integrate::{
    flow_end, integrate, integrate_with_variational, variational_flow, IntegrationOptions, Rk4,
    Trajectory,
};
pub(crate) use integrate::{fundamental_chunks, state_and_fundamental};
pub use signal::ControlSignal;
pub use spec::{BoxSpec, SystemSpec};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluator for the vector fields `f₀,…,f_m` of a control-affine family.
///
/// Implementations must be deterministic and thread safe; a [`ControlSystem`]
/// shares one evaluator between all workers.
pub trait FieldFamily: Send + Sync {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn param_dim(&self) -> usize;

    /// Writes `f_i(α, x)` for `i = 0..=m` into `out`, row `i` holding `f_i`.
    fn fields(&self, alpha: &[f64], x: &[f64], out: &mut [f64]);

    /// Writes `f₀(α,x) + Σ uᵢ fᵢ(α,x)` into `out`.
    fn rhs(&self, alpha: &[f64], x: &[f64], u: &[f64], out: &mut [f64]) {
        let d = self.state_dim();
        let mut buf = vec![0.0; d * (self.input_dim() + 1)];
        self.fields(alpha, x, &mut buf);
        out.copy_from_slice(&buf[..d]);
        for (i, ui) in u.iter().enumerate() {
            for j in 0..d {
                out[j] += ui * buf[(i + 1) * d + j];
            }
        }
    }

    /// Writes the state Jacobian of the right-hand side (row-major `d×d`).
    /// Returns `false` when the family has no analytic Jacobian.
    fn rhs_jacobian(&self, _alpha: &[f64], _x: &[f64], _u: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

/// Axis-aligned compact box standing in for the state manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl StateBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidSystem("state box bounds have mismatched length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidSystem("state box requires lo < hi componentwise".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Box grown by `factor` times its width on every side.
    pub fn inflated(&self, factor: f64) -> StateBox {
        let (lo, hi) = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| {
                let w = (b - a) * factor;
                (a - w, b + w)
            })
            .unzip();
        StateBox { lo, hi }
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// Compact convex control range `U` together with the discrete letter alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRange {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub letters: Vec<Vec<f64>>,
}

impl ControlRange {
    /// Box `[lo, hi]` with the default `{lo, 0, hi}^m` lattice as alphabet.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let letters = lattice_letters(&lo, &hi);
        Self::with_letters(lo, hi, letters)
    }

    pub fn with_letters(lo: Vec<f64>, hi: Vec<f64>, letters: Vec<Vec<f64>>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidSystem("control box bounds have mismatched length".into()));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a < b) {
                return Err(Error::InvalidSystem("control box requires lo < hi".into()));
            }
            if !(*a < 0.0 && 0.0 < *b) {
                return Err(Error::InvalidSystem("0 must lie strictly inside the control box".into()));
            }
        }
        if letters.is_empty() {
            return Err(Error::InvalidSystem("letter alphabet is empty".into()));
        }
        let range = Self { lo, hi, letters };
        for l in &range.letters {
            if !range.contains(l) {
                return Err(Error::InvalidSystem(format!("letter {l:?} outside control box")));
            }
        }
        Ok(range)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.lo.len()
            && u.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *v >= *a - 1e-12 && *v <= *b + 1e-12)
    }

    pub fn letter(&self, idx: usize) -> &[f64] {
        &self.letters[idx]
    }

    pub fn num_letters(&self) -> usize {
        self.letters.len()
    }

    /// Index of the all-zero letter, if present.
    pub fn zero_letter(&self) -> Option<usize> {
        self.letters.iter().position(|l| l.iter().all(|v| *v == 0.0))
    }
}

fn lattice_letters(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let m = lo.len();
    let total = 3usize.pow(m as u32);
    (0..total)
        .map(|mut code| {
            let mut l = vec![0.0; m];
            for i in (0..m).rev() {
                l[i] = match code % 3 {
                    0 => lo[i],
                    1 => 0.0,
                    _ => hi[i],
                };
                code /= 3;
            }
            l
        })
        .collect()
}

/// A member `Σ^α` of a parametrized control-affine family on a working box.
#[derive(Clone)]
pub struct ControlSystem {
    family: Arc<dyn FieldFamily>,
    params: Vec<f64>,
    control: ControlRange,
    state_box: StateBox,
}

impl fmt::Debug for ControlSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlSystem")
            .field("family", &self.family.name())
            .field("params", &self.params)
            .field("control", &self.control)
            .field("state_box", &self.state_box)
            .finish()
    }
}

impl ControlSystem {
    pub fn new(
        family: Arc<dyn FieldFamily>,
        params: Vec<f64>,
        control: ControlRange,
        state_box: StateBox,
    ) -> Result<Self> {
        if state_box.dim() != family.state_dim() {
            return Err(Error::InvalidSystem(format!(
                "state box has dimension {} but family `{}` has {}",
                state_box.dim(),
                family.name(),
                family.state_dim()
            )));
        }
        if control.dim() != family.input_dim() {
            return Err(Error::InvalidSystem(format!(
                "control box has dimension {} but family `{}` has {} inputs",
                control.dim(),
                family.name(),
                family.input_dim()
            )));
        }
        if params.len() != family.param_dim() {
            return Err(Error::InvalidSystem(format!(
                "family `{}` expects {} parameters, got {}",
                family.name(),
                family.param_dim(),
                params.len()
            )));
        }
        Ok(Self { family, params, control, state_box })
    }

    /// Same family and ranges at another parameter value.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        Self::new(self.family.clone(), params, self.control.clone(), self.state_box.clone())
    }

    pub fn with_state_box(&self, state_box: StateBox) -> Result<Self> {
        Self::new(self.family.clone(), self.params.clone(), self.control.clone(), state_box)
    }

    pub fn with_control(&self, control: ControlRange) -> Result<Self> {
        Self::new(self.family.clone(), self.params.clone(), control, self.state_box.clone())
    }

    pub fn dim(&self) -> usize {
        self.family.state_dim()
    }

    pub fn inputs(&self) -> usize {
        self.family.input_dim()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn family_name(&self) -> &str {
        self.family.name()
    }

    pub fn control_range(&self) -> &ControlRange {
        &self.control
    }

    pub fn state_box(&self) -> &StateBox {
        &self.state_box
    }

    /// Evaluates every field `f_i(α, x)`, row `i` of the returned buffer.
    pub fn fields(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim() * (self.inputs() + 1)];
        self.family.fields(&self.params, x, &mut out);
        out
    }

    pub fn rhs(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.family.rhs(&self.params, x, u, out);
    }

    /// True when the family supplies an analytic Jacobian.
    pub fn analytic_jacobian(&self) -> bool {
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        let x = self.state_box.center();
        let u = vec![0.0; self.inputs()];
        self.family.rhs_jacobian(&self.params, &x, &u, &mut out)
    }

    /// Row-major state Jacobian of the right-hand side; central differences
    /// with `h = 1e-6·(1+‖x‖)` when the family has no analytic Jacobian.
    pub fn rhs_jacobian(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        if self.family.rhs_jacobian(&self.params, x, u, out) {
            return;
        }
        self.numeric_jacobian(x, u, out);
    }

    pub fn numeric_jacobian(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-6 * (1.0 + norm);
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; d];
        let mut fm = vec![0.0; d];
        for j in 0..d {
            xp[j] = x[j] + h;
            self.rhs(&xp, u, &mut fp);
            xp[j] = x[j] - h;
            self.rhs(&xp, u, &mut fm);
            xp[j] = x[j];
            for i in 0..d {
                out[i * d + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_letters_are_lattice() {
        let r = ControlRange::new(vec![-1.0, -2.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(r.num_letters(), 9);
        assert_eq!(r.letter(0), &[-1.0, -2.0]);
        assert_eq!(r.letter(4), &[0.0, 0.0]);
        assert_eq!(r.zero_letter(), Some(4));
    }

    #[test]
    fn control_range_requires_zero_inside() {
        assert!(ControlRange::new(vec![0.0], vec![1.0]).is_err());
        assert!(ControlRange::with_letters(vec![-1.0], vec![1.0], vec![vec![2.0]]).is_err());
    }

    #[test]
    fn inflated_box() {
        let b = StateBox::new(vec![-1.0], vec![1.0]).unwrap().inflated(0.5);
        assert_eq!(b.lo, vec![-2.0]);
        assert_eq!(b.hi, vec![2.0]);
    }
}
