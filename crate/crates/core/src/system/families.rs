//! Closed-form builtin field families.

use std::fmt;
use std::sync::Arc;

use super::FieldFamily;

/// `ẋ = a·x + b·u` with parameter `α = [a]`.
#[derive(Debug, Clone)]
pub struct ScalarLinear {
    pub b: f64,
}

impl Default for ScalarLinear {
    fn default() -> Self {
        Self { b: 1.0 }
    }
}

impl FieldFamily for ScalarLinear {
    fn name(&self) -> &str {
        "scalar_linear"
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn fields(&self, alpha: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = alpha[0] * x[0];
        out[1] = self.b;
    }
    fn rhs(&self, alpha: &[f64], x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = alpha[0] * x[0] + self.b * u[0];
    }
    fn rhs_jacobian(&self, alpha: &[f64], _x: &[f64], _u: &[f64], out: &mut [f64]) -> bool {
        out[0] = alpha[0];
        true
    }
}

/// `ẋᵢ = aᵢ·xᵢ + (B u)ᵢ` on the plane, `α = [a₁, a₂]`, `B` a `2×m` input matrix.
#[derive(Debug, Clone)]
pub struct DiagLinear2d {
    /// Row-major `2×m`.
    pub input_matrix: Vec<f64>,
    pub inputs: usize,
}

impl Default for DiagLinear2d {
    fn default() -> Self {
        Self { input_matrix: vec![1.0, 0.0, 0.0, 1.0], inputs: 2 }
    }
}

impl DiagLinear2d {
    pub fn new(input_matrix: Vec<f64>, inputs: usize) -> Self {
        assert_eq!(input_matrix.len(), 2 * inputs);
        Self { input_matrix, inputs }
    }
}

impl FieldFamily for DiagLinear2d {
    fn name(&self) -> &str {
        "diag_linear_2d"
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        self.inputs
    }
    fn param_dim(&self) -> usize {
        2
    }
    fn fields(&self, alpha: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = alpha[0] * x[0];
        out[1] = alpha[1] * x[1];
        for j in 0..self.inputs {
            out[2 * (j + 1)] = self.input_matrix[j];
            out[2 * (j + 1) + 1] = self.input_matrix[self.inputs + j];
        }
    }
    fn rhs(&self, alpha: &[f64], x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = alpha[0] * x[0];
        out[1] = alpha[1] * x[1];
        for (j, uj) in u.iter().enumerate() {
            out[0] += self.input_matrix[j] * uj;
            out[1] += self.input_matrix[self.inputs + j] * uj;
        }
    }
    fn rhs_jacobian(&self, alpha: &[f64], _x: &[f64], _u: &[f64], out: &mut [f64]) -> bool {
        out.copy_from_slice(&[alpha[0], 0.0, 0.0, alpha[1]]);
        true
    }
}

/// `ẋ = s·A x + u (B x + c)`, single input, `α = [s]`.
#[derive(Debug, Clone)]
pub struct Bilinear2d {
    pub a: [f64; 4],
    pub b: [f64; 4],
    pub c: [f64; 2],
}

impl Default for Bilinear2d {
    fn default() -> Self {
        Self { a: [1.0, 0.5, 0.0, -1.0], b: [0.2, 0.0, 0.0, -0.2], c: [1.0, 1.0] }
    }
}

impl FieldFamily for Bilinear2d {
    fn name(&self) -> &str {
        "bilinear_2d"
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn fields(&self, alpha: &[f64], x: &[f64], out: &mut [f64]) {
        let s = alpha[0];
        out[0] = s * (self.a[0] * x[0] + self.a[1] * x[1]);
        out[1] = s * (self.a[2] * x[0] + self.a[3] * x[1]);
        out[2] = self.b[0] * x[0] + self.b[1] * x[1] + self.c[0];
        out[3] = self.b[2] * x[0] + self.b[3] * x[1] + self.c[1];
    }
    fn rhs(&self, alpha: &[f64], x: &[f64], u: &[f64], out: &mut [f64]) {
        let s = alpha[0];
        let u = u[0];
        out[0] = s * (self.a[0] * x[0] + self.a[1] * x[1])
            + u * (self.b[0] * x[0] + self.b[1] * x[1] + self.c[0]);
        out[1] = s * (self.a[2] * x[0] + self.a[3] * x[1])
            + u * (self.b[2] * x[0] + self.b[3] * x[1] + self.c[1]);
    }
    fn rhs_jacobian(&self, alpha: &[f64], _x: &[f64], u: &[f64], out: &mut [f64]) -> bool {
        let s = alpha[0];
        for i in 0..4 {
            out[i] = s * self.a[i] + u[0] * self.b[i];
        }
        true
    }
}

/// Overdamped controlled Duffing field `ẋ = p₀x − p₁x³ + p₂u`, `α = [p₀, p₁, p₂]`.
///
/// With `α = [1, 1, 0.05]` this is the bistable example.
#[derive(Debug, Clone, Default)]
pub struct Duffing;

impl FieldFamily for Duffing {
    fn name(&self) -> &str {
        "duffing_controlled"
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn param_dim(&self) -> usize {
        3
    }
    fn fields(&self, alpha: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = alpha[0] * x[0] - alpha[1] * x[0] * x[0] * x[0];
        out[1] = alpha[2];
    }
    fn rhs(&self, alpha: &[f64], x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = alpha[0] * x[0] - alpha[1] * x[0] * x[0] * x[0] + alpha[2] * u[0];
    }
    fn rhs_jacobian(&self, alpha: &[f64], x: &[f64], _u: &[f64], out: &mut [f64]) -> bool {
        out[0] = alpha[0] - 3.0 * alpha[1] * x[0] * x[0];
        true
    }
}

type FieldsFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// Family defined by a closure writing all fields; no analytic Jacobian.
#[derive(Clone)]
pub struct ClosureFamily {
    name: String,
    dim: usize,
    inputs: usize,
    params: usize,
    f: Arc<FieldsFn>,
}

impl ClosureFamily {
    pub fn new<F>(name: &str, dim: usize, inputs: usize, params: usize, f: F) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self { name: name.to_string(), dim, inputs, params, f: Arc::new(f) }
    }
}

impl fmt::Debug for ClosureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClosureFamily({})", self.name)
    }
}

impl FieldFamily for ClosureFamily {
    fn name(&self) -> &str {
        &self.name
    }
    fn state_dim(&self) -> usize {
        self.dim
    }
    fn input_dim(&self) -> usize {
        self.inputs
    }
    fn param_dim(&self) -> usize {
        self.params
    }
    fn fields(&self, alpha: &[f64], x: &[f64], out: &mut [f64]) {
        (self.f)(alpha, x, out)
    }
}
