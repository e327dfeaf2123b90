//! Piecewise-constant admissible control signals.

use serde::{Deserialize, Serialize};

use super::ControlRange;
use crate::error::{Error, Result};

/// Piecewise-constant control `u(t) = v_j` on `[t_{j-1}, t_j)`.
///
/// A periodic signal is extended with period equal to its total duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>,
    periodic: bool,
}

impl Default for ControlSignal {
    fn default() -> Self {
        Self::empty()
    }
}

impl ControlSignal {
    /// The zero-duration signal, identity for [`ControlSignal::concat`].
    pub fn empty() -> Self {
        Self { breakpoints: vec![0.0], values: Vec::new(), periodic: false }
    }

    pub fn constant(value: Vec<f64>, duration: f64) -> Result<Self> {
        Self::from_pieces(&[duration], vec![value])
    }

    pub fn from_pieces(durations: &[f64], values: Vec<Vec<f64>>) -> Result<Self> {
        if durations.len() != values.len() {
            return Err(Error::InvalidArgument("durations and values differ in length".into()));
        }
        let mut breakpoints = Vec::with_capacity(durations.len() + 1);
        breakpoints.push(0.0);
        let mut t = 0.0;
        for d in durations {
            if !(*d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidArgument(format!("non-positive piece duration {d}")));
            }
            t += d;
            breakpoints.push(t);
        }
        Ok(Self { breakpoints, values, periodic: false })
    }

    /// Signal applying `letters[j]` of the alphabet for `dwell` each.
    pub fn from_letters(range: &ControlRange, letters: &[usize], dwell: f64) -> Result<Self> {
        let durations = vec![dwell; letters.len()];
        let values = letters.iter().map(|&l| range.letter(l).to_vec()).collect();
        Self::from_pieces(&durations, values)
    }

    /// Marks the signal periodic with period equal to its duration.
    pub fn into_periodic(mut self) -> Result<Self> {
        if self.values.is_empty() {
            return Err(Error::InvalidArgument("empty signal cannot be periodic".into()));
        }
        self.periodic = true;
        Ok(self)
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn period(&self) -> Option<f64> {
        self.periodic.then(|| self.duration())
    }

    pub fn duration(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_pieces(&self) -> usize {
        self.values.len()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Iterator over `(start, end, value)` of the stored pieces.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, &[f64])> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(j, v)| (self.breakpoints[j], self.breakpoints[j + 1], v.as_slice()))
    }

    pub fn validate(&self, range: &ControlRange) -> Result<()> {
        for v in &self.values {
            if !range.contains(v) {
                return Err(Error::InvalidArgument(format!("control value {v:?} outside U")));
            }
        }
        Ok(())
    }

    /// Value at time `t`; periodic signals wrap, finite ones are defined on `[0, T]`.
    pub fn value_at(&self, t: f64) -> Result<&[f64]> {
        if self.values.is_empty() || t < 0.0 {
            return Err(Error::DomainError(format!("t = {t} outside signal domain")));
        }
        let total = self.duration();
        let s = if self.periodic {
            t.rem_euclid(total)
        } else if t <= total {
            t
        } else {
            return Err(Error::DomainError(format!("t = {t} beyond duration {total}")));
        };
        let j = match self.breakpoints.binary_search_by(|b| b.partial_cmp(&s).unwrap()) {
            Ok(j) => j.min(self.values.len() - 1),
            Err(j) => j - 1,
        };
        Ok(&self.values[j])
    }

    /// Concatenation `u₁u₂`: `u₁` on `[0, τ₁]`, then `u₂(· − τ₁)`.
    pub fn concat(&self, other: &ControlSignal) -> ControlSignal {
        let offset = self.duration();
        let mut breakpoints = self.breakpoints.clone();
        breakpoints.extend(other.breakpoints[1..].iter().map(|b| b + offset));
        let mut values = self.values.clone();
        values.extend(other.values.iter().cloned());
        ControlSignal { breakpoints, values, periodic: false }
    }

    /// `uⁿ`, the `n`-fold concatenation.
    pub fn repeat(&self, n: usize) -> ControlSignal {
        let mut out = ControlSignal::empty();
        for _ in 0..n {
            out = out.concat(self);
        }
        out
    }

    /// Shift `θ_t u = u(t + ·)`.
    pub fn shift(&self, t: f64) -> Result<ControlSignal> {
        if t < 0.0 {
            return Err(Error::DomainError(format!("negative shift {t}")));
        }
        let total = self.duration();
        if self.periodic {
            let s = t.rem_euclid(total);
            if s == 0.0 {
                return Ok(self.clone());
            }
            let tail = self.restrict_raw(s, total);
            let head = self.restrict_raw(0.0, s);
            let mut out = tail.concat(&head);
            out.periodic = true;
            return Ok(out);
        }
        if t > total {
            return Err(Error::DomainError(format!("shift {t} beyond duration {total}")));
        }
        Ok(self.restrict_raw(t, total))
    }

    /// Pieces of the signal on `[a, b]` re-based to start at 0 (`0 ≤ a ≤ b ≤ T`).
    fn restrict_raw(&self, a: f64, b: f64) -> ControlSignal {
        let mut breakpoints = vec![0.0];
        let mut values = Vec::new();
        for (s, e, v) in self.pieces() {
            let lo = s.max(a);
            let hi = e.min(b);
            if hi > lo {
                breakpoints.push(hi - a);
                values.push(v.to_vec());
            }
        }
        ControlSignal { breakpoints, values, periodic: false }
    }

    /// Canonical pieces of `u|[0, t]`: equal adjacent values merged.
    ///
    /// Two signals agreeing on `[0, t]` have identical restrictions, which
    /// makes integration over `[0, t]` depend on `u|[0, t]` only.
    pub fn restrict(&self, t: f64) -> Result<ControlSignal> {
        if t < 0.0 {
            return Err(Error::DomainError(format!("negative restriction time {t}")));
        }
        if t == 0.0 {
            return Ok(ControlSignal::empty());
        }
        let total = self.duration();
        let raw = if self.periodic {
            let reps = (t / total).ceil() as usize;
            let mut tiled = self.clone();
            tiled.periodic = false;
            tiled.repeat(reps.max(1)).restrict_raw(0.0, t)
        } else if t <= total * (1.0 + 1e-12) {
            self.restrict_raw(0.0, t.min(total))
        } else {
            return Err(Error::DomainError(format!("t = {t} beyond duration {total}")));
        };
        Ok(raw.merged())
    }

    /// Finite signal holding its last value until `t`; periodic signals are tiled.
    pub fn extended(&self, t: f64) -> Result<ControlSignal> {
        if self.periodic || t <= self.duration() {
            return self.restrict(t);
        }
        let last = self
            .values
            .last()
            .ok_or_else(|| Error::DomainError("cannot extend the empty signal".into()))?
            .clone();
        let tail = ControlSignal::constant(last, t - self.duration())?;
        Ok(self.concat(&tail).merged())
    }

    fn merged(self) -> ControlSignal {
        let mut breakpoints = vec![0.0];
        let mut values: Vec<Vec<f64>> = Vec::new();
        for (_, e, v) in self.pieces() {
            if values.last().map(|l| l.as_slice() == v).unwrap_or(false) {
                *breakpoints.last_mut().unwrap() = e;
            } else {
                values.push(v.to_vec());
                breakpoints.push(e);
            }
        }
        ControlSignal { breakpoints, values, periodic: self.periodic }
    }

    /// Samplewise equality on a uniform probe grid over `[0, t]`.
    pub fn agrees_with(&self, other: &ControlSignal, t: f64, probes: usize) -> bool {
        (0..probes).all(|i| {
            let s = t * (i as f64 + 0.5) / probes as f64;
            match (self.value_at(s), other.value_at(s)) {
                (Ok(a), Ok(b)) => a == b,
                _ => false,
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_piece() -> ControlSignal {
        ControlSignal::from_pieces(&[0.5, 1.0], vec![vec![1.0], vec![-1.0]]).unwrap()
    }

    #[test]
    fn concat_with_empty_is_identity() {
        let u = two_piece();
        assert_eq!(u.concat(&ControlSignal::empty()), u);
        assert_eq!(ControlSignal::empty().concat(&u), u);
    }

    #[test]
    fn concat_semantics() {
        let u = two_piece();
        let v = ControlSignal::constant(vec![0.0], 2.0).unwrap();
        let uv = u.concat(&v);
        assert_eq!(uv.duration(), 3.5);
        assert_eq!(uv.value_at(0.2).unwrap(), &[1.0]);
        assert_eq!(uv.value_at(1.0).unwrap(), &[-1.0]);
        assert_eq!(uv.value_at(2.0).unwrap(), &[0.0]);
    }

    #[test]
    fn repeat_tiles_values() {
        let u = two_piece();
        let r = u.repeat(3);
        assert!((r.duration() - 4.5).abs() < 1e-15);
        for k in 0..3 {
            let base = 1.5 * k as f64;
            assert_eq!(r.value_at(base + 0.25).unwrap(), &[1.0]);
            assert_eq!(r.value_at(base + 1.0).unwrap(), &[-1.0]);
        }
    }

    #[test]
    fn shift_by_period_is_identity() {
        let u = two_piece().into_periodic().unwrap();
        let s = u.shift(1.5).unwrap();
        assert!(s.agrees_with(&u, 6.0, 600));
        let half = u.shift(0.5).unwrap();
        assert_eq!(half.value_at(0.1).unwrap(), &[-1.0]);
        assert_eq!(half.value_at(1.1).unwrap(), &[1.0]);
    }

    #[test]
    fn shift_beyond_domain_fails() {
        assert!(matches!(two_piece().shift(2.0), Err(Error::DomainError(_))));
        let s = two_piece().shift(0.75).unwrap();
        assert_eq!(s.duration(), 0.75);
        assert_eq!(s.value_at(0.1).unwrap(), &[-1.0]);
    }

    #[test]
    fn restrict_merges_equal_pieces() {
        let a = ControlSignal::from_pieces(&[1.0, 1.0, 1.0], vec![vec![1.0], vec![1.0], vec![0.0]])
            .unwrap();
        let b = ControlSignal::from_pieces(&[2.0, 5.0], vec![vec![1.0], vec![0.0]]).unwrap();
        assert_eq!(a.restrict(2.5).unwrap(), b.restrict(2.5).unwrap());
    }

    #[test]
    fn extended_holds_last_value() {
        let e = two_piece().extended(4.0).unwrap();
        assert_eq!(e.duration(), 4.0);
        assert_eq!(e.value_at(3.9).unwrap(), &[-1.0]);
        assert_eq!(e.num_pieces(), 2);
    }
}
