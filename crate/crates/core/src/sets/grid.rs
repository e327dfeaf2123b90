//! Uniform rectangular partition of the state box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::StateBox;

/// Regular grid of `Π counts[i]` cells over a box; cells are numbered with
/// the first axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPartition {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GridPartition {
    pub fn new(state_box: &StateBox, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != state_box.dim() || counts.iter().any(|&c| c == 0) {
            return Err(Error::InvalidArgument("grid needs a positive count per axis".into()));
        }
        Ok(Self { lo: state_box.lo.clone(), hi: state_box.hi.clone(), counts })
    }

    /// `n` cells along every axis.
    pub fn uniform(state_box: &StateBox, n: usize) -> Result<Self> {
        Self::new(state_box, vec![n; state_box.dim()])
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn num_cells(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| (self.hi[i] - self.lo[i]) / self.counts[i] as f64).collect()
    }

    /// Largest cell side.
    pub fn cell_width(&self) -> f64 {
        self.widths().into_iter().fold(0.0, f64::max)
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        self.counts
            .iter()
            .map(|&c| {
                let i = idx % c;
                idx /= c;
                i
            })
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.counts).rev().fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn bounds(&self, idx: usize) -> (Vec<f64>, Vec<f64>) {
        let w = self.widths();
        let m = self.multi_index(idx);
        let lo: Vec<f64> = (0..self.dim()).map(|i| self.lo[i] + m[i] as f64 * w[i]).collect();
        let hi = (0..self.dim())
            .map(|i| if m[i] + 1 == self.counts[i] { self.hi[i] } else { lo[i] + w[i] })
            .collect();
        (lo, hi)
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let (lo, hi) = self.bounds(idx);
        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Cell containing `x`; points on an inner face belong to the upper cell.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        let mut stride = 1;
        for i in 0..self.dim() {
            if !(x[i] >= self.lo[i] && x[i] <= self.hi[i]) {
                return None;
            }
            let n = self.counts[i];
            let w = (self.hi[i] - self.lo[i]) / n as f64;
            let j = (((x[i] - self.lo[i]) / w).floor() as usize).min(n - 1);
            idx += j * stride;
            stride *= n;
        }
        Some(idx)
    }

    /// Cells whose closure meets the closed Euclidean `eps`-ball around `x`.
    pub fn cells_in_ball(&self, x: &[f64], eps: f64) -> Vec<usize> {
        let d = self.dim();
        let w = self.widths();
        let mut ranges = Vec::with_capacity(d);
        for i in 0..d {
            let a = x[i] - eps;
            let b = x[i] + eps;
            if b < self.lo[i] || a > self.hi[i] {
                return Vec::new();
            }
            let first = ((a - self.lo[i]) / w[i]).ceil() as i64 - 1;
            let last = ((b - self.lo[i]) / w[i]).floor() as i64;
            let first = first.max(0) as usize;
            let last = (last.max(0) as usize).min(self.counts[i] - 1);
            ranges.push((first, last));
        }
        let mut out = Vec::new();
        let mut multi: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let idx = self.flat_index(&multi);
            let (lo, hi) = self.bounds(idx);
            let dist2: f64 = (0..d)
                .map(|i| {
                    let c = x[i].clamp(lo[i], hi[i]);
                    (x[i] - c) * (x[i] - c)
                })
                .sum();
            if dist2 <= eps * eps {
                out.push(idx);
            }
            let mut axis = 0;
            loop {
                if axis == d {
                    out.sort_unstable();
                    return out;
                }
                if multi[axis] < ranges[axis].1 {
                    multi[axis] += 1;
                    break;
                }
                multi[axis] = ranges[axis].0;
                axis += 1;
            }
        }
    }

    /// Sample points of a cell: the center, then the `2^d` corners, then an
    /// interior lattice when more than `1 + 2^d` samples are requested.
    pub fn samples(&self, idx: usize, count: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut pts = vec![self.center(idx)];
        if count <= 1 {
            return pts;
        }
        let (lo, hi) = self.bounds(idx);
        for mask in 0..(1usize << d) {
            pts.push((0..d).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect());
        }
        let extra = count.saturating_sub(pts.len());
        if extra > 0 {
            let r = (extra as f64).powf(1.0 / d as f64).ceil() as usize;
            for code in 0..r.pow(d as u32) {
                let mut c = code;
                let p = (0..d)
                    .map(|i| {
                        let j = c % r;
                        c /= r;
                        lo[i] + (hi[i] - lo[i]) * (j as f64 + 0.5) / r as f64
                    })
                    .collect();
                pts.push(p);
            }
        }
        pts
    }

    /// Stable identifier used to tag artifacts computed on this grid.
    pub fn id(&self) -> String {
        let axes: Vec<String> = (0..self.dim())
            .map(|i| format!("[{},{}]x{}", self.lo[i], self.hi[i], self.counts[i]))
            .collect();
        axes.join("*")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> GridPartition {
        GridPartition::new(&StateBox::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap(), vec![4, 2])
            .unwrap()
    }

    #[test]
    fn index_maps_are_inverse() {
        let g = grid2();
        for i in 0..g.num_cells() {
            assert_eq!(g.flat_index(&g.multi_index(i)), i);
            assert_eq!(g.cell_of(&g.center(i)), Some(i));
        }
    }

    #[test]
    fn cells_tile_the_box() {
        let g = grid2();
        let area: f64 = (0..g.num_cells())
            .map(|i| {
                let (lo, hi) = g.bounds(i);
                (hi[0] - lo[0]) * (hi[1] - lo[1])
            })
            .sum();
        assert!((area - 4.0).abs() < 1e-12);
        assert_eq!(g.cell_of(&[2.0, 1.0]), Some(7));
        assert_eq!(g.cell_of(&[2.1, 0.0]), None);
    }

    #[test]
    fn ball_query() {
        let g = grid2();
        assert_eq!(g.cells_in_ball(&[0.25, -0.5], 0.0), vec![0]);
        assert_eq!(g.cells_in_ball(&[0.5, -0.5], 0.0), vec![0, 1]);
        assert_eq!(g.cells_in_ball(&[1.0, 0.0], 0.0), vec![1, 2, 5, 6]);
        assert_eq!(g.cells_in_ball(&[1.0, 0.0], 10.0).len(), 8);
        assert!(g.cells_in_ball(&[5.0, 0.0], 1.0).is_empty());
    }

    #[test]
    fn samples_center_and_corners() {
        let g = grid2();
        let s = g.samples(0, 5);
        assert_eq!(s.len(), 5);
        assert_eq!(s[0], vec![0.25, -0.5]);
        assert!(s.contains(&vec![0.5, 0.0]));
        assert_eq!(g.samples(0, 9).len(), 5 + 4);
    }
}
