use serde::{Deserialize, Serialize};

use super::GridPartition;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellSetTag {
    Reachable,
    ControlSet,
    ChainControlSet,
    Custom,
}

/// Sorted set of grid cell indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellSet {
    pub cells: Vec<usize>,
    pub tag: CellSetTag,
}

impl CellSet {
    pub fn new(mut cells: Vec<usize>, tag: CellSetTag) -> Self {
        cells.sort_unstable();
        cells.dedup();
        Self { cells, tag }
    }

    pub fn all(grid: &GridPartition, tag: CellSetTag) -> Self {
        Self { cells: (0..grid.num_cells()).collect(), tag }
    }

    /// Cells whose centers lie in the box `[lo, hi]`.
    pub fn from_box(grid: &GridPartition, lo: &[f64], hi: &[f64], tag: CellSetTag) -> Self {
        let cells = (0..grid.num_cells())
            .filter(|&i| {
                let c = grid.center(i);
                c.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| v >= a && v <= b)
            })
            .collect();
        Self { cells, tag }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.cells.iter().all(|c| other.contains(*c))
    }

    pub fn intersection_len(&self, other: &CellSet) -> usize {
        self.cells.iter().filter(|c| other.contains(**c)).count()
    }

    pub fn validate(&self, grid: &GridPartition) -> Result<()> {
        match self.cells.last() {
            Some(&c) if c >= grid.num_cells() => {
                Err(Error::InvalidArgument(format!("cell {c} outside grid")))
            }
            _ => Ok(()),
        }
    }

    pub fn mask(&self, grid: &GridPartition) -> Vec<bool> {
        let mut m = vec![false; grid.num_cells()];
        for &c in &self.cells {
            m[c] = true;
        }
        m
    }

    /// Cells at most `r` steps away along each axis (Chebyshev dilation).
    pub fn dilate(&self, grid: &GridPartition, r: usize) -> CellSet {
        let mask = self.mask(grid);
        let cells = (0..grid.num_cells())
            .filter(|&i| mask[i] || neighbors(grid, i, r).any(|j| mask[j]))
            .collect();
        CellSet { cells, tag: self.tag }
    }

    /// Cells whose full Chebyshev `r`-neighborhood lies in the set; cells on
    /// the grid boundary are eroded as if the outside were empty.
    pub fn erode(&self, grid: &GridPartition, r: usize) -> CellSet {
        let mask = self.mask(grid);
        let cells = self
            .cells
            .iter()
            .copied()
            .filter(|&i| {
                let m = grid.multi_index(i);
                let interior = (0..grid.dim()).all(|a| m[a] >= r && m[a] + r < grid.counts[a]);
                interior && neighbors(grid, i, r).all(|j| mask[j])
            })
            .collect();
        CellSet { cells, tag: self.tag }
    }

    /// Cell centers as CSV rows `cell,x0,x1,...`.
    pub fn to_csv(&self, grid: &GridPartition) -> String {
        let header: Vec<String> = (0..grid.dim()).map(|i| format!("x{i}")).collect();
        let mut out = format!("cell,{}\n", header.join(","));
        for &c in &self.cells {
            let x: Vec<String> = grid.center(c).iter().map(|v| format!("{v}")).collect();
            out.push_str(&format!("{c},{}\n", x.join(",")));
        }
        out
    }
}

fn neighbors(grid: &GridPartition, idx: usize, r: usize) -> impl Iterator<Item = usize> + '_ {
    let d = grid.dim();
    let m = grid.multi_index(idx);
    let side = 2 * r + 1;
    (0..side.pow(d as u32)).filter_map(move |code| {
        let mut c = code;
        let mut multi = Vec::with_capacity(d);
        for a in 0..d {
            let off = (c % side) as i64 - r as i64;
            c /= side;
            let v = m[a] as i64 + off;
            if v < 0 || v >= grid.counts[a] as i64 {
                return None;
            }
            multi.push(v as usize);
        }
        let j = grid.flat_index(&multi);
        (j != idx).then_some(j)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::StateBox;

    #[test]
    fn dilate_and_erode_in_one_dimension() {
        let g = GridPartition::uniform(&StateBox::new(vec![0.0], vec![10.0]).unwrap(), 10).unwrap();
        let s = CellSet::new(vec![3, 4, 5, 6], CellSetTag::Custom);
        assert_eq!(s.dilate(&g, 1).cells, vec![2, 3, 4, 5, 6, 7]);
        assert_eq!(s.erode(&g, 1).cells, vec![4, 5]);
        let edge = CellSet::new(vec![0, 1, 2], CellSetTag::Custom);
        assert_eq!(edge.erode(&g, 1).cells, vec![1]);
    }

    #[test]
    fn from_box_selects_centers() {
        let g = GridPartition::uniform(&StateBox::new(vec![-1.0], vec![1.0]).unwrap(), 4).unwrap();
        let s = CellSet::from_box(&g, &[-0.5], &[0.5], CellSetTag::Custom);
        assert_eq!(s.cells, vec![1, 2]);
    }
}
