use serde::{Deserialize, Serialize};

use crate::entropy::{SpanningFlavor, SpanningSet};
use crate::error::{Error, Result};
use crate::sets::{CellSet, GridPartition};
use crate::system::{ControlSignal, IntegrationOptions};

/// Coder-controller pair: the coder sends the symbol of the coding region
/// holding the sampled state, the controller applies that symbol's control
/// for one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoderController {
    pub tau: f64,
    pub dwell: f64,
    pub grid: GridPartition,
    pub k: CellSet,
    pub q: CellSet,
    pub q_dilation: usize,
    /// `(cell, symbol)` sorted by cell; the coding regions `K_i`.
    pub regions: Vec<(usize, usize)>,
    pub letters: Vec<Vec<f64>>,
    /// Letter sequence applied for each symbol.
    pub controls: Vec<Vec<usize>>,
    pub integration: IntegrationOptions,
}

impl CoderController {
    /// Constant alphabet size `|S_k|`.
    pub fn alphabet_size(&self) -> usize {
        self.controls.len()
    }

    /// `(1/τ) log₂ m`.
    pub fn rate_bits(&self) -> f64 {
        (self.alphabet_size() as f64).log2() / self.tau
    }

    pub fn control(&self, symbol: usize) -> ControlSignal {
        let durations = vec![self.dwell; self.controls[symbol].len()];
        let values = self.controls[symbol].iter().map(|&l| self.letters[l].clone()).collect();
        ControlSignal::from_pieces(&durations, values).expect("letter sequences have positive durations")
    }

    pub fn symbol_of_cell(&self, cell: usize) -> Option<usize> {
        self.regions.binary_search_by_key(&cell, |r| r.0).ok().map(|i| self.regions[i].1)
    }

    /// Cells whose closure holds `x`, up to rounding of the cell faces.
    fn closed_cells(&self, x: &[f64]) -> Vec<usize> {
        self.grid.cells_in_ball(x, 1e-9 * self.grid.cell_width())
    }

    /// Symbol for a sampled state. Cells are closed, so a state on a shared
    /// face is encoded by the lowest-index adjacent cell that has a region.
    pub fn encode(&self, x: &[f64]) -> Option<usize> {
        self.closed_cells(x).into_iter().find_map(|c| self.symbol_of_cell(c))
    }

    /// Whether `x` lies in the closed union of the K-cells.
    pub fn in_k(&self, x: &[f64]) -> bool {
        self.closed_cells(x).into_iter().any(|c| self.k.contains(c))
    }

    /// Keeps the first `m` symbols; cells covered only by later signals lose their region.
    pub fn truncated(&self, m: usize) -> CoderController {
        let mut cc = self.clone();
        cc.controls.truncate(m);
        cc.regions.retain(|r| r.1 < m);
        cc
    }
}

/// Coder-controller of a `(τ, K)^Q`-spanning set: the region of a cell is the
/// smallest index of a signal covering it.
pub fn build_coder_controller(spanning: &SpanningSet) -> Result<CoderController> {
    if spanning.flavor != SpanningFlavor::KqReturn {
        return Err(Error::InvalidArgument("coder-controllers need a spanning set that returns to K".into()));
    }
    let mut regions = Vec::with_capacity(spanning.k.len());
    for &c in &spanning.k.cells {
        let sym = spanning
            .covers
            .iter()
            .position(|cov| cov.binary_search(&c).is_ok())
            .ok_or_else(|| Error::InvalidArgument(format!("K-cell {c} is not covered by the spanning set")))?;
        regions.push((c, sym));
    }
    Ok(CoderController {
        tau: spanning.tau,
        dwell: spanning.dwell,
        grid: spanning.grid.clone(),
        k: spanning.k.clone(),
        q: spanning.q.clone(),
        q_dilation: spanning.q_dilation,
        regions,
        letters: spanning.letters.clone(),
        controls: spanning.sequences.clone(),
        integration: spanning.integration,
    })
}
