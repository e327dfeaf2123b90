//! Finite transition-graph abstraction of the control flow.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{CellSet, CellSetTag, GridPartition};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::spectra::{edge_weights, CocycleOptions, EdgeWeights};
use crate::system::{flow_end, ControlSignal, ControlSystem, IntegrationOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub letter: usize,
}

/// Which cocycle supplies the edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "cocycle")]
pub enum WeightKind {
    Gamma { k: usize },
    Kappa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphOptions {
    /// Sample points per cell; `None` means center plus corners.
    pub samples_per_cell: Option<usize>,
    pub integration: IntegrationOptions,
    pub cocycle: CocycleOptions,
    pub weights: bool,
    pub execution: Execution,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            samples_per_cell: None,
            integration: IntegrationOptions::default(),
            cocycle: CocycleOptions::default(),
            weights: true,
            execution: Execution::Parallel,
        }
    }
}

/// Nodes are grid cells; an edge `i → j` labelled `ℓ` means some sample of
/// cell `i` is carried by letter `ℓ` within `epsilon` of cell `j` after `dwell`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionGraph {
    pub grid: GridPartition,
    pub dwell: f64,
    pub epsilon: f64,
    pub letters: Vec<Vec<f64>>,
    pub samples_per_cell: usize,
    /// Sorted by `(from, letter, to)`.
    pub edges: Vec<Edge>,
    offsets: Vec<usize>,
    /// Cocycle weights per `(cell, letter)`, row `cell * L + letter`; empty when disabled.
    pub weights: Vec<EdgeWeights>,
    /// Sample images dropped for leaving the grid or the escape box.
    pub boundary_loss: usize,
    /// `(cell, letter)` pairs whose sample images spread over more than two
    /// cells along some axis, so the samples may miss targets.
    pub undersampled: usize,
    pub numeric_jacobian: bool,
}

struct CellResult {
    edges: Vec<Edge>,
    weights: Vec<EdgeWeights>,
    loss: usize,
    undersampled: usize,
}

/// Builds the transition graph of `sys` on `grid` for one dwell time.
pub fn build_transition_graph(
    sys: &ControlSystem,
    grid: &GridPartition,
    dwell: f64,
    epsilon: f64,
    opts: &GraphOptions,
) -> Result<TransitionGraph> {
    if !(dwell > 0.0) {
        return Err(Error::InvalidArgument(format!("dwell must be positive, got {dwell}")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be non-negative, got {epsilon}")));
    }
    if grid.dim() != sys.dim() || grid.num_cells() == 0 {
        return Err(Error::InvalidArgument("grid does not match the system".into()));
    }
    let d = grid.dim();
    let samples = opts.samples_per_cell.unwrap_or(1 + (1 << d));
    let letters = sys.control_range().letters.clone();
    let signals: Vec<ControlSignal> = letters
        .iter()
        .map(|l| ControlSignal::constant(l.clone(), dwell))
        .collect::<Result<_>>()?;
    let widths = grid.widths();

    let per_cell = par::map_range(opts.execution, grid.num_cells(), |cell| -> Result<CellResult> {
        let pts = grid.samples(cell, samples);
        let mut res = CellResult { edges: Vec::new(), weights: Vec::new(), loss: 0, undersampled: 0 };
        for (li, u) in signals.iter().enumerate() {
            let mut targets = Vec::new();
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for p in &pts {
                match flow_end(sys, p, u, dwell, &opts.integration) {
                    Ok(y) => {
                        let t = grid.cells_in_ball(&y, epsilon);
                        if t.is_empty() {
                            res.loss += 1;
                        } else {
                            for a in 0..d {
                                lo[a] = lo[a].min(y[a]);
                                hi[a] = hi[a].max(y[a]);
                            }
                        }
                        targets.extend(t);
                    }
                    Err(Error::StateEscaped { .. }) | Err(Error::NonFinite { .. }) => res.loss += 1,
                    Err(e) => return Err(e),
                }
            }
            if (0..d).any(|a| hi[a] - lo[a] > 2.0 * widths[a]) {
                res.undersampled += 1;
            }
            targets.sort_unstable();
            targets.dedup();
            res.edges.extend(targets.into_iter().map(|to| Edge { from: cell, to, letter: li }));
            if opts.weights {
                let center = grid.center(cell);
                res.weights.push(edge_weights(sys, &center, &letters[li], dwell, &opts.cocycle)?);
            }
        }
        Ok(res)
    });

    let mut edges = Vec::new();
    let mut weights = Vec::new();
    let mut offsets = Vec::with_capacity(grid.num_cells() + 1);
    let (mut loss, mut under) = (0, 0);
    for r in per_cell {
        let r = r?;
        offsets.push(edges.len());
        edges.extend(r.edges);
        weights.extend(r.weights);
        loss += r.loss;
        under += r.undersampled;
    }
    offsets.push(edges.len());
    if loss > 0 {
        log::debug!("transition graph: {loss} sample images dropped at the boundary");
    }
    if under > 0 {
        log::warn!("transition graph: {under} (cell, letter) pairs may be undersampled");
    }
    Ok(TransitionGraph {
        grid: grid.clone(),
        dwell,
        epsilon,
        letters,
        samples_per_cell: samples,
        edges,
        offsets,
        weights,
        boundary_loss: loss,
        undersampled: under,
        numeric_jacobian: !sys.analytic_jacobian(),
    })
}

impl TransitionGraph {
    /// Graph from explicit edges with constant duration; weights are
    /// supplied per `(cell, letter)`.
    pub fn from_edges(
        grid: GridPartition,
        dwell: f64,
        epsilon: f64,
        letters: Vec<Vec<f64>>,
        mut edges: Vec<Edge>,
        weights: Vec<EdgeWeights>,
    ) -> Result<Self> {
        let n = grid.num_cells();
        if edges.iter().any(|e| e.from >= n || e.to >= n || e.letter >= letters.len()) {
            return Err(Error::InvalidArgument("edge refers to a missing cell or letter".into()));
        }
        if !weights.is_empty() && weights.len() != n * letters.len() {
            return Err(Error::InvalidArgument("one weight row per (cell, letter) required".into()));
        }
        edges.sort_by_key(|e| (e.from, e.letter, e.to));
        edges.dedup();
        let mut offsets = vec![0; n + 1];
        for e in &edges {
            offsets[e.from + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Ok(Self {
            grid,
            dwell,
            epsilon,
            letters,
            samples_per_cell: 1,
            edges,
            offsets,
            weights,
            boundary_loss: 0,
            undersampled: 0,
            numeric_jacobian: false,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.grid.num_cells()
    }

    pub fn num_letters(&self) -> usize {
        self.letters.len()
    }

    pub fn out_edges(&self, cell: usize) -> &[Edge] {
        &self.edges[self.offsets[cell]..self.offsets[cell + 1]]
    }

    /// Distinct successor cells.
    pub fn successors(&self, cell: usize) -> Vec<usize> {
        let mut s: Vec<usize> = self.out_edges(cell).iter().map(|e| e.to).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn has_weights(&self) -> bool {
        !self.weights.is_empty()
    }

    pub fn weight(&self, e: &Edge, kind: WeightKind) -> f64 {
        let w = &self.weights[e.from * self.letters.len() + e.letter];
        match kind {
            WeightKind::Gamma { k } => w.gamma[k],
            WeightKind::Kappa => w.kappa,
        }
    }

    /// Forward closure of `start` within `max_hops` edges (`None` = unbounded).
    pub fn reachable_set(&self, start: &CellSet, max_hops: Option<usize>) -> Result<CellSet> {
        if start.is_empty() {
            return Err(Error::EmptyInput("reachable_set needs a nonempty start".into()));
        }
        start.validate(&self.grid)?;
        let mut seen = vec![false; self.num_nodes()];
        let mut queue = VecDeque::new();
        for &c in &start.cells {
            seen[c] = true;
            queue.push_back((c, 0usize));
        }
        while let Some((c, h)) = queue.pop_front() {
            if max_hops.map(|m| h >= m).unwrap_or(false) {
                continue;
            }
            for e in self.out_edges(c) {
                if !seen[e.to] {
                    seen[e.to] = true;
                    queue.push_back((e.to, h + 1));
                }
            }
        }
        let cells = (0..seen.len()).filter(|&i| seen[i]).collect();
        Ok(CellSet::new(cells, CellSetTag::Reachable))
    }

    /// Compact JSON: grid, `cells` and `edges` as `[from, to, letter]` triples.
    pub fn to_compact_json(&self) -> serde_json::Value {
        let edges: Vec<[usize; 3]> = self.edges.iter().map(|e| [e.from, e.to, e.letter]).collect();
        serde_json::json!({
            "grid": self.grid,
            "dwell": self.dwell,
            "epsilon": self.epsilon,
            "letters": self.letters,
            "cells": (0..self.num_nodes()).collect::<Vec<_>>(),
            "edges": edges,
            "boundary_loss": self.boundary_loss,
            "undersampled": self.undersampled,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{ControlRange, ScalarLinear, StateBox};
    use std::sync::Arc;

    fn scalar(a: f64, lo: f64, hi: f64) -> ControlSystem {
        ControlSystem::new(
            Arc::new(ScalarLinear::default()),
            vec![a],
            ControlRange::new(vec![-1.0], vec![1.0]).unwrap(),
            StateBox::new(vec![lo], vec![hi]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn one_cell_self_loops() {
        let sys = scalar(-1.0, -2.0, 2.0);
        let grid = GridPartition::uniform(sys.state_box(), 1).unwrap();
        let g = build_transition_graph(&sys, &grid, 0.1, 0.0, &GraphOptions::default()).unwrap();
        assert_eq!(g.edges.len(), 3);
        assert!(g.edges.iter().all(|e| e.from == 0 && e.to == 0));
    }

    #[test]
    fn closed_form_target() {
        let sys = scalar(1.0, -2.0, 2.0);
        let grid = GridPartition::uniform(sys.state_box(), 400).unwrap();
        let opts = GraphOptions { samples_per_cell: Some(1), weights: false, ..Default::default() };
        let g = build_transition_graph(&sys, &grid, 0.1, 0.0, &opts).unwrap();
        let c0 = grid.cell_of(&[0.0]).unwrap();
        let x0 = grid.center(c0)[0];
        let expected = (x0 + 1.0) * 0.1f64.exp() - 1.0;
        let t: Vec<usize> = g.out_edges(c0).iter().filter(|e| e.letter == 2).map(|e| e.to).collect();
        assert_eq!(t, vec![grid.cell_of(&[expected]).unwrap()]);
        assert!((expected - 0.105).abs() < 0.01);
    }

    #[test]
    fn saturating_epsilon_gives_complete_graph() {
        let sys = scalar(1.0, -2.0, 2.0);
        let grid = GridPartition::uniform(sys.state_box(), 8).unwrap();
        let opts = GraphOptions { weights: false, ..Default::default() };
        let g = build_transition_graph(&sys, &grid, 0.1, 10.0, &opts).unwrap();
        for c in 0..8 {
            assert_eq!(g.successors(c), (0..8).collect::<Vec<_>>());
        }
    }

    #[test]
    fn reachable_from_origin_stays_in_unit_interval() {
        let sys = scalar(-1.0, -2.0, 2.0);
        let grid = GridPartition::uniform(sys.state_box(), 200).unwrap();
        let opts = GraphOptions { weights: false, ..Default::default() };
        let g = build_transition_graph(&sys, &grid, 0.05, 0.0, &opts).unwrap();
        let start = CellSet::new(vec![grid.cell_of(&[0.0]).unwrap()], CellSetTag::Custom);
        assert_eq!(g.reachable_set(&start, Some(0)).unwrap().cells, start.cells);
        let r = g.reachable_set(&start, None).unwrap();
        let h = grid.cell_width();
        for c in &r.cells {
            assert!(grid.center(*c)[0].abs() <= 1.0 + h);
        }
        assert!(r.len() >= 100);
        let all = CellSet::all(&grid, CellSetTag::Custom);
        assert_eq!(g.reachable_set(&all, None).unwrap().cells, all.cells);
    }

    #[test]
    fn parallel_and_sequential_graphs_agree() {
        let sys = scalar(1.0, -2.0, 2.0);
        let grid = GridPartition::uniform(sys.state_box(), 64).unwrap();
        let p = build_transition_graph(&sys, &grid, 0.1, 0.0, &GraphOptions::default()).unwrap();
        let opts = GraphOptions { execution: Execution::Sequential, ..Default::default() };
        let s = build_transition_graph(&sys, &grid, 0.1, 0.0, &opts).unwrap();
        assert_eq!(p, s);
    }
}
