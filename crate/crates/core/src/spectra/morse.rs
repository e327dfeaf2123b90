//! Morse spectrum of a cocycle over a graph component as a cycle-ratio interval.

use serde::{Deserialize, Serialize};

use super::cycle_ratio::{max_cycle_ratio_howard, min_cycle_ratio_howard, CycleWitness, RatioEdge, RatioGraph};
use crate::error::{Error, Result};
use crate::sets::{CellSet, Edge, TransitionGraph, WeightKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    FloquetSampling,
    CycleRatio,
}

/// A periodic chain in the graph: cells visited and letters applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessCycle {
    pub cells: Vec<usize>,
    pub letters: Vec<usize>,
    pub weight: f64,
    pub duration: f64,
    pub ratio: f64,
}

/// Interval summary `[lo, hi]` of a spectrum in nats per unit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub lo: f64,
    pub hi: f64,
    pub method: SpectrumMethod,
    pub weight: WeightKind,
    pub epsilon: f64,
    pub dwell: f64,
    pub grid_id: String,
    /// Witnesses realizing `lo` and `hi`, in that order.
    pub witnesses: Vec<WitnessCycle>,
}

fn component_ratio_graph(
    graph: &TransitionGraph,
    component: &CellSet,
    kind: WeightKind,
) -> Result<(RatioGraph, Vec<Edge>, Vec<usize>)> {
    if !graph.has_weights() {
        return Err(Error::InvalidArgument("graph was built without cocycle weights".into()));
    }
    if let WeightKind::Gamma { k } = kind {
        if k > graph.grid.dim() {
            return Err(Error::InvalidDim { k, dim: graph.grid.dim() });
        }
    }
    component.validate(&graph.grid)?;
    let cells = component.cells.clone();
    let local = |c: usize| cells.binary_search(&c).ok();
    let mut edges = Vec::new();
    let mut orig = Vec::new();
    for (i, &c) in cells.iter().enumerate() {
        for e in graph.out_edges(c) {
            if let Some(j) = local(e.to) {
                edges.push(RatioEdge { from: i, to: j, weight: graph.weight(e, kind), duration: graph.dwell });
                orig.push(*e);
            }
        }
    }
    Ok((RatioGraph::new(cells.len(), edges)?, orig, cells))
}

fn to_witness(w: &CycleWitness, orig: &[Edge]) -> WitnessCycle {
    WitnessCycle {
        cells: w.edges.iter().map(|&e| orig[e].from).collect(),
        letters: w.edges.iter().map(|&e| orig[e].letter).collect(),
        weight: w.weight,
        duration: w.duration,
        ratio: w.ratio,
    }
}

/// Morse spectrum bounds of `kind` over `component`: minimum and maximum
/// cycle ratio of the component's subgraph.
pub fn morse_spectrum_bounds(
    graph: &TransitionGraph,
    component: &CellSet,
    kind: WeightKind,
) -> Result<SpectrumEstimate> {
    let (rg, orig, _) = component_ratio_graph(graph, component, kind)?;
    let lo = min_cycle_ratio_howard(&rg)?;
    let hi = max_cycle_ratio_howard(&rg)?;
    Ok(SpectrumEstimate {
        lo: lo.ratio,
        hi: hi.ratio,
        method: SpectrumMethod::CycleRatio,
        weight: kind,
        epsilon: graph.epsilon,
        dwell: graph.dwell,
        grid_id: graph.grid.id(),
        witnesses: vec![to_witness(&lo, &orig), to_witness(&hi, &orig)],
    })
}

impl SpectrumEstimate {
    /// Re-evaluates the witness cycles on `graph`, in the canonical summation order.
    pub fn replay(&self, graph: &TransitionGraph) -> Result<Vec<f64>> {
        self.witnesses
            .iter()
            .map(|w| {
                let mut weight = 0.0;
                let mut duration = 0.0;
                for (i, (&c, &l)) in w.cells.iter().zip(&w.letters).enumerate() {
                    let to = w.cells[(i + 1) % w.cells.len()];
                    let e = Edge { from: c, to, letter: l };
                    if !graph.out_edges(c).contains(&e) {
                        return Err(Error::InvalidArgument(format!("witness edge {e:?} missing")));
                    }
                    weight += graph.weight(&e, self.weight);
                    duration += graph.dwell;
                }
                Ok(weight / duration)
            })
            .collect()
    }
}
