//! End-to-end stages shared by the command line and the parameter sweep:
//! sets, spectral entropy and spanning entropy of one system.

use serde::{Deserialize, Serialize};

use crate::entropy::{
    build_spanning_set, entropy_from_spanning_sets, h_inv_spectral, EntropyEstimate, SpanningOptions, SpanningSet,
};
use crate::error::{Error, Result};
use crate::sets::{
    build_transition_graph, chain_control_sets, control_sets, default_chain_epsilon, match_by_overlap, CellSet,
    CellSetTag, ComponentOptions, GraphOptions, GridPartition, TransitionGraph, WeightKind,
};
use crate::spectra::{component_splitting, morse_spectrum_bounds, HyperbolicSplittingEstimate, SplittingOptions, SpectrumEstimate};
use crate::system::ControlSystem;

/// Which control set a run works with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum ComponentSelector {
    /// Most cells; ties to the lower index.
    Largest,
    /// The set whose cells contain the point.
    Containing { point: Vec<f64> },
    Index { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    /// Cells per axis; one entry is used for every axis.
    pub resolution: Vec<usize>,
    pub dwell: f64,
    /// Fattening of the control-set graph.
    pub control_epsilon: f64,
    /// Fattening of the chain graph; `None` gives 1.5 cell diagonals.
    pub chain_epsilon: Option<f64>,
    pub graph: GraphOptions,
    pub components: ComponentOptions,
    pub splitting: SplittingOptions,
    pub selector: ComponentSelector,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            resolution: vec![400],
            dwell: 0.05,
            control_epsilon: 0.0,
            chain_epsilon: None,
            graph: GraphOptions::default(),
            components: ComponentOptions::default(),
            splitting: SplittingOptions::default(),
            selector: ComponentSelector::Largest,
        }
    }
}

impl PipelineOptions {
    pub fn grid(&self, sys: &ControlSystem) -> Result<GridPartition> {
        let counts = match self.resolution.len() {
            1 => vec![self.resolution[0]; sys.dim()],
            n if n == sys.dim() => self.resolution.clone(),
            n => return Err(Error::InvalidArgument(format!("resolution has {n} entries for dimension {}", sys.dim()))),
        };
        GridPartition::new(sys.state_box(), counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetsOutput {
    pub grid: GridPartition,
    pub control_graph: TransitionGraph,
    pub chain_graph: TransitionGraph,
    pub control_sets: Vec<CellSet>,
    pub chain_control_sets: Vec<CellSet>,
}

impl SetsOutput {
    /// Index of the chain control set sharing the most cells with control set `d`.
    pub fn chain_of(&self, d: usize) -> Option<usize> {
        match_by_overlap(&self.control_sets[d], &self.chain_control_sets)
    }
}

/// Control sets from the exact graph and chain control sets from the
/// fattened, cocycle-weighted graph.
pub fn compute_sets(sys: &ControlSystem, opts: &PipelineOptions) -> Result<SetsOutput> {
    let grid = opts.grid(sys)?;
    let exact = GraphOptions { weights: false, ..opts.graph.clone() };
    let control_graph = build_transition_graph(sys, &grid, opts.dwell, opts.control_epsilon, &exact)?;
    let eps = opts.chain_epsilon.unwrap_or_else(|| default_chain_epsilon(&grid));
    let chain_graph = build_transition_graph(sys, &grid, opts.dwell, eps, &opts.graph)?;
    let control_sets = control_sets(&control_graph, &opts.components)?;
    let chain_control_sets = chain_control_sets(&chain_graph, &opts.components)?;
    Ok(SetsOutput { grid, control_graph, chain_graph, control_sets, chain_control_sets })
}

/// Applies the selector to the control sets.
pub fn select_control_set(sets: &SetsOutput, selector: &ComponentSelector) -> Result<usize> {
    let n = sets.control_sets.len();
    match selector {
        ComponentSelector::Largest => {
            Ok((0..n).max_by_key(|&i| (sets.control_sets[i].len(), std::cmp::Reverse(i))).expect("nonempty"))
        }
        ComponentSelector::Containing { point } => {
            let cell = sets
                .grid
                .cell_of(point)
                .ok_or_else(|| Error::InvalidArgument(format!("point {point:?} outside the grid")))?;
            (0..n)
                .find(|&i| sets.control_sets[i].contains(cell))
                .ok_or_else(|| Error::EmptyResult(format!("no control set contains {point:?}")))
        }
        ComponentSelector::Index { index } if *index < n => Ok(*index),
        ComponentSelector::Index { index } => {
            Err(Error::InvalidArgument(format!("control set index {index} out of range ({n} sets)")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOutput {
    pub control_set: usize,
    pub chain_set: usize,
    pub splitting: HyperbolicSplittingEstimate,
    /// Morse spectrum of `γ` at the unstable dimension over the chain control set.
    pub spectrum: SpectrumEstimate,
    pub h: f64,
}

/// Spectral invariance entropy of the chain control set around control set `d`.
pub fn spectral_entropy(sys: &ControlSystem, sets: &SetsOutput, d: usize, opts: &PipelineOptions) -> Result<SpectralOutput> {
    let e = sets
        .chain_of(d)
        .ok_or_else(|| Error::EmptyResult("no chain control set contains the control set".into()))?;
    let comp = &sets.chain_control_sets[e];
    let splitting = component_splitting(sys, &sets.grid, comp, &opts.splitting)?;
    let h = h_inv_spectral(&sets.chain_graph, comp, &splitting)?;
    let spectrum = morse_spectrum_bounds(&sets.chain_graph, comp, WeightKind::Gamma { k: splitting.unstable_dim })?;
    Ok(SpectralOutput { control_set: d, chain_set: e, splitting, spectrum, h })
}

/// Choice of `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum QRule {
    /// The selected control set.
    ControlSet,
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

/// Choice of `K ⊆ Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum KRule {
    /// `Q` eroded by `cells` cells.
    Eroded { cells: usize },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningPlan {
    /// `(τ, dwell)` pairs.
    pub taus: Vec<(f64, f64)>,
    pub k: KRule,
    pub q: QRule,
    /// Resolution of the spanning grid; `None` reuses the set grid.
    pub resolution: Option<Vec<usize>>,
    pub options: SpanningOptions,
}

/// Resolves `K` and `Q` on `grid`; `d` is the selected control set on `sets.grid`.
pub fn resolve_k_q(grid: &GridPartition, sets: Option<(&SetsOutput, usize)>, plan: &SpanningPlan) -> Result<(CellSet, CellSet)> {
    let q = match &plan.q {
        QRule::Box { lo, hi } => CellSet::from_box(grid, lo, hi, CellSetTag::Custom),
        QRule::ControlSet => {
            let (s, d) = sets.ok_or_else(|| Error::InvalidArgument("Q = control set needs computed sets".into()))?;
            let d = &s.control_sets[d];
            if &s.grid == grid {
                d.clone()
            } else {
                let cells = (0..grid.num_cells())
                    .filter(|&c| s.grid.cell_of(&grid.center(c)).map(|o| d.contains(o)).unwrap_or(false))
                    .collect();
                CellSet::new(cells, CellSetTag::ControlSet)
            }
        }
    };
    let k = match &plan.k {
        KRule::Eroded { cells } => CellSet { tag: CellSetTag::Custom, ..q.erode(grid, *cells) },
        KRule::Box { lo, hi } => CellSet::from_box(grid, lo, hi, CellSetTag::Custom),
    };
    if q.is_empty() || k.is_empty() {
        return Err(Error::EmptyResult("K or Q has no cells".into()));
    }
    Ok((k, q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningOutput {
    pub sets: Vec<SpanningSet>,
    pub estimate: EntropyEstimate,
}

/// Spanning sets for every `τ` of the plan and the resulting rate estimate.
pub fn spanning_entropy(
    sys: &ControlSystem,
    grid: &GridPartition,
    k: &CellSet,
    q: &CellSet,
    plan: &SpanningPlan,
) -> Result<SpanningOutput> {
    let sets = plan
        .taus
        .iter()
        .map(|&(tau, dwell)| build_spanning_set(sys, grid, k, q, tau, dwell, &plan.options))
        .collect::<Result<Vec<_>>>()?;
    let estimate = entropy_from_spanning_sets(&sets)?;
    Ok(SpanningOutput { sets, estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{ControlRange, ScalarLinear, StateBox};
    use std::sync::Arc;

    fn scalar(a: f64) -> ControlSystem {
        ControlSystem::new(
            Arc::new(ScalarLinear::default()),
            vec![a],
            ControlRange::new(vec![-1.0], vec![1.0]).unwrap(),
            StateBox::new(vec![-3.0], vec![3.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn scalar_pipeline() {
        let sys = scalar(1.0);
        let opts = PipelineOptions { resolution: vec![120], ..Default::default() };
        let sets = compute_sets(&sys, &opts).unwrap();
        assert_eq!(sets.control_sets.len(), 1);
        let d = select_control_set(&sets, &opts.selector).unwrap();
        assert!(sets.control_sets[d].is_subset(&sets.chain_control_sets[sets.chain_of(d).unwrap()]));
        let s = spectral_entropy(&sys, &sets, d, &opts).unwrap();
        assert_eq!(s.splitting.unstable_dim, 1);
        assert!((s.h - 1.0).abs() < 1e-6, "{}", s.h);
    }

    #[test]
    fn k_and_q_rules() {
        let sys = scalar(1.0);
        let opts = PipelineOptions { resolution: vec![60], ..Default::default() };
        let sets = compute_sets(&sys, &opts).unwrap();
        let plan = SpanningPlan {
            taus: vec![],
            k: KRule::Eroded { cells: 1 },
            q: QRule::ControlSet,
            resolution: None,
            options: SpanningOptions::default(),
        };
        let (k, q) = resolve_k_q(&sets.grid, Some((&sets, 0)), &plan).unwrap();
        assert_eq!(k.len() + 2, q.len());
        let fine = GridPartition::uniform(sys.state_box(), 120).unwrap();
        let (_, qf) = resolve_k_q(&fine, Some((&sets, 0)), &plan).unwrap();
        assert_eq!(qf.len(), 2 * q.len());
    }
}
