//! Grid abstraction of the control flow: transition graphs, reachable sets,
//! control sets and chain control sets.

mod cellset;
mod graph;
mod grid;
mod hausdorff;
mod scc;

pub use cellset::{CellSet, CellSetTag};
pub use graph::{build_transition_graph, Edge, GraphOptions, TransitionGraph, WeightKind};
pub use grid::GridPartition;
pub use hausdorff::{hausdorff_distance, match_by_overlap, one_sided_deviation, one_sided_points};
pub use scc::{chain_control_sets, control_sets, nontrivial_components, tarjan_scc, ComponentOptions};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{integrate, ControlSignal, ControlSystem, IntegrationOptions};

/// Default fattening radius for chain graphs: 1.5 cell diagonals.
pub fn default_chain_epsilon(grid: &GridPartition) -> f64 {
    1.5 * grid.cell_diagonal()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoReturnReport {
    pub trials: usize,
    /// Trials whose trajectory left `D` and came back at a later breakpoint.
    pub returns: usize,
    /// Returning trials with an intermediate sample outside the inflated set.
    pub violations: usize,
    pub worst_excursion_cells: usize,
}

/// Samples random letter sequences from points of `d_set` and checks that
/// trajectories returning to `d_set` never leave its `inflation`-cell dilation.
#[allow(clippy::too_many_arguments)]
pub fn no_return_check(
    sys: &ControlSystem,
    grid: &GridPartition,
    d_set: &CellSet,
    dwell: f64,
    pieces: usize,
    inflation: usize,
    trials: usize,
    seed: u64,
) -> Result<NoReturnReport> {
    if d_set.is_empty() {
        return Err(Error::EmptyInput("no-return check needs a nonempty set".into()));
    }
    let inflated = d_set.dilate(grid, inflation).mask(grid);
    let inside = d_set.mask(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let letters = sys.control_range().num_letters();
    let opts = IntegrationOptions { escape_inflation: None, ..IntegrationOptions::default() };
    let mut report = NoReturnReport { trials, returns: 0, violations: 0, worst_excursion_cells: 0 };
    for _ in 0..trials {
        let cell = d_set.cells[rng.gen_range(0..d_set.len())];
        let (lo, hi) = grid.bounds(cell);
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.gen_range(*a..=*b)).collect();
        let seq: Vec<usize> = (0..pieces).map(|_| rng.gen_range(0..letters)).collect();
        let u = ControlSignal::from_letters(sys.control_range(), &seq, dwell)?;
        let tr = match integrate(sys, &x, &u, u.duration(), &opts) {
            Ok(tr) => tr,
            Err(Error::NonFinite { .. }) => continue,
            Err(e) => return Err(e),
        };
        let cells: Vec<Option<usize>> = tr.states.iter().map(|s| grid.cell_of(s)).collect();
        let last_in = cells.iter().rposition(|c| c.map(|c| inside[c]).unwrap_or(false));
        let Some(last_in) = last_in else { continue };
        let left = cells[..last_in].iter().any(|c| !c.map(|c| inside[c]).unwrap_or(false));
        if !left {
            continue;
        }
        report.returns += 1;
        let outside = cells[..last_in]
            .iter()
            .filter(|c| !c.map(|c| inflated[c]).unwrap_or(false))
            .count();
        if outside > 0 {
            report.violations += 1;
            report.worst_excursion_cells = report.worst_excursion_cells.max(outside);
        }
    }
    Ok(report)
}
