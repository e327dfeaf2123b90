//! Spanning sets of letter sequences for `(τ, K, Q)` and `(τ, K)^Q`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::cover::{exact_cover, greedy_cover};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::sets::{CellSet, GridPartition};
use crate::system::{ControlSignal, ControlSystem, IntegrationOptions, Rk4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanningFlavor {
    /// Trajectories stay in `Q` up to time `τ`.
    Kq,
    /// Additionally the endpoint at `τ` lies in `K`.
    KqReturn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverStrategy {
    /// Exact below 20 K-cells and 200 distinct candidates, greedy otherwise.
    #[default]
    Auto,
    Greedy,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMethod {
    Greedy,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningOptions {
    pub flavor: SpanningFlavor,
    /// Budget of search-tree expansions (one letter applied to one prefix).
    pub candidate_depth: Option<usize>,
    /// Sample points per cell; `None` means center plus corners.
    pub samples_per_cell: Option<usize>,
    pub integration: IntegrationOptions,
    /// Chebyshev radius by which `Q` is dilated for the membership test.
    pub q_dilation: usize,
    pub strategy: CoverStrategy,
    pub execution: Execution,
}

impl Default for SpanningOptions {
    fn default() -> Self {
        Self {
            flavor: SpanningFlavor::KqReturn,
            candidate_depth: Some(20_000_000),
            samples_per_cell: None,
            integration: IntegrationOptions::unbounded(1e-2),
            q_dilation: 1,
            strategy: CoverStrategy::Auto,
            execution: Execution::Parallel,
        }
    }
}

/// A finite family of controls on `[0, τ]` covering every `K`-cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningSet {
    pub tau: f64,
    pub dwell: f64,
    pub flavor: SpanningFlavor,
    pub grid: GridPartition,
    pub k: CellSet,
    pub q: CellSet,
    pub letters: Vec<Vec<f64>>,
    /// Letter index sequences of the chosen signals, in selection order.
    pub sequences: Vec<Vec<usize>>,
    /// Full coverage of every chosen signal, as sorted grid cells.
    pub covers: Vec<Vec<usize>>,
    /// `(cell, smallest covering signal index)` for every K-cell.
    pub coverage: Vec<(usize, usize)>,
    pub method: CoverMethod,
    /// Distinct nonempty coverage sets found by the enumeration.
    pub candidates: usize,
    pub expansions: usize,
    /// The expansion budget ran out before the enumeration finished.
    pub budget_exhausted: bool,
    pub samples_per_cell: usize,
    pub margin: f64,
    pub q_dilation: usize,
    pub integration: IntegrationOptions,
}

impl SpanningSet {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn signal(&self, i: usize) -> ControlSignal {
        let durations = vec![self.dwell; self.sequences[i].len()];
        let values = self.sequences[i].iter().map(|&l| self.letters[l].clone()).collect();
        ControlSignal::from_pieces(&durations, values).expect("letter sequences have positive durations")
    }

    pub fn signals(&self) -> Vec<ControlSignal> {
        (0..self.len()).map(|i| self.signal(i)).collect()
    }

    /// The first `m` signals; coverage is recomputed and may leave K-cells uncovered.
    pub fn truncated(&self, m: usize) -> SpanningSet {
        let m = m.min(self.len());
        let mut s = self.clone();
        s.sequences.truncate(m);
        s.covers.truncate(m);
        s.coverage = coverage_map(&s.k, &s.covers);
        s
    }
}

fn coverage_map(k: &CellSet, covers: &[Vec<usize>]) -> Vec<(usize, usize)> {
    k.cells
        .iter()
        .filter_map(|&c| covers.iter().position(|cov| cov.binary_search(&c).is_ok()).map(|i| (c, i)))
        .collect()
}

struct Tracker<'a> {
    sys: &'a ControlSystem,
    grid: &'a GridPartition,
    q_mask: Vec<bool>,
    k_mask: Vec<bool>,
    letters: Vec<Vec<f64>>,
    dwell: f64,
    substeps: usize,
    d: usize,
    samples: usize,
    flavor: SpanningFlavor,
    margin: f64,
}

/// Surviving K-cells (local index) with the current states of all their samples.
#[derive(Clone)]
struct Alive {
    cells: Vec<u32>,
    states: Vec<f64>,
}

impl Tracker<'_> {
    fn in_q(&self, x: &[f64]) -> bool {
        self.grid.cell_of(x).map(|c| self.q_mask[c]).unwrap_or(false)
    }

    fn in_k(&self, x: &[f64]) -> bool {
        self.grid.cell_of(x).map(|c| self.k_mask[c]).unwrap_or(false)
    }

    /// Applies one letter for one dwell, dropping every cell with a sample leaving `Q`.
    fn advance(&self, alive: &Alive, letter: usize) -> Alive {
        let u = &self.letters[letter];
        let h = self.dwell / self.substeps as f64;
        let block = self.samples * self.d;
        let mut rk = Rk4::new(self.d);
        let mut out = Alive { cells: Vec::new(), states: Vec::new() };
        let mut x = vec![0.0; self.d];
        for (ci, &cell) in alive.cells.iter().enumerate() {
            let start = out.states.len();
            let mut ok = true;
            'samples: for s in 0..self.samples {
                x.copy_from_slice(&alive.states[ci * block + s * self.d..ci * block + (s + 1) * self.d]);
                for _ in 0..self.substeps {
                    rk.step(self.sys, &mut x, u, h);
                    if !self.in_q(&x) {
                        ok = false;
                        break 'samples;
                    }
                }
                out.states.extend_from_slice(&x);
            }
            if ok {
                out.cells.push(cell);
            } else {
                out.states.truncate(start);
            }
        }
        out
    }

    fn covered(&self, alive: &Alive) -> Vec<u32> {
        if self.flavor == SpanningFlavor::Kq {
            return alive.cells.clone();
        }
        let block = self.samples * self.d;
        let mut probe = vec![0.0; self.d];
        alive
            .cells
            .iter()
            .enumerate()
            .filter(|(ci, _)| {
                (0..self.samples).all(|s| {
                    let p = &alive.states[ci * block + s * self.d..ci * block + (s + 1) * self.d];
                    if !self.in_k(p) {
                        return false;
                    }
                    (0..self.d).all(|a| {
                        [-self.margin, self.margin].iter().all(|&e| {
                            probe.copy_from_slice(p);
                            probe[a] += e;
                            self.in_k(&probe)
                        })
                    })
                })
            })
            .map(|(_, &c)| c)
            .collect()
    }
}

struct Subtree {
    candidates: Vec<(Vec<usize>, Vec<u32>)>,
    expansions: usize,
    exhausted: bool,
}

fn explore(tr: &Tracker, prefix: &[usize], depth: usize, alive: &Alive, budget: usize) -> Subtree {
    let mut out = Subtree { candidates: Vec::new(), expansions: 0, exhausted: false };
    let mut seq = prefix.to_vec();
    dfs(tr, alive, depth, &mut seq, budget, &mut out);
    out
}

fn dfs(tr: &Tracker, alive: &Alive, depth: usize, seq: &mut Vec<usize>, budget: usize, out: &mut Subtree) {
    if seq.len() == depth {
        let cov = tr.covered(alive);
        if !cov.is_empty() {
            out.candidates.push((seq.clone(), cov));
        }
        return;
    }
    for l in 0..tr.letters.len() {
        if out.expansions >= budget {
            out.exhausted = true;
            return;
        }
        out.expansions += 1;
        let next = tr.advance(alive, l);
        if next.cells.is_empty() {
            continue;
        }
        seq.push(l);
        dfs(tr, &next, depth, seq, budget, out);
        seq.pop();
    }
}

/// Distinct nonempty coverage sets of all letter sequences of length `τ / dwell`.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidates {
    /// Lexicographically first sequence realizing each coverage set.
    pub sequences: Vec<Vec<usize>>,
    /// Covered K-cells as indices into `K.cells`, sorted.
    pub covers: Vec<Vec<usize>>,
    pub expansions: usize,
    pub budget_exhausted: bool,
    pub samples_per_cell: usize,
    pub margin: f64,
}

/// Enumerates letter sequences of length `τ / dwell` depth first. A cell is
/// covered by a sequence when every sample of the cell stays in the dilated
/// `Q` at every integrator substep and, for [`SpanningFlavor::KqReturn`],
/// ends in `K` together with all points at distance `1e-6` cell widths along
/// each axis.
pub fn enumerate_candidates(
    sys: &ControlSystem,
    grid: &GridPartition,
    k: &CellSet,
    q: &CellSet,
    tau: f64,
    dwell: f64,
    opts: &SpanningOptions,
) -> Result<Candidates> {
    if !(dwell > 0.0) || !(tau > 0.0) {
        return Err(Error::InvalidArgument("tau and dwell must be positive".into()));
    }
    let steps = (tau / dwell).round();
    if (steps * dwell - tau).abs() > 1e-9 * tau.max(1.0) {
        return Err(Error::InvalidArgument(format!("tau = {tau} is not a multiple of dwell = {dwell}")));
    }
    let depth = steps as usize;
    k.validate(grid)?;
    q.validate(grid)?;
    if k.is_empty() {
        return Err(Error::EmptyInput("K has no cells".into()));
    }
    if !k.is_subset(q) {
        return Err(Error::InvalidArgument("K must be contained in Q".into()));
    }
    let d = grid.dim();
    let samples = opts.samples_per_cell.unwrap_or(1 + (1 << d));
    let margin = 1e-6 * grid.widths().iter().cloned().fold(f64::INFINITY, f64::min);
    let tr = Tracker {
        sys,
        grid,
        q_mask: q.dilate(grid, opts.q_dilation).mask(grid),
        k_mask: k.mask(grid),
        letters: sys.control_range().letters.clone(),
        dwell,
        substeps: opts.integration.substeps(dwell),
        d,
        samples,
        flavor: opts.flavor,
        margin,
    };
    let root = Alive {
        cells: (0..k.len() as u32).collect(),
        states: k.cells.iter().flat_map(|&c| grid.samples(c, samples).concat()).collect(),
    };

    // Shared breadth-first levels, then independent depth-first subtrees.
    let nl = tr.letters.len();
    let total_budget = opts.candidate_depth.unwrap_or(usize::MAX);
    let mut frontier: Vec<(Vec<usize>, Alive)> = vec![(Vec::new(), root)];
    let mut shared = 0usize;
    while frontier.len() < 64 && frontier.first().map(|f| f.0.len() < depth).unwrap_or(false) {
        let level: Vec<(usize, usize)> = (0..frontier.len()).flat_map(|i| (0..nl).map(move |l| (i, l))).collect();
        shared += level.len();
        let next = par::map(opts.execution, &level, |&(i, l)| tr.advance(&frontier[i].1, l));
        frontier = level
            .iter()
            .zip(next)
            .filter(|(_, a)| !a.cells.is_empty())
            .map(|(&(i, l), a)| {
                let mut p = frontier[i].0.clone();
                p.push(l);
                (p, a)
            })
            .collect();
    }
    let budget = total_budget.saturating_sub(shared).div_ceil(frontier.len().max(1));
    let mut parts = par::map(opts.execution, &frontier, |(p, a)| explore(&tr, p, depth, a, budget));
    if let Some(first) = parts.first_mut() {
        first.expansions += shared;
    }

    let mut expansions = 0;
    let mut exhausted = false;
    let mut seen: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut seqs: Vec<Vec<usize>> = Vec::new();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for part in parts {
        expansions += part.expansions;
        exhausted |= part.exhausted;
        for (seq, cov) in part.candidates {
            if seen.contains_key(&cov) {
                continue;
            }
            seen.insert(cov.clone(), seqs.len());
            seqs.push(seq);
            sets.push(cov.into_iter().map(|c| c as usize).collect());
        }
    }
    if exhausted {
        log::warn!("spanning search for tau = {tau} stopped after {expansions} expansions");
    }
    Ok(Candidates { sequences: seqs, covers: sets, expansions, budget_exhausted: exhausted, samples_per_cell: samples, margin })
}

/// Builds a spanning set from [`enumerate_candidates`] by set cover.
pub fn build_spanning_set(
    sys: &ControlSystem,
    grid: &GridPartition,
    k: &CellSet,
    q: &CellSet,
    tau: f64,
    dwell: f64,
    opts: &SpanningOptions,
) -> Result<SpanningSet> {
    let Candidates { sequences: seqs, covers: sets, expansions, budget_exhausted: exhausted, samples_per_cell: samples, margin } =
        enumerate_candidates(sys, grid, k, q, tau, dwell, opts)?;
    let mut hit = vec![false; k.len()];
    sets.iter().flatten().for_each(|&c| hit[c] = true);
    let missing: Vec<usize> = hit.iter().enumerate().filter(|(_, h)| !**h).map(|(i, _)| k.cells[i]).collect();
    if !missing.is_empty() {
        return Err(Error::Uncoverable { cells: missing });
    }

    let use_exact = match opts.strategy {
        CoverStrategy::Exact => true,
        CoverStrategy::Greedy => false,
        CoverStrategy::Auto => k.len() <= 20 && sets.len() <= 200,
    };
    let (chosen, method) = if use_exact && k.len() <= 64 {
        (exact_cover(k.len(), &sets), CoverMethod::Exact)
    } else {
        (greedy_cover(k.len(), &sets), CoverMethod::Greedy)
    };
    let chosen = chosen.expect("every K-cell has a candidate");
    let covers: Vec<Vec<usize>> = chosen.iter().map(|&i| sets[i].iter().map(|&c| k.cells[c]).collect()).collect();
    let sequences: Vec<Vec<usize>> = chosen.iter().map(|&i| seqs[i].clone()).collect();
    Ok(SpanningSet {
        tau,
        dwell,
        flavor: opts.flavor,
        grid: grid.clone(),
        k: k.clone(),
        q: q.clone(),
        letters: sys.control_range().letters.clone(),
        coverage: coverage_map(k, &covers),
        sequences,
        covers,
        method,
        candidates: sets.len(),
        expansions,
        budget_exhausted: exhausted,
        samples_per_cell: samples,
        margin,
        q_dilation: opts.q_dilation,
        integration: opts.integration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::CellSetTag;
    use crate::system::{ControlRange, ScalarLinear, StateBox};
    use std::sync::Arc;

    fn scalar(a: f64) -> (ControlSystem, GridPartition) {
        let sbox = StateBox::new(vec![-1.2], vec![1.2]).unwrap();
        let sys = ControlSystem::new(
            Arc::new(ScalarLinear::default()),
            vec![a],
            ControlRange::new(vec![-1.0], vec![1.0]).unwrap(),
            sbox.clone(),
        )
        .unwrap();
        (sys, GridPartition::uniform(&sbox, 240).unwrap())
    }

    fn kq(grid: &GridPartition) -> (CellSet, CellSet) {
        (
            CellSet::from_box(grid, &[-0.5], &[0.5], CellSetTag::Custom),
            CellSet::from_box(grid, &[-1.0], &[1.0], CellSetTag::Custom),
        )
    }

    #[test]
    fn contraction_needs_one_signal() {
        let (sys, grid) = scalar(-1.0);
        let (k, q) = kq(&grid);
        let s = build_spanning_set(&sys, &grid, &k, &q, 1.0, 0.25, &SpanningOptions::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.coverage.len(), k.len());
    }

    /// Minimum interval cover by the classic sweep; exact when every
    /// coverage set is a contiguous run of cells.
    fn interval_sweep(n: usize, covers: &[Vec<usize>]) -> usize {
        let runs: Vec<(usize, usize)> = covers.iter().map(|c| (c[0], *c.last().unwrap())).collect();
        let (mut next, mut count) = (0, 0);
        while next < n {
            let reach = runs.iter().filter(|r| r.0 <= next).map(|r| r.1).max().unwrap();
            assert!(reach >= next);
            next = reach + 1;
            count += 1;
        }
        count
    }

    #[test]
    fn expanding_system_needs_several() {
        let (sys, grid) = scalar(1.0);
        let (k, q) = kq(&grid);
        let opts = SpanningOptions::default();
        let cands = enumerate_candidates(&sys, &grid, &k, &q, 1.0, 0.25, &opts).unwrap();
        for c in &cands.covers {
            assert_eq!(c.last().unwrap() - c[0] + 1, c.len(), "coverage is an interval");
        }
        let exact = interval_sweep(k.len(), &cands.covers) as f64;
        assert!(exact >= 0.7f64.exp() && exact <= 1.3f64.exp(), "exact r = {exact}");

        let s = build_spanning_set(&sys, &grid, &k, &q, 1.0, 0.25, &opts).unwrap();
        assert!(s.len() as f64 <= exact * (1.0 + (k.len() as f64).ln()));
        for (i, cov) in s.covers.iter().enumerate() {
            let u = s.signal(i);
            for &c in cov {
                let y = crate::system::flow_end(&sys, &grid.center(c), &u, 1.0, &s.integration).unwrap();
                assert!(y[0].abs() <= 0.5 + 1e-9);
            }
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let (sys, grid) = scalar(1.0);
        let (k, q) = kq(&grid);
        let a = build_spanning_set(&sys, &grid, &k, &q, 1.0, 0.25, &SpanningOptions::default()).unwrap();
        let opts = SpanningOptions { execution: Execution::Sequential, ..Default::default() };
        let b = build_spanning_set(&sys, &grid, &k, &q, 1.0, 0.25, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn k_beyond_the_control_set_is_uncoverable() {
        let (sys, grid) = scalar(1.0);
        let k = CellSet::from_box(&grid, &[-1.1], &[1.1], CellSetTag::Custom);
        let q = CellSet::from_box(&grid, &[-1.15], &[1.15], CellSetTag::Custom);
        let r = build_spanning_set(&sys, &grid, &k, &q, 1.0, 0.25, &SpanningOptions::default());
        assert!(matches!(r, Err(Error::Uncoverable { .. })));
    }

    #[test]
    fn tau_must_be_a_dwell_multiple() {
        let (sys, grid) = scalar(1.0);
        let (k, q) = kq(&grid);
        assert!(build_spanning_set(&sys, &grid, &k, &q, 1.1, 0.25, &SpanningOptions::default()).is_err());
    }
}
