use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::coder::{build_coder_controller, CoderController};
use crate::entropy::SpanningSet;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::sets::{CellSet, GridPartition};
use crate::system::{ControlSystem, IntegrationOptions, Rk4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailReason {
    /// A sampled state lies in no coding region.
    EncoderMiss,
    /// The trajectory left the dilated `Q` between samples.
    LeftQ,
    /// A sampled state is outside `K`.
    NotInK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub symbol: Option<usize>,
    /// All integrator samples on `[kτ, (k+1)τ]` stayed in `Q`.
    pub q_flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub step: usize,
    pub reason: FailReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub x0: Vec<f64>,
    pub tau: f64,
    pub steps: usize,
    pub records: Vec<StepRecord>,
    /// `|S_j|` for every transmitted symbol.
    pub alphabet_sizes: Vec<usize>,
    /// `(1/(kτ)) Σ_{j<k} log₂|S_j|` over the `k` transmitted symbols.
    pub rate_bits: f64,
    pub pass: bool,
    pub failure: Option<Failure>,
    pub seed: Option<u64>,
}

impl Transcript {
    /// One JSON object per sampling step.
    pub fn to_json_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }

    /// Turns an encoder miss into an error; other failures stay in the transcript.
    pub fn into_result(self) -> Result<Transcript> {
        match self.failure {
            Some(Failure { step, reason: FailReason::EncoderMiss }) => Err(Error::EncoderMiss {
                step,
                state: self.records.last().map(|r| r.x.clone()).unwrap_or_default(),
            }),
            _ => Ok(self),
        }
    }
}

/// Exact accounting of `Σ log₂|S_j|`: sizes are grouped so the sum does not
/// depend on the order of transmission.
pub fn bit_rate(alphabet_sizes: &[usize], tau: f64) -> f64 {
    if alphabet_sizes.is_empty() {
        return 0.0;
    }
    let mut groups: BTreeMap<usize, u64> = BTreeMap::new();
    alphabet_sizes.iter().for_each(|&s| *groups.entry(s).or_default() += 1);
    let bits: f64 = groups.iter().map(|(&s, &n)| n as f64 * (s as f64).log2()).sum();
    bits / (alphabet_sizes.len() as f64 * tau)
}

struct Runner<'a> {
    sys: &'a ControlSystem,
    cc: &'a CoderController,
    q_mask: Vec<bool>,
    step: f64,
}

impl<'a> Runner<'a> {
    fn new(sys: &'a ControlSystem, cc: &'a CoderController, step: f64) -> Self {
        Self { sys, cc, q_mask: cc.q.dilate(&cc.grid, cc.q_dilation).mask(&cc.grid), step }
    }

    /// Applies `symbol` for one period from `x`; false when `Q` is left.
    fn apply(&self, x: &mut [f64], symbol: usize) -> bool {
        let d = x.len();
        let mut rk = Rk4::new(d);
        let opts = IntegrationOptions::unbounded(self.step);
        let n = opts.substeps(self.cc.dwell);
        let h = self.cc.dwell / n as f64;
        for &l in &self.cc.controls[symbol] {
            let u = &self.cc.letters[l];
            for _ in 0..n {
                rk.step(self.sys, x, u, h);
                let inside = x.iter().all(|v| v.is_finite())
                    && self.cc.grid.cell_of(x).map(|c| self.q_mask[c]).unwrap_or(false);
                if !inside {
                    return false;
                }
            }
        }
        true
    }
}

/// Closed-loop sampled-data run over `steps` periods. The run passes iff
/// every sample lies in `K`, is encoded, and the trajectory stays in `Q`.
pub fn simulate_networked(
    sys: &ControlSystem,
    cc: &CoderController,
    x0: &[f64],
    steps: usize,
) -> Result<Transcript> {
    if x0.len() != sys.dim() || !cc.in_k(x0) {
        return Err(Error::InitialStateOutsideK(x0.to_vec()));
    }
    let runner = Runner::new(sys, cc, cc.integration.step);
    let mut x = x0.to_vec();
    let mut records = Vec::with_capacity(steps + 1);
    let mut sizes = Vec::with_capacity(steps);
    let mut failure = None;
    for k in 0..=steps {
        if !cc.in_k(&x) {
            records.push(StepRecord { k, x: x.clone(), symbol: None, q_flag: true });
            failure = Some(Failure { step: k, reason: FailReason::NotInK });
            break;
        }
        if k == steps {
            records.push(StepRecord { k, x: x.clone(), symbol: None, q_flag: true });
            break;
        }
        let Some(symbol) = cc.encode(&x) else {
            records.push(StepRecord { k, x: x.clone(), symbol: None, q_flag: true });
            failure = Some(Failure { step: k, reason: FailReason::EncoderMiss });
            break;
        };
        sizes.push(cc.alphabet_size());
        let sample = x.clone();
        let q_flag = runner.apply(&mut x, symbol);
        records.push(StepRecord { k, x: sample, symbol: Some(symbol), q_flag });
        if !q_flag {
            failure = Some(Failure { step: k, reason: FailReason::LeftQ });
            break;
        }
    }
    Ok(Transcript {
        x0: x0.to_vec(),
        tau: cc.tau,
        steps,
        records,
        rate_bits: bit_rate(&sizes, cc.tau),
        alphabet_sizes: sizes,
        pass: failure.is_none(),
        failure,
        seed: None,
    })
}

/// Independent simulations from many initial states, in input order.
pub fn simulate_many(
    sys: &ControlSystem,
    cc: &CoderController,
    x0s: &[Vec<f64>],
    steps: usize,
    exec: Execution,
) -> Result<Vec<Transcript>> {
    par::map(exec, x0s, |x0| simulate_networked(sys, cc, x0, steps)).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub pass: bool,
    pub failure: Option<Failure>,
    /// Largest distance between recorded and replayed samples.
    pub max_deviation: f64,
}

/// Re-checks both invariance conditions step by step: each recorded sample
/// is re-integrated under its recorded symbol at half the integration step.
/// Restarting from every recorded sample keeps the check meaningful on
/// expanding dynamics, where an open-loop replay would drift away.
pub fn replay_transcript(sys: &ControlSystem, cc: &CoderController, t: &Transcript) -> ReplayReport {
    let runner = Runner::new(sys, cc, 0.5 * cc.integration.step);
    let mut dev: f64 = 0.0;
    let fail = |step, reason, dev| ReplayReport { pass: false, failure: Some(Failure { step, reason }), max_deviation: dev };
    for (i, r) in t.records.iter().enumerate() {
        if !cc.in_k(&r.x) {
            return fail(r.k, FailReason::NotInK, dev);
        }
        let Some(symbol) = r.symbol else { break };
        if cc.encode(&r.x) != Some(symbol) {
            return fail(r.k, FailReason::EncoderMiss, dev);
        }
        let mut x = r.x.clone();
        if !runner.apply(&mut x, symbol) {
            return fail(r.k, FailReason::LeftQ, dev);
        }
        if !cc.in_k(&x) {
            return fail(r.k + 1, FailReason::NotInK, dev);
        }
        if let Some(next) = t.records.get(i + 1) {
            dev = dev.max(x.iter().zip(&next.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
        }
    }
    let complete = t.records.len() == t.steps + 1;
    let failure = (!complete).then_some(Failure { step: t.records.len(), reason: FailReason::EncoderMiss });
    ReplayReport { pass: complete && t.failure.is_none(), failure, max_deviation: dev }
}

/// `n` states uniform over the interiors of uniformly chosen K-cells.
pub fn random_initial_states(grid: &GridPartition, k: &CellSet, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let c = k.cells[rng.gen_range(0..k.len())];
            let (lo, hi) = grid.bounds(c);
            lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * rng.gen_range(1e-9..1.0 - 1e-9)).collect()
        })
        .collect()
}

/// Every sample point of every K-cell; corners shared by neighbouring cells
/// appear once.
pub fn cell_sample_states(grid: &GridPartition, k: &CellSet, samples_per_cell: usize) -> Vec<Vec<f64>> {
    let mut seen = std::collections::HashSet::new();
    k.cells
        .iter()
        .flat_map(|&c| grid.samples(c, samples_per_cell))
        .filter(|x| seen.insert(x.iter().map(|v| v.to_bits()).collect::<Vec<u64>>()))
        .collect()
}

/// Rows `x0,...,pass,rate_bits`.
pub fn summary_csv(transcripts: &[Transcript]) -> String {
    let d = transcripts.first().map(|t| t.x0.len()).unwrap_or(1);
    let head: Vec<String> = (0..d).map(|i| format!("x0_{i}")).collect();
    let mut s = format!("{},result,rate_bits\n", head.join(","));
    for t in transcripts {
        let xs: Vec<String> = t.x0.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("{},{},{}\n", xs.join(","), if t.pass { "PASS" } else { "FAIL" }, t.rate_bits));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateScanRow {
    pub tau: f64,
    pub spanning_size: usize,
    /// Smallest budget whose truncated coder passes from every test state.
    pub critical_m: Option<usize>,
    pub rate_bits: Option<f64>,
}

/// For each spanning set, the smallest alphabet budget whose coder-controller
/// (built from the first `m` signals) passes from every K-cell sample over
/// `horizon_periods`. Budgets are bisected, since truncations are nested.
pub fn critical_rate_scan(
    sys: &ControlSystem,
    spanning: &[SpanningSet],
    budgets: &[usize],
    horizon_periods: usize,
    exec: Execution,
) -> Result<Vec<RateScanRow>> {
    let mut budgets: Vec<usize> = budgets.iter().copied().filter(|&m| m > 0).collect();
    budgets.sort_unstable();
    budgets.dedup();
    if budgets.is_empty() {
        return Err(Error::EmptyInput("no alphabet budgets".into()));
    }
    let mut rows = Vec::with_capacity(spanning.len());
    for s in spanning {
        let full = build_coder_controller(s)?;
        let states = cell_sample_states(&s.grid, &s.k, s.samples_per_cell);
        let passes = |m: usize| -> Result<bool> {
            let cc = full.truncated(m);
            for chunk in states.chunks(256) {
                if !simulate_many(sys, &cc, chunk, horizon_periods, exec)?.iter().all(|t| t.pass) {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        let (mut lo, mut hi) = (0usize, budgets.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if passes(budgets[mid])? {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let critical_m = budgets.get(lo).map(|&m| m.min(s.len()));
        rows.push(RateScanRow {
            tau: s.tau,
            spanning_size: s.len(),
            critical_m,
            rate_bits: critical_m.map(|m| (m as f64).log2() / s.tau),
        });
    }
    if rows.iter().all(|r| r.critical_m.is_none()) {
        return Err(Error::NoPass { tau: rows.first().map(|r| r.tau).unwrap_or(0.0) });
    }
    Ok(rows)
}
