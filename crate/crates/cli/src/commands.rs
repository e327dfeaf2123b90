//! One function per subcommand. Each writes its artifacts into the output
//! directory; numerical work is delegated to `iel_core`.

use std::path::Path;

use serde::Serialize;
use serde_json::json;

use iel_core::channel::{
    build_coder_controller, cell_sample_states, critical_rate_scan, random_initial_states, replay_transcript,
    simulate_many, summary_csv, RateScanRow, Transcript,
};
use iel_core::entropy::{reconcile, SpanningSet};
use iel_core::pipeline::{
    compute_sets, resolve_k_q, select_control_set, spanning_entropy, spectral_entropy, PipelineOptions, QRule,
    SetsOutput,
};
use iel_core::robustness::{continuity_diagnostics, sweep, SweepConfig};
use iel_core::sets::GridPartition;
use iel_core::system::{integrate, ControlSignal, ControlSystem, IntegrationOptions};
use iel_core::Execution;

use crate::artifacts::{read_matching, OutputDir};
use crate::config::{ConfigInvalid, RunConfig};

const LOG2_E: f64 = std::f64::consts::LOG2_E;

fn system(cfg: &RunConfig) -> anyhow::Result<ControlSystem> {
    Ok(cfg.system_spec().build()?)
}

pub fn simulate(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let sys = system(cfg)?;
    let s = cfg.simulate.as_ref().ok_or_else(|| ConfigInvalid::at("/simulate", "required by `simulate`"))?;
    let signal = if s.pieces.is_empty() {
        ControlSignal::constant(vec![0.0; sys.inputs()], s.horizon.max(f64::MIN_POSITIVE))?
    } else {
        let durations: Vec<f64> = s.pieces.iter().map(|p| p.duration).collect();
        let values = s.pieces.iter().map(|p| p.value.clone()).collect();
        ControlSignal::from_pieces(&durations, values)?
    };
    let signal = if s.periodic { signal.into_periodic()? } else { signal };
    if !s.periodic && signal.duration() < s.horizon * (1.0 - 1e-12) {
        return Err(ConfigInvalid::at("/simulate/pieces", "pieces end before the horizon").into());
    }
    signal.validate(sys.control_range())?;
    let traj = integrate(&sys, &s.x0, &signal, s.horizon, &IntegrationOptions::with_step(cfg.grid.step))?;
    let head: Vec<String> = (0..sys.dim()).map(|i| format!("x{i}")).collect();
    let mut csv = format!("t,{}\n", head.join(","));
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        csv.push_str(&format!("{t},{}\n", xs.join(",")));
    }
    out.csv("trajectory.csv", &csv)?;
    out.json("trajectory.json", &traj)?;
    Ok(())
}

fn write_sets(sets: &SetsOutput, out: &mut OutputDir) -> anyhow::Result<()> {
    let chain_of: Vec<Option<usize>> = (0..sets.control_sets.len()).map(|d| sets.chain_of(d)).collect();
    let nested = chain_of
        .iter()
        .enumerate()
        .all(|(d, e)| e.map(|e| sets.control_sets[d].is_subset(&sets.chain_control_sets[e])).unwrap_or(false));
    out.json(
        "sets.json",
        &json!({
            "grid": sets.grid,
            "control_sets": sets.control_sets,
            "chain_control_sets": sets.chain_control_sets,
            "chain_of_control_set": chain_of,
            "control_sets_nested": nested,
            "control_epsilon": sets.control_graph.epsilon,
            "chain_epsilon": sets.chain_graph.epsilon,
        }),
    )?;
    out.json("control_graph.json", &sets.control_graph.to_compact_json())?;
    out.json("chain_graph.json", &sets.chain_graph.to_compact_json())?;
    for (i, s) in sets.control_sets.iter().enumerate() {
        out.csv(&format!("control_set_{i}.csv"), &s.to_csv(&sets.grid))?;
    }
    for (i, s) in sets.chain_control_sets.iter().enumerate() {
        out.csv(&format!("chain_control_set_{i}.csv"), &s.to_csv(&sets.grid))?;
    }
    Ok(())
}

pub fn sets(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let sys = system(cfg)?;
    let sets = compute_sets(&sys, &cfg.pipeline_options())?;
    log::info!("{} control set(s), {} chain control set(s)", sets.control_sets.len(), sets.chain_control_sets.len());
    write_sets(&sets, out)
}

pub fn spectrum(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let sys = system(cfg)?;
    let opts = cfg.pipeline_options();
    let sets = compute_sets(&sys, &opts)?;
    write_sets(&sets, out)?;
    let d = select_control_set(&sets, &opts.selector)?;
    let s = spectral_entropy(&sys, &sets, d, &opts)?;
    out.json(
        "spectrum.json",
        &json!({
            "control_set": s.control_set,
            "chain_set": s.chain_set,
            "unstable_dim": s.splitting.unstable_dim,
            "h": s.h,
            "h_bits": s.h * LOG2_E,
            "splitting": s.splitting,
            "spectrum": s.spectrum,
        }),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct EntropyArtifact<'a> {
    estimate: &'a iel_core::entropy::EntropyEstimate,
    h_bits: f64,
    grid: &'a GridPartition,
    spanning_sets: &'a [SpanningSet],
    reconcile: Option<serde_json::Value>,
}

fn grid_for(sys: &ControlSystem, opts: &PipelineOptions, resolution: Option<&Vec<usize>>) -> anyhow::Result<GridPartition> {
    let o = PipelineOptions { resolution: resolution.cloned().unwrap_or_else(|| opts.resolution.clone()), ..opts.clone() };
    Ok(o.grid(sys)?)
}

/// Computes spanning sets for every configured `τ` and writes the entropy artifacts.
fn compute_entropy(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Vec<SpanningSet>> {
    let sys = system(cfg)?;
    let plan = cfg.spanning_plan().ok_or_else(|| ConfigInvalid::at("/entropy", "required by this command"))?;
    let e = cfg.entropy.as_ref().expect("plan implies section");
    let opts = cfg.pipeline_options();
    let sets = if matches!(plan.q, QRule::ControlSet) || e.reconcile { Some(compute_sets(&sys, &opts)?) } else { None };
    let d = match &sets {
        Some(s) => Some(select_control_set(s, &opts.selector)?),
        None => None,
    };
    let grid = grid_for(&sys, &opts, plan.resolution.as_ref())?;
    let (k, q) = resolve_k_q(&grid, sets.as_ref().zip(d), &plan)?;
    log::info!("|K| = {} cells, |Q| = {} cells on {}", k.len(), q.len(), grid.id());
    let result = spanning_entropy(&sys, &grid, &k, &q, &plan)?;
    let reconciled = match (&sets, d, e.reconcile) {
        (Some(s), Some(d), true) => Some(match spectral_entropy(&sys, s, d, &opts) {
            Ok(sp) => serde_json::to_value(reconcile(&result.estimate, sp.h, cfg.tolerances.reconcile))?,
            Err(err) => json!({ "error": err.to_string() }),
        }),
        _ => None,
    };
    out.json(
        "entropy.json",
        &EntropyArtifact {
            estimate: &result.estimate,
            h_bits: result.estimate.h_bits(),
            grid: &grid,
            spanning_sets: &result.sets,
            reconcile: reconciled,
        },
    )?;
    out.csv("entropy.csv", &result.estimate.to_csv())?;
    Ok(result.sets)
}

pub fn entropy(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    compute_entropy(cfg, out).map(|_| ())
}

#[derive(Serialize)]
struct RunSummary {
    states: usize,
    passes: usize,
    horizon_periods: usize,
}

impl RunSummary {
    fn of(ts: &[Transcript], horizon_periods: usize) -> Self {
        Self { states: ts.len(), passes: ts.iter().filter(|t| t.pass).count(), horizon_periods }
    }
}

pub fn channel(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let sys = system(cfg)?;
    let reused = read_matching(&out.path().join("entropy.json"), &cfg.hash())
        .and_then(|mut v| serde_json::from_value::<Vec<SpanningSet>>(v["spanning_sets"].take()).ok());
    let (spanning, source) = match reused {
        Some(s) => {
            log::info!("reusing spanning sets from entropy.json");
            (s, "reused")
        }
        None => (compute_entropy(cfg, out)?, "computed"),
    };
    let ch = &cfg.channel;
    let budgets = ch.budgets.clone().unwrap_or_else(|| (1..=spanning.iter().map(|s| s.len()).max().unwrap_or(1)).collect());
    let rows = critical_rate_scan(&sys, &spanning, &budgets, ch.horizon_periods, Execution::Parallel)?;
    let mut csv = String::from("tau,spanning_size,critical_m,rate_bits\n");
    for r in &rows {
        let opt = |v: Option<String>| v.unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.tau,
            r.spanning_size,
            opt(r.critical_m.map(|m| m.to_string())),
            opt(r.rate_bits.map(|b| b.to_string()))
        ));
    }
    out.csv("rate_scan.csv", &csv)?;

    let (best_idx, best): (usize, &RateScanRow) = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.rate_bits.is_some())
        .min_by(|a, b| a.1.rate_bits.partial_cmp(&b.1.rate_bits).expect("finite rates"))
        .expect("scan succeeded for at least one tau");
    let m = best.critical_m.expect("passing row");
    let s = &spanning[best_idx];
    let full = build_coder_controller(s)?;
    let cc = full.truncated(m);

    let states = cell_sample_states(&s.grid, &s.k, s.samples_per_cell);
    let cell_runs = simulate_many(&sys, &cc, &states, ch.horizon_periods, Execution::Parallel)?;
    out.csv("achievability_summary.csv", &summary_csv(&cell_runs))?;
    let replay = cell_runs.first().map(|t| replay_transcript(&sys, &cc, t));
    if let Some(t) = cell_runs.first() {
        out.json_lines("transcript_0.jsonl", &t.to_json_lines())?;
    }

    let random = random_initial_states(&s.grid, &s.k, ch.random_states, cfg.seed);
    let random_runs = simulate_many(&sys, &cc, &random, ch.horizon_periods, Execution::Parallel)?;
    out.csv("random_summary.csv", &summary_csv(&random_runs))?;

    let converse = if m > 1 {
        let weak = full.truncated(m - 1);
        let runs = simulate_many(&sys, &weak, &random, ch.converse_horizon_periods, Execution::Parallel)?;
        let fails = runs.iter().filter(|t| !t.pass).count();
        Some(json!({
            "m": m - 1,
            "rate_bits": weak.rate_bits(),
            "states": runs.len(),
            "fails": fails,
            "fail_fraction": if runs.is_empty() { 0.0 } else { fails as f64 / runs.len() as f64 },
            "horizon_periods": ch.converse_horizon_periods,
        }))
    } else {
        None
    };

    out.json(
        "channel.json",
        &json!({
            "entropy_source": source,
            "rate_scan": rows,
            "best": { "tau": best.tau, "m": m, "rate_bits": cc.rate_bits() },
            "achievability": RunSummary::of(&cell_runs, ch.horizon_periods),
            "replay": replay,
            "random": RunSummary::of(&random_runs, ch.horizon_periods),
            "seed": cfg.seed,
            "converse": converse,
        }),
    )?;
    Ok(())
}

pub fn sweep_cmd(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let sys = system(cfg)?;
    let s = cfg.sweep.as_ref().ok_or_else(|| ConfigInvalid::at("/sweep", "required by `sweep`"))?;
    let scfg = SweepConfig {
        alphas: s.alphas.values(),
        reference: s.reference,
        param_index: s.param_index,
        pipeline: cfg.pipeline_options(),
        spanning: if s.spanning { cfg.spanning_plan() } else { None },
        execution: Execution::Parallel,
    };
    let report = sweep(&sys, &scfg)?;
    let diagnostics = continuity_diagnostics(&report, cfg.tolerances.semicontinuity)
        .map(|d| serde_json::to_value(d).expect("diagnostics serialize"))
        .unwrap_or_else(|e| json!({ "error": e.to_string() }));
    out.csv("sweep.csv", &report.to_csv())?;
    out.json("sweep.json", &json!({ "report": report, "diagnostics": diagnostics }))?;
    Ok(())
}

/// Writes the resolved configuration, defaults included.
pub fn snapshot(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    out.json("config.json", &cfg.resolved())
}

pub fn default_out_dir(cfg: &RunConfig) -> &Path {
    Path::new(cfg.output_dir.as_deref().unwrap_or("iel-out"))
}
