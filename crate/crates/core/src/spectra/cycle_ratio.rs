//! Minimum and maximum cycle ratio `Σ w / Σ T` over directed cycles.
//!
//! Howard policy iteration is the main solver; exhaustive simple-cycle
//! enumeration serves as the reference and as fallback on small graphs.
//! Cycle sums are always taken along the cycle rotated to start at its
//! smallest node, so both solvers produce bit-identical ratios for the same
//! cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEdge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
    /// Strictly positive.
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioGraph {
    pub nodes: usize,
    pub edges: Vec<RatioEdge>,
}

/// A simple cycle given by edge indices, starting at its smallest node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleWitness {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
    pub weight: f64,
    pub duration: f64,
    pub ratio: f64,
}

impl RatioGraph {
    pub fn new(nodes: usize, edges: Vec<RatioEdge>) -> Result<Self> {
        for e in &edges {
            if e.from >= nodes || e.to >= nodes {
                return Err(Error::InvalidArgument("edge endpoint out of range".into()));
            }
            if !(e.duration > 0.0) || !e.weight.is_finite() {
                return Err(Error::InvalidArgument("edges need finite weight and positive duration".into()));
            }
        }
        Ok(Self { nodes, edges })
    }

    fn negated(&self) -> RatioGraph {
        let edges = self.edges.iter().map(|e| RatioEdge { weight: -e.weight, ..*e }).collect();
        RatioGraph { nodes: self.nodes, edges }
    }

    fn out_lists(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes];
        for (i, e) in self.edges.iter().enumerate() {
            out[e.from].push(i);
        }
        out
    }

    /// Canonical witness for a cycle given as edge indices in traversal order.
    pub fn witness(&self, cycle: &[usize]) -> CycleWitness {
        let start = (0..cycle.len()).min_by_key(|&i| self.edges[cycle[i]].from).unwrap();
        let edges: Vec<usize> = cycle[start..].iter().chain(&cycle[..start]).copied().collect();
        let mut weight = 0.0;
        let mut duration = 0.0;
        for &e in &edges {
            weight += self.edges[e].weight;
            duration += self.edges[e].duration;
        }
        let nodes = edges.iter().map(|&e| self.edges[e].from).collect();
        CycleWitness { nodes, edges, weight, duration, ratio: weight / duration }
    }
}

fn better(a: &CycleWitness, b: &CycleWitness) -> bool {
    a.ratio < b.ratio || (a.ratio == b.ratio && (&a.nodes, &a.edges) < (&b.nodes, &b.edges))
}

/// Nodes lying on some cycle candidate: iteratively strip nodes without
/// out-edges into the surviving set.
fn live_nodes(g: &RatioGraph) -> Vec<bool> {
    let mut live = vec![true; g.nodes];
    loop {
        let mut has_out = vec![false; g.nodes];
        for e in &g.edges {
            if live[e.from] && live[e.to] {
                has_out[e.from] = true;
            }
        }
        let mut changed = false;
        for v in 0..g.nodes {
            if live[v] && !has_out[v] {
                live[v] = false;
                changed = true;
            }
        }
        if !changed {
            return live;
        }
    }
}

/// Minimum cycle ratio by Howard policy iteration.
pub fn min_cycle_ratio_howard(g: &RatioGraph) -> Result<CycleWitness> {
    howard(g, 10_000).or_else(|e| match e {
        Error::InsufficientData(_) if g.nodes < 12 => {
            log::warn!("policy iteration did not settle; falling back to enumeration");
            min_cycle_ratio_enumerate(g)
        }
        other => Err(other),
    })
}

pub fn max_cycle_ratio_howard(g: &RatioGraph) -> Result<CycleWitness> {
    let w = min_cycle_ratio_howard(&g.negated())?;
    Ok(g.witness(&w.edges))
}

fn howard(g: &RatioGraph, max_iter: usize) -> Result<CycleWitness> {
    let live = live_nodes(g);
    if !live.iter().any(|&l| l) {
        return Err(Error::NoCycle);
    }
    let out: Vec<Vec<usize>> = g
        .out_lists()
        .into_iter()
        .map(|l| l.into_iter().filter(|&e| live[g.edges[e].to]).collect())
        .collect();
    let n = g.nodes;
    let ratio = |e: usize| g.edges[e].weight / g.edges[e].duration;
    let mut policy: Vec<usize> = (0..n)
        .map(|v| {
            if !live[v] {
                return usize::MAX;
            }
            *out[v].iter().min_by(|&&a, &&b| ratio(a).total_cmp(&ratio(b))).unwrap()
        })
        .collect();
    let scale = g.edges.iter().map(|e| (e.weight / e.duration).abs()).fold(1.0, f64::max);
    let tol = 1e-12 * scale;

    for _ in 0..max_iter {
        let (eta, x, cycles) = evaluate(g, &live, &policy);
        let mut changed = false;
        for v in (0..n).filter(|&v| live[v]) {
            let mut best = eta[v] - tol;
            let mut choice = None;
            for &e in &out[v] {
                if eta[g.edges[e].to] < best {
                    best = eta[g.edges[e].to];
                    choice = Some(e);
                }
            }
            if let Some(e) = choice {
                policy[v] = e;
                changed = true;
            }
        }
        if !changed {
            let xs = x.iter().filter(|v| v.is_finite()).fold(1.0f64, |a, v| a.max(v.abs()));
            let xtol = 1e-10 * xs;
            for v in (0..n).filter(|&v| live[v]) {
                let mut best = x[v] - xtol;
                let mut choice = None;
                for &e in &out[v] {
                    let w = g.edges[e].to;
                    if (eta[w] - eta[v]).abs() <= tol {
                        let val = g.edges[e].weight - eta[v] * g.edges[e].duration + x[w];
                        if val < best {
                            best = val;
                            choice = Some(e);
                        }
                    }
                }
                if let Some(e) = choice {
                    if e != policy[v] {
                        policy[v] = e;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            let mut best: Option<CycleWitness> = None;
            for c in cycles {
                let w = g.witness(&c);
                if best.as_ref().map(|b| better(&w, b)).unwrap_or(true) {
                    best = Some(w);
                }
            }
            return best.ok_or(Error::NoCycle);
        }
    }
    Err(Error::InsufficientData("policy iteration hit the iteration cap".into()))
}

/// Value determination: per-node cycle ratio `η`, bias `x`, and the policy cycles.
fn evaluate(g: &RatioGraph, live: &[bool], policy: &[usize]) -> (Vec<f64>, Vec<f64>, Vec<Vec<usize>>) {
    let n = g.nodes;
    let mut eta = vec![f64::NAN; n];
    let mut x = vec![f64::NAN; n];
    let mut color = vec![usize::MAX; n];
    let mut cycles = Vec::new();
    for s in (0..n).filter(|&v| live[v]) {
        if color[s] != usize::MAX {
            continue;
        }
        let mut walk = Vec::new();
        let mut v = s;
        while color[v] == usize::MAX {
            color[v] = s;
            walk.push(v);
            v = g.edges[policy[v]].to;
        }
        let mut stop = walk.len();
        if color[v] == s {
            let pos = walk.iter().position(|&w| w == v).unwrap();
            let cyc_edges: Vec<usize> = walk[pos..].iter().map(|&w| policy[w]).collect();
            let wit = g.witness(&cyc_edges);
            let root = wit.nodes[0];
            eta[root] = wit.ratio;
            x[root] = 0.0;
            for &e in wit.edges.iter().rev().take(wit.edges.len() - 1) {
                let edge = &g.edges[e];
                eta[edge.from] = wit.ratio;
                x[edge.from] = edge.weight - wit.ratio * edge.duration + x[edge.to];
            }
            cycles.push(cyc_edges);
            stop = pos;
        }
        for &w in walk[..stop].iter().rev() {
            let edge = &g.edges[policy[w]];
            eta[w] = eta[edge.to];
            x[w] = edge.weight - eta[w] * edge.duration + x[edge.to];
        }
    }
    (eta, x, cycles)
}

/// All simple cycles, each reported once starting from its smallest node.
pub fn enumerate_simple_cycles(g: &RatioGraph) -> Vec<Vec<usize>> {
    let out = g.out_lists();
    let mut cycles = Vec::new();
    let mut on_path = vec![false; g.nodes];
    let mut path: Vec<usize> = Vec::new();
    fn dfs(
        g: &RatioGraph,
        out: &[Vec<usize>],
        s: usize,
        v: usize,
        on_path: &mut [bool],
        path: &mut Vec<usize>,
        cycles: &mut Vec<Vec<usize>>,
    ) {
        for &e in &out[v] {
            let w = g.edges[e].to;
            if w == s {
                path.push(e);
                cycles.push(path.clone());
                path.pop();
            } else if w > s && !on_path[w] {
                on_path[w] = true;
                path.push(e);
                dfs(g, out, s, w, on_path, path, cycles);
                path.pop();
                on_path[w] = false;
            }
        }
    }
    for s in 0..g.nodes {
        on_path[s] = true;
        dfs(g, &out, s, s, &mut on_path, &mut path, &mut cycles);
        on_path[s] = false;
    }
    cycles
}

pub fn min_cycle_ratio_enumerate(g: &RatioGraph) -> Result<CycleWitness> {
    let mut best: Option<CycleWitness> = None;
    for c in enumerate_simple_cycles(g) {
        let w = g.witness(&c);
        if best.as_ref().map(|b| better(&w, b)).unwrap_or(true) {
            best = Some(w);
        }
    }
    best.ok_or(Error::NoCycle)
}

pub fn max_cycle_ratio_enumerate(g: &RatioGraph) -> Result<CycleWitness> {
    let w = min_cycle_ratio_enumerate(&g.negated())?;
    Ok(g.witness(&w.edges))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(from: usize, to: usize, weight: f64, duration: f64) -> RatioEdge {
        RatioEdge { from, to, weight, duration }
    }

    #[test]
    fn single_self_loop() {
        let g = RatioGraph::new(1, vec![e(0, 0, 2.0, 0.5)]).unwrap();
        assert_eq!(min_cycle_ratio_howard(&g).unwrap().ratio, 4.0);
        assert_eq!(max_cycle_ratio_howard(&g).unwrap().ratio, 4.0);
    }

    #[test]
    fn two_loops_with_bridge() {
        let g = RatioGraph::new(
            2,
            vec![e(0, 0, 1.0, 1.0), e(1, 1, 3.0, 1.0), e(0, 1, 2.0, 1.0), e(1, 0, 2.0, 1.0)],
        )
        .unwrap();
        assert_eq!(min_cycle_ratio_howard(&g).unwrap().ratio, 1.0);
        assert_eq!(max_cycle_ratio_howard(&g).unwrap().ratio, 3.0);
        assert_eq!(enumerate_simple_cycles(&g).len(), 3);
    }

    #[test]
    fn acyclic_graph_has_no_cycle() {
        let g = RatioGraph::new(3, vec![e(0, 1, 1.0, 1.0), e(1, 2, 1.0, 1.0)]).unwrap();
        assert_eq!(min_cycle_ratio_howard(&g), Err(Error::NoCycle));
        assert_eq!(min_cycle_ratio_enumerate(&g), Err(Error::NoCycle));
    }

    #[test]
    fn witness_is_rotated_to_smallest_node() {
        let g = RatioGraph::new(3, vec![e(2, 0, 1.0, 1.0), e(0, 1, 2.0, 1.0), e(1, 2, 3.0, 1.0)]).unwrap();
        let w = g.witness(&[2, 0, 1]);
        assert_eq!(w.nodes, vec![0, 1, 2]);
        assert_eq!(w.edges, vec![1, 2, 0]);
        assert_eq!(w.ratio, 2.0);
    }
}
