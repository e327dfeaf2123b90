//! Strongly connected components and the control/chain control sets built on them.

use serde::{Deserialize, Serialize};

use super::{CellSet, CellSetTag, TransitionGraph};
use crate::error::{Error, Result};

/// Iterative Tarjan over `0..n` with successor lists; components are returned
/// with sorted members, ordered by smallest member.
pub fn tarjan_scc<F>(n: usize, mut successors: F) -> Vec<Vec<usize>>
where
    F: FnMut(usize) -> Vec<usize>,
{
    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = vec![(root, successors(root), 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some((v, succ, pos)) = call.last_mut() {
            let v = *v;
            if *pos < succ.len() {
                let w = succ[*pos];
                *pos += 1;
                if index[w] == UNSET {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    let s = successors(w);
                    call.push((w, s, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some((parent, _, _)) = call.last() {
                    low[*parent] = low[*parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps.sort_by_key(|c| c[0]);
    comps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentOptions {
    /// Components with fewer cells are discarded. On exact graphs single
    /// cells next to an equilibrium carry spurious self-loops, so the default
    /// keeps only components of at least two cells.
    pub min_cells: usize,
}

impl Default for ComponentOptions {
    fn default() -> Self {
        Self { min_cells: 2 }
    }
}

/// Strongly connected components with at least one internal edge and
/// `min_cells` members.
pub fn nontrivial_components(graph: &TransitionGraph, opts: &ComponentOptions) -> Vec<Vec<usize>> {
    tarjan_scc(graph.num_nodes(), |v| graph.successors(v))
        .into_iter()
        .filter(|c| {
            let internal = c.len() > 1 || graph.successors(c[0]).contains(&c[0]);
            internal && c.len() >= opts.min_cells.max(1)
        })
        .collect()
}

fn tagged(graph: &TransitionGraph, opts: &ComponentOptions, tag: CellSetTag) -> Result<Vec<CellSet>> {
    let comps = nontrivial_components(graph, opts);
    if comps.is_empty() {
        return Err(Error::EmptyResult(format!(
            "no recurrent component on grid {} with dwell {} and epsilon {}",
            graph.grid.id(),
            graph.dwell,
            graph.epsilon
        )));
    }
    Ok(comps.into_iter().map(|c| CellSet::new(c, tag)).collect())
}

/// Grid approximations of control sets from an exact (`ε ≈ 0`) graph.
pub fn control_sets(graph: &TransitionGraph, opts: &ComponentOptions) -> Result<Vec<CellSet>> {
    if graph.epsilon > graph.grid.cell_width() {
        log::warn!(
            "control_sets on a graph fattened by {} (> one cell width); results approximate chain control sets",
            graph.epsilon
        );
    }
    tagged(graph, opts, CellSetTag::ControlSet)
}

/// Grid approximations of chain control sets from an `ε`-fattened graph.
pub fn chain_control_sets(graph: &TransitionGraph, opts: &ComponentOptions) -> Result<Vec<CellSet>> {
    tagged(graph, opts, CellSetTag::ChainControlSet)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tarjan_on_small_graph() {
        let adj = vec![vec![1], vec![2], vec![0, 3], vec![4], vec![3], vec![5]];
        let comps = tarjan_scc(6, |v| adj[v].clone());
        assert_eq!(comps, vec![vec![0, 1, 2], vec![3, 4], vec![5]]);
    }

    #[test]
    fn tarjan_deep_chain_does_not_overflow() {
        let n = 200_000;
        let comps = tarjan_scc(n, |v| if v + 1 < n { vec![v + 1] } else { vec![0] });
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].len(), n);
    }
}
