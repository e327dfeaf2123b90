//! Set cover over candidate coverage sets: lazy greedy and exact branch and bound.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Greedy cover of `0..universe`: repeatedly the candidate with the largest
/// residual coverage, ties to the smaller index. `None` if some element is
/// covered by no candidate.
pub fn greedy_cover(universe: usize, sets: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut covered = vec![false; universe];
    let mut left = universe;
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> =
        sets.iter().enumerate().filter(|(_, s)| !s.is_empty()).map(|(i, s)| (s.len(), Reverse(i))).collect();
    let mut chosen = Vec::new();
    while left > 0 {
        let (count, Reverse(i)) = heap.pop()?;
        let fresh = sets[i].iter().filter(|&&c| !covered[c]).count();
        if fresh == 0 {
            continue;
        }
        if fresh < count {
            heap.push((fresh, Reverse(i)));
            continue;
        }
        for &c in &sets[i] {
            if !covered[c] {
                covered[c] = true;
                left -= 1;
            }
        }
        chosen.push(i);
    }
    Some(chosen)
}

/// Minimum-cardinality cover of `0..universe` (at most 64 elements) by
/// branch and bound. Candidates whose coverage is contained in an earlier or
/// larger one are discarded first.
pub fn exact_cover(universe: usize, sets: &[Vec<usize>]) -> Option<Vec<usize>> {
    assert!(universe <= 64, "exact cover supports at most 64 elements");
    let full: u64 = if universe == 64 { u64::MAX } else { (1u64 << universe) - 1 };
    let masks: Vec<u64> = sets.iter().map(|s| s.iter().fold(0u64, |m, &c| m | (1 << c))).collect();
    if masks.iter().fold(0, |a, m| a | m) != full {
        return None;
    }
    let mut keep: Vec<usize> = Vec::new();
    for (i, &m) in masks.iter().enumerate() {
        if m == 0 {
            continue;
        }
        let dominated = masks.iter().enumerate().any(|(j, &o)| {
            j != i && m & o == m && (o != m || j < i)
        });
        if !dominated {
            keep.push(i);
        }
    }
    keep.sort_by_key(|&i| (Reverse(masks[i].count_ones()), i));
    let mut best = greedy_cover(universe, sets)?;
    let mut stack = Vec::new();
    search(full, 0, &keep, &masks, &mut stack, &mut best);
    best.sort_unstable();
    Some(best)
}

fn search(full: u64, covered: u64, keep: &[usize], masks: &[u64], stack: &mut Vec<usize>, best: &mut Vec<usize>) {
    if covered == full {
        if stack.len() < best.len() {
            *best = stack.clone();
        }
        return;
    }
    if stack.len() + 1 >= best.len() {
        return;
    }
    let missing = full & !covered;
    let largest = keep.iter().map(|&i| (masks[i] & missing).count_ones()).max().unwrap_or(0);
    if largest == 0 {
        return;
    }
    let need = missing.count_ones().div_ceil(largest) as usize;
    if stack.len() + need >= best.len() {
        return;
    }
    let pivot = missing.trailing_zeros();
    for &i in keep {
        if masks[i] >> pivot & 1 == 1 {
            stack.push(i);
            search(full, covered | masks[i], keep, masks, stack, best);
            stack.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_cover(universe: usize, sets: &[Vec<usize>], pick: &[usize]) -> bool {
        let mut c = vec![false; universe];
        pick.iter().for_each(|&i| sets[i].iter().for_each(|&x| c[x] = true));
        c.iter().all(|&b| b)
    }

    #[test]
    fn greedy_tie_breaks_by_index() {
        let sets = vec![vec![0, 1], vec![2, 3], vec![1, 2]];
        assert_eq!(greedy_cover(4, &sets).unwrap(), vec![0, 1]);
    }

    #[test]
    fn greedy_is_suboptimal_where_exact_is_not() {
        let sets = vec![vec![0, 1, 2, 3], vec![0, 1, 4], vec![2, 3, 5]];
        let g = greedy_cover(6, &sets).unwrap();
        let e = exact_cover(6, &sets).unwrap();
        assert!(is_cover(6, &sets, &g) && is_cover(6, &sets, &e));
        assert_eq!(g, vec![0, 1, 2]);
        assert_eq!(e, vec![1, 2]);
    }

    #[test]
    fn uncoverable_is_none() {
        assert!(greedy_cover(3, &[vec![0], vec![1]]).is_none());
        assert!(exact_cover(3, &[vec![0], vec![1]]).is_none());
    }
}
