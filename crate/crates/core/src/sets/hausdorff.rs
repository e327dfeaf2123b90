use super::{CellSet, GridPartition};
use crate::error::{Error, Result};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `sup_{p ∈ P} dist(p, Q)` over point clouds.
pub fn one_sided_points(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyInput("Hausdorff distance of an empty set".into()));
    }
    Ok(p.iter()
        .map(|a| q.iter().map(|b| dist(a, b)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max))
}

fn centers(a: &CellSet, grid: &GridPartition) -> Vec<Vec<f64>> {
    a.cells.iter().map(|&c| grid.center(c)).collect()
}

/// `sup_{a ∈ A} dist(a, B)` over cell centers.
pub fn one_sided_deviation(a: &CellSet, b: &CellSet, grid: &GridPartition) -> Result<f64> {
    one_sided_points(&centers(a, grid), &centers(b, grid))
}

pub fn hausdorff_distance(a: &CellSet, b: &CellSet, grid: &GridPartition) -> Result<f64> {
    let (pa, pb) = (centers(a, grid), centers(b, grid));
    Ok(one_sided_points(&pa, &pb)?.max(one_sided_points(&pb, &pa)?))
}

/// Index of the candidate sharing the most cells with `reference`; ties go to
/// the earlier candidate, no overlap gives `None`.
pub fn match_by_overlap(reference: &CellSet, candidates: &[CellSet]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let ov = reference.intersection_len(c);
        if ov > 0 && best.map(|(_, b)| ov > b).unwrap_or(true) {
            best = Some((i, ov));
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::CellSetTag;
    use crate::system::StateBox;

    fn unit_grid() -> GridPartition {
        GridPartition::uniform(&StateBox::new(vec![-0.5], vec![4.5]).unwrap(), 5).unwrap()
    }

    #[test]
    fn identical_sets_have_zero_distance() {
        let g = unit_grid();
        let a = CellSet::new(vec![1, 2, 3], CellSetTag::Custom);
        assert_eq!(hausdorff_distance(&a, &a, &g).unwrap(), 0.0);
    }

    #[test]
    fn two_point_metric() {
        let g = unit_grid();
        let a = CellSet::new(vec![0], CellSetTag::Custom);
        let b = CellSet::new(vec![1], CellSetTag::Custom);
        assert_eq!(hausdorff_distance(&a, &b, &g).unwrap(), 1.0);
    }

    #[test]
    fn containment_is_one_sided() {
        let g = unit_grid();
        let a = CellSet::new(vec![1, 2], CellSetTag::Custom);
        let b = CellSet::new(vec![0, 1, 2, 3, 4], CellSetTag::Custom);
        assert_eq!(one_sided_deviation(&a, &b, &g).unwrap(), 0.0);
        assert_eq!(hausdorff_distance(&a, &b, &g).unwrap(), one_sided_deviation(&b, &a, &g).unwrap());
        let empty = CellSet::new(vec![], CellSetTag::Custom);
        assert!(matches!(hausdorff_distance(&a, &empty, &g), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn overlap_matching() {
        let r = CellSet::new(vec![2, 3, 4], CellSetTag::Custom);
        let c = vec![
            CellSet::new(vec![0, 1], CellSetTag::Custom),
            CellSet::new(vec![3], CellSetTag::Custom),
            CellSet::new(vec![2, 3, 9], CellSetTag::Custom),
        ];
        assert_eq!(match_by_overlap(&r, &c), Some(2));
        assert_eq!(match_by_overlap(&r, &c[..1]), None);
    }
}
