use pathfinding::kuhn_munkres::kuhn_munkres_min;
use pathfinding::matrix::Matrix;

use crate::scene::Angles;

/// Costs are quantized to this many units per radian for the integer solver.
const SCALE: f64 = 1e12;

/// Minimum-total-cost matching of truths (rows) to estimates (columns) by
/// great-circle angle. `result[i]` is the estimate matched to truth `i`, or
/// `None` when there are fewer estimates than truths.
pub fn assign_by_angle(truth: &[Angles], estimates: &[Angles]) -> Vec<Option<usize>> {
    let cost = |i: usize, j: usize| (truth[i].separation(&estimates[j]) * SCALE).round() as i64;
    let (nt, ne) = (truth.len(), estimates.len());
    let mut out = vec![None; nt];
    if nt == 0 || ne == 0 {
        return out;
    }
    if nt <= ne {
        let m = Matrix::from_fn(nt, ne, |(i, j)| cost(i, j));
        let (_, cols) = kuhn_munkres_min(&m);
        for (i, j) in cols.into_iter().enumerate() {
            out[i] = Some(j);
        }
    } else {
        let m = Matrix::from_fn(ne, nt, |(j, i)| cost(i, j));
        let (_, rows) = kuhn_munkres_min(&m);
        for (j, i) in rows.into_iter().enumerate() {
            out[i] = Some(j);
        }
    }
    out
}
