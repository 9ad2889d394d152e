/// Number of signals by the minimum description length criterion over
/// `s ∈ [0, dim)`: data term `−snapshots·(dim−s)·ln(geo/arith)` of the
/// trailing eigenvalues plus `½ s (2 dim − s) ln snapshots`.
/// Eigenvalues are floored at `1e-12 λ_1` before taking logarithms.
pub fn mdl_order(eigenvalues: &[f64], snapshots: usize) -> usize {
    let dim = eigenvalues.len();
    if dim == 0 {
        return 0;
    }
    let floor = 1e-12 * eigenvalues[0].max(f64::MIN_POSITIVE);
    let lam: Vec<f64> = eigenvalues.iter().map(|&v| v.max(floor)).collect();
    let ln_k = (snapshots.max(1) as f64).ln();
    let mut best = (f64::INFINITY, 0);
    for s in 0..dim {
        let tail = &lam[s..];
        let t = tail.len() as f64;
        let ln_geo = tail.iter().map(|v| v.ln()).sum::<f64>() / t;
        let ln_arith = (tail.iter().sum::<f64>() / t).ln();
        let data = -(snapshots as f64) * t * (ln_geo - ln_arith);
        let penalty = 0.5 * s as f64 * (2.0 * dim as f64 - s as f64) * ln_k;
        let score = data + penalty;
        if score < best.0 {
            best = (score, s);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct transcription with explicit products, as an oracle.
    fn mdl_naive(l: &[f64], k: usize) -> Vec<f64> {
        let d = l.len();
        (0..d)
            .map(|s| {
                let t = (d - s) as f64;
                let geo = l[s..].iter().product::<f64>().powf(1.0 / t);
                let arith = l[s..].iter().sum::<f64>() / t;
                -((geo / arith).powf(t * k as f64)).ln() + 0.5 * (s * (2 * d - s)) as f64 * (k as f64).ln()
            })
            .collect()
    }

    #[test]
    fn examples() {
        assert_eq!(mdl_order(&[10.0, 1.001, 0.999, 1.0], 10_000), 1);
        assert_eq!(mdl_order(&[2.0; 6], 10_000), 0);
        assert_eq!(mdl_order(&[50.0, 40.0, 1.0, 1.0, 1.0], 10_000), 2);
    }

    #[test]
    fn agrees_with_naive_scores() {
        let l = [5.0, 3.0, 1.2, 1.0, 0.9];
        let scores = mdl_naive(&l, 20);
        let argmin = scores.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(mdl_order(&l, 20), argmin);
    }

    #[test]
    fn zero_eigenvalues_are_floored() {
        let s = mdl_order(&[4.0, 3.0, 0.0, 0.0], 100);
        assert!(s < 4);
        assert_eq!(s, 2);
    }
}
