//! Row-wise kernels shared by the tape ops and by inference code.

use std::cmp::Ordering;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Euclidean projection of `z` onto the probability simplex, written to `out`.
///
/// Returns the threshold τ so that `out = max(z − τ, 0)`.
pub fn sparsemax_row(z: &[f64], out: &mut [f64]) -> f64 {
    debug_assert_eq!(z.len(), out.len());
    let mut sorted = z.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumsum = 0.0;
    let mut support_sum = 0.0;
    let mut support = 0usize;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        // 1 + k·z_(k) > Σ_{j≤k} z_(j), with k 1-based
        if 1.0 + (k + 1) as f64 * v > cumsum {
            support = k + 1;
            support_sum = cumsum;
        }
    }
    let tau = (support_sum - 1.0) / support as f64;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - tau).clamp(0.0, 1.0);
    }
    tau
}

/// Numerically stable softmax of one row.
pub fn softmax_row(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Index of the largest entry, ties resolved toward the lower index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparsemax_reference_rows() {
        let mut out = [0.0; 3];
        sparsemax_row(&[2.0, 1.0, 0.1], &mut out);
        assert_eq!(out, [1.0, 0.0, 0.0]);
        let tau = sparsemax_row(&[1.0, 0.8, -1.0], &mut out);
        assert!((tau - 0.4).abs() < 1e-12);
        assert!((out[0] - 0.6).abs() < 1e-12 && (out[1] - 0.4).abs() < 1e-12 && out[2] == 0.0);
        let mut out4 = [0.0; 4];
        for c in [-3.5, 0.0, 17.25] {
            sparsemax_row(&[c; 4], &mut out4);
            assert!(out4.iter().all(|&v| (v - 0.25).abs() < 1e-12));
        }
    }

    #[test]
    fn argmax_prefers_lower_index_on_ties() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0).is_finite() && sigmoid(800.0) == 1.0);
    }
}
