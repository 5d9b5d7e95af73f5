//! Weighted pool-adjacent-violators.

/// Nondecreasing fit minimizing `sum_k w_k (y_k - v_k)^2`. Weights must be positive.
pub fn pava(y: &[f64], w: &[f64]) -> Vec<f64> {
    debug_assert_eq!(y.len(), w.len());
    // (weighted mean, total weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&yk, &wk) in y.iter().zip(w) {
        let mut cur = (yk, wk, 1usize);
        while let Some(&(m, tw, len)) = blocks.last() {
            if m < cur.0 {
                break;
            }
            blocks.pop();
            let total = tw + cur.1;
            cur = ((m * tw + cur.0 * cur.1) / total, total, len + cur.2);
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(y.len());
    for (m, _, len) in blocks {
        out.extend(std::iter::repeat_n(m, len));
    }
    out
}

/// Maximal runs of equal values, as `start..end` ranges.
pub fn level_sets(v: &[f64]) -> Vec<std::ops::Range<usize>> {
    let mut sets = Vec::new();
    let mut start = 0;
    for k in 1..=v.len() {
        if k == v.len() || v[k] != v[start] {
            sets.push(start..k);
            start = k;
        }
    }
    sets
}
