//! Pool-adjacent-violators isotonic regression.

/// Least-squares projection of `ys` onto the cone of nondecreasing sequences
/// (unit weights).
pub fn isotonic_nondecreasing(ys: &[f64]) -> Vec<f64> {
    // Stack of blocks (mean, count); merging preserves the block mean.
    let mut means: Vec<f64> = Vec::with_capacity(ys.len());
    let mut counts: Vec<usize> = Vec::with_capacity(ys.len());
    for &y in ys {
        let mut m = y;
        let mut c = 1usize;
        while let Some(&last) = means.last() {
            if last <= m {
                break;
            }
            let lc = counts.pop().unwrap();
            let lm = means.pop().unwrap();
            m = (lm * lc as f64 + m * c as f64) / (lc + c) as f64;
            c += lc;
        }
        means.push(m);
        counts.push(c);
    }
    let mut out = Vec::with_capacity(ys.len());
    for (m, c) in means.iter().zip(counts.iter()) {
        out.extend(std::iter::repeat(*m).take(*c));
    }
    out
}
