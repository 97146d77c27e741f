//! Small dense-vector helpers and the fixed-order reduction used for every
//! cross-machine average.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Averages `n` rows of width `width` stored contiguously in `rows`, writing
/// the mean into `out`. The rows buffer is used as scratch.
///
/// Rows are combined by a fixed binary tree (stride doubling over row
/// indices), so the result depends only on the row order and never on how
/// the rows were produced.
pub fn pairwise_mean_rows(rows: &mut [f64], width: usize, out: &mut [f64]) {
    let n = rows.len() / width;
    debug_assert_eq!(rows.len(), n * width);
    debug_assert_eq!(out.len(), width);
    assert!(n > 0, "cannot average zero rows");
    let mut stride = 1;
    while stride < n {
        let mut i = 0;
        while i + stride < n {
            let (head, tail) = rows.split_at_mut((i + stride) * width);
            let dst = &mut head[i * width..(i + 1) * width];
            let src = &tail[..width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += *s;
            }
            i += 2 * stride;
        }
        stride *= 2;
    }
    let inv = n as f64;
    for (o, s) in out.iter_mut().zip(&rows[..width]) {
        *o = *s / inv;
    }
}

/// Scalar version of [`pairwise_mean_rows`] with the same summation tree.
pub fn pairwise_mean(values: &mut [f64]) -> f64 {
    let mut out = [0.0];
    pairwise_mean_rows(values, 1, &mut out);
    out[0]
}
