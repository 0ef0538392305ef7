//! Order-independent reductions.
//!
//! Every sum in the crate goes through [`tree_sum`], whose association
//! order depends only on the slice length, so results do not change with
//! the size of the rayon pool.

const LEAF: usize = 64;

/// Pairwise summation with a fixed split pattern.
pub fn tree_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    tree_sum(&xs[..mid]) + tree_sum(&xs[mid..])
}

/// Largest value ignoring NaN; `-inf` for an empty input.
pub fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(f64::NEG_INFINITY, |a, b| if b > a { b } else { a })
}

/// Smallest value ignoring NaN; `+inf` for an empty input.
pub fn min_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(f64::INFINITY, |a, b| if b < a { b } else { a })
}
