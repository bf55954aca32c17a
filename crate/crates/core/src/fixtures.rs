//! Small named spaces used throughout the tests and the examples in the
//! README.

use crate::metric::FiniteMetricSpace;
use crate::scalar::Scalar;

fn build<T: Scalar>(labels: &[&str], dist: &[&[i64]]) -> FiniteMetricSpace<T> {
    let labels = labels.iter().map(|s| s.to_string()).collect();
    let dist = dist
        .iter()
        .map(|row| row.iter().map(|&v| T::from_i64(v)).collect())
        .collect();
    FiniteMetricSpace::new(labels, dist).expect("fixture is a metric")
}

/// Points `p`, `q` at distance 1.
pub fn two_point<T: Scalar>() -> FiniteMetricSpace<T> {
    build(&["p", "q"], &[&[0, 1], &[1, 0]])
}

/// Points `0, 1, 10, 11` on the real line.
pub fn line4<T: Scalar>() -> FiniteMetricSpace<T> {
    let xs = [0i64, 1, 10, 11];
    let rows: Vec<Vec<i64>> = xs
        .iter()
        .map(|a| xs.iter().map(|b| (a - b).abs()).collect())
        .collect();
    let rows: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
    build(&["0", "1", "10", "11"], &rows)
}

/// Two triangles `A = {a1, a2, a3}` and `B = {b1, b2, b3}` ten apart.
///
/// Inside each triangle the `1`/`2` edges make `{a1a2, b1b2, a3b3}` the
/// unique minimum perfect matching (weight 12).
pub fn two_triangles<T: Scalar>() -> FiniteMetricSpace<T> {
    build(
        &["a1", "a2", "a3", "b1", "b2", "b3"],
        &[
            &[0, 1, 2, 10, 10, 10],
            &[1, 0, 2, 10, 10, 10],
            &[2, 2, 0, 10, 10, 10],
            &[10, 10, 10, 0, 1, 2],
            &[10, 10, 10, 1, 0, 2],
            &[10, 10, 10, 2, 2, 0],
        ],
    )
}
