//! Finite metric spaces with exact distances.

use std::collections::HashMap;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("label list is empty")]
    NoPoints,
    #[error("empty point label at position {0}")]
    EmptyLabel(usize),
    #[error("duplicate point label {0:?}")]
    DuplicateLabel(String),
    #[error("distance table is not {expected}x{expected}")]
    NotSquare { expected: usize },
    #[error("d({0},{0}) is not zero")]
    NonZeroDiagonal(String),
    #[error("d({0},{1}) != d({1},{0})")]
    NonSymmetric(String, String),
    #[error("d({0},{1}) is not positive")]
    NegativeOrZeroOffDiagonal(String, String),
    #[error("d({0},{2}) > d({0},{1}) + d({1},{2})")]
    TriangleViolation(String, String, String),
    #[error("unknown point label {0:?}")]
    UnknownLabel(String),
    #[error("subset is empty")]
    EmptySubset,
}

/// A validated finite metric space. Point order fixes matrix indexing and
/// every later deterministic tie-break.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMetricSpace<T> {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    dist: Vec<Vec<T>>,
}

impl<T: Scalar> FiniteMetricSpace<T> {
    /// Validates a raw labelled distance table, reporting the first violated
    /// axiom together with its witnesses.
    pub fn new(labels: Vec<String>, dist: Vec<Vec<T>>) -> Result<Self, MetricError> {
        let n = labels.len();
        if n == 0 {
            return Err(MetricError::NoPoints);
        }
        let mut index = HashMap::with_capacity(n);
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(MetricError::EmptyLabel(i));
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(MetricError::DuplicateLabel(label.clone()));
            }
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(MetricError::NotSquare { expected: n });
        }
        let name = |i: usize| labels[i].clone();
        for u in 0..n {
            if !dist[u][u].is_zero() {
                return Err(MetricError::NonZeroDiagonal(name(u)));
            }
        }
        for u in 0..n {
            for v in u + 1..n {
                if dist[u][v] != dist[v][u] {
                    return Err(MetricError::NonSymmetric(name(u), name(v)));
                }
                if !dist[u][v].is_positive() {
                    return Err(MetricError::NegativeOrZeroOffDiagonal(name(u), name(v)));
                }
            }
        }
        for u in 0..n {
            for v in 0..n {
                for w in 0..n {
                    if dist[u][w] > dist[u][v].clone() + dist[v][w].clone() {
                        return Err(MetricError::TriangleViolation(name(u), name(v), name(w)));
                    }
                }
            }
        }
        Ok(Self {
            labels,
            index,
            dist,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Result<usize, MetricError> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| MetricError::UnknownLabel(label.to_string()))
    }

    #[inline]
    pub fn dist(&self, u: usize, v: usize) -> &T {
        &self.dist[u][v]
    }

    pub fn distances(&self) -> &[Vec<T>] {
        &self.dist
    }

    /// Restriction of the metric to `subset`, kept in the order given.
    pub fn induced_subspace<S: AsRef<str>>(&self, subset: &[S]) -> Result<Self, MetricError> {
        let idx = subset
            .iter()
            .map(|s| self.index_of(s.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        self.induced_by_indices(&idx)
    }

    pub fn induced_by_indices(&self, idx: &[usize]) -> Result<Self, MetricError> {
        if idx.is_empty() {
            return Err(MetricError::EmptySubset);
        }
        let labels = idx.iter().map(|&i| self.labels[i].clone()).collect();
        let dist = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| self.dist[i][j].clone()).collect())
            .collect();
        Self::new(labels, dist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::Rational;

    fn r(v: i64) -> Rational {
        Rational::from_i64(v)
    }

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn smallest_space_is_valid() {
        let s = FiniteMetricSpace::new(
            labels(&["p", "q"]),
            vec![vec![r(0), r(1)], vec![r(1), r(0)]],
        );
        assert!(s.is_ok());
    }

    #[test]
    fn triangle_violation_names_the_detour() {
        let d = vec![
            vec![r(0), r(1), r(5)],
            vec![r(1), r(0), r(1)],
            vec![r(5), r(1), r(0)],
        ];
        let err = FiniteMetricSpace::new(labels(&["u", "v", "w"]), d).unwrap_err();
        assert_eq!(
            err,
            MetricError::TriangleViolation("u".into(), "v".into(), "w".into())
        );
    }

    #[test]
    fn line_passes_exhaustive_axiom_check() {
        let coords = [0i64, 1, 10, 11];
        let d: Vec<Vec<Rational>> = coords
            .iter()
            .map(|a| coords.iter().map(|b| r((a - b).abs())).collect())
            .collect();
        // independent oracle: all triples
        for u in 0..4 {
            for v in 0..4 {
                for w in 0..4 {
                    assert!(d[u][w] <= &d[u][v] + &d[v][w]);
                }
            }
        }
        assert!(FiniteMetricSpace::new(labels(&["0", "1", "10", "11"]), d).is_ok());
    }

    #[test]
    fn rejects_each_axiom() {
        let asym = vec![vec![r(0), r(1)], vec![r(2), r(0)]];
        assert_eq!(
            FiniteMetricSpace::new(labels(&["p", "q"]), asym).unwrap_err(),
            MetricError::NonSymmetric("p".into(), "q".into())
        );
        let zero = vec![vec![r(0), r(0)], vec![r(0), r(0)]];
        assert_eq!(
            FiniteMetricSpace::new(labels(&["p", "q"]), zero).unwrap_err(),
            MetricError::NegativeOrZeroOffDiagonal("p".into(), "q".into())
        );
        let ok = vec![vec![r(0), r(1)], vec![r(1), r(0)]];
        assert_eq!(
            FiniteMetricSpace::new(labels(&["p", "p"]), ok.clone()).unwrap_err(),
            MetricError::DuplicateLabel("p".into())
        );
        assert_eq!(
            FiniteMetricSpace::new(labels(&["p"]), ok).unwrap_err(),
            MetricError::NotSquare { expected: 1 }
        );
        let diag = vec![vec![r(1), r(1)], vec![r(1), r(0)]];
        assert_eq!(
            FiniteMetricSpace::new(labels(&["p", "q"]), diag).unwrap_err(),
            MetricError::NonZeroDiagonal("p".into())
        );
    }

    #[test]
    fn induced_subspaces_slice_the_matrix() {
        let tt = fixtures::two_triangles::<Rational>();
        let a = tt.induced_subspace(&["a1", "a2"]).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.dist(0, 1), &r(1));
        let ab = tt.induced_subspace(&["a1", "b1"]).unwrap();
        assert_eq!(ab.dist(0, 1), &r(10));
        assert_eq!(tt.induced_subspace(tt.labels()).unwrap(), tt);
        assert_eq!(
            tt.induced_subspace(&["zz"]).unwrap_err(),
            MetricError::UnknownLabel("zz".into())
        );
    }

    #[test]
    fn generic_over_machine_ratios() {
        use num_rational::Ratio;
        let d = vec![
            vec![Ratio::<i64>::from_i64(0), Ratio::new(1, 2)],
            vec![Ratio::new(1, 2), Ratio::from_i64(0)],
        ];
        assert!(FiniteMetricSpace::new(labels(&["p", "q"]), d).is_ok());
    }
}
