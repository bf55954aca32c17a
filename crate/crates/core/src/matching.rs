//! Minimum-weight perfect matchings on metric-weighted complete graphs,
//! their odd-cut duals, and laminar dual families.
//!
//! Vertex subsets are bitmasks over the *local* vertex order of a
//! [`MatchingInstance`], which is the point order of the ambient space.
//! Odd cuts are enumerated explicitly, so the linear programs here are
//! limited to [`MAX_LP_VERTICES`] vertices.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::lp::{self, LinearProgram, LpStatus, Relation, Sense};
use crate::metric::FiniteMetricSpace;
use crate::scalar::Scalar;

/// Largest vertex count for brute force and odd-cut enumeration.
pub const MAX_LP_VERTICES: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchingError {
    #[error("{0} vertices exceeds the limit of {MAX_LP_VERTICES}")]
    TooLarge(usize),
    #[error("{0} vertices exceeds the bitmask limit of 64")]
    TooManyVertices(usize),
    #[error("matching instance needs an even number (>= 2) of vertices, got {0}")]
    BadVertexCount(usize),
    #[error("point {0} appears more than once")]
    DuplicatePoint(String),
    #[error("point {0} is not in the space")]
    UnknownPoint(String),
    #[error("not a perfect matching of the instance vertices")]
    NotPerfect,
    #[error("LP vertex is not integral")]
    NonIntegralVertex,
    #[error("linear program did not reach an optimum")]
    SolverFailure,
    #[error("uncrossing failed: {0}")]
    UncrossingFailed(String),
}

/// A subset of instance vertices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexSet(u64);

impl VertexSet {
    pub const EMPTY: VertexSet = VertexSet(0);

    pub fn from_bits(bits: u64) -> Self {
        VertexSet(bits)
    }

    pub fn singleton(v: usize) -> Self {
        VertexSet(1 << v)
    }

    pub fn from_indices(idx: impl IntoIterator<Item = usize>) -> Self {
        VertexSet(idx.into_iter().fold(0, |acc, i| acc | (1 << i)))
    }

    pub fn full(n: usize) -> Self {
        if n == 64 {
            VertexSet(u64::MAX)
        } else {
            VertexSet((1u64 << n) - 1)
        }
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, v: usize) -> bool {
        self.0 >> v & 1 == 1
    }

    pub fn is_subset(self, other: VertexSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_proper_subset(self, other: VertexSet) -> bool {
        self != other && self.is_subset(other)
    }

    pub fn intersects(self, other: VertexSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn intersection(self, other: VertexSet) -> Self {
        VertexSet(self.0 & other.0)
    }

    pub fn union(self, other: VertexSet) -> Self {
        VertexSet(self.0 | other.0)
    }

    pub fn difference(self, other: VertexSet) -> Self {
        VertexSet(self.0 & !other.0)
    }

    pub fn complement(self, n: usize) -> Self {
        VertexSet(!self.0 & VertexSet::full(n).0)
    }

    /// Whether the edge `{a, b}` crosses the boundary of this set.
    pub fn separates(self, a: usize, b: usize) -> bool {
        self.contains(a) != self.contains(b)
    }

    /// Nested-or-disjoint test.
    pub fn laminar_with(self, other: VertexSet) -> bool {
        !self.intersects(other) || self.is_subset(other) || other.is_subset(self)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..64).filter(move |i| bits >> i & 1 == 1)
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// The complete graph on an even set of points of a metric space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingInstance<T> {
    space: FiniteMetricSpace<T>,
    vertices: Vec<usize>,
}

impl<T: Scalar> MatchingInstance<T> {
    /// Vertices are reordered into the point order of `space`.
    pub fn new(space: FiniteMetricSpace<T>, vertices: &[usize]) -> Result<Self, MatchingError> {
        let k = vertices.len();
        if k < 2 || k % 2 == 1 {
            return Err(MatchingError::BadVertexCount(k));
        }
        if k > 64 {
            return Err(MatchingError::TooManyVertices(k));
        }
        let mut sorted = vertices.to_vec();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(MatchingError::DuplicatePoint(space.label(w[0]).to_string()));
            }
        }
        if let Some(&bad) = sorted.iter().find(|&&v| v >= space.len()) {
            return Err(MatchingError::UnknownPoint(format!("#{bad}")));
        }
        Ok(Self {
            space,
            vertices: sorted,
        })
    }

    pub fn from_labels<S: AsRef<str>>(
        space: FiniteMetricSpace<T>,
        labels: &[S],
    ) -> Result<Self, MatchingError> {
        let idx = labels
            .iter()
            .map(|l| {
                space
                    .index_of(l.as_ref())
                    .map_err(|_| MatchingError::UnknownPoint(l.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(space, &idx)
    }

    /// The instance on all points of the pairs.
    pub fn from_pairs(
        space: FiniteMetricSpace<T>,
        pairs: &[(usize, usize)],
    ) -> Result<Self, MatchingError> {
        let pts: Vec<usize> = pairs.iter().flat_map(|&(x, y)| [x, y]).collect();
        Self::new(space, &pts)
    }

    pub fn space(&self) -> &FiniteMetricSpace<T> {
        &self.space
    }

    /// Space indices, in local order.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Half the vertex count; the `n` of `K(M_n)`.
    pub fn half(&self) -> usize {
        self.vertices.len() / 2
    }

    pub fn local(&self, point: usize) -> Option<usize> {
        self.vertices.binary_search(&point).ok()
    }

    pub fn weight(&self, a: usize, b: usize) -> &T {
        self.space.dist(self.vertices[a], self.vertices[b])
    }

    pub fn all(&self) -> VertexSet {
        VertexSet::full(self.num_vertices())
    }

    /// Local edges `(a, b)` with `a < b`, lexicographic.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let k = self.num_vertices();
        (0..k)
            .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
            .collect()
    }

    pub fn set_labels(&self, set: VertexSet) -> Vec<String> {
        set.iter()
            .map(|v| self.space.label(self.vertices[v]).to_string())
            .collect()
    }

    /// The representative of the cut `{set, V \ set}` with at most `n`
    /// vertices; at exactly `n` the side holding local vertex 0 wins.
    pub fn canonical(&self, set: VertexSet) -> VertexSet {
        let (k, n) = (self.num_vertices(), self.half());
        let c = set.complement(k);
        match set.len().cmp(&n) {
            std::cmp::Ordering::Less => set,
            std::cmp::Ordering::Greater => c,
            std::cmp::Ordering::Equal if set.contains(0) => set,
            std::cmp::Ordering::Equal => c,
        }
    }

    /// Canonical odd cut sides, ordered by size and then bit pattern.
    pub fn odd_cuts(&self) -> Result<Vec<VertexSet>, MatchingError> {
        let k = self.num_vertices();
        if k > MAX_LP_VERTICES {
            return Err(MatchingError::TooLarge(k));
        }
        let mut cuts: Vec<VertexSet> = (1u64..1 << k)
            .map(VertexSet)
            .filter(|s| s.len() % 2 == 1 && self.canonical(*s) == *s)
            .collect();
        cuts.sort_by_key(|s| (s.len(), s.bits()));
        Ok(cuts)
    }

    fn local_pairs(&self, matching: &Matching) -> Result<Vec<(usize, usize)>, MatchingError> {
        let mut covered = VertexSet::EMPTY;
        let mut out = Vec::with_capacity(matching.pairs.len());
        for &(u, v) in &matching.pairs {
            let (a, b) = match (self.local(u), self.local(v)) {
                (Some(a), Some(b)) if a != b => (a, b),
                _ => return Err(MatchingError::NotPerfect),
            };
            if covered.contains(a) || covered.contains(b) {
                return Err(MatchingError::NotPerfect);
            }
            covered = covered.union(VertexSet::from_indices([a, b]));
            out.push((a.min(b), a.max(b)));
        }
        if covered != self.all() {
            return Err(MatchingError::NotPerfect);
        }
        Ok(out)
    }
}

/// A perfect matching, as pairs of space indices with `a < b`, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut pairs: Vec<(usize, usize)> = pairs
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        pairs.sort_unstable();
        Self { pairs }
    }

    pub fn weight<T: Scalar>(&self, space: &FiniteMetricSpace<T>) -> T {
        let mut w = T::zero();
        for &(a, b) in &self.pairs {
            w += space.dist(a, b);
        }
        w
    }

    pub fn labels<T: Scalar>(&self, space: &FiniteMetricSpace<T>) -> Vec<[String; 2]> {
        self.pairs
            .iter()
            .map(|&(a, b)| [space.label(a).to_string(), space.label(b).to_string()])
            .collect()
    }
}

/// Exhaustive minimum over all `(2n-1)!!` perfect matchings. Among equal
/// weights the lexicographically first pair list wins.
pub fn brute_force_min_matching<T: Scalar>(
    inst: &MatchingInstance<T>,
) -> Result<(Matching, T), MatchingError> {
    let k = inst.num_vertices();
    if k > MAX_LP_VERTICES {
        return Err(MatchingError::TooLarge(k));
    }
    struct Search<'a, T> {
        inst: &'a MatchingInstance<T>,
        current: Vec<(usize, usize)>,
        best: Option<(Vec<(usize, usize)>, T)>,
    }
    impl<T: Scalar> Search<'_, T> {
        fn go(&mut self, free: VertexSet, acc: T) {
            let Some(a) = free.iter().next() else {
                if self.best.as_ref().is_none_or(|(_, w)| acc < *w) {
                    self.best = Some((self.current.clone(), acc));
                }
                return;
            };
            let rest = free.difference(VertexSet::singleton(a));
            for b in rest.iter() {
                let w = acc.clone() + self.inst.weight(a, b).clone();
                self.current.push((a, b));
                self.go(rest.difference(VertexSet::singleton(b)), w);
                self.current.pop();
            }
        }
    }
    let mut s = Search {
        inst,
        current: Vec::new(),
        best: None,
    };
    s.go(inst.all(), T::zero());
    let (pairs, w) = s.best.expect("at least one perfect matching");
    let v = inst.vertices();
    Ok((
        Matching::new(pairs.into_iter().map(|(a, b)| (v[a], v[b]))),
        w,
    ))
}

/// The matching primal: minimize `w.x` with `x(delta(v)) = 1` for every
/// vertex and `x(delta(S)) >= 1` for every non-trivial odd cut. Variables
/// follow [`MatchingInstance::edges`]; rows follow [`MatchingInstance::odd_cuts`].
pub fn matching_primal_lp<T: Scalar>(
    inst: &MatchingInstance<T>,
) -> Result<LinearProgram<T>, MatchingError> {
    let cuts = inst.odd_cuts()?;
    let edges = inst.edges();
    let mut lp = LinearProgram::new(
        Sense::Minimize,
        edges
            .iter()
            .map(|&(a, b)| inst.weight(a, b).clone())
            .collect(),
    );
    for cut in &cuts {
        let row = edges
            .iter()
            .map(|&(a, b)| {
                if cut.separates(a, b) {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect();
        let rel = if cut.len() == 1 {
            Relation::Eq
        } else {
            Relation::Ge
        };
        lp.add_constraint(row, rel, T::one());
    }
    Ok(lp)
}

/// The odd-cut dual with every weight nonnegative, trivial cuts included:
/// maximize `sum y_C` with `sum_{C separating e} y_C <= w(e)`. Variables
/// follow [`MatchingInstance::odd_cuts`]; rows follow the edges.
pub fn matching_dual_lp<T: Scalar>(
    inst: &MatchingInstance<T>,
) -> Result<LinearProgram<T>, MatchingError> {
    let cuts = inst.odd_cuts()?;
    let mut lp = LinearProgram::new(Sense::Maximize, vec![T::one(); cuts.len()]);
    for (a, b) in inst.edges() {
        let row = cuts
            .iter()
            .map(|c| {
                if c.separates(a, b) {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect();
        lp.add_constraint(row, Relation::Le, inst.weight(a, b).clone());
    }
    Ok(lp)
}

/// Optimal vertex of the matching primal, decoded into a matching.
///
/// The primal is not solved directly: it has one row per odd cut and the
/// tableau stalls on its degenerate phase one. Instead the dual is solved
/// with free weights on trivial cuts, whose row multipliers are a basic
/// optimal solution of exactly the primal.
pub fn solve_matching_lp<T: Scalar>(
    inst: &MatchingInstance<T>,
) -> Result<(Matching, T), MatchingError> {
    let mut lp = matching_dual_lp(inst)?;
    for (j, cut) in inst.odd_cuts()?.iter().enumerate() {
        if cut.len() == 1 {
            lp.set_free(j);
        }
    }
    let out = lp::solve_lp(&lp).map_err(|_| MatchingError::SolverFailure)?;
    if out.status != LpStatus::Optimal {
        return Err(MatchingError::SolverFailure);
    }
    decode_vertex(inst, &out.dual, out.objective)
}

/// Solves the matching primal as stated. Exponentially slower than
/// [`solve_matching_lp`] beyond eight vertices; kept as a cross-check.
pub fn solve_matching_lp_direct<T: Scalar>(
    inst: &MatchingInstance<T>,
) -> Result<(Matching, T), MatchingError> {
    let lp = matching_primal_lp(inst)?;
    let out = lp::solve_lp(&lp).map_err(|_| MatchingError::SolverFailure)?;
    if out.status != LpStatus::Optimal {
        return Err(MatchingError::SolverFailure);
    }
    decode_vertex(inst, &out.primal, out.objective)
}

fn decode_vertex<T: Scalar>(
    inst: &MatchingInstance<T>,
    x: &[T],
    objective: T,
) -> Result<(Matching, T), MatchingError> {
    let v = inst.vertices();
    let mut pairs = Vec::new();
    for (x, (a, b)) in x.iter().zip(inst.edges()) {
        if x.is_one() {
            pairs.push((v[a], v[b]));
        } else if !x.is_zero() {
            return Err(MatchingError::NonIntegralVertex);
        }
    }
    let matching = Matching::new(pairs);
    inst.local_pairs(&matching)?;
    if matching.weight(inst.space()) != objective {
        return Err(MatchingError::SolverFailure);
    }
    Ok((matching, objective))
}

/// Optimal odd-cut weights, keyed by canonical cut side. Only positive
/// weights are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawOddCutDual<T> {
    pub weights: BTreeMap<VertexSet, T>,
    pub objective: T,
}

pub fn solve_dual_lp<T: Scalar>(
    inst: &MatchingInstance<T>,
) -> Result<RawOddCutDual<T>, MatchingError> {
    let cuts = inst.odd_cuts()?;
    let lp = matching_dual_lp(inst)?;
    let out = lp::solve_lp(&lp).map_err(|_| MatchingError::SolverFailure)?;
    if out.status != LpStatus::Optimal {
        return Err(MatchingError::SolverFailure);
    }
    let weights = cuts
        .into_iter()
        .zip(out.primal)
        .filter(|(_, y)| y.is_positive())
        .collect();
    Ok(RawOddCutDual {
        weights,
        objective: out.objective,
    })
}

/// A nested family of odd vertex sets with nonnegative weights. Every
/// singleton is a member; the weight of `D` is the dual value of the cut
/// `delta(D)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaminarDual<T> {
    num_vertices: usize,
    members: BTreeMap<VertexSet, T>,
}

impl<T: Scalar> LaminarDual<T> {
    /// Takes the family as given; see [`verify_dual_certificate`] for the
    /// structural checks.
    pub fn new(num_vertices: usize, members: impl IntoIterator<Item = (VertexSet, T)>) -> Self {
        Self {
            num_vertices,
            members: members.into_iter().collect(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn members(&self) -> &BTreeMap<VertexSet, T> {
        &self.members
    }

    pub fn weight(&self, set: VertexSet) -> Option<&T> {
        self.members.get(&set)
    }

    pub fn weight_mut(&mut self, set: VertexSet) -> Option<&mut T> {
        self.members.get_mut(&set)
    }

    /// Members ordered by cardinality, then bit pattern.
    pub fn family(&self) -> Vec<VertexSet> {
        let mut f: Vec<VertexSet> = self.members.keys().copied().collect();
        f.sort_by_key(|s| (s.len(), s.bits()));
        f
    }

    pub fn objective(&self) -> T {
        let mut t = T::zero();
        for w in self.members.values() {
            t += w;
        }
        t
    }

    /// `sum_{D separating a, b} y_D`.
    pub fn edge_load(&self, a: usize, b: usize) -> T {
        let mut t = T::zero();
        for (s, w) in &self.members {
            if s.separates(a, b) {
                t += w;
            }
        }
        t
    }

    /// Replaces every member by the canonical side of its cut and merges
    /// weights of members describing the same cut.
    pub fn normalize_complements(&self, inst: &MatchingInstance<T>) -> Self {
        let mut members: BTreeMap<VertexSet, T> = BTreeMap::new();
        for (s, w) in &self.members {
            *members.entry(inst.canonical(*s)).or_insert_with(T::zero) += w;
        }
        Self {
            num_vertices: self.num_vertices,
            members,
        }
    }
}

/// Shifts weight off crossing pairs until the support is laminar.
///
/// For crossing `D, T`, `min(y_D, y_T)` moves to whichever of
/// `{D & T, D | T}` or `{D - T, T - D}` consists of odd sets. Edge loads
/// never increase and the total weight is preserved. The potential
/// `sum y_C |C| (2n - |C|)` drops by at least `2 min(y_D, y_T)` per step,
/// so the loop is finite for rational weights.
pub fn uncross<T: Scalar>(
    inst: &MatchingInstance<T>,
    weights: &BTreeMap<VertexSet, T>,
) -> Result<BTreeMap<VertexSet, T>, MatchingError> {
    const MAX_STEPS: usize = 1_000_000;
    let mut w: BTreeMap<VertexSet, T> = BTreeMap::new();
    for (s, y) in weights {
        if y.is_negative() {
            return Err(MatchingError::UncrossingFailed(format!(
                "negative weight on {s:?}"
            )));
        }
        if s.len() % 2 == 0 {
            return Err(MatchingError::UncrossingFailed(format!("even set {s:?}")));
        }
        if y.is_positive() {
            *w.entry(inst.canonical(*s)).or_insert_with(T::zero) += y;
        }
    }
    for _ in 0..MAX_STEPS {
        let keys: Vec<VertexSet> = w.keys().copied().collect();
        let crossing = keys.iter().enumerate().find_map(|(i, &d)| {
            keys[i + 1..]
                .iter()
                .find(|&&t| !d.laminar_with(t))
                .map(|&t| (d, t))
        });
        let Some((d, t)) = crossing else {
            return Ok(w);
        };
        let eps = w[&d].clone().min(w[&t].clone());
        for s in [d, t] {
            let y = w.get_mut(&s).expect("member");
            *y -= &eps;
            if y.is_zero() {
                w.remove(&s);
            }
        }
        let inter = d.intersection(t);
        let (p, q) = if inter.len() % 2 == 1 {
            (inter, d.union(t))
        } else {
            (d.difference(t), t.difference(d))
        };
        for s in [p, q] {
            *w.entry(inst.canonical(s)).or_insert_with(T::zero) += &eps;
        }
    }
    Err(MatchingError::UncrossingFailed(format!(
        "no fixed point after {MAX_STEPS} steps"
    )))
}

/// Uncrosses an optimal raw dual into a laminar family containing every
/// singleton, then certifies it against `matching`.
pub fn uncross_to_laminar<T: Scalar>(
    inst: &MatchingInstance<T>,
    matching: &Matching,
    raw: &RawOddCutDual<T>,
) -> Result<LaminarDual<T>, MatchingError> {
    let mut members = uncross(inst, &raw.weights)?;
    for v in 0..inst.num_vertices() {
        members
            .entry(VertexSet::singleton(v))
            .or_insert_with(T::zero);
    }
    let dual = LaminarDual::new(inst.num_vertices(), members);
    let report = verify_dual_certificate(inst, matching, &dual);
    if !report.is_valid() {
        return Err(MatchingError::UncrossingFailed(format!(
            "{:?}",
            report.violations
        )));
    }
    Ok(dual)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DualViolation {
    MatchingNotPerfect,
    WrongVertexCount {
        expected: usize,
        found: usize,
    },
    NegativeWeight {
        set: Vec<String>,
        weight: String,
    },
    EvenMember {
        set: Vec<String>,
    },
    MissingSingleton {
        vertex: String,
    },
    NonPositiveWeight {
        set: Vec<String>,
    },
    NotLaminar {
        first: Vec<String>,
        second: Vec<String>,
    },
    Oversized {
        set: Vec<String>,
    },
    SeveralHalfSized {
        first: Vec<String>,
        second: Vec<String>,
    },
    EdgeOverloaded {
        u: String,
        v: String,
        load: String,
        weight: String,
    },
    ObjectiveMismatch {
        dual: String,
        matching: String,
    },
    MatchedEdgeSlack {
        u: String,
        v: String,
        load: String,
        weight: String,
    },
    CutCrossedMoreThanOnce {
        set: Vec<String>,
        crossings: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DualReport {
    pub violations: Vec<DualViolation>,
}

impl DualReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks edge feasibility, zero duality gap against `matching`, tightness
/// of matched edges, single crossing of every positive non-trivial cut, and
/// the structural conditions on the family (nested, all singletons, positive
/// non-singletons, at most `n` elements, at most one member of size `n`).
pub fn verify_dual_certificate<T: Scalar>(
    inst: &MatchingInstance<T>,
    matching: &Matching,
    dual: &LaminarDual<T>,
) -> DualReport {
    let mut violations = Vec::new();
    let k = inst.num_vertices();
    let n = inst.half();
    let names = |s: VertexSet| inst.set_labels(s);
    let vname = |v: usize| inst.space().label(inst.vertices()[v]).to_string();

    if dual.num_vertices() != k || dual.members().keys().any(|s| !s.is_subset(inst.all())) {
        violations.push(DualViolation::WrongVertexCount {
            expected: k,
            found: dual.num_vertices(),
        });
        return DualReport { violations };
    }

    for (s, w) in dual.members() {
        if w.is_negative() {
            violations.push(DualViolation::NegativeWeight {
                set: names(*s),
                weight: w.to_string(),
            });
        }
        if s.len() % 2 == 0 {
            violations.push(DualViolation::EvenMember { set: names(*s) });
        }
        if s.len() > 1 && !w.is_positive() {
            violations.push(DualViolation::NonPositiveWeight { set: names(*s) });
        }
        if s.len() > n {
            violations.push(DualViolation::Oversized { set: names(*s) });
        }
    }
    for v in 0..k {
        if dual.weight(VertexSet::singleton(v)).is_none() {
            violations.push(DualViolation::MissingSingleton { vertex: vname(v) });
        }
    }
    let family = dual.family();
    for (i, &a) in family.iter().enumerate() {
        for &b in &family[i + 1..] {
            if !a.laminar_with(b) {
                violations.push(DualViolation::NotLaminar {
                    first: names(a),
                    second: names(b),
                });
            }
        }
    }
    // with n = 1 the two singletons are forced and share one cut
    let halves: Vec<VertexSet> = family
        .iter()
        .copied()
        .filter(|s| s.len() == n && n > 1)
        .collect();
    if halves.len() > 1 {
        violations.push(DualViolation::SeveralHalfSized {
            first: names(halves[0]),
            second: names(halves[1]),
        });
    }

    for (a, b) in inst.edges() {
        let load = dual.edge_load(a, b);
        if load > *inst.weight(a, b) {
            violations.push(DualViolation::EdgeOverloaded {
                u: vname(a),
                v: vname(b),
                load: load.to_string(),
                weight: inst.weight(a, b).to_string(),
            });
        }
    }

    let Ok(local) = inst.local_pairs(matching) else {
        violations.push(DualViolation::MatchingNotPerfect);
        return DualReport { violations };
    };
    let total = dual.objective();
    let mw = matching.weight(inst.space());
    if total != mw {
        violations.push(DualViolation::ObjectiveMismatch {
            dual: total.to_string(),
            matching: mw.to_string(),
        });
    }
    for &(a, b) in &local {
        let load = dual.edge_load(a, b);
        if load != *inst.weight(a, b) {
            violations.push(DualViolation::MatchedEdgeSlack {
                u: vname(a),
                v: vname(b),
                load: load.to_string(),
                weight: inst.weight(a, b).to_string(),
            });
        }
    }
    for (s, w) in dual.members() {
        if s.len() > 1 && w.is_positive() {
            let crossings = local.iter().filter(|&&(a, b)| s.separates(a, b)).count();
            if crossings != 1 {
                violations.push(DualViolation::CutCrossedMoreThanOnce {
                    set: names(*s),
                    crossings,
                });
            }
        }
    }
    DualReport { violations }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum PrefixCheck {
    Pass {
        pass: bool,
    },
    Fail {
        failing_prefix: usize,
        prefix_weight: String,
        optimal_weight: String,
    },
}

impl PrefixCheck {
    pub fn passed(&self) -> bool {
        matches!(self, PrefixCheck::Pass { .. })
    }
}

/// For `k = 1..=pairs.len()`, compares the weight of the first `k` pairs
/// with the minimum perfect matching on their `2k` points and reports the
/// smallest `k` where the pairs are not optimal.
pub fn check_prefix_matching_criterion<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    pairs: &[(usize, usize)],
) -> Result<PrefixCheck, MatchingError> {
    let mut seen = std::collections::BTreeSet::new();
    for &(x, y) in pairs {
        for p in [x, y] {
            if p >= space.len() {
                return Err(MatchingError::UnknownPoint(format!("#{p}")));
            }
            if !seen.insert(p) {
                return Err(MatchingError::DuplicatePoint(space.label(p).to_string()));
            }
        }
    }
    let mut prefix_weight = T::zero();
    for k in 1..=pairs.len() {
        let (x, y) = pairs[k - 1];
        prefix_weight += space.dist(x, y);
        if k == 1 {
            continue;
        }
        let inst = MatchingInstance::from_pairs(space.clone(), &pairs[..k])?;
        let (_, best) = brute_force_min_matching(&inst)?;
        if prefix_weight > best {
            return Ok(PrefixCheck::Fail {
                failing_prefix: k,
                prefix_weight: prefix_weight.to_string(),
                optimal_weight: best.to_string(),
            });
        }
    }
    Ok(PrefixCheck::Pass { pass: true })
}
