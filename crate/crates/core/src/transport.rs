//! Transportation problems, plans and the transportation cost norm.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lp::{self, LinearProgram, LpStatus, Relation, Sense};
use crate::metric::{FiniteMetricSpace, MetricError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("masses sum to {0}, not zero")]
    NotZeroSum(String),
    #[error("point {0} is not in the space")]
    UnknownPoint(String),
    #[error("function has no value at point {0}")]
    MissingValue(String),
    #[error("negative mass {0} in a plan")]
    NegativeMass(String),
    #[error("transportation LP did not reach an optimum")]
    SolverFailure,
}

impl From<MetricError> for TransportError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::UnknownLabel(l) => TransportError::UnknownPoint(l),
            other => TransportError::UnknownPoint(other.to_string()),
        }
    }
}

/// A finitely supported zero-sum mass function, keyed by point index.
/// Zero masses are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransportationProblem<T> {
    masses: BTreeMap<usize, T>,
}

impl<T: Scalar> TransportationProblem<T> {
    pub fn zero() -> Self {
        Self {
            masses: BTreeMap::new(),
        }
    }

    pub fn new(masses: impl IntoIterator<Item = (usize, T)>) -> Result<Self, TransportError> {
        let mut acc = Self::zero();
        for (p, m) in masses {
            acc.add_mass(p, &m);
        }
        let total = acc.total();
        if !total.is_zero() {
            return Err(TransportError::NotZeroSum(total.to_string()));
        }
        Ok(acc)
    }

    pub fn from_labels<S: AsRef<str>>(
        space: &FiniteMetricSpace<T>,
        masses: impl IntoIterator<Item = (S, T)>,
    ) -> Result<Self, TransportError> {
        let indexed = masses
            .into_iter()
            .map(|(l, m)| Ok((space.index_of(l.as_ref())?, m)))
            .collect::<Result<Vec<_>, TransportError>>()?;
        Self::new(indexed)
    }

    /// `1_source - 1_sink`.
    pub fn unit_move(source: usize, sink: usize) -> Self {
        let mut f = Self::zero();
        f.add_mass(source, &T::one());
        f.add_mass(sink, &-T::one());
        f
    }

    fn add_mass(&mut self, point: usize, mass: &T) {
        if mass.is_zero() {
            return;
        }
        let entry = self.masses.entry(point).or_insert_with(T::zero);
        *entry += mass;
        if entry.is_zero() {
            self.masses.remove(&point);
        }
    }

    fn total(&self) -> T {
        let mut t = T::zero();
        for m in self.masses.values() {
            t += m;
        }
        t
    }

    pub fn masses(&self) -> &BTreeMap<usize, T> {
        &self.masses
    }

    pub fn mass(&self, point: usize) -> T {
        self.masses.get(&point).cloned().unwrap_or_else(T::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (p, m) in &other.masses {
            out.add_mass(*p, m);
        }
        out
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut out = Self::zero();
        for (p, m) in &self.masses {
            let mut v = m.clone();
            v *= c;
            out.add_mass(*p, &v);
        }
        out
    }

    /// `self + c * other`.
    pub fn add_scaled(&mut self, c: &T, other: &Self) {
        for (p, m) in &other.masses {
            let mut v = m.clone();
            v *= c;
            self.add_mass(*p, &v);
        }
    }

    fn check_points(&self, space: &FiniteMetricSpace<T>) -> Result<(), TransportError> {
        match self.masses.keys().find(|&&p| p >= space.len()) {
            Some(p) => Err(TransportError::UnknownPoint(format!("#{p}"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Move<T> {
    pub source: usize,
    pub sink: usize,
    pub mass: T,
}

/// A list of nonnegative point-to-point moves.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TransportationPlan<T> {
    pub moves: Vec<Move<T>>,
}

impl<T: Scalar> TransportationPlan<T> {
    /// `sum mass * (1_source - 1_sink)`.
    pub fn net_effect(&self) -> Result<TransportationProblem<T>, TransportError> {
        let mut f = TransportationProblem::zero();
        for mv in &self.moves {
            if mv.mass.is_negative() {
                return Err(TransportError::NegativeMass(mv.mass.to_string()));
            }
            f.add_mass(mv.source, &mv.mass);
            f.add_mass(mv.sink, &-mv.mass.clone());
        }
        Ok(f)
    }
}

/// Exact cost `sum mass * d(source, sink)` of a plan.
pub fn plan_cost<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    plan: &TransportationPlan<T>,
) -> Result<T, TransportError> {
    let mut cost = T::zero();
    for mv in &plan.moves {
        if mv.source >= space.len() || mv.sink >= space.len() {
            return Err(TransportError::UnknownPoint(format!(
                "#{}",
                mv.source.max(mv.sink)
            )));
        }
        let mut c = mv.mass.clone();
        c *= space.dist(mv.source, mv.sink);
        cost += &c;
    }
    Ok(cost)
}

/// The normalized two-point problem `(1_positive - 1_negative) / d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Molecule<T> {
    pub positive: usize,
    pub negative: usize,
    pub scale: T,
}

impl<T: Scalar> Molecule<T> {
    pub fn new(space: &FiniteMetricSpace<T>, positive: usize, negative: usize) -> Self {
        assert_ne!(positive, negative, "molecule endpoints must differ");
        Self {
            positive,
            negative,
            scale: T::one() / space.dist(positive, negative).clone(),
        }
    }

    pub fn as_problem(&self) -> TransportationProblem<T> {
        TransportationProblem::unit_move(self.positive, self.negative).scale(&self.scale)
    }
}

/// An exact real function on (part of) a finite space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LipschitzFunction<T> {
    values: BTreeMap<usize, T>,
}

impl<T: Scalar> LipschitzFunction<T> {
    pub fn new(values: BTreeMap<usize, T>) -> Self {
        Self { values }
    }

    pub fn from_dense(values: Vec<T>) -> Self {
        Self {
            values: values.into_iter().enumerate().collect(),
        }
    }

    pub fn get(&self, point: usize) -> Option<&T> {
        self.values.get(&point)
    }

    pub fn set(&mut self, point: usize, value: T) {
        self.values.insert(point, value);
    }

    pub fn values(&self) -> &BTreeMap<usize, T> {
        &self.values
    }

    /// First pair `(u, v)` of defined points with `|t(u) - t(v)| > d(u, v)`.
    pub fn lipschitz_violation(&self, space: &FiniteMetricSpace<T>) -> Option<(usize, usize)> {
        let pts: Vec<(&usize, &T)> = self.values.iter().collect();
        for (a, (u, tu)) in pts.iter().enumerate() {
            for (v, tv) in &pts[a + 1..] {
                let diff = ((*tu).clone() - (*tv).clone()).abs();
                if diff > *space.dist(**u, **v) {
                    return Some((**u, **v));
                }
            }
        }
        None
    }
}

/// `sum_x t(x) f(x)`. Constants added to `t` do not change the result.
pub fn pairing<T: Scalar>(
    t: &LipschitzFunction<T>,
    f: &TransportationProblem<T>,
) -> Result<T, TransportError> {
    let mut acc = T::zero();
    for (p, m) in f.masses() {
        let v = t
            .get(*p)
            .ok_or_else(|| TransportError::MissingValue(format!("#{p}")))?;
        let mut term = v.clone();
        term *= m;
        acc += &term;
    }
    Ok(acc)
}

/// Norm value with an optimal plan and optimal dual potentials.
///
/// The potentials are defined on the support of the problem only and
/// satisfy `phi(p) - phi(q) <= d(p, q)` for every source `p` and sink `q`,
/// with `sum phi(x) f(x)` equal to the norm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcNorm<T> {
    pub value: T,
    pub plan: TransportationPlan<T>,
    pub potentials: BTreeMap<usize, T>,
}

/// Transportation cost norm, solved as the bipartite transportation LP
/// from the positive support to the negative support.
pub fn tc_norm<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    f: &TransportationProblem<T>,
) -> Result<TcNorm<T>, TransportError> {
    f.check_points(space)?;
    let total = f.total();
    if !total.is_zero() {
        return Err(TransportError::NotZeroSum(total.to_string()));
    }
    if f.is_zero() {
        return Ok(TcNorm {
            value: T::zero(),
            plan: TransportationPlan { moves: Vec::new() },
            potentials: BTreeMap::new(),
        });
    }
    let sources: Vec<(usize, T)> = f
        .masses()
        .iter()
        .filter(|(_, m)| m.is_positive())
        .map(|(p, m)| (*p, m.clone()))
        .collect();
    let sinks: Vec<(usize, T)> = f
        .masses()
        .iter()
        .filter(|(_, m)| m.is_negative())
        .map(|(p, m)| (*p, -m.clone()))
        .collect();
    let (ns, nt) = (sources.len(), sinks.len());
    let var = |a: usize, b: usize| a * nt + b;

    let cost = (0..ns * nt)
        .map(|k| space.dist(sources[k / nt].0, sinks[k % nt].0).clone())
        .collect();
    let mut lp = LinearProgram::new(Sense::Minimize, cost);
    for (a, (_, supply)) in sources.iter().enumerate() {
        let mut row = vec![T::zero(); ns * nt];
        for b in 0..nt {
            row[var(a, b)] = T::one();
        }
        lp.add_constraint(row, Relation::Eq, supply.clone());
    }
    for (b, (_, demand)) in sinks.iter().enumerate() {
        let mut row = vec![T::zero(); ns * nt];
        for a in 0..ns {
            row[var(a, b)] = T::one();
        }
        lp.add_constraint(row, Relation::Eq, demand.clone());
    }
    let out = lp::solve_lp(&lp).map_err(|_| TransportError::SolverFailure)?;
    if out.status != LpStatus::Optimal {
        return Err(TransportError::SolverFailure);
    }

    let mut moves = Vec::new();
    for a in 0..ns {
        for b in 0..nt {
            let x = &out.primal[var(a, b)];
            if x.is_positive() {
                moves.push(Move {
                    source: sources[a].0,
                    sink: sinks[b].0,
                    mass: x.clone(),
                });
            }
        }
    }
    let mut potentials = BTreeMap::new();
    for (a, (p, _)) in sources.iter().enumerate() {
        potentials.insert(*p, out.dual[a].clone());
    }
    for (b, (q, _)) in sinks.iter().enumerate() {
        potentials.insert(*q, -out.dual[ns + b].clone());
    }
    Ok(TcNorm {
        value: out.objective,
        plan: TransportationPlan { moves },
        potentials,
    })
}

/// Checks that `potentials` certify `value` as a lower bound for `f`:
/// every source/sink pair satisfies the Lipschitz-type inequality and the
/// pairing with `f` equals `value`.
pub fn potentials_certify<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    f: &TransportationProblem<T>,
    potentials: &BTreeMap<usize, T>,
    value: &T,
) -> bool {
    let get = |p: &usize| potentials.get(p);
    for (p, mp) in f.masses() {
        for (q, mq) in f.masses() {
            if mp.is_positive() && mq.is_negative() {
                match (get(p), get(q)) {
                    (Some(a), Some(b)) if a.clone() - b.clone() <= *space.dist(*p, *q) => {}
                    _ => return false,
                }
            }
        }
    }
    let phi = LipschitzFunction::new(potentials.clone());
    matches!(pairing(&phi, f), Ok(v) if v == *value)
}
