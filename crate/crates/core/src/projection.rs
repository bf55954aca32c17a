//! Biorthogonal 1-Lipschitz functionals built from a laminar matching dual,
//! and the norm-one projection onto the span of the matched molecules.
//!
//! Pair `i` is `(x_i, y_i)`; its molecule is `(1_{y_i} - 1_{x_i}) / d(x_i, y_i)`
//! so that `<t_i, m_j> = [i == j]`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::matching::{
    self, DualViolation, LaminarDual, Matching, MatchingError, MatchingInstance, VertexSet,
};
use crate::metric::FiniteMetricSpace;
use crate::scalar::Scalar;
use crate::transport::{self, Molecule, TransportError, TransportationProblem};

pub use crate::transport::LipschitzFunction;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProjectionError {
    #[error("{0:?} is not a member of the dual family")]
    NotAMember(VertexSet),
    #[error("pair {pair}: both branches of t apply at point {point}")]
    WellDefinednessViolation { pair: usize, point: String },
    #[error("dual is not usable: {0:?}")]
    InvalidDual(Vec<DualViolation>),
    #[error("pair {pair}: chain weights sum to {sum}, distance is {distance}")]
    ThresholdMismatch {
        pair: usize,
        sum: String,
        distance: String,
    },
    #[error("the first {0} pairs are not a minimum-weight perfect matching")]
    NotAMinimumMatching(usize),
    #[error("pair index {0} out of range")]
    NoSuchPair(usize),
    #[error("points {0} and {1} fit none of the chain cases")]
    CaseUnresolvable(String, String),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Strictly increasing run of family members.
pub type Chain = Vec<VertexSet>;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Member<T> {
    weight: T,
    // (space point, sum of weights of members strictly inside containing it)
    anchors: Vec<(usize, T)>,
}

/// A matching, a laminar dual for it, and the per-pair chains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualStructure<T> {
    instance: MatchingInstance<T>,
    pairs: Vec<(usize, usize)>,
    dual: LaminarDual<T>,
    members: BTreeMap<VertexSet, Member<T>>,
    d_chains: Vec<Chain>,
    f_chains: Vec<Chain>,
    thresholds: Vec<T>,
}

/// Both candidate values of `t_i(x)` and the one chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TEvaluation<T> {
    pub value: T,
    pub low: T,
    pub high: T,
    /// `low < T_i` and `high > T_i` at once.
    pub conflict: bool,
}

impl<T: Scalar> DualStructure<T> {
    /// `pairs` are `(x_i, y_i)` in space indices and must be a perfect
    /// matching of `instance`. The dual must pass every check of
    /// [`matching::verify_dual_certificate`] except the two cardinality
    /// rules, which the construction does not need.
    pub fn new(
        instance: MatchingInstance<T>,
        pairs: &[(usize, usize)],
        dual: LaminarDual<T>,
    ) -> Result<Self, ProjectionError> {
        let matching = Matching::new(pairs.iter().copied());
        let report = matching::verify_dual_certificate(&instance, &matching, &dual);
        let blocking: Vec<DualViolation> = report
            .violations
            .into_iter()
            .filter(|v| {
                !matches!(
                    v,
                    DualViolation::Oversized { .. } | DualViolation::SeveralHalfSized { .. }
                )
            })
            .collect();
        if !blocking.is_empty() {
            return Err(ProjectionError::InvalidDual(blocking));
        }

        let verts = instance.vertices().to_vec();
        let mut members = BTreeMap::new();
        for (&h, w) in dual.members() {
            let anchors = h
                .iter()
                .map(|v| {
                    let mut off = T::zero();
                    for (&d, y) in dual.members() {
                        if d.contains(v) && d.is_proper_subset(h) {
                            off += y;
                        }
                    }
                    (verts[v], off)
                })
                .collect();
            members.insert(
                h,
                Member {
                    weight: w.clone(),
                    anchors,
                },
            );
        }

        let family = dual.family();
        let chain = |inside: usize, outside: usize| -> Chain {
            family
                .iter()
                .copied()
                .filter(|s| s.contains(inside) && !s.contains(outside))
                .collect()
        };
        let mut d_chains = Vec::new();
        let mut f_chains = Vec::new();
        let mut thresholds = Vec::new();
        for (i, &(x, y)) in pairs.iter().enumerate() {
            let (lx, ly) = (instance.local(x).unwrap(), instance.local(y).unwrap());
            let dc = chain(lx, ly);
            let fc = chain(ly, lx);
            let sum_of = |c: &Chain| {
                let mut s = T::zero();
                for h in c {
                    s += &members[h].weight;
                }
                s
            };
            let t = sum_of(&dc);
            let total = t.clone() + sum_of(&fc);
            if total != *instance.space().dist(x, y) {
                return Err(ProjectionError::ThresholdMismatch {
                    pair: i + 1,
                    sum: total.to_string(),
                    distance: instance.space().dist(x, y).to_string(),
                });
            }
            d_chains.push(dc);
            f_chains.push(fc);
            thresholds.push(t);
        }

        Ok(Self {
            instance,
            pairs: pairs.to_vec(),
            dual,
            members,
            d_chains,
            f_chains,
            thresholds,
        })
    }

    pub fn instance(&self) -> &MatchingInstance<T> {
        &self.instance
    }

    pub fn space(&self) -> &FiniteMetricSpace<T> {
        self.instance.space()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn dual(&self) -> &LaminarDual<T> {
        &self.dual
    }

    pub fn thresholds(&self) -> &[T] {
        &self.thresholds
    }

    fn member(&self, h: VertexSet) -> Result<&Member<T>, ProjectionError> {
        self.members.get(&h).ok_or(ProjectionError::NotAMember(h))
    }

    fn check_pair(&self, i: usize) -> Result<(), ProjectionError> {
        if i >= self.pairs.len() {
            return Err(ProjectionError::NoSuchPair(i));
        }
        Ok(())
    }

    /// `sum of y_D over members D inside F holding v`; `v` is a space index.
    pub fn ball_radius(&self, v: usize, f: VertexSet) -> Result<T, ProjectionError> {
        let m = self.member(f)?;
        let (_, off) = m
            .anchors
            .iter()
            .find(|(p, _)| *p == v)
            .ok_or(ProjectionError::NotAMember(f))?;
        Ok(off.clone() + m.weight.clone())
    }

    /// Whether `x` lies within `ball_radius(v, F)` of some `v` in `F`.
    pub fn uf_membership(&self, f: VertexSet, x: usize) -> Result<bool, ProjectionError> {
        let m = self.member(f)?;
        let d = self.space();
        Ok(m.anchors
            .iter()
            .any(|(v, off)| *d.dist(x, *v) <= off.clone() + m.weight.clone()))
    }

    /// `min over v in H of max(d(x, v) - offset(v), 0)`.
    fn reach(&self, m: &Member<T>, x: usize) -> T {
        let d = self.space();
        m.anchors
            .iter()
            .map(|(v, off)| {
                let gap = d.dist(x, *v).clone() - off.clone();
                if gap.is_negative() {
                    T::zero()
                } else {
                    gap
                }
            })
            .min()
            .expect("members are non-empty")
    }

    fn signed(lambda: &T, theta: Sign, v: T) -> T {
        match theta {
            Sign::Plus => lambda.clone() + v,
            Sign::Minus => lambda.clone() - v,
        }
    }

    pub fn eval_r(
        &self,
        lambda: &T,
        theta: Sign,
        h: VertexSet,
        x: usize,
    ) -> Result<T, ProjectionError> {
        let m = self.member(h)?;
        Ok(Self::signed(lambda, theta, self.reach(m, x)))
    }

    /// `r` with its variable part capped at `y_H`.
    pub fn eval_s(
        &self,
        lambda: &T,
        theta: Sign,
        h: VertexSet,
        x: usize,
    ) -> Result<T, ProjectionError> {
        let m = self.member(h)?;
        let v = self.reach(m, x).min(m.weight.clone());
        Ok(Self::signed(lambda, theta, v))
    }

    /// Members holding `x_i` but not `y_i`, and members holding `y_i` but
    /// not `x_i`, each smallest first.
    pub fn build_chains(&self, i: usize) -> Result<(&Chain, &Chain), ProjectionError> {
        self.check_pair(i)?;
        Ok((&self.d_chains[i], &self.f_chains[i]))
    }

    /// Low branch, high branch and the chosen value of `t_i(x)`: the low
    /// branch wins below the threshold, then the high branch above it,
    /// otherwise the threshold itself.
    pub fn eval_t_detail(&self, i: usize, x: usize) -> Result<TEvaluation<T>, ProjectionError> {
        self.check_pair(i)?;
        let threshold = &self.thresholds[i];

        let mut low: Option<T> = None;
        let mut prefix = T::zero();
        for h in &self.d_chains[i] {
            let m = &self.members[h];
            let v = prefix.clone() + self.reach(m, x);
            low = Some(match low {
                Some(l) => l.min(v),
                None => v,
            });
            prefix += &m.weight;
        }

        let mut high: Option<T> = None;
        let mut level = threshold.clone();
        for h in self.f_chains[i].iter().rev() {
            let m = &self.members[h];
            level += &m.weight;
            let v = level.clone() - self.reach(m, x);
            high = Some(match high {
                Some(hh) => hh.max(v),
                None => v,
            });
        }

        let low = low.expect("chains start at a singleton");
        let high = high.expect("chains start at a singleton");
        let below = low < *threshold;
        let above = high > *threshold;
        let value = if below {
            low.clone()
        } else if above {
            high.clone()
        } else {
            threshold.clone()
        };
        Ok(TEvaluation {
            value,
            low,
            high,
            conflict: below && above,
        })
    }

    pub fn eval_t(&self, i: usize, x: usize) -> Result<T, ProjectionError> {
        let e = self.eval_t_detail(i, x)?;
        if e.conflict {
            return Err(ProjectionError::WellDefinednessViolation {
                pair: i + 1,
                point: self.space().label(x).to_string(),
            });
        }
        Ok(e.value)
    }

    /// `t_i(x)` as a sum of capped functions, one per chain member.
    pub fn eval_t_via_s(&self, i: usize, x: usize) -> Result<T, ProjectionError> {
        self.check_pair(i)?;
        Ok(self.chain_sum(&self.d_chains[i], &self.f_chains[i], x))
    }

    /// `sum_D s_{0,+1,D}(x) + sum_F s_{y_F,-1,F}(x)`.
    fn chain_sum(&self, up: &[VertexSet], down: &[VertexSet], x: usize) -> T {
        let mut acc = T::zero();
        for h in up {
            let m = &self.members[h];
            acc += &self.reach(m, x).min(m.weight.clone());
        }
        for h in down {
            let m = &self.members[h];
            acc += &(m.weight.clone() - self.reach(m, x).min(m.weight.clone()));
        }
        acc
    }

    /// Smallest member (by size, then bit pattern) whose `U` set holds `x`.
    pub fn smallest_covering(&self, x: usize) -> Option<VertexSet> {
        self.smallest_coverings(x).into_iter().next()
    }

    /// All members of minimum size whose `U` set holds `x`. Closed balls can
    /// overlap on their boundaries, so there may be several.
    pub fn smallest_coverings(&self, x: usize) -> Vec<VertexSet> {
        let covering: Vec<VertexSet> = self
            .dual
            .family()
            .into_iter()
            .filter(|h| self.uf_membership(*h, x).unwrap_or(false))
            .collect();
        match covering.first() {
            Some(first) => {
                let len = first.len();
                covering
                    .into_iter()
                    .take_while(|h| h.len() == len)
                    .collect()
            }
            None => Vec::new(),
        }
    }

    /// Members containing `base`, smallest first, as long as their `U` set
    /// misses `other`.
    fn chain_above(&self, base: VertexSet, other: usize) -> Chain {
        self.dual
            .family()
            .into_iter()
            .filter(|h| base.is_subset(*h))
            .take_while(|h| !self.uf_membership(*h, other).unwrap_or(true))
            .collect()
    }

    /// The comparison function `t_{D,F}` for the point pair `(w, z)`.
    ///
    /// Ties among smallest covering members are broken towards a choice
    /// whose chains are well formed: equal or nested members first, then
    /// disjoint members whose `U` sets each miss the other point.
    pub fn t_df(&self, w: usize, z: usize) -> Result<TdfDiagnostic, ProjectionError> {
        let opt = |v: Vec<VertexSet>| {
            if v.is_empty() {
                vec![None]
            } else {
                v.into_iter().map(Some).collect()
            }
        };
        let mut best: Option<(u8, TdfDiagnostic)> = None;
        for d in opt(self.smallest_coverings(w)) {
            for f in opt(self.smallest_coverings(z)) {
                let Some(cand) = self.classify(w, z, d, f) else {
                    continue;
                };
                let rank = match cand.case {
                    DfCase::Equal
                    | DfCase::Nested
                    | DfCase::OneUndefined
                    | DfCase::BothUndefined => 0,
                    DfCase::Disjoint => {
                        // an empty chain means the other point is already covered
                        let clean = !cand.up.is_empty() && !cand.down.is_empty();
                        if clean {
                            1
                        } else {
                            2
                        }
                    }
                };
                if best.as_ref().is_none_or(|(r, _)| rank < *r) {
                    best = Some((rank, cand));
                }
            }
        }
        best.map(|(_, c)| c).ok_or_else(|| {
            ProjectionError::CaseUnresolvable(
                self.space().label(w).to_string(),
                self.space().label(z).to_string(),
            )
        })
    }

    fn classify(
        &self,
        w: usize,
        z: usize,
        d: Option<VertexSet>,
        f: Option<VertexSet>,
    ) -> Option<TdfDiagnostic> {
        let (mut w, mut z, mut d, mut f) = (w, z, d, f);
        let swap = match (d, f) {
            (None, Some(_)) => true,
            (Some(a), Some(b)) => b.is_proper_subset(a),
            _ => false,
        };
        if swap {
            std::mem::swap(&mut w, &mut z);
            std::mem::swap(&mut d, &mut f);
        }
        let (case, up, down) = match (d, f) {
            (None, None) => (DfCase::BothUndefined, Vec::new(), Vec::new()),
            (Some(d), None) => (DfCase::OneUndefined, self.chain_above(d, z), Vec::new()),
            (Some(d), Some(f)) if d == f => (DfCase::Equal, vec![d], Vec::new()),
            (Some(d), Some(f)) if d.is_proper_subset(f) => {
                let up = self
                    .dual
                    .family()
                    .into_iter()
                    .filter(|h| d.is_subset(*h) && h.is_subset(f))
                    .collect();
                (DfCase::Nested, up, Vec::new())
            }
            (Some(d), Some(f)) if !d.intersects(f) => (
                DfCase::Disjoint,
                self.chain_above(d, z),
                self.chain_above(f, w),
            ),
            _ => return None,
        };
        Some(TdfDiagnostic {
            w,
            z,
            case,
            up,
            down,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DfCase {
    /// Smallest covering members are disjoint.
    Disjoint,
    /// The member covering `w` lies strictly inside the one covering `z`.
    Nested,
    Equal,
    /// `z` lies in no `U` set.
    OneUndefined,
    BothUndefined,
}

/// `t_{D,F}` for one point pair, after orienting the pair so that the
/// smaller (or only) covering member belongs to `w`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TdfDiagnostic {
    pub w: usize,
    pub z: usize,
    pub case: DfCase,
    /// Members entering with `s_{0,+1,H}`.
    pub up: Chain,
    /// Members entering with `s_{y_H,-1,H}`.
    pub down: Chain,
}

impl TdfDiagnostic {
    pub fn eval<T: Scalar>(&self, ds: &DualStructure<T>, x: usize) -> T {
        ds.chain_sum(&self.up, &self.down, x)
    }

    pub fn function<T: Scalar>(&self, ds: &DualStructure<T>) -> LipschitzFunction<T> {
        LipschitzFunction::from_dense((0..ds.space().len()).map(|x| self.eval(ds, x)).collect())
    }

    /// Every summand set lies in the chains of exactly one pair.
    pub fn summands_partitioned<T: Scalar>(&self, ds: &DualStructure<T>) -> bool {
        self.up.iter().chain(&self.down).all(|h| {
            let owners = (0..ds.pairs.len())
                .filter(|&i| ds.d_chains[i].contains(h) || ds.f_chains[i].contains(h))
                .count();
            owners == 1
        })
    }
}

/// Outcome of comparing `t_{D,F}` with the functionals over every point pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TdfSurvey {
    pub pairs: usize,
    pub cases: BTreeMap<String, usize>,
    /// `t_{D,F}` fails to be 1-Lipschitz.
    pub not_lipschitz: usize,
    /// Some summand set belongs to no pair or to several.
    pub not_partitioned: usize,
    /// `sum_i |t_i(z) - t_i(w)| = |t_{D,F}(z) - t_{D,F}(w)|`.
    pub equal: usize,
    /// `sum_i |t_i(z) - t_i(w)| < |t_{D,F}(z) - t_{D,F}(w)|`.
    pub below: usize,
    /// `sum_i |t_i(z) - t_i(w)| > |t_{D,F}(z) - t_{D,F}(w)|`.
    pub above: usize,
}

/// The projection onto the span of the matched molecules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionOperator<T> {
    structure: DualStructure<T>,
    pub pairs: Vec<(usize, usize)>,
    pub molecules: Vec<Molecule<T>>,
    pub functionals: Vec<LipschitzFunction<T>>,
    pub thresholds: Vec<T>,
    /// `(pair, point)` where both branches of `t` applied.
    pub conflicts: Vec<(usize, usize)>,
}

/// Coefficients over the molecules.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpanElement<T> {
    pub coefficients: Vec<T>,
}

impl<T: Scalar> SpanElement<T> {
    /// `sum a_i m_i` as a transportation problem.
    pub fn realize(&self, p: &ProjectionOperator<T>) -> TransportationProblem<T> {
        let mut f = TransportationProblem::zero();
        for (a, m) in self.coefficients.iter().zip(&p.molecules) {
            f.add_scaled(a, &m.as_problem());
        }
        f
    }

    /// Coefficients over `1_{y_i} - 1_{x_i}` instead of the molecules.
    pub fn raw_coefficients(&self, p: &ProjectionOperator<T>) -> Vec<T> {
        self.coefficients
            .iter()
            .zip(&p.molecules)
            .map(|(a, m)| a.clone() * m.scale.clone())
            .collect()
    }

    /// `sum |a_i|`, which is the norm of the realized element.
    pub fn l1_norm(&self) -> T {
        let mut s = T::zero();
        for a in &self.coefficients {
            s += &a.abs();
        }
        s
    }
}

impl<T: Scalar> ProjectionOperator<T> {
    pub fn structure(&self) -> &DualStructure<T> {
        &self.structure
    }

    pub fn space(&self) -> &FiniteMetricSpace<T> {
        self.structure.space()
    }

    pub fn rank(&self) -> usize {
        self.pairs.len()
    }

    /// Runs the `t_{D,F}` comparison over all point pairs.
    pub fn survey_t_df(&self) -> Result<TdfSurvey, ProjectionError> {
        let ds = &self.structure;
        let space = self.space();
        let mut out = TdfSurvey::default();
        for a in 0..space.len() {
            for b in a + 1..space.len() {
                let diag = ds.t_df(a, b)?;
                out.pairs += 1;
                *out.cases.entry(format!("{:?}", diag.case)).or_default() += 1;
                let t = diag.function(ds);
                if t.lipschitz_violation(space).is_some() {
                    out.not_lipschitz += 1;
                }
                if !diag.summands_partitioned(ds) {
                    out.not_partitioned += 1;
                }
                let df = (t.get(diag.z).unwrap().clone() - t.get(diag.w).unwrap().clone()).abs();
                let mut sum = T::zero();
                for ti in &self.functionals {
                    sum +=
                        &(ti.get(diag.z).unwrap().clone() - ti.get(diag.w).unwrap().clone()).abs();
                }
                match sum.cmp(&df) {
                    std::cmp::Ordering::Equal => out.equal += 1,
                    std::cmp::Ordering::Less => out.below += 1,
                    std::cmp::Ordering::Greater => out.above += 1,
                }
            }
        }
        Ok(out)
    }
}

/// Builds the operator for `pairs`, which must form a minimum-weight
/// perfect matching of their points. Without `pinned`, the dual comes from
/// the odd-cut LP followed by uncrossing.
pub fn build_projection<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    pairs: &[(usize, usize)],
    pinned: Option<LaminarDual<T>>,
) -> Result<ProjectionOperator<T>, ProjectionError> {
    let instance = MatchingInstance::from_pairs(space.clone(), pairs)?;
    let matching = Matching::new(pairs.iter().copied());
    let (_, best) = matching::solve_matching_lp(&instance)?;
    if matching.weight(space) != best {
        return Err(ProjectionError::NotAMinimumMatching(pairs.len()));
    }
    let dual = match pinned {
        Some(d) => d,
        None => {
            let raw = matching::solve_dual_lp(&instance)?;
            matching::uncross_to_laminar(&instance, &matching, &raw)?
        }
    };
    let structure = DualStructure::new(instance, pairs, dual)?;

    let mut functionals = Vec::with_capacity(pairs.len());
    let mut conflicts = Vec::new();
    for i in 0..pairs.len() {
        let mut values = Vec::with_capacity(space.len());
        for x in 0..space.len() {
            let e = structure.eval_t_detail(i, x)?;
            if e.conflict {
                conflicts.push((i, x));
            }
            values.push(e.value);
        }
        functionals.push(LipschitzFunction::from_dense(values));
    }
    let molecules = pairs
        .iter()
        .map(|&(x, y)| Molecule::new(space, y, x))
        .collect();
    Ok(ProjectionOperator {
        thresholds: structure.thresholds().to_vec(),
        structure,
        pairs: pairs.to_vec(),
        molecules,
        functionals,
        conflicts,
    })
}

/// `a_i = <t_i, f>`.
pub fn apply_projection<T: Scalar>(
    p: &ProjectionOperator<T>,
    f: &TransportationProblem<T>,
) -> Result<SpanElement<T>, ProjectionError> {
    let total = f
        .masses()
        .values()
        .fold(T::zero(), |acc, m| acc + m.clone());
    if !total.is_zero() {
        return Err(TransportError::NotZeroSum(total.to_string()).into());
    }
    let coefficients = p
        .functionals
        .iter()
        .map(|t| transport::pairing(t, f))
        .collect::<Result<_, _>>()?;
    Ok(SpanElement { coefficients })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertifyOptions {
    /// Random coefficient vectors for the isometry check, beyond the
    /// unit and sign vectors.
    pub isometry_vectors: usize,
    /// Random problems for the norm bound, beyond all `1_w - 1_z`.
    pub sample_problems: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            isometry_vectors: 20,
            sample_problems: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub evaluated: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sharpness {
    /// 1-based index of a molecule with `|P(m_i)| = 1`.
    pub molecule: usize,
    pub norm: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CertificateReport {
    pub checks: Vec<CheckResult>,
    pub sharpness: Option<Sharpness>,
}

impl CertificateReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.sharpness.is_some()
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_NAMES: [&str; 7] = [
    "lipschitz",
    "biorthogonality",
    "key_inequality",
    "l1_isometry",
    "norm_bound",
    "s_identity",
    "well_defined",
];

struct Tally {
    name: &'static str,
    evaluated: usize,
    witness: Option<BTreeMap<String, String>>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            evaluated: 0,
            witness: None,
        }
    }

    fn record(&mut self, ok: bool, witness: impl FnOnce() -> Vec<(&'static str, String)>) {
        self.evaluated += 1;
        if !ok && self.witness.is_none() {
            self.witness = Some(
                witness()
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            );
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            passed: self.witness.is_none(),
            evaluated: self.evaluated,
            witness: self.witness,
        }
    }
}

fn random_rational<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    T::from_fraction(rng.gen_range(-12..=12), rng.gen_range(1..=6))
}

/// Exact checks of the operator:
/// `lipschitz` every `t_i` over all point pairs;
/// `biorthogonality` `<t_i, m_j> = [i == j]`;
/// `key_inequality` `sum_i |t_i(z) - t_i(w)| <= d(z, w)` for all pairs;
/// `l1_isometry` `|sum a_i m_i| = sum |a_i|` over a battery of vectors;
/// `norm_bound` `|P f| <= |f|` for all `1_w - 1_z` and random `f`, plus
/// `P(P f) = P f`;
/// `s_identity` the two formulas for `t_i` agree everywhere;
/// `well_defined` no point where both branches of `t_i` apply.
pub fn certify_projection<T: Scalar>(
    p: &ProjectionOperator<T>,
    opts: &CertifyOptions,
) -> Result<CertificateReport, ProjectionError> {
    let space = p.space();
    let ds = p.structure();
    let n = p.rank();
    let npts = space.len();
    let label = |x: usize| space.label(x).to_string();
    let t = |i: usize, x: usize| p.functionals[i].get(x).expect("dense").clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut lip = Tally::new("lipschitz");
    for i in 0..n {
        for u in 0..npts {
            for v in u + 1..npts {
                let ok = (t(i, u) - t(i, v)).abs() <= *space.dist(u, v);
                lip.record(ok, || {
                    vec![
                        ("pair", (i + 1).to_string()),
                        ("u", label(u)),
                        ("v", label(v)),
                        ("t_u", t(i, u).to_string()),
                        ("t_v", t(i, v).to_string()),
                        ("distance", space.dist(u, v).to_string()),
                    ]
                });
            }
        }
    }

    let mut bio = Tally::new("biorthogonality");
    for i in 0..n {
        for j in 0..n {
            let v = transport::pairing(&p.functionals[i], &p.molecules[j].as_problem())?;
            let want = if i == j { T::one() } else { T::zero() };
            bio.record(v == want, || {
                vec![
                    ("i", (i + 1).to_string()),
                    ("j", (j + 1).to_string()),
                    ("pairing", v.to_string()),
                ]
            });
        }
    }

    let mut key = Tally::new("key_inequality");
    for w in 0..npts {
        for z in w + 1..npts {
            let mut sum = T::zero();
            for i in 0..n {
                sum += &(t(i, z) - t(i, w)).abs();
            }
            key.record(sum <= *space.dist(w, z), || {
                vec![
                    ("w", label(w)),
                    ("z", label(z)),
                    ("sum", sum.to_string()),
                    ("distance", space.dist(w, z).to_string()),
                ]
            });
        }
    }

    let mut iso = Tally::new("l1_isometry");
    let mut battery: Vec<Vec<T>> = Vec::new();
    for i in 0..n {
        battery.push(
            (0..n)
                .map(|j| if i == j { T::one() } else { T::zero() })
                .collect(),
        );
    }
    if n <= 6 {
        for mask in 0u32..1 << n {
            battery.push(
                (0..n)
                    .map(|j| {
                        if mask >> j & 1 == 1 {
                            -T::one()
                        } else {
                            T::one()
                        }
                    })
                    .collect(),
            );
        }
    }
    for _ in 0..opts.isometry_vectors {
        battery.push((0..n).map(|_| random_rational(&mut rng)).collect());
    }
    for a in &battery {
        let e = SpanElement {
            coefficients: a.clone(),
        };
        let norm = transport::tc_norm(space, &e.realize(p))?.value;
        let want = e.l1_norm();
        iso.record(norm == want, || {
            vec![
                (
                    "coefficients",
                    a.iter()
                        .map(|c| c.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                ),
                ("norm", norm.to_string()),
                ("l1", want.to_string()),
            ]
        });
    }

    let mut bound = Tally::new("norm_bound");
    let mut problems: Vec<TransportationProblem<T>> = Vec::new();
    for w in 0..npts {
        for z in w + 1..npts {
            problems.push(TransportationProblem::unit_move(w, z));
        }
    }
    for _ in 0..opts.sample_problems {
        let mut masses: Vec<T> = (0..npts)
            .map(|_| T::from_i64(rng.gen_range(-3..=3)))
            .collect();
        let total = masses.iter().fold(T::zero(), |a, m| a + m.clone());
        masses[rng.gen_range(0..npts)] -= &total;
        problems.push(TransportationProblem::new(masses.into_iter().enumerate())?);
    }
    for f in &problems {
        let pf = apply_projection(p, f)?;
        let realized = pf.realize(p);
        let lhs = transport::tc_norm(space, &realized)?.value;
        let rhs = transport::tc_norm(space, f)?.value;
        let again = apply_projection(p, &realized)?;
        bound.record(lhs <= rhs && again == pf, || {
            vec![
                (
                    "problem",
                    f.masses()
                        .iter()
                        .map(|(x, m)| format!("{}:{m}", label(*x)))
                        .collect::<Vec<_>>()
                        .join(","),
                ),
                ("projected_norm", lhs.to_string()),
                ("norm", rhs.to_string()),
                ("idempotent", (again == pf).to_string()),
            ]
        });
    }

    let mut ident = Tally::new("s_identity");
    for i in 0..n {
        for x in 0..npts {
            let via = ds.eval_t_via_s(i, x)?;
            ident.record(via == t(i, x), || {
                vec![
                    ("pair", (i + 1).to_string()),
                    ("point", label(x)),
                    ("t", t(i, x).to_string()),
                    ("s_sum", via.to_string()),
                ]
            });
        }
    }

    let mut wd = Tally::new("well_defined");
    wd.evaluated = n * npts;
    if let Some(&(i, x)) = p.conflicts.first() {
        wd.witness = Some(
            [
                ("pair".to_string(), (i + 1).to_string()),
                ("point".to_string(), label(x)),
            ]
            .into_iter()
            .collect(),
        );
    }

    let mut sharpness = None;
    for (i, m) in p.molecules.iter().enumerate() {
        let pm = apply_projection(p, &m.as_problem())?;
        let norm = transport::tc_norm(space, &pm.realize(p))?.value;
        if norm.is_one() && transport::tc_norm(space, &m.as_problem())?.value.is_one() {
            sharpness = Some(Sharpness {
                molecule: i + 1,
                norm: norm.to_string(),
            });
            break;
        }
    }

    Ok(CertificateReport {
        checks: vec![
            lip.finish(),
            bio.finish(),
            key.finish(),
            iso.finish(),
            bound.finish(),
            ident.finish(),
            wd.finish(),
        ],
        sharpness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::Rational;
    use num_traits::{Signed, Zero};

    fn r(v: i64) -> Rational {
        Rational::from_i64(v)
    }

    fn q(a: i64, b: i64) -> Rational {
        Rational::from_fraction(a, b)
    }

    fn idx(s: &FiniteMetricSpace<Rational>, l: &str) -> usize {
        s.index_of(l).unwrap()
    }

    fn tt_pairs(s: &FiniteMetricSpace<Rational>) -> Vec<(usize, usize)> {
        vec![
            (idx(s, "a1"), idx(s, "a2")),
            (idx(s, "b1"), idx(s, "b2")),
            (idx(s, "a3"), idx(s, "b3")),
        ]
    }

    const A: [usize; 3] = [0, 1, 2];
    const B: [usize; 3] = [3, 4, 5];

    /// Singletons 1/2, A = B = 9/2.
    fn split_dual() -> LaminarDual<Rational> {
        let mut m: BTreeMap<VertexSet, Rational> =
            (0..6).map(|v| (VertexSet::singleton(v), q(1, 2))).collect();
        m.insert(VertexSet::from_indices(A), q(9, 2));
        m.insert(VertexSet::from_indices(B), q(9, 2));
        LaminarDual::new(6, m)
    }

    /// Singletons 1/2, A = 9.
    fn merged_dual() -> LaminarDual<Rational> {
        let mut m: BTreeMap<VertexSet, Rational> =
            (0..6).map(|v| (VertexSet::singleton(v), q(1, 2))).collect();
        m.insert(VertexSet::from_indices(A), r(9));
        LaminarDual::new(6, m)
    }

    fn tt_structure(dual: LaminarDual<Rational>) -> DualStructure<Rational> {
        let s = fixtures::two_triangles::<Rational>();
        let pairs = tt_pairs(&s);
        let inst = MatchingInstance::from_pairs(s, &pairs).unwrap();
        DualStructure::new(inst, &pairs, dual).unwrap()
    }

    fn line4_structure() -> DualStructure<Rational> {
        let s = fixtures::line4::<Rational>();
        let pairs = vec![(0, 1), (2, 3)];
        let inst = MatchingInstance::from_pairs(s, &pairs).unwrap();
        let dual = LaminarDual::new(4, (0..4).map(|v| (VertexSet::singleton(v), q(1, 2))));
        DualStructure::new(inst, &pairs, dual).unwrap()
    }

    #[test]
    fn singleton_u_set_is_a_ball() {
        let ds = line4_structure();
        let s = ds.space();
        let p = VertexSet::singleton(0);
        for x in 0..4 {
            assert_eq!(ds.uf_membership(p, x).unwrap(), *s.dist(x, 0) <= q(1, 2));
        }
        assert_eq!(ds.ball_radius(0, p).unwrap(), q(1, 2));
    }

    #[test]
    fn u_set_of_a_triangle() {
        let ds = tt_structure(split_dual());
        let a = VertexSet::from_indices(A);
        for v in A {
            assert_eq!(ds.ball_radius(v, a).unwrap(), r(5));
            assert!(ds.uf_membership(a, v).unwrap());
        }
        for b in B {
            assert!(!ds.uf_membership(a, b).unwrap());
        }
        assert_eq!(
            ds.ball_radius(0, VertexSet::from_indices([0, 3, 4]))
                .unwrap_err(),
            ProjectionError::NotAMember(VertexSet::from_indices([0, 3, 4]))
        );
    }

    #[test]
    fn r_and_s_direct_values() {
        let ds = tt_structure(split_dual());
        let a = VertexSet::from_indices(A);
        let (a1, b1) = (0, 3);
        assert_eq!(ds.eval_r(&q(1, 2), Sign::Plus, a, a1).unwrap(), q(1, 2));
        assert_eq!(ds.eval_r(&q(1, 2), Sign::Plus, a, b1).unwrap(), r(10));
        assert_eq!(ds.eval_s(&r(0), Sign::Plus, a, b1).unwrap(), q(9, 2));
        // singleton forms
        let v = VertexSet::singleton(a1);
        for x in 0..6 {
            let d = ds.space().dist(x, a1).clone();
            assert_eq!(ds.eval_r(&r(0), Sign::Plus, v, x).unwrap(), d);
            assert_eq!(
                ds.eval_s(&r(0), Sign::Plus, v, x).unwrap(),
                d.clone().min(q(1, 2))
            );
            assert_eq!(
                ds.eval_s(&r(3), Sign::Minus, v, x).unwrap(),
                r(3) - d.min(q(1, 2))
            );
        }
    }

    #[test]
    fn chains_of_the_two_triangles() {
        let ds = tt_structure(split_dual());
        let (dc, fc) = ds.build_chains(2).unwrap();
        assert_eq!(
            dc,
            &vec![VertexSet::singleton(2), VertexSet::from_indices(A)]
        );
        assert_eq!(
            fc,
            &vec![VertexSet::singleton(5), VertexSet::from_indices(B)]
        );
        let (dc, fc) = ds.build_chains(0).unwrap();
        assert_eq!(dc, &vec![VertexSet::singleton(0)]);
        assert_eq!(fc, &vec![VertexSet::singleton(1)]);
        assert_eq!(ds.thresholds(), &[q(1, 2), q(1, 2), r(5)]);

        let s = fixtures::two_point::<Rational>();
        let p = build_projection(&s, &[(0, 1)], None).unwrap();
        let (dc, fc) = p.structure().build_chains(0).unwrap();
        assert_eq!((dc.len(), fc.len()), (1, 1));
    }

    #[test]
    fn t_df_prefers_the_member_covering_both_boundary_points() {
        // y = (0, 1, 1, 0): point 0 sits on the boundary of U_{1}
        let s = fixtures::line4::<Rational>();
        let pairs = vec![(0, 1), (2, 3)];
        let dual = LaminarDual::new(
            4,
            [r(0), r(1), r(1), r(0)]
                .into_iter()
                .enumerate()
                .map(|(v, y)| (VertexSet::singleton(v), y)),
        );
        let p = build_projection(&s, &pairs, Some(dual)).unwrap();
        let ds = p.structure();
        assert_eq!(
            ds.smallest_coverings(0),
            vec![VertexSet::singleton(0), VertexSet::singleton(1)]
        );
        let d = ds.t_df(0, 1).unwrap();
        assert_eq!(d.case, DfCase::Equal);
        assert_eq!(d.up, vec![VertexSet::singleton(1)]);
        let survey = p.survey_t_df().unwrap();
        assert_eq!((survey.above, survey.not_lipschitz), (0, 0));
    }

    #[test]
    fn line4_t1_golden() {
        let ds = line4_structure();
        let t: Vec<Rational> = (0..4).map(|x| ds.eval_t(0, x).unwrap()).collect();
        assert_eq!(t, vec![r(0), r(1), q(1, 2), q(1, 2)]);
    }

    #[test]
    fn two_triangles_t3_golden_under_both_duals() {
        let want = [q(1, 2), q(1, 2), r(0), q(19, 2), q(19, 2), r(10)];
        for dual in [split_dual(), merged_dual()] {
            let ds = tt_structure(dual);
            for (x, w) in want.iter().enumerate() {
                assert_eq!(&ds.eval_t(2, x).unwrap(), w, "point {x}");
                assert_eq!(&ds.eval_t_via_s(2, x).unwrap(), w, "point {x}");
            }
        }
    }

    #[test]
    fn endpoints_and_other_pairs() {
        for ds in [
            line4_structure(),
            tt_structure(split_dual()),
            tt_structure(merged_dual()),
        ] {
            let pairs = ds.pairs().to_vec();
            for i in 0..pairs.len() {
                for (j, &(x, y)) in pairs.iter().enumerate() {
                    let diff = ds.eval_t(i, y).unwrap() - ds.eval_t(i, x).unwrap();
                    let want = if i == j {
                        ds.space().dist(x, y).clone()
                    } else {
                        r(0)
                    };
                    assert_eq!(diff, want);
                }
            }
        }
    }

    #[test]
    fn s_sum_pieces() {
        let ds = tt_structure(split_dual());
        for i in 0..3 {
            let (x_i, _) = ds.pairs()[i];
            let (dc, _) = ds.build_chains(i).unwrap();
            let y1 = ds.dual().weight(dc[0]).unwrap().clone();
            for x in 0..6 {
                let v = ds.eval_t_via_s(i, x).unwrap();
                assert_eq!(v, ds.eval_t(i, x).unwrap());
                if *ds.space().dist(x, x_i) <= y1 {
                    assert_eq!(v, ds.space().dist(x, x_i).clone());
                }
                if ds
                    .dual()
                    .family()
                    .iter()
                    .all(|h| !ds.uf_membership(*h, x).unwrap())
                {
                    assert_eq!(v, ds.thresholds()[i]);
                }
            }
        }
    }

    #[test]
    fn pinned_dual_must_be_tight() {
        let s = fixtures::line4::<Rational>();
        let pairs = vec![(0, 1), (2, 3)];
        let inst = MatchingInstance::from_pairs(s, &pairs).unwrap();
        let dual = LaminarDual::new(4, (0..4).map(|v| (VertexSet::singleton(v), q(1, 4))));
        assert!(matches!(
            DualStructure::new(inst, &pairs, dual),
            Err(ProjectionError::InvalidDual(_))
        ));
    }

    fn far_pair_space() -> FiniteMetricSpace<Rational> {
        // p, q at 1; r, s at 1 from each other and 100 from p, q
        let d = vec![
            vec![r(0), r(1), r(100), r(100)],
            vec![r(1), r(0), r(100), r(100)],
            vec![r(100), r(100), r(0), r(1)],
            vec![r(100), r(100), r(1), r(0)],
        ];
        FiniteMetricSpace::new(["p", "q", "r", "s"].map(String::from).to_vec(), d).unwrap()
    }

    #[test]
    fn build_examples() {
        let s = fixtures::two_point::<Rational>();
        let p = build_projection(&s, &[(0, 1)], None).unwrap();
        assert_eq!(
            p.functionals[0].get(1).unwrap() - p.functionals[0].get(0).unwrap(),
            r(1)
        );

        let s = fixtures::line4::<Rational>();
        assert_eq!(
            build_projection(&s, &[(0, 2), (1, 3)], None).unwrap_err(),
            ProjectionError::NotAMinimumMatching(2)
        );
    }

    #[test]
    fn apply_examples() {
        let s = fixtures::two_triangles::<Rational>();
        let p = build_projection(&s, &tt_pairs(&s), Some(split_dual())).unwrap();
        for (i, m) in p.molecules.iter().enumerate() {
            let e = apply_projection(&p, &m.as_problem()).unwrap();
            let unit: Vec<Rational> = (0..3).map(|j| if i == j { r(1) } else { r(0) }).collect();
            assert_eq!(e.coefficients, unit);
        }
        let f = TransportationProblem::unit_move(idx(&s, "b3"), idx(&s, "a3"));
        let e = apply_projection(&p, &f).unwrap();
        assert_eq!(e.coefficients, vec![r(0), r(0), r(10)]);
        assert_eq!(e.raw_coefficients(&p), vec![r(0), r(0), r(1)]);
        assert_eq!(apply_projection(&p, &e.realize(&p)).unwrap(), e);

        let bad = TransportationProblem::new([(0, r(1))]);
        assert!(bad.is_err() || apply_projection(&p, &bad.unwrap()).is_err());

        let s = far_pair_space();
        let p = build_projection(&s, &[(0, 1)], None).unwrap();
        let e = apply_projection(&p, &TransportationProblem::unit_move(2, 3)).unwrap();
        assert_eq!(e.coefficients, vec![r(0)]);
    }

    #[test]
    fn fixtures_certify() {
        let tt = fixtures::two_triangles::<Rational>();
        let cases = vec![
            (fixtures::two_point::<Rational>(), vec![(0, 1)], None),
            (fixtures::line4(), vec![(0, 1), (2, 3)], None),
            (tt.clone(), tt_pairs(&tt), None),
            (tt.clone(), tt_pairs(&tt), Some(split_dual())),
            (tt.clone(), tt_pairs(&tt), Some(merged_dual())),
            (far_pair_space(), vec![(0, 1)], None),
        ];
        for (s, pairs, dual) in cases {
            let p = build_projection(&s, &pairs, dual).unwrap();
            let rep = certify_projection(&p, &CertifyOptions::default()).unwrap();
            assert!(rep.all_pass(), "{rep:?}");
            assert_eq!(rep.checks.len(), 7);
        }
    }

    #[test]
    fn key_inequality_is_tight_across_the_triangles() {
        let s = fixtures::two_triangles::<Rational>();
        let p = build_projection(&s, &tt_pairs(&s), Some(split_dual())).unwrap();
        let (w, z) = (idx(&s, "a3"), idx(&s, "b3"));
        let mut sum = r(0);
        for t in &p.functionals {
            sum += (t.get(z).unwrap() - t.get(w).unwrap()).abs();
        }
        assert_eq!(sum, r(10));
    }

    #[test]
    fn perturbed_functional_is_caught() {
        let s = fixtures::two_triangles::<Rational>();
        let mut p = build_projection(&s, &tt_pairs(&s), Some(split_dual())).unwrap();
        let b3 = idx(&s, "b3");
        let v = p.functionals[2].get(b3).unwrap() + q(1, 7);
        p.functionals[2].set(b3, v);
        let rep = certify_projection(&p, &CertifyOptions::default()).unwrap();
        assert!(!rep.all_pass());
        let lip = rep.check("lipschitz").unwrap();
        let key = rep.check("key_inequality").unwrap();
        assert!(!lip.passed || !key.passed);
        let w = lip.witness.as_ref().or(key.witness.as_ref()).unwrap();
        assert!(w.values().any(|v| v == "b3"));
    }

    #[test]
    fn t_df_cases() {
        let ds = tt_structure(split_dual());
        let (a1, a2, b1) = (0, 1, 3);
        // a1 and a2 are both within 1/2 of themselves only: disjoint singletons
        let d = ds.t_df(a1, b1).unwrap();
        assert_eq!(d.case, DfCase::Disjoint);
        let f = d.function(&ds);
        assert!(f.lipschitz_violation(ds.space()).is_none());
        assert!(d.summands_partitioned(&ds));

        let d = ds.t_df(a1, a2).unwrap();
        assert_eq!(d.case, DfCase::Disjoint);
        assert!(d.summands_partitioned(&ds));

        // equal case: a point whose smallest cover is shared
        let d = ds.t_df(a1, a1).unwrap();
        assert_eq!(d.case, DfCase::Equal);
        for x in 0..6 {
            assert_eq!(
                d.eval(&ds, x),
                ds.eval_s(&r(0), Sign::Plus, d.up[0], x).unwrap()
            );
        }

        let s = far_pair_space();
        let p = build_projection(&s, &[(0, 1)], None).unwrap();
        let d = p.structure().t_df(2, 3).unwrap();
        assert_eq!(d.case, DfCase::BothUndefined);
        assert!((0..4).all(|x| d.eval(p.structure(), x).is_zero()));
        let d = p.structure().t_df(2, 0).unwrap();
        assert_eq!(d.case, DfCase::OneUndefined);
        assert_eq!(d.w, 0);
    }
}
