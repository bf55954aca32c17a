//! Seeded instance generators, brute-force oracles and the randomized
//! property suite over the whole pipeline.

use std::collections::BTreeMap;

use num_integer::Roots;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::io;
use crate::matching::{
    self, brute_force_min_matching, check_prefix_matching_criterion, LaminarDual, Matching,
    MatchingInstance, VertexSet, MAX_LP_VERTICES,
};
use crate::metric::{FiniteMetricSpace, MetricError};
use crate::projection::{self, CertifyOptions, TdfSurvey};
use crate::scalar::Scalar;
use crate::transport::{self, TransportationProblem};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("{0} grains exceeds the oracle limit of {MAX_GRAINS}")]
    TooLarge(usize),
    #[error("mass {0} is not an integer")]
    NonIntegerMass(String),
    #[error("masses sum to {0}, not zero")]
    NotZeroSum(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

pub const MAX_GRAINS: usize = 8;

/// Node budget for [`gen_greedy_pair_sequence`].
pub const SEARCH_NODE_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// Integer points in the plane, distances rounded up.
    EuclideanRounded,
    /// Path lengths in a random weighted tree.
    TreeMetric,
    /// Shortest paths in a random connected weighted graph.
    GraphShortestPath,
    /// Two groups, distances in `[1, 2]` inside and `[10, 11]` across.
    Clustered,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 4] = [
        GeneratorKind::EuclideanRounded,
        GeneratorKind::TreeMetric,
        GeneratorKind::GraphShortestPath,
        GeneratorKind::Clustered,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::EuclideanRounded => "euclidean-rounded",
            GeneratorKind::TreeMetric => "tree-metric",
            GeneratorKind::GraphShortestPath => "graph-shortest-path",
            GeneratorKind::Clustered => "clustered",
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GeneratorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::InvalidSpec(format!("unknown kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub size: usize,
    pub seed: u64,
    /// Every distance is an integer multiple of `1 / denominator_bound`.
    pub denominator_bound: u32,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.size < 2 || self.size > 64 {
            return Err(HarnessError::InvalidSpec(format!(
                "size {} outside 2..=64",
                self.size
            )));
        }
        if self.denominator_bound == 0 {
            return Err(HarnessError::InvalidSpec(
                "denominator bound must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn ceil_sqrt(v: i64) -> i64 {
    let r = v.sqrt();
    if r * r == v {
        r
    } else {
        r + 1
    }
}

fn floyd_warshall(mut d: Vec<Vec<i64>>) -> Vec<Vec<i64>> {
    let n = d.len();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k].saturating_add(d[k][j]);
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// A random metric space, reproducible from the spec.
pub fn gen_random_metric<T: Scalar>(
    spec: &GeneratorSpec,
) -> Result<FiniteMetricSpace<T>, HarnessError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.size;
    let q = i64::from(spec.denominator_bound);
    let units: Vec<Vec<i64>> = match spec.kind {
        GeneratorKind::EuclideanRounded => {
            let mut pts: Vec<(i64, i64)> = Vec::with_capacity(n);
            while pts.len() < n {
                let p = (rng.gen_range(0..=20 * q), rng.gen_range(0..=20 * q));
                if !pts.contains(&p) {
                    pts.push(p);
                }
            }
            pts.iter()
                .map(|a| {
                    pts.iter()
                        .map(|b| ceil_sqrt((a.0 - b.0).pow(2) + (a.1 - b.1).pow(2)))
                        .collect()
                })
                .collect()
        }
        GeneratorKind::TreeMetric => {
            let mut adj = vec![vec![i64::MAX / 4; n]; n];
            for (i, row) in adj.iter_mut().enumerate() {
                row[i] = 0;
            }
            for i in 1..n {
                let p = rng.gen_range(0..i);
                let w = rng.gen_range(1..=10 * q);
                adj[i][p] = w;
                adj[p][i] = w;
            }
            floyd_warshall(adj)
        }
        GeneratorKind::GraphShortestPath => {
            let mut adj = vec![vec![i64::MAX / 4; n]; n];
            for (i, row) in adj.iter_mut().enumerate() {
                row[i] = 0;
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut edge = |a: usize, b: usize, rng: &mut ChaCha8Rng| {
                let w = rng.gen_range(1..=10 * q);
                adj[a][b] = adj[a][b].min(w);
                adj[b][a] = adj[a][b];
            };
            for k in 1..n {
                let p = order[rng.gen_range(0..k)];
                edge(order[k], p, &mut rng);
            }
            for a in 0..n {
                for b in a + 1..n {
                    if rng.gen_bool(0.3) {
                        edge(a, b, &mut rng);
                    }
                }
            }
            floyd_warshall(adj)
        }
        GeneratorKind::Clustered => {
            let mut d = vec![vec![0; n]; n];
            let half = n / 2;
            for a in 0..n {
                for b in a + 1..n {
                    let v = if (a < half) == (b < half) {
                        rng.gen_range(q..=2 * q)
                    } else {
                        rng.gen_range(10 * q..=11 * q)
                    };
                    d[a][b] = v;
                    d[b][a] = v;
                }
            }
            d
        }
    };
    let qs = T::from_i64(q);
    let dist = units
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|u| T::from_i64(u) / qs.clone())
                .collect()
        })
        .collect();
    Ok(FiniteMetricSpace::new(labels(n), dist)?)
}

/// Depth-first search for `n` disjoint pairs whose every prefix is a
/// minimum perfect matching of its points. Candidates are tried closest
/// first. `None` when the search fails or exceeds [`SEARCH_NODE_CAP`] nodes.
pub fn gen_greedy_pair_sequence<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    n: usize,
) -> Result<Option<Vec<(usize, usize)>>, HarnessError> {
    if n == 0 || 2 * n > space.len() {
        return Err(HarnessError::InvalidSpec(format!(
            "{n} pairs need 2n <= {} points and n >= 1",
            space.len()
        )));
    }
    if 2 * n > MAX_LP_VERTICES {
        return Err(HarnessError::InvalidSpec(format!(
            "{n} pairs exceeds the brute-force limit"
        )));
    }
    let mut candidates: Vec<(usize, usize)> = (0..space.len())
        .flat_map(|a| (a + 1..space.len()).map(move |b| (a, b)))
        .collect();
    candidates.sort_by(|x, y| {
        space
            .dist(x.0, x.1)
            .cmp(space.dist(y.0, y.1))
            .then(x.cmp(y))
    });

    fn go<T: Scalar>(
        space: &FiniteMetricSpace<T>,
        candidates: &[(usize, usize)],
        n: usize,
        used: &mut Vec<bool>,
        seq: &mut Vec<(usize, usize)>,
        nodes: &mut usize,
    ) -> bool {
        if seq.len() == n {
            return true;
        }
        for &(a, b) in candidates {
            if used[a] || used[b] {
                continue;
            }
            *nodes += 1;
            if *nodes > SEARCH_NODE_CAP {
                return false;
            }
            seq.push((a, b));
            let ok = seq.len() == 1
                || check_prefix_matching_criterion(space, seq)
                    .map(|c| c.passed())
                    .unwrap_or(false);
            if ok {
                used[a] = true;
                used[b] = true;
                if go(space, candidates, n, used, seq, nodes) {
                    return true;
                }
                used[a] = false;
                used[b] = false;
            }
            seq.pop();
        }
        false
    }

    let mut used = vec![false; space.len()];
    let mut seq = Vec::with_capacity(n);
    let mut nodes = 0;
    Ok(go(space, &candidates, n, &mut used, &mut seq, &mut nodes).then_some(seq))
}

/// Transportation cost by splitting integer masses into unit grains and
/// taking the cheapest assignment of sink grains to source grains.
pub fn oracle_tc_norm_integer<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    f: &TransportationProblem<T>,
) -> Result<T, HarnessError> {
    let mut sources = Vec::new();
    let mut sinks = Vec::new();
    let mut total = T::zero();
    for (p, m) in f.masses() {
        if !m.is_integral() {
            return Err(HarnessError::NonIntegerMass(m.to_string()));
        }
        total += m;
        let mut k = m.abs();
        let side = if m.is_positive() {
            &mut sources
        } else {
            &mut sinks
        };
        while k.is_positive() {
            side.push(*p);
            if side.len() > MAX_GRAINS {
                return Err(HarnessError::TooLarge(side.len()));
            }
            k -= &T::one();
        }
    }
    if !total.is_zero() {
        return Err(HarnessError::NotZeroSum(total.to_string()));
    }
    let k = sources.len();
    // best[mask]: cheapest way to serve the first popcount(mask) sources
    // with the sinks in mask
    let mut best: Vec<Option<T>> = vec![None; 1 << k];
    best[0] = Some(T::zero());
    for mask in 0usize..1 << k {
        let Some(base) = best[mask].clone() else {
            continue;
        };
        let i = mask.count_ones() as usize;
        if i == k {
            continue;
        }
        for (j, &sink) in sinks.iter().enumerate() {
            if mask >> j & 1 == 0 {
                let next = mask | 1 << j;
                let c = base.clone() + space.dist(sources[i], sink).clone();
                if best[next].as_ref().is_none_or(|b| c < *b) {
                    best[next] = Some(c);
                }
            }
        }
    }
    Ok(best[(1 << k) - 1].clone().expect("full assignment"))
}

/// Fault injected into every trial, to exercise failure reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Adds `1/7` to the weight of the first singleton of the dual.
    PerturbDualWeight,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PropertyCount {
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub trial: usize,
    pub seed: u64,
    pub property: String,
    pub detail: String,
    pub space: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialReport {
    pub spec: GeneratorSpec,
    pub trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
    /// Trials where no pair sequence was found; nothing else ran.
    pub without_sequence: usize,
    /// Trials that reached a certified operator.
    pub certified: usize,
    /// Certified trials by number of pairs.
    pub certified_by_rank: BTreeMap<usize, usize>,
    pub properties: BTreeMap<String, PropertyCount>,
    pub t_df: TdfSurvey,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

impl TrialReport {
    pub fn all_pass(&self) -> bool {
        self.properties.values().all(|c| c.failed == 0)
    }

    pub fn count(&self, property: &str) -> PropertyCount {
        self.properties.get(property).cloned().unwrap_or_default()
    }
}

/// Seed of trial `t`; trial 0 uses the suite seed itself.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct TrialOutcome {
    checks: Vec<(String, bool, String)>,
    sequence: bool,
    certified: bool,
    rank: usize,
    space: Value,
    pairs: Option<Value>,
    dual: Option<Value>,
    t_df: Option<TdfSurvey>,
}

fn run_trial<T: Scalar>(spec: &GeneratorSpec, trial: usize, fault: Option<Fault>) -> TrialOutcome {
    let seed = trial_seed(spec.seed, trial);
    let tspec = GeneratorSpec { seed, ..*spec };
    let mut out = TrialOutcome {
        checks: Vec::new(),
        sequence: false,
        certified: false,
        rank: 0,
        space: Value::Null,
        pairs: None,
        dual: None,
        t_df: None,
    };
    let check = |out: &mut TrialOutcome, name: &str, ok: bool, detail: String| {
        out.checks.push((name.to_string(), ok, detail));
    };

    let space: FiniteMetricSpace<T> = match gen_random_metric(&tspec) {
        Ok(s) => s,
        Err(e) => {
            check(&mut out, "metric_valid", false, e.to_string());
            return out;
        }
    };
    out.space = io::space_json(&space);
    check(&mut out, "metric_valid", true, String::new());

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let max_pairs = (space.len() / 2).min(4);
    let n = rng.gen_range(1..=max_pairs);

    // grain oracle on a random integer problem
    let grains = rng.gen_range(1..=MAX_GRAINS);
    let mut f = TransportationProblem::zero();
    for _ in 0..grains {
        let (a, b) = (rng.gen_range(0..space.len()), rng.gen_range(0..space.len()));
        if a != b {
            f = f.add(&TransportationProblem::unit_move(a, b));
        }
    }
    match (
        transport::tc_norm(&space, &f),
        oracle_tc_norm_integer(&space, &f),
    ) {
        (Ok(lp), Ok(brute)) => check(
            &mut out,
            "tc_norm_oracle",
            lp.value == brute,
            format!("lp {} vs grains {}", lp.value, brute),
        ),
        (a, b) => check(
            &mut out,
            "tc_norm_oracle",
            false,
            format!("{:?} / {:?}", a.err(), b.err()),
        ),
    }

    let pairs = match gen_greedy_pair_sequence(&space, n) {
        Ok(Some(p)) => p,
        _ => return out,
    };
    out.sequence = true;
    out.rank = pairs.len();
    out.pairs = Some(io::pairs_json(&space, &pairs));
    let crit = check_prefix_matching_criterion(&space, &pairs);
    check(
        &mut out,
        "prefix_criterion",
        matches!(&crit, Ok(c) if c.passed()),
        format!("{crit:?}"),
    );

    let instance = match MatchingInstance::from_pairs(space.clone(), &pairs) {
        Ok(i) => i,
        Err(e) => {
            check(&mut out, "build", false, e.to_string());
            return out;
        }
    };
    let lp = matching::solve_matching_lp(&instance);
    let brute = brute_force_min_matching(&instance);
    let same = matches!((&lp, &brute), (Ok((_, a)), Ok((_, b))) if a == b);
    check(
        &mut out,
        "matching_oracle",
        same,
        format!("{lp:?} vs {brute:?}"),
    );

    let matching = Matching::new(pairs.iter().copied());
    let dual = matching::solve_dual_lp(&instance)
        .map_err(|e| e.to_string())
        .and_then(|raw| {
            matching::uncross_to_laminar(&instance, &matching, &raw).map_err(|e| e.to_string())
        });
    let mut dual = match dual {
        Ok(d) => {
            let rep = matching::verify_dual_certificate(&instance, &matching, &d);
            check(
                &mut out,
                "dual_certificate",
                rep.is_valid(),
                format!("{:?}", rep.violations),
            );
            d
        }
        Err(e) => {
            check(&mut out, "dual_certificate", false, e);
            return out;
        }
    };
    if fault == Some(Fault::PerturbDualWeight) {
        dual = perturb(&dual);
    }
    out.dual = Some(io::dual_json(&instance, &dual));

    let op = match projection::build_projection(&space, &pairs, Some(dual)) {
        Ok(p) => {
            check(&mut out, "build", true, String::new());
            p
        }
        Err(e) => {
            check(&mut out, "build", false, e.to_string());
            return out;
        }
    };
    let opts = CertifyOptions {
        seed,
        ..CertifyOptions::default()
    };
    match projection::certify_projection(&op, &opts) {
        Ok(rep) => {
            for c in &rep.checks {
                check(&mut out, c.name, c.passed, format!("{:?}", c.witness));
            }
            check(
                &mut out,
                "sharpness",
                rep.sharpness.is_some(),
                String::new(),
            );
            out.certified = rep.all_pass();
        }
        Err(e) => check(&mut out, "certify", false, e.to_string()),
    }
    match op.survey_t_df() {
        Ok(s) => out.t_df = Some(s),
        Err(e) => check(&mut out, "t_df_cases", false, e.to_string()),
    }
    out
}

fn perturb<T: Scalar>(dual: &LaminarDual<T>) -> LaminarDual<T> {
    let mut d = dual.clone();
    if let Some(w) = d.weight_mut(VertexSet::singleton(0)) {
        *w += &T::from_fraction(1, 7);
    }
    d
}

fn merge_survey(acc: &mut TdfSurvey, s: &TdfSurvey) {
    acc.pairs += s.pairs;
    for (k, v) in &s.cases {
        *acc.cases.entry(k.clone()).or_default() += v;
    }
    acc.not_lipschitz += s.not_lipschitz;
    acc.not_partitioned += s.not_partitioned;
    acc.equal += s.equal;
    acc.below += s.below;
    acc.above += s.above;
}

/// Generate, pair, build and certify `trials` instances. Trials run in
/// parallel; the report depends only on `(spec, trials, fault)`.
pub fn run_property_suite<T: Scalar>(
    spec: &GeneratorSpec,
    trials: usize,
    fault: Option<Fault>,
) -> Result<TrialReport, HarnessError> {
    spec.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial::<T>(spec, t, fault))
        .collect();
    let mut report = TrialReport {
        spec: *spec,
        trials,
        fault,
        without_sequence: 0,
        certified: 0,
        certified_by_rank: BTreeMap::new(),
        properties: BTreeMap::new(),
        t_df: TdfSurvey::default(),
        counterexample: None,
    };
    for (t, o) in outcomes.into_iter().enumerate() {
        if !o.sequence {
            report.without_sequence += 1;
        }
        if o.certified {
            report.certified += 1;
            *report.certified_by_rank.entry(o.rank).or_default() += 1;
        }
        if let Some(s) = &o.t_df {
            merge_survey(&mut report.t_df, s);
        }
        for (name, ok, detail) in &o.checks {
            let c = report.properties.entry(name.clone()).or_default();
            if *ok {
                c.passed += 1;
            } else {
                c.failed += 1;
                if report.counterexample.is_none() {
                    report.counterexample = Some(Counterexample {
                        trial: t,
                        seed: trial_seed(spec.seed, t),
                        property: name.clone(),
                        detail: detail.clone(),
                        space: o.space.clone(),
                        pairs: o.pairs.clone(),
                        dual: o.dual.clone(),
                    });
                }
            }
        }
    }
    Ok(report)
}
