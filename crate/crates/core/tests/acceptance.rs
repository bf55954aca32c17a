//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints its own PASS/FAIL line; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use tcspace::fixtures;
use tcspace::harness::{
    gen_random_metric, oracle_tc_norm_integer, run_property_suite, trial_seed, GeneratorKind,
    GeneratorSpec, TrialReport, MAX_GRAINS,
};
use tcspace::matching::{
    brute_force_min_matching, solve_dual_lp, solve_matching_lp, uncross_to_laminar,
    verify_dual_certificate, DualViolation, LaminarDual, Matching, MatchingInstance, VertexSet,
};
use tcspace::projection::{
    build_projection, certify_projection, CertifyOptions, ProjectionOperator,
};
use tcspace::scalar::Scalar;
use tcspace::transport::{tc_norm, TransportationProblem};
use tcspace::{MetricSpace, Rational};

const SEED: u64 = 20_240_601;
const SIZES: std::ops::RangeInclusive<usize> = 4..=12;
const TRIALS_PER_CELL: usize = 8;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn q(a: i64, b: i64) -> Rational {
    Rational::from_fraction(a, b)
}

fn r(a: i64) -> Rational {
    Rational::from_i64(a)
}

// ---------------------------------------------------------------- criterion 1

struct SuiteRun {
    reports: Vec<TrialReport>,
    elapsed: Duration,
}

impl SuiteRun {
    fn sum(&self, prop: &str) -> (usize, usize) {
        self.reports.iter().fold((0, 0), |(p, f), r| {
            let c = r.count(prop);
            (p + c.passed, f + c.failed)
        })
    }

    fn certified(&self) -> usize {
        self.reports.iter().map(|r| r.certified).sum()
    }

    fn by_rank(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for r in &self.reports {
            for (k, v) in &r.certified_by_rank {
                *out.entry(*k).or_default() += v;
            }
        }
        out
    }

    fn prop_line(&self, prop: &str, need: usize) -> Outcome {
        let (p, f) = self.sum(prop);
        outcome(
            f == 0 && p >= need,
            format!("{prop}: {p} passed, {f} failed"),
        )
    }
}

fn run_suite() -> SuiteRun {
    let start = Instant::now();
    let mut reports = Vec::new();
    for kind in GeneratorKind::ALL {
        for size in SIZES {
            let spec = GeneratorSpec {
                kind,
                size,
                seed: SEED ^ ((size as u64) << 8) ^ kind as u64,
                denominator_bound: 4,
            };
            reports.push(
                run_property_suite::<Rational>(&spec, TRIALS_PER_CELL, None).expect("valid spec"),
            );
        }
    }
    SuiteRun {
        reports,
        elapsed: start.elapsed(),
    }
}

const SEVEN: [&str; 7] = [
    "lipschitz",
    "biorthogonality",
    "key_inequality",
    "l1_isometry",
    "norm_bound",
    "s_identity",
    "well_defined",
];

fn criterion_projection(run: &SuiteRun) -> Outcome {
    let certified = run.certified();
    let ranks = run.by_rank();
    let failures: Vec<String> = SEVEN
        .iter()
        .filter_map(|c| {
            let (_, f) = run.sum(c);
            (f > 0).then(|| format!("{c} failed {f}x"))
        })
        .collect();
    let criterion_ok = run.sum("prefix_criterion").1 == 0;
    let all_ranks = (1..=4).all(|n| ranks.get(&n).copied().unwrap_or(0) > 0);
    let fast = run.elapsed < Duration::from_secs(300);
    outcome(
        certified >= 200 && failures.is_empty() && criterion_ok && all_ranks && fast,
        format!(
            "{certified} certified instances on 4-12 points, by pair count {ranks:?}, {:.1}s{}",
            run.elapsed.as_secs_f64(),
            if failures.is_empty() {
                String::new()
            } else {
                format!(", {}", failures.join(", "))
            }
        ),
    )
}

// ---------------------------------------------------------------- criteria 2, 3

struct MatchingRun {
    agree: usize,
    disagree: Vec<String>,
    duals_ok: usize,
    duals_bad: Vec<String>,
    elapsed: Duration,
}

fn matching_instances() -> Vec<MetricSpace> {
    let mut out = Vec::new();
    for (k, size) in [4usize, 6, 8, 10].into_iter().enumerate() {
        for t in 0..25 {
            let spec = GeneratorSpec {
                kind: GeneratorKind::ALL[t % GeneratorKind::ALL.len()],
                size,
                seed: trial_seed(SEED + k as u64, t),
                denominator_bound: 5,
            };
            out.push(gen_random_metric(&spec).expect("valid spec"));
        }
    }
    out
}

fn run_matching() -> MatchingRun {
    let spaces = matching_instances();
    let start = Instant::now();
    let results: Vec<(Result<(), String>, Result<(), String>)> = spaces
        .par_iter()
        .map(|s| {
            let all: Vec<usize> = (0..s.len()).collect();
            let inst = MatchingInstance::new(s.clone(), &all).map_err(|e| e.to_string());
            let inst = match inst {
                Ok(i) => i,
                Err(e) => return (Err(e.clone()), Err(e)),
            };
            let lp = solve_matching_lp(&inst);
            let brute = brute_force_min_matching(&inst);
            let same = match (&lp, &brute) {
                (Ok((_, a)), Ok((_, b))) if a == b => Ok(()),
                _ => Err(format!(
                    "{} points: lp {:?} brute {:?}",
                    s.len(),
                    lp.as_ref().map(|x| &x.1),
                    brute.as_ref().map(|x| &x.1)
                )),
            };
            let dual = match &brute {
                Ok((m, _)) => dual_check(&inst, m),
                Err(e) => Err(e.to_string()),
            };
            (same, dual)
        })
        .collect();
    let elapsed = start.elapsed();
    let mut run = MatchingRun {
        agree: 0,
        disagree: Vec::new(),
        duals_ok: 0,
        duals_bad: Vec::new(),
        elapsed,
    };
    for (same, dual) in results {
        match same {
            Ok(()) => run.agree += 1,
            Err(e) => run.disagree.push(e),
        }
        match dual {
            Ok(()) => run.duals_ok += 1,
            Err(e) => run.duals_bad.push(e),
        }
    }
    run
}

fn dual_check(inst: &MatchingInstance<Rational>, m: &Matching) -> Result<(), String> {
    let raw = solve_dual_lp(inst).map_err(|e| e.to_string())?;
    let lam = uncross_to_laminar(inst, m, &raw).map_err(|e| e.to_string())?;
    let rep = verify_dual_certificate(inst, m, &lam);
    if !rep.is_valid() {
        return Err(format!("{:?}", rep.violations));
    }
    // the two headline equalities, restated
    if lam.objective() != m.weight(inst.space()) {
        return Err("objective differs from matching weight".into());
    }
    for &(a, b) in &m.pairs {
        let (la, lb) = (inst.local(a).unwrap(), inst.local(b).unwrap());
        if &lam.edge_load(la, lb) != inst.weight(la, lb) {
            return Err(format!("matched edge {a}-{b} not tight"));
        }
    }
    Ok(())
}

fn criterion_matching(run: &MatchingRun) -> Outcome {
    outcome(
        run.agree == 100 && run.disagree.is_empty() && run.elapsed < Duration::from_secs(60),
        format!(
            "{} of 100 instances (2n = 4, 6, 8, 10) agree with brute force, {:.1}s{}",
            run.agree,
            run.elapsed.as_secs_f64(),
            run.disagree
                .first()
                .map(|e| format!(", first mismatch: {e}"))
                .unwrap_or_default()
        ),
    )
}

fn criterion_duals(suite: &SuiteRun, run: &MatchingRun) -> Outcome {
    let (p, f) = suite.sum("dual_certificate");
    outcome(
        f == 0 && run.duals_bad.is_empty() && p + run.duals_ok > 0,
        format!(
            "{} duals from the projection suite and {} from the matching instances verified, {} failed{}",
            p,
            run.duals_ok,
            f + run.duals_bad.len(),
            run.duals_bad.first().map(|e| format!(", first: {e}")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- criterion 5

struct Pinned {
    outcome: Outcome,
    conflicts: usize,
}

fn tt_pairs(s: &MetricSpace) -> Vec<(usize, usize)> {
    let i = |l: &str| s.index_of(l).unwrap();
    vec![(i("a1"), i("a2")), (i("b1"), i("b2")), (i("a3"), i("b3"))]
}

fn symmetric_tt_dual() -> LaminarDual<Rational> {
    let mut m: BTreeMap<VertexSet, Rational> =
        (0..6).map(|v| (VertexSet::singleton(v), q(1, 2))).collect();
    m.insert(VertexSet::from_indices([0, 1, 2]), q(9, 2));
    m.insert(VertexSet::from_indices([3, 4, 5]), q(9, 2));
    LaminarDual::new(6, m)
}

/// Checks that `dual` is an optimal odd-cut dual by comparing it against the
/// exhaustive LP. `allowed` lists violation kinds tolerated for pinned duals.
fn pinned_dual_optimal(
    space: &MetricSpace,
    pairs: &[(usize, usize)],
    dual: &LaminarDual<Rational>,
    allowed: fn(&DualViolation) -> bool,
) -> Result<(), String> {
    let inst = MatchingInstance::from_pairs(space.clone(), pairs).map_err(|e| e.to_string())?;
    let (_, lp) = solve_matching_lp(&inst).map_err(|e| e.to_string())?;
    let raw = solve_dual_lp(&inst).map_err(|e| e.to_string())?;
    if dual.objective() != lp || raw.objective != lp {
        return Err(format!("objective {} vs LP {}", dual.objective(), lp));
    }
    let m = Matching::new(pairs.iter().copied());
    let rep = verify_dual_certificate(&inst, &m, dual);
    match rep.violations.iter().find(|v| !allowed(v)) {
        Some(v) => Err(format!("{v:?}")),
        None => Ok(()),
    }
}

fn certified(p: &ProjectionOperator<Rational>) -> Result<(), String> {
    let rep = certify_projection(p, &CertifyOptions::default()).map_err(|e| e.to_string())?;
    if rep.all_pass() {
        Ok(())
    } else {
        Err(format!(
            "{:?}",
            rep.checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name)
                .collect::<Vec<_>>()
        ))
    }
}

fn t_values(p: &ProjectionOperator<Rational>, i: usize) -> BTreeMap<String, Rational> {
    let s = p.space();
    (0..s.len())
        .map(|x| {
            (
                s.label(x).to_string(),
                p.functionals[i].get(x).unwrap().clone(),
            )
        })
        .collect()
}

fn via_s_agrees(p: &ProjectionOperator<Rational>, i: usize) -> bool {
    let ds = p.structure();
    (0..p.space().len()).all(|x| ds.eval_t_via_s(i, x).ok().as_ref() == p.functionals[i].get(x))
}

fn golden(entries: &[(&str, Rational)]) -> BTreeMap<String, Rational> {
    entries
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn run_pinned() -> Pinned {
    let mut errors = Vec::new();
    let mut conflicts = 0;

    // 4-point line, all singletons at 1/2
    let line = fixtures::line4::<Rational>();
    let lpairs = vec![(0, 1), (2, 3)];
    let ldual = LaminarDual::new(4, (0..4).map(|v| (VertexSet::singleton(v), q(1, 2))));
    if let Err(e) = pinned_dual_optimal(&line, &lpairs, &ldual, |_| false) {
        errors.push(format!("line dual: {e}"));
    }
    match build_projection(&line, &lpairs, Some(ldual)) {
        Ok(p) => {
            conflicts += p.conflicts.len();
            let want = golden(&[("0", r(0)), ("1", r(1)), ("10", q(1, 2)), ("11", q(1, 2))]);
            if t_values(&p, 0) != want {
                errors.push(format!("line t1 = {:?}", t_values(&p, 0)));
            }
            if !via_s_agrees(&p, 0) {
                errors.push("line t1 differs from its s-sum form".into());
            }
            if let Err(e) = certified(&p) {
                errors.push(format!("line certificate: {e}"));
            }
        }
        Err(e) => errors.push(format!("line build: {e}")),
    }

    // two triangles, symmetric dual; both triangles have size n, which only
    // the cardinality rule objects to
    let tt = fixtures::two_triangles::<Rational>();
    let tpairs = tt_pairs(&tt);
    let tdual = symmetric_tt_dual();
    if let Err(e) = pinned_dual_optimal(&tt, &tpairs, &tdual, |v| {
        matches!(v, DualViolation::SeveralHalfSized { .. })
    }) {
        errors.push(format!("two-triangles dual: {e}"));
    }
    match build_projection(&tt, &tpairs, Some(tdual)) {
        Ok(p) => {
            conflicts += p.conflicts.len();
            let want = golden(&[
                ("a1", q(1, 2)),
                ("a2", q(1, 2)),
                ("a3", r(0)),
                ("b1", q(19, 2)),
                ("b2", q(19, 2)),
                ("b3", r(10)),
            ]);
            if t_values(&p, 2) != want {
                errors.push(format!("two-triangles t3 = {:?}", t_values(&p, 2)));
            }
            if !via_s_agrees(&p, 2) {
                errors.push("two-triangles t3 differs from its s-sum form".into());
            }
            let (a3, b3) = (tt.index_of("a3").unwrap(), tt.index_of("b3").unwrap());
            let sum: Rational = p
                .functionals
                .iter()
                .map(|t| (t.get(b3).unwrap().clone() - t.get(a3).unwrap().clone()).abs())
                .fold(r(0), |acc, v| acc + v);
            if sum != r(10) || tt.dist(a3, b3) != &r(10) {
                errors.push(format!("key inequality at (a3,b3): sum {sum}"));
            }
            if let Err(e) = certified(&p) {
                errors.push(format!("two-triangles certificate: {e}"));
            }
        }
        Err(e) => errors.push(format!("two-triangles build: {e}")),
    }

    Pinned {
        outcome: outcome(
            errors.is_empty(),
            if errors.is_empty() {
                "line t1 and two-triangles t3 reproduced, pinned duals LP-optimal, sum |dt_i| = 10 at (a3,b3)".into()
            } else {
                errors.join("; ")
            },
        ),
        conflicts,
    }
}

// ---------------------------------------------------------------- criterion 8

fn criterion_grains() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x6a41);
    let mut agree = 0;
    let mut first_bad = None;
    let mut done = 0;
    while done < 100 {
        let spec = GeneratorSpec {
            kind: GeneratorKind::ALL[done % GeneratorKind::ALL.len()],
            size: rng.gen_range(2..=9),
            seed: rng.gen(),
            denominator_bound: 4,
        };
        let space: MetricSpace = gen_random_metric(&spec).expect("valid spec");
        let grains = rng.gen_range(1..=MAX_GRAINS);
        let mut f = TransportationProblem::zero();
        for _ in 0..grains {
            let a = rng.gen_range(0..space.len());
            let b = rng.gen_range(0..space.len());
            if a != b {
                f = f.add(&TransportationProblem::unit_move(a, b));
            }
        }
        if f.is_zero() {
            continue;
        }
        done += 1;
        let lp = tc_norm(&space, &f).map(|n| n.value);
        let oracle = oracle_tc_norm_integer(&space, &f);
        match (&lp, &oracle) {
            (Ok(a), Ok(b)) if a == b => agree += 1,
            _ => {
                first_bad.get_or_insert_with(|| format!("lp {lp:?} vs grains {oracle:?}"));
            }
        }
    }
    outcome(
        agree == 100,
        format!(
            "{agree} of 100 integer problems (<= {MAX_GRAINS} grains) match the grain oracle{}",
            first_bad
                .map(|e| format!(", first mismatch: {e}"))
                .unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- driver

fn main() -> ExitCode {
    let start = Instant::now();
    let suite = run_suite();
    let matching = run_matching();
    let pinned = run_pinned();

    let (wd_pass, wd_fail) = suite.sum("well_defined");
    let lines: Vec<(&str, Outcome)> = vec![
        (
            "1 norm-1 projection certificate",
            criterion_projection(&suite),
        ),
        (
            "2 matching LP vs brute force",
            criterion_matching(&matching),
        ),
        ("3 dual certificate", criterion_duals(&suite, &matching)),
        (
            "4 t identity via s-functions",
            suite.prop_line("s_identity", 200),
        ),
        ("5 pinned fixtures", pinned.outcome),
        (
            "6 l1 isometry (20 random vectors)",
            suite.prop_line("l1_isometry", 200),
        ),
        ("7 sharpness", suite.prop_line("sharpness", 200)),
        ("8 tc_norm vs grain oracle", criterion_grains()),
        (
            "9 no guard conflicts",
            outcome(
                wd_fail == 0 && pinned.conflicts == 0 && wd_pass >= 200,
                format!("{wd_pass} generated operators and both pinned fixtures conflict-free"),
            ),
        ),
    ];

    let mut failed = 0;
    for (name, o) in &lines {
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        lines.len() - failed,
        lines.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
