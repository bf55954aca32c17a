//! JSON file formats. Every exact number is written as a string (`"9/2"`);
//! on input a cell may be a JSON integer, a JSON decimal, or a string in
//! any form accepted by [`parse_scalar`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::matching::{LaminarDual, MatchingInstance, VertexSet};
use crate::metric::{FiniteMetricSpace, MetricError};
use crate::projection::ProjectionOperator;
use crate::scalar::{parse_scalar, ParseScalarError, Scalar};
use crate::transport::{TransportError, TransportationProblem};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad number at {at}: {source}")]
    Number {
        at: String,
        #[source]
        source: ParseScalarError,
    },
    #[error("{0}")]
    Schema(String),
    #[error("unknown point {0:?}")]
    UnknownPoint(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

fn number<T: Scalar>(v: &Value, at: impl FnOnce() -> String) -> Result<T, IoError> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => {
            return Err(IoError::Schema(format!(
                "{}: expected a number, got {other}",
                at()
            )))
        }
    };
    parse_scalar(&text).map_err(|source| IoError::Number { at: at(), source })
}

fn point<T: Scalar>(space: &FiniteMetricSpace<T>, label: &str) -> Result<usize, IoError> {
    space
        .index_of(label)
        .map_err(|_| IoError::UnknownPoint(label.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceFile {
    points: Vec<String>,
    distances: Vec<Vec<Value>>,
}

/// `{"points": [..], "distances": [[..], ..]}`.
pub fn read_space<T: Scalar>(text: &str) -> Result<FiniteMetricSpace<T>, IoError> {
    let file: SpaceFile = serde_json::from_str(text)?;
    let dist = file
        .distances
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, c)| number(c, || format!("distances[{i}][{j}]")))
                .collect::<Result<Vec<T>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FiniteMetricSpace::new(file.points, dist)?)
}

pub fn space_json<T: Scalar>(space: &FiniteMetricSpace<T>) -> Value {
    json!({
        "points": space.labels(),
        "distances": space
            .distances()
            .iter()
            .map(|row| row.iter().map(|d| d.to_string()).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    masses: BTreeMap<String, Value>,
}

/// `{"masses": {"label": mass, ..}}`; masses must sum to zero.
pub fn read_problem<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    text: &str,
) -> Result<TransportationProblem<T>, IoError> {
    let file: ProblemFile = serde_json::from_str(text)?;
    let masses = file
        .masses
        .iter()
        .map(|(l, v)| Ok((point(space, l)?, number(v, || format!("masses[{l:?}]"))?)))
        .collect::<Result<Vec<_>, IoError>>()?;
    Ok(TransportationProblem::new(masses)?)
}

pub fn problem_json<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    f: &TransportationProblem<T>,
) -> Value {
    let masses: BTreeMap<&str, String> = f
        .masses()
        .iter()
        .map(|(p, m)| (space.label(*p), m.to_string()))
        .collect();
    json!({ "masses": masses })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairsFile {
    pairs: Vec<[String; 2]>,
}

/// `{"pairs": [["x1", "y1"], ..]}`, order preserved.
pub fn read_pairs<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    text: &str,
) -> Result<Vec<(usize, usize)>, IoError> {
    let file: PairsFile = serde_json::from_str(text)?;
    file.pairs
        .iter()
        .map(|[a, b]| Ok((point(space, a)?, point(space, b)?)))
        .collect()
}

pub fn pairs_json<T: Scalar>(space: &FiniteMetricSpace<T>, pairs: &[(usize, usize)]) -> Value {
    json!({
        "pairs": pairs
            .iter()
            .map(|&(a, b)| [space.label(a), space.label(b)])
            .collect::<Vec<_>>(),
    })
}

fn member_key(labels: &[String]) -> String {
    labels.join(",")
}

/// `{"family": [[labels], ..], "weights": {"a1,a2,a3": "9/2", ..},
/// "objective": "12"}`. Members are listed by size, then point order; the
/// weight key is the comma-joined member.
pub fn dual_json<T: Scalar>(instance: &MatchingInstance<T>, dual: &LaminarDual<T>) -> Value {
    let family: Vec<Vec<String>> = dual
        .family()
        .into_iter()
        .map(|s| instance.set_labels(s))
        .collect();
    let weights: BTreeMap<String, String> = dual
        .family()
        .into_iter()
        .map(|s| {
            (
                member_key(&instance.set_labels(s)),
                dual.weight(s).unwrap().to_string(),
            )
        })
        .collect();
    json!({
        "family": family,
        "weights": weights,
        "objective": dual.objective().to_string(),
    })
}

#[derive(Debug, Deserialize)]
struct DualFile {
    family: Vec<Vec<String>>,
    weights: BTreeMap<String, Value>,
}

/// Reads a dual dump against the instance it was written for. Members are
/// taken as given, without complementing.
pub fn read_dual<T: Scalar>(
    instance: &MatchingInstance<T>,
    value: &Value,
) -> Result<LaminarDual<T>, IoError> {
    let file: DualFile = serde_json::from_value(value.clone())?;
    let space = instance.space();
    let mut members = BTreeMap::new();
    for labels in &file.family {
        let mut set = VertexSet::EMPTY;
        for l in labels {
            let p = point(space, l)?;
            let v = instance
                .local(p)
                .ok_or_else(|| IoError::Schema(format!("point {l:?} is not matched")))?;
            set = set.union(VertexSet::singleton(v));
        }
        let key = member_key(labels);
        let w = file
            .weights
            .get(&key)
            .ok_or_else(|| IoError::Schema(format!("no weight for member {key:?}")))?;
        if members
            .insert(set, number(w, || format!("weights[{key:?}]"))?)
            .is_some()
        {
            return Err(IoError::Schema(format!("member {key:?} listed twice")));
        }
    }
    Ok(LaminarDual::new(instance.num_vertices(), members))
}

pub fn read_dual_str<T: Scalar>(
    instance: &MatchingInstance<T>,
    text: &str,
) -> Result<LaminarDual<T>, IoError> {
    read_dual(instance, &serde_json::from_str(text)?)
}

/// `{"pairs", "thresholds", "t": {"1": {label: value}}, "dual"}`.
pub fn projection_json<T: Scalar>(p: &ProjectionOperator<T>) -> Value {
    let space = p.space();
    let t: BTreeMap<String, BTreeMap<&str, String>> = p
        .functionals
        .iter()
        .enumerate()
        .map(|(i, f)| {
            (
                (i + 1).to_string(),
                f.values()
                    .iter()
                    .map(|(x, v)| (space.label(*x), v.to_string()))
                    .collect(),
            )
        })
        .collect();
    json!({
        "pairs": pairs_json(space, &p.pairs)["pairs"],
        "thresholds": p.thresholds.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        "t": t,
        "dual": dual_json(p.structure().instance(), p.structure().dual()),
    })
}

/// Deterministic pretty JSON with a trailing newline.
pub fn to_pretty(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}
