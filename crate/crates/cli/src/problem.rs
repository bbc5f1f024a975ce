//! Problem-file parsing and validation. Problems are JSON objects holding a
//! frame plus the optional operators, weights, and targets the subcommands
//! need; shapes are validated with positional error messages.

use kframe_core::frame::{Frame, KOperator};
use kframe_core::matrix::Mat;
use kframe_core::piecewise::Projection;
use kframe_core::variational::ConvexSet;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at {path}: {detail}")]
    Schema { path: String, detail: String },
    #[error("subcommand requires field \"{field}\" in the problem file")]
    MissingField { field: &'static str },
}

fn schema(path: impl Into<String>, detail: impl Into<String>) -> ProblemError {
    ProblemError::Schema {
        path: path.into(),
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    dimension: usize,
    frame: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    convex_set: Option<RawConvexSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index_set: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_iter: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawConvexSet {
    WholeSpace,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Halfspace { normal: Vec<f64>, offset: f64 },
    Affine { point: Vec<f64>, basis: Vec<Vec<f64>> },
}

/// A validated problem: shapes are consistent with `dimension`, weights are
/// nonnegative, the projection really is one, and the index set is 0-based.
#[derive(Debug)]
pub struct Problem {
    pub frame: Frame,
    pub k: KOperator,
    pub p: Option<Projection>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub c: Option<Vec<f64>>,
    pub f0: Option<Vec<f64>>,
    pub convex_set: Option<ConvexSet>,
    /// 0-based; the file uses 1-based indices j = 1..m.
    pub index_set: Option<Vec<usize>>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

pub fn parse_problem_str(text: &str) -> Result<Problem, ProblemError> {
    let raw: RawProblem = serde_json::from_str(text).map_err(|e| {
        if e.is_syntax() || e.is_eof() {
            ProblemError::Syntax {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            }
        } else {
            schema(
                format!("line {}, column {}", e.line(), e.column()),
                e.to_string(),
            )
        }
    })?;
    validate(raw)
}

fn validate(raw: RawProblem) -> Result<Problem, ProblemError> {
    let n = raw.dimension;
    if n == 0 {
        return Err(schema("dimension", "must be at least 1"));
    }
    if raw.frame.is_empty() {
        return Err(schema("frame", "must contain at least one vector"));
    }
    let m = raw.frame.len();
    for (i, row) in raw.frame.iter().enumerate() {
        if row.len() != n {
            return Err(schema(
                format!("frame[{i}]"),
                format!("expected {n} entries, got {}", row.len()),
            ));
        }
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(schema(format!("frame[{i}][{j}]"), "entry is not finite"));
            }
        }
    }
    let frame = Frame::from_vectors(&raw.frame)
        .map_err(|e| schema("frame", e.to_string()))?;

    let parse_square = |field: &str, rows: &[Vec<f64>]| -> Result<Mat, ProblemError> {
        if rows.len() != n {
            return Err(schema(field, format!("expected {n} rows, got {}", rows.len())));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(schema(
                    format!("{field}[{i}]"),
                    format!("expected {n} entries, got {}", row.len()),
                ));
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(schema(format!("{field}[{i}][{j}]"), "entry is not finite"));
                }
            }
        }
        Mat::from_rows(rows).map_err(|e| schema(field, e.to_string()))
    };

    let k = match &raw.k {
        Some(rows) => KOperator::new(parse_square("k", rows)?)
            .map_err(|e| schema("k", e.to_string()))?,
        None => KOperator::identity(n),
    };

    let p = match &raw.p {
        Some(rows) => Some(
            Projection::new(parse_square("p", rows)?)
                .map_err(|e| schema("p", e.to_string()))?,
        ),
        None => None,
    };

    let parse_weights = |field: &str, w: &[f64]| -> Result<Vec<f64>, ProblemError> {
        if w.len() != m {
            return Err(schema(
                field,
                format!("expected {m} weights (one per frame vector), got {}", w.len()),
            ));
        }
        for (i, v) in w.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(schema(
                    format!("{field}[{i}]"),
                    "weights must be finite and nonnegative",
                ));
            }
        }
        Ok(w.to_vec())
    };
    let a = raw.a.as_deref().map(|w| parse_weights("a", w)).transpose()?;
    let b = raw.b.as_deref().map(|w| parse_weights("b", w)).transpose()?;
    let c = raw.c.as_deref().map(|w| parse_weights("c", w)).transpose()?;

    let f0 = match &raw.f0 {
        Some(v) => {
            if v.len() != n {
                return Err(schema(
                    "f0",
                    format!("expected {n} entries, got {}", v.len()),
                ));
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(schema(format!("f0[{i}]"), "entry is not finite"));
            }
            Some(v.clone())
        }
        None => None,
    };

    let convex_set = match raw.convex_set {
        Some(raw_set) => Some(validate_set(raw_set, n)?),
        None => None,
    };

    let index_set = match &raw.index_set {
        Some(idx) => {
            let mut zero_based = Vec::with_capacity(idx.len());
            for (pos, &j) in idx.iter().enumerate() {
                if j == 0 || j > m {
                    return Err(schema(
                        format!("index_set[{pos}]"),
                        format!("indices are 1-based in 1..={m}, got {j}"),
                    ));
                }
                zero_based.push(j - 1);
            }
            Some(zero_based)
        }
        None => None,
    };

    if let Some(t) = raw.tol {
        if !t.is_finite() || t <= 0.0 {
            return Err(schema("tol", "must be a positive finite number"));
        }
    }
    if let Some(mi) = raw.max_iter {
        if mi == 0 {
            return Err(schema("max_iter", "must be at least 1"));
        }
    }

    Ok(Problem {
        frame,
        k,
        p,
        a,
        b,
        c,
        f0,
        convex_set,
        index_set,
        tol: raw.tol,
        max_iter: raw.max_iter,
    })
}

fn validate_set(raw: RawConvexSet, n: usize) -> Result<ConvexSet, ProblemError> {
    let check_len = |field: &str, len: usize| -> Result<(), ProblemError> {
        if len != n {
            return Err(schema(
                format!("convex_set.{field}"),
                format!("expected {n} entries, got {len}"),
            ));
        }
        Ok(())
    };
    match raw {
        RawConvexSet::WholeSpace => Ok(ConvexSet::whole_space(n)),
        RawConvexSet::Box { lo, hi } => {
            check_len("lo", lo.len())?;
            check_len("hi", hi.len())?;
            ConvexSet::boxed(lo, hi).map_err(|e| schema("convex_set", e.to_string()))
        }
        RawConvexSet::Ball { center, radius } => {
            check_len("center", center.len())?;
            ConvexSet::ball(center, radius).map_err(|e| schema("convex_set", e.to_string()))
        }
        RawConvexSet::Halfspace { normal, offset } => {
            check_len("normal", normal.len())?;
            ConvexSet::halfspace(normal, offset).map_err(|e| schema("convex_set", e.to_string()))
        }
        RawConvexSet::Affine { point, basis } => {
            check_len("point", point.len())?;
            let cols: Result<Vec<Vec<f64>>, ProblemError> = basis
                .iter()
                .enumerate()
                .map(|(i, col)| {
                    if col.len() != n {
                        Err(schema(
                            format!("convex_set.basis[{i}]"),
                            format!("expected {n} entries, got {}", col.len()),
                        ))
                    } else {
                        Ok(col.clone())
                    }
                })
                .collect();
            let basis_mat = Mat::from_cols(&cols?)
                .map_err(|e| schema("convex_set.basis", e.to_string()))?;
            ConvexSet::affine(point, basis_mat).map_err(|e| schema("convex_set", e.to_string()))
        }
    }
}

impl Problem {
    pub fn require_f0(&self) -> Result<&[f64], ProblemError> {
        self.f0
            .as_deref()
            .ok_or(ProblemError::MissingField { field: "f0" })
    }

    pub fn require_p(&self) -> Result<&Projection, ProblemError> {
        self.p
            .as_ref()
            .ok_or(ProblemError::MissingField { field: "p" })
    }

    pub fn require_ab(&self) -> Result<(&[f64], &[f64]), ProblemError> {
        let a = self
            .a
            .as_deref()
            .ok_or(ProblemError::MissingField { field: "a" })?;
        let b = self
            .b
            .as_deref()
            .ok_or(ProblemError::MissingField { field: "b" })?;
        Ok((a, b))
    }

    pub fn require_index_set(&self) -> Result<&[usize], ProblemError> {
        self.index_set
            .as_deref()
            .ok_or(ProblemError::MissingField { field: "index_set" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(text: &str) -> Result<Problem, ProblemError> {
        parse_problem_str(text)
    }

    #[test]
    fn minimal_problem_defaults_identity_k() {
        let p = parse_str(r#"{"dimension":2,"frame":[[1,0],[0,1]]}"#).unwrap();
        assert_eq!(p.frame.dim(), 2);
        assert_eq!(p.frame.count(), 2);
        assert_eq!(p.k.rank(), 2);
        assert!(p.k.matrix().sub(&Mat::identity(2)).frobenius_norm() == 0.0);
    }

    #[test]
    fn bad_row_length_points_at_row() {
        let err = parse_str(r#"{"dimension":2,"frame":[[1,0],[1]]}"#).unwrap_err();
        match err {
            ProblemError::Schema { path, .. } => assert_eq!(path, "frame[1]"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_str("{not json").unwrap_err();
        assert!(matches!(err, ProblemError::Syntax { .. }));
    }

    #[test]
    fn unknown_field_rejected() {
        let err = parse_str(r#"{"dimension":2,"frame":[[1,0],[0,1]],"quux":1}"#).unwrap_err();
        assert!(matches!(err, ProblemError::Schema { .. }));
    }

    #[test]
    fn index_set_converted_to_zero_based() {
        let p = parse_str(
            r#"{"dimension":2,"frame":[[1,0],[1,0],[0,1]],"index_set":[1,2]}"#,
        )
        .unwrap();
        assert_eq!(p.index_set.unwrap(), vec![0, 1]);
        let err = parse_str(
            r#"{"dimension":2,"frame":[[1,0],[0,1]],"index_set":[0]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ProblemError::Schema { .. }));
    }

    #[test]
    fn serialize_parse_round_trip_is_identity() {
        let text = r#"{
            "dimension": 2,
            "frame": [[1,0],[0.25,-7.25e-9]],
            "k": [[2,0],[0,1]],
            "p": [[1,0],[0,0]],
            "a": [1,0],
            "b": [0,1],
            "c": [0.5,0.5],
            "f0": [0.1,0.3],
            "convex_set": {"kind":"halfspace","normal":[1,1],"offset":0.5},
            "index_set": [1],
            "tol": 1e-8,
            "max_iter": 777
        }"#;
        let first: RawProblem = serde_json::from_str(text).unwrap();
        let serialized = serde_json::to_string(&first).unwrap();
        let second: RawProblem = serde_json::from_str(&serialized).unwrap();
        assert_eq!(first, second);
        // And both validate to the same shapes.
        let p1 = validate(first).unwrap();
        let p2 = validate(second).unwrap();
        assert_eq!(p1.frame.synthesis().data(), p2.frame.synthesis().data());
        assert_eq!(p1.index_set, p2.index_set);
        assert_eq!(p1.tol, p2.tol);
    }

    #[test]
    fn full_problem_round_trips_through_validation() {
        let p = parse_str(
            r#"{
                "dimension": 2,
                "frame": [[1,0],[0,1]],
                "k": [[1,0],[0,1]],
                "p": [[1,0],[0,0]],
                "a": [1,0],
                "b": [0,1],
                "c": [1,1],
                "f0": [1,0],
                "convex_set": {"kind":"ball","center":[0,0],"radius":1.0},
                "tol": 1e-9,
                "max_iter": 500
            }"#,
        )
        .unwrap();
        assert!(p.p.is_some());
        assert_eq!(p.tol, Some(1e-9));
        assert_eq!(p.max_iter, Some(500));
        assert!(matches!(p.convex_set, Some(ConvexSet::Ball { .. })));
    }
}
