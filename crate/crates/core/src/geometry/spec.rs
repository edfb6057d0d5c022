//! Declarative description of a planar norm, as read from JSON.
//!
//! ```json
//! {"kind":"lp","p":4.0}
//! {"kind":"polygon","vertices":[[1,0],[0,1],[-1,0],[0,-1]]}
//! {"kind":"dual","of":{"kind":"sum","terms":[{"kind":"lp","p":1},{"kind":"euclidean"}]}}
//! ```
//!
//! `p` may also be the string `"inf"` for the max norm.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NormSpec {
    Euclidean,
    Lp {
        #[serde(serialize_with = "ser_exponent", deserialize_with = "de_exponent")]
        p: f64,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
    Sum {
        terms: Vec<NormSpec>,
    },
    Dual {
        of: Box<NormSpec>,
    },
    /// `factor * ||x||_of`; the unit ball is the inner ball shrunk by `factor`.
    Scaled {
        factor: f64,
        of: Box<NormSpec>,
    },
}

/// Errors raised inside an internally tagged enum carry no position; the
/// offending key is located in the text instead.
fn locate_field_error(text: &str, e: serde_json::Error) -> Error {
    if e.line() > 0 {
        return Error::Json(e);
    }
    let msg = e.to_string();
    let key = msg
        .split_once("field `")
        .and_then(|(_, rest)| rest.split_once('`'))
        .map(|(k, _)| format!("\"{k}\""));
    match key.and_then(|k| text.find(&k)) {
        Some(at) => {
            let before = &text[..at];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            Error::Parse(format!("{msg} at line {line} column {column}"))
        }
        None => Error::Json(e),
    }
}

impl NormSpec {
    pub fn lp(p: f64) -> Self {
        NormSpec::Lp { p }
    }

    pub fn polygon(vertices: &[[f64; 2]]) -> Self {
        NormSpec::Polygon {
            vertices: vertices.to_vec(),
        }
    }

    /// Axis-aligned square `[-1,1]^2` as a polygon (the max-norm ball).
    pub fn square() -> Self {
        Self::polygon(&[[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
    }

    /// Square with rounded corners: Minkowski sum of `[-1,1]^2` and the unit disk,
    /// expressed as the dual of `||x||_1 + |x|`. C1 boundary with flat edges.
    pub fn rounded_square() -> Self {
        NormSpec::Dual {
            of: Box::new(NormSpec::Sum {
                terms: vec![NormSpec::lp(1.0), NormSpec::Euclidean],
            }),
        }
    }

    pub fn dual_of(of: NormSpec) -> Self {
        NormSpec::Dual { of: Box::new(of) }
    }

    pub fn scaled(factor: f64, of: NormSpec) -> Self {
        NormSpec::Scaled {
            factor,
            of: Box::new(of),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: NormSpec = serde_json::from_str(text).map_err(|e| locate_field_error(text, e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("norm spec serializes")
    }

    /// Checks the structural invariants; polygon geometry is checked when the
    /// norm is built.
    pub fn validate(&self) -> Result<()> {
        match self {
            NormSpec::Euclidean => Ok(()),
            NormSpec::Lp { p } => {
                if p.is_nan() || *p < 1.0 {
                    Err(Error::InvalidSpec(format!("p must be ≥ 1, got {p}")))
                } else {
                    Ok(())
                }
            }
            NormSpec::Polygon { vertices } => {
                if vertices.len() < 4 {
                    return Err(Error::InvalidSpec(format!(
                        "polygon needs at least 4 vertices, got {}",
                        vertices.len()
                    )));
                }
                if vertices.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidSpec("polygon vertex is not finite".into()));
                }
                Ok(())
            }
            NormSpec::Sum { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidSpec("sum requires at least one term".into()));
                }
                terms.iter().try_for_each(NormSpec::validate)
            }
            NormSpec::Dual { of } => of.validate(),
            NormSpec::Scaled { factor, of } => {
                if !(factor.is_finite() && *factor > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "scale factor must be positive, got {factor}"
                    )));
                }
                of.validate()
            }
        }
    }
}

fn ser_exponent<S: Serializer>(p: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if p.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*p)
    }
}

fn de_exponent<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Exponent {
        Num(f64),
        Text(String),
    }
    match Exponent::deserialize(d)? {
        Exponent::Num(p) => Ok(p),
        Exponent::Text(t) => match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" => Ok(f64::INFINITY),
            other => Err(serde::de::Error::custom(format!(
                "exponent must be a number or \"inf\", got {other:?}"
            ))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_catalogue() {
        let s = NormSpec::from_json(r#"{"kind":"lp","p":4.0}"#).unwrap();
        assert_eq!(s, NormSpec::lp(4.0));
        let s = NormSpec::from_json(r#"{"kind":"lp","p":"inf"}"#).unwrap();
        assert_eq!(s, NormSpec::lp(f64::INFINITY));
        let s = NormSpec::from_json(
            r#"{"kind":"scaled","factor":0.5,"of":{"kind":"dual","of":{"kind":"euclidean"}}}"#,
        )
        .unwrap();
        assert_eq!(s, NormSpec::scaled(0.5, NormSpec::dual_of(NormSpec::Euclidean)));
        let round = NormSpec::from_json(&NormSpec::rounded_square().to_json()).unwrap();
        assert_eq!(round, NormSpec::rounded_square());
    }

    #[test]
    fn infinite_exponent_round_trips() {
        let text = NormSpec::lp(f64::INFINITY).to_json();
        assert!(text.contains("\"inf\""));
        assert_eq!(NormSpec::from_json(&text).unwrap(), NormSpec::lp(f64::INFINITY));
    }

    #[test]
    fn rejects_unknown_kind_naming_it() {
        let err = NormSpec::from_json(r#"{"kind":"hexagon"}"#).unwrap_err();
        assert!(err.to_string().contains("hexagon"), "{err}");
        let err = NormSpec::from_json(r#"{"kind":"lp","p":2,"q":3}"#).unwrap_err();
        assert!(err.to_string().contains('q'), "{err}");
    }

    #[test]
    fn rejects_small_exponent() {
        let err = NormSpec::from_json(r#"{"kind":"lp","p":0.5}"#).unwrap_err();
        assert!(err.to_string().contains("p must be ≥ 1"), "{err}");
    }

    #[test]
    fn rejects_empty_sum_and_bad_factor() {
        assert!(NormSpec::from_json(r#"{"kind":"sum","terms":[]}"#).is_err());
        assert!(NormSpec::from_json(r#"{"kind":"scaled","factor":0,"of":{"kind":"euclidean"}}"#).is_err());
    }
}
