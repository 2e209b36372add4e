//! Values stored at random-choice sites and in model outputs.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A finite value drawn at a sample site, supplied to an observe site, or
/// reported as a model output.
///
/// The JSON form is untagged: integers stay integers (`2`), reals always carry
/// a fractional part or exponent (`2.0`), booleans are `true`/`false`, and
/// vectors are arrays of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(f64),
    Vector(Vec<f64>),
}

impl Value {
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Real(_) => "real",
            Value::Vector(_) => "vector",
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Value::Real(x) => x.is_finite(),
            Value::Vector(xs) => xs.iter().all(|x| x.is_finite()),
            Value::Bool(_) | Value::Int(_) => true,
        }
    }

    /// Numeric view used by posterior summaries. Vectors have none.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            Value::Int(i) => Some(*i as f64),
            Value::Real(x) => Some(*x),
            Value::Vector(_) => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Value::Vector(v) => Some(v),
            _ => None,
        }
    }

    /// Bit-level equality: distinguishes `0.0` from `-0.0` and compares reals
    /// by their representation.
    pub fn bit_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Real(a), Value::Real(b)) => a.to_bits() == b.to_bits(),
            (Value::Vector(a), Value::Vector(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => self == other,
        }
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<u64> for Value {
    fn from(i: u64) -> Self {
        Value::Int(i as i64)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<Vec<f64>> for Value {
    fn from(v: Vec<f64>) -> Self {
        Value::Vector(v)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(x) => write!(f, "{x:?}"),
            Value::Vector(v) => write!(f, "{v:?}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_keeps_int_real_distinction() {
        assert_eq!(serde_json::to_string(&Value::Int(2)).unwrap(), "2");
        assert_eq!(serde_json::to_string(&Value::Real(2.0)).unwrap(), "2.0");
        assert_eq!(serde_json::from_str::<Value>("2").unwrap(), Value::Int(2));
        assert_eq!(serde_json::from_str::<Value>("2.0").unwrap(), Value::Real(2.0));
        assert_eq!(serde_json::from_str::<Value>("true").unwrap(), Value::Bool(true));
        assert_eq!(
            serde_json::from_str::<Value>("[1, 2.5]").unwrap(),
            Value::Vector(vec![1.0, 2.5])
        );
    }

    #[test]
    fn finiteness() {
        assert!(!Value::Real(f64::NAN).is_finite());
        assert!(!Value::Vector(vec![1.0, f64::INFINITY]).is_finite());
        assert!(Value::Int(i64::MAX).is_finite());
    }
}
