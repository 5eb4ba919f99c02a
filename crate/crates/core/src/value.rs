//! State values and the descriptors of the spaces they live in.
//!
//! Proper state spaces and resource spaces are restricted to shapes that are
//! serializable and cover every supported model class: real vectors of fixed
//! dimension, finite label sets, and records of these.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A point of a state or resource space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    /// A real vector. The empty vector is the single point of the trivial space.
    Real(Vec<f64>),
    /// An element of a finite label set.
    Label(String),
    /// A record with named components.
    Record(BTreeMap<String, Value>),
}

impl Value {
    /// Convenience constructor for a one-dimensional real value.
    pub fn scalar(x: f64) -> Self {
        Value::Real(vec![x])
    }

    /// The single point of the trivial (zero-dimensional) space.
    pub fn unit() -> Self {
        Value::Real(Vec::new())
    }

    pub fn label(s: impl Into<String>) -> Self {
        Value::Label(s.into())
    }

    /// Returns the real vector if this value is one.
    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Value::Real(v) => Some(v),
            _ => None,
        }
    }

    /// Returns the scalar component of a one-dimensional real value.
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Value::Real(v) if v.len() == 1 => Some(v[0]),
            _ => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Value::Label(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(v) => {
                write!(f, "[")?;
                for (k, x) in v.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
            Value::Label(s) => write!(f, "{s}"),
            Value::Record(r) => {
                write!(f, "{{")?;
                for (k, (name, v)) in r.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{name}: {v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// Shape of a state or resource space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceDescriptor {
    /// Real vectors of a fixed dimension (`dim == 0` is the trivial space).
    Real { dim: usize },
    /// A finite, non-empty set of labels.
    Labels(Vec<String>),
    /// A record of named subspaces.
    Record(BTreeMap<String, SpaceDescriptor>),
}

impl SpaceDescriptor {
    pub fn scalar() -> Self {
        SpaceDescriptor::Real { dim: 1 }
    }

    pub fn trivial() -> Self {
        SpaceDescriptor::Real { dim: 0 }
    }

    /// Checks that `value` is a point of this space.
    pub fn admits(&self, value: &Value) -> bool {
        match (self, value) {
            (SpaceDescriptor::Real { dim }, Value::Real(v)) => {
                v.len() == *dim && v.iter().all(|x| x.is_finite())
            }
            (SpaceDescriptor::Labels(set), Value::Label(l)) => set.iter().any(|s| s == l),
            (SpaceDescriptor::Record(fields), Value::Record(entries)) => {
                fields.len() == entries.len()
                    && fields.iter().all(|(name, sub)| {
                        entries.get(name).is_some_and(|v| sub.admits(v))
                    })
            }
            _ => false,
        }
    }
}

/// Membership test for the zero-resource subset of a resource space.
///
/// A zero set must be non-empty inside its space; this is checked when the
/// owning model is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroSet {
    /// Real vectors whose max-norm is at most `tol`.
    ScalarZero { tol: f64 },
    /// An explicit list of labels.
    Labels(Vec<String>),
}

impl ZeroSet {
    /// Whether `value` lies in the zero set.
    pub fn contains(&self, value: &Value) -> bool {
        match (self, value) {
            (ZeroSet::ScalarZero { tol }, Value::Real(v)) => {
                v.iter().all(|x| x.abs() <= *tol)
            }
            (ZeroSet::Labels(set), Value::Label(l)) => set.iter().any(|s| s == l),
            _ => false,
        }
    }

    /// Whether this zero set is a non-empty subset of `space`.
    pub fn valid_for(&self, space: &SpaceDescriptor) -> bool {
        match (self, space) {
            (ZeroSet::ScalarZero { tol }, SpaceDescriptor::Real { .. }) => *tol >= 0.0,
            (ZeroSet::Labels(set), SpaceDescriptor::Labels(alphabet)) => {
                !set.is_empty() && set.iter().all(|l| alphabet.contains(l))
            }
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_admits_matching_values() {
        let real3 = SpaceDescriptor::Real { dim: 3 };
        assert!(real3.admits(&Value::Real(vec![1.0, 2.0, 3.0])));
        assert!(!real3.admits(&Value::Real(vec![1.0])));
        assert!(!real3.admits(&Value::Real(vec![1.0, f64::NAN, 3.0])));
        assert!(!real3.admits(&Value::label("x")));

        let labels = SpaceDescriptor::Labels(vec!["dead".into(), "alive".into()]);
        assert!(labels.admits(&Value::label("alive")));
        assert!(!labels.admits(&Value::label("zombie")));

        let rec = SpaceDescriptor::Record(BTreeMap::from([
            ("pos".to_string(), SpaceDescriptor::Real { dim: 2 }),
            ("kind".to_string(), labels.clone()),
        ]));
        let v = Value::Record(BTreeMap::from([
            ("pos".to_string(), Value::Real(vec![0.0, 1.0])),
            ("kind".to_string(), Value::label("dead")),
        ]));
        assert!(rec.admits(&v));
    }

    #[test]
    fn trivial_space_has_one_point() {
        assert!(SpaceDescriptor::trivial().admits(&Value::unit()));
        assert!(!SpaceDescriptor::trivial().admits(&Value::scalar(0.0)));
    }

    #[test]
    fn zero_set_membership() {
        let z = ZeroSet::ScalarZero { tol: 1e-12 };
        assert!(z.contains(&Value::scalar(0.0)));
        assert!(!z.contains(&Value::scalar(0.5)));
        assert!(z.valid_for(&SpaceDescriptor::scalar()));
        assert!(!z.valid_for(&SpaceDescriptor::Labels(vec!["a".into()])));

        let zl = ZeroSet::Labels(vec!["empty".into()]);
        assert!(zl.contains(&Value::label("empty")));
        assert!(!zl.valid_for(&SpaceDescriptor::Labels(vec!["full".into()])));
        assert!(zl.valid_for(&SpaceDescriptor::Labels(vec!["empty".into(), "full".into()])));
    }
}
