//! Time representation and tolerance-aware comparisons.
//!
//! Simulation time is `f64`. Integer-valued times (discrete systems, grids)
//! are exactly representable; `f64::INFINITY` stands for "never" / an
//! unbounded horizon. All comparisons between times go through an absolute
//! tolerance `eps` so that accumulated floating-point noise does not split
//! events that the model intends to coincide.

/// Simulation time.
pub type Time = f64;

/// Default absolute tolerance for time comparisons.
pub const DEFAULT_EPS: f64 = 1e-9;

/// `a == b` up to `eps`. Infinities compare equal to themselves.
pub fn time_eq(a: Time, b: Time, eps: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= eps
}

/// `a <= b` up to `eps`.
pub fn time_le(a: Time, b: Time, eps: f64) -> bool {
    a <= b + eps
}

/// `a < b` by more than `eps`.
pub fn time_lt(a: Time, b: Time, eps: f64) -> bool {
    a < b - eps
}

/// Formats a time with 17 significant digits, enough for an exact `f64`
/// round-trip. Infinity is written as `inf`.
pub fn fmt_time(t: Time) -> String {
    if t == f64::INFINITY {
        "inf".to_string()
    } else if t == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{:.16e}", t)
    }
}

/// Parses the output of [`fmt_time`].
pub fn parse_time(s: &str) -> Option<Time> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse::<f64>().ok(),
    }
}

/// Field-level serde for times that may be infinite. JSON has no infinity
/// literal, so `+inf` is written as the string `"inf"`.
pub mod serde_inf {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &f64, s: S) -> Result<S::Ok, S::Error> {
        if t.is_infinite() {
            s.serialize_str(if *t > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*t)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum NumOrStr {
            Num(f64),
            Str(String),
        }
        match NumOrStr::deserialize(d)? {
            NumOrStr::Num(x) => Ok(x),
            NumOrStr::Str(s) => {
                super::parse_time(&s).ok_or_else(|| de::Error::custom(format!("bad time `{s}`")))
            }
        }
    }
}
