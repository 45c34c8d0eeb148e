//! Upper-bound and joint upper/lower-bound normalization of a raw metric value.
//!
//! Inputs that overshoot a bound by at most [`EPSILON`] are clamped; larger
//! violations are errors. Division-by-zero cases return 0 with the
//! `degenerate` flag set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EPSILON: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Raw metric value.
    None,
    /// `A / IUB`
    Upper,
    /// `(A / IUB) * (A / (A + RLB))`
    V1,
    /// `(A - RLB) / (IUB - RLB)` above the random baseline, `(A - RLB) / RLB` below.
    V2,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::None, Variant::Upper, Variant::V1, Variant::V2];

    pub fn name(self) -> &'static str {
        match self {
            Variant::None => "none",
            Variant::Upper => "upper",
            Variant::V1 => "v1",
            Variant::V2 => "v2",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "raw" => Ok(Variant::None),
            "upper" | "u" => Ok(Variant::Upper),
            "v1" => Ok(Variant::V1),
            "v2" => Ok(Variant::V2),
            other => Err(Error::InvalidArgument(format!(
                "unknown normalization {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScore {
    pub value: f64,
    pub variant: Variant,
    pub degenerate: bool,
}

impl NormalizedScore {
    fn new(value: f64, variant: Variant) -> Self {
        Self {
            value,
            variant,
            degenerate: false,
        }
    }

    fn degenerate(variant: Variant) -> Self {
        Self {
            value: 0.0,
            variant,
            degenerate: true,
        }
    }
}

fn check_non_negative(name: &str, x: f64) -> Result<f64> {
    if !x.is_finite() || x < -EPSILON {
        return Err(Error::BoundViolation(format!(
            "{name} = {x} must be finite and >= 0"
        )));
    }
    Ok(x.max(0.0))
}

/// Validates `0 <= a <= iub` up to slack and returns the clamped pair. A zero
/// upper bound is accepted with any metric value; callers treat it as degenerate.
fn check_metric(a: f64, iub: f64) -> Result<(f64, f64)> {
    let a = check_non_negative("metric", a)?;
    let iub = check_non_negative("iub", iub)?;
    if iub > 0.0 && a > iub + EPSILON {
        return Err(Error::BoundViolation(format!(
            "metric {a} exceeds upper bound {iub}"
        )));
    }
    Ok((a.min(iub), iub))
}

pub fn normalize_upper(a: f64, iub: f64) -> Result<NormalizedScore> {
    let (a, iub) = check_metric(a, iub)?;
    if iub == 0.0 {
        return Ok(NormalizedScore::degenerate(Variant::Upper));
    }
    Ok(NormalizedScore::new(a / iub, Variant::Upper))
}

pub fn normalize_v1(a: f64, iub: f64, rlb: f64) -> Result<NormalizedScore> {
    let (a, iub) = check_metric(a, iub)?;
    let rlb = check_non_negative("rlb", rlb)?;
    if iub == 0.0 || a + rlb == 0.0 {
        return Ok(NormalizedScore::degenerate(Variant::V1));
    }
    Ok(NormalizedScore::new(
        (a / iub) * (a / (a + rlb)),
        Variant::V1,
    ))
}

pub fn normalize_v2(a: f64, iub: f64, rlb: f64) -> Result<NormalizedScore> {
    let (a, iub) = check_metric(a, iub)?;
    let rlb = check_non_negative("rlb", rlb)?;
    if iub == 0.0 {
        return Ok(NormalizedScore::degenerate(Variant::V2));
    }
    if rlb > iub + EPSILON {
        return Err(Error::BoundViolation(format!(
            "lower bound {rlb} exceeds upper bound {iub}"
        )));
    }
    let rlb = rlb.min(iub);
    // bounds that agree up to rounding (e.g. every doc relevant) leave no room
    // to beat random; dividing by the residue would blow up
    if iub - rlb <= EPSILON * iub.max(1.0) {
        return Ok(NormalizedScore::degenerate(Variant::V2));
    }
    let value = if a >= rlb {
        (a - rlb) / (iub - rlb)
    } else {
        (a - rlb) / rlb
    };
    Ok(NormalizedScore::new(value, Variant::V2))
}

/// Applies `variant`; [`Variant::None`] passes the raw value through.
pub fn normalize(variant: Variant, a: f64, iub: f64, rlb: f64) -> Result<NormalizedScore> {
    match variant {
        Variant::None => Ok(NormalizedScore::new(a, Variant::None)),
        Variant::Upper => normalize_upper(a, iub),
        Variant::V1 => normalize_v1(a, iub, rlb),
        Variant::V2 => normalize_v2(a, iub, rlb),
    }
}
