//! Named expressions for source terms and boundary data.

use std::fmt;
use std::str::FromStr;

use crate::config::finite;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Centre of the `offcentre` profile, outside the closed square.
const OFF_CENTRE: [f64; 2] = [-2.5, -1.5];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Expr {
    Zero,
    Const(f64),
    /// `a x + b y`
    Affine(f64, f64),
    /// `x^2 - y^2`
    Quad,
    /// `sin(pi x) sin(pi y)`
    SinSin,
    /// `sin x cos y`
    SinCos,
    /// `|x - c|^((p-2)/(p-1))` with `c` outside the square; p-harmonic.
    OffCentre,
}

impl Expr {
    pub fn eval(self, p: f64) -> impl Fn(f64, f64) -> f64 {
        let beta = (p - 2.0) / (p - 1.0);
        move |x, y| match self {
            Expr::Zero => 0.0,
            Expr::Const(c) => c,
            Expr::Affine(a, b) => a * x + b * y,
            Expr::Quad => x * x - y * y,
            Expr::SinSin => (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin(),
            Expr::SinCos => x.sin() * y.cos(),
            Expr::OffCentre => (x - OFF_CENTRE[0]).hypot(y - OFF_CENTRE[1]).powf(beta),
        }
    }

    /// Whether the expression is identically zero.
    pub fn is_zero(self) -> bool {
        matches!(self, Expr::Zero) || self == Expr::Const(0.0) || self == Expr::Affine(0.0, 0.0)
    }
}

impl FromStr for Expr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name, args) {
            ("zero", None) => Ok(Expr::Zero),
            ("quad", None) => Ok(Expr::Quad),
            ("sinsin", None) => Ok(Expr::SinSin),
            ("sincos", None) => Ok(Expr::SinCos),
            ("offcentre", None) => Ok(Expr::OffCentre),
            ("const", Some(a)) => Ok(Expr::Const(finite(a)?)),
            ("affine", Some(a)) => {
                let (x, y) = a.split_once(',').ok_or_else(|| format!("`affine:{a}` needs two coefficients a,b"))?;
                Ok(Expr::Affine(finite(x)?, finite(y)?))
            }
            _ => Err(format!(
                "unknown expression `{s}` (expected zero, const:c, affine:a,b, quad, sinsin, sincos or offcentre)"
            )),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Zero => f.write_str("zero"),
            Expr::Const(c) => write!(f, "const:{c}"),
            Expr::Affine(a, b) => write!(f, "affine:{a},{b}"),
            Expr::Quad => f.write_str("quad"),
            Expr::SinSin => f.write_str("sinsin"),
            Expr::SinCos => f.write_str("sincos"),
            Expr::OffCentre => f.write_str("offcentre"),
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
