use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The potential shape `h` applied to `|∇f_K|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum Shape {
    /// `h(s) = s`
    #[default]
    Identity,
    /// `h(s) = s^p`, `p > 0`
    Power { p: f64 },
    /// `h(s) = a·s + b`, `a > 0`, `b ≥ 0`
    Affine { a: f64, b: f64 },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Shape::Identity => Ok(()),
            Shape::Power { p } if p.is_finite() && p > 0.0 => Ok(()),
            Shape::Affine { a, b } if a.is_finite() && b.is_finite() && a > 0.0 && b >= 0.0 => {
                Ok(())
            }
            other => Err(Error::InvalidArgument(format!("invalid shape {other:?}"))),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Shape::Identity => s,
            Shape::Power { p } => s.powf(p),
            Shape::Affine { a, b } => a * s + b,
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match *self {
            Shape::Identity => 1.0,
            Shape::Power { p } => {
                if p == 1.0 {
                    1.0
                } else if s == 0.0 {
                    if p > 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    p * s.powf(p - 1.0)
                }
            }
            Shape::Affine { a, .. } => a,
        }
    }

    /// `h′(|v|²)·v`, taken as zero at `v = 0` whatever `h′(0)` is.
    pub(crate) fn force_factor(&self, s: f64) -> f64 {
        if s == 0.0 {
            0.0
        } else {
            self.deriv(s)
        }
    }

    /// Parses `identity`, `power:<p>` or `affine:<a>,<b>`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::InvalidArgument(format!("cannot parse shape '{text}'"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        let shape = match text.split_once(':') {
            None if text == "identity" => Shape::Identity,
            Some(("power", p)) => Shape::Power { p: num(p)? },
            Some(("affine", rest)) => {
                let (a, b) = rest.split_once(',').ok_or_else(bad)?;
                Shape::Affine {
                    a: num(a)?,
                    b: num(b)?,
                }
            }
            _ => return Err(bad()),
        };
        shape.validate()?;
        Ok(shape)
    }
}
