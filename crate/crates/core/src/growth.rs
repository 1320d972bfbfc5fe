//! Growth functions `w(x) >= 1` with `w(x) → ∞`, used as mesh bounds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GrowthFunction {
    /// `max(1, c · ln(1 + ln(1 + x)))`
    DoubleLog { c: f64 },
    /// `max(1, x^eps)`
    Power { eps: f64 },
    /// `ln(e + x)`
    Log,
    /// Piecewise constant: `w(x) = value_i` for `threshold_i <= x < threshold_{i+1}`.
    /// The first threshold must be at most 1.
    Steps { points: Vec<(f64, f64)> },
}

/// Where the smallest argument reaching a target value lies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Reach {
    /// Natural log of the least `x >= 1` with `w(x) >= target`
    /// (`+∞` if it overflows a double).
    Ln(f64),
    /// The function never reaches the target (finite step tables only).
    Never,
}

const GRID_TOP: f64 = 1e12;

impl GrowthFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            GrowthFunction::DoubleLog { c } => (c * (x.ln_1p()).ln_1p()).max(1.0),
            GrowthFunction::Power { eps } => x.powf(*eps).max(1.0),
            GrowthFunction::Log => (std::f64::consts::E + x).ln(),
            GrowthFunction::Steps { points } => points
                .iter()
                .take_while(|(t, _)| *t <= x)
                .last()
                .map_or(1.0, |&(_, v)| v),
        }
    }

    /// Parameter checks plus `w >= 1`, monotonicity and growth on a
    /// geometric grid `1, 2, 4, ...` up to `10^12`.
    pub fn validate(&self) -> Result<()> {
        match self {
            GrowthFunction::DoubleLog { c } if !(c.is_finite() && *c > 0.0) => {
                return Err(Error::Config(format!("double-log scale {c} must be positive")))
            }
            GrowthFunction::Power { eps } if !(eps.is_finite() && *eps > 0.0) => {
                return Err(Error::Config(format!("power exponent {eps} must be positive")))
            }
            GrowthFunction::Steps { points } => {
                if points.first().is_none_or(|(t, _)| *t > 1.0) {
                    return Err(Error::Config("step table must start at a threshold <= 1".into()));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::Config("step thresholds must increase".into()));
                }
            }
            _ => {}
        }
        let mut prev = self.eval(1.0);
        let mut x = 1.0;
        while x <= GRID_TOP {
            let v = self.eval(x);
            if v.is_nan() || v < 1.0 {
                return Err(Error::Config(format!("w({x}) = {v} < 1")));
            }
            if v < prev {
                return Err(Error::Config(format!("w decreases near x = {x}")));
            }
            prev = v;
            x *= 2.0;
        }
        if self.eval(GRID_TOP) <= self.eval(1.0) {
            return Err(Error::Config("w does not grow on [1, 1e12]".into()));
        }
        Ok(())
    }

    /// Closed-form inverse: the least `x >= 1` with `w(x) >= target`, as a log.
    pub fn reach(&self, target: f64) -> Reach {
        if target <= self.eval(1.0) {
            return Reach::Ln(0.0);
        }
        match self {
            GrowthFunction::DoubleLog { c } => {
                // ln(1 + x) >= e^{T/c} - 1 =: a,  x = e^a - 1
                let a = (target / c).exp_m1();
                Reach::Ln(ln_expm1(a))
            }
            GrowthFunction::Power { eps } => Reach::Ln(target.ln() / eps),
            GrowthFunction::Log => {
                // x = e^T - e
                Reach::Ln(target + (-(1.0 - target).exp()).ln_1p())
            }
            GrowthFunction::Steps { points } => points
                .iter()
                .find(|(_, v)| *v >= target)
                .map_or(Reach::Never, |&(t, _)| Reach::Ln(t.max(1.0).ln())),
        }
    }
}

/// `ln(e^a - 1)` for `a > 0`, stable for large `a`.
fn ln_expm1(a: f64) -> f64 {
    if a > 30.0 {
        a + (-(-a).exp()).ln_1p()
    } else {
        a.exp_m1().ln()
    }
}

impl fmt::Display for GrowthFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrowthFunction::DoubleLog { c } => write!(f, "double-log:{c}"),
            GrowthFunction::Power { eps } => write!(f, "power:{eps}"),
            GrowthFunction::Log => write!(f, "log"),
            GrowthFunction::Steps { points } => {
                write!(f, "steps:")?;
                for (i, (t, v)) in points.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}={v}")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `double-log:C`, `power:EPS`, `log`, or `steps:X1=W1,X2=W2,...`.
impl FromStr for GrowthFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number {v:?} in growth function {s:?}")))
        };
        let w = match kind.trim() {
            "double-log" => GrowthFunction::DoubleLog {
                c: if arg.is_empty() { 1.0 } else { num(arg)? },
            },
            "power" => GrowthFunction::Power { eps: num(arg)? },
            "log" => GrowthFunction::Log,
            "steps" => {
                let mut points = Vec::new();
                for item in arg.split(',') {
                    let (t, v) = item
                        .split_once('=')
                        .ok_or_else(|| Error::Config(format!("step {item:?} is not X=W")))?;
                    points.push((num(t)?, num(v)?));
                }
                GrowthFunction::Steps { points }
            }
            other => return Err(Error::Config(format!("unknown growth function {other:?}"))),
        };
        w.validate()?;
        Ok(w)
    }
}
