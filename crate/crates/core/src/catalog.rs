//! Closed-form proximal maps, envelopes, hulls and level proximal
//! subdifferentials for the built-in functions.
//!
//! Every query returns `Ok(None)` when no closed form is available at the
//! requested `lambda`; callers then fall back to the grid oracles.

use crate::error::{Error, Result};
use crate::numeric::{bisect, near};
use crate::types::{ExtReal, SetValue};

/// Relative tolerance for deciding ties at thresholds in closed forms.
pub const TIE_TOL: f64 = 1e-9;

/// A built-in function together with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Entry {
    /// Counting norm: 0 at the origin, 1 elsewhere.
    L0,
    ScaledL0 {
        gamma: f64,
    },
    /// Indicator of a finite set of points (sorted, deduplicated).
    Indicator {
        points: Vec<f64>,
    },
    /// `|t|^p`.
    PNorm {
        p: f64,
    },
    /// `ln(|t| + eps)`.
    LogEps {
        eps: f64,
    },
    /// `exp(-t^2) - t^2 / (2c)`; prox-bounded with threshold `c`.
    GaussQuad {
        c: f64,
    },
    /// `sigma t^2 / 2`.
    Quad {
        sigma: f64,
    },
    Abs,
    NegAbs,
    Sin,
    Zero,
    /// Proximal hull of the counting norm at level `mu`:
    /// `sqrt(2/mu)|t| - t^2/(2 mu)` for `|t| <= sqrt(2 mu)`, else 1.
    HullL0 {
        mu: f64,
    },
}

fn spec_err(spec: &str, reason: impl Into<String>) -> Error {
    Error::Spec {
        spec: spec.to_string(),
        reason: reason.into(),
    }
}

fn parse_param(spec: &str, rest: Option<&str>, key: &str) -> Result<f64> {
    let rest = rest.ok_or_else(|| spec_err(spec, format!("missing parameter `{key}=`")))?;
    let (k, v) = rest
        .split_once('=')
        .ok_or_else(|| spec_err(spec, format!("expected `{key}=<value>`")))?;
    if k.trim() != key {
        return Err(spec_err(
            spec,
            format!("unknown parameter `{k}`, expected `{key}`"),
        ));
    }
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| spec_err(spec, format!("`{v}` is not a number")))?;
    if !v.is_finite() {
        return Err(spec_err(spec, "parameter must be finite"));
    }
    Ok(v)
}

fn positive(spec: &str, name: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(spec_err(spec, format!("{name} must be positive")))
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Entry {
    /// Parses one catalog spec such as `scaled_l0:gamma=0.5`.
    pub fn parse(spec: &str) -> Result<Entry> {
        let (name, rest) = match spec.split_once(':') {
            Some((n, r)) => (n.trim(), Some(r)),
            None => (spec.trim(), None),
        };
        let no_params = |e: Entry| {
            if rest.is_some() {
                Err(spec_err(spec, format!("`{name}` takes no parameters")))
            } else {
                Ok(e)
            }
        };
        match name {
            "l0" => no_params(Entry::L0),
            "abs" => no_params(Entry::Abs),
            "neg_abs" => no_params(Entry::NegAbs),
            "sin" => no_params(Entry::Sin),
            "zero" => no_params(Entry::Zero),
            "scaled_l0" => {
                let gamma = positive(spec, "gamma", parse_param(spec, rest, "gamma")?)?;
                Ok(Entry::ScaledL0 { gamma })
            }
            "pnorm" => Ok(Entry::PNorm {
                p: positive(spec, "p", parse_param(spec, rest, "p")?)?,
            }),
            "log_eps" => Ok(Entry::LogEps {
                eps: positive(spec, "eps", parse_param(spec, rest, "eps")?)?,
            }),
            "gauss_quad" => Ok(Entry::GaussQuad {
                c: positive(spec, "c", parse_param(spec, rest, "c")?)?,
            }),
            "quad" => {
                let sigma = parse_param(spec, rest, "sigma")?;
                Ok(Entry::Quad { sigma })
            }
            "hull_l0" => Ok(Entry::HullL0 {
                mu: positive(spec, "lambda", parse_param(spec, rest, "lambda")?)?,
            }),
            "indicator" => {
                let rest = rest.ok_or_else(|| spec_err(spec, "missing `points=`"))?;
                let list = rest
                    .trim()
                    .strip_prefix("points=")
                    .ok_or_else(|| spec_err(spec, "expected `points=<p1,p2,...>`"))?;
                let mut points = Vec::new();
                for tok in list.split(',').filter(|t| !t.trim().is_empty()) {
                    let p: f64 = tok
                        .trim()
                        .parse()
                        .map_err(|_| spec_err(spec, format!("`{tok}` is not a number")))?;
                    if !p.is_finite() {
                        return Err(spec_err(spec, "points must be finite"));
                    }
                    points.push(p);
                }
                Entry::indicator(points).map_err(|_| spec_err(spec, "need at least one point"))
            }
            _ => Err(spec_err(
                spec,
                format!(
                    "unknown function; known: {}",
                    crate::function::CATALOG_LISTING
                ),
            )),
        }
    }

    pub fn indicator(mut points: Vec<f64>) -> Result<Entry> {
        if points.is_empty() {
            return Err(Error::Parameter(
                "indicator of the empty set is not proper".into(),
            ));
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        Ok(Entry::Indicator { points })
    }

    pub fn spec(&self) -> String {
        match self {
            Entry::L0 => "l0".into(),
            Entry::ScaledL0 { gamma } => format!("scaled_l0:gamma={gamma}"),
            Entry::Indicator { points } => {
                let s: Vec<String> = points.iter().map(|p| p.to_string()).collect();
                format!("indicator:points={}", s.join(","))
            }
            Entry::PNorm { p } => format!("pnorm:p={p}"),
            Entry::LogEps { eps } => format!("log_eps:eps={eps}"),
            Entry::GaussQuad { c } => format!("gauss_quad:c={c}"),
            Entry::Quad { sigma } => format!("quad:sigma={sigma}"),
            Entry::Abs => "abs".into(),
            Entry::NegAbs => "neg_abs".into(),
            Entry::Sin => "sin".into(),
            Entry::Zero => "zero".into(),
            Entry::HullL0 { mu } => format!("hull_l0:lambda={mu}"),
        }
    }

    pub fn eval(&self, t: f64) -> ExtReal {
        let v = match self {
            Entry::L0 => {
                if t == 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            Entry::ScaledL0 { gamma } => {
                if t == 0.0 {
                    0.0
                } else {
                    *gamma
                }
            }
            Entry::Indicator { points } => {
                if points.iter().any(|&p| p == t) {
                    0.0
                } else {
                    return ExtReal::PosInf;
                }
            }
            Entry::PNorm { p } => t.abs().powf(*p),
            Entry::LogEps { eps } => (t.abs() + eps).ln(),
            Entry::GaussQuad { c } => (-t * t).exp() - t * t / (2.0 * c),
            Entry::Quad { sigma } => 0.5 * sigma * t * t,
            Entry::Abs => t.abs(),
            Entry::NegAbs => -t.abs(),
            Entry::Sin => t.sin(),
            Entry::Zero => 0.0,
            Entry::HullL0 { mu } => {
                let r = (2.0 * mu).sqrt();
                if t.abs() <= r {
                    (2.0 / mu).sqrt() * t.abs() - t * t / (2.0 * mu)
                } else {
                    1.0
                }
            }
        };
        ExtReal::Finite(v)
    }

    pub fn derivative(&self, t: f64) -> Option<f64> {
        match self {
            Entry::L0 | Entry::ScaledL0 { .. } => (t != 0.0).then_some(0.0),
            Entry::Indicator { .. } => None,
            Entry::PNorm { p } => {
                if t != 0.0 {
                    Some(p * t.abs().powf(p - 1.0) * sgn(t))
                } else if *p > 1.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
            Entry::LogEps { eps } => (t != 0.0).then(|| sgn(t) / (t.abs() + eps)),
            Entry::GaussQuad { c } => Some(-2.0 * t * (-t * t).exp() - t / c),
            Entry::Quad { sigma } => Some(sigma * t),
            Entry::Abs => (t != 0.0).then(|| sgn(t)),
            Entry::NegAbs => (t != 0.0).then(|| -sgn(t)),
            Entry::Sin => Some(t.cos()),
            Entry::Zero => Some(0.0),
            Entry::HullL0 { mu } => {
                if t == 0.0 {
                    None
                } else if t.abs() < (2.0 * mu).sqrt() {
                    Some((2.0 / mu).sqrt() * sgn(t) - t / mu)
                } else {
                    Some(0.0)
                }
            }
        }
    }

    pub fn special_points(&self) -> Vec<f64> {
        match self {
            Entry::Indicator { points } => points.clone(),
            Entry::HullL0 { mu } => {
                let r = (2.0 * mu).sqrt();
                vec![-r, 0.0, r]
            }
            Entry::L0 | Entry::ScaledL0 { .. } | Entry::PNorm { .. } | Entry::LogEps { .. } => {
                vec![0.0]
            }
            Entry::Abs | Entry::NegAbs => vec![0.0],
            _ => vec![],
        }
    }

    /// Prox-boundedness threshold.
    pub fn threshold(&self) -> ExtReal {
        match self {
            Entry::GaussQuad { c } => ExtReal::Finite(*c),
            Entry::Quad { sigma } if *sigma < 0.0 => ExtReal::Finite(-1.0 / sigma),
            _ => ExtReal::PosInf,
        }
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        if ExtReal::Finite(lambda) >= self.threshold() {
            return Err(Error::ProxBound(format!(
                "lambda = {lambda} is not below the threshold {} of {}",
                self.threshold(),
                self.spec()
            )));
        }
        Ok(())
    }

    fn objective(&self, lambda: f64, x: f64, y: f64) -> f64 {
        self.eval(y).to_f64() + (y - x) * (y - x) / (2.0 * lambda)
    }

    // Keeps the candidates whose objective ties with the best one.
    fn pick(&self, lambda: f64, x: f64, cands: &[f64]) -> SetValue {
        let vals: Vec<f64> = cands
            .iter()
            .map(|&y| self.objective(lambda, x, y))
            .collect();
        let best = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let keep: Vec<f64> = cands
            .iter()
            .zip(&vals)
            .filter(|(_, &v)| near(v, best, TIE_TOL))
            .map(|(&y, _)| y)
            .collect();
        SetValue::finite(keep, 0.0)
    }

    /// Closed-form (or semi-analytic) proximal set at `x`.
    pub fn prox(&self, lambda: f64, x: f64) -> Result<Option<SetValue>> {
        self.check_lambda(lambda)?;
        let s = sgn(x);
        let a = x.abs();
        let out = match self {
            Entry::L0 => prox_scaled_l0(1.0, lambda, x)?,
            Entry::ScaledL0 { gamma } => prox_scaled_l0(*gamma, lambda, x)?,
            Entry::Indicator { points } => {
                let d: Vec<f64> = points.iter().map(|p| (p - x).abs()).collect();
                let best = d.iter().cloned().fold(f64::INFINITY, f64::min);
                let keep = points
                    .iter()
                    .zip(&d)
                    .filter(|(_, &di)| near(di, best, TIE_TOL))
                    .map(|(&p, _)| p)
                    .collect();
                SetValue::finite(keep, 0.0)
            }
            Entry::Abs => SetValue::point(s * (a - lambda).max(0.0)),
            Entry::PNorm { p } if *p == 1.0 => SetValue::point(s * (a - lambda).max(0.0)),
            Entry::PNorm { p } => {
                if a == 0.0 {
                    return Ok(Some(SetValue::point(0.0)));
                }
                let p = *p;
                let dpsi = |y: f64| p * y.powf(p - 1.0) + (y - a) / lambda;
                if p > 1.0 {
                    SetValue::point(s * bisect(dpsi, 0.0, a))
                } else {
                    let yc = (lambda * p * (1.0 - p)).powf(1.0 / (2.0 - p));
                    if yc >= a || dpsi(yc) >= 0.0 {
                        SetValue::point(0.0)
                    } else {
                        let y = bisect(dpsi, yc, a);
                        self.pick(lambda, x, &[0.0, s * y])
                    }
                }
            }
            Entry::LogEps { eps } => {
                let disc = (a + eps) * (a + eps) - 4.0 * lambda;
                let mut cands = vec![0.0];
                if disc >= 0.0 {
                    let y = 0.5 * ((a - eps) + disc.sqrt());
                    if y > 0.0 {
                        cands.push(s * y);
                    }
                }
                self.pick(lambda, x, &cands)
            }
            Entry::GaussQuad { c } => {
                if lambda > c / (1.0 + 2.0 * c) {
                    return Ok(None);
                }
                // Strictly convex prox objective: its derivative is increasing.
                let dpsi = |y: f64| -2.0 * y * (-y * y).exp() - y / c + (y - x) / lambda;
                let b = (a / lambda + 1.0) / (1.0 / lambda - 1.0 / c) + 1.0;
                SetValue::point(bisect(dpsi, -b, b))
            }
            Entry::Quad { sigma } => prox_quad(*sigma, lambda, x)?,
            Entry::NegAbs => {
                if x == 0.0 {
                    SetValue::finite(vec![-lambda, lambda], 0.0)
                } else {
                    SetValue::point(x + lambda * s)
                }
            }
            Entry::Sin => return Ok(None),
            Entry::Zero => SetValue::point(x),
            Entry::HullL0 { mu } => {
                let mu = *mu;
                let r = (2.0 * mu).sqrt();
                let slope = (2.0 / mu).sqrt();
                if lambda > mu * (1.0 + 1e-12) {
                    return Ok(None);
                }
                if lambda >= mu * (1.0 - 1e-12) {
                    // Flat stretch of the prox objective on [0, r] when |x| = r.
                    if near(a, r, TIE_TOL) {
                        SetValue::interval(0.0, s * r)
                    } else if a < r {
                        SetValue::point(0.0)
                    } else {
                        SetValue::point(x)
                    }
                } else if a <= lambda * slope {
                    SetValue::point(0.0)
                } else if a <= r {
                    SetValue::point(s * (a - lambda * slope) / (1.0 - lambda / mu))
                } else {
                    SetValue::point(x)
                }
            }
        };
        Ok(Some(out))
    }

    /// Closed-form Moreau envelope at `x`.
    pub fn envelope(&self, lambda: f64, x: f64) -> Result<Option<f64>> {
        self.check_lambda(lambda)?;
        Ok(match self {
            Entry::L0 => Some(envelope_scaled_l0(1.0, lambda, x)),
            Entry::ScaledL0 { gamma } => Some(envelope_scaled_l0(*gamma, lambda, x)),
            Entry::Indicator { points } => {
                let d = points
                    .iter()
                    .map(|p| (p - x).abs())
                    .fold(f64::INFINITY, f64::min);
                Some(d * d / (2.0 * lambda))
            }
            Entry::Abs => Some(if x.abs() <= lambda {
                x * x / (2.0 * lambda)
            } else {
                x.abs() - 0.5 * lambda
            }),
            Entry::Quad { sigma } => Some(sigma * x * x / (2.0 * (1.0 + lambda * sigma))),
            Entry::NegAbs => Some(-x.abs() - 0.5 * lambda),
            Entry::Zero => Some(0.0),
            _ => self
                .prox(lambda, x)?
                .map(|p| self.objective(lambda, x, p.lo())),
        })
    }

    /// Closed-form level proximal subdifferential at `x`.
    pub fn level_subdiff(&self, lambda: f64, x: f64) -> Result<Option<SetValue>> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        // At or beyond the threshold the subdifferential is empty everywhere.
        if ExtReal::Finite(lambda) >= self.threshold() {
            return Ok(Some(SetValue::Empty));
        }
        let s = sgn(x);
        Ok(match self {
            Entry::L0 => Some(level_subdiff_scaled_l0(1.0, lambda, x)),
            Entry::ScaledL0 { gamma } => Some(level_subdiff_scaled_l0(*gamma, lambda, x)),
            Entry::Indicator { points } => {
                let Some(i) = points.iter().position(|&p| p == x) else {
                    return Ok(Some(SetValue::Empty));
                };
                let lo = if i > 0 {
                    (points[i - 1] - x) / (2.0 * lambda)
                } else {
                    f64::NEG_INFINITY
                };
                let hi = points
                    .get(i + 1)
                    .map_or(f64::INFINITY, |p| (p - x) / (2.0 * lambda));
                Some(SetValue::from_bounds(lo, hi))
            }
            Entry::Abs => Some(if x == 0.0 {
                SetValue::interval(-1.0, 1.0)
            } else {
                SetValue::point(s)
            }),
            Entry::PNorm { p } if *p >= 1.0 => Some(if x != 0.0 {
                SetValue::point(p * x.abs().powf(p - 1.0) * s)
            } else if *p == 1.0 {
                SetValue::interval(-1.0, 1.0)
            } else {
                SetValue::point(0.0)
            }),
            Entry::Quad { sigma } => Some(SetValue::point(sigma * x)),
            Entry::NegAbs => Some(if x.abs() >= lambda {
                SetValue::point(-s)
            } else {
                SetValue::Empty
            }),
            Entry::Zero => Some(SetValue::point(0.0)),
            Entry::Sin if lambda <= 1.0 => Some(SetValue::point(x.cos())),
            Entry::GaussQuad { c } if lambda <= c / (1.0 + 2.0 * c) => {
                Some(SetValue::point(self.derivative(x).unwrap()))
            }
            Entry::HullL0 { mu } if lambda <= *mu => {
                let r = (2.0 * mu).sqrt();
                let slope = (2.0 / mu).sqrt();
                Some(if x == 0.0 {
                    SetValue::interval(-slope, slope)
                } else if x.abs() <= r {
                    SetValue::point(slope * s - x / mu)
                } else {
                    SetValue::point(0.0)
                })
            }
            _ => None,
        })
    }

    /// Closed-form proximal hull at `x`.
    pub fn hull(&self, lambda: f64, x: f64) -> Result<Option<ExtReal>> {
        self.check_lambda(lambda)?;
        Ok(match self {
            Entry::L0 => Some(ExtReal::Finite(hull_scaled_l0(1.0, lambda, x))),
            Entry::ScaledL0 { gamma } => Some(ExtReal::Finite(hull_scaled_l0(*gamma, lambda, x))),
            Entry::Indicator { points } => {
                let (first, last) = (points[0], points[points.len() - 1]);
                if x < first || x > last {
                    Some(ExtReal::PosInf)
                } else {
                    let i = points.partition_point(|&p| p <= x);
                    if i == points.len() || points[i - 1] == x {
                        Some(ExtReal::Finite(0.0))
                    } else {
                        let (a, b) = (points[i - 1], points[i]);
                        Some(ExtReal::Finite((x - a) * (b - x) / (2.0 * lambda)))
                    }
                }
            }
            Entry::NegAbs => Some(ExtReal::Finite(if x.abs() <= lambda {
                -0.5 * lambda - x * x / (2.0 * lambda)
            } else {
                -x.abs()
            })),
            // Functions with f + j/lambda convex are their own hull.
            Entry::Abs | Entry::Quad { .. } | Entry::Zero => Some(self.eval(x)),
            Entry::PNorm { p } if *p >= 1.0 => Some(self.eval(x)),
            Entry::Sin if lambda <= 1.0 => Some(self.eval(x)),
            Entry::GaussQuad { c } if lambda <= c / (1.0 + 2.0 * c) => Some(self.eval(x)),
            Entry::HullL0 { mu } if lambda <= *mu => Some(self.eval(x)),
            _ => None,
        })
    }
}

fn check_pos(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Hard thresholding: prox of `gamma |.|_0` with step `lambda`.
pub fn prox_scaled_l0(gamma: f64, lambda: f64, u: f64) -> Result<SetValue> {
    check_pos("gamma", gamma)?;
    check_pos("lambda", lambda)?;
    let thr = (2.0 * gamma * lambda).sqrt();
    Ok(if near(u.abs(), thr, TIE_TOL) {
        SetValue::finite(vec![0.0, u], 0.0)
    } else if u.abs() < thr {
        SetValue::point(0.0)
    } else {
        SetValue::point(u)
    })
}

fn envelope_scaled_l0(gamma: f64, lambda: f64, x: f64) -> f64 {
    gamma.min(x * x / (2.0 * lambda))
}

fn level_subdiff_scaled_l0(gamma: f64, lambda: f64, x: f64) -> SetValue {
    let thr = (2.0 * gamma * lambda).sqrt();
    if x == 0.0 {
        let w = (2.0 * gamma / lambda).sqrt();
        SetValue::interval(-w, w)
    } else if x.abs() >= thr || near(x.abs(), thr, TIE_TOL) {
        SetValue::point(0.0)
    } else {
        SetValue::Empty
    }
}

fn hull_scaled_l0(gamma: f64, lambda: f64, x: f64) -> f64 {
    let thr = (2.0 * gamma * lambda).sqrt();
    if x.abs() <= thr {
        (2.0 * gamma / lambda).sqrt() * x.abs() - x * x / (2.0 * lambda)
    } else {
        gamma
    }
}

/// Level proximal subdifferential of the counting norm.
pub fn level_subdiff_l0(lambda: f64, x: f64) -> Result<SetValue> {
    check_pos("lambda", lambda)?;
    Ok(level_subdiff_scaled_l0(1.0, lambda, x))
}

/// Moreau envelope of the counting norm: `min(1, x^2 / (2 lambda))`.
pub fn envelope_l0(lambda: f64, x: f64) -> Result<f64> {
    check_pos("lambda", lambda)?;
    Ok(envelope_scaled_l0(1.0, lambda, x))
}

/// Proximal hull of the counting norm.
pub fn hull_l0(lambda: f64, x: f64) -> Result<f64> {
    check_pos("lambda", lambda)?;
    Ok(hull_scaled_l0(1.0, lambda, x))
}

/// Prox of the indicator of `{-1, 1}`.
pub fn prox_indicator_pair(lambda: f64, x: f64) -> Result<SetValue> {
    Entry::Indicator {
        points: vec![-1.0, 1.0],
    }
    .prox(lambda, x)
    .map(Option::unwrap)
}

/// Level proximal subdifferential of the indicator of `{-1, 1}`.
pub fn level_subdiff_indicator_pair(lambda: f64, x: f64) -> Result<SetValue> {
    Entry::Indicator {
        points: vec![-1.0, 1.0],
    }
    .level_subdiff(lambda, x)
    .map(Option::unwrap)
}

/// Prox of `sigma t^2 / 2`.
pub fn prox_quad(sigma: f64, lambda: f64, x: f64) -> Result<SetValue> {
    check_pos("lambda", lambda)?;
    if 1.0 + lambda * sigma <= 0.0 {
        return Err(Error::ProxBound(format!(
            "lambda = {lambda} too large for sigma = {sigma}"
        )));
    }
    Ok(SetValue::point(x / (1.0 + lambda * sigma)))
}

/// Prox-boundedness threshold of a catalog entry.
pub fn catalog_threshold(entry: &Entry) -> ExtReal {
    entry.threshold()
}
