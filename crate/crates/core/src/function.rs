//! Scalar and separable extended-real functions, and the spec mini-language.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Deserialize;

use crate::catalog::Entry;
use crate::error::{Error, Result};
use crate::types::ExtReal;

/// Step for central-difference derivatives when no closed form exists.
pub const FD_STEP: f64 = 1e-6;

/// Names accepted by [`ScalarFn::from_str`], for error messages and `--help`.
pub const CATALOG_LISTING: &str = "l0, scaled_l0:gamma=<g>, indicator:points=<p1,p2,...>, \
pnorm:p=<p>, log_eps:eps=<e>, gauss_quad:c=<c>, quad:sigma=<s>, abs, neg_abs, sin, zero, \
hull_l0:lambda=<mu>, piecewise:<json>";

type Callback = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied evaluator with the interval where it is finite.
#[derive(Clone)]
pub struct BlackBox {
    pub name: String,
    pub eval: Callback,
    pub derivative: Option<Callback>,
    pub domain_hint: (f64, f64),
}

/// Piecewise polynomial with `+inf` pieces allowed. Piece `i` covers the
/// open interval between breaks `i-1` and `i`; at a break the smaller of the
/// two neighbouring pieces is taken, which keeps the function lsc.
#[derive(Clone, Debug, PartialEq)]
pub struct Piecewise {
    pub breaks: Vec<f64>,
    /// Polynomial coefficients in increasing degree, or `None` for `+inf`.
    pub pieces: Vec<Option<Vec<f64>>>,
    source: String,
}

#[derive(Deserialize)]
struct PiecewiseJson {
    breaks: Vec<f64>,
    pieces: Vec<PieceJson>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PieceJson {
    Poly(Vec<f64>),
    Inf(String),
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

fn horner_deriv(c: &[f64], t: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &a)| acc * t + k as f64 * a)
}

impl Piecewise {
    pub fn parse(json: &str) -> Result<Self> {
        let bad = |reason: String| Error::Spec {
            spec: format!("piecewise:{json}"),
            reason,
        };
        let raw: PiecewiseJson = serde_json::from_str(json).map_err(|e| bad(e.to_string()))?;
        if raw.pieces.len() != raw.breaks.len() + 1 {
            return Err(bad("need exactly one more piece than breaks".into()));
        }
        if raw.breaks.windows(2).any(|w| w[0] >= w[1]) || raw.breaks.iter().any(|b| !b.is_finite())
        {
            return Err(bad("breaks must be finite and strictly increasing".into()));
        }
        let mut pieces = Vec::with_capacity(raw.pieces.len());
        for p in raw.pieces {
            pieces.push(match p {
                PieceJson::Poly(c) if !c.is_empty() && c.iter().all(|v| v.is_finite()) => Some(c),
                PieceJson::Inf(s) if s == "inf" => None,
                _ => return Err(bad("pieces are coefficient arrays or \"inf\"".into())),
            });
        }
        if pieces.iter().all(|p| p.is_none()) {
            return Err(bad("function is +inf everywhere".into()));
        }
        Ok(Piecewise {
            breaks: raw.breaks,
            pieces,
            source: json.to_string(),
        })
    }

    fn piece_value(&self, i: usize, t: f64) -> f64 {
        match &self.pieces[i] {
            Some(c) => horner(c, t),
            None => f64::INFINITY,
        }
    }

    pub fn eval(&self, t: f64) -> ExtReal {
        let i = self.breaks.partition_point(|&b| b < t);
        let v = if i < self.breaks.len() && self.breaks[i] == t {
            self.piece_value(i, t).min(self.piece_value(i + 1, t))
        } else {
            self.piece_value(i, t)
        };
        ExtReal::from(v)
    }

    pub fn derivative(&self, t: f64) -> Option<f64> {
        if self.breaks.contains(&t) {
            return None;
        }
        let i = self.breaks.partition_point(|&b| b < t);
        self.pieces[i].as_ref().map(|c| horner_deriv(c, t))
    }

    /// Smallest interval outside of which every piece is `+inf`, if bounded.
    fn finite_span(&self) -> (f64, f64) {
        let first = self.pieces.iter().position(|p| p.is_some()).unwrap();
        let last = self.pieces.iter().rposition(|p| p.is_some()).unwrap();
        let lo = if first == 0 {
            f64::NEG_INFINITY
        } else {
            self.breaks[first - 1]
        };
        let hi = if last == self.pieces.len() - 1 {
            f64::INFINITY
        } else {
            self.breaks[last]
        };
        (lo, hi)
    }
}

/// Extended-real function of one real variable.
#[derive(Clone)]
pub enum ScalarFn {
    Catalog(Entry),
    Piecewise(Piecewise),
    BlackBox(BlackBox),
    /// `x -> -f(x)`; evaluation fails wherever `f` is `+inf`.
    Negated(Box<ScalarFn>),
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.spec())
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec())
    }
}

impl ScalarFn {
    /// Wraps a callback. The function must be finite somewhere on
    /// `domain_hint`, which is checked on a coarse sample.
    pub fn black_box<F>(name: &str, domain_hint: (f64, f64), f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let (a, b) = domain_hint;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Parameter(format!(
                "domain hint [{a}, {b}] must be a finite interval"
            )));
        }
        let mut finite_somewhere = false;
        for i in 0..=256 {
            let t = a + (b - a) * i as f64 / 256.0;
            let v = ExtReal::new(f(t))?;
            finite_somewhere |= v.is_finite();
        }
        if !finite_somewhere {
            return Err(Error::InvalidFunction(format!(
                "{name} is +inf on its domain hint"
            )));
        }
        Ok(ScalarFn::BlackBox(BlackBox {
            name: name.to_string(),
            eval: Arc::new(f),
            derivative: None,
            domain_hint,
        }))
    }

    /// Attaches a closed-form derivative to a black-box function.
    pub fn with_derivative<F>(self, df: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        match self {
            ScalarFn::BlackBox(mut bb) => {
                bb.derivative = Some(Arc::new(df));
                ScalarFn::BlackBox(bb)
            }
            other => other,
        }
    }

    pub fn negated(&self) -> Self {
        match self {
            ScalarFn::Negated(inner) => (**inner).clone(),
            other => ScalarFn::Negated(Box::new(other.clone())),
        }
    }

    pub fn eval(&self, t: f64) -> Result<ExtReal> {
        match self {
            ScalarFn::Catalog(e) => Ok(e.eval(t)),
            ScalarFn::Piecewise(p) => Ok(p.eval(t)),
            ScalarFn::BlackBox(bb) => ExtReal::new((bb.eval)(t))
                .map_err(|e| Error::InvalidFunction(format!("{} at {t}: {e}", bb.name))),
            ScalarFn::Negated(inner) => match inner.eval(t)? {
                ExtReal::Finite(v) => Ok(ExtReal::Finite(-v)),
                ExtReal::PosInf => {
                    Err(Error::InvalidFunction(format!("-({inner}) is -inf at {t}")))
                }
            },
        }
    }

    /// Finite value or `+inf` as a raw float.
    pub fn value(&self, t: f64) -> Result<f64> {
        self.eval(t).map(ExtReal::to_f64)
    }

    /// Closed-form derivative where one is known.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        match self {
            ScalarFn::Catalog(e) => e.derivative(t),
            ScalarFn::Piecewise(p) => p.derivative(t),
            ScalarFn::BlackBox(bb) => bb.derivative.as_ref().map(|d| d(t)),
            ScalarFn::Negated(inner) => inner.derivative(t).map(|d| -d),
        }
    }

    /// Closed-form derivative, else a central difference with step [`FD_STEP`].
    pub fn gradient(&self, t: f64) -> Result<f64> {
        if let Some(d) = self.derivative(t) {
            return Ok(d);
        }
        let h = FD_STEP * t.abs().max(1.0);
        let (a, b) = (self.value(t + h)?, self.value(t - h)?);
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidFunction(format!(
                "{self} is not differentiable at {t}"
            )));
        }
        Ok((a - b) / (2.0 * h))
    }

    /// Atoms, breakpoints and kinks: points a grid would otherwise miss.
    pub fn special_points(&self) -> Vec<f64> {
        match self {
            ScalarFn::Catalog(e) => e.special_points(),
            ScalarFn::Piecewise(p) => p.breaks.clone(),
            ScalarFn::BlackBox(_) => vec![],
            ScalarFn::Negated(inner) => inner.special_points(),
        }
    }

    /// Interval outside of which the function is known to be `+inf`.
    pub fn domain_hint(&self) -> Option<(f64, f64)> {
        match self {
            ScalarFn::Catalog(Entry::Indicator { points }) => {
                Some((points[0], points[points.len() - 1]))
            }
            ScalarFn::Catalog(_) => None,
            ScalarFn::Piecewise(p) => {
                let (a, b) = p.finite_span();
                (a.is_finite() && b.is_finite()).then_some((a, b))
            }
            ScalarFn::BlackBox(bb) => Some(bb.domain_hint),
            ScalarFn::Negated(inner) => inner.domain_hint(),
        }
    }

    pub fn entry(&self) -> Option<&Entry> {
        match self {
            ScalarFn::Catalog(e) => Some(e),
            _ => None,
        }
    }

    /// Prox-boundedness threshold when it is known in closed form.
    pub fn known_threshold(&self) -> Option<ExtReal> {
        self.entry().map(Entry::threshold)
    }

    pub fn spec(&self) -> String {
        match self {
            ScalarFn::Catalog(e) => e.spec(),
            ScalarFn::Piecewise(p) => format!("piecewise:{}", p.source),
            ScalarFn::BlackBox(bb) => bb.name.clone(),
            ScalarFn::Negated(inner) => format!("-({})", inner.spec()),
        }
    }
}

impl FromStr for ScalarFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(json) = s.strip_prefix("piecewise:") {
            return Piecewise::parse(json).map(ScalarFn::Piecewise);
        }
        Entry::parse(s).map(ScalarFn::Catalog)
    }
}

impl From<Entry> for ScalarFn {
    fn from(e: Entry) -> Self {
        ScalarFn::Catalog(e)
    }
}

/// `f(x) = f_1(x_1) + ... + f_m(x_m)`.
#[derive(Clone, Debug)]
pub struct SeparableFunction {
    pub components: Vec<ScalarFn>,
}

impl SeparableFunction {
    pub fn new(components: Vec<ScalarFn>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Parameter(
                "separable function needs at least one component".into(),
            ));
        }
        Ok(SeparableFunction { components })
    }

    /// The same scalar function in every coordinate.
    pub fn repeat(f: ScalarFn, dim: usize) -> Result<Self> {
        SeparableFunction::new(vec![f; dim])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, x: &[f64]) -> Result<ExtReal> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut total = ExtReal::Finite(0.0);
        for (f, &xi) in self.components.iter().zip(x) {
            total = total + f.eval(xi)?;
        }
        Ok(total)
    }

    /// Smallest known component threshold (`+inf` when none is known).
    pub fn known_threshold(&self) -> ExtReal {
        self.components
            .iter()
            .filter_map(ScalarFn::known_threshold)
            .fold(ExtReal::PosInf, |a, b| if b < a { b } else { a })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for s in [
            "l0",
            "scaled_l0:gamma=0.5",
            "indicator:points=-1,1",
            "quad:sigma=2",
            "sin",
        ] {
            let f: ScalarFn = s.parse().unwrap();
            let g: ScalarFn = f.spec().parse().unwrap();
            for t in [-2.0, -1.0, 0.0, 0.3, 1.0] {
                assert_eq!(f.eval(t).unwrap(), g.eval(t).unwrap());
            }
        }
    }

    #[test]
    fn unknown_spec_is_rejected() {
        assert!("l1".parse::<ScalarFn>().is_err());
        assert!("quad:sigma=x".parse::<ScalarFn>().is_err());
        assert!("indicator:points=".parse::<ScalarFn>().is_err());
    }

    #[test]
    fn piecewise_takes_lower_value_at_breaks() {
        let f: ScalarFn = r#"piecewise:{"breaks":[0,1],"pieces":["inf",[1],[0,0,1]]}"#
            .parse()
            .unwrap();
        assert_eq!(f.eval(-1.0).unwrap(), ExtReal::PosInf);
        assert_eq!(f.eval(0.0).unwrap(), ExtReal::Finite(1.0));
        assert_eq!(f.eval(1.0).unwrap(), ExtReal::Finite(1.0));
        assert_eq!(f.eval(2.0).unwrap(), ExtReal::Finite(4.0));
        assert_eq!(f.derivative(2.0), Some(4.0));
        assert_eq!(f.domain_hint(), None);
    }

    #[test]
    fn black_box_rejects_nan() {
        let f = ScalarFn::black_box("bad", (-1.0, 1.0), |t| if t > 0.5 { f64::NAN } else { t });
        assert!(f.is_err());
        let g = ScalarFn::black_box("ok", (-1.0, 1.0), |t| t * t).unwrap();
        assert_eq!(g.eval(0.5).unwrap(), ExtReal::Finite(0.25));
        assert!((g.gradient(0.5).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn negation_of_infinite_value_fails() {
        let f: ScalarFn = "indicator:points=0".parse().unwrap();
        assert!(f.negated().eval(1.0).is_err());
        assert_eq!(f.negated().eval(0.0).unwrap(), ExtReal::Finite(-0.0));
    }

    #[test]
    fn separable_sum_propagates_infinity() {
        let f = SeparableFunction::new(vec![
            "l0".parse().unwrap(),
            "indicator:points=1".parse().unwrap(),
        ])
        .unwrap();
        assert_eq!(f.eval(&[2.0, 1.0]).unwrap(), ExtReal::Finite(1.0));
        assert_eq!(f.eval(&[2.0, 0.0]).unwrap(), ExtReal::PosInf);
        assert!(f.eval(&[1.0]).is_err());
    }
}
