//! Brute-force oracles: Moreau envelope, proximal sets, proximal hull and
//! prox-boundedness threshold estimation.
//!
//! All oracles minimise `f(y) + (y - x)^2 / (2 lambda)` over a search grid
//! plus the function's special points, polish each discrete local minimum by
//! golden-section search, and double the window (twice at most) to detect
//! minimisers that escape it.

use log::debug;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::{ScalarFn, SeparableFunction};
use crate::numeric::{bisect, golden_min};
use crate::types::{ExtReal, Grid, SetValue};

/// Tuning knobs shared by the grid oracles.
#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    pub growth_rounds: u32,
    pub growth_factor: f64,
    /// Relative change in the minimum that counts as growth.
    pub growth_tol: f64,
    pub polish_iters: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            growth_rounds: 2,
            growth_factor: 2.0,
            growth_tol: 1e-9,
            polish_iters: 80,
        }
    }
}

/// Plateau tolerance `10 h^2 / (2 lambda)` for a search grid of spacing `h`.
pub fn default_plateau_tol(search: &Grid, lambda: f64) -> f64 {
    let h = search.spacing();
    10.0 * h * h / (2.0 * lambda)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "lambda must be positive and finite, got {lambda}"
        )))
    }
}

#[derive(Clone, Copy, Debug)]
struct Sample {
    y: f64,
    v: f64,
    exact: bool,
}

/// Minimum value and the minimiser set of one prox subproblem.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProxEval {
    pub value: f64,
    pub set: SetValue,
}

struct Problem<'a> {
    f: &'a ScalarFn,
    lambda: f64,
    x: f64,
}

impl Problem<'_> {
    fn phi(&self, y: f64) -> Result<f64> {
        let d = y - self.x;
        Ok(self.f.value(y)? + d * d / (2.0 * self.lambda))
    }

    fn sample(&self, y: f64, exact: bool) -> Result<Sample> {
        Ok(Sample {
            y,
            v: self.phi(y)?,
            exact,
        })
    }
}

fn min_value(s: &[Sample]) -> f64 {
    s.iter().map(|s| s.v).fold(f64::INFINITY, f64::min)
}

// Evaluates the grid and special points, growing the window while the
// minimum keeps dropping. Returns samples sorted by abscissa and the spacing.
fn scan(p: &Problem, search: &Grid, opts: &OracleOptions) -> Result<Vec<Sample>> {
    let mut samples = Vec::with_capacity(search.len() * 2);
    for y in search.points() {
        samples.push(p.sample(y, false)?);
    }
    for y in p.f.special_points() {
        samples.push(p.sample(y, true)?);
    }
    let mut best = min_value(&samples);
    let mut window = *search;
    for round in 1..=opts.growth_rounds {
        let wider = search.widened(opts.growth_factor.powi(round as i32));
        let h = wider.spacing();
        let mut flank_min = f64::INFINITY;
        for y in wider.points() {
            if y < window.lo - 0.25 * h || y > window.hi + 0.25 * h {
                let s = p.sample(y, false)?;
                flank_min = flank_min.min(s.v);
                samples.push(s);
            }
        }
        window = wider;
        let tol = opts.growth_tol * best.abs().max(1.0);
        if flank_min < best - tol {
            debug!(
                "prox window grown to [{}, {}] at x = {}",
                wider.lo, wider.hi, p.x
            );
            best = flank_min;
            if round == opts.growth_rounds {
                return Err(Error::ProxBound(format!(
                    "minimum of the prox objective at x = {} keeps decreasing on [{}, {}]",
                    p.x, wider.lo, wider.hi
                )));
            }
        } else {
            break;
        }
    }
    if !best.is_finite() {
        return Err(Error::DomainEmpty(format!(
            "{} is +inf on the whole search window around x = {}",
            p.f, p.x
        )));
    }
    samples.sort_by(|a, b| a.y.total_cmp(&b.y));
    Ok(samples)
}

/// Envelope value and proximal set at `x`.
pub fn prox_eval(
    f: &ScalarFn,
    lambda: f64,
    x: f64,
    search: &Grid,
    plateau_tol: f64,
    opts: &OracleOptions,
) -> Result<ProxEval> {
    check_lambda(lambda)?;
    let p = Problem { f, lambda, x };
    let h = search.spacing();
    let mut samples = scan(&p, search, opts)?;
    let m0 = min_value(&samples);

    // Polish discrete local minima that could compete for the global one.
    let mut polished = Vec::new();
    for i in 0..samples.len() {
        let s = samples[i];
        if s.exact || s.v > m0 + plateau_tol {
            continue;
        }
        let left = if i > 0 { Some(samples[i - 1]) } else { None };
        let right = samples.get(i + 1).copied();
        let lower_than = |n: Option<Sample>| n.map_or(true, |n| s.v <= n.v);
        let strict = |n: Option<Sample>| n.map_or(false, |n| s.v < n.v);
        if !(lower_than(left) && lower_than(right)) || !(strict(left) || strict(right)) {
            continue;
        }
        let a = left.map_or(s.y - h, |n| n.y);
        let b = right.map_or(s.y + h, |n| n.y);
        let (y, v) = golden_min(|t| p.phi(t), a, b, opts.polish_iters)?;
        if v < s.v {
            polished.push(Sample { y, v, exact: true });
        }
    }
    samples.extend(polished);
    samples.sort_by(|a, b| a.y.total_cmp(&b.y));
    let m = min_value(&samples);
    let flat_tol = plateau_tol * 1e-3;

    let near: Vec<Sample> = samples
        .iter()
        .copied()
        .filter(|s| s.v <= m + plateau_tol)
        .collect();
    let mut clusters: Vec<Vec<Sample>> = Vec::new();
    for s in near {
        match clusters.last_mut() {
            Some(c) if s.y - c.last().unwrap().y <= 1.5 * h => c.push(s),
            _ => clusters.push(vec![s]),
        }
    }

    let mut points = Vec::new();
    let mut interval = None;
    for c in &clusters {
        let flat: Vec<&Sample> = c.iter().filter(|s| s.v <= m + flat_tol).collect();
        let span = flat.last().map_or(0.0, |l| l.y) - flat.first().map_or(0.0, |f| f.y);
        let best = *c.iter().min_by(|a, b| a.v.total_cmp(&b.v)).unwrap();
        if flat.len() >= 2 && span >= 0.5 * h {
            // Walk out from the minimiser to where the objective leaves the
            // flat level up to rounding.
            let edge_tol = 1e-12 * best.v.abs().max(1.0);
            let inside = |t: f64| p.phi(t).map(|v| v <= best.v + edge_tol).unwrap_or(false);
            let edge = |to: f64| bisect(|t| if inside(t) { -1.0 } else { 1.0 }, best.y, to);
            let lo = edge(flat[0].y - h);
            let hi = edge(flat[flat.len() - 1].y + h);
            if hi - lo >= 0.5 * h {
                interval = Some((lo, hi));
                continue;
            }
        }
        points.push(best.y);
    }
    let set = match interval {
        Some((lo, hi)) if points.is_empty() && clusters.len() == 1 => SetValue::interval(lo, hi),
        Some(_) => return Err(Error::NonConvexPlateau(x)),
        None => SetValue::finite(points, 0.0),
    };
    Ok(ProxEval { value: m, set })
}

/// Moreau envelope `e_lambda f(x)` by grid minimisation.
pub fn envelope(f: &ScalarFn, lambda: f64, x: f64, search: &Grid) -> Result<f64> {
    let tol = default_plateau_tol(search, lambda);
    prox_eval(f, lambda, x, search, tol, &OracleOptions::default()).map(|e| e.value)
}

/// Proximal set `P_lambda f(x)`; near-minimisers within `plateau_tol` are kept.
pub fn prox_set(
    f: &ScalarFn,
    lambda: f64,
    x: f64,
    search: &Grid,
    plateau_tol: f64,
) -> Result<SetValue> {
    prox_eval(f, lambda, x, search, plateau_tol, &OracleOptions::default()).map(|e| e.set)
}

/// Envelope and prox sampled on a grid of evaluation points.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeSweep {
    pub lambda: f64,
    pub grid: Grid,
    /// `(x, e_lambda f(x), P_lambda f(x))` in grid order.
    pub values: Vec<(f64, f64, SetValue)>,
}

/// Evaluates the envelope and prox at every point of `xs` using one search grid.
pub fn envelope_sweep(
    f: &ScalarFn,
    lambda: f64,
    xs: &Grid,
    search: &Grid,
) -> Result<EnvelopeSweep> {
    let tol = default_plateau_tol(search, lambda);
    let opts = OracleOptions::default();
    let values = xs
        .points()
        .into_par_iter()
        .map(|x| prox_eval(f, lambda, x, search, tol, &opts).map(|e| (x, e.value, e.set)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnvelopeSweep {
        lambda,
        grid: *xs,
        values,
    })
}

/// Tabulated inner envelope for evaluating the proximal hull
/// `h_lambda f = -e_lambda(-e_lambda f)` at many points.
///
/// Writing `c(z) = e_lambda f(z) - z^2/(2 lambda)`, the hull is
/// `sup_z [c(z) + z x / lambda] - x^2 / (2 lambda)`. The sup is taken over
/// the tabulated nodes and then polished with fresh envelope evaluations.
pub struct HullTable {
    f: ScalarFn,
    lambda: f64,
    search: Grid,
    nodes: Vec<f64>,
    c: Vec<f64>,
}

impl HullTable {
    pub fn new(f: &ScalarFn, lambda: f64, search: &Grid) -> Result<Self> {
        check_lambda(lambda)?;
        let nodes = search.points();
        let c = nodes
            .par_iter()
            .map(|&z| envelope(f, lambda, z, search).map(|e| e - z * z / (2.0 * lambda)))
            .collect::<Result<Vec<_>>>()?;
        Ok(HullTable {
            f: f.clone(),
            lambda,
            search: *search,
            nodes,
            c,
        })
    }

    fn c_at(&self, z: f64) -> Result<f64> {
        Ok(envelope(&self.f, self.lambda, z, &self.search)? - z * z / (2.0 * self.lambda))
    }

    pub fn eval(&self, x: f64) -> Result<ExtReal> {
        let lam = self.lambda;
        let fx = self.f.eval(x)?;
        let score = |j: usize| self.c[j] + self.nodes[j] * x / lam;
        let j = (0..self.nodes.len())
            .max_by(|&a, &b| score(a).total_cmp(&score(b)))
            .unwrap();
        let at_edge = j == 0 || j == self.nodes.len() - 1;
        if at_edge && !fx.is_finite() {
            return Ok(ExtReal::PosInf);
        }
        if at_edge {
            debug!("hull sup at the table edge for x = {x}; widen the search grid");
        }
        let a = self.nodes[j.saturating_sub(1)];
        let b = self.nodes[(j + 1).min(self.nodes.len() - 1)];
        let (_, neg) = golden_min(|z| self.c_at(z).map(|c| -(c + z * x / lam)), a, b, 40)?;
        let best = (-neg).max(score(j));
        let h = best - x * x / (2.0 * lam);
        // The hull never exceeds f.
        Ok(ExtReal::Finite(match fx {
            ExtReal::Finite(v) => h.min(v),
            ExtReal::PosInf => h,
        }))
    }
}

/// Proximal hull at one point.
pub fn proximal_hull(f: &ScalarFn, lambda: f64, x: f64, search: &Grid) -> Result<ExtReal> {
    HullTable::new(f, lambda, search)?.eval(x)
}

/// Proximal hull at many points, sharing one inner-envelope table.
pub fn hull_sweep(f: &ScalarFn, lambda: f64, xs: &[f64], search: &Grid) -> Result<Vec<ExtReal>> {
    let table = HullTable::new(f, lambda, search)?;
    xs.par_iter().map(|&x| table.eval(x)).collect()
}

/// How a threshold bracket was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethod {
    QuadraticGrowth,
    DefinitionalSweep,
}

/// Bracket `[lower, upper]` for the prox-boundedness threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdEstimate {
    pub lower: f64,
    pub upper: ExtReal,
    pub method: ThresholdMethod,
}

/// Bisection steps between the last bounded and first unbounded lambda.
pub const THRESHOLD_BISECTIONS: usize = 20;

/// Decides whether `inf_y f(y) + y^2 / (2 lambda)` looks finite.
pub fn appears_prox_bounded(f: &ScalarFn, lambda: f64, search: &Grid) -> Result<bool> {
    let p = Problem { f, lambda, x: 0.0 };
    match scan(&p, search, &OracleOptions::default()) {
        Ok(s) => {
            let m = min_value(&s);
            let lo = s.first().unwrap().y;
            let hi = s.last().unwrap().y;
            let arg = s.iter().find(|t| t.v == m).unwrap().y;
            Ok(arg != lo && arg != hi)
        }
        Err(Error::ProxBound(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Brackets `lambda_f` by classifying each candidate in `lambdas` (ascending)
/// and bisecting between the last bounded and the first unbounded one.
pub fn estimate_threshold(
    f: &ScalarFn,
    lambdas: &[f64],
    search: &Grid,
) -> Result<ThresholdEstimate> {
    if lambdas.is_empty() || lambdas.windows(2).any(|w| w[0] >= w[1]) || lambdas[0] <= 0.0 {
        return Err(Error::Parameter(
            "lambdas must be positive and strictly ascending".into(),
        ));
    }
    let mut last_ok = None;
    let mut first_bad = None;
    for &l in lambdas {
        if appears_prox_bounded(f, l, search)? {
            last_ok = Some(l);
        } else {
            first_bad = Some(l);
            break;
        }
    }
    let method = ThresholdMethod::DefinitionalSweep;
    let (mut lo, mut hi) = match (last_ok, first_bad) {
        (_, None) => {
            return Ok(ThresholdEstimate {
                lower: *lambdas.last().unwrap(),
                upper: ExtReal::PosInf,
                method,
            })
        }
        (None, Some(b)) => (0.0, b),
        (Some(a), Some(b)) => (a, b),
    };
    for _ in 0..THRESHOLD_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if appears_prox_bounded(f, mid, search)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdEstimate {
        lower: lo,
        upper: ExtReal::Finite(hi),
        method,
    })
}

/// Threshold estimate from the quadratic growth rate `liminf f(y) / y^2`,
/// measured on shells `R/2 <= |y| <= R` of doubling radius. The bracket
/// spans the estimates of the two outermost shells.
pub fn estimate_threshold_growth(
    f: &ScalarFn,
    search: &Grid,
    shells: u32,
) -> Result<ThresholdEstimate> {
    let r0 = search.lo.abs().max(search.hi.abs());
    let h = search.spacing();
    let mut est = Vec::new();
    for k in 0..shells.max(2) {
        let r = r0 * 2f64.powi(k as i32);
        let n = (r / (2.0 * h)).ceil() as usize;
        let mut ratio = f64::INFINITY;
        for i in 0..=n {
            let t = 0.5 * r + 0.5 * r * i as f64 / n as f64;
            for y in [t, -t] {
                let v = f.value(y)?;
                ratio = ratio.min(v / (y * y));
            }
        }
        est.push(if ratio < 0.0 {
            -1.0 / (2.0 * ratio)
        } else {
            f64::INFINITY
        });
    }
    let a = est[est.len() - 2];
    let b = est[est.len() - 1];
    Ok(ThresholdEstimate {
        lower: a.min(b),
        upper: ExtReal::from(a.max(b)),
        method: ThresholdMethod::QuadraticGrowth,
    })
}

/// Coordinatewise prox of a separable sum, closed forms first.
pub fn separable_prox(
    f: &SeparableFunction,
    lambda: f64,
    x: &[f64],
    oracle: &crate::resolve::Oracle,
) -> Result<Vec<SetValue>> {
    if x.len() != f.dim() {
        return Err(Error::Dimension {
            expected: f.dim(),
            got: x.len(),
        });
    }
    f.components
        .iter()
        .zip(x)
        .map(|(fi, &xi)| oracle.prox(fi, lambda, xi))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const R2: f64 = std::f64::consts::SQRT_2;

    fn search() -> Grid {
        Grid::new(-8.0, 8.0, 4096).unwrap()
    }

    fn f(s: &str) -> ScalarFn {
        s.parse().unwrap()
    }

    #[test]
    fn envelope_examples() {
        assert!((envelope(&f("l0"), 1.0, 1.0, &search()).unwrap() - 0.5).abs() < 1e-12);
        assert!((envelope(&f("quad:sigma=1"), 1.0, 2.0, &search()).unwrap() - 1.0).abs() < 1e-12);
        // exp(-y^2) + y^2/4 is minimised at y^2 = ln 4.
        let want = 0.25 * (1.0 + 4f64.ln());
        let e = envelope(&f("gauss_quad:c=2"), 1.0, 0.0, &search()).unwrap();
        assert!((e - want).abs() < 1e-12, "{e} vs {want}");
    }

    #[test]
    fn prox_examples() {
        let s = search();
        let tol = default_plateau_tol(&s, 1.0);
        let p = prox_set(&f("indicator:points=-1,1"), 1.0, 0.0, &s, tol).unwrap();
        assert_eq!(p, SetValue::finite(vec![-1.0, 1.0], 0.0));
        let p = prox_set(&f("l0"), 1.0, R2, &s, tol).unwrap();
        assert!(
            crate::types::setvalue_equal(&p, &SetValue::finite(vec![0.0, R2], 0.0), 1e-7),
            "{p}"
        );
        let p = prox_set(&f("hull_l0:lambda=1"), 1.0, R2, &s, tol).unwrap();
        assert!(
            crate::types::setvalue_equal(&p, &SetValue::interval(0.0, R2), 1e-5),
            "{p}"
        );
    }

    #[test]
    fn unbounded_objective_is_detected() {
        let err = envelope(&f("gauss_quad:c=0.5"), 1.0, 0.0, &search());
        assert!(matches!(err, Err(Error::ProxBound(_))), "{err:?}");
    }

    #[test]
    fn window_growth_finds_far_minimiser() {
        // Prox of neg_abs at x = 7.5 sits at 8.5, just outside the window.
        let g = Grid::new(-8.0, 8.0, 2048).unwrap();
        let e = prox_eval(&f("neg_abs"), 1.0, 7.5, &g, 1e-6, &OracleOptions::default()).unwrap();
        assert!((e.value + 8.0).abs() < 1e-9);
    }

    #[test]
    fn hull_examples() {
        let g = Grid::new(-6.0, 6.0, 3072).unwrap();
        let l0 = f("l0");
        let h = hull_sweep(&l0, 1.0, &[0.0, 0.5, 2.0], &g).unwrap();
        assert!(h[0].to_f64().abs() < 1e-9);
        assert!(
            (h[1].to_f64() - (R2 * 0.5 - 0.125)).abs() < 1e-6,
            "{}",
            h[1]
        );
        assert!((h[2].to_f64() - 1.0).abs() < 1e-9);
        let q = proximal_hull(&f("quad:sigma=1"), 0.7, 1.3, &g).unwrap();
        assert!((q.to_f64() - 0.5 * 1.3 * 1.3).abs() < 1e-9);
    }

    #[test]
    fn hull_is_infinite_outside_indicator_hull() {
        let g = Grid::new(-4.0, 4.0, 1024).unwrap();
        let h = hull_sweep(&f("indicator:points=-1,1"), 1.0, &[0.0, 2.0], &g).unwrap();
        assert!((h[0].to_f64() - 0.5).abs() < 1e-6);
        assert_eq!(h[1], ExtReal::PosInf);
    }

    #[test]
    fn threshold_brackets() {
        let g = Grid::new(-10.0, 10.0, 2000).unwrap();
        let lambdas = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4];
        let t = estimate_threshold(&f("gauss_quad:c=2"), &lambdas, &g).unwrap();
        assert!(t.lower <= 2.0 && ExtReal::Finite(2.0) <= t.upper, "{t:?}");
        assert!(t.upper.to_f64() - t.lower <= 0.1);
        let t = estimate_threshold(&f("l0"), &lambdas, &g).unwrap();
        assert!(t.lower >= 1e3 && t.upper == ExtReal::PosInf);
        let t = estimate_threshold(&f("quad:sigma=1"), &lambdas, &g).unwrap();
        assert_eq!(t.upper, ExtReal::PosInf);
    }

    #[test]
    fn growth_estimate_for_gauss_quad() {
        let g = Grid::new(-10.0, 10.0, 2000).unwrap();
        let t = estimate_threshold_growth(&f("gauss_quad:c=2"), &g, 4).unwrap();
        assert!(
            (t.lower - 2.0).abs() < 1e-6 && (t.upper.to_f64() - 2.0).abs() < 1e-6,
            "{t:?}"
        );
    }
}
