//! Recovery of the proximal hull from the level proximal subdifferential by
//! cyclic chain sums, and the coincidence checks between two functions.
//!
//! With `s = v + x/lambda` for `v` in the level subdifferential at `x`, a
//! chain `x0 -> x1 -> ... -> xk -> x` contributes `sum s_i (x_{i+1} - x_i)`.
//! The supremum over chains, started at `f(x0) + x0^2/(2 lambda)` and shifted
//! back by `x^2/(2 lambda)`, is the hull. Node-to-node links are solved
//! exactly by dynamic programming over a sampled node set. Along runs of
//! consecutive domain samples with single-valued subdifferential the limit of
//! arbitrarily fine chains, the integral of `s`, is also available as a link.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::ScalarFn;
use crate::numeric::gauss3;
use crate::resolve::Oracle;
use crate::types::{setvalue_equal, Grid, SetValue};

/// Subdifferentials narrower than this count as single-valued in runs.
pub const RUN_SINGLE_TOL: f64 = 1e-9;
/// Default spacing of the domain sweep.
pub const DOMAIN_SPACING: f64 = 1.0 / 128.0;

#[derive(Clone, Debug, Serialize)]
pub struct ChainConfig {
    pub anchor: f64,
    pub max_depth: usize,
    pub node_samples: usize,
    /// Cap on subgradient candidates per node; only the extreme ones can
    /// bind, so any cap of at least two loses nothing.
    pub subgradient_samples_per_node: usize,
    pub seed: u64,
    /// Grid swept for the domain of the subdifferential. Defaults to the
    /// evaluation range and anchor padded by one, at [`DOMAIN_SPACING`].
    pub domain: Option<Grid>,
}

impl ChainConfig {
    pub fn new(anchor: f64, max_depth: usize, node_samples: usize) -> Self {
        ChainConfig {
            anchor,
            max_depth,
            node_samples,
            subgradient_samples_per_node: 3,
            seed: 0,
            domain: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::Parameter("max_depth must be at least 1".into()));
        }
        if self.node_samples < 2 {
            return Err(Error::Parameter("node_samples must be at least 2".into()));
        }
        if self.subgradient_samples_per_node < 1 {
            return Err(Error::Parameter(
                "need at least one subgradient sample per node".into(),
            ));
        }
        if !self.anchor.is_finite() {
            return Err(Error::Anchor(self.anchor));
        }
        Ok(())
    }
}

/// Extreme slopes `v + x/lambda` available at a node.
fn slope_range(d: &SetValue, x: f64, lambda: f64, cap: usize) -> Option<(f64, f64)> {
    if d.is_empty() {
        return None;
    }
    let (lo, hi) = if cap == 1 {
        let c = d.center().unwrap_or_else(|| d.samples()[0]);
        (c, c)
    } else {
        (d.lo(), d.hi())
    };
    Some((lo + x / lambda, hi + x / lambda))
}

fn jump(smin: f64, smax: f64, dx: f64) -> f64 {
    if dx > 0.0 {
        smax * dx
    } else if dx < 0.0 {
        smin * dx
    } else {
        0.0
    }
}

/// Maximal run of domain samples with single-valued subdifferential and
/// prefix integrals of the slope over its cells.
struct Run {
    points: Vec<f64>,
    prefix: Vec<f64>,
}

struct Slope<'a> {
    f: &'a ScalarFn,
    lambda: f64,
    oracle: &'a Oracle,
}

impl Slope<'_> {
    fn at(&self, t: f64) -> Result<f64> {
        let d = self.oracle.level_subdiff(self.f, self.lambda, t)?;
        if !d.is_singleton(RUN_SINGLE_TOL) {
            return Err(Error::Inconsistent(format!(
                "subdifferential {d} at {t} inside a run"
            )));
        }
        Ok(d.center().unwrap() + t / self.lambda)
    }

    fn integral(&self, a: f64, b: f64) -> Result<f64> {
        gauss3(|t| self.at(t), a, b)
    }
}

impl Run {
    fn contains(&self, t: f64) -> bool {
        t >= self.points[0] && t <= *self.points.last().unwrap()
    }

    /// Integral of the slope from the run start to `t`.
    fn primitive(&self, t: f64, slope: &Slope) -> Result<f64> {
        let i = self
            .points
            .partition_point(|&p| p <= t)
            .saturating_sub(1)
            .min(self.points.len() - 2);
        let a = self.points[i];
        if t == a {
            return Ok(self.prefix[i]);
        }
        Ok(self.prefix[i] + slope.integral(a, t)?)
    }
}

fn build_runs(samples: &[(f64, SetValue)], slope: &Slope) -> Result<Vec<Run>> {
    let cells: Vec<Option<f64>> = samples
        .par_windows(2)
        .map(|w| {
            let single = |d: &SetValue| d.is_singleton(RUN_SINGLE_TOL);
            if !(single(&w[0].1) && single(&w[1].1)) {
                return Ok(None);
            }
            match slope.integral(w[0].0, w[1].0) {
                Ok(v) => Ok(Some(v)),
                Err(Error::Inconsistent(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut runs = Vec::new();
    let mut cur: Option<Run> = None;
    for (i, c) in cells.iter().enumerate() {
        match (c, cur.as_mut()) {
            (Some(v), Some(run)) => {
                run.prefix.push(run.prefix.last().unwrap() + v);
                run.points.push(samples[i + 1].0);
            }
            (Some(v), None) => {
                cur = Some(Run {
                    points: vec![samples[i].0, samples[i + 1].0],
                    prefix: vec![0.0, *v],
                })
            }
            (None, _) => runs.extend(cur.take()),
        }
    }
    runs.extend(cur);
    Ok(runs)
}

struct Node {
    x: f64,
    smin: f64,
    smax: f64,
    /// Run index and primitive value, when the node lies in a run.
    run: Option<(usize, f64)>,
}

/// Estimated hull values at the evaluation points.
#[derive(Clone, Debug, Serialize)]
pub struct HullEstimate {
    pub points: Vec<(f64, f64)>,
    /// Domain samples with nonempty subdifferential.
    pub domain_samples: usize,
    /// Nodes used by the chain search, the anchor included.
    pub nodes: usize,
    pub runs: usize,
}

/// Chain-sum estimate of the proximal hull at every point of `eval`.
pub fn integrate_hull(
    f: &ScalarFn,
    lambda: f64,
    cfg: &ChainConfig,
    eval: &Grid,
    oracle: &Oracle,
) -> Result<HullEstimate> {
    cfg.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if let Some(t) = f.known_threshold() {
        if lambda >= t.to_f64() {
            return Err(Error::ProxBound(format!(
                "lambda = {lambda} is not below the threshold {t}"
            )));
        }
    }
    let x0 = cfg.anchor;
    let d0 = oracle.level_subdiff(f, lambda, x0)?;
    let (a0min, a0max) =
        slope_range(&d0, x0, lambda, cfg.subgradient_samples_per_node).ok_or(Error::Anchor(x0))?;

    let domain = match cfg.domain {
        Some(g) => g,
        None => {
            let (a, b) = (eval.lo.min(x0) - 1.0, eval.hi.max(x0) + 1.0);
            let steps = ((b - a) / DOMAIN_SPACING).ceil().max(1.0) as usize;
            Grid::new(a, a + steps as f64 * DOMAIN_SPACING, steps)?
        }
    };
    let samples: Vec<(f64, SetValue)> = domain
        .points()
        .into_par_iter()
        .map(|t| Ok((t, oracle.level_subdiff(f, lambda, t)?)))
        .collect::<Result<_>>()?;
    let slope = Slope { f, lambda, oracle };
    let runs = build_runs(&samples, &slope)?;
    let locate = |t: f64| -> Result<Option<(usize, f64)>> {
        match runs.iter().position(|r| r.contains(t)) {
            Some(r) => match runs[r].primitive(t, &slope) {
                Ok(p) => Ok(Some((r, p))),
                Err(Error::Inconsistent(_)) => Ok(None),
                Err(e) => Err(e),
            },
            None => Ok(None),
        }
    };

    let mut dom: Vec<usize> = (0..samples.len())
        .filter(|&i| !samples[i].1.is_empty())
        .collect();
    if dom.is_empty() {
        return Err(Error::DomainEmpty(format!(
            "no domain sample of the subdifferential on {domain:?}"
        )));
    }
    let domain_samples = dom.len();
    // A shuffled prefix keeps node sets nested as M grows.
    dom.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    dom.truncate(cfg.node_samples);
    dom.sort_unstable();

    let mut nodes = vec![Node {
        x: x0,
        smin: a0min,
        smax: a0max,
        run: locate(x0)?,
    }];
    for &i in &dom {
        let (t, ref d) = samples[i];
        if t == x0 {
            continue;
        }
        let (smin, smax) = slope_range(d, t, lambda, cfg.subgradient_samples_per_node).unwrap();
        nodes.push(Node {
            x: t,
            smin,
            smax,
            run: locate(t)?,
        });
    }

    let link = |n: &Node, x: f64, run_x: Option<(usize, f64)>| -> f64 {
        let mut v = jump(n.smin, n.smax, x - n.x);
        if let (Some((rn, pn)), Some((rx, px))) = (n.run, run_x) {
            if rn == rx {
                v = v.max(px - pn);
            }
        }
        v
    };

    let f0 = f.value(x0)?;
    let mut w = vec![f64::NEG_INFINITY; nodes.len()];
    w[0] = f0 + x0 * x0 / (2.0 * lambda);
    for _ in 0..cfg.max_depth {
        let next: Vec<f64> = (0..nodes.len())
            .into_par_iter()
            .map(|m| {
                let target = &nodes[m];
                let mut best = w[m];
                for (n, &wn) in nodes.iter().zip(&w) {
                    if wn > f64::NEG_INFINITY {
                        best = best.max(wn + link(n, target.x, target.run));
                    }
                }
                best
            })
            .collect();
        w = next;
    }

    let points = eval
        .points()
        .into_par_iter()
        .map(|x| {
            let run_x = locate(x)?;
            let mut best = f64::NEG_INFINITY;
            for (n, &wn) in nodes.iter().zip(&w) {
                if wn > f64::NEG_INFINITY {
                    best = best.max(wn + link(n, x, run_x));
                }
            }
            Ok((x, best - x * x / (2.0 * lambda)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HullEstimate {
        points,
        domain_samples,
        nodes: nodes.len(),
        runs: runs.len(),
    })
}

/// Which of the three coincidence relations hold on the test points.
#[derive(Clone, Debug, Serialize)]
pub struct CoincidenceReport {
    pub lambda: f64,
    pub tol: f64,
    pub subdiff_equal: bool,
    /// Points where the level subdifferentials differ.
    pub subdiff_witnesses: Vec<f64>,
    pub prox_equal: bool,
    pub prox_witnesses: Vec<f64>,
    /// `e1 - e2` is constant to `tol`.
    pub envelope_equal_up_to_constant: bool,
    /// Median of `e1 - e2`.
    pub c: f64,
    pub envelope_max_deviation: f64,
}

/// Compare level subdifferentials, prox sets and envelopes of `f1` and `f2`
/// at the grid points and the special points of both functions.
pub fn coincidence_check(
    f1: &ScalarFn,
    f2: &ScalarFn,
    lambda: f64,
    grid: &Grid,
    tol: f64,
    oracle: &Oracle,
) -> Result<CoincidenceReport> {
    let mut xs = grid.points();
    xs.extend(
        f1.special_points()
            .into_iter()
            .chain(f2.special_points())
            .filter(|&t| grid.contains(t)),
    );
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let rows = xs
        .par_iter()
        .map(|&x| {
            let d = (
                oracle.level_subdiff(f1, lambda, x)?,
                oracle.level_subdiff(f2, lambda, x)?,
            );
            let p = (oracle.prox(f1, lambda, x)?, oracle.prox(f2, lambda, x)?);
            let e = oracle.envelope(f1, lambda, x)? - oracle.envelope(f2, lambda, x)?;
            Ok((
                x,
                setvalue_equal(&d.0, &d.1, tol),
                setvalue_equal(&p.0, &p.1, tol),
                e,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let subdiff_witnesses: Vec<f64> = rows.iter().filter(|r| !r.1).map(|r| r.0).collect();
    let prox_witnesses: Vec<f64> = rows.iter().filter(|r| !r.2).map(|r| r.0).collect();
    let mut diffs: Vec<f64> = rows.iter().map(|r| r.3).collect();
    diffs.sort_by(f64::total_cmp);
    let n = diffs.len();
    let c = if n % 2 == 1 {
        diffs[n / 2]
    } else {
        0.5 * (diffs[n / 2 - 1] + diffs[n / 2])
    };
    let dev = diffs.iter().map(|d| (d - c).abs()).fold(0.0, f64::max);
    Ok(CoincidenceReport {
        lambda,
        tol,
        subdiff_equal: subdiff_witnesses.is_empty(),
        subdiff_witnesses,
        prox_equal: prox_witnesses.is_empty(),
        prox_witnesses,
        envelope_equal_up_to_constant: dev <= tol,
        c,
        envelope_max_deviation: dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::hull_l0;

    fn f(s: &str) -> ScalarFn {
        s.parse().unwrap()
    }

    #[test]
    fn l0_hull_recovery() {
        let o = Oracle::default();
        let eval = Grid::new(-2.0, 2.0, 40).unwrap();
        let est = integrate_hull(&f("l0"), 1.0, &ChainConfig::new(0.0, 3, 200), &eval, &o).unwrap();
        for &(x, v) in &est.points {
            let h = hull_l0(1.0, x).unwrap();
            assert!(v <= h + 1e-9, "x = {x}: {v} > {h}");
            assert!(h - v <= 0.02, "x = {x}: {v} vs {h}");
        }
        let at = |x: f64| {
            est.points
                .iter()
                .find(|p| (p.0 - x).abs() < 1e-12)
                .unwrap()
                .1
        };
        assert_eq!(at(0.0), 0.0);
        assert!((at(0.5) - (0.5 * std::f64::consts::SQRT_2 - 0.125)).abs() < 1e-12);
    }

    #[test]
    fn convex_function_recovers_itself() {
        let o = Oracle::default();
        let eval = Grid::new(-2.0, 2.0, 40).unwrap();
        let est = integrate_hull(
            &f("quad:sigma=1"),
            1.0,
            &ChainConfig::new(0.0, 3, 200),
            &eval,
            &o,
        )
        .unwrap();
        for &(x, v) in &est.points {
            assert!((v - 0.5 * x * x).abs() < 1e-9, "{x}: {v}");
        }
    }

    #[test]
    fn monotone_in_depth_and_nodes() {
        let o = Oracle::default();
        let eval = Grid::new(-2.0, 2.0, 20).unwrap();
        let sin = f("sin");
        let run =
            |k, m| integrate_hull(&sin, 0.5, &ChainConfig::new(0.0, k, m), &eval, &o).unwrap();
        let (a, b, c) = (run(1, 20), run(2, 20), run(2, 60));
        for i in 0..a.points.len() {
            assert!(a.points[i].1 <= b.points[i].1 && b.points[i].1 <= c.points[i].1);
        }
    }

    #[test]
    fn anchor_outside_domain() {
        let o = Oracle::default();
        let eval = Grid::new(-2.0, 2.0, 4).unwrap();
        let r = integrate_hull(&f("l0"), 1.0, &ChainConfig::new(1.0, 3, 50), &eval, &o);
        assert!(matches!(r, Err(Error::Anchor(_))));
    }

    #[test]
    fn coincidences() {
        let o = Oracle::default();
        let g = Grid::new(-4.0, 4.0, 2000).unwrap();
        let r = coincidence_check(&f("l0"), &f("hull_l0:lambda=1"), 1.0, &g, 1e-6, &o).unwrap();
        assert!(r.envelope_equal_up_to_constant && r.c.abs() < 1e-6);
        assert!(!r.prox_equal);
        assert!(r
            .prox_witnesses
            .iter()
            .any(|&x| (x - std::f64::consts::SQRT_2).abs() < 1e-12));
        let r = coincidence_check(&f("l0"), &f("zero"), 1.0, &g, 1e-6, &o).unwrap();
        assert!(!r.subdiff_equal && r.subdiff_witnesses.contains(&0.0));
        let q = f("quad:sigma=1");
        let r = coincidence_check(&q, &q, 1.0, &g, 1e-6, &o).unwrap();
        assert!(r.subdiff_equal && r.prox_equal && r.envelope_equal_up_to_constant && r.c == 0.0);
    }
}
