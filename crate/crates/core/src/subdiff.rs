//! Level proximal subdifferential oracles and the tests built on them:
//! lambda-proximality, global minimality, the critical level of a local
//! minimiser, Frechet subgradients as an intersection, and single-valuedness.

use serde::Serialize;

use crate::engine::proximal_hull;
use crate::error::{Error, Result};
use crate::function::ScalarFn;
use crate::numeric::golden_min;
use crate::types::{ExtReal, Grid, SetValue};

/// Relative offset of the two local probes `x +- delta` added to the grid.
pub const PROBE_REL: f64 = 1e-7;
/// Crossed quotient bounds closer than this (relative) collapse to a point.
pub const EMPTY_TOL: f64 = 1e-7;

/// One evaluation of `∂_p^lambda f(x)` on a search grid.
#[derive(Clone, Debug)]
pub struct SubdiffQuery<'a> {
    pub f: &'a ScalarFn,
    pub lambda: f64,
    pub x: f64,
    pub grid: Grid,
}

// Bounds on v from `g(y) >= g(x) + v (y - x) - kappa (y - x)^2` over the grid,
// the special points and two local probes.
fn quotient_bounds(
    f: &ScalarFn,
    shift: f64,
    kappa: f64,
    x: f64,
    grid: &Grid,
) -> Result<Option<(f64, f64)>> {
    let g = |y: f64| -> Result<f64> { Ok(f.value(y)? + shift * y * y) };
    let gx = g(x)?;
    if !gx.is_finite() {
        return Ok(None);
    }
    let q = |y: f64| -> Result<f64> {
        let d = y - x;
        Ok((g(y)? - gx + kappa * d * d) / d)
    };
    let h = grid.spacing();
    let delta = PROBE_REL * x.abs().max(1.0);

    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut best_lo: Option<usize> = None;
    let mut best_hi: Option<usize> = None;
    let pts = grid.points();
    for (i, &y) in pts.iter().enumerate() {
        if (y - x).abs() < 0.5 * h {
            continue;
        }
        let v = q(y)?;
        if y > x && v < hi {
            hi = v;
            best_hi = Some(i);
        } else if y < x && v > lo {
            lo = v;
            best_lo = Some(i);
        }
    }
    let mut extra: Vec<f64> = f.special_points().into_iter().filter(|&y| y != x).collect();
    extra.extend([x - delta, x + delta]);
    for y in extra {
        let v = q(y)?;
        if y > x && v < hi {
            hi = v;
            best_hi = None;
        } else if y < x && v > lo {
            lo = v;
            best_lo = None;
        }
    }

    // Polish the binding grid constraint between its neighbours.
    let near = |i: usize, lower: bool| -> (f64, f64) {
        let a = if i > 0 { pts[i - 1] } else { pts[i] };
        let b = if i + 1 < pts.len() {
            pts[i + 1]
        } else {
            pts[i]
        };
        if lower {
            (a, b.min(x - 0.5 * h))
        } else {
            (a.max(x + 0.5 * h), b)
        }
    };
    if let Some(i) = best_hi.filter(|_| hi.is_finite()) {
        let (a, b) = near(i, false);
        if a < b {
            let (_, v) = golden_min(
                |y| q(y).map(|v| if v.is_nan() { f64::INFINITY } else { v }),
                a,
                b,
                60,
            )?;
            hi = hi.min(v);
        }
    }
    if let Some(i) = best_lo.filter(|_| lo.is_finite()) {
        let (a, b) = near(i, true);
        if a < b {
            let (_, v) = golden_min(
                |y| q(y).map(|v| if v.is_nan() { f64::INFINITY } else { -v }),
                a,
                b,
                60,
            )?;
            lo = lo.max(-v);
        }
    }
    Ok(Some((lo, hi)))
}

fn bounds_to_set(lo: f64, hi: f64) -> SetValue {
    if lo > hi {
        let scale = 1f64.max(lo.abs()).max(hi.abs());
        if lo - hi <= EMPTY_TOL * scale {
            SetValue::point(0.5 * (lo + hi))
        } else {
            SetValue::Empty
        }
    } else {
        SetValue::from_bounds(lo, hi)
    }
}

fn check(q: &SubdiffQuery) -> Result<()> {
    if !(q.lambda > 0.0) || q.lambda.is_nan() {
        return Err(Error::Parameter(format!(
            "lambda must be positive, got {}",
            q.lambda
        )));
    }
    if !q.x.is_finite() {
        return Err(Error::Parameter(format!(
            "point must be finite, got {}",
            q.x
        )));
    }
    Ok(())
}

/// `∂_p^lambda f(x)` straight from its defining quadratic-minorant inequality.
/// Grid points closer than half a spacing to `x` are skipped.
pub fn level_subdiff_direct(q: &SubdiffQuery) -> Result<SetValue> {
    check(q)?;
    let kappa = if q.lambda.is_finite() {
        1.0 / (2.0 * q.lambda)
    } else {
        0.0
    };
    Ok(match quotient_bounds(q.f, 0.0, kappa, q.x, &q.grid)? {
        None => SetValue::Empty,
        Some((lo, hi)) => bounds_to_set(lo, hi),
    })
}

/// `∂_p^lambda f(x)` as the Frechet subdifferential of `f + j/lambda`,
/// found by the affine-minorant test, shifted by `-x/lambda`.
pub fn level_subdiff_shifted(q: &SubdiffQuery) -> Result<SetValue> {
    check(q)?;
    let shift = 1.0 / (2.0 * q.lambda);
    Ok(match quotient_bounds(q.f, shift, 0.0, q.x, &q.grid)? {
        None => SetValue::Empty,
        Some((lo, hi)) => {
            let s = q.x / q.lambda;
            bounds_to_set(lo - s, hi - s)
        }
    })
}

/// Affine-minorant (global Frechet) subgradients of `f` at `x`.
pub fn fenchel_subdiff(f: &ScalarFn, x: f64, grid: &Grid) -> Result<SetValue> {
    level_subdiff_direct(&SubdiffQuery {
        f,
        lambda: f64::INFINITY,
        x,
        grid: *grid,
    })
}

/// Hull tolerance used by [`is_lambda_proximal`].
pub const PROXIMAL_TOL: f64 = 1e-6;

/// True when the proximal hull touches `f` at `x`.
pub fn is_lambda_proximal(f: &ScalarFn, lambda: f64, x: f64, grid: &Grid) -> Result<bool> {
    let fx = f.eval(x)?;
    let ExtReal::Finite(fx) = fx else {
        return Err(Error::Parameter(format!("{f} is +inf at {x}")));
    };
    let h = proximal_hull(f, lambda, x, grid)?;
    Ok((h.to_f64() - fx).abs() <= PROXIMAL_TOL)
}

/// True when `0` lies in every `∂_p^lambda f(x)` and no grid value is lower.
pub fn global_min_test(f: &ScalarFn, x: f64, lambdas: &[f64], grid: &Grid) -> Result<bool> {
    let fx = f.value(x)?;
    if !fx.is_finite() {
        return Ok(false);
    }
    let scale = 1e-12 * fx.abs().max(1.0);
    for y in grid.points().into_iter().chain(f.special_points()) {
        if f.value(y)? < fx - scale {
            return Ok(false);
        }
    }
    for &lambda in lambdas {
        let d = level_subdiff_direct(&SubdiffQuery {
            f,
            lambda,
            x,
            grid: *grid,
        })?;
        if !d.contains(0.0, 1e-9) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest level at which a local minimiser is still level-critical.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriticalLambda {
    pub x: f64,
    pub lambda_bar: ExtReal,
    pub is_global: bool,
}

/// Number of log-spaced levels probed before bisecting for the critical level.
pub const PRESCAN_POINTS: usize = 16;

/// The prescan levels: log-spaced from `1e-4` to `1e4`, capped below the
/// known threshold of `f`.
pub fn prescan_levels(f: &ScalarFn) -> Vec<f64> {
    let cap = f.known_threshold().map_or(f64::INFINITY, ExtReal::to_f64);
    (0..PRESCAN_POINTS)
        .map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / (PRESCAN_POINTS - 1) as f64))
        .filter(|&l| l < cap)
        .collect()
}

/// Critical level `sup {lambda : 0 in ∂_p^lambda f(x)}` by prescan and bisection.
pub fn critical_lambda_bar(
    f: &ScalarFn,
    x: f64,
    grid: &Grid,
    bisect_iters: usize,
) -> Result<CriticalLambda> {
    let levels = prescan_levels(f);
    let member = |lambda: f64| -> Result<bool> {
        Ok(level_subdiff_direct(&SubdiffQuery {
            f,
            lambda,
            x,
            grid: *grid,
        })?
        .contains(0.0, 1e-9))
    };
    let flags = levels
        .iter()
        .map(|&l| member(l))
        .collect::<Result<Vec<_>>>()?;
    if !flags.iter().any(|&b| b) {
        return Err(Error::NotCritical(x));
    }
    if global_min_test(f, x, &levels, grid)? {
        return Ok(CriticalLambda {
            x,
            lambda_bar: ExtReal::PosInf,
            is_global: true,
        });
    }
    let first_out = flags.iter().position(|&b| !b);
    let Some(j) = first_out else {
        // Critical at every probed level but some grid value is lower.
        return Ok(CriticalLambda {
            x,
            lambda_bar: ExtReal::Finite(*levels.last().unwrap()),
            is_global: false,
        });
    };
    if j == 0 {
        return Err(Error::NotCritical(x));
    }
    if flags[j..].iter().any(|&b| b) {
        log::debug!("membership of 0 is not monotone in lambda at x = {x}; using the first exit");
    }
    let (mut lo, mut hi) = (levels[j - 1], levels[j]);
    for _ in 0..bisect_iters {
        let mid = (lo * hi).sqrt();
        if member(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CriticalLambda {
        x,
        lambda_bar: ExtReal::Finite(0.5 * (lo + hi)),
        is_global: false,
    })
}

/// Intersection of `∂_p^lambda f(x)` over the supplied levels.
pub fn fenchel_from_intersection(
    f: &ScalarFn,
    x: f64,
    lambdas: &[f64],
    grid: &Grid,
) -> Result<SetValue> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for &lambda in lambdas {
        let d = level_subdiff_direct(&SubdiffQuery {
            f,
            lambda,
            x,
            grid: *grid,
        })?;
        if d.is_empty() {
            return Ok(SetValue::Empty);
        }
        lo = lo.max(d.lo());
        hi = hi.min(d.hi());
    }
    Ok(bounds_to_set(lo, hi))
}

/// Width below which a sampled subdifferential counts as a single point.
pub fn singleton_tol(grid: &Grid) -> f64 {
    1e-7f64.max(4.0 * grid.spacing())
}

/// For each point of `range`: is `∂_p^lambda f(x)` a single point?
pub fn single_valued_test(
    f: &ScalarFn,
    lambda: f64,
    range: &Grid,
    search: &Grid,
) -> Result<Vec<(f64, bool)>> {
    use rayon::prelude::*;
    let tol = singleton_tol(search);
    range
        .points()
        .into_par_iter()
        .map(|x| {
            let d = level_subdiff_direct(&SubdiffQuery {
                f,
                lambda,
                x,
                grid: *search,
            })?;
            Ok((x, d.is_singleton(tol)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::setvalue_equal;

    const R2: f64 = std::f64::consts::SQRT_2;

    fn grid() -> Grid {
        Grid::new(-8.0, 8.0, 4096).unwrap()
    }

    fn direct(s: &str, lambda: f64, x: f64) -> SetValue {
        let f: ScalarFn = s.parse().unwrap();
        level_subdiff_direct(&SubdiffQuery {
            f: &f,
            lambda,
            x,
            grid: grid(),
        })
        .unwrap()
    }

    fn shifted(s: &str, lambda: f64, x: f64) -> SetValue {
        let f: ScalarFn = s.parse().unwrap();
        level_subdiff_shifted(&SubdiffQuery {
            f: &f,
            lambda,
            x,
            grid: grid(),
        })
        .unwrap()
    }

    #[test]
    fn direct_examples() {
        assert!(setvalue_equal(
            &direct("l0", 1.0, 0.0),
            &SetValue::interval(-R2, R2),
            1e-9
        ));
        assert_eq!(direct("l0", 1.0, 1.0), SetValue::Empty);
        for x in [-3.0, 0.0, 2.5] {
            assert!(setvalue_equal(
                &direct("zero", 0.7, x),
                &SetValue::point(0.0),
                1e-6
            ));
        }
        assert_eq!(direct("indicator:points=-1,1", 1.0, 0.5), SetValue::Empty);
    }

    #[test]
    fn shifted_examples() {
        assert!(setvalue_equal(
            &shifted("l0", 1.0, 0.0),
            &SetValue::interval(-R2, R2),
            1e-9
        ));
        let d = shifted("indicator:points=-1,1", 2.0, 1.0);
        assert!(
            setvalue_equal(&d, &SetValue::HalflineUp { lo: -0.5 }, 1e-9),
            "{d}"
        );
        assert!(setvalue_equal(
            &shifted("quad:sigma=1", 1.0, 3.0),
            &SetValue::point(3.0),
            1e-5
        ));
    }

    #[test]
    fn lambda_proximal_points() {
        let l0: ScalarFn = "l0".parse().unwrap();
        let g = Grid::new(-6.0, 6.0, 1536).unwrap();
        assert!(is_lambda_proximal(&l0, 1.0, 0.0, &g).unwrap());
        assert!(!is_lambda_proximal(&l0, 1.0, 1.0, &g).unwrap());
        let q: ScalarFn = "quad:sigma=1".parse().unwrap();
        let g = Grid::new(-12.0, 12.0, 3072).unwrap();
        assert!(is_lambda_proximal(&q, 1.0, 5.0, &g).unwrap());
    }

    #[test]
    fn global_minimisers() {
        let lambdas = [0.01, 1.0, 100.0];
        let l0: ScalarFn = "l0".parse().unwrap();
        assert!(global_min_test(&l0, 0.0, &lambdas, &grid()).unwrap());
        assert!(!global_min_test(&l0, 2.0, &lambdas, &grid()).unwrap());
        let ind: ScalarFn = "indicator:points=-1,1".parse().unwrap();
        assert!(global_min_test(&ind, 1.0, &lambdas, &grid()).unwrap());
    }

    #[test]
    fn critical_level_of_local_minimiser() {
        // min(x^2, (x-2)^2 + 0.5) at x = 2: zero stays a level subgradient
        // exactly while 4 / (1 + 2 lambda) >= 0.5.
        let f: ScalarFn = r#"piecewise:{"breaks":[1.125],"pieces":[[0,0,1],[4.5,-4,1]]}"#
            .parse()
            .unwrap();
        let c = critical_lambda_bar(&f, 2.0, &grid(), 40).unwrap();
        assert!(!c.is_global);
        assert!((c.lambda_bar.to_f64() - 3.5).abs() < 1e-4, "{c:?}");
        let l0: ScalarFn = "l0".parse().unwrap();
        let c = critical_lambda_bar(&l0, 0.0, &grid(), 20).unwrap();
        assert!(c.is_global && c.lambda_bar == ExtReal::PosInf);
        // Away from the origin l0 is locally constant: critical up to lambda = x^2 / 2.
        let c = critical_lambda_bar(&l0, 1.0, &grid(), 40).unwrap();
        assert!((c.lambda_bar.to_f64() - 0.5).abs() < 1e-6, "{c:?}");
        let q: ScalarFn = "quad:sigma=1".parse().unwrap();
        assert!(matches!(
            critical_lambda_bar(&q, 1.0, &grid(), 20),
            Err(Error::NotCritical(_))
        ));
    }

    #[test]
    fn frechet_by_intersection() {
        let abs: ScalarFn = "abs".parse().unwrap();
        let d = fenchel_from_intersection(&abs, 0.0, &[1.0, 10.0, 100.0], &grid()).unwrap();
        assert!(
            setvalue_equal(&d, &SetValue::interval(-1.0, 1.0), 1e-6),
            "{d}"
        );
        // The binding point at lambda = 100 is y = sqrt(200), so widen the grid.
        let wide = Grid::new(-20.0, 20.0, 4000).unwrap();
        let l0: ScalarFn = "l0".parse().unwrap();
        let d = fenchel_from_intersection(&l0, 0.0, &[1.0, 10.0, 100.0], &wide).unwrap();
        let w = (2.0f64 / 100.0).sqrt();
        assert!(setvalue_equal(&d, &SetValue::interval(-w, w), 1e-9), "{d}");
        let na: ScalarFn = "neg_abs".parse().unwrap();
        assert_eq!(fenchel_subdiff(&na, 0.0, &grid()).unwrap(), SetValue::Empty);
    }

    #[test]
    fn single_valuedness() {
        let range = Grid::new(-1.0, 1.0, 8).unwrap();
        let q: ScalarFn = "quad:sigma=1".parse().unwrap();
        assert!(single_valued_test(&q, 1.0, &range, &grid())
            .unwrap()
            .iter()
            .all(|p| p.1));
        let abs: ScalarFn = "abs".parse().unwrap();
        let r = single_valued_test(&abs, 1.0, &range, &grid()).unwrap();
        assert!(!r[4].1 && r[0].1);
    }

    #[test]
    fn infinite_point_gives_empty() {
        assert_eq!(direct("indicator:points=0", 1.0, 0.3), SetValue::Empty);
    }
}
