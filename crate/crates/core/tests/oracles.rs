//! Library results against references computed here by plain dense loops,
//! without the library's search, polishing or closed forms.

use levelprox::catalog::{hull_l0, Entry};
use levelprox::engine::proximal_hull;
use levelprox::solvers::{prox_gradient_step, Matrix, SmoothTerm, TieRule};
use levelprox::subdiff::{level_subdiff_direct, SubdiffQuery};
use levelprox::{Grid, Oracle, ScalarFn, SeparableFunction, SetValue};

const H: f64 = 1e-4;

fn f(s: &str) -> ScalarFn {
    s.parse().unwrap()
}

fn dense(a: f64, b: f64) -> Vec<f64> {
    let n = ((b - a) / H).round() as usize;
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// Minimum value and minimisers (within `tol`) of `f(y) + (y - x)^2/(2 lambda)`.
fn brute_prox(g: &ScalarFn, lambda: f64, x: f64, tol: f64) -> (f64, Vec<f64>) {
    let ys = dense(x - 10.0, x + 10.0);
    let vals: Vec<f64> = ys
        .iter()
        .map(|&y| g.value(y).unwrap() + (y - x) * (y - x) / (2.0 * lambda))
        .collect();
    let m = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let arg = ys
        .iter()
        .zip(&vals)
        .filter(|(_, &v)| v <= m + tol)
        .map(|(&y, _)| y)
        .collect();
    (m, arg)
}

/// Bounds of the level subdifferential from the defining inequality on a dense grid.
fn brute_subdiff(g: &ScalarFn, lambda: f64, x: f64) -> (f64, f64) {
    let gx = g.value(x).unwrap();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for y in dense(x - 12.0, x + 12.0) {
        let d = y - x;
        if d.abs() < 0.5 * H {
            continue;
        }
        let q = (g.value(y).unwrap() - gx + d * d / (2.0 * lambda)) / d;
        if d > 0.0 {
            hi = hi.min(q);
        } else {
            lo = lo.max(q);
        }
    }
    (lo, hi)
}

#[test]
fn envelopes_and_prox_match_dense_minimisation() {
    let o = Oracle::default();
    for spec in [
        "sin",
        "pnorm:p=0.5",
        "log_eps:eps=0.5",
        "gauss_quad:c=2",
        "neg_abs",
        "pnorm:p=1.5",
    ] {
        let g = f(spec);
        for &x in &[-2.3, -0.7, 0.0, 0.4, 1.9] {
            let (m, arg) = brute_prox(&g, 0.8, x, 1e-12);
            let e = o.envelope(&g, 0.8, x).unwrap();
            assert!((e - m).abs() < 1e-6, "{spec} at {x}: {e} vs {m}");
            assert!(e <= m + 1e-12, "{spec} at {x}: oracle above dense minimum");
            let p = o.prox(&g, 0.8, x).unwrap();
            for a in arg {
                assert!(
                    p.distance(a).unwrap() < 2.0 * H,
                    "{spec} at {x}: {a} not near {p}"
                );
            }
        }
    }
}

#[test]
fn gauss_quad_envelope_at_origin() {
    // exp(-y^2) + y^2/4 is minimised at y^2 = ln 4, where it equals (1 + ln 4)/4.
    let e = Oracle::default()
        .envelope(&f("gauss_quad:c=2"), 1.0, 0.0)
        .unwrap();
    assert!((e - 0.25 * (1.0 + 4f64.ln())).abs() < 1e-10);
}

#[test]
fn catalog_subdifferentials_match_the_defining_inequality() {
    let cases: [(&str, f64, &[f64]); 5] = [
        ("l0", 1.0, &[0.0, 0.5, 1.5, -2.0]),
        ("l0", 0.5, &[0.0, 0.9, 1.1]),
        ("abs", 1.0, &[0.0, 0.3, -1.0]),
        ("quad:sigma=-0.5", 1.0, &[0.0, 1.0]),
        ("hull_l0:lambda=1", 1.0, &[0.0, 0.7, 1.5]),
    ];
    for (spec, lambda, xs) in cases {
        let g = f(spec);
        for &x in xs {
            let closed = g
                .entry()
                .unwrap()
                .level_subdiff(lambda, x)
                .unwrap()
                .unwrap();
            let (lo, hi) = brute_subdiff(&g, lambda, x);
            if lo > hi + 1e-3 {
                assert!(
                    closed.is_empty(),
                    "{spec} at {x}: expected empty, got {closed}"
                );
            } else {
                assert!(
                    (closed.lo() - lo).abs() < 1e-3 && (closed.hi() - hi).abs() < 1e-3,
                    "{spec} at {x}: {closed} vs [{lo}, {hi}]"
                );
            }
        }
    }
}

#[test]
fn direct_oracle_matches_dense_bounds_off_catalog() {
    let g = f("sin");
    for &x in &[-1.0, 0.0, 0.8, 2.0] {
        for lambda in [0.5, 1.0] {
            let d = level_subdiff_direct(&SubdiffQuery {
                f: &g,
                lambda,
                x,
                grid: Grid::around(x, 12.0, 6144).unwrap(),
            })
            .unwrap();
            let (lo, hi) = brute_subdiff(&g, lambda, x);
            if lo > hi + 1e-6 {
                assert!(d.is_empty(), "sin at {x}, lambda {lambda}: {d}");
            } else {
                assert!(
                    d.contains(0.5 * (lo + hi), 1e-4),
                    "sin at {x}, lambda {lambda}: {d} vs [{lo}, {hi}]"
                );
            }
        }
    }
}

/// Lower convex envelope of points sorted by abscissa (monotone chain).
fn lower_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut h: Vec<(f64, f64)> = Vec::new();
    for &p in pts {
        while h.len() >= 2 {
            let (a, b) = (h[h.len() - 2], h[h.len() - 1]);
            if (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) <= 0.0 {
                h.pop();
            } else {
                break;
            }
        }
        h.push(p);
    }
    h
}

fn eval_hull(h: &[(f64, f64)], x: f64) -> f64 {
    let i = h.partition_point(|p| p.0 <= x).clamp(1, h.len() - 1);
    let (a, b) = (h[i - 1], h[i]);
    a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
}

#[test]
fn grid_hull_matches_convexification() {
    let lambda = 0.5;
    for spec in ["sin", "neg_abs", "l0"] {
        let g = f(spec);
        let pts: Vec<(f64, f64)> = dense(-14.0, 14.0)
            .into_iter()
            .map(|y| (y, g.value(y).unwrap() + y * y / (2.0 * lambda)))
            .collect();
        let h = lower_hull(&pts);
        let search = Grid::new(-10.0, 10.0, 5120).unwrap();
        for &x in &[-1.3, -0.2, 0.0, 0.6, 1.7] {
            let num = proximal_hull(&g, lambda, x, &search).unwrap().to_f64();
            let reference = eval_hull(&h, x) - x * x / (2.0 * lambda);
            assert!(
                (num - reference).abs() < 1e-5,
                "{spec} at {x}: {num} vs {reference}"
            );
        }
    }
    // And the closed form of the l0 hull.
    for &x in &[-1.3, 0.5, 2.0] {
        let num = proximal_hull(&f("l0"), 1.0, x, &Grid::new(-10.0, 10.0, 5120).unwrap())
            .unwrap()
            .to_f64();
        assert!((num - hull_l0(1.0, x).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn hard_threshold_step_matches_brute_force_subproblem() {
    let o = Oracle::default();
    let gamma = 1.0;
    let lambda = 0.4;
    let fs = SeparableFunction::repeat(Entry::ScaledL0 { gamma }.into(), 2).unwrap();
    let g = SmoothTerm::least_squares(Matrix::identity(2), vec![1.0, 0.0]).unwrap();
    let x = [1.0, 0.0];
    let step = prox_gradient_step(&fs, &g, lambda, &x, TieRule::default(), &o).unwrap();
    // Gradient of |x - b|^2/2 at x = b vanishes, so each coordinate solves
    // min gamma |y|_0 + (y - x_i)^2 / (2 lambda).
    let g0: ScalarFn = Entry::ScaledL0 { gamma }.into();
    for i in 0..2 {
        let (_, arg) = brute_prox(&g0, lambda, x[i], 1e-12);
        assert_eq!(arg.len(), 1);
        assert!((arg[0] - step.x[i]).abs() < H);
    }
    assert_eq!(step.x, vec![1.0, 0.0]);
}

#[test]
fn indicator_prox_is_two_valued_at_the_midpoint() {
    let o = Oracle::default();
    let g = f("indicator:points=-1,1");
    let p = o.prox_oracle(&g, 1.0, 0.0).unwrap().set;
    assert_eq!(p, SetValue::finite(vec![-1.0, 1.0], 0.0));
}
