//! Localised proximal gradient and Krasnoselskii-Mann iterations for
//! `f + g` with `f` separable and `g` smooth, with criticality certificates
//! from the level proximal subdifferential.
//!
//! Fixed points of `x -> P(x - lambda grad g(x))` are exactly the points with
//! `-grad g(x)` in the level subdifferential of `f`, so convergence on the
//! iterate residual is always followed by an independent check of that
//! inclusion.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::SeparableFunction;
use crate::resolve::Oracle;
use crate::subdiff::{global_min_test, prescan_levels};
use crate::types::{ExtReal, Grid, SetValue};

/// Defect reported for a coordinate whose level subdifferential is empty.
pub const DEFAULT_SENTINEL: f64 = 1e12;
/// Prox sets wider than this are treated as ties.
pub const TIE_WIDTH: f64 = 1e-12;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::Parameter("matrix must be nonempty".into()));
        }
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::Dimension {
                expected: c,
                got: bad.len(),
            });
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("matrix entries must be finite".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Matrix {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok(self
            .data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `A^T y`.
    pub fn t_matvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::Dimension {
                expected: self.rows,
                got: y.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.data.chunks(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        Ok(out)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.data.chunks(m.cols).map(<[f64]>::to_vec).collect()
    }
}

type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// The smooth part `g`.
#[derive(Clone)]
pub enum SmoothTerm {
    Zero,
    /// `|Ax - b|^2 / 2`, with gradient `A^T (Ax - b)`.
    LeastSquares {
        a: Matrix,
        b: Vec<f64>,
    },
    /// User gradient with a bound on its Lipschitz constant.
    Custom {
        grad: GradFn,
        lipschitz: f64,
    },
}

impl fmt::Debug for SmoothTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmoothTerm::Zero => write!(f, "Zero"),
            SmoothTerm::LeastSquares { a, b } => write!(f, "LeastSquares({:?}, {b:?})", a.shape()),
            SmoothTerm::Custom { lipschitz, .. } => write!(f, "Custom(L = {lipschitz})"),
        }
    }
}

impl SmoothTerm {
    pub fn least_squares(a: Matrix, b: Vec<f64>) -> Result<Self> {
        if b.len() != a.rows {
            return Err(Error::Dimension {
                expected: a.rows,
                got: b.len(),
            });
        }
        Ok(SmoothTerm::LeastSquares { a, b })
    }

    /// Gradient at `x`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            SmoothTerm::Zero => Ok(vec![0.0; x.len()]),
            SmoothTerm::LeastSquares { a, b } => {
                let r: Vec<f64> = a.matvec(x)?.iter().zip(b).map(|(ax, bi)| ax - bi).collect();
                a.t_matvec(&r)
            }
            SmoothTerm::Custom { grad, .. } => {
                let g = grad(x);
                if g.len() != x.len() {
                    return Err(Error::Dimension {
                        expected: x.len(),
                        got: g.len(),
                    });
                }
                Ok(g)
            }
        }
    }

    /// Upper bound on the gradient's Lipschitz constant; the squared
    /// Frobenius norm for least squares.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            SmoothTerm::Zero => 0.0,
            SmoothTerm::LeastSquares { a, .. } => a.frobenius_sq(),
            SmoothTerm::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            SmoothTerm::Zero => Ok(0.0),
            SmoothTerm::LeastSquares { a, b } => Ok(0.5
                * a.matvec(x)?
                    .iter()
                    .zip(b)
                    .map(|(ax, bi)| (ax - bi) * (ax - bi))
                    .sum::<f64>()),
            SmoothTerm::Custom { .. } => {
                Err(Error::Parameter("custom smooth term has no value".into()))
            }
        }
    }
}

/// Selection rule when a coordinate's prox is multivalued.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// Keep the current coordinate if it is in the set, else the smallest magnitude.
    #[default]
    KeepCurrentIfMember,
    SmallestMagnitude,
    LargestMagnitude,
}

impl FromStr for TieRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep-current-if-member" => Ok(TieRule::KeepCurrentIfMember),
            "smallest-magnitude" => Ok(TieRule::SmallestMagnitude),
            "largest-magnitude" => Ok(TieRule::LargestMagnitude),
            _ => Err(Error::Parameter(format!(
                "unknown tie rule '{s}' (keep-current-if-member, smallest-magnitude, largest-magnitude)"
            ))),
        }
    }
}

fn smallest(set: &SetValue) -> f64 {
    match set {
        SetValue::Finite { points } => points.iter().cloned().fold(f64::NAN, |a, p| {
            if a.is_nan() || p.abs() < a.abs() {
                p
            } else {
                a
            }
        }),
        _ => 0f64.clamp(set.lo(), set.hi()),
    }
}

fn largest(set: &SetValue) -> f64 {
    let (lo, hi) = (set.lo(), set.hi());
    match set {
        SetValue::Finite { points } => points.iter().cloned().fold(f64::NAN, |a, p| {
            if a.is_nan() || p.abs() > a.abs() {
                p
            } else {
                a
            }
        }),
        _ if hi.abs() >= lo.abs() => hi,
        _ => lo,
    }
}

/// A point of `set` chosen by `rule`; `current` is the coordinate before the step.
pub fn select(set: &SetValue, rule: TieRule, current: f64) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Contract("prox is empty".into()));
    }
    let v = match rule {
        TieRule::KeepCurrentIfMember if set.contains(current, 0.0) => current,
        TieRule::KeepCurrentIfMember | TieRule::SmallestMagnitude => smallest(set),
        TieRule::LargestMagnitude => largest(set),
    };
    if !v.is_finite() {
        return Err(Error::Contract(format!("no finite selection from {set}")));
    }
    Ok(v)
}

/// Rejects `lambda` outside `(0, min(1/L_g, lambda_f))`.
pub fn check_step(f: &SeparableFunction, g: &SmoothTerm, lambda: f64) -> Result<()> {
    let lg = g.lipschitz_bound();
    let mut bound = if lg > 0.0 { 1.0 / lg } else { f64::INFINITY };
    bound = bound.min(f.known_threshold().to_f64());
    if !(lambda > 0.0 && lambda < bound) {
        return Err(Error::StepSize { lambda, bound });
    }
    Ok(())
}

/// One step with the number of multivalued coordinates resolved by the tie rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub x: Vec<f64>,
    pub ties: usize,
}

/// `P_lambda f (x - lambda grad g(x))`, coordinatewise.
pub fn prox_gradient_step(
    f: &SeparableFunction,
    g: &SmoothTerm,
    lambda: f64,
    x: &[f64],
    tie_rule: TieRule,
    oracle: &Oracle,
) -> Result<Step> {
    check_step(f, g, lambda)?;
    if x.len() != f.dim() {
        return Err(Error::Dimension {
            expected: f.dim(),
            got: x.len(),
        });
    }
    let grad = g.gradient(x)?;
    let mut ties = 0;
    let mut out = Vec::with_capacity(x.len());
    for ((fi, &xi), gi) in f.components.iter().zip(x).zip(grad) {
        let set = oracle.prox(fi, lambda, xi - lambda * gi)?;
        if !set.is_singleton(TIE_WIDTH) {
            ties += 1;
            debug!("prox tie {set} at coordinate value {xi}");
        }
        out.push(select(&set, tie_rule, xi)?);
    }
    Ok(Step { x: out, ties })
}

/// Per-coordinate distance from `-grad g(x)_i` to the level subdifferential
/// of `f_i` at `x_i`, from the direct oracle; empty sets give `sentinel`.
pub fn residual_certificate_parts(
    f: &SeparableFunction,
    g: &SmoothTerm,
    lambda: f64,
    x: &[f64],
    sentinel: f64,
    oracle: &Oracle,
) -> Result<Vec<f64>> {
    if x.len() != f.dim() {
        return Err(Error::Dimension {
            expected: f.dim(),
            got: x.len(),
        });
    }
    let grad = g.gradient(x)?;
    f.components
        .iter()
        .zip(x)
        .zip(grad)
        .map(|((fi, &xi), gi)| {
            Ok(oracle
                .subdiff_direct(fi, lambda, xi)?
                .distance(-gi)
                .unwrap_or(sentinel))
        })
        .collect()
}

/// Largest coordinate defect; zero at a lambda-level critical point.
pub fn residual_certificate(
    f: &SeparableFunction,
    g: &SmoothTerm,
    lambda: f64,
    x: &[f64],
    sentinel: f64,
    oracle: &Oracle,
) -> Result<f64> {
    Ok(
        residual_certificate_parts(f, g, lambda, x, sentinel, oracle)?
            .into_iter()
            .fold(0.0, f64::max),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub lambda: f64,
    /// Largest coordinate defect.
    pub defect: f64,
    pub per_coordinate: Vec<f64>,
    pub tol: f64,
    pub verified: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverTrace {
    /// `x_1 = x0, x_2, ...`.
    pub iterates: Vec<Vec<f64>>,
    /// `|x_{k+1} - x_k|`.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Multivalued prox coordinates met along the way.
    pub ties: usize,
    pub certificate: Certificate,
}

impl SolverTrace {
    pub fn last(&self) -> &[f64] {
        self.iterates.last().unwrap()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Stop when the iterate residual drops to this.
    pub tol: f64,
    pub tie_rule: TieRule,
    pub cert_tol: f64,
    pub sentinel: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: 1000,
            tol: 1e-12,
            tie_rule: TieRule::default(),
            cert_tol: 1e-8,
            sentinel: DEFAULT_SENTINEL,
        }
    }
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Proximal gradient iteration from `x0`, certified at its last iterate.
pub fn prox_gradient_solve(
    f: &SeparableFunction,
    g: &SmoothTerm,
    lambda: f64,
    x0: &[f64],
    opts: &SolveOptions,
    oracle: &Oracle,
) -> Result<SolverTrace> {
    check_step(f, g, lambda)?;
    let mut iterates = vec![x0.to_vec()];
    let mut residuals = Vec::new();
    let mut ties = 0;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let x = iterates.last().unwrap();
        let step = prox_gradient_step(f, g, lambda, x, opts.tie_rule, oracle)?;
        ties += step.ties;
        let r = norm_diff(&step.x, x);
        residuals.push(r);
        iterates.push(step.x);
        if r <= opts.tol {
            converged = true;
            break;
        }
    }
    if ties > 0 {
        warn!(
            "{ties} multivalued prox coordinates resolved by {:?}",
            opts.tie_rule
        );
    }
    let last = iterates.last().unwrap();
    let parts = residual_certificate_parts(f, g, lambda, last, opts.sentinel, oracle)?;
    let defect = parts.iter().cloned().fold(0.0, f64::max);
    let certificate = Certificate {
        lambda,
        defect,
        per_coordinate: parts,
        tol: opts.cert_tol,
        verified: converged && defect <= opts.cert_tol,
    };
    Ok(SolverTrace {
        iterates,
        residuals,
        converged,
        ties,
        certificate,
    })
}

/// Relaxation parameters `mu_k`; a finite list repeats its last value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Schedule {
    Constant(f64),
    List(Vec<f64>),
}

impl Schedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Schedule::Constant(m) => *m,
            Schedule::List(v) => v[k.min(v.len() - 1)],
        }
    }

    fn tail(&self) -> f64 {
        self.at(usize::MAX)
    }

    /// Rejects values outside `[0, 1]` and schedules that end in zero. Returns
    /// `false` when the tail is 1, so that `sum mu (1 - mu)` is finite.
    pub fn check(&self) -> Result<bool> {
        let vals: &[f64] = match self {
            Schedule::Constant(m) => std::slice::from_ref(m),
            Schedule::List(v) if v.is_empty() => {
                return Err(Error::Parameter("empty schedule".into()))
            }
            Schedule::List(v) => v,
        };
        if let Some(m) = vals.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::Parameter(format!(
                "relaxation parameter {m} outside [0, 1]"
            )));
        }
        if self.tail() == 0.0 {
            return Err(Error::Parameter(
                "schedule ends in zeros: sum mu_k (1 - mu_k) is finite".into(),
            ));
        }
        Ok(self.tail() < 1.0)
    }
}

#[derive(Clone, Debug)]
pub struct KmOptions {
    pub mu: Schedule,
    /// Open ball `C` the iterates must stay in.
    pub center: Vec<f64>,
    pub radius: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Grid points scanned for fixed points of a scalar prox.
    pub fixed_scan: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KmStatus {
    Converged,
    MaxIter,
    /// The prox was multivalued at an iterate.
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct KmTrace {
    pub iterates: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub status: KmStatus,
    /// False when the schedule lies outside `sum mu (1 - mu) = inf`.
    pub schedule_in_hypothesis: bool,
    /// Fixed points the Fejer audit measured against.
    pub fejer_points: Vec<Vec<f64>>,
    /// Largest `|x_{k+1} - p| - |x_k - p|` over points and steps.
    pub fejer_max_violation: f64,
    pub fejer_ok: bool,
    /// `P(x_last)`, when it is a fixed point in the closure of `C`.
    pub limit: Option<Vec<f64>>,
    /// Every coordinate of the limit passes the global minimum test.
    pub global_min: Option<bool>,
}

fn single_prox(
    f: &SeparableFunction,
    lambda: f64,
    x: &[f64],
    oracle: &Oracle,
) -> Result<Option<Vec<f64>>> {
    let mut out = Vec::with_capacity(x.len());
    for (fi, &xi) in f.components.iter().zip(x) {
        let p = oracle.prox(fi, lambda, xi)?;
        if !p.is_singleton(TIE_WIDTH) {
            return Ok(None);
        }
        out.push(p.center().unwrap());
    }
    Ok(Some(out))
}

/// `x_{k+1} = mu_k P(x_k) + (1 - mu_k) x_k` inside the ball `C`, with a
/// Fejer audit against the detected fixed points and a certified limit.
pub fn km_iterate(
    f: &SeparableFunction,
    lambda: f64,
    x0: &[f64],
    opts: &KmOptions,
    oracle: &Oracle,
) -> Result<KmTrace> {
    let in_hypothesis = opts.mu.check()?;
    if !in_hypothesis {
        warn!("relaxation schedule ends at 1: sum mu_k (1 - mu_k) is finite");
    }
    let n = f.dim();
    for v in [x0.len(), opts.center.len()] {
        if v != n {
            return Err(Error::Dimension {
                expected: n,
                got: v,
            });
        }
    }
    if !(opts.radius > 0.0) {
        return Err(Error::Parameter("ball radius must be positive".into()));
    }
    if let ExtReal::Finite(t) = f.known_threshold() {
        if lambda >= t {
            return Err(Error::ProxBound(format!(
                "lambda = {lambda} is not below the threshold {t}"
            )));
        }
    }
    let dist_c = |x: &[f64]| norm_diff(x, &opts.center);
    if dist_c(x0) >= opts.radius {
        return Err(Error::Contract(format!("x0 = {x0:?} is not in C")));
    }

    let mut iterates = vec![x0.to_vec()];
    let mut residuals = Vec::new();
    let mut status = KmStatus::MaxIter;
    for k in 0..opts.max_iter {
        let x = iterates.last().unwrap();
        let Some(p) = single_prox(f, lambda, x, oracle)? else {
            status = KmStatus::Inconclusive;
            break;
        };
        let mu = opts.mu.at(k);
        let next: Vec<f64> = p
            .iter()
            .zip(x)
            .map(|(pi, xi)| mu * pi + (1.0 - mu) * xi)
            .collect();
        if dist_c(&next) >= opts.radius {
            return Err(Error::Contract(format!(
                "iterate {} = {next:?} left C",
                k + 2
            )));
        }
        let r = norm_diff(&next, x);
        residuals.push(r);
        iterates.push(next);
        if r <= opts.tol {
            status = KmStatus::Converged;
            break;
        }
    }

    let closure = opts.radius * (1.0 + 1e-12);
    let fix_tol = opts.tol.max(1e-12);
    let mut fejer_points = Vec::new();
    let mut limit = None;
    if status != KmStatus::Inconclusive {
        if let Some(p) = single_prox(f, lambda, iterates.last().unwrap(), oracle)? {
            if let Some(pp) = single_prox(f, lambda, &p, oracle)? {
                if norm_diff(&pp, &p) <= fix_tol && dist_c(&p) <= closure {
                    limit = Some(p.clone());
                    fejer_points.push(p);
                }
            }
        }
    }
    if n == 1 && opts.fixed_scan > 1 {
        let g = Grid::around(opts.center[0], opts.radius, opts.fixed_scan)?;
        for t in g.points() {
            if let Some(p) = single_prox(f, lambda, &[t], oracle)? {
                if (p[0] - t).abs() <= fix_tol {
                    fejer_points.push(vec![t]);
                }
            }
        }
    }
    let mut worst = f64::NEG_INFINITY;
    for p in &fejer_points {
        for w in iterates.windows(2) {
            worst = worst.max(norm_diff(&w[1], p) - norm_diff(&w[0], p));
        }
    }
    let fejer_ok = worst <= opts.tol.max(1e-12);

    let global_min = match &limit {
        Some(x) => {
            let mut all = true;
            for (fi, &xi) in f.components.iter().zip(x) {
                let g = oracle.search(fi, xi, xi);
                let mut levels = prescan_levels(fi);
                levels.push(lambda);
                all &= global_min_test(fi, xi, &levels, &g)?;
            }
            Some(all)
        }
        None => None,
    };

    Ok(KmTrace {
        iterates,
        residuals,
        status,
        schedule_in_hypothesis: in_hypothesis,
        fejer_points,
        fejer_max_violation: if worst.is_finite() { worst } else { 0.0 },
        fejer_ok,
        limit,
        global_min,
    })
}

/// Default step `0.9 / |A|_F^2` of the best-subset solver.
pub fn default_bss_lambda(a: &Matrix) -> f64 {
    0.9 / a.frobenius_sq()
}

/// `gamma |x|_0 + |Ax - b|^2 / 2` by iterative hard thresholding, from
/// `x0` or zero.
pub fn best_subset(
    a: &Matrix,
    b: &[f64],
    gamma: f64,
    lambda: Option<f64>,
    x0: Option<&[f64]>,
    opts: &SolveOptions,
    oracle: &Oracle,
) -> Result<SolverTrace> {
    let lambda = lambda.unwrap_or_else(|| default_bss_lambda(a));
    let f = SeparableFunction::repeat(
        crate::catalog::Entry::ScaledL0 { gamma }.into(),
        a.shape().1,
    )?;
    let g = SmoothTerm::least_squares(a.clone(), b.to_vec())?;
    let zero = vec![0.0; a.shape().1];
    prox_gradient_solve(&f, &g, lambda, x0.unwrap_or(&zero), opts, oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::ScalarFn;

    fn sep(s: &str, n: usize) -> SeparableFunction {
        SeparableFunction::repeat(s.parse::<ScalarFn>().unwrap(), n).unwrap()
    }

    fn eye_ls(b: Vec<f64>) -> SmoothTerm {
        SmoothTerm::least_squares(Matrix::identity(b.len()), b).unwrap()
    }

    #[test]
    fn matrix_products() {
        let a = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(a.matvec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0, 11.0]);
        assert_eq!(a.t_matvec(&[1.0, 0.0, 1.0]).unwrap(), vec![6.0, 8.0]);
        assert_eq!(a.frobenius_sq(), 91.0);
        assert!(Matrix::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn hard_threshold_step() {
        let o = Oracle::default();
        // Identity least squares has |A|_F^2 = 2, so steps below 1/2.
        let s = prox_gradient_step(
            &sep("scaled_l0:gamma=1", 2),
            &eye_ls(vec![1.0, 0.0]),
            0.4,
            &[1.0, 0.0],
            TieRule::default(),
            &o,
        )
        .unwrap();
        assert_eq!(s.x, vec![1.0, 0.0]);
        let s = prox_gradient_step(
            &sep("quad:sigma=1", 2),
            &SmoothTerm::Zero,
            1.0,
            &[2.0, -2.0],
            TieRule::default(),
            &o,
        )
        .unwrap();
        assert_eq!(s.x, vec![1.0, -1.0]);
        let r = prox_gradient_step(
            &sep("l0", 2),
            &eye_ls(vec![1.0, 0.0]),
            0.5,
            &[1.0, 0.0],
            TieRule::default(),
            &o,
        );
        assert!(matches!(r, Err(Error::StepSize { .. })));
    }

    #[test]
    fn tie_rules() {
        let set = SetValue::finite(vec![0.0, 2.0], 0.0);
        assert_eq!(
            select(&set, TieRule::KeepCurrentIfMember, 2.0).unwrap(),
            2.0
        );
        assert_eq!(
            select(&set, TieRule::KeepCurrentIfMember, 1.0).unwrap(),
            0.0
        );
        assert_eq!(select(&set, TieRule::LargestMagnitude, 0.0).unwrap(), 2.0);
        assert_eq!(
            select(
                &SetValue::interval(-1.0, 3.0),
                TieRule::SmallestMagnitude,
                5.0
            )
            .unwrap(),
            0.0
        );
        assert_eq!(
            select(
                &SetValue::interval(-1.0, 3.0),
                TieRule::LargestMagnitude,
                5.0
            )
            .unwrap(),
            3.0
        );
        assert_eq!(
            "largest-magnitude".parse::<TieRule>().unwrap(),
            TieRule::LargestMagnitude
        );
    }

    #[test]
    fn exact_solution_is_fixed() {
        let o = Oracle::default();
        let a = Matrix::from_rows(vec![vec![2.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let x = [0.5, -1.0];
        let b = a.matvec(&x).unwrap();
        let g = SmoothTerm::least_squares(a, b).unwrap();
        let s = prox_gradient_step(&sep("zero", 2), &g, 0.1, &x, TieRule::default(), &o).unwrap();
        assert_eq!(s.x, x.to_vec());
    }

    #[test]
    fn linear_rate_under_strong_convexity() {
        let o = Oracle::default();
        for (sigma, lambda) in [(1.0, 1.0), (2.0, 0.5), (0.5, 1.0)] {
            let f = sep(&format!("quad:sigma={sigma}"), 1);
            let opts = SolveOptions {
                max_iter: 30,
                tol: 0.0,
                ..SolveOptions::default()
            };
            let t = prox_gradient_solve(&f, &SmoothTerm::Zero, lambda, &[1.0], &opts, &o).unwrap();
            let rate = 1.0 / (1.0 + lambda * sigma);
            for w in t.iterates.windows(2).take(20) {
                assert!((w[1][0] / w[0][0] - rate).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn certificates() {
        let o = Oracle::default();
        let c = residual_certificate(
            &sep("quad:sigma=1", 1),
            &SmoothTerm::Zero,
            1.0,
            &[0.0],
            DEFAULT_SENTINEL,
            &o,
        )
        .unwrap();
        assert!(c < 1e-12);
        let c = residual_certificate(
            &sep("l0", 1),
            &SmoothTerm::Zero,
            1.0,
            &[1.0],
            DEFAULT_SENTINEL,
            &o,
        )
        .unwrap();
        assert_eq!(c, DEFAULT_SENTINEL);
    }

    #[test]
    fn pgm_l0_scalar() {
        let o = Oracle::default();
        let t = prox_gradient_solve(
            &sep("l0", 1),
            &SmoothTerm::Zero,
            1.0,
            &[0.9],
            &SolveOptions::default(),
            &o,
        )
        .unwrap();
        assert_eq!(t.last(), &[0.0]);
        assert!(t.certificate.verified);
    }

    fn km_opts(mu: Schedule, c: f64, r: f64) -> KmOptions {
        KmOptions {
            mu,
            center: vec![c],
            radius: r,
            max_iter: 200,
            tol: 1e-13,
            fixed_scan: 1001,
        }
    }

    #[test]
    fn km_on_l0() {
        let o = Oracle::default();
        let t = km_iterate(
            &sep("l0", 1),
            1.0,
            &[0.9],
            &km_opts(Schedule::Constant(0.5), 0.5, 0.5),
            &o,
        )
        .unwrap();
        for (k, x) in t.iterates.iter().enumerate() {
            assert!((x[0] - 0.9 * 0.5f64.powi(k as i32)).abs() < 1e-15);
        }
        assert_eq!(t.status, KmStatus::Converged);
        assert!(t.fejer_ok);
        assert_eq!(t.limit, Some(vec![0.0]));
        assert_eq!(t.global_min, Some(true));
    }

    #[test]
    fn km_schedules() {
        let o = Oracle::default();
        let r = km_iterate(
            &sep("l0", 1),
            1.0,
            &[0.9],
            &km_opts(Schedule::Constant(0.0), 0.5, 0.5),
            &o,
        );
        assert!(matches!(r, Err(Error::Parameter(_))));
        let t = km_iterate(
            &sep("quad:sigma=1", 1),
            1.0,
            &[4.0],
            &km_opts(Schedule::Constant(1.0), 2.5, 2.5),
            &o,
        )
        .unwrap();
        assert!(!t.schedule_in_hypothesis);
        assert_eq!(t.iterates[1], vec![2.0]);
        assert!(t.limit.unwrap()[0].abs() < 1e-12);
        // Escaping C is a broken hypothesis.
        let r = km_iterate(
            &sep("quad:sigma=1", 1),
            1.0,
            &[4.0],
            &km_opts(Schedule::Constant(1.0), 4.0, 1.0),
            &o,
        );
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn bss_identity() {
        let o = Oracle::default();
        let a = Matrix::identity(2);
        let t = best_subset(
            &a,
            &[1.0, 0.3],
            0.5,
            Some(0.4),
            Some(&[0.9, 0.25]),
            &SolveOptions::default(),
            &o,
        )
        .unwrap();
        assert!(t.converged && t.certificate.verified);
        assert!((t.last()[0] - 1.0).abs() < 1e-11 && t.last()[1] == 0.0);
        // Zero is also critical: both coordinates start below the threshold.
        let t = best_subset(
            &a,
            &[1.0, 0.3],
            0.5,
            Some(0.4),
            None,
            &SolveOptions::default(),
            &o,
        )
        .unwrap();
        assert_eq!(t.last(), &[0.0, 0.0]);
        assert!(t.certificate.verified);
    }
}
