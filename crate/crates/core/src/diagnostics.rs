//! Sampled-neighbourhood tests of the properties that characterise
//! variational (strong) convexity: firm nonexpansiveness and averagedness of
//! the prox, cocoercivity, relative monotonicity of the level subdifferential,
//! convexity of the envelope, plus the two-sided quadratic bound test for
//! Lipschitz gradients.
//!
//! Each test reports the worst defect of its defining inequality. A test
//! holds when that defect is at most the tolerance; a multivalued prox sample
//! makes single-valued tests inconclusive rather than failing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::ScalarFn;
use crate::resolve::Oracle;
use crate::subdiff::{level_subdiff_direct, SubdiffQuery};
use crate::types::{Grid, SetValue};

/// Default tolerance on inequality defects.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Prox sets narrower than this count as single-valued.
pub const SINGLE_TOL: f64 = 1e-9;

/// Open interval `(center - radius, center + radius)` and the pair sampler.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NeighborhoodSpec {
    pub center: f64,
    pub radius: f64,
    pub sample_pairs: usize,
    pub seed: u64,
    pub tol: f64,
}

impl NeighborhoodSpec {
    pub fn new(center: f64, radius: f64) -> Self {
        NeighborhoodSpec {
            center,
            radius,
            sample_pairs: 200,
            seed: 0,
            tol: DEFAULT_TOL,
        }
    }

    pub fn pairs(mut self, n: usize) -> Self {
        self.sample_pairs = n;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite() && self.center.is_finite()) {
            return Err(Error::Parameter(format!(
                "bad neighbourhood ({}, {})",
                self.center, self.radius
            )));
        }
        if self.sample_pairs == 0 {
            return Err(Error::Parameter("need at least one sample pair".into()));
        }
        Ok(())
    }

    /// Seeded, shifted Halton pairs (bases 2 and 3) inside the neighbourhood.
    pub fn sample(&self) -> Vec<(f64, f64)> {
        sample_pairs(
            self.center - self.radius,
            self.center + self.radius,
            self.sample_pairs,
            self.seed,
        )
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// `n` low-discrepancy pairs in the open interval `(a, b)`.
pub fn sample_pairs(a: f64, b: f64, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (s1, s2): (f64, f64) = (rng.gen(), rng.gen());
    let map = |u: f64| a + (b - a) * u.clamp(1e-9, 1.0 - 1e-9);
    (1..=n as u64)
        .map(|i| {
            let u = (radical_inverse(i, 2) + s1).fract();
            let w = (radical_inverse(i, 3) + s2).fract();
            (map(u), map(w))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

/// Outcome of one property test.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyRecord {
    pub name: String,
    pub verdict: Verdict,
    pub holds: bool,
    /// Largest defect of the defining inequality over all samples.
    pub worst_violation: f64,
    pub tol: f64,
    pub witness: Option<(f64, f64)>,
    /// A measured constant, when the test estimates one.
    pub measured: Option<f64>,
    pub note: Option<String>,
}

impl PropertyRecord {
    fn from_defects(name: &str, tol: f64, worst: f64, witness: Option<(f64, f64)>) -> Self {
        let verdict = if worst <= tol {
            Verdict::Holds
        } else {
            Verdict::Fails
        };
        PropertyRecord {
            name: name.to_string(),
            verdict,
            holds: verdict == Verdict::Holds,
            worst_violation: worst,
            tol,
            witness,
            measured: None,
            note: None,
        }
    }

    fn inconclusive(name: &str, tol: f64, witness: (f64, f64), note: String) -> Self {
        PropertyRecord {
            name: name.to_string(),
            verdict: Verdict::Inconclusive,
            holds: false,
            worst_violation: f64::NAN,
            tol,
            witness: Some(witness),
            measured: None,
            note: Some(note),
        }
    }

    fn measured(mut self, m: f64) -> Self {
        self.measured = Some(m);
        self
    }
}

/// All records of one diagnostics run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DiagnosticsReport {
    pub records: Vec<PropertyRecord>,
}

impl DiagnosticsReport {
    /// Fails beat inconclusive, which beats holds.
    pub fn overall(&self) -> Verdict {
        if self.records.iter().any(|r| r.verdict == Verdict::Fails) {
            Verdict::Fails
        } else if self
            .records
            .iter()
            .any(|r| r.verdict == Verdict::Inconclusive)
        {
            Verdict::Inconclusive
        } else {
            Verdict::Holds
        }
    }
}

// Worst defect over pairs with its witness.
fn worst<I: Iterator<Item = (f64, (f64, f64))>>(it: I) -> (f64, Option<(f64, f64)>) {
    it.fold((f64::NEG_INFINITY, None), |acc, (d, w)| {
        if d > acc.0 {
            (d, Some(w))
        } else {
            acc
        }
    })
}

struct ProxSamples {
    pairs: Vec<(f64, f64)>,
    /// Prox values at the two points of each pair.
    values: Vec<(SetValue, SetValue)>,
}

impl ProxSamples {
    fn new(f: &ScalarFn, lambda: f64, pairs: Vec<(f64, f64)>, oracle: &Oracle) -> Result<Self> {
        let values = pairs
            .par_iter()
            .map(|&(a, b)| Ok((oracle.prox(f, lambda, a)?, oracle.prox(f, lambda, b)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ProxSamples { pairs, values })
    }

    /// Single-valued prox pairs, or the first pair where the prox is multivalued.
    fn single(&self) -> std::result::Result<Vec<(f64, f64, f64, f64)>, (f64, f64)> {
        let mut out = Vec::with_capacity(self.pairs.len());
        for (&(x1, x2), (p1, p2)) in self.pairs.iter().zip(&self.values) {
            if !p1.is_singleton(SINGLE_TOL) {
                return Err((x1, x2));
            }
            if !p2.is_singleton(SINGLE_TOL) {
                return Err((x2, x1));
            }
            out.push((x1, x2, p1.center().unwrap(), p2.center().unwrap()));
        }
        Ok(out)
    }
}

fn multivalued_note(at: f64) -> String {
    format!("prox is multivalued at x = {at}")
}

fn single_valued_test<F>(name: &str, s: &ProxSamples, tol: f64, defect: F) -> PropertyRecord
where
    F: Fn(f64, f64, f64, f64) -> f64,
{
    match s.single() {
        Err(w) => PropertyRecord::inconclusive(name, tol, w, multivalued_note(w.0)),
        Ok(v) => {
            let (d, w) = worst(
                v.iter()
                    .map(|&(x1, x2, u1, u2)| (defect(x1, x2, u1, u2), (x1, x2))),
            );
            PropertyRecord::from_defects(name, tol, d, w)
        }
    }
}

/// `|Pa - Pb|^2 <= <a - b, Pa - Pb>` on sampled pairs.
pub fn firm_nonexpansive_test(
    f: &ScalarFn,
    lambda: f64,
    nbhd: &NeighborhoodSpec,
    oracle: &Oracle,
) -> Result<PropertyRecord> {
    nbhd.validate()?;
    let s = ProxSamples::new(f, lambda, nbhd.sample(), oracle)?;
    Ok(single_valued_test(
        "firm_nonexpansive",
        &s,
        nbhd.tol,
        |x1, x2, u1, u2| {
            let du = u1 - u2;
            du * du - (x1 - x2) * du
        },
    ))
}

/// `|Pa - Pb| <= |a - b|` on sampled pairs.
pub fn nonexpansive_test(
    f: &ScalarFn,
    lambda: f64,
    nbhd: &NeighborhoodSpec,
    oracle: &Oracle,
) -> Result<PropertyRecord> {
    nbhd.validate()?;
    let s = ProxSamples::new(f, lambda, nbhd.sample(), oracle)?;
    Ok(single_valued_test(
        "nonexpansive",
        &s,
        nbhd.tol,
        |x1, x2, u1, u2| (u1 - u2).abs() - (x1 - x2).abs(),
    ))
}

/// Grid step of the averagedness search.
pub const ALPHA_STEP: f64 = 1e-3;

/// Smallest `alpha` on a `1e-3` grid with `P = (1 - alpha) Id + alpha N`
/// for a nonexpansive `N`, reported in `measured`.
pub fn averaged_witness(
    f: &ScalarFn,
    lambda: f64,
    nbhd: &NeighborhoodSpec,
    oracle: &Oracle,
) -> Result<PropertyRecord> {
    nbhd.validate()?;
    let s = ProxSamples::new(f, lambda, nbhd.sample(), oracle)?;
    let name = "averaged";
    let v = match s.single() {
        Err(w) => {
            return Ok(PropertyRecord::inconclusive(
                name,
                nbhd.tol,
                w,
                multivalued_note(w.0),
            ))
        }
        Ok(v) => v,
    };
    let defect_at = |alpha: f64| {
        worst(v.iter().map(|&(x1, x2, u1, u2)| {
            let dx = x1 - x2;
            let dn = ((u1 - u2) - (1.0 - alpha) * dx) / alpha;
            (dn.abs() - dx.abs(), (x1, x2))
        }))
    };
    let steps = (1.0 / ALPHA_STEP).round() as usize;
    for k in 1..steps {
        let alpha = k as f64 / steps as f64;
        let (d, w) = defect_at(alpha);
        if d <= nbhd.tol {
            return Ok(PropertyRecord::from_defects(name, nbhd.tol, d, w).measured(alpha));
        }
    }
    let (d, w) = defect_at(1.0 - ALPHA_STEP);
    Ok(PropertyRecord::from_defects(name, nbhd.tol, d, w))
}

/// Which operator a cocoercivity test looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CocoerciveTarget {
    Prox,
    /// `(Id - P) / lambda`, the envelope gradient.
    EnvelopeGradient,
}

/// `gamma |Ta - Tb|^2 <= <a - b, Ta - Tb>` on sampled pairs.
pub fn cocoercive_test(
    f: &ScalarFn,
    lambda: f64,
    nbhd: &NeighborhoodSpec,
    gamma: f64,
    target: CocoerciveTarget,
    oracle: &Oracle,
) -> Result<PropertyRecord> {
    nbhd.validate()?;
    let s = ProxSamples::new(f, lambda, nbhd.sample(), oracle)?;
    let name = match target {
        CocoerciveTarget::Prox => "cocoercive_prox",
        CocoerciveTarget::EnvelopeGradient => "cocoercive_envelope_gradient",
    };
    Ok(single_valued_test(name, &s, nbhd.tol, |x1, x2, u1, u2| {
        let dt = match target {
            CocoerciveTarget::Prox => u1 - u2,
            CocoerciveTarget::EnvelopeGradient => ((x1 - u1) - (x2 - u2)) / lambda,
        };
        gamma * dt * dt - (x1 - x2) * dt
    }))
}

/// Monotonicity (strong when `sigma > 0`) of the level subdifferential on
/// graph points `(u, (x - u)/lambda)` with `u` in the prox of sampled `x`.
/// Every selection of a multivalued prox is checked.
pub fn relative_monotone_test(
    f: &ScalarFn,
    lambda: f64,
    nbhd: &NeighborhoodSpec,
    sigma: f64,
    oracle: &Oracle,
) -> Result<PropertyRecord> {
    nbhd.validate()?;
    if sigma < 0.0 {
        return Err(Error::Parameter("sigma must be nonnegative".into()));
    }
    let s = ProxSamples::new(f, lambda, nbhd.sample(), oracle)?;
    let mut defects = Vec::new();
    for (&(x1, x2), (p1, p2)) in s.pairs.iter().zip(&s.values) {
        for u1 in p1.samples() {
            for u2 in p2.samples() {
                let (v1, v2) = ((x1 - u1) / lambda, (x2 - u2) / lambda);
                let du = u1 - u2;
                defects.push((sigma * du * du - du * (v1 - v2), (x1, x2)));
            }
        }
    }
    let (d, w) = worst(defects.into_iter());
    Ok(PropertyRecord::from_defects(
        "relative_monotone",
        nbhd.tol,
        d,
        w,
    ))
}

fn envelope_table(f: &ScalarFn, lambda: f64, xs: &[f64], oracle: &Oracle) -> Result<Vec<f64>> {
    xs.par_iter()
        .map(|&x| oracle.envelope(f, lambda, x))
        .collect()
}

/// Midpoint convexity of the envelope on a grid of `[a, b]` with `steps`
/// cells: `e((x + y)/2) <= (e(x) + e(y))/2` for all grid pairs.
pub fn envelope_convexity_test(
    f: &ScalarFn,
    lambda: f64,
    interval: (f64, f64),
    steps: usize,
    tol: f64,
    oracle: &Oracle,
) -> Result<PropertyRecord> {
    let g = Grid::new(interval.0, interval.1, steps)?;
    let xs = g.points();
    let e = envelope_table(f, lambda, &xs, oracle)?;
    let n = xs.len();
    let (d, w) = worst((0..n).flat_map(|i| {
        let (xs, e) = (&xs, &e);
        (i + 2..n).step_by(2).map(move |j| {
            let m = (i + j) / 2;
            (e[m] - 0.5 * (e[i] + e[j]), (xs[i], xs[j]))
        })
    }));
    Ok(PropertyRecord::from_defects(
        "envelope_convexity",
        tol,
        d.max(f64::MIN),
        w,
    ))
}

/// Prox Lipschitz constant `1/(1 + lambda sigma)` and envelope strong
/// convexity modulus `sigma/(1 + sigma lambda)` on the neighbourhood. Both
/// records carry the measured constant. The modulus is measured on pairs at
/// least a tenth of the radius apart, where rounding cannot swamp it.
pub fn strong_convexity_modulus_check(
    f: &ScalarFn,
    lambda: f64,
    sigma: f64,
    nbhd: &NeighborhoodSpec,
    oracle: &Oracle,
) -> Result<(PropertyRecord, PropertyRecord)> {
    nbhd.validate()?;
    if !(sigma > 0.0) {
        return Err(Error::Parameter("sigma must be positive".into()));
    }
    let lip = 1.0 / (1.0 + lambda * sigma);
    let modulus = sigma / (1.0 + sigma * lambda);
    let pairs = nbhd.sample();
    let s = ProxSamples::new(f, lambda, pairs.clone(), oracle)?;
    let lip_rec = match s.single() {
        Err(w) => {
            PropertyRecord::inconclusive("prox_lipschitz", nbhd.tol, w, multivalued_note(w.0))
        }
        Ok(v) => {
            let (d, w) = worst(
                v.iter()
                    .map(|&(x1, x2, u1, u2)| ((u1 - u2).abs() - lip * (x1 - x2).abs(), (x1, x2))),
            );
            let measured = v
                .iter()
                .filter(|t| t.0 != t.1)
                .map(|&(x1, x2, u1, u2)| (u1 - u2).abs() / (x1 - x2).abs())
                .fold(0.0, f64::max);
            PropertyRecord::from_defects("prox_lipschitz", nbhd.tol, d, w).measured(measured)
        }
    };

    let far: Vec<(f64, f64)> = pairs
        .into_iter()
        .filter(|(a, b)| (a - b).abs() >= 0.1 * nbhd.radius)
        .collect();
    let pts: Vec<f64> = far
        .iter()
        .flat_map(|&(a, b)| [a, b, 0.5 * (a + b)])
        .collect();
    let e = envelope_table(f, lambda, &pts, oracle)?;
    let mut measured = f64::INFINITY;
    let mut defects = Vec::with_capacity(far.len());
    for (k, &(a, b)) in far.iter().enumerate() {
        let (ea, eb, em) = (e[3 * k], e[3 * k + 1], e[3 * k + 2]);
        let gap = 0.5 * (ea + eb) - em;
        let d2 = (a - b) * (a - b);
        measured = measured.min(8.0 * gap / d2);
        defects.push((modulus * d2 / 8.0 - gap, (a, b)));
    }
    let (d, w) = worst(defects.into_iter());
    let mut sc = PropertyRecord::from_defects("envelope_strong_convexity", nbhd.tol, d, w);
    if measured.is_finite() {
        sc = sc.measured(measured);
    }
    Ok((lip_rec, sc))
}

/// Both routes of the two-sided quadratic bound test.
#[derive(Clone, Debug, Serialize)]
pub struct SmoothnessReport {
    /// `|f(y) - f(x) - f'(x)(y - x)| <= L/2 (y - x)^2` over `x` in `U`, `y` on the grid.
    pub quadratic_bound: PropertyRecord,
    /// Nonemptiness of the level-`1/L` subdifferentials of `f` and `-f` on `U`.
    pub level_subdiff: PropertyRecord,
}

/// Interior sample points of `U` used by the smoothness tests.
pub const SMOOTH_SAMPLES: usize = 101;
/// Route disagreement only counts when the bound defect is clearly nonzero.
pub const ROUTE_MARGIN: f64 = 1e-6;

/// Two-sided quadratic bound test for an `L`-Lipschitz gradient on `U`.
/// Fails with [`Error::Inconsistent`] if the two routes disagree at a point
/// where the bound defect exceeds [`ROUTE_MARGIN`] in magnitude.
pub fn lipschitz_smooth_test(
    f: &ScalarFn,
    l: f64,
    u: (f64, f64),
    ygrid: &Grid,
    tol: f64,
) -> Result<SmoothnessReport> {
    if !(l > 0.0) || u.0 >= u.1 {
        return Err(Error::Parameter(
            "need L > 0 and a nonempty interval".into(),
        ));
    }
    let xs: Vec<f64> = (1..=SMOOTH_SAMPLES)
        .map(|i| u.0 + (u.1 - u.0) * i as f64 / (SMOOTH_SAMPLES + 1) as f64)
        .collect();
    let ys = ygrid.points();
    let neg = f.negated();
    let rows = xs
        .par_iter()
        .map(|&x| -> Result<(f64, f64, f64, bool)> {
            let fx = f.value(x)?;
            let g = f.gradient(x)?;
            let mut d = f64::NEG_INFINITY;
            let mut wy = x;
            for &y in &ys {
                let r = (f.value(y)? - fx - g * (y - x)).abs() - 0.5 * l * (y - x) * (y - x);
                if r > d {
                    d = r;
                    wy = y;
                }
            }
            let lam = 1.0 / l;
            let up = level_subdiff_direct(&SubdiffQuery {
                f,
                lambda: lam,
                x,
                grid: *ygrid,
            })?;
            let down = level_subdiff_direct(&SubdiffQuery {
                f: &neg,
                lambda: lam,
                x,
                grid: *ygrid,
            })?;
            Ok((x, wy, d, !up.is_empty() && !down.is_empty()))
        })
        .collect::<Result<Vec<_>>>()?;

    for &(x, _, d, nonempty) in &rows {
        if d.abs() > ROUTE_MARGIN && (d <= tol) != nonempty {
            return Err(Error::Inconsistent(format!(
                "quadratic bound defect {d:e} but level subdifferentials {} at x = {x}",
                if nonempty { "nonempty" } else { "empty" }
            )));
        }
    }
    let (d, w) = worst(rows.iter().map(|&(x, y, d, _)| (d, (x, y))));
    let quadratic_bound = PropertyRecord::from_defects("quadratic_bound", tol, d, w);
    let empty_at = rows.iter().find(|r| !r.3).map(|r| r.0);
    let level_subdiff = PropertyRecord {
        name: "level_subdiff_nonempty".into(),
        verdict: if empty_at.is_none() {
            Verdict::Holds
        } else {
            Verdict::Fails
        },
        holds: empty_at.is_none(),
        worst_violation: if empty_at.is_none() { 0.0 } else { 1.0 },
        tol,
        witness: empty_at.map(|x| (x, x)),
        measured: None,
        note: empty_at
            .map(|x| format!("a level-1/L subdifferential of f or -f is empty at x = {x}")),
    };
    Ok(SmoothnessReport {
        quadratic_bound,
        level_subdiff,
    })
}

/// Lipschitz continuity of `f'` with constant `L` on `U`, and firm
/// nonexpansiveness of `(2L)^{-1} (f' + L Id)`, on sampled pairs. Requires
/// the quadratic bound to hold on `U` (checked first on `ygrid`).
pub fn gradient_lipschitz_from_bound(
    f: &ScalarFn,
    l: f64,
    u: (f64, f64),
    pairs: usize,
    seed: u64,
    ygrid: &Grid,
    tol: f64,
) -> Result<(PropertyRecord, PropertyRecord)> {
    let pre = lipschitz_smooth_test(f, l, u, ygrid, tol)?;
    if !pre.quadratic_bound.holds {
        return Err(Error::Contract(format!(
            "quadratic bound with L = {l} fails on ({}, {}): defect {:e}",
            u.0, u.1, pre.quadratic_bound.worst_violation
        )));
    }
    let ps = sample_pairs(u.0, u.1, pairs, seed);
    let grads = ps
        .iter()
        .map(|&(a, b)| Ok((f.gradient(a)?, f.gradient(b)?)))
        .collect::<Result<Vec<_>>>()?;
    let (d, w) = worst(
        ps.iter()
            .zip(&grads)
            .map(|(&(a, b), &(ga, gb))| ((ga - gb).abs() - l * (a - b).abs(), (a, b))),
    );
    let lip = PropertyRecord::from_defects("gradient_lipschitz", tol, d, w);
    let (d, w) = worst(ps.iter().zip(&grads).map(|(&(a, b), &(ga, gb))| {
        let dt = ((ga + l * a) - (gb + l * b)) / (2.0 * l);
        (dt * dt - (a - b) * dt, (a, b))
    }));
    let firm = PropertyRecord::from_defects("shifted_gradient_firm_nonexpansive", tol, d, w);
    Ok((lip, firm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> ScalarFn {
        s.parse().unwrap()
    }

    #[test]
    fn samples_are_inside_and_reproducible() {
        let a = sample_pairs(-1.0, 1.0, 300, 7);
        let b = sample_pairs(-1.0, 1.0, 300, 7);
        assert_eq!(a, b);
        assert!(a
            .iter()
            .all(|&(x, y)| x > -1.0 && x < 1.0 && y > -1.0 && y < 1.0));
        assert_ne!(a, sample_pairs(-1.0, 1.0, 300, 8));
    }

    #[test]
    fn neg_abs_firmness() {
        let o = Oracle::default();
        // An isometric shift meets the inequality with equality.
        let r = firm_nonexpansive_test(&f("neg_abs"), 1.0, &NeighborhoodSpec::new(3.0, 0.5), &o)
            .unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert!(r.worst_violation.abs() < 1e-12);
        // Around the origin the prox splits into two points.
        let r = firm_nonexpansive_test(
            &f("neg_abs"),
            1.0,
            &NeighborhoodSpec::new(0.0, 0.5).pairs(400),
            &o,
        );
        let r = r.unwrap();
        assert!(
            r.verdict == Verdict::Inconclusive || r.verdict == Verdict::Fails,
            "{r:?}"
        );
    }

    #[test]
    fn quad_cocoercivity_and_averagedness() {
        let o = Oracle::default();
        let nb = NeighborhoodSpec::new(0.0, 10.0);
        let q = f("quad:sigma=1");
        let r = cocoercive_test(&q, 1.0, &nb, 2.0, CocoerciveTarget::Prox, &o).unwrap();
        assert!(r.holds);
        let r = averaged_witness(&q, 1.0, &nb, &o).unwrap();
        assert_eq!(r.measured, Some(0.25));
        let r = nonexpansive_test(&f("zero"), 1.0, &nb, &o).unwrap();
        assert!(r.holds && r.worst_violation.abs() < 1e-12);
    }

    #[test]
    fn neg_abs_is_not_monotone_near_origin() {
        let o = Oracle::default();
        let r = relative_monotone_test(
            &f("neg_abs"),
            1.0,
            &NeighborhoodSpec::new(0.0, 0.5),
            0.0,
            &o,
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Fails);
    }

    #[test]
    fn envelope_convexity_of_l0() {
        let o = Oracle::default();
        let r = envelope_convexity_test(&f("l0"), 1.0, (-1.2, 1.2), 240, 1e-12, &o).unwrap();
        assert!(r.holds);
        let r = envelope_convexity_test(&f("l0"), 1.0, (-3.0, 3.0), 600, 1e-12, &o).unwrap();
        assert!(!r.holds && r.worst_violation >= 0.5 - 1e-12, "{r:?}");
    }

    #[test]
    fn l0_strong_convexity_with_small_modulus_holds() {
        // e = x^2/2 near the origin has modulus 1, above 0.5/(1 + 0.5).
        let o = Oracle::default();
        let (lip, sc) = strong_convexity_modulus_check(
            &f("l0"),
            1.0,
            0.5,
            &NeighborhoodSpec::new(0.0, 1.2),
            &o,
        )
        .unwrap();
        assert!(lip.holds && sc.holds);
        assert!((sc.measured.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smoothness_routes() {
        let g = Grid::new(-12.0, 12.0, 4800).unwrap();
        let r = lipschitz_smooth_test(&f("sin"), 1.0, (-1.0, 1.0), &g, 1e-9).unwrap();
        assert!(r.quadratic_bound.holds && r.level_subdiff.holds);
        let r = lipschitz_smooth_test(&f("quad:sigma=1"), 1.0, (-2.0, 2.0), &g, 1e-9).unwrap();
        assert!(r.quadratic_bound.holds && r.level_subdiff.holds);
        assert!(r.quadratic_bound.worst_violation.abs() < 1e-9);
        let r = lipschitz_smooth_test(&f("l0"), 1.0, (0.1, 0.5), &g, 1e-9).unwrap();
        assert!(!r.level_subdiff.holds && !r.quadratic_bound.holds);
    }

    #[test]
    fn gradient_lipschitz() {
        let g = Grid::new(-12.0, 12.0, 4800).unwrap();
        let (lip, firm) =
            gradient_lipschitz_from_bound(&f("sin"), 1.0, (-1.0, 1.0), 200, 1, &g, 1e-9).unwrap();
        assert!(lip.holds && firm.holds);
        let err = gradient_lipschitz_from_bound(&f("sin"), 0.5, (-1.0, 1.0), 200, 1, &g, 1e-9);
        assert!(matches!(err, Err(Error::Contract(_))));
    }
}
