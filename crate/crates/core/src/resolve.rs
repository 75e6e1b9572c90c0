//! Catalog-first evaluation: closed forms where they exist, grid oracles
//! otherwise. Search windows are built around the query point.

use crate::engine::{self, OracleOptions, ProxEval};
use crate::error::Result;
use crate::function::ScalarFn;
use crate::subdiff::{level_subdiff_direct, level_subdiff_shifted, SubdiffQuery};
use crate::types::{ExtReal, Grid, SetValue};

/// How the grid oracles build their search windows.
#[derive(Clone, Copy, Debug)]
pub struct Oracle {
    pub spacing: f64,
    /// Half-width added around the queried range.
    pub pad: f64,
    pub options: OracleOptions,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle {
            spacing: 1.0 / 256.0,
            pad: 8.0,
            options: OracleOptions::default(),
        }
    }
}

impl Oracle {
    pub fn with_spacing(spacing: f64) -> Self {
        Oracle {
            spacing,
            ..Oracle::default()
        }
    }

    /// Search grid covering `[a - pad, b + pad]` and the function's domain
    /// hint, aligned to multiples of the spacing.
    pub fn search(&self, f: &ScalarFn, a: f64, b: f64) -> Grid {
        let h = self.spacing;
        let (mut lo, mut hi) = (a.min(b) - self.pad, a.max(b) + self.pad);
        if let Some((d0, d1)) = f.domain_hint() {
            lo = lo.min(d0 - 1.0);
            hi = hi.max(d1 + 1.0);
        }
        let lo = (lo / h).floor() * h;
        let steps = ((hi - lo) / h).ceil().max(1.0) as usize;
        Grid {
            lo,
            hi: lo + steps as f64 * h,
            steps,
        }
    }

    pub fn plateau_tol(&self, lambda: f64) -> f64 {
        10.0 * self.spacing * self.spacing / (2.0 * lambda)
    }

    /// Grid-only envelope and prox.
    pub fn prox_oracle(&self, f: &ScalarFn, lambda: f64, x: f64) -> Result<ProxEval> {
        let g = self.search(f, x, x);
        engine::prox_eval(f, lambda, x, &g, self.plateau_tol(lambda), &self.options)
    }

    pub fn prox(&self, f: &ScalarFn, lambda: f64, x: f64) -> Result<SetValue> {
        if let Some(e) = f.entry() {
            if let Some(p) = e.prox(lambda, x)? {
                return Ok(p);
            }
        }
        self.prox_oracle(f, lambda, x).map(|e| e.set)
    }

    pub fn envelope(&self, f: &ScalarFn, lambda: f64, x: f64) -> Result<f64> {
        if let Some(e) = f.entry() {
            if let Some(v) = e.envelope(lambda, x)? {
                return Ok(v);
            }
        }
        self.prox_oracle(f, lambda, x).map(|e| e.value)
    }

    pub fn subdiff_direct(&self, f: &ScalarFn, lambda: f64, x: f64) -> Result<SetValue> {
        level_subdiff_direct(&SubdiffQuery {
            f,
            lambda,
            x,
            grid: self.search(f, x, x),
        })
    }

    pub fn subdiff_shifted(&self, f: &ScalarFn, lambda: f64, x: f64) -> Result<SetValue> {
        level_subdiff_shifted(&SubdiffQuery {
            f,
            lambda,
            x,
            grid: self.search(f, x, x),
        })
    }

    pub fn level_subdiff(&self, f: &ScalarFn, lambda: f64, x: f64) -> Result<SetValue> {
        if let Some(e) = f.entry() {
            if let Some(d) = e.level_subdiff(lambda, x)? {
                return Ok(d);
            }
        }
        self.subdiff_direct(f, lambda, x)
    }

    pub fn hull(&self, f: &ScalarFn, lambda: f64, x: f64) -> Result<ExtReal> {
        if let Some(e) = f.entry() {
            if let Some(h) = e.hull(lambda, x)? {
                return Ok(h);
            }
        }
        engine::proximal_hull(f, lambda, x, &self.search(f, x, x))
    }

    /// Hull at many points; one oracle table serves the whole batch.
    pub fn hull_many(&self, f: &ScalarFn, lambda: f64, xs: &[f64]) -> Result<Vec<ExtReal>> {
        if let Some(e) = f.entry() {
            if e.hull(lambda, 0.0)?.is_some() {
                return xs
                    .iter()
                    .map(|&x| Ok(e.hull(lambda, x)?.unwrap()))
                    .collect();
            }
        }
        let a = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let b = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        engine::hull_sweep(f, lambda, xs, &self.search(f, a, b))
    }
}
