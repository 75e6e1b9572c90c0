//! `levelprox` command-line front-end.
//!
//! Exit codes: 0 success, 1 usage error, 2 a tested property fails,
//! 3 inconclusive, 4 numerical or contract error.
//!
//! CSV cells are written with 17 significant digits. Unbounded ends are
//! written as `inf` / `-inf`; `nan` marks the bounds of an empty set and the
//! residual of the first iterate, which has no predecessor. Every file
//! written through `--out` gets a `<out>.manifest.json` next to it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use levelprox::diagnostics::{
    averaged_witness, cocoercive_test, envelope_convexity_test, firm_nonexpansive_test,
    gradient_lipschitz_from_bound, lipschitz_smooth_test, nonexpansive_test,
    relative_monotone_test, strong_convexity_modulus_check, CocoerciveTarget, DiagnosticsReport,
    NeighborhoodSpec, PropertyRecord, Verdict,
};
use levelprox::engine::{estimate_threshold, estimate_threshold_growth};
use levelprox::function::CATALOG_LISTING;
use levelprox::integrate::{integrate_hull, ChainConfig};
use levelprox::selftest;
use levelprox::solvers::{
    best_subset, km_iterate, prox_gradient_solve, KmOptions, KmStatus, Matrix, Schedule,
    SmoothTerm, SolveOptions, SolverTrace, TieRule,
};
use levelprox::subdiff::critical_lambda_bar;
use levelprox::{Error, ExtReal, Grid, Oracle, ScalarFn, SeparableFunction, SetValue};

const EXIT_USAGE: i32 = 1;
const EXIT_FAIL: i32 = 2;
const EXIT_INCONCLUSIVE: i32 = 3;
const EXIT_NUMERIC: i32 = 4;

#[derive(Parser)]
#[command(
    name = "levelprox",
    version,
    about = "Level proximal subdifferential toolkit"
)]
struct Cli {
    /// Spacing of the oracle search grids.
    #[arg(long, global = true, default_value_t = 1.0 / 256.0)]
    spacing: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prox set at a point.
    Prox {
        #[command(subcommand)]
        op: EvalOnly,
    },
    /// Moreau envelope (with the prox set) at a point or over a range.
    Envelope {
        #[command(subcommand)]
        op: EvalOrSweep,
    },
    /// Proximal hull at a point or over a range.
    Hull {
        #[command(subcommand)]
        op: EvalOrSweep,
    },
    /// Level proximal subdifferential at a point or over a range.
    Subdiff {
        #[command(subcommand)]
        op: SubdiffOp,
    },
    /// Bracket the prox-boundedness threshold.
    Threshold(ThresholdArgs),
    /// Largest level at which a point is still level-critical.
    Critical(CriticalArgs),
    /// Sampled variational-convexity diagnostics.
    Diagnose(DiagnoseArgs),
    /// Recover the proximal hull from subgradients by chain sums.
    Integrate(IntegrateArgs),
    /// Proximal gradient, Krasnoselskii-Mann and best-subset solvers.
    Solve {
        #[command(subcommand)]
        op: SolveOp,
    },
    /// Run the acceptance battery.
    Selftest,
}

#[derive(Args)]
struct PointArgs {
    #[arg(long)]
    function: String,
    #[arg(long)]
    lambda: f64,
    #[arg(long, allow_hyphen_values = true)]
    point: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    function: String,
    #[arg(long)]
    lambda: f64,
    #[arg(long, num_args = 2, allow_hyphen_values = true, value_names = ["A", "B"])]
    range: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalOnly {
    Eval(PointArgs),
}

#[derive(Subcommand)]
enum EvalOrSweep {
    Eval(PointArgs),
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Catalog closed form when available, else the direct oracle.
    Auto,
    Direct,
    Shifted,
}

#[derive(Subcommand)]
enum SubdiffOp {
    Eval {
        #[command(flatten)]
        at: PointArgs,
        #[arg(long, value_enum, default_value = "auto")]
        method: Method,
    },
    Sweep {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, value_enum, default_value = "auto")]
        method: Method,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ThresholdMethod {
    Sweep,
    Growth,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long)]
    function: String,
    #[arg(long, value_enum, default_value = "sweep")]
    method: ThresholdMethod,
    /// Ascending candidate levels; powers of two from 2^-6 to 2^10 by default.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Doubling shells for the growth method.
    #[arg(long, default_value_t = 4)]
    shells: u32,
}

#[derive(Args)]
struct CriticalArgs {
    #[arg(long)]
    function: String,
    #[arg(long, allow_hyphen_values = true)]
    point: f64,
    #[arg(long, default_value_t = 40)]
    bisect: usize,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    function: String,
    #[arg(long)]
    lambda: f64,
    #[arg(long, allow_hyphen_values = true)]
    center: f64,
    #[arg(long)]
    radius: f64,
    #[arg(long, default_value_t = 200)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = levelprox::diagnostics::DEFAULT_TOL)]
    tol: f64,
    /// Also check the strong-convexity moduli for this sigma.
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    /// Also test an L-Lipschitz gradient on the neighbourhood.
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IntegrateArgs {
    #[arg(long)]
    function: String,
    #[arg(long)]
    lambda: f64,
    #[arg(long, allow_hyphen_values = true)]
    anchor: f64,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, num_args = 2, allow_hyphen_values = true, value_names = ["A", "B"])]
    range: Vec<f64>,
    #[arg(long, default_value_t = 40)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SolveOp {
    /// Proximal gradient from a JSON problem file.
    Pgm {
        #[arg(long)]
        problem: PathBuf,
        /// Trace CSV; the certificate goes to `<out>.certificate.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Krasnoselskii-Mann iteration inside a ball.
    Km(KmArgs),
    /// Best subset selection by iterative hard thresholding.
    Bss(BssArgs),
}

#[derive(Args)]
struct KmArgs {
    #[arg(long)]
    function: String,
    #[arg(long)]
    lambda: f64,
    #[arg(long, allow_hyphen_values = true)]
    x0: f64,
    /// Constant relaxation parameter or a CSV file of values.
    #[arg(long)]
    mu: String,
    #[arg(long, allow_hyphen_values = true)]
    center: f64,
    #[arg(long)]
    radius: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-13)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BssArgs {
    #[arg(long = "A")]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    gamma: f64,
    /// Step size; 0.9 / |A|_F^2 by default.
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma-separated start point; zero by default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct Problem {
    f: ProblemF,
    #[serde(default)]
    g: ProblemG,
    lambda: f64,
    x0: Vec<f64>,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default)]
    tie_rule: TieRule,
}

fn default_max_iter() -> usize {
    1000
}

fn default_tol() -> f64 {
    1e-12
}

#[derive(Deserialize)]
struct ProblemF {
    separable: Vec<String>,
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "snake_case")]
enum ProblemG {
    #[default]
    Zero,
    LeastSquares {
        #[serde(rename = "A")]
        a: Matrix,
        b: Vec<f64>,
    },
}

#[derive(Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    argv: Vec<String>,
    seed: Option<u64>,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

/// Collects written files and their inputs for the run manifest.
struct Emitter {
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

fn sha256_file(p: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

impl Emitter {
    fn new(seed: Option<u64>) -> Self {
        Emitter {
            seed,
            inputs: vec![],
            outputs: vec![],
        }
    }

    fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    /// Writes `text` to `out`, or prints it when there is no path.
    fn emit(&mut self, out: Option<&Path>, text: &str) -> anyhow::Result<()> {
        match out {
            Some(p) => {
                fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
                self.outputs.push(p.to_path_buf());
            }
            None => {
                let mut s = std::io::stdout().lock();
                s.write_all(text.as_bytes())?;
            }
        }
        Ok(())
    }

    fn finish(self) -> anyhow::Result<()> {
        let Some(first) = self.outputs.first() else {
            return Ok(());
        };
        let hash = |ps: &[PathBuf]| -> anyhow::Result<Vec<FileHash>> {
            ps.iter()
                .map(|p| {
                    Ok(FileHash {
                        path: p.display().to_string(),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect()
        };
        let m = RunManifest {
            tool: "levelprox",
            version: env!("CARGO_PKG_VERSION"),
            argv: std::env::args().collect(),
            seed: self.seed,
            inputs: hash(&self.inputs)?,
            outputs: hash(&self.outputs)?,
        };
        let mut path = first.clone().into_os_string();
        path.push(".manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(())
    }
}

/// 17 significant digits, or the documented sentinels.
fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

fn set_bounds(s: &SetValue) -> (String, String) {
    if s.is_empty() {
        ("nan".into(), "nan".into())
    } else {
        (num(s.lo()), num(s.hi()))
    }
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn json<T: Serialize>(v: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn parse_fn(spec: &str) -> levelprox::Result<ScalarFn> {
    spec.parse()
}

fn sweep_grid(s: &SweepArgs) -> levelprox::Result<Grid> {
    Grid::new(s.range[0], s.range[1], s.steps)
}

fn read_numbers(p: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(p)
        .with_context(|| format!("reading {}", p.display()))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row: Vec<f64> = rec
            .iter()
            .filter(|c| !c.is_empty())
            .map(|c| {
                c.parse::<f64>()
                    .with_context(|| format!("bad number '{c}' in {}", p.display()))
            })
            .collect::<anyhow::Result<_>>()?;
        if !row.is_empty() {
            rows.push(row);
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct EnvelopePoint {
    x: f64,
    lambda: f64,
    value: f64,
    prox: SetValue,
}

#[derive(Serialize)]
struct HullPoint {
    x: f64,
    lambda: f64,
    value: ExtReal,
}

fn subdiff_at(
    o: &Oracle,
    f: &ScalarFn,
    lambda: f64,
    x: f64,
    m: Method,
) -> levelprox::Result<SetValue> {
    match m {
        Method::Auto => o.level_subdiff(f, lambda, x),
        Method::Direct => o.subdiff_direct(f, lambda, x),
        Method::Shifted => o.subdiff_shifted(f, lambda, x),
    }
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Holds => 0,
        Verdict::Fails => EXIT_FAIL,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn trace_csv(iterates: &[Vec<f64>], residuals: &[f64]) -> anyhow::Result<String> {
    let n = iterates.first().map_or(0, Vec::len);
    let mut header = vec!["k".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("residual".into());
    let rows: Vec<Vec<String>> = iterates
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let mut r = vec![(k + 1).to_string()];
            r.extend(x.iter().map(|&v| num(v)));
            r.push(if k == 0 {
                "nan".into()
            } else {
                num(residuals[k - 1])
            });
            r
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_text(&h, &rows)
}

fn certificate_path(out: &Path) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".certificate.json");
    PathBuf::from(p)
}

fn emit_pgm(em: &mut Emitter, t: &SolverTrace, out: Option<&Path>) -> anyhow::Result<i32> {
    let cert = json(&t.certificate)?;
    if let Some(p) = out {
        em.emit(Some(p), &trace_csv(&t.iterates, &t.residuals)?)?;
        em.emit(Some(&certificate_path(p)), &cert)?;
    }
    em.emit(None, &cert)?;
    Ok(if t.certificate.verified { 0 } else { EXIT_FAIL })
}

fn diagnose(o: &Oracle, a: &DiagnoseArgs, em: &mut Emitter) -> anyhow::Result<i32> {
    let f = parse_fn(&a.function)?;
    let nb = NeighborhoodSpec {
        center: a.center,
        radius: a.radius,
        sample_pairs: a.pairs,
        seed: a.seed,
        tol: a.tol,
    };
    let lam = a.lambda;
    let interval = (a.center - a.radius, a.center + a.radius);
    let mut records: Vec<PropertyRecord> = vec![
        firm_nonexpansive_test(&f, lam, &nb, o)?,
        nonexpansive_test(&f, lam, &nb, o)?,
        averaged_witness(&f, lam, &nb, o)?,
        cocoercive_test(&f, lam, &nb, lam, CocoerciveTarget::EnvelopeGradient, o)?,
        relative_monotone_test(&f, lam, &nb, a.sigma.unwrap_or(0.0), o)?,
        envelope_convexity_test(&f, lam, interval, 2 * a.pairs, a.tol, o)?,
    ];
    if let Some(sigma) = a.sigma {
        let (l, s) = strong_convexity_modulus_check(&f, lam, sigma, &nb, o)?;
        records.extend([l, s]);
    }
    if let Some(l) = a.l {
        let ygrid = o.search(&f, interval.0, interval.1);
        let s = lipschitz_smooth_test(&f, l, interval, &ygrid, a.tol)?;
        let bound_holds = s.quadratic_bound.holds;
        records.extend([s.quadratic_bound, s.level_subdiff]);
        if bound_holds {
            let (g, firm) =
                gradient_lipschitz_from_bound(&f, l, interval, a.pairs, a.seed, &ygrid, a.tol)?;
            records.extend([g, firm]);
        }
    }
    let report = DiagnosticsReport { records };
    em.emit(a.out.as_deref(), &json(&report)?)?;
    Ok(verdict_code(report.overall()))
}

fn dispatch(cli: Cli, em: &mut Emitter) -> anyhow::Result<i32> {
    let o = Oracle::with_spacing(cli.spacing);
    match cli.command {
        Command::Prox {
            op: EvalOnly::Eval(p),
        } => {
            let f = parse_fn(&p.function)?;
            em.emit(None, &json(&o.prox(&f, p.lambda, p.point)?)?)?;
        }
        Command::Envelope { op } => match op {
            EvalOrSweep::Eval(p) => {
                let f = parse_fn(&p.function)?;
                let v = EnvelopePoint {
                    x: p.point,
                    lambda: p.lambda,
                    value: o.envelope(&f, p.lambda, p.point)?,
                    prox: o.prox(&f, p.lambda, p.point)?,
                };
                em.emit(None, &json(&v)?)?;
            }
            EvalOrSweep::Sweep(s) => {
                let f = parse_fn(&s.function)?;
                let rows = sweep_grid(&s)?
                    .points()
                    .into_par_iter()
                    .map(|x| {
                        let p = o.prox(&f, s.lambda, x)?;
                        let (lo, hi) = set_bounds(&p);
                        Ok(vec![
                            num(x),
                            num(o.envelope(&f, s.lambda, x)?),
                            p.kind().into(),
                            lo,
                            hi,
                        ])
                    })
                    .collect::<levelprox::Result<Vec<_>>>()?;
                em.emit(
                    s.out.as_deref(),
                    &csv_text(&["x", "envelope", "prox_kind", "prox_lo", "prox_hi"], &rows)?,
                )?;
            }
        },
        Command::Hull { op } => match op {
            EvalOrSweep::Eval(p) => {
                let f = parse_fn(&p.function)?;
                let v = HullPoint {
                    x: p.point,
                    lambda: p.lambda,
                    value: o.hull(&f, p.lambda, p.point)?,
                };
                em.emit(None, &json(&v)?)?;
            }
            EvalOrSweep::Sweep(s) => {
                let f = parse_fn(&s.function)?;
                let xs = sweep_grid(&s)?.points();
                let h = o.hull_many(&f, s.lambda, &xs)?;
                let rows: Vec<Vec<String>> = xs
                    .iter()
                    .zip(h)
                    .map(|(&x, h)| vec![num(x), num(h.to_f64())])
                    .collect();
                em.emit(s.out.as_deref(), &csv_text(&["x", "hull"], &rows)?)?;
            }
        },
        Command::Subdiff { op } => match op {
            SubdiffOp::Eval { at, method } => {
                let f = parse_fn(&at.function)?;
                em.emit(
                    None,
                    &json(&subdiff_at(&o, &f, at.lambda, at.point, method)?)?,
                )?;
            }
            SubdiffOp::Sweep { sweep, method } => {
                let f = parse_fn(&sweep.function)?;
                let rows = sweep_grid(&sweep)?
                    .points()
                    .into_par_iter()
                    .map(|x| {
                        let d = subdiff_at(&o, &f, sweep.lambda, x, method)?;
                        let (lo, hi) = set_bounds(&d);
                        Ok(vec![num(x), d.kind().into(), lo, hi])
                    })
                    .collect::<levelprox::Result<Vec<_>>>()?;
                em.emit(
                    sweep.out.as_deref(),
                    &csv_text(&["x", "kind", "lo", "hi"], &rows)?,
                )?;
            }
        },
        Command::Threshold(t) => {
            let f = parse_fn(&t.function)?;
            let search = o.search(&f, 0.0, 0.0);
            let est = match t.method {
                ThresholdMethod::Sweep => {
                    let lambdas = t
                        .lambdas
                        .unwrap_or_else(|| (-6..=10).map(|k| 2f64.powi(k)).collect());
                    estimate_threshold(&f, &lambdas, &search)?
                }
                ThresholdMethod::Growth => estimate_threshold_growth(&f, &search, t.shells)?,
            };
            em.emit(None, &json(&est)?)?;
        }
        Command::Critical(c) => {
            let f = parse_fn(&c.function)?;
            let r = critical_lambda_bar(&f, c.point, &o.search(&f, c.point, c.point), c.bisect)?;
            em.emit(None, &json(&r)?)?;
        }
        Command::Diagnose(a) => return diagnose(&o, &a, em),
        Command::Integrate(a) => {
            let f = parse_fn(&a.function)?;
            let eval = Grid::new(a.range[0], a.range[1], a.steps)?;
            let cfg = ChainConfig {
                seed: a.seed,
                ..ChainConfig::new(a.anchor, a.depth, a.samples)
            };
            let est = integrate_hull(&f, a.lambda, &cfg, &eval, &o)?;
            let xs: Vec<f64> = est.points.iter().map(|p| p.0).collect();
            let h = o.hull_many(&f, a.lambda, &xs)?;
            let rows: Vec<Vec<String>> = est
                .points
                .iter()
                .zip(h)
                .map(|(&(x, v), h)| {
                    let h = h.to_f64();
                    let err = if h.is_finite() {
                        (v - h).abs()
                    } else {
                        f64::INFINITY
                    };
                    vec![num(x), num(v), num(h), num(err)]
                })
                .collect();
            em.emit(
                a.out.as_deref(),
                &csv_text(&["x", "f_hat", "h_ref", "abs_err"], &rows)?,
            )?;
        }
        Command::Solve { op } => match op {
            SolveOp::Pgm { problem, out } => {
                em.input(&problem);
                let text = fs::read_to_string(&problem)
                    .with_context(|| format!("reading {}", problem.display()))?;
                let p: Problem = serde_json::from_str(&text).context("parsing problem JSON")?;
                let comps =
                    p.f.separable
                        .iter()
                        .map(|s| parse_fn(s))
                        .collect::<levelprox::Result<Vec<_>>>()?;
                let f = SeparableFunction::new(comps)?;
                let g = match p.g {
                    ProblemG::Zero => SmoothTerm::Zero,
                    ProblemG::LeastSquares { a, b } => SmoothTerm::least_squares(a, b)?,
                };
                let opts = SolveOptions {
                    max_iter: p.max_iter,
                    tol: p.tol,
                    tie_rule: p.tie_rule,
                    ..SolveOptions::default()
                };
                let t = prox_gradient_solve(&f, &g, p.lambda, &p.x0, &opts, &o)?;
                return emit_pgm(em, &t, out.as_deref());
            }
            SolveOp::Km(k) => {
                let f = SeparableFunction::new(vec![parse_fn(&k.function)?])?;
                let mu = match k.mu.parse::<f64>() {
                    Ok(m) => Schedule::Constant(m),
                    Err(_) => {
                        let p = PathBuf::from(&k.mu);
                        em.input(&p);
                        Schedule::List(read_numbers(&p)?.into_iter().flatten().collect())
                    }
                };
                let opts = KmOptions {
                    mu,
                    center: vec![k.center],
                    radius: k.radius,
                    max_iter: k.max_iter,
                    tol: k.tol,
                    fixed_scan: 1001,
                };
                let t = km_iterate(&f, k.lambda, &[k.x0], &opts, &o)?;
                if let Some(p) = k.out.as_deref() {
                    em.emit(Some(p), &trace_csv(&t.iterates, &t.residuals)?)?;
                }
                #[derive(Serialize)]
                struct KmSummary<'a> {
                    status: KmStatus,
                    iterations: usize,
                    last: &'a [f64],
                    schedule_in_hypothesis: bool,
                    fejer_ok: bool,
                    fejer_max_violation: f64,
                    fejer_points: usize,
                    limit: &'a Option<Vec<f64>>,
                    global_min: Option<bool>,
                }
                let s = KmSummary {
                    status: t.status,
                    iterations: t.residuals.len(),
                    last: t.iterates.last().unwrap(),
                    schedule_in_hypothesis: t.schedule_in_hypothesis,
                    fejer_ok: t.fejer_ok,
                    fejer_max_violation: t.fejer_max_violation,
                    fejer_points: t.fejer_points.len(),
                    limit: &t.limit,
                    global_min: t.global_min,
                };
                em.emit(None, &json(&s)?)?;
                return Ok(match t.status {
                    KmStatus::Inconclusive => EXIT_INCONCLUSIVE,
                    _ if !t.fejer_ok || t.limit.is_none() => EXIT_FAIL,
                    _ => 0,
                });
            }
            SolveOp::Bss(b) => {
                em.input(&b.a);
                em.input(&b.b);
                let a = Matrix::from_rows(read_numbers(&b.a)?)?;
                let rhs: Vec<f64> = read_numbers(&b.b)?.into_iter().flatten().collect();
                let opts = SolveOptions {
                    max_iter: b.max_iter,
                    tol: b.tol,
                    ..SolveOptions::default()
                };
                let t = best_subset(&a, &rhs, b.gamma, b.lambda, b.x0.as_deref(), &opts, &o)?;
                return emit_pgm(em, &t, b.out.as_deref());
            }
        },
        Command::Selftest => {
            let mut all = true;
            for r in selftest::run_all(&o) {
                all &= r.passed;
                println!(
                    "criterion {:>2} {:<26} {}  {}",
                    r.id,
                    r.name,
                    if r.passed { "PASS" } else { "FAIL" },
                    r.detail
                );
            }
            return Ok(if all { 0 } else { EXIT_FAIL });
        }
    }
    Ok(0)
}

fn seed_of(c: &Command) -> Option<u64> {
    match c {
        Command::Diagnose(a) => Some(a.seed),
        Command::Integrate(a) => Some(a.seed),
        _ => None,
    }
}

fn error_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Spec { .. }
            | Error::InvalidFunction(_)
            | Error::Parameter(_)
            | Error::Dimension { .. },
        ) => EXIT_USAGE,
        Some(_) => EXIT_NUMERIC,
        None => EXIT_USAGE,
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("LEVELPROX_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow!("LEVELPROX_THREADS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            bail!("LEVELPROX_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    let mut em = Emitter::new(seed_of(&cli.command));
    let code = match dispatch(cli, &mut em) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(Error::Spec { reason, .. }) = e.downcast_ref::<Error>() {
                if !reason.contains(CATALOG_LISTING) {
                    eprintln!("known functions: {CATALOG_LISTING}");
                }
            }
            return error_code(&e);
        }
    };
    if let Err(e) = em.finish() {
        eprintln!("error: {e:#}");
        return EXIT_NUMERIC;
    }
    code
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(run());
}
