//! Extended reals, grids and set-valued results shared by every module.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Half-lines and the whole line are clipped to this window before comparison.
pub const COMPARE_WINDOW: f64 = 1e6;

/// A value in `(-inf, +inf]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    /// Wraps a raw float. `-inf` and NaN are rejected.
    pub fn new(v: f64) -> Result<Self> {
        if v.is_nan() {
            Err(Error::InvalidFunction("NaN value".into()))
        } else if v == f64::NEG_INFINITY {
            Err(Error::InvalidFunction("-inf value".into()))
        } else if v == f64::INFINITY {
            Ok(ExtReal::PosInf)
        } else {
            Ok(ExtReal::Finite(v))
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// The value as a float, with `+inf` for [`ExtReal::PosInf`].
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::new(v).expect("finite or +inf")
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::PosInf,
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "inf"),
        }
    }
}

// JSON has no infinity, so +inf travels as the string "inf".
impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::PosInf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => ExtReal::new(v).map_err(serde::de::Error::custom),
            Raw::Str(s) if s == "inf" => Ok(ExtReal::PosInf),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad extended real `{s}`"))),
        }
    }
}

/// Uniform grid `lo, lo + h, ..., hi` with `steps + 1` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Parameter(format!(
                "grid needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        if steps == 0 {
            return Err(Error::Parameter("grid needs at least one step".into()));
        }
        Ok(Grid { lo, hi, steps })
    }

    /// Grid centred at `c` with the given half-width.
    pub fn around(c: f64, half_width: f64, steps: usize) -> Result<Self> {
        Grid::new(c - half_width, c + half_width, steps)
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.steps as f64
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        if i == self.steps {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Same spacing, widened by `factor` around the midpoint.
    pub fn widened(&self, factor: f64) -> Grid {
        let mid = 0.5 * (self.lo + self.hi);
        let half = 0.5 * (self.hi - self.lo) * factor;
        let steps = ((self.steps as f64) * factor).round() as usize;
        Grid {
            lo: mid - half,
            hi: mid + half,
            steps: steps.max(1),
        }
    }

    /// Smallest grid with this spacing that also covers `[a, b]`.
    pub fn covering(&self, a: f64, b: f64) -> Grid {
        let h = self.spacing();
        let lo = self.lo.min(a);
        let hi = self.hi.max(b);
        let steps = ((hi - lo) / h).ceil().max(1.0) as usize;
        Grid {
            lo,
            hi: lo + steps as f64 * h,
            steps,
        }
    }
}

/// Value of a set-valued map at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetValue {
    Empty,
    /// Sorted, deduplicated points.
    Finite {
        points: Vec<f64>,
    },
    Interval {
        lo: f64,
        hi: f64,
    },
    /// `[lo, +inf)`
    HalflineUp {
        lo: f64,
    },
    /// `(-inf, hi]`
    HalflineDown {
        hi: f64,
    },
    /// The whole real line.
    Line,
}

impl SetValue {
    pub fn point(x: f64) -> Self {
        SetValue::Finite { points: vec![x] }
    }

    /// Finite set, sorted and merged at tolerance `tol`.
    pub fn finite(mut pts: Vec<f64>, tol: f64) -> Self {
        if pts.is_empty() {
            return SetValue::Empty;
        }
        pts.sort_by(|a, b| a.total_cmp(b));
        let mut out: Vec<f64> = Vec::with_capacity(pts.len());
        for p in pts {
            match out.last() {
                Some(&q) if (p - q).abs() <= tol => {}
                _ => out.push(p),
            }
        }
        SetValue::Finite { points: out }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        SetValue::Interval {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    /// Builds the set `{v : lo <= v <= hi}` from possibly infinite bounds.
    pub fn from_bounds(lo: f64, hi: f64) -> Self {
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) if lo <= hi => SetValue::Interval { lo, hi },
            (true, true) => SetValue::Empty,
            (true, false) => SetValue::HalflineUp { lo },
            (false, true) => SetValue::HalflineDown { hi },
            (false, false) => SetValue::Line,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, SetValue::Empty)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SetValue::Empty => "empty",
            SetValue::Finite { .. } => "finite",
            SetValue::Interval { .. } => "interval",
            SetValue::HalflineUp { .. } => "halfline_up",
            SetValue::HalflineDown { .. } => "halfline_down",
            SetValue::Line => "line",
        }
    }

    /// Infimum of the set (`+inf` when empty).
    pub fn lo(&self) -> f64 {
        match self {
            SetValue::Empty => f64::INFINITY,
            SetValue::Finite { points } => points[0],
            SetValue::Interval { lo, .. } | SetValue::HalflineUp { lo } => *lo,
            SetValue::HalflineDown { .. } | SetValue::Line => f64::NEG_INFINITY,
        }
    }

    /// Supremum of the set (`-inf` when empty).
    pub fn hi(&self) -> f64 {
        match self {
            SetValue::Empty => f64::NEG_INFINITY,
            SetValue::Finite { points } => *points.last().unwrap(),
            SetValue::Interval { hi, .. } | SetValue::HalflineDown { hi } => *hi,
            SetValue::HalflineUp { .. } | SetValue::Line => f64::INFINITY,
        }
    }

    pub fn width(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi() - self.lo()
        }
    }

    /// True for a single point or an interval no wider than `tol`.
    pub fn is_singleton(&self, tol: f64) -> bool {
        match self {
            SetValue::Finite { points } => points.len() == 1,
            SetValue::Interval { lo, hi } => hi - lo <= tol,
            _ => false,
        }
    }

    /// Representative point: the single point, or the interval midpoint.
    pub fn center(&self) -> Option<f64> {
        match self {
            SetValue::Empty => None,
            SetValue::Finite { points } if points.len() == 1 => Some(points[0]),
            SetValue::Finite { points } => Some(0.5 * (points[0] + points[points.len() - 1])),
            SetValue::Interval { lo, hi } => Some(0.5 * (lo + hi)),
            SetValue::HalflineUp { lo } => Some(*lo),
            SetValue::HalflineDown { hi } => Some(*hi),
            SetValue::Line => Some(0.0),
        }
    }

    /// Convex hull of the set.
    pub fn hull(&self) -> SetValue {
        match self {
            SetValue::Finite { points } if points.len() > 1 => {
                SetValue::interval(points[0], points[points.len() - 1])
            }
            other => other.clone(),
        }
    }

    /// Closed intervals whose union is the set, clipped to `[-w, w]`.
    pub fn pieces(&self, w: f64) -> Vec<(f64, f64)> {
        let clip = |a: f64, b: f64| (a.max(-w).min(w), b.max(-w).min(w));
        match self {
            SetValue::Empty => vec![],
            SetValue::Finite { points } => points.iter().map(|&p| clip(p, p)).collect(),
            _ => vec![clip(self.lo(), self.hi())],
        }
    }

    /// Distance from `v` to the set; `None` when the set is empty.
    pub fn distance(&self, v: f64) -> Option<f64> {
        match self {
            SetValue::Empty => None,
            SetValue::Finite { points } => Some(
                points
                    .iter()
                    .map(|p| (p - v).abs())
                    .fold(f64::INFINITY, f64::min),
            ),
            _ => Some((self.lo() - v).max(v - self.hi()).max(0.0)),
        }
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        self.distance(v).is_some_and(|d| d <= tol)
    }

    /// Points worth probing when a selection from the set is needed:
    /// the points of a finite set, or endpoints and midpoint of an interval.
    /// Unbounded ends are replaced by offsets from the finite end.
    pub fn samples(&self) -> Vec<f64> {
        match self {
            SetValue::Empty => vec![],
            SetValue::Finite { points } => points.clone(),
            SetValue::Interval { lo, hi } if hi - lo <= 0.0 => vec![*lo],
            SetValue::Interval { lo, hi } => vec![*lo, 0.5 * (lo + hi), *hi],
            SetValue::HalflineUp { lo } => vec![*lo, lo + 1.0, lo + 10.0],
            SetValue::HalflineDown { hi } => vec![*hi, hi - 1.0, hi - 10.0],
            SetValue::Line => vec![-10.0, -1.0, 0.0, 1.0, 10.0],
        }
    }
}

impl fmt::Display for SetValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetValue::Empty => write!(f, "{{}}"),
            SetValue::Finite { points } => {
                let s: Vec<String> = points.iter().map(|p| format!("{p}")).collect();
                write!(f, "{{{}}}", s.join(", "))
            }
            SetValue::Interval { lo, hi } => write!(f, "[{lo}, {hi}]"),
            SetValue::HalflineUp { lo } => write!(f, "[{lo}, inf)"),
            SetValue::HalflineDown { hi } => write!(f, "(-inf, {hi}]"),
            SetValue::Line => write!(f, "(-inf, inf)"),
        }
    }
}

fn dist_to_pieces(v: f64, pieces: &[(f64, f64)]) -> f64 {
    pieces
        .iter()
        .map(|&(a, b)| (a - v).max(v - b).max(0.0))
        .fold(f64::INFINITY, f64::min)
}

// Largest distance from a point of `from` to the union `to`. The distance
// function is piecewise linear, so it peaks at interval ends or gap midpoints.
fn directed_hausdorff(from: &[(f64, f64)], to: &[(f64, f64)]) -> f64 {
    let mut sorted = to.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut worst: f64 = 0.0;
    for &(a, b) in from {
        let mut cands = vec![a, b];
        for w in sorted.windows(2) {
            let mid = 0.5 * (w[0].1 + w[1].0);
            cands.push(mid.clamp(a, b));
        }
        for c in cands {
            worst = worst.max(dist_to_pieces(c, &sorted));
        }
    }
    worst
}

/// Hausdorff distance between two sets, with unbounded parts clipped to
/// `[-COMPARE_WINDOW, COMPARE_WINDOW]`. `None` if exactly one set is empty.
pub fn hausdorff(a: &SetValue, b: &SetValue) -> Option<f64> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Some(0.0),
        (true, false) | (false, true) => return None,
        _ => {}
    }
    let pa = a.pieces(COMPARE_WINDOW);
    let pb = b.pieces(COMPARE_WINDOW);
    Some(directed_hausdorff(&pa, &pb).max(directed_hausdorff(&pb, &pa)))
}

/// Tolerance equality of two sets: Hausdorff distance at most `tol`.
pub fn setvalue_equal(a: &SetValue, b: &SetValue, tol: f64) -> bool {
    hausdorff(a, b).is_some_and(|d| d <= tol)
}
