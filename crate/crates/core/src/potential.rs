//! One-dimensional confining potentials.
//!
//! Every family is piecewise polynomial (tabulated data is interpolated by
//! monotone cubic Hermite pieces), which keeps composite Gauss-Legendre
//! quadrature exact on each smooth piece. The infinite square well is kept
//! symbolic: zero on `[a, b]`, `+∞` outside.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::levelset::{LevelIndex, LevelOptions, LevelPoint, ScalarFn};
use crate::numeric::{Interval, Side};

/// Shape of a potential before the overall `scale` factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialFamily {
    SquareWell {
        a: f64,
        b: f64,
    },
    /// `k (x - x0)^2`.
    Harmonic {
        k: f64,
        #[serde(default)]
        x0: f64,
    },
    /// `sum_i c_i x^i`.
    Polynomial { coefficients: Vec<f64> },
    /// `h ((x/w)^2 - 1)^2`.
    DoubleWell { h: f64, w: f64 },
    /// `segments[i]` (global-`x` coefficients) applies between
    /// `breakpoints[i-1]` and `breakpoints[i]`; there is one more segment
    /// than breakpoints.
    PiecewisePolynomial {
        breakpoints: Vec<f64>,
        segments: Vec<Vec<f64>>,
    },
    /// Monotone cubic Hermite interpolation of samples; linear extrapolation
    /// with the end slopes outside the grid.
    Tabulated {
        x: Arc<Vec<f64>>,
        v: Arc<Vec<f64>>,
        #[serde(skip_serializing, default)]
        slopes: Arc<Vec<f64>>,
    },
}

/// A confining potential `scale · family(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub family: PotentialFamily,
    #[serde(default = "one")]
    pub scale: f64,
    /// Bounding interval suggested for numeric searches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_hint: Option<Interval>,
}

fn one() -> f64 {
    1.0
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

fn horner_derivative(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, &ci)| acc * x + i as f64 * ci)
}

/// Fritsch-Carlson slopes for a monotone-preserving C¹ cubic interpolant.
fn monotone_slopes(x: &[f64], v: &[f64]) -> Vec<f64> {
    let n = x.len();
    let secants: Vec<f64> = (0..n - 1).map(|i| (v[i + 1] - v[i]) / (x[i + 1] - x[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = secants[0];
    m[n - 1] = secants[n - 2];
    for i in 1..n - 1 {
        let (d0, d1) = (secants[i - 1], secants[i]);
        if d0 * d1 <= 0.0 {
            m[i] = 0.0;
        } else {
            // Weighted harmonic mean (Fritsch-Butland / PCHIP form).
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            m[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    m
}

impl PotentialFamily {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        match self {
            PotentialFamily::SquareWell { a, b } => {
                if !(a.is_finite() && b.is_finite() && b > a) {
                    return bad(format!("square well needs a < b, got [{a}, {b}]"));
                }
            }
            PotentialFamily::Harmonic { k, x0 } => {
                if !(*k > 0.0 && x0.is_finite()) {
                    return bad(format!("harmonic potential needs k > 0, got {k}"));
                }
            }
            PotentialFamily::Polynomial { coefficients } => {
                check_confining_poly(coefficients)?;
            }
            PotentialFamily::DoubleWell { h, w } => {
                if !(*h > 0.0 && *w > 0.0) {
                    return bad(format!("double well needs h > 0 and w > 0, got h={h}, w={w}"));
                }
            }
            PotentialFamily::PiecewisePolynomial { breakpoints, segments } => {
                if segments.len() != breakpoints.len() + 1 {
                    return bad(format!(
                        "piecewise polynomial needs {} segments for {} breakpoints, got {}",
                        breakpoints.len() + 1,
                        breakpoints.len(),
                        segments.len()
                    ));
                }
                if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("piecewise polynomial breakpoints must increase strictly".into());
                }
                for (i, &b) in breakpoints.iter().enumerate() {
                    let l = horner(&segments[i], b);
                    let r = horner(&segments[i + 1], b);
                    if (l - r).abs() > 1e-9 * l.abs().max(r.abs()).max(1.0) {
                        return bad(format!("piecewise polynomial is discontinuous at {b}: {l} vs {r}"));
                    }
                }
                check_confining_poly(&segments[0])?;
                check_confining_poly(segments.last().unwrap())?;
            }
            PotentialFamily::Tabulated { x, v, .. } => {
                if x.len() < 3 || x.len() != v.len() {
                    return bad("tabulated potential needs at least 3 (x, V) samples of equal length".into());
                }
                if x.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("tabulated x samples must increase strictly".into());
                }
                let n = x.len();
                let left = (v[1] - v[0]) / (x[1] - x[0]);
                let right = (v[n - 1] - v[n - 2]) / (x[n - 1] - x[n - 2]);
                if !(left < 0.0 && right > 0.0) {
                    return bad("tabulated potential must rise at both ends of the grid to be confining".into());
                }
            }
        }
        Ok(())
    }
}

fn check_confining_poly(c: &[f64]) -> Result<()> {
    let deg = c.iter().rposition(|&ci| ci != 0.0);
    match deg {
        Some(d) if d >= 2 && d % 2 == 0 && c[d] > 0.0 => Ok(()),
        _ => Err(Error::Validation(
            "polynomial potential must have even degree >= 2 and positive leading coefficient".into(),
        )),
    }
}

impl PotentialSpec {
    pub fn new(family: PotentialFamily) -> Result<Self> {
        let family = match family {
            PotentialFamily::Tabulated { x, v, .. } => {
                let slopes = if x.len() >= 3 { monotone_slopes(&x, &v) } else { vec![] };
                PotentialFamily::Tabulated {
                    x,
                    v,
                    slopes: Arc::new(slopes),
                }
            }
            other => other,
        };
        family.validate()?;
        Ok(Self {
            family,
            scale: 1.0,
            domain_hint: None,
        })
    }

    pub fn square_well(a: f64, b: f64) -> Result<Self> {
        Self::new(PotentialFamily::SquareWell { a, b })
    }

    pub fn harmonic(k: f64, x0: f64) -> Result<Self> {
        Self::new(PotentialFamily::Harmonic { k, x0 })
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        Self::new(PotentialFamily::Polynomial { coefficients })
    }

    pub fn double_well(h: f64, w: f64) -> Result<Self> {
        Self::new(PotentialFamily::DoubleWell { h, w })
    }

    pub fn piecewise(breakpoints: Vec<f64>, segments: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(PotentialFamily::PiecewisePolynomial { breakpoints, segments })
    }

    pub fn tabulated(x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        Self::new(PotentialFamily::Tabulated {
            x: Arc::new(x),
            v: Arc::new(v),
            slopes: Arc::new(vec![]),
        })
    }

    /// Recomputes derived data after deserialization.
    pub fn finalize(self) -> Result<Self> {
        let PotentialSpec {
            family,
            scale,
            domain_hint,
        } = self;
        let mut p = Self::new(family)?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Validation(format!("potential scale must be positive, got {scale}")));
        }
        p.scale = scale;
        p.domain_hint = domain_hint;
        Ok(p)
    }

    pub fn with_domain_hint(mut self, hint: Interval) -> Self {
        self.domain_hint = Some(hint);
        self
    }

    /// `factor · V`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut p = self.clone();
        p.scale *= factor;
        p
    }

    pub fn is_square_well(&self) -> bool {
        matches!(self.family, PotentialFamily::SquareWell { .. })
    }

    /// Finite part of the domain: the well for a square well, otherwise `None`.
    pub fn hard_walls(&self) -> Option<Interval> {
        match self.family {
            PotentialFamily::SquareWell { a, b } => Some(Interval { lo: a, hi: b }),
            _ => None,
        }
    }

    /// `V(x)`; `+∞` outside a square well.
    pub fn evaluate(&self, x: f64) -> f64 {
        let raw = match &self.family {
            PotentialFamily::SquareWell { a, b } => {
                return if x >= *a && x <= *b { 0.0 } else { f64::INFINITY };
            }
            PotentialFamily::Harmonic { k, x0 } => k * (x - x0) * (x - x0),
            PotentialFamily::Polynomial { coefficients } => horner(coefficients, x),
            PotentialFamily::DoubleWell { h, w } => {
                let u = (x / w) * (x / w) - 1.0;
                h * u * u
            }
            PotentialFamily::PiecewisePolynomial { breakpoints, segments } => {
                let i = breakpoints.partition_point(|&b| b < x);
                horner(&segments[i], x)
            }
            PotentialFamily::Tabulated { x: xs, v, slopes } => hermite_eval(xs, v, slopes, x).0,
        };
        self.scale * raw
    }

    /// `V'(x)`; fails exactly at a breakpoint of a piecewise polynomial.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        if let PotentialFamily::PiecewisePolynomial { breakpoints, .. } = &self.family {
            if breakpoints.iter().any(|&b| b == x) {
                return Err(Error::AmbiguousBreakpoint(x));
            }
        }
        Ok(self.derivative_sided(x, Side::Right))
    }

    /// One-sided `V'(x)`.
    pub fn derivative_sided(&self, x: f64, side: Side) -> f64 {
        let raw = match &self.family {
            PotentialFamily::SquareWell { .. } => 0.0,
            PotentialFamily::Harmonic { k, x0 } => 2.0 * k * (x - x0),
            PotentialFamily::Polynomial { coefficients } => horner_derivative(coefficients, x),
            PotentialFamily::DoubleWell { h, w } => {
                let u = (x / w) * (x / w) - 1.0;
                4.0 * h * u * x / (w * w)
            }
            PotentialFamily::PiecewisePolynomial { breakpoints, segments } => {
                let i = match side {
                    Side::Left => breakpoints.partition_point(|&b| b < x),
                    Side::Right => breakpoints.partition_point(|&b| b <= x),
                };
                horner_derivative(&segments[i], x)
            }
            PotentialFamily::Tabulated { x: xs, v, slopes } => hermite_eval(xs, v, slopes, x).1,
        };
        self.scale * raw
    }

    /// Breakpoints inside `[lo, hi]` at which the derivative may jump.
    pub fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        match &self.family {
            PotentialFamily::PiecewisePolynomial { breakpoints, .. } => {
                breakpoints.iter().copied().filter(|&b| b >= lo && b <= hi).collect()
            }
            _ => vec![],
        }
    }

    /// Points inside `[lo, hi]` where the polynomial form changes; quadrature
    /// splits here.
    pub fn smoothness_breaks(&self, lo: f64, hi: f64) -> Vec<f64> {
        match &self.family {
            PotentialFamily::Tabulated { x, .. } => x.iter().copied().filter(|&b| b > lo && b < hi).collect(),
            _ => self.kinks(lo, hi),
        }
    }

    /// Whether `x` sits exactly on a derivative breakpoint.
    pub fn is_breakpoint(&self, x: f64) -> bool {
        match &self.family {
            PotentialFamily::PiecewisePolynomial { breakpoints, .. } => breakpoints.contains(&x),
            _ => false,
        }
    }

    /// A window that contains `{V <= level}`, padded by 10% of its width.
    ///
    /// Uses the square well itself when there is one; otherwise expands
    /// outward from the domain hint (or `[-1, 1]`) until `V > level` at both
    /// ends.
    pub fn window_for_level(&self, level: f64) -> Result<Interval> {
        if let Some(w) = self.hard_walls() {
            return Ok(w);
        }
        let start = self.domain_hint.unwrap_or(Interval { lo: -1.0, hi: 1.0 });
        let center = start.mid();
        let mut half = 0.5 * start.len().max(1e-3);
        for _ in 0..200 {
            let lo = center - half;
            let hi = center + half;
            if self.evaluate(lo) > level
                && self.evaluate(hi) > level
                && self.derivative_sided(lo, Side::Right) < 0.0
                && self.derivative_sided(hi, Side::Left) > 0.0
            {
                let inner = LevelIndex::build(self, Interval { lo, hi }, &LevelOptions::default())?;
                let sub = inner.sublevel(self, level)?;
                let hull = match (sub.first(), sub.last()) {
                    (Some(f), Some(l)) => Interval { lo: f.lo, hi: l.hi },
                    _ => Interval { lo, hi },
                };
                return Ok(hull.widened(0.1));
            }
            half *= 1.5;
        }
        Err(Error::Validation(format!(
            "potential does not rise above {level} within a searchable window (not confining?)"
        )))
    }

    /// Solutions of `V(x) = v` in the window.
    pub fn level_set(&self, v: f64, window: Interval, opts: &LevelOptions) -> Result<Vec<LevelPoint>> {
        if let Some(w) = self.hard_walls() {
            if v == 0.0 {
                return Err(Error::DegenerateContinuum(
                    "square-well floor equals the requested level".into(),
                ));
            }
            let _ = w;
            return Ok(vec![]);
        }
        LevelIndex::build(self, window, opts)?.roots(self, v)
    }

    /// `{V <= mu} ∩ window` as disjoint closed intervals.
    pub fn sublevel_set(&self, mu: f64, window: Interval, opts: &LevelOptions) -> Result<Vec<Interval>> {
        if let Some(w) = self.hard_walls() {
            return Ok(if mu >= 0.0 {
                w.intersect(&window).into_iter().filter(|i| !i.is_empty()).collect()
            } else {
                vec![]
            });
        }
        LevelIndex::build(self, window, opts)?.sublevel(self, mu)
    }
}

fn hermite_eval(xs: &[f64], v: &[f64], m: &[f64], x: f64) -> (f64, f64) {
    let n = xs.len();
    if x <= xs[0] {
        return (v[0] + m[0] * (x - xs[0]), m[0]);
    }
    if x >= xs[n - 1] {
        return (v[n - 1] + m[n - 1] * (x - xs[n - 1]), m[n - 1]);
    }
    let i = xs.partition_point(|&xi| xi <= x) - 1;
    let h = xs[i + 1] - xs[i];
    let t = (x - xs[i]) / h;
    let (t2, t3) = (t * t, t * t * t);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let val = h00 * v[i] + h10 * h * m[i] + h01 * v[i + 1] + h11 * h * m[i + 1];
    let d00 = (6.0 * t2 - 6.0 * t) / h;
    let d10 = 3.0 * t2 - 4.0 * t + 1.0;
    let d01 = (-6.0 * t2 + 6.0 * t) / h;
    let d11 = 3.0 * t2 - 2.0 * t;
    let der = d00 * v[i] + d10 * m[i] + d01 * v[i + 1] + d11 * m[i + 1];
    (val, der)
}

impl ScalarFn for PotentialSpec {
    fn value(&self, x: f64) -> f64 {
        self.evaluate(x)
    }
    fn slope(&self, x: f64, side: Side) -> f64 {
        self.derivative_sided(x, side)
    }
    fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        PotentialSpec::kinks(self, lo, hi)
    }
}
