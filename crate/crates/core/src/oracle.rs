//! Brute-force minimizers of the discretized energy, used to cross-check the
//! analytic solutions.
//!
//! The densities live on a uniform grid with trapezoid weights. At fixed
//! chemical potentials the discrete grand-canonical energy separates into
//! independent two-variable problems, solved exactly. At fixed particle
//! numbers a projected gradient descent with restarts is used.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Interval;
use crate::potential::PotentialSpec;
use crate::profiles::{fmt17, DensityProfile, Quadratic};

pub const DEFAULT_POINTS: usize = 4001;

/// Density threshold below which a grid point counts as empty.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub window: Interval,
    pub x: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub h: f64,
    /// Trapezoid weights.
    pub w: Vec<f64>,
}

impl Grid {
    pub fn uniform(window: Interval, m: usize, v1: &PotentialSpec, v2: &PotentialSpec) -> Result<Self> {
        if m < 2 {
            return Err(Error::Validation(format!("grid needs at least 2 points, got {m}")));
        }
        if window.is_empty() || !window.lo.is_finite() || !window.hi.is_finite() {
            return Err(Error::Validation("grid window must be finite and nonempty".into()));
        }
        let h = window.len() / (m - 1) as f64;
        let x: Vec<f64> = (0..m)
            .map(|i| if i == m - 1 { window.hi } else { window.lo + i as f64 * h })
            .collect();
        let mut w = vec![h; m];
        w[0] = 0.5 * h;
        w[m - 1] = 0.5 * h;
        Ok(Self {
            window,
            v1: x.iter().map(|&t| v1.evaluate(t)).collect(),
            v2: x.iter().map(|&t| v2.evaluate(t)).collect(),
            x,
            h,
            w,
        })
    }

    /// Grid over `{V1 ≤ level1} ∪ {V2 ≤ level2}` with a 10% margin on each
    /// side (the square well itself for hard walls).
    pub fn covering(v1: &PotentialSpec, v2: &PotentialSpec, levels: [f64; 2], m: usize) -> Result<Self> {
        let window = match v1.hard_walls() {
            Some(w) => w,
            None => v1
                .window_for_level(levels[0])?
                .hull(&v2.window_for_level(levels[1])?)
                .widened(0.1),
        };
        Self::uniform(window, m, v1, v2)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.w.iter().zip(f).map(|(w, v)| w * v).sum()
    }
}

/// Densities on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensities {
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
}

impl GridDensities {
    pub fn sample(profile: &DensityProfile, grid: &Grid) -> Self {
        let (rho1, rho2) = grid.x.iter().map(|&x| profile.density(x)).map(|(a, b)| (a.max(0.0), b.max(0.0))).unzip();
        Self { rho1, rho2 }
    }

    pub fn numbers(&self, grid: &Grid) -> [f64; 2] {
        [grid.integrate(&self.rho1), grid.integrate(&self.rho2)]
    }

    /// Trapezoid internal energy.
    pub fn internal_energy(&self, grid: &Grid, q: Quadratic) -> f64 {
        (0..grid.len())
            .map(|i| {
                let (a, b) = (self.rho1[i], self.rho2[i]);
                grid.w[i] * (q.energy_density(a, b) + grid.v1[i] * a + grid.v2[i] * b)
            })
            .sum()
    }

    pub fn grand_canonical_energy(&self, grid: &Grid, q: Quadratic, mu: [f64; 2]) -> f64 {
        let [n1, n2] = self.numbers(grid);
        self.internal_energy(grid, q) - mu[0] * n1 - mu[1] * n2
    }

    /// Same CSV layout as analytic profiles.
    pub fn write_csv<W: std::io::Write>(&self, grid: &Grid, mut w: W) -> Result<()> {
        writeln!(w, "x,rho1,rho2,V1,V2")?;
        for i in 0..grid.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt17(grid.x[i]),
                fmt17(self.rho1[i]),
                fmt17(self.rho2[i]),
                fmt17(grid.v1[i]),
                fmt17(grid.v2[i])
            )?;
        }
        Ok(())
    }
}

/// Minimizer of `½ρᵀUρ − t·ρ` over `ρ ≥ 0` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMinimum {
    pub rho: (f64, f64),
    pub energy: f64,
    /// Another KKT candidate reached the same energy.
    pub tie: bool,
}

/// Enumerates the KKT candidates: interior stationary point (when `U` is
/// positive definite), the two axis minimizers and the origin.
pub fn point_minimum(q: Quadratic, t1: f64, t2: f64) -> PointMinimum {
    let e = |a: f64, b: f64| q.energy_density(a, b) - t1 * a - t2 * b;
    let mut cands = vec![(0.0, 0.0), ((t1 / q.u11).max(0.0), 0.0), (0.0, (t2 / q.u22).max(0.0))];
    let det = q.u11 * q.u22 - q.u12 * q.u12;
    if det > 0.0 {
        let a = (q.u22 * t1 - q.u12 * t2) / det;
        let b = (q.u11 * t2 - q.u12 * t1) / det;
        if a > 0.0 && b > 0.0 {
            cands.push((a, b));
        }
    }
    let mut best = cands[0];
    let mut best_e = e(best.0, best.1);
    for &c in &cands[1..] {
        let ec = e(c.0, c.1);
        if ec < best_e {
            best = c;
            best_e = ec;
        }
    }
    let scale = best_e.abs().max(f64::MIN_POSITIVE);
    let tie = cands
        .iter()
        .filter(|&&c| c != best)
        .any(|&c| (e(c.0, c.1) - best_e).abs() <= 1e-14 * scale && best_e != 0.0);
    PointMinimum {
        rho: best,
        energy: best_e,
        tie,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseResult {
    pub densities: GridDensities,
    pub energy: f64,
    /// Grid indices where two candidates tie.
    pub ties: Vec<usize>,
}

/// Exact minimizer of the discrete grand-canonical energy for a general
/// interaction matrix.
pub fn pointwise_minimize(grid: &Grid, mu: [f64; 2], q: Quadratic) -> PointwiseResult {
    let pts: Vec<PointMinimum> = (0..grid.len())
        .into_par_iter()
        .map(|i| point_minimum(q, mu[0] - grid.v1[i], mu[1] - grid.v2[i]))
        .collect();
    let energy = pts.iter().zip(&grid.w).map(|(p, w)| w * p.energy).sum();
    let ties = pts.iter().enumerate().filter(|(_, p)| p.tie).map(|(i, _)| i).collect();
    let (rho1, rho2) = pts.iter().map(|p| p.rho).unzip();
    PointwiseResult {
        densities: GridDensities { rho1, rho2 },
        energy,
        ties,
    }
}

pub fn pointwise_minimize_fixed_mu(grid: &Grid, mu1: f64, mu2: f64, alpha: f64) -> PointwiseResult {
    pointwise_minimize(grid, [mu1, mu2], Quadratic::canonical(alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentOptions {
    pub max_iter: usize,
    /// Stop once the energy drops by less than `tol · max(1, |U|)` over
    /// ten iterations.
    pub tol: f64,
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-13,
            random_starts: 8,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentResult {
    pub densities: GridDensities,
    pub energy: f64,
    /// Mean gradient over the occupied points, per species.
    pub mu: [f64; 2],
    /// Max − min of that gradient over the occupied points.
    pub mu_spread: [f64; 2],
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    /// Energy of every accepted iterate.
    pub trace: Vec<f64>,
}

/// `argmin_ρ Σ w (ρ − y)²` over `ρ ≥ 0`, `Σ wρ = n`: `ρ = max(0, y − λ)`.
fn project(y: &[f64], w: &[f64], n: f64) -> Vec<f64> {
    if n <= 0.0 {
        return vec![0.0; y.len()];
    }
    let total_w: f64 = w.iter().sum();
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut lam = ymin - n / total_w;
    // f(λ) = Σ w max(0, y − λ) − n is convex and decreasing: Newton from
    // the left climbs monotonically to the root.
    for _ in 0..200 {
        let (mut f, mut slope) = (-n, 0.0);
        for (yi, wi) in y.iter().zip(w) {
            if *yi > lam {
                f += wi * (yi - lam);
                slope += wi;
            }
        }
        if slope == 0.0 {
            break;
        }
        let step = f / slope;
        lam += step;
        if step.abs() <= 1e-16 * lam.abs().max(1.0) {
            break;
        }
    }
    y.iter().map(|yi| (yi - lam).max(0.0)).collect()
}

fn gradient(grid: &Grid, q: Quadratic, d: &GridDensities) -> (Vec<f64>, Vec<f64>) {
    let g1 = (0..grid.len())
        .map(|i| q.u11 * d.rho1[i] + q.u12 * d.rho2[i] + grid.v1[i])
        .collect();
    let g2 = (0..grid.len())
        .map(|i| q.u22 * d.rho2[i] + q.u12 * d.rho1[i] + grid.v2[i])
        .collect();
    (g1, g2)
}

/// Projected gradient descent from `start` with Armijo backtracking.
pub fn projected_descent(grid: &Grid, n: [f64; 2], q: Quadratic, start: GridDensities, opts: &DescentOptions) -> DescentResult {
    let lip = 0.5 * (q.u11 + q.u22) + (0.25 * (q.u11 - q.u22).powi(2) + q.u12 * q.u12).sqrt();
    let mut d = GridDensities {
        rho1: project(&start.rho1, &grid.w, n[0]),
        rho2: project(&start.rho2, &grid.w, n[1]),
    };
    let mut u = d.internal_energy(grid, q);
    let mut trace = vec![u];
    let mut step = 1.0 / lip;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let (g1, g2) = gradient(grid, q, &d);
        let mut accepted = None;
        let mut t = step;
        for _ in 0..60 {
            let y1: Vec<f64> = d.rho1.iter().zip(&g1).map(|(r, g)| r - t * g).collect();
            let y2: Vec<f64> = d.rho2.iter().zip(&g2).map(|(r, g)| r - t * g).collect();
            let trial = GridDensities {
                rho1: project(&y1, &grid.w, n[0]),
                rho2: project(&y2, &grid.w, n[1]),
            };
            let ut = trial.internal_energy(grid, q);
            let lin: f64 = (0..grid.len())
                .map(|i| grid.w[i] * (g1[i] * (trial.rho1[i] - d.rho1[i]) + g2[i] * (trial.rho2[i] - d.rho2[i])))
                .sum();
            if ut <= u + 1e-4 * lin {
                accepted = Some((trial, ut));
                break;
            }
            t *= 0.5;
        }
        let Some((next, un)) = accepted else {
            converged = true;
            break;
        };
        d = next;
        u = un;
        trace.push(u);
        step = (2.0 * t).min(1.0 / lip);
        let k = trace.len();
        if k > 10 && trace[k - 11] - u < opts.tol * u.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    let (g1, g2) = gradient(grid, q, &d);
    let mut mu = [0.0; 2];
    let mut spread = [0.0; 2];
    let mut grad_norm = 0.0f64;
    for (k, (rho, g)) in [(&d.rho1, &g1), (&d.rho2, &g2)].into_iter().enumerate() {
        let occ: Vec<f64> = (1..grid.len() - 1)
            .filter(|&i| rho[i] > SUPPORT_THRESHOLD)
            .map(|i| g[i])
            .collect();
        if occ.is_empty() {
            continue;
        }
        mu[k] = occ.iter().sum::<f64>() / occ.len() as f64;
        let (lo, hi) = occ.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        spread[k] = hi - lo;
        for i in 0..grid.len() {
            // KKT residual: gradient minus multiplier on the support,
            // negative part of it off the support.
            let r = if rho[i] > SUPPORT_THRESHOLD { g[i] - mu[k] } else { (g[i] - mu[k]).min(0.0) };
            grad_norm = grad_norm.max(r.abs());
        }
    }
    DescentResult {
        densities: d,
        energy: u,
        mu,
        mu_spread: spread,
        iterations,
        converged,
        grad_norm,
        trace,
    }
}

/// Starting points: species 1 on the left or on the right part of the
/// combined single-species profile, split by particle number.
fn structured_starts(grid: &Grid, n: [f64; 2]) -> Vec<GridDensities> {
    let m = grid.len();
    let vmin = grid.v1.iter().zip(&grid.v2).map(|(a, b)| a.min(*b)).fold(f64::INFINITY, f64::min);
    let vmax = grid.v1.iter().zip(&grid.v2).map(|(a, b)| a.max(*b)).fold(f64::NEG_INFINITY, f64::max);
    let level = vmin + 0.5 * (vmax - vmin);
    let shape: Vec<f64> = (0..m)
        .map(|i| (level - 0.5 * (grid.v1[i] + grid.v2[i])).max(0.0) + 1e-3 * (vmax - vmin).max(1.0))
        .collect();
    let mut cum = vec![0.0; m];
    let mut acc = 0.0;
    for i in 0..m {
        acc += grid.w[i] * shape[i];
        cum[i] = acc;
    }
    let frac = n[0] / (n[0] + n[1]);
    let split = |left: bool| {
        let cut = if left { frac } else { 1.0 - frac } * acc;
        let first_left = |i: usize| cum[i] <= cut;
        let (a, b): (Vec<f64>, Vec<f64>) = (0..m)
            .map(|i| {
                let on_left = first_left(i);
                let s = shape[i];
                if on_left == left {
                    (s, 0.0)
                } else {
                    (0.0, s)
                }
            })
            .unzip();
        GridDensities { rho1: a, rho2: b }
    };
    vec![split(true), split(false)]
}

fn random_start(grid: &Grid, seed: u64) -> GridDensities {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rho1, rho2) = (0..grid.len()).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).unzip();
    GridDensities { rho1, rho2 }
}

/// Best projected-descent result over structured and random starts.
pub fn oracle_fixed_n(grid: &Grid, n: [f64; 2], q: Quadratic, opts: &DescentOptions) -> DescentResult {
    let mut starts = structured_starts(grid, n);
    starts.extend((0..opts.random_starts).map(|k| random_start(grid, opts.seed.wrapping_add(k as u64))));
    let results: Vec<DescentResult> = starts
        .into_par_iter()
        .map(|s| projected_descent(grid, n, q, s, opts))
        .collect();
    results
        .into_iter()
        .min_by(|a, b| {
            a.energy
                .total_cmp(&b.energy)
                .then_with(|| lexicographic(&a.densities, &b.densities))
        })
        .expect("at least one start")
}

fn lexicographic(a: &GridDensities, b: &GridDensities) -> std::cmp::Ordering {
    a.rho1
        .iter()
        .chain(&a.rho2)
        .zip(b.rho1.iter().chain(&b.rho2))
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

pub fn projected_descent_fixed_n(grid: &Grid, n1: f64, n2: f64, alpha: f64, max_iter: usize, tol: f64) -> DescentResult {
    let opts = DescentOptions {
        max_iter,
        tol,
        ..DescentOptions::default()
    };
    oracle_fixed_n(grid, [n1, n2], Quadratic::canonical(alpha), &opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    /// Oracle minus analytic discrete energy.
    pub energy_diff: f64,
    pub sup_norm: f64,
    pub l2: f64,
    /// Grid length where exactly one of the two has a species present.
    pub support_symdiff: f64,
}

pub fn compare(grid: &Grid, analytic: &GridDensities, oracle: &GridDensities, q: Quadratic) -> Discrepancy {
    let mut sup = 0.0f64;
    let mut l2 = 0.0;
    let mut sym = 0.0;
    for (a, o) in [(&analytic.rho1, &oracle.rho1), (&analytic.rho2, &oracle.rho2)] {
        for i in 0..grid.len() {
            let d = a[i] - o[i];
            sup = sup.max(d.abs());
            l2 += grid.w[i] * d * d;
            if (a[i] > SUPPORT_THRESHOLD) != (o[i] > SUPPORT_THRESHOLD) {
                sym += grid.w[i];
            }
        }
    }
    Discrepancy {
        energy_diff: oracle.internal_energy(grid, q) - analytic.internal_energy(grid, q),
        sup_norm: sup,
        l2: l2.sqrt(),
        support_symdiff: sym,
    }
}
