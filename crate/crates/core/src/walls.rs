//! Separated configurations: domain-wall topologies and their stationary
//! positions.
//!
//! A configuration with walls `R_1 < … < R_n` splits the window into
//! `n + 1` intervals occupied alternately by the two species, starting with
//! the leading species. Inside each interval the occupying species fills the
//! sublevel set `{V_k ≤ μ_k}`. Stationarity requires `ρ1 = ρ2` at every wall,
//! i.e. `φ(R_j) = μ1 − μ2` with `φ = V1 − V2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::levelset::{LevelIndex, LevelOptions, ScalarFn};
use crate::numeric::linalg;
use crate::numeric::roots::brent;
use crate::numeric::{Interval, Side};
use crate::potential::PotentialSpec;
use crate::profiles::{DensityProfile, Form, Landscape, Piece, Quadratic, Species};
use crate::settings::Tolerances;

/// `φ(x) = V1(x) − V2(x)`.
#[derive(Debug, Clone, Copy)]
pub struct PhiFunction<'a> {
    pub v1: &'a PotentialSpec,
    pub v2: &'a PotentialSpec,
}

impl<'a> PhiFunction<'a> {
    pub fn new(v1: &'a PotentialSpec, v2: &'a PotentialSpec) -> Self {
        Self { v1, v2 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.v1.hard_walls().is_some() && self.v1 == self.v2 {
            return 0.0;
        }
        self.v1.evaluate(x) - self.v2.evaluate(x)
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        Ok(self.v1.derivative(x)? - self.v2.derivative(x)?)
    }

    pub fn derivative_sided(&self, x: f64, side: Side) -> f64 {
        self.v1.derivative_sided(x, side) - self.v2.derivative_sided(x, side)
    }

    /// Mean of the one-sided derivatives (they agree away from breakpoints).
    pub fn derivative_mean(&self, x: f64) -> f64 {
        0.5 * (self.derivative_sided(x, Side::Left) + self.derivative_sided(x, Side::Right))
    }

    pub fn is_breakpoint(&self, x: f64) -> bool {
        self.v1.is_breakpoint(x) || self.v2.is_breakpoint(x)
    }
}

impl ScalarFn for PhiFunction<'_> {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }
    fn slope(&self, x: f64, side: Side) -> f64 {
        self.derivative_sided(x, side)
    }
    fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut k = self.v1.kinks(lo, hi);
        k.extend(self.v2.kinks(lo, hi));
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }
}

/// Topology of a separated configuration, before wall positions are known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skeleton {
    pub n: usize,
    pub leading: Species,
    pub labels: Vec<i8>,
    pub is_maximal: bool,
}

impl Skeleton {
    pub fn new(n: usize, leading: Species, is_maximal: bool) -> Self {
        Self {
            n,
            leading,
            labels: labels(n, leading),
            is_maximal,
        }
    }
}

/// `s_j = +1` when `R_j` is the upper border of a species-1 interval.
pub fn labels(n: usize, leading: Species) -> Vec<i8> {
    let first = if leading == Species::One { 1 } else { -1 };
    (0..n).map(|j| if j % 2 == 0 { first } else { -first }).collect()
}

/// Species occupying interval `i` (between walls `i` and `i + 1`).
pub fn interval_species(i: usize, leading: Species) -> Species {
    if i % 2 == 0 {
        leading
    } else {
        leading.other()
    }
}

/// Upper bound on the number of stationary walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallBound {
    /// Largest number of transversal solutions of `φ = f` over all `f`.
    pub max_roots: usize,
    /// `φ` is constant on the window (equal or flat potentials).
    pub constant: bool,
}

pub fn wall_bound(v1: &PotentialSpec, v2: &PotentialSpec, window: Interval, opts: &LevelOptions) -> Result<WallBound> {
    let phi = PhiFunction::new(v1, v2);
    let idx = LevelIndex::build(&phi, window, opts)?;
    Ok(WallBound {
        max_roots: idx.max_root_count(),
        constant: idx.is_constant(),
    })
}

/// Skeletons with `0..=min(max_walls, bound)` walls and both leading species.
///
/// With constant `φ` a single wall is the only isolated stationary topology;
/// more walls form a continuum and are left out.
pub fn enumerate_topologies(
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    max_walls: usize,
    window: Interval,
) -> Result<Vec<Skeleton>> {
    let b = wall_bound(v1, v2, window, &LevelOptions::default())?;
    Ok(skeletons_for(b, max_walls))
}

pub fn skeletons_for(b: WallBound, max_walls: usize) -> Vec<Skeleton> {
    let cap = if b.constant { 1 } else { b.max_roots }.min(max_walls);
    (0..=cap)
        .flat_map(|n| {
            let maximal = !b.constant && n > 0 && n == b.max_roots;
            Species::BOTH.into_iter().map(move |lead| Skeleton::new(n, lead, maximal))
        })
        .collect()
}

/// `(μ1 − μ2) − φ(R_j)` for every wall.
pub fn stationarity_residual(walls: &[f64], mu1: f64, mu2: f64, v1: &PotentialSpec, v2: &PotentialSpec) -> Vec<f64> {
    let phi = PhiFunction::new(v1, v2);
    walls.iter().map(|&r| (mu1 - mu2) - phi.eval(r)).collect()
}

/// Common potential value `(μ1 − μ2)/(1 − β)` of all walls when `V2 = βV1`.
pub fn proportional_wall_level(mu1: f64, mu2: f64, beta: f64) -> Result<f64> {
    if beta == 1.0 {
        return Err(Error::DegenerateContinuum(
            "beta = 1: equal potentials leave wall positions undetermined".into(),
        ));
    }
    Ok((mu1 - mu2) / (1.0 - beta))
}

/// A separated configuration with chemical potentials and supports.
#[derive(Debug, Clone, PartialEq)]
pub struct WallConfig {
    pub walls: Vec<f64>,
    pub labels: Vec<i8>,
    pub leading: Species,
    pub mu: [f64; 2],
    pub numbers: [f64; 2],
    pub supports: [Vec<Interval>; 2],
    pub is_maximal: bool,
    /// Both densities vanish at the wall: it sits in a gap and is inert.
    pub vacuum: Vec<bool>,
    /// The wall sits on a potential breakpoint.
    pub at_breakpoint: Vec<bool>,
    pub profile: DensityProfile,
}

impl WallConfig {
    pub fn n(&self) -> usize {
        self.walls.len()
    }

    pub fn support_lengths(&self) -> [f64; 2] {
        [
            self.supports[0].iter().map(Interval::len).sum(),
            self.supports[1].iter().map(Interval::len).sum(),
        ]
    }

    /// Densities of both species at wall `j`, clamped at zero.
    pub fn wall_densities(&self, j: usize) -> (f64, f64) {
        let r = self.walls[j];
        (
            (self.mu[0] - self.profile.potential(0).evaluate(r)).max(0.0),
            (self.mu[1] - self.profile.potential(1).evaluate(r)).max(0.0),
        )
    }

    /// `ρ1(R_j) − ρ2(R_j)`.
    pub fn residuals(&self) -> Vec<f64> {
        stationarity_residual(
            &self.walls,
            self.mu[0],
            self.mu[1],
            self.profile.potential(0),
            self.profile.potential(1),
        )
        .into_iter()
        .zip(&self.vacuum)
        .map(|(r, &vac)| if vac { 0.0 } else { r })
        .collect()
    }

    /// `max_j |ρ1 − ρ2| / max(1, ρ)`.
    pub fn stationarity_error(&self) -> f64 {
        self.residuals()
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let (a, b) = self.wall_densities(j);
                r.abs() / a.max(b).max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// `∂E/∂R_j = s_j (ρ2² − ρ1²)/2`, valid in both ensembles (at fixed N with
    /// the chemical potentials following the walls).
    pub fn energy_gradient(&self) -> Vec<f64> {
        (0..self.n())
            .map(|j| {
                let (a, b) = self.wall_densities(j);
                0.5 * self.labels[j] as f64 * (b * b - a * a)
            })
            .collect()
    }

    pub fn internal_energy(&self) -> f64 {
        self.profile.internal_energy()
    }

    pub fn grand_canonical_energy(&self) -> f64 {
        self.profile.internal_energy() - self.mu[0] * self.numbers[0] - self.mu[1] * self.numbers[1]
    }

    fn same_as(&self, other: &WallConfig, tol: f64) -> bool {
        let same_support = |a: &[Interval], b: &[Interval]| {
            a.len() == b.len()
                && a.iter()
                    .zip(b)
                    .all(|(x, y)| (x.lo - y.lo).abs() <= tol && (x.hi - y.hi).abs() <= tol)
        };
        same_support(&self.supports[0], &other.supports[0]) && same_support(&self.supports[1], &other.supports[1])
    }
}

/// Removes configurations whose supports repeat an earlier one (the
/// earlier, ideally with fewer walls, is kept).
pub fn dedup_configs(configs: Vec<WallConfig>, tol: f64) -> Vec<WallConfig> {
    let mut out: Vec<WallConfig> = Vec::new();
    for c in configs {
        if !out.iter().any(|o| o.same_as(&c, tol)) {
            out.push(c);
        }
    }
    out
}

fn intersect_all(a: &[Interval], b: Interval) -> Vec<Interval> {
    a.iter()
        .filter_map(|s| s.intersect(&b))
        .filter(|i| i.len() > 0.0)
        .collect()
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if items.len() < k {
        return vec![];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        for mut rest in combinations(&items[i + 1..], k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `μ_k` such that `Σ ∫ (μ_k − V_k)₊` over `intervals` equals `target`.
pub fn normalize_species(land: &Landscape, k: Species, intervals: &[Interval], target: f64, tol_norm: f64) -> Result<f64> {
    let vmin = intervals
        .iter()
        .map(|iv| land.range_on(k, *iv).0)
        .fold(f64::INFINITY, f64::min);
    if target == 0.0 {
        return Ok(vmin);
    }
    let total: f64 = intervals.iter().map(Interval::len).sum();
    let count = |mu: f64| -> Result<(f64, f64)> {
        let sub = land.sublevel(k, mu)?;
        let (mut n, mut len) = (0.0, 0.0);
        for iv in intervals {
            for c in intersect_all(&sub, *iv) {
                n += mu * c.len() - land.integrate_potential(k, c);
                len += c.len();
            }
        }
        Ok((n, len))
    };
    let (mut lo, mut hi) = (vmin, f64::INFINITY);
    let mut mu = vmin + target / total;
    let mut last = f64::INFINITY;
    for _ in 0..200 {
        let (n, len) = count(mu)?;
        let res = n - target;
        last = res;
        if res.abs() <= 4.0 * f64::EPSILON * target {
            return Ok(mu);
        }
        if res < 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let newton = if len > 0.0 { mu - res / len } else { f64::NAN };
        let next = if newton > lo && newton < hi {
            newton
        } else if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            mu + (mu - vmin).max(target / total)
        };
        if hi.is_finite() && hi - lo <= 4.0 * f64::EPSILON * mu.abs().max(1.0) || next == mu {
            break;
        }
        mu = next;
    }
    if last.abs() <= tol_norm * target {
        Ok(mu)
    } else {
        Err(Error::NoConvergence {
            iterations: 200,
            detail: format!("normalization of species {} stalled at residual {last}", k.idx() + 1),
        })
    }
}

/// Stationary-wall solver on a fixed landscape.
#[derive(Debug, Clone)]
pub struct WallSolver<'a> {
    land: &'a Landscape,
    phi_idx: LevelIndex,
    alpha: f64,
    tol: Tolerances,
}

/// Number of `f` samples per monotone subrange in the wall-level scan.
const LEVEL_SAMPLES: usize = 24;

impl<'a> WallSolver<'a> {
    pub fn new(land: &'a Landscape, alpha: f64, tol: Tolerances) -> Result<Self> {
        let [v1, v2] = land.potentials();
        let phi_idx = LevelIndex::build(&PhiFunction::new(v1, v2), land.window(), land.options())?;
        Ok(Self {
            land,
            phi_idx,
            alpha,
            tol,
        })
    }

    pub fn landscape(&self) -> &Landscape {
        self.land
    }

    pub fn phi(&self) -> PhiFunction<'a> {
        let [v1, v2] = self.land.potentials();
        PhiFunction::new(v1, v2)
    }

    pub fn bound(&self) -> WallBound {
        WallBound {
            max_roots: self.phi_idx.max_root_count(),
            constant: self.phi_idx.is_constant(),
        }
    }

    fn intervals(&self, walls: &[f64]) -> Vec<Interval> {
        let w = self.land.window();
        let mut bounds = vec![w.lo];
        bounds.extend_from_slice(walls);
        bounds.push(w.hi);
        bounds.windows(2).map(|b| Interval { lo: b[0], hi: b[1] }).collect()
    }

    fn check_walls(&self, walls: &[f64]) -> Result<()> {
        let w = self.land.window();
        let gap = 10.0 * self.tol.tol_root;
        let mut prev = w.lo;
        for &r in walls {
            if !(r - prev > gap) {
                return Err(Error::InfeasibleTopology(format!(
                    "walls collide or leave the window near x = {r}"
                )));
            }
            prev = r;
        }
        if !(w.hi - prev > gap) {
            return Err(Error::InfeasibleTopology(format!(
                "walls collide or leave the window near x = {prev}"
            )));
        }
        Ok(())
    }

    /// Builds the configuration for given walls and chemical potentials.
    /// Fails if some designated interval ends up with no particles.
    pub fn config_at(&self, walls: &[f64], leading: Species, mu: [f64; 2], numbers: Option<[f64; 2]>) -> Result<WallConfig> {
        self.check_walls(walls)?;
        let subs = [
            self.land.sublevel(Species::One, mu[0])?,
            self.land.sublevel(Species::Two, mu[1])?,
        ];
        let mut pieces = Vec::new();
        let mut supports: [Vec<Interval>; 2] = [vec![], vec![]];
        for (i, iv) in self.intervals(walls).into_iter().enumerate() {
            let k = interval_species(i, leading);
            let s = intersect_all(&subs[k.idx()], iv);
            if s.is_empty() {
                return Err(Error::InfeasibleTopology(format!(
                    "species {} has no support between {} and {}",
                    k.idx() + 1,
                    iv.lo,
                    iv.hi
                )));
            }
            for span in &s {
                pieces.push(Piece {
                    span: *span,
                    form: Form::Single(k),
                });
            }
            supports[k.idx()].extend(s);
        }
        let [v1, v2] = self.land.potentials();
        let profile = DensityProfile::new(Quadratic::canonical(self.alpha), mu, v1.clone(), v2.clone(), pieces);
        let numbers = match numbers {
            Some(n) => n,
            None => {
                let (a, b) = profile.particle_numbers();
                [a, b]
            }
        };
        let phi = self.phi();
        let scale = mu[0].abs().max(mu[1].abs()).max(1.0);
        let vacuum = walls
            .iter()
            .map(|&r| mu[0] - v1.evaluate(r) <= 1e-12 * scale && mu[1] - v2.evaluate(r) <= 1e-12 * scale)
            .collect();
        Ok(WallConfig {
            walls: walls.to_vec(),
            labels: labels(walls.len(), leading),
            leading,
            mu,
            numbers,
            supports,
            is_maximal: false,
            vacuum,
            at_breakpoint: walls.iter().map(|&r| phi.is_breakpoint(r)).collect(),
            profile,
        })
    }

    fn normalize(&self, k: Species, intervals: &[Interval], target: f64) -> Result<f64> {
        normalize_species(self.land, k, intervals, target, self.tol.tol_norm)
    }

    /// Fixed-N configuration for given walls: chemical potentials from the
    /// normalization conditions.
    pub fn config_fixed_n(&self, walls: &[f64], leading: Species, n: [f64; 2]) -> Result<WallConfig> {
        self.check_walls(walls)?;
        let ivs = self.intervals(walls);
        let mut mu = [0.0; 2];
        for k in Species::BOTH {
            let mine: Vec<Interval> = ivs
                .iter()
                .enumerate()
                .filter(|(i, _)| interval_species(*i, leading) == k)
                .map(|(_, iv)| *iv)
                .collect();
            if mine.is_empty() {
                if n[k.idx()] > 0.0 {
                    return Err(Error::InfeasibleTopology(format!(
                        "species {} has particles but no interval",
                        k.idx() + 1
                    )));
                }
                mu[k.idx()] = self.land.range_on(k, self.land.window()).0;
                continue;
            }
            if n[k.idx()] == 0.0 {
                return Err(Error::InfeasibleTopology(format!(
                    "species {} has an interval but no particles",
                    k.idx() + 1
                )));
            }
            mu[k.idx()] = self.normalize(k, &mine, n[k.idx()])?;
        }
        self.config_at(walls, leading, mu, Some(n))
    }

    /// All stationary realizations of a skeleton at fixed chemical potentials:
    /// walls on subsets of the transversal roots of `φ = μ1 − μ2`.
    pub fn solve_fixed_mu(&self, sk: &Skeleton, mu: [f64; 2]) -> Result<Vec<WallConfig>> {
        let mark = |mut c: WallConfig| {
            c.is_maximal = sk.is_maximal;
            c
        };
        if sk.n == 0 {
            return Ok(self.config_at(&[], sk.leading, mu, None).map(mark).into_iter().collect());
        }
        let phi = self.phi();
        let roots: Vec<f64> = self
            .phi_idx
            .roots(&phi, mu[0] - mu[1])?
            .into_iter()
            .filter(|p| !p.tangential)
            .map(|p| p.x)
            .collect();
        if roots.len() < sk.n {
            return Err(Error::InfeasibleTopology(format!(
                "{} walls requested but phi = mu1 - mu2 has {} transversal roots",
                sk.n,
                roots.len()
            )));
        }
        let idx: Vec<usize> = (0..roots.len()).collect();
        let configs = combinations(&idx, sk.n)
            .into_iter()
            .filter_map(|sub| {
                let walls: Vec<f64> = sub.iter().map(|&i| roots[i]).collect();
                self.config_at(&walls, sk.leading, mu, None).ok().map(mark)
            })
            .collect();
        Ok(dedup_configs(configs, 1e3 * self.tol.tol_root))
    }

    fn root_on_piece(&self, piece: (f64, f64, f64, f64), f: f64) -> Result<f64> {
        let (xa, xb, fa, fb) = piece;
        let phi = self.phi();
        brent(|x| phi.eval(x) - f, xa, xb, fa - f, fb - f, 0.0)
    }

    /// Every stationary realization of a skeleton at fixed particle numbers.
    ///
    /// Stationary walls share the level `f = μ1 − μ2` of `φ`. The range of
    /// `f` is split where the root count of `φ = f` changes; on each subrange
    /// every choice of `n` roots is followed as `f` varies and the
    /// consistency condition `μ1(R(f)) − μ2(R(f)) = f` is bracketed and
    /// solved.
    pub fn realize_fixed_n(&self, sk: &Skeleton, n: [f64; 2]) -> Result<Vec<WallConfig>> {
        let mark = |mut c: WallConfig| {
            c.is_maximal = sk.is_maximal;
            c
        };
        if sk.n == 0 {
            return Ok(vec![mark(self.config_fixed_n(&[], sk.leading, n)?)]);
        }
        if n[0] == 0.0 || n[1] == 0.0 {
            return Err(Error::InfeasibleTopology("walls need both species present".into()));
        }
        let bound = self.bound();
        if bound.constant {
            if sk.n > 1 {
                return Err(Error::DegenerateContinuum(format!(
                    "phi is constant: {}-wall configurations form a continuum",
                    sk.n
                )));
            }
            return Ok(self.realize_constant_phi(sk, n)?.into_iter().map(mark).collect());
        }
        let pieces = self.phi_idx.monotone_pieces();
        let mut levels: Vec<f64> = pieces.iter().flat_map(|p| [p.2, p.3]).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let mut found: Vec<WallConfig> = Vec::new();
        for w in levels.windows(2) {
            let (c0, c1) = (w[0], w[1]);
            let active: Vec<usize> = (0..pieces.len())
                .filter(|&i| {
                    let (_, _, fa, fb) = pieces[i];
                    fa.min(fb) <= c0 && fa.max(fb) >= c1
                })
                .collect();
            for sub in combinations(&active, sk.n) {
                let walls_at = |f: f64| -> Result<Vec<f64>> {
                    sub.iter().map(|&i| self.root_on_piece(pieces[i], f)).collect()
                };
                let g = |f: f64| -> f64 {
                    walls_at(f)
                        .and_then(|r| self.config_fixed_n(&r, sk.leading, n))
                        .map(|c| c.mu[0] - c.mu[1] - f)
                        .unwrap_or(f64::NAN)
                };
                // Chebyshev-Lobatto nodes, ends pulled in so the roots stay apart.
                let fs: Vec<f64> = (0..LEVEL_SAMPLES)
                    .map(|j| {
                        let t = std::f64::consts::PI * j as f64 / (LEVEL_SAMPLES - 1) as f64;
                        let u = (0.5 * (1.0 - t.cos())).clamp(1e-10, 1.0 - 1e-10);
                        c0 + (c1 - c0) * u
                    })
                    .collect();
                let gs: Vec<f64> = fs.iter().map(|&f| g(f)).collect();
                for j in 0..LEVEL_SAMPLES - 1 {
                    let (ga, gb) = (gs[j], gs[j + 1]);
                    if !(ga.is_finite() && gb.is_finite()) {
                        continue;
                    }
                    let root = if ga == 0.0 {
                        Some(fs[j])
                    } else if ga.signum() != gb.signum() && gb != 0.0 {
                        brent(g, fs[j], fs[j + 1], ga, gb, 0.0).ok()
                    } else {
                        None
                    };
                    let Some(fstar) = root else { continue };
                    let Ok(walls) = walls_at(fstar) else { continue };
                    let cfg = match self.config_fixed_n(&walls, sk.leading, n) {
                        Ok(c) if c.stationarity_error() <= self.tol.tol_stat => c,
                        Ok(c) => match self.solve_fixed_n(sk, n, &c.walls) {
                            Ok(c) => c,
                            Err(_) => continue,
                        },
                        Err(_) => continue,
                    };
                    found.push(mark(cfg));
                }
            }
        }
        Ok(dedup_configs(found, 1e3 * self.tol.tol_root))
    }

    /// One wall with constant `φ = φ0`: solve `μ1(R) − μ2(R) = φ0` in `R`.
    fn realize_constant_phi(&self, sk: &Skeleton, n: [f64; 2]) -> Result<Vec<WallConfig>> {
        let w = self.land.window();
        let phi0 = self.phi().eval(w.mid());
        let h = |r: f64| -> f64 {
            self.config_fixed_n(&[r], sk.leading, n)
                .map(|c| c.mu[0] - c.mu[1] - phi0)
                .unwrap_or(f64::NAN)
        };
        const K: usize = 64;
        let rs: Vec<f64> = (0..K).map(|j| w.lo + w.len() * (j as f64 + 0.5) / K as f64).collect();
        let hs: Vec<f64> = rs.iter().map(|&r| h(r)).collect();
        let mut out = Vec::new();
        for j in 0..K - 1 {
            let (a, b) = (hs[j], hs[j + 1]);
            if !(a.is_finite() && b.is_finite()) || (a.signum() == b.signum() && a != 0.0) {
                continue;
            }
            let Ok(r) = brent(h, rs[j], rs[j + 1], a, b, 0.0) else { continue };
            if let Ok(c) = self.config_fixed_n(&[r], sk.leading, n) {
                out.push(c);
            }
        }
        Ok(dedup_configs(out, 1e3 * self.tol.tol_root))
    }

    /// Damped Newton on the wall positions from `initial`, with the chemical
    /// potentials re-solved from the normalization at every step.
    pub fn solve_fixed_n(&self, sk: &Skeleton, n: [f64; 2], initial: &[f64]) -> Result<WallConfig> {
        if initial.len() != sk.n {
            return Err(Error::Validation(format!(
                "initial guess has {} walls, skeleton has {}",
                initial.len(),
                sk.n
            )));
        }
        let phi = self.phi();
        let mut cfg = self.config_fixed_n(initial, sk.leading, n)?;
        const MAX_ITER: usize = 100;
        for _ in 0..MAX_ITER {
            if cfg.stationarity_error() <= self.tol.tol_stat {
                cfg.is_maximal = sk.is_maximal;
                return Ok(cfg);
            }
            let r = cfg.residuals();
            let [l1, l2] = cfg.support_lengths();
            let m = cfg.n();
            let mut jac = linalg::zeros(m);
            for k in 0..m {
                let (a, b) = cfg.wall_densities(k);
                let col = -(cfg.labels[k] as f64) * (a / l1 + b / l2);
                for (j, row) in jac.iter_mut().enumerate() {
                    row[k] = col;
                    if j == k {
                        row[k] -= phi.derivative_mean(cfg.walls[j]);
                    }
                }
            }
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let step = linalg::solve(&jac, &neg)?;
            let norm = |c: &WallConfig| c.residuals().iter().map(|v| v * v).sum::<f64>();
            let base = norm(&cfg);
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let trial: Vec<f64> = cfg.walls.iter().zip(&step).map(|(x, d)| x + lambda * d).collect();
                if let Ok(c) = self.config_fixed_n(&trial, sk.leading, n) {
                    if norm(&c) < base {
                        accepted = Some(c);
                        break;
                    }
                }
                lambda *= 0.5;
            }
            match accepted {
                Some(c) => cfg = c,
                None => break,
            }
        }
        if cfg.stationarity_error() <= self.tol.tol_stat {
            cfg.is_maximal = sk.is_maximal;
            return Ok(cfg);
        }
        Err(Error::NoConvergence {
            iterations: MAX_ITER,
            detail: format!("wall Newton stalled with residuals {:?}", cfg.residuals()),
        })
    }
}
