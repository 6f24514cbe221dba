//! Thomas-Fermi density profiles and their energies.
//!
//! A profile is a sorted list of pieces. On each piece the densities have one
//! closed form (both species mixed, or a single species), evaluated from the
//! chemical potentials and the potentials without clamping. Energies and
//! particle numbers are integrated piece by piece with composite
//! Gauss-Legendre quadrature split at the potential breakpoints.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::levelset::{LevelIndex, LevelOptions, ScalarFn};
use crate::numeric::quad::GaussLegendre;
use crate::numeric::{Interval, Side};
use crate::potential::PotentialSpec;

/// Interaction matrix `[[u11, u12], [u12, u22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub u11: f64,
    pub u22: f64,
    pub u12: f64,
}

impl Quadratic {
    /// Reduced units: unit self-interactions, cross term `alpha`.
    pub fn canonical(alpha: f64) -> Self {
        Self {
            u11: 1.0,
            u22: 1.0,
            u12: alpha,
        }
    }

    pub fn det(&self) -> f64 {
        self.u11 * self.u22 - self.u12 * self.u12
    }

    /// `U12 / √(U11 U22)`.
    pub fn alpha(&self) -> f64 {
        self.u12 / (self.u11 * self.u22).sqrt()
    }

    /// Solution of `U ρ = t`; `None` when `U` is singular.
    fn solve(&self, t1: f64, t2: f64) -> Option<(f64, f64)> {
        let det = self.det();
        if det == 0.0 {
            return None;
        }
        Some((
            (self.u22 * t1 - self.u12 * t2) / det,
            (self.u11 * t2 - self.u12 * t1) / det,
        ))
    }

    /// Interaction energy density `½ρᵀUρ`.
    pub fn energy_density(&self, r1: f64, r2: f64) -> f64 {
        0.5 * (self.u11 * r1 * r1 + self.u22 * r2 * r2) + self.u12 * r1 * r2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Species {
    One,
    Two,
}

impl Species {
    pub const BOTH: [Species; 2] = [Species::One, Species::Two];

    pub fn idx(self) -> usize {
        match self {
            Species::One => 0,
            Species::Two => 1,
        }
    }

    pub fn other(self) -> Species {
        match self {
            Species::One => Species::Two,
            Species::Two => Species::One,
        }
    }
}

impl From<Species> for u8 {
    fn from(s: Species) -> u8 {
        s.idx() as u8 + 1
    }
}

impl TryFrom<u8> for Species {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Species::One),
            2 => Ok(Species::Two),
            _ => Err(format!("species must be 1 or 2, got {v}")),
        }
    }
}

/// `c0 + c1 V1(x) + c2 V2(x)`.
#[derive(Debug, Clone, Copy)]
pub struct LinComb<'a> {
    pub c: [f64; 3],
    pub v: [&'a PotentialSpec; 2],
}

impl ScalarFn for LinComb<'_> {
    fn value(&self, x: f64) -> f64 {
        let mut s = self.c[0];
        if self.c[1] != 0.0 {
            s += self.c[1] * self.v[0].evaluate(x);
        }
        if self.c[2] != 0.0 {
            s += self.c[2] * self.v[1].evaluate(x);
        }
        s
    }
    fn slope(&self, x: f64, side: Side) -> f64 {
        self.c[1] * self.v[0].derivative_sided(x, side) + self.c[2] * self.v[1].derivative_sided(x, side)
    }
    fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut k = self.v[0].kinks(lo, hi);
        k.extend(self.v[1].kinks(lo, hi));
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }
}

/// Zeros of `f` in the window; a function identically zero contributes none.
fn cut_points<F: ScalarFn>(f: &F, window: Interval, opts: &LevelOptions) -> Result<Vec<f64>> {
    match LevelIndex::build(f, window, opts)?.roots(f, 0.0) {
        Ok(r) => Ok(r.into_iter().map(|p| p.x).collect()),
        Err(Error::DegenerateContinuum(_)) => Ok(vec![]),
        Err(e) => Err(e),
    }
}

/// The two potentials on a search window, with cached level indices.
#[derive(Debug, Clone)]
pub struct Landscape {
    v: [PotentialSpec; 2],
    window: Interval,
    idx: [LevelIndex; 2],
    opts: LevelOptions,
}

impl Landscape {
    pub fn new(v1: PotentialSpec, v2: PotentialSpec, window: Interval, opts: LevelOptions) -> Result<Self> {
        let window = match v1.hard_walls() {
            Some(w) => w,
            None => window,
        };
        let idx = [
            LevelIndex::build(&v1, window, &opts)?,
            LevelIndex::build(&v2, window, &opts)?,
        ];
        Ok(Self {
            v: [v1, v2],
            window,
            idx,
            opts,
        })
    }

    pub fn potential(&self, k: Species) -> &PotentialSpec {
        &self.v[k.idx()]
    }

    pub fn potentials(&self) -> [&PotentialSpec; 2] {
        [&self.v[0], &self.v[1]]
    }

    pub fn window(&self) -> Interval {
        self.window
    }

    pub fn options(&self) -> &LevelOptions {
        &self.opts
    }

    pub fn hard_walls(&self) -> Option<Interval> {
        self.v[0].hard_walls()
    }

    /// `{V_k <= mu}` on the window.
    pub fn sublevel(&self, k: Species, mu: f64) -> Result<Vec<Interval>> {
        if self.hard_walls().is_some() {
            return Ok(if mu >= 0.0 { vec![self.window] } else { vec![] });
        }
        match self.idx[k.idx()].sublevel(&self.v[k.idx()], mu) {
            Err(Error::DegenerateContinuum(_)) => {
                // Flat at exactly this level: whole flat part counts as support.
                self.idx[k.idx()].sublevel(&self.v[k.idx()], mu + self.opts.tol_root * mu.abs().max(1.0))
            }
            r => r,
        }
    }

    /// Extremes of `V_k` on `iv` from endpoints, kinks and critical points.
    pub fn range_on(&self, k: Species, iv: Interval) -> (f64, f64) {
        let v = &self.v[k.idx()];
        let mut lo = v.evaluate(iv.lo).min(v.evaluate(iv.hi));
        let mut hi = v.evaluate(iv.lo).max(v.evaluate(iv.hi));
        for (x, val) in self.idx[k.idx()].nodes() {
            if x > iv.lo && x < iv.hi {
                lo = lo.min(val);
                hi = hi.max(val);
            }
        }
        (lo, hi)
    }

    /// Sorted breakpoints of either potential strictly inside `[lo, hi]`.
    pub fn breaks(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut b = self.v[0].smoothness_breaks(lo, hi);
        b.extend(self.v[1].smoothness_breaks(lo, hi));
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// `∫_iv V_k`.
    pub fn integrate_potential(&self, k: Species, iv: Interval) -> f64 {
        let v = &self.v[k.idx()];
        let breaks = v.smoothness_breaks(iv.lo, iv.hi);
        GaussLegendre::default_rule().integrate_composite(iv.lo, iv.hi, &breaks, 1, |x| v.evaluate(x))
    }
}

/// Closed form of the densities on one piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Mixed,
    Single(Species),
}

impl Form {
    pub fn has(&self, k: Species) -> bool {
        match self {
            Form::Mixed => true,
            Form::Single(s) => *s == k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub span: Interval,
    pub form: Form,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    Wall,
    Zero,
    SquareWellEdge,
    /// Support runs into the search window edge (window too small).
    WindowEdge,
}

/// Sorted disjoint closed intervals with the nature of each endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub intervals: Vec<Interval>,
    pub endpoints: Vec<[EndpointKind; 2]>,
}

impl Support {
    pub fn length(&self) -> f64 {
        self.intervals.iter().map(Interval::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// Piecewise closed-form Thomas-Fermi densities.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    form: Quadratic,
    mu: [f64; 2],
    v: [PotentialSpec; 2],
    pieces: Vec<Piece>,
}

/// Mixed-region densities `(ρ1, ρ2)` at `x`; no positivity clamp.
pub fn mixed_density(
    x: f64,
    mu1: f64,
    mu2: f64,
    alpha: f64,
    v1: &PotentialSpec,
    v2: &PotentialSpec,
) -> Result<(f64, f64)> {
    if alpha == 1.0 {
        return Err(Error::DegenerateThreshold);
    }
    let t1 = mu1 - v1.evaluate(x);
    let t2 = mu2 - v2.evaluate(x);
    let d = 1.0 - alpha * alpha;
    Ok(((t1 - alpha * t2) / d, (t2 - alpha * t1) / d))
}

/// Single-species density `μ_k - V_k(x)`; no positivity clamp.
pub fn single_density(x: f64, mu_k: f64, v_k: &PotentialSpec) -> f64 {
    mu_k - v_k.evaluate(x)
}

/// How each point picks its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// Pointwise minimizer of the energy density (the Thomas-Fermi ground
    /// state at fixed μ).
    Minimizer,
    /// Mixed wherever both mixed densities are positive, otherwise the best
    /// single species.
    PreferMixed,
}

fn classify(q: &Quadratic, t1: f64, t2: f64, rule: Rule) -> Option<Form> {
    let mixed = q.solve(t1, t2).is_some_and(|(r1, r2)| r1 > 0.0 && r2 > 0.0);
    // With positive-definite U the interior stationary point is the minimum.
    if mixed && (rule == Rule::PreferMixed || q.det() > 0.0) {
        return Some(Form::Mixed);
    }
    let e1 = if t1 > 0.0 { -t1 * t1 / (2.0 * q.u11) } else { f64::INFINITY };
    let e2 = if t2 > 0.0 { -t2 * t2 / (2.0 * q.u22) } else { f64::INFINITY };
    if e1.is_infinite() && e2.is_infinite() {
        None
    } else if e1 <= e2 {
        Some(Form::Single(Species::One))
    } else {
        Some(Form::Single(Species::Two))
    }
}

/// Every point where the closed form of the pointwise problem can change.
fn form_cuts(q: &Quadratic, mu: [f64; 2], land: &Landscape) -> Result<Vec<f64>> {
    let v = land.potentials();
    let (s1, s2) = (q.u11.sqrt(), q.u22.sqrt());
    let combos = [
        [mu[0], -1.0, 0.0],
        [mu[1], 0.0, -1.0],
        [q.u22 * mu[0] - q.u12 * mu[1], -q.u22, q.u12],
        [q.u11 * mu[1] - q.u12 * mu[0], q.u12, -q.u11],
        [mu[0] / s1 - mu[1] / s2, -1.0 / s1, 1.0 / s2],
    ];
    let w = land.window();
    let mut cuts = vec![w.lo, w.hi];
    if land.hard_walls().is_none() {
        for c in combos {
            cuts.extend(cut_points(&LinComb { c, v }, w, land.options())?);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    Ok(cuts)
}

fn pieces_from_cuts<F: Fn(f64) -> Option<Form>>(cuts: &[f64], pick: F) -> Vec<Piece> {
    let mut out: Vec<Piece> = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let Some(form) = pick(0.5 * (a + b)) else { continue };
        match out.last_mut() {
            Some(last) if last.form == form && last.span.hi == a => last.span.hi = b,
            _ => out.push(Piece {
                span: Interval { lo: a, hi: b },
                form,
            }),
        }
    }
    out
}

/// Profile determined pointwise by the chemical potentials.
pub fn pointwise_profile(q: Quadratic, mu: [f64; 2], land: &Landscape, rule: Rule) -> Result<DensityProfile> {
    let cuts = form_cuts(&q, mu, land)?;
    let [v1, v2] = land.potentials();
    let pieces = pieces_from_cuts(&cuts, |x| classify(&q, mu[0] - v1.evaluate(x), mu[1] - v2.evaluate(x), rule));
    Ok(DensityProfile::new(q, mu, v1.clone(), v2.clone(), pieces))
}

/// `{x : min(α,1/α)(μ2−V2) ≤ μ1−V1 ≤ max(α,1/α)(μ2−V2)} ∩ {V1 ≤ μ1} ∩ {V2 ≤ μ2}`:
/// where both mixed densities are nonnegative.
pub fn mixed_support_filter(
    mu1: f64,
    mu2: f64,
    alpha: f64,
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    window: Interval,
) -> Result<Support> {
    if alpha == 1.0 {
        return Err(Error::DegenerateThreshold);
    }
    let land = Landscape::new(v1.clone(), v2.clone(), window, LevelOptions::default())?;
    let q = Quadratic::canonical(alpha);
    let mu = [mu1, mu2];
    let cuts = form_cuts(&q, mu, &land)?;
    let pieces = pieces_from_cuts(&cuts, |x| {
        let t1 = mu1 - v1.evaluate(x);
        let t2 = mu2 - v2.evaluate(x);
        let (r1, r2) = q.solve(t1, t2)?;
        (r1 >= 0.0 && r2 >= 0.0 && t1 >= 0.0 && t2 >= 0.0 && (t1 > 0.0 || t2 > 0.0)).then_some(Form::Mixed)
    });
    let p = DensityProfile::new(q, mu, v1.clone(), v2.clone(), pieces);
    let mut s = p.support(Species::One);
    // Mixed endpoints are wherever the filter stops holding.
    for e in &mut s.endpoints {
        for k in e.iter_mut() {
            if *k == EndpointKind::Wall {
                *k = EndpointKind::Zero;
            }
        }
    }
    Ok(s)
}

impl DensityProfile {
    pub fn new(form: Quadratic, mu: [f64; 2], v1: PotentialSpec, v2: PotentialSpec, pieces: Vec<Piece>) -> Self {
        Self {
            form,
            mu,
            v: [v1, v2],
            pieces,
        }
    }

    /// A profile with no particles.
    pub fn empty(form: Quadratic, mu: [f64; 2], v1: PotentialSpec, v2: PotentialSpec) -> Self {
        Self::new(form, mu, v1, v2, vec![])
    }

    pub fn form(&self) -> Quadratic {
        self.form
    }

    pub fn mu(&self) -> [f64; 2] {
        self.mu
    }

    pub fn potential(&self, k: usize) -> &PotentialSpec {
        &self.v[k]
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Same pieces, different units.
    pub(crate) fn relabel_units(&self, form: Quadratic, mu: [f64; 2], v: [PotentialSpec; 2]) -> Self {
        Self {
            form,
            mu,
            v,
            pieces: self.pieces.clone(),
        }
    }

    fn piece_at(&self, x: f64) -> Option<&Piece> {
        let i = self.pieces.partition_point(|p| p.span.hi < x);
        self.pieces.get(i).filter(|p| p.span.contains(x))
    }

    fn eval_form(&self, form: Form, x: f64) -> (f64, f64) {
        let t1 = self.mu[0] - self.v[0].evaluate(x);
        let t2 = self.mu[1] - self.v[1].evaluate(x);
        match form {
            Form::Mixed => self.form.solve(t1, t2).unwrap_or((f64::NAN, f64::NAN)),
            Form::Single(Species::One) => (t1 / self.form.u11, 0.0),
            Form::Single(Species::Two) => (0.0, t2 / self.form.u22),
        }
    }

    /// `(ρ1(x), ρ2(x))`; zero outside the supports.
    pub fn density(&self, x: f64) -> (f64, f64) {
        match self.piece_at(x) {
            Some(p) => self.eval_form(p.form, x),
            None => (0.0, 0.0),
        }
    }

    pub fn support(&self, k: Species) -> Support {
        let mut intervals: Vec<Interval> = Vec::new();
        let mut forms: Vec<(Form, Form)> = Vec::new();
        for p in self.pieces.iter().filter(|p| p.form.has(k)) {
            match intervals.last_mut() {
                Some(last) if last.hi == p.span.lo => {
                    last.hi = p.span.hi;
                    forms.last_mut().unwrap().1 = p.form;
                }
                _ => {
                    intervals.push(p.span);
                    forms.push((p.form, p.form));
                }
            }
        }
        let hard = self.v[0].hard_walls();
        let scale = self.mu[k.idx()].abs().max(1.0);
        let kind = |x: f64, form: Form| -> EndpointKind {
            if let Some(h) = hard {
                if x == h.lo || x == h.hi {
                    return EndpointKind::SquareWellEdge;
                }
            }
            let (r1, r2) = self.eval_form(form, x);
            let r = if k == Species::One { r1 } else { r2 };
            if r.abs() <= 1e-8 * scale {
                return EndpointKind::Zero;
            }
            let touching_other = self
                .pieces
                .iter()
                .any(|p| !p.form.has(k) && (p.span.lo == x || p.span.hi == x));
            if touching_other {
                EndpointKind::Wall
            } else {
                EndpointKind::WindowEdge
            }
        };
        let endpoints = intervals
            .iter()
            .zip(&forms)
            .map(|(iv, (fl, fr))| [kind(iv.lo, *fl), kind(iv.hi, *fr)])
            .collect();
        Support { intervals, endpoints }
    }

    fn integrate_pieces<F: Fn(f64, f64, f64, f64, f64) -> f64>(&self, subdivisions: usize, g: F) -> f64 {
        let rule = GaussLegendre::default_rule();
        self.pieces
            .iter()
            .map(|p| {
                let mut breaks = self.v[0].smoothness_breaks(p.span.lo, p.span.hi);
                breaks.extend(self.v[1].smoothness_breaks(p.span.lo, p.span.hi));
                breaks.sort_by(f64::total_cmp);
                rule.integrate_composite(p.span.lo, p.span.hi, &breaks, subdivisions, |x| {
                    let (r1, r2) = self.eval_form(p.form, x);
                    g(x, r1, r2, self.v[0].evaluate(x), self.v[1].evaluate(x))
                })
            })
            .sum()
    }

    pub fn particle_numbers(&self) -> (f64, f64) {
        (
            self.integrate_pieces(1, |_, r1, _, _, _| r1),
            self.integrate_pieces(1, |_, _, r2, _, _| r2),
        )
    }

    /// `∫ ½ρᵀUρ + V1ρ1 + V2ρ2` with `subdivisions` equal parts per smooth segment.
    pub fn internal_energy_with(&self, subdivisions: usize) -> f64 {
        let q = self.form;
        self.integrate_pieces(subdivisions, |_, r1, r2, v1, v2| {
            q.energy_density(r1, r2) + v1 * r1 + v2 * r2
        })
    }

    pub fn internal_energy(&self) -> f64 {
        self.internal_energy_with(1)
    }

    /// `U − μ1N1 − μ2N2` with the profile's own chemical potentials.
    pub fn grand_canonical_energy(&self) -> f64 {
        grand_canonical_energy(self, self.mu[0], self.mu[1])
    }

    /// Samples each piece at `samples` evenly spaced points as CSV
    /// `x,rho1,rho2,V1,V2`.
    pub fn write_csv<W: Write>(&self, mut w: W, samples: usize) -> Result<()> {
        writeln!(w, "x,rho1,rho2,V1,V2")?;
        let n = samples.max(2);
        for p in &self.pieces {
            for i in 0..n {
                let x = if i + 1 == n {
                    p.span.hi
                } else {
                    p.span.lo + p.span.len() * i as f64 / (n - 1) as f64
                };
                let (r1, r2) = self.eval_form(p.form, x);
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    fmt17(x),
                    fmt17(r1),
                    fmt17(r2),
                    fmt17(self.v[0].evaluate(x)),
                    fmt17(self.v[1].evaluate(x))
                )?;
            }
        }
        Ok(())
    }
}

/// 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn particle_numbers(profile: &DensityProfile) -> (f64, f64) {
    profile.particle_numbers()
}

pub fn internal_energy(profile: &DensityProfile) -> f64 {
    profile.internal_energy()
}

pub fn grand_canonical_energy(profile: &DensityProfile, mu1: f64, mu2: f64) -> f64 {
    let (n1, n2) = profile.particle_numbers();
    profile.internal_energy() - mu1 * n1 - mu2 * n2
}
