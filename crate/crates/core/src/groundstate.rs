//! Ground-state selection: candidate generation, stability and exclusion
//! filtering, energy ranking and the oracle cross-check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::levelset::LevelOptions;
use crate::numeric::linalg;
use crate::numeric::Interval;
use crate::oracle::{self, DescentOptions, Discrepancy, Grid, GridDensities};
use crate::potential::PotentialSpec;
use crate::profiles::{pointwise_profile, DensityProfile, EndpointKind, Form, Landscape, Quadratic, Rule, Species};
use crate::scaling::{Ensemble, EnsembleKind, ReducedParams};
use crate::settings::Tolerances;
use crate::squarewell::WellProblem;
pub use crate::squarewell::Regime;
use crate::stability::{assemble_hessian, nonmax_exclusion, ExclusionReport, HessianReport};
use crate::walls::{normalize_species, skeletons_for, Skeleton, WallConfig, WallSolver};

pub const SCHEMA: u32 = 1;

pub fn classify_regime(alpha: f64) -> Regime {
    if alpha < 1.0 {
        Regime::MixedFavored
    } else if alpha > 1.0 {
        Regime::SeparatedFavored
    } else {
        Regime::Degenerate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub tol: Tolerances,
    /// Cap on the number of walls; the level-set bound applies regardless.
    pub max_walls: Option<usize>,
    /// Search window; derived from the potentials when absent.
    pub window: Option<Interval>,
    pub level: LevelOptions,
    pub oracle_check: bool,
    pub oracle_points: usize,
    pub oracle_random_starts: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            max_walls: None,
            window: None,
            level: LevelOptions::default(),
            oracle_check: true,
            oracle_points: oracle::DEFAULT_POINTS,
            oracle_random_starts: 8,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    /// Pointwise profile: mixed wherever both densities are positive.
    Mixed,
    /// Domain-wall configuration.
    Separated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: usize,
    pub kind: CandidateKind,
    pub walls: Vec<f64>,
    pub labels: Vec<i8>,
    pub leading: Option<Species>,
    pub is_maximal: bool,
    pub mu: [f64; 2],
    pub numbers: [f64; 2],
    pub supports: [Vec<Interval>; 2],
    pub internal_energy: f64,
    pub grand_canonical_energy: f64,
    /// Internal energy at fixed N, grand-canonical energy at fixed μ.
    pub energy: f64,
    pub stationarity_error: Option<f64>,
    pub hessian: Option<HessianReport>,
    pub stable: bool,
    pub exclusion: Option<ExclusionReport>,
    /// May be selected as ground state.
    pub eligible: bool,
    pub notes: Vec<String>,
}

impl CandidateRecord {
    pub fn wall_count(&self) -> usize {
        self.walls.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    /// Candidate ids; more than one for degenerate ground states.
    pub ids: Vec<usize>,
    pub energy: f64,
    pub degeneracy: usize,
    /// At `α = 1` mixed and separated profiles are co-minimizers.
    pub threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub method: String,
    pub points: usize,
    pub restarts: usize,
    pub seed: u64,
    pub candidate: usize,
    pub oracle_energy: f64,
    /// Energy of the analytic profile sampled on the oracle grid.
    pub analytic_energy: f64,
    pub discrepancy: Discrepancy,
    pub agrees: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub config_hash: Option<String>,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub oracle_points: usize,
    pub level_cells: usize,
    pub max_walls: Option<usize>,
    pub window: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema: u32,
    pub regime: Regime,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub ensemble: Ensemble,
    pub candidates: Vec<CandidateRecord>,
    pub ground_state: Option<GroundState>,
    pub oracle: Option<OracleSummary>,
    /// Solver steps that failed to converge.
    pub convergence_failures: usize,
    pub notes: Vec<String>,
    pub provenance: Provenance,
}

impl SolveReport {
    pub fn oracle_disagrees(&self) -> bool {
        self.oracle.as_ref().is_some_and(|o| !o.agrees)
    }

    pub fn ground_candidates(&self) -> Vec<&CandidateRecord> {
        match &self.ground_state {
            Some(g) => g.ids.iter().map(|&i| &self.candidates[i]).collect(),
            None => vec![],
        }
    }
}

/// A report together with the density profile of every candidate.
#[derive(Debug, Clone)]
pub struct Solution {
    pub report: SolveReport,
    pub profiles: Vec<DensityProfile>,
}

impl Solution {
    pub fn ground_profile(&self) -> Option<&DensityProfile> {
        self.report.ground_state.as_ref().map(|g| &self.profiles[g.ids[0]])
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Lengths of the mixed, species-1-only and species-2-only parts.
fn form_lengths(p: &DensityProfile) -> [f64; 3] {
    let mut l = [0.0; 3];
    for piece in p.pieces() {
        let i = match piece.form {
            Form::Mixed => 0,
            Form::Single(Species::One) => 1,
            Form::Single(Species::Two) => 2,
        };
        l[i] += piece.span.len();
    }
    l
}

/// Pointwise profile at fixed particle numbers: Newton on the chemical
/// potentials with `∂N/∂μ = |S12| U⁻¹ + diag(|S11|/U11, |S22|/U22)`.
pub fn pointwise_fixed_n(q: Quadratic, n: [f64; 2], land: &Landscape, rule: Rule, tol: &Tolerances) -> Result<DensityProfile> {
    let w = land.window();
    let mut mu = [0.0; 2];
    for k in Species::BOTH {
        let u = if k == Species::One { q.u11 } else { q.u22 };
        mu[k.idx()] = if n[k.idx()] > 0.0 {
            normalize_species(land, k, &[w], n[k.idx()] * u, tol.tol_norm)?
        } else {
            land.range_on(k, w).0 - 1.0
        };
    }
    let active: Vec<usize> = (0..2).filter(|&k| n[k] > 0.0).collect();
    let eval = |mu: [f64; 2]| -> Result<(DensityProfile, [f64; 2], f64)> {
        let p = pointwise_profile(q, mu, land, rule)?;
        let (a, b) = p.particle_numbers();
        let r = [a - n[0], b - n[1]];
        let norm = active.iter().map(|&k| (r[k] / n[k]).powi(2)).sum::<f64>().sqrt();
        Ok((p, r, norm))
    };
    let (mut p, mut r, mut norm) = eval(mu)?;
    const MAX_ITER: usize = 100;
    for _ in 0..MAX_ITER {
        if active.iter().all(|&k| r[k].abs() <= tol.tol_norm * n[k]) {
            return Ok(p);
        }
        let [s12, s11, s22] = form_lengths(&p);
        let det = q.u11 * q.u22 - q.u12 * q.u12;
        let mut jac = vec![
            vec![s12 * q.u22 / det + s11 / q.u11, -s12 * q.u12 / det],
            vec![-s12 * q.u12 / det, s12 * q.u11 / det + s22 / q.u22],
        ];
        for k in 0..2 {
            if jac[k][k] == 0.0 {
                jac[k][k] = w.len() / if k == 0 { q.u11 } else { q.u22 };
            }
        }
        let step = match active.as_slice() {
            [k] => {
                let mut s = [0.0; 2];
                s[*k] = -r[*k] / jac[*k][*k];
                s
            }
            _ => {
                let d = linalg::solve(&jac, &[-r[0], -r[1]])?;
                [d[0], d[1]]
            }
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = [mu[0] + lambda * step[0], mu[1] + lambda * step[1]];
            if let Ok(t) = eval(trial) {
                if t.2 < norm * (1.0 - 1e-4 * lambda) {
                    accepted = Some((trial, t));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((m, t)) = accepted else { break };
        mu = m;
        (p, r, norm) = t;
    }
    if active.iter().all(|&k| r[k].abs() <= tol.tol_norm * n[k]) {
        return Ok(p);
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITER,
        detail: format!("chemical potentials of the pointwise profile stalled with residual {r:?}"),
    })
}

/// Level `L` with `∫ (L − V)₊ ≥ target`, found by doubling.
fn level_holding(v: &PotentialSpec, target: f64, opts: &LevelOptions) -> Result<f64> {
    let hint = v.domain_hint.map(|h| h.mid()).unwrap_or(0.0);
    let base = v.evaluate(hint);
    let mut step = 1.0f64.max(base.abs());
    for _ in 0..200 {
        let level = base + step;
        let w = v.window_for_level(level)?;
        let mass: f64 = v
            .sublevel_set(level, w, opts)?
            .into_iter()
            .map(|c| {
                let g = crate::numeric::quad::GaussLegendre::default_rule();
                level * c.len() - g.integrate_composite(c.lo, c.hi, &v.smoothness_breaks(c.lo, c.hi), 4, |x| v.evaluate(x))
            })
            .sum();
        if mass >= target {
            return Ok(level);
        }
        step *= 2.0;
    }
    Err(Error::Validation("could not bracket the support of the potential".into()))
}

/// Search window derived from the potentials and the ensemble.
pub fn search_window(p: &ReducedParams, opts: &LevelOptions) -> Result<Interval> {
    if let Some(w) = p.v1.hard_walls() {
        return Ok(w);
    }
    let levels = match p.ensemble {
        Ensemble::FixedMu { mu1, mu2 } => [mu1, mu2],
        Ensemble::FixedN { n1, n2 } => {
            let total = 2.0 * (n1 + n2);
            [level_holding(&p.v1, total, opts)?, level_holding(&p.v2, total, opts)?]
        }
    };
    let w = p.v1.window_for_level(levels[0])?.hull(&p.v2.window_for_level(levels[1])?);
    Ok(match p.ensemble {
        Ensemble::FixedMu { .. } => w.widened(0.05),
        Ensemble::FixedN { .. } => w.widened(0.25),
    })
}

fn touches_window(p: &DensityProfile) -> bool {
    Species::BOTH
        .into_iter()
        .any(|k| p.support(k).endpoints.iter().flatten().any(|e| *e == EndpointKind::WindowEdge))
}

struct Candidate {
    record: CandidateRecord,
    profile: DensityProfile,
}

fn mixed_candidate(profile: DensityProfile, ensemble: EnsembleKind) -> Candidate {
    let (n1, n2) = profile.particle_numbers();
    let u = profile.internal_energy();
    let mu = profile.mu();
    let e = u - mu[0] * n1 - mu[1] * n2;
    Candidate {
        record: CandidateRecord {
            id: 0,
            kind: CandidateKind::Mixed,
            walls: vec![],
            labels: vec![],
            leading: None,
            is_maximal: false,
            mu,
            numbers: [n1, n2],
            supports: [profile.support(Species::One).intervals, profile.support(Species::Two).intervals],
            internal_energy: u,
            grand_canonical_energy: e,
            energy: if ensemble == EnsembleKind::FixedN { u } else { e },
            stationarity_error: None,
            hessian: None,
            stable: true,
            exclusion: None,
            eligible: true,
            notes: vec![],
        },
        profile,
    }
}

fn separated_candidate(
    cfg: WallConfig,
    land: &Landscape,
    beta: Option<f64>,
    ensemble: EnsembleKind,
    tol: &Tolerances,
) -> Candidate {
    let mut notes = Vec::new();
    let (hessian, stable) = match assemble_hessian(&cfg, ensemble, tol) {
        Ok(h) => {
            let s = h.stable();
            (Some(h), s)
        }
        Err(e) => {
            notes.push(format!("hessian unavailable: {e}"));
            (None, false)
        }
    };
    if cfg.at_breakpoint.iter().any(|b| *b) {
        notes.push("a wall sits on a potential breakpoint; one-sided slopes averaged".into());
    }
    if cfg.vacuum.iter().any(|b| *b) {
        notes.push("a wall lies in a density gap and is neutral".into());
    }
    let exclusion = (stable && cfg.n() > 0).then(|| nonmax_exclusion(&cfg, land, beta, ensemble));
    let excluded = exclusion.as_ref().is_some_and(|e| e.excluded);
    let u = cfg.internal_energy();
    let e = cfg.grand_canonical_energy();
    Candidate {
        record: CandidateRecord {
            id: 0,
            kind: CandidateKind::Separated,
            walls: cfg.walls.clone(),
            labels: cfg.labels.clone(),
            leading: Some(cfg.leading),
            is_maximal: cfg.is_maximal,
            mu: cfg.mu,
            numbers: cfg.numbers,
            supports: cfg.supports.clone(),
            internal_energy: u,
            grand_canonical_energy: e,
            energy: if ensemble == EnsembleKind::FixedN { u } else { e },
            stationarity_error: Some(cfg.stationarity_error()),
            hessian,
            stable,
            exclusion,
            eligible: stable && !excluded,
            notes,
        },
        profile: cfg.profile,
    }
}

/// Solves the reduced problem.
pub fn solve_ground_state(p: &ReducedParams, opts: &SolveOptions) -> Result<Solution> {
    opts.tol.validate()?;
    let mut window = match opts.window {
        Some(w) => w,
        None => search_window(p, &opts.level)?,
    };
    let mut attempts = 0;
    loop {
        let sol = solve_on_window(p, opts, window)?;
        let clipped = opts.window.is_none()
            && p.v1.hard_walls().is_none()
            && sol.profiles.iter().any(touches_window);
        if !clipped || attempts >= 4 {
            return Ok(sol);
        }
        attempts += 1;
        window = window.widened(0.5);
    }
}

fn solve_on_window(p: &ReducedParams, opts: &SolveOptions, window: Interval) -> Result<Solution> {
    let tol = &opts.tol;
    let regime = classify_regime(p.alpha);
    let kind = p.ensemble.kind();
    let land = Landscape::new(p.v1.clone(), p.v2.clone(), window, opts.level)?;
    let q = p.form();
    let mut notes = Vec::new();
    let mut failures = 0usize;
    let mut cands: Vec<Candidate> = Vec::new();

    // Pointwise (mixed) candidate.
    if regime == Regime::Degenerate {
        notes.push("alpha = 1: mixed densities are undetermined; every split of the mixed region has the same energy".into());
    } else {
        let rule = if regime == Regime::MixedFavored { Rule::Minimizer } else { Rule::PreferMixed };
        let prof = match p.ensemble {
            Ensemble::FixedMu { mu1, mu2 } => pointwise_profile(q, [mu1, mu2], &land, rule),
            Ensemble::FixedN { n1, n2 } => pointwise_fixed_n(q, [n1, n2], &land, rule, tol),
        };
        match prof {
            Ok(pr) if !pr.pieces().is_empty() => {
                let has_mixed = pr.pieces().iter().any(|x| x.form == Form::Mixed);
                if regime == Regime::MixedFavored || has_mixed {
                    let mut c = mixed_candidate(pr, kind);
                    if regime == Regime::SeparatedFavored {
                        c.record.eligible = false;
                        c.record.notes.push("mixed profiles are not minimizers for alpha > 1".into());
                    }
                    cands.push(c);
                }
            }
            Ok(_) => {}
            Err(e @ Error::NoConvergence { .. }) if regime == Regime::MixedFavored => return Err(e),
            // Above the threshold the mixed profile is only a comparison point.
            Err(e) => notes.push(format!("no mixed candidate: {e}")),
        }
    }

    // Domain-wall candidates.
    let solver = WallSolver::new(&land, p.alpha, *tol)?;
    let bound = solver.bound();
    let max = opts.max_walls.unwrap_or(usize::MAX);
    let skeletons: Vec<Skeleton> = skeletons_for(bound, max);
    let results: Vec<(Skeleton, Result<Vec<WallConfig>>)> = skeletons
        .into_par_iter()
        .map(|sk| {
            let r = match p.ensemble {
                Ensemble::FixedMu { mu1, mu2 } => solver.solve_fixed_mu(&sk, [mu1, mu2]),
                Ensemble::FixedN { n1, n2 } => solver.realize_fixed_n(&sk, [n1, n2]),
            };
            (sk, r)
        })
        .collect();
    let mut configs = Vec::new();
    for (sk, r) in results {
        match r {
            Ok(c) => configs.extend(c),
            Err(Error::InfeasibleTopology(_)) => {}
            Err(e @ Error::DegenerateContinuum(_)) => {
                let msg = format!("{} walls: {e}", sk.n);
                if !notes.contains(&msg) {
                    notes.push(msg);
                }
            }
            Err(e) => {
                if matches!(e, Error::NoConvergence { .. }) {
                    failures += 1;
                }
                notes.push(format!("{} walls, species {} leading: {e}", sk.n, sk.leading.idx() + 1));
            }
        }
    }
    if bound.constant && bound.max_roots == 0 {
        notes.push("phi = V1 - V2 is constant: wall positions are set by normalization alone".into());
    }
    let configs = crate::walls::dedup_configs(configs, 1e3 * tol.tol_root);
    let sep: Vec<Candidate> = configs
        .into_par_iter()
        .map(|c| separated_candidate(c, &land, p.beta, kind, tol))
        .collect();
    cands.extend(sep);
    for (i, c) in cands.iter_mut().enumerate() {
        c.record.id = i;
    }

    let ground_state = select(&mut cands, regime, tol, &mut notes);
    let (records, profiles): (Vec<_>, Vec<_>) = cands.into_iter().map(|c| (c.record, c.profile)).unzip();
    let mut report = SolveReport {
        schema: SCHEMA,
        regime,
        alpha: p.alpha,
        beta: p.beta,
        ensemble: p.ensemble,
        candidates: records,
        ground_state,
        oracle: None,
        convergence_failures: failures,
        notes,
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: None,
            tolerances: *tol,
            seed: opts.seed,
            oracle_points: opts.oracle_points,
            level_cells: opts.level.cells,
            max_walls: opts.max_walls,
            window,
        },
    };
    if report.ground_state.is_none() {
        report.notes.push("no feasible candidate: empty ground state".into());
    }
    if opts.oracle_check {
        if let Some(g) = &report.ground_state {
            let id = g.ids[0];
            report.oracle = Some(cross_check(p, &profiles[id], id, window, opts)?);
        }
    }
    Ok(Solution { report, profiles })
}

/// Ranks eligible candidates; ties within `tol_energy` go to the fewest walls.
fn select(cands: &mut [Candidate], regime: Regime, tol: &Tolerances, notes: &mut Vec<String>) -> Option<GroundState> {
    let pool: Vec<usize> = {
        let eligible: Vec<usize> = (0..cands.len()).filter(|&i| cands[i].record.eligible).collect();
        if eligible.is_empty() {
            let stable: Vec<usize> = (0..cands.len())
                .filter(|&i| cands[i].record.stable && cands[i].record.kind == CandidateKind::Separated)
                .collect();
            if !stable.is_empty() {
                notes.push("every stable candidate is excluded; ranking the excluded ones".into());
            }
            stable
        } else {
            eligible
        }
    };
    let best = pool
        .iter()
        .map(|&i| cands[i].record.energy)
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let near: Vec<usize> = pool
        .iter()
        .copied()
        .filter(|&i| relative_gap(cands[i].record.energy, best) <= tol.tol_energy)
        .collect();
    let fewest = near.iter().map(|&i| cands[i].record.wall_count()).min().unwrap_or(0);
    let ids: Vec<usize> = near
        .into_iter()
        .filter(|&i| cands[i].record.wall_count() == fewest)
        .collect();
    let energy = ids.iter().map(|&i| cands[i].record.energy).fold(f64::INFINITY, f64::min);
    for c in cands.iter() {
        let r = &c.record;
        if ids.contains(&r.id) || r.energy >= energy - tol.tol_energy * energy.abs().max(1.0) {
            continue;
        }
        if !r.stable {
            notes.push(format!("unstable candidate {} has lower energy than the ground state", r.id));
        } else if r.exclusion.as_ref().is_some_and(|e| e.excluded) {
            notes.push(format!(
                "excluded candidate {} has lower energy than the ground state; a lower configuration exists outside the enumerated family",
                r.id
            ));
        } else if regime == Regime::MixedFavored && r.kind == CandidateKind::Separated {
            notes.push(format!("separated candidate {} beats the mixed profile", r.id));
        }
    }
    Some(GroundState {
        degeneracy: ids.len(),
        threshold: regime == Regime::Degenerate,
        ids,
        energy,
    })
}

fn cross_check(p: &ReducedParams, prof: &DensityProfile, id: usize, window: Interval, opts: &SolveOptions) -> Result<OracleSummary> {
    let q = p.form();
    let grid = Grid::uniform(window, opts.oracle_points, &p.v1, &p.v2)?;
    let analytic = GridDensities::sample(prof, &grid);
    let scale_tol = |e: f64| opts.tol.tol_oracle * e.abs().max(1.0);
    Ok(match p.ensemble {
        Ensemble::FixedMu { mu1, mu2 } => {
            let r = oracle::pointwise_minimize(&grid, [mu1, mu2], q);
            let ea = analytic.grand_canonical_energy(&grid, q, [mu1, mu2]);
            let mut d = oracle::compare(&grid, &analytic, &r.densities, q);
            d.energy_diff = r.energy - ea;
            OracleSummary {
                method: "pointwise".into(),
                points: grid.len(),
                restarts: 0,
                seed: opts.seed,
                candidate: id,
                oracle_energy: r.energy,
                analytic_energy: ea,
                agrees: d.energy_diff.abs() <= scale_tol(ea),
                note: (!r.ties.is_empty()).then(|| format!("{} grid points with tied minimizers", r.ties.len())),
                discrepancy: d,
            }
        }
        Ensemble::FixedN { n1, n2 } => {
            let dopts = DescentOptions {
                random_starts: opts.oracle_random_starts,
                seed: opts.seed,
                tol: 1e-12,
                ..DescentOptions::default()
            };
            let r = oracle::oracle_fixed_n(&grid, [n1, n2], q, &dopts);
            let ea = analytic.internal_energy(&grid, q);
            let d = oracle::compare(&grid, &analytic, &r.densities, q);
            OracleSummary {
                method: "projected_descent".into(),
                points: grid.len(),
                restarts: opts.oracle_random_starts + 2,
                seed: opts.seed,
                candidate: id,
                oracle_energy: r.energy,
                analytic_energy: ea,
                // The descent finds local minima: only a lower oracle energy
                // contradicts the analytic result.
                agrees: d.energy_diff >= -scale_tol(ea),
                note: (!r.converged).then(|| format!("descent stopped at iteration cap, gradient {:.3e}", r.grad_norm)),
                discrepancy: d,
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Alpha,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVerdict {
    Mixed,
    Separated,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub e_mixed: Option<f64>,
    pub e_separated: Option<f64>,
    pub verdict: Option<SweepVerdict>,
    /// Inside the square-well interval where no mixed profile is physical.
    pub forbidden: bool,
    /// Walls in the selected ground state.
    pub ground_walls: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    /// Parameter values where the verdict changes (linear interpolation of
    /// `E_mixed − E_separated`).
    pub crossings: Vec<f64>,
}

fn verdict(em: Option<f64>, es: Option<f64>, tol: f64) -> Option<SweepVerdict> {
    Some(match (em, es) {
        (Some(m), Some(s)) if relative_gap(m, s) <= tol => SweepVerdict::Tie,
        (Some(m), Some(s)) if m < s => SweepVerdict::Mixed,
        (Some(_), Some(_)) => SweepVerdict::Separated,
        (Some(_), None) => SweepVerdict::Mixed,
        (None, Some(_)) => SweepVerdict::Separated,
        (None, None) => return None,
    })
}

fn square_well_row(p: &ReducedParams, tol: &Tolerances) -> Result<SweepRow> {
    let well = p.v1.hard_walls().expect("square well");
    let w = WellProblem::new(well, p.alpha, p.ensemble)?;
    let (em, es, forbidden) = match p.ensemble {
        Ensemble::FixedN { .. } => (Some(w.mixed_internal_energy()?), Some(w.separated_internal_optimum()?.energy), false),
        Ensemble::FixedMu { .. } => {
            let (es, _) = w.separated_grand_minimum()?;
            match w.mixed_grand_energy() {
                Ok(e) => (Some(e), Some(es), false),
                Err(Error::Nonphysical(_)) => (None, Some(es), true),
                Err(Error::DegenerateThreshold) => (None, Some(es), false),
                Err(e) => return Err(e),
            }
        }
    };
    Ok(SweepRow {
        value: 0.0,
        e_mixed: em,
        e_separated: es,
        verdict: verdict(em, es, tol.tol_energy),
        forbidden,
        ground_walls: None,
        error: None,
    })
}

fn generic_row(p: &ReducedParams, opts: &SolveOptions) -> Result<SweepRow> {
    let sol = solve_ground_state(p, opts)?;
    let r = &sol.report;
    let em = r
        .candidates
        .iter()
        .filter(|c| c.kind == CandidateKind::Mixed)
        .map(|c| c.energy)
        .reduce(f64::min);
    let es = r
        .candidates
        .iter()
        .filter(|c| c.kind == CandidateKind::Separated && c.stable)
        .map(|c| c.energy)
        .reduce(f64::min);
    Ok(SweepRow {
        value: 0.0,
        e_mixed: em,
        e_separated: es,
        verdict: verdict(em, es, opts.tol.tol_energy),
        forbidden: false,
        ground_walls: r.ground_candidates().first().map(|c| c.wall_count()),
        error: None,
    })
}

/// Mixed versus best separated energy over a parameter grid. Square wells
/// use the closed forms; other potentials run the full solver per point.
pub fn sweep(p: &ReducedParams, param: SweepParam, grid: &[f64], opts: &SolveOptions) -> Result<SweepTable> {
    if param == SweepParam::Beta && p.beta.is_none() {
        return Err(Error::Validation("a beta sweep needs proportional potentials".into()));
    }
    let row_opts = SolveOptions {
        oracle_check: false,
        ..*opts
    };
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&value| {
            let problem = match param {
                SweepParam::Alpha => p.with_alpha(value),
                SweepParam::Beta => ReducedParams::proportional(p.alpha, p.v1.clone(), value, p.ensemble),
            };
            let row = problem.and_then(|q| {
                if q.v1.hard_walls().is_some() {
                    square_well_row(&q, &opts.tol)
                } else {
                    generic_row(&q, &row_opts)
                }
            });
            match row {
                Ok(mut r) => {
                    r.value = value;
                    r
                }
                Err(e) => SweepRow {
                    value,
                    e_mixed: None,
                    e_separated: None,
                    verdict: None,
                    forbidden: false,
                    ground_walls: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut crossings = Vec::new();
    let gap = |r: &SweepRow| match (r.e_mixed, r.e_separated) {
        (Some(m), Some(s)) => Some(m - s),
        _ => None,
    };
    for w in rows.windows(2) {
        let (Some(g0), Some(g1)) = (gap(&w[0]), gap(&w[1])) else { continue };
        if g0 == 0.0 {
            crossings.push(w[0].value);
        } else if g0.signum() != g1.signum() && g1 != 0.0 {
            crossings.push(w[0].value + (w[1].value - w[0].value) * g0 / (g0 - g1));
        }
    }
    if let Some(last) = rows.last() {
        if gap(last) == Some(0.0) {
            crossings.push(last.value);
        }
    }
    Ok(SweepTable { param, rows, crossings })
}

pub fn sweep_alpha(p: &ReducedParams, grid: &[f64], opts: &SolveOptions) -> Result<SweepTable> {
    sweep(p, SweepParam::Alpha, grid, opts)
}

pub fn sweep_beta(p: &ReducedParams, grid: &[f64], opts: &SolveOptions) -> Result<SweepTable> {
    sweep(p, SweepParam::Beta, grid, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> SolveOptions {
        SolveOptions {
            oracle_check: false,
            ..SolveOptions::default()
        }
    }

    fn well() -> PotentialSpec {
        PotentialSpec::square_well(0.0, 1.0).unwrap()
    }

    #[test]
    fn regime_examples() {
        assert_eq!(classify_regime(2.0), Regime::SeparatedFavored);
        assert_eq!(classify_regime(0.3), Regime::MixedFavored);
        assert_eq!(classify_regime(1.0), Regime::Degenerate);
    }

    #[test]
    fn square_well_fixed_n_separated() {
        let p = ReducedParams::new(1.5, well(), well(), Ensemble::FixedN { n1: 1.0, n2: 1.0 }).unwrap();
        let s = solve_ground_state(&p, &quiet()).unwrap();
        let g = s.report.ground_state.as_ref().unwrap();
        assert_eq!(g.degeneracy, 2);
        assert!((g.energy - 2.0).abs() < 1e-12);
        for c in s.report.ground_candidates() {
            assert_eq!(c.walls.len(), 1);
            assert!((c.walls[0] - 0.5).abs() < 1e-12);
        }
        let mixed = s.report.candidates.iter().find(|c| c.kind == CandidateKind::Mixed).unwrap();
        assert!((mixed.energy - 2.5).abs() < 1e-12 && !mixed.eligible);
    }

    #[test]
    fn square_well_fixed_mu_single_condensate() {
        let p = ReducedParams::new(3.0, well(), well(), Ensemble::FixedMu { mu1: 1.0, mu2: 2.0 }).unwrap();
        let s = solve_ground_state(&p, &quiet()).unwrap();
        let g = s.report.ground_candidates();
        assert_eq!(g.len(), 1);
        assert!((g[0].energy + 2.0).abs() < 1e-12);
        assert_eq!(g[0].supports[0].len(), 0);
        let mixed = s.report.candidates.iter().find(|c| c.kind == CandidateKind::Mixed).unwrap();
        assert!((mixed.energy + 0.4375).abs() < 1e-12);
    }

    #[test]
    fn mixed_regime_fixed_n_matches_closed_form() {
        let p = ReducedParams::new(0.5, well(), well(), Ensemble::FixedN { n1: 1.0, n2: 1.0 }).unwrap();
        let s = solve_ground_state(&p, &quiet()).unwrap();
        let g = s.report.ground_candidates();
        assert_eq!(g[0].kind, CandidateKind::Mixed);
        assert!((g[0].energy - 1.5).abs() < 1e-12);
    }

    #[test]
    fn harmonic_mixed_profile_conserves_numbers() {
        let v1 = PotentialSpec::harmonic(1.0, 0.0).unwrap();
        let v2 = PotentialSpec::harmonic(0.5, 0.5).unwrap();
        let p = ReducedParams::new(0.4, v1, v2, Ensemble::FixedN { n1: 2.0, n2: 1.0 }).unwrap();
        let s = solve_ground_state(&p, &quiet()).unwrap();
        let g = s.report.ground_candidates()[0];
        assert_eq!(g.kind, CandidateKind::Mixed);
        let (a, b) = s.ground_profile().unwrap().particle_numbers();
        assert!((a - 2.0).abs() < 1e-9 && (b - 1.0).abs() < 1e-9);
        for c in &s.report.candidates {
            if c.kind == CandidateKind::Separated {
                assert!(c.energy > g.energy);
            }
        }
    }

    #[test]
    fn double_well_prefers_species_one_in_wells() {
        let dw = PotentialSpec::double_well(1.0, 1.0).unwrap();
        let p = ReducedParams::proportional(1.5, dw, 0.8, Ensemble::FixedN { n1: 0.3, n2: 1.5 }).unwrap();
        let s = solve_ground_state(&p, &quiet()).unwrap();
        let g = s.report.ground_candidates();
        assert!(!g.is_empty());
        assert_eq!(g[0].walls.len(), 4);
        assert_eq!(g[0].leading, Some(Species::Two));
    }

    #[test]
    fn degenerate_threshold_reports_co_minimizers() {
        let p = ReducedParams::new(1.0, well(), well(), Ensemble::FixedN { n1: 1.0, n2: 1.0 }).unwrap();
        let s = solve_ground_state(&p, &quiet()).unwrap();
        assert_eq!(s.report.regime, Regime::Degenerate);
        assert!(s.report.ground_state.as_ref().unwrap().threshold);
    }

    #[test]
    fn empty_when_potentials_exceed_mu() {
        let h = PotentialSpec::harmonic(1.0, 0.0).unwrap();
        let p = ReducedParams::new(0.5, h.clone(), h, Ensemble::FixedMu { mu1: -1.0, mu2: -2.0 }).unwrap();
        let s = solve_ground_state(&p, &quiet()).unwrap();
        assert!(s.report.ground_state.is_none());
    }

    #[test]
    fn sweep_examples() {
        let p = ReducedParams::new(1.0, well(), well(), Ensemble::FixedMu { mu1: 1.0, mu2: 2.0 }).unwrap();
        let t = sweep_alpha(&p, &[0.0, 0.5, 1.2, 2.0, 10.0], &quiet()).unwrap();
        let em: Vec<Option<f64>> = t.rows.iter().map(|r| r.e_mixed).collect();
        assert!((em[0].unwrap() + 2.5).abs() < 1e-12);
        assert!((em[1].unwrap() + 2.0).abs() < 1e-12);
        assert!(em[2].is_none() && t.rows[2].forbidden);
        assert!((em[3].unwrap() + 0.5).abs() < 1e-12);
        assert!((em[4].unwrap() + 35.0 / 198.0).abs() < 1e-12);
        let p = ReducedParams::new(1.0, well(), well(), Ensemble::FixedMu { mu1: 1.0, mu2: 1.0 }).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| 0.5 + 0.1 * i as f64).collect();
        let t = sweep_alpha(&p, &grid, &quiet()).unwrap();
        assert_eq!(t.crossings.len(), 1);
        assert!((t.crossings[0] - 1.0).abs() < 1e-9);
        assert_eq!(t.rows[0].verdict, Some(SweepVerdict::Mixed));
        assert_eq!(t.rows[10].verdict, Some(SweepVerdict::Separated));
    }

    #[test]
    fn oracle_agrees_on_harmonic_fixed_mu() {
        let v1 = PotentialSpec::harmonic(1.0, 0.0).unwrap();
        let p = ReducedParams::proportional(2.0, v1, 0.8, Ensemble::FixedMu { mu1: 1.0, mu2: 1.1 }).unwrap();
        let s = solve_ground_state(&p, &SolveOptions::default()).unwrap();
        let o = s.report.oracle.as_ref().unwrap();
        assert!(o.agrees, "{o:?}");
        assert!(o.discrepancy.sup_norm < 1e-8, "{o:?}");
    }

    #[test]
    fn report_round_trips() {
        let p = ReducedParams::new(1.5, well(), well(), Ensemble::FixedN { n1: 1.0, n2: 1.0 }).unwrap();
        let s = solve_ground_state(&p, &quiet()).unwrap();
        let json = serde_json::to_string(&s.report).unwrap();
        let back: SolveReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s.report);
    }
}
