//! Local stability of separated configurations and the exclusion tests for
//! non-maximal ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::linalg::{self, Matrix};
use crate::numeric::quad::GaussLegendre;
use crate::numeric::{Interval, Side};
use crate::potential::PotentialSpec;
use crate::profiles::{DensityProfile, EndpointKind, Form, Landscape, Quadratic, Species};
use crate::scaling::EnsembleKind;
use crate::settings::Tolerances;
use crate::walls::{PhiFunction, WallConfig};

/// Per-wall outcome of the large-system test `s_j φ'(R_j) > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallVerdict {
    Pass,
    Fail,
    /// `φ'(R_j) = 0`: decided only by the finite-size terms.
    Marginal,
    /// Both densities vanish at the wall.
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoVerdict {
    pub walls: Vec<WallVerdict>,
    /// No wall fails or is marginal.
    pub stable: bool,
}

fn thermo_from(walls: Vec<WallVerdict>) -> ThermoVerdict {
    let stable = walls
        .iter()
        .all(|w| matches!(w, WallVerdict::Pass | WallVerdict::Neutral));
    ThermoVerdict { walls, stable }
}

/// Sign test on given labels and slopes of `φ`.
pub fn thermo_limit_signs(labels: &[i8], phi_prime: &[f64], marginal_tol: f64) -> ThermoVerdict {
    thermo_from(
        labels
            .iter()
            .zip(phi_prime)
            .map(|(&s, &d)| {
                if d.abs() <= marginal_tol {
                    WallVerdict::Marginal
                } else if s as f64 * d > 0.0 {
                    WallVerdict::Pass
                } else {
                    WallVerdict::Fail
                }
            })
            .collect(),
    )
}

fn phi_primes(cfg: &WallConfig) -> (Vec<f64>, Vec<f64>) {
    let phi = PhiFunction::new(cfg.profile.potential(0), cfg.profile.potential(1));
    let slopes = cfg.walls.iter().map(|&r| phi.derivative_mean(r)).collect();
    let scales = cfg
        .walls
        .iter()
        .map(|&r| {
            let d = |v: &PotentialSpec| 0.5 * (v.derivative_sided(r, Side::Left) + v.derivative_sided(r, Side::Right));
            1e-10 * d(phi.v1).abs().max(d(phi.v2).abs()).max(1.0)
        })
        .collect();
    (slopes, scales)
}

pub fn thermo_limit_verdict(cfg: &WallConfig) -> ThermoVerdict {
    let (slopes, tols) = phi_primes(cfg);
    thermo_from(
        (0..cfg.n())
            .map(|j| {
                if cfg.vacuum[j] {
                    WallVerdict::Neutral
                } else {
                    thermo_limit_signs(&cfg.labels[j..=j], &slopes[j..=j], tols[j]).walls[0]
                }
            })
            .collect(),
    )
}

/// Necessary conditions for `δ_jk a_j + (−1)^{j+k} C` to be positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessaryReport {
    pub nonpositive: Vec<usize>,
    pub at_most_one_nonpositive: bool,
    /// `|a_ĵ| ≤ min_{j≠ĵ} a_j`; absent when every `a_j > 0`.
    pub pairwise_bound: Option<bool>,
    /// `|a_ĵ| < C / (1 + C Σ_{j≠ĵ} 1/a_j)`.
    pub determinant_bound: Option<bool>,
    pub pass: bool,
}

pub fn necessary_conditions(a: &[f64], c: f64) -> NecessaryReport {
    let nonpositive: Vec<usize> = (0..a.len()).filter(|&j| a[j] <= 0.0).collect();
    let at_most_one = nonpositive.len() <= 1;
    let (pairwise, det) = match nonpositive.as_slice() {
        [jh] => {
            let others = a.iter().enumerate().filter(|(j, _)| j != jh).map(|(_, v)| *v);
            let min = others.clone().fold(f64::INFINITY, f64::min);
            let inv: f64 = others.map(|v| 1.0 / v).sum();
            let ah = a[*jh].abs();
            (Some(ah <= min), Some(ah < c / (1.0 + c * inv)))
        }
        _ => (None, None),
    };
    NecessaryReport {
        pass: at_most_one && pairwise.unwrap_or(true) && det.unwrap_or(true),
        nonpositive,
        at_most_one_nonpositive: at_most_one,
        pairwise_bound: pairwise,
        determinant_bound: det,
    }
}

pub fn positive_definite(h: &Matrix) -> bool {
    linalg::positive_definite(h, 1e-12)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub ensemble: EnsembleKind,
    pub matrix: Matrix,
    /// Intensive diagonal terms `s_j ρ(R_j) φ'(R_j)`.
    pub a: Vec<f64>,
    /// `1/|S1| + 1/|S2|` at fixed N, zero at fixed μ.
    pub coupling: f64,
    /// `coupling · ρ̃²` when every contact wall carries the same density.
    pub c: Option<f64>,
    /// Decided on the walls with particles at them.
    pub positive_definite: bool,
    pub thermo_limit: ThermoVerdict,
    pub necessary: Option<NecessaryReport>,
    pub min_eigenvalue: Option<f64>,
    pub neutral: Vec<bool>,
    pub at_breakpoint: Vec<bool>,
}

impl HessianReport {
    pub fn stable(&self) -> bool {
        self.positive_definite
    }
}

pub fn assemble_hessian(cfg: &WallConfig, ensemble: EnsembleKind, tol: &Tolerances) -> Result<HessianReport> {
    let err = cfg.stationarity_error();
    if !(err <= tol.tol_stat) {
        return Err(Error::Precondition(format!(
            "configuration is not stationary (residual {err:e})"
        )));
    }
    let n = cfg.n();
    let (slopes, _) = phi_primes(cfg);
    let rho: Vec<f64> = (0..n)
        .map(|j| {
            let (a, b) = cfg.wall_densities(j);
            0.5 * (a + b)
        })
        .collect();
    let a: Vec<f64> = (0..n).map(|j| cfg.labels[j] as f64 * rho[j] * slopes[j]).collect();
    let coupling = match ensemble {
        EnsembleKind::FixedN => {
            let [l1, l2] = cfg.support_lengths();
            1.0 / l1 + 1.0 / l2
        }
        EnsembleKind::FixedMu => 0.0,
    };
    let mut h = linalg::zeros(n);
    for j in 0..n {
        for k in 0..n {
            let s = (cfg.labels[j] * cfg.labels[k]) as f64;
            h[j][k] = s * coupling * rho[j] * rho[k];
        }
        h[j][j] += a[j];
    }
    let contact: Vec<usize> = (0..n).filter(|&j| !cfg.vacuum[j]).collect();
    let sub: Matrix = contact
        .iter()
        .map(|&j| contact.iter().map(|&k| h[j][k]).collect())
        .collect();
    let c = contact.first().and_then(|&j0| {
        let r0 = rho[j0];
        contact
            .iter()
            .all(|&j| (rho[j] - r0).abs() <= 1e-8 * r0.max(1.0))
            .then_some(coupling * r0 * r0)
    });
    let necessary = c.map(|c| {
        let a_contact: Vec<f64> = contact.iter().map(|&j| a[j]).collect();
        necessary_conditions(&a_contact, c)
    });
    Ok(HessianReport {
        ensemble,
        positive_definite: positive_definite(&sub),
        min_eigenvalue: linalg::symmetric_eigenvalues(&sub).first().copied(),
        thermo_limit: thermo_limit_verdict(cfg),
        matrix: h,
        a,
        coupling,
        c,
        necessary,
        neutral: cfg.vacuum.clone(),
        at_breakpoint: cfg.at_breakpoint.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionCriterion {
    /// A point of `S1` above the wall level.
    HighPointInS1,
    /// A point of `S2` below the wall level.
    LowPointInS2,
    /// An interval of `S1` ends where the species-1 density vanishes.
    ZeroBorderedS1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionFinding {
    pub criterion: ExclusionCriterion,
    pub v_bar: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub triggered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub applicable: bool,
    pub note: Option<String>,
    pub findings: Vec<ExclusionFinding>,
    pub excluded: bool,
}

impl ExclusionReport {
    fn not_applicable(note: &str) -> Self {
        Self {
            applicable: false,
            note: Some(note.into()),
            findings: vec![],
            excluded: false,
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Fixed N, point of `S1` with `V̄1 > v`: excluded if `(μ1 − v)/(μ1 − V̄1) > 1/β`.
pub fn high_point_fixed_n(mu1: f64, v: f64, v1_bar: f64, beta: f64) -> (f64, f64, bool) {
    let lhs = ratio(mu1 - v, mu1 - v1_bar);
    (lhs, 1.0 / beta, lhs > 1.0 / beta)
}

/// Fixed N, point of `S2` with `V̄2 < v`: excluded if `(μ2 − v)/(μ2 − V̄2) < β`.
/// `mu2` is measured in units of the common potential.
pub fn low_point_fixed_n(mu2: f64, v: f64, v2_bar: f64, beta: f64) -> (f64, f64, bool) {
    let lhs = ratio(mu2 - v, mu2 - v2_bar);
    (lhs, beta, lhs < beta)
}

/// Fixed μ: excluded if `(μ2 − V̄1)/(μ1 − V̄1) > 1/β`.
pub fn high_point_fixed_mu(mu1: f64, mu2: f64, v1_bar: f64, beta: f64) -> (f64, f64, bool) {
    let lhs = ratio(mu2 - v1_bar, mu1 - v1_bar);
    (lhs, 1.0 / beta, lhs > 1.0 / beta)
}

/// Fixed μ: excluded if `(μ1 − V̄2)/(μ2 − V̄2) > β`.
pub fn low_point_fixed_mu(mu1: f64, mu2: f64, v2_bar: f64, beta: f64) -> (f64, f64, bool) {
    let lhs = ratio(mu1 - v2_bar, mu2 - v2_bar);
    (lhs, beta, lhs > beta)
}

/// Exclusion of a stationary configuration with proportional potentials
/// `V2 = βV1`, `β < 1`. `V = V1` is the common potential; the species-2
/// chemical potential enters as `μ2/β` on its scale.
pub fn nonmax_exclusion(cfg: &WallConfig, land: &Landscape, beta: Option<f64>, ensemble: EnsembleKind) -> ExclusionReport {
    let Some(beta) = beta else {
        return ExclusionReport::not_applicable("potentials are not proportional");
    };
    if !(beta < 1.0) {
        return ExclusionReport::not_applicable("exclusion criteria hold for beta < 1 only");
    }
    let contact: Vec<f64> = (0..cfg.n()).filter(|&j| !cfg.vacuum[j]).map(|j| cfg.walls[j]).collect();
    if contact.is_empty() {
        return ExclusionReport::not_applicable("no wall with particles at it");
    }
    let v1 = land.potential(Species::One);
    let v = contact.iter().map(|&r| v1.evaluate(r)).sum::<f64>() / contact.len() as f64;
    let [mu1, mu2] = cfg.mu;
    let mu2h = mu2 / beta;
    let scale = mu1.abs().max(v.abs()).max(1.0);
    let mut findings = Vec::new();

    let s1 = cfg.profile.support(Species::One);
    if s1.endpoints.iter().flatten().any(|e| *e == EndpointKind::Zero) {
        findings.push(ExclusionFinding {
            criterion: ExclusionCriterion::ZeroBorderedS1,
            v_bar: mu1,
            lhs: f64::INFINITY,
            rhs: 1.0 / beta,
            triggered: true,
        });
    }
    let v1_bar = cfg.supports[0]
        .iter()
        .map(|iv| land.range_on(Species::One, *iv).1)
        .fold(f64::NEG_INFINITY, f64::max);
    if v1_bar > v + 1e-9 * scale {
        let (lhs, rhs, triggered) = match ensemble {
            EnsembleKind::FixedN => high_point_fixed_n(mu1, v, v1_bar, beta),
            EnsembleKind::FixedMu => high_point_fixed_mu(mu1, mu2h, v1_bar, beta),
        };
        findings.push(ExclusionFinding {
            criterion: ExclusionCriterion::HighPointInS1,
            v_bar: v1_bar,
            lhs,
            rhs,
            triggered,
        });
    }
    let v2_bar = cfg.supports[1]
        .iter()
        .map(|iv| land.range_on(Species::Two, *iv).0 / beta)
        .fold(f64::INFINITY, f64::min);
    if v2_bar < v - 1e-9 * scale {
        let (lhs, rhs, triggered) = match ensemble {
            EnsembleKind::FixedN => low_point_fixed_n(mu2h, v, v2_bar, beta),
            EnsembleKind::FixedMu => low_point_fixed_mu(mu1, mu2h, v2_bar, beta),
        };
        findings.push(ExclusionFinding {
            criterion: ExclusionCriterion::LowPointInS2,
            v_bar: v2_bar,
            lhs,
            rhs,
            triggered,
        });
    }
    ExclusionReport {
        applicable: true,
        note: None,
        excluded: findings.iter().any(|f| f.triggered),
        findings,
    }
}

/// Energy change from replacing the mixed densities on `[x0, x0 + ε]` by
/// flat separated ones holding the same particle numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitDelta {
    pub exact: f64,
    /// `ε (1 − α) ⟨ρ1⟩⟨ρ2⟩`.
    pub first_order: f64,
    pub averages: [f64; 2],
}

pub fn local_split_test(profile: &DensityProfile, x0: f64, epsilon: f64, alpha: f64) -> Result<SplitDelta> {
    let seg = Interval::new(x0, x0 + epsilon)?;
    let inside = profile
        .pieces()
        .iter()
        .any(|p| p.form == Form::Mixed && p.span.lo < seg.lo && seg.hi < p.span.hi);
    if !inside {
        return Err(Error::Precondition(format!(
            "segment [{}, {}] is not strictly inside a mixed region",
            seg.lo, seg.hi
        )));
    }
    let (v1, v2) = (profile.potential(0), profile.potential(1));
    let mut breaks = v1.smoothness_breaks(seg.lo, seg.hi);
    breaks.extend(v2.smoothness_breaks(seg.lo, seg.hi));
    breaks.sort_by(f64::total_cmp);
    let rule = GaussLegendre::default_rule();
    let int = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| rule.integrate_composite(a, b, &breaks, 4, f);
    let n1 = int(seg.lo, seg.hi, &|x| profile.density(x).0);
    let n2 = int(seg.lo, seg.hi, &|x| profile.density(x).1);
    let q = Quadratic::canonical(alpha);
    let mixed = int(seg.lo, seg.hi, &|x| {
        let (r1, r2) = profile.density(x);
        q.energy_density(r1, r2) + v1.evaluate(x) * r1 + v2.evaluate(x) * r2
    });
    let y = seg.lo + epsilon * n1 / (n1 + n2);
    let (f1, f2) = (n1 / (y - seg.lo), n2 / (seg.hi - y));
    let separated = int(seg.lo, y, &|x| 0.5 * f1 * f1 + v1.evaluate(x) * f1)
        + int(y, seg.hi, &|x| 0.5 * f2 * f2 + v2.evaluate(x) * f2);
    let averages = [n1 / epsilon, n2 / epsilon];
    Ok(SplitDelta {
        exact: separated - mixed,
        first_order: epsilon * (1.0 - alpha) * averages[0] * averages[1],
        averages,
    })
}
