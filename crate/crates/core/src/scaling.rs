//! Reduction of raw interaction strengths to canonical units.
//!
//! With `σ_k = √U_kk`, the map `ρ̃ = σρ`, `Ñ = σN`, `Ṽ = V/σ`, `μ̃ = μ/σ`
//! turns the self-interactions into 1 and leaves every energy unchanged.
//! The remaining parameters are `α = U12/(σ1σ2)` and, when both species feel
//! the same raw potential, `β = σ1/σ2` with `Ṽ2 = βṼ1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Interval;
use crate::potential::PotentialSpec;
use crate::profiles::{DensityProfile, Quadratic};

/// Which quantities are held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ensemble", rename_all = "snake_case")]
pub enum Ensemble {
    FixedN { n1: f64, n2: f64 },
    FixedMu { mu1: f64, mu2: f64 },
}

/// Ensemble without its values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    FixedN,
    FixedMu,
}

impl Ensemble {
    pub fn kind(&self) -> EnsembleKind {
        match self {
            Ensemble::FixedN { .. } => EnsembleKind::FixedN,
            Ensemble::FixedMu { .. } => EnsembleKind::FixedMu,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Ensemble::FixedN { n1, n2 } => {
                if !(n1.is_finite() && n2.is_finite() && n1 >= 0.0 && n2 >= 0.0) || n1 + n2 == 0.0 {
                    return Err(Error::Validation(format!(
                        "particle numbers must be finite, nonnegative and not both zero, got ({n1}, {n2})"
                    )));
                }
            }
            Ensemble::FixedMu { mu1, mu2 } => {
                if !(mu1.is_finite() && mu2.is_finite()) {
                    return Err(Error::Validation(format!(
                        "chemical potentials must be finite, got ({mu1}, {mu2})"
                    )));
                }
            }
        }
        Ok(())
    }

    fn rescaled(&self, s: [f64; 2], inverse: bool) -> Ensemble {
        match *self {
            Ensemble::FixedN { n1, n2 } if inverse => Ensemble::FixedN {
                n1: n1 / s[0],
                n2: n2 / s[1],
            },
            Ensemble::FixedN { n1, n2 } => Ensemble::FixedN {
                n1: n1 * s[0],
                n2: n2 * s[1],
            },
            Ensemble::FixedMu { mu1, mu2 } if inverse => Ensemble::FixedMu {
                mu1: mu1 * s[0],
                mu2: mu2 * s[1],
            },
            Ensemble::FixedMu { mu1, mu2 } => Ensemble::FixedMu {
                mu1: mu1 / s[0],
                mu2: mu2 / s[1],
            },
        }
    }
}

/// Problem in laboratory units.
#[derive(Debug, Clone, PartialEq)]
pub struct RawParams {
    pub u11: f64,
    pub u22: f64,
    pub u12: f64,
    pub ensemble: Ensemble,
    pub v1: PotentialSpec,
    pub v2: PotentialSpec,
    /// Both species feel the same potential shape.
    pub proportional: bool,
}

impl RawParams {
    pub fn form(&self) -> Quadratic {
        Quadratic {
            u11: self.u11,
            u22: self.u22,
            u12: self.u12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, u) in [("U11", self.u11), ("U22", self.u22), ("U12", self.u12)] {
            if !(u > 0.0 && u.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive and finite, got {u}")));
            }
        }
        self.ensemble.validate()
    }

    fn scales(&self) -> [f64; 2] {
        [self.u11.sqrt(), self.u22.sqrt()]
    }
}

/// Problem in canonical units (`U11 = U22 = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedParams {
    pub alpha: f64,
    /// Set only when the potentials were declared proportional: `V2 = β V1`.
    pub beta: Option<f64>,
    pub ensemble: Ensemble,
    pub v1: PotentialSpec,
    pub v2: PotentialSpec,
    /// `√U11, √U22` of the originating raw problem (1 when built directly).
    pub scales: [f64; 2],
}

impl ReducedParams {
    pub fn new(alpha: f64, v1: PotentialSpec, v2: PotentialSpec, ensemble: Ensemble) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Validation(format!("alpha must be nonnegative, got {alpha}")));
        }
        ensemble.validate()?;
        check_square_wells(&v1, &v2)?;
        Ok(Self {
            alpha,
            beta: None,
            ensemble,
            v1,
            v2,
            scales: [1.0, 1.0],
        })
    }

    /// `V1 = v`, `V2 = β v`.
    pub fn proportional(alpha: f64, v: PotentialSpec, beta: f64, ensemble: Ensemble) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Validation(format!("beta must be positive, got {beta}")));
        }
        let v2 = v.scaled(beta);
        let mut p = Self::new(alpha, v, v2, ensemble)?;
        p.beta = Some(beta);
        Ok(p)
    }

    pub fn form(&self) -> Quadratic {
        Quadratic::canonical(self.alpha)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut p = Self::new(alpha, self.v1.clone(), self.v2.clone(), self.ensemble)?;
        p.beta = self.beta;
        p.scales = self.scales;
        Ok(p)
    }
}

/// Square wells can only be combined with the identical square well.
fn check_square_wells(v1: &PotentialSpec, v2: &PotentialSpec) -> Result<()> {
    match (v1.hard_walls(), v2.hard_walls()) {
        (None, None) => Ok(()),
        (Some(a), Some(b)) if a == b => Ok(()),
        _ => Err(Error::Validation(
            "a square well can only be paired with the same square well for the other species".into(),
        )),
    }
}

/// Checks `V2 = β V1` at 64 points to relative `1e-8`.
pub fn check_proportional(v1: &PotentialSpec, v2: &PotentialSpec, beta: f64) -> Result<()> {
    let window = match v1.hard_walls() {
        Some(w) => w,
        None => match v1.domain_hint {
            Some(h) => h,
            None => v1.window_for_level(v1.evaluate(0.0).max(0.0) + 1.0)?,
        },
    };
    let Interval { lo, hi } = window;
    for i in 0..64 {
        let x = lo + (hi - lo) * (i as f64 + 0.5) / 64.0;
        let (a, b) = (beta * v1.evaluate(x), v2.evaluate(x));
        let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        if (a - b).abs() > 1e-8 * scale {
            return Err(Error::Validation(format!(
                "potentials declared proportional differ at x = {x}: beta*V1 = {a}, V2 = {b}"
            )));
        }
    }
    Ok(())
}

pub fn to_reduced(raw: &RawParams) -> Result<ReducedParams> {
    raw.validate()?;
    let s = raw.scales();
    let alpha = raw.u12 / (s[0] * s[1]);
    let v1 = raw.v1.scaled(1.0 / s[0]);
    let v2 = raw.v2.scaled(1.0 / s[1]);
    let ensemble = raw.ensemble.rescaled(s, false);
    let mut reduced = ReducedParams::new(alpha, v1, v2, ensemble)?;
    if raw.proportional {
        let beta = s[0] / s[1];
        check_proportional(&reduced.v1, &reduced.v2, beta)?;
        reduced.beta = Some(beta);
    }
    reduced.scales = s;
    Ok(reduced)
}

/// Maps a reduced ensemble payload back to raw units.
pub fn ensemble_from_reduced(e: &Ensemble, raw: &RawParams) -> Ensemble {
    e.rescaled(raw.scales(), true)
}

/// Maps a profile computed in reduced units back to `raw` units: densities
/// divided by `√U_kk`, chemical potentials multiplied by it; positions and
/// supports unchanged.
pub fn from_reduced(profile: &DensityProfile, raw: &RawParams) -> Result<DensityProfile> {
    raw.validate()?;
    let s = raw.scales();
    let expected = Quadratic::canonical(raw.u12 / (s[0] * s[1]));
    let f = profile.form();
    let close = |a: f64, b: f64| (a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs());
    if !(close(f.u11, 1.0) && close(f.u22, 1.0) && close(f.u12, expected.u12)) {
        return Err(Error::Validation(
            "profile was not computed in the reduced units of these raw parameters".into(),
        ));
    }
    let mu = profile.mu();
    Ok(profile.relabel_units(
        raw.form(),
        [mu[0] * s[0], mu[1] * s[1]],
        [profile.potential(0).scaled(s[0]), profile.potential(1).scaled(s[1])],
    ))
}
