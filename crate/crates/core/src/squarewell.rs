//! Closed forms for the infinite square well.
//!
//! With flat potentials every stationary density is constant, so energies
//! reduce to algebra in the particle numbers (fixed N) or chemical
//! potentials (fixed μ).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Interval;
use crate::scaling::Ensemble;

/// Which kind of configuration has the lower energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    MixedFavored,
    SeparatedFavored,
    Degenerate,
}

/// A square well `[a, b]` in reduced units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellProblem {
    pub well: Interval,
    pub alpha: f64,
    pub ensemble: Ensemble,
}

/// Optimal separated configuration at fixed N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatedOptimum {
    pub energy: f64,
    pub s1_len: f64,
    /// Wall with species 1 on the left.
    pub wall_species1_left: f64,
    /// Wall with species 1 on the right.
    pub wall_species1_right: f64,
}

impl WellProblem {
    pub fn new(well: Interval, alpha: f64, ensemble: Ensemble) -> Result<Self> {
        if well.is_empty() {
            return Err(Error::Validation("square well must have positive length".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Validation(format!("alpha must be nonnegative, got {alpha}")));
        }
        if let Ensemble::FixedMu { mu1, mu2 } = ensemble {
            if !(mu1 > 0.0 && mu2 > 0.0) {
                return Err(Error::Validation(format!(
                    "square-well chemical potentials must be positive, got ({mu1}, {mu2})"
                )));
            }
        }
        Ok(Self { well, alpha, ensemble })
    }

    pub fn len(&self) -> f64 {
        self.well.len()
    }

    fn numbers(&self) -> Result<(f64, f64)> {
        match self.ensemble {
            Ensemble::FixedN { n1, n2 } => Ok((n1, n2)),
            Ensemble::FixedMu { .. } => Err(Error::Precondition("fixed-N closed form needs particle numbers".into())),
        }
    }

    fn potentials(&self) -> Result<(f64, f64)> {
        match self.ensemble {
            Ensemble::FixedMu { mu1, mu2 } => Ok((mu1, mu2)),
            Ensemble::FixedN { .. } => Err(Error::Precondition(
                "fixed-μ closed form needs chemical potentials".into(),
            )),
        }
    }

    /// `(N1² + N2² + 2αN1N2) / (2|S|)`.
    pub fn mixed_internal_energy(&self) -> Result<f64> {
        let (n1, n2) = self.numbers()?;
        Ok((n1 * n1 + n2 * n2 + 2.0 * self.alpha * n1 * n2) / (2.0 * self.len()))
    }

    /// Best split `|S1| = |S| N1/(N1+N2)` and its two one-wall realizations.
    pub fn separated_internal_optimum(&self) -> Result<SeparatedOptimum> {
        let (n1, n2) = self.numbers()?;
        let total = n1 + n2;
        if total <= 0.0 {
            return Err(Error::Precondition("separated optimum needs N1 + N2 > 0".into()));
        }
        let Interval { lo: a, hi: b } = self.well;
        Ok(SeparatedOptimum {
            energy: (n1 * n1 + n2 * n2 + 2.0 * n1 * n2) / (2.0 * self.len()),
            s1_len: self.len() * n1 / total,
            wall_species1_left: (a * n2 + b * n1) / total,
            wall_species1_right: (a * n1 + b * n2) / total,
        })
    }

    /// Sign of `U_m − Ū_s = (α − 1) N1 N2 / |S|`.
    pub fn threshold_verdict(&self) -> Result<Regime> {
        let (n1, n2) = self.numbers()?;
        let gap = (self.alpha - 1.0) * n1 * n2 / self.len();
        Ok(if gap < 0.0 {
            Regime::MixedFavored
        } else if gap > 0.0 {
            Regime::SeparatedFavored
        } else {
            Regime::Degenerate
        })
    }

    /// `|S|(μ1² + μ2² − 2αμ1μ2) / (2(α² − 1))`, or `−|S|μ²/(1+α)` when `μ1 = μ2`.
    pub fn mixed_grand_energy(&self) -> Result<f64> {
        let (mu1, mu2) = self.potentials()?;
        let s = self.len();
        let a = self.alpha;
        if mu1 == mu2 {
            return Ok(-s * mu1 * mu1 / (1.0 + a));
        }
        if a == 1.0 {
            return Err(Error::DegenerateThreshold);
        }
        let (lo, hi) = alpha_bounds(mu1, mu2)?;
        if a > lo && a < hi {
            return Err(Error::Nonphysical(format!(
                "alpha = {a} lies in the forbidden interval ({lo}, {hi}) where a mixed density is negative"
            )));
        }
        Ok(s * (mu1 * mu1 + mu2 * mu2 - 2.0 * a * mu1 * mu2) / (2.0 * (a * a - 1.0)))
    }

    /// `−|S1|μ1²/2 − (|S| − |S1|)μ2²/2`.
    pub fn separated_grand_energy(&self, s1_len: f64) -> Result<f64> {
        let (mu1, mu2) = self.potentials()?;
        if !(0.0..=self.len()).contains(&s1_len) {
            return Err(Error::Validation(format!(
                "species-1 length {s1_len} outside [0, {}]",
                self.len()
            )));
        }
        Ok(-s1_len * mu1 * mu1 / 2.0 - (self.len() - s1_len) * mu2 * mu2 / 2.0)
    }

    /// `(−|S| max(μ1², μ2²)/2, minimizing |S1|)`; `|S1|` is `None` when
    /// `μ1 = μ2` and every split is optimal.
    pub fn separated_grand_minimum(&self) -> Result<(f64, Option<f64>)> {
        let (mu1, mu2) = self.potentials()?;
        let e = -self.len() * mu1.max(mu2).powi(2) / 2.0;
        let s1 = if mu1 > mu2 {
            Some(self.len())
        } else if mu2 > mu1 {
            Some(0.0)
        } else {
            None
        };
        Ok((e, s1))
    }
}

/// `(min(μ1/μ2, μ2/μ1), max(μ1/μ2, μ2/μ1))`: flat mixed densities are
/// nonnegative iff α lies outside the open interval.
pub fn alpha_bounds(mu1: f64, mu2: f64) -> Result<(f64, f64)> {
    if !(mu1 > 0.0 && mu2 > 0.0) {
        return Err(Error::Validation(format!(
            "alpha bounds need positive chemical potentials, got ({mu1}, {mu2})"
        )));
    }
    let r = mu1 / mu2;
    let s = mu2 / mu1;
    Ok((r.min(s), r.max(s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixed_n(len: f64, alpha: f64, n1: f64, n2: f64) -> WellProblem {
        WellProblem::new(Interval::new(0.0, len).unwrap(), alpha, Ensemble::FixedN { n1, n2 }).unwrap()
    }

    fn fixed_mu(alpha: f64, mu1: f64, mu2: f64) -> WellProblem {
        WellProblem::new(Interval::new(0.0, 1.0).unwrap(), alpha, Ensemble::FixedMu { mu1, mu2 }).unwrap()
    }

    #[test]
    fn mixed_internal_examples() {
        assert_eq!(fixed_n(1.0, 1.5, 1.0, 1.0).mixed_internal_energy().unwrap(), 2.5);
        assert_eq!(fixed_n(2.0, 0.0, 1.0, 3.0).mixed_internal_energy().unwrap(), 10.0 / 4.0);
        assert_eq!(fixed_n(2.0, 0.7, 3.0, 0.0).mixed_internal_energy().unwrap(), 9.0 / 4.0);
    }

    #[test]
    fn separated_optimum_examples() {
        let o = fixed_n(3.0, 1.5, 2.0, 1.0).separated_internal_optimum().unwrap();
        assert_eq!(o.s1_len, 2.0);
        assert_eq!(o.wall_species1_left, 2.0);
        assert_eq!(o.wall_species1_right, 1.0);
        assert_eq!(o.energy, 1.5);
        let o = fixed_n(2.0, 1.5, 1.5, 1.5).separated_internal_optimum().unwrap();
        assert_eq!(o.s1_len, 1.0);
        assert_eq!(o.energy, 2.0 * 1.5 * 1.5 / 2.0);
        let o = fixed_n(2.0, 1.5, 1.5, 0.0).separated_internal_optimum().unwrap();
        assert_eq!(o.s1_len, 2.0);
        assert_eq!(o.energy, 1.5 * 1.5 / 4.0);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(fixed_n(1.0, 1.5, 1.0, 1.0).threshold_verdict().unwrap(), Regime::SeparatedFavored);
        assert_eq!(fixed_n(1.0, 0.5, 1.0, 1.0).threshold_verdict().unwrap(), Regime::MixedFavored);
        let w = fixed_n(1.0, 1.0, 1.0, 1.0);
        assert_eq!(w.threshold_verdict().unwrap(), Regime::Degenerate);
        assert_eq!(
            w.mixed_internal_energy().unwrap(),
            w.separated_internal_optimum().unwrap().energy
        );
    }

    #[test]
    fn alpha_bound_examples() {
        assert_eq!(alpha_bounds(1.0, 2.0).unwrap(), (0.5, 2.0));
        assert_eq!(alpha_bounds(1.3, 1.3).unwrap(), (1.0, 1.0));
        let (lo, hi) = alpha_bounds(3.0, 1.0).unwrap();
        assert!((lo - 1.0 / 3.0).abs() < 1e-16 && hi == 3.0);
        assert!(alpha_bounds(0.0, 1.0).is_err());
    }

    #[test]
    fn mixed_grand_examples() {
        assert_eq!(fixed_mu(3.0, 1.0, 2.0).mixed_grand_energy().unwrap(), -0.4375);
        assert_eq!(fixed_mu(3.0, 1.0, 1.0).mixed_grand_energy().unwrap(), -0.25);
        assert_eq!(fixed_mu(0.0, 1.0, 2.0).mixed_grand_energy().unwrap(), -2.5);
        assert!(matches!(fixed_mu(1.5, 1.0, 2.0).mixed_grand_energy(), Err(Error::Nonphysical(_))));
        assert_eq!(fixed_mu(1.0, 1.0, 2.0).mixed_grand_energy(), Err(Error::DegenerateThreshold));
    }

    #[test]
    fn separated_grand_examples() {
        let w = fixed_mu(3.0, 1.0, 2.0);
        assert_eq!(w.separated_grand_minimum().unwrap(), (-2.0, Some(0.0)));
        assert_eq!(w.separated_grand_energy(0.0).unwrap(), -2.0);
        let w = fixed_mu(3.0, 1.0, 1.0);
        for s in [0.0, 0.3, 1.0] {
            assert_eq!(w.separated_grand_energy(s).unwrap(), -0.5);
        }
        assert_eq!(w.separated_grand_minimum().unwrap(), (-0.5, None));
        assert_eq!(fixed_mu(3.0, 1.5, 2.0).separated_grand_energy(1.0).unwrap(), -1.125);
    }

    #[test]
    fn mixed_energy_matches_single_condensate_at_lower_bound() {
        for (mu1, mu2) in [(1.0, 2.0), (3.0, 1.0), (0.4, 0.9)] {
            let (lo, _) = alpha_bounds(mu1, mu2).unwrap();
            let e = fixed_mu(lo, mu1, mu2).mixed_grand_energy().unwrap();
            let s = -f64::max(mu1, mu2).powi(2) / 2.0;
            assert!((e - s).abs() <= 1e-12 * s.abs(), "{e} vs {s}");
        }
    }

    #[test]
    fn mixed_energy_vanishes_like_inverse_alpha() {
        let e3 = fixed_mu(1e3, 1.0, 2.0).mixed_grand_energy().unwrap();
        let e4 = fixed_mu(1e4, 1.0, 2.0).mixed_grand_energy().unwrap();
        assert!(e3 < 0.0 && e4 < 0.0);
        let ratio = e3 / e4;
        assert!((ratio - 10.0).abs() < 0.02, "ratio {ratio}");
        // Leading term −μ1μ2|S|/α.
        assert!((e4 * 1e4 + 2.0).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn verdict_follows_sign_of_alpha_minus_one(
            n1 in 0.01f64..10.0, n2 in 0.01f64..10.0, len in 0.1f64..10.0, alpha in 0.0f64..3.0,
        ) {
            let v = fixed_n(len, alpha, n1, n2).threshold_verdict().unwrap();
            let expect = if alpha < 1.0 { Regime::MixedFavored } else if alpha > 1.0 { Regime::SeparatedFavored } else { Regime::Degenerate };
            prop_assert_eq!(v, expect);
        }

        #[test]
        fn equal_potentials_cross_at_one(mu in 0.1f64..5.0, alpha in 0.0f64..5.0) {
            let w = fixed_mu(alpha, mu, mu);
            let m = w.mixed_grand_energy().unwrap();
            let s = w.separated_grand_minimum().unwrap().0;
            prop_assert_eq!(m < s, alpha < 1.0);
        }
    }
}
