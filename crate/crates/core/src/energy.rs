//! The functionals `F1`, `F2`, `F3` and the trivial-minimizer thresholds.
//!
//! `F(u) = TV(u) + λ ‖φ_ρ * u - f‖²`, with `ρ = 0` (no deblurring kernel)
//! for `F1`, `ρ = σ` for `F2`, and a free `ρ` for `F3`. All kernels are hats.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::barcode::BarCode;
use crate::convolve::{convolve_piecewise_hat, hat_convolve, GridSamples, Signal, SignalData};
use crate::error::{Error, Result};
use crate::poly::PiecewisePoly;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Functional {
    F1,
    F2,
    F3,
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Functional {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "F1" => Ok(Functional::F1),
            "F2" => Ok(Functional::F2),
            "F3" => Ok(Functional::F3),
            _ => Err(Error::Parse(format!("unknown functional {s:?} (expected F1, F2 or F3)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub functional: Functional,
    pub lambda: f64,
    pub sigma: f64,
    pub rho: f64,
}

impl EnergyParams {
    pub fn new(functional: Functional, lambda: f64, sigma: f64, rho: Option<f64>) -> Result<Self> {
        let rho = match (functional, rho) {
            (Functional::F1, None) => 0.0,
            (Functional::F2, None) => sigma,
            (Functional::F3, None) => {
                return Err(Error::InvalidParameter("F3 needs a deblurring size ρ".into()));
            }
            (_, Some(r)) => r,
        };
        let p = EnergyParams { functional, lambda, sigma, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn f1(lambda: f64, sigma: f64) -> Result<Self> {
        Self::new(Functional::F1, lambda, sigma, None)
    }

    pub fn f2(lambda: f64, sigma: f64) -> Result<Self> {
        Self::new(Functional::F2, lambda, sigma, None)
    }

    pub fn f3(lambda: f64, sigma: f64, rho: f64) -> Result<Self> {
        Self::new(Functional::F3, lambda, sigma, Some(rho))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("λ must be positive and finite, got {}", self.lambda));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("σ must be non-negative and finite, got {}", self.sigma));
        }
        match self.functional {
            Functional::F1 if self.rho != 0.0 => bad(format!("F1 has ρ = 0, got {}", self.rho)),
            Functional::F2 if self.rho != self.sigma => bad(format!("F2 has ρ = σ, got ρ = {}", self.rho)),
            Functional::F3 if !(self.rho > 0.0 && self.rho.is_finite()) => {
                bad(format!("F3 needs ρ > 0, got {}", self.rho))
            }
            Functional::F2 | Functional::F3 if self.sigma == 0.0 => bad("σ must be positive".into()),
            _ => Ok(()),
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        EnergyParams { lambda, ..*self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    #[serde(rename = "tv")]
    pub tv_term: usize,
    pub fidelity: f64,
    pub lambda: f64,
    pub total: f64,
    pub functional: Functional,
    pub sigma: f64,
    pub rho: f64,
}

/// `φ_ρ * u` (exact, piecewise polynomial).
pub fn deblur_image(u: &BarCode, p: &EnergyParams) -> Result<PiecewisePoly> {
    convolve_piecewise_hat(&u.to_piecewise(), p.rho)
}

/// `‖φ_ρ * u - f‖²`.
pub fn fidelity(u: &BarCode, f: &Signal, p: &EnergyParams) -> Result<f64> {
    p.validate()?;
    let g = deblur_image(u, p)?;
    let v = match &f.data {
        SignalData::Piecewise(fp) => g.sub(fp).norm_sq(),
        SignalData::Grid(fg) => {
            let spec = fg.spec();
            if let Some((lo, hi)) = g.support() {
                if lo < spec.x0 - 1e-12 || hi > spec.end() + 1e-12 {
                    return Err(Error::IncompatibleSignals(format!(
                        "φ_ρ*u lives on [{lo}, {hi}] but f only covers [{}, {}]",
                        spec.x0,
                        spec.end()
                    )));
                }
            }
            let diff: Vec<f64> = fg.values.iter().enumerate().map(|(i, v)| g.eval(fg.x(i)) - v).collect();
            GridSamples::new(spec, diff)?.norm_sq()
        }
    };
    Ok(v.max(0.0))
}

pub fn evaluate(u: &BarCode, f: &Signal, p: &EnergyParams) -> Result<EnergyReport> {
    let fid = fidelity(u, f, p)?;
    let tv = u.total_variation();
    Ok(EnergyReport {
        tv_term: tv,
        fidelity: fid,
        lambda: p.lambda,
        total: tv as f64 + p.lambda * fid,
        functional: p.functional,
        sigma: p.sigma,
        rho: p.rho,
    })
}

/// `‖f‖₊ = sup{∫ f v : TV(v) ≤ 1}` over `v` vanishing at ±∞, which equals
/// `½ (sup F - inf F)` for the running integral `F` of `f`.
pub fn dual_norm(f: &Signal) -> f64 {
    let (lo, hi) = match &f.data {
        SignalData::Piecewise(p) => p.running_integral().extrema(p),
        SignalData::Grid(g) => {
            let (mut lo, mut hi, mut acc) = (0.0f64, 0.0f64, 0.0);
            for w in g.values.windows(2) {
                acc += 0.5 * g.h * (w[0] + w[1]);
                lo = lo.min(acc);
                hi = hi.max(acc);
            }
            (lo, hi)
        }
    };
    0.5 * (hi - lo)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// At or below this λ the empty code is the minimizer.
    pub lambda_star: f64,
    /// `2/‖f_σ‖²`: below this λ the empty code beats any code with two interfaces.
    pub lambda_0: f64,
}

/// Thresholds for noiseless data `f = φ_σ * z`.
pub fn trivial_thresholds(z: &BarCode, p: &EnergyParams) -> Result<Thresholds> {
    if z.is_empty() {
        return Err(Error::EmptyBarCode);
    }
    p.validate()?;
    let f = hat_convolve(z, p.sigma)?;
    let fp = f.as_piecewise().expect("hat blur is piecewise");
    let g = convolve_piecewise_hat(fp, p.rho)?;
    let lambda_star = 1.0 / (2.0 * dual_norm(&Signal::piecewise(g)));
    let lambda_0 = 2.0 / fp.norm_sq();
    debug_assert!(lambda_star < lambda_0, "λ* = {lambda_star} ≥ λ₀ = {lambda_0}");
    Ok(Thresholds { lambda_star, lambda_0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f2_fidelity_vanishes_at_truth() {
        let z = BarCode::new(vec![0.1, 0.3, 0.5, 0.8]).unwrap();
        let f = hat_convolve(&z, 0.04).unwrap();
        let r = evaluate(&z, &f, &EnergyParams::f2(7.0, 0.04).unwrap()).unwrap();
        assert!(r.fidelity < 1e-28);
        assert_eq!(r.total, 4.0 + 7.0 * r.fidelity);
    }

    #[test]
    fn empty_code_under_f1_pays_blurred_norm() {
        let z = BarCode::new(vec![0.0, 1.0]).unwrap();
        let f = hat_convolve(&z, 0.15).unwrap();
        let r = evaluate(&BarCode::empty(), &f, &EnergyParams::f1(3.0, 0.15).unwrap()).unwrap();
        assert!((r.fidelity - 0.93).abs() < 1e-14);
        assert!((r.total - 2.79).abs() < 1e-13);
    }

    #[test]
    fn thresholds_for_unit_bar() {
        let z = BarCode::new(vec![0.0, 1.0]).unwrap();
        let t = trivial_thresholds(&z, &EnergyParams::f1(1.0, 0.15).unwrap()).unwrap();
        assert!((t.lambda_star - 1.0).abs() < 1e-13);
        assert!((t.lambda_0 - 2.0 / 0.93).abs() < 1e-12);
    }

    #[test]
    fn dual_norm_of_nonnegative_signal_is_half_mass() {
        let z = BarCode::new(vec![0.2, 0.8]).unwrap();
        let f = hat_convolve(&z, 0.1).unwrap();
        assert!((dual_norm(&f) - 0.3).abs() < 1e-14);
        assert_eq!(dual_norm(&Signal::piecewise(PiecewisePoly::zero())), 0.0);
    }

    #[test]
    fn grid_fidelity_rejects_short_coverage() {
        use crate::convolve::GridSpec;
        let z = BarCode::new(vec![0.2, 0.8]).unwrap();
        let g = Signal::grid(GridSamples::from_fn(GridSpec::covering(0.3, 0.7, 0.01).unwrap(), |_| 1.0));
        assert!(matches!(
            fidelity(&z, &g, &EnergyParams::f1(1.0, 0.1).unwrap()),
            Err(Error::IncompatibleSignals(_))
        ));
    }

    #[test]
    fn params_invariants() {
        assert!(EnergyParams::new(Functional::F2, 1.0, 0.1, Some(0.2)).is_err());
        assert!(EnergyParams::new(Functional::F1, 1.0, 0.1, Some(0.2)).is_err());
        assert!(EnergyParams::f3(0.0, 0.1, 0.1).is_err());
        assert_eq!(EnergyParams::f2(1.0, 0.1).unwrap().rho, 0.1);
    }
}
