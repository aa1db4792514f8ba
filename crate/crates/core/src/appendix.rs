//! Closed-form integrals behind the `F3` uniqueness estimate, and an
//! independent quadrature of the integrals that define them.
//!
//! Notation: `N = [a, a + |N|]` is the interval on which a competitor differs
//! from the original code; `ρ` is the deblurring and `σ` the blurring hat.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barcode::BarCode;
use crate::convolve::hat_convolve;
use crate::energy::{fidelity, EnergyParams};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::quadrature::Romberg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    /// `-2∫(φ_ρ*χ_N)(φ_σ*χ_{[0,1]∖N})`, `σ ≤ ρ`.
    Ia,
    /// The same integral, `ρ ≤ σ`.
    Ib,
    /// `-2∫(φ_ρ*χ_N)(φ_ρ*1)`.
    IIFirst,
    /// `2∫(φ_ρ*χ_N)(φ_σ*χ_N)`, `σ ≤ ρ`.
    IIa,
    /// The same integral, `ρ ≤ σ`.
    IIb,
}

impl Case {
    pub const ALL: [Case; 5] = [Case::Ia, Case::Ib, Case::IIFirst, Case::IIa, Case::IIb];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseParams {
    pub omega: f64,
    pub rho: f64,
    pub sigma: f64,
    /// Left end of `N`.
    pub a: f64,
    /// Length of `N`.
    pub len: f64,
}

fn violated(msg: String) -> Error {
    Error::CaseOrderingViolated(msg)
}

impl CaseParams {
    /// The interval orderings the closed forms rely on.
    pub fn check(&self, case: Case) -> Result<()> {
        let CaseParams { omega, rho, sigma, a, len } = *self;
        if !(rho > 0.0 && sigma > 0.0 && omega > 0.0 && len > 0.0) {
            return Err(Error::InvalidParameter(format!("need positive ω, ρ, σ, |N|: {self:?}")));
        }
        if rho > 0.5 * omega || sigma > 0.5 * omega {
            return Err(violated(format!("need ρ, σ ≤ ω/2 (ρ = {rho}, σ = {sigma}, ω = {omega})")));
        }
        if a < omega || a + len > 1.0 - omega {
            return Err(violated(format!("N = [{a}, {}] must keep distance ω = {omega} from 0 and 1", a + len)));
        }
        if len < omega {
            return Err(violated(format!("|N| = {len} is below ω = {omega}")));
        }
        match case {
            Case::Ia | Case::IIa if sigma > rho => Err(violated(format!("case needs σ ≤ ρ (σ = {sigma}, ρ = {rho})"))),
            Case::Ib | Case::IIb if rho > sigma => Err(violated(format!("case needs ρ ≤ σ (ρ = {rho}, σ = {sigma})"))),
            _ => Ok(()),
        }
    }
}

/// `(σ³ - 5ρσ² - 10ρ³)/(15ρ²)`.
fn cross_small_sigma(rho: f64, sigma: f64) -> f64 {
    (sigma.powi(3) - 5.0 * rho * sigma * sigma - 10.0 * rho.powi(3)) / (15.0 * rho * rho)
}

pub fn closed_form(case: Case, p: &CaseParams) -> Result<f64> {
    p.check(case)?;
    let (r, s) = (p.rho, p.sigma);
    Ok(match case {
        Case::Ia => cross_small_sigma(r, s),
        Case::Ib => cross_small_sigma(s, r),
        Case::IIFirst => -2.0 * p.len,
        Case::IIa => 2.0 * p.len + cross_small_sigma(r, s),
        // Symmetric in (ρ, σ): the swap of IIa.
        Case::IIb => 2.0 * p.len + cross_small_sigma(s, r),
    })
}

struct Nested {
    inner: Romberg,
    outer: Romberg,
}

impl Nested {
    fn new() -> Self {
        Nested { inner: Romberg::with_tol(1e-15), outer: Romberg::with_tol(1e-13) }
    }

    /// `∫_lo^hi φ_s(x - y) dy` by quadrature of the hat itself.
    fn hat_mass(&self, s: f64, x: f64, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let k = Kernel::Hat { size: s };
        self.inner
            .integrate_with_breaks(|y| k.eval(x - y), lo.max(x - s), hi.min(x + s).max(lo.max(x - s)), &[x])
            .unwrap_or(f64::NAN)
    }
}

/// The defining double integral of a case, by nested quadrature.
pub fn defining_integral(case: Case, p: &CaseParams) -> Result<f64> {
    p.check(case)?;
    let q = Nested::new();
    let (r, s, a, b) = (p.rho, p.sigma, p.a, p.a + p.len);
    let a_rho = |x: f64| q.hat_mass(r, x, a, b);
    let integrand: Box<dyn Fn(f64) -> f64> = match case {
        Case::Ia | Case::Ib => Box::new(|x| -2.0 * a_rho(x) * (q.hat_mass(s, x, 0.0, a) + q.hat_mass(s, x, b, 1.0))),
        Case::IIFirst => Box::new(|x| -2.0 * a_rho(x) * q.hat_mass(r, x, x - 2.0 * r, x + 2.0 * r)),
        Case::IIa | Case::IIb => Box::new(|x| 2.0 * a_rho(x) * q.hat_mass(s, x, a, b)),
    };
    let m = r.max(s);
    let breaks: Vec<f64> = [a, b]
        .iter()
        .flat_map(|&e| [e - r, e, e + r, e - s, e + s])
        .collect();
    let v = q.outer.integrate_with_breaks(integrand, a - m, b + m, &breaks)?;
    if !v.is_finite() {
        return Err(Error::QuadratureFailure(format!("{case:?} with {p:?}")));
    }
    Ok(v)
}

/// `∫ (φ_σ * χ_[a,b])² = b - a - 7σ/15`, valid for `σ ≤ (b - a)/2`.
pub fn blurred_box_norm_sq(a: f64, b: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && b > a) {
        return Err(Error::InvalidParameter(format!("need σ > 0 and a < b (a = {a}, b = {b}, σ = {sigma})")));
    }
    if sigma > 0.5 * (b - a) {
        return Err(violated(format!("need σ ≤ (b - a)/2 (σ = {sigma}, b - a = {})", b - a)));
    }
    Ok(b - a - 7.0 * sigma / 15.0)
}

/// The same integral by nested quadrature.
pub fn blurred_box_norm_sq_quadrature(a: f64, b: f64, sigma: f64) -> Result<f64> {
    let q = Nested::new();
    let breaks = [a - sigma, a, a + sigma, b - sigma, b, b + sigma];
    q.outer.integrate_with_breaks(|x| q.hat_mass(sigma, x, a, b).powi(2), a - sigma, b + sigma, &breaks)
}

/// The same integral from the exact piecewise-polynomial blur.
pub fn blurred_box_norm_sq_exact(a: f64, b: f64, sigma: f64) -> Result<f64> {
    let z = BarCode::new(vec![a, b])?;
    Ok(hat_convolve(&z, sigma)?.norm_sq())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatteryRow {
    pub case: String,
    pub params: serde_json::Value,
    pub closed_form: f64,
    pub numeric: f64,
    pub abs_error: f64,
}

/// Random parameters satisfying the orderings of `case`.
pub fn random_case_params(case: Case, rng: &mut impl Rng) -> CaseParams {
    let omega = rng.gen_range(0.02..0.2);
    let (mut rho, mut sigma) = (rng.gen_range(0.05..=1.0) * 0.5 * omega, rng.gen_range(0.05..=1.0) * 0.5 * omega);
    match case {
        Case::Ia | Case::IIa if sigma > rho => std::mem::swap(&mut rho, &mut sigma),
        Case::Ib | Case::IIb if rho > sigma => std::mem::swap(&mut rho, &mut sigma),
        _ => {}
    }
    let len = rng.gen_range(omega..=1.0 - 2.0 * omega);
    let a = rng.gen_range(omega..=1.0 - omega - len);
    CaseParams { omega, rho, sigma, a, len }
}

/// Compares every closed form with its defining integral on `sets` random
/// parameter sets per case (plus the blurred-box norm).
pub fn run_battery(sets: usize, seed: u64) -> Result<Vec<BatteryRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for case in Case::ALL {
        for _ in 0..sets {
            let p = random_case_params(case, &mut rng);
            let c = closed_form(case, &p)?;
            let n = defining_integral(case, &p)?;
            rows.push(BatteryRow {
                case: format!("{case:?}"),
                params: serde_json::to_value(p)?,
                closed_form: c,
                numeric: n,
                abs_error: (c - n).abs(),
            });
        }
    }
    for _ in 0..sets {
        let a = rng.gen_range(0.0..0.5);
        let b = a + rng.gen_range(0.02..0.5);
        let sigma = rng.gen_range(0.01..=1.0) * 0.5 * (b - a);
        let c = blurred_box_norm_sq(a, b, sigma)?;
        let n = blurred_box_norm_sq_quadrature(a, b, sigma)?;
        rows.push(BatteryRow {
            case: "BlurredBoxNorm".into(),
            params: serde_json::json!({ "a": a, "b": b, "sigma": sigma }),
            closed_form: c,
            numeric: n,
            abs_error: (c - n).abs(),
        });
    }
    Ok(rows)
}

/// A splitting of one bar that beats the original code's `F3` fidelity
/// when `ρ < σ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Counterexample {
    pub rho: f64,
    pub sigma: f64,
    pub original: BarCode,
    pub competitor: BarCode,
    pub original_fidelity: f64,
    pub competitor_fidelity: f64,
}

pub fn counterexample() -> Result<Counterexample> {
    let (rho, sigma) = (0.05, 0.06);
    let z = BarCode::new(vec![0.425, 0.575])?;
    let u = BarCode::new(vec![0.425, 0.4999, 0.5001, 0.575])?;
    let f = hat_convolve(&z, sigma)?;
    let p = EnergyParams::f3(1.0, sigma, rho)?;
    Ok(Counterexample {
        rho,
        sigma,
        original_fidelity: fidelity(&z, &f, &p)?,
        competitor_fidelity: fidelity(&u, &f, &p)?,
        original: z,
        competitor: u,
    })
}
