//! Blur kernels and their admissibility checks.
//!
//! A kernel `φ_σ` has a size parameter `σ`; the one-parameter family
//! `p(x, τ)`, `0 < τ ≤ σ`, is the same shape at size `τ`. Admissibility for
//! the uniqueness theory asks for the class 𝒦 (even, compactly supported,
//! non-increasing on `[0, ∞)`, unit mass) plus continuity and the sign
//! condition `𝒥(σ, τ, x, c) ≤ 0`.

use serde::{Deserialize, Serialize};
use libm::erf;

use crate::error::{Error, Result};
use crate::poly::{PiecewisePoly, Poly};
use crate::quadrature::Romberg;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    /// `(1 - |x|/size)/size` on `[-size, size]`.
    Hat { size: f64 },
    /// Normal density with standard deviation `size`, cut at
    /// `truncation · size` and renormalized. `None` keeps the full density.
    Gaussian {
        size: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncation: Option<f64>,
    },
    /// Piecewise-linear even profile through `(xs[i], values[i])` for
    /// `x ≥ 0`, with `xs` running from 0 to `size`, zero beyond.
    Tabulated { size: f64, xs: Vec<f64>, values: Vec<f64> },
}

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

impl Kernel {
    pub fn hat(size: f64) -> Result<Self> {
        check_size(size)?;
        Ok(Kernel::Hat { size })
    }

    pub fn gaussian(size: f64, truncation: Option<f64>) -> Result<Self> {
        check_size(size)?;
        if let Some(t) = truncation {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter(format!("truncation must be positive, got {t}")));
            }
        }
        Ok(Kernel::Gaussian { size, truncation })
    }

    /// Builds a tabulated kernel and rescales its values to unit mass.
    pub fn tabulated(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != values.len() {
            return Err(Error::InvalidParameter("tabulated kernel needs ≥ 2 matching (x, value) pairs".into()));
        }
        if xs[0] != 0.0 || xs.windows(2).any(|w| w[1] <= w[0]) || xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("tabulated xs must start at 0 and increase strictly".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("tabulated values must be finite".into()));
        }
        let half: f64 = xs.windows(2).zip(values.windows(2)).map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1])).sum();
        if !(half > 0.0) {
            return Err(Error::InvalidParameter("tabulated kernel has non-positive mass".into()));
        }
        let size = *xs.last().unwrap();
        let values = values.iter().map(|v| v * 0.5 / half).collect();
        Ok(Kernel::Tabulated { size, xs, values })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::Hat { size } => check_size(*size),
            Kernel::Gaussian { size, truncation } => Kernel::gaussian(*size, *truncation).map(|_| ()),
            Kernel::Tabulated { xs, values, .. } => {
                let k = Kernel::tabulated(xs.clone(), values.clone())?;
                if (k.mass() - 1.0).abs() > 1e-10 {
                    return Err(Error::InvalidParameter("tabulated kernel is not normalized".into()));
                }
                Ok(())
            }
        }
    }

    pub fn size(&self) -> f64 {
        match self {
            Kernel::Hat { size } | Kernel::Gaussian { size, .. } | Kernel::Tabulated { size, .. } => *size,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Hat { .. } => "hat",
            Kernel::Gaussian { .. } => "gaussian",
            Kernel::Tabulated { .. } => "tabulated",
        }
    }

    /// Support radius, `None` if the support is unbounded.
    pub fn radius(&self) -> Option<f64> {
        match self {
            Kernel::Hat { size } | Kernel::Tabulated { size, .. } => Some(*size),
            Kernel::Gaussian { size, truncation } => truncation.map(|t| t * size),
        }
    }

    /// Radius used for windows and padding; 8σ for an untruncated Gaussian.
    pub fn effective_radius(&self) -> f64 {
        self.radius().unwrap_or(8.0 * self.size())
    }

    /// The same profile at size `tau`.
    pub fn at_size(&self, tau: f64) -> Kernel {
        match self {
            Kernel::Hat { .. } => Kernel::Hat { size: tau },
            Kernel::Gaussian { truncation, .. } => Kernel::Gaussian { size: tau, truncation: *truncation },
            Kernel::Tabulated { size, xs, values } => {
                let r = tau / size;
                Kernel::Tabulated { size: tau, xs: xs.iter().map(|x| x * r).collect(), values: values.iter().map(|v| v / r).collect() }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            Kernel::Hat { size } => {
                if a >= *size {
                    0.0
                } else {
                    (1.0 - a / size) / size
                }
            }
            Kernel::Gaussian { size, truncation } => {
                let norm = truncation.map_or(1.0, |t| erf(t / std::f64::consts::SQRT_2));
                if truncation.is_some_and(|t| a > t * size) {
                    return 0.0;
                }
                (-0.5 * (x / size).powi(2)).exp() / (size * SQRT_2PI * norm)
            }
            Kernel::Tabulated { xs, values, .. } => {
                if a > *xs.last().unwrap() {
                    return 0.0;
                }
                let i = xs.partition_point(|&v| v <= a).clamp(1, xs.len() - 1);
                let (x0, x1, v0, v1) = (xs[i - 1], xs[i], values[i - 1], values[i]);
                v0 + (v1 - v0) * (a - x0) / (x1 - x0)
            }
        }
    }

    /// `Φ(x) = ∫_{-∞}^x φ`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Kernel::Hat { size: s } => {
                let s = *s;
                if x <= -s {
                    0.0
                } else if x <= 0.0 {
                    (x + s).powi(2) / (2.0 * s * s)
                } else if x < s {
                    1.0 - (s - x).powi(2) / (2.0 * s * s)
                } else {
                    1.0
                }
            }
            Kernel::Gaussian { size, truncation } => {
                let z = |v: f64| erf(v / (size * std::f64::consts::SQRT_2));
                match truncation {
                    None => 0.5 * (1.0 + z(x)),
                    Some(t) => {
                        let r = t * size;
                        if x <= -r {
                            0.0
                        } else if x >= r {
                            1.0
                        } else {
                            0.5 * (1.0 + z(x) / z(r))
                        }
                    }
                }
            }
            Kernel::Tabulated { xs, values, .. } => {
                let a = x.abs();
                let mut acc = 0.0;
                for i in 1..xs.len() {
                    let (x0, x1, v0, v1) = (xs[i - 1], xs[i], values[i - 1], values[i]);
                    if a <= x0 {
                        break;
                    }
                    let e = a.min(x1);
                    let ve = v0 + (v1 - v0) * (e - x0) / (x1 - x0);
                    acc += 0.5 * (e - x0) * (v0 + ve);
                }
                if x >= 0.0 {
                    0.5 + acc
                } else {
                    0.5 - acc
                }
            }
        }
    }

    /// Points where `φ` is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Kernel::Hat { size } => vec![-size, 0.0, *size],
            Kernel::Gaussian { .. } => self.radius().map_or(vec![], |r| vec![-r, r]),
            Kernel::Tabulated { xs, .. } => {
                let mut k: Vec<f64> = xs.iter().rev().map(|x| -x).chain(xs.iter().copied()).collect();
                k.dedup();
                k
            }
        }
    }

    /// Exact piecewise-polynomial form for piecewise-linear kernels.
    pub fn to_piecewise(&self) -> Option<PiecewisePoly> {
        match self {
            Kernel::Hat { size } => Some(PiecewisePoly::hat(*size)),
            Kernel::Gaussian { .. } => None,
            Kernel::Tabulated { xs, values, .. } => {
                let n = xs.len();
                let mut knots = Vec::with_capacity(2 * n - 1);
                let mut polys = Vec::with_capacity(2 * n - 2);
                for i in (1..n).rev() {
                    let (xa, xb, va, vb) = (-xs[i], -xs[i - 1], values[i], values[i - 1]);
                    knots.push(xa);
                    polys.push(Poly::new(vec![va, (vb - va) / (xb - xa)]));
                }
                for i in 0..n - 1 {
                    knots.push(xs[i]);
                    polys.push(Poly::new(vec![values[i], (values[i + 1] - values[i]) / (xs[i + 1] - xs[i])]));
                }
                knots.push(xs[n - 1]);
                PiecewisePoly::new(knots, polys).ok()
            }
        }
    }

    pub fn mass(&self) -> f64 {
        match self.radius() {
            Some(r) => Romberg::with_tol(1e-14)
                .integrate_with_breaks(|x| self.eval(x), -r, r, &self.kinks())
                .unwrap_or(f64::NAN),
            None => self.cdf(f64::INFINITY) - self.cdf(f64::NEG_INFINITY),
        }
    }

    /// `p(x, τ)`: the profile at size `τ`.
    pub fn profile(&self, x: f64, tau: f64) -> f64 {
        match self {
            Kernel::Hat { .. } => {
                let a = x.abs();
                if a >= tau {
                    0.0
                } else {
                    (1.0 - a / tau) / tau
                }
            }
            Kernel::Gaussian { truncation, .. } => Kernel::Gaussian { size: tau, truncation: *truncation }.eval(x),
            Kernel::Tabulated { size, .. } => size / tau * self.eval(x * size / tau),
        }
    }

    /// `∂p/∂τ (x, τ)`; analytic for the hat, central differences otherwise.
    pub fn dtau_profile(&self, x: f64, tau: f64) -> f64 {
        let a = x.abs();
        match self {
            Kernel::Hat { .. } => {
                if a >= tau {
                    0.0
                } else {
                    (-1.0 + 2.0 * a / tau) / (tau * tau)
                }
            }
            // p(x, τ) = (σ/τ) φ(xσ/τ), so ∂_τp = -(σ/τ²) [φ(u) + u φ'(u)] at u = xσ/τ.
            _ => {
                let sigma = self.size();
                let u = a * sigma / tau;
                if self.radius().is_some_and(|r| u >= r) {
                    return 0.0;
                }
                -sigma / (tau * tau) * (self.eval(u) + u * self.slope(u))
            }
        }
    }

    /// Right derivative of `φ` at `u ≥ 0`.
    fn slope(&self, u: f64) -> f64 {
        match self {
            Kernel::Hat { size } => {
                if u >= *size {
                    0.0
                } else {
                    -1.0 / (size * size)
                }
            }
            Kernel::Gaussian { size, .. } => -u / (size * size) * self.eval(u),
            Kernel::Tabulated { xs, values, .. } => {
                if u >= *xs.last().unwrap() {
                    return 0.0;
                }
                let i = xs.partition_point(|&v| v <= u).clamp(1, xs.len() - 1);
                (values[i] - values[i - 1]) / (xs[i] - xs[i - 1])
            }
        }
    }

    /// Weight of the point mass `∂_τp` carries at `|x| = R(τ)` when the
    /// profile jumps there: the edge moves at `R/τ` with height `p(R⁻, τ)`.
    fn edge_mass(&self, tau: f64) -> f64 {
        let Some(r) = self.radius() else { return 0.0 };
        let inner = match self {
            Kernel::Hat { .. } => 0.0,
            Kernel::Gaussian { .. } => self.eval(r),
            Kernel::Tabulated { values, .. } => *values.last().unwrap(),
        };
        inner * r / tau
    }

    /// Failed class-𝒦 properties; empty when the kernel is in 𝒦.
    pub fn class_k_violations(&self) -> Vec<String> {
        const N: usize = 2000;
        const TOL: f64 = 1e-8;
        let mut bad = Vec::new();
        let Some(r) = self.radius() else {
            bad.push("support is not compact".into());
            return bad;
        };
        let peak = self.eval(0.0).abs().max(1.0);
        let mut prev = f64::INFINITY;
        let (mut sym, mut mono, mut nonneg) = (true, true, true);
        for i in 0..=N {
            let x = r * i as f64 / N as f64;
            let v = self.eval(x);
            sym &= (v - self.eval(-x)).abs() <= TOL * peak;
            mono &= v <= prev + TOL * peak;
            nonneg &= v >= -TOL * peak;
            prev = v;
        }
        for k in 1..=10 {
            let x = r * (1.0 + k as f64 * 1e-3);
            if self.eval(x) != 0.0 || self.eval(-x) != 0.0 {
                bad.push(format!("nonzero beyond support radius at |x| = {x}"));
                break;
            }
        }
        if !sym {
            bad.push("not even".into());
        }
        if !mono {
            bad.push("not non-increasing on [0, radius]".into());
        }
        if !nonneg {
            bad.push("takes negative values".into());
        }
        let m = self.mass();
        if !((m - 1.0).abs() <= TOL) {
            bad.push(format!("mass {m} differs from 1"));
        }
        bad
    }

    pub fn check_class_k(&self) -> bool {
        self.class_k_violations().is_empty()
    }

    /// Continuous on ℝ (no jump at the support edge).
    pub fn is_continuous(&self) -> bool {
        match self.radius() {
            Some(r) => self.eval(r).abs() <= 1e-8 * self.eval(0.0).abs(),
            None => true,
        }
    }

    /// `f_σ(s) = (φ_σ * χ_[0,c])(s)`.
    pub fn blurred_box(&self, s: f64, c: f64) -> f64 {
        self.cdf(s) - self.cdf(s - c)
    }

    fn j_breaks(&self, tau: f64, x: f64, c: f64) -> Vec<f64> {
        let mut b = Vec::new();
        for k in self.kinks() {
            for kk in [k, k + c] {
                b.push(x - kk);
                b.push(kk - x);
            }
        }
        b.extend(self.at_size(tau).kinks());
        b
    }

    fn family_radius(&self, tau: f64) -> f64 {
        self.at_size(tau).effective_radius()
    }

    /// `𝒥(σ, τ, x, c)` evaluated as `∫_0^R ∂_τp(y, τ) [f_σ(x - y) + f_σ(x + y)] dy`.
    pub fn condition_j(&self, tau: f64, x: f64, c: f64) -> Result<f64> {
        let r = self.family_radius(tau);
        let w = |y: f64| self.blurred_box(x - y, c) + self.blurred_box(x + y, c);
        let smooth =
            Romberg::with_tol(1e-15).integrate_with_breaks(|y| self.dtau_profile(y, tau) * w(y), 0.0, r, &self.j_breaks(tau, x, c))?;
        Ok(smooth + self.edge_mass(tau) * w(r))
    }

    /// `𝒥` from its defining double integral, for cross-checking.
    pub fn condition_j_direct(&self, tau: f64, x: f64, c: f64) -> Result<f64> {
        let r = self.family_radius(tau);
        let kinks = self.kinks();
        let inner = Romberg::with_tol(1e-15);
        let inner_val = |y: f64| -> f64 {
            let mut br = Vec::with_capacity(2 * kinks.len());
            for &k in &kinks {
                br.push(y - k);
                br.push(k - y);
            }
            inner
                .integrate_with_breaks(|w| self.eval(y - w) + self.eval(y + w), x - c, x, &br)
                .unwrap_or(f64::NAN)
        };
        let v = Romberg::with_tol(1e-14).integrate_with_breaks(
            |y| self.dtau_profile(y, tau) * inner_val(y),
            0.0,
            r,
            &self.j_breaks(tau, x, c),
        )? + self.edge_mass(tau) * inner_val(r);
        if v.is_nan() {
            return Err(Error::QuadratureFailure("inner integral of 𝒥 did not converge".into()));
        }
        Ok(v)
    }

    /// Monotonicity of `x ↦ ∂_τp(x, τ)` on `[0, R]`.
    pub fn dtau_monotonicity(&self, tau: f64) -> Monotonicity {
        const N: usize = 256;
        let r = self.family_radius(tau);
        let vals: Vec<f64> = (0..N).map(|i| self.dtau_profile(r * (i as f64 + 0.5) / N as f64, tau)).collect();
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let tol = 1e-9 * scale;
        let inc = vals.windows(2).all(|w| w[1] >= w[0] - tol);
        let dec = vals.windows(2).all(|w| w[1] <= w[0] + tol);
        match (inc, dec) {
            (true, _) => Monotonicity::Increasing,
            (false, true) => Monotonicity::Decreasing,
            _ => Monotonicity::Neither,
        }
    }

    pub fn check_condition_j(&self, grid: &JGrid) -> Result<KernelAdmissibility> {
        let violations = self.class_k_violations();
        let in_class_k = violations.is_empty();
        let continuous = self.is_continuous();
        let sigma = self.size();
        let mut notes = violations;
        if !continuous {
            notes.push("jump at the support edge: not continuous".into());
        }
        if !in_class_k {
            return Ok(KernelAdmissibility {
                kernel: self.clone(),
                in_class_k,
                continuous,
                in_class_k3: false,
                worst_j: None,
                worst_at: None,
                sufficient_condition: SufficientCondition::Neither,
                per_tau: vec![],
                notes,
            });
        }
        let mut per_tau = Vec::with_capacity(grid.tau_fractions.len());
        let mut worst: Option<(f64, JPoint)> = None;
        for &tf in &grid.tau_fractions {
            let tau = tf * sigma;
            let mono = self.dtau_monotonicity(tau);
            let mut tau_worst = f64::NEG_INFINITY;
            for &cf in &grid.c_fractions {
                let c = cf * sigma;
                let xs: Vec<f64> = match mono {
                    Monotonicity::Increasing => vec![0.0],
                    Monotonicity::Decreasing => vec![0.5 * c],
                    Monotonicity::Neither => {
                        (0..=grid.x_samples).map(|i| c * i as f64 / grid.x_samples as f64).collect()
                    }
                };
                for x in xs {
                    let j = self.condition_j(tau, x, c)?;
                    tau_worst = tau_worst.max(j);
                    if worst.as_ref().map_or(true, |(w, _)| j > *w) {
                        worst = Some((j, JPoint { sigma, tau, x, c }));
                    }
                }
            }
            per_tau.push(TauReport { tau, monotonicity: mono, worst_j: tau_worst });
        }
        let worst_j = worst.as_ref().map(|w| w.0);
        let passes = worst_j.map_or(false, |w| w <= J_TOL);
        let sufficient_condition = if !passes {
            SufficientCondition::Neither
        } else if per_tau.iter().all(|t| t.monotonicity == Monotonicity::Increasing) {
            SufficientCondition::IncreasingShortcut
        } else if per_tau.iter().all(|t| t.monotonicity == Monotonicity::Decreasing) {
            SufficientCondition::DecreasingShortcut
        } else {
            SufficientCondition::DirectGrid
        };
        Ok(KernelAdmissibility {
            kernel: self.clone(),
            in_class_k,
            continuous,
            in_class_k3: in_class_k && continuous && passes,
            worst_j,
            worst_at: worst.map(|w| w.1),
            sufficient_condition,
            per_tau,
            notes,
        })
    }
}

fn check_size(size: f64) -> Result<()> {
    if size > 0.0 && size.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("kernel size must be positive and finite, got {size}")))
    }
}

/// `𝒥 ≤ J_TOL` counts as non-positive.
pub const J_TOL: f64 = 1e-9;

/// Relative step of the central difference in τ.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Neither,
}

/// Which route established `𝒥 ≤ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SufficientCondition {
    /// `∂τp` increasing in `x`: checking `x = 0` suffices.
    IncreasingShortcut,
    /// `∂τp` decreasing in `x`: checking `x = c/2` suffices.
    DecreasingShortcut,
    /// Checked on a grid of `x ∈ [0, c]`.
    DirectGrid,
    Neither,
}

/// Sample points for the `𝒥` check, as fractions of the kernel size `σ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JGrid {
    pub tau_fractions: Vec<f64>,
    pub c_fractions: Vec<f64>,
    pub x_samples: usize,
}

impl JGrid {
    /// `n_tau` sizes in `(0, σ]`, `n_c` widths spread over `[2σ, 10σ]`.
    pub fn new(n_tau: usize, n_c: usize, x_samples: usize) -> Self {
        let c_frac = |i: usize| if n_c <= 1 { 2.0 } else { 2.0 + 8.0 * i as f64 / (n_c - 1) as f64 };
        JGrid {
            tau_fractions: (1..=n_tau).map(|i| i as f64 / n_tau as f64).collect(),
            c_fractions: (0..n_c).map(c_frac).collect(),
            x_samples: x_samples.max(1),
        }
    }
}

impl Default for JGrid {
    fn default() -> Self {
        JGrid::new(16, 8, 64)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct JPoint {
    pub sigma: f64,
    pub tau: f64,
    pub x: f64,
    pub c: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TauReport {
    pub tau: f64,
    pub monotonicity: Monotonicity,
    pub worst_j: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelAdmissibility {
    pub kernel: Kernel,
    pub in_class_k: bool,
    pub continuous: bool,
    pub in_class_k3: bool,
    pub worst_j: Option<f64>,
    pub worst_at: Option<JPoint>,
    pub sufficient_condition: SufficientCondition,
    pub per_tau: Vec<TauReport>,
    pub notes: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hat_basics() {
        let k = Kernel::hat(0.1).unwrap();
        assert!((k.eval(0.0) - 10.0).abs() < 1e-12);
        assert_eq!(k.eval(0.1), 0.0);
        assert!((k.mass() - 1.0).abs() < 1e-13);
        assert!((k.cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_needs_truncation_for_class_k() {
        assert!(!Kernel::gaussian(0.1, None).unwrap().check_class_k());
        let g = Kernel::gaussian(0.1, Some(4.0)).unwrap();
        assert!(g.check_class_k(), "{:?}", g.class_k_violations());
        assert!((g.mass() - 1.0).abs() < 1e-10);
        assert!(!g.is_continuous());
    }

    #[test]
    fn tabulated_is_normalized_and_matches_hat() {
        let t = Kernel::tabulated(vec![0.0, 0.05, 0.1], vec![7.0, 3.5, 0.0]).unwrap();
        let h = Kernel::hat(0.1).unwrap();
        for i in 0..50 {
            let x = -0.12 + 0.24 * i as f64 / 49.0;
            assert!((t.eval(x) - h.eval(x)).abs() < 1e-12);
            assert!((t.cdf(x) - h.cdf(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn cdf_matches_quadrature() {
        let g = Kernel::gaussian(0.07, Some(3.0)).unwrap();
        let r = Romberg::with_tol(1e-14);
        for &x in &[-0.3f64, -0.1, 0.0, 0.05, 0.2] {
            let q = r.integrate_with_breaks(|y| g.eval(y), -0.21, x.max(-0.21), &[]).unwrap();
            assert!((q - g.cdf(x)).abs() < 1e-11, "x={x}: {q} vs {}", g.cdf(x));
        }
    }

    #[test]
    fn dtau_matches_finite_difference() {
        let kernels = [
            Kernel::hat(0.1).unwrap(),
            Kernel::gaussian(0.03, Some(4.0)).unwrap(),
            Kernel::tabulated(vec![0.0, 0.04, 0.1], vec![3.0, 2.0, 0.5]).unwrap(),
        ];
        for k in &kernels {
            for &(x, tau) in &[(0.01, 0.05), (0.03, 0.07), (0.0, 0.1)] {
                let h = 1e-6 * tau;
                let fd = (k.profile(x, tau + h) - k.profile(x, tau - h)) / (2.0 * h);
                assert!((fd - k.dtau_profile(x, tau)).abs() < 1e-5 * fd.abs().max(1.0), "{k:?} x={x} τ={tau}");
            }
        }
    }

    #[test]
    fn hat_j_vanishes_at_origin() {
        let k = Kernel::hat(0.1).unwrap();
        for &(t, c) in &[(0.1, 0.2), (0.03, 0.4), (0.07, 0.25)] {
            assert!(k.condition_j(t, 0.0, c).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn box_kernel_has_nonpositive_j() {
        let b = Kernel::tabulated(vec![0.0, 0.1], vec![1.0, 1.0]).unwrap();
        for &(t, x, c) in &[(0.1, 0.0, 0.2), (0.05, 0.02, 0.25), (0.08, 0.1, 0.3)] {
            assert!(b.condition_j(t, x, c).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn hat_is_admissible_through_the_increasing_shortcut() {
        let a = Kernel::hat(0.05).unwrap().check_condition_j(&JGrid::default()).unwrap();
        assert!(a.in_class_k3, "{a:?}");
        assert_eq!(a.sufficient_condition, SufficientCondition::IncreasingShortcut);
        assert!(a.worst_j.unwrap().abs() < 1e-12);
    }

    #[test]
    fn tabulated_hat_agrees_with_hat() {
        let t = Kernel::tabulated(vec![0.0, 0.025, 0.05], vec![2.0, 1.0, 0.0]).unwrap();
        let a = t.check_condition_j(&JGrid::new(4, 3, 8)).unwrap();
        assert!(a.in_class_k3, "{a:?}");
        assert!(a.worst_j.unwrap() <= J_TOL);
    }

    #[test]
    fn direct_and_reduced_j_agree() {
        let k = Kernel::hat(0.05).unwrap();
        for &(tau, x, c) in &[(0.05, 0.03, 0.12), (0.02, 0.0, 0.1), (0.04, 0.07, 0.2)] {
            let a = k.condition_j(tau, x, c).unwrap();
            let b = k.condition_j_direct(tau, x, c).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn truncated_gaussian_is_not_in_k3() {
        let a = Kernel::gaussian(0.05, Some(3.0)).unwrap().check_condition_j(&JGrid::new(3, 2, 4)).unwrap();
        assert!(a.in_class_k && !a.continuous && !a.in_class_k3);
    }

    #[test]
    fn serde_tagging() {
        let k = Kernel::gaussian(0.02, Some(4.0)).unwrap();
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(s, r#"{"kind":"gaussian","size":0.02,"truncation":4.0}"#);
        let back: Kernel = serde_json::from_str(&s).unwrap();
        assert_eq!(k, back);
    }
}
