//! Sufficient conditions under which the original bar code is the unique
//! minimizer. A failed certificate only means the parameters lie outside the
//! proven regime; it never claims recovery is impossible.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::energy::{EnergyParams, Functional};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateKind {
    F1,
    F2,
    F3,
    /// The interface-count condition shared by all three functionals.
    #[serde(rename = "unified")]
    Unified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs < rhs` if strict, `lhs ≤ rhs` otherwise.
    pub strict: bool,
    pub satisfied: bool,
    pub margin: f64,
}

impl Condition {
    fn new(name: &str, lhs: f64, rhs: f64, strict: bool) -> Self {
        let satisfied = if strict { lhs < rhs } else { lhs <= rhs };
        Condition { name: name.into(), lhs, rhs, strict, satisfied, margin: rhs - lhs }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub omega: f64,
    pub sigma: f64,
    pub rho: f64,
    pub lambda: f64,
    pub conditions: Vec<Condition>,
    pub verdict: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Certificate {
    fn new(kind: CertificateKind, omega: f64, sigma: f64, rho: f64, lambda: f64, conditions: Vec<Condition>) -> Self {
        let verdict = conditions.iter().all(|c| c.satisfied);
        Certificate { kind, omega, sigma, rho, lambda, conditions, verdict, notes: Vec::new() }
    }

    pub fn verdict_text(&self) -> &'static str {
        if self.verdict {
            "certified: the original code is the unique minimizer"
        } else {
            "outside proven regime"
        }
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:?}  ω = {}  σ = {}  ρ = {}  λ = {}",
            self.kind, self.omega, self.sigma, self.rho, self.lambda
        )?;
        writeln!(f, "{:<44} {:>14} {:>3} {:>14} {:>14}  ok", "condition", "lhs", "", "rhs", "margin")?;
        for c in &self.conditions {
            writeln!(
                f,
                "{:<44} {:>14.8e} {:>3} {:>14.8e} {:>14.6e}  {}",
                c.name,
                c.lhs,
                if c.strict { "<" } else { "<=" },
                c.rhs,
                c.margin,
                if c.satisfied { "yes" } else { "no" }
            )?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        write!(f, "verdict: {}", self.verdict_text())
    }
}

pub fn certify_f1(omega: f64, sigma: f64, lambda: f64) -> Certificate {
    Certificate::new(
        CertificateKind::F1,
        omega,
        sigma,
        0.0,
        lambda,
        vec![
            Condition::new("sigma <= omega", sigma, omega, false),
            Condition::new("(2/3) sigma + 2/lambda < omega", 2.0 / 3.0 * sigma + 2.0 / lambda, omega, true),
        ],
    )
}

pub fn certify_f2(omega: f64, sigma: f64, lambda: f64) -> Certificate {
    Certificate::new(
        CertificateKind::F2,
        omega,
        sigma,
        sigma,
        lambda,
        vec![
            Condition::new("sigma <= omega/2", sigma, 0.5 * omega, false),
            Condition::new("2/lambda + (21/15) sigma < omega", 2.0 / lambda + 21.0 / 15.0 * sigma, omega, true),
        ],
    )
}

/// `(1/(15ρ²))(−σ³ + 5ρσ² + 17ρ³)`.
pub fn f3_size_term(sigma: f64, rho: f64) -> f64 {
    (-sigma.powi(3) + 5.0 * rho * sigma * sigma + 17.0 * rho.powi(3)) / (15.0 * rho * rho)
}

pub fn certify_f3(omega: f64, sigma: f64, rho: f64, lambda: f64) -> Certificate {
    let mut c = Certificate::new(
        CertificateKind::F3,
        omega,
        sigma,
        rho,
        lambda,
        vec![
            Condition::new("sigma <= rho", sigma, rho, false),
            Condition::new("rho <= omega/2", rho, 0.5 * omega, false),
            Condition::new(
                "2/lambda + (-s^3 + 5 r s^2 + 17 r^3)/(15 r^2) < omega",
                2.0 / lambda + f3_size_term(sigma, rho),
                omega,
                true,
            ),
        ],
    );
    if rho < sigma {
        c.notes.push("rho < sigma: no sufficient condition is known; the original code need not be a minimizer".into());
    }
    c
}

/// `f(ρ, σ)`, by the `σ ≤ ρ` or `ρ ≤ σ` branch.
pub fn f_rho_sigma(rho: f64, sigma: f64) -> f64 {
    if sigma <= rho {
        (-sigma.powi(3) + 5.0 * rho * sigma * sigma + 10.0 * rho.powi(3)) / (rho * rho)
    } else {
        (-rho.powi(3) + 5.0 * sigma * rho * rho + 10.0 * sigma.powi(3)) / (sigma * sigma)
    }
}

/// The interface-count condition `2/λ + (7ρ + f(ρ, σ))/15 < ω`.
pub fn unified_condition(omega: f64, sigma: f64, rho: f64, lambda: f64) -> Result<Certificate> {
    if !(rho > 0.0 && sigma > 0.0) {
        return Err(Error::OutOfLemmaScope(format!(
            "needs ρ, σ > 0 (ρ = {rho}, σ = {sigma}); for ρ = 0 the F1 condition is the degenerate form"
        )));
    }
    if rho > 0.5 * omega || sigma > 0.5 * omega {
        return Err(Error::OutOfLemmaScope(format!("needs ρ, σ ≤ ω/2 (ρ = {rho}, σ = {sigma}, ω = {omega})")));
    }
    let lhs = 2.0 / lambda + (7.0 * rho + f_rho_sigma(rho, sigma)) / 15.0;
    Ok(Certificate::new(
        CertificateKind::Unified,
        omega,
        sigma,
        rho,
        lambda,
        vec![Condition::new("2/lambda + (7 rho + f(rho, sigma))/15 < omega", lhs, omega, true)],
    ))
}

/// The certificate matching `p.functional`.
pub fn certify(p: &EnergyParams, omega: f64) -> Certificate {
    match p.functional {
        Functional::F1 => certify_f1(omega, p.sigma, p.lambda),
        Functional::F2 => certify_f2(omega, p.sigma, p.lambda),
        Functional::F3 => certify_f3(omega, p.sigma, p.rho, p.lambda),
    }
}
