//! Exhaustive minimization over bar codes whose interfaces lie on a grid.
//!
//! This is a finite surrogate for minimization over all bar codes: it can
//! exhibit consistency with the uniqueness results, not prove them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barcode::{BarCode, EndpointConstraint};
use crate::convolve::{convolve_piecewise_hat, hat_convolve, Signal, SignalData};
use crate::energy::{evaluate, EnergyParams, EnergyReport};
use crate::error::{Error, Result};
use crate::poly::{PiecewisePoly, RunningIntegral};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchSpace {
    /// `m` candidate interface positions `i/(m-1)`.
    pub grid_points: usize,
    /// Largest interface count `2K`.
    pub max_interfaces: usize,
    #[serde(default)]
    pub endpoints: Option<EndpointConstraint>,
    /// Always evaluated in addition to the grid codes.
    #[serde(default)]
    pub extra_candidates: Vec<BarCode>,
}

impl SearchSpace {
    pub fn new(grid_points: usize, max_interfaces: usize) -> Result<Self> {
        let s = SearchSpace { grid_points, max_interfaces, endpoints: None, extra_candidates: Vec::new() };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 2 || self.max_interfaces % 2 != 0 || self.max_interfaces > self.grid_points {
            return Err(Error::InvalidParameter(format!(
                "need m ≥ 2 and an even 2K ≤ m (m = {}, 2K = {})",
                self.grid_points, self.max_interfaces
            )));
        }
        Ok(())
    }

    pub fn grid_point(&self, i: usize) -> f64 {
        i as f64 / (self.grid_points - 1) as f64
    }

    /// Nearest grid index.
    pub fn snap_index(&self, x: f64) -> usize {
        ((x * (self.grid_points - 1) as f64).round().max(0.0) as usize).min(self.grid_points - 1)
    }

    /// The code with each interface moved to its nearest grid point.
    pub fn snap(&self, z: &BarCode) -> Result<BarCode> {
        BarCode::new(z.interfaces().iter().map(|&t| self.grid_point(self.snap_index(t))).collect())
    }

    fn admits(&self, first: Option<usize>, last: Option<usize>) -> bool {
        let Some(e) = self.endpoints else { return true };
        let m = self.grid_points;
        match (first, last) {
            (None, _) | (_, None) => !e.start_bar && !e.end_bar,
            (Some(f), Some(l)) => (f == 0) == e.start_bar && (l == m - 1) == e.end_bar,
        }
    }

    /// Whether grid enumeration already produces `z`.
    pub fn enumerates(&self, z: &BarCode) -> bool {
        let t = z.interfaces();
        if t.len() > self.max_interfaces {
            return false;
        }
        let idx: Vec<usize> = t.iter().map(|&x| self.snap_index(x)).collect();
        idx.iter().zip(t).all(|(&i, &x)| self.grid_point(i) == x) && self.admits(idx.first().copied(), idx.last().copied())
    }

    /// `1 + Σ_k C(m, 2k) + |extras|` (ignoring the endpoint filter).
    pub fn candidate_count(&self) -> u128 {
        let m = self.grid_points as u128;
        let mut total: u128 = 1;
        let mut k = 2;
        while k <= self.max_interfaces {
            total = total.saturating_add(binomial(m, k as u128));
            k += 2;
        }
        total.saturating_add(self.extra_candidates.len() as u128)
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k.min(n));
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleConfig {
    pub budget_cap: u128,
    pub tie_tolerance: f64,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { budget_cap: 5_000_000, tie_tolerance: 1e-10, jobs: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountBest {
    pub interfaces: usize,
    pub code: BarCode,
    pub total: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleResult {
    pub minimizer: BarCode,
    pub report: EnergyReport,
    /// Other candidates within the tie tolerance, in enumeration order.
    pub ties: Vec<BarCode>,
    pub candidates_evaluated: u64,
    /// Best candidate for each interface count.
    pub best_by_interface_count: Vec<CountBest>,
}

/// `S(t) = K2(t) + K2(-t)` for `K2'' = φ_ρ * φ_ρ`; `|t|` when `ρ = 0`.
enum PairKernel {
    Delta,
    Hat { k2: RunningIntegral, reach: f64 },
}

impl PairKernel {
    fn new(rho: f64) -> Self {
        if rho == 0.0 {
            return PairKernel::Delta;
        }
        let h = PiecewisePoly::hat(rho);
        let k1 = h.convolve(&h).running_integral();
        PairKernel::Hat { k2: k1.on_span().running_integral(), reach: 2.0 * rho }
    }

    fn s(&self, t: f64) -> f64 {
        let a = t.abs();
        match self {
            PairKernel::Delta => a,
            PairKernel::Hat { k2, reach } => {
                if a >= *reach {
                    a
                } else {
                    k2.eval(a) + k2.eval(-a)
                }
            }
        }
    }
}

/// `‖φ_ρ*u - f‖² = ⟨u, ψ*u⟩ - 2⟨u, φ_ρ*f⟩ + ‖f‖²` from interface positions.
struct FastFidelity {
    g: RunningIntegral,
    pair: PairKernel,
    f_norm_sq: f64,
}

impl FastFidelity {
    fn new(f: &PiecewisePoly, rho: f64) -> Result<Self> {
        let g = convolve_piecewise_hat(f, rho)?.running_integral();
        Ok(FastFidelity { g, pair: PairKernel::new(rho), f_norm_sq: f.norm_sq() })
    }

    fn fidelity(&self, t: &[f64]) -> f64 {
        let sign = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
        let mut cross = 0.0;
        let mut own = 0.0;
        for (i, &ti) in t.iter().enumerate() {
            cross -= sign(i) * self.g.eval(ti);
            for (j, &tj) in t.iter().enumerate() {
                own -= 0.5 * sign(i) * sign(j) * self.pair.s(ti - tj);
            }
        }
        own - 2.0 * cross + self.f_norm_sq
    }
}

/// The same quantities tabulated on the grid: `S` by index distance and the
/// running integral by index.
struct GridTables {
    s: Vec<f64>,
    g: Vec<f64>,
    f_norm_sq: f64,
}

impl GridTables {
    fn new(ff: &FastFidelity, space: &SearchSpace) -> Self {
        let m = space.grid_points;
        GridTables {
            s: (0..m).map(|d| ff.pair.s(space.grid_point(d))).collect(),
            g: (0..m).map(|i| ff.g.eval(space.grid_point(i))).collect(),
            f_norm_sq: ff.f_norm_sq,
        }
    }

    fn fidelity(&self, idx: &[usize]) -> f64 {
        let mut cross = 0.0;
        let mut own = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            let si = if a % 2 == 0 { 1.0 } else { -1.0 };
            cross -= si * self.g[i];
            own -= 0.5 * self.s[0];
            for (b, &j) in idx.iter().enumerate().skip(a + 1) {
                let sj = if b % 2 == 0 { 1.0 } else { -1.0 };
                own -= si * sj * self.s[j - i];
            }
        }
        own - 2.0 * cross + self.f_norm_sq
    }
}

/// The observation as a piecewise polynomial; grids become their
/// piecewise-linear interpolant.
pub fn as_piecewise(f: &Signal) -> PiecewisePoly {
    match &f.data {
        SignalData::Piecewise(p) => p.clone(),
        SignalData::Grid(g) => PiecewisePoly::linear_interpolant(g.x0, g.h, &g.values),
    }
}

struct Partial {
    min: f64,
    near: Vec<(f64, Vec<f64>)>,
    per_count: Vec<Option<(f64, Vec<f64>)>>,
    count: u64,
}

impl Partial {
    fn new(max_interfaces: usize) -> Self {
        Partial { min: f64::INFINITY, near: Vec::new(), per_count: vec![None; max_interfaces / 2 + 1], count: 0 }
    }

    fn offer(&mut self, total: f64, tol: f64, t: impl FnOnce() -> Vec<f64>, n_if: usize) {
        self.count += 1;
        let slot_better = self.per_count[n_if / 2].as_ref().map_or(true, |(b, _)| total < *b);
        if total > self.min + tol && !slot_better {
            return;
        }
        let t = t();
        if slot_better {
            self.per_count[n_if / 2] = Some((total, t.clone()));
        }
        if total <= self.min + tol {
            if total < self.min {
                self.min = total;
                let min = self.min;
                self.near.retain(|(v, _)| *v <= min + tol);
            }
            self.near.push((total, t));
        }
    }

    fn absorb(&mut self, other: Partial, tol: f64) {
        self.count += other.count;
        for (slot, o) in self.per_count.iter_mut().zip(other.per_count) {
            if let Some((v, t)) = o {
                if slot.as_ref().map_or(true, |(b, _)| v < *b) {
                    *slot = Some((v, t));
                }
            }
        }
        if other.min < self.min {
            self.min = other.min;
        }
        let min = self.min;
        self.near.retain(|(v, _)| *v <= min + tol);
        self.near.extend(other.near.into_iter().filter(|(v, _)| *v <= min + tol));
    }
}

/// All size-`k` index sets whose smallest element is `first`, in
/// lexicographic order.
fn scan_item(space: &SearchSpace, tables: &GridTables, p: &EnergyParams, tol: f64, k: usize, first: usize) -> Partial {
    let m = space.grid_points;
    let mut part = Partial::new(space.max_interfaces);
    if first + k > m {
        return part;
    }
    let mut idx: Vec<usize> = (0..k).map(|j| first + j).collect();
    loop {
        if space.admits(Some(idx[0]), Some(idx[k - 1])) {
            let total = k as f64 + p.lambda * tables.fidelity(&idx);
            part.offer(total, tol, || idx.iter().map(|&i| space.grid_point(i)).collect(), k);
        }
        // Advance positions 1..k, keeping idx[0] fixed.
        let mut j = k - 1;
        loop {
            if j == 0 {
                return part;
            }
            if idx[j] < m - (k - j) {
                idx[j] += 1;
                for l in j + 1..k {
                    idx[l] = idx[l - 1] + 1;
                }
                break;
            }
            j -= 1;
        }
    }
}

pub fn minimize(space: &SearchSpace, f: &Signal, p: &EnergyParams, cfg: &OracleConfig) -> Result<OracleResult> {
    space.validate()?;
    p.validate()?;
    let needed = space.candidate_count();
    if needed > cfg.budget_cap {
        return Err(Error::SearchBudgetExceeded { needed, cap: cfg.budget_cap });
    }
    let fp = as_piecewise(f);
    let fast = FastFidelity::new(&fp, p.rho)?;
    let tables = GridTables::new(&fast, space);
    let tol = cfg.tie_tolerance;

    let mut acc = Partial::new(space.max_interfaces);
    if space.admits(None, None) {
        acc.offer(p.lambda * fast.f_norm_sq, tol, Vec::new, 0);
    }
    let items: Vec<(usize, usize)> = (1..=space.max_interfaces / 2)
        .flat_map(|h| (0..space.grid_points).map(move |first| (2 * h, first)))
        .collect();
    let scan = || -> Vec<Partial> {
        items.par_iter().map(|&(k, first)| scan_item(space, &tables, p, tol, k, first)).collect()
    };
    let parts = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(scan),
        None => scan(),
    };
    for part in parts {
        acc.absorb(part, tol);
    }
    for z in &space.extra_candidates {
        if space.enumerates(z) {
            continue;
        }
        let t = z.interfaces();
        let total = t.len() as f64 + p.lambda * fast.fidelity(t);
        let n = t.len();
        if n / 2 >= acc.per_count.len() {
            acc.per_count.resize(n / 2 + 1, None);
        }
        acc.offer(total, tol, || t.to_vec(), n);
    }

    let (best_pos, _) = acc
        .near
        .iter()
        .enumerate()
        .fold((usize::MAX, f64::INFINITY), |(bi, bv), (i, (v, _))| if *v < bv { (i, *v) } else { (bi, bv) });
    let minimizer = BarCode::new(acc.near[best_pos].1.clone())?;
    let ties = acc
        .near
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best_pos)
        .map(|(_, (_, t))| BarCode::new(t.clone()))
        .collect::<Result<Vec<_>>>()?;
    let best_by_interface_count = acc
        .per_count
        .iter()
        .enumerate()
        .filter_map(|(h, s)| {
            s.as_ref().map(|(v, t)| {
                BarCode::new(t.clone()).map(|code| CountBest { interfaces: 2 * h, code, total: *v })
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = evaluate(&minimizer, &Signal::piecewise(fp), p)?;
    Ok(OracleResult { minimizer, report, ties, candidates_evaluated: acc.count, best_by_interface_count })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub result: OracleResult,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    /// Consecutive λ values between which the minimizer stops being empty.
    pub transition: Option<(f64, f64)>,
}

/// Runs the oracle for each λ on noiseless data `φ_σ * z`.
pub fn sweep_lambda(
    space: &SearchSpace,
    z: &BarCode,
    template: &EnergyParams,
    lambdas: &[f64],
    cfg: &OracleConfig,
) -> Result<Sweep> {
    let f = hat_convolve(z, template.sigma)?;
    let mut points = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let result = minimize(space, &f, &template.with_lambda(lambda), cfg)?;
        points.push(SweepPoint { lambda, result });
    }
    let transition = points
        .windows(2)
        .find(|w| w[0].result.minimizer.is_empty() && !w[1].result.minimizer.is_empty())
        .map(|w| (w[0].lambda, w[1].lambda));
    Ok(Sweep { points, transition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::fidelity;

    #[test]
    fn counts() {
        let s = SearchSpace::new(25, 6).unwrap();
        assert_eq!(s.candidate_count(), 1 + 300 + 12650 + 177100);
    }

    #[test]
    fn fast_fidelity_matches_exact_evaluation() {
        let z = BarCode::new(vec![0.2, 0.4, 0.55, 0.7]).unwrap();
        let f = hat_convolve(&z, 0.03).unwrap();
        let fp = f.as_piecewise().unwrap().clone();
        for &rho in &[0.0, 0.02, 0.05] {
            let fast = FastFidelity::new(&fp, rho).unwrap();
            let p = if rho == 0.0 {
                EnergyParams::f1(1.0, 0.03).unwrap()
            } else {
                EnergyParams::f3(1.0, 0.03, rho).unwrap()
            };
            for u in [
                BarCode::empty(),
                BarCode::new(vec![0.1, 0.45]).unwrap(),
                BarCode::new(vec![0.0, 0.21, 0.22, 0.3, 0.6, 1.0]).unwrap(),
            ] {
                let a = fast.fidelity(u.interfaces());
                let b = fidelity(&u, &f, &p).unwrap();
                assert!((a - b).abs() < 1e-13, "ρ={rho} u={u}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let s = SearchSpace::new(200, 10).unwrap();
        let z = BarCode::new(vec![0.2, 0.4]).unwrap();
        let f = hat_convolve(&z, 0.03).unwrap();
        let r = minimize(&s, &f, &EnergyParams::f2(10.0, 0.03).unwrap(), &OracleConfig::default());
        assert!(matches!(r, Err(Error::SearchBudgetExceeded { .. })));
    }

    #[test]
    fn certified_f2_instance_recovers_z() {
        let s = SearchSpace::new(21, 4).unwrap();
        let z = BarCode::new(vec![0.3, 0.7]).unwrap();
        let f = hat_convolve(&z, 0.05).unwrap();
        let r = minimize(&s, &f, &EnergyParams::f2(60.0, 0.05).unwrap(), &OracleConfig::default()).unwrap();
        assert_eq!(r.minimizer, z);
        assert!(r.ties.is_empty());
        assert_eq!(r.candidates_evaluated as u128, s.candidate_count());
    }
}
