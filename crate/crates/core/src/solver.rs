//! Phase-field deblurring: integrate
//!
//!   u_t = 2ε u_xx − W'(u)/ε − 2λ φ_ρ*(φ_ρ*u − f),   W(u) = u²(1−u)²/2,
//!
//! to steady state on a padded grid and threshold the result at ½.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barcode::{BarCode, MIN_GAP};
use crate::convolve::{GridSamples, GridSpec, Provenance, Signal, SignalData};
use crate::energy::Functional;
use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Block noise: every ω-interval holds `points_per_omega` grid
/// points split into `groups` blocks, each shifted by one uniform draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub amplitude: f64,
    pub points_per_omega: usize,
    pub groups: usize,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(amplitude: f64, seed: u64) -> Self {
        NoiseConfig { amplitude, points_per_omega: 400, groups: 16, seed }
    }

    pub fn block_len(&self) -> usize {
        (self.points_per_omega / self.groups).max(1)
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite())
            || self.points_per_omega == 0
            || self.groups == 0
            || self.points_per_omega % self.groups != 0
        {
            return Err(Error::InvalidParameter(format!(
                "noise needs a ≥ 0 and groups dividing points_per_omega (got a = {}, {} / {})",
                self.amplitude, self.points_per_omega, self.groups
            )));
        }
        Ok(())
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::new(0.1, 0)
    }
}

/// Nodes of `f`'s grid if it already has spacing `h` on the lattice `hℤ`.
fn on_lattice(g: &GridSamples, h: f64) -> bool {
    (g.h - h).abs() <= 1e-12 * h && ((g.x0 / h) - (g.x0 / h).round()).abs() < 1e-6
}

/// Samples `f` at spacing `ω/points_per_omega` (keeping its grid when it
/// already matches) and adds block-constant uniform noise. Blocks are
/// aligned to the global lattice, so the same seed perturbs a given `x` the
/// same way regardless of where the grid starts.
pub fn add_noise(f: &Signal, n: &NoiseConfig, omega: f64) -> Result<Signal> {
    n.validate()?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("ω must be positive, got {omega}")));
    }
    let h = omega / n.points_per_omega as f64;
    let base = match &f.data {
        SignalData::Grid(g) if on_lattice(g, h) => g.clone(),
        _ => {
            let (lo, hi) = f
                .extent()
                .ok_or_else(|| Error::InvalidParameter("cannot add noise to an empty signal".into()))?;
            f.sample(&GridSpec::covering(lo, hi, h)?)
        }
    };
    let spec = base.spec();
    let mut values = base.values.clone();
    if n.amplitude > 0.0 {
        let block = n.block_len() as i64;
        let first = spec.lattice_index(0).div_euclid(block);
        let last = spec.lattice_index(spec.n - 1).div_euclid(block);
        let mut rng = ChaCha8Rng::seed_from_u64(n.seed);
        let draws: Vec<f64> = (first..=last).map(|_| rng.gen_range(-n.amplitude..=n.amplitude)).collect();
        for (i, v) in values.iter_mut().enumerate() {
            *v += draws[(spec.lattice_index(i).div_euclid(block) - first) as usize];
        }
    }
    let provenance = Provenance {
        noise_amplitude: Some(n.amplitude),
        seed: Some(n.seed),
        omega: Some(omega),
        ..f.provenance.clone()
    };
    Ok(Signal::grid(GridSamples::new(spec, values)?).with_provenance(provenance))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Zero,
    Half,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeStep {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Diffusion implicit, reaction and fidelity explicit.
    SemiImplicit,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub lambda: f64,
    pub functional: Functional,
    pub blur: Kernel,
    /// `φ_ρ`; defaults to `blur` for F2 and is ignored for F1.
    pub deblur: Option<Kernel>,
    pub dt: TimeStep,
    pub scheme: Scheme,
    pub max_steps: usize,
    pub steady_tol: f64,
    pub init: Init,
    pub h: f64,
    pub pad: f64,
}

impl SolverConfig {
    /// Defaults for an ω-scale experiment: `h = ω/400`, padding twice the
    /// widest kernel radius.
    pub fn new(functional: Functional, lambda: f64, blur: Kernel, deblur: Option<Kernel>, omega: f64) -> Self {
        let reach = blur.effective_radius().max(deblur.as_ref().map_or(0.0, |k| k.effective_radius()));
        SolverConfig {
            epsilon: 4e-4,
            lambda,
            functional,
            blur,
            deblur,
            dt: TimeStep::Auto,
            scheme: Scheme::SemiImplicit,
            max_steps: 200_000,
            steady_tol: 1e-8,
            init: Init::Zero,
            h: omega / 400.0,
            pad: 2.0 * reach,
        }
    }

    /// The kernel inside the fidelity term, if any.
    pub fn fidelity_kernel(&self) -> Result<Option<&Kernel>> {
        match self.functional {
            Functional::F1 => Ok(None),
            Functional::F2 => Ok(Some(self.deblur.as_ref().unwrap_or(&self.blur))),
            Functional::F3 => self
                .deblur
                .as_ref()
                .map(Some)
                .ok_or_else(|| Error::InvalidParameter("F3 needs a deblurring kernel".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.epsilon) || !pos(self.lambda) || !pos(self.h) || !pos(self.steady_tol) || self.max_steps == 0 {
            return Err(Error::InvalidParameter("ε, λ, h, steady_tol must be positive and max_steps ≥ 1".into()));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !pos(dt) {
                return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
            }
        }
        self.blur.validate()?;
        let mut reach = self.blur.effective_radius();
        if let Some(k) = self.fidelity_kernel()? {
            k.validate()?;
            reach = reach.max(k.effective_radius());
            if k.effective_radius() < 2.0 * self.h {
                return Err(Error::GridTooSmall(format!(
                    "spacing {} does not resolve a kernel of radius {}",
                    self.h,
                    k.effective_radius()
                )));
            }
        }
        if self.pad < reach {
            return Err(Error::InvalidParameter(format!("pad {} is below the kernel reach {reach}", self.pad)));
        }
        Ok(())
    }

    /// Lipschitz bound of the explicitly treated terms on `[-0.25, 1.25]`.
    fn lipschitz(&self) -> f64 {
        3.0 / self.epsilon + 2.0 * self.lambda
    }

    pub fn time_step(&self) -> f64 {
        match (self.dt, self.scheme) {
            (TimeStep::Fixed(dt), _) => dt,
            (TimeStep::Auto, Scheme::SemiImplicit) => 1.0 / self.lipschitz(),
            (TimeStep::Auto, Scheme::Explicit) => {
                let diffusion = self.h * self.h / (2.0 * self.epsilon);
                (0.2 * diffusion.min(self.epsilon)).min(1.0 / self.lipschitz())
            }
        }
    }
}

/// Discrete convolution with a symmetric kernel sampled at the nodes.
enum Conv {
    Identity,
    /// Sampled hat, normalized: `tri·(m−|j|)/m² + flat` for `|j| < m`. The
    /// triangle is two length-`m` box filters; `flat` vanishes when the
    /// half-width is exactly `m·h`.
    Hat { m: usize, tri: f64, flat: f64 },
    Taps(Vec<f64>),
}

impl Conv {
    fn new(k: Option<&Kernel>, h: f64) -> Self {
        let Some(k) = k else { return Conv::Identity };
        if let Kernel::Hat { size } = k {
            let r = size / h;
            let m = if (r - r.round()).abs() < 1e-9 * r && r.round() >= 1.0 {
                r.round() as usize
            } else {
                r.ceil() as usize
            };
            // Unnormalized taps: size − |j|h = h(m − |j|) + (size − mh).
            let off = if (r - m as f64).abs() < 1e-9 * r { 0.0 } else { size - m as f64 * h };
            let mf = m as f64;
            let z = h * mf * mf + off * (2.0 * mf - 1.0);
            return Conv::Hat { m, tri: h * mf * mf / z, flat: off / z };
        }
        let m = (k.effective_radius() / h).ceil() as i64;
        let mut taps: Vec<f64> = (-m..=m).map(|j| k.eval(j as f64 * h)).collect();
        let s: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= s);
        Conv::Taps(taps)
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        match self {
            Conv::Identity => out.copy_from_slice(v),
            &Conv::Hat { m, tri, flat } => {
                let inv = 1.0 / m as f64;
                // box1[k] = mean of v[k+1-m ..= k] for k in 0..n+m-1
                let len = n + m - 1;
                let mut box1 = vec![0.0; len];
                let mut acc = 0.0;
                for k in 0..len {
                    if k < n {
                        acc += v[k];
                    }
                    if k >= m && k - m < n {
                        acc -= v[k - m];
                    }
                    box1[k] = acc * inv;
                }
                // out[i] = mean of box1[i ..= i+m-1]
                acc = box1[..m.min(len)].iter().sum();
                for i in 0..n {
                    out[i] = tri * acc * inv;
                    acc -= box1[i];
                    if i + m < len {
                        acc += box1[i + m];
                    }
                }
                if flat != 0.0 {
                    let mut prefix = vec![0.0; n + 1];
                    for i in 0..n {
                        prefix[i + 1] = prefix[i] + v[i];
                    }
                    for (i, o) in out.iter_mut().enumerate() {
                        let lo = i.saturating_sub(m - 1);
                        let hi = (i + m).min(n);
                        *o += flat * (prefix[hi] - prefix[lo]);
                    }
                }
            }
            Conv::Taps(taps) => {
                let m = taps.len() / 2;
                for (i, o) in out.iter_mut().enumerate() {
                    let lo = i.saturating_sub(m);
                    let hi = (i + m).min(n - 1);
                    *o = (lo..=hi).map(|j| taps[j + m - i] * v[j]).sum();
                }
            }
        }
    }
}

fn w(u: f64) -> f64 {
    0.5 * u * u * (1.0 - u) * (1.0 - u)
}

fn w_prime(u: f64) -> f64 {
    u * (1.0 - u) * (1.0 - 2.0 * u)
}

/// The functional the flow descends, with `h`-weighted sums and the end
/// nodes pinned at zero:
/// `hΣ ε((u_{i+1}−u_i)/h)² + hΣ W(u_i)/ε + λ hΣ (Ku − f)_i²`.
fn discrete_energy(u: &[f64], ku: &[f64], f: &[f64], h: f64, eps: f64, lambda: f64) -> f64 {
    let grad: f64 = u.windows(2).map(|p| (p[1] - p[0]) * (p[1] - p[0])).sum::<f64>() * eps / h;
    let well: f64 = u.iter().map(|&x| w(x)).sum::<f64>() * h / eps;
    let fid: f64 = ku.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * h * lambda;
    grad + well + fid
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyCheckpoint {
    pub step: usize,
    pub energy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeblurOutcome {
    pub field: Signal,
    pub code: BarCode,
    pub steps: usize,
    pub converged: bool,
    pub dt: f64,
    /// Sup-norm of the right-hand side at the final state.
    pub residual: f64,
    pub last_change: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Every 100 steps, plus the initial and final states.
    pub energy: Vec<EnergyCheckpoint>,
}

impl DeblurOutcome {
    /// Energy non-increasing between checkpoints up to round-off.
    pub fn energy_descends(&self) -> bool {
        self.energy.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-12 * w[0].energy.abs().max(1.0))
    }

    pub fn within_box(&self) -> bool {
        self.u_min >= -0.25 && self.u_max <= 1.25
    }
}

/// Solves the constant tridiagonal system `(1 + 2a) x_i − a(x_{i−1} + x_{i+1}) = b_i`
/// with zero neighbours beyond the ends.
struct Tridiagonal {
    a: f64,
    c_prime: Vec<f64>,
    denom: Vec<f64>,
}

impl Tridiagonal {
    fn new(n: usize, a: f64) -> Self {
        let diag = 1.0 + 2.0 * a;
        let mut c_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        for i in 0..n {
            let prev = if i == 0 { 0.0 } else { c_prime[i - 1] };
            denom[i] = diag + a * prev;
            c_prime[i] = -a / denom[i];
        }
        Tridiagonal { a, c_prime, denom }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n {
            let prev = if i == 0 { 0.0 } else { b[i - 1] };
            b[i] = (b[i] + self.a * prev) / self.denom[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            b[i] -= self.c_prime[i] * b[i + 1];
        }
    }
}

pub fn deblur(f: &Signal, cfg: &SolverConfig) -> Result<DeblurOutcome> {
    cfg.validate()?;
    let grid = GridSpec::covering(-cfg.pad, 1.0 + cfg.pad, cfg.h)?;
    if let Some((lo, hi)) = f.extent() {
        // Zero outside its extent is fine; data beyond the domain is not.
        let tol = 2.0 * cfg.h;
        if lo < grid.x0 - tol && f.eval(lo) != 0.0 || hi > grid.end() + tol && f.eval(hi) != 0.0 {
            return Err(Error::IncompatibleSignals(format!(
                "signal extent [{lo}, {hi}] exceeds the padded domain [{}, {}]",
                grid.x0,
                grid.end()
            )));
        }
    }
    let h = grid.h;
    let n = grid.n;
    let fv: Vec<f64> = grid.xs().map(|x| f.eval(x)).collect();
    let conv = Conv::new(cfg.fidelity_kernel()?, h);
    let dt = cfg.time_step();
    let (eps, lambda) = (cfg.epsilon, cfg.lambda);

    // Interior unknowns are nodes 1..n-1; the end nodes stay 0.
    let mut u = vec![0.0; n];
    if cfg.init == Init::Half {
        u[1..n - 1].iter_mut().for_each(|x| *x = 0.5);
    }
    let diff = 2.0 * eps * dt / (h * h);
    let tri = Tridiagonal::new(n - 2, diff);
    let mut ku = vec![0.0; n];
    let mut kr = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut next = vec![0.0; n];

    let energy_of = |u: &[f64], ku: &mut [f64]| {
        conv.apply(u, ku);
        discrete_energy(u, ku, &fv, h, eps, lambda)
    };
    let mut energy = vec![EnergyCheckpoint { step: 0, energy: energy_of(&u, &mut ku) }];

    let mut steps = 0;
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    while steps < cfg.max_steps {
        conv.apply(&u, &mut ku);
        for i in 0..n {
            r[i] = ku[i] - fv[i];
        }
        conv.apply(&r, &mut kr);
        for i in 1..n - 1 {
            let explicit = -w_prime(u[i]) / eps - 2.0 * lambda * kr[i];
            next[i] = match cfg.scheme {
                Scheme::SemiImplicit => u[i] + dt * explicit,
                Scheme::Explicit => {
                    u[i] + dt * (explicit + 2.0 * eps * (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h))
                }
            };
        }
        if cfg.scheme == Scheme::SemiImplicit {
            tri.solve(&mut next[1..n - 1]);
        }
        steps += 1;
        let mut change: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for i in 1..n - 1 {
            change = change.max((next[i] - u[i]).abs());
            max_abs = max_abs.max(next[i].abs());
            if next[i].is_nan() {
                max_abs = f64::NAN;
            }
        }
        if !(max_abs <= 10.0) {
            return Err(Error::Diverged { step: steps, max_abs });
        }
        std::mem::swap(&mut u, &mut next);
        last_change = change;
        if steps % 100 == 0 {
            energy.push(EnergyCheckpoint { step: steps, energy: energy_of(&u, &mut ku) });
        }
        if change < cfg.steady_tol {
            converged = true;
            break;
        }
    }
    if energy.last().map_or(true, |c| c.step != steps) {
        energy.push(EnergyCheckpoint { step: steps, energy: energy_of(&u, &mut ku) });
    }

    conv.apply(&u, &mut ku);
    for i in 0..n {
        r[i] = ku[i] - fv[i];
    }
    conv.apply(&r, &mut kr);
    let residual = (1..n - 1)
        .map(|i| {
            (2.0 * eps * (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h) - w_prime(u[i]) / eps - 2.0 * lambda * kr[i]).abs()
        })
        .fold(0.0, f64::max);
    let u_min = u.iter().copied().fold(f64::INFINITY, f64::min);
    let u_max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let field = GridSamples::new(grid, u)?;
    let code = threshold(&field)?;
    let provenance = Provenance {
        kernel: cfg.fidelity_kernel()?.cloned(),
        source: Some("deblur".into()),
        ..f.provenance.clone()
    };
    Ok(DeblurOutcome {
        field: Signal::grid(field).with_provenance(provenance),
        code,
        steps,
        converged,
        dt,
        residual,
        last_change,
        u_min,
        u_max,
        energy,
    })
}

/// Bar code from the ½-level set of a grid field: crossings located by
/// linear interpolation, pairs of crossings closer than `2h` dropped,
/// clipped to `[0, 1]`.
pub fn threshold(field: &GridSamples) -> Result<BarCode> {
    let v = &field.values;
    let h = field.h;
    let above = |x: f64| x > 0.5;
    // Virtual zeros beyond both ends.
    let mut crossings = Vec::new();
    let mut prev = (field.x0 - h, 0.0);
    for (i, &val) in v.iter().chain(std::iter::once(&0.0)).enumerate() {
        let x = field.x0 + i as f64 * h;
        if above(prev.1) != above(val) {
            let s = (0.5 - prev.1) / (val - prev.1);
            crossings.push(prev.0 + s * h);
        }
        prev = (x, val);
    }
    let mut merged: Vec<f64> = Vec::with_capacity(crossings.len());
    for t in crossings {
        match merged.last() {
            Some(&last) if t - last < 2.0 * h => {
                merged.pop();
            }
            _ => merged.push(t),
        }
    }
    let mut bars = Vec::new();
    for pair in merged.chunks(2) {
        let (a, b) = (pair[0].clamp(0.0, 1.0), pair[1].clamp(0.0, 1.0));
        if b - a >= MIN_GAP {
            bars.push((a, b));
        }
    }
    // Clipping can leave neighbouring bars closer than the minimum gap.
    let mut joined: Vec<(f64, f64)> = Vec::with_capacity(bars.len());
    for (a, b) in bars {
        match joined.last_mut() {
            Some(last) if a - last.1 < MIN_GAP => last.1 = b,
            _ => joined.push((a, b)),
        }
    }
    BarCode::from_bars(&joined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolve::hat_convolve;

    fn direct(k: &Kernel, h: f64) -> Conv {
        let m = (k.effective_radius() / h).ceil() as i64;
        let mut taps: Vec<f64> = (-m..=m).map(|j| k.eval(j as f64 * h)).collect();
        let s: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= s);
        Conv::Taps(taps)
    }

    #[test]
    fn hat_box_filter_matches_direct_taps() {
        let h = 0.01;
        let v: Vec<f64> = (0..60).map(|i| ((i * 37) % 11) as f64 / 11.0 - 0.3).collect();
        for (size, m) in [(0.07, 7), (0.0731, 8), (0.0049, 1), (0.01, 1)] {
            let k = Kernel::hat(size).unwrap();
            let fast = Conv::new(Some(&k), h);
            assert!(matches!(fast, Conv::Hat { m: mm, .. } if mm == m), "{size}");
            let (mut a, mut b) = (vec![0.0; 60], vec![0.0; 60]);
            fast.apply(&v, &mut a);
            direct(&k, h).apply(&v, &mut b);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-14, "{size}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn tridiagonal_solves() {
        let n = 9;
        let a = 0.7;
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                (1.0 + 2.0 * a) * x[i] - a * (l + r)
            })
            .collect();
        Tridiagonal::new(n, a).solve(&mut b);
        for (p, q) in b.iter().zip(&x) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn threshold_recovers_sampled_box() {
        let spec = GridSpec::covering(-0.1, 1.1, 0.001).unwrap();
        let g = GridSamples::from_fn(spec, |x| if (0.3..0.6).contains(&x) { 1.0 } else { 0.0 });
        let code = threshold(&g).unwrap();
        assert_eq!(code.num_bars(), 1);
        let (a, b) = code.bars().next().unwrap();
        assert!((a - 0.3).abs() <= 0.001 && (b - 0.6).abs() <= 0.001);
    }

    #[test]
    fn noise_is_block_constant_and_bounded() {
        let omega = 0.02;
        let z = BarCode::new(vec![0.2, 0.5]).unwrap();
        let f = hat_convolve(&z, 0.02).unwrap();
        let noisy = add_noise(&f, &NoiseConfig::new(0.1, 3), omega).unwrap();
        let g = noisy.as_grid().unwrap();
        let spec = g.spec();
        let mut per_block = std::collections::BTreeMap::new();
        for i in 0..spec.n {
            let d = g.values[i] - f.eval(g.x(i));
            assert!(d.abs() <= 0.1 + 1e-12);
            let b = spec.lattice_index(i).div_euclid(25);
            let e = per_block.entry(b).or_insert(d);
            assert!((*e - d).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_data_is_stationary() {
        let omega = 0.05;
        let k = Kernel::hat(omega).unwrap();
        let spec = GridSpec::covering(-0.2, 1.2, omega / 400.0).unwrap();
        let f = Signal::grid(GridSamples::new(spec, vec![0.0; spec.n]).unwrap());
        let mut cfg = SolverConfig::new(Functional::F2, 100.0, k, None, omega);
        cfg.max_steps = 50;
        let out = deblur(&f, &cfg).unwrap();
        assert!(out.converged);
        assert!(out.code.is_empty());
        assert_eq!(out.u_max, 0.0);
    }
}
