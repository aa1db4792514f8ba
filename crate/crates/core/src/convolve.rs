//! Blurring bar codes and signals.
//!
//! Piecewise-linear kernels give exact piecewise-polynomial results; other
//! kernels are handled on a uniform grid.

use serde::{Deserialize, Serialize};

use crate::barcode::BarCode;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::poly::PiecewisePoly;

/// Where a signal came from; carried through CSV comments so pipelines do
/// not need to repeat parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Kernel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

/// A uniform grid `x_i = x0 + i·h`, `i < n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub h: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(x0: f64, h: f64, n: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite() && x0.is_finite()) || n < 2 {
            return Err(Error::GridTooSmall(format!("need h > 0 and n ≥ 2 (h = {h}, n = {n})")));
        }
        Ok(GridSpec { x0, h, n })
    }

    /// Smallest grid on the lattice `hℤ` that covers `[lo, hi]`.
    pub fn covering(lo: f64, hi: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(hi > lo) {
            return Err(Error::GridTooSmall(format!("cannot cover [{lo}, {hi}] with h = {h}")));
        }
        let k0 = (lo / h).floor();
        let k1 = (hi / h).ceil();
        GridSpec::new(k0 * h, h, (k1 - k0) as usize + 1)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn end(&self) -> f64 {
        self.x(self.n - 1)
    }

    /// Global lattice index of node `i` (nearest integer to `x_i / h`).
    pub fn lattice_index(&self, i: usize) -> i64 {
        (self.x0 / self.h).round() as i64 + i as i64
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.x(i))
    }
}

/// Samples on a uniform grid; linear interpolation in between, zero outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSamples {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

impl GridSamples {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.n {
            return Err(Error::IncompatibleSignals(format!(
                "grid has {} nodes but {} values",
                spec.n,
                values.len()
            )));
        }
        Ok(GridSamples { x0: spec.x0, h: spec.h, values })
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        GridSamples { x0: spec.x0, h: spec.h, values: spec.xs().map(f).collect() }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { x0: self.x0, h: self.h, n: self.values.len() }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let s = (x - self.x0) / self.h;
        if !(s >= 0.0) || s > (n - 1) as f64 {
            return 0.0;
        }
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Trapezoid rule.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.h)
    }

    pub fn norm_sq(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        trapezoid(&sq, self.h)
    }

    pub fn resample(&self, spec: &GridSpec) -> GridSamples {
        GridSamples::from_fn(*spec, |x| self.eval(x))
    }
}

pub(crate) fn trapezoid(v: &[f64], h: f64) -> f64 {
    match v.len() {
        0 | 1 => 0.0,
        n => h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1])),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "lowercase")]
pub enum SignalData {
    Piecewise(PiecewisePoly),
    Grid(GridSamples),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub data: SignalData,
    #[serde(default)]
    pub provenance: Provenance,
}

impl Signal {
    pub fn piecewise(p: PiecewisePoly) -> Self {
        Signal { data: SignalData::Piecewise(p), provenance: Provenance::default() }
    }

    pub fn grid(g: GridSamples) -> Self {
        Signal { data: SignalData::Grid(g), provenance: Provenance::default() }
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }

    pub fn as_piecewise(&self) -> Option<&PiecewisePoly> {
        match &self.data {
            SignalData::Piecewise(p) => Some(p),
            SignalData::Grid(_) => None,
        }
    }

    pub fn as_grid(&self) -> Option<&GridSamples> {
        match &self.data {
            SignalData::Grid(g) => Some(g),
            SignalData::Piecewise(_) => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.data {
            SignalData::Piecewise(p) => p.eval(x),
            SignalData::Grid(g) => g.eval(x),
        }
    }

    /// Interval outside which the signal is zero (grid: its node range).
    pub fn extent(&self) -> Option<(f64, f64)> {
        match &self.data {
            SignalData::Piecewise(p) => p.support(),
            SignalData::Grid(g) => Some((g.x0, g.x(g.values.len() - 1))),
        }
    }

    pub fn integral(&self) -> f64 {
        match &self.data {
            SignalData::Piecewise(p) => p.integral(),
            SignalData::Grid(g) => g.integral(),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        match &self.data {
            SignalData::Piecewise(p) => p.norm_sq(),
            SignalData::Grid(g) => g.norm_sq(),
        }
    }

    pub fn sample(&self, spec: &GridSpec) -> GridSamples {
        GridSamples::from_fn(*spec, |x| self.eval(x))
    }

    /// Grid form: grids are returned as-is, piecewise signals sampled at
    /// spacing `h` over their support.
    pub fn to_grid(&self, h: f64) -> Result<GridSamples> {
        match &self.data {
            SignalData::Grid(g) => Ok(g.clone()),
            SignalData::Piecewise(p) => {
                let (lo, hi) = p.support().unwrap_or((0.0, 1.0));
                Ok(self.sample(&GridSpec::covering(lo, hi, h)?))
            }
        }
    }
}

/// `φ_σ * z` for the hat kernel, exactly; `σ = 0` returns `z` itself.
pub fn hat_convolve(z: &BarCode, sigma: f64) -> Result<Signal> {
    if sigma == 0.0 {
        return Ok(Signal::piecewise(z.to_piecewise()));
    }
    let k = Kernel::hat(sigma)?;
    Ok(Signal::piecewise(z.to_piecewise().convolve_hat(sigma))
        .with_provenance(Provenance { kernel: Some(k), source: Some("blur".into()), ..Default::default() }))
}

/// `φ_ρ * φ_σ * z` for hat kernels, exactly (piecewise quartic).
pub fn hat_double_convolve(z: &BarCode, rho: f64, sigma: f64) -> Result<Signal> {
    let f = hat_convolve(z, sigma)?;
    Ok(Signal::piecewise(convolve_piecewise_hat(f.as_piecewise().unwrap(), rho)?))
}

/// `φ_ρ * g` for a piecewise signal; `ρ = 0` is the identity.
pub fn convolve_piecewise_hat(g: &PiecewisePoly, rho: f64) -> Result<PiecewisePoly> {
    if rho == 0.0 {
        return Ok(g.clone());
    }
    Kernel::hat(rho)?;
    Ok(g.convolve_hat(rho))
}

/// Exact blur for kernels with a piecewise-polynomial form.
pub fn blur_exact(z: &BarCode, k: &Kernel) -> Option<Signal> {
    let kp = k.to_piecewise()?;
    Some(Signal::piecewise(z.to_piecewise().convolve(&kp)).with_provenance(Provenance {
        kernel: Some(k.clone()),
        source: Some("blur".into()),
        ..Default::default()
    }))
}

/// Default spacing for grids: `ω/400` if the X-dimension is known, otherwise
/// `ω/400` when the generating ω is known, else 1/4096 of the kernel support.
pub fn default_spacing(omega: Option<f64>, k: &Kernel) -> f64 {
    match omega {
        Some(w) if w > 0.0 => w / 400.0,
        _ => 2.0 * k.effective_radius() / 4096.0,
    }
}

pub enum GridInput<'a> {
    Code(&'a BarCode),
    Signal(&'a Signal),
}

/// `φ * input` sampled on `grid`.
///
/// For a bar code every node value is a sum of kernel-CDF differences, so
/// the only error is that of the CDF itself. For a signal the convolution is
/// a trapezoid sum over the grid lattice.
pub fn grid_convolve(input: GridInput<'_>, k: &Kernel, grid: &GridSpec) -> Result<Signal> {
    k.validate()?;
    let r = k.effective_radius();
    if grid.h > 0.5 * r {
        return Err(Error::GridTooSmall(format!(
            "spacing {} does not resolve a kernel of radius {r}",
            grid.h
        )));
    }
    let values = match input {
        GridInput::Code(z) => {
            let bars: Vec<(f64, f64)> = z.bars().collect();
            grid.xs().map(|x| bars.iter().map(|&(a, b)| k.cdf(x - a) - k.cdf(x - b)).sum()).collect()
        }
        GridInput::Signal(s) => {
            let m = (r / grid.h).ceil() as usize;
            let taps: Vec<f64> = (0..=2 * m).map(|j| grid.h * k.eval((j as f64 - m as f64) * grid.h)).collect();
            // Input on the output lattice extended by the kernel reach.
            let ext = GridSpec { x0: grid.x0 - m as f64 * grid.h, h: grid.h, n: grid.n + 2 * m };
            let g: Vec<f64> = ext.xs().map(|x| s.eval(x)).collect();
            (0..grid.n)
                .map(|i| taps.iter().enumerate().map(|(j, t)| t * g[i + 2 * m - j]).sum())
                .collect()
        }
    };
    let provenance = match input {
        GridInput::Signal(s) => Provenance { kernel: Some(k.clone()), ..s.provenance.clone() },
        GridInput::Code(_) => Provenance { kernel: Some(k.clone()), source: Some("blur".into()), ..Default::default() },
    };
    Ok(Signal::grid(GridSamples::new(*grid, values)?).with_provenance(provenance))
}

/// Blur with any kernel: exact where possible, otherwise on `grid` (or a
/// default grid covering the blurred support).
pub fn blur(z: &BarCode, k: &Kernel, grid: Option<&GridSpec>, omega: Option<f64>) -> Result<Signal> {
    if grid.is_none() {
        if let Some(s) = blur_exact(z, k) {
            return Ok(s);
        }
    }
    let spec = match grid {
        Some(g) => *g,
        None => {
            let r = k.effective_radius();
            GridSpec::covering(-r, 1.0 + r, default_spacing(omega, k))?
        }
    };
    grid_convolve(GridInput::Code(z), k, &spec)
}

/// `φ_ρ * φ_σ * z` for arbitrary kernels: exact when both are piecewise
/// linear, otherwise on `grid`.
pub fn double_convolve(z: &BarCode, k_rho: &Kernel, k_sigma: &Kernel, grid: &GridSpec) -> Result<Signal> {
    if let (Some(a), Some(b)) = (k_rho.to_piecewise(), k_sigma.to_piecewise()) {
        return Ok(Signal::piecewise(z.to_piecewise().convolve(&b).convolve(&a)));
    }
    let inner = grid_convolve(GridInput::Code(z), k_sigma, grid)?;
    grid_convolve(GridInput::Signal(&inner), k_rho, grid)
}

/// `∫_a^b (1 + (x - y)/σ)/σ dy`: the rising flank of the hat.
pub fn i_plus(x: f64, a: f64, b: f64, sigma: f64) -> f64 {
    ((b - a) * (1.0 + x / sigma) - (b * b - a * a) / (2.0 * sigma)) / sigma
}

/// `∫_a^b (1 - (x - y)/σ)/σ dy`: the falling flank of the hat.
pub fn i_minus(x: f64, a: f64, b: f64, sigma: f64) -> f64 {
    ((b - a) * (1.0 - x / sigma) + (b * b - a * a) / (2.0 * sigma)) / sigma
}

/// `(φ_σ * χ_[a,b])(x)` assembled from the two flank integrals.
pub fn hat_box_value(x: f64, a: f64, b: f64, sigma: f64) -> f64 {
    let mut v = 0.0;
    let (lo, hi) = (a.max(x), b.min(x + sigma));
    if hi > lo {
        v += i_plus(x, lo, hi, sigma);
    }
    let (lo, hi) = (a.max(x - sigma), b.min(x));
    if hi > lo {
        v += i_minus(x, lo, hi, sigma);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flank_integrals_reassemble_blurred_box() {
        let z = BarCode::new(vec![0.2, 0.45]).unwrap();
        let s = hat_convolve(&z, 0.06).unwrap();
        for i in 0..=300 {
            let x = 0.1 + 0.5 * i as f64 / 300.0;
            assert!((s.eval(x) - hat_box_value(x, 0.2, 0.45, 0.06)).abs() < 1e-13);
        }
    }

    #[test]
    fn grid_and_exact_hat_blur_agree() {
        let z = BarCode::new(vec![0.1, 0.3, 0.5, 0.62]).unwrap();
        let k = Kernel::hat(0.04).unwrap();
        let exact = hat_convolve(&z, 0.04).unwrap();
        let grid = GridSpec::covering(0.0, 0.7, 1e-3).unwrap();
        let g = grid_convolve(GridInput::Code(&z), &k, &grid).unwrap();
        for (i, v) in g.as_grid().unwrap().values.iter().enumerate() {
            assert!((v - exact.eval(grid.x(i))).abs() < 1e-13);
        }
    }

    #[test]
    fn grid_signal_convolution_is_second_order() {
        let z = BarCode::new(vec![0.3, 0.55]).unwrap();
        let exact = hat_double_convolve(&z, 0.05, 0.03).unwrap();
        let k = Kernel::hat(0.05).unwrap();
        let mut errs = vec![];
        for &h in &[2e-3, 1e-3] {
            let grid = GridSpec::covering(0.1, 0.8, h).unwrap();
            let inner = hat_convolve(&z, 0.03).unwrap();
            let g = grid_convolve(GridInput::Signal(&inner), &k, &grid).unwrap();
            let e = grid.xs().map(|x| (g.eval(x) - exact.eval(x)).abs()).fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[1] < 5e-5 && errs[1] < errs[0] / 3.0, "{errs:?}");
    }

    #[test]
    fn too_coarse_grid_is_rejected() {
        let z = BarCode::new(vec![0.3, 0.55]).unwrap();
        let k = Kernel::hat(0.01).unwrap();
        let grid = GridSpec::new(0.0, 0.1, 11).unwrap();
        assert!(matches!(grid_convolve(GridInput::Code(&z), &k, &grid), Err(Error::GridTooSmall(_))));
    }
}
