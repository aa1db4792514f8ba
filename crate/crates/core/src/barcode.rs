//! Binary bar codes on `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::poly::PiecewisePoly;

/// Interfaces closer than this are rejected as degenerate.
pub const MIN_GAP: f64 = 1e-12;

/// A bar code: `u = 1` on `[t0,t1] ∪ [t2,t3] ∪ …`, `u = 0` elsewhere in `[0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BarCode {
    interfaces: Vec<f64>,
}

/// Required values of `u` at `x = 0` and `x = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EndpointConstraint {
    pub start_bar: bool,
    pub end_bar: bool,
}

impl EndpointConstraint {
    pub fn new(start_bar: bool, end_bar: bool) -> Self {
        EndpointConstraint { start_bar, end_bar }
    }

    pub fn all() -> [EndpointConstraint; 4] {
        [(false, false), (false, true), (true, false), (true, true)].map(|(a, b)| Self::new(a, b))
    }
}

impl fmt::Display for EndpointConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.start_bar as u8, self.end_bar as u8)
    }
}

impl FromStr for EndpointConstraint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "00" => Ok(Self::new(false, false)),
            "01" => Ok(Self::new(false, true)),
            "10" => Ok(Self::new(true, false)),
            "11" => Ok(Self::new(true, true)),
            _ => Err(Error::Parse(format!("endpoint class must be one of 00, 01, 10, 11; got {s:?}"))),
        }
    }
}

impl BarCode {
    pub fn new(interfaces: Vec<f64>) -> Result<Self> {
        if interfaces.len() % 2 != 0 {
            return Err(Error::InvalidBarCode(format!(
                "odd number of interfaces ({})",
                interfaces.len()
            )));
        }
        for (i, &t) in interfaces.iter().enumerate() {
            if !t.is_finite() || !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidBarCode(format!("interface {i} = {t} is outside [0,1]")));
            }
        }
        for (i, w) in interfaces.windows(2).enumerate() {
            if w[1] - w[0] < MIN_GAP {
                return Err(Error::InvalidBarCode(format!(
                    "interfaces {i} and {} are not strictly increasing ({} then {})",
                    i + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(BarCode { interfaces })
    }

    pub fn empty() -> Self {
        BarCode { interfaces: Vec::new() }
    }

    pub fn from_bars(bars: &[(f64, f64)]) -> Result<Self> {
        Self::new(bars.iter().flat_map(|&(a, b)| [a, b]).collect())
    }

    pub fn interfaces(&self) -> &[f64] {
        &self.interfaces
    }

    pub fn is_empty(&self) -> bool {
        self.interfaces.is_empty()
    }

    pub fn num_bars(&self) -> usize {
        self.interfaces.len() / 2
    }

    pub fn bars(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.interfaces.chunks_exact(2).map(|c| (c[0], c[1]))
    }

    /// Spaces strictly between bars (margins excluded).
    pub fn internal_spaces(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.interfaces[1..self.interfaces.len().saturating_sub(1)]
            .chunks_exact(2)
            .map(|c| (c[0], c[1]))
    }

    /// Number of jumps of `u`; each jump has height one.
    pub fn total_variation(&self) -> usize {
        self.interfaces.len()
    }

    /// Smallest bar width or internal space width.
    pub fn x_dimension(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyBarCode);
        }
        Ok(self
            .interfaces
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min))
    }

    /// `u(0) = 1`, i.e. the first interface sits at 0.
    pub fn starts_with_bar(&self) -> bool {
        self.interfaces.first() == Some(&0.0)
    }

    /// `u(1) = 1`, i.e. the last interface sits at 1.
    pub fn ends_with_bar(&self) -> bool {
        self.interfaces.last() == Some(&1.0)
    }

    pub fn endpoints(&self) -> EndpointConstraint {
        EndpointConstraint::new(self.starts_with_bar(), self.ends_with_bar())
    }

    /// Membership in the class of codes with X-dimension at least `omega`,
    /// optionally restricted to an endpoint class.
    pub fn is_member(&self, omega: f64, endpoints: Option<EndpointConstraint>) -> bool {
        let Ok(xd) = self.x_dimension() else { return false };
        xd >= omega && endpoints.map_or(true, |e| e == self.endpoints())
    }

    pub fn value_at(&self, x: f64) -> f64 {
        if self.bars().any(|(a, b)| a <= x && x <= b) {
            1.0
        } else {
            0.0
        }
    }

    pub fn measure(&self) -> f64 {
        self.bars().map(|(a, b)| b - a).sum()
    }

    pub fn to_piecewise(&self) -> PiecewisePoly {
        PiecewisePoly::indicator(&self.bars().collect::<Vec<_>>())
    }

    /// Largest displacement between corresponding interfaces, if the two
    /// codes have the same number of them.
    pub fn max_interface_deviation(&self, other: &BarCode) -> Option<f64> {
        (self.interfaces.len() == other.interfaces.len()).then(|| {
            self.interfaces
                .iter()
                .zip(&other.interfaces)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }
}

impl fmt::Display for BarCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "(empty)");
        }
        let parts: Vec<String> = self.bars().map(|(a, b)| format!("[{a}, {b}]")).collect();
        write!(f, "{}", parts.join(" "))
    }
}

#[derive(Serialize, Deserialize)]
struct BarCodeJson {
    interfaces: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    starts_with_bar: Option<bool>,
}

impl Serialize for BarCode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BarCodeJson { interfaces: self.interfaces.clone(), starts_with_bar: Some(self.starts_with_bar()) }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BarCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = BarCodeJson::deserialize(d)?;
        let code = BarCode::new(raw.interfaces).map_err(D::Error::custom)?;
        if let Some(flag) = raw.starts_with_bar {
            if flag != code.starts_with_bar() {
                return Err(D::Error::custom(format!(
                    "starts_with_bar = {flag} contradicts the interfaces"
                )));
            }
        }
        Ok(code)
    }
}

/// Random bar codes with widths drawn uniformly from `[ω, 3ω]`.
#[derive(Clone, Debug)]
pub struct GeneratorConfig {
    pub omega: f64,
    pub max_bars: usize,
    pub endpoints: Option<EndpointConstraint>,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(omega: f64, max_bars: usize, seed: u64) -> Self {
        GeneratorConfig { omega, max_bars, endpoints: None, seed }
    }
}

/// Draws a code with X-dimension at least `ω`: alternating bars and spaces
/// from left to right, stopping before the next element would leave `[0,1]`
/// or exceed `max_bars`. Without an endpoint constraint the left end is a
/// coin flip and the right end is wherever the sequence stops.
pub fn generate(cfg: &GeneratorConfig) -> Result<BarCode> {
    let omega = cfg.omega;
    if !(omega > 0.0 && omega.is_finite()) || cfg.max_bars == 0 {
        return Err(Error::InvalidParameter(format!(
            "need ω > 0 and max_bars ≥ 1 (got ω = {omega}, max_bars = {})",
            cfg.max_bars
        )));
    }
    let infeasible = Error::InfeasibleXDimension { omega, max_bars: cfg.max_bars };
    if omega * (2 * cfg.max_bars - 1) as f64 > 1.0 {
        return Err(infeasible);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start_bar = match cfg.endpoints {
        Some(e) => e.start_bar,
        None => rng.gen_bool(0.5),
    };
    let end_bar = cfg.endpoints.map(|e| e.end_bar);
    // Right limit for bar ends; a required trailing space keeps bars off 1.
    let limit = if end_bar == Some(false) { 1.0 - 1e-9 } else { 1.0 };
    if !start_bar && limit - omega <= 0.0 {
        return Err(infeasible);
    }
    let mut draw = || rng.gen_range(omega..=3.0 * omega);

    let mut x = if start_bar { 0.0 } else { draw().min(limit - omega) };
    let mut bars: Vec<(f64, f64)> = Vec::new();
    loop {
        let end = x + draw();
        if end > limit {
            if bars.is_empty() {
                // The first bar must exist: clip it (it still spans ≥ ω).
                bars.push((x, if end_bar == Some(false) { x + omega } else { 1.0 }));
            }
            break;
        }
        bars.push((x, end));
        if bars.len() == cfg.max_bars {
            break;
        }
        x = end + draw();
        if x + omega > limit {
            break;
        }
    }
    if end_bar == Some(true) {
        bars.last_mut().expect("at least one bar").1 = 1.0;
    }
    BarCode::from_bars(&bars)
}
