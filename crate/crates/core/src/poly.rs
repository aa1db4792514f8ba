//! Exact piecewise-polynomial arithmetic.
//!
//! Every blurred bar code built from hat (or other piecewise-linear) kernels
//! is a piecewise polynomial, so convolutions, inner products and level sets
//! can be computed exactly instead of on a grid. Each piece stores its
//! coefficients in powers of `x - left_knot`, which keeps high-degree pieces
//! well conditioned far from the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial with ascending coefficients.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly(Vec<f64>);

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Poly(coeffs)
    }

    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        let c = (0..n)
            .map(|i| self.0.get(i).copied().unwrap_or(0.0) + o.0.get(i).copied().unwrap_or(0.0))
            .collect();
        Poly::new(c)
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.0.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![0.0; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(c)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    /// Antiderivative vanishing at 0.
    pub fn antiderivative(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut c = Vec::with_capacity(self.0.len() + 1);
        c.push(0.0);
        c.extend(self.0.iter().enumerate().map(|(k, a)| a / (k + 1) as f64));
        Poly::new(c)
    }

    /// `q(s) = p(s + d)`.
    pub fn shift(&self, d: f64) -> Poly {
        let mut c = self.0.clone();
        let n = c.len();
        if d == 0.0 || n < 2 {
            return Poly(c);
        }
        for k in 0..n - 1 {
            for j in (k..n - 1).rev() {
                c[j] += d * c[j + 1];
            }
        }
        Poly::new(c)
    }

    /// `∫_a^b p`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let p = self.antiderivative();
        p.eval(b) - p.eval(a)
    }

    /// Roots of `p - level` in `[0, w]`, found by subdivision and bisection.
    /// Zeros that land exactly on a sample point are reported as well.
    pub fn roots_in(&self, level: f64, w: f64) -> Vec<f64> {
        const SUBDIV: usize = 64;
        let f = |t: f64| self.eval(t) - level;
        let mut roots = Vec::new();
        if self.degree() == 0 {
            return roots;
        }
        let mut t_prev = 0.0;
        let mut f_prev = f(0.0);
        if f_prev == 0.0 {
            roots.push(0.0);
        }
        for k in 1..=SUBDIV {
            let t = w * k as f64 / SUBDIV as f64;
            let ft = f(t);
            if ft == 0.0 {
                roots.push(t);
            } else if f_prev != 0.0 && (f_prev < 0.0) != (ft < 0.0) {
                let (mut lo, mut hi, mut flo) = (t_prev, t, f_prev);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let fm = f(mid);
                    if fm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if (fm < 0.0) == (flo < 0.0) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            t_prev = t;
            f_prev = ft;
        }
        roots
    }
}

fn binom(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Piecewise polynomial on contiguous pieces `[knots[i], knots[i+1]]`, zero
/// outside `[knots[0], knots[last]]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewise")]
pub struct PiecewisePoly {
    knots: Vec<f64>,
    #[serde(rename = "coefficients")]
    polys: Vec<Poly>,
}

#[derive(Deserialize)]
struct RawPiecewise {
    knots: Vec<f64>,
    coefficients: Vec<Poly>,
}

impl TryFrom<RawPiecewise> for PiecewisePoly {
    type Error = Error;
    fn try_from(r: RawPiecewise) -> Result<Self> {
        PiecewisePoly::new(r.knots, r.coefficients)
    }
}

/// Knots closer than this are merged when pieces are combined.
const KNOT_MERGE: f64 = 1e-14;

impl PiecewisePoly {
    pub fn new(knots: Vec<f64>, polys: Vec<Poly>) -> Result<Self> {
        if knots.is_empty() && polys.is_empty() {
            return Ok(Self::zero());
        }
        if knots.len() != polys.len() + 1 {
            return Err(Error::Parse(format!(
                "{} knots need {} pieces, got {}",
                knots.len(),
                knots.len().saturating_sub(1),
                polys.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Parse("knots must be finite and non-decreasing".into()));
        }
        Ok(PiecewisePoly { knots, polys })
    }

    pub fn zero() -> Self {
        PiecewisePoly { knots: Vec::new(), polys: Vec::new() }
    }

    /// Indicator of a union of disjoint sorted intervals.
    pub fn indicator(bars: &[(f64, f64)]) -> Self {
        let mut knots = Vec::new();
        let mut polys = Vec::new();
        for (i, &(a, b)) in bars.iter().enumerate() {
            if i > 0 {
                polys.push(Poly::zero());
            }
            knots.push(a);
            knots.push(b);
            polys.push(Poly::constant(1.0));
        }
        let mut out = PiecewisePoly { knots, polys };
        out.dedup_knots();
        out
    }

    /// Piecewise-linear interpolant of samples `values[i]` at `x0 + i·h`.
    pub fn linear_interpolant(x0: f64, h: f64, values: &[f64]) -> Self {
        if values.len() < 2 {
            return Self::zero();
        }
        let knots = (0..values.len()).map(|i| x0 + i as f64 * h).collect();
        let polys = values.windows(2).map(|w| Poly::new(vec![w[0], (w[1] - w[0]) / h])).collect();
        PiecewisePoly { knots, polys }
    }

    /// Hat kernel `(1 - |t|/s)/s` on `[-s, s]`.
    pub fn hat(s: f64) -> Self {
        PiecewisePoly {
            knots: vec![-s, 0.0, s],
            polys: vec![Poly::new(vec![0.0, 1.0 / (s * s)]), Poly::new(vec![1.0 / s, -1.0 / (s * s)])],
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn polys(&self) -> &[Poly] {
        &self.polys
    }

    pub fn is_zero(&self) -> bool {
        self.polys.iter().all(Poly::is_zero)
    }

    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, &Poly)> + '_ {
        self.polys.iter().enumerate().map(move |(i, p)| (self.knots[i], self.knots[i + 1], p))
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        let first = self.polys.iter().position(|p| !p.is_zero())?;
        let last = self.polys.iter().rposition(|p| !p.is_zero())?;
        Some((self.knots[first], self.knots[last + 1]))
    }

    pub fn max_degree(&self) -> usize {
        self.polys.iter().map(Poly::degree).max().unwrap_or(0)
    }

    fn piece_index(&self, x: f64) -> Option<usize> {
        let n = self.polys.len();
        if n == 0 || x < self.knots[0] || x > self.knots[n] {
            return None;
        }
        let i = self.knots.partition_point(|&k| k <= x);
        Some(i.saturating_sub(1).min(n - 1))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.piece_index(x) {
            Some(i) => self.polys[i].eval(x - self.knots[i]),
            None => 0.0,
        }
    }

    pub fn integral(&self) -> f64 {
        self.pieces().map(|(a, b, p)| p.integral(0.0, b - a)).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        PiecewisePoly { knots: self.knots.clone(), polys: self.polys.iter().map(|p| p.scale(s)).collect() }
    }

    /// Poly of `self` re-expanded about `lo`, for the piece containing `mid`.
    fn local_at(&self, lo: f64, mid: f64) -> Poly {
        match self.piece_index(mid) {
            Some(i) => self.polys[i].shift(lo - self.knots[i]),
            None => Poly::zero(),
        }
    }

    fn merged_knots(&self, o: &Self) -> Vec<f64> {
        let mut k: Vec<f64> = self.knots.iter().chain(o.knots.iter()).copied().collect();
        k.sort_by(f64::total_cmp);
        dedup_close(&mut k);
        k
    }

    fn combine(&self, o: &Self, op: impl Fn(&Poly, &Poly) -> Poly) -> Self {
        let knots = self.merged_knots(o);
        if knots.len() < 2 {
            return Self::zero();
        }
        let polys = knots
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                op(&self.local_at(w[0], mid), &o.local_at(w[0], mid))
            })
            .collect();
        PiecewisePoly { knots, polys }
    }

    pub fn add(&self, o: &Self) -> Self {
        self.combine(o, Poly::add)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.combine(o, Poly::sub)
    }

    pub fn mul(&self, o: &Self) -> Self {
        self.combine(o, Poly::mul)
    }

    /// `∫ self · o`.
    pub fn inner(&self, o: &Self) -> f64 {
        self.mul(o).integral()
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    fn dedup_knots(&mut self) {
        let mut knots = Vec::with_capacity(self.knots.len());
        let mut polys = Vec::with_capacity(self.polys.len());
        for (i, p) in self.polys.iter().enumerate() {
            let (a, b) = (self.knots[i], self.knots[i + 1]);
            if b - a <= KNOT_MERGE {
                continue;
            }
            if knots.last().map_or(true, |&l: &f64| (l - a).abs() > KNOT_MERGE) {
                if !knots.is_empty() {
                    polys.push(Poly::zero());
                }
                knots.push(a);
            }
            knots.push(b);
            polys.push(p.clone());
        }
        self.knots = knots;
        self.polys = polys;
    }

    /// Exact convolution `(self * k)(x) = ∫ self(y) k(x - y) dy`.
    pub fn convolve(&self, k: &PiecewisePoly) -> PiecewisePoly {
        let (Some((g_lo, g_hi)), Some((k_lo, k_hi))) = (self.support(), k.support()) else {
            return Self::zero();
        };
        let mut knots: Vec<f64> = Vec::new();
        for &c in self.knots.iter().filter(|&&c| c >= g_lo && c <= g_hi) {
            for &t in k.knots.iter().filter(|&&t| t >= k_lo && t <= k_hi) {
                knots.push(c + t);
            }
        }
        knots.sort_by(f64::total_cmp);
        dedup_close(&mut knots);

        let g_pieces: Vec<(f64, f64, &Poly)> = self.pieces().filter(|(_, _, p)| !p.is_zero()).collect();
        let k_pieces: Vec<(f64, f64, &Poly)> = k.pieces().filter(|(_, _, p)| !p.is_zero()).collect();

        let mut polys = Vec::with_capacity(knots.len().saturating_sub(1));
        for w in knots.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            let xm = 0.5 * (x0 + x1);
            let mut acc = Poly::zero();
            let first = g_pieces.partition_point(|&(_, d, _)| d <= xm - k_hi);
            for &(c, d, p) in &g_pieces[first..] {
                if c >= xm - k_lo {
                    break;
                }
                for &(t0, t1, q) in &k_pieces {
                    let lower_const = c >= xm - t1;
                    let upper_const = d <= xm - t0;
                    let lower = if lower_const { c } else { xm - t1 };
                    let upper = if upper_const { d } else { xm - t0 };
                    if upper <= lower {
                        continue;
                    }
                    // Re-centre the piece at the window so the shifts below stay
                    // kernel-sized; long flat pieces otherwise lose digits.
                    let c_loc = if lower_const { c } else { x0 - t1 };
                    let p_loc = p.shift(c_loc - c);
                    acc = acc.add(&pair_contribution(&p_loc, c_loc, d, q, t0, t1, x0, lower_const, upper_const));
                }
            }
            polys.push(acc);
        }
        PiecewisePoly { knots, polys }
    }

    pub fn convolve_hat(&self, s: f64) -> PiecewisePoly {
        self.convolve(&PiecewisePoly::hat(s))
    }

    /// Points where the function crosses (or touches at a sample) `level`.
    /// Jumps across `level` at knots are reported at the knot.
    pub fn level_crossings(&self, level: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        let mut prev_right = 0.0;
        for (i, (a, b, p)) in self.pieces().enumerate() {
            let left = p.eval(0.0);
            let jumps = (prev_right - level) * (left - level) < 0.0;
            if jumps {
                out.push(a);
            }
            for r in p.roots_in(level, b - a) {
                out.push(a + r);
            }
            prev_right = p.eval(b - a);
            if i + 1 == self.polys.len() && (prev_right - level) * (0.0 - level) < 0.0 {
                out.push(b);
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        out
    }

    /// `F(x) = ∫_{-∞}^x self`.
    pub fn running_integral(&self) -> RunningIntegral {
        let mut polys = Vec::with_capacity(self.polys.len());
        let mut acc = 0.0;
        for (a, b, p) in self.pieces() {
            let anti = p.antiderivative().add(&Poly::constant(acc));
            acc = anti.eval(b - a);
            polys.push(anti);
        }
        RunningIntegral { inner: PiecewisePoly { knots: self.knots.clone(), polys }, total: acc }
    }
}

fn x_span(k: &[f64]) -> f64 {
    match (k.first(), k.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    }
}

fn dedup_close(k: &mut Vec<f64>) {
    let scale = x_span(k).abs().max(1.0);
    k.dedup_by(|b, a| (*b - *a).abs() <= KNOT_MERGE * scale);
}

/// Contribution of one (signal piece, kernel piece) pair to the output piece
/// starting at `x0`, as a polynomial in `ξ = x - x0`.
#[allow(clippy::too_many_arguments)]
fn pair_contribution(
    p: &Poly,
    c: f64,
    d: f64,
    q: &Poly,
    t0: f64,
    t1: f64,
    x0: f64,
    lower_const: bool,
    upper_const: bool,
) -> Poly {
    // With η = y - c, the kernel argument is t - t0 = D + ξ - η.
    let qt = q.shift(x0 - c - t0);
    let kdeg = qt.coeffs().len();
    let mut out = Poly::zero();
    for i in 0..kdeg {
        // r_i(η) = Σ_k qt_k C(k,i) (-η)^{k-i} p(η)
        let mut r = vec![0.0; kdeg - i];
        for kk in i..kdeg {
            let sign = if (kk - i) % 2 == 0 { 1.0 } else { -1.0 };
            r[kk - i] += qt.coeffs()[kk] * binom(kk, i) * sign;
        }
        let ri = Poly::new(r).mul(p).antiderivative();
        if ri.is_zero() {
            continue;
        }
        let upper = if upper_const { Poly::constant(ri.eval(d - c)) } else { ri.shift(x0 - t0 - c) };
        let lower = if lower_const { Poly::constant(ri.eval(0.0)) } else { ri.shift(x0 - t1 - c) };
        let diff = upper.sub(&lower);
        let mut shifted = vec![0.0; i];
        shifted.extend_from_slice(diff.coeffs());
        out = out.add(&Poly::new(shifted));
    }
    out
}

/// Running integral of a piecewise polynomial: zero to the left of the
/// support, constant (`total`) to the right.
#[derive(Clone, Debug)]
pub struct RunningIntegral {
    inner: PiecewisePoly,
    total: f64,
}

impl RunningIntegral {
    pub fn eval(&self, x: f64) -> f64 {
        match self.inner.knots.first() {
            None => 0.0,
            Some(&lo) if x <= lo => 0.0,
            _ if x >= *self.inner.knots.last().unwrap() => self.total,
            _ => self.inner.eval(x),
        }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// The antiderivative restricted to the knot span.
    pub fn on_span(&self) -> &PiecewisePoly {
        &self.inner
    }

    /// `(inf F, sup F)` over the real line, including the limits at ±∞.
    pub fn extrema(&self, integrand: &PiecewisePoly) -> (f64, f64) {
        let mut lo = 0.0f64.min(self.total);
        let mut hi = 0.0f64.max(self.total);
        let mut visit = |v: f64| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        for &k in &self.inner.knots {
            visit(self.eval(k));
        }
        for (a, b, p) in integrand.pieces() {
            for r in p.roots_in(0.0, b - a) {
                visit(self.eval(a + r));
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_matches_direct_evaluation() {
        let p = Poly::new(vec![1.0, -2.0, 0.5, 3.0]);
        let q = p.shift(0.7);
        for &s in &[-1.0, 0.0, 0.3, 2.0] {
            assert!((q.eval(s) - p.eval(s + 0.7)).abs() < 1e-12);
        }
    }

    #[test]
    fn hat_has_unit_mass() {
        assert!((PiecewisePoly::hat(0.3).integral() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hat_convolution_of_single_bar_matches_cdf_difference() {
        let s = 0.05;
        let g = PiecewisePoly::indicator(&[(0.3, 0.6)]).convolve_hat(s);
        let cdf = |x: f64| {
            if x <= -s {
                0.0
            } else if x <= 0.0 {
                (x + s).powi(2) / (2.0 * s * s)
            } else if x <= s {
                1.0 - (s - x).powi(2) / (2.0 * s * s)
            } else {
                1.0
            }
        };
        for k in 0..=200 {
            let x = 0.2 + 0.5 * k as f64 / 200.0;
            let want = cdf(x - 0.3) - cdf(x - 0.6);
            assert!((g.eval(x) - want).abs() < 1e-13, "x={x}: {} vs {want}", g.eval(x));
        }
        assert!((g.integral() - 0.3).abs() < 1e-14);
    }

    #[test]
    fn convolution_commutes() {
        let a = PiecewisePoly::indicator(&[(0.1, 0.2), (0.4, 0.45)]).convolve_hat(0.03);
        let b = PiecewisePoly::hat(0.07);
        let ab = a.convolve(&b);
        let ba = b.convolve(&a);
        for k in 0..=100 {
            let x = k as f64 / 100.0 * 0.7;
            assert!((ab.eval(x) - ba.eval(x)).abs() < 1e-11);
        }
    }

    #[test]
    fn running_integral_reaches_total() {
        let g = PiecewisePoly::indicator(&[(0.2, 0.5)]);
        let f = g.running_integral();
        assert_eq!(f.eval(0.0), 0.0);
        assert!((f.eval(0.35) - 0.15).abs() < 1e-15);
        assert!((f.eval(2.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn crossings_of_step_are_its_jumps() {
        let g = PiecewisePoly::indicator(&[(0.2, 0.5), (0.7, 0.9)]);
        assert_eq!(g.level_crossings(0.5), vec![0.2, 0.5, 0.7, 0.9]);
    }

    #[test]
    fn json_roundtrip() {
        let g = PiecewisePoly::indicator(&[(0.2, 0.5)]).convolve_hat(0.1);
        let s = serde_json::to_string(&g).unwrap();
        let back: PiecewisePoly = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
    }
}
