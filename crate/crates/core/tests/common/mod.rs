#![allow(dead_code)]

use proptest::prelude::*;
use tvbar_core::barcode::generate;
use tvbar_core::{BarCode, GeneratorConfig};

/// A generated code in `ℬ_ω` together with its `ω`.
pub fn code_in_b_omega(omega: std::ops::Range<f64>) -> impl Strategy<Value = (BarCode, f64)> {
    (omega, any::<u64>()).prop_map(|(omega, seed)| {
        let max_bars = (((1.0 / omega) + 1.0) / 2.0).floor().max(1.0) as usize;
        let z = generate(&GeneratorConfig::new(omega, max_bars.min(12), seed)).unwrap();
        (z, omega)
    })
}

/// Sorted, well separated interfaces inside `[lo, hi]`.
pub fn interfaces(max_pairs: usize, lo: f64, hi: f64, min_gap: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 1..=2 * max_pairs).prop_filter_map("separated", move |mut v| {
        if v.len() % 2 == 1 {
            v.pop();
        }
        let mut xs: Vec<f64> = v.iter().map(|t| lo + t * (hi - lo)).collect();
        xs.sort_by(f64::total_cmp);
        (!xs.is_empty() && xs.windows(2).all(|w| w[1] - w[0] >= min_gap)).then_some(xs)
    })
}

/// Bisection for a sign change of `g` on `[a, b]`.
pub fn bisect(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm == 0.0 || b - a < 1e-15 {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
