use proptest::prelude::*;
use tvbar_core::certify::{certify_f1, certify_f2, certify_f3, unified_condition};

proptest! {
    #[test]
    fn f3_with_equal_sizes_is_f2(omega in 0.005..0.2f64, s in 0.01..1.0f64, lambda in 1.0..1e6f64) {
        let sigma = s * omega;
        prop_assert_eq!(certify_f3(omega, sigma, sigma, lambda).verdict, certify_f2(omega, sigma, lambda).verdict);
    }

    #[test]
    fn verdicts_and_margins_are_consistent(omega in 0.005..0.2f64, s in 0.01..1.5f64, r in 0.01..1.5f64, lambda in 1.0..1e6f64) {
        let (sigma, rho) = (s * omega, r * omega);
        for c in [certify_f1(omega, sigma, lambda), certify_f2(omega, sigma, lambda), certify_f3(omega, sigma, rho, lambda)] {
            prop_assert_eq!(c.verdict, c.conditions.iter().all(|k| k.satisfied));
            for k in &c.conditions {
                prop_assert_eq!(k.margin, k.rhs - k.lhs);
                prop_assert_eq!(k.satisfied, if k.strict { k.lhs < k.rhs } else { k.lhs <= k.rhs });
            }
        }
    }

    #[test]
    fn unified_lhs_is_monotone_in_both_sizes(omega in 0.005..0.2f64, lambda in 10.0..1e6f64, a in 0.01..1.0f64, b in 0.01..1.0f64, c in 0.01..1.0f64) {
        let half = 0.5 * omega;
        let (lo, hi) = if a < b { (a * half, b * half) } else { (b * half, a * half) };
        let other = c * half;
        let lhs = |rho: f64, sigma: f64| unified_condition(omega, sigma, rho, lambda).unwrap().conditions[0].lhs;
        prop_assert!(lhs(lo, other) <= lhs(hi, other) + 1e-15);
        prop_assert!(lhs(other, lo) <= lhs(other, hi) + 1e-15);
    }

    #[test]
    fn margins_cross_zero_once_along_a_lambda_sweep(omega in 0.005..0.2f64, s in 0.01..1.0f64, r in 0.01..1.0f64) {
        let (sigma, rho) = (0.5 * s * omega, 0.5 * r * omega);
        let lambdas: Vec<f64> = (0..200).map(|i| 10f64.powf(-1.0 + 8.0 * i as f64 / 199.0)).collect();
        let sweeps: [Box<dyn Fn(f64) -> f64>; 4] = [
            Box::new(|l| certify_f1(omega, sigma, l).conditions[1].margin),
            Box::new(|l| certify_f2(omega, sigma, l).conditions[1].margin),
            Box::new(|l| certify_f3(omega, sigma.min(rho), sigma.max(rho), l).conditions[2].margin),
            Box::new(|l| unified_condition(omega, sigma, rho, l).unwrap().conditions[0].margin),
        ];
        for m in sweeps {
            let signs: Vec<bool> = lambdas.iter().map(|&l| m(l) > 0.0).collect();
            let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
            prop_assert!(changes <= 1);
            prop_assert!(signs.windows(2).all(|w| !w[0] || w[1]), "margin turned negative as λ grew");
        }
    }
}
