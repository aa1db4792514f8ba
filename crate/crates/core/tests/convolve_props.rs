mod common;

use common::{bisect, code_in_b_omega};
use proptest::prelude::*;
use tvbar_core::appendix::blurred_box_norm_sq_exact;
use tvbar_core::convolve::{blur, hat_convolve, hat_double_convolve};
use tvbar_core::{BarCode, Kernel};

proptest! {
    #[test]
    fn hat_blur_conserves_mass(xs in common::interfaces(6, 0.0, 1.0, 1e-4), sigma in 0.001..0.3f64) {
        let z = BarCode::new(xs).unwrap();
        let f = hat_convolve(&z, sigma).unwrap();
        prop_assert!((f.integral() - z.measure()).abs() < 1e-13);
    }

    #[test]
    fn gaussian_grid_blur_conserves_mass(xs in common::interfaces(4, 0.0, 1.0, 1e-3), sigma in 0.005..0.05f64) {
        let z = BarCode::new(xs).unwrap();
        let k = Kernel::gaussian(sigma, Some(4.0)).unwrap();
        let f = blur(&z, &k, None, None).unwrap();
        prop_assert!(f.as_grid().is_some());
        prop_assert!((f.integral() - z.measure()).abs() < 1e-8, "{} vs {}", f.integral(), z.measure());
    }

    #[test]
    fn single_bar_half_level_is_its_ends(a in 0.0..0.7f64, len in 0.01..0.3f64, s in 0.01..1.0f64) {
        let b = a + len;
        let sigma = s * len;
        let f = hat_convolve(&BarCode::new(vec![a, b]).unwrap(), sigma).unwrap();
        prop_assert!((f.eval(a) - 0.5).abs() < 1e-14);
        prop_assert!((f.eval(b) - 0.5).abs() < 1e-14);
        for i in 1..200 {
            let t = i as f64 / 200.0;
            prop_assert!(f.eval(a + t * len) > 0.5);
            prop_assert!(f.eval(a - t * sigma) < 0.5);
            prop_assert!(f.eval(b + t * sigma) < 0.5);
        }
    }

    #[test]
    fn blur_stays_below_half_off_the_support((z, omega) in code_in_b_omega(0.02..0.1), s in 0.01..1.0f64) {
        let sigma = s * omega;
        let f = hat_convolve(&z, sigma).unwrap();
        for i in 0..=4000 {
            let x = -sigma + (1.0 + 2.0 * sigma) * i as f64 / 4000.0;
            if z.value_at(x) == 0.0 && !z.interfaces().contains(&x) {
                prop_assert!(f.eval(x) < 0.5, "x = {x}: {}", f.eval(x));
            }
        }
    }

    #[test]
    fn double_blur_half_level_is_the_interfaces(
        (z, omega) in code_in_b_omega(0.02..0.1),
        r in 0.01..1.0f64,
        s in 0.01..1.0f64,
    ) {
        let (rho, sigma) = (0.5 * r * omega, 0.5 * s * omega);
        let g = hat_double_convolve(&z, rho, sigma).unwrap();
        let d = |x: f64| g.eval(x) - 0.5;
        // Each interface is bracketed by a sign change and located by bisection.
        let w = 0.25 * omega;
        for &t in z.interfaces() {
            let (lo, hi) = (t - w, t + w);
            let (dl, dh) = (d(lo), d(hi));
            prop_assert!(dl * dh < 0.0, "no sign change around {t}");
            let root = bisect(d, lo, hi);
            prop_assert!((root - t).abs() < 1e-8, "root {root} vs interface {t}");
        }
        // Away from the interfaces the level is never attained.
        for i in 0..=4000 {
            let x = -omega + (1.0 + 2.0 * omega) * i as f64 / 4000.0;
            let dist = z.interfaces().iter().map(|t| (t - x).abs()).fold(f64::INFINITY, f64::min);
            if dist > 1e-6 {
                prop_assert!(d(x).abs() > 0.0);
                let inside = z.value_at(x) == 1.0;
                prop_assert_eq!(d(x) > 0.0, inside, "x = {}", x);
            }
        }
    }

    #[test]
    fn narrower_outer_kernel_never_lowers_the_support(
        (z, omega) in code_in_b_omega(0.02..0.1),
        r in 0.05..1.0f64,
        t1 in 0.01..1.0f64,
        t2 in 0.01..1.0f64,
        u in 0.0..1.0f64,
    ) {
        let rho = 0.5 * r * omega;
        let (a, b) = if t1 < t2 { (t1 * rho, t2 * rho) } else { (t2 * rho, t1 * rho) };
        let bars: Vec<(f64, f64)> = z.bars().collect();
        let (l, rr) = bars[(u * bars.len() as f64) as usize % bars.len()];
        let x = l + u * (rr - l);
        let small = hat_double_convolve(&z, a, rho).unwrap().eval(x);
        let large = hat_double_convolve(&z, b, rho).unwrap().eval(x);
        prop_assert!(large <= small + 1e-13, "τ {a} → {small}, τ {b} → {large}");
    }

    #[test]
    fn blurred_box_norm(a in 0.0..0.6f64, len in 0.01..0.4f64, s in 0.01..=1.0f64) {
        let rho = 0.5 * s * len;
        let v = blurred_box_norm_sq_exact(a, a + len, rho).unwrap();
        prop_assert!((v - (len - 7.0 * rho / 15.0)).abs() < 1e-13);
    }
}
