mod common;

use proptest::prelude::*;
use tvbar_core::convolve::{hat_convolve, hat_double_convolve, GridSpec};
use tvbar_core::energy::{dual_norm, evaluate, fidelity};
use tvbar_core::{BarCode, EnergyParams, GridSamples, Signal};

/// `½ max |∫_a^b f|` over the nodes of a fine partition, with `∫` taken by
/// Simpson's rule on each cell.
fn brute_dual_norm(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> f64 {
    let h = (hi - lo) / cells as f64;
    let mut running = vec![0.0];
    for i in 0..cells {
        let a = lo + i as f64 * h;
        let s = h / 6.0 * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h));
        running.push(running.last().unwrap() + s);
    }
    let max = running.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = running.iter().cloned().fold(f64::INFINITY, f64::min);
    0.5 * (max - min)
}

/// Moves single interfaces by `±h` while that lowers `energy`.
fn descend(mut xs: Vec<f64>, h: f64, energy: impl Fn(&BarCode) -> f64) -> Vec<f64> {
    let mut e = energy(&BarCode::new(xs.clone()).unwrap());
    for _ in 0..10_000 {
        let mut moved = false;
        for i in 0..xs.len() {
            for d in [-h, h] {
                let mut ys = xs.clone();
                ys[i] += d;
                let ok = ys.windows(2).all(|w| w[1] - w[0] >= h) && ys[0] >= 0.0 && ys[ys.len() - 1] <= 1.0;
                if !ok {
                    continue;
                }
                let ey = energy(&BarCode::new(ys.clone()).unwrap());
                if ey < e - 1e-15 * e.abs() {
                    xs = ys;
                    e = ey;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    xs
}

fn perturbed(z: &BarCode, amount: f64, shifts: &[f64]) -> Vec<f64> {
    z.interfaces().iter().zip(shifts.iter().cycle()).map(|(t, s)| t + amount * s).collect()
}

proptest! {
    #[test]
    fn total_is_tv_plus_weighted_fidelity(
        z in common::interfaces(4, 0.0, 1.0, 0.02),
        u in common::interfaces(4, 0.0, 1.0, 0.001),
        sigma in 0.002..0.1f64,
        rho in 0.002..0.1f64,
        lambda in 0.1..1e5f64,
    ) {
        let (z, u) = (BarCode::new(z).unwrap(), BarCode::new(u).unwrap());
        let f = hat_convolve(&z, sigma).unwrap();
        for p in [EnergyParams::f1(lambda, sigma), EnergyParams::f2(lambda, sigma), EnergyParams::f3(lambda, sigma, rho)] {
            let p = p.unwrap();
            let r = evaluate(&u, &f, &p).unwrap();
            prop_assert!(r.fidelity >= 0.0);
            prop_assert_eq!(r.total, r.tv_term as f64 + lambda * r.fidelity);
            prop_assert_eq!(r.tv_term, u.total_variation());
            let r2 = evaluate(&u, &f, &p.with_lambda(2.0 * lambda)).unwrap();
            prop_assert_eq!(r2.tv_term, r.tv_term);
            prop_assert_eq!(r2.fidelity, r.fidelity);
            prop_assert!((r2.total - r.total - lambda * r.fidelity).abs() <= 4.0 * f64::EPSILON * r2.total);
        }
    }

    #[test]
    fn f2_fidelity_vanishes_only_at_z(
        z in common::interfaces(4, 0.0, 1.0, 0.02),
        sigma in 0.002..0.1f64,
        shift in prop::sample::select(vec![-0.01, -0.003, 0.002, 0.005]),
        which in 0usize..8,
    ) {
        let z = BarCode::new(z).unwrap();
        let f = hat_convolve(&z, sigma).unwrap();
        let p = EnergyParams::f2(1.0, sigma).unwrap();
        prop_assert!(fidelity(&z, &f, &p).unwrap() < 1e-14);
        let mut xs = z.interfaces().to_vec();
        let i = which % xs.len();
        xs[i] = (xs[i] + shift).clamp(0.0, 1.0);
        if let Ok(u) = BarCode::new(xs) {
            if u != z {
                prop_assert!(fidelity(&u, &f, &p).unwrap() > 1e-10);
            }
        }
        prop_assert!(fidelity(&BarCode::empty(), &f, &p).unwrap() > 1e-10);
    }

    #[test]
    fn dual_norm_of_piecewise_signals_matches_brute_force(
        z1 in common::interfaces(3, 0.0, 1.0, 0.02),
        z2 in common::interfaces(3, 0.0, 1.0, 0.02),
        s1 in 0.005..0.1f64,
        s2 in 0.005..0.1f64,
        c in 0.2..2.0f64,
    ) {
        let a = hat_convolve(&BarCode::new(z1).unwrap(), s1).unwrap();
        let b = hat_double_convolve(&BarCode::new(z2).unwrap(), s2, s1).unwrap();
        let pa = a.as_piecewise().unwrap();
        let pb = b.as_piecewise().unwrap();
        let f = pa.sub(&pb.scale(c));
        let brute = brute_dual_norm(|x| f.eval(x), -0.25, 1.25, 6000);
        let exact = dual_norm(&Signal::piecewise(f));
        prop_assert!((exact - brute).abs() < 1e-4, "{exact} vs {brute}");
    }

    #[test]
    fn dual_norm_of_grid_signals_matches_brute_force(values in prop::collection::vec(-1.0..1.0f64, 3..60), h in 0.001..0.05f64) {
        let g = GridSamples::new(GridSpec::new(0.1, h, values.len()).unwrap(), values.clone()).unwrap();
        let lin = |x: f64| {
            let t = (x - 0.1) / h;
            let i = (t.floor().max(0.0) as usize).min(values.len() - 2);
            values[i] + (t - i as f64) * (values[i + 1] - values[i])
        };
        let brute = brute_dual_norm(lin, 0.1, 0.1 + h * (values.len() - 1) as f64, 40 * (values.len() - 1));
        let exact = dual_norm(&Signal::grid(g));
        // The grid path only sees node values of the running integral.
        prop_assert!(exact <= brute + 1e-12);
        prop_assert!(brute - exact <= 0.5 * h + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn f1_local_minimizers_sit_on_the_half_level(
        (z, omega) in common::code_in_b_omega(0.05..0.12),
        s in 0.1..1.0f64,
        shifts in prop::collection::vec(-1.0..1.0f64, 1..8),
    ) {
        let inner: Vec<f64> = z.interfaces().iter().map(|t| 0.1 + 0.8 * t).collect();
        let z = BarCode::new(inner).unwrap();
        let omega = 0.8 * omega;
        let sigma = s * omega;
        let h = omega / 200.0;
        let f = hat_convolve(&z, sigma).unwrap();
        let p = EnergyParams::f1(1.0, sigma).unwrap();
        let xs = descend(perturbed(&z, 0.2 * omega, &shifts), h, |u| fidelity(u, &f, &p).unwrap());
        for x in xs {
            prop_assert!((f.eval(x) - 0.5).abs() < 5.0 * h / sigma, "f({x}) = {}", f.eval(x));
        }
    }

    #[test]
    fn f3_local_minimizers_satisfy_the_first_variation(
        (z, omega) in common::code_in_b_omega(0.05..0.12),
        s in 0.1..1.0f64,
        r in 0.1..1.0f64,
        shifts in prop::collection::vec(-1.0..1.0f64, 1..8),
    ) {
        let inner: Vec<f64> = z.interfaces().iter().map(|t| 0.1 + 0.8 * t).collect();
        let z = BarCode::new(inner).unwrap();
        let omega = 0.8 * omega;
        let (sigma, rho) = (0.5 * s * omega, 0.5 * r * omega);
        let h = omega / 200.0;
        let f = hat_convolve(&z, sigma).unwrap();
        let rf = hat_double_convolve(&z, rho, sigma).unwrap();
        let p = EnergyParams::f3(1.0, sigma, rho).unwrap();
        let xs = descend(perturbed(&z, 0.2 * omega, &shifts), h, |u| fidelity(u, &f, &p).unwrap());
        for (i, &x) in xs.iter().enumerate() {
            // ū_i: u with the bar containing x_i removed.
            let bar = if i % 2 == 0 { i } else { i - 1 };
            let rest: Vec<f64> = xs.iter().enumerate().filter(|(j, _)| *j != bar && *j != bar + 1).map(|(_, t)| *t).collect();
            let ubar = BarCode::new(rest).unwrap();
            let rhs = 0.5 + if ubar.is_empty() { 0.0 } else { hat_double_convolve(&ubar, rho, rho).unwrap().eval(x) };
            prop_assert!((rf.eval(x) - rhs).abs() < 5.0 * h * 2.0 / rho, "x = {x}: {} vs {rhs}", rf.eval(x));
        }
    }
}
