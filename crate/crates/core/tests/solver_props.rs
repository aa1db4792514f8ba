mod common;

use proptest::prelude::*;
use tvbar_core::convolve::{hat_convolve, GridSpec};
use tvbar_core::solver::{add_noise, deblur, threshold, Scheme, TimeStep};
use tvbar_core::{BarCode, Functional, GridSamples, Kernel, NoiseConfig, SolverConfig};

const OMEGA: f64 = 0.05;

fn small_run_config(lambda: f64, sigma: f64) -> SolverConfig {
    let k = Kernel::hat(sigma).unwrap();
    let mut cfg = SolverConfig::new(Functional::F2, lambda, k.clone(), Some(k), OMEGA);
    // A coarser grid keeps property runs short.
    cfg.h = OMEGA / 100.0;
    cfg.epsilon = 2e-3;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn noise_is_seeded_bounded_and_block_constant(
        xs in common::interfaces(4, 0.0, 1.0, 0.01),
        amplitude in 0.0..0.5f64,
        seed: u64,
        omega in 0.01..0.1f64,
    ) {
        let z = BarCode::new(xs).unwrap();
        let f = hat_convolve(&z, 0.01).unwrap();
        let cfg = NoiseConfig::new(amplitude, seed);
        let a = add_noise(&f, &cfg, omega).unwrap();
        let b = add_noise(&f, &cfg, omega).unwrap();
        let (ga, gb) = (a.as_grid().unwrap(), b.as_grid().unwrap());
        prop_assert_eq!(&ga.values, &gb.values);
        prop_assert!((ga.h - omega / 400.0).abs() < 1e-15);
        let spec = ga.spec();
        let shift: Vec<f64> = (0..spec.n).map(|i| ga.values[i] - f.eval(spec.x(i))).collect();
        prop_assert!(shift.iter().all(|s| s.abs() <= amplitude + 1e-12));
        for i in 1..spec.n {
            if spec.lattice_index(i).div_euclid(25) == spec.lattice_index(i - 1).div_euclid(25) {
                prop_assert!((shift[i] - shift[i - 1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_follows_the_global_lattice(seed: u64, k0 in -200i64..200, n in 100usize..2000, offset in 0usize..100) {
        let omega = 0.04;
        let h = omega / 400.0;
        let cfg = NoiseConfig::new(0.1, seed);
        let long = GridSamples::new(GridSpec::new(k0 as f64 * h, h, n + offset).unwrap(), vec![0.0; n + offset]).unwrap();
        let short = GridSamples::new(GridSpec::new((k0 + offset as i64) as f64 * h, h, n).unwrap(), vec![0.0; n]).unwrap();
        let a = add_noise(&tvbar_core::Signal::grid(long), &cfg, omega).unwrap();
        let b = add_noise(&tvbar_core::Signal::grid(short), &cfg, omega).unwrap();
        let (a, b) = (a.as_grid().unwrap(), b.as_grid().unwrap());
        // Block values are drawn in block order from the first block the grid
        // touches, so only grids starting in the same block share draws.
        if (k0.div_euclid(25)) == (k0 + offset as i64).div_euclid(25) {
            prop_assert_eq!(&a.values[offset..], &b.values[..]);
        }
    }

    #[test]
    fn thresholding_a_sampled_code_recovers_it(xs in common::interfaces(5, 0.0, 1.0, 0.02), h in 0.0005..0.004f64) {
        let z = BarCode::new(xs).unwrap();
        let spec = GridSpec::covering(-0.05, 1.05, h).unwrap();
        let g = GridSamples::from_fn(spec, |x| z.value_at(x));
        let code = threshold(&g).unwrap();
        let d = z.max_interface_deviation(&code);
        prop_assert!(d.is_some_and(|d| d <= h), "{} vs {}", z, code);
    }

    #[test]
    fn time_step_and_padding_rules(lambda in 1.0..1e5f64, eps in 1e-4..1e-2f64, s in 0.1..2.0f64, r in 0.1..2.0f64) {
        let omega = 0.0133;
        let mut cfg = SolverConfig::new(Functional::F3, lambda, Kernel::hat(s * omega).unwrap(), Some(Kernel::hat(r * omega).unwrap()), omega);
        cfg.epsilon = eps;
        prop_assert!(cfg.pad >= s * omega && cfg.pad >= r * omega);
        prop_assert!((cfg.h - omega / 400.0).abs() < 1e-18);
        prop_assert_eq!(cfg.time_step(), 1.0 / (3.0 / eps + 2.0 * lambda));
        cfg.scheme = Scheme::Explicit;
        let bound = 0.2 * (cfg.h * cfg.h / (2.0 * eps)).min(eps);
        prop_assert!(cfg.time_step() <= bound);
        cfg.dt = TimeStep::Fixed(1e-7);
        prop_assert_eq!(cfg.time_step(), 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn deblurring_descends_converges_and_repeats(
        (z, _) in common::code_in_b_omega(0.1..0.15),
        seed: u64,
        lambda in 300.0..3000.0f64,
    ) {
        let sigma = OMEGA / 2.0;
        let f = hat_convolve(&z, sigma).unwrap();
        let f = add_noise(&f, &NoiseConfig::new(0.05, seed), OMEGA).unwrap();
        let cfg = small_run_config(lambda, sigma);
        let a = deblur(&f, &cfg).unwrap();
        prop_assert!(a.energy_descends());
        prop_assert!(a.within_box(), "u in [{}, {}]", a.u_min, a.u_max);
        prop_assert!(a.converged);
        prop_assert!(a.residual < 10.0 * cfg.steady_tol / a.dt, "residual {}", a.residual);

        let b = deblur(&f, &cfg).unwrap();
        let (fa, fb) = (a.field.as_grid().unwrap(), b.field.as_grid().unwrap());
        prop_assert!(fa.values.iter().zip(&fb.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        prop_assert_eq!(a.steps, b.steps);
        prop_assert_eq!(a.code, b.code);
    }
}
