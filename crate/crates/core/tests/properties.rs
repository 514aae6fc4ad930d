//! Property tests for the algebraic and invariance laws the library promises.

use ebm_core::energy::{
    energy, gaussian_fisher_divergence, gaussian_kl, hvp_x, laplacian_x, score, EnergyFamily, GaussianDensity,
    ParamVector,
};
use ebm_core::estimators::{
    dsm_loss, nce_loss, shifted_nce_loss, sm_loss, ssm_loss, NceConfig, Projection, SliceConfig,
};
use ebm_core::experiments::config::{parse_config, Experiment, ExperimentConfig};
use ebm_core::experiments::csvout::fmt_num;
use ebm_core::samplers::{langevin_chain, LangevinConfig, ModelTarget};
use ebm_core::{RealVector, RngStream};
use proptest::prelude::*;

fn family(which: usize) -> EnergyFamily {
    match which % 4 {
        0 => EnergyFamily::gaussian(3).unwrap(),
        1 => EnergyFamily::mixture_rbf(3, 2).unwrap(),
        2 => EnergyFamily::poly1d(4).unwrap(),
        _ => EnergyFamily::mlp(2, &[8, 8]).unwrap(),
    }
}

fn point(rng: &mut RngStream, d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    rng.fill_normal(&mut x);
    x
}

fn batch(rng: &mut RngStream, n: usize, d: usize) -> Vec<RealVector> {
    (0..n).map(|_| RealVector::new(point(rng, d)).unwrap()).collect()
}

fn shift_offset(theta: &ParamVector, delta: f64) -> ParamVector {
    let mut v = theta.values().to_vec();
    v[0] += delta;
    theta.with_values(v).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hvp_is_linear_and_symmetric(which in 0usize..4, seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let f = family(which);
        let mut rng = RngStream::new(seed);
        let th = f.random_params(&mut rng);
        let d = f.dim();
        let (x, u, v) = (point(&mut rng, d), point(&mut rng, d), point(&mut rng, d));
        let combo: Vec<f64> = u.iter().zip(&v).map(|(p, q)| a * p + b * q).collect();
        let (hu, hv, hc) = (hvp_x(&f, &th, &x, &u).unwrap(), hvp_x(&f, &th, &x, &v).unwrap(), hvp_x(&f, &th, &x, &combo).unwrap());
        for i in 0..d {
            prop_assert!(close(hc[i], a * hu[i] + b * hv[i], 1e-10));
        }
        let uhv: f64 = u.iter().zip(hv.iter()).map(|(p, q)| p * q).sum();
        let vhu: f64 = v.iter().zip(hu.iter()).map(|(p, q)| p * q).sum();
        prop_assert!(close(uhv, vhu, 1e-10));
    }

    #[test]
    fn laplacian_is_sum_of_coordinate_hvps(which in 0usize..4, seed in any::<u64>()) {
        let f = family(which);
        let mut rng = RngStream::new(seed);
        let th = f.random_params(&mut rng);
        let x = point(&mut rng, f.dim());
        let sum: f64 = (0..f.dim())
            .map(|i| {
                let e = RealVector::basis(f.dim(), i);
                hvp_x(&f, &th, &x, &e).unwrap()[i]
            })
            .sum();
        prop_assert!(close(laplacian_x(&f, &th, &x).unwrap(), sum, 1e-12));
    }

    #[test]
    fn poly_offset_moves_only_the_energy(seed in any::<u64>(), delta in -50.0f64..50.0) {
        let f = family(2);
        let mut rng = RngStream::new(seed);
        let th = f.random_params(&mut rng);
        let moved = shift_offset(&th, delta);
        let x = point(&mut rng, 1);
        prop_assert_eq!(score(&f, &th, &x).unwrap(), score(&f, &moved, &x).unwrap());
        prop_assert_eq!(hvp_x(&f, &th, &x, &[1.0]).unwrap(), hvp_x(&f, &moved, &x, &[1.0]).unwrap());
        prop_assert_eq!(laplacian_x(&f, &th, &x).unwrap(), laplacian_x(&f, &moved, &x).unwrap());
        let gap = energy(&f, &moved, &x).unwrap() - energy(&f, &th, &x).unwrap();
        prop_assert!(close(gap, delta, 1e-12));
    }

    #[test]
    fn score_based_losses_ignore_energy_offsets(seed in any::<u64>(), delta in -20.0f64..20.0) {
        let f = family(2);
        let mut rng = RngStream::new(seed);
        let th = f.random_params(&mut rng);
        let moved = shift_offset(&th, delta);
        let data = batch(&mut rng, 40, 1);
        let stream = rng.split(1);
        prop_assert_eq!(sm_loss(&f, &th, &data).unwrap().loss, sm_loss(&f, &moved, &data).unwrap().loss);
        let cfg = SliceConfig { projection: Projection::Rademacher, num_slices: 3, variance_reduced: false };
        prop_assert_eq!(
            ssm_loss(&f, &th, &data, &cfg, &mut stream.clone()).unwrap().loss,
            ssm_loss(&f, &moved, &data, &cfg, &mut stream.clone()).unwrap().loss
        );
        prop_assert_eq!(
            dsm_loss(&f, &th, &data, 0.4, &mut stream.clone()).unwrap().loss,
            dsm_loss(&f, &moved, &data, 0.4, &mut stream.clone()).unwrap().loss
        );
        prop_assert_eq!(
            shifted_nce_loss(&f, &th, &data, &[0.05]).unwrap().loss,
            shifted_nce_loss(&f, &moved, &data, &[0.05]).unwrap().loss
        );
    }

    #[test]
    fn nce_moves_only_through_energy_plus_c(seed in any::<u64>(), delta in -5.0f64..5.0) {
        let f = family(2);
        let mut rng = RngStream::new(seed);
        let th = f.random_params(&mut rng);
        let c = rng.standard_normal();
        let noise = GaussianDensity::isotropic(1, 0.0, 2.0).unwrap();
        let data = batch(&mut rng, 30, 1);
        let fake = noise.sample_n(&mut rng, 30);
        let cfg = NceConfig { nu: None, noise, learn_log_z: true };
        let a = nce_loss(&f, &th.with_log_z(c).unwrap(), &data, &fake, &cfg).unwrap().loss;
        let b = nce_loss(&f, &shift_offset(&th, delta).with_log_z(c - delta).unwrap(), &data, &fake, &cfg).unwrap().loss;
        prop_assert!(close(a, b, 1e-12));
    }

    #[test]
    fn chains_are_deterministic_and_shift_invariant(seed in any::<u64>(), delta in -20.0f64..20.0, adjust in any::<bool>()) {
        let f = family(2);
        let th = f.poly_params(&[0.0, 0.2, 0.1, 0.0, 0.05]).unwrap();
        let moved = shift_offset(&th, delta);
        let cfg = LangevinConfig::new(0.2, 50, adjust).unwrap();
        let s = RngStream::new(seed);
        let run = |theta: &ParamVector| {
            langevin_chain(&ModelTarget::new(&f, theta).unwrap(), &[0.5], &cfg, &mut s.clone(), true).unwrap()
        };
        let (a, b) = (run(&th), run(&th));
        prop_assert_eq!(&a, &b);
        // ULA sees only the score. MALA compares energy differences, where the
        // offset cancels up to rounding that never reaches an accept decision
        // in practice.
        prop_assert_eq!(&a, &run(&moved));
    }

    #[test]
    fn divergences_vanish_on_the_diagonal(m in -5.0f64..5.0, s in 0.1f64..5.0) {
        let p = GaussianDensity::isotropic(2, m, s).unwrap();
        prop_assert_eq!(gaussian_kl(&p, &p).unwrap(), 0.0);
        prop_assert_eq!(gaussian_fisher_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn csv_numbers_round_trip(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        let text = fmt_num(v);
        if v.is_nan() {
            prop_assert_eq!(text, "");
        } else {
            prop_assert_eq!(text.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn configs_round_trip_through_text(
        which in 0usize..7,
        seed in any::<u64>(),
        steps in 1usize..5000,
        lr in 1e-5f64..1.0,
        sigma in 1e-3f64..10.0,
    ) {
        let mut cfg = ExperimentConfig::defaults(Experiment::ALL[which]);
        cfg.seed = seed;
        cfg.steps = steps;
        cfg.optimizer.lr = lr;
        cfg.estimator.sigma = sigma;
        let back = parse_config(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
