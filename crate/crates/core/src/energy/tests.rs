use super::*;
use crate::numerics::{finite_diff_gradient, rel_error};

fn families() -> Vec<EnergyFamily> {
    vec![
        EnergyFamily::gaussian(3).unwrap(),
        EnergyFamily::mixture_rbf(3, 2).unwrap(),
        EnergyFamily::poly1d(4).unwrap(),
        EnergyFamily::mlp(2, &[5, 4]).unwrap(),
    ]
}

fn point(rng: &mut RngStream, d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    rng.fill_normal(&mut x);
    x.iter().map(|v| 1.5 * v).collect()
}

#[test]
fn gaussian_examples() {
    let f = EnergyFamily::gaussian(1).unwrap();
    let th = f.gaussian_params(&[0.0], &[1.0]).unwrap();
    assert_eq!(energy(&f, &th, &[0.0]).unwrap(), 0.0);
    assert_eq!(energy(&f, &th, &[2.0]).unwrap(), 2.0);
    assert_eq!(score(&f, &th, &[2.0]).unwrap().as_slice(), &[-2.0]);
    assert_eq!(grad_theta_energy(&f, &th, &[2.0]).unwrap()[0], -2.0);
}

#[test]
fn poly_examples() {
    let f = EnergyFamily::poly1d(4).unwrap();
    let th = f.poly_params(&[0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    assert_eq!(energy(&f, &th, &[2.0]).unwrap(), 16.0);
    assert_eq!(laplacian_x(&f, &th, &[1.0]).unwrap(), 12.0);
    assert!(EnergyFamily::poly1d(3).is_err());
    assert!(EnergyFamily::poly1d(0).is_err());
}

#[test]
fn gaussian_laplacian_is_trace() {
    let f = EnergyFamily::gaussian(2).unwrap();
    let th = f.gaussian_params(&[0.3, -1.0], &[1.0, 4.0]).unwrap();
    assert!((laplacian_x(&f, &th, &[5.0, 5.0]).unwrap() - 5.0).abs() < 1e-14);
}

#[test]
fn gaussian_hvp_is_precision_times_v() {
    let f = EnergyFamily::gaussian(2).unwrap();
    let th = f.gaussian_params(&[0.0, 0.0], &[2.0, 3.0]).unwrap();
    for x in [[0.0, 0.0], [4.0, -7.0]] {
        let hv = hvp_x(&f, &th, &x, &[1.0, -1.0]).unwrap();
        assert!((hv[0] - 2.0).abs() < 1e-14 && (hv[1] + 3.0).abs() < 1e-14);
    }
}

#[test]
fn single_component_mixture_matches_gaussian_score() {
    let g = EnergyFamily::gaussian(2).unwrap();
    let m = EnergyFamily::mixture_rbf(1, 2).unwrap();
    let tg = g.gaussian_params(&[0.5, -1.0], &[4.0, 4.0]).unwrap();
    let tm = m.mixture_params(&[1.0], &[0.5, -1.0], &[0.5]).unwrap();
    let x = [1.3, 0.2];
    let sg = score(&g, &tg, &x).unwrap();
    let sm = score(&m, &tm, &x).unwrap();
    assert!(rel_error(&sg, &sm) < 1e-14);
}

#[test]
fn mlp_zero_final_layer_bias_gradient_is_one() {
    let f = EnergyFamily::mlp(2, &[4]).unwrap();
    let mut rng = RngStream::new(3);
    let mut th = f.random_params(&mut rng).values().to_vec();
    let w1 = f.layout().iter().find(|b| b.name == "w1").unwrap().clone();
    th[w1.offset..w1.offset + w1.len].fill(0.0);
    let th = f.params(th).unwrap();
    for x in [[0.0, 0.0], [3.0, -2.0]] {
        let g = grad_theta_energy(&f, &th, &x).unwrap();
        assert_eq!(*g.last().unwrap(), 1.0);
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let mut rng = RngStream::new(2024);
    for f in families() {
        for _ in 0..100 {
            let th = f.random_params(&mut rng);
            let x = point(&mut rng, f.dim());
            let fd_x = finite_diff_gradient(|y| energy(&f, &th, y), &x, 1e-5).unwrap();
            let s = score(&f, &th, &x).unwrap();
            assert!(rel_error(&s.scaled(-1.0), &fd_x) < 1e-5, "{f} score");

            let fd_t =
                finite_diff_gradient(|t| energy(&f, &f.params(t.to_vec()).unwrap(), &x), th.values(), 1e-5).unwrap();
            let gt = grad_theta_energy(&f, &th, &x).unwrap();
            assert!(rel_error(&gt, &fd_t) < 1e-5, "{f} grad_theta");

            let v = point(&mut rng, f.dim());
            let h = 1e-5;
            let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
            let gp = score(&f, &th, &xp).unwrap();
            let gm = score(&f, &th, &xm).unwrap();
            let fd_h: Vec<f64> = gp.iter().zip(gm.iter()).map(|(a, b)| -(a - b) / (2.0 * h)).collect();
            let hv = hvp_x(&f, &th, &x, &v).unwrap();
            assert!(rel_error(&hv, &fd_h) < 1e-4, "{f} hvp");
        }
    }
}

#[test]
fn hvp_symmetric_linear_and_laplacian_is_sum_of_hvps() {
    let mut rng = RngStream::new(77);
    for f in families() {
        for _ in 0..20 {
            let th = f.random_params(&mut rng);
            let x = point(&mut rng, f.dim());
            let u = point(&mut rng, f.dim());
            let v = point(&mut rng, f.dim());
            let hu = hvp_x(&f, &th, &x, &u).unwrap();
            let hv = hvp_x(&f, &th, &x, &v).unwrap();
            assert!((v.iter().zip(hu.iter()).map(|(a, b)| a * b).sum::<f64>() - hv.dot(&u)).abs() < 1e-10);
            let uv: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
            let huv = hvp_x(&f, &th, &x, &uv).unwrap();
            for i in 0..f.dim() {
                assert!((huv[i] - (2.0 * hu[i] - 3.0 * hv[i])).abs() < 1e-10);
            }
            let mut sum = 0.0;
            for i in 0..f.dim() {
                sum += hvp_x(&f, &th, &x, &RealVector::basis(f.dim(), i)).unwrap()[i];
            }
            assert_eq!(laplacian_x(&f, &th, &x).unwrap(), sum, "{f}");
        }
    }
}

#[test]
fn mixed_derivatives_match_finite_differences() {
    let mut rng = RngStream::new(8);
    for f in [EnergyFamily::gaussian(3).unwrap(), EnergyFamily::poly1d(6).unwrap()] {
        let n = f.param_count();
        for _ in 0..30 {
            let th = f.random_params(&mut rng);
            let x = point(&mut rng, f.dim());
            let w = point(&mut rng, f.dim());
            let mut out = vec![0.0; n];

            assert!(f.mixed_dir_raw(th.values(), &x, &w, &mut out));
            let fd = finite_diff_gradient(
                |t| {
                    let mut g = vec![0.0; f.dim()];
                    f.grad_x_raw(t, &x, &mut g);
                    Ok(g.iter().zip(&w).map(|(a, b)| a * b).sum())
                },
                th.values(),
                1e-5,
            )
            .unwrap();
            assert!(rel_error(&out, &fd) < 1e-5, "{f} mixed_dir");

            assert!(f.mixed_quad_raw(th.values(), &x, &w, &mut out));
            let fd = finite_diff_gradient(
                |t| {
                    let mut g = vec![0.0; f.dim()];
                    f.hvp_raw(t, &x, &w, &mut g);
                    Ok(g.iter().zip(&w).map(|(a, b)| a * b).sum())
                },
                th.values(),
                1e-5,
            )
            .unwrap();
            assert!(rel_error(&out, &fd) < 1e-5, "{f} mixed_quad");

            assert!(f.mixed_laplacian_raw(th.values(), &x, &mut out));
            let fd = finite_diff_gradient(|t| Ok(f.laplacian_raw(t, &x)), th.values(), 1e-5).unwrap();
            assert!(rel_error(&out, &fd) < 1e-5, "{f} mixed_laplacian");
        }
    }
}

#[test]
fn poly_constant_shift_changes_only_energy() {
    let f = EnergyFamily::poly1d(4).unwrap();
    let th = f.poly_params(&[0.1, -0.4, 0.3, 0.2, 0.5]).unwrap();
    let mut shifted = th.values().to_vec();
    shifted[0] += 3.0;
    let sh = f.params(shifted).unwrap();
    let x = [0.7];
    assert!((energy(&f, &sh, &x).unwrap() - energy(&f, &th, &x).unwrap() - 3.0).abs() < 1e-12);
    assert_eq!(score(&f, &sh, &x).unwrap(), score(&f, &th, &x).unwrap());
    assert_eq!(hvp_x(&f, &sh, &x, &[1.0]).unwrap(), hvp_x(&f, &th, &x, &[1.0]).unwrap());
    assert_eq!(laplacian_x(&f, &sh, &x).unwrap(), laplacian_x(&f, &th, &x).unwrap());
}

#[test]
fn shape_errors() {
    let f = EnergyFamily::gaussian(2).unwrap();
    let th = f.gaussian_params(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
    assert!(energy(&f, &th, &[1.0]).is_err());
    let other = EnergyFamily::gaussian(1).unwrap();
    let th1 = other.gaussian_params(&[0.0], &[1.0]).unwrap();
    assert!(score(&f, &th1, &[0.0, 0.0]).is_err());
    assert!(hvp_x(&f, &th, &[0.0, 0.0], &[1.0]).is_err());
}

#[test]
fn kl_examples() {
    let a = GaussianDensity::isotropic(1, 0.0, 1.0).unwrap();
    let b = GaussianDensity::isotropic(1, 1.0, 1.0).unwrap();
    assert_eq!(gaussian_kl(&a, &a).unwrap(), 0.0);
    assert!((gaussian_kl(&a, &b).unwrap() - 0.5).abs() < 1e-15);
    assert!(GaussianDensity::new(vec![0.0], vec![0.0]).is_err());
    assert!(gaussian_kl(&a, &GaussianDensity::isotropic(2, 0.0, 1.0).unwrap()).is_err());
}

#[test]
fn fisher_examples_and_monte_carlo() {
    let p = GaussianDensity::isotropic(1, 0.0, 1.0).unwrap();
    assert_eq!(gaussian_fisher_divergence(&p, &p).unwrap(), 0.0);
    for m in [0.5, -2.0, 3.0] {
        let q = GaussianDensity::isotropic(1, m, 1.0).unwrap();
        assert!((gaussian_fisher_divergence(&p, &q).unwrap() - 0.5 * m * m).abs() < 1e-14);
    }

    let p = GaussianDensity::new(vec![0.3, -1.0], vec![0.5, 2.0]).unwrap();
    let q = GaussianDensity::new(vec![1.0, 0.0], vec![1.5, 0.8]).unwrap();
    let mut rng = RngStream::new(99);
    let n = 1_000_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let x = p.sample(&mut rng);
        let (sp, sq) = (p.score(&x), q.score(&x));
        let t = 0.5 * sp.iter().zip(&sq).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        s += t;
        s2 += t * t;
    }
    let mean = s / n as f64;
    let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
    let exact = gaussian_fisher_divergence(&p, &q).unwrap();
    assert!((mean - exact).abs() < 3.0 * se, "mc {mean} exact {exact} se {se}");
}

#[test]
fn fisher_grad_matches_fd_of_closed_form() {
    let f = EnergyFamily::gaussian(1).unwrap();
    let data = GaussianDensity::new(vec![0.7], vec![2.5]).unwrap();
    let th = f.params(vec![-0.2, 0.3]).unwrap();
    let g = fisher_grad_theta_gaussian1(&f, &th, &data).unwrap();
    let fd = finite_diff_gradient(
        |t| {
            let model = GaussianDensity::new(vec![t[0]], vec![(-2.0 * t[1]).exp()]).unwrap();
            gaussian_fisher_divergence(&data, &model)
        },
        th.values(),
        1e-6,
    )
    .unwrap();
    assert!(rel_error(&g, &fd) < 1e-8);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    fn density() -> impl Strategy<Value = GaussianDensity> {
        (prop::collection::vec(-3.0..3.0f64, 2), prop::collection::vec(0.05..5.0f64, 2))
            .prop_map(|(m, v)| GaussianDensity::new(m, v).unwrap())
    }

    proptest! {
        #[test]
        fn divergences_nonnegative(p in density(), q in density()) {
            prop_assert!(gaussian_kl(&p, &q).unwrap() >= -1e-12);
            prop_assert!(gaussian_fisher_divergence(&p, &q).unwrap() >= 0.0);
        }

        #[test]
        fn gaussian_precision_is_positive_definite(seed in any::<u64>()) {
            let f = EnergyFamily::gaussian(3).unwrap();
            let th = f.random_params(&mut RngStream::new(seed));
            let mut v = vec![0.0; 3];
            RngStream::new(seed ^ 1).fill_normal(&mut v);
            let hv = hvp_x(&f, &th, &[0.0; 3], &v).unwrap();
            prop_assert!(hv.dot(&v) > 0.0);
        }
    }
}
