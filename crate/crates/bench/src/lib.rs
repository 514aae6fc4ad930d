//! Shared fixtures for the criterion benchmarks in `benches/`.

use ebm_core::energy::{EnergyFamily, GaussianDensity, ParamVector};
use ebm_core::{RealVector, RngStream};

/// `n` draws from `N(0, I_d)` on a fixed stream.
pub fn normal_batch(n: usize, d: usize) -> Vec<RealVector> {
    GaussianDensity::isotropic(d, 0.0, 1.0).expect("valid density").sample_n(&mut RngStream::new(11), n)
}

/// One instance of each energy family at input dimension `d` (the
/// polynomial is always 1-D), with random parameters.
pub fn families(d: usize) -> Vec<(&'static str, EnergyFamily, ParamVector)> {
    let mut rng = RngStream::new(5);
    let list = [
        ("gaussian", EnergyFamily::gaussian(d)),
        ("mixture", EnergyFamily::mixture_rbf(4, d)),
        ("poly", EnergyFamily::poly1d(4)),
        ("mlp", EnergyFamily::mlp(d, &[32, 32])),
    ];
    list.into_iter()
        .map(|(name, f)| {
            let f = f.expect("valid family");
            let th = f.random_params(&mut rng);
            (name, f, th)
        })
        .collect()
}
