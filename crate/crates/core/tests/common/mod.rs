#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netvar_core::{Excitation, NetworkModel, NoiseShape, RationalTransfer};

pub fn first_order(b: f64, pole: f64) -> RationalTransfer {
    RationalTransfer::new(vec![b], vec![1.0, -pole], 1).unwrap()
}

/// The four-node case-study network with `G_24 = gain q^-1`.
pub fn case_study(gain: f64, two_param_g43: bool) -> NetworkModel {
    let mut m = NetworkModel::new(4);
    m.set_module(1, 2, first_order(0.35, 0.3)).unwrap();
    m.set_module(2, 1, first_order(0.32, 0.6)).unwrap();
    m.set_module(3, 1, first_order(0.6, 0.2)).unwrap();
    m.set_module(2, 3, RationalTransfer::new(vec![0.3], vec![1.0, -0.5], 2).unwrap()).unwrap();
    m.set_module(2, 4, RationalTransfer::delayed_gain(gain, 1)).unwrap();
    let g43 = if two_param_g43 {
        RationalTransfer::new(vec![0.8, -0.4], vec![1.0], 1).unwrap()
    } else {
        RationalTransfer::delayed_gain(0.8, 1)
    };
    m.set_module(4, 3, g43).unwrap();
    for j in 1..=4 {
        m.set_noise(j, NoiseShape::white(0.1).unwrap()).unwrap();
    }
    m.set_excitation(1, Excitation::White { power: 0.1 }).unwrap();
    m.set_excitation(3, Excitation::White { power: 0.1 }).unwrap();
    m
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
