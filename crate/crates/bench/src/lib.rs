//! Shared fixtures for the benchmarks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pgp_core::{KernelParams, PairIndex, PatientHistory, PopulationModel, TrainingSet, Variant};

/// `n` training rows of a smooth 4-output function of `d` inputs plus noise.
pub fn training_set(n: usize, d: usize, seed: u64) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
    let y = DMatrix::from_fn(n, 4, |i, c| {
        let s: f64 = x.row(i).iter().sum();
        (s * (c + 1) as f64 * 0.3).sin() + 0.1 * rng.random_range(-1.0..1.0)
    });
    let index = (0..n).map(|i| PairIndex { patient_id: format!("p{}", i / 8), visit: i % 8 }).collect();
    TrainingSet::new(Variant::Standard, x, y, index).expect("finite fixture")
}

pub fn model(n: usize, d: usize) -> PopulationModel {
    let params = KernelParams::new(1.0, (d as f64).sqrt(), 0.05).expect("positive parameters");
    PopulationModel::new(training_set(n, d, 1), params).expect("factorizable fixture")
}

pub fn history(len: usize, d: usize, seed: u64) -> PatientHistory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = PatientHistory::new("bench");
    for v in 0..len {
        let x = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        h.push(v, x, y).expect("increasing visits");
    }
    h
}
