//! Small labeled point sets for demos and tests.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::Dataset;
use crate::rng;

/// Isotropic Gaussian blobs, `per_blob` points around each center.
pub fn gaussian_blobs(centers: &[Vec<f64>], per_blob: usize, sigma: f64, seed: u64) -> Dataset {
    let mut r = rng::rng(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    let mut rows = Vec::with_capacity(centers.len() * per_blob);
    let mut labels = Vec::with_capacity(rows.capacity());
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            rows.push(center.iter().map(|&m| m + noise.sample(&mut r)).collect());
            labels.push(c);
        }
    }
    Dataset::from_rows("blobs", rows, Some(labels)).expect("blob rows are well formed")
}

/// Three blobs of 30 points on the corners of the unit simplex in three dimensions.
pub fn simplex_blobs(seed: u64) -> Dataset {
    let centers = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ];
    gaussian_blobs(&centers, 30, 0.02, seed).with_name("simplex-blobs")
}

/// Two interleaving half circles.
pub fn two_moons(per_moon: usize, noise: f64, seed: u64) -> Dataset {
    let mut r = rng::rng(seed);
    let jitter = Normal::new(0.0, noise).expect("noise must be finite");
    let mut rows = Vec::with_capacity(2 * per_moon);
    let mut labels = Vec::with_capacity(2 * per_moon);
    for i in 0..per_moon {
        let t = PI * i as f64 / (per_moon - 1).max(1) as f64;
        rows.push(vec![
            t.cos() + jitter.sample(&mut r),
            t.sin() + jitter.sample(&mut r),
        ]);
        labels.push(0);
    }
    for i in 0..per_moon {
        let t = PI * i as f64 / (per_moon - 1).max(1) as f64;
        rows.push(vec![
            1.0 - t.cos() + jitter.sample(&mut r),
            0.5 - t.sin() + jitter.sample(&mut r),
        ]);
        labels.push(1);
    }
    Dataset::from_rows("moons", rows, Some(labels)).expect("moon rows are well formed")
}

/// Concentric circles with radii `inner` and `outer`.
pub fn concentric_rings(per_ring: usize, inner: f64, outer: f64, noise: f64, seed: u64) -> Dataset {
    let mut r = rng::rng(seed);
    let jitter = Normal::new(0.0, noise).expect("noise must be finite");
    let mut rows = Vec::with_capacity(2 * per_ring);
    let mut labels = Vec::with_capacity(2 * per_ring);
    for (c, radius) in [inner, outer].into_iter().enumerate() {
        for i in 0..per_ring {
            let t = 2.0 * PI * i as f64 / per_ring as f64;
            rows.push(vec![
                radius * t.cos() + jitter.sample(&mut r),
                radius * t.sin() + jitter.sample(&mut r),
            ]);
            labels.push(c);
        }
    }
    Dataset::from_rows("rings", rows, Some(labels)).expect("ring rows are well formed")
}

/// `n` points with `f` features drawn from `classes` random Gaussian clusters
/// in the unit cube. Stands in for larger real datasets in timing runs.
pub fn mixture(n: usize, f: usize, classes: usize, spread: f64, seed: u64) -> Dataset {
    let mut r = rng::rng(seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..f).map(|_| unit.sample(&mut r)).collect())
        .collect();
    let jitter = Normal::new(0.0, spread).expect("spread must be finite");
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = r.random_range(0..classes);
        rows.push(centers[c].iter().map(|m| m + jitter.sample(&mut r)).collect());
        labels.push(c);
    }
    Dataset::from_rows("mixture", rows, Some(labels)).expect("mixture rows are well formed")
}
