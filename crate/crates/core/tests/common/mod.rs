#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use laserbound_core::support::{make_support, Support, Triple};
use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub support: Arc<Support>,
    pub weights: Vec<f64>,
    pub logvals: Vec<f64>,
}

pub fn triples_with_sum(d: i64) -> Vec<Triple> {
    let mut out = Vec::new();
    for a in 0..=d {
        for b in 0..=d - a {
            out.push(Triple::new(a, b, d - a - b));
        }
    }
    out
}

/// A random tight support of `min_len..=max_len` triples with a positive
/// distribution and log values in `[0, 3]`.
pub fn instance(seed: u64, min_len: usize, max_len: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(2..=5);
    let mut all = triples_with_sum(d);
    all.shuffle(&mut rng);
    let len = rng.gen_range(min_len..=max_len.min(all.len()));
    all.truncate(len);
    let support = Arc::new(make_support(all).unwrap());
    let mut weights: Vec<f64> = (0..support.len()).map(|_| rng.gen_range(-3.0f64..3.0).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let logvals = (0..support.len()).map(|_| rng.gen_range(0.0..3.0)).collect();
    Instance {
        support,
        weights,
        logvals,
    }
}

/// Maximum of `f` over the probability simplex of dimension `n`, by a grid
/// search that repeatedly zooms in on the best point.
pub fn simplex_grid_max(n: usize, f: impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let mut center = vec![1.0 / n as f64; n];
    let mut radius = 1.0;
    let mut best = (f(&center), center.clone());
    let steps = 24;
    for _ in 0..40 {
        let mut idx = vec![0usize; n - 1];
        loop {
            let mut p: Vec<f64> = (0..n - 1)
                .map(|i| center[i] + radius * (2.0 * idx[i] as f64 / steps as f64 - 1.0))
                .collect();
            let last = 1.0 - p.iter().sum::<f64>();
            p.push(last);
            if p.iter().all(|&x| x >= 0.0) {
                let v = f(&p);
                if v > best.0 {
                    best = (v, p);
                }
            }
            let mut k = 0;
            while k < n - 1 {
                idx[k] += 1;
                if idx[k] <= steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == n - 1 {
                break;
            }
        }
        center = best.1.clone();
        radius *= 0.5;
    }
    best
}

/// Number of terms of each component of the `n`-th tensor power, found by
/// expanding the product one factor at a time.
pub fn component_sizes(base: &[(Triple, u64)], n: u32) -> BTreeMap<Triple, BigUint> {
    let mut acc: BTreeMap<Triple, BigUint> = BTreeMap::new();
    acc.insert(Triple::new(0, 0, 0), BigUint::from(1u32));
    for _ in 0..n {
        let mut next: BTreeMap<Triple, BigUint> = BTreeMap::new();
        for (t, count) in &acc {
            for (s, w) in base {
                *next.entry(t.add(s)).or_default() += count * BigUint::from(*w);
            }
        }
        acc = next;
    }
    acc
}
