//! Independent reference implementations used by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha20Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Random permutation of `0..n` by Fisher-Yates.
pub fn random_perm(rng: &mut ChaCha20Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}

pub fn svm_objective(xs: &[Vec<f64>], ys: &[f64], theta: &[f64], mu: f64) -> f64 {
    let reg: f64 = theta.iter().map(|t| t * t).sum::<f64>() * mu / 2.0;
    let loss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let m: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
            (1.0 - y * m).max(0.0)
        })
        .sum();
    reg + loss
}

/// Full-batch subgradient descent on `mu/2 |theta|^2 + sum_i hinge(y_i theta.x_i)`
/// with step `1/(mu t)`, keeping the best iterate.
pub fn subgradient_svm(xs: &[Vec<f64>], ys: &[f64], mu: f64, iters: usize) -> (Vec<f64>, f64) {
    let dim = xs[0].len();
    let mut theta = vec![0.0; dim];
    let mut best = (theta.clone(), svm_objective(xs, ys, &theta, mu));
    for t in 1..=iters {
        let mut g: Vec<f64> = theta.iter().map(|v| mu * v).collect();
        for (x, y) in xs.iter().zip(ys) {
            let m: f64 = x.iter().zip(&theta).map(|(a, b)| a * b).sum();
            if y * m < 1.0 {
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi -= y * xi;
                }
            }
        }
        let step = 1.0 / (mu * t as f64);
        for (v, gi) in theta.iter_mut().zip(&g) {
            *v -= step * gi;
        }
        let obj = svm_objective(xs, ys, &theta, mu);
        if obj < best.1 {
            best = (theta.clone(), obj);
        }
    }
    best
}

/// The 200-sample, 5-dimensional toy problem with label noise.
pub fn toy_problem(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng(seed);
    let w = [1.0, -2.0, 0.5, 0.0, 1.5];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..200 {
        let x = gaussian_vec(&mut r, 5);
        let noise: f64 = StandardNormal.sample(&mut r);
        let key: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + noise;
        ys.push(if key >= 0.0 { 1.0 } else { -1.0 });
        xs.push(x);
    }
    (xs, ys)
}

/// Kendall-Tau by direct pair comparison of positions.
pub fn kendall_tau_direct(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len();
    let mut pos_p = vec![0; n];
    let mut pos_t = vec![0; n];
    for (i, &v) in pred.iter().enumerate() {
        pos_p[v] = i;
    }
    for (i, &v) in truth.iter().enumerate() {
        pos_t[v] = i;
    }
    let (mut c, mut d) = (0i64, 0i64);
    for a in 0..n {
        for b in a + 1..n {
            if (pos_p[a] < pos_p[b]) == (pos_t[a] < pos_t[b]) {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    (c - d) as f64 / (c + d) as f64
}

/// Every permutation of `0..n` by Heap's algorithm.
pub fn all_perms(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            let j = if k.is_multiple_of(2) { i } else { 0 };
            a.swap(j, k - 1);
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// True when `perm` lists items in the same relative order as `truth`
/// on every window of `lambda` consecutive positions.
pub fn windows_ordered(perm: &[usize], truth: &[usize], lambda: usize) -> bool {
    let mut rank = vec![0; truth.len()];
    for (r, &i) in truth.iter().enumerate() {
        rank[i] = r;
    }
    perm.windows(lambda)
        .all(|w| w.windows(2).all(|p| rank[p[0]] < rank[p[1]]))
}
