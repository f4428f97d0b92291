use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

/// Sliding window of the last `m + 1` iterates and their images under `g`.
#[derive(Debug, Clone)]
pub struct AndersonWindow {
    depth: usize,
    cond_limit: f64,
    pairs: VecDeque<(Vec<f64>, Vec<f64>)>,
    last_alphas: Vec<f64>,
    fallbacks: usize,
}

/// Result of one window update.
#[derive(Debug, Clone, PartialEq)]
pub struct AndersonStep {
    pub next: Vec<f64>,
    /// True when the extrapolated combination was used.
    pub accelerated: bool,
}

impl AndersonWindow {
    pub fn new(depth: usize, cond_limit: f64) -> Self {
        Self { depth, cond_limit, pairs: VecDeque::new(), last_alphas: Vec::new(), fallbacks: 0 }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
        self.last_alphas.clear();
    }

    /// Combination weights of the last accelerated update (empty otherwise).
    pub fn last_alphas(&self) -> &[f64] {
        &self.last_alphas
    }

    /// Number of times the conditioning safeguard rejected the least-squares solve.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    /// Push `(x_k, g(x_k))` and return the next iterate.
    pub fn update(&mut self, x: &[f64], g: &[f64]) -> AndersonStep {
        self.last_alphas.clear();
        if self.depth == 0 {
            return AndersonStep { next: g.to_vec(), accelerated: false };
        }
        if self.pairs.front().is_some_and(|(x0, _)| x0.len() != x.len()) {
            self.pairs.clear();
        }
        self.pairs.push_back((x.to_vec(), g.to_vec()));
        while self.pairs.len() > self.depth + 1 || self.pairs.len() > x.len() + 1 {
            self.pairs.pop_front();
        }
        if self.pairs.len() < 2 {
            return AndersonStep { next: g.to_vec(), accelerated: false };
        }
        match self.solve_weights() {
            Some(alphas) => {
                let mut next = vec![0.0; g.len()];
                for (a, (_, gi)) in alphas.iter().zip(&self.pairs) {
                    for (n, v) in next.iter_mut().zip(gi) {
                        *n += a * v;
                    }
                }
                self.last_alphas = alphas;
                AndersonStep { next, accelerated: true }
            }
            None => {
                self.fallbacks += 1;
                self.pairs.pop_front();
                AndersonStep { next: g.to_vec(), accelerated: false }
            }
        }
    }

    /// `min ||F alpha||` subject to `sum alpha = 1`, via the unconstrained problem
    /// `min ||f_k - dF gamma||` over residual differences.
    fn solve_weights(&self) -> Option<Vec<f64>> {
        let n = self.pairs[0].0.len();
        let p = self.pairs.len() - 1;
        let res = |i: usize, r: usize| self.pairs[i].1[r] - self.pairs[i].0[r];
        let df = DMatrix::from_fn(n, p, |r, j| res(j + 1, r) - res(j, r));
        let fk = DVector::from_fn(n, |r, _| res(p, r));
        let qr = df.qr();
        let rmat = qr.r();
        let sv = rmat.clone().svd(false, false).singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 0.0) || !(smax / smin <= self.cond_limit) {
            return None;
        }
        let rhs = qr.q().tr_mul(&fk);
        let gamma = rmat.solve_upper_triangular(&rhs)?;
        if gamma.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut alphas = Vec::with_capacity(p + 1);
        alphas.push(gamma[0]);
        for j in 1..p {
            alphas.push(gamma[j] - gamma[j - 1]);
        }
        alphas.push(1.0 - gamma[p - 1]);
        Some(alphas)
    }
}
