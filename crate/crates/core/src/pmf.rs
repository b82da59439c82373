//! Finite probability vectors with an explicit bound on the mass they miss.

use serde::{Deserialize, Serialize};

use crate::error::{InarError, Result};

/// Round-off below this magnitude is clamped to zero; anything more negative
/// is reported as an error.
pub const NEGATIVE_GUARD: f64 = 1e-12;

/// Probabilities on `0..=K` plus an upper bound on the mass not represented.
///
/// For a pmf truncated at `K` the missing mass is the mass beyond `K`. After
/// thinning or convolving truncated inputs it may sit anywhere, but the bound
/// still covers it, so `sum(probs) + tail_bound` stays within round-off of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePmf {
    probs: Vec<f64>,
    tail_bound: f64,
    origin: String,
}

impl DiscretePmf {
    /// Builds a pmf, clamping round-off negatives and trailing zeros.
    pub fn new(mut probs: Vec<f64>, tail_bound: f64, origin: impl Into<String>) -> Result<Self> {
        for (index, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(InarError::param(
                    "probs",
                    format!("entry {index} is not finite"),
                ));
            }
            if *p < 0.0 {
                if *p < -NEGATIVE_GUARD {
                    return Err(InarError::NegativeProbability { index, value: *p });
                }
                *p = 0.0;
            }
            if *p > 1.0 {
                if *p > 1.0 + NEGATIVE_GUARD {
                    return Err(InarError::param(
                        "probs",
                        format!("entry {index} exceeds 1"),
                    ));
                }
                *p = 1.0;
            }
        }
        while probs.len() > 1 && probs.last() == Some(&0.0) {
            probs.pop();
        }
        if probs.is_empty() {
            probs.push(0.0);
        }
        Ok(Self {
            probs,
            tail_bound: tail_bound.max(0.0),
            origin: origin.into(),
        })
    }

    pub fn point_mass(k: usize, origin: impl Into<String>) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Self {
            probs,
            tail_bound: 0.0,
            origin: origin.into(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn set_origin(&mut self, origin: impl Into<String>) {
        self.origin = origin.into();
    }

    /// Largest represented state `K`.
    pub fn max_k(&self) -> usize {
        self.probs.len() - 1
    }

    /// Probability of state `k`; zero outside the represented support.
    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `sum_k p_k z^k` by Horner's rule.
    pub fn pgf(&self, z: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, &p| acc * z + p)
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - mean).powi(2) * p)
            .sum()
    }

    /// `E[X(X-1)...(X-r+1)]` for `r = 1..=order`.
    pub fn factorial_moments(&self, order: usize) -> Vec<f64> {
        (1..=order)
            .map(|r| {
                self.probs
                    .iter()
                    .enumerate()
                    .skip(r)
                    .map(|(k, &p)| {
                        let falling: f64 = (0..r).map(|i| (k - i) as f64).product();
                        falling * p
                    })
                    .sum()
            })
            .collect()
    }

    /// Convolution with another pmf. Missing masses combine as
    /// `1 - (1 - a)(1 - b)`.
    pub fn convolve(&self, other: &DiscretePmf) -> DiscretePmf {
        let probs = convolve(&self.probs, &other.probs);
        let tail = 1.0 - (1.0 - self.tail_bound) * (1.0 - other.tail_bound);
        DiscretePmf {
            probs,
            tail_bound: tail.max(0.0),
            origin: format!("{} * {}", self.origin, other.origin),
        }
    }

    /// Drops the longest upper tail whose mass is at most `budget`, moving
    /// that mass into the tail bound.
    pub fn trim_tail(&mut self, budget: f64) {
        let mut dropped = 0.0;
        while self.probs.len() > 1 {
            let last = *self.probs.last().unwrap();
            if dropped + last > budget {
                break;
            }
            dropped += last;
            self.probs.pop();
        }
        self.tail_bound += dropped;
    }

    /// Total-variation distance to another pmf on the union of supports
    /// (missing mass is ignored).
    pub fn total_variation(&self, other: &DiscretePmf) -> f64 {
        let n = self.probs.len().max(other.probs.len());
        0.5 * (0..n)
            .map(|k| (self.prob(k) - other.prob(k)).abs())
            .sum::<f64>()
    }

    /// Largest entrywise difference over the union of supports.
    pub fn max_abs_diff(&self, other: &DiscretePmf) -> f64 {
        let n = self.probs.len().max(other.probs.len());
        (0..n)
            .map(|k| (self.prob(k) - other.prob(k)).abs())
            .fold(0.0, f64::max)
    }
}

/// Plain discrete convolution of two nonnegative vectors.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Binomial(n, p) probabilities on `0..=n`, built in log space so large `n`
/// does not underflow the first term.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        let mut v = vec![0.0; n + 1];
        v[0] = 1.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![0.0; n + 1];
        v[n] = 1.0;
        return v;
    }
    let log_odds = (p / (1.0 - p)).ln();
    let mut log_term = n as f64 * (1.0 - p).ln();
    let mut out = Vec::with_capacity(n + 1);
    for j in 0..=n {
        out.push(log_term.exp());
        if j < n {
            log_term += ((n - j) as f64 / (j + 1) as f64).ln() + log_odds;
        }
    }
    out
}

/// Law of `Binomial(X, a)` when `X` has the given probabilities: the pmf with
/// pgf `P(1 - a + a z)`.
pub fn binomial_thin(probs: &[f64], a: f64) -> Vec<f64> {
    let n = probs.len();
    let mut out = vec![0.0; n.max(1)];
    // row holds Binomial(k, a) and grows by one Bernoulli factor per step.
    let mut row = vec![1.0];
    for (k, &f) in probs.iter().enumerate() {
        if k > 0 {
            row.push(0.0);
            for j in (1..row.len()).rev() {
                row[j] = row[j] * (1.0 - a) + row[j - 1] * a;
            }
            row[0] *= 1.0 - a;
        }
        if f != 0.0 {
            for (j, &b) in row.iter().enumerate() {
                out[j] += f * b;
            }
        }
    }
    out
}
