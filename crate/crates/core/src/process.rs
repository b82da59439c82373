//! The INAR(1) chain `X_t = alpha o X_{t-1} + eps_t`: simulation, one-step
//! transition probabilities and k-step conditional laws.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{InarError, Result};
use crate::innovations::{check_tol, InnovationSpec, InverseCdf, Thinner};
use crate::marginal::{marginal_pmf, StationaryModel};
use crate::pmf::{binomial_pmf, DiscretePmf};

/// Tail tolerance of the marginal table used for stationary starts.
pub const STATIONARY_INIT_TOL: f64 = 1e-12;

/// Largest horizon accepted by [`k_step_conditional`].
pub const MAX_STEPS: u32 = 256;

/// Largest source state for which the closed-form transition formulas are
/// used; beyond it their powers of `1 - alpha` underflow.
const FAST_PATH_MAX: u64 = 500;

/// Starting point of a simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `X_0` drawn from the stationary marginal.
    Stationary,
    Fixed(u64),
}

impl FromStr for Init {
    type Err = InarError;

    /// Accepts `stationary` or `fixed:<n>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "stationary" {
            return Ok(Init::Stationary);
        }
        if let Some(n) = s.strip_prefix("fixed:") {
            return n
                .parse()
                .map(Init::Fixed)
                .map_err(|_| InarError::param("init", format!("bad fixed start {n:?}")));
        }
        Err(InarError::param(
            "init",
            format!("expected 'stationary' or 'fixed:<n>', got {s:?}"),
        ))
    }
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Init::Stationary => f.write_str("stationary"),
            Init::Fixed(n) => write!(f, "fixed:{n}"),
        }
    }
}

/// Values `X_1, ..., X_T` together with everything needed to regenerate them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePath {
    pub values: Vec<u64>,
    pub seed: u64,
    pub model: StationaryModel,
    pub init: Init,
}

/// Simulates `steps` values with a ChaCha8 stream seeded by `seed`.
///
/// Thinning is one binomial draw per step, so the stream of random numbers
/// (and hence the path for a given seed) differs from drawing `X_{t-1}`
/// separate Bernoulli variables, although the law is the same.
pub fn simulate(
    model: &StationaryModel,
    steps: usize,
    seed: u64,
    init: Init,
) -> Result<SamplePath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = simulate_with(model, steps, &mut rng, init)?;
    Ok(SamplePath {
        values,
        seed,
        model: model.clone(),
        init,
    })
}

/// Same as [`simulate`] but drawing from a caller-owned generator.
pub fn simulate_with<R: Rng + ?Sized>(
    model: &StationaryModel,
    steps: usize,
    rng: &mut R,
    init: Init,
) -> Result<Vec<u64>> {
    model.validate()?;
    if steps == 0 {
        return Err(InarError::param("steps", "must be at least 1"));
    }
    let sampler = model.innovation.sampler()?;
    let mut x = match init {
        Init::Fixed(x0) => x0,
        Init::Stationary => {
            let marginal = marginal_pmf(model, STATIONARY_INIT_TOL)?;
            InverseCdf::new(&marginal.pmf).sample(rng)
        }
    };
    let alpha = model.alpha;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let survivors = if x == 0 {
            0
        } else {
            Binomial::new(x, alpha)
                .expect("alpha validated in (0, 1)")
                .sample(rng)
        };
        x = survivors + sampler.sample(rng);
        out.push(x);
    }
    Ok(out)
}

/// One row `P(X_t = . | X_{t-1} = from)` of the transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionRow {
    pub from: u64,
    pub probs: DiscretePmf,
}

fn binom(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Bernoulli(p) innovations.
pub fn transition_prob_bernoulli(p: f64, alpha: f64, l: u64, k: u64) -> f64 {
    let ab = 1.0 - alpha;
    let pb = 1.0 - p;
    if k > l + 1 {
        0.0
    } else if k == l + 1 {
        p * alpha.powi(l as i32)
    } else if k == 0 {
        pb * ab.powi(l as i32)
    } else {
        alpha.powi(k as i32 - 1)
            * ab.powi((l - k) as i32)
            * (p * binom(l, k - 1) * ab + pb * binom(l, k) * alpha)
    }
}

/// Binomial(m, p) innovations.
pub fn transition_prob_binomial(m: u32, p: f64, alpha: f64, l: u64, k: u64) -> f64 {
    let m = m as u64;
    if k > l + m {
        return 0.0;
    }
    let ab = 1.0 - alpha;
    let pb = 1.0 - p;
    let ratio = alpha * pb / (p * ab);
    let lo = k.saturating_sub(m);
    let hi = l.min(k);
    let sum: f64 = (lo..=hi)
        .map(|j| binom(l, j) * binom(m, k - j) * ratio.powi(j as i32))
        .sum();
    p.powi(k as i32) * pb.powi(m as i32 - k as i32) * ab.powi(l as i32) * sum
}

/// Poissonian binomial innovations with pmf `q_r(m, q, c)`.
pub fn transition_prob_poissonian_binomial(
    m: u32,
    innovation: &[f64],
    alpha: f64,
    l: u64,
    k: u64,
) -> f64 {
    let m = m as u64;
    let lo = k.saturating_sub(m);
    let hi = l.min(k);
    if lo > hi {
        return 0.0;
    }
    (lo..=hi)
        .map(|j| {
            binom(l, j)
                * alpha.powi(j as i32)
                * (1.0 - alpha).powi((l - j) as i32)
                * innovation.get((k - j) as usize).copied().unwrap_or(0.0)
        })
        .sum()
}

/// Transition probabilities of one model, with the innovation pmf tabulated
/// once.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    model: StationaryModel,
    innovation: DiscretePmf,
}

impl TransitionKernel {
    pub fn new(model: &StationaryModel, tol: f64) -> Result<Self> {
        model.validate()?;
        check_tol(tol)?;
        Ok(Self {
            model: model.clone(),
            innovation: model.innovation.pmf(tol)?,
        })
    }

    pub fn model(&self) -> &StationaryModel {
        &self.model
    }

    pub fn innovation(&self) -> &DiscretePmf {
        &self.innovation
    }

    /// `sum_j C(l, j) alpha^j (1 - alpha)^(l - j) P(eps = k - j)`.
    pub fn prob_generic(&self, l: u64, k: u64) -> f64 {
        let survivors = binomial_pmf(l as usize, self.model.alpha);
        (0..=l.min(k))
            .map(|j| survivors[j as usize] * self.innovation.prob((k - j) as usize))
            .sum()
    }

    /// Uses the family's closed form where there is one.
    pub fn prob(&self, l: u64, k: u64) -> f64 {
        let alpha = self.model.alpha;
        if l > FAST_PATH_MAX {
            return self.prob_generic(l, k);
        }
        match self.model.innovation {
            InnovationSpec::Bernoulli { p } => transition_prob_bernoulli(p, alpha, l, k),
            InnovationSpec::Binomial { m, p } => transition_prob_binomial(m, p, alpha, l, k),
            InnovationSpec::PoissonianBinomial { m, .. } => {
                transition_prob_poissonian_binomial(m, self.innovation.probs(), alpha, l, k)
            }
            _ => self.prob_generic(l, k),
        }
    }

    /// Row over `k = 0..=l + K` where `K` is the innovation table length.
    /// The innovation's tail bound carries over.
    pub fn row(&self, l: u64) -> Result<TransitionRow> {
        let top = l + self.innovation.max_k() as u64;
        let probs: Vec<f64> = (0..=top).map(|k| self.prob(l, k)).collect();
        Ok(TransitionRow {
            from: l,
            probs: DiscretePmf::new(
                probs,
                self.innovation.tail_bound(),
                format!("transition from {l} under {}", self.model.label()),
            )?,
        })
    }
}

/// `P(X_t = k | X_{t-1} = l)` with the innovation tabulated to tail `1e-15`.
pub fn transition_prob(model: &StationaryModel, l: u64, k: u64) -> Result<f64> {
    Ok(TransitionKernel::new(model, 1e-15)?.prob(l, k))
}

/// Law of `X_{t+k}` given `X_t = x`: `Binomial(x, alpha^k)` convolved with
/// the thinned innovation pmfs for `i = 0..k-1`. Each of those is truncated
/// at `tol / k`.
pub fn k_step_conditional(
    model: &StationaryModel,
    x: u64,
    k: u32,
    tol: f64,
) -> Result<DiscretePmf> {
    model.validate()?;
    check_tol(tol)?;
    if k == 0 || k > MAX_STEPS {
        return Err(InarError::param(
            "steps",
            format!("must lie in 1..={MAX_STEPS}, got {k}"),
        ));
    }
    let share = tol / k as f64;
    let thinner = Thinner::new(&model.innovation, share / 2.0)?;
    let alpha = model.alpha;
    let survivors = binomial_pmf(x as usize, alpha.powi(k as i32));
    let mut acc = DiscretePmf::new(survivors, 0.0, "survivors")?;
    let mut a = 1.0;
    for _ in 0..k {
        let mut f = thinner.thinned(a)?;
        f.trim_tail(share / 2.0);
        acc = acc.convolve(&f);
        a *= alpha;
    }
    acc.set_origin(format!("{k}-step law from {x} under {}", model.label()));
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::innovations::poissonian_binomial_pmf;

    fn model(spec: InnovationSpec, alpha: f64) -> StationaryModel {
        StationaryModel::new(spec, alpha).unwrap()
    }

    #[test]
    fn init_parsing() {
        assert_eq!("stationary".parse::<Init>().unwrap(), Init::Stationary);
        assert_eq!("fixed:7".parse::<Init>().unwrap(), Init::Fixed(7));
        assert!("fixed:-1".parse::<Init>().is_err());
        assert!("warm".parse::<Init>().is_err());
        assert_eq!(Init::Fixed(3).to_string(), "fixed:3");
    }

    #[test]
    fn same_seed_same_path() {
        let m = model(
            InnovationSpec::Heine {
                lambda: 1.0,
                q: 0.5,
            },
            0.5,
        );
        let a = simulate(&m, 500, 42, Init::Stationary).unwrap();
        let b = simulate(&m, 500, 42, Init::Stationary).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, 500, 43, Init::Stationary).unwrap();
        assert_ne!(a.values, c.values);
        assert!(simulate(&m, 0, 1, Init::Stationary).is_err());
    }

    #[test]
    fn zero_population_leaves_only_innovation() {
        // Nothing survives from X_0 = 0, so X_1 is the first innovation draw.
        let m = model(InnovationSpec::Binomial { m: 4, p: 0.5 }, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let path = simulate_with(&m, 1, &mut rng, Init::Fixed(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let eps = m.innovation.sampler().unwrap().sample(&mut rng);
        assert_eq!(path[0], eps);
    }

    #[test]
    fn bernoulli_path_mean_and_lag_one_correlation() {
        let (p, alpha) = (0.2, 0.5);
        let m = model(InnovationSpec::Bernoulli { p }, alpha);
        let t = 200_000;
        let path = simulate(&m, t, 2024, Init::Stationary).unwrap().values;
        let x: Vec<f64> = path.iter().map(|&v| v as f64).collect();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let lag1 = x
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / (n - 1.0)
            / var;
        // For an AR(1)-type chain the variance of the sample mean inflates
        // by (1 + alpha) / (1 - alpha).
        let se_mean = (var / n * (1.0 + alpha) / (1.0 - alpha)).sqrt();
        assert!(
            (mean - p / (1.0 - alpha)).abs() < 4.0 * se_mean,
            "mean {mean}"
        );
        // Bartlett: Var(r_1) ~ (1 - alpha^2) / n.
        assert!(
            (lag1 - alpha).abs() < 4.0 * ((1.0 - alpha * alpha) / n).sqrt(),
            "lag1 {lag1}"
        );
    }

    #[test]
    fn bernoulli_fast_path_cases() {
        let (p, alpha) = (0.3, 0.6);
        for l in 0..6u64 {
            assert_eq!(transition_prob_bernoulli(p, alpha, l, l + 2), 0.0);
            assert!(
                (transition_prob_bernoulli(p, alpha, l, l + 1) - p * alpha.powi(l as i32)).abs()
                    < 1e-16
            );
        }
    }

    #[test]
    fn fast_paths_match_generic_sum() {
        let specs = [
            InnovationSpec::Bernoulli { p: 0.35 },
            InnovationSpec::Binomial { m: 3, p: 0.45 },
            InnovationSpec::Binomial { m: 1, p: 0.15 },
            InnovationSpec::PoissonianBinomial {
                m: 4,
                q: 0.7,
                c: 0.45,
            },
        ];
        for spec in specs {
            for alpha in [0.3, 0.9] {
                let kern = TransitionKernel::new(&model(spec.clone(), alpha), 1e-15).unwrap();
                for l in 0..=20 {
                    for k in 0..=20 {
                        let d = (kern.prob(l, k) - kern.prob_generic(l, k)).abs();
                        assert!(d < 1e-12, "{spec:?} l={l} k={k} diff {d}");
                    }
                }
            }
        }
    }

    #[test]
    fn rows_sum_to_one() {
        let specs = [
            InnovationSpec::Bernoulli { p: 0.35 },
            InnovationSpec::Logarithmic { p: 0.6 },
            InnovationSpec::Heine {
                lambda: 1.5,
                q: 0.7,
            },
            InnovationSpec::Poisson { lambda: 2.0 },
        ];
        for spec in specs {
            let kern = TransitionKernel::new(&model(spec, 0.6), 1e-12).unwrap();
            for l in [0, 1, 5, 20] {
                let row = kern.row(l).unwrap();
                let total = row.probs.total() + row.probs.tail_bound();
                assert!((total - 1.0).abs() < 1e-9);
                assert!((row.probs.total() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_row_is_innovation_pmf() {
        let m = model(InnovationSpec::Logarithmic { p: 0.4 }, 0.7);
        let kern = TransitionKernel::new(&m, 1e-14).unwrap();
        let row = kern.row(0).unwrap();
        assert!(row.probs.max_abs_diff(kern.innovation()) < 1e-16);
        let one = k_step_conditional(&m, 0, 1, 1e-12).unwrap();
        assert!(one.max_abs_diff(&m.innovation.pmf(1e-14).unwrap()) < 1e-12);
    }

    #[test]
    fn one_step_law_matches_transition_row() {
        let m = model(
            InnovationSpec::Heine {
                lambda: 1.0,
                q: 0.5,
            },
            0.4,
        );
        let kern = TransitionKernel::new(&m, 1e-14).unwrap();
        for x in [0, 3, 9] {
            let law = k_step_conditional(&m, x, 1, 1e-12).unwrap();
            let row = kern.row(x).unwrap();
            assert!(law.max_abs_diff(&row.probs) < 1e-10);
        }
    }

    #[test]
    fn chapman_kolmogorov() {
        let m = model(InnovationSpec::Logarithmic { p: 0.5 }, 0.6);
        let tol = 1e-13;
        for x in [0, 2, 7] {
            let two = k_step_conditional(&m, x, 2, tol).unwrap();
            let one = k_step_conditional(&m, x, 1, tol).unwrap();
            let mut composed = vec![0.0; two.probs().len() + 20];
            for (y, &py) in one.probs().iter().enumerate() {
                let next = k_step_conditional(&m, y as u64, 1, tol).unwrap();
                for (k, &pk) in next.probs().iter().enumerate() {
                    if k < composed.len() {
                        composed[k] += py * pk;
                    }
                }
            }
            let composed = DiscretePmf::new(composed, 0.0, "ck").unwrap();
            assert!(two.max_abs_diff(&composed) < 1e-8, "x={x}");
        }
    }

    #[test]
    fn bernoulli_k_step_is_binomial_times_poissonian_binomial() {
        let (p, alpha) = (0.3, 0.6);
        let m = model(InnovationSpec::Bernoulli { p }, alpha);
        for (x, k) in [(0u64, 1u32), (4, 3), (10, 6)] {
            let law = k_step_conditional(&m, x, k, 1e-12).unwrap();
            let want = crate::pmf::convolve(
                &binomial_pmf(x as usize, alpha.powi(k as i32)),
                &poissonian_binomial_pmf(k, alpha, p),
            );
            let want = DiscretePmf::new(want, 0.0, "closed").unwrap();
            assert!(law.max_abs_diff(&want) < 1e-12, "x={x} k={k}");
        }
    }

    #[test]
    fn k_step_forgets_the_start() {
        for p in [0.15, 0.3, 0.45] {
            for alpha in [0.3f64, 0.6, 0.9] {
                let m = model(InnovationSpec::Bernoulli { p }, alpha);
                let k = (0.001f64.ln() / alpha.ln()).ceil() as u32;
                let stationary = marginal_pmf(&m, 1e-12).unwrap().pmf;
                for x in [0, 5] {
                    let law = k_step_conditional(&m, x, k, 1e-10).unwrap();
                    assert!(
                        law.total_variation(&stationary) < 0.01,
                        "p={p} alpha={alpha} x={x}"
                    );
                }
            }
        }
        let m = model(InnovationSpec::Bernoulli { p: 0.2 }, 0.5);
        assert!(k_step_conditional(&m, 1, 0, 1e-10).is_err());
        assert!(k_step_conditional(&m, 1, MAX_STEPS + 1, 1e-10).is_err());
    }
}
