//! Brute-force oracles and identity checks for the closed forms.
//!
//! Every check returns a [`CheckReport`]; a report passes exactly when its
//! largest error is within its tolerance. The suites take one base
//! tolerance `t` and derive the others from it:
//!
//! | check                                   | tolerance  |
//! |-----------------------------------------|------------|
//! | functional equation, pmf oracles, k=2   | `t`        |
//! | Bernoulli tail, cumulant displays       | `t / 100`  |
//! | mean/variance transfer (relative)       | `10 t`     |
//! | PCPD weight sum, row sums               | `t / 10`   |
//! | transition fast paths, identities       | `t / 10^4` |
//!
//! At the default `t = 1e-8` these are the published acceptance thresholds.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::combinatorics::{factorial_cumulants_from_factorial_moments, MomentKind, MomentVector};
use crate::error::{InarError, Result};
use crate::innovations::{poissonian_binomial_pmf, thin, InnovationSpec};
use crate::marginal::{
    closed_form_factorial_cumulants, closed_form_factorial_moments, marginal_moments, marginal_pgf,
    marginal_pmf, marginal_pmf_bernoulli, marginal_pmf_generic, pcpd_representation, product_depth,
    tail_bernoulli, StationaryModel,
};
use crate::pmf::{convolve, DiscretePmf};
use crate::presets::presets;
use crate::process::{k_step_conditional, simulate, Init, TransitionKernel};

/// Pmfs feeding moment and tail oracles are tabulated this far out so that
/// the truncated mass, weighted by `k^r`, stays negligible.
const MOMENT_PMF_TOL: f64 = 1e-15;

/// Minimum depth of the Bernoulli convolution oracle.
const BERNOULLI_ORACLE_DEPTH: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// `(input point, error)` pairs.
    pub details: Vec<(String, f64)>,
}

impl CheckReport {
    /// A NaN error counts as infinitely large.
    pub fn new(name: impl Into<String>, tolerance: f64, details: Vec<(String, f64)>) -> Self {
        let max_abs_error = details
            .iter()
            .map(|(_, e)| if e.is_nan() { f64::INFINITY } else { e.abs() })
            .fold(0.0, f64::max);
        Self {
            name: name.into(),
            max_abs_error,
            tolerance,
            passed: max_abs_error <= tolerance,
            details,
        }
    }

    /// Report for a check that could not be carried out.
    pub fn failed(name: impl Into<String>, tolerance: f64, err: &InarError) -> Self {
        Self::new(
            name,
            tolerance,
            vec![(format!("error: {err}"), f64::INFINITY)],
        )
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn report_or_fail(
    name: String,
    tolerance: f64,
    details: Result<Vec<(String, f64)>>,
) -> CheckReport {
    match details {
        Ok(d) => CheckReport::new(name, tolerance, d),
        Err(e) => CheckReport::failed(name, tolerance, &e),
    }
}

/// `max_z |phi(z) - phi(1 - alpha + alpha z) Psi(z)|` with the truncated
/// product built at `tol`.
pub fn functional_equation_residual(
    model: &StationaryModel,
    grid: &[f64],
    tol: f64,
) -> Result<CheckReport> {
    let alpha = model.alpha;
    let mut details = Vec::with_capacity(grid.len());
    for &z in grid {
        let lhs = marginal_pgf(model, z, tol)?;
        let shifted = marginal_pgf(model, 1.0 - alpha + alpha * z, tol)?;
        let residual = lhs - shifted * model.innovation.pgf(z);
        details.push((format!("z={z}"), residual.abs()));
    }
    Ok(CheckReport::new(
        format!("functional_equation[{}]", model.label()),
        tol,
        details,
    ))
}

/// Convolution of exactly `depth` thinned pmfs, each obtained by binomial
/// thinning of the innovation pmf tabulated to tail `tol / depth`.
pub fn oracle_marginal(model: &StationaryModel, depth: usize, tol: f64) -> Result<DiscretePmf> {
    model.validate()?;
    if depth == 0 {
        return Err(InarError::param("depth", "must be at least 1"));
    }
    let base = model.innovation.pmf(tol / depth as f64)?;
    let mut acc = base.clone();
    let mut a = 1.0;
    for _ in 1..depth {
        a *= model.alpha;
        acc = acc.convolve(&thin(&base, a)?);
    }
    acc.set_origin(format!("depth-{depth} oracle for {}", model.label()));
    Ok(acc)
}

/// Falling-factorial sums `sum_k k (k-1) ... (k-r+1) p_k`.
pub fn factorial_moment_oracle(pmf: &DiscretePmf, order: usize) -> Result<MomentVector> {
    if order == 0 {
        return Err(InarError::param("order", "must be at least 1"));
    }
    MomentVector::new(MomentKind::FactorialMoments, pmf.factorial_moments(order))
}

/// Calls `f` on every `k`-subset of `0..n` (as a sorted slice).
fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for j in start..n {
            cur.push(j);
            go(j + 1, n, k, cur, f);
            cur.pop();
        }
    }
    go(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Product expansion `prod (1 - a_i) = 1 + sum_k (-1)^k e_k(a)` for random
/// `a_i`, and the q-binomial sum over index tuples, both by enumeration.
pub fn lemma2_identity_check(n: usize, alpha: f64) -> Result<CheckReport> {
    if !(2..=12).contains(&n) {
        return Err(InarError::param(
            "n",
            format!("must lie in 2..=12, got {n}"),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(InarError::param(
            "alpha",
            format!("must lie in (0, 1), got {alpha}"),
        ));
    }
    let mut details = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.99)).collect();
    let product: f64 = a.iter().map(|x| 1.0 - x).product();
    let mut expansion = 1.0;
    for k in 1..=n {
        let mut e_k = 0.0;
        for_each_subset(n, k, &mut |s| {
            e_k += s.iter().map(|&j| a[j]).product::<f64>()
        });
        expansion += if k % 2 == 1 { -e_k } else { e_k };
    }
    details.push(("product expansion".to_string(), product - expansion));

    for k in 1..=n {
        let mut brute = 0.0;
        for_each_subset(n, k, &mut |s| {
            brute += alpha.powi(s.iter().sum::<usize>() as i32)
        });
        let mut formula = alpha.powi((k * (k - 1) / 2) as i32);
        for l in 0..k {
            formula *= (1.0 - alpha.powi((n - l) as i32)) / (1.0 - alpha.powi(l as i32 + 1));
        }
        details.push((format!("k={k}"), brute - formula));
    }
    Ok(CheckReport::new(
        format!("lemma2[n={n}, alpha={alpha}]"),
        1e-12,
        details,
    ))
}

/// Product pgf, finite q-binomial expansion and alternating pmf of the
/// Poissonian binomial law must describe one distribution.
pub fn poissonian_binomial_pgf_identity(m: u32, q: f64, c: f64) -> Result<CheckReport> {
    InnovationSpec::PoissonianBinomial { m, q, c }.validate()?;
    if m > 12 {
        return Err(InarError::param(
            "m",
            format!("must be at most 12, got {m}"),
        ));
    }
    let mu = m as usize;
    let pmf = poissonian_binomial_pmf(m, q, c);
    // Coefficients of the product, by convolving the Bernoulli factors.
    let mut product_coeffs = vec![1.0];
    for j in 0..mu {
        let b = c * q.powi(j as i32);
        product_coeffs = convolve(&product_coeffs, &[1.0 - b, b]);
    }
    // W_k = c^k q^C(k,2) prod_{l<k} (1 - q^(m-l)) / (1 - q^(l+1))
    let mut w = vec![1.0; mu + 1];
    for k in 1..=mu {
        let l = k - 1;
        w[k] = w[k - 1] * c * q.powi(l as i32) * (1.0 - q.powi((mu - l) as i32))
            / (1.0 - q.powi(l as i32 + 1));
    }
    let mut details = Vec::new();
    for i in 0..=10 {
        let z = i as f64 / 10.0;
        let prod: f64 = (0..mu)
            .map(|j| 1.0 - c * q.powi(j as i32) * (1.0 - z))
            .product();
        let expansion: f64 = w
            .iter()
            .enumerate()
            .map(|(k, wk)| wk * (z - 1.0).powi(k as i32))
            .sum();
        let series = pmf.iter().rev().fold(0.0, |acc, p| acc * z + p);
        details.push((format!("product vs expansion z={z}"), prod - expansion));
        details.push((format!("product vs pmf z={z}"), prod - series));
    }
    for (r, (x, y)) in product_coeffs.iter().zip(&pmf).enumerate() {
        details.push((format!("coefficient r={r}"), x - y));
    }
    details.push(("pmf total".to_string(), pmf.iter().sum::<f64>() - 1.0));
    Ok(CheckReport::new(
        format!("poissonian_binomial_identity[m={m}, q={q}, c={c}]"),
        1e-12,
        details,
    ))
}

/// Statistical agreement of simulated paths with the analytic marginal.
///
/// The paths are pooled and cut into batches of `steps / 50`; batch means
/// give standard errors that account for autocorrelation. Errors are
/// reported as ratios to their allowance, so the tolerance is 1:
/// `|mean - mu| / (4 se)`, the same for the variance, `TV / 0.01`, and for
/// underdispersed models the estimated dispersion index (must stay below 1).
pub fn monte_carlo_check(
    model: &StationaryModel,
    steps: usize,
    seeds: &[u64],
) -> Result<CheckReport> {
    if steps < 100_000 {
        return Err(InarError::param(
            "steps",
            format!("need at least 100000, got {steps}"),
        ));
    }
    if seeds.is_empty() {
        return Err(InarError::param("seeds", "need at least one seed"));
    }
    let report = marginal_moments(model, 2)?;
    let marginal = marginal_pmf(model, 1e-12)?.pmf;
    let batches_per_path = 50;
    let batch = steps / batches_per_path;
    let mut batch_mean = Vec::new();
    let mut batch_square = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    let mut n = 0usize;
    for &seed in seeds {
        let path = simulate(model, steps, seed, Init::Stationary)?.values;
        for chunk in path.chunks_exact(batch) {
            let (mut s, mut s2) = (0.0, 0.0);
            for &x in chunk {
                let xf = x as f64;
                s += xf;
                s2 += xf * xf;
                let idx = x as usize;
                if idx >= counts.len() {
                    counts.resize(idx + 1, 0);
                }
                counts[idx] += 1;
            }
            batch_mean.push(s / batch as f64);
            batch_square.push(s2 / batch as f64);
            n += batch;
        }
    }
    let b = batch_mean.len() as f64;
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let se = |v: &[f64]| {
        let m = avg(v);
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1.0) / b).sqrt()
    };
    let mean = avg(&batch_mean);
    let second = avg(&batch_square);
    let variance = second - mean * mean;
    // Linearization of E[X^2] - E[X]^2 around the pooled mean.
    let g: Vec<f64> = batch_square
        .iter()
        .zip(&batch_mean)
        .map(|(s2, m)| s2 - 2.0 * mean * m)
        .collect();
    let se_mean = se(&batch_mean);
    let se_var = se(&g);
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let empirical = DiscretePmf::new(empirical, 0.0, "empirical")?;
    let tv = empirical.total_variation(&marginal);

    let mut details = vec![
        (
            format!("mean {mean:.6} vs {:.6}, se {se_mean:.2e}", report.mean),
            (mean - report.mean).abs() / (4.0 * se_mean),
        ),
        (
            format!(
                "variance {variance:.6} vs {:.6}, se {se_var:.2e}",
                report.variance
            ),
            (variance - report.variance).abs() / (4.0 * se_var),
        ),
        (format!("total variation {tv:.2e} vs 0.01"), tv / 0.01),
    ];
    if report.dispersion_index < 1.0 {
        let est = variance / mean;
        details.push((format!("dispersion index estimate {est:.6} below 1"), est));
    }
    Ok(CheckReport::new(
        format!("monte_carlo[{}, T={steps}, seeds={seeds:?}]", model.label()),
        1.0,
        details,
    ))
}

/// Which checks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    FunctionalEq,
    Oracles,
    Lemma2,
    MonteCarlo,
}

impl FromStr for Suite {
    type Err = InarError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "functional-eq" => Suite::FunctionalEq,
            "oracles" => Suite::Oracles,
            "lemma2" => Suite::Lemma2,
            "monte-carlo" => Suite::MonteCarlo,
            other => {
                return Err(InarError::param(
                    "suite",
                    format!("unknown suite {other:?}; expected all, functional-eq, oracles, lemma2 or monte-carlo"),
                ))
            }
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::All => "all",
            Suite::FunctionalEq => "functional-eq",
            Suite::Oracles => "oracles",
            Suite::Lemma2 => "lemma2",
            Suite::MonteCarlo => "monte-carlo",
        })
    }
}

pub const GRID_P: [f64; 3] = [0.15, 0.3, 0.45];
pub const GRID_ALPHA: [f64; 3] = [0.3, 0.6, 0.9];
pub const GRID_M: [u32; 2] = [1, 3];
pub const GRID_Q: [f64; 2] = [0.4, 0.7];
pub const GRID_LAMBDA: [f64; 2] = [0.5, 1.5];

/// Innovations of one family over the parameter grid.
pub fn family_grid(family: &str) -> Vec<InnovationSpec> {
    use InnovationSpec::*;
    let mut out = Vec::new();
    match family {
        "logarithmic" => out.extend(GRID_P.iter().map(|&p| Logarithmic { p })),
        "bernoulli" => out.extend(GRID_P.iter().map(|&p| Bernoulli { p })),
        "binomial" => {
            for &m in &GRID_M {
                out.extend(GRID_P.iter().map(|&p| Binomial { m, p }));
            }
        }
        "poissonian_binomial" => {
            for &m in &GRID_M {
                for &q in &GRID_Q {
                    out.extend(GRID_P.iter().map(|&c| PoissonianBinomial { m, q, c }));
                }
            }
        }
        "heine" => {
            for &lambda in &GRID_LAMBDA {
                out.extend(GRID_Q.iter().map(|&q| Heine { lambda, q }));
            }
        }
        "poisson" => out.extend(GRID_LAMBDA.iter().map(|&lambda| Poisson { lambda })),
        _ => {}
    }
    out
}

pub const FAMILIES: [&str; 6] = [
    "logarithmic",
    "bernoulli",
    "binomial",
    "poissonian_binomial",
    "heine",
    "poisson",
];

/// Every family crossed with every `alpha` of the grid.
pub fn default_grid() -> Vec<StationaryModel> {
    let mut out = Vec::new();
    for family in FAMILIES {
        for spec in family_grid(family) {
            for &alpha in &GRID_ALPHA {
                out.push(StationaryModel {
                    innovation: spec.clone(),
                    alpha,
                });
            }
        }
    }
    out
}

fn grid_models(families: &[&str]) -> Vec<StationaryModel> {
    default_grid()
        .into_iter()
        .filter(|m| families.iter().any(|f| family_of(&m.innovation) == *f))
        .collect()
}

fn family_of(spec: &InnovationSpec) -> &'static str {
    match spec {
        InnovationSpec::Logarithmic { .. } => "logarithmic",
        InnovationSpec::Bernoulli { .. } => "bernoulli",
        InnovationSpec::Binomial { .. } => "binomial",
        InnovationSpec::PoissonianBinomial { .. } => "poissonian_binomial",
        InnovationSpec::Heine { .. } => "heine",
        InnovationSpec::Poisson { .. } => "poisson",
        InnovationSpec::Convolution { .. } => "convolution",
    }
}

fn z_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Functional-equation residual for the whole grid and the convolution
/// presets.
pub fn functional_equation_checks(tol: f64) -> Vec<CheckReport> {
    let mut models = default_grid();
    models.extend(
        presets()
            .into_iter()
            .filter(|p| matches!(p.model.innovation, InnovationSpec::Convolution { .. }))
            .map(|p| p.model),
    );
    let grid = z_grid();
    models
        .iter()
        .map(|m| {
            functional_equation_residual(m, &grid, tol).unwrap_or_else(|e| {
                CheckReport::failed(format!("functional_equation[{}]", m.label()), tol, &e)
            })
        })
        .collect()
}

/// Bernoulli series against the convolution oracle, and the tail series
/// against one minus the cumulative sum.
pub fn bernoulli_series_checks(tol: f64) -> Vec<CheckReport> {
    // Both truncations stay far below the tolerances, so the comparisons
    // measure the formulas rather than where the tables were cut.
    let build = tol * 1e-4;
    let mut out = Vec::new();
    for &p in &GRID_P {
        for &alpha in &GRID_ALPHA {
            let model = StationaryModel {
                innovation: InnovationSpec::Bernoulli { p },
                alpha,
            };
            let depth = BERNOULLI_ORACLE_DEPTH.max(product_depth(&model, build));
            let series = marginal_pmf_bernoulli(p, alpha, MOMENT_PMF_TOL);
            let pmf = || -> Result<Vec<(String, f64)>> {
                let series = series.clone()?.pmf;
                let oracle = oracle_marginal(&model, depth, build)?;
                Ok((0..=15)
                    .map(|r| (format!("r={r}"), series.prob(r) - oracle.prob(r)))
                    .collect())
            };
            out.push(report_or_fail(
                format!("bernoulli_series_vs_oracle[p={p}, alpha={alpha}, depth={depth}]"),
                tol,
                pmf(),
            ));
            let tail = || -> Result<Vec<(String, f64)>> {
                let series = series.clone()?.pmf;
                let mut cdf = 0.0;
                let mut d = Vec::new();
                for r in 1..=15 {
                    cdf += series.prob(r - 1);
                    d.push((format!("r={r}"), tail_bernoulli(p, alpha, r)? - (1.0 - cdf)));
                }
                Ok(d)
            };
            out.push(report_or_fail(
                format!("bernoulli_tail[p={p}, alpha={alpha}]"),
                tol / 100.0,
                tail(),
            ));
        }
    }
    out
}

/// Family constructions against the fixed-depth oracle and against the
/// generic adaptive convolution.
pub fn closed_form_oracle_checks(tol: f64) -> Vec<CheckReport> {
    let build = tol / 100.0;
    let mut out = Vec::new();
    for model in grid_models(&["binomial", "poissonian_binomial", "heine", "logarithmic"]) {
        let run = || -> Result<Vec<(String, f64)>> {
            let closed = marginal_pmf(&model, build)?.pmf;
            let depth = product_depth(&model, build);
            let oracle = oracle_marginal(&model, depth, build)?;
            let generic = marginal_pmf_generic(&model, build)?.pmf;
            Ok(vec![
                (
                    format!("vs depth-{depth} oracle"),
                    closed.max_abs_diff(&oracle),
                ),
                (
                    "vs generic convolution".to_string(),
                    closed.max_abs_diff(&generic),
                ),
            ])
        };
        out.push(report_or_fail(
            format!("closed_form_vs_oracle[{}]", model.label()),
            tol,
            run(),
        ));
    }
    out
}

/// Cumulant displays of the Bernoulli marginal.
pub fn cumulant_display_checks(tol: f64) -> Vec<CheckReport> {
    let mut out = Vec::new();

    for model in grid_models(&["bernoulli"]) {
        let InnovationSpec::Bernoulli { p } = model.innovation else {
            unreachable!()
        };
        let alpha = model.alpha;
        let run = || -> Result<Vec<(String, f64)>> {
            let rep = marginal_moments(&model, 4)?;
            let d = |r: i32| p.powi(r) / (1.0 - alpha.powi(r));
            let want = [
                -d(2) + d(1),
                2.0 * d(3) - 3.0 * d(2) + d(1),
                -6.0 * d(4) + 12.0 * d(3) - 7.0 * d(2) + d(1),
            ];
            Ok((0..3)
                .map(|i| (format!("kappa_{}", i + 2), rep.cumulants[i + 1] - want[i]))
                .collect())
        };
        out.push(report_or_fail(
            format!("bernoulli_cumulants[{}]", model.label()),
            tol / 100.0,
            run(),
        ));
    }
    out
}

/// Closed-form factorial moments against the falling-factorial oracle.
pub fn factorial_moment_checks(tol: f64) -> Vec<CheckReport> {
    let mut out = Vec::new();
    for model in grid_models(&["bernoulli", "binomial", "poissonian_binomial"]) {
        let run = || -> Result<Vec<(String, f64)>> {
            let closed = closed_form_factorial_moments(&model, 5)?;
            // The untrimmed convolution keeps the far tail that dominates
            // the high orders when the mean is small.
            let depth = product_depth(&model, MOMENT_PMF_TOL);
            let pmf = oracle_marginal(&model, depth, MOMENT_PMF_TOL)?;
            let oracle = factorial_moment_oracle(&pmf, 5)?;
            Ok((1..=5)
                .map(|r| {
                    (
                        format!("r={r} relative"),
                        closed.get(r) / oracle.get(r) - 1.0,
                    )
                })
                .collect())
        };
        out.push(report_or_fail(
            format!("factorial_moments_vs_pmf[{}]", model.label()),
            tol,
            run(),
        ));
    }
    out
}

/// Closed-form factorial cumulants against the moment pipeline.
pub fn factorial_cumulant_checks(tol: f64) -> Vec<CheckReport> {
    let mut out = Vec::new();
    for model in grid_models(&["bernoulli", "binomial", "poissonian_binomial", "heine"]) {
        let run = || -> Result<Vec<(String, f64)>> {
            let closed = closed_form_factorial_cumulants(&model, 6)?;
            let pipe = marginal_moments(&model, 6)?;
            Ok((1..=6)
                .map(|r| {
                    let scale = closed.get(r).abs().max(1.0);
                    (
                        format!("r={r} scaled"),
                        (closed.get(r) - pipe.factorial_cumulants[r - 1]) / scale,
                    )
                })
                .collect())
        };
        out.push(report_or_fail(
            format!("factorial_cumulants_closed_vs_pipeline[{}]", model.label()),
            tol / 10.0,
            run(),
        ));
    }
    out
}

/// Mean and variance of the marginal from the innovation moments.
pub fn mean_variance_checks(tol: f64) -> Vec<CheckReport> {
    let mut out = Vec::new();
    let mut transfer_models = default_grid();
    transfer_models.extend(presets().into_iter().map(|p| p.model));
    for model in &transfer_models {
        let run = || -> Result<Vec<(String, f64)>> {
            let inn = model.innovation.mean_var_dispersion();
            let a = model.alpha;
            let mean = inn.mean / (1.0 - a);
            let var = (inn.variance + a * inn.mean) / (1.0 - a * a);
            let pmf = marginal_pmf(model, MOMENT_PMF_TOL)?.pmf;
            let rep = marginal_moments(model, 2)?;
            Ok(vec![
                ("pmf mean relative".to_string(), pmf.mean() / mean - 1.0),
                (
                    "pmf variance relative".to_string(),
                    pmf.variance() / var - 1.0,
                ),
                ("pipeline mean relative".to_string(), rep.mean / mean - 1.0),
                (
                    "pipeline variance relative".to_string(),
                    rep.variance / var - 1.0,
                ),
            ])
        };
        out.push(report_or_fail(
            format!("mean_variance_transfer[{}]", model.label()),
            10.0 * tol,
            run(),
        ));
    }
    out
}

/// Under-, equi- and overdispersion class of marginal and innovation.
pub fn dispersion_checks() -> Vec<CheckReport> {
    let mut out = Vec::new();
    let mut dispersion_models = default_grid();
    for p in [0.55, 0.7] {
        for &alpha in &GRID_ALPHA {
            dispersion_models.push(StationaryModel {
                innovation: InnovationSpec::Logarithmic { p },
                alpha,
            });
        }
    }
    for model in &dispersion_models {
        let run = || -> Result<Vec<(String, f64)>> {
            let inner = model.innovation.mean_var_dispersion().dispersion_index;
            let pmf = marginal_pmf(model, MOMENT_PMF_TOL)?.pmf;
            let outer = pmf.variance() / pmf.mean();
            let mismatch = if dispersion_class(inner) == dispersion_class(outer) {
                0.0
            } else {
                1.0
            };
            Ok(vec![(
                format!("innovation {inner:.6}, marginal {outer:.6}"),
                mismatch,
            )])
        };
        out.push(report_or_fail(
            format!("underdispersion_equivalence[{}]", model.label()),
            0.0,
            run(),
        ));
    }
    out
}

/// Thinned-cumulant series against the moment pipeline.
pub fn thinned_cumulant_checks(tol: f64) -> Vec<CheckReport> {
    let mut out = Vec::new();
    // Factorial cumulants of the marginal as the sum over i of those of the
    // thinned innovation pmfs.
    for model in grid_models(&["logarithmic", "bernoulli", "heine", "poisson"])
        .into_iter()
        .filter(|m| m.alpha == 0.6)
    {
        let run = || -> Result<Vec<(String, f64)>> {
            let order = 4;
            let depth = product_depth(&model, 1e-16);
            let base = model.innovation.pmf(1e-16)?;
            let mut sums = vec![0.0; order];
            let mut a = 1.0;
            for _ in 0..depth {
                let fm = factorial_moment_oracle(&thin(&base, a)?, order)?;
                let fc = factorial_cumulants_from_factorial_moments(&fm)?;
                for (s, v) in sums.iter_mut().zip(&fc.values) {
                    *s += v;
                }
                a *= model.alpha;
            }
            let pipe = marginal_moments(&model, order)?;
            Ok((0..order)
                .map(|r| {
                    let want = pipe.factorial_cumulants[r];
                    (
                        format!("r={}", r + 1),
                        (sums[r] - want) / want.abs().max(1.0),
                    )
                })
                .collect())
        };
        out.push(report_or_fail(
            format!("thinned_cumulant_series[{}]", model.label()),
            tol,
            run(),
        ));
    }
    out
}

/// -1, 0 or 1 for under-, equi- and overdispersion.
fn dispersion_class(index: f64) -> i8 {
    if index < 1.0 - 1e-9 {
        -1
    } else if index > 1.0 + 1e-9 {
        1
    } else {
        0
    }
}

/// Pseudo compound Poisson weights and pgf.
pub fn pcpd_checks(tol: f64) -> Vec<CheckReport> {
    let mut out = Vec::new();
    for &p in &[0.15, 0.3] {
        for &m in &GRID_M {
            for &alpha in &GRID_ALPHA {
                let model = StationaryModel {
                    innovation: InnovationSpec::Binomial { m, p },
                    alpha,
                };
                let rep = pcpd_representation(&model, tol * 1e-4);
                let sum = rep
                    .as_ref()
                    .map(|r| {
                        vec![(
                            "sum of weights - 1".to_string(),
                            r.weights.iter().sum::<f64>() - 1.0,
                        )]
                    })
                    .map_err(Clone::clone);
                out.push(report_or_fail(
                    format!("pcpd_weights[{}]", model.label()),
                    tol / 10.0,
                    sum,
                ));
                let pgf = rep.and_then(|r| {
                    [0.0, 0.5]
                        .iter()
                        .map(|&z| {
                            Ok((
                                format!("z={z}"),
                                r.pgf(z) - marginal_pgf(&model, z, tol * 1e-4)?,
                            ))
                        })
                        .collect()
                });
                out.push(report_or_fail(
                    format!("pcpd_pgf[{}]", model.label()),
                    tol,
                    pgf,
                ));
            }
        }
    }
    out
}

/// Transition fast paths against the generic sum.
pub fn fast_path_checks(tol: f64) -> Vec<CheckReport> {
    let mut out = Vec::new();
    for model in grid_models(&["bernoulli", "binomial", "poissonian_binomial"]) {
        let run = || -> Result<Vec<(String, f64)>> {
            let kern = TransitionKernel::new(&model, 1e-15)?;
            let mut worst = (String::new(), 0.0f64);
            for l in 0..=20 {
                for k in 0..=20 {
                    let d = (kern.prob(l, k) - kern.prob_generic(l, k)).abs();
                    if d >= worst.1 {
                        worst = (format!("l={l}, k={k}"), d);
                    }
                }
            }
            Ok(vec![worst])
        };
        out.push(report_or_fail(
            format!("transition_fast_path[{}]", model.label()),
            tol * 1e-4,
            run(),
        ));
    }
    out
}

/// Row totals plus the recorded tail bound.
pub fn row_sum_checks(tol: f64) -> Vec<CheckReport> {
    let mut out = Vec::new();
    let mut row_models = default_grid();
    row_models.extend(presets().into_iter().map(|p| p.model));
    for model in &row_models {
        let run = || -> Result<Vec<(String, f64)>> {
            let kern = TransitionKernel::new(model, 1e-12)?;
            [0u64, 1, 5, 20]
                .iter()
                .map(|&l| {
                    let row = kern.row(l)?;
                    Ok((
                        format!("l={l}"),
                        row.probs.total() + row.probs.tail_bound() - 1.0,
                    ))
                })
                .collect()
        };
        out.push(report_or_fail(
            format!("transition_row_sum[{}]", model.label()),
            tol / 10.0,
            run(),
        ));
    }
    out
}

/// Two-step law against the composition of one-step laws.
pub fn chapman_kolmogorov_checks(tol: f64) -> Vec<CheckReport> {
    let mut out = Vec::new();
    for model in default_grid().into_iter().filter(|m| m.alpha == 0.6) {
        let run = || -> Result<Vec<(String, f64)>> {
            let step_tol = 1e-13;
            let mut d = Vec::new();
            for x in [0u64, 3] {
                let two = k_step_conditional(&model, x, 2, step_tol)?;
                let one = k_step_conditional(&model, x, 1, step_tol)?;
                let mut composed = vec![0.0; two.probs().len()];
                for (y, &py) in one.probs().iter().enumerate() {
                    let next = k_step_conditional(&model, y as u64, 1, step_tol)?;
                    for (slot, &pk) in composed.iter_mut().zip(next.probs()) {
                        *slot += py * pk;
                    }
                }
                let composed = DiscretePmf::new(composed, 0.0, "composed")?;
                d.push((format!("x={x}"), two.max_abs_diff(&composed)));
            }
            Ok(d)
        };
        out.push(report_or_fail(
            format!("chapman_kolmogorov[{}]", model.label()),
            tol,
            run(),
        ));
    }
    out
}

/// Transition law after enough steps against the stationary marginal.
pub fn convergence_checks() -> Vec<CheckReport> {
    let mut out = Vec::new();
    for model in grid_models(&["bernoulli"]) {
        let run = || -> Result<Vec<(String, f64)>> {
            let k = (0.001f64.ln() / model.alpha.ln()).ceil() as u32;
            let stationary = marginal_pmf(&model, 1e-12)?.pmf;
            [0u64, 5]
                .iter()
                .map(|&x| {
                    let law = k_step_conditional(&model, x, k, 1e-10)?;
                    Ok((format!("x={x}, k={k}"), law.total_variation(&stationary)))
                })
                .collect()
        };
        out.push(report_or_fail(
            format!("k_step_convergence[{}]", model.label()),
            0.01,
            run(),
        ));
    }
    out
}

/// Every moment pipeline check.
pub fn moment_checks(tol: f64) -> Vec<CheckReport> {
    let mut out = cumulant_display_checks(tol);
    out.extend(factorial_moment_checks(tol));
    out.extend(factorial_cumulant_checks(tol));
    out.extend(mean_variance_checks(tol));
    out.extend(dispersion_checks());
    out.extend(thinned_cumulant_checks(tol));
    out
}

/// Every transition kernel check.
pub fn transition_checks(tol: f64) -> Vec<CheckReport> {
    let mut out = fast_path_checks(tol);
    out.extend(row_sum_checks(tol));
    out.extend(chapman_kolmogorov_checks(tol));
    out.extend(convergence_checks());
    out
}

/// Product expansion, q-binomial tuple sums, and the Poissonian binomial
/// triple identity.
pub fn lemma2_checks() -> Vec<CheckReport> {
    let mut out = Vec::new();
    for n in 2..=8 {
        for &alpha in &GRID_ALPHA {
            out.push(
                lemma2_identity_check(n, alpha)
                    .unwrap_or_else(|e| CheckReport::failed(format!("lemma2[n={n}]"), 1e-12, &e)),
            );
        }
    }
    for m in 1..=8 {
        for &q in &GRID_Q {
            for &c in &GRID_P {
                out.push(
                    poissonian_binomial_pgf_identity(m, q, c).unwrap_or_else(|e| {
                        CheckReport::failed(
                            format!("poissonian_binomial_identity[m={m}]"),
                            1e-12,
                            &e,
                        )
                    }),
                );
            }
        }
    }
    out
}

/// Path length used by the Monte Carlo suite.
pub const MONTE_CARLO_STEPS: usize = 1_000_000;

/// One path per preset from a stationary start.
pub fn monte_carlo_checks(steps: usize) -> Vec<CheckReport> {
    presets()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let seed = 20_000 + i as u64;
            monte_carlo_check(&p.model, steps, &[seed]).unwrap_or_else(|e| {
                CheckReport::failed(format!("monte_carlo[{}]", p.name), 1.0, &e)
            })
        })
        .collect()
}

pub fn run_suite(suite: Suite, tol: f64) -> Vec<CheckReport> {
    let mut out = Vec::new();
    if matches!(suite, Suite::All | Suite::FunctionalEq) {
        out.extend(functional_equation_checks(tol));
    }
    if matches!(suite, Suite::All | Suite::Oracles) {
        out.extend(bernoulli_series_checks(tol));
        out.extend(closed_form_oracle_checks(tol));
        out.extend(moment_checks(tol));
        out.extend(pcpd_checks(tol));
        out.extend(transition_checks(tol));
    }
    if matches!(suite, Suite::All | Suite::Lemma2) {
        out.extend(lemma2_checks());
    }
    if matches!(suite, Suite::All | Suite::MonteCarlo) {
        out.extend(monte_carlo_checks(MONTE_CARLO_STEPS));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern(p: f64, alpha: f64) -> StationaryModel {
        StationaryModel::new(InnovationSpec::Bernoulli { p }, alpha).unwrap()
    }

    #[test]
    fn report_pass_rule() {
        let r = CheckReport::new("x", 1e-3, vec![("a".into(), -2e-3), ("b".into(), 1e-4)]);
        assert_eq!(r.max_abs_error, 2e-3);
        assert!(!r.passed);
        let r = CheckReport::new("x", 1e-3, vec![("a".into(), f64::NAN)]);
        assert!(!r.passed);
        let r = CheckReport::new("x", 1e-3, vec![]);
        assert!(r.passed);
        let line = CheckReport::new("x", 1.0, vec![("a".into(), 0.5)]).to_json_line();
        assert!(line.starts_with("{\"name\":\"x\""), "{line}");
    }

    #[test]
    fn functional_equation_examples() {
        let grid = z_grid();
        let r = functional_equation_residual(&bern(0.3, 0.6), &grid, 1e-8).unwrap();
        assert!(r.passed);
        assert_eq!(r.details.last().unwrap().1, 0.0);

        let (lambda, alpha) = (1.3f64, 0.7f64);
        let pois = StationaryModel::new(InnovationSpec::Poisson { lambda }, alpha).unwrap();
        let r = functional_equation_residual(&pois, &grid, 1e-12).unwrap();
        assert!(r.max_abs_error < 1e-10);
        for &z in &grid {
            let exact = (lambda * (z - 1.0) / (1.0 - alpha)).exp();
            assert!((marginal_pgf(&pois, z, 1e-13).unwrap() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_depth_and_moments() {
        let m = bern(0.2, 0.5);
        let series = marginal_pmf_bernoulli(0.2, 0.5, 1e-13).unwrap().pmf;
        let oracle = oracle_marginal(&m, 40, 1e-13).unwrap();
        for r in 0..=15 {
            assert!((series.prob(r) - oracle.prob(r)).abs() < 1e-8);
        }
        for d in [5, 10, 20] {
            let a = oracle_marginal(&m, d, 1e-13).unwrap().mean();
            let b = oracle_marginal(&m, d + 1, 1e-13).unwrap().mean();
            assert!((b - a).abs() < 0.2 * 0.5f64.powi(d as i32) + 1e-12);
        }
        let fm = factorial_moment_oracle(&series, 2).unwrap();
        assert!((fm.get(2) - 0.10666666666666667).abs() < 1e-10);
        let zero = factorial_moment_oracle(&DiscretePmf::point_mass(0, "0"), 3).unwrap();
        assert_eq!(zero.values, vec![0.0; 3]);
        assert!(oracle_marginal(&m, 0, 1e-10).is_err());
    }

    #[test]
    fn heine_oracle_matches_limit_construction() {
        let m = StationaryModel::new(
            InnovationSpec::Heine {
                lambda: 1.0,
                q: 0.5,
            },
            0.5,
        )
        .unwrap();
        let tol = 1e-11;
        let closed = marginal_pmf(&m, tol).unwrap().pmf;
        let oracle = oracle_marginal(&m, product_depth(&m, tol), tol).unwrap();
        assert!(closed.max_abs_diff(&oracle) < 1e-8);
    }

    #[test]
    fn lemma2_examples() {
        let r = lemma2_identity_check(5, 0.5).unwrap();
        assert!(r.passed, "{r:?}");
        // k = 1 is the geometric sum, k = n a single tuple.
        let n = 6;
        let alpha: f64 = 0.3;
        let mut one = 0.0;
        for_each_subset(n, 1, &mut |s| one += alpha.powi(s[0] as i32));
        assert!((one - (1.0 - alpha.powi(n as i32)) / (1.0 - alpha)).abs() < 1e-15);
        let mut count = 0;
        for_each_subset(n, n, &mut |s| {
            count += 1;
            assert_eq!(s, &[0, 1, 2, 3, 4, 5]);
        });
        assert_eq!(count, 1);
        assert!(lemma2_identity_check(1, 0.5).is_err());
        assert!(lemma2_identity_check(13, 0.5).is_err());
    }

    #[test]
    fn poissonian_binomial_identity_examples() {
        assert!(
            poissonian_binomial_pgf_identity(3, 0.5, 0.4)
                .unwrap()
                .passed
        );
        let one = poissonian_binomial_pgf_identity(1, 0.5, 0.4).unwrap();
        assert!(one.passed);
        assert_eq!(poissonian_binomial_pmf(1, 0.5, 0.4), vec![0.6, 0.4]);
        assert!(poissonian_binomial_pgf_identity(13, 0.5, 0.4).is_err());
    }

    #[test]
    fn monte_carlo_bernoulli() {
        let r = monte_carlo_check(&bern(0.2, 0.5), 200_000, &[7]).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.details.len(), 4);
        assert!(monte_carlo_check(&bern(0.2, 0.5), 1000, &[7]).is_err());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in [
            Suite::All,
            Suite::FunctionalEq,
            Suite::Oracles,
            Suite::Lemma2,
            Suite::MonteCarlo,
        ] {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn grid_has_every_family() {
        let grid = default_grid();
        assert_eq!(grid.len(), 3 * (3 + 3 + 6 + 12 + 4 + 2));
        for f in FAMILIES {
            assert!(grid.iter().any(|m| family_of(&m.innovation) == f));
        }
    }
}
