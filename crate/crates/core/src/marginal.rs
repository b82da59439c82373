//! Stationary marginal law of an INAR(1) process built backwards from its
//! innovation: `phi(z) = prod_{i>=0} Psi(1 - alpha^i + alpha^i z)`.

use serde::{Deserialize, Serialize};

use crate::combinatorics::{
    cumulants_from_factorial_cumulants, factorial_cumulants_from_factorial_moments,
    factorial_moments_from_factorial_cumulants, moments_from_cumulants, MomentKind, MomentVector,
    STIRLING_MAX,
};
use crate::error::{InarError, Result};
use crate::innovations::{check_tol, heine_betas, heine_power_sum, InnovationSpec, Thinner};
use crate::pmf::DiscretePmf;

/// Series terms below this magnitude are dropped; the Bernoulli-marginal
/// series decay super-geometrically so this costs a handful of extra terms.
const SERIES_CUT: f64 = 1e-22;

const MAX_STATES: usize = 100_000;

/// An innovation law together with the thinning coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryModel {
    pub innovation: InnovationSpec,
    pub alpha: f64,
}

impl StationaryModel {
    pub fn new(innovation: InnovationSpec, alpha: f64) -> Result<Self> {
        let model = Self { innovation, alpha };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(InarError::param(
                "alpha",
                format!("must lie strictly between 0 and 1, got {}", self.alpha),
            ));
        }
        self.innovation.validate()
    }

    /// Parses `{"innovation": {...}, "alpha": ...}`. Syntax errors carry
    /// line and column; parameter errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        // serde_json's message already ends with "at line L column C".
        let model: StationaryModel =
            serde_json::from_str(text).map_err(|e| InarError::Config(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn label(&self) -> String {
        format!("{}, alpha={}", self.innovation.label(), self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GenericConvolution,
    BernoulliSeries,
    BinomialConvolution,
    PoBinConvolution,
    HeineLimit,
    LogMixture,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginalDistribution {
    pub pmf: DiscretePmf,
    pub model: StationaryModel,
    /// Number of factors (thinned pmfs, or Bernoulli marginals for the
    /// q-series families) that went into the construction.
    pub product_depth: usize,
    pub method: Method,
}

/// Number of product factors needed so that the omitted factors, whose
/// total mean is `Psi'(1) alpha^N / (1 - alpha)`, contribute at most `tol`.
pub fn product_depth(model: &StationaryModel, tol: f64) -> usize {
    depth_for_mean(model.innovation.mean(), model.alpha, tol)
}

fn depth_for_mean(mean: f64, alpha: f64, tol: f64) -> usize {
    let n = ((tol * (1.0 - alpha) / mean).ln() / alpha.ln()).ceil();
    if n.is_finite() && n > 8.0 {
        n as usize
    } else {
        8
    }
}

fn check_z(z: f64) -> Result<()> {
    if (0.0..=1.0).contains(&z) {
        Ok(())
    } else {
        Err(InarError::param(
            "z",
            format!("must lie in [0, 1], got {z}"),
        ))
    }
}

/// Truncated infinite product for the marginal pgf.
pub fn marginal_pgf(model: &StationaryModel, z: f64, tol: f64) -> Result<f64> {
    model.validate()?;
    check_z(z)?;
    if tol <= 0.0 || !tol.is_finite() {
        return Err(InarError::param("tol", "must be positive"));
    }
    let n = product_depth(model, tol);
    let mut a = 1.0;
    let mut prod = 1.0;
    for _ in 0..n {
        prod *= model.innovation.pgf(1.0 - a * (1.0 - z));
        a *= model.alpha;
    }
    Ok(prod)
}

/// Convolves the factors in order, trimming the running product so that
/// each step gives up at most `trim` of mass.
fn convolve_factors<I>(factors: I, trim: f64, origin: String) -> Result<DiscretePmf>
where
    I: IntoIterator<Item = Result<DiscretePmf>>,
{
    let mut acc = DiscretePmf::point_mass(0, origin.clone());
    for factor in factors {
        let mut factor = factor?;
        factor.trim_tail(trim);
        acc = acc.convolve(&factor);
        acc.trim_tail(trim);
        if acc.max_k() > MAX_STATES {
            return Err(InarError::Unsupported(format!(
                "marginal support exceeds {MAX_STATES} states"
            )));
        }
    }
    acc.set_origin(origin);
    Ok(acc)
}

/// `f^(0) * f^(1) * ... * f^(N-1)` with the thinned innovation pmfs.
pub fn marginal_pmf_generic(model: &StationaryModel, tol: f64) -> Result<MarginalDistribution> {
    model.validate()?;
    check_tol(tol)?;
    let n = product_depth(model, tol);
    let share = tol / (4.0 * n as f64);
    let thinner = Thinner::new(&model.innovation, share)?;
    let mut a = 1.0;
    let factors = (0..n).map(|_| {
        let f = thinner.thinned(a);
        a *= model.alpha;
        f
    });
    let pmf = convolve_factors(factors, share, format!("marginal of {}", model.label()))?;
    Ok(MarginalDistribution {
        pmf,
        model: model.clone(),
        product_depth: n,
        method: Method::GenericConvolution,
    })
}

fn check_open_unit(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(InarError::param(
            name,
            format!("must lie in (0, 1), got {v}"),
        ))
    }
}

/// `ln w_k` with `w_k = p^k alpha^C(k,2) / prod_{l=1..k} (1 - alpha^l)`.
fn bernoulli_log_weight(p: f64, alpha: f64, k: usize) -> f64 {
    let kf = k as f64;
    let mut log_w = kf * p.ln() + kf * (kf - 1.0) / 2.0 * alpha.ln();
    let mut al = 1.0;
    for _ in 1..=k {
        al *= alpha;
        log_w -= (-al).ln_1p();
    }
    log_w
}

/// `sum_{k>=r} (-1)^(k-r) B_k w_k` where `B_k = C(k, r)` for the point
/// probability and `C(k-1, r-1)` for the tail `P(X >= r)`.
fn bernoulli_series(p: f64, alpha: f64, r: usize, tail: bool) -> f64 {
    let mut term = bernoulli_log_weight(p, alpha, r).exp();
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut sign = 1.0;
    let mut k = r;
    let mut alpha_k = alpha.powi(r as i32);
    while term > 0.0 {
        // Neumaier summation; the series alternates.
        let x = sign * term;
        let t = sum + x;
        comp += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
        let binom_ratio = if tail {
            k as f64 / (k + 1 - r) as f64
        } else {
            (k + 1) as f64 / (k + 1 - r) as f64
        };
        let rho = binom_ratio * p * alpha_k / (1.0 - alpha_k * alpha);
        term *= rho;
        k += 1;
        alpha_k *= alpha;
        sign = -sign;
        if rho < 1.0 && term / (1.0 - rho) < SERIES_CUT {
            let x = sign * term;
            sum += x;
            break;
        }
    }
    sum + comp
}

/// `P(X >= r)` for the Bernoulli-innovation marginal, `r >= 1`.
pub fn tail_bernoulli(p: f64, alpha: f64, r: usize) -> Result<f64> {
    check_open_unit("p", p)?;
    check_open_unit("alpha", alpha)?;
    if r == 0 {
        return Err(InarError::param("r", "tail index must be at least 1"));
    }
    Ok(bernoulli_series(p, alpha, r, true).clamp(0.0, 1.0))
}

fn bernoulli_marginal_pmf(p: f64, alpha: f64, tol: f64) -> Result<DiscretePmf> {
    let mut probs = Vec::new();
    loop {
        let r = probs.len();
        probs.push(bernoulli_series(p, alpha, r, false));
        let tail = bernoulli_series(p, alpha, r + 1, true).max(0.0);
        if tail <= tol {
            return DiscretePmf::new(
                probs,
                tail,
                format!("bernoulli marginal(p={p}, alpha={alpha})"),
            );
        }
        if r > MAX_STATES {
            return Err(InarError::Unsupported(
                "bernoulli marginal did not converge".into(),
            ));
        }
    }
}

fn with_model(
    pmf: DiscretePmf,
    innovation: InnovationSpec,
    alpha: f64,
    product_depth: usize,
    method: Method,
) -> MarginalDistribution {
    MarginalDistribution {
        pmf,
        model: StationaryModel { innovation, alpha },
        product_depth,
        method,
    }
}

/// Bernoulli(p) innovations: the alternating series in `w_k`.
pub fn marginal_pmf_bernoulli(p: f64, alpha: f64, tol: f64) -> Result<MarginalDistribution> {
    let model = StationaryModel::new(InnovationSpec::Bernoulli { p }, alpha)?;
    check_tol(tol)?;
    let pmf = bernoulli_marginal_pmf(p, alpha, tol)?;
    Ok(with_model(
        pmf,
        model.innovation,
        alpha,
        1,
        Method::BernoulliSeries,
    ))
}

/// Binomial(m, p) innovations: m-fold self-convolution of the Bernoulli
/// marginal.
pub fn marginal_pmf_binomial(m: u32, p: f64, alpha: f64, tol: f64) -> Result<MarginalDistribution> {
    let model = StationaryModel::new(InnovationSpec::Binomial { m, p }, alpha)?;
    check_tol(tol)?;
    let share = tol / (4.0 * m as f64);
    let base = bernoulli_marginal_pmf(p, alpha, share)?;
    let pmf = convolve_factors(
        (0..m).map(|_| Ok(base.clone())),
        share,
        format!("marginal of {}", model.label()),
    )?;
    Ok(with_model(
        pmf,
        model.innovation,
        alpha,
        m as usize,
        Method::BinomialConvolution,
    ))
}

/// Poissonian binomial innovations: convolution of Bernoulli marginals with
/// parameters `c q^j`, `j < m`.
pub fn marginal_pmf_poissonian_binomial(
    m: u32,
    q: f64,
    c: f64,
    alpha: f64,
    tol: f64,
) -> Result<MarginalDistribution> {
    let model = StationaryModel::new(InnovationSpec::PoissonianBinomial { m, q, c }, alpha)?;
    check_tol(tol)?;
    let share = tol / (4.0 * m as f64);
    let pmf = convolve_factors(
        (0..m).map(|j| bernoulli_marginal_pmf(c * q.powi(j as i32), alpha, share)),
        share,
        format!("marginal of {}", model.label()),
    )?;
    Ok(with_model(
        pmf,
        model.innovation,
        alpha,
        m as usize,
        Method::PoBinConvolution,
    ))
}

/// Heine innovations: convolution of Bernoulli marginals with parameters
/// `beta_j = lambda q^j / (1 + lambda q^j)`, cut once the omitted factors
/// carry total mean below `tol / 2`.
pub fn marginal_pmf_heine(
    lambda: f64,
    q: f64,
    alpha: f64,
    tol: f64,
) -> Result<MarginalDistribution> {
    let model = StationaryModel::new(InnovationSpec::Heine { lambda, q }, alpha)?;
    check_tol(tol)?;
    let betas = heine_betas(lambda, q, tol * (1.0 - alpha) / 2.0);
    let share = tol / (8.0 * betas.len() as f64);
    let pmf = convolve_factors(
        betas
            .iter()
            .map(|&b| bernoulli_marginal_pmf(b, alpha, share)),
        share,
        format!("marginal of {}", model.label()),
    )?;
    let depth = betas.len();
    Ok(with_model(
        pmf,
        model.innovation,
        alpha,
        depth,
        Method::HeineLimit,
    ))
}

/// Logarithmic innovations: convolution of the two-point mixtures
/// `b_i delta_0 + (1 - b_i) Logarithmic(q_i)`.
pub fn marginal_pmf_logarithmic(p: f64, alpha: f64, tol: f64) -> Result<MarginalDistribution> {
    let model = StationaryModel::new(InnovationSpec::Logarithmic { p }, alpha)?;
    let mut out = marginal_pmf_generic(&model, tol)?;
    out.method = Method::LogMixture;
    Ok(out)
}

/// Picks the family-specific construction when there is one.
pub fn marginal_pmf(model: &StationaryModel, tol: f64) -> Result<MarginalDistribution> {
    model.validate()?;
    let alpha = model.alpha;
    match model.innovation {
        InnovationSpec::Bernoulli { p } => marginal_pmf_bernoulli(p, alpha, tol),
        InnovationSpec::Binomial { m, p } => marginal_pmf_binomial(m, p, alpha, tol),
        InnovationSpec::PoissonianBinomial { m, q, c } => {
            marginal_pmf_poissonian_binomial(m, q, c, alpha, tol)
        }
        InnovationSpec::Heine { lambda, q } => marginal_pmf_heine(lambda, q, alpha, tol),
        InnovationSpec::Logarithmic { p } => marginal_pmf_logarithmic(p, alpha, tol),
        InnovationSpec::Poisson { .. } | InnovationSpec::Convolution { .. } => {
            marginal_pmf_generic(model, tol)
        }
    }
}

/// Mean, variance, dispersion index and the four moment sequences of the
/// marginal, orders `1..=R`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub mean: f64,
    pub variance: f64,
    pub dispersion_index: f64,
    pub moments: Vec<f64>,
    pub factorial_moments: Vec<f64>,
    pub cumulants: Vec<f64>,
    pub factorial_cumulants: Vec<f64>,
}

fn check_order(order: usize) -> Result<()> {
    if (1..=STIRLING_MAX).contains(&order) {
        Ok(())
    } else {
        Err(InarError::param(
            "order",
            format!("must lie in 1..={STIRLING_MAX}, got {order}"),
        ))
    }
}

/// Factorial cumulants of the innovation divided by `1 - alpha^r`, then
/// converted to the other sequences. Orders below 2 still report the
/// variance from the second-order transfer.
pub fn marginal_moments(model: &StationaryModel, order: usize) -> Result<MomentReport> {
    model.validate()?;
    check_order(order)?;
    let r_max = order.max(2);
    let innov_fm = model.innovation.factorial_moments(r_max)?;
    let innov_fc = factorial_cumulants_from_factorial_moments(&innov_fm)?;
    let mut alpha_r = 1.0;
    let fc: Vec<f64> = innov_fc
        .values
        .iter()
        .map(|k| {
            alpha_r *= model.alpha;
            k / (1.0 - alpha_r)
        })
        .collect();
    report_from_factorial_cumulants(fc, order)
}

fn report_from_factorial_cumulants(fc: Vec<f64>, order: usize) -> Result<MomentReport> {
    let fc = MomentVector::new(MomentKind::FactorialCumulants, fc)?;
    let fm = factorial_moments_from_factorial_cumulants(&fc)?;
    let c = cumulants_from_factorial_cumulants(&fc)?;
    let m = moments_from_cumulants(&c)?;
    let mean = c.get(1);
    let variance = c.get(2);
    Ok(MomentReport {
        mean,
        variance,
        dispersion_index: variance / mean,
        moments: m.values[..order].to_vec(),
        factorial_moments: fm.values[..order].to_vec(),
        cumulants: c.values[..order].to_vec(),
        factorial_cumulants: fc.values[..order].to_vec(),
    })
}

/// `(r-1)!` as a float for `r >= 1`.
fn factorial_prev(r: usize) -> f64 {
    (1..r).map(|i| i as f64).product()
}

/// Closed-form factorial moments for the Bernoulli, binomial and
/// Poissonian binomial families.
pub fn closed_form_factorial_moments(
    model: &StationaryModel,
    order: usize,
) -> Result<MomentVector> {
    model.validate()?;
    check_order(order)?;
    let alpha = model.alpha;
    let values = match model.innovation {
        InnovationSpec::Bernoulli { p } => {
            let mut out = Vec::with_capacity(order);
            let mut v = 1.0;
            let mut alpha_pow = 1.0; // alpha^(r-1)
            for r in 1..=order {
                // mu_[r] = mu_[r-1] * r p alpha^(r-1) / (1 - alpha^r)
                v *= r as f64 * p * alpha_pow / (1.0 - alpha_pow * alpha);
                alpha_pow *= alpha;
                out.push(v);
            }
            out
        }
        InnovationSpec::Binomial { m, p } => {
            // d^r/dz^r ln(phi_bernoulli) at z = 1, scaled by m.
            let log_derivs: Vec<f64> = (1..=order)
                .map(|r| {
                    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                    sign * factorial_prev(r) * p.powi(r as i32) / (1.0 - alpha.powi(r as i32))
                })
                .collect();
            factorial_moment_recursion(m as f64, &log_derivs)
        }
        InnovationSpec::PoissonianBinomial { m, q, c } => {
            let log_derivs: Vec<f64> = (1..=order)
                .map(|r| {
                    let ri = r as i32;
                    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                    sign * factorial_prev(r) * (1.0 - q.powi(m as i32 * ri)) * c.powi(ri)
                        / ((1.0 - q.powi(ri)) * (1.0 - alpha.powi(ri)))
                })
                .collect();
            factorial_moment_recursion(1.0, &log_derivs)
        }
        _ => {
            return Err(InarError::Unsupported(format!(
                "no closed-form factorial moments for {}; use marginal_moments",
                model.innovation.label()
            )))
        }
    };
    MomentVector::new(MomentKind::FactorialMoments, values)
}

/// `mu_[r] = -m sum_{j<r} C(r-1, j) mu_[j] phi^(r-j)(1)` with `mu_[0] = 1`,
/// where `phi^(s)(1)` are the derivatives of the log-pgf passed in.
fn factorial_moment_recursion(m: f64, log_derivs: &[f64]) -> Vec<f64> {
    let order = log_derivs.len();
    let mut mu = vec![1.0; order + 1];
    for r in 1..=order {
        let mut binom = 1.0; // C(r-1, j)
        let mut acc = 0.0;
        for j in 0..r {
            if j > 0 {
                binom = binom * (r - j) as f64 / j as f64;
            }
            acc += binom * mu[j] * log_derivs[r - j - 1];
        }
        mu[r] = -m * acc;
    }
    mu.remove(0);
    mu
}

/// Closed-form factorial cumulants for the Bernoulli, binomial, Poissonian
/// binomial and Heine families.
pub fn closed_form_factorial_cumulants(
    model: &StationaryModel,
    order: usize,
) -> Result<MomentVector> {
    model.validate()?;
    check_order(order)?;
    let alpha = model.alpha;
    let coeff = |r: usize| -> f64 {
        let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
        sign * factorial_prev(r) / (1.0 - alpha.powi(r as i32))
    };
    let values: Vec<f64> = match model.innovation {
        InnovationSpec::Bernoulli { p } => {
            (1..=order).map(|r| coeff(r) * p.powi(r as i32)).collect()
        }
        InnovationSpec::Binomial { m, p } => (1..=order)
            .map(|r| m as f64 * coeff(r) * p.powi(r as i32))
            .collect(),
        InnovationSpec::PoissonianBinomial { m, q, c } => (1..=order)
            .map(|r| {
                let ri = r as i32;
                coeff(r) * (1.0 - q.powi(m as i32 * ri)) * c.powi(ri) / (1.0 - q.powi(ri))
            })
            .collect(),
        InnovationSpec::Heine { lambda, q } => (1..=order)
            .map(|r| coeff(r) * heine_power_sum(lambda, q, r as u32, 1e-14))
            .collect(),
        _ => {
            return Err(InarError::Unsupported(format!(
                "no closed-form factorial cumulants for {}; use marginal_moments",
                model.innovation.label()
            )))
        }
    };
    MomentVector::new(MomentKind::FactorialCumulants, values)
}

/// Marginal written as `exp(lambda (sum_n a_n z^n - 1))` with signed
/// weights `a_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcpdRepresentation {
    pub lambda: f64,
    /// `a_1, a_2, ...`
    pub weights: Vec<f64>,
    /// Bound on the absolute error in every reported quantity caused by
    /// truncating the series.
    pub tail_bound: f64,
}

impl PcpdRepresentation {
    pub fn pgf(&self, z: f64) -> f64 {
        let s = self.weights.iter().rev().fold(0.0, |acc, &a| acc * z + a) * z;
        (self.lambda * (s - 1.0)).exp()
    }
}

/// Pseudo compound Poisson form for Bernoulli and binomial innovations with
/// `p < 1/2`.
pub fn pcpd_representation(model: &StationaryModel, tol: f64) -> Result<PcpdRepresentation> {
    model.validate()?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(InarError::param("tol", "must be positive"));
    }
    let (m, p) = match model.innovation {
        InnovationSpec::Bernoulli { p } => (1.0, p),
        InnovationSpec::Binomial { m, p } => (m as f64, p),
        _ => {
            return Err(InarError::Unsupported(format!(
                "pseudo compound Poisson form is only available for bernoulli and binomial innovations, not {}",
                model.innovation.label()
            )))
        }
    };
    if p >= 0.5 {
        return Err(InarError::param(
            "p",
            format!("the pseudo compound Poisson series needs p < 1/2, got {p}"),
        ));
    }
    let alpha = model.alpha;
    // c_j = p^j / (j (1 - alpha^j)); the weights sum C(j, n) c_j over j >= n
    // and C(j, n) <= 2^j, so the omitted part is below
    // (2p)^(J+1) / ((J+1) (1 - alpha) (1 - 2p)).
    let mut c = Vec::new();
    let mut pj = 1.0;
    let mut aj = 1.0;
    loop {
        let j = c.len() + 1;
        pj *= p;
        aj *= alpha;
        c.push(pj / (j as f64 * (1.0 - aj)));
        let bound =
            (2.0 * p).powi(j as i32 + 1) / ((j + 1) as f64 * (1.0 - alpha) * (1.0 - 2.0 * p));
        if bound < tol * 1e-3 || j >= 5000 {
            break;
        }
    }
    let big_j = c.len();
    let lambda_one: f64 = c.iter().rev().sum();
    let mut weights = Vec::with_capacity(big_j);
    for n in 1..=big_j {
        // t = C(j, n) p^j / (j (1 - alpha^j)) built from C(j, n) p^j
        // incrementally in j.
        let mut binom_p = p.powi(n as i32);
        let mut acc = 0.0;
        for j in n..=big_j {
            if j > n {
                binom_p *= j as f64 / (j - n) as f64 * p;
            }
            acc += binom_p / (j as f64 * (1.0 - alpha.powi(j as i32)));
        }
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        weights.push(sign * acc / lambda_one);
    }
    let omitted =
        (2.0 * p).powi(big_j as i32 + 1) / ((big_j + 1) as f64 * (1.0 - alpha) * (1.0 - 2.0 * p));
    Ok(PcpdRepresentation {
        lambda: m * lambda_one,
        weights,
        tail_bound: omitted / lambda_one,
    })
}
