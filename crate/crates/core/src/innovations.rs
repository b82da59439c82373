//! Innovation laws: logarithmic, Bernoulli, binomial, Poissonian binomial,
//! Heine, Poisson and finite convolutions of these.
//!
//! Every family exposes its pmf (truncated with an analytic tail bound), its
//! pgf, closed-form mean and variance, factorial moments, the pmf after
//! binomial thinning, and a sampler.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::combinatorics::{MomentKind, MomentVector};
use crate::error::{InarError, Result};
use crate::pmf::{binomial_pmf, binomial_thin, DiscretePmf};

/// Coarsest truncation tolerance accepted by pmf builders.
pub const MAX_TOL: f64 = 1e-6;

/// Tolerance used internally for series that only feed closed forms.
pub(crate) const SERIES_EPS: f64 = 1e-17;

/// Hard cap on the support of any truncated pmf.
const MAX_SUPPORT: usize = 200_000;

/// Innovation distribution. The JSON encoding is internally tagged by
/// `family`, e.g. `{"family":"heine","lambda":1.0,"q":0.5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnovationSpec {
    Logarithmic { p: f64 },
    Bernoulli { p: f64 },
    Binomial { m: u32, p: f64 },
    PoissonianBinomial { m: u32, q: f64, c: f64 },
    Heine { lambda: f64, q: f64 },
    Poisson { lambda: f64 },
    Convolution { parts: Vec<InnovationSpec> },
}

/// Mean, variance and variance-to-mean ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub mean: f64,
    pub variance: f64,
    pub dispersion_index: f64,
}

impl Dispersion {
    pub fn new(mean: f64, variance: f64) -> Self {
        Self {
            mean,
            variance,
            dispersion_index: variance / mean,
        }
    }
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

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(InarError::param(
            name,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 && tol <= MAX_TOL {
        Ok(())
    } else {
        Err(InarError::param(
            "tol",
            format!("must lie in (0, {MAX_TOL:e}], got {tol:e}"),
        ))
    }
}

/// `beta_j = lambda q^j / (1 + lambda q^j)` for `j = 0..J`, with `J` the
/// first index where `lambda q^J / (1 - q)` (a bound on the sum of the
/// omitted terms) falls below `eps`.
pub fn heine_betas(lambda: f64, q: f64, eps: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut lq = lambda;
    while lq / (1.0 - q) >= eps || out.is_empty() {
        out.push(lq / (1.0 + lq));
        lq *= q;
    }
    out
}

/// `B_n = sum_j beta_j^n`, summed until the omitted part is below `eps`.
pub fn heine_power_sum(lambda: f64, q: f64, n: u32, eps: f64) -> f64 {
    let qn = q.powi(n as i32);
    let mut lq = lambda;
    let mut sum = 0.0;
    let mut j = 0usize;
    // Omitted terms satisfy beta_j^n <= (lambda q^j)^n.
    loop {
        let beta = lq / (1.0 + lq);
        sum += beta.powi(n as i32);
        lq *= q;
        j += 1;
        let bound = (lq.powi(n as i32)) / (1.0 - qn);
        if bound < eps || j > 100_000 {
            break;
        }
    }
    sum
}

/// Poissonian binomial probabilities on `0..=m` by the alternating q-series
/// `sum_{k=r..m} (-1)^(k-r) C(k,r) c^k q^C(k,2) [m k]_q`.
pub fn poissonian_binomial_pmf(m: u32, q: f64, c: f64) -> Vec<f64> {
    let m = m as usize;
    // w_k = c^k q^C(k,2) prod_{l<k} (1 - q^(m-l)) / (1 - q^(l+1))
    let mut w = vec![1.0; m + 1];
    for k in 1..=m {
        let l = k - 1;
        w[k] = w[k - 1] * c * q.powi(l as i32) * (1.0 - q.powi((m - l) as i32))
            / (1.0 - q.powi((l + 1) as i32));
    }
    let mut out = vec![0.0; m + 1];
    for (r, slot) in out.iter_mut().enumerate() {
        let mut binom = 1.0; // C(k, r) starting at k = r
        let mut acc = 0.0;
        for (k, &wk) in w.iter().enumerate().skip(r) {
            if k > r {
                binom = binom * k as f64 / (k - r) as f64;
            }
            let sign = if (k - r) % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * wk;
        }
        *slot = acc;
    }
    out
}

/// Thinned logarithmic innovations as a two-point mixture: returns
/// `(q_a, b_a)` so that the thinned pmf is `b_a` at zero plus
/// `(1 - b_a)` Logarithmic(`q_a`).
pub fn log_thinning_params(p: f64, a: f64) -> (f64, f64) {
    let qa = p * a / (1.0 - p * (1.0 - a));
    let b = 1.0 - (-qa).ln_1p() / (-p).ln_1p();
    (qa, b)
}

/// Truncated logarithmic pmf scaled so that `f_r = scale q^r / r`.
fn log_series(q: f64, scale: f64, tol: f64, zero_mass: f64, origin: String) -> Result<DiscretePmf> {
    let mut probs = vec![zero_mass];
    let mut qr = 1.0;
    let mut r = 1usize;
    loop {
        qr *= q;
        probs.push(scale * qr / r as f64);
        // sum_{s>r} scale q^s / s <= scale q^(r+1) / ((r+1)(1-q))
        let tail = scale * qr * q / ((r + 1) as f64 * (1.0 - q));
        if tail <= tol {
            return DiscretePmf::new(probs, tail, origin);
        }
        r += 1;
        if r > MAX_SUPPORT {
            return Err(InarError::param(
                "p",
                "logarithmic tail too heavy to truncate",
            ));
        }
    }
}

fn poisson_pmf(lambda: f64, tol: f64, origin: String) -> Result<DiscretePmf> {
    let mut probs = Vec::new();
    let mut log_f = -lambda;
    let mut k = 0usize;
    loop {
        let f = log_f.exp();
        probs.push(f);
        let next = log_f + lambda.ln() - ((k + 1) as f64).ln();
        let ratio = lambda / (k + 2) as f64;
        if ratio < 1.0 {
            let tail = next.exp() / (1.0 - ratio);
            if tail <= tol {
                return DiscretePmf::new(probs, tail, origin);
            }
        }
        log_f = next;
        k += 1;
        if k > MAX_SUPPORT {
            return Err(InarError::param("lambda", "too large to tabulate"));
        }
    }
}

fn heine_pmf(lambda: f64, q: f64, tol: f64, origin: String) -> Result<DiscretePmf> {
    // f_0 = prod_j (1 + lambda q^j)^(-1)
    let mut log_f0 = 0.0;
    let mut lq = lambda;
    while lq / (1.0 - q) >= SERIES_EPS {
        log_f0 -= lq.ln_1p();
        lq *= q;
    }
    let mut f = log_f0.exp();
    let mut probs = vec![f];
    let mut qr = 1.0; // q^r
    let mut r = 0usize;
    loop {
        // f_{r+1} / f_r = lambda q^r / (1 - q^(r+1)), decreasing in r
        let ratio = lambda * qr / (1.0 - qr * q);
        if ratio < 1.0 {
            let tail = f * ratio / (1.0 - ratio);
            if tail <= tol {
                return DiscretePmf::new(probs, tail, origin);
            }
        }
        f *= ratio;
        probs.push(f);
        qr *= q;
        r += 1;
        if r > MAX_SUPPORT {
            return Err(InarError::param("lambda", "too large to tabulate"));
        }
    }
}

impl InnovationSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationSpec::Logarithmic { p } | InnovationSpec::Bernoulli { p } => {
                check_open_unit("p", p)
            }
            InnovationSpec::Binomial { m, p } => {
                if m == 0 {
                    return Err(InarError::param("m", "must be at least 1"));
                }
                check_open_unit("p", p)
            }
            InnovationSpec::PoissonianBinomial { m, q, c } => {
                if m == 0 {
                    return Err(InarError::param("m", "must be at least 1"));
                }
                check_open_unit("q", q)?;
                check_open_unit("c", c)
            }
            InnovationSpec::Heine { lambda, q } => {
                check_positive("lambda", lambda)?;
                check_open_unit("q", q)
            }
            InnovationSpec::Poisson { lambda } => check_positive("lambda", lambda),
            InnovationSpec::Convolution { ref parts } => {
                if parts.is_empty() {
                    return Err(InarError::param(
                        "parts",
                        "convolution needs at least one part",
                    ));
                }
                parts.iter().try_for_each(InnovationSpec::validate)
            }
        }
    }

    /// Short human-readable name, used as pmf provenance.
    pub fn label(&self) -> String {
        match self {
            InnovationSpec::Logarithmic { p } => format!("logarithmic(p={p})"),
            InnovationSpec::Bernoulli { p } => format!("bernoulli(p={p})"),
            InnovationSpec::Binomial { m, p } => format!("binomial(m={m}, p={p})"),
            InnovationSpec::PoissonianBinomial { m, q, c } => {
                format!("poissonian_binomial(m={m}, q={q}, c={c})")
            }
            InnovationSpec::Heine { lambda, q } => format!("heine(lambda={lambda}, q={q})"),
            InnovationSpec::Poisson { lambda } => format!("poisson(lambda={lambda})"),
            InnovationSpec::Convolution { parts } => {
                let inner: Vec<String> = parts.iter().map(InnovationSpec::label).collect();
                format!("convolution[{}]", inner.join(" * "))
            }
        }
    }

    /// Pmf truncated at the smallest `K` whose analytic tail bound is at
    /// most `tol`.
    pub fn pmf(&self, tol: f64) -> Result<DiscretePmf> {
        self.validate()?;
        check_tol(tol)?;
        self.pmf_unchecked(tol)
    }

    pub(crate) fn pmf_unchecked(&self, tol: f64) -> Result<DiscretePmf> {
        let origin = self.label();
        match *self {
            InnovationSpec::Logarithmic { p } => {
                log_series(p, -1.0 / (-p).ln_1p(), tol, 0.0, origin)
            }
            InnovationSpec::Bernoulli { p } => DiscretePmf::new(vec![1.0 - p, p], 0.0, origin),
            InnovationSpec::Binomial { m, p } => {
                DiscretePmf::new(binomial_pmf(m as usize, p), 0.0, origin)
            }
            InnovationSpec::PoissonianBinomial { m, q, c } => {
                DiscretePmf::new(poissonian_binomial_pmf(m, q, c), 0.0, origin)
            }
            InnovationSpec::Heine { lambda, q } => heine_pmf(lambda, q, tol, origin),
            InnovationSpec::Poisson { lambda } => poisson_pmf(lambda, tol, origin),
            InnovationSpec::Convolution { ref parts } => {
                let share = tol / parts.len() as f64;
                let mut acc = parts[0].pmf_unchecked(share)?;
                for part in &parts[1..] {
                    acc = acc.convolve(&part.pmf_unchecked(share)?);
                }
                acc.set_origin(origin);
                Ok(acc)
            }
        }
    }

    /// Innovation pgf `Psi(z)` for `z` in `[0, 1]`.
    pub fn pgf(&self, z: f64) -> f64 {
        match *self {
            InnovationSpec::Logarithmic { p } => (-p * z).ln_1p() / (-p).ln_1p(),
            InnovationSpec::Bernoulli { p } => 1.0 - p * (1.0 - z),
            InnovationSpec::Binomial { m, p } => (1.0 - p * (1.0 - z)).powi(m as i32),
            InnovationSpec::PoissonianBinomial { m, q, c } => (0..m)
                .map(|j| 1.0 - c * q.powi(j as i32) * (1.0 - z))
                .product(),
            InnovationSpec::Heine { lambda, q } => {
                // Omitted factors satisfy -ln(1 - beta_j (1 - z)) <= lambda q^j,
                // so their log-sum is below the cut-off.
                heine_betas(lambda, q, SERIES_EPS)
                    .iter()
                    .map(|b| (-b * (1.0 - z)).ln_1p())
                    .sum::<f64>()
                    .exp()
            }
            InnovationSpec::Poisson { lambda } => (lambda * (z - 1.0)).exp(),
            InnovationSpec::Convolution { ref parts } => parts.iter().map(|s| s.pgf(z)).product(),
        }
    }

    /// `Psi'(1)`.
    pub fn mean(&self) -> f64 {
        self.mean_var_dispersion().mean
    }

    pub fn mean_var_dispersion(&self) -> Dispersion {
        let (mean, variance) = self.mean_var();
        Dispersion::new(mean, variance)
    }

    fn mean_var(&self) -> (f64, f64) {
        match *self {
            InnovationSpec::Logarithmic { p } => {
                let l = (-p).ln_1p();
                let mean = -p / ((1.0 - p) * l);
                let var = -p * (p + l) / ((1.0 - p) * l).powi(2);
                (mean, var)
            }
            InnovationSpec::Bernoulli { p } => (p, p * (1.0 - p)),
            InnovationSpec::Binomial { m, p } => {
                let m = m as f64;
                (m * p, m * p * (1.0 - p))
            }
            InnovationSpec::PoissonianBinomial { m, q, c } => {
                let mean = (1.0 - q.powi(m as i32)) * c / (1.0 - q);
                let var = mean - (1.0 - q.powi(2 * m as i32)) * c * c / (1.0 - q * q);
                (mean, var)
            }
            InnovationSpec::Heine { lambda, q } => {
                let mut mean = 0.0;
                let mut var = 0.0;
                for b in heine_betas(lambda, q, 1e-16) {
                    mean += b;
                    var += b * (1.0 - b);
                }
                (mean, var)
            }
            InnovationSpec::Poisson { lambda } => (lambda, lambda),
            InnovationSpec::Convolution { ref parts } => parts
                .iter()
                .map(InnovationSpec::mean_var)
                .fold((0.0, 0.0), |(m, v), (pm, pv)| (m + pm, v + pv)),
        }
    }

    /// Factorial moments of orders `1..=order`.
    pub fn factorial_moments(&self, order: usize) -> Result<MomentVector> {
        self.validate()?;
        if order == 0 {
            return Err(InarError::param("order", "must be at least 1"));
        }
        MomentVector::new(
            MomentKind::FactorialMoments,
            self.factorial_moments_raw(order)?,
        )
    }

    fn factorial_moments_raw(&self, order: usize) -> Result<Vec<f64>> {
        match *self {
            InnovationSpec::Logarithmic { p } => {
                let l = (-p).ln_1p();
                let ratio = p / (1.0 - p);
                let mut fact = 1.0; // (r-1)!
                Ok((1..=order)
                    .map(|r| {
                        if r > 1 {
                            fact *= (r - 1) as f64;
                        }
                        -ratio.powi(r as i32) * fact / l
                    })
                    .collect())
            }
            InnovationSpec::Convolution { ref parts } => {
                // Falling factorials of a sum obey the binomial theorem.
                let mut acc = vec![0.0; order + 1];
                acc[0] = 1.0;
                for part in parts {
                    let mut other = vec![1.0];
                    other.extend(part.factorial_moments_raw(order)?);
                    let mut next = vec![0.0; order + 1];
                    for (r, slot) in next.iter_mut().enumerate() {
                        let mut binom = 1.0;
                        for j in 0..=r {
                            if j > 0 {
                                binom = binom * (r - j + 1) as f64 / j as f64;
                            }
                            *slot += binom * acc[j] * other[r - j];
                        }
                    }
                    acc = next;
                }
                Ok(acc[1..].to_vec())
            }
            _ => Ok(self.pmf_unchecked(1e-20)?.factorial_moments(order)),
        }
    }

    /// Pmf with pgf `Psi(1 - alpha^i + alpha^i z)`.
    pub fn thinned_pmf(&self, i: u32, alpha: f64, tol: f64) -> Result<DiscretePmf> {
        self.validate()?;
        check_open_unit("alpha", alpha)?;
        check_tol(tol)?;
        if i == 0 {
            return self.pmf_unchecked(tol);
        }
        let mut out = Thinner::new(self, tol)?.thinned(alpha.powi(i as i32))?;
        out.set_origin(format!("{} thinned by alpha^{i}", self.label()));
        Ok(out)
    }

    /// Thinned pmf by direct binomial thinning of the truncated pmf,
    /// whatever the family.
    pub fn thinned_pmf_generic(&self, i: u32, alpha: f64, tol: f64) -> Result<DiscretePmf> {
        self.validate()?;
        check_open_unit("alpha", alpha)?;
        check_tol(tol)?;
        let base = self.pmf_unchecked(tol)?;
        if i == 0 {
            return Ok(base);
        }
        thin(&base, alpha.powi(i as i32))
    }

    pub fn sampler(&self) -> Result<InnovationSampler> {
        self.validate()?;
        Ok(match *self {
            InnovationSpec::Bernoulli { p } => InnovationSampler::Bernoulli(p),
            InnovationSpec::Binomial { m, p } => InnovationSampler::Binomial(
                Binomial::new(m as u64, p).map_err(|e| InarError::param("p", e.to_string()))?,
            ),
            InnovationSpec::Poisson { lambda } => InnovationSampler::Poisson(
                Poisson::new(lambda).map_err(|e| InarError::param("lambda", e.to_string()))?,
            ),
            InnovationSpec::Convolution { ref parts } => InnovationSampler::Sum(
                parts
                    .iter()
                    .map(InnovationSpec::sampler)
                    .collect::<Result<_>>()?,
            ),
            _ => InnovationSampler::Table(InverseCdf::new(&self.pmf_unchecked(1e-12)?)),
        })
    }
}

/// Binomial thinning of a truncated pmf; the missing mass carries over.
pub fn thin(base: &DiscretePmf, a: f64) -> Result<DiscretePmf> {
    DiscretePmf::new(
        binomial_thin(base.probs(), a),
        base.tail_bound(),
        format!("{} thinned by {a}", base.origin()),
    )
}

/// Produces thinned innovation pmfs for a sequence of thinning levels,
/// tabulating the base pmf once.
pub(crate) enum Thinner {
    Log { p: f64, tol: f64 },
    Base(DiscretePmf),
    Parts(Vec<Thinner>),
}

impl Thinner {
    pub(crate) fn new(spec: &InnovationSpec, tol: f64) -> Result<Self> {
        Ok(match spec {
            InnovationSpec::Logarithmic { p } => Thinner::Log { p: *p, tol },
            InnovationSpec::Convolution { parts } => {
                let share = tol / parts.len() as f64;
                Thinner::Parts(
                    parts
                        .iter()
                        .map(|s| Thinner::new(s, share))
                        .collect::<Result<_>>()?,
                )
            }
            other => Thinner::Base(other.pmf_unchecked(tol)?),
        })
    }

    /// Pmf with pgf `Psi(1 - a + a z)`.
    pub(crate) fn thinned(&self, a: f64) -> Result<DiscretePmf> {
        match self {
            Thinner::Log { p, tol } => {
                if a == 1.0 {
                    return log_series(
                        *p,
                        -1.0 / (-p).ln_1p(),
                        *tol,
                        0.0,
                        format!("logarithmic(p={p})"),
                    );
                }
                let (qa, b) = log_thinning_params(*p, a);
                // (1 - b) q^r / (-r ln(1 - q)) = q^r / (-r ln(1 - p))
                log_series(
                    qa,
                    -1.0 / (-p).ln_1p(),
                    *tol,
                    b,
                    format!("{b} delta_0 + logarithmic(q={qa})"),
                )
            }
            Thinner::Base(base) => {
                if a == 1.0 {
                    Ok(base.clone())
                } else {
                    thin(base, a)
                }
            }
            Thinner::Parts(parts) => {
                let mut acc = parts[0].thinned(a)?;
                for part in &parts[1..] {
                    acc = acc.convolve(&part.thinned(a)?);
                }
                Ok(acc)
            }
        }
    }
}

/// Inverse-CDF lookup over a tabulated pmf. Missing tail mass is folded into
/// the largest tabulated state.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    cdf: Vec<f64>,
}

impl InverseCdf {
    pub fn new(pmf: &DiscretePmf) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .probs()
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Self { cdf }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.cdf.len() - 1) as u64
    }
}

#[derive(Debug, Clone)]
pub enum InnovationSampler {
    Bernoulli(f64),
    Binomial(Binomial),
    Poisson(Poisson<f64>),
    Table(InverseCdf),
    Sum(Vec<InnovationSampler>),
}

impl InnovationSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            InnovationSampler::Bernoulli(p) => (rng.random::<f64>() < *p) as u64,
            InnovationSampler::Binomial(d) => d.sample(rng),
            InnovationSampler::Poisson(d) => d.sample(rng) as u64,
            InnovationSampler::Table(t) => t.sample(rng),
            InnovationSampler::Sum(parts) => parts.iter().map(|s| s.sample(rng)).sum(),
        }
    }
}
