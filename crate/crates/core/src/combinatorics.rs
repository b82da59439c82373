//! Stirling numbers and the conversions between moments, factorial moments,
//! cumulants and factorial cumulants.
//!
//! Stirling tables are built once in exact `i128` arithmetic up to
//! [`STIRLING_MAX`] and shared process-wide. The conversions themselves are
//! plain floating-point triangular sums over those tables.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{InarError, Result};

/// Largest row index held by the Stirling tables.
pub const STIRLING_MAX: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StirlingKind {
    FirstSigned,
    Second,
}

/// Lower-triangular table of exact Stirling numbers, `values[r][j]` for
/// `0 <= j <= r <= STIRLING_MAX`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StirlingTable {
    kind: StirlingKind,
    values: Vec<Vec<i128>>,
}

impl StirlingTable {
    fn build(kind: StirlingKind, max: usize) -> Self {
        let mut values: Vec<Vec<i128>> = Vec::with_capacity(max + 1);
        values.push(vec![1]);
        for r in 1..=max {
            let prev = &values[r - 1];
            let mut row = vec![0i128; r + 1];
            for j in 1..=r {
                let diag = prev[j - 1];
                let same = if j < r { prev[j] } else { 0 };
                row[j] = match kind {
                    // S(r, j) = j S(r-1, j) + S(r-1, j-1)
                    StirlingKind::Second => j as i128 * same + diag,
                    // s(r, j) = s(r-1, j-1) - (r-1) s(r-1, j)
                    StirlingKind::FirstSigned => diag - (r as i128 - 1) * same,
                };
            }
            values.push(row);
        }
        Self { kind, values }
    }

    pub fn kind(&self) -> StirlingKind {
        self.kind
    }

    pub fn max_order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, r: usize, j: usize) -> Result<i128> {
        if j > r || r > self.max_order() {
            return Err(InarError::OutOfRange {
                row: r,
                col: j,
                max: self.max_order(),
            });
        }
        Ok(self.values[r][j])
    }

    fn row(&self, r: usize) -> &[i128] {
        &self.values[r]
    }
}

pub fn second_kind_table() -> &'static StirlingTable {
    static TABLE: OnceLock<StirlingTable> = OnceLock::new();
    TABLE.get_or_init(|| StirlingTable::build(StirlingKind::Second, STIRLING_MAX))
}

pub fn first_kind_table() -> &'static StirlingTable {
    static TABLE: OnceLock<StirlingTable> = OnceLock::new();
    TABLE.get_or_init(|| StirlingTable::build(StirlingKind::FirstSigned, STIRLING_MAX))
}

/// Stirling number of the second kind `S(r, j)`.
pub fn stirling_second(r: usize, j: usize) -> Result<i128> {
    second_kind_table().get(r, j)
}

/// Signed Stirling number of the first kind `s(r, j)`.
pub fn stirling_first_signed(r: usize, j: usize) -> Result<i128> {
    first_kind_table().get(r, j)
}

/// `S(r, j)` through the alternating sum `(1/j!) sum_k (-1)^(j-k) C(j,k) k^r`.
///
/// Returns `None` when an intermediate value overflows `i128` (beyond
/// roughly `r = 22`). Used to cross-check the recurrence table.
pub fn stirling_second_alternating(r: usize, j: usize) -> Option<i128> {
    if j > r {
        return Some(0);
    }
    let mut sum: i128 = 0;
    let mut binom: i128 = 1;
    for k in 0..=j {
        if k > 0 {
            binom = binom * (j - k + 1) as i128 / k as i128;
        }
        let power = (k as i128).checked_pow(r as u32)?;
        let term = binom.checked_mul(power)?;
        sum = if (j - k).is_multiple_of(2) {
            sum.checked_add(term)?
        } else {
            sum.checked_sub(term)?
        };
    }
    let mut fact: i128 = 1;
    for k in 2..=j {
        fact = fact.checked_mul(k as i128)?;
    }
    Some(sum / fact)
}

/// Which family of moment-like quantities a [`MomentVector`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    Moments,
    FactorialMoments,
    Cumulants,
    FactorialCumulants,
}

/// Orders `1..=R` of one moment family. Order 0 is implicit
/// (`mu_0 = 1`, `kappa_0 = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub kind: MomentKind,
    pub values: Vec<f64>,
}

impl MomentVector {
    pub fn new(kind: MomentKind, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(InarError::param("values", "order must be at least 1"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(InarError::param(
                "values",
                format!("entry of order {} is not finite", i + 1),
            ));
        }
        Ok(Self { kind, values })
    }

    pub fn order(&self) -> usize {
        self.values.len()
    }

    /// Value of order `r` (1-based).
    pub fn get(&self, r: usize) -> f64 {
        self.values[r - 1]
    }

    fn expect(&self, kind: MomentKind) -> Result<()> {
        if self.kind != kind {
            return Err(InarError::KindMismatch {
                expected: kind,
                found: self.kind,
            });
        }
        Ok(())
    }

    fn check_stirling_order(&self) -> Result<()> {
        if self.order() > STIRLING_MAX {
            return Err(InarError::param(
                "order",
                format!("at most {STIRLING_MAX} supported, got {}", self.order()),
            ));
        }
        Ok(())
    }
}

/// Error-free product: `a * b == hi + lo` exactly.
fn two_product(a: f64, b: f64) -> (f64, f64) {
    let hi = a * b;
    (hi, a.mul_add(b, -hi))
}

/// Error-free sum: `a + b == hi + lo` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let hi = a + b;
    let z = hi - a;
    (hi, (a - (hi - z)) + (b - z))
}

/// `out_r = sum_{j=1..r} T(r, j) in_j`, accumulated in compensated
/// arithmetic. The rows alternate in sign and entries reach `24!`, which is
/// not exactly representable, so each coefficient is split as `hi + lo`.
fn triangular(table: &StirlingTable, input: &[f64]) -> Vec<f64> {
    (1..=input.len())
        .map(|r| {
            let (mut sum, mut err) = (0.0, 0.0);
            for (&t, &x) in table.row(r)[1..=r].iter().zip(input) {
                let hi = t as f64;
                let lo = (t - hi as i128) as f64;
                let (p, e) = two_product(hi, x);
                let (s, f) = two_sum(sum, p);
                sum = s;
                err += e + f + lo * x;
            }
            sum + err
        })
        .collect()
}

pub fn cumulants_from_factorial_cumulants(fc: &MomentVector) -> Result<MomentVector> {
    fc.expect(MomentKind::FactorialCumulants)?;
    fc.check_stirling_order()?;
    MomentVector::new(
        MomentKind::Cumulants,
        triangular(second_kind_table(), &fc.values),
    )
}

pub fn factorial_cumulants_from_cumulants(c: &MomentVector) -> Result<MomentVector> {
    c.expect(MomentKind::Cumulants)?;
    c.check_stirling_order()?;
    // kappa_0 = 0 so the j = 0 column never contributes.
    MomentVector::new(
        MomentKind::FactorialCumulants,
        triangular(first_kind_table(), &c.values),
    )
}

pub fn moments_from_factorial_moments(fm: &MomentVector) -> Result<MomentVector> {
    fm.expect(MomentKind::FactorialMoments)?;
    fm.check_stirling_order()?;
    MomentVector::new(
        MomentKind::Moments,
        triangular(second_kind_table(), &fm.values),
    )
}

pub fn factorial_moments_from_moments(m: &MomentVector) -> Result<MomentVector> {
    m.expect(MomentKind::Moments)?;
    m.check_stirling_order()?;
    // s(r, 0) = 0 for r >= 1, so mu_0 = 1 drops out as well.
    MomentVector::new(
        MomentKind::FactorialMoments,
        triangular(first_kind_table(), &m.values),
    )
}

fn binomial_rows(n: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![1.0]];
    for r in 1..=n {
        let prev = &rows[r - 1];
        let mut row = vec![1.0; r + 1];
        for k in 1..r {
            row[k] = prev[k - 1] + prev[k];
        }
        rows.push(row);
    }
    rows
}

fn smith_cumulants(m: &[f64]) -> Vec<f64> {
    let n = m.len();
    let binom = binomial_rows(n);
    let mut kappa = vec![0.0; n + 1];
    for r in 1..=n {
        let mut acc = m[r - 1];
        for i in 1..r {
            acc -= binom[r - 1][i] * kappa[r - i] * m[i - 1];
        }
        kappa[r] = acc;
    }
    kappa.remove(0);
    kappa
}

fn smith_moments(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let binom = binomial_rows(n);
    let mut mu = vec![0.0; n + 1];
    mu[0] = 1.0;
    for r in 1..=n {
        mu[r] = (0..r).map(|j| binom[r - 1][j] * c[r - j - 1] * mu[j]).sum();
    }
    mu.remove(0);
    mu
}

/// Cumulants from raw moments by the recursion
/// `kappa_r = mu_r - sum_{i=1..r-1} C(r-1, i) kappa_{r-i} mu_i`.
pub fn cumulants_from_moments(m: &MomentVector) -> Result<MomentVector> {
    m.expect(MomentKind::Moments)?;
    MomentVector::new(MomentKind::Cumulants, smith_cumulants(&m.values))
}

/// Raw moments from cumulants by
/// `mu_r = sum_{j=0..r-1} C(r-1, j) kappa_{r-j} mu_j` with `mu_0 = 1`.
pub fn moments_from_cumulants(c: &MomentVector) -> Result<MomentVector> {
    c.expect(MomentKind::Cumulants)?;
    MomentVector::new(MomentKind::Moments, smith_moments(&c.values))
}

/// Factorial moments and factorial cumulants are the moments and cumulants
/// of `G(1 + t)`, so the same recursions apply.
pub fn factorial_cumulants_from_factorial_moments(fm: &MomentVector) -> Result<MomentVector> {
    fm.expect(MomentKind::FactorialMoments)?;
    MomentVector::new(MomentKind::FactorialCumulants, smith_cumulants(&fm.values))
}

pub fn factorial_moments_from_factorial_cumulants(fc: &MomentVector) -> Result<MomentVector> {
    fc.expect(MomentKind::FactorialCumulants)?;
    MomentVector::new(MomentKind::FactorialMoments, smith_moments(&fc.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Number of partitions of an `n`-set into exactly `k` blocks, by
    /// enumerating restricted growth strings.
    fn count_partitions(n: usize, k: usize) -> i128 {
        fn go(pos: usize, n: usize, k: usize, used: usize) -> i128 {
            if pos == n {
                return (used == k) as i128;
            }
            (0..=used.min(k - 1))
                .map(|b| go(pos + 1, n, k, used.max(b + 1)))
                .sum()
        }
        if n == 0 {
            return (k == 0) as i128;
        }
        if k == 0 {
            return 0;
        }
        go(0, n, k, 0)
    }

    #[test]
    fn second_kind_boundary_values() {
        assert_eq!(stirling_second(0, 0).unwrap(), 1);
        for r in 1..=STIRLING_MAX {
            assert_eq!(stirling_second(r, 0).unwrap(), 0);
            assert_eq!(stirling_second(r, 1).unwrap(), 1);
            assert_eq!(stirling_second(r, r).unwrap(), 1);
        }
        assert_eq!(stirling_second(4, 2).unwrap(), 7);
    }

    #[test]
    fn second_kind_matches_partition_enumeration() {
        for n in 0..=8 {
            for k in 0..=n {
                assert_eq!(
                    stirling_second(n, k).unwrap(),
                    count_partitions(n, k),
                    "S({n},{k})"
                );
            }
        }
    }

    #[test]
    fn alternating_sum_agrees_with_recurrence() {
        for r in 0..=20 {
            for j in 0..=r {
                let alt = stirling_second_alternating(r, j).expect("fits in i128");
                assert_eq!(alt, stirling_second(r, j).unwrap(), "S({r},{j})");
            }
        }
    }

    #[test]
    fn first_kind_hand_values() {
        assert_eq!(stirling_first_signed(1, 1).unwrap(), 1);
        assert_eq!(stirling_first_signed(2, 1).unwrap(), -1);
        assert_eq!(stirling_first_signed(3, 2).unwrap(), -3);
        assert_eq!(stirling_first_signed(3, 1).unwrap(), 2);
        assert_eq!(stirling_first_signed(4, 2).unwrap(), 11);
        for r in 1..=STIRLING_MAX {
            assert_eq!(stirling_first_signed(r, 0).unwrap(), 0);
        }
        // |s(25, 1)| = 24!
        let fact24: i128 = (1..=24).map(|k| k as i128).product();
        assert_eq!(stirling_first_signed(25, 1).unwrap(), fact24);
    }

    #[test]
    fn first_kind_recurrence_holds() {
        for r in 1..STIRLING_MAX {
            for j in 1..=r + 1 {
                let lhs = stirling_first_signed(r + 1, j).unwrap();
                let same = if j <= r {
                    stirling_first_signed(r, j).unwrap()
                } else {
                    0
                };
                let rhs = stirling_first_signed(r, j - 1).unwrap() - r as i128 * same;
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn kinds_are_inverse_triangular_systems() {
        for r in 0..=15 {
            for m in 0..=15 {
                let sum: i128 = (0..=r.min(15))
                    .filter(|&j| m <= j)
                    .map(|j| stirling_first_signed(r, j).unwrap() * stirling_second(j, m).unwrap())
                    .sum();
                assert_eq!(sum, (r == m) as i128, "r={r} m={m}");
            }
        }
    }

    #[test]
    fn out_of_range_is_domain_error() {
        assert!(matches!(
            stirling_second(3, 4),
            Err(InarError::OutOfRange { .. })
        ));
        assert!(stirling_first_signed(STIRLING_MAX + 1, 1).is_err());
    }

    fn mv(kind: MomentKind, v: &[f64]) -> MomentVector {
        MomentVector::new(kind, v.to_vec()).unwrap()
    }

    #[test]
    fn poisson_factorial_cumulants_give_constant_cumulants() {
        let a = 2.5;
        let mut fc = vec![0.0; 8];
        fc[0] = a;
        let c =
            cumulants_from_factorial_cumulants(&mv(MomentKind::FactorialCumulants, &fc)).unwrap();
        assert!(c.values.iter().all(|&k| (k - a).abs() < 1e-12));
        let back = factorial_cumulants_from_cumulants(&c).unwrap();
        assert!((back.get(1) - a).abs() < 1e-12);
        assert!(back.values[1..].iter().all(|k| k.abs() < 1e-9));
    }

    #[test]
    fn second_order_cumulant_from_factorial() {
        let c =
            cumulants_from_factorial_cumulants(&mv(MomentKind::FactorialCumulants, &[0.7, -0.2]))
                .unwrap();
        assert_eq!(c.get(1), 0.7);
        assert!((c.get(2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bernoulli_moments_are_idempotent() {
        let p = 0.3;
        let mut fm = vec![0.0; 6];
        fm[0] = p;
        let m = moments_from_factorial_moments(&mv(MomentKind::FactorialMoments, &fm)).unwrap();
        assert!(m.values.iter().all(|&x| (x - p).abs() < 1e-15));
        let back = factorial_moments_from_moments(&m).unwrap();
        assert!((back.get(1) - p).abs() < 1e-15);
        assert!(back.values[1..].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn second_factorial_moment_from_moments() {
        let fm = factorial_moments_from_moments(&mv(MomentKind::Moments, &[1.5, 4.0])).unwrap();
        assert_eq!(fm.get(1), 1.5);
        assert!((fm.get(2) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn variance_identity() {
        let c = cumulants_from_moments(&mv(MomentKind::Moments, &[1.5, 4.0, 11.0])).unwrap();
        assert_eq!(c.get(1), 1.5);
        assert!((c.get(2) - (4.0 - 2.25)).abs() < 1e-15);
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let m = mv(MomentKind::Moments, &[1.0]);
        assert!(matches!(
            cumulants_from_factorial_cumulants(&m),
            Err(InarError::KindMismatch { .. })
        ));
        assert!(moments_from_cumulants(&m).is_err());
    }

    /// Agreement relative to the largest magnitude in either vector.
    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        let scale = a.iter().chain(b).fold(1.0f64, |m, x| m.max(x.abs()));
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
    }

    /// Round-trip error of entry `r` measured against
    /// `sum_j |T(r, j)| |mid_j|`: what the second transform can resolve
    /// given its input rounded to double precision.
    fn round_trip_close(
        table: &StirlingTable,
        mid: &[f64],
        back: &[f64],
        orig: &[f64],
        tol: f64,
    ) -> bool {
        (1..=orig.len()).all(|r| {
            let scale: f64 = table.row(r)[1..=r]
                .iter()
                .zip(mid)
                .map(|(&t, &x)| (t as f64 * x).abs())
                .sum();
            (back[r - 1] - orig[r - 1]).abs() <= tol * scale.max(1.0)
        })
    }

    #[test]
    fn factorial_moment_and_cumulant_recursion() {
        // Poisson(2): kappa_[1] = 2, higher factorial cumulants vanish and
        // mu_[r] = 2^r.
        let fc = mv(MomentKind::FactorialCumulants, &[2.0, 0.0, 0.0, 0.0]);
        let fm = factorial_moments_from_factorial_cumulants(&fc).unwrap();
        assert_eq!(fm.values, vec![2.0, 4.0, 8.0, 16.0]);
        let back = factorial_cumulants_from_factorial_moments(&fm).unwrap();
        assert_eq!(back.values, fc.values);
    }

    proptest! {
        #[test]
        fn stirling_round_trip(v in prop::collection::vec(-10.0f64..10.0, 1..=10)) {
            let fc = mv(MomentKind::FactorialCumulants, &v);
            let c = cumulants_from_factorial_cumulants(&fc).unwrap();
            let back = factorial_cumulants_from_cumulants(&c).unwrap();
            prop_assert!(round_trip_close(first_kind_table(), &c.values, &back.values, &v, 1e-12));

            let fm = mv(MomentKind::FactorialMoments, &v);
            let m = moments_from_factorial_moments(&fm).unwrap();
            let back = factorial_moments_from_moments(&m).unwrap();
            prop_assert!(round_trip_close(first_kind_table(), &m.values, &back.values, &v, 1e-12));
        }

        #[test]
        fn smith_round_trip(v in prop::collection::vec(-5.0f64..5.0, 1..=8)) {
            let c = mv(MomentKind::Cumulants, &v);
            let m = moments_from_cumulants(&c).unwrap();
            let back = cumulants_from_moments(&m).unwrap();
            // Scale entry r by the magnitude of the terms the recursion
            // cancels: |mu_r| + sum_i C(r-1, i) |kappa_{r-i}| |mu_i|.
            let binom = binomial_rows(v.len());
            for r in 1..=v.len() {
                let scale = (1..r).fold(m.get(r).abs(), |acc, i| {
                    acc + binom[r - 1][i] * (v[r - i - 1] * m.get(i)).abs()
                });
                prop_assert!((back.get(r) - v[r - 1]).abs() <= 1e-12 * scale.max(1.0));
            }
        }

        /// Factorial cumulants to raw moments along both sides of the square.
        #[test]
        fn conversions_commute(v in prop::collection::vec(-1.0e3f64..1.0e3, 1..=8)) {
            let fc = mv(MomentKind::FactorialCumulants, &v);
            let c = cumulants_from_factorial_cumulants(&fc).unwrap();
            let m1 = moments_from_cumulants(&c).unwrap();
            let fm = factorial_moments_from_factorial_cumulants(&fc).unwrap();
            let m2 = moments_from_factorial_moments(&fm).unwrap();
            prop_assert!(close(&m1.values, &m2.values, 1e-10));
        }
    }
}
