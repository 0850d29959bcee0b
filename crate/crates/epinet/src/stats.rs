//! Two-sample comparison statistics for projected dimension scores.
//!
//! Condition comparisons use Welch's unequal-variance t-test with the
//! Welch–Satterthwaite degrees of freedom, Cohen's d on the pooled standard
//! deviation, and Student-t confidence intervals for group means. The
//! t-distribution CDF is evaluated through the regularized incomplete beta
//! function, computed with a Lentz continued fraction and a Lanczos
//! log-gamma; no probability tables are involved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator). Requires n >= 2.
fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

fn check_sample(name: &str, xs: &[f64]) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "sample `{name}` needs at least 2 observations, got {}",
            xs.len()
        )));
    }
    if let Some(bad) = xs.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sample `{name}` contains a non-finite value {bad}"
        )));
    }
    Ok(())
}

// Lanczos approximation, g = 7, 9 terms. Relative error below 1e-13 over
// the positive reals, which is far inside what the beta ratio needs.
// Coefficients kept at published precision even where f64 rounds them.
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 8] = [
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

#[allow(clippy::excessive_precision)]
fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection formula; sin(pi*x) > 0 for x in (0, 1).
        let pi = std::f64::consts::PI;
        pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = 0.999_999_999_999_809_93;
        for (i, &c) in LANCZOS.iter().enumerate() {
            acc += c / (x + (i + 1) as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// Continued fraction for the incomplete beta (modified Lentz method).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 400;
    const EPS: f64 = 1e-16;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let numerator = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + numerator * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + numerator / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;

        let numerator = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + numerator * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + numerator / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b) for a, b > 0.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // Use the fraction on whichever side converges fast, and the symmetry
    // I_x(a,b) = 1 - I_{1-x}(b,a) on the other.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// CDF of Student's t distribution with `df > 0` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    let x = df / (df + t * t);
    let tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse CDF (quantile) of Student's t, solved by bisection on the CDF.
pub fn student_t_quantile(p: f64, df: f64) -> Result<f64> {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if !(0.0..=1.0).contains(&p) || p == 0.0 || p == 1.0 {
        return Err(Error::InvalidParameter(format!(
            "quantile probability must be strictly between 0 and 1, got {p}"
        )));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Solve for the upper half and mirror; the CDF is strictly increasing.
    let q = if p > 0.5 { p } else { 1.0 - p };
    let mut hi = 1.0;
    while student_t_cdf(hi, df) < q {
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(if p > 0.5 { t } else { -t })
}

/// Welch's unequal-variance t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    pub p_two_sided: f64,
}

/// t = (mean_a - mean_b) / sqrt(s2_a/n_a + s2_b/n_b), two-sided p.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    check_sample("a", a)?;
    check_sample("b", b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a), sample_variance(b));
    if va == 0.0 && vb == 0.0 {
        return Err(Error::UndefinedStatistic(
            "both samples have zero variance; t is undefined".into(),
        ));
    }
    let sea = va / na;
    let seb = vb / nb;
    let se = (sea + seb).sqrt();
    let t = (mean(a) - mean(b)) / se;
    let df = (sea + seb) * (sea + seb)
        / (sea * sea / (na - 1.0) + seb * seb / (nb - 1.0));
    let p = 2.0 * (1.0 - student_t_cdf(t.abs(), df));
    Ok(WelchResult { t, df, p_two_sided: p })
}

/// Cohen's d with the pooled standard deviation:
/// d = (mean_a - mean_b) / s_pooled,
/// s_pooled^2 = ((n_a-1) s2_a + (n_b-1) s2_b) / (n_a + n_b - 2).
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sample("a", a)?;
    check_sample("b", b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b))
        / (na + nb - 2.0);
    if pooled == 0.0 {
        return Err(Error::UndefinedStatistic(
            "pooled variance is zero; effect size is undefined".into(),
        ));
    }
    Ok((mean(a) - mean(b)) / pooled.sqrt())
}

/// Student-t confidence interval for a sample mean at the given level
/// (e.g. 0.95): mean ± t((1+level)/2, n-1) * sd / sqrt(n).
pub fn mean_ci(sample: &[f64], level: f64) -> Result<(f64, f64)> {
    check_sample("sample", sample)?;
    if !(0.0..=1.0).contains(&level) || level == 0.0 || level == 1.0 {
        return Err(Error::InvalidParameter(format!(
            "confidence level must be strictly between 0 and 1, got {level}"
        )));
    }
    let n = sample.len() as f64;
    let m = mean(sample);
    let sd = sample_variance(sample).sqrt();
    let t_critical = student_t_quantile(0.5 * (1.0 + level), n - 1.0)?;
    let half_width = t_critical * sd / n.sqrt();
    Ok((m - half_width, m + half_width))
}

/// Descriptives for one group on one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci_95: (f64, f64),
}

/// Full two-group comparison for one projected dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub dimension: String,
    pub group_a: GroupSummary,
    pub group_b: GroupSummary,
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
    pub cohens_d: f64,
}

fn summarize(label: &str, xs: &[f64]) -> Result<GroupSummary> {
    Ok(GroupSummary {
        label: label.to_string(),
        n: xs.len(),
        mean: mean(xs),
        sd: sample_variance(xs).sqrt(),
        ci_95: mean_ci(xs, 0.95)?,
    })
}

/// Runs the whole comparison battery for one dimension.
pub fn compare_groups(
    dimension: &str,
    label_a: &str,
    a: &[f64],
    label_b: &str,
    b: &[f64],
) -> Result<StatReport> {
    let welch = welch_t(a, b)?;
    Ok(StatReport {
        dimension: dimension.to_string(),
        group_a: summarize(label_a, a)?,
        group_b: summarize(label_b, b)?,
        t: welch.t,
        df: welch.df,
        p_two_sided: welch.p_two_sided,
        cohens_d: cohens_d(a, b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
    const B: [f64; 4] = [2.0, 3.0, 4.0, 5.0];

    #[test]
    fn welch_on_shifted_samples() {
        let result = welch_t(&A, &B).unwrap();
        // Equal variances 5/3, shift -1: t = -sqrt(6/5), df exactly 6.
        assert!((result.t - (-1.0954)).abs() < 1e-4, "t = {}", result.t);
        assert!((result.t + (1.2f64).sqrt()).abs() < 1e-12);
        assert!((result.df - 6.0).abs() < 1e-9, "df = {}", result.df);
        assert!((result.p_two_sided - 0.3150).abs() < 1e-3, "p = {}", result.p_two_sided);
    }

    #[test]
    fn cohens_d_on_shifted_samples() {
        let d = cohens_d(&A, &B).unwrap();
        // s_pooled = sqrt(5/3) = 1.2910, d = -1/1.2910 = -0.7746.
        assert!((d - (-0.7746)).abs() < 1e-4, "d = {d}");
    }

    #[test]
    fn identical_varying_samples_give_zero_t_unit_p() {
        let xs = [1.0, 2.0, 3.0];
        let result = welch_t(&xs, &xs).unwrap();
        assert_eq!(result.t, 0.0);
        assert_eq!(result.p_two_sided, 1.0);
    }

    #[test]
    fn large_shift_gives_tiny_p() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1001.0, 1002.0, 1003.0, 1004.0];
        let result = welch_t(&a, &b).unwrap();
        assert!(result.t.abs() > 100.0);
        assert!(result.p_two_sided < 1e-6);
    }

    #[test]
    fn swapping_samples_negates_d() {
        let d_ab = cohens_d(&A, &B).unwrap();
        let d_ba = cohens_d(&B, &A).unwrap();
        assert_eq!(d_ab, -d_ba);
    }

    #[test]
    fn identical_samples_have_undefined_t() {
        let same = [3.0, 3.0, 3.0];
        assert!(matches!(
            welch_t(&same, &same),
            Err(Error::UndefinedStatistic(_))
        ));
        assert!(matches!(
            cohens_d(&same, &same),
            Err(Error::UndefinedStatistic(_))
        ));
    }

    #[test]
    fn welch_handles_one_constant_sample() {
        let constant = [2.0, 2.0, 2.0];
        let varying = [1.0, 2.0, 3.0, 4.0];
        let result = welch_t(&constant, &varying).unwrap();
        assert!(result.t.is_finite() && result.df.is_finite());
    }

    #[test]
    fn ci_of_small_sample() {
        let (lo, hi) = mean_ci(&[1.0, 2.0, 3.0], 0.95).unwrap();
        // t(0.975, 2) = 4.3027, sd = 1, half-width = 4.3027/sqrt(3).
        assert!((lo - (-0.4841)).abs() < 1e-3, "lo = {lo}");
        assert!((hi - 4.4841).abs() < 1e-3, "hi = {hi}");
    }

    #[test]
    fn ci_is_symmetric_about_mean() {
        let xs = [2.0, 4.0, 4.5, 7.0, 9.25];
        let (lo, hi) = mean_ci(&xs, 0.95).unwrap();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(((m - lo) - (hi - m)).abs() < 1e-12);
        assert!(lo < m && m < hi);
    }

    #[test]
    fn cdf_midpoint_and_symmetry() {
        assert!((student_t_cdf(0.0, 5.0) - 0.5).abs() < 1e-15);
        for &t in &[0.3, 1.0, 2.5, 7.0] {
            for &df in &[1.0, 4.0, 17.0] {
                let upper = student_t_cdf(t, df);
                let lower = student_t_cdf(-t, df);
                assert!((upper + lower - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cdf_is_monotone() {
        for &df in &[1.0, 3.0, 30.0] {
            let mut prev = 0.0;
            for i in 0..200 {
                let t = -10.0 + i as f64 * 0.1;
                let f = student_t_cdf(t, df);
                assert!(f >= prev, "CDF decreased at t={t}, df={df}");
                prev = f;
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &df in &[1.0, 2.0, 6.0, 25.0] {
            for &p in &[0.025, 0.2, 0.5, 0.9, 0.975, 0.995] {
                let t = student_t_quantile(p, df).unwrap();
                assert!((student_t_cdf(t, df) - p).abs() < 1e-10, "p={p}, df={df}");
            }
        }
        // Known critical value: t(0.975, 2) = 4.3027.
        let t = student_t_quantile(0.975, 2.0).unwrap();
        assert!((t - 4.3027).abs() < 1e-4, "t = {t}");
    }

    #[test]
    fn tiny_samples_rejected() {
        assert!(welch_t(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mean_ci(&[1.0], 0.95).is_err());
        assert!(mean_ci(&[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn full_report_is_consistent() {
        let report = compare_groups("SVD1", "aware", &A, "unaware", &B).unwrap();
        assert_eq!(report.group_a.n, 4);
        assert_eq!(report.group_a.label, "aware");
        assert!((report.group_a.mean - 2.5).abs() < 1e-15);
        assert!((report.t - (-1.0954)).abs() < 1e-4);
        assert!((report.cohens_d - (-0.7746)).abs() < 1e-4);
    }
}
