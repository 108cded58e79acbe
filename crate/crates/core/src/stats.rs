//! Summary statistics over repeated runs: mean, sample standard deviation,
//! percentile bootstrap confidence interval and a paired t-test.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Paired t statistic against the baseline, when one was given and it is defined.
    pub t_stat: Option<f64>,
    /// Two-sided p-value of the paired t-test.
    pub p_value: Option<f64>,
}

/// Mean computed about the first element, exact for constant data.
pub fn mean(xs: &[f64]) -> f64 {
    let Some(&x0) = xs.first() else { return f64::NAN };
    x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the n-1 denominator.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn aggregate_stats<R: Rng + ?Sized>(
    accs: &[f64],
    baseline: Option<&[f64]>,
    n_boot: usize,
    rng: &mut R,
) -> Result<Summary> {
    if accs.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 runs for statistics, got {}", accs.len())));
    }
    if n_boot == 0 {
        return Err(Error::invalid("n_boot must be positive"));
    }
    let m = mean(accs);
    let (ci_low, ci_high) = bootstrap_ci(accs, n_boot, rng);
    let (t_stat, p_value) = match baseline {
        None => (None, None),
        Some(b) => {
            let (t, p) = paired_t_test(accs, b)?;
            (t, Some(p))
        }
    };
    Ok(Summary { n: accs.len(), mean: m, std: sample_std(accs), ci_low, ci_high, t_stat, p_value })
}

/// Percentile bootstrap interval of the mean. The interval is widened to
/// contain the sample mean if resampling noise leaves it outside.
pub fn bootstrap_ci<R: Rng + ?Sized>(xs: &[f64], n_boot: usize, rng: &mut R) -> (f64, f64) {
    let n = xs.len();
    let mut means: Vec<f64> = (0..n_boot)
        .map(|_| {
            let sample: Vec<f64> = (0..n).map(|_| xs[rng.random_range(0..n)]).collect();
            mean(&sample)
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - CI_LEVEL) / 2.0;
    let m = mean(xs);
    let lo = quantile_sorted(&means, alpha).min(m);
    let hi = quantile_sorted(&means, 1.0 - alpha).max(m);
    (lo, hi)
}

/// Linear-interpolated quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Two-sided paired t-test of `a` against `b`.
///
/// When every difference is identical the statistic is undefined; the
/// p-value is then 1 for zero differences and 0 otherwise.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<(Option<f64>, f64)> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("paired lists differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::invalid("paired t-test needs at least 2 pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let md = mean(&d);
    let sd = sample_std(&d);
    if sd == 0.0 {
        return Ok((None, if md == 0.0 { 1.0 } else { 0.0 }));
    }
    let n = d.len() as f64;
    let t = md / (sd / n.sqrt());
    Ok((Some(t), t_two_sided_p(t, n - 1.0)))
}

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    regularized_incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Student's t cumulative distribution function.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * t_two_sided_p(t, df);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Natural log of the gamma function (Lanczos, g = 7, n = 9), for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
