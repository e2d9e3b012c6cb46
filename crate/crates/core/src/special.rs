//! Scalar special functions on `f64`.

use core::f64::consts::{PI, SQRT_2};

/// `ln(2*pi)/2`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x - LN_SQRT_2PI)
}

pub fn normal_logpdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Upper tail `1 - Phi(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `ln Phi(x)`, usable far into the lower tail.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        if x > 0.0 {
            libm::log1p(-normal_sf(x))
        } else {
            libm::log(normal_cdf(x))
        }
    } else {
        // asymptotic expansion of the Mills ratio
        let x2 = x * x;
        let s = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        -0.5 * x2 - libm::log(-x) - LN_SQRT_2PI + libm::log(s)
    }
}

/// `phi(x) / Phi(x)`, the inverse Mills ratio.
pub fn inv_mills(x: f64) -> f64 {
    if x > -30.0 {
        normal_pdf(x) / normal_cdf(x)
    } else {
        let x2 = x * x;
        -x / (1.0 - 1.0 / x2 + 3.0 / (x2 * x2))
    }
}

/// `(ln Phi(x), phi(x) / Phi(x))` sharing one `erfc` evaluation.
pub fn ln_normal_cdf_mills(x: f64) -> (f64, f64) {
    if x > -30.0 {
        let pdf = normal_pdf(x);
        if x > 0.0 {
            let sf = normal_sf(x);
            (libm::log1p(-sf), pdf / (1.0 - sf))
        } else {
            let cdf = normal_cdf(x);
            (libm::log(cdf), pdf / cdf)
        }
    } else {
        (ln_normal_cdf(x), inv_mills(x))
    }
}

/// `Phi(b) - Phi(a)` for `a <= b`, computed on whichever tail avoids cancellation.
pub fn normal_interval(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        normal_sf(a) - normal_sf(b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

/// `ln(Phi(b) - Phi(a))` for `a <= b`; either end may be infinite.
pub fn ln_normal_interval(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return ln_normal_cdf(b);
    }
    if b == f64::INFINITY {
        return ln_normal_cdf(-a);
    }
    if b <= 0.0 {
        let lb = ln_normal_cdf(b);
        lb + libm::log(-libm::expm1(ln_normal_cdf(a) - lb))
    } else if a >= 0.0 {
        ln_normal_interval(-b, -a)
    } else {
        libm::log(normal_interval(a, b))
    }
}

/// Inverse standard normal CDF (Wichura, AS 241), relative accuracy about 1e-16.
pub fn normal_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_128) * r
            + 67265.770_927_008_7)
            * r
            + 45921.953_931_549_87)
            * r
            + 13731.693_765_509_461)
            * r
            + 1971.590_950_306_551_4)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((r * 5226.495_278_852_546 + 28729.085_735_721_943) * r
            + 39307.895_800_092_71)
            * r
            + 21213.794_301_586_597)
            * r
            + 5394.196_021_424_751)
            * r
            + 687.187_007_492_057_9)
            * r
            + 42.313_330_701_600_91)
            * r
            + 1.0;
        return q * num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = libm::sqrt(-libm::log(r));
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((r * 7.745_450_142_783_414e-4 + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((r * 1.050_750_071_644_416_9e-9 + 5.475_938_084_995_345e-4) * r
            + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_08)
            * r
            + 0.689_767_334_985_1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_8)
            * r
            + 0.599_832_206_555_887_9)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

pub fn digamma(mut x: f64) -> f64 {
    if x <= 0.0 && x == libm::floor(x) {
        return f64::NAN;
    }
    let mut acc = 0.0;
    if x < 0.0 {
        // reflection
        return digamma(1.0 - x) - PI / libm::tan(PI * x);
    }
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + libm::log(x)
        - 0.5 * inv
        - inv2
            * (1.0 / 12.0
                - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))))
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// Linearly interpolated sample quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + libm::log(xs.iter().map(|&x| libm::exp(x - m)).sum::<f64>())
}

/// `ln(mean(exp(xs)))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - libm::log(xs.len() as f64)
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

/// Student-t log density with location and scale.
pub fn student_t_logpdf(x: f64, df: f64, loc: f64, scale: f64) -> f64 {
    let z = (x - loc) / scale;
    ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * libm::log(df * PI) - libm::log(scale)
        - 0.5 * (df + 1.0) * libm::log1p(z * z / df)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * libm::log(x) + b * libm::log1p(-x) - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        libm::exp(ln_front) * beta_cf(a, b, x) / a
    } else {
        1.0 - libm::exp(ln_front) * beta_cf(b, a, 1.0 - x) / b
    }
}

// modified Lentz continued fraction
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
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
    for m in 1..=500 {
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
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Quantile of Beta(a, b) by bisection on the regularized incomplete beta.
pub fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if inc_beta(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    #[test]
    fn fused_log_cdf_and_mills_agree() {
        for i in 0..400 {
            let x = -40.0 + 0.125 * i as f64;
            let (a, b) = super::ln_normal_cdf_mills(x);
            assert_eq!(a, super::ln_normal_cdf(x));
            assert!((b - super::inv_mills(x)).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    use super::*;

    #[test]
    fn cdf_reference_values() {
        // published table values
        assert!((normal_cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-14);
        assert!((normal_cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-14);
        assert!((normal_sf(8.0) - 6.220_960_574_271_785e-16).abs() < 1e-28);
    }

    #[test]
    fn quantile_round_trip() {
        for &p in &[1e-300, 1e-12, 0.001, 0.02425, 0.3, 0.5, 0.77, 0.975, 1.0 - 1e-10] {
            let z = normal_quantile(p);
            let back = normal_cdf(z);
            assert!((back - p).abs() <= 1e-13 * p.max(1e-3), "p={p} z={z} back={back}");
        }
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
    }

    #[test]
    fn ln_cdf_tails_are_continuous() {
        let a = ln_normal_cdf(-29.999_999);
        let b = ln_normal_cdf(-30.000_001);
        assert!((a - b).abs() < 1e-3);
        assert!((ln_normal_cdf(3.0) - libm::log(normal_cdf(3.0))).abs() < 1e-15);
    }

    #[test]
    fn digamma_matches_lgamma_slope() {
        for &x in &[0.3, 1.0, 2.5, 7.0, 40.0] {
            let h = 1e-6;
            let fd = (ln_gamma(x + h) - ln_gamma(x - h)) / (2.0 * h);
            assert!((digamma(x) - fd).abs() < 1e-7, "x={x}");
        }
        // psi(1) = -Euler-Mascheroni
        assert!((digamma(1.0) + 0.577_215_664_901_532_9).abs() < 1e-13);
    }

    #[test]
    fn inc_beta_against_closed_forms() {
        // I_x(1, b) = 1 - (1-x)^b ; I_x(a, 1) = x^a
        for &x in &[0.01, 0.2, 0.5, 0.9] {
            assert!((inc_beta(1.0, 3.5, x) - (1.0 - libm::pow(1.0 - x, 3.5))).abs() < 1e-13);
            assert!((inc_beta(2.7, 1.0, x) - libm::pow(x, 2.7)).abs() < 1e-13);
        }
        let q = beta_quantile(2.0, 5.0, 0.5);
        assert!((inc_beta(2.0, 5.0, q) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ln_interval_deep_tails() {
        // Phi(-40) underflows but its logarithm does not
        let v = ln_normal_interval(f64::NEG_INFINITY, -40.0);
        assert!((v - ln_normal_cdf(-40.0)).abs() < 1e-12 && v.is_finite());
        let w = ln_normal_interval(-41.0, -40.0);
        assert!((w - v).abs() < 1e-10);
        let m = ln_normal_interval(40.0, 41.0);
        assert!((m - v).abs() < 1e-10);
        let c = ln_normal_interval(-0.5, 0.5);
        assert!((c - libm::log(normal_cdf(0.5) - normal_cdf(-0.5))).abs() < 1e-15);
    }

    #[test]
    fn interval_has_no_cancellation_in_upper_tail() {
        let v = normal_interval(9.0, 10.0);
        let exact = normal_sf(9.0) - normal_sf(10.0);
        assert!(v > 0.0 && (v - exact).abs() / exact < 1e-12);
    }
}
