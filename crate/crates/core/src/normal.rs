//! Standard normal distribution functions accurate to close to machine
//! precision over the full double range, including the far tails.
//!
//! The complementary error function follows Cody's three-interval rational
//! scheme (the SPECFUN `calerf` coefficients), which keeps the relative
//! error of `erfc` below about 1e-15 everywhere it does not underflow.
//! Because the algorithm factors `erfc(x) = exp(-x*x) * R(x)` exactly for
//! `|x| > 0.46875`, the scaled function `R` is also exposed and log
//! tail probabilities never underflow:
//!
//! ```text
//! log(1 - Phi(z)) = -z^2/2 + log(R(z / sqrt(2)) / 2),   z large.
//! ```
//!
//! The quantile uses Wichura's PPND16 rational approximations followed by
//! one Newton correction, so `cdf(quantile(p))` reproduces `p` to better
//! than 1e-12 relative error across `[1e-300, 1 - 1e-16]`.

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_74;
/// 1/sqrt(pi), used by the large-argument branch of `erfc`.
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_29;

/// Threshold between the central `erf` expansion and the `erfc` rationals.
const ERF_SPLIT: f64 = 0.46875;

// Rational coefficients for erf on |x| <= 0.46875.
const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_56e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_47e3,
    1.857_777_061_846_031_53e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_09e1,
    2.440_246_379_344_441_73e2,
    1.282_616_526_077_372_28e3,
    2.844_236_833_439_170_62e3,
];

// Rational coefficients for exp(x^2) * erfc(x) on 0.46875 < x <= 4.
const ERFC_C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_375_94e0,
    6.611_919_063_714_162_95e1,
    2.986_351_381_974_001_31e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_58e3,
    2.051_078_377_826_071_47e3,
    1.230_339_354_797_997_25e3,
    2.153_115_354_744_038_46e-8,
];
const ERFC_D: [f64; 8] = [
    1.574_492_611_070_983_47e1,
    1.176_939_508_913_124_99e2,
    5.371_811_018_620_098_58e2,
    1.621_389_574_566_690_19e3,
    3.290_799_235_733_459_63e3,
    4.362_619_090_143_247_16e3,
    3.439_367_674_143_721_64e3,
    1.230_339_354_803_749_42e3,
];

// Rational coefficients for the x > 4 asymptotic correction.
const ERFC_P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const ERFC_Q: [f64; 5] = [
    2.568_520_192_289_822_42e0,
    1.872_952_849_923_460_47e0,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];

/// `erf(x)` for `|x| <= 0.46875`.
fn erf_small(x: f64) -> f64 {
    let z = x * x;
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// Scaled complementary error function `exp(x^2) * erfc(x)` for
/// `x > 0.46875`. Bounded and smooth, so it is safe at any magnitude.
fn erfc_scaled_upper(x: f64) -> f64 {
    if x <= 4.0 {
        let mut num = ERFC_C[8] * x;
        let mut den = x;
        for i in 0..7 {
            num = (num + ERFC_C[i]) * x;
            den = (den + ERFC_D[i]) * x;
        }
        (num + ERFC_C[7]) / (den + ERFC_D[7])
    } else {
        let z = 1.0 / (x * x);
        let mut num = ERFC_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + ERFC_P[i]) * z;
            den = (den + ERFC_Q[i]) * z;
        }
        let corr = z * (num + ERFC_P[4]) / (den + ERFC_Q[4]);
        (FRAC_1_SQRT_PI - corr) / x
    }
}

/// Splits `exp(-x^2)` as `exp(-hi) * exp(-lo)` where `hi = trunc(16x)/16`
/// squared is exact; this is the trick Cody uses to avoid losing relative
/// accuracy in the exponential for large arguments.
fn exp_neg_xx(x: f64) -> f64 {
    let ysq = (x * 16.0).trunc() / 16.0;
    let del = (x - ysq) * (x + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// Complementary error function.
///
/// Relative error stays below roughly 1e-15 until the result underflows
/// near `x = 26.6`.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    if ax <= ERF_SPLIT {
        return 1.0 - erf_small(x);
    }
    let upper = exp_neg_xx(ax) * erfc_scaled_upper(ax);
    if x >= 0.0 {
        upper
    } else {
        2.0 - upper
    }
}

/// Natural log of `erfc(x)`, valid far beyond the underflow point of
/// `erfc` itself.
pub fn ln_erfc(x: f64) -> f64 {
    if x < -ERF_SPLIT {
        // erfc(x) = 2 - erfc(-x); expanding inside the log keeps the tiny
        // complement instead of rounding it away against 2.
        let u = exp_neg_xx(-x) * erfc_scaled_upper(-x);
        std::f64::consts::LN_2 + (-0.5 * u).ln_1p()
    } else if x <= ERF_SPLIT {
        // erfc is >= erfc(0.46875) ~ 0.507 here; no cancellation concern.
        erfc(x).ln()
    } else {
        -x * x + erfc_scaled_upper(x).ln()
    }
}

/// Standard normal density.
pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

/// Log of the standard normal density.
pub fn ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal cumulative distribution function.
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal survival function `1 - cdf(z)`, computed without
/// cancellation for large `z`.
pub fn sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Log of the standard normal cumulative distribution function.
pub fn ln_cdf(z: f64) -> f64 {
    if z >= ERF_SPLIT * SQRT_2 {
        // cdf is close to 1; log1p on the small survival mass keeps the
        // full relative accuracy of the result.
        (-sf(z)).ln_1p()
    } else {
        // Both terms are O(1) or the first dominates; no cancellation.
        ln_erfc(-z / SQRT_2) - std::f64::consts::LN_2
    }
}

/// Log of the standard normal survival function.
pub fn ln_sf(z: f64) -> f64 {
    ln_cdf(-z)
}

// Wichura PPND16 coefficients: central region |p - 0.5| <= 0.425.
const PPND_A: [f64; 8] = [
    3.387_132_872_796_366_608e0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const PPND_B: [f64; 7] = [
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];

// Intermediate region: r = sqrt(-ln(min(p, 1-p))) in (1.6, 5].
const PPND_C: [f64; 8] = [
    1.423_437_110_749_683_577_34e0,
    4.630_337_846_156_545_295_9e0,
    5.769_497_221_460_691_405_5e0,
    3.647_848_324_763_204_605_04e0,
    1.270_458_252_452_368_382_58e0,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const PPND_D: [f64; 7] = [
    2.053_191_626_637_758_821_87e0,
    1.676_384_830_183_803_849_4e0,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];

// Tail region: r > 5.
const PPND_E: [f64; 8] = [
    6.657_904_643_501_103_777_2e0,
    5.463_784_911_164_114_369_9e0,
    1.784_826_539_917_291_335_8e0,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const PPND_F: [f64; 7] = [
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

fn ppnd_ratio(r: f64, num: &[f64; 8], den: &[f64; 7]) -> f64 {
    let mut n = num[7];
    for i in (0..7).rev() {
        n = n * r + num[i];
    }
    let mut d = den[6];
    for i in (0..6).rev() {
        d = d * r + den[i];
    }
    n / (d * r + 1.0)
}

/// Standard normal quantile for `p` in the open interval (0, 1).
///
/// Returns `NAN` outside (0, 1); callers validate their own probability
/// arguments so they can report domain errors with context.
pub fn quantile(p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return f64::NAN;
    }
    let q = p - 0.5;
    let mut z = if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        q * ppnd_ratio(r, &PPND_A, &PPND_B)
    } else {
        let tail = p.min(1.0 - p);
        let r = (-tail.ln()).sqrt();
        let mag = if r <= 5.0 {
            ppnd_ratio(r - 1.6, &PPND_C, &PPND_D)
        } else {
            ppnd_ratio(r - 5.0, &PPND_E, &PPND_F)
        };
        if q < 0.0 {
            -mag
        } else {
            mag
        }
    };
    // One Newton step in whichever tail representation avoids cancellation.
    // Skipped in the extreme tails where cdf/sf digits drown in rounding;
    // the rational approximation alone is already near machine accuracy.
    if p >= 1e-250 && p <= 1.0 - 1e-16 && z.abs() < 30.0 {
        let err = if p <= 0.5 { cdf(z) - p } else { p - 0.5 - (0.5 - sf(z)) };
        z -= err / pdf(z);
    }
    z
}
