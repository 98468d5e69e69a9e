//! Standard normal distribution function and its inverse.
//!
//! The distribution function uses Cody's rational Chebyshev approximations
//! (absolute error near machine precision over the whole line). The quantile
//! starts from Acklam's rational approximation and takes one Halley step
//! against the distribution function.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_94;
const SQRT_2PI: f64 = 2.506_628_274_631_000_502_4;
const SQRT_32: f64 = 5.656_854_249_492_380_195_2;
const SPLIT_CENTRAL: f64 = 0.674_489_75;

const A: [f64; 5] = [
    2.235_252_035_460_683_928_7,
    161.028_231_068_555_878_81,
    1_067.689_485_460_370_958_2,
    18_154.981_253_343_561_249,
    0.065_682_337_918_207_449_113,
];
const B: [f64; 4] = [
    47.202_581_904_688_241_87,
    976.098_551_737_773_193_22,
    10_260.932_208_618_978_205,
    45_507.789_335_026_729_956,
];
const C: [f64; 9] = [
    0.398_941_512_088_134_667_64,
    8.883_149_794_388_375_941_2,
    93.506_656_132_177_855_979,
    597.270_276_394_800_262_26,
    2_494.537_585_290_372_671_1,
    6_848.190_450_536_282_332_6,
    11_602.651_437_647_350_124,
    9_842.714_838_383_978_021_8,
    1.076_557_677_372_019_231_7e-8,
];
const D: [f64; 8] = [
    22.266_688_044_328_115_691,
    235.387_901_782_624_998_61,
    1_519.377_599_407_554_805,
    6_485.558_298_266_760_755,
    18_615.571_640_885_098_091,
    34_900.952_721_145_977_266,
    38_912.003_286_093_271_411,
    19_685.429_676_859_990_727,
];
const P: [f64; 6] = [
    0.215_898_534_057_956_99,
    0.127_401_161_160_247_363_9,
    0.022_235_277_870_649_807,
    0.001_421_619_193_227_893_466,
    2.911_287_495_116_879_2e-5,
    0.023_073_441_764_940_173_03,
];
const Q: [f64; 5] = [
    1.284_260_096_144_911_21,
    0.468_238_212_480_865_118,
    0.065_988_137_868_928_551_5,
    0.003_782_396_332_027_582_44,
    7.297_515_550_839_662_05e-5,
];

/// `exp(-y^2/2)` split so the square is formed without cancellation.
fn gaussian_tail_factor(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq * 0.5).exp() * (-del * 0.5).exp()
}

/// Returns `(Phi(x), 1 - Phi(x))`, each computed without cancellation.
fn cdf_pair(x: f64) -> (f64, f64) {
    let y = x.abs();
    if y <= SPLIT_CENTRAL {
        let (mut num, mut den) = (0.0, 0.0);
        if y > f64::EPSILON * 0.5 {
            let xsq = x * x;
            num = A[4] * xsq;
            den = xsq;
            for i in 0..3 {
                num = (num + A[i]) * xsq;
                den = (den + B[i]) * xsq;
            }
        }
        let t = x * (num + A[3]) / (den + B[3]);
        return (0.5 + t, 0.5 - t);
    }
    let tail = if y <= SQRT_32 {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        gaussian_tail_factor(y) * (num + C[7]) / (den + D[7])
    } else if y < 40.0 {
        let xsq = 1.0 / (x * x);
        let mut num = P[5] * xsq;
        let mut den = xsq;
        for i in 0..4 {
            num = (num + P[i]) * xsq;
            den = (den + Q[i]) * xsq;
        }
        let t = xsq * (num + P[4]) / (den + Q[4]);
        gaussian_tail_factor(y) * (FRAC_1_SQRT_2PI - t) / y
    } else {
        0.0
    };
    if x > 0.0 {
        (1.0 - tail, tail)
    } else {
        (tail, 1.0 - tail)
    }
}

/// Standard normal distribution function `Phi(x)`.
pub fn normal_cdf<T: Scalar>(x: T) -> Result<T> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "normal_cdf needs a finite argument, got {x}"
        )));
    }
    Ok(T::c(cdf_pair(x.to_f64_lossy()).0))
}

/// Upper tail `1 - Phi(x)`, accurate far into the tail.
pub fn normal_sf<T: Scalar>(x: T) -> Result<T> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "normal_sf needs a finite argument, got {x}"
        )));
    }
    Ok(T::c(cdf_pair(x.to_f64_lossy()).1))
}

pub fn normal_pdf<T: Scalar>(x: T) -> T {
    T::c(FRAC_1_SQRT_2PI) * (-(x * x) / T::c(2.0)).exp()
}

// Acklam's coefficients.
const QA: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const QB: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const QC: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const QD: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const Q_LOW: f64 = 0.024_25;

fn lower_tail_guess(t: f64) -> f64 {
    let q = (-2.0 * t.ln()).sqrt();
    (((((QC[0] * q + QC[1]) * q + QC[2]) * q + QC[3]) * q + QC[4]) * q + QC[5])
        / ((((QD[0] * q + QD[1]) * q + QD[2]) * q + QD[3]) * q + 1.0)
}

fn quantile_guess(u: f64) -> f64 {
    if u < Q_LOW {
        lower_tail_guess(u)
    } else if u > 1.0 - Q_LOW {
        -lower_tail_guess(1.0 - u)
    } else {
        let q = u - 0.5;
        let r = q * q;
        (((((QA[0] * r + QA[1]) * r + QA[2]) * r + QA[3]) * r + QA[4]) * r + QA[5]) * q
            / (((((QB[0] * r + QB[1]) * r + QB[2]) * r + QB[3]) * r + QB[4]) * r + 1.0)
    }
}

/// Standard normal quantile `Phi^{-1}(u)` for `0 < u < 1`.
pub fn normal_quantile<T: Scalar>(u: T) -> Result<T> {
    let uf = u.to_f64_lossy();
    if !(uf > 0.0 && uf < 1.0) {
        return Err(Error::Domain(format!(
            "normal_quantile needs 0 < u < 1, got {u}"
        )));
    }
    if uf == 0.5 {
        return Ok(T::zero());
    }
    let mut x = quantile_guess(uf);
    if x.abs() > 37.0 {
        // the Halley correction overflows this far out; the guess already
        // carries full relative accuracy here
        return Ok(T::c(x));
    }
    let (cum, ccum) = cdf_pair(x);
    // 1 - u is exact for u >= 1/2
    let e = if uf < 0.5 {
        cum - uf
    } else {
        (1.0 - uf) - ccum
    };
    let step = e * SQRT_2PI * (x * x / 2.0).exp();
    x -= step / (1.0 + x * step / 2.0);
    Ok(T::c(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_symmetry() {
        assert_eq!(normal_cdf(0.0).unwrap(), 0.5);
        for &x in &[0.1, 0.7, 1.3, 2.5, 4.0, 7.5] {
            let s: f64 = normal_cdf(x).unwrap() + normal_cdf(-x).unwrap();
            assert!((s - 1.0).abs() < 1e-15, "x = {x}");
        }
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(normal_cdf(f64::NAN).is_err());
        assert!(normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        let x: f64 = normal_quantile(normal_cdf(1.3f64).unwrap()).unwrap();
        assert!((x - 1.3).abs() < 1e-9);
    }

    #[test]
    fn quantile_domain() {
        for u in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(normal_quantile(u), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn tail_quantile_round_trip() {
        for &u in &[
            1e-12,
            1e-8,
            1e-5,
            0.01,
            0.3,
            0.9,
            0.999,
            1.0 - 1e-4,
            1.0 - 1e-9,
        ] {
            let x = normal_quantile(u).unwrap();
            let back: f64 = normal_cdf(x).unwrap();
            assert!((back - u).abs() < 1e-10 * u.max(1e-3), "u = {u}");
        }
    }

    #[test]
    fn single_precision_quantile() {
        let x: f32 = normal_quantile(0.975f32).unwrap();
        assert!((x - 1.959_964).abs() < 1e-5);
    }
}
