//! Log-gamma and digamma with tight absolute-error contracts.
//!
//! `log_gamma` keeps absolute error at or below 1e-10 across [0.5, 1e6].
//! Near the top of that range one ulp of the result is ~1.9e-9, so the
//! contract requires a correctly rounded result; the implementation
//! therefore evaluates the Stirling series in double-double arithmetic
//! and lifts small arguments with the recurrence
//! ln Γ(x) = ln Γ(x + k) − ln Π (x + j).
//! `digamma` uses the same lift with a plain f64 asymptotic series, which
//! lands around 1e-15 relative error, far inside its 1e-8 contract.

use crate::error::{Error, Result};

/// Arguments at or above this evaluate directly via the Stirling series.
const LIFT_THRESHOLD: f64 = 20.0;

/// B_{2n} / (2n (2n-1)), n = 1..=10, for the log-gamma Stirling tail.
const STIRLING_C: [f64; 10] = [
    0.08333333333333333,
    -0.002777777777777778,
    0.0007936507936507937,
    -0.0005952380952380953,
    0.0008417508417508417,
    -0.0019175269175269176,
    0.00641025641025641,
    -0.029550653594771242,
    0.17964437236883057,
    -1.3924322169059011,
];

/// B_{2n} / (2n), n = 1..=7, for the digamma asymptotic tail.
const DIGAMMA_C: [f64; 7] = [
    0.08333333333333333,
    -0.008333333333333333,
    0.003968253968253968,
    -0.004166666666666667,
    0.007575757575757576,
    -0.021092796092796094,
    0.08333333333333333,
];

/// Natural log of the gamma function for positive `x`.
///
/// Absolute error stays at or below 1e-10 on [0.5, 1e6]; outside that range
/// the result is still accurate to a few ulps.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive(x, "log_gamma")?;
    Ok(ln_gamma_raw(x))
}

/// Digamma (psi) function for positive `x`.
///
/// Absolute error stays at or below 1e-8 on [0.5, 1e6].
pub fn digamma(x: f64) -> Result<f64> {
    check_positive(x, "digamma")?;
    Ok(digamma_raw(x))
}

fn check_positive(x: f64, what: &str) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!(
            "{what} needs a positive finite argument, got {x}"
        )));
    }
    Ok(())
}

pub(crate) fn ln_gamma_raw(x: f64) -> f64 {
    if x >= LIFT_THRESHOLD {
        return stirling(Dd::from_f64(x)).to_f64();
    }
    // Lift into the Stirling range: ln Γ(x) = ln Γ(x + k) − ln Π_{j<k} (x + j).
    let k = (LIFT_THRESHOLD - x).ceil() as usize;
    let mut prod = Dd::from_f64(x);
    for j in 1..k {
        prod = prod.mul(Dd::two_sum(x, j as f64));
    }
    let z = Dd::two_sum(x, k as f64);
    stirling(z).sub(ln_dd(prod)).to_f64()
}

/// Stirling series in double-double: (z − 1/2) ln z − z + ln(2π)/2 + tail.
fn stirling(z: Dd) -> Dd {
    const HALF_LN_2PI: Dd = Dd {
        hi: 0.9189385332046728,
        lo: -3.8782941580672414e-17,
    };
    let zf = z.hi;
    let w = 1.0 / (zf * zf);
    let mut tail = 0.0;
    for &c in STIRLING_C.iter().rev() {
        tail = tail * w + c;
    }
    tail /= zf;
    z.add_f64(-0.5)
        .mul(ln_dd(z))
        .sub(z)
        .add(HALF_LN_2PI)
        .add_f64(tail)
}

pub(crate) fn digamma_raw(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut z = x;
    while z < LIFT_THRESHOLD {
        shift += 1.0 / z;
        z += 1.0;
    }
    let w = 1.0 / (z * z);
    let mut tail = 0.0;
    for &c in DIGAMMA_C.iter().rev() {
        tail = tail * w + c;
    }
    z.ln() - 0.5 / z - tail * w - shift
}

/// Natural log of a positive double-double value, accurate to ~1e-30 relative.
fn ln_dd(x: Dd) -> Dd {
    const LN2: Dd = Dd {
        hi: 0.6931471805599453,
        lo: 2.3190468138462996e-17,
    };
    const SQRT2: f64 = 1.4142135623730951;

    debug_assert!(x.hi > 0.0);
    let mut hi = x.hi;
    let mut e = 0i64;
    if hi < f64::MIN_POSITIVE {
        hi *= 18014398509481984.0; // 2^54 rescue for subnormals
        e -= 54;
    }
    let bits = hi.to_bits();
    e += ((bits >> 52) & 0x7FF) as i64 - 1023;
    let mut m = f64::from_bits((bits & 0x000F_FFFF_FFFF_FFFF) | 0x3FF0_0000_0000_0000);
    if m > SQRT2 {
        m *= 0.5;
        e += 1;
    }

    // ln m = 2 atanh t with t = (m-1)/(m+1); |t| <= 0.1716 so the series
    // gains ~1.53 digits per term and 21 terms reach double-double precision.
    let t = Dd::from_f64(m - 1.0).div(Dd::two_sum(m, 1.0));
    let t2 = t.mul(t);
    let mut term = t;
    let mut acc = t;
    for n in 1..=21 {
        term = term.mul(t2);
        acc = acc.add(term.div_f64((2 * n + 1) as f64));
    }
    let mut r = acc.add(acc).add(LN2.mul_f64(e as f64));
    // Fold in the low word of the argument: ln(hi + lo) = ln hi + ln(1 + lo/hi).
    if x.lo != 0.0 {
        r = r.add_f64(x.lo / x.hi);
    }
    r
}

/// Unevaluated sum of two doubles with |lo| <= ulp(hi)/2.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from_f64(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    /// Exact sum of two doubles (Knuth two-sum).
    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Self { hi: s, lo: err }
    }

    /// Renormalization assuming |a| >= |b|.
    fn quick_two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let err = b - (s - a);
        Self { hi: s, lo: err }
    }

    /// Exact product of two doubles via fused multiply-add.
    fn two_prod(a: f64, b: f64) -> Self {
        let p = a * b;
        let err = a.mul_add(b, -p);
        Self { hi: p, lo: err }
    }

    fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        Self::quick_two_sum(s.hi, s.lo + self.lo + o.lo)
    }

    fn add_f64(self, o: f64) -> Self {
        let s = Self::two_sum(self.hi, o);
        Self::quick_two_sum(s.hi, s.lo + self.lo)
    }

    fn sub(self, o: Self) -> Self {
        self.add(Self {
            hi: -o.hi,
            lo: -o.lo,
        })
    }

    fn mul(self, o: Self) -> Self {
        let p = Self::two_prod(self.hi, o.hi);
        Self::quick_two_sum(p.hi, p.lo + self.hi * o.lo + self.lo * o.hi)
    }

    fn mul_f64(self, o: f64) -> Self {
        let p = Self::two_prod(self.hi, o);
        Self::quick_two_sum(p.hi, p.lo + self.lo * o)
    }

    fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul_f64(q1));
        let q2 = r.hi / o.hi;
        let r2 = r.sub(o.mul_f64(q2));
        let q3 = r2.hi / o.hi;
        Self::quick_two_sum(q1, q2 + q3)
    }

    fn div_f64(self, o: f64) -> Self {
        self.div(Self::from_f64(o))
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    const GOLDEN: [(f64, f64, f64); 10] = [
        (0.5, 0.5723649429247001, -1.9635100260214235),
        (0.9039718406636753, 0.06339292137331645, -0.7473160812893304),
        (2.954776917479486, 0.6518222701561499, 0.9047647505675602),
        (9.658162167595497, 12.038312675197083, 2.215141280853317),
        (31.569251777945954, 76.60908787671103, 3.4362617980220977),
        (250.84845531135187, 1133.208226676946, 5.52285443345075),
        (4845.470121775741, 36268.89412265631, 8.485696359264733),
        (51769.68364411718, 510162.94526457886, 10.854550340888519),
        (553114.574490408, 6760890.994731515, 13.22331954221566),
        (1000000.0, 12815504.569147611, 13.815510057964191),
    ];

    #[test]
    fn log_gamma_matches_golden_values() {
        for &(x, lg, _) in &GOLDEN {
            let got = log_gamma(x).unwrap();
            assert!(
                (got - lg).abs() <= 1e-10,
                "log_gamma({x}) = {got}, want {lg}"
            );
        }
    }

    #[test]
    fn digamma_matches_golden_values() {
        for &(x, _, dg) in &GOLDEN {
            let got = digamma(x).unwrap();
            assert!(
                (got - dg).abs() <= 1e-8,
                "digamma({x}) = {got}, want {dg}"
            );
        }
    }

    #[test]
    fn named_points() {
        assert!((log_gamma(1.0).unwrap()).abs() <= 1e-13);
        assert!((log_gamma(2.0).unwrap()).abs() <= 1e-13);
        assert!((log_gamma(7.25).unwrap() - 7.0521854507385395).abs() <= 1e-12);
        assert!((digamma(1.0).unwrap() - -0.5772156649015329).abs() <= 1e-10);
        assert!((digamma(2.0).unwrap() - 0.42278433509846713).abs() <= 1e-10);
    }

    #[test]
    fn log_gamma_recurrence_holds() {
        let mut rng = crate::seed::stream(&[101]);
        for _ in 0..300 {
            let x = 10f64.powf(rng.gen_range(-0.301..5.999));
            let lhs = log_gamma(x + 1.0).unwrap();
            let rhs = log_gamma(x).unwrap() + x.ln();
            let scale = lhs.abs().max(1.0);
            assert!(
                (lhs - rhs).abs() / scale <= 1e-9,
                "recurrence fails at x={x}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn digamma_recurrence_holds() {
        let mut rng = crate::seed::stream(&[102]);
        for _ in 0..300 {
            let x = 10f64.powf(rng.gen_range(-0.301..5.999));
            let lhs = digamma(x + 1.0).unwrap();
            let rhs = digamma(x).unwrap() + 1.0 / x;
            let scale = lhs.abs().max(1.0);
            assert!(
                (lhs - rhs).abs() / scale <= 1e-8,
                "recurrence fails at x={x}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn digamma_consistent_with_log_gamma_slope() {
        let mut rng = crate::seed::stream(&[103]);
        for _ in 0..200 {
            let x = 10f64.powf(rng.gen_range(-0.301..5.999));
            let h = 1e-6 * x.max(1.0);
            let fd = (log_gamma(x + h).unwrap() - log_gamma(x - h).unwrap()) / (2.0 * h);
            let dg = digamma(x).unwrap();
            assert!(
                (fd - dg).abs() / dg.abs().max(1e-8) <= 1e-4,
                "digamma mismatch at x={x}: fd={fd}, psi={dg}"
            );
        }
    }

    #[test]
    fn log_gamma_monotone_and_convex_above_two() {
        // Convexity shows up as a non-decreasing digamma.
        let mut prev_lg = log_gamma(2.0).unwrap();
        let mut prev_dg = digamma(2.0).unwrap();
        let mut x = 2.0;
        while x < 1e6 {
            x *= 1.17;
            let lg = log_gamma(x).unwrap();
            let dg = digamma(x).unwrap();
            assert!(lg >= prev_lg, "log_gamma not increasing at {x}");
            assert!(dg >= prev_dg, "digamma not increasing at {x}");
            prev_lg = lg;
            prev_dg = dg;
        }
    }

    #[test]
    fn rejects_out_of_domain_arguments() {
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            assert!(log_gamma(bad).is_err(), "log_gamma accepted {bad}");
            assert!(digamma(bad).is_err(), "digamma accepted {bad}");
        }
    }

    #[test]
    fn handles_arguments_far_outside_the_contract_range() {
        // Reparametrized degrees of freedom can push arguments to ~1e-9 or ~1e12.
        let tiny = log_gamma(5e-9).unwrap();
        assert!((tiny - (1.0f64 / 5e-9).ln()).abs() / tiny.abs() < 1e-6);
        let huge = log_gamma(5e11).unwrap();
        assert!(huge.is_finite() && huge > 0.0);
        assert!(digamma(5e-9).unwrap() < -1e8);
        assert!(digamma(5e11).unwrap().is_finite());
    }

    #[test]
    fn random_points_agree_with_recurrence_lifted_reference() {
        // Cross-check the two code paths against each other across the seam.
        let mut rng = crate::seed::stream(&[104]);
        for _ in 0..200 {
            let x = rng.gen_range(18.0..22.0);
            let direct = ln_gamma_raw(x);
            let lifted = ln_gamma_raw(x + 3.0) - ((x + 1.0) * (x + 2.0) * x).ln();
            assert!(
                (direct - lifted).abs() / direct.abs().max(1.0) <= 1e-13,
                "seam mismatch at {x}"
            );
        }
    }
}
