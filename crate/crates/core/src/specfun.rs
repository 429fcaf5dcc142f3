//! Laguerre polynomials, the Bessel function J0 and the identities that
//! tie them together:
//!
//! - generating function `sum_n L_n(z) s^n = exp(-z s / (1 - s)) / (1 - s)`,
//! - the scaling limit `L_n(z / n) -> J0(2 sqrt z)`,
//! - the Laplace transform `int_0^inf (dt / l) e^{-t/l} J0(sqrt(2t) |z|) = exp(-l z^2 / 2)`.

use crate::error::{domain, Error, Result};
use crate::numeric;

/// `L_0(x), ..., L_N(x)` for one argument.
#[derive(Debug, Clone, PartialEq)]
pub struct LaguerreSeq {
    pub values: Vec<f64>,
    pub argument: f64,
    pub order: usize,
}

impl LaguerreSeq {
    /// Upward three-term recurrence `(n+1) L_{n+1} = (2n+1-x) L_n - n L_{n-1}`.
    pub fn new(order: usize, x: f64) -> Result<Self> {
        check_laguerre_arg(x)?;
        let mut values = Vec::with_capacity(order + 1);
        let mut iter = LaguerreIter::new(x);
        for _ in 0..=order {
            values.push(iter.next_value());
        }
        Ok(Self { values, argument: x, order })
    }
}

fn check_laguerre_arg(x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return domain(format!("Laguerre argument must be finite and >= 0, got {x}"));
    }
    Ok(())
}

/// Streams `L_0(x), L_1(x), ...` without storing them.
#[derive(Debug, Clone)]
pub(crate) struct LaguerreIter {
    x: f64,
    n: usize,
    prev: f64,
    cur: f64,
}

impl LaguerreIter {
    pub(crate) fn new(x: f64) -> Self {
        Self { x, n: 0, prev: 0.0, cur: 1.0 }
    }

    /// Returns `L_n(x)` for the current `n` and advances.
    pub(crate) fn next_value(&mut self) -> f64 {
        let out = self.cur;
        let n = self.n as f64;
        let next = ((2.0 * n + 1.0 - self.x) * self.cur - n * self.prev) / (n + 1.0);
        self.prev = self.cur;
        self.cur = next;
        self.n += 1;
        out
    }
}

/// `L_n(x)` by upward recurrence.
pub fn laguerre(n: usize, x: f64) -> Result<f64> {
    check_laguerre_arg(x)?;
    let mut it = LaguerreIter::new(x);
    for _ in 0..n {
        it.next_value();
    }
    Ok(it.next_value())
}

/// Distance between the partial sum `sum_{n<=N} L_n(z) s^n` and its
/// closed form `exp(-z s/(1-s)) / (1-s)`.
pub fn laguerre_genfun_residual(z: f64, s: f64, terms: usize) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("generating-function parameter s must lie in (0, 1), got {s}"));
    }
    check_laguerre_arg(z)?;
    let mut it = LaguerreIter::new(z);
    let mut acc = numeric::CompensatedSum::new();
    let mut power = 1.0;
    for _ in 0..=terms {
        acc.add(it.next_value() * power);
        power *= s;
    }
    Ok((acc.value() - laguerre_genfun_closed(z, s)).abs())
}

pub fn laguerre_genfun_closed(z: f64, s: f64) -> f64 {
    (-z * s / (1.0 - s)).exp() / (1.0 - s)
}

/// Arguments below this use the power series; above it the Hankel-type
/// rational approximation.
pub const J0_SWITCH: f64 = 12.0;

/// Bessel function of the first kind of order zero.
///
/// For `|x| < 12` the power series `sum (-x^2/4)^l / (l!)^2` is summed in
/// double-double arithmetic, which keeps the absolute error near 1e-16
/// despite terms of size ~4e3. For `|x| >= 12`, `sqrt(2/(pi x)) (P cos(x - pi/4)
/// - Q sin(x - pi/4))` with the Cephes rational forms for `P` and `Q`.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x.is_nan() {
        return f64::NAN;
    }
    if x < J0_SWITCH {
        j0_series(x)
    } else {
        j0_asymptotic(x)
    }
}

pub(crate) fn j0_series(x: f64) -> f64 {
    // q = -x^2/4 exactly as a double-double
    let (hi, lo) = two_prod(x, x);
    let q = Dd { hi: -0.25 * hi, lo: -0.25 * lo };
    let mut term = Dd { hi: 1.0, lo: 0.0 };
    let mut sum = term;
    let mut l = 1.0f64;
    loop {
        term = term.mul(q).div(l * l);
        sum = sum.add(term);
        // alternating with decreasing magnitude once l > x/2
        if 2.0 * l > x && term.hi.abs() < 1e-20 {
            break;
        }
        l += 1.0;
    }
    sum.hi + sum.lo
}

pub(crate) fn j0_asymptotic(x: f64) -> f64 {
    const PP: [f64; 7] = [
        7.969_367_292_973_471e-4,
        8.283_523_921_074_408e-2,
        1.239_533_716_464_143,
        5.447_250_030_587_687,
        8.747_165_001_998_17,
        5.303_240_382_353_949,
        1.0,
    ];
    const PQ: [f64; 7] = [
        9.244_088_105_588_637e-4,
        8.562_884_743_544_745e-2,
        1.253_527_439_010_589_5,
        5.470_977_403_304_171,
        8.761_908_832_370_695,
        5.306_052_882_353_947,
        1.0,
    ];
    const QP: [f64; 8] = [
        -1.136_638_388_984_691_6e-2,
        -1.282_527_186_705_093_1,
        -1.955_395_442_577_359_7e1,
        -9.320_601_521_237_683e1,
        -1.776_811_679_804_880_6e2,
        -1.470_775_051_549_511_8e2,
        -5.141_053_267_665_993e1,
        -6.050_143_506_007_285,
    ];
    const QQ: [f64; 7] = [
        6.431_782_561_181_78e1,
        8.564_300_259_769_806e2,
        3.882_401_836_054_016_3e3,
        7.240_467_741_956_525e3,
        5.930_727_011_873_169e3,
        2.062_093_316_603_278_3e3,
        2.420_057_402_402_914e2,
    ];
    let w = 5.0 / x;
    let q = 25.0 / (x * x);
    let p = polevl(q, &PP) / polevl(q, &PQ);
    let qq = polevl(q, &QP) / p1evl(q, &QQ);
    let xn = x - std::f64::consts::FRAC_PI_4;
    let v = p * xn.cos() - w * qq * xn.sin();
    v * (2.0 / std::f64::consts::PI).sqrt() / x.sqrt()
}

fn polevl(x: f64, coef: &[f64]) -> f64 {
    coef.iter().fold(0.0, |acc, &c| acc * x + c)
}

fn p1evl(x: f64, coef: &[f64]) -> f64 {
    coef.iter().fold(1.0, |acc, &c| acc * x + c)
}

/// `|L_n(z/n) - J0(2 sqrt z)|`.
pub fn laguerre_limit_gap(z: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return domain("laguerre_limit_gap needs n >= 1");
    }
    let lhs = laguerre(n, z / n as f64)?;
    Ok((lhs - bessel_j0(2.0 * z.sqrt())).abs())
}

/// `int_0^inf (dt / lambda) e^{-t/lambda} J0(sqrt(2t) |z|)` by adaptive
/// quadrature, truncated at `t = lambda ln(1/tol) + 50 lambda`.
///
/// With `t = lambda u` the integrand is `e^{-u} J0(sqrt(2 lambda u) |z|)`,
/// which is analytic in `u`; the dropped tail is below `e^{-U}`.
pub fn laplace_j0_lhs(lambda: f64, z: f64, quad_tol: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    if !(quad_tol > 0.0) {
        return domain(format!("quad_tol must be positive, got {quad_tol}"));
    }
    let upper = (1.0 / quad_tol).ln().max(0.0) + 50.0;
    let c = (2.0 * lambda).sqrt() * z.abs();
    let q = numeric::integrate(|u| (-u).exp() * bessel_j0(c * u.sqrt()), 0.0, upper, 0.05 * quad_tol, 0.0, 4000)
        .map_err(|e| match e {
            Error::Numeric { residual, .. } => {
                Error::Numeric { message: "Laplace-Bessel quadrature did not converge".into(), residual }
            }
            other => other,
        })?;
    Ok(q.value)
}

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = two_sum(s, e);
        Dd { hi, lo }
    }

    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = two_sum(p, e);
        Dd { hi, lo }
    }

    fn div(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let (p, e) = two_prod(q1, b);
        let r = (self.hi - p - e + self.lo) / b;
        let (hi, lo) = two_sum(q1, r);
        Dd { hi, lo }
    }
}
