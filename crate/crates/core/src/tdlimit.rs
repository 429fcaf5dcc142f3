//! Thermodynamic-limit formulas: perfect-gas densities, critical densities,
//! the quadratic form `A`, limit generating functionals, the Kac mixture
//! and the constants governing the decay of `mu_V`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lattice::{gamma_half, radial_measure, ModelParams, TestFunction};
use crate::numeric::{self, integrate};
use crate::specfun::bessel_j0;

const QUAD_ABS: f64 = 1e-15;
const QUAD_REL: f64 = 1e-12;
const QUAD_PANELS: usize = 4000;

/// Radial quadrature of `k^{d-1} f(k)` on `[0, k_max]`, split at the given
/// interior points.
fn radial_integral<F: Fn(f64) -> f64>(f: F, d: usize, splits: &[f64], k_max: f64) -> Result<f64> {
    let mut edges = vec![0.0];
    edges.extend(splits.iter().copied().filter(|&s| s > 0.0 && s < k_max));
    edges.push(k_max);
    edges.sort_by(f64::total_cmp);
    let mut acc = numeric::CompensatedSum::new();
    for w in edges.windows(2) {
        let q = integrate(|k| k.powi(d as i32 - 1) * f(k), w[0], w[1], QUAD_ABS, QUAD_REL, QUAD_PANELS)?;
        acc.add(q.value);
    }
    Ok(acc.value())
}

fn check_mu(mu: f64, d: usize, what: &str) -> Result<()> {
    if !(mu <= 0.0) {
        return domain(format!("{what} needs mu <= 0, got {mu}"));
    }
    if mu == 0.0 && d <= 2 {
        return Err(Error::Divergence(format!("{what} diverges at mu = 0 in d = {d}")));
    }
    Ok(())
}

/// Perfect-gas density `(2 pi)^{-d} int d^dk / (e^{beta(kinetic k^2 - mu)} - 1)`.
pub fn rho_p(beta: f64, mu: f64, d: usize, kinetic: f64) -> Result<f64> {
    if !(beta > 0.0 && kinetic > 0.0 && d >= 1) {
        return domain("rho_P needs beta > 0, kinetic > 0, d >= 1");
    }
    check_mu(mu, d, "rho_P")?;
    // in t = sqrt(beta kinetic) k the integrand is t^{d-1} / (e^{t^2 + alpha} - 1)
    let alpha = -beta * mu;
    if alpha > 700.0 {
        return Ok(0.0);
    }
    let splits = [alpha.sqrt(), 1.0];
    let t_max = 10.0;
    let core = radial_integral(|t| 1.0 / (t * t + alpha).exp_m1(), d, &splits, t_max)?;
    Ok(radial_measure(d) * (beta * kinetic).powf(-(d as f64) / 2.0) * core)
}

/// `rho_P(beta, 0)`; infinite (an error) for `d <= 2`.
pub fn rho_c_p(beta: f64, d: usize, kinetic: f64) -> Result<f64> {
    rho_p(beta, 0.0, d, kinetic)
}

/// Zero-mode condensate density `max(0, (mu - eps0) / g0)`.
pub fn rho_0_i(mu: f64, eps0: f64, g0: f64) -> f64 {
    if mu <= eps0 {
        0.0
    } else {
        (mu - eps0) / g0
    }
}

/// Critical density `rho_c^P + max(0, -eps0 / g0)`; `None` for `d <= 2`,
/// where it is infinite.
pub fn rho_c_i(beta: f64, params: &ModelParams) -> Result<Option<f64>> {
    params.validate()?;
    if params.d <= 2 {
        return Ok(None);
    }
    Ok(Some(rho_c_p(beta, params.d, params.kinetic)? + rho_0_i(0.0, params.eps0, params.g0)))
}

/// Limit density `rho_P(beta, mu) + rho_0(mu)` at `mu <= 0`.
pub fn rho_i(beta: f64, mu: f64, params: &ModelParams) -> Result<f64> {
    Ok(rho_p(beta, mu, params.d, params.kinetic)? + rho_0_i(mu, params.eps0, params.g0))
}

/// `A_{beta,mu}(h, h) = (2 pi)^{-d} int |h^(k)|^2 / (e^{beta(eps_k - mu)} - 1) d^dk`.
pub fn quad_form_a(beta: f64, mu: f64, tf: &TestFunction, d: usize, kinetic: f64) -> Result<f64> {
    check_mu(mu, d, "A_{beta,mu}")?;
    tf.validate()?;
    if tf.is_zero() {
        return Ok(0.0);
    }
    let rate = tf.min_width().powi(2) + beta * kinetic;
    let k_max = (90.0 / rate).sqrt();
    let k_gap = (-mu / kinetic).sqrt();
    let core = radial_integral(
        |k| tf.hat_abs_sq(k * k) / (beta * (kinetic * k * k - mu)).exp_m1(),
        d,
        &[k_gap, 0.25 * k_max],
        k_max,
    )?;
    Ok(radial_measure(d) * core)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

/// How the limit state is selected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StateInput {
    Mu(f64),
    Rho(f64),
}

/// Inverse of `rho_i(beta, .)` on `mu < 0`; `0` at and above the critical
/// density.
pub fn mu_of_rho_limit(beta: f64, rho: f64, params: &ModelParams) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return domain(format!("rho must be positive, got {rho}"));
    }
    if let Some(rc) = rho_c_i(beta, params)? {
        if rho >= rc {
            return Ok(0.0);
        }
    }
    let f = |mu: f64| -> Result<f64> { Ok(rho_i(beta, mu, params)? - rho) };
    let mut lo = params.eps0.min(0.0) - 1.0 / beta;
    let mut steps = 0;
    while f(lo)? > 0.0 {
        lo = 2.0 * lo - 1.0;
        steps += 1;
        if steps > 200 {
            return Err(Error::Solver { message: "no lower bracket for mu".into(), lo, hi: 0.0 });
        }
    }
    let hi = if params.d <= 2 { -f64::MIN_POSITIVE } else { 0.0 };
    numeric::bisect_increasing(f, lo, hi, 2000)
}

/// Everything the limit theory says at one state point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub rho_p: f64,
    pub rho_c_p: Option<f64>,
    pub rho_c_i: Option<f64>,
    pub rho_0_i: f64,
    pub mu_limit: f64,
    pub a_hh: f64,
    pub e_limit: f64,
    pub regime: Regime,
}

/// `J0(sqrt(2 rho_0) |h^_0|) exp(-||h||^2/4 - A_{beta,mu}(h,h)/2)` at `mu <= 0`.
fn genfun_at_mu(beta: f64, mu: f64, params: &ModelParams, tf: &TestFunction) -> Result<(f64, f64)> {
    let a = quad_form_a(beta, mu, tf, params.d, params.kinetic)?;
    let rho0 = rho_0_i(mu, params.eps0, params.g0);
    let j = bessel_j0((2.0 * rho0).sqrt() * tf.hat0().norm());
    Ok((j * (-0.25 * tf.norm_sq(params.d) - 0.5 * a).exp(), a))
}

pub fn limit_report(beta: f64, input: StateInput, params: &ModelParams, tf: &TestFunction) -> Result<LimitReport> {
    params.validate()?;
    tf.validate()?;
    if !(beta > 0.0) {
        return domain("beta must be positive");
    }
    let rc_p = if params.d > 2 { Some(rho_c_p(beta, params.d, params.kinetic)?) } else { None };
    let rc_i = rho_c_i(beta, params)?;
    let (mu, excess, regime) = match input {
        StateInput::Mu(mu) => {
            if mu > 0.0 {
                return domain(format!("no limit state at mu = {mu} > 0"));
            }
            let regime = if mu < 0.0 { Regime::Subcritical } else { Regime::Critical };
            (mu, 0.0, regime)
        }
        StateInput::Rho(rho) => {
            let mu = mu_of_rho_limit(beta, rho, params)?;
            match rc_i {
                Some(rc) if rho > rc => (0.0, rho - rc, Regime::Supercritical),
                Some(rc) if rho == rc => (0.0, 0.0, Regime::Critical),
                _ => (mu, 0.0, Regime::Subcritical),
            }
        }
    };
    let (base, a) = genfun_at_mu(beta, mu, params, tf)?;
    let e_limit = base * (-0.5 * tf.hat0().norm_sqr() * excess).exp();
    Ok(LimitReport {
        rho_p: rho_p(beta, mu, params.d, params.kinetic)?,
        rho_c_p: rc_p,
        rho_c_i: rc_i,
        rho_0_i: rho_0_i(mu, params.eps0, params.g0),
        mu_limit: mu,
        a_hh: a,
        e_limit,
        regime,
    })
}

/// Limit generating functional. Below the critical density it is
/// `J0(sqrt(2 rho_0) |h^_0|) exp(-||h||^2/4 - A/2)`; above, the same at
/// `mu = 0` times `exp(-|h^_0|^2 (rho - rho_c) / 2)`.
pub fn genfun_limit(beta: f64, input: StateInput, params: &ModelParams, tf: &TestFunction) -> Result<f64> {
    Ok(limit_report(beta, input, params, tf)?.e_limit)
}

/// `C = kinetic^{-d/2} / (g 2^{d-2} pi^{d/2} d (d+2) Gamma(d/2))`, so that
/// `(2 pi)^{-d} int_{eps_k < B} (B - eps_k)/g d^dk = C B^{(d+2)/2}`.
pub fn constant_c(d: usize, g: f64, kinetic: f64) -> Result<f64> {
    if d <= 2 {
        return domain(format!("C is defined for d > 2, got d = {d}"));
    }
    if !(g > 0.0 && kinetic > 0.0) {
        return domain("C needs g > 0 and kinetic > 0");
    }
    let df = d as f64;
    Ok(kinetic.powf(-df / 2.0) / (g * 2f64.powi(d as i32 - 2) * PI.powf(df / 2.0) * df * (df + 2.0) * gamma_half(d)))
}

/// `B = ((rho - rho_c) / C)^{2/(d+2)}`, the prefactor of `mu_V ~ B V^{-2/(d+2)}`.
pub fn b_of_rho(beta: f64, rho: f64, params: &ModelParams) -> Result<f64> {
    let g = match params.gk_profile {
        crate::lattice::GkProfile::Constant(g) => g,
        crate::lattice::GkProfile::Zero => return domain("B needs a constant coupling g > 0"),
    };
    let c = constant_c(params.d, g, params.kinetic)?;
    let rc = rho_c_i(beta, params)?.expect("d > 2 checked by constant_c");
    if rho < rc {
        return domain(format!("B needs rho >= rho_c = {rc}, got {rho}"));
    }
    Ok(((rho - rc) / c).powf(2.0 / (params.d as f64 + 2.0)))
}

/// `int K(dx) f(x)` for the Kac density `(1/lambda) e^{-(x - rho_c)/lambda}`
/// on `x > rho_c`, with `lambda = rho - rho_c`.
pub fn kac_integral<F: Fn(f64) -> f64>(rho: f64, rho_c: f64, f: F, quad_tol: f64) -> Result<f64> {
    let lambda = rho - rho_c;
    if !(lambda > 0.0) {
        return domain(format!("Kac measure needs rho > rho_c, got {rho} <= {rho_c}"));
    }
    if !(quad_tol > 0.0) {
        return domain("quad_tol must be positive");
    }
    // mass beyond u_max is e^{-u_max} times a bound on |f|
    let u_max = (1.0 / quad_tol).ln() + 50.0;
    let q = integrate(|u| (-u).exp() * f(rho_c + lambda * u), 0.0, u_max, 0.05 * quad_tol, 0.0, QUAD_PANELS)?;
    Ok(q.value)
}

/// `|int K(dx) E(mu=0) J0(sqrt(2(x - rho_c)) |h^_0|) - E(rho)|` for `rho`
/// above the critical density of `params`.
pub fn kac_mixture_check(beta: f64, rho: f64, params: &ModelParams, tf: &TestFunction, quad_tol: f64) -> Result<f64> {
    let rc = rho_c_i(beta, params)?
        .ok_or_else(|| Error::Domain(format!("no finite critical density in d = {}", params.d)))?;
    if rho <= rc {
        return domain(format!("Kac check needs rho > rho_c = {rc}"));
    }
    let (base, _) = genfun_at_mu(beta, 0.0, params, tf)?;
    let z = tf.hat0().norm();
    let mixed = kac_integral(rho, rc, |x| base * bessel_j0((2.0 * (x - rc)).sqrt() * z), quad_tol)?;
    let direct = genfun_limit(beta, StateInput::Rho(rho), params, tf)?;
    Ok((mixed - direct).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::GkProfile;
    use proptest::prelude::*;

    /// `(4 pi beta kinetic)^{-d/2} sum_j e^{j beta mu} j^{-d/2}`.
    fn rho_p_series(beta: f64, mu: f64, d: usize, kinetic: f64, terms: usize) -> f64 {
        let s: f64 = (1..=terms)
            .map(|j| {
                let j = j as f64;
                (j * beta * mu).exp() * j.powf(-(d as f64) / 2.0)
            })
            .sum();
        (4.0 * PI * beta * kinetic).powf(-(d as f64) / 2.0) * s
    }

    /// `zeta(3/2)` from the partial sum plus an Euler-Maclaurin tail.
    fn zeta_3_2() -> f64 {
        let n = 100_000usize;
        let partial: f64 = (1..n).rev().map(|j| (j as f64).powf(-1.5)).sum();
        let nf = n as f64;
        partial + 2.0 / nf.sqrt() + 0.5 * nf.powf(-1.5) + 1.5 / 12.0 * nf.powf(-2.5)
    }

    fn hi(eps0: f64) -> ModelParams {
        ModelParams::interacting(3, 10.0, eps0, 1.0, 1.0)
    }

    #[test]
    fn critical_density_matches_zeta() {
        let oracle = zeta_3_2() * (4.0 * PI).powf(-1.5);
        let v = rho_c_p(1.0, 3, 1.0).unwrap();
        assert!((v - oracle).abs() < 1e-10 * oracle, "{v} vs {oracle}");
        assert!((v - 0.058_64).abs() < 1e-4);
        assert!(matches!(rho_c_p(1.0, 2, 1.0), Err(Error::Divergence(_))));
        assert!(matches!(rho_c_p(1.0, 1, 1.0), Err(Error::Divergence(_))));
        assert!(matches!(rho_p(1.0, 0.1, 3, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rho_p_matches_series() {
        let v = rho_p(1.0, -1.0, 3, 1.0).unwrap();
        let s = rho_p_series(1.0, -1.0, 3, 1.0, 50);
        assert!((v - s).abs() < 1e-8 * s);
        assert!((v - 0.009_617_804_8).abs() < 1e-10);
        for d in 1..=5 {
            for &(beta, mu, kinetic) in &[(1.0, -0.1, 1.0), (2.0, -0.5, 0.5), (0.5, -3.0, 2.0)] {
                let v = rho_p(beta, mu, d, kinetic).unwrap();
                let terms = (60.0 / (-beta * mu)) as usize + 10;
                let s = rho_p_series(beta, mu, d, kinetic, terms);
                assert!((v - s).abs() < 1e-8 * s, "d={d} beta={beta} mu={mu}: {v} vs {s}");
            }
        }
        assert_eq!(rho_p(1.0, -1e4, 3, 1.0).unwrap(), 0.0);
        assert!(rho_p(1.0, -40.0, 3, 1.0).unwrap() < 1e-18);
    }

    #[test]
    fn condensate_and_critical_density() {
        assert_eq!(rho_0_i(-1.0, -1.0, 1.0), 0.0);
        assert_eq!(rho_0_i(0.0, -1.0, 2.0), 0.5);
        assert_eq!(rho_0_i(-2.0, -1.0, 2.0), 0.0);
        let rc_p = rho_c_p(1.0, 3, 1.0).unwrap();
        assert!((rho_c_i(1.0, &hi(-1.0)).unwrap().unwrap() - (rc_p + 1.0)).abs() < 1e-15);
        assert_eq!(rho_c_i(1.0, &hi(0.5)).unwrap().unwrap(), rc_p);
        assert_eq!(rho_c_i(1.0, &ModelParams::interacting(2, 5.0, -1.0, 1.0, 1.0)).unwrap(), None);
    }

    #[test]
    fn quad_form_examples() {
        let tf = TestFunction::gaussian(1.0, 1.0);
        assert_eq!(quad_form_a(1.0, -1.0, &TestFunction::gaussian(0.0, 1.0), 3, 1.0).unwrap(), 0.0);
        assert!(quad_form_a(1.0, -200.0, &tf, 3, 1.0).unwrap() < 1e-80);
        assert!(matches!(quad_form_a(1.0, 0.0, &tf, 2, 1.0), Err(Error::Divergence(_))));

        // Riemann sum over the dual lattice at L = 40
        let p = ModelParams::truncated(3, 40.0, 0.0, 1.0);
        let a = quad_form_a(1.0, -1.0, &tf, 3, 1.0).unwrap();
        let shells = crate::lattice::shells(&p, 80.0).unwrap();
        let sum: f64 = 1.0 / (1.0f64).exp_m1()
            + shells.iter().map(|s| s.count as f64 * tf.hat_abs_sq(s.k_norm_sq) / (s.eps + 1.0).exp_m1()).sum::<f64>();
        assert!((sum / p.volume() - a).abs() < 0.02 * a);

        // series oracle: |h|^2 = e^{-k^2} so each Bose term is a Gaussian integral
        let series: f64 = (1..200)
            .map(|j| {
                let j = j as f64;
                (-j).exp() * (4.0 * PI * (1.0 + j)).powf(-1.5) * 1.0
            })
            .sum::<f64>()
            * 1.0;
        // (2 pi)^{-3} int e^{-(1+j) k^2} d^3k = (4 pi (1+j))^{-3/2}
        assert!((a - series).abs() < 1e-10 * a);
    }

    #[test]
    fn quad_form_increases_towards_zero() {
        let tf = TestFunction::gaussian(1.3, 0.7);
        let mut prev = 0.0;
        for &mu in &[-5.0, -1.0, -0.3, -0.01, 0.0] {
            let a = quad_form_a(1.0, mu, &tf, 3, 1.0).unwrap();
            assert!(a > prev);
            prev = a;
        }
    }

    #[test]
    fn mu_of_rho_examples() {
        let p = hi(-1.0);
        assert!(mu_of_rho_limit(1.0, 1e-6, &p).unwrap() < -10.0);
        let rc = rho_c_i(1.0, &p).unwrap().unwrap();
        assert_eq!(mu_of_rho_limit(1.0, rc, &p).unwrap(), 0.0);
        assert_eq!(mu_of_rho_limit(1.0, rc + 0.5, &p).unwrap(), 0.0);
        for &rho in &[0.01, 0.05, 0.5, 1.0] {
            let mu = mu_of_rho_limit(1.0, rho, &p).unwrap();
            assert!(mu < 0.0);
            assert!((rho_i(1.0, mu, &p).unwrap() - rho).abs() < 1e-9 * rho);
        }
        let line = ModelParams::interacting(1, 10.0, -1.0, 1.0, 1.0);
        for &rho in &[0.1, 5.0, 100.0] {
            let mu = mu_of_rho_limit(1.0, rho, &line).unwrap();
            assert!(mu < 0.0);
            assert!((rho_i(1.0, mu, &line).unwrap() - rho).abs() < 1e-9 * rho);
        }
    }

    #[test]
    fn genfun_limit_examples() {
        let p = hi(-1.0);
        let zero = TestFunction::gaussian(0.0, 1.0);
        assert_eq!(genfun_limit(1.0, StateInput::Mu(-0.3), &p, &zero).unwrap(), 1.0);
        assert_eq!(genfun_limit(1.0, StateInput::Rho(2.0), &p, &zero).unwrap(), 1.0);

        let tf = TestFunction::gaussian(1.0, 1.0);
        let pos = hi(0.5);
        let v = genfun_limit(1.0, StateInput::Mu(-0.3), &pos, &tf).unwrap();
        let a = quad_form_a(1.0, -0.3, &tf, 3, 1.0).unwrap();
        assert!((v - (-0.25 * tf.norm_sq(3) - 0.5 * a).exp()).abs() < 1e-15);

        let rc = rho_c_i(1.0, &p).unwrap().unwrap();
        let sup = genfun_limit(1.0, StateInput::Rho(rc + 0.5), &p, &tf).unwrap();
        let a0 = quad_form_a(1.0, 0.0, &tf, 3, 1.0).unwrap();
        let expected = bessel_j0(2f64.sqrt()) * (-0.25 * tf.norm_sq(3) - 0.5 * a0 - 0.25).exp();
        assert!((sup - expected).abs() < 1e-14);

        assert!(genfun_limit(1.0, StateInput::Mu(0.1), &p, &tf).is_err());
    }

    #[test]
    fn sub_and_supercritical_forms_meet_at_the_boundary() {
        let p = hi(-1.0);
        let tf = TestFunction::gaussian(0.8, 1.5);
        let rc = rho_c_i(1.0, &p).unwrap().unwrap();
        let at = genfun_limit(1.0, StateInput::Rho(rc), &p, &tf).unwrap();
        let below = genfun_limit(1.0, StateInput::Rho(rc * (1.0 - 1e-9)), &p, &tf).unwrap();
        let above = genfun_limit(1.0, StateInput::Rho(rc * (1.0 + 1e-9)), &p, &tf).unwrap();
        assert!((at - below).abs() < 1e-6);
        assert!((at - above).abs() < 1e-6);
        let crit = genfun_limit(1.0, StateInput::Mu(0.0), &p, &tf).unwrap();
        assert!((at - crit).abs() < 1e-15);
    }

    /// `(2 pi)^{-d} int_{kinetic k^2 <= B} (B - kinetic k^2)/g d^dk` by quadrature.
    fn eq_b_integral(d: usize, g: f64, kinetic: f64, b: f64) -> f64 {
        let k_max = (b / kinetic).sqrt();
        let q = integrate(|k| k.powi(d as i32 - 1) * (b - kinetic * k * k) / g, 0.0, k_max, 1e-16, 1e-14, 100).unwrap();
        let surface = 2.0 * PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0);
        surface * q.value / (2.0 * PI).powi(d as i32)
    }

    #[test]
    fn constant_c_matches_quadrature() {
        for &(d, g, kinetic) in &[(3, 1.0, 1.0), (3, 2.0, 1.0), (4, 1.0, 1.0), (5, 0.7, 1.3)] {
            let c = constant_c(d, g, kinetic).unwrap();
            let expo = (d as f64 + 2.0) / 2.0;
            // least-squares slope of the integral against B^{(d+2)/2}
            let (mut num, mut den) = (0.0, 0.0);
            for &b in &[1.0, 2.0, 4.0] {
                let x = f64::powf(b, expo);
                num += x * eq_b_integral(d, g, kinetic, b);
                den += x * x;
            }
            let fitted = num / den;
            assert!((fitted - c).abs() < 1e-6 * c, "d={d}: {fitted} vs {c}");
        }
        assert!((constant_c(3, 1.0, 1.0).unwrap() * 15.0 * PI * PI - 1.0).abs() < 1e-15);
        assert!((constant_c(3, 1.0, 1.0).unwrap() - 0.006_754_7).abs() < 1e-7);
        assert!((constant_c(4, 1.0, 1.0).unwrap() * 96.0 * PI * PI - 1.0).abs() < 1e-15);
        assert!((constant_c(3, 2.0, 1.0).unwrap() * 2.0 - constant_c(3, 1.0, 1.0).unwrap()).abs() < 1e-18);
        assert!(constant_c(2, 1.0, 1.0).is_err());
    }

    #[test]
    fn b_of_rho_examples() {
        let p = hi(-1.0);
        let rc = rho_c_i(1.0, &p).unwrap().unwrap();
        assert_eq!(b_of_rho(1.0, rc, &p).unwrap(), 0.0);
        let b = b_of_rho(1.0, rc + 0.5, &p).unwrap();
        // invert C B^{5/2} = 0.5 by bisection on the quadrature of the defining integral
        let (mut lo, mut hi_b) = (0.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi_b);
            if eq_b_integral(3, 1.0, 1.0, mid) < 0.5 {
                lo = mid;
            } else {
                hi_b = mid;
            }
        }
        assert!((b - lo).abs() < 1e-9 * b);
        assert!((b - 5.595).abs() < 1e-3);
        let p2 = ModelParams { gk_profile: GkProfile::Constant(2.0), ..p.clone() };
        let b2 = b_of_rho(1.0, rc + 0.5, &p2).unwrap();
        assert!((b2 / b - 2f64.powf(0.4)).abs() < 1e-12);
        assert!(b_of_rho(1.0, rc - 0.1, &p).is_err());
        assert!(b_of_rho(1.0, rc + 0.5, &ModelParams::truncated(3, 10.0, -1.0, 1.0)).is_err());
    }

    #[test]
    fn kac_examples() {
        let pbg = ModelParams::perfect(3, 10.0);
        let zero = TestFunction::gaussian(0.0, 1.0);
        let rc = rho_c_i(1.0, &pbg).unwrap().unwrap();
        assert!(kac_mixture_check(1.0, rc + 0.5, &pbg, &zero, 1e-10).unwrap() < 1e-12);
        let tf = TestFunction::gaussian(1.0, 1.0);
        assert!(kac_mixture_check(1.0, rc + 0.5, &pbg, &tf, 1e-8).unwrap() <= 1e-6);
        assert!(kac_mixture_check(1.0, rc - 0.01, &pbg, &tf, 1e-8).is_err());
        let mean = kac_integral(rc + 0.5, rc, |x| x, 1e-13).unwrap();
        assert!((mean - (rc + 0.5)).abs() < 1e-10);
        let mass = kac_integral(rc + 0.5, rc, |_| 1.0, 1e-13).unwrap();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn limit_functional_is_bounded(a in -3.0f64..3.0, s in 0.2f64..3.0, rho in 0.01f64..4.0,
                                       eps0 in -2.0f64..1.0) {
            let p = hi(eps0);
            let tf = TestFunction::gaussian(a, s);
            let v = genfun_limit(1.0, StateInput::Rho(rho), &p, &tf).unwrap();
            prop_assert!(v.abs() <= 1.0 + 1e-14);
        }

        #[test]
        fn rho_p_is_increasing(mu1 in -5.0f64..-0.01, dmu in 0.001f64..1.0) {
            let mu2 = (mu1 + dmu).min(0.0);
            prop_assert!(rho_p(1.0, mu1, 3, 1.0).unwrap() < rho_p(1.0, mu2, 3, 1.0).unwrap());
        }
    }
}
