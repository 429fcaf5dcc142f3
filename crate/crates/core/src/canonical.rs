//! Fixed particle number at desk scale.
//!
//! `Z_N` is the degree-`N` coefficient of `prod_k sum_n w_k(n) x^n` with
//! `w_k(n) = exp(-beta [eps_k n + (g_k/2V) n (n - 1)])`. The product is
//! built mode by mode, truncated at degree `N` and rescaled after every
//! step, so the stored coefficients stay `O(1)` while the log scale grows.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grand;
use crate::lattice::{self, Mode, ModelParams, TestFunction};
use crate::single_mode::GrandSpec;
use crate::specfun::LaguerreIter;

/// Weights below `exp(-WEIGHT_FLOOR)` of a mode's peak, past the peak, are
/// dropped.
pub const WEIGHT_FLOOR: f64 = 40.0;

/// Largest `modes * N * degree` product a single convolution may cost.
pub const MAX_WORK: f64 = 2e10;

/// Per-mode generating polynomial `exp(scale) * sum_n coeffs[n] x^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePoly {
    pub coeffs: Vec<f64>,
    pub scale: f64,
}

fn log_weight(mode: &Mode, beta: f64, volume: f64, n: usize) -> f64 {
    let n = n as f64;
    -beta * (mode.eps * n + mode.g / (2.0 * volume) * n * (n - 1.0))
}

impl ModePoly {
    /// Builds a polynomial from explicit log-weights, normalized to max 1.
    pub fn from_log_weights(logs: &[f64]) -> Self {
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { coeffs: logs.iter().map(|l| (l - m).exp()).collect(), scale: m }
    }

    /// Occupation weights of `mode` up to degree `n_max`, cut where they
    /// fall below `exp(-WEIGHT_FLOOR)` of the peak.
    pub fn partition(mode: &Mode, beta: f64, volume: f64, n_max: usize) -> Result<Self> {
        if mode.g == 0.0 && mode.eps <= 0.0 && n_max > 0 {
            // flat or growing weights: no truncation point past a peak
            let logs: Vec<f64> = (0..=n_max).map(|n| log_weight(mode, beta, volume, n)).collect();
            return Ok(Self::from_log_weights(&logs));
        }
        let mut logs = Vec::with_capacity(n_max.min(1024) + 1);
        let mut peak = f64::NEG_INFINITY;
        for n in 0..=n_max {
            let l = log_weight(mode, beta, volume, n);
            // the exponent is concave in n, so once below the floor past the
            // peak it stays there
            if l < peak - WEIGHT_FLOOR && n > 0 && l < logs[n - 1] {
                break;
            }
            peak = peak.max(l);
            logs.push(l);
        }
        Ok(Self::from_log_weights(&logs))
    }

    /// Weights times the diagonal Weyl matrix elements
    /// `exp(-x/2) L_n(x)`, `x = |h_k|^2 / 2V`, on the same support as
    /// [`ModePoly::partition`].
    pub fn weyl(mode: &Mode, beta: f64, volume: f64, n_max: usize, hk_abs_sq: f64) -> Result<Self> {
        let base = Self::partition(mode, beta, volume, n_max)?;
        if hk_abs_sq == 0.0 {
            return Ok(base);
        }
        let x = hk_abs_sq / (2.0 * volume);
        let damp = (-0.5 * x).exp();
        let mut lag = LaguerreIter::new(x);
        let coeffs = base.coeffs.iter().map(|c| c * damp * lag.next_value()).collect();
        Ok(Self { coeffs, scale: base.scale })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
}

/// Coefficients `exp(log_scale) * coeffs[n]`, `n <= N`, of a truncated
/// product.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedProduct {
    pub coeffs: Vec<f64>,
    pub log_scale: f64,
}

impl TruncatedProduct {
    pub fn one(n: usize) -> Self {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[0] = 1.0;
        Self { coeffs, log_scale: 0.0 }
    }

    /// Multiplies by `poly`, dropping degrees above `N`.
    pub fn multiply(&mut self, poly: &ModePoly) {
        let n = self.coeffs.len() - 1;
        let cap = poly.degree().min(n);
        let mut out = vec![0.0; n + 1];
        for (m, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..=cap.min(m) {
                acc += poly.coeffs[j] * self.coeffs[m - j];
            }
            *slot = acc;
        }
        let max = out.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        self.log_scale += poly.scale;
        if max > 0.0 && max.is_finite() {
            for c in &mut out {
                *c /= max;
            }
            self.log_scale += max.ln();
        }
        self.coeffs = out;
    }

    /// `(sign, log |c_N|)` of the top coefficient.
    pub fn top(&self) -> (f64, f64) {
        let c = *self.coeffs.last().expect("non-empty");
        (c.signum(), c.abs().ln() + self.log_scale)
    }
}

/// `(sign, log |coefficient N|)` of `prod polys`.
pub fn product_coefficient(polys: &[ModePoly], n: usize) -> (f64, f64) {
    let mut acc = TruncatedProduct::one(n);
    for p in polys {
        acc.multiply(p);
    }
    acc.top()
}

fn canonical_modes(params: &ModelParams, eps_cutoff: f64, n: usize) -> Result<Vec<Mode>> {
    params.validate()?;
    if !(eps_cutoff > 0.0) {
        return domain("eps_cutoff must be positive");
    }
    let count = lattice::mode_count(params, eps_cutoff)?;
    let work = count as f64 * (n as f64 + 1.0).powi(2);
    if work > MAX_WORK {
        return Err(Error::Resource(format!("{count} modes at N = {n} exceed the convolution budget")));
    }
    lattice::enumerate_modes(params, eps_cutoff)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return domain(format!("beta must be positive, got {beta}"));
    }
    Ok(())
}

/// `log Z_N` over the modes with energy up to `eps_cutoff`.
pub fn canonical_partition(params: &ModelParams, beta: f64, n: usize, eps_cutoff: f64) -> Result<f64> {
    check_beta(beta)?;
    if n == 0 {
        return Ok(0.0);
    }
    let v = params.volume();
    let modes = canonical_modes(params, eps_cutoff, n)?;
    let polys = modes.iter().map(|m| ModePoly::partition(m, beta, v, n)).collect::<Result<Vec<_>>>()?;
    let (sign, log) = product_coefficient(&polys, n);
    if sign <= 0.0 {
        return Err(Error::Numeric { message: "canonical partition underflowed".into(), residual: f64::NAN });
    }
    Ok(log)
}

/// Free-energy density `-(1 / beta V) log Z_N`.
pub fn free_energy(params: &ModelParams, beta: f64, n: usize, eps_cutoff: f64) -> Result<f64> {
    Ok(-canonical_partition(params, beta, n, eps_cutoff)? / (beta * params.volume()))
}

/// Canonical expectation of the Weyl operator of `tf` at `N` particles.
pub fn canonical_genfun(params: &ModelParams, beta: f64, n: usize, tf: &TestFunction, eps_cutoff: f64) -> Result<f64> {
    check_beta(beta)?;
    tf.validate()?;
    let v = params.volume();
    let modes = canonical_modes(params, eps_cutoff, n)?;
    let mut z = TruncatedProduct::one(n);
    let mut w = TruncatedProduct::one(n);
    for m in &modes {
        z.multiply(&ModePoly::partition(m, beta, v, n)?);
        w.multiply(&ModePoly::weyl(m, beta, v, n, tf.hat_abs_sq(m.k_norm_sq))?);
    }
    let (zs, zl) = z.top();
    let (ws, wl) = w.top();
    if zs <= 0.0 {
        return Err(Error::Numeric { message: "canonical partition underflowed".into(), residual: f64::NAN });
    }
    if ws == 0.0 {
        return Ok(0.0);
    }
    Ok(ws * (wl - zl).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub n: usize,
    pub rho_effective: f64,
    pub mu: f64,
    pub e_canonical: f64,
    pub e_grand: f64,
    pub gap: f64,
    pub eps_cutoff: f64,
}

/// Canonical and grand-canonical generating functionals at `N = floor(rho V)`
/// and at the `mu` giving the same density `N / V`.
pub fn equivalence_gap(
    params: &ModelParams,
    beta: f64,
    rho: f64,
    tf: &TestFunction,
    eps_cutoff: Option<f64>,
) -> Result<EquivalenceReport> {
    let v = params.volume();
    let n = (rho * v).floor();
    if !(n >= 1.0) {
        return domain(format!("rho V = {} holds no particle", rho * v));
    }
    let n = n as usize;
    let rho_eff = n as f64 / v;
    let spec = GrandSpec::new(beta, 0.0, v);
    let mu = grand::solve_mu(params, &spec, rho_eff)?;
    let gspec = spec.with_mu(mu);
    let e_grand = grand::genfun_finite(params, &gspec, tf)?;
    let cut = match eps_cutoff {
        Some(c) => c,
        None => grand::total_density(params, &gspec)?.eps_cutoff,
    };
    let e_can = canonical_genfun(params, beta, n, tf, cut)?;
    Ok(EquivalenceReport {
        n,
        rho_effective: rho_eff,
        mu,
        e_canonical: e_can,
        e_grand: e_grand.value,
        gap: (e_can - e_grand.value).abs(),
        eps_cutoff: cut,
    })
}
