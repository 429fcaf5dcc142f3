//! Grand-canonical statistics of a single mode.
//!
//! The occupation `n` of a mode with energy `eps` and coupling `g` has
//! weight `w(n) = exp(-beta [(eps - mu - g/2V) n + (g/2V) n^2])`. For
//! `g > 0` the exponent is concave, so the sum is taken over a window
//! around its peak whose two tails are bounded by geometric series.

use crate::error::{domain, Error, Result};
use crate::lattice::Mode;
use crate::numeric::CompensatedSum;
use crate::specfun::LaguerreIter;

/// Relative size of each certified tail.
const TAIL_REL: f64 = 1e-17;

/// Longest occupation window a single mode may need.
pub const MAX_WINDOW: usize = 100_000_000;

/// How far the occupation sum is carried.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NmaxPolicy {
    /// Window around the peak, grown until both tails are below `1e-17`
    /// of the sum.
    #[default]
    Certified,
    /// `n <= ceil(1.5 V (mu - eps)_+ / g + 8 sqrt(V / (beta g)) + 64)`.
    /// Falls back to `Certified` for `g = 0`.
    Formula,
    /// `n <= N` with no certificate.
    Fixed(usize),
}

/// Thermodynamic state shared by all modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrandSpec {
    pub beta: f64,
    pub mu: f64,
    pub volume: f64,
    pub nmax_policy: NmaxPolicy,
    pub quad_tol: f64,
}

impl GrandSpec {
    pub fn new(beta: f64, mu: f64, volume: f64) -> Self {
        Self { beta, mu, volume, nmax_policy: NmaxPolicy::Certified, quad_tol: 1e-12 }
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return domain(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.volume > 0.0 && self.volume.is_finite()) {
            return domain(format!("volume must be positive, got {}", self.volume));
        }
        if !self.mu.is_finite() {
            return domain("mu must be finite");
        }
        if !(self.quad_tol > 0.0) {
            return domain("quad_tol must be positive");
        }
        Ok(())
    }
}

/// Occupation distribution `nu(n)` restricted to `first..first + weights.len()`.
/// Outside that window the mass is below `tail_bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePMF {
    pub first: usize,
    pub weights: Vec<f64>,
    pub log_norm: f64,
    pub tail_bound: f64,
}

impl ModePMF {
    pub fn prob(&self, n: usize) -> f64 {
        n.checked_sub(self.first).and_then(|i| self.weights.get(i)).copied().unwrap_or(0.0)
    }

    pub fn last(&self) -> usize {
        self.first + self.weights.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(n, p)| n as f64 * p).collect::<CompensatedSum>().value()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.iter().map(|(n, p)| (n as f64 - m).powi(2) * p).collect::<CompensatedSum>().value()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().enumerate().map(move |(i, &p)| (self.first + i, p))
    }
}

/// `(a, b)` with `w(n) = exp(-beta (a n + b n^2))`.
fn coefficients(mode: &Mode, spec: &GrandSpec) -> (f64, f64) {
    let b = mode.g / (2.0 * spec.volume);
    (mode.eps - spec.mu - b, b)
}

fn check(mode: &Mode, spec: &GrandSpec) -> Result<()> {
    spec.validate()?;
    if !(mode.g >= 0.0 && mode.g.is_finite() && mode.eps.is_finite()) {
        return domain("mode needs finite eps and g >= 0");
    }
    if mode.g == 0.0 && spec.mu >= mode.eps {
        return Err(Error::Divergence(format!(
            "free mode with mu = {} >= eps = {}: geometric series diverges",
            spec.mu, mode.eps
        )));
    }
    Ok(())
}

/// Unnormalized weights `w(n) / w(peak)` on the retained window, with the
/// log of the peak weight and a bound on the relative tail mass.
struct Window {
    first: usize,
    rel: Vec<f64>,
    log_peak: f64,
    tail_bound: f64,
}

fn formula_nmax(mode: &Mode, spec: &GrandSpec) -> usize {
    let v = spec.volume;
    let g = mode.g;
    let excess = (spec.mu - mode.eps).max(0.0);
    (1.5 * v * excess / g + 8.0 * (v / (spec.beta * g)).sqrt() + 64.0).ceil() as usize
}

fn build_window(mode: &Mode, spec: &GrandSpec) -> Result<Window> {
    check(mode, spec)?;
    let beta = spec.beta;
    let (a, b) = coefficients(mode, spec);
    let fixed = match spec.nmax_policy {
        NmaxPolicy::Fixed(n) => Some(n),
        NmaxPolicy::Formula if mode.g > 0.0 => Some(formula_nmax(mode, spec)),
        _ => None,
    };
    // log w(n) - log w(m) = -beta (n - m) (a + b (n + m))
    let log_ratio = |n: f64, m: f64| -beta * (n - m) * (a + b * (n + m));
    if let Some(nmax) = fixed {
        if nmax >= MAX_WINDOW {
            return Err(Error::Resource(format!("occupation window of {nmax} terms")));
        }
        let logs: Vec<f64> = (0..=nmax).map(|n| log_ratio(n as f64, 0.0)).collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rel: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
        let sum: f64 = rel.iter().sum();
        let last = nmax as f64;
        let r = (-beta * (a + b * (2.0 * last + 1.0))).exp();
        let tail = if r < 1.0 { rel[nmax] * r / (1.0 - r) / sum } else { f64::INFINITY };
        return Ok(Window { first: 0, rel, log_peak: m, tail_bound: tail });
    }

    let peak = if b > 0.0 { (-a / (2.0 * b)).round().max(0.0) } else { 0.0 };
    if peak >= MAX_WINDOW as f64 {
        return Err(Error::Resource(format!("occupation peak at n = {peak:e}")));
    }
    let peak_n = peak as usize;
    let mut upper = vec![1.0];
    let mut sum = CompensatedSum::new();
    sum.add(1.0);
    let mut up_tail;
    let mut n = peak_n;
    loop {
        let nf = n as f64;
        let r = (-beta * (a + b * (2.0 * nf + 1.0))).exp();
        let last = *upper.last().unwrap();
        if r < 1.0 {
            up_tail = last * r / (1.0 - r);
            if up_tail <= TAIL_REL * sum.value() {
                break;
            }
        }
        n += 1;
        if n - peak_n >= MAX_WINDOW {
            return Err(Error::Resource("occupation window exceeds the size limit".into()));
        }
        let w = log_ratio(n as f64, peak).exp();
        upper.push(w);
        sum.add(w);
    }
    let mut lower = Vec::new();
    let mut down_tail = 0.0;
    let mut n = peak_n;
    let mut last = 1.0;
    while n > 0 {
        let nf = n as f64;
        let q = (beta * (a + b * (2.0 * nf - 1.0))).exp();
        if q < 1.0 {
            down_tail = last * q / (1.0 - q);
            if down_tail <= TAIL_REL * sum.value() {
                break;
            }
        }
        n -= 1;
        last = log_ratio(n as f64, peak).exp();
        lower.push(last);
        sum.add(last);
        down_tail = 0.0;
    }
    let first = peak_n - lower.len();
    lower.reverse();
    lower.extend(upper);
    let total = sum.value();
    Ok(Window { first, rel: lower, log_peak: log_ratio(peak, 0.0), tail_bound: (up_tail + down_tail) / total })
}

/// Normalized occupation distribution of the mode.
pub fn mode_pmf(mode: &Mode, spec: &GrandSpec) -> Result<ModePMF> {
    let w = build_window(mode, spec)?;
    let sum = w.rel.iter().copied().collect::<CompensatedSum>().value();
    Ok(ModePMF {
        first: w.first,
        weights: w.rel.iter().map(|x| x / sum).collect(),
        log_norm: w.log_peak + sum.ln(),
        tail_bound: w.tail_bound,
    })
}

/// `log Z`, `<n>` and `Var n` of one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeStats {
    pub log_z: f64,
    pub mean: f64,
    pub variance: f64,
}

fn free_stats(mode: &Mode, spec: &GrandSpec) -> ModeStats {
    let x = spec.beta * (mode.eps - spec.mu);
    let mean = 1.0 / x.exp_m1();
    ModeStats { log_z: -(-(-x).exp_m1()).ln(), mean, variance: mean * (mean + 1.0) }
}

/// Statistics of one mode. Free modes under the certified policy use the
/// Bose-Einstein closed forms.
pub fn mode_stats(mode: &Mode, spec: &GrandSpec) -> Result<ModeStats> {
    check(mode, spec)?;
    if mode.g == 0.0 && !matches!(spec.nmax_policy, NmaxPolicy::Fixed(_)) {
        return Ok(free_stats(mode, spec));
    }
    let pmf = mode_pmf(mode, spec)?;
    Ok(ModeStats { log_z: pmf.log_norm, mean: pmf.mean(), variance: pmf.variance() })
}

/// `log sum_n w(n)`.
pub fn mode_log_partition(mode: &Mode, spec: &GrandSpec) -> Result<f64> {
    Ok(mode_stats(mode, spec)?.log_z)
}

/// `<N_k> = sum_n n nu(n)`.
pub fn mode_occupation(mode: &Mode, spec: &GrandSpec) -> Result<f64> {
    Ok(mode_stats(mode, spec)?.mean)
}

/// `1/(e^{beta(eps - mu - g/V)} - 1) - <N_k>` for a mode with
/// `eps - mu - g/V > 0`.
pub fn occupation_bound_gap(mode: &Mode, spec: &GrandSpec) -> Result<f64> {
    spec.validate()?;
    let shifted = mode.eps - spec.mu - mode.g / spec.volume;
    if !(shifted > 0.0) {
        return domain(format!("mode is not in D~+ (eps - mu - g/V = {shifted} <= 0); the occupation bound needs D~+"));
    }
    let bound = 1.0 / (spec.beta * shifted).exp_m1();
    Ok(bound - mode_occupation(mode, spec)?)
}

/// `e^{-x/2} sum_n nu(n) L_n(x)` with `x = |h_k|^2 / 2V`: the expectation of
/// the Weyl operator of the mode, always evaluated by summation.
pub fn mode_weyl_factor(mode: &Mode, spec: &GrandSpec, hk_abs_sq: f64) -> Result<f64> {
    if !(hk_abs_sq >= 0.0 && hk_abs_sq.is_finite()) {
        return domain(format!("hk_abs_sq must be finite and >= 0, got {hk_abs_sq}"));
    }
    let pmf = mode_pmf(mode, spec)?;
    if hk_abs_sq == 0.0 {
        return Ok(1.0);
    }
    let x = hk_abs_sq / (2.0 * spec.volume);
    let mut lag = LaguerreIter::new(x);
    for _ in 0..pmf.first {
        lag.next_value();
    }
    let acc: CompensatedSum = pmf.weights.iter().map(|p| p * lag.next_value()).collect();
    Ok((-0.5 * x).exp() * acc.value())
}

/// `exp(-(|h_k|^2 / 4V) coth(beta (eps - mu) / 2))`: the Weyl factor of a
/// free mode.
pub fn mode_weyl_factor_free(mode: &Mode, spec: &GrandSpec, hk_abs_sq: f64) -> Result<f64> {
    spec.validate()?;
    if spec.mu >= mode.eps {
        return Err(Error::Divergence(format!("free mode with mu = {} >= eps = {}", spec.mu, mode.eps)));
    }
    let y = 0.5 * spec.beta * (mode.eps - spec.mu);
    Ok((-(hk_abs_sq / (4.0 * spec.volume)) / y.tanh()).exp())
}

/// Weyl factor by closed form for free modes and by summation otherwise.
pub(crate) fn weyl_factor(mode: &Mode, spec: &GrandSpec, hk_abs_sq: f64) -> Result<f64> {
    if mode.g == 0.0 && spec.nmax_policy == NmaxPolicy::Certified {
        mode_weyl_factor_free(mode, spec, hk_abs_sq)
    } else {
        mode_weyl_factor(mode, spec, hk_abs_sq)
    }
}
