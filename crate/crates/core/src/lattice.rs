//! Model parameters, the dual lattice of a periodic cube, and radial
//! Gaussian test functions.
//!
//! Momenta are `k = 2 pi s / L` with `s in Z^d`; the dispersion is
//! `eps_k = kinetic * |k|^2` for `k != 0`, while the zero mode carries the
//! effective energy `eps0`. Couplings are `g0` on the zero mode and the
//! profile value on every other mode.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::error::{domain, Error, Result};
use crate::numeric;

/// Largest mode count any enumeration may produce.
pub const MAX_MODES: u64 = 100_000_000;

/// Largest `|s|^2` a shell table may reach.
pub const MAX_SHELL_INDEX: u64 = 20_000_000;

/// Coupling of the `k != 0` modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GkProfile {
    Constant(f64),
    /// No interaction off the zero mode: the truncated model, or the
    /// perfect gas when combined with `eps0 = 0`.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub kinetic: f64,
    pub eps0: f64,
    pub g0: f64,
    pub gk_profile: GkProfile,
}

impl ModelParams {
    /// Interacting model with a constant coupling `g` on all `k != 0` modes.
    pub fn interacting(d: usize, l: f64, eps0: f64, g0: f64, g: f64) -> Self {
        Self { d, l, kinetic: 1.0, eps0, g0, gk_profile: GkProfile::Constant(g) }
    }

    /// Truncated model: only the zero mode interacts.
    pub fn truncated(d: usize, l: f64, eps0: f64, g0: f64) -> Self {
        Self { d, l, kinetic: 1.0, eps0, g0, gk_profile: GkProfile::Zero }
    }

    /// Perfect Bose gas: no interaction anywhere and `eps0 = 0`.
    pub fn perfect(d: usize, l: f64) -> Self {
        Self { d, l, kinetic: 1.0, eps0: 0.0, g0: 0.0, gk_profile: GkProfile::Zero }
    }

    /// `true` for the perfect gas, the only model allowed `g0 = 0`.
    pub fn is_perfect(&self) -> bool {
        self.g0 == 0.0 && self.gk_profile == GkProfile::Zero
    }

    /// Supremum of admissible `mu`: the lowest level of a free mode.
    pub fn mu_ceiling(&self) -> Option<f64> {
        let mut c = None;
        if self.g_nonzero() == 0.0 {
            c = Some(self.first_excited());
        }
        if self.g0 == 0.0 {
            c = Some(c.map_or(self.eps0, |x: f64| x.min(self.eps0)));
        }
        c
    }

    pub fn with_l(&self, l: f64) -> Self {
        Self { l, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return domain("d must be >= 1");
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return domain(format!("L must be positive, got {}", self.l));
        }
        if !(self.kinetic > 0.0 && self.kinetic.is_finite()) {
            return domain(format!("kinetic must be positive, got {}", self.kinetic));
        }
        if !self.eps0.is_finite() {
            return domain("eps0 must be finite");
        }
        let g0_ok = self.g0 > 0.0 || (self.g0 == 0.0 && self.gk_profile == GkProfile::Zero);
        if !(g0_ok && self.g0.is_finite()) {
            return domain(format!(
                "g0 must be positive (zero only for the perfect gas with gk_profile Zero), got {}",
                self.g0
            ));
        }
        if let GkProfile::Constant(g) = self.gk_profile {
            if !(g > 0.0 && g.is_finite()) {
                return domain(format!("gk_profile Constant(g) needs g > 0, got {g}"));
            }
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.l.powi(self.d as i32)
    }

    /// `kinetic * (2 pi / L)^2`: the energy of a unit lattice vector.
    pub fn eps_unit(&self) -> f64 {
        let dk = 2.0 * PI / self.l;
        self.kinetic * dk * dk
    }

    /// Energy of the lowest `k != 0` mode.
    pub fn first_excited(&self) -> f64 {
        self.eps_unit()
    }

    pub fn g_nonzero(&self) -> f64 {
        match self.gk_profile {
            GkProfile::Constant(g) => g,
            GkProfile::Zero => 0.0,
        }
    }

    /// `false` when `eps0 >= 0`: the zero mode then never condenses by the
    /// non-conventional mechanism.
    pub fn has_nonconventional_condensate(&self) -> bool {
        self.eps0 < 0.0
    }

    pub fn zero_mode(&self) -> Mode {
        Mode { s: vec![0; self.d], k_norm_sq: 0.0, eps: self.eps0, g: self.g0 }
    }

    pub(crate) fn mode_from_s(&self, s: Vec<i64>) -> Mode {
        let s2: i64 = s.iter().map(|x| x * x).sum();
        if s2 == 0 {
            return self.zero_mode();
        }
        let dk = 2.0 * PI / self.l;
        let k_norm_sq = dk * dk * s2 as f64;
        Mode { s, k_norm_sq, eps: self.kinetic * k_norm_sq, g: self.g_nonzero() }
    }
}

/// One point of the dual lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub s: Vec<i64>,
    pub k_norm_sq: f64,
    pub eps: f64,
    pub g: f64,
}

impl Mode {
    pub fn is_zero(&self) -> bool {
        self.k_norm_sq == 0.0
    }
}

/// All `k != 0` modes sharing one value of `|s|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shell {
    pub s2: u64,
    pub count: u64,
    pub k_norm_sq: f64,
    pub eps: f64,
}

impl Shell {
    /// A mode standing for every member of the shell; its `s` is left empty.
    pub fn mode(&self, params: &ModelParams) -> Mode {
        Mode { s: Vec::new(), k_norm_sq: self.k_norm_sq, eps: self.eps, g: params.g_nonzero() }
    }
}

fn max_s2(params: &ModelParams, eps_cutoff: f64) -> u64 {
    let r = eps_cutoff / params.eps_unit();
    // absorb rounding at exact shell energies
    (r * (1.0 + 4.0 * f64::EPSILON)).floor().max(0.0) as u64
}

/// Lattice-point counts `r_d(n)` for `n <= max_n`.
fn representation_counts(d: usize, max_n: u64) -> Vec<u64> {
    let n = max_n as usize;
    let mut one_d = vec![0u64; n + 1];
    let mut j = 0usize;
    while j * j <= n {
        one_d[j * j] += if j == 0 { 1 } else { 2 };
        j += 1;
    }
    let mut counts = vec![0u64; n + 1];
    counts[0] = 1;
    for _ in 0..d {
        let mut next = vec![0u64; n + 1];
        for (a, &ca) in counts.iter().enumerate() {
            if ca == 0 {
                continue;
            }
            let mut j = 0usize;
            while a + j * j <= n {
                next[a + j * j] += ca * one_d[j * j];
                j += 1;
            }
        }
        counts = next;
    }
    counts
}

/// Lower bound on the number of lattice points in the ball: the unit cubes
/// around those points cover the ball shrunk by the half-diagonal.
fn mode_count_lower_bound(d: usize, max_n: u64) -> f64 {
    let r = (max_n as f64).sqrt() - (d as f64).sqrt() / 2.0;
    if r <= 0.0 {
        return 0.0;
    }
    let a = d as f64 / 2.0;
    PI.powf(a) / (a * gamma_half(d)) * r.powi(d as i32)
}

fn check_size(d: usize, max_n: u64) -> Result<()> {
    if max_n > MAX_SHELL_INDEX {
        return Err(Error::Resource(format!("shell index |s|^2 = {max_n} exceeds {MAX_SHELL_INDEX}")));
    }
    if mode_count_lower_bound(d, max_n) > MAX_MODES as f64 {
        return Err(Error::Resource(format!("cutoff at |s|^2 = {max_n} in d = {d} gives more than {MAX_MODES} modes")));
    }
    Ok(())
}

/// Number of modes (zero mode included) with energy `<= eps_cutoff`.
pub fn mode_count(params: &ModelParams, eps_cutoff: f64) -> Result<u64> {
    let max_n = max_s2(params, eps_cutoff);
    check_size(params.d, max_n)?;
    Ok(representation_counts(params.d, max_n).iter().sum())
}

/// Nonzero modes grouped by `|s|^2`, ascending. Every quantity of the model
/// depends on a mode only through `|k|`, so shells carry all the physics.
pub fn shells(params: &ModelParams, eps_cutoff: f64) -> Result<Vec<Shell>> {
    let max_n = max_s2(params, eps_cutoff);
    check_size(params.d, max_n)?;
    let counts = representation_counts(params.d, max_n);
    let total: u64 = counts.iter().sum();
    if total > MAX_MODES {
        return Err(Error::Resource(format!("{total} modes exceed the limit of {MAX_MODES}")));
    }
    let dk = 2.0 * PI / params.l;
    Ok(counts
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &c)| c > 0)
        .map(|(n, &count)| {
            let k_norm_sq = dk * dk * n as f64;
            Shell { s2: n as u64, count, k_norm_sq, eps: params.kinetic * k_norm_sq }
        })
        .collect())
}

/// Every mode with `kinetic (2 pi / L)^2 |s|^2 <= eps_cutoff`, sorted by
/// `|s|^2` and then lexicographically in `s`; the zero mode comes first.
pub fn enumerate_modes(params: &ModelParams, eps_cutoff: f64) -> Result<Vec<Mode>> {
    params.validate()?;
    if !(eps_cutoff > 0.0) {
        return domain(format!("eps_cutoff must be positive, got {eps_cutoff}"));
    }
    let total = mode_count(params, eps_cutoff)?;
    if total > MAX_MODES {
        return Err(Error::Resource(format!("{total} modes exceed the limit of {MAX_MODES}")));
    }
    let max_n = max_s2(params, eps_cutoff) as i64;
    let r = (max_n as f64).sqrt().floor() as i64;
    let d = params.d;
    let mut out: Vec<(i64, Vec<i64>)> = Vec::with_capacity(total as usize);
    let mut s = vec![-r; d];
    loop {
        let s2: i64 = s.iter().map(|x| x * x).sum();
        if s2 <= max_n {
            out.push((s2, s.clone()));
        }
        // odometer increment
        let mut i = d;
        loop {
            if i == 0 {
                out.sort();
                return Ok(out.into_iter().map(|(_, s)| params.mode_from_s(s)).collect());
            }
            i -= 1;
            if s[i] < r {
                s[i] += 1;
                break;
            }
            s[i] = -r;
        }
    }
}

/// `(1/V) sum_{s : |k_s| > k_c} exp(-rate |k_s|^2)`, bounded above by an
/// integral over `|k| > k_c - sqrt(d) pi / L`.
///
/// The cell average of a Gaussian exceeds its centre value by at most the
/// factor `exp(rate d pi^2 / (3 L^2))`, which is folded in.
pub fn gaussian_lattice_tail(d: usize, l: f64, rate: f64, k_c: f64) -> f64 {
    let shrink = (d as f64).sqrt() * PI / l;
    let k_in = (k_c - shrink).max(0.0);
    let a = d as f64 / 2.0;
    let q = if k_in == 0.0 { 1.0 } else { gamma_ur(a, rate * k_in * k_in) };
    (rate * d as f64 * PI * PI / (3.0 * l * l)).exp() * (4.0 * PI * rate).powf(-a) * q
}

/// Upper bound on the density `(1/V) sum <N_k>` carried by the `k != 0`
/// modes with `eps_k > eps_cutoff`, using `<N_k> <= 1/(e^{beta(eps_k - mu - g/V)} - 1)`.
pub fn density_tail_bound(params: &ModelParams, beta: f64, mu: f64, eps_cutoff: f64) -> f64 {
    let mu_shift = mu + params.g_nonzero() / params.volume();
    if eps_cutoff <= mu_shift {
        return f64::INFINITY;
    }
    let k_c = (eps_cutoff / params.kinetic).sqrt();
    let geometric = 1.0 / -(-beta * (eps_cutoff - mu_shift)).exp_m1();
    (beta * mu_shift).exp() * geometric * gaussian_lattice_tail(params.d, params.l, beta * params.kinetic, k_c)
}

/// Estimate of `sum |h_k|^2 (1 + 2 <N_k>) / 4V` over the modes beyond the
/// cutoff; this is `-log` of their Weyl factors to first order.
pub fn weyl_log_tail_bound(params: &ModelParams, beta: f64, mu: f64, eps_cutoff: f64, tf: &TestFunction) -> f64 {
    if tf.is_zero() {
        return 0.0;
    }
    let mu_shift = mu + params.g_nonzero() / params.volume();
    if eps_cutoff <= mu_shift {
        return f64::INFINITY;
    }
    let k_c = (eps_cutoff / params.kinetic).sqrt();
    let amp = tf.amplitude_l1();
    let s2 = tf.min_width().powi(2);
    let vacuum = 0.25 * gaussian_lattice_tail(params.d, params.l, s2, k_c);
    let geometric = 1.0 / -(-beta * (eps_cutoff - mu_shift)).exp_m1();
    let thermal = 0.5
        * (beta * mu_shift).exp()
        * geometric
        * gaussian_lattice_tail(params.d, params.l, s2 + beta * params.kinetic, k_c);
    amp * amp * (vacuum + thermal)
}

/// Smallest cutoff (on a geometric grid) whose dropped density is below `tol`.
pub fn density_cutoff(params: &ModelParams, beta: f64, mu: f64, tol: f64) -> f64 {
    let mu_shift = mu + params.g_nonzero() / params.volume();
    let mut eps_c = mu_shift.max(0.0) + 10.0 / beta;
    while density_tail_bound(params, beta, mu, eps_c) > tol {
        eps_c *= 1.2;
    }
    eps_c
}

/// Cutoff making both the dropped density and the dropped log-Weyl mass
/// smaller than `tol`.
pub fn weyl_cutoff(params: &ModelParams, beta: f64, mu: f64, tol: f64, tf: &TestFunction) -> f64 {
    let mut eps_c = density_cutoff(params, beta, mu, tol);
    while weyl_log_tail_bound(params, beta, mu, eps_c, tf) > tol {
        eps_c *= 1.2;
    }
    eps_c
}

/// `Gamma(d/2)` by the recurrence from `Gamma(1/2)` or `Gamma(1)`.
pub fn gamma_half(d: usize) -> f64 {
    let mut x = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    let mut g = if d.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    while 2.0 * x < d as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// `S_{d-1} / (2 pi)^d`: converts a radial integral `int k^{d-1} f dk` into
/// `(2 pi)^{-d} int_{R^d} f d^d k`.
pub fn radial_measure(d: usize) -> f64 {
    let a = d as f64 / 2.0;
    2.0 * PI.powf(a) / gamma_half(d) / (2.0 * PI).powi(d as i32)
}

/// One Gaussian component `amplitude * exp(-width^2 |k|^2 / 2)` of a
/// Fourier profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTerm {
    pub amplitude: Complex64,
    pub width: f64,
}

/// Radial test function given by its Fourier profile
/// `h^(k) = sum_j c_j exp(-sigma_j^2 |k|^2 / 2)`.
///
/// Single real Gaussians are the common case; sums with complex amplitudes
/// arise as differences `h_l - h_s` in positivity checks.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TestFunction {
    pub terms: Vec<GaussianTerm>,
}

impl TestFunction {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self::gaussian_complex(Complex64::new(amplitude, 0.0), width)
    }

    pub fn gaussian_complex(amplitude: Complex64, width: f64) -> Self {
        assert!(width > 0.0, "Gaussian width must be positive");
        Self { terms: vec![GaussianTerm { amplitude, width }] }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.terms {
            if !(t.width > 0.0 && t.width.is_finite()) {
                return domain(format!("test-function width must be positive, got {}", t.width));
            }
            if !(t.amplitude.re.is_finite() && t.amplitude.im.is_finite()) {
                return domain("test-function amplitude must be finite");
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amplitude == Complex64::new(0.0, 0.0))
    }

    /// `h_l - h_s`.
    pub fn difference(&self, other: &TestFunction) -> TestFunction {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|t| GaussianTerm { amplitude: -t.amplitude, width: t.width }));
        TestFunction { terms }
    }

    pub fn scaled(&self, factor: Complex64) -> TestFunction {
        TestFunction {
            terms: self
                .terms
                .iter()
                .map(|t| GaussianTerm { amplitude: t.amplitude * factor, width: t.width })
                .collect(),
        }
    }

    pub fn hat(&self, k_norm_sq: f64) -> Complex64 {
        self.terms.iter().map(|t| t.amplitude * (-0.5 * t.width * t.width * k_norm_sq).exp()).sum()
    }

    pub fn hat_abs_sq(&self, k_norm_sq: f64) -> f64 {
        self.hat(k_norm_sq).norm_sqr()
    }

    /// `h^(0) = sum_j c_j`.
    pub fn hat0(&self) -> Complex64 {
        self.hat(0.0)
    }

    pub fn amplitude_l1(&self) -> f64 {
        self.terms.iter().map(|t| t.amplitude.norm()).sum()
    }

    pub fn min_width(&self) -> f64 {
        self.terms.iter().map(|t| t.width).fold(f64::INFINITY, f64::min)
    }

    /// `(h, g) = (2 pi)^{-d} int conj(h^(k)) g^(k) d^d k`, closed form.
    pub fn inner(&self, other: &TestFunction, d: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.terms {
            for b in &other.terms {
                let s2 = a.width * a.width + b.width * b.width;
                acc += a.amplitude.conj() * b.amplitude * (2.0 * PI * s2).powf(-(d as f64) / 2.0);
            }
        }
        acc
    }

    /// `||h||^2` in position space, closed form.
    pub fn norm_sq(&self, d: usize) -> f64 {
        self.inner(self, d).re
    }

    /// `(h, g)` by radial quadrature of `conj(h^) g^`.
    pub fn inner_quadrature(&self, other: &TestFunction, d: usize, tol: f64) -> Result<Complex64> {
        let width = self.min_width().min(other.min_width());
        if !width.is_finite() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let k_max = (80.0f64).sqrt() / width;
        let f = |k: f64, re: bool| {
            let v = self.hat(k * k).conj() * other.hat(k * k);
            let r = k.powi(d as i32 - 1);
            if re {
                r * v.re
            } else {
                r * v.im
            }
        };
        let re = numeric::integrate(|k| f(k, true), 0.0, k_max, tol, tol, 2000)?;
        let im = numeric::integrate(|k| f(k, false), 0.0, k_max, tol, tol, 2000)?;
        let m = radial_measure(d);
        Ok(Complex64::new(m * re.value, m * im.value))
    }

    pub fn norm_sq_quadrature(&self, d: usize, tol: f64) -> Result<f64> {
        Ok(self.inner_quadrature(self, d, tol)?.re)
    }
}

/// `h^(k)` at the momentum of `mode`; identifies the finite-volume
/// coefficient `h_k` with the continuum Fourier transform.
pub fn tf_coeff(tf: &TestFunction, mode: &Mode) -> Complex64 {
    tf.hat(mode.k_norm_sq)
}
