//! Grand-canonical aggregates over the dual lattice: densities, the
//! chemical-potential solver, condensate classification and the
//! finite-volume generating functional.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lattice::{self, ModelParams, Shell, TestFunction};
use crate::numeric::CompensatedSum;
use crate::single_mode::{self, GrandSpec};

/// Absolute density the mode cutoff may drop.
pub const DENSITY_TAIL_TOL: f64 = 1e-13;

/// Log-mass of Weyl factors the mode cutoff may drop.
pub const WEYL_TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBreakdown {
    pub rho_total: f64,
    pub rho_zero_mode: f64,
    #[serde(rename = "rho_Dminus")]
    pub rho_dminus: f64,
    #[serde(rename = "rho_Dplus")]
    pub rho_dplus: f64,
    pub max_mode_fraction: f64,
    pub mu: f64,
    #[serde(rename = "V")]
    pub volume: f64,
    /// Upper bound on the density of the modes beyond `eps_cutoff`; not
    /// included in the components.
    pub tail_bound: f64,
    pub eps_cutoff: f64,
}

/// Mean occupation of one representative per shell, ascending in `|k|`.
struct ShellOccupations {
    zero: f64,
    shells: Vec<(Shell, f64)>,
    eps_cutoff: f64,
    tail_bound: f64,
}

fn check_state(params: &ModelParams, spec: &GrandSpec) -> Result<()> {
    params.validate()?;
    spec.validate()?;
    if (spec.volume - params.volume()).abs() > 1e-12 * params.volume() {
        return domain(format!("state volume {} does not match L^d = {}", spec.volume, params.volume()));
    }
    if let Some(c) = params.mu_ceiling() {
        if spec.mu >= c {
            return Err(Error::Divergence(format!("mu = {} reaches the lowest free level {c}", spec.mu)));
        }
    }
    Ok(())
}

fn occupations(params: &ModelParams, spec: &GrandSpec, eps_cutoff: f64) -> Result<ShellOccupations> {
    check_state(params, spec)?;
    let zero = single_mode::mode_stats(&params.zero_mode(), spec)?.mean;
    let shells = lattice::shells(params, eps_cutoff)?
        .into_iter()
        .map(|sh| Ok((sh, single_mode::mode_stats(&sh.mode(params), spec)?.mean)))
        .collect::<Result<Vec<_>>>()?;
    let tail_bound = lattice::density_tail_bound(params, spec.beta, spec.mu, eps_cutoff);
    Ok(ShellOccupations { zero, shells, eps_cutoff, tail_bound })
}

fn default_cutoff(params: &ModelParams, spec: &GrandSpec) -> f64 {
    lattice::density_cutoff(params, spec.beta, spec.mu, DENSITY_TAIL_TOL).max(params.first_excited() * 1.5)
}

/// Densities at an explicit mode cutoff.
pub fn total_density_at_cutoff(params: &ModelParams, spec: &GrandSpec, eps_cutoff: f64) -> Result<DensityBreakdown> {
    let occ = occupations(params, spec, eps_cutoff)?;
    Ok(breakdown(params, spec, &occ))
}

/// `(1/V) sum_k <N_k>` split into the zero mode and the `D-`/`D+` shells,
/// where `D-` holds the `k != 0` modes with `eps_k - mu - g_k/2V < 0`.
pub fn total_density(params: &ModelParams, spec: &GrandSpec) -> Result<DensityBreakdown> {
    total_density_at_cutoff(params, spec, default_cutoff(params, spec))
}

fn breakdown(params: &ModelParams, spec: &GrandSpec, occ: &ShellOccupations) -> DensityBreakdown {
    let v = spec.volume;
    let half_g = params.g_nonzero() / (2.0 * v);
    let mut dminus = CompensatedSum::new();
    let mut dplus = CompensatedSum::new();
    let mut max_fraction = 0.0f64;
    for (sh, n) in &occ.shells {
        let part = sh.count as f64 * n / v;
        if sh.eps - spec.mu - half_g < 0.0 {
            dminus.add(part);
        } else {
            dplus.add(part);
        }
        max_fraction = max_fraction.max(n / v);
    }
    let rho_zero = occ.zero / v;
    let (dm, dp) = (dminus.value(), dplus.value());
    let total: CompensatedSum = [rho_zero, dm, dp].into_iter().collect();
    DensityBreakdown {
        rho_total: total.value(),
        rho_zero_mode: rho_zero,
        rho_dminus: dm,
        rho_dplus: dp,
        max_mode_fraction: max_fraction,
        mu: spec.mu,
        volume: v,
        tail_bound: occ.tail_bound,
        eps_cutoff: occ.eps_cutoff,
    }
}

/// Relative accuracy of [`solve_mu`] in the density.
pub const SOLVE_MU_TOL: f64 = 1e-10;

/// Chemical potential at which the finite-volume density equals `rho`.
pub fn solve_mu(params: &ModelParams, spec_template: &GrandSpec, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return domain(format!("rho must be positive, got {rho}"));
    }
    params.validate()?;
    spec_template.validate()?;
    let beta = spec_template.beta;
    let density = |mu: f64| -> Result<f64> { Ok(total_density(params, &spec_template.with_mu(mu))?.rho_total) };

    // free modes cap mu below their level
    let ceiling = params.mu_ceiling();
    let clamp = |mu: f64| match ceiling {
        Some(c) if mu >= c => None,
        _ => Some(mu),
    };

    let mut lo = params.eps0 - 10.0 / beta;
    let mut hi = params.eps0 + params.g0 * rho + 1.0;
    if let Some(c) = ceiling {
        lo = lo.min(c - 10.0 / beta);
        if hi >= c {
            hi = 0.5 * (lo.max(c - 1.0 / beta) + c);
        }
    }
    let mut step = (hi - lo).max(1.0);
    let mut expansions = 0;
    while density(lo)? > rho {
        lo -= step;
        step *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Solver { message: "lower bracket not found".into(), lo, hi });
        }
    }
    let mut step = (hi - lo).max(1.0);
    while density(hi)? < rho {
        hi = match clamp(hi + step) {
            Some(h) => h,
            None => {
                let c = ceiling.expect("clamp only refuses with a ceiling");
                0.5 * (hi + c)
            }
        };
        step *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Solver { message: "upper bracket not found".into(), lo, hi });
        }
    }

    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = density(mid)?;
        if (r - rho).abs() <= 0.25 * SOLVE_MU_TOL * rho {
            return Ok(mid);
        }
        if r < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rl, rh) = (density(lo)?, density(hi)?);
    let (mu, r) = if (rl - rho).abs() <= (rh - rho).abs() { (lo, rl) } else { (hi, rh) };
    if (r - rho).abs() <= SOLVE_MU_TOL * rho {
        Ok(mu)
    } else {
        Err(Error::Numeric {
            message: format!("bracket collapsed at mu = {mu} without reaching the density tolerance"),
            residual: (r - rho).abs() / rho,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    None,
    NonConventionalOnly,
    TypeIII,
    TypeI,
}

/// Fraction above which a single mode counts as macroscopic.
pub const MACRO_FRACTION: f64 = 1e-2;
/// Share of the smallest shell that the macroscopic modes must carry for
/// a type I label.
pub const TYPE_I_SHARE: f64 = 0.9;
/// Shell density over max single-mode fraction needed for type III.
pub const TYPE_III_RATIO: f64 = 10.0;
/// Minimal shell density for type III.
pub const TYPE_III_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroscopicShell {
    pub s2: u64,
    pub count: u64,
    pub fraction_per_mode: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensateEvidence {
    pub max_mode_fraction: f64,
    pub zero_mode_fraction: f64,
    pub macroscopic_shells: Vec<MacroscopicShell>,
    pub macroscopic_mode_count: u64,
    pub macroscopic_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensateReport {
    pub shell_densities: Vec<(f64, f64)>,
    pub classification: Classification,
    pub evidence: CondensateEvidence,
    pub breakdown: DensityBreakdown,
}

/// Shell densities `(1/V) sum_{0 < |k| < delta} <N_k>` and a condensate
/// label. The rule, in order: type III if the smallest shell exceeds
/// [`TYPE_III_RATIO`] times the largest mode fraction and [`TYPE_III_FLOOR`];
/// type I if modes with fraction above [`MACRO_FRACTION`] exist and carry at
/// least [`TYPE_I_SHARE`] of that shell; non-conventional only
/// if the zero mode alone is macroscopic; none otherwise.
pub fn condensate_scan(params: &ModelParams, spec: &GrandSpec, deltas: &[f64]) -> Result<CondensateReport> {
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) || deltas.windows(2).any(|w| w[1] < w[0]) {
        return domain("deltas must be positive and ascending");
    }
    let occ = occupations(params, spec, default_cutoff(params, spec))?;
    let v = spec.volume;
    let shell_densities: Vec<(f64, f64)> = deltas
        .iter()
        .map(|&delta| {
            let s: CompensatedSum = occ
                .shells
                .iter()
                .filter(|(sh, _)| sh.k_norm_sq < delta * delta)
                .map(|(sh, n)| sh.count as f64 * n / v)
                .collect();
            (delta, s.value())
        })
        .collect();
    let bd = breakdown(params, spec, &occ);
    let macroscopic_shells: Vec<MacroscopicShell> = occ
        .shells
        .iter()
        .filter(|(_, n)| n / v > MACRO_FRACTION)
        .map(|(sh, n)| MacroscopicShell { s2: sh.s2, count: sh.count, fraction_per_mode: n / v })
        .collect();
    let macroscopic_mode_count = macroscopic_shells.iter().map(|m| m.count).sum();
    let macroscopic_density = macroscopic_shells.iter().map(|m| m.count as f64 * m.fraction_per_mode).sum();
    let smallest = shell_densities[0].1;
    let classification = if smallest > TYPE_III_RATIO * bd.max_mode_fraction && smallest > TYPE_III_FLOOR {
        Classification::TypeIII
    } else if macroscopic_mode_count > 0 && macroscopic_density >= TYPE_I_SHARE * smallest {
        Classification::TypeI
    } else if bd.rho_zero_mode > MACRO_FRACTION {
        Classification::NonConventionalOnly
    } else {
        Classification::None
    };
    Ok(CondensateReport {
        shell_densities,
        classification,
        evidence: CondensateEvidence {
            max_mode_fraction: bd.max_mode_fraction,
            zero_mode_fraction: bd.rho_zero_mode,
            macroscopic_shells,
            macroscopic_mode_count,
            macroscopic_density,
        },
        breakdown: bd,
    })
}

/// A real number stored as `sign * exp(log_abs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenfunValue {
    pub value: f64,
    pub sign: f64,
    pub log_abs: f64,
    /// Bound on the log-mass of the Weyl factors beyond the cutoff.
    pub tail_bound: f64,
    pub eps_cutoff: f64,
}

/// `prod_k Gamma_k(|h^(k)|^2)` over the dual lattice.
pub fn genfun_finite(params: &ModelParams, spec: &GrandSpec, tf: &TestFunction) -> Result<GenfunValue> {
    check_state(params, spec)?;
    tf.validate()?;
    let eps_cutoff =
        lattice::weyl_cutoff(params, spec.beta, spec.mu, WEYL_TAIL_TOL, tf).max(default_cutoff(params, spec));
    genfun_finite_at_cutoff(params, spec, tf, eps_cutoff)
}

pub fn genfun_finite_at_cutoff(
    params: &ModelParams,
    spec: &GrandSpec,
    tf: &TestFunction,
    eps_cutoff: f64,
) -> Result<GenfunValue> {
    check_state(params, spec)?;
    let tail_bound = lattice::weyl_log_tail_bound(params, spec.beta, spec.mu, eps_cutoff, tf);
    if tf.is_zero() {
        return Ok(GenfunValue { value: 1.0, sign: 1.0, log_abs: 0.0, tail_bound: 0.0, eps_cutoff });
    }
    let mut sign = 1.0;
    let mut log_abs = CompensatedSum::new();
    let mut push = |factor: f64, count: u64| {
        if factor < 0.0 && count % 2 == 1 {
            sign = -sign;
        }
        log_abs.add(count as f64 * factor.abs().ln());
    };
    push(single_mode::weyl_factor(&params.zero_mode(), spec, tf.hat_abs_sq(0.0))?, 1);
    for sh in lattice::shells(params, eps_cutoff)? {
        let factor = single_mode::weyl_factor(&sh.mode(params), spec, tf.hat_abs_sq(sh.k_norm_sq))?;
        push(factor, sh.count);
    }
    let log_abs = log_abs.value();
    Ok(GenfunValue { value: sign * log_abs.exp(), sign, log_abs, tail_bound, eps_cutoff })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::enumerate_modes;
    use crate::single_mode::{mode_occupation, mode_weyl_factor_free};
    use crate::tdlimit;

    fn hi(l: f64) -> ModelParams {
        ModelParams::interacting(3, l, -1.0, 1.0, 1.0)
    }

    fn spec(p: &ModelParams, mu: f64) -> GrandSpec {
        GrandSpec::new(1.0, mu, p.volume())
    }

    #[test]
    fn vanishes_far_below() {
        let p = hi(8.0);
        let b = total_density(&p, &spec(&p, -60.0)).unwrap();
        assert!(b.rho_total < 1e-20);
        assert!(b.rho_zero_mode >= 0.0 && b.rho_dminus == 0.0 && b.rho_dplus >= 0.0);
    }

    #[test]
    fn perfect_gas_density_approaches_integral() {
        let p = ModelParams::perfect(3, 30.0);
        let b = total_density(&p, &spec(&p, -0.5)).unwrap();
        let oracle = tdlimit::rho_p(1.0, -0.5, 3, 1.0).unwrap();
        assert!((b.rho_total - oracle).abs() < 0.02 * oracle);
    }

    #[test]
    fn zero_mode_carries_the_nonconventional_condensate() {
        let p = hi(30.0);
        let b = total_density(&p, &spec(&p, -0.2)).unwrap();
        assert!((b.rho_zero_mode - 0.8).abs() < 0.02 * 0.8);
        assert_eq!(b.rho_dminus, 0.0);
    }

    #[test]
    fn breakdown_is_consistent_and_matches_per_mode_sum() {
        let p = ModelParams::interacting(3, 6.0, -0.5, 1.5, 0.8);
        let s = spec(&p, 1.5);
        let b = total_density(&p, &s).unwrap();
        let parts = b.rho_zero_mode + b.rho_dminus + b.rho_dplus;
        assert!((b.rho_total - parts).abs() <= 1e-10 * b.rho_total);
        assert!(b.rho_dminus > 0.0);
        // every enumerated mode individually, in reverse order
        let modes = enumerate_modes(&p, b.eps_cutoff).unwrap();
        let direct: CompensatedSum = modes.iter().rev().map(|m| mode_occupation(m, &s).unwrap() / p.volume()).collect();
        assert!((direct.value() - b.rho_total).abs() <= 1e-12 * b.rho_total);
    }

    #[test]
    fn tail_certificate_covers_doubled_cutoff() {
        for (p, mu) in [(hi(5.0), -0.2), (ModelParams::perfect(2, 7.0), -0.1), (hi(4.0), 0.5)] {
            let s = spec(&p, mu);
            for &cut in &[3.0, 8.0] {
                let a = total_density_at_cutoff(&p, &s, cut).unwrap();
                let b = total_density_at_cutoff(&p, &s, 2.0 * cut).unwrap();
                assert!(a.tail_bound >= b.rho_total - a.rho_total, "cut={cut}");
            }
        }
    }

    #[test]
    fn density_increases_with_mu() {
        let p = hi(8.0);
        for &mu in &[-0.5, 0.0, 0.3] {
            let lo = total_density(&p, &spec(&p, mu - 1e-4)).unwrap().rho_total;
            let up = total_density(&p, &spec(&p, mu + 1e-4)).unwrap().rho_total;
            assert!(up > lo);
        }
    }

    #[test]
    fn dminus_empty_for_nonpositive_mu() {
        for &mu in &[-1.0, -0.01, 0.0] {
            let p = hi(12.0);
            assert_eq!(total_density(&p, &spec(&p, mu)).unwrap().rho_dminus, 0.0);
        }
    }

    #[test]
    fn free_profile_diverges_at_first_level() {
        let p = ModelParams::truncated(3, 10.0, -1.0, 1.0);
        let r = total_density(&p, &spec(&p, p.first_excited()));
        assert!(matches!(r, Err(Error::Divergence(_))));
    }

    #[test]
    fn solve_mu_round_trip() {
        let p = hi(8.0);
        for &mu in &[-0.7, -0.05, 0.2] {
            let rho = total_density(&p, &spec(&p, mu)).unwrap().rho_total;
            let back = solve_mu(&p, &spec(&p, 0.0), rho).unwrap();
            assert!((back - mu).abs() < 1e-9, "{mu} -> {back}");
        }
        let t = ModelParams::truncated(3, 8.0, -1.0, 1.0);
        for &rho in &[0.3, 1.5, 4.0] {
            let mu = solve_mu(&t, &spec(&t, 0.0), rho).unwrap();
            assert!(mu < t.first_excited());
            let r = total_density(&t, &spec(&t, mu)).unwrap().rho_total;
            assert!((r - rho).abs() <= 1e-10 * rho);
        }
    }

    #[test]
    fn solve_mu_regimes() {
        let rc = tdlimit::rho_c_i(1.0, &hi(1.0)).unwrap().unwrap();
        let p16 = hi(16.0);
        assert!(solve_mu(&p16, &spec(&p16, 0.0), rc + 0.5).unwrap() > 0.0);
        let m16 = solve_mu(&p16, &spec(&p16, 0.0), 0.5 * rc).unwrap();
        let p24 = hi(24.0);
        let m24 = solve_mu(&p24, &spec(&p24, 0.0), 0.5 * rc).unwrap();
        assert!(m16 < 0.0 && m24 < 0.0);
        assert!((m16 - m24).abs() < 0.05 * m24.abs());
        assert!(solve_mu(&p16, &spec(&p16, 0.0), -1.0).is_err());
    }

    #[test]
    fn subcritical_scan_has_no_shell_condensate() {
        let p = hi(12.0);
        let r = condensate_scan(&p, &spec(&p, -0.3), &[0.3, 0.6, 1.2]).unwrap();
        assert_eq!(r.classification, Classification::NonConventionalOnly);
        assert!(r.shell_densities[0].1 < 1e-3);
        assert!(r.shell_densities.windows(2).all(|w| w[1].1 >= w[0].1));
        let q = ModelParams::interacting(3, 12.0, 0.5, 1.0, 1.0);
        let r = condensate_scan(&q, &spec(&q, -0.3), &[0.3]).unwrap();
        assert_eq!(r.classification, Classification::None);
        assert!(condensate_scan(&p, &spec(&p, -0.3), &[0.6, 0.3]).is_err());
    }

    #[test]
    fn genfun_trivial_and_free_cases() {
        let p = hi(8.0);
        let g = genfun_finite(&p, &spec(&p, -0.3), &TestFunction::gaussian(0.0, 1.0)).unwrap();
        assert_eq!(g.value, 1.0);

        let pbg = ModelParams::perfect(3, 6.0);
        let s = spec(&pbg, -0.2);
        let tf = TestFunction::gaussian(1.5, 0.8);
        let g = genfun_finite(&pbg, &s, &tf).unwrap();
        let modes = enumerate_modes(&pbg, g.eps_cutoff).unwrap();
        let log: CompensatedSum =
            modes.iter().map(|m| mode_weyl_factor_free(m, &s, tf.hat_abs_sq(m.k_norm_sq)).unwrap().ln()).collect();
        assert!((g.value - log.value().exp()).abs() < 1e-10);
        assert!(g.tail_bound < 1e-10);
    }

    #[test]
    fn genfun_sign_follows_the_zero_mode() {
        // large |h_0| puts the zero-mode factor past the first zero of J0
        let p = hi(4.0);
        let s = spec(&p, 0.0);
        let tf = TestFunction::gaussian(3.0, 1.0);
        let g = genfun_finite(&p, &s, &tf).unwrap();
        let z0 = single_mode::mode_weyl_factor(&p.zero_mode(), &s, 9.0).unwrap();
        assert_eq!(g.sign, z0.signum());
        assert!(g.value.abs() <= 1.0);
    }
}
