//! Volume-ladder studies tying finite boxes to the limit formulas.
//!
//! Every study runs its ladder in ascending `L`, so results depend only
//! on the inputs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grand::{self, Classification, CondensateReport};
use crate::lattice::{GkProfile, ModelParams, TestFunction};
use crate::single_mode::GrandSpec;
use crate::tdlimit::{self, StateInput};

/// Largest test-function set accepted by [`positivity_check`].
pub const MAX_POSITIVITY_SET: usize = 12;

fn sorted_ladder(ladder: &[f64]) -> Result<Vec<f64>> {
    if ladder.is_empty() || ladder.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return domain("L ladder must hold positive box lengths");
    }
    let mut out = ladder.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Ordinary least squares `y = slope x + intercept`, with `r^2`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return domain("least squares needs at least two paired points");
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return domain("least squares needs distinct abscissae");
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, my - slope * mx, r2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "V")]
    pub volume: f64,
    pub mu: f64,
    /// Excluded from the fit because `mu <= 0`.
    pub flagged: bool,
}

/// Power-law fit `mu_V ~ B V^{slope}` over a ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub theory_slope: f64,
    #[serde(rename = "theory_B")]
    pub theory_b: f64,
    /// Slope refitted on the larger half of the ladder.
    pub upper_half_slope: f64,
    pub warnings: Vec<String>,
}

/// Solves `mu_V` at fixed supercritical `rho` on each `L` and fits
/// `log mu` against `log V`.
pub fn mu_scaling_study(params: &ModelParams, beta: f64, rho: f64, ladder: &[f64]) -> Result<ScalingFit> {
    params.validate()?;
    if params.d <= 2 || !matches!(params.gk_profile, GkProfile::Constant(_)) {
        return domain("scaling study needs d > 2 and a constant g profile");
    }
    let ladder = sorted_ladder(ladder)?;
    if ladder.len() < 4 {
        return domain(format!("scaling study needs at least 4 ladder points, got {}", ladder.len()));
    }
    let theory_b = tdlimit::b_of_rho(beta, rho, params)?;
    let mut points = Vec::with_capacity(ladder.len());
    let mut warnings = Vec::new();
    for &l in &ladder {
        let p = params.with_l(l);
        let v = p.volume();
        let mu = grand::solve_mu(&p, &GrandSpec::new(beta, 0.0, v), rho)?;
        let flagged = mu <= 0.0;
        if flagged {
            warnings.push(format!("L = {l}: mu = {mu} is not positive, point excluded"));
        }
        points.push(ScalingPoint { l, volume: v, mu, flagged });
    }
    let used: Vec<&ScalingPoint> = points.iter().filter(|p| !p.flagged).collect();
    if used.len() < 2 {
        return Err(Error::Numeric { message: "fewer than two ladder points with mu > 0".into(), residual: f64::NAN });
    }
    if used.len() < 4 {
        warnings.push(format!("only {} points left for the fit", used.len()));
    }
    let xs: Vec<f64> = used.iter().map(|p| p.volume.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.mu.ln()).collect();
    let (slope, intercept, r_squared) = ols(&xs, &ys)?;
    let half = (xs.len() / 2).max(2).min(xs.len());
    let start = xs.len() - half;
    let (upper_half_slope, _, _) = ols(&xs[start..], &ys[start..])?;
    Ok(ScalingFit {
        points,
        slope,
        prefactor: intercept.exp(),
        r_squared,
        theory_slope: -2.0 / (params.d as f64 + 2.0),
        theory_b,
        upper_half_slope,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensateRow {
    #[serde(rename = "L")]
    pub l: f64,
    pub mu: f64,
    pub report: CondensateReport,
}

/// Where the excess density sits along a ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeIIIReport {
    pub rho: f64,
    pub rho_c: f64,
    pub excess: f64,
    pub rows: Vec<CondensateRow>,
    pub max_fraction_strictly_decreasing: bool,
    /// `|shell - excess| / excess` at the largest `L` and smallest delta.
    pub shell_relative_error: f64,
    pub final_classification: Classification,
}

/// Runs [`grand::condensate_scan`] at fixed `rho` on every `L`.
pub fn typeiii_study(
    params: &ModelParams,
    beta: f64,
    rho: f64,
    ladder: &[f64],
    deltas: &[f64],
) -> Result<TypeIIIReport> {
    params.validate()?;
    let rho_c = tdlimit::rho_c_i(beta, params)?
        .ok_or_else(|| Error::Domain(format!("no finite critical density in d = {}", params.d)))?;
    let ladder = sorted_ladder(ladder)?;
    let mut rows = Vec::with_capacity(ladder.len());
    for &l in &ladder {
        let p = params.with_l(l);
        let spec = GrandSpec::new(beta, 0.0, p.volume());
        let mu = grand::solve_mu(&p, &spec, rho)?;
        let report = grand::condensate_scan(&p, &spec.with_mu(mu), deltas)?;
        rows.push(CondensateRow { l, mu, report });
    }
    let fractions: Vec<f64> = rows.iter().map(|r| r.report.evidence.max_mode_fraction).collect();
    let last = rows.last().expect("non-empty ladder");
    let excess = rho - rho_c;
    let shell = last.report.shell_densities[0].1;
    Ok(TypeIIIReport {
        rho,
        rho_c,
        excess,
        max_fraction_strictly_decreasing: strictly_decreasing(&fractions),
        shell_relative_error: (shell - excess).abs() / excess.abs(),
        final_classification: last.report.classification,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenfunRow {
    #[serde(rename = "L")]
    pub l: f64,
    pub mu: f64,
    pub e_finite: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenfunLadder {
    pub e_limit: f64,
    pub rows: Vec<GenfunRow>,
    pub gaps_strictly_decreasing: bool,
}

/// `|E_V(h) - E(h)|` on each `L`, at fixed `mu` or at the `mu_V` that
/// matches a fixed density.
pub fn genfun_convergence_study(
    params: &ModelParams,
    beta: f64,
    input: StateInput,
    tf: &TestFunction,
    ladder: &[f64],
) -> Result<GenfunLadder> {
    let e_limit = tdlimit::genfun_limit(beta, input, params, tf)?;
    let ladder = sorted_ladder(ladder)?;
    let mut rows = Vec::with_capacity(ladder.len());
    for &l in &ladder {
        let p = params.with_l(l);
        let spec = GrandSpec::new(beta, 0.0, p.volume());
        let mu = match input {
            StateInput::Mu(mu) => mu,
            StateInput::Rho(rho) => grand::solve_mu(&p, &spec, rho)?,
        };
        let e = grand::genfun_finite(&p, &spec.with_mu(mu), tf)?.value;
        rows.push(GenfunRow { l, mu, e_finite: e, gap: (e - e_limit).abs() });
    }
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let gaps_strictly_decreasing = gaps.iter().all(|&g| g == 0.0) || strictly_decreasing(&gaps);
    Ok(GenfunLadder { e_limit, rows, gaps_strictly_decreasing })
}

/// The interacting model and its zero-mode-only truncation side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationComparison {
    pub interacting: GenfunLadder,
    pub truncated: GenfunLadder,
    /// `|E_V^I - E_V^0|` per ladder point.
    pub mutual_gaps: Vec<f64>,
}

/// Runs [`genfun_convergence_study`] for `params` and for the model with
/// the same `eps0, g0` but no interaction off the zero mode.
pub fn truncation_comparison(
    params: &ModelParams,
    beta: f64,
    input: StateInput,
    tf: &TestFunction,
    ladder: &[f64],
) -> Result<TruncationComparison> {
    let truncated_params = ModelParams { gk_profile: GkProfile::Zero, ..params.clone() };
    let interacting = genfun_convergence_study(params, beta, input, tf, ladder)?;
    let truncated = genfun_convergence_study(&truncated_params, beta, input, tf, ladder)?;
    let mutual_gaps =
        interacting.rows.iter().zip(&truncated.rows).map(|(a, b)| (a.e_finite - b.e_finite).abs()).collect();
    Ok(TruncationComparison { interacting, truncated, mutual_gaps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroModeRow {
    #[serde(rename = "L")]
    pub l: f64,
    pub rho_zero_mode: f64,
    pub predicted: f64,
}

/// Zero-mode density against `max(0, (mu - eps0)/g0)` at fixed `mu`; works
/// in every dimension.
pub fn zero_mode_tracking(params: &ModelParams, beta: f64, mu: f64, ladder: &[f64]) -> Result<Vec<ZeroModeRow>> {
    let ladder = sorted_ladder(ladder)?;
    let predicted = tdlimit::rho_0_i(mu, params.eps0, params.g0);
    ladder
        .iter()
        .map(|&l| {
            let p = params.with_l(l);
            let b = grand::total_density(&p, &GrandSpec::new(beta, mu, p.volume()))?;
            Ok(ZeroModeRow { l, rho_zero_mode: b.rho_zero_mode, predicted })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub size: usize,
    pub min_eigenvalue: f64,
    pub eigenvalues: Vec<f64>,
}

/// Smallest eigenvalue of the Hermitian matrix
/// `M_ls = E(h_l - h_s) exp((i/2) Im <h_l, h_s>)`.
pub fn positivity_check<F>(functional: F, tfs: &[TestFunction], d: usize) -> Result<PositivityReport>
where
    F: Fn(&TestFunction) -> Result<f64>,
{
    let n = tfs.len();
    if n == 0 || n > MAX_POSITIVITY_SET {
        return domain(format!("test-function set must hold 1 to {MAX_POSITIVITY_SET} entries, got {n}"));
    }
    for tf in tfs {
        tf.validate()?;
    }
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for l in 0..n {
        for s in 0..=l {
            let e = functional(&tfs[l].difference(&tfs[s]))?;
            let phase = Complex64::new(0.0, 0.5 * tfs[l].inner(&tfs[s], d).im).exp();
            m[(l, s)] = phase * e;
            m[(s, l)] = (phase * e).conj();
        }
    }
    let eig = m.symmetric_eigenvalues();
    let mut eigenvalues: Vec<f64> = eig.iter().copied().collect();
    if eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric {
            message: "eigenvalue solver returned non-finite values".into(),
            residual: f64::NAN,
        });
    }
    eigenvalues.sort_by(f64::total_cmp);
    Ok(PositivityReport { size: n, min_eigenvalue: eigenvalues[0], eigenvalues })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 - 0.4 * x).collect();
        let (s, c, r2) = ols(&xs, &ys).unwrap();
        assert!((s + 0.4).abs() < 1e-14 && (c - 2.5).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
        assert!(ols(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn scaling_study_rejects_short_ladders_and_subcritical_density() {
        let p = ModelParams::interacting(3, 8.0, -1.0, 1.0, 1.0);
        assert!(mu_scaling_study(&p, 1.0, 2.0, &[8.0, 12.0, 16.0]).is_err());
        assert!(mu_scaling_study(&p, 1.0, 0.5, &[8.0, 12.0, 16.0, 24.0]).is_err());
        let t = ModelParams::truncated(3, 8.0, -1.0, 1.0);
        assert!(mu_scaling_study(&t, 1.0, 2.0, &[8.0, 12.0, 16.0, 24.0]).is_err());
    }

    #[test]
    fn barely_supercritical_fit_still_reports() {
        let p = ModelParams::interacting(3, 8.0, -1.0, 1.0, 1.0);
        let rc = tdlimit::rho_c_i(1.0, &p).unwrap().unwrap();
        let fit = mu_scaling_study(&p, 1.0, rc + 1e-3, &[6.0, 8.0, 10.0, 12.0]).unwrap();
        assert!(fit.r_squared.is_finite());
        assert_eq!(fit.points.len(), 4);
    }

    #[test]
    fn trivial_test_function_has_no_gap() {
        let p = ModelParams::interacting(3, 8.0, -1.0, 1.0, 1.0);
        let r = genfun_convergence_study(&p, 1.0, StateInput::Mu(-0.3), &TestFunction::zero(), &[6.0, 8.0]).unwrap();
        assert!(r.rows.iter().all(|row| row.gap == 0.0));
        assert!(r.gaps_strictly_decreasing);
    }

    #[test]
    fn subcritical_shells_empty_out() {
        let p = ModelParams::interacting(3, 8.0, -1.0, 1.0, 1.0);
        let r = typeiii_study(&p, 1.0, 0.5, &[8.0, 16.0, 24.0], &[0.3]).unwrap();
        for row in &r.rows {
            assert!(row.report.shell_densities[0].1 < 2e-3);
            assert_eq!(row.report.classification, Classification::NonConventionalOnly);
        }
    }

    #[test]
    fn zero_mode_tracks_in_one_dimension() {
        let p = ModelParams::interacting(1, 10.0, -1.0, 2.0, 1.0);
        let rows = zero_mode_tracking(&p, 1.0, -0.2, &[50.0, 200.0, 1000.0]).unwrap();
        let errs: Vec<f64> = rows.iter().map(|r| (r.rho_zero_mode - r.predicted).abs()).collect();
        assert!(errs[2] < 0.02 * rows[2].predicted);
        assert!(strictly_decreasing(&errs));
    }

    #[test]
    fn single_trivial_function_gives_unit_matrix() {
        let r = positivity_check(|_| Ok(1.0), &[TestFunction::zero()], 3).unwrap();
        assert_eq!(r.eigenvalues, vec![1.0]);
    }

    #[test]
    fn positivity_detects_a_non_positive_functional() {
        // -|h^_0|^2 vanishes on the diagonal, so its trace is zero
        let tfs: Vec<TestFunction> = [0.0, 2.0, 4.0].iter().map(|&a| TestFunction::gaussian(a, 1.0)).collect();
        let bad = positivity_check(|h| Ok(-(h.hat0().norm().powi(2))), &tfs, 3).unwrap();
        assert!(bad.min_eigenvalue < -1.0);
        let good = positivity_check(|h| Ok((-h.norm_sq(3) / 4.0).exp()), &tfs, 3).unwrap();
        assert!(good.min_eigenvalue > -1e-12);
    }

    #[test]
    fn positivity_matrix_is_hermitian_with_phases() {
        let tfs = vec![
            TestFunction::gaussian_complex(Complex64::from_polar(1.0, 0.3), 1.0),
            TestFunction::gaussian_complex(Complex64::from_polar(0.7, 2.1), 0.6),
        ];
        let r = positivity_check(|h| Ok((-h.norm_sq(3) / 4.0).exp()), &tfs, 3).unwrap();
        assert!(r.eigenvalues.iter().all(|x| x.is_finite()));
        assert!(r.min_eigenvalue > -1e-12);
        assert!(positivity_check(|_| Ok(1.0), &vec![TestFunction::zero(); 13], 3).is_err());
    }
}
