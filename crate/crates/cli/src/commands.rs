//! Grid expansion and the per-point computations behind each command.

use serde::Serialize;
use serde_json::{json, Value};

use diagbose::canonical;
use diagbose::experiments;
use diagbose::grand;
use diagbose::lattice::{ModelParams, TestFunction};
use diagbose::single_mode::GrandSpec;
use diagbose::tdlimit::{self, StateInput};
use diagbose::Error;

use crate::config::{Axis, Command, Functional, RunConfig};

pub const DEFAULT_QUAD_TOL: f64 = 1e-8;

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    pub fn opt(x: Option<f64>) -> Cell {
        Cell::Num(x.unwrap_or(f64::NAN))
    }

    /// Floats carry 17 significant digits.
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) if x.is_nan() => "nan".into(),
            Cell::Num(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Columns of the CSV table written by each command.
pub fn columns(command: Command) -> &'static [&'static str] {
    match command {
        Command::Sweep => &[
            "d",
            "L",
            "beta",
            "mu",
            "rho_total",
            "rho_zero",
            "rho_Dminus",
            "rho_Dplus",
            "max_mode_fraction",
            "tail_bound",
            "rho_c_I",
            "mu_limit",
            "rho_limit",
            "rho_0_I",
        ],
        Command::SolveMu => &["d", "L", "beta", "rho", "mu", "rho_achieved", "mu_limit"],
        Command::Genfun => &["d", "L", "beta", "mu", "e_finite", "e_limit", "gap", "tail_bound"],
        Command::Condense => &[
            "d",
            "L",
            "beta",
            "mu",
            "delta",
            "shell_density",
            "max_mode_fraction",
            "rho_zero",
            "macroscopic_modes",
            "classification",
        ],
        Command::KacCheck => &["d", "beta", "rho", "rho_c", "residual"],
        Command::Equiv => &["d", "L", "beta", "rho", "N", "mu", "e_canonical", "e_grand", "gap"],
        Command::Scaling => &["beta", "rho", "L", "V", "mu", "flagged"],
        Command::Positivity => &["d", "L", "beta", "axis", "value", "size", "min_eigenvalue"],
    }
}

/// A grid point. `l` is `None` for commands that work at the limit level
/// or over a whole ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub beta: f64,
    pub l: Option<f64>,
    pub value: f64,
}

impl Point {
    pub fn describe(&self, axis: Axis) -> String {
        let name = match axis {
            Axis::Mu => "mu",
            Axis::Rho => "rho",
        };
        match self.l {
            Some(l) => format!("beta={} L={} {name}={}", self.beta, l, self.value),
            None => format!("beta={} {name}={}", self.beta, self.value),
        }
    }
}

fn uses_box(cfg: &RunConfig) -> bool {
    match cfg.command {
        Command::KacCheck | Command::Scaling => false,
        Command::Positivity => cfg.functional.unwrap_or_default() == Functional::Finite,
        _ => true,
    }
}

/// Grid points in index order: `beta` outermost, then `L`, then `mu` or `rho`.
pub fn expand(cfg: &RunConfig) -> Vec<Point> {
    let lengths: Vec<Option<f64>> =
        if uses_box(cfg) { cfg.lengths().into_iter().map(Some).collect() } else { vec![None] };
    let mut out = Vec::new();
    for &beta in &cfg.grid.beta {
        for &l in &lengths {
            for &value in cfg.axis_values() {
                out.push(Point { beta, l, value });
            }
        }
    }
    out
}

/// Result of one grid point.
#[derive(Debug, Clone)]
pub struct PointOutput {
    pub json: Value,
    pub rows: Vec<Vec<Cell>>,
    pub summary: String,
}

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result types serialize")
}

fn state_input(axis: Axis, value: f64) -> StateInput {
    match axis {
        Axis::Mu => StateInput::Mu(value),
        Axis::Rho => StateInput::Rho(value),
    }
}

/// Finite-volume `mu`: the grid value, or the solution at the grid density.
fn finite_mu(p: &ModelParams, beta: f64, axis: Axis, value: f64) -> Result<f64, Error> {
    match axis {
        Axis::Mu => Ok(value),
        Axis::Rho => grand::solve_mu(p, &GrandSpec::new(beta, 0.0, p.volume()), value),
    }
}

/// Limit value where a limit state exists, `None` otherwise.
fn limit_genfun(beta: f64, axis: Axis, value: f64, p: &ModelParams, tf: &TestFunction) -> Result<Option<f64>, Error> {
    if axis == Axis::Mu && value > 0.0 {
        return Ok(None);
    }
    tdlimit::genfun_limit(beta, state_input(axis, value), p, tf).map(Some)
}

pub fn run_point(cfg: &RunConfig, pt: &Point) -> Result<PointOutput, Error> {
    let axis = cfg.axis();
    let model = match pt.l {
        Some(l) => cfg.model.with_l(l),
        None => cfg.model.clone(),
    };
    let d = model.d as u64;
    let beta = pt.beta;
    let x = pt.value;
    let quad_tol = cfg.quad_tol.unwrap_or(DEFAULT_QUAD_TOL);
    match cfg.command {
        Command::Sweep => {
            let mu = finite_mu(&model, beta, axis, x)?;
            let bd = grand::total_density(&model, &GrandSpec::new(beta, mu, model.volume()))?;
            let rho_c = tdlimit::rho_c_i(beta, &model)?;
            let (mu_limit, rho_limit) = match axis {
                Axis::Rho => (Some(tdlimit::mu_of_rho_limit(beta, x, &model)?), Some(x)),
                Axis::Mu if x <= 0.0 => (Some(x), tdlimit::rho_i(beta, x, &model).ok()),
                Axis::Mu => (None, None),
            };
            let rho_0 = mu_limit.map(|m| tdlimit::rho_0_i(m, model.eps0, model.g0));
            let row = vec![
                Cell::Int(d),
                Cell::Num(model.l),
                Cell::Num(beta),
                Cell::Num(mu),
                Cell::Num(bd.rho_total),
                Cell::Num(bd.rho_zero_mode),
                Cell::Num(bd.rho_dminus),
                Cell::Num(bd.rho_dplus),
                Cell::Num(bd.max_mode_fraction),
                Cell::Num(bd.tail_bound),
                Cell::opt(rho_c),
                Cell::opt(mu_limit),
                Cell::opt(rho_limit),
                Cell::opt(rho_0),
            ];
            let summary = format!("rho_total={:.6e} rho_zero={:.6e}", bd.rho_total, bd.rho_zero_mode);
            let json = json!({
                "beta": beta,
                "breakdown": to_json(&bd),
                "limit": {"rho_c_I": rho_c, "mu_limit": mu_limit, "rho_limit": rho_limit, "rho_0_I": rho_0},
            });
            Ok(PointOutput { json, rows: vec![row], summary })
        }
        Command::SolveMu => {
            let mu = finite_mu(&model, beta, axis, x)?;
            let achieved = grand::total_density(&model, &GrandSpec::new(beta, mu, model.volume()))?.rho_total;
            let mu_limit = tdlimit::mu_of_rho_limit(beta, x, &model)?;
            let row = vec![
                Cell::Int(d),
                Cell::Num(model.l),
                Cell::Num(beta),
                Cell::Num(x),
                Cell::Num(mu),
                Cell::Num(achieved),
                Cell::Num(mu_limit),
            ];
            let json = json!({
                "d": d, "L": model.l, "beta": beta, "rho": x, "mu": mu,
                "rho_achieved": achieved, "mu_limit": mu_limit,
            });
            Ok(PointOutput { json, rows: vec![row], summary: format!("mu={mu:.10e}") })
        }
        Command::Genfun => {
            let tf = cfg.test_function();
            let mu = finite_mu(&model, beta, axis, x)?;
            let e = grand::genfun_finite(&model, &GrandSpec::new(beta, mu, model.volume()), &tf)?;
            let lim = limit_genfun(beta, axis, x, &model, &tf)?;
            let gap = lim.map(|l| (e.value - l).abs());
            let row = vec![
                Cell::Int(d),
                Cell::Num(model.l),
                Cell::Num(beta),
                Cell::Num(mu),
                Cell::Num(e.value),
                Cell::opt(lim),
                Cell::opt(gap),
                Cell::Num(e.tail_bound),
            ];
            let json = json!({
                "d": d, "L": model.l, "beta": beta, "mu": mu,
                "finite": to_json(&e), "e_limit": lim, "gap": gap,
            });
            Ok(PointOutput { json, rows: vec![row], summary: format!("E={:.10e}", e.value) })
        }
        Command::Condense => {
            let deltas = cfg.deltas.clone().unwrap_or_default();
            let mu = finite_mu(&model, beta, axis, x)?;
            let r = grand::condensate_scan(&model, &GrandSpec::new(beta, mu, model.volume()), &deltas)?;
            let label = format!("{:?}", r.classification);
            let rows = r
                .shell_densities
                .iter()
                .map(|&(delta, dens)| {
                    vec![
                        Cell::Int(d),
                        Cell::Num(model.l),
                        Cell::Num(beta),
                        Cell::Num(mu),
                        Cell::Num(delta),
                        Cell::Num(dens),
                        Cell::Num(r.evidence.max_mode_fraction),
                        Cell::Num(r.evidence.zero_mode_fraction),
                        Cell::Int(r.evidence.macroscopic_mode_count),
                        Cell::Text(label.clone()),
                    ]
                })
                .collect();
            let json = json!({"d": d, "L": model.l, "beta": beta, "mu": mu, "report": to_json(&r)});
            Ok(PointOutput { json, rows, summary: format!("mu={mu:.6e} {label}") })
        }
        Command::KacCheck => {
            let tf = cfg.test_function();
            let rho_c = tdlimit::rho_c_i(beta, &model)?;
            let residual = tdlimit::kac_mixture_check(beta, x, &model, &tf, quad_tol)?;
            let row = vec![Cell::Int(d), Cell::Num(beta), Cell::Num(x), Cell::opt(rho_c), Cell::Num(residual)];
            let json = json!({"d": d, "beta": beta, "rho": x, "rho_c": rho_c, "residual": residual});
            Ok(PointOutput { json, rows: vec![row], summary: format!("residual={residual:.3e}") })
        }
        Command::Equiv => {
            let tf = cfg.test_function();
            let r = canonical::equivalence_gap(&model, beta, x, &tf, None)?;
            let row = vec![
                Cell::Int(d),
                Cell::Num(model.l),
                Cell::Num(beta),
                Cell::Num(x),
                Cell::Int(r.n as u64),
                Cell::Num(r.mu),
                Cell::Num(r.e_canonical),
                Cell::Num(r.e_grand),
                Cell::Num(r.gap),
            ];
            let json = json!({"d": d, "L": model.l, "beta": beta, "rho": x, "report": to_json(&r)});
            Ok(PointOutput { json, rows: vec![row], summary: format!("N={} gap={:.3e}", r.n, r.gap) })
        }
        Command::Scaling => {
            let fit = experiments::mu_scaling_study(&model, beta, x, &cfg.lengths())?;
            let rows = fit
                .points
                .iter()
                .map(|p| {
                    vec![
                        Cell::Num(beta),
                        Cell::Num(x),
                        Cell::Num(p.l),
                        Cell::Num(p.volume),
                        Cell::Num(p.mu),
                        Cell::Text(p.flagged.to_string()),
                    ]
                })
                .collect();
            let summary = format!("slope={:.4} B={:.4} r2={:.5}", fit.slope, fit.prefactor, fit.r_squared);
            let json = json!({"beta": beta, "rho": x, "fit": to_json(&fit)});
            Ok(PointOutput { json, rows, summary })
        }
        Command::Positivity => {
            let set: Vec<TestFunction> = cfg.tf_set.iter().flatten().map(|t| t.build()).collect();
            let report = match cfg.functional.unwrap_or_default() {
                Functional::Limit => experiments::positivity_check(
                    |h| tdlimit::genfun_limit(beta, state_input(axis, x), &model, h),
                    &set,
                    model.d,
                )?,
                Functional::Finite => {
                    let mu = finite_mu(&model, beta, axis, x)?;
                    let spec = GrandSpec::new(beta, mu, model.volume());
                    experiments::positivity_check(|h| Ok(grand::genfun_finite(&model, &spec, h)?.value), &set, model.d)?
                }
            };
            let axis_name = if axis == Axis::Mu { "mu" } else { "rho" };
            let row = vec![
                Cell::Int(d),
                Cell::opt(pt.l),
                Cell::Num(beta),
                Cell::Text(axis_name.into()),
                Cell::Num(x),
                Cell::Int(report.size as u64),
                Cell::Num(report.min_eigenvalue),
            ];
            let json = json!({"d": d, "L": pt.l, "beta": beta, axis_name: x, "report": to_json(&report)});
            Ok(PointOutput { json, rows: vec![row], summary: format!("min_eigenvalue={:.3e}", report.min_eigenvalue) })
        }
    }
}
