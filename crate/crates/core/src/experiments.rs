//! Desk-scale studies: convergence under a schedule, the interpolation limit
//! in `λ`, condition-number growth and the Koksma–Hlawka inequality.

use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, TruncationPolicy};
use crate::oracle::{functional_value, project_target, Candidate};
use crate::sampling::{discrepancy_proxy, generate, star_discrepancy, PointSetKind};
use crate::schedule::{instantiate, ScheduleParams};
use crate::solver::{assemble, condition_diagnostics, evaluate_many, fit, fit_assembled, Factorization, ScatteredData};
use crate::sum::CompensatedSum;
use crate::targets::{sample, TargetFunction};
use crate::torus::{FrequencyBound, TorusPoint};
use crate::trig::{grid_len, grid_node};

/// Which `ζ` drives the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaSource {
    /// `(ln n)^m / n`.
    Proxy,
    /// Exact star discrepancy of the sites (one and two dimensions).
    Measured,
}

/// Everything that determines a convergence run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub target: String,
    pub params: ScheduleParams,
    pub n_list: Vec<usize>,
    pub sampler: PointSetKind,
    pub zeta_source: ZetaSource,
    /// Quadrature grid per axis; defaults to 8192 in 1D and 512 per axis in 2D.
    pub grid_res: Option<usize>,
    pub force: bool,
    /// Record wall-clock time per row. Off by default so that reports are
    /// reproducible bit for bit.
    pub timing: bool,
}

impl ConvergenceConfig {
    pub fn new(target: &TargetFunction, params: ScheduleParams, n_list: Vec<usize>, sampler: PointSetKind) -> Self {
        ConvergenceConfig {
            target: target.name().to_string(),
            params,
            n_list,
            sampler,
            zeta_source: ZetaSource::Proxy,
            grid_res: None,
            force: false,
            timing: false,
        }
    }

    pub fn resolution(&self, m: usize) -> usize {
        self.grid_res.unwrap_or(if m == 1 { 8192 } else { 512 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub zeta_proxy: f64,
    /// Exact star discrepancy, when computed.
    pub zeta_measured: Option<f64>,
    pub lambda: f64,
    pub omega: FrequencyBound,
    pub l2_error: f64,
    pub linf_error: f64,
    pub data_rmse: f64,
    pub kappa_measured: f64,
    pub kappa_bound: f64,
    pub wall_ms: f64,
    /// `‖u‖² + λ‖∇^k u‖² ≤ D(P_ω ψ)` held.
    pub bound_chain_holds: bool,
    pub used_fallback: bool,
    /// Solver failure for this row; the numeric fields are then NaN.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: ConvergenceConfig,
    pub grid_res: Vec<usize>,
    pub rows: Vec<ConvergenceRow>,
}

/// Fits the target at every `n` of the list under the schedule and measures
/// the error against `ψ` on a quadrature grid.
pub fn run_convergence(target: &TargetFunction, config: &ConvergenceConfig) -> Result<ConvergenceReport> {
    let m = target.dim();
    config.params.validate()?;
    if config.params.dim() != m {
        return Err(Error::Domain(format!("schedule has {} axes, target {} has {m}", config.params.dim(), target.name())));
    }
    let r = config.params.margin();
    if r <= 0.0 && !config.force {
        return Err(Error::InfeasibleSchedule { margin: r });
    }
    if config.n_list.is_empty() {
        return Err(Error::Input("empty n list".into()));
    }
    let mut n_list = config.n_list.clone();
    n_list.sort_unstable();
    n_list.dedup();
    if n_list[0] < 2 {
        return Err(Error::Input("every n must be at least 2".into()));
    }
    let res = vec![config.resolution(m); m];
    let total = grid_len(&res, m)?;

    // ψ on the quadrature grid (cell midpoints keep clear of the jumps)
    let mut x = vec![0.0; m];
    let mut psi = Vec::with_capacity(total);
    let mut nodes = Vec::with_capacity(total * m);
    for flat in 0..total {
        grid_node(flat, &res, &mut x);
        for (xi, r) in x.iter_mut().zip(&res) {
            *xi += 0.5 / *r as f64;
        }
        psi.push(target.value_coords(&x));
        nodes.extend_from_slice(&x);
    }

    let sites_all = generate(&config.sampler, n_list[n_list.len() - 1], m)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in &n_list {
        let start = Instant::now();
        let sites = &sites_all[..n];
        let zeta_proxy = discrepancy_proxy(n as f64, m)?;
        let zeta_measured = if m <= 2 { Some(star_discrepancy(sites)?.upper) } else { None };
        let zeta = match config.zeta_source {
            ZetaSource::Proxy => zeta_proxy,
            ZetaSource::Measured => zeta_measured
                .ok_or_else(|| Error::Unsupported(format!("measured discrepancy in dimension {m}")))?,
        };
        let inst = instantiate(&config.params, zeta.min(0.999), config.force)?;
        let data = sample(target, sites)?;
        let spec = KernelSpec::truncated(inst.omega.clone(), config.params.k, inst.lambda)?;
        let mut row = ConvergenceRow {
            n,
            zeta_proxy,
            zeta_measured,
            lambda: inst.lambda,
            omega: inst.omega.clone(),
            l2_error: f64::NAN,
            linf_error: f64::NAN,
            data_rmse: f64::NAN,
            kappa_measured: f64::NAN,
            kappa_bound: f64::NAN,
            wall_ms: 0.0,
            bound_chain_holds: false,
            used_fallback: false,
            failure: None,
        };
        match convergence_row(target, &data, &spec, &nodes, &psi, &mut row) {
            Ok(()) => {}
            Err(e) => {
                log::warn!("n = {n}: {e}");
                row.failure = Some(e.to_string());
            }
        }
        if config.timing {
            row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        }
        rows.push(row);
    }
    Ok(ConvergenceReport { config: config.clone(), grid_res: res, rows })
}

fn convergence_row(
    target: &TargetFunction,
    data: &ScatteredData,
    spec: &KernelSpec,
    nodes: &[f64],
    psi: &[f64],
    row: &mut ConvergenceRow,
) -> Result<()> {
    let m = target.dim();
    let matrix = assemble(data.points(), spec)?;
    let model = fit_assembled(&matrix, data.values())?;
    row.used_fallback = model.report().map(|r| r.factorization == Factorization::PivotedFallback).unwrap_or(false);
    let cond = condition_diagnostics(&matrix, spec.lambda())?;
    row.kappa_measured = cond.kappa_measured;
    row.kappa_bound = cond.kappa_bound;

    let u = model.to_trig()?;
    let mut sq = CompensatedSum::new();
    let mut sup = 0.0f64;
    for (x, &p) in nodes.chunks_exact(m).zip(psi) {
        let e = u.eval_coords(x) - p;
        sq.add(e * e);
        sup = sup.max(e.abs());
    }
    row.l2_error = (sq.value() / psi.len() as f64).sqrt();
    row.linf_error = sup;

    let at_sites = u.values_at(data.points())?;
    let misfit: f64 = at_sites.iter().zip(data.values()).map(|(a, b)| (a - b) * (a - b)).sum();
    row.data_rmse = (misfit / data.len() as f64).sqrt();

    let omega = spec.omega().expect("schedule kernels are truncated");
    let reference = functional_value(&project_target(target, omega)?, Some(data), spec.lambda(), spec.k())?;
    let reg = u.regularization(spec.lambda(), spec.k())?;
    row.bound_chain_holds = reg <= reference * (1.0 + 1e-10);
    Ok(())
}

/// One `λ` of an interpolation-limit sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub lambda: f64,
    pub max_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub omega: FrequencyBound,
    pub rows: Vec<LimitRow>,
    /// Least-squares slope of `log max_residual` against `log λ`.
    pub slope: f64,
    /// Residual at the largest `λ` with `ω` doubled.
    pub floor_doubled: f64,
}

/// Maximum site residual `max_i |u_λ(p_i) - q_i|` across an ascending `λ`
/// list at fixed `ω`, plus the residual at the largest `λ` with `ω` doubled.
pub fn run_interpolation_limit(data: &ScatteredData, spec: &KernelSpec, lambdas: &[f64]) -> Result<LimitReport> {
    let omega = spec
        .omega()
        .ok_or_else(|| Error::Unsupported("the interpolation-limit study needs a truncated kernel".into()))?
        .clone();
    if lambdas.is_empty() || lambdas.iter().any(|&l| l <= 1.0) || lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("λ list must be non-empty, strictly ascending and above 1".into()));
    }
    let residual = |s: &KernelSpec| -> Result<f64> {
        let model = fit(data, s)?;
        let vals = evaluate_many(&model, data.points())?;
        Ok(vals.iter().zip(data.values()).map(|(u, q)| (u - q).abs()).fold(0.0, f64::max))
    };
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        rows.push(LimitRow { lambda, max_residual: residual(&spec.with_lambda(lambda)?)? });
    }
    let last = *lambdas.last().unwrap();
    let floor_doubled = residual(&spec.with_lambda(last)?.with_omega(Some(omega.doubled()))?)?;
    let slope = log_log_slope(&rows.iter().map(|r| (r.lambda, r.max_residual)).collect::<Vec<_>>());
    Ok(LimitReport { omega, rows, slope, floor_doubled })
}

/// Least-squares slope of `log y` against `log x`; NaN with fewer than two
/// usable points.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Kernel family swept by [`run_condition_study`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionConfig {
    pub m: usize,
    pub k: u32,
    /// `None` sweeps the full kernel.
    pub omega: Option<FrequencyBound>,
    pub truncation: TruncationPolicy,
    pub lambdas: Vec<f64>,
    pub n_list: Vec<usize>,
    pub sampler: PointSetKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub lambda: f64,
    pub n: usize,
    pub kappa_measured: f64,
    pub kappa_bound: f64,
    pub min_eigenvalue: f64,
    /// Unpivoted Cholesky of `M` succeeded.
    pub factorized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub rows: Vec<ConditionRow>,
    /// Per `λ` (in input order): slope of `log κ` against `log n`.
    pub slopes_in_n: Vec<f64>,
    /// Per `n` (in input order): slope of `log κ` against `log λ`.
    pub slopes_in_lambda: Vec<f64>,
}

pub fn run_condition_study(config: &ConditionConfig) -> Result<ConditionReport> {
    if config.lambdas.is_empty() || config.n_list.is_empty() {
        return Err(Error::Input("λ and n lists must be non-empty".into()));
    }
    let n_max = *config.n_list.iter().max().unwrap();
    let sites = generate(&config.sampler, n_max, config.m)?;
    let mut rows = Vec::new();
    for &lambda in &config.lambdas {
        let spec = match &config.omega {
            Some(w) => KernelSpec::truncated(w.clone(), config.k, lambda)?,
            None => KernelSpec::full(config.m, config.k, lambda)?.with_truncation(config.truncation)?,
        };
        for &n in &config.n_list {
            let matrix = assemble(&sites[..n], &spec)?;
            let factorized = crate::linalg::Cholesky::factor(matrix.system_matrix(), n).is_ok();
            let d = condition_diagnostics(&matrix, lambda)?;
            rows.push(ConditionRow {
                lambda,
                n,
                kappa_measured: d.kappa_measured,
                kappa_bound: d.kappa_bound,
                min_eigenvalue: d.min_eigenvalue,
                factorized,
            });
        }
    }
    let slopes_in_n = config
        .lambdas
        .iter()
        .map(|&l| {
            let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.lambda == l).map(|r| (r.n as f64, r.kappa_measured)).collect();
            log_log_slope(&pts)
        })
        .collect();
    let slopes_in_lambda = config
        .n_list
        .iter()
        .map(|&n| {
            let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.n == n).map(|r| (r.lambda, r.kappa_measured)).collect();
            log_log_slope(&pts)
        })
        .collect();
    Ok(ConditionReport { rows, slopes_in_n, slopes_in_lambda })
}

/// Outcome of a Koksma–Hlawka check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KhResult {
    pub qmc_error: f64,
    pub discrepancy: f64,
    pub variation: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `|mean_i f(p_i) - ∫ f| ≤ D*_n V(f)` for an integrand with known integral
/// and variation.
pub fn kh_check(points: &[TorusPoint], f: impl Fn(&[f64]) -> f64, integral: f64, variation: f64) -> Result<KhResult> {
    if points.is_empty() {
        return Err(Error::Input("no sites".into()));
    }
    if !variation.is_finite() {
        return Err(Error::Unsupported("the integrand has infinite variation".into()));
    }
    if points[0].dim() > 2 {
        return Err(Error::Unsupported("the check is limited to one and two dimensions".into()));
    }
    let mean = points.iter().map(|p| f(p.coords())).collect::<CompensatedSum>().value() / points.len() as f64;
    let qmc_error = (mean - integral).abs();
    let discrepancy = star_discrepancy(points)?.upper;
    let bound = discrepancy * variation;
    Ok(KhResult { qmc_error, discrepancy, variation, bound, holds: qmc_error <= bound + 1e-12 })
}

/// [`kh_check`] with the target itself as the integrand.
pub fn run_kh_check(target: &TargetFunction, points: &[TorusPoint]) -> Result<KhResult> {
    if let Some(i) = points.iter().position(|p| p.dim() != target.dim()) {
        return Err(Error::Domain(format!("site {i} does not match the target dimension {}", target.dim())));
    }
    kh_check(points, |x| target.value_coords(x), target.mean(), target.total_variation())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::suggest;
    use crate::targets::by_name;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(-0.5))).collect();
        assert!((log_log_slope(&pts) + 0.5).abs() < 1e-12);
        assert!(log_log_slope(&pts[..1]).is_nan());
    }

    #[test]
    fn single_row_report() {
        let t = by_name("smooth").unwrap();
        let cfg = ConvergenceConfig::new(&t, suggest(1).unwrap(), vec![64], PointSetKind::Halton);
        let rep = run_convergence(&t, &cfg).unwrap();
        assert_eq!(rep.rows.len(), 1);
        let row = &rep.rows[0];
        assert!(row.failure.is_none());
        assert!(row.kappa_measured <= row.kappa_bound);
        assert!(row.bound_chain_holds);
        assert_eq!(row.wall_ms, 0.0);
    }

    #[test]
    fn infeasible_schedule_is_refused() {
        let t = by_name("sawtooth").unwrap();
        let p = ScheduleParams::new(0.5, 0.5, 1, vec![1.0]).unwrap();
        let mut cfg = ConvergenceConfig::new(&t, p, vec![16], PointSetKind::Halton);
        assert!(matches!(run_convergence(&t, &cfg), Err(Error::InfeasibleSchedule { .. })));
        cfg.force = true;
        assert_eq!(run_convergence(&t, &cfg).unwrap().rows.len(), 1);
    }

    #[test]
    fn constant_integrand_has_no_error() {
        let pts = generate(&PointSetKind::Halton, 17, 2).unwrap();
        let r = kh_check(&pts, |_| 2.5, 2.5, 0.0).unwrap();
        assert_eq!(r.qmc_error, 0.0);
        assert!(r.holds);
    }

    #[test]
    fn sawtooth_on_centered_grid() {
        let t = by_name("sawtooth").unwrap();
        for n in [8usize, 64] {
            let pts: Vec<TorusPoint> =
                (0..n).map(|i| TorusPoint::wrap(&[(2 * i + 1) as f64 / (2 * n) as f64]).unwrap()).collect();
            let r = run_kh_check(&t, &pts).unwrap();
            assert!((r.discrepancy - 0.5 / n as f64).abs() < 1e-15);
            assert!(r.qmc_error <= r.bound);
        }
    }

    #[test]
    fn interpolation_limit_scalar_case() {
        let data = ScatteredData::new(vec![TorusPoint::wrap(&[0.3]).unwrap()], vec![1.0]).unwrap();
        let spec = KernelSpec::truncated(FrequencyBound::new(vec![4]), 1, 2.0).unwrap();
        let rep = run_interpolation_limit(&data, &spec, &[2.0, 4.0, 8.0]).unwrap();
        for row in &rep.rows {
            let w0 = spec.with_lambda(row.lambda).unwrap().value_at_origin_upper().unwrap();
            let shift = 1.0 / (row.lambda * row.lambda);
            assert!((row.max_residual - shift / (w0 + shift)).abs() < 1e-14);
        }
        assert!(rep.slope < 0.0);
        assert!(run_interpolation_limit(&data, &spec, &[4.0, 2.0]).is_err());
    }

    #[test]
    fn condition_study_single_site() {
        let cfg = ConditionConfig {
            m: 1,
            k: 1,
            omega: Some(FrequencyBound::new(vec![4])),
            truncation: TruncationPolicy::default(),
            lambdas: vec![10.0, 100.0],
            n_list: vec![1, 8],
            sampler: PointSetKind::Halton,
        };
        let rep = run_condition_study(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 4);
        for r in &rep.rows {
            assert!(r.factorized);
            assert!(r.kappa_measured <= r.kappa_bound);
            if r.n == 1 {
                assert_eq!(r.kappa_measured, 1.0);
            }
        }
    }
}
