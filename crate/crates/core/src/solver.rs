//! Interpolation matrix assembly, the coefficient solve, model evaluation
//! and spectral diagnostics.
//!
//! The fitted function is the representer
//! `u(x) = Σ_i (c_i / n) K(x - p_i)` with `(K/n + I/λ²) c = q`, where `K` is
//! the kernel matrix of `w_λ` (or `g_λ`) at the sites.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, TruncationPolicy};
use crate::linalg::{self, Cholesky};
use crate::torus::{periodic_diff, TorusPoint};
use crate::trig::{grid_len, grid_node, half_box, TrigMode, TrigPolynomial};

pub const DEFAULT_MAX_SITES: usize = 4096;
pub const LAMBDA_MIN: f64 = 1e-6;
pub const LAMBDA_MAX: f64 = 1e12;
/// Sites closer than this (periodic metric) are treated as duplicates.
pub const DUPLICATE_DISTANCE: f64 = 1e-12;
/// Largest matrix handed to the dense symmetric eigensolver.
pub const DENSE_EIGEN_LIMIT: usize = 2048;

const RESIDUAL_TOL: f64 = 1e-9;

/// Sites `p_i` with values `q_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatteredData {
    points: Vec<TorusPoint>,
    values: Vec<f64>,
}

impl ScatteredData {
    /// Validates lengths, dimensions, finiteness and pairwise distinctness.
    pub fn new(points: Vec<TorusPoint>, values: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Input("at least one site is required".into()));
        }
        if points.len() != values.len() {
            return Err(Error::Input(format!("{} sites but {} values", points.len(), values.len())));
        }
        let m = points[0].dim();
        if let Some(i) = points.iter().position(|p| p.dim() != m) {
            return Err(Error::Input(format!("site {i} has dimension {}, expected {m}", points[i].dim())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("value {i} is not finite")));
        }
        check_distinct(&points)?;
        Ok(ScatteredData { points, values })
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    /// Same sites, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.points.len() {
            return Err(Error::Input(format!("{} sites but {} values", self.points.len(), values.len())));
        }
        Ok(ScatteredData { points: self.points.clone(), values })
    }
}

fn check_distinct(points: &[TorusPoint]) -> Result<()> {
    // sort by first coordinate so only a narrow window needs comparing
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].coords()[0].total_cmp(&points[b].coords()[0]));
    let first = |i: usize| points[order[i]].coords()[0];
    let n = order.len();
    for a in 0..n {
        let mut b = a + 1;
        while b < n && first(b) - first(a) < DUPLICATE_DISTANCE {
            compare(points, order[a], order[b])?;
            b += 1;
        }
    }
    // wrap-around window near 0 ≡ 1
    let mut hi = n;
    while hi > 0 && first(hi - 1) > 1.0 - DUPLICATE_DISTANCE {
        hi -= 1;
    }
    for b in hi..n {
        let mut a = 0;
        while a < n && first(a) < DUPLICATE_DISTANCE {
            if a != b {
                compare(points, order[a], order[b])?;
            }
            a += 1;
        }
    }
    Ok(())
}

fn compare(points: &[TorusPoint], i: usize, j: usize) -> Result<()> {
    let d = points[i].distance(&points[j]);
    if d < DUPLICATE_DISTANCE {
        let (first, second) = (i.min(j), i.max(j));
        return Err(Error::DuplicateSites { first, second, distance: d });
    }
    Ok(())
}

/// The symmetric matrix `[K(p_i - p_j)]`.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    n: usize,
    entries: Vec<f64>,
    spec: KernelSpec,
    points: Vec<TorusPoint>,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }

    /// `K/n + I/λ²` as a row-major buffer.
    pub fn system_matrix(&self) -> Vec<f64> {
        let n = self.n;
        let inv_n = 1.0 / n as f64;
        let shift = 1.0 / (self.spec.lambda() * self.spec.lambda());
        let mut m: Vec<f64> = self.entries.iter().map(|v| v * inv_n).collect();
        for i in 0..n {
            m[i * n + i] += shift;
        }
        m
    }
}

/// Builds the kernel matrix. Rejects (near-)duplicate sites.
pub fn assemble(points: &[TorusPoint], spec: &KernelSpec) -> Result<KernelMatrix> {
    if points.is_empty() {
        return Err(Error::Input("no sites to assemble".into()));
    }
    if let Some(i) = points.iter().position(|p| p.dim() != spec.dim()) {
        return Err(Error::Domain(format!("site {i} has dimension {}, kernel expects {}", points[i].dim(), spec.dim())));
    }
    check_distinct(points)?;
    let n = points.len();
    let eval = spec.evaluator()?;
    let mut entries = vec![0.0; n * n];
    let diag = eval.eval_coords(&vec![0.0; spec.dim()]);
    for i in 0..n {
        entries[i * n + i] = diag;
        for j in 0..i {
            let d = periodic_diff(&points[i], &points[j])?;
            let v = eval.eval(&d);
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    Ok(KernelMatrix { n, entries, spec: spec.clone(), points: points.to_vec() })
}

/// Limits applied by [`fit_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_sites: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_sites: DEFAULT_MAX_SITES }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factorization {
    Cholesky,
    /// Cholesky failed and partial-pivoting LU was used instead.
    PivotedFallback,
}

/// How the coefficient solve went.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub factorization: Factorization,
    /// Smallest Cholesky pivot, or the failing pivot when the fallback ran.
    pub min_pivot: f64,
    /// `‖M c - q‖_∞` after refinement.
    pub residual_inf: f64,
    pub refinement_steps: u32,
}

/// A solved representer `u(x) = Σ (c_i/n) K(x - p_i)`.
#[derive(Clone, Debug)]
pub struct FittedModel {
    points: Vec<TorusPoint>,
    coeffs: Vec<f64>,
    spec: KernelSpec,
    report: Option<SolveReport>,
}

impl FittedModel {
    /// Rebuilds a model from stored parts (for example after loading from disk).
    pub fn from_parts(points: Vec<TorusPoint>, coeffs: Vec<f64>, spec: KernelSpec) -> Result<Self> {
        if points.is_empty() || points.len() != coeffs.len() {
            return Err(Error::Input(format!("{} sites but {} coefficients", points.len(), coeffs.len())));
        }
        if points.iter().any(|p| p.dim() != spec.dim()) {
            return Err(Error::Input("site dimension does not match the kernel".into()));
        }
        Ok(FittedModel { points, coeffs, spec, report: None })
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn report(&self) -> Option<&SolveReport> {
        self.report.as_ref()
    }

    /// The model as an element of `TP_ω`; only for truncated kernels.
    ///
    /// `û_l = ŵ_l · (1/n) Σ_i c_i e^{-2πi l·p_i}`.
    pub fn to_trig(&self) -> Result<TrigPolynomial> {
        let omega = self
            .spec
            .omega()
            .ok_or_else(|| Error::Unsupported("the full-kernel model is not a trigonometric polynomial".into()))?;
        let inv_n = 1.0 / self.n() as f64;
        let k = self.spec.k();
        let constant = self.spec.weight(0.0) * inv_n * crate::sum::compensated_sum(self.coeffs.iter().copied());
        let mut modes = Vec::new();
        for index in half_box(omega)? {
            let w = self.spec.weight(crate::torus::norm_2k(&index, k)?);
            let mut c_acc = crate::sum::CompensatedSum::new();
            let mut s_acc = crate::sum::CompensatedSum::new();
            for (p, &c) in self.points.iter().zip(&self.coeffs) {
                let phase = index.dot(p);
                let (s, co) = (2.0 * PI * (phase - phase.round())).sin_cos();
                c_acc.add(c * co);
                s_acc.add(c * s);
            }
            modes.push(TrigMode { index, cos: 2.0 * w * inv_n * c_acc.value(), sin: 2.0 * w * inv_n * s_acc.value() });
        }
        Ok(TrigPolynomial::from_parts(omega.clone(), constant, modes))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(LAMBDA_MIN..=LAMBDA_MAX).contains(&lambda) {
        return Err(Error::Domain(format!("λ = {lambda:e} is outside the supported range [{LAMBDA_MIN:e}, {LAMBDA_MAX:e}]")));
    }
    Ok(())
}

/// Fits with default limits.
pub fn fit(data: &ScatteredData, spec: &KernelSpec) -> Result<FittedModel> {
    fit_with(data, spec, &SolverOptions::default())
}

pub fn fit_with(data: &ScatteredData, spec: &KernelSpec, options: &SolverOptions) -> Result<FittedModel> {
    check_lambda(spec.lambda())?;
    if data.len() > options.max_sites {
        return Err(Error::Input(format!(
            "{} sites exceed the configured cap of {}",
            data.len(),
            options.max_sites
        )));
    }
    if data.dim() != spec.dim() {
        return Err(Error::Domain(format!("data has dimension {}, kernel expects {}", data.dim(), spec.dim())));
    }
    let matrix = assemble(data.points(), spec)?;
    fit_assembled(&matrix, data.values())
}

/// Solves `(K/n + I/λ²) c = q` for an already assembled matrix.
pub fn fit_assembled(matrix: &KernelMatrix, values: &[f64]) -> Result<FittedModel> {
    check_lambda(matrix.spec.lambda())?;
    let n = matrix.n;
    if values.len() != n {
        return Err(Error::Input(format!("{n} sites but {} values", values.len())));
    }
    let system = matrix.system_matrix();
    let q_inf = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let (mut coeffs, factorization, min_pivot, solver): (Vec<f64>, _, _, Box<dyn Fn(&[f64]) -> Option<Vec<f64>>>) =
        match Cholesky::factor(system.clone(), n) {
            Ok(chol) => {
                let c = chol.solve(values);
                let pivot = chol.min_pivot();
                (c, Factorization::Cholesky, pivot, Box::new(move |r: &[f64]| Some(chol.solve(r))))
            }
            Err(fail) => {
                log::warn!(
                    "Cholesky failed at row {} (pivot {:e}); retrying with pivoted LU",
                    fail.row,
                    fail.pivot
                );
                let sys = system.clone();
                let c = linalg::lu_solve(&sys, n, values)
                    .ok_or(Error::Factorization { pivot: fail.pivot, row: fail.row })?;
                (c, Factorization::PivotedFallback, fail.pivot, Box::new(move |r: &[f64]| linalg::lu_solve(&sys, n, r)))
            }
        };

    let residual = |c: &[f64]| -> Vec<f64> {
        linalg::matvec(&system, n, c).iter().zip(values).map(|(mc, q)| q - mc).collect()
    };
    let mut r = residual(&coeffs);
    let mut r_inf = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut steps = 0;
    while r_inf > RESIDUAL_TOL * q_inf && steps < 3 {
        let delta = solver(&r).ok_or_else(|| Error::Numerical("refinement solve failed".into()))?;
        for (c, d) in coeffs.iter_mut().zip(&delta) {
            *c += d;
        }
        r = residual(&coeffs);
        r_inf = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        steps += 1;
    }
    if !r_inf.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("coefficient solve produced non-finite values".into()));
    }
    Ok(FittedModel {
        points: matrix.points.clone(),
        coeffs,
        spec: matrix.spec.clone(),
        report: Some(SolveReport { factorization, min_pivot, residual_inf: r_inf, refinement_steps: steps }),
    })
}

/// `u(x)` by the representer sum.
pub fn evaluate(model: &FittedModel, x: &TorusPoint) -> Result<f64> {
    if x.dim() != model.dim() {
        return Err(Error::Domain(format!("query has dimension {}, model has {}", x.dim(), model.dim())));
    }
    let eval = model.spec.evaluator()?;
    Ok(representer_sum(model, &eval, x))
}

/// Evaluates many queries, resolving the kernel once.
pub fn evaluate_many(model: &FittedModel, xs: &[TorusPoint]) -> Result<Vec<f64>> {
    if let Some(i) = xs.iter().position(|x| x.dim() != model.dim()) {
        return Err(Error::Domain(format!("query {i} has dimension {}, model has {}", xs[i].dim(), model.dim())));
    }
    let eval = model.spec.evaluator()?;
    Ok(xs.iter().map(|x| representer_sum(model, &eval, x)).collect())
}

fn representer_sum(model: &FittedModel, eval: &crate::kernel::KernelEvaluator<'_>, x: &TorusPoint) -> f64 {
    let mut acc = crate::sum::CompensatedSum::new();
    let mut d = vec![0.0; x.dim()];
    for (p, &c) in model.points.iter().zip(&model.coeffs) {
        for (di, (&a, &b)) in d.iter_mut().zip(x.coords().iter().zip(p.coords())) {
            *di = crate::torus::wrap_scalar(a - b);
        }
        acc.add(c * eval.eval_coords(&d));
    }
    acc.value() / model.n() as f64
}

/// Values at the tensor grid `{j / res_i}`, row-major with the last axis
/// fastest. Truncated models go through their trigonometric coefficients;
/// full-kernel models use the representer sum.
pub fn evaluate_grid(model: &FittedModel, res: &[usize]) -> Result<Vec<f64>> {
    let total = grid_len(res, model.dim())?;
    if model.spec.omega().is_some() {
        return model.to_trig()?.evaluate_grid(res);
    }
    let eval = model.spec.evaluator()?;
    let mut out = Vec::with_capacity(total);
    let mut x = vec![0.0; res.len()];
    for flat in 0..total {
        grid_node(flat, res, &mut x);
        out.push(representer_sum(model, &eval, &TorusPoint::wrap(&x)?));
    }
    Ok(out)
}

/// How extreme eigenvalues were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    /// Dense symmetric eigensolver on `K/n + I/λ²`.
    Dense,
    /// `K = Φ Φᵀ` for the truncated kernel; the nonzero spectrum of `K/n`
    /// is that of the small Gram matrix `Φᵀ Φ / n`.
    LowRank,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionDiagnostics {
    pub kappa_measured: f64,
    /// `1 + λ² K(0)`, with `K(0)` bounded above for the full kernel.
    pub kappa_bound: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub method: SpectrumMethod,
}

/// Extreme eigenvalues of `M = K/n + I/λ²` and the trace bound
/// `κ(M) ≤ 1 + λ² K(0)`. Truncated kernels with fewer frequencies than sites
/// use the low-rank route; everything else is dense.
pub fn condition_diagnostics(matrix: &KernelMatrix, lambda: f64) -> Result<ConditionDiagnostics> {
    spectrum_diagnostics(matrix, lambda, None)
}

/// As [`condition_diagnostics`] with the dense eigensolver forced.
pub fn condition_diagnostics_dense(matrix: &KernelMatrix, lambda: f64) -> Result<ConditionDiagnostics> {
    spectrum_diagnostics(matrix, lambda, Some(SpectrumMethod::Dense))
}

fn spectrum_diagnostics(
    matrix: &KernelMatrix,
    lambda: f64,
    force: Option<SpectrumMethod>,
) -> Result<ConditionDiagnostics> {
    if (lambda - matrix.spec.lambda()).abs() > 1e-12 * lambda {
        return Err(Error::Domain(format!(
            "matrix was assembled with λ = {}, not {lambda}",
            matrix.spec.lambda()
        )));
    }
    let n = matrix.n;
    let shift = 1.0 / (lambda * lambda);
    let kappa_bound = 1.0 + lambda * lambda * matrix.spec.value_at_origin_upper()?;

    let low_rank_size = matrix.spec.omega().map(|w| w.box_size()).transpose()?;
    let (min_e, max_e, method) = match low_rank_size {
        Some(size) if force != Some(SpectrumMethod::Dense) && (size as usize) < n => {
            let gram = feature_gram(matrix)?;
            let r = (size as usize).min(gram.1);
            let eig = linalg::symmetric_eigenvalues(&gram.0, r)
                .ok_or_else(|| Error::Numerical("eigensolver did not converge".into()))?;
            let max_e = eig.last().copied().unwrap_or(0.0).max(0.0) + shift;
            // rank(K) ≤ size < n, so the shift itself is an eigenvalue of M
            (shift, max_e, SpectrumMethod::LowRank)
        }
        _ => {
            if n > DENSE_EIGEN_LIMIT {
                return Err(Error::Unsupported(format!("{n} sites exceed the dense eigensolver limit")));
            }
            let eig = linalg::symmetric_eigenvalues(&matrix.system_matrix(), n)
                .ok_or_else(|| Error::Numerical("eigensolver did not converge".into()))?;
            (eig[0], eig[n - 1], SpectrumMethod::Dense)
        }
    };
    Ok(ConditionDiagnostics {
        kappa_measured: max_e / min_e,
        kappa_bound,
        min_eigenvalue: min_e,
        max_eigenvalue: max_e,
        method,
    })
}

/// `Φᵀ Φ / n` where `Φ_{i,·}` are the weighted real Fourier features of site
/// `i`, so that `K = Φ Φᵀ`. Returns the row-major Gram matrix and its order.
fn feature_gram(matrix: &KernelMatrix) -> Result<(Vec<f64>, usize)> {
    let spec = &matrix.spec;
    let omega = spec.omega().expect("feature route needs a truncated kernel");
    let half = half_box(omega)?;
    let r = 1 + 2 * half.len();
    let n = matrix.n;
    let mut phi = vec![0.0; n * r];
    let sq2 = std::f64::consts::SQRT_2;
    let weights: Vec<f64> = half
        .iter()
        .map(|l| crate::torus::norm_2k(l, spec.k()).map(|nrm| spec.weight(nrm).sqrt()))
        .collect::<Result<_>>()?;
    for (i, p) in matrix.points.iter().enumerate() {
        let row = &mut phi[i * r..(i + 1) * r];
        row[0] = spec.weight(0.0).sqrt();
        for (j, (l, &w)) in half.iter().zip(&weights).enumerate() {
            let phase = l.dot(p);
            let (s, c) = (2.0 * PI * (phase - phase.round())).sin_cos();
            row[1 + 2 * j] = sq2 * w * c;
            row[2 + 2 * j] = sq2 * w * s;
        }
    }
    let mut gram = vec![0.0; r * r];
    let inv_n = 1.0 / n as f64;
    for a in 0..r {
        for b in 0..=a {
            let s: f64 = (0..n).map(|i| phi[i * r + a] * phi[i * r + b]).sum();
            gram[a * r + b] = s * inv_n;
            gram[b * r + a] = s * inv_n;
        }
    }
    Ok((gram, r))
}

/// Eigenvalues of the full-kernel matrix `G_λ` (not divided by `n`) for one `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRow {
    pub lambda: f64,
    /// Descending, so `eigenvalues[0]` is `ρ₁`.
    pub eigenvalues: Vec<f64>,
}

/// Spectrum of `G_λ = [g_λ(p_i - p_j)]` across an ascending list of `λ > 1`.
pub fn eigen_diagnostics(
    points: &[TorusPoint],
    k: u32,
    lambdas: &[f64],
    truncation: TruncationPolicy,
) -> Result<Vec<EigenRow>> {
    if points.is_empty() {
        return Err(Error::Input("no sites".into()));
    }
    if lambdas.iter().any(|&l| l <= 1.0) || lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("λ list must be strictly ascending with every λ > 1".into()));
    }
    let m = points[0].dim();
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let spec = KernelSpec::full(m, k, lambda)?.with_truncation(truncation)?;
        let g = assemble(points, &spec)?;
        let mut eig = linalg::symmetric_eigenvalues(g.entries(), g.n())
            .ok_or_else(|| Error::Numerical("eigensolver did not converge".into()))?;
        eig.reverse();
        rows.push(EigenRow { lambda, eigenvalues: eig });
    }
    Ok(rows)
}
