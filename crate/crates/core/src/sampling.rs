//! Site generators, mesh norm and star discrepancy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::DUPLICATE_DISTANCE;
use crate::torus::TorusPoint;

/// Largest critical grid the exact discrepancy routine will allocate.
pub const MAX_DISCREPANCY_CELLS: usize = 1 << 25;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Families of site sets. Every kind is deterministic in its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointSetKind {
    UniformRandom { seed: u64 },
    /// Radical inverses in the first `m` prime bases, indices `1, 2, …`.
    Halton,
    /// `frac(i α)` for `i = 1, 2, …`.
    Kronecker { alpha: Vec<f64> },
    /// Tensor grid `{j / r}`; `n` must be an `m`-th power.
    Grid,
    UserSupplied { points: Vec<TorusPoint> },
}

impl PointSetKind {
    /// Kronecker sequence with the generalized golden-ratio increments.
    pub fn kronecker_default(m: usize) -> Self {
        // φ_m solves x^{m+1} = x + 1
        let mut phi = 2.0f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (m as f64 + 1.0));
        }
        let alpha = (1..=m).map(|j| (1.0 / phi.powi(j as i32)).fract()).collect();
        PointSetKind::Kronecker { alpha }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PointSetKind::UniformRandom { .. } => "random",
            PointSetKind::Halton => "halton",
            PointSetKind::Kronecker { .. } => "kronecker",
            PointSetKind::Grid => "grid",
            PointSetKind::UserSupplied { .. } => "user",
        }
    }
}

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut x = 0.0;
    while i > 0 {
        x += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    x
}

/// `n` sites in `[0, 1)^m`. Except for the grid, `generate(kind, n, m)` is a
/// prefix of `generate(kind, n + 1, m)`.
pub fn generate(kind: &PointSetKind, n: usize, m: usize) -> Result<Vec<TorusPoint>> {
    if n == 0 {
        return Err(Error::Input("at least one site is required".into()));
    }
    if m == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let mut raw: Vec<Vec<f64>> = match kind {
        PointSetKind::UniformRandom { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..n).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect()
        }
        PointSetKind::Halton => {
            if m > PRIMES.len() {
                return Err(Error::Unsupported(format!("Halton sites are limited to {} dimensions", PRIMES.len())));
            }
            (1..=n as u64).map(|i| PRIMES[..m].iter().map(|&b| radical_inverse(i, b)).collect()).collect()
        }
        PointSetKind::Kronecker { alpha } => {
            if alpha.len() != m {
                return Err(Error::Domain(format!("{} increments for dimension {m}", alpha.len())));
            }
            (1..=n as u64).map(|i| alpha.iter().map(|a| (i as f64 * a).rem_euclid(1.0)).collect()).collect()
        }
        PointSetKind::Grid => {
            let r = (n as f64).powf(1.0 / m as f64).round() as usize;
            if r.checked_pow(m as u32) != Some(n) {
                return Err(Error::Input(format!("a {m}-dimensional grid needs a perfect power, got n = {n}")));
            }
            (0..n)
                .map(|mut flat| {
                    let mut x = vec![0.0; m];
                    for axis in (0..m).rev() {
                        x[axis] = (flat % r) as f64 / r as f64;
                        flat /= r;
                    }
                    x
                })
                .collect()
        }
        PointSetKind::UserSupplied { points } => {
            if points.len() < n {
                return Err(Error::Input(format!("{n} sites requested but only {} supplied", points.len())));
            }
            if points.iter().any(|p| p.dim() != m) {
                return Err(Error::Domain(format!("supplied sites are not all {m}-dimensional")));
            }
            points[..n].iter().map(|p| p.coords().to_vec()).collect()
        }
    };
    separate_collisions(&mut raw);
    raw.iter().map(|c| TorusPoint::wrap(c)).collect()
}

/// Moves any site that coincides with an earlier one by a small deterministic
/// offset. Only pathological parameters trigger this.
fn separate_collisions(raw: &mut [Vec<f64>]) {
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[a].partial_cmp(&raw[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for w in 1..order.len() {
        let (a, b) = (order[w - 1], order[w]);
        let close = raw[a].iter().zip(&raw[b]).all(|(x, y)| {
            let d = (x - y).abs();
            d.min(1.0 - d) < DUPLICATE_DISTANCE
        });
        if close {
            let later = a.max(b);
            log::warn!("site {later} collides with site {}; perturbing it", a.min(b));
            for c in raw[later].iter_mut() {
                *c = (*c + rng.gen_range(1e-9..1e-8)).rem_euclid(1.0);
            }
        }
    }
}

/// `max` over the probe grid `{j / res}` of the periodic distance to the
/// nearest site.
pub fn mesh_norm(points: &[TorusPoint], res: usize) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Input("no sites".into()));
    }
    if res < 64 {
        return Err(Error::Domain(format!("probe resolution must be at least 64, got {res}")));
    }
    let m = points[0].dim();
    if m == 1 {
        let mut xs: Vec<f64> = points.iter().map(|p| p.coords()[0]).collect();
        xs.sort_by(f64::total_cmp);
        let mut worst = 0.0f64;
        for j in 0..res {
            let x = j as f64 / res as f64;
            let pos = xs.partition_point(|&v| v < x);
            let right = if pos < xs.len() { xs[pos] - x } else { xs[0] + 1.0 - x };
            let left = if pos > 0 { x - xs[pos - 1] } else { x + 1.0 - xs[xs.len() - 1] };
            worst = worst.max(left.min(right));
        }
        return Ok(worst);
    }
    let total = res.checked_pow(m as u32).filter(|&t| t <= MAX_DISCREPANCY_CELLS).ok_or_else(|| {
        Error::Range(format!("probe grid {res}^{m} is too large"))
    })?;
    let mut worst = 0.0f64;
    let mut x = vec![0.0; m];
    for mut flat in 0..total {
        for axis in (0..m).rev() {
            x[axis] = (flat % res) as f64 / res as f64;
            flat /= res;
        }
        let probe = TorusPoint::wrap(&x)?;
        let nearest = points.iter().map(|p| p.distance(&probe)).fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
    }
    Ok(worst)
}

/// Star discrepancy bracket; `lower == upper` when computed exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub lower: f64,
    pub upper: f64,
}

impl Discrepancy {
    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

/// `D*_n = sup_t |#{p ∈ [0, t)} / n - vol [0, t)|`.
///
/// One dimension uses the sorted-point formula. In two and three dimensions
/// the supremum is attained on the grid spanned by the site coordinates and
/// 1, and is evaluated there exactly from cumulative counts.
pub fn star_discrepancy(points: &[TorusPoint]) -> Result<Discrepancy> {
    if points.is_empty() {
        return Err(Error::Input("no sites".into()));
    }
    let m = points[0].dim();
    let n = points.len();
    if m == 1 {
        let mut xs: Vec<f64> = points.iter().map(|p| p.coords()[0]).collect();
        xs.sort_by(f64::total_cmp);
        let nf = n as f64;
        let dev = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - (2 * i + 1) as f64 / (2.0 * nf)).abs())
            .fold(0.0, f64::max);
        let d = 0.5 / nf + dev;
        return Ok(Discrepancy { lower: d, upper: d });
    }
    if m > 3 {
        return Err(Error::Unsupported(format!("star discrepancy in dimension {m} is not computed")));
    }
    // per axis: sorted distinct coordinates followed by 1
    let mut grids: Vec<Vec<f64>> = Vec::with_capacity(m);
    for axis in 0..m {
        let mut g: Vec<f64> = points.iter().map(|p| p.coords()[axis]).collect();
        g.sort_by(f64::total_cmp);
        g.dedup();
        if g.last() != Some(&1.0) {
            g.push(1.0);
        }
        grids.push(g);
    }
    let sizes: Vec<usize> = grids.iter().map(Vec::len).collect();
    let cells = sizes
        .iter()
        .try_fold(1usize, |a, &s| a.checked_mul(s))
        .filter(|&c| c <= MAX_DISCREPANCY_CELLS)
        .ok_or_else(|| Error::Unsupported(format!("critical grid {sizes:?} is too large for exact discrepancy")))?;
    let mut strides = vec![1usize; m];
    for axis in (0..m - 1).rev() {
        strides[axis] = strides[axis + 1] * sizes[axis + 1];
    }
    // counts[r] = #{p : p_j ≤ grid_j[r_j] for all j}
    let mut counts = vec![0u32; cells];
    for p in points {
        let flat: usize = (0..m)
            .map(|a| grids[a].partition_point(|&v| v < p.coords()[a]) * strides[a])
            .sum();
        counts[flat] += 1;
    }
    for axis in 0..m {
        for flat in 0..cells {
            if !(flat / strides[axis]).is_multiple_of(sizes[axis]) {
                counts[flat] += counts[flat - strides[axis]];
            }
        }
    }
    let nf = n as f64;
    let mut worst = 0.0f64;
    let mut idx = vec![0usize; m];
    for flat in 0..cells {
        let mut rem = flat;
        for axis in 0..m {
            idx[axis] = rem / strides[axis];
            rem %= strides[axis];
        }
        let vol: f64 = (0..m).map(|a| grids[a][idx[a]]).product();
        let closed = counts[flat] as f64 / nf;
        // open box [0, t): drop the top slice on every axis
        let open = if idx.iter().all(|&i| i > 0) {
            counts[flat - strides.iter().sum::<usize>()] as f64 / nf
        } else {
            0.0
        };
        worst = worst.max(vol - open).max(closed - vol);
    }
    Ok(Discrepancy { lower: worst, upper: worst })
}

/// `(ln n)^m / n`, the order of the star discrepancy of low-discrepancy
/// sequences with unit constant.
pub fn discrepancy_proxy(n: f64, m: usize) -> Result<f64> {
    if !(n >= 2.0) || !n.is_finite() {
        return Err(Error::Domain(format!("proxy needs n ≥ 2, got {n}")));
    }
    Ok(n.ln().powi(m as i32) / n)
}
