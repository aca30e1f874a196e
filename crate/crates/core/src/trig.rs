//! Real trigonometric polynomials in `TP_ω`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;
use crate::torus::{enumerate_box, norm_2k, FrequencyBound, MultiIndex, TorusPoint};

/// Cosine/sine amplitudes of one frequency `l` from the upper half of the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigMode {
    pub index: MultiIndex,
    pub cos: f64,
    pub sin: f64,
}

/// `u(x) = a_0 + Σ_{l ∈ H} (a_l cos 2πl·x + b_l sin 2πl·x)` where `H` holds
/// one index of every `{l, -l}` pair in the box `-ω ≤ l ≤ ω`.
///
/// The complex Fourier coefficients are `û_0 = a_0`,
/// `û_l = (a_l - i b_l)/2` and `û_{-l} = conj(û_l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigPolynomial {
    omega: FrequencyBound,
    constant: f64,
    modes: Vec<TrigMode>,
}

/// Upper-half indices of the box in lexicographic order.
pub(crate) fn half_box(omega: &FrequencyBound) -> Result<Vec<MultiIndex>> {
    Ok(enumerate_box(omega)?.into_iter().filter(|l| l.in_upper_half()).collect())
}

impl TrigPolynomial {
    pub fn zeros(omega: &FrequencyBound) -> Result<Self> {
        let modes = half_box(omega)?
            .into_iter()
            .map(|index| TrigMode { index, cos: 0.0, sin: 0.0 })
            .collect();
        Ok(TrigPolynomial { omega: omega.clone(), constant: 0.0, modes })
    }

    /// Builds the polynomial from complex coefficients `l ↦ (Re û_l, Im û_l)`.
    /// Only `l = 0` and the upper half are queried; the lower half is implied
    /// by conjugate symmetry.
    pub fn from_complex(omega: &FrequencyBound, coeff: impl Fn(&MultiIndex) -> (f64, f64)) -> Result<Self> {
        let mut p = Self::zeros(omega)?;
        p.constant = coeff(&MultiIndex(vec![0; omega.dim()])).0;
        for mode in &mut p.modes {
            let (re, im) = coeff(&mode.index);
            mode.cos = 2.0 * re;
            mode.sin = -2.0 * im;
        }
        Ok(p)
    }

    pub(crate) fn from_parts(omega: FrequencyBound, constant: f64, modes: Vec<TrigMode>) -> Self {
        TrigPolynomial { omega, constant, modes }
    }

    pub fn omega(&self) -> &FrequencyBound {
        &self.omega
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn modes(&self) -> &[TrigMode] {
        &self.modes
    }

    pub(crate) fn constant_mut(&mut self) -> &mut f64 {
        &mut self.constant
    }

    pub(crate) fn modes_mut(&mut self) -> &mut [TrigMode] {
        &mut self.modes
    }

    /// Number of complex coefficients, `∏(2ω_i + 1)`.
    pub fn len(&self) -> usize {
        1 + 2 * self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Complex coefficient `û_l`; zero outside the box.
    pub fn coefficient(&self, l: &MultiIndex) -> (f64, f64) {
        if l.is_zero() {
            return (self.constant, 0.0);
        }
        if !self.omega.contains(l) {
            return (0.0, 0.0);
        }
        let (key, conj) = if l.in_upper_half() { (l.clone(), false) } else { (l.neg(), true) };
        match self.modes.binary_search_by(|m| m.index.cmp(&key)) {
            Ok(pos) => {
                let m = &self.modes[pos];
                let im = -m.sin / 2.0;
                (m.cos / 2.0, if conj { -im } else { im })
            }
            Err(_) => (0.0, 0.0),
        }
    }

    pub fn evaluate(&self, x: &TorusPoint) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::Domain(format!(
                "point has dimension {}, polynomial has {}",
                x.dim(),
                self.dim()
            )));
        }
        Ok(self.eval_coords(x.coords()))
    }

    pub(crate) fn eval_coords(&self, x: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        acc.add(self.constant);
        for m in &self.modes {
            let phase: f64 = m.index.0.iter().zip(x).map(|(&l, &c)| l as f64 * c).sum();
            let phase = phase - phase.round();
            let (s, c) = (2.0 * PI * phase).sin_cos();
            acc.add(m.cos * c + m.sin * s);
        }
        acc.value()
    }

    /// `‖u‖²_{L²(T^m)}` by Parseval.
    pub fn l2_norm_sq(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        acc.add(self.constant * self.constant);
        for m in &self.modes {
            acc.add(0.5 * (m.cos * m.cos + m.sin * m.sin));
        }
        acc.value()
    }

    /// `Σ_l ‖l‖_{2k}^{2k} |û_l|²`, the `k`-gradient energy without the
    /// `(2π)^{2k}` factor (matching the kernel weights).
    pub fn gradient_energy(&self, k: u32) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for m in &self.modes {
            acc.add(norm_2k(&m.index, k)? * 0.5 * (m.cos * m.cos + m.sin * m.sin));
        }
        Ok(acc.value())
    }

    /// `self + scale * other`; both must share `ω`.
    pub fn add_scaled(&self, other: &TrigPolynomial, scale: f64) -> Result<TrigPolynomial> {
        if self.omega != other.omega {
            return Err(Error::Domain("polynomials have different frequency bounds".into()));
        }
        let modes = self
            .modes
            .iter()
            .zip(&other.modes)
            .map(|(a, b)| TrigMode { index: a.index.clone(), cos: a.cos + scale * b.cos, sin: a.sin + scale * b.sin })
            .collect();
        Ok(TrigPolynomial { omega: self.omega.clone(), constant: self.constant + scale * other.constant, modes })
    }

    /// Restriction (or zero extension) to the box `-ω ≤ l ≤ ω`.
    pub fn project(&self, omega: &FrequencyBound) -> Result<TrigPolynomial> {
        if omega.dim() != self.dim() {
            return Err(Error::Domain(format!("bound has {} axes, polynomial has {}", omega.dim(), self.dim())));
        }
        TrigPolynomial::from_complex(omega, |l| self.coefficient(l))
    }

    /// Values on the tensor grid `{j / res_i}`, row-major with the last axis
    /// fastest.
    pub fn evaluate_grid(&self, res: &[usize]) -> Result<Vec<f64>> {
        let total = grid_len(res, self.dim())?;
        let mut out = Vec::with_capacity(total);
        let mut x = vec![0.0; res.len()];
        for flat in 0..total {
            grid_node(flat, res, &mut x);
            out.push(self.eval_coords(&x));
        }
        Ok(out)
    }
}

/// Number of nodes of a tensor grid, checking the resolution.
pub(crate) fn grid_len(res: &[usize], m: usize) -> Result<usize> {
    if res.len() != m {
        return Err(Error::Domain(format!("grid has {} axes, expected {m}", res.len())));
    }
    if res.iter().any(|&r| r < 2) {
        return Err(Error::Domain("grid resolution must be at least 2 per axis".into()));
    }
    res.iter()
        .try_fold(1usize, |acc, &r| acc.checked_mul(r))
        .ok_or_else(|| Error::Range(format!("grid {res:?} overflows")))
}

/// Coordinates of the `flat`-th node of a row-major grid.
pub(crate) fn grid_node(mut flat: usize, res: &[usize], x: &mut [f64]) {
    for axis in (0..res.len()).rev() {
        x[axis] = (flat % res[axis]) as f64 / res[axis] as f64;
        flat /= res[axis];
    }
}
