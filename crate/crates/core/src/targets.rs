//! Bounded-variation test functions with closed-form Fourier data.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::solver::ScatteredData;
use crate::sum::CompensatedSum;
use crate::torus::{enumerate_box, FrequencyBound, MultiIndex, TorusPoint};

/// Sites closer than this to a jump are moved off it before sampling.
pub const JUMP_TOLERANCE: f64 = 1e-9;
/// Size of the move applied to such sites.
pub const JUMP_NUDGE: f64 = 1e-6;

const BOX_LO: [f64; 2] = [0.2, 0.3];
const BOX_HI: [f64; 2] = [0.7, 0.6];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shape {
    SquareWave,
    Sawtooth,
    BoxIndicator,
    SmoothTrig,
    SmoothTrig2d,
    Hat,
}

/// A test function `ψ` on the torus. Values at jumps are the midpoint of the
/// one-sided limits.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetFunction {
    name: &'static str,
    shape: Shape,
}

const ALL: [(&str, Shape); 6] = [
    ("square-wave", Shape::SquareWave),
    ("sawtooth", Shape::Sawtooth),
    ("box-2d", Shape::BoxIndicator),
    ("smooth", Shape::SmoothTrig),
    ("smooth-2d", Shape::SmoothTrig2d),
    ("hat", Shape::Hat),
];

/// Every built-in target.
pub fn registry() -> Vec<TargetFunction> {
    ALL.iter().map(|&(name, shape)| TargetFunction { name, shape }).collect()
}

/// Looks a target up by name.
pub fn by_name(name: &str) -> Result<TargetFunction> {
    ALL.iter()
        .find(|(n, _)| *n == name)
        .map(|&(name, shape)| TargetFunction { name, shape })
        .ok_or_else(|| {
            let known: Vec<&str> = ALL.iter().map(|(n, _)| *n).collect();
            Error::Input(format!("unknown target '{name}' (known: {})", known.join(", ")))
        })
}

/// Interval indicator of `[a, b]` with value 1/2 at the endpoints.
fn interval(x: f64, a: f64, b: f64) -> f64 {
    if x > a && x < b {
        1.0
    } else if x == a || x == b {
        0.5
    } else {
        0.0
    }
}

/// `∫_a^b e^{-2πilx} dx`.
fn interval_coefficient(l: i64, a: f64, b: f64) -> (f64, f64) {
    if l == 0 {
        return (b - a, 0.0);
    }
    let t = 2.0 * PI * l as f64;
    // (e^{-ita} - e^{-itb}) / (it)
    let (sa, ca) = (t * a).sin_cos();
    let (sb, cb) = (t * b).sin_cos();
    let (re, im) = (ca - cb, -(sa - sb));
    (im / t, -re / t)
}

fn complex_mul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

impl TargetFunction {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::BoxIndicator | Shape::SmoothTrig2d => 2,
            _ => 1,
        }
    }

    pub fn value(&self, x: &TorusPoint) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::Domain(format!("target {} is {}-dimensional, got a point in dimension {}", self.name, self.dim(), x.dim())));
        }
        Ok(self.value_coords(x.coords()))
    }

    /// `ψ(x)` for coordinates already in `[0, 1)`.
    pub(crate) fn value_coords(&self, x: &[f64]) -> f64 {
        match self.shape {
            Shape::SquareWave => {
                if x[0] == 0.0 || x[0] == 0.5 {
                    0.0
                } else if x[0] < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            Shape::Sawtooth => {
                if x[0] == 0.0 {
                    0.0
                } else {
                    x[0] - 0.5
                }
            }
            Shape::BoxIndicator => interval(x[0], BOX_LO[0], BOX_HI[0]) * interval(x[1], BOX_LO[1], BOX_HI[1]),
            Shape::SmoothTrig => (2.0 * PI * x[0]).cos() + 0.5 * (4.0 * PI * x[0]).cos(),
            Shape::SmoothTrig2d => (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos(),
            Shape::Hat => 0.5 - (x[0] - 0.5).abs(),
        }
    }

    /// Complex Fourier coefficient `ψ̂_l = ∫ ψ(x) e^{-2πi l·x} dx`.
    pub fn coefficient(&self, l: &MultiIndex) -> (f64, f64) {
        let v = &l.0;
        match self.shape {
            Shape::SquareWave => {
                if v[0] % 2 == 0 {
                    (0.0, 0.0)
                } else {
                    (0.0, -2.0 / (PI * v[0] as f64))
                }
            }
            Shape::Sawtooth => {
                if v[0] == 0 {
                    (0.0, 0.0)
                } else {
                    (0.0, 1.0 / (2.0 * PI * v[0] as f64))
                }
            }
            Shape::BoxIndicator => complex_mul(
                interval_coefficient(v[0], BOX_LO[0], BOX_HI[0]),
                interval_coefficient(v[1], BOX_LO[1], BOX_HI[1]),
            ),
            Shape::SmoothTrig => match v[0].abs() {
                1 => (0.5, 0.0),
                2 => (0.25, 0.0),
                _ => (0.0, 0.0),
            },
            Shape::SmoothTrig2d => {
                if v[0].abs() == 1 && v[1].abs() == 1 {
                    (0.25, 0.0)
                } else {
                    (0.0, 0.0)
                }
            }
            Shape::Hat => {
                if v[0] == 0 {
                    (0.25, 0.0)
                } else if v[0] % 2 == 0 {
                    (0.0, 0.0)
                } else {
                    let l = v[0] as f64;
                    (-1.0 / (PI * PI * l * l), 0.0)
                }
            }
        }
    }

    /// Mean value `ψ̂_0`.
    pub fn mean(&self) -> f64 {
        self.coefficient(&MultiIndex(vec![0; self.dim()])).0
    }

    /// Total variation: the one-dimensional variation (increments plus jumps)
    /// for curves, the Vitali variation for the two-dimensional targets.
    pub fn total_variation(&self) -> f64 {
        match self.shape {
            Shape::SquareWave => 4.0,
            Shape::Sawtooth => 2.0,
            Shape::BoxIndicator => 4.0,
            Shape::SmoothTrig => 5.0,
            Shape::SmoothTrig2d => 16.0,
            Shape::Hat => 1.0,
        }
    }

    /// `‖ψ‖²_{L²}`.
    pub fn l2_norm_sq(&self) -> f64 {
        match self.shape {
            Shape::SquareWave => 1.0,
            Shape::Sawtooth => 1.0 / 12.0,
            Shape::BoxIndicator => (BOX_HI[0] - BOX_LO[0]) * (BOX_HI[1] - BOX_LO[1]),
            Shape::SmoothTrig => 0.625,
            Shape::SmoothTrig2d => 0.25,
            Shape::Hat => 1.0 / 12.0,
        }
    }

    /// `sup |ψ|`.
    pub fn sup_norm(&self) -> f64 {
        match self.shape {
            Shape::SquareWave | Shape::BoxIndicator | Shape::SmoothTrig2d => 1.0,
            Shape::Sawtooth | Shape::Hat => 0.5,
            Shape::SmoothTrig => 1.5,
        }
    }

    /// Smallest box containing the whole spectrum, for trigonometric
    /// polynomial targets.
    pub fn degree(&self) -> Option<FrequencyBound> {
        match self.shape {
            Shape::SmoothTrig => Some(FrequencyBound::new(vec![2])),
            Shape::SmoothTrig2d => Some(FrequencyBound::new(vec![1, 1])),
            _ => None,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.shape, Shape::SmoothTrig | Shape::SmoothTrig2d | Shape::Hat)
    }

    /// Axis along which `x` lies within [`JUMP_TOLERANCE`] of a jump.
    pub fn near_jump(&self, x: &[f64]) -> Option<usize> {
        let near = |v: f64, at: f64| {
            let d = (v - at).abs();
            d.min(1.0 - d) < JUMP_TOLERANCE
        };
        match self.shape {
            Shape::SquareWave => (near(x[0], 0.0) || near(x[0], 0.5)).then_some(0),
            Shape::Sawtooth => near(x[0], 0.0).then_some(0),
            Shape::BoxIndicator => {
                let inside = |v: f64, axis: usize| {
                    v > BOX_LO[axis] - JUMP_TOLERANCE && v < BOX_HI[axis] + JUMP_TOLERANCE
                };
                if (near(x[0], BOX_LO[0]) || near(x[0], BOX_HI[0])) && inside(x[1], 1) {
                    Some(0)
                } else if (near(x[1], BOX_LO[1]) || near(x[1], BOX_HI[1])) && inside(x[0], 0) {
                    Some(1)
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// Evaluates `ψ` at every site, first moving any site that sits on a jump by
/// [`JUMP_NUDGE`] along the offending axis.
pub fn sample(target: &TargetFunction, points: &[TorusPoint]) -> Result<ScatteredData> {
    let mut sites = Vec::with_capacity(points.len());
    let mut values = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if p.dim() != target.dim() {
            return Err(Error::Domain(format!("site {i} has dimension {}, target {} expects {}", p.dim(), target.name, target.dim())));
        }
        let mut c = p.coords().to_vec();
        let mut moved = false;
        // a nudge can land near another edge of the box, so repeat
        while let Some(axis) = target.near_jump(&c) {
            c[axis] += JUMP_NUDGE;
            c = TorusPoint::wrap(&c)?.coords().to_vec();
            moved = true;
        }
        if moved {
            log::info!("site {i} at {:?} lies on a jump of {}; moved to {:?}", p.coords(), target.name, c);
        }
        let q = TorusPoint::wrap(&c)?;
        values.push(target.value_coords(q.coords()));
        sites.push(q);
    }
    ScatteredData::new(sites, values)
}

/// `‖ψ - P_ω ψ‖²`, the spectral energy outside the box, by Parseval.
pub fn projection_error(target: &TargetFunction, omega: &FrequencyBound) -> Result<f64> {
    if omega.dim() != target.dim() {
        return Err(Error::Domain(format!("bound has {} axes, target {} has {}", omega.dim(), target.name, target.dim())));
    }
    if let Some(deg) = target.degree() {
        if deg.as_slice().iter().zip(omega.as_slice()).all(|(d, w)| w >= d) {
            return Ok(0.0);
        }
    }
    let mut inside = CompensatedSum::new();
    for l in enumerate_box(omega)? {
        let (re, im) = target.coefficient(&l);
        inside.add(re * re + im * im);
    }
    Ok((target.l2_norm_sq() - inside.value()).max(0.0))
}
