//! Rectangular `(u, v)` charts and node-valued fields with central finite
//! differences.
//!
//! A field is stored on every node but is only meaningful on the interior
//! sub-grid `margin <= i < nu - margin`, `margin <= j < nv - margin`.  Each
//! difference operator widens the margin by its stencil half-width.

use nalgebra::{Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::linalg::{re, M6, V4, V6, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reality {
    Real,
    ComplexConjugate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridChart {
    pub nu: usize,
    pub nv: usize,
    pub hu: f64,
    pub hv: f64,
    /// Parameter value of node `i = 0` (resp. `j = 0`).
    #[serde(default)]
    pub u0: f64,
    #[serde(default)]
    pub v0: f64,
    pub reality: Reality,
    #[serde(default = "one_i8")]
    pub orientation: i8,
}

fn one_i8() -> i8 {
    1
}

impl GridChart {
    pub fn new(nu: usize, nv: usize, hu: f64, hv: f64) -> Result<Self> {
        let c = Self { nu, nv, hu, hv, u0: 0.0, v0: 0.0, reality: Reality::Real, orientation: 1 };
        c.validate()?;
        Ok(c)
    }

    /// Chart covering `[u_min, u_max] x [v_min, v_max]` with node counts.
    pub fn window(nu: usize, nv: usize, u: (f64, f64), v: (f64, f64)) -> Result<Self> {
        if nu < 2 || nv < 2 {
            return Err(GeomError::InvalidInput("grid needs at least two nodes per side".into()));
        }
        let mut c = Self::new(nu, nv, (u.1 - u.0) / (nu - 1) as f64, (v.1 - v.0) / (nv - 1) as f64)?;
        c.u0 = u.0;
        c.v0 = v.0;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu < 5 || self.nv < 5 {
            return Err(GeomError::InvalidInput(format!(
                "grid {}x{} too small: central stencils need at least 5 nodes per side",
                self.nu, self.nv
            )));
        }
        if !(self.hu > 0.0 && self.hv > 0.0) || !self.hu.is_finite() || !self.hv.is_finite() {
            return Err(GeomError::InvalidInput("grid spacings must be positive".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn u(&self, i: usize) -> f64 {
        self.u0 + self.hu * i as f64
    }

    #[inline]
    pub fn v(&self, j: usize) -> f64 {
        self.v0 + self.hv * j as f64
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nv + j
    }

    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Center node, used as the seed for frame propagation and
    /// reparametrization.
    pub fn center(&self) -> (usize, usize) {
        (self.nu / 2, self.nv / 2)
    }

    /// Interior nodes at the given margin, row-major.
    pub fn interior(&self, margin: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (nu, nv) = (self.nu, self.nv);
        (margin..nu.saturating_sub(margin))
            .flat_map(move |i| (margin..nv.saturating_sub(margin)).map(move |j| (i, j)))
    }
}

/// Values that finite differences can combine linearly.
pub trait Linear: Clone {
    fn zero_like(&self) -> Self;
    fn scale(&self, a: f64) -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
}

macro_rules! impl_linear_real {
    ($($t:ty),*) => {$(
        impl Linear for $t {
            fn zero_like(&self) -> Self { *self * 0.0 }
            fn scale(&self, a: f64) -> Self { *self * a }
            fn plus(&self, o: &Self) -> Self { *self + *o }
            fn minus(&self, o: &Self) -> Self { *self - *o }
        }
    )*};
}
impl_linear_real!(f64, Vector2<f64>, Vector3<f64>, Vector4<f64>);

macro_rules! impl_linear_complex {
    ($($t:ty),*) => {$(
        impl Linear for $t {
            fn zero_like(&self) -> Self { *self * re(0.0) }
            fn scale(&self, a: f64) -> Self { *self * re(a) }
            fn plus(&self, o: &Self) -> Self { *self + *o }
            fn minus(&self, o: &Self) -> Self { *self - *o }
        }
    )*};
}
impl_linear_complex!(C, V6, M6, V4);

/// Linear values that also admit complex scalars; needed for the
/// derivatives of a complex-conjugate chart.
pub trait ComplexLinear: Linear {
    fn scale_c(&self, a: C) -> Self;
}

macro_rules! impl_complex_linear {
    ($($t:ty),*) => {$(
        impl ComplexLinear for $t {
            fn scale_c(&self, a: C) -> Self { *self * a }
        }
    )*};
}
impl_complex_linear!(C, V6, M6, V4);

/// A value per grid node, valid on the interior at `margin`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    pub nu: usize,
    pub nv: usize,
    pub margin: usize,
    pub data: Vec<T>,
}

impl<T: Clone> Field<T> {
    pub fn from_fn(nu: usize, nv: usize, margin: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(nu * nv);
        for i in 0..nu {
            for j in 0..nv {
                data.push(f(i, j));
            }
        }
        Self { nu, nv, margin, data }
    }

    pub fn constant(nu: usize, nv: usize, value: T) -> Self {
        Self { nu, nv, margin: 0, data: vec![value; nu * nv] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.nv + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        let nv = self.nv;
        self.data[i * nv + j] = value;
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        i >= self.margin && j >= self.margin && i + self.margin < self.nu && j + self.margin < self.nv
    }

    pub fn valid_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.margin;
        (m..self.nu.saturating_sub(m)).flat_map(move |i| (m..self.nv.saturating_sub(m)).map(move |j| (i, j)))
    }

    /// Applies `f` on valid nodes; invalid nodes get `fill`.
    pub fn map<U: Clone>(&self, fill: U, mut f: impl FnMut(usize, usize, &T) -> U) -> Field<U> {
        Field::from_fn(self.nu, self.nv, self.margin, |i, j| {
            if self.is_valid(i, j) {
                f(i, j, self.at(i, j))
            } else {
                fill.clone()
            }
        })
    }

    pub fn with_margin(mut self, margin: usize) -> Self {
        self.margin = self.margin.max(margin);
        self
    }
}

impl<T: Linear> Field<T> {
    fn stencil(&self, grow: usize, mut f: impl FnMut(usize, usize) -> T) -> Field<T> {
        let zero = self.data[0].zero_like();
        let margin = self.margin + grow;
        Field::from_fn(self.nu, self.nv, margin, |i, j| {
            if i >= margin && j >= margin && i + margin < self.nu && j + margin < self.nv {
                f(i, j)
            } else {
                zero.clone()
            }
        })
    }

    /// Second-order central `∂/∂u`.
    pub fn d_u(&self, hu: f64) -> Field<T> {
        self.stencil(1, |i, j| self.at(i + 1, j).minus(self.at(i - 1, j)).scale(0.5 / hu))
    }

    pub fn d_v(&self, hv: f64) -> Field<T> {
        self.stencil(1, |i, j| self.at(i, j + 1).minus(self.at(i, j - 1)).scale(0.5 / hv))
    }

    pub fn d_uu(&self, hu: f64) -> Field<T> {
        self.stencil(1, |i, j| {
            self.at(i + 1, j)
                .plus(self.at(i - 1, j))
                .minus(&self.at(i, j).scale(2.0))
                .scale(1.0 / (hu * hu))
        })
    }

    pub fn d_vv(&self, hv: f64) -> Field<T> {
        self.stencil(1, |i, j| {
            self.at(i, j + 1)
                .plus(self.at(i, j - 1))
                .minus(&self.at(i, j).scale(2.0))
                .scale(1.0 / (hv * hv))
        })
    }

    pub fn d_uv(&self, hu: f64, hv: f64) -> Field<T> {
        self.stencil(1, |i, j| {
            self.at(i + 1, j + 1)
                .plus(self.at(i - 1, j - 1))
                .minus(self.at(i + 1, j - 1))
                .minus(self.at(i - 1, j + 1))
                .scale(0.25 / (hu * hv))
        })
    }

    /// Fourth-order central `∂/∂u`, used by diagnostics that must resolve
    /// quantities below the second-order truncation floor.
    pub fn d_u4(&self, hu: f64) -> Field<T> {
        self.stencil(2, |i, j| {
            let a = self.at(i + 1, j).minus(self.at(i - 1, j)).scale(8.0);
            let b = self.at(i + 2, j).minus(self.at(i - 2, j));
            a.minus(&b).scale(1.0 / (12.0 * hu))
        })
    }

    pub fn d_v4(&self, hv: f64) -> Field<T> {
        self.stencil(2, |i, j| {
            let a = self.at(i, j + 1).minus(self.at(i, j - 1)).scale(8.0);
            let b = self.at(i, j + 2).minus(self.at(i, j - 2));
            a.minus(&b).scale(1.0 / (12.0 * hv))
        })
    }

    pub fn d_uu4(&self, hu: f64) -> Field<T> {
        self.stencil(2, |i, j| {
            let a = self.at(i + 1, j).plus(self.at(i - 1, j)).scale(16.0);
            let b = self.at(i + 2, j).plus(self.at(i - 2, j)).plus(&self.at(i, j).scale(30.0));
            a.minus(&b).scale(1.0 / (12.0 * hu * hu))
        })
    }

    pub fn d_vv4(&self, hv: f64) -> Field<T> {
        self.stencil(2, |i, j| {
            let a = self.at(i, j + 1).plus(self.at(i, j - 1)).scale(16.0);
            let b = self.at(i, j + 2).plus(self.at(i, j - 2)).plus(&self.at(i, j).scale(30.0));
            a.minus(&b).scale(1.0 / (12.0 * hv * hv))
        })
    }

    /// Tensor product of the fourth-order first-derivative stencils.
    pub fn d_uv4(&self, hu: f64, hv: f64) -> Field<T> {
        const W: [(i64, f64); 4] = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)];
        self.stencil(2, |i, j| {
            let mut acc = self.at(i, j).zero_like();
            for (a, wa) in W {
                for (b, wb) in W {
                    let x = self.at((i as i64 + a) as usize, (j as i64 + b) as usize);
                    acc = acc.plus(&x.scale(wa * wb));
                }
            }
            acc.scale(1.0 / (144.0 * hu * hv))
        })
    }

    pub fn plus(&self, other: &Field<T>) -> Field<T> {
        let margin = self.margin.max(other.margin);
        Field {
            nu: self.nu,
            nv: self.nv,
            margin,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.plus(b)).collect(),
        }
    }

    pub fn minus(&self, other: &Field<T>) -> Field<T> {
        let margin = self.margin.max(other.margin);
        Field {
            nu: self.nu,
            nv: self.nv,
            margin,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.minus(b)).collect(),
        }
    }
}

impl GridChart {
    /// Derivative along the first null coordinate.  On a real chart this is
    /// `∂/∂u`; on a complex-conjugate chart the nodes sample real `(x, y)`
    /// and the null coordinate is `w = x + iy`, so `∂_w = (∂_x - i∂_y)/2`.
    pub fn d_u<T: ComplexLinear>(&self, f: &Field<T>) -> Field<T> {
        match self.reality {
            Reality::Real => f.d_u(self.hu),
            Reality::ComplexConjugate => wirtinger(&f.d_u(self.hu), &f.d_v(self.hv), -1.0),
        }
    }

    /// Derivative along the second null coordinate (`∂_w̄` when complex).
    pub fn d_v<T: ComplexLinear>(&self, f: &Field<T>) -> Field<T> {
        match self.reality {
            Reality::Real => f.d_v(self.hv),
            Reality::ComplexConjugate => wirtinger(&f.d_u(self.hu), &f.d_v(self.hv), 1.0),
        }
    }

    /// Fourth-order variants of [`GridChart::d_u`] and [`GridChart::d_v`].
    pub fn d_u4<T: ComplexLinear>(&self, f: &Field<T>) -> Field<T> {
        match self.reality {
            Reality::Real => f.d_u4(self.hu),
            Reality::ComplexConjugate => wirtinger(&f.d_u4(self.hu), &f.d_v4(self.hv), -1.0),
        }
    }

    pub fn d_v4<T: ComplexLinear>(&self, f: &Field<T>) -> Field<T> {
        match self.reality {
            Reality::Real => f.d_v4(self.hv),
            Reality::ComplexConjugate => wirtinger(&f.d_u4(self.hu), &f.d_v4(self.hv), 1.0),
        }
    }

    pub fn d_uu<T: ComplexLinear>(&self, f: &Field<T>) -> Field<T> {
        match self.reality {
            Reality::Real => f.d_uu(self.hu),
            Reality::ComplexConjugate => second_wirtinger(self, f, -1.0),
        }
    }

    pub fn d_vv<T: ComplexLinear>(&self, f: &Field<T>) -> Field<T> {
        match self.reality {
            Reality::Real => f.d_vv(self.hv),
            Reality::ComplexConjugate => second_wirtinger(self, f, 1.0),
        }
    }

    pub fn d_uv<T: ComplexLinear>(&self, f: &Field<T>) -> Field<T> {
        match self.reality {
            Reality::Real => f.d_uv(self.hu, self.hv),
            // ∂_w ∂_w̄ = (∂_xx + ∂_yy)/4
            Reality::ComplexConjugate => f.d_uu(self.hu).plus(&f.d_vv(self.hv)).map_linear(|x| x.scale(0.25)),
        }
    }

    /// Fourth-order variants of the second derivatives.
    pub fn d_uu4<T: ComplexLinear>(&self, f: &Field<T>) -> Field<T> {
        match self.reality {
            Reality::Real => f.d_uu4(self.hu),
            Reality::ComplexConjugate => second_wirtinger4(self, f, -1.0),
        }
    }

    pub fn d_vv4<T: ComplexLinear>(&self, f: &Field<T>) -> Field<T> {
        match self.reality {
            Reality::Real => f.d_vv4(self.hv),
            Reality::ComplexConjugate => second_wirtinger4(self, f, 1.0),
        }
    }

    pub fn d_uv4<T: ComplexLinear>(&self, f: &Field<T>) -> Field<T> {
        match self.reality {
            Reality::Real => f.d_uv4(self.hu, self.hv),
            Reality::ComplexConjugate => f.d_uu4(self.hu).plus(&f.d_vv4(self.hv)).map_linear(|x| x.scale(0.25)),
        }
    }

    /// Area factor relating `du dv` in null coordinates to the chart cell
    /// `hu hv`.  For `w = x + iy`, `dw ∧ dw̄ = -2i dx ∧ dy`.
    pub fn null_area_factor(&self) -> C {
        match self.reality {
            Reality::Real => C::new(1.0, 0.0),
            Reality::ComplexConjugate => C::new(0.0, -2.0),
        }
    }
}

fn wirtinger<T: ComplexLinear>(fx: &Field<T>, fy: &Field<T>, sign: f64) -> Field<T> {
    let half_i = C::new(0.0, 0.5 * sign);
    Field {
        nu: fx.nu,
        nv: fx.nv,
        margin: fx.margin.max(fy.margin),
        data: fx.data.iter().zip(&fy.data).map(|(a, b)| a.scale(0.5).plus(&b.scale_c(half_i))).collect(),
    }
}

fn second_wirtinger4<T: ComplexLinear>(chart: &GridChart, f: &Field<T>, sign: f64) -> Field<T> {
    let a = f.d_uu4(chart.hu).minus(&f.d_vv4(chart.hv));
    let b = f.d_uv4(chart.hu, chart.hv);
    let c = C::new(0.0, 0.5 * sign);
    Field {
        nu: f.nu,
        nv: f.nv,
        margin: a.margin.max(b.margin),
        data: a.data.iter().zip(&b.data).map(|(x, y)| x.scale(0.25).plus(&y.scale_c(c))).collect(),
    }
}

// (∂_x ∓ i∂_y)²/4 = (∂_xx - ∂_yy ∓ 2i ∂_xy)/4
fn second_wirtinger<T: ComplexLinear>(chart: &GridChart, f: &Field<T>, sign: f64) -> Field<T> {
    let a = f.d_uu(chart.hu).minus(&f.d_vv(chart.hv));
    let b = f.d_uv(chart.hu, chart.hv);
    let c = C::new(0.0, 0.5 * sign);
    Field {
        nu: f.nu,
        nv: f.nv,
        margin: a.margin.max(b.margin),
        data: a.data.iter().zip(&b.data).map(|(x, y)| x.scale(0.25).plus(&y.scale_c(c))).collect(),
    }
}

impl<T: Clone> Field<T> {
    /// Applies `f` to every stored value, keeping the margin.
    pub fn map_linear(&self, f: impl Fn(&T) -> T) -> Field<T> {
        Field { nu: self.nu, nv: self.nv, margin: self.margin, data: self.data.iter().map(f).collect() }
    }
}

impl Field<f64> {
    /// Maximum absolute value over nodes valid at `margin` (at least the
    /// field's own margin).
    pub fn max_abs(&self, margin: usize) -> f64 {
        let m = margin.max(self.margin);
        (m..self.nu.saturating_sub(m))
            .flat_map(|i| (m..self.nv.saturating_sub(m)).map(move |j| (i, j)))
            .map(|(i, j)| self.at(i, j).abs())
            .fold(0.0, f64::max)
    }
}

/// Least-squares convergence order from `(h, error)` pairs: slope of
/// `log error` against `log h`.
pub fn fitted_order(samples: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(h, e)| *h > 0.0 && *e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
