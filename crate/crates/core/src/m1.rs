//! M1 moment model physics: moment states, realizability, the Eddington
//! closure and the Lax–Friedrichs numerical flux.
//!
//! A state `u = (ψ⁰, ψ¹)` carries the zeroth moment (particle density) and the
//! first moment (momentum density, a `D`-vector). The second moment is closed by
//! `ψ² = D(v) ψ⁰` with `v = ψ¹/ψ⁰`, where `D` is the Eddington tensor built from
//! the scalar Eddington factor `χ(|v|)`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{M1Error, Result};

/// Upper bound on the wave speeds of the realizable M1 system.
pub const LAMBDA_MAX: f64 = 1.0;

/// Below this value of `|v|²` the anisotropic part of the Eddington tensor is
/// dropped and `D(v) = I/3`.
const ISOTROPIC_THRESHOLD: f64 = 1e-30;

/// Conserved moments `(ψ⁰, ψ¹)` at one point, or any other `(D+1)`-vector with
/// the same layout (right-hand sides, antidiffusive fluxes, sources).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentState<const D: usize> {
    pub psi0: f64,
    pub psi1: [f64; D],
}

/// One nodal unknown per mesh node.
pub type NodalField<const D: usize> = Vec<MomentState<D>>;

impl<const D: usize> Default for MomentState<D> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<const D: usize> MomentState<D> {
    /// Number of scalar components, `D + 1`.
    pub const NCOMP: usize = D + 1;

    pub const fn new(psi0: f64, psi1: [f64; D]) -> Self {
        Self { psi0, psi1 }
    }

    pub const fn zero() -> Self {
        Self { psi0: 0.0, psi1: [0.0; D] }
    }

    /// Isotropic state `(ψ⁰, 0)`.
    pub const fn isotropic(psi0: f64) -> Self {
        Self { psi0, psi1: [0.0; D] }
    }

    /// Builds a state with every component equal to `value`.
    pub const fn splat(value: f64) -> Self {
        Self { psi0: value, psi1: [value; D] }
    }

    /// `|ψ¹|`
    pub fn psi1_norm(&self) -> f64 {
        self.psi1_norm_sq().sqrt()
    }

    pub fn psi1_norm_sq(&self) -> f64 {
        self.psi1.iter().map(|x| x * x).sum()
    }

    /// Flux ratio `f = |ψ¹|/ψ⁰`. Infinite for `ψ⁰ ≤ 0` unless the state vanishes.
    pub fn flux_ratio(&self) -> f64 {
        let norm = self.psi1_norm();
        if self.psi0 > 0.0 {
            norm / self.psi0
        } else if norm == 0.0 && self.psi0 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// Membership in the realizable cone. The strict form is the open set
    /// `ψ⁰ > 0, |ψ¹| < ψ⁰`; the non-strict form is its closure.
    pub fn is_realizable(&self, strict: bool) -> bool {
        is_realizable(self, strict)
    }

    /// Applies `op` to every component.
    pub fn map(self, mut op: impl FnMut(f64) -> f64) -> Self {
        let mut out = self;
        out.psi0 = op(self.psi0);
        for k in 0..D {
            out.psi1[k] = op(self.psi1[k]);
        }
        out
    }

    /// Componentwise combination of two states.
    pub fn zip_with(self, other: Self, mut op: impl FnMut(f64, f64) -> f64) -> Self {
        let mut out = self;
        out.psi0 = op(self.psi0, other.psi0);
        for k in 0..D {
            out.psi1[k] = op(self.psi1[k], other.psi1[k]);
        }
        out
    }

    pub fn components(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.psi0).chain(self.psi1.iter().copied())
    }

    pub fn max_abs(&self) -> f64 {
        self.components().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl<const D: usize> Index<usize> for MomentState<D> {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        if k == 0 {
            &self.psi0
        } else {
            &self.psi1[k - 1]
        }
    }
}

impl<const D: usize> IndexMut<usize> for MomentState<D> {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        if k == 0 {
            &mut self.psi0
        } else {
            &mut self.psi1[k - 1]
        }
    }
}

impl<const D: usize> Add for MomentState<D> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<const D: usize> Sub for MomentState<D> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl<const D: usize> AddAssign for MomentState<D> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const D: usize> SubAssign for MomentState<D> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<const D: usize> Neg for MomentState<D> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|x| -x)
    }
}

impl<const D: usize> Mul<MomentState<D>> for f64 {
    type Output = MomentState<D>;
    fn mul(self, rhs: MomentState<D>) -> MomentState<D> {
        rhs.map(|x| self * x)
    }
}

impl<const D: usize> Mul<f64> for MomentState<D> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.map(|x| x * rhs)
    }
}

/// Physical flux `f(u)`: row `k` is `(ψ¹_k, ψ²_{k,·})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxMatrix<const D: usize> {
    pub psi1: [f64; D],
    pub psi2: [[f64; D]; D],
}

impl<const D: usize> FluxMatrix<D> {
    /// Row `k` as a `(D+1)`-vector.
    pub fn row(&self, k: usize) -> MomentState<D> {
        MomentState::new(self.psi1[k], self.psi2[k])
    }

    /// Contraction `f(u)·n`, the flux through a face with normal `n`.
    pub fn dot(&self, n: &[f64; D]) -> MomentState<D> {
        let mut out = MomentState::zero();
        for k in 0..D {
            out.psi0 += self.psi1[k] * n[k];
            for l in 0..D {
                out.psi1[l] += self.psi2[k][l] * n[k];
            }
        }
        out
    }
}

/// Eddington factor `χ(f) = (3 + 4f²)/(5 + 2√(4 − 3f²))`.
pub fn eddington_factor(f: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(M1Error::Domain(format!(
            "Eddington factor requires 0 <= f <= 1, got {f}"
        )));
    }
    Ok(eddington_factor_unchecked(f))
}

#[inline]
fn eddington_factor_unchecked(f: f64) -> f64 {
    let f2 = f * f;
    (3.0 + 4.0 * f2) / (5.0 + 2.0 * (4.0 - 3.0 * f2).max(0.0).sqrt())
}

/// Eddington tensor `D(v)` for a normalized flux `v` with `|v| ≤ 1`.
///
/// `D(0) = I/3` by continuous extension. For `D = 1` this is `χ(|v|)`.
pub fn eddington_tensor<const D: usize>(v: &[f64; D]) -> Result<[[f64; D]; D]> {
    let v2: f64 = v.iter().map(|x| x * x).sum();
    if !(v2 <= 1.0) {
        return Err(M1Error::Domain(format!(
            "Eddington tensor requires |v| <= 1, got |v| = {}",
            v2.sqrt()
        )));
    }
    Ok(eddington_tensor_unchecked(v, v2))
}

#[inline]
fn eddington_tensor_unchecked<const D: usize>(v: &[f64; D], v2: f64) -> [[f64; D]; D] {
    let mut out = [[0.0; D]; D];
    if v2 < ISOTROPIC_THRESHOLD {
        for (k, row) in out.iter_mut().enumerate() {
            row[k] = 1.0 / 3.0;
        }
        return out;
    }
    let chi = eddington_factor_unchecked(v2.sqrt().min(1.0));
    let iso = 0.5 * (1.0 - chi);
    let aniso = 0.5 * (3.0 * chi - 1.0) / v2;
    for k in 0..D {
        for l in 0..D {
            out[k][l] = aniso * (v[k] * v[l]);
        }
        out[k][k] += iso;
    }
    out
}

/// Closed second moment `ψ² = D(ψ¹/ψ⁰) ψ⁰`.
pub fn closure_psi2<const D: usize>(u: &MomentState<D>) -> Result<[[f64; D]; D]> {
    if !u.is_realizable(false) || u.psi0 <= 0.0 {
        return Err(M1Error::NotRealizable(format!(
            "closure evaluated at non-realizable state {u:?}"
        )));
    }
    Ok(closure_unchecked(u))
}

#[inline]
fn closure_unchecked<const D: usize>(u: &MomentState<D>) -> [[f64; D]; D] {
    let inv = 1.0 / u.psi0;
    let v = u.psi1.map(|x| x * inv);
    let v2: f64 = v.iter().map(|x| x * x).sum();
    let mut d = eddington_tensor_unchecked(&v, v2);
    for row in d.iter_mut() {
        for x in row.iter_mut() {
            *x *= u.psi0;
        }
    }
    d
}

/// Physical flux `f(u)` of the M1 system.
pub fn flux<const D: usize>(u: &MomentState<D>) -> Result<FluxMatrix<D>> {
    Ok(FluxMatrix { psi1: u.psi1, psi2: closure_psi2(u)? })
}

/// Flux for a state already known to be realizable.
#[inline]
pub(crate) fn flux_unchecked<const D: usize>(u: &MomentState<D>) -> FluxMatrix<D> {
    FluxMatrix { psi1: u.psi1, psi2: closure_unchecked(u) }
}

/// Global Lax–Friedrichs flux
/// `½(f(uL) + f(uR))·n − (λ_max/2)(uR − uL)`.
pub fn lax_friedrichs_flux<const D: usize>(
    ul: &MomentState<D>,
    ur: &MomentState<D>,
    n: &[f64; D],
) -> Result<MomentState<D>> {
    let fl = flux(ul)?.dot(n);
    let fr = flux(ur)?.dot(n);
    Ok(0.5 * (fl + fr) - (0.5 * LAMBDA_MAX) * (*ur - *ul))
}

/// Realizability predicate; see [`MomentState::is_realizable`].
pub fn is_realizable<const D: usize>(u: &MomentState<D>, strict: bool) -> bool {
    let norm = u.psi1_norm();
    if strict {
        u.psi0 > 0.0 && norm < u.psi0
    } else {
        u.psi0 >= 0.0 && norm <= u.psi0
    }
}
