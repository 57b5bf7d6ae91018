//! Monolithic convex limiting of antidiffusive fluxes.
//!
//! The high-order target scheme differs from the low-order one by the raw
//! antidiffusive fluxes
//!
//! ```text
//! f_ij = m_ij (u̇_i − u̇_j) + (d_ij + m_ij^σ)(u_i − u_j)
//! ```
//!
//! where `u̇` is the low-order nodal time derivative. Limiting happens in two
//! passes per edge. First each component is clipped so that the flux-corrected
//! bar states `ū_ij + f*/(2d_ij)` and `ū_ji − f*/(2d_ij)` stay inside local
//! bounds built from neighboring nodal values and bar states. Then a common
//! factor `α ∈ [0, 1]` scales the whole flux until both corrected bar states
//! satisfy `|ψ̄¹| < ψ̄⁰`.
//!
//! Fluxes are stored once per undirected edge in the `i → j` orientation, so
//! `f_ji = −f_ij` holds at every stage by construction.

use crate::error::{M1Error, Result};
use crate::fem::FemCoefficients;
use crate::low_order::{low_order_bar_states, nodal_fluxes, BarPair};
use crate::m1::{MomentState, NodalField};

/// Safety factor applied to the realizability margin `Q`.
pub const IDP_EPSILON: f64 = 1e-15;

/// Componentwise bounds per node.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBounds<const D: usize> {
    pub min: NodalField<D>,
    pub max: NodalField<D>,
}

/// Antidiffusive flux of one edge through the limiting pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFlux<const D: usize> {
    /// Raw flux `f_ij^s`.
    pub raw: MomentState<D>,
    /// Componentwise-limited flux `f_ij^*`.
    pub prelimited: MomentState<D>,
    /// Realizability correction factor.
    pub alpha: f64,
    /// Final flux `α f_ij^*`.
    pub limited: MomentState<D>,
}

/// Everything produced by one application of the limiter.
#[derive(Debug, Clone)]
pub struct LimiterOutput<const D: usize> {
    pub low_order: Vec<BarPair<D>>,
    pub time_derivative: NodalField<D>,
    pub bounds: LocalBounds<D>,
    pub fluxes: Vec<EdgeFlux<D>>,
    /// Flux-corrected bar states `ū_ij^IDP`, `ū_ji^IDP`.
    pub limited: Vec<BarPair<D>>,
}

/// `(Σ_j 2d_ij (ū_ij − u_i) − m_i^σ u_i + s_i)/m_i` for given bar states.
pub(crate) fn time_derivative_from_bars<const D: usize>(
    u: &[MomentState<D>],
    bars: &[BarPair<D>],
    coeffs: &FemCoefficients<D>,
) -> NodalField<D> {
    (0..coeffs.n_nodes())
        .map(|i| {
            let ui = u[i];
            let mut acc = coeffs.source[i];
            for inc in coeffs.incident(i) {
                let d = coeffs.edges[inc.edge].viscosity;
                acc += (2.0 * d) * (*bars[inc.edge].from_side(inc.forward) - ui);
            }
            acc.psi0 -= coeffs.lumped_sigma_a[i] * ui.psi0;
            for k in 0..D {
                acc.psi1[k] -= coeffs.lumped_sigma_t[i] * ui.psi1[k];
            }
            (1.0 / coeffs.lumped_mass[i]) * acc
        })
        .collect()
}

/// Low-order nodal time derivative
/// `u̇_i = (Σ_j [d_ij (u_j − u_i) − (f_j − f_i)·c_ij] − m_i^σ u_i + s_i) / m_i`.
pub fn low_order_time_derivative<const D: usize>(
    u: &[MomentState<D>],
    coeffs: &FemCoefficients<D>,
) -> Result<NodalField<D>> {
    let fluxes = nodal_fluxes(u, "low-order time derivative")?;
    let bars = low_order_bar_states(u, &fluxes, coeffs);
    Ok(time_derivative_from_bars(u, &bars, coeffs))
}

/// Raw antidiffusive fluxes `f_ij^s`, one per edge in `i → j` orientation.
pub fn raw_antidiffusive_fluxes<const D: usize>(
    u: &[MomentState<D>],
    udot: &[MomentState<D>],
    coeffs: &FemCoefficients<D>,
) -> Vec<MomentState<D>> {
    coeffs
        .edges
        .iter()
        .map(|e| {
            let mut f = e.mass * (udot[e.i] - udot[e.j]);
            let du = u[e.i] - u[e.j];
            for k in 0..=D {
                f[k] += (e.viscosity + e.mass_sigma(k)) * du[k];
            }
            f
        })
        .collect()
}

/// Bounds over the nodal values in the closed stencil and the bar states
/// `ū_ij` seen from each node.
pub fn compute_local_bounds<const D: usize>(
    u: &[MomentState<D>],
    bars: &[BarPair<D>],
    coeffs: &FemCoefficients<D>,
) -> LocalBounds<D> {
    let mut min = u.to_vec();
    let mut max = u.to_vec();
    for i in 0..coeffs.n_nodes() {
        let (lo, hi) = (&mut min[i], &mut max[i]);
        for inc in coeffs.incident(i) {
            let uj = &u[inc.neighbor];
            let bar = bars[inc.edge].from_side(inc.forward);
            *lo = lo.zip_with(*uj, f64::min).zip_with(*bar, f64::min);
            *hi = hi.zip_with(*uj, f64::max).zip_with(*bar, f64::max);
        }
    }
    LocalBounds { min, max }
}

/// Limits one scalar component of an edge flux against the bounds of both
/// endpoints.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn limit_component(
    flux: f64,
    viscosity: f64,
    bar_ij: f64,
    bar_ji: f64,
    min_i: f64,
    max_i: f64,
    min_j: f64,
    max_j: f64,
) -> f64 {
    let two_d = 2.0 * viscosity;
    if flux > 0.0 {
        flux.min(two_d * (max_i - bar_ij).min(bar_ji - min_j))
    } else {
        flux.max(two_d * (min_i - bar_ij).max(bar_ji - max_j))
    }
}

/// Componentwise limited fluxes `f_ij^*`.
pub fn limit_componentwise<const D: usize>(
    raw: &[MomentState<D>],
    bounds: &LocalBounds<D>,
    bars: &[BarPair<D>],
    coeffs: &FemCoefficients<D>,
) -> Vec<MomentState<D>> {
    coeffs
        .edges
        .iter()
        .zip(raw)
        .zip(bars)
        .map(|((e, f), bar)| {
            let mut out = *f;
            for k in 0..=D {
                out[k] = limit_component(
                    f[k],
                    e.viscosity,
                    bar.ij[k],
                    bar.ji[k],
                    bounds.min[e.i][k],
                    bounds.max[e.i][k],
                    bounds.min[e.j][k],
                    bounds.max[e.j][k],
                );
            }
            out
        })
        .collect()
}

/// Error-free product `a b = h + l` by Veltkamp splitting.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    const SPLIT: f64 = 134_217_729.0;
    let split = |x: f64| {
        let c = SPLIT * x;
        let hi = c - (c - x);
        (hi, x - hi)
    };
    let p = a * b;
    let ((ah, al), (bh, bl)) = (split(a), split(b));
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

/// Compensated sum of products: the result is as accurate as if the dot
/// product were evaluated in twice the working precision and then rounded.
#[derive(Default)]
struct Dot2 {
    hi: f64,
    lo: f64,
}

impl Dot2 {
    #[inline]
    fn add(&mut self, a: f64, b: f64) {
        let (p, perr) = two_prod(a, b);
        let s = self.hi + p;
        let z = s - self.hi;
        let serr = (self.hi - (s - z)) + (p - z);
        self.hi = s;
        self.lo += serr + perr;
    }

    /// Adds `a b c`, with `a b` split exactly before multiplying by `c`.
    #[inline]
    fn add3(&mut self, a: f64, b: f64, c: f64) {
        let (h, l) = two_prod(a, b);
        self.add(h, c);
        self.add(l, c);
    }

    #[inline]
    fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// `Q = (2d)² ((ψ̄⁰)² − |ψ̄¹|²)`, the realizability margin of a bar state.
/// Accurate to a few ulps even when `ψ̄` sits close to the cone boundary.
pub fn realizability_margin<const D: usize>(bar: &MomentState<D>, viscosity: f64) -> f64 {
    let two_d = 2.0 * viscosity;
    let mut acc = Dot2::default();
    let mut square = |x: f64, sign: f64| {
        let (h, l) = two_prod(two_d, x);
        acc.add(sign * h, h);
        acc.add(sign * 2.0 * h, l);
        acc.add(sign * l, l);
    };
    square(bar.psi0, 1.0);
    for k in 0..D {
        square(bar.psi1[k], -1.0);
    }
    acc.value()
}

/// Upper bound `R` of `P(α)/α` on `α ∈ (0, 1]` for the bar state `bar`
/// corrected by `+α f/(2d)`, where
/// `P(α) = (|f¹|² − (f⁰)²) α² + 4d (ψ̄¹·f¹ − ψ̄⁰ f⁰) α`.
/// Evaluated with compensated sums so that the ε margin on `Q` survives the
/// cancellation between the two terms.
fn quadratic_bound<const D: usize>(f: &MomentState<D>, bar: &MomentState<D>, viscosity: f64) -> f64 {
    let mut quad = Dot2::default();
    quad.add(-f.psi0, f.psi0);
    for k in 0..D {
        quad.add(f.psi1[k], f.psi1[k]);
    }
    let mut acc = if quad.value() > 0.0 { quad } else { Dot2::default() };
    let four_d = 4.0 * viscosity;
    acc.add3(-four_d, bar.psi0, f.psi0);
    for k in 0..D {
        acc.add3(four_d, bar.psi1[k], f.psi1[k]);
    }
    acc.value()
}

/// `R ≤ (1 − ε) Q` certified from plain floating-point sums and a bound on
/// their rounding error.
#[inline]
fn clearly_admissible<const D: usize>(f: &MomentState<D>, bar: &MomentState<D>, viscosity: f64) -> bool {
    let four_d = 4.0 * viscosity;
    let mut quad = -f.psi0 * f.psi0;
    let mut quad_abs = f.psi0 * f.psi0;
    let mut lin = -bar.psi0 * f.psi0;
    let mut lin_abs = (bar.psi0 * f.psi0).abs();
    let mut q = bar.psi0 * bar.psi0;
    let mut q_abs = q;
    for k in 0..D {
        let ff = f.psi1[k] * f.psi1[k];
        quad += ff;
        quad_abs += ff;
        let bf = bar.psi1[k] * f.psi1[k];
        lin += bf;
        lin_abs += bf.abs();
        let bb = bar.psi1[k] * bar.psi1[k];
        q -= bb;
        q_abs += bb;
    }
    let r = quad.max(0.0) + four_d * lin;
    let q = four_d * viscosity * q;
    let err = 1e-14 * (quad_abs + four_d * lin_abs + four_d * viscosity * q_abs);
    r + err < (1.0 - IDP_EPSILON) * q - err
}

/// Scalar correction `α ∈ [0, 1]` making `ū_ij + α f*/(2d)` and
/// `ū_ji − α f*/(2d)` strictly realizable. Returns `(α, α f*)`.
pub fn idp_fix<const D: usize>(
    f_star: &MomentState<D>,
    bar_ij: &MomentState<D>,
    bar_ji: &MomentState<D>,
    viscosity: f64,
) -> Result<(f64, MomentState<D>)> {
    if clearly_admissible(f_star, bar_ij, viscosity) && clearly_admissible(&-*f_star, bar_ji, viscosity) {
        return Ok((1.0, *f_star));
    }
    let q_ij = realizability_margin(bar_ij, viscosity);
    let q_ji = realizability_margin(bar_ji, viscosity);
    if !(q_ij > 0.0 && q_ji > 0.0) {
        return Err(M1Error::NotRealizable(format!(
            "low-order bar states {bar_ij:?} / {bar_ji:?} have non-positive margins {q_ij:e} / {q_ji:e}"
        )));
    }
    let qt_ij = (1.0 - IDP_EPSILON) * q_ij;
    let qt_ji = (1.0 - IDP_EPSILON) * q_ji;
    let r_ij = quadratic_bound(f_star, bar_ij, viscosity);
    let r_ji = quadratic_bound(&-*f_star, bar_ji, viscosity);
    let alpha = match (r_ij > qt_ij, r_ji > qt_ji) {
        (true, true) => (qt_ij / r_ij).min(qt_ji / r_ji),
        (true, false) => qt_ij / r_ij,
        (false, true) => qt_ji / r_ji,
        (false, false) => 1.0,
    };
    Ok((alpha, alpha * *f_star))
}

/// Runs the full limiting pipeline on a realizable field.
pub fn mcl_limit<const D: usize>(
    u: &[MomentState<D>],
    coeffs: &FemCoefficients<D>,
) -> Result<LimiterOutput<D>> {
    let nodal = nodal_fluxes(u, "flux limiter input")?;
    let low_order = low_order_bar_states(u, &nodal, coeffs);
    let time_derivative = time_derivative_from_bars(u, &low_order, coeffs);
    let raw = raw_antidiffusive_fluxes(u, &time_derivative, coeffs);
    let bounds = compute_local_bounds(u, &low_order, coeffs);
    let prelimited = limit_componentwise(&raw, &bounds, &low_order, coeffs);

    let mut fluxes = Vec::with_capacity(coeffs.n_edges());
    let mut limited = Vec::with_capacity(coeffs.n_edges());
    for (e_idx, e) in coeffs.edges.iter().enumerate() {
        let bar = &low_order[e_idx];
        let f_star = prelimited[e_idx];
        let (mut alpha, mut f_idp) = idp_fix(&f_star, &bar.ij, &bar.ji, e.viscosity)?;
        let scale = 0.5 / e.viscosity;
        let mut pair = BarPair { ij: bar.ij + scale * f_idp, ji: bar.ji - scale * f_idp };
        if !(pair.ij.is_realizable(true) && pair.ji.is_realizable(true)) {
            // Rounding can eat the ε margin when a bar state sits at the edge of
            // the cone; the unlimited low-order pair is always admissible.
            alpha = 0.0;
            f_idp = MomentState::zero();
            pair = *bar;
        }
        fluxes.push(EdgeFlux { raw: raw[e_idx], prelimited: f_star, alpha, limited: f_idp });
        limited.push(pair);
    }

    Ok(LimiterOutput { low_order, time_derivative, bounds, fluxes, limited })
}

/// Limited bar states `ū_ij^IDP` for every edge.
pub fn limited_bar_states<const D: usize>(
    u: &[MomentState<D>],
    coeffs: &FemCoefficients<D>,
) -> Result<Vec<BarPair<D>>> {
    Ok(mcl_limit(u, coeffs)?.limited)
}
