//! Low-order invariant-domain-preserving scheme.
//!
//! The graph-viscosity discretization is written in bar-state form
//!
//! ```text
//! m_i du_i/dt = Σ_j 2 d_ij (ū_ij − u_i) + b̃_i − m_i^σ u_i + s_i
//! ```
//!
//! with `ū_ij = (u_i + u_j)/2 − (f_j − f_i)·c_ij / (2 d_ij)`. Each bar state is
//! the mean of two states of the form `u ± f(u)·ν` with `|ν| ≤ 1`, hence
//! realizable. One IMEX Euler stage treats the lumped reactive term implicitly.

use crate::error::{M1Error, Result};
use crate::fem::{boundary_term, FemCoefficients};
use crate::m1::{flux, flux_unchecked, FluxMatrix, MomentState, NodalField};

/// Bar states of one undirected edge seen from both endpoints: `ij` enters the
/// update of node `i`, `ji` that of node `j`. They coincide wherever
/// `c_ji = −c_ij`, i.e. away from the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarPair<const D: usize> {
    pub ij: MomentState<D>,
    pub ji: MomentState<D>,
}

impl<const D: usize> BarPair<D> {
    /// Bar state used by `node`, which must be an endpoint of the edge.
    #[inline]
    pub fn from_side(&self, forward: bool) -> &MomentState<D> {
        if forward {
            &self.ij
        } else {
            &self.ji
        }
    }
}

/// External states for the lumped boundary term.
#[derive(Debug, Clone, Copy, Default)]
pub enum BoundaryData<'a, const D: usize> {
    /// `û_i = u_i`; the boundary term vanishes.
    #[default]
    DoNothing,
    /// One external state per entry of [`FemCoefficients::boundary`]. The
    /// realizability proof does not cover inflow states, so this is meant for
    /// diagnostics only.
    External(&'a [MomentState<D>]),
}

#[derive(Debug, Clone)]
pub struct StageResult<const D: usize> {
    pub u_new: NodalField<D>,
    pub dt_used: f64,
}

/// Fails with the node index of the first state outside the open realizable set.
pub fn check_realizable<const D: usize>(u: &[MomentState<D>], context: &str) -> Result<()> {
    match u.iter().position(|s| !s.is_realizable(true)) {
        None => Ok(()),
        Some(node) => Err(M1Error::RealizabilityViolation {
            node,
            context: context.to_string(),
            psi0: u[node].psi0,
            psi1_norm: u[node].psi1_norm(),
        }),
    }
}

/// Physical fluxes at every node, after checking realizability.
pub fn nodal_fluxes<const D: usize>(u: &[MomentState<D>], context: &str) -> Result<Vec<FluxMatrix<D>>> {
    check_realizable(u, context)?;
    Ok(u.iter().map(flux_unchecked).collect())
}

#[inline]
pub(crate) fn bar_state_with_fluxes<const D: usize>(
    u_i: &MomentState<D>,
    u_j: &MomentState<D>,
    f_i: &FluxMatrix<D>,
    f_j: &FluxMatrix<D>,
    c_ij: &[f64; D],
    d_ij: f64,
) -> MomentState<D> {
    let df = f_j.dot(c_ij) - f_i.dot(c_ij);
    0.5 * (*u_i + *u_j) - (0.5 / d_ij) * df
}

/// Low-order bar state `ū_ij` of two realizable nodal states.
pub fn bar_state<const D: usize>(
    u_i: &MomentState<D>,
    u_j: &MomentState<D>,
    c_ij: &[f64; D],
    d_ij: f64,
) -> Result<MomentState<D>> {
    if !(d_ij > 0.0) {
        return Err(M1Error::Contract(format!("bar state needs d_ij > 0, got {d_ij}")));
    }
    let (f_i, f_j) = (flux(u_i)?, flux(u_j)?);
    Ok(bar_state_with_fluxes(u_i, u_j, &f_i, &f_j, c_ij, d_ij))
}

/// Auxiliary states `ū_i = u_i + f_i·c_ij/d_ij` and `ū_j = u_j − f_j·c_ij/d_ij`
/// whose average is the bar state.
pub fn bar_state_split<const D: usize>(
    u_i: &MomentState<D>,
    u_j: &MomentState<D>,
    c_ij: &[f64; D],
    d_ij: f64,
) -> Result<(MomentState<D>, MomentState<D>)> {
    let s = 1.0 / d_ij;
    Ok((*u_i + s * flux(u_i)?.dot(c_ij), *u_j - s * flux(u_j)?.dot(c_ij)))
}

/// Low-order bar states for every edge.
pub fn low_order_bar_states<const D: usize>(
    u: &[MomentState<D>],
    fluxes: &[FluxMatrix<D>],
    coeffs: &FemCoefficients<D>,
) -> Vec<BarPair<D>> {
    coeffs
        .edges
        .iter()
        .map(|e| {
            let (ui, uj) = (&u[e.i], &u[e.j]);
            let (fi, fj) = (&fluxes[e.i], &fluxes[e.j]);
            BarPair {
                ij: bar_state_with_fluxes(ui, uj, fi, fj, &e.c_ij, e.viscosity),
                ji: bar_state_with_fluxes(uj, ui, fj, fi, &e.c_ji, e.viscosity),
            }
        })
        .collect()
}

/// Implicit reactive scaling of an explicit update:
/// `(m ψ⁰/(m + Δt m^σa), m ψ¹/(m + Δt m^σt))`.
pub fn scaled_state<const D: usize>(
    u: &MomentState<D>,
    mass: f64,
    dt: f64,
    mass_sigma_a: f64,
    mass_sigma_t: f64,
) -> MomentState<D> {
    let mut out = *u;
    out.psi0 *= mass / (mass + dt * mass_sigma_a);
    let st = mass / (mass + dt * mass_sigma_t);
    for x in out.psi1.iter_mut() {
        *x *= st;
    }
    out
}

/// Lumped boundary term `b̃_i` per node (zero away from the boundary).
pub fn boundary_contributions<const D: usize>(
    u: &[MomentState<D>],
    coeffs: &FemCoefficients<D>,
    boundary: BoundaryData<'_, D>,
) -> Result<Option<NodalField<D>>> {
    match boundary {
        BoundaryData::DoNothing => Ok(None),
        BoundaryData::External(states) => {
            if states.len() != coeffs.boundary.len() {
                return Err(M1Error::Contract(format!(
                    "expected {} external boundary states, got {}",
                    coeffs.boundary.len(),
                    states.len()
                )));
            }
            let mut out = vec![MomentState::zero(); coeffs.n_nodes()];
            for (bnode, u_hat) in coeffs.boundary.iter().zip(states) {
                out[bnode.node] = boundary_term(&u[bnode.node], u_hat, bnode)?;
            }
            Ok(Some(out))
        }
    }
}

/// Semi-discrete low-order right-hand side without the reactive term:
/// `Σ_j [d_ij (u_j − u_i) − (f_j − f_i)·c_ij] + b̃_i + s_i`.
pub fn low_order_rhs<const D: usize>(
    u: &[MomentState<D>],
    coeffs: &FemCoefficients<D>,
    boundary: BoundaryData<'_, D>,
) -> Result<NodalField<D>> {
    let fluxes = nodal_fluxes(u, "low-order right-hand side")?;
    let mut rhs = coeffs.source.clone();
    for e in &coeffs.edges {
        let du = u[e.j] - u[e.i];
        rhs[e.i] += e.viscosity * du - (fluxes[e.j].dot(&e.c_ij) - fluxes[e.i].dot(&e.c_ij));
        rhs[e.j] += -e.viscosity * du - (fluxes[e.i].dot(&e.c_ji) - fluxes[e.j].dot(&e.c_ji));
    }
    if let Some(b) = boundary_contributions(u, coeffs, boundary)? {
        for (r, bi) in rhs.iter_mut().zip(b) {
            *r += bi;
        }
    }
    Ok(rhs)
}

/// Largest step satisfying `(2Δt/m_i) Σ_j d_ij ≤ 1` at every node.
pub fn max_stable_dt<const D: usize>(coeffs: &FemCoefficients<D>) -> Result<(f64, usize)> {
    coeffs
        .lumped_mass
        .iter()
        .zip(&coeffs.viscosity_sum)
        .enumerate()
        .filter(|(_, (_, &s))| s > 0.0)
        .map(|(i, (&m, &s))| (m / (2.0 * s), i))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| M1Error::Config("mesh has no couplings".into()))
}

pub fn check_cfl<const D: usize>(coeffs: &FemCoefficients<D>, dt: f64) -> Result<()> {
    for i in 0..coeffs.n_nodes() {
        if 2.0 * dt * coeffs.viscosity_sum[i] > coeffs.lumped_mass[i] * (1.0 + 1e-12) {
            let (max_dt, _) = max_stable_dt(coeffs)?;
            return Err(M1Error::CflViolation { dt, max_dt, node: i });
        }
    }
    Ok(())
}

/// One IMEX Euler stage
///
/// ```text
/// u_i^new = m_i/(m_i + Δt m_i^σ̃) · [u_i + Δt/m_i (Σ_j 2d_ij (ū_ij − u_i) + b̃_i + s_i)]
/// ```
///
/// with `σ̃ = σ_a` for `ψ⁰` and `σ_t` for `ψ¹`. `bar_states` replaces the
/// low-order bar states, e.g. by limited ones.
pub fn imex_euler_stage<const D: usize>(
    u: &[MomentState<D>],
    dt: f64,
    coeffs: &FemCoefficients<D>,
    bar_states: Option<&[BarPair<D>]>,
    boundary: BoundaryData<'_, D>,
) -> Result<StageResult<D>> {
    check_cfl(coeffs, dt)?;
    let owned;
    let bars = match bar_states {
        Some(b) => {
            if b.len() != coeffs.n_edges() {
                return Err(M1Error::Contract(format!(
                    "expected {} bar-state pairs, got {}",
                    coeffs.n_edges(),
                    b.len()
                )));
            }
            check_realizable(u, "IMEX stage input")?;
            b
        }
        None => {
            let fluxes = nodal_fluxes(u, "IMEX stage input")?;
            owned = low_order_bar_states(u, &fluxes, coeffs);
            &owned[..]
        }
    };
    let b_tilde = boundary_contributions(u, coeffs, boundary)?;

    let mut u_new = Vec::with_capacity(u.len());
    for i in 0..coeffs.n_nodes() {
        let ui = u[i];
        let mut acc = coeffs.source[i];
        for inc in coeffs.incident(i) {
            let d = coeffs.edges[inc.edge].viscosity;
            acc += (2.0 * d) * (*bars[inc.edge].from_side(inc.forward) - ui);
        }
        if let Some(b) = &b_tilde {
            acc += b[i];
        }
        let m = coeffs.lumped_mass[i];
        let explicit = ui + (dt / m) * acc;
        u_new.push(scaled_state(&explicit, m, dt, coeffs.lumped_sigma_a[i], coeffs.lumped_sigma_t[i]));
    }
    check_realizable(&u_new, "IMEX stage output")?;
    Ok(StageResult { u_new, dt_used: dt })
}
