//! Time integration: Heun's SSP-RK2 method with IMEX stages for transient
//! runs, single-stage pseudo-time stepping for steady states.

use std::fmt;
use std::str::FromStr;

use crate::error::{M1Error, Result};
use crate::fem::{assemble_coefficients, FemCoefficients, MaterialFields};
use crate::limiter::{limited_bar_states, time_derivative_from_bars};
use crate::low_order::{
    check_realizable, imex_euler_stage, low_order_bar_states, max_stable_dt, nodal_fluxes, BarPair,
    BoundaryData,
};
use crate::m1::{MomentState, NodalField};
use crate::mesh::Mesh;

/// Spatial scheme used inside each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Low-order graph-viscosity scheme.
    LowOrder,
    /// Monolithic convex limiting.
    #[default]
    Mcl,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::LowOrder => "low",
            Scheme::Mcl => "mcl",
        })
    }
}

impl FromStr for Scheme {
    type Err = M1Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" | "low_order" | "lo" => Ok(Scheme::LowOrder),
            "mcl" => Ok(Scheme::Mcl),
            other => Err(M1Error::Config(format!("unknown scheme '{other}' (expected low or mcl)"))),
        }
    }
}

/// `Δt = CFL / max_i (2/m_i) Σ_j d_ij`
pub fn compute_dt<const D: usize>(coeffs: &FemCoefficients<D>, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(M1Error::Config(format!("CFL number must lie in (0, 1], got {cfl}")));
    }
    if coeffs.n_nodes() == 0 {
        return Err(M1Error::Config("empty mesh".into()));
    }
    let (dt_max, _) = max_stable_dt(coeffs)?;
    Ok(cfl * dt_max)
}

/// Bar states of the chosen scheme for the current field.
pub fn scheme_bar_states<const D: usize>(
    u: &[MomentState<D>],
    coeffs: &FemCoefficients<D>,
    scheme: Scheme,
) -> Result<Vec<BarPair<D>>> {
    match scheme {
        Scheme::LowOrder => {
            let fluxes = nodal_fluxes(u, "low-order bar states")?;
            Ok(low_order_bar_states(u, &fluxes, coeffs))
        }
        Scheme::Mcl => limited_bar_states(u, coeffs),
    }
}

/// One IMEX Euler stage of the chosen scheme.
pub fn euler_stage<const D: usize>(
    u: &[MomentState<D>],
    dt: f64,
    coeffs: &FemCoefficients<D>,
    scheme: Scheme,
) -> Result<NodalField<D>> {
    let bars = scheme_bar_states(u, coeffs, scheme)?;
    Ok(imex_euler_stage(u, dt, coeffs, Some(&bars), BoundaryData::DoNothing)?.u_new)
}

/// Heun's method: `u¹ = S(u)`, `u² = S(u¹)`, `u_new = (u + u²)/2`.
pub fn heun_step<const D: usize>(
    u: &[MomentState<D>],
    dt: f64,
    coeffs: &FemCoefficients<D>,
    scheme: Scheme,
) -> Result<NodalField<D>> {
    let u1 = euler_stage(u, dt, coeffs, scheme)?;
    let u2 = euler_stage(&u1, dt, coeffs, scheme)?;
    let out: NodalField<D> = u.iter().zip(&u2).map(|(a, b)| 0.5 * (*a + *b)).collect();
    check_realizable(&out, "Heun combination")?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRecord {
    pub step: usize,
    pub pseudo_time: f64,
    pub residual_l2: f64,
}

/// Extremes over every stage output and every accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    pub steps: usize,
    /// Number of nodal fields inspected.
    pub fields_checked: usize,
    pub min_psi0: f64,
    pub max_flux_ratio: f64,
}

impl Default for RunStats {
    fn default() -> Self {
        Self { steps: 0, fields_checked: 0, min_psi0: f64::INFINITY, max_flux_ratio: 0.0 }
    }
}

impl RunStats {
    fn record<const D: usize>(&mut self, u: &[MomentState<D>]) {
        self.fields_checked += 1;
        for s in u {
            self.min_psi0 = self.min_psi0.min(s.psi0);
            self.max_flux_ratio = self.max_flux_ratio.max(s.flux_ratio());
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunState<const D: usize> {
    pub t: f64,
    pub step: usize,
    pub dt: f64,
    pub u: NodalField<D>,
    pub residual_history: Vec<ResidualRecord>,
    pub stats: RunStats,
    /// Steady runs only: the residual dropped below the tolerance.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientOptions {
    pub t_final: f64,
    pub cfl: f64,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyOptions {
    pub cfl: f64,
    pub tol: f64,
    pub max_steps: usize,
    pub scheme: Scheme,
    /// Abort once the residual exceeds the initial one by this factor.
    pub divergence_factor: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self { cfl: 0.9, tol: 1e-8, max_steps: 200_000, scheme: Scheme::Mcl, divergence_factor: 1e3 }
    }
}

/// Pseudo-time residual `r_i = (Σ_j 2d_ij (ū_ij − u_i) + b̃_i − m_i^σ u_i + s_i)/m_i`
/// for given bar states, with do-nothing boundaries.
pub fn steady_residual<const D: usize>(
    u: &[MomentState<D>],
    bars: &[BarPair<D>],
    coeffs: &FemCoefficients<D>,
) -> NodalField<D> {
    time_derivative_from_bars(u, bars, coeffs)
}

/// `‖r_h‖_{L²}` of the finite element function with nodal values `r`,
/// using the consistent mass matrix.
pub fn l2_norm<const D: usize>(r: &[MomentState<D>], coeffs: &FemCoefficients<D>) -> f64 {
    let mut total = 0.0;
    let mut comp = vec![0.0; r.len()];
    for k in 0..=D {
        for (c, ri) in comp.iter_mut().zip(r) {
            *c = ri[k];
        }
        total += coeffs.mass_inner(&comp, &comp);
    }
    total.max(0.0).sqrt()
}

/// Mesh, coefficients and time step of one discretized problem.
#[derive(Debug, Clone)]
pub struct Simulation<const D: usize> {
    pub mesh: Mesh<D>,
    pub coeffs: FemCoefficients<D>,
}

impl<const D: usize> Simulation<D> {
    pub fn new<M: MaterialFields<D> + ?Sized>(mesh: Mesh<D>, materials: &M) -> Result<Self> {
        let coeffs = assemble_coefficients(&mesh, materials)?;
        Ok(Self { mesh, coeffs })
    }

    /// Samples `init` at the nodes.
    pub fn interpolate(&self, init: impl Fn(&[f64; D]) -> MomentState<D>) -> NodalField<D> {
        (0..self.mesh.n_nodes()).map(|i| init(&self.mesh.node_coords(i))).collect()
    }

    /// Total mass `Σ_i m_i u_i`.
    pub fn total_mass(&self, u: &[MomentState<D>]) -> MomentState<D> {
        u.iter()
            .zip(&self.coeffs.lumped_mass)
            .fold(MomentState::zero(), |acc, (s, &m)| acc + m * *s)
    }

    /// Integrates to `t_final` with Heun steps; the last step is shortened to
    /// land on `t_final`. `observer` sees the state after every step.
    pub fn run_transient(
        &self,
        u0: NodalField<D>,
        opts: &TransientOptions,
        mut observer: impl FnMut(&RunState<D>) -> Result<()>,
    ) -> Result<RunState<D>> {
        if !(opts.t_final > 0.0) {
            return Err(M1Error::Config(format!("final time must be positive, got {}", opts.t_final)));
        }
        if u0.len() != self.coeffs.n_nodes() {
            return Err(M1Error::Contract("initial field size does not match the mesh".into()));
        }
        check_realizable(&u0, "initial condition")?;
        let dt = compute_dt(&self.coeffs, opts.cfl)?;
        let mut state = RunState {
            t: 0.0,
            step: 0,
            dt,
            u: u0,
            residual_history: Vec::new(),
            stats: RunStats::default(),
            converged: false,
        };
        state.stats.record(&state.u);
        observer(&state)?;
        while state.t < opts.t_final {
            let remaining = opts.t_final - state.t;
            let (dt_step, last) = if remaining <= dt * (1.0 + 1e-12) {
                (remaining, true)
            } else {
                (dt, false)
            };
            let u1 = euler_stage(&state.u, dt_step, &self.coeffs, opts.scheme)?;
            state.stats.record(&u1);
            let u2 = euler_stage(&u1, dt_step, &self.coeffs, opts.scheme)?;
            state.stats.record(&u2);
            let u: NodalField<D> = state.u.iter().zip(&u2).map(|(a, b)| 0.5 * (*a + *b)).collect();
            check_realizable(&u, "Heun combination")?;
            state.u = u;
            state.step += 1;
            state.t = if last { opts.t_final } else { state.t + dt_step };
            state.stats.steps = state.step;
            state.stats.record(&state.u);
            observer(&state)?;
        }
        Ok(state)
    }

    /// Pseudo-time iteration with single IMEX Euler stages until the residual
    /// drops to `opts.tol` or `opts.max_steps` updates have been made.
    ///
    /// The bar states computed for the residual at step `n` drive the update
    /// to step `n + 1`.
    pub fn run_steady(
        &self,
        u0: NodalField<D>,
        opts: &SteadyOptions,
        mut observer: impl FnMut(&RunState<D>) -> Result<()>,
    ) -> Result<RunState<D>> {
        if !(opts.tol > 0.0) {
            return Err(M1Error::Config(format!("steady tolerance must be positive, got {}", opts.tol)));
        }
        check_realizable(&u0, "initial condition")?;
        let dt = compute_dt(&self.coeffs, opts.cfl)?;
        let mut state = RunState {
            t: 0.0,
            step: 0,
            dt,
            u: u0,
            residual_history: Vec::new(),
            stats: RunStats::default(),
            converged: false,
        };
        state.stats.record(&state.u);
        let mut initial = None;
        loop {
            let bars = scheme_bar_states(&state.u, &self.coeffs, opts.scheme)?;
            let r = steady_residual(&state.u, &bars, &self.coeffs);
            let norm = l2_norm(&r, &self.coeffs);
            state.residual_history.push(ResidualRecord {
                step: state.step,
                pseudo_time: state.t,
                residual_l2: norm,
            });
            let reference = *initial.get_or_insert(norm);
            if norm <= opts.tol {
                state.converged = true;
                observer(&state)?;
                break;
            }
            if !norm.is_finite() || norm > opts.divergence_factor * reference {
                return Err(M1Error::Diverged {
                    step: state.step,
                    residual: norm,
                    limit: opts.divergence_factor * reference,
                });
            }
            if state.step >= opts.max_steps {
                observer(&state)?;
                break;
            }
            observer(&state)?;
            state.u = imex_euler_stage(&state.u, dt, &self.coeffs, Some(&bars), BoundaryData::DoNothing)?.u_new;
            state.step += 1;
            state.t += dt;
            state.stats.steps = state.step;
            state.stats.record(&state.u);
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::UniformMaterials;
    use approx::assert_relative_eq;

    fn square(cells: usize, mat: UniformMaterials<2>) -> Simulation<2> {
        let mesh = Mesh::uniform([0.0, 0.0], [1.0, 1.0], [cells, cells]).unwrap();
        Simulation::new(mesh, &mat).unwrap()
    }

    #[test]
    fn dt_on_uniform_interval() {
        let mesh = Mesh::uniform([0.0], [1.0], [10]).unwrap();
        let sim = Simulation::new(mesh, &UniformMaterials::vacuum()).unwrap();
        // interior: Σd = 1, m = h; boundary: Σd = ½, m = h/2
        let dt = compute_dt(&sim.coeffs, 0.5).unwrap();
        assert_relative_eq!(dt, 0.5 * 0.1 / 2.0, epsilon = 1e-15);
        assert!(compute_dt(&sim.coeffs, 0.0).is_err());
        assert!(compute_dt(&sim.coeffs, 1.5).is_err());
    }

    #[test]
    fn dt_halves_with_resolution() {
        let a = square(8, UniformMaterials::vacuum());
        let b = square(16, UniformMaterials::vacuum());
        let ra = compute_dt(&a.coeffs, 1.0).unwrap();
        let rb = compute_dt(&b.coeffs, 1.0).unwrap();
        assert_relative_eq!(ra / rb, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn cfl_one_is_binding() {
        let sim = square(6, UniformMaterials::vacuum());
        let dt = compute_dt(&sim.coeffs, 1.0).unwrap();
        let worst = (0..sim.coeffs.n_nodes())
            .map(|i| 2.0 * dt * sim.coeffs.viscosity_sum[i] / sim.coeffs.lumped_mass[i])
            .fold(0.0, f64::max);
        assert_relative_eq!(worst, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn constant_vacuum_field_is_unchanged() {
        let sim = square(5, UniformMaterials::vacuum());
        let u = vec![MomentState::new(1.0, [0.1, 0.2]); sim.coeffs.n_nodes()];
        let dt = compute_dt(&sim.coeffs, 0.5).unwrap();
        for scheme in [Scheme::LowOrder, Scheme::Mcl] {
            let out = heun_step(&u, dt, &sim.coeffs, scheme).unwrap();
            for s in &out {
                assert!((*s - u[0]).max_abs() < 1e-14);
            }
        }
    }

    #[test]
    fn pure_absorption_follows_imex_decay() {
        let sigma = 3.0;
        let sim = square(4, UniformMaterials { sigma_a: sigma, ..UniformMaterials::vacuum() });
        let u = vec![MomentState::isotropic(1.0); sim.coeffs.n_nodes()];
        let dt = compute_dt(&sim.coeffs, 0.5).unwrap();
        let g = 1.0 / (1.0 + dt * sigma);
        let expected = 0.5 * (1.0 + g * g);
        for scheme in [Scheme::LowOrder, Scheme::Mcl] {
            let out = heun_step(&u, dt, &sim.coeffs, scheme).unwrap();
            for s in &out {
                assert_relative_eq!(s.psi0, expected, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn schemes_agree_without_antidiffusion() {
        // Any constant field has zero raw fluxes, also with reaction and sources.
        let mat = UniformMaterials { sigma_a: 1.0, sigma_s: 2.0, source: MomentState::new(1.0, [0.5, 0.0]) };
        let sim = square(4, mat);
        let u = vec![MomentState::new(0.5, [0.1, -0.1]); sim.coeffs.n_nodes()];
        let dt = compute_dt(&sim.coeffs, 0.7).unwrap();
        let a = heun_step(&u, dt, &sim.coeffs, Scheme::LowOrder).unwrap();
        let b = heun_step(&u, dt, &sim.coeffs, Scheme::Mcl).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((*x - *y).max_abs() < 1e-14);
        }
    }

    #[test]
    fn transient_lands_on_final_time() {
        let sim = square(4, UniformMaterials::vacuum());
        let u0 = sim.interpolate(|x| MomentState::isotropic(1.0 + x[0]));
        let opts = TransientOptions { t_final: 0.1234, cfl: 0.5, scheme: Scheme::Mcl };
        let mut seen = 0;
        let st = sim
            .run_transient(u0, &opts, |_| {
                seen += 1;
                Ok(())
            })
            .unwrap();
        assert_eq!(st.t, 0.1234);
        assert_eq!(seen, st.step + 1);
        assert!(st.stats.fields_checked > st.step);
    }

    #[test]
    fn converged_field_stops_immediately() {
        let sim = square(4, UniformMaterials::vacuum());
        let u0 = vec![MomentState::isotropic(1.0); sim.coeffs.n_nodes()];
        let st = sim.run_steady(u0, &SteadyOptions::default(), |_| Ok(())).unwrap();
        assert!(st.converged);
        assert_eq!(st.step, 0);
        assert_eq!(st.residual_history.len(), 1);
        assert!(st.residual_history[0].residual_l2 <= 1e-8);
    }

    #[test]
    fn steady_cap_reports_non_convergence() {
        let mat = UniformMaterials { sigma_a: 1.0, sigma_s: 0.0, source: MomentState::isotropic(1.0) };
        let sim = square(4, mat);
        let u0 = vec![MomentState::isotropic(1e-10); sim.coeffs.n_nodes()];
        let opts = SteadyOptions { max_steps: 3, ..SteadyOptions::default() };
        let st = sim.run_steady(u0, &opts, |_| Ok(())).unwrap();
        assert!(!st.converged);
        assert_eq!(st.step, 3);
        assert_eq!(st.residual_history.len(), 4);
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("low".parse::<Scheme>().unwrap(), Scheme::LowOrder);
        assert_eq!("mcl".parse::<Scheme>().unwrap(), Scheme::Mcl);
        assert!("weno".parse::<Scheme>().is_err());
        assert_eq!(Scheme::Mcl.to_string(), "mcl");
    }
}
