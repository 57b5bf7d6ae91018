//! Assembly of the continuous Galerkin coefficients on a uniform mesh.
//!
//! Every element integral uses the tensor-product two-point Gauss rule, which
//! is exact for the polynomial integrands `φ_i φ_j` and `φ_i ∂φ_j`. Material
//! coefficients and sources are sampled pointwise at the same quadrature points.
//!
//! Couplings are stored once per undirected edge `(i, j)` with `i < j`; the
//! adjacency table lists for each node the incident edges in ascending order of
//! the neighbor index.

use crate::error::{M1Error, Result};
use crate::m1::{flux, lax_friedrichs_flux, MomentState, LAMBDA_MAX};
use crate::mesh::Mesh;

/// Spatially varying coefficients `σ_a`, `σ_s` and source `q`.
pub trait MaterialFields<const D: usize> {
    fn sigma_a(&self, x: &[f64; D]) -> f64;
    fn sigma_s(&self, x: &[f64; D]) -> f64;
    fn source(&self, x: &[f64; D]) -> MomentState<D>;
}

/// Spatially constant materials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformMaterials<const D: usize> {
    pub sigma_a: f64,
    pub sigma_s: f64,
    pub source: MomentState<D>,
}

impl<const D: usize> UniformMaterials<D> {
    pub fn vacuum() -> Self {
        Self { sigma_a: 0.0, sigma_s: 0.0, source: MomentState::zero() }
    }
}

impl<const D: usize> MaterialFields<D> for UniformMaterials<D> {
    fn sigma_a(&self, _: &[f64; D]) -> f64 {
        self.sigma_a
    }
    fn sigma_s(&self, _: &[f64; D]) -> f64 {
        self.sigma_s
    }
    fn source(&self, _: &[f64; D]) -> MomentState<D> {
        self.source
    }
}

/// Coupling between nodes `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge<const D: usize> {
    pub i: usize,
    pub j: usize,
    /// Consistent mass entry `m_ij`.
    pub mass: f64,
    /// `c_ij = ∫ φ_i ∇φ_j`
    pub c_ij: [f64; D],
    /// `c_ji = ∫ φ_j ∇φ_i`
    pub c_ji: [f64; D],
    /// Graph viscosity `d_ij = λ_max max(|c_ij|, |c_ji|)`.
    pub viscosity: f64,
    /// `∫ φ_i φ_j σ_a`
    pub mass_sigma_a: f64,
    /// `∫ φ_i φ_j σ_t`
    pub mass_sigma_t: f64,
}

impl<const D: usize> Edge<D> {
    /// Consistent reactive mass for component `k` (σ_a for `k = 0`, σ_t otherwise).
    pub fn mass_sigma(&self, k: usize) -> f64 {
        if k == 0 {
            self.mass_sigma_a
        } else {
            self.mass_sigma_t
        }
    }
}

/// One entry of a node's adjacency list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub edge: usize,
    pub neighbor: usize,
    /// The node is `edge.i` (the smaller index).
    pub forward: bool,
}

/// Lumped boundary weight `∫_Γ φ_i` on one box face with outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFacet<const D: usize> {
    pub weight: f64,
    pub normal: [f64; D],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryNode<const D: usize> {
    pub node: usize,
    pub facets: Vec<BoundaryFacet<D>>,
}

#[derive(Debug, Clone)]
pub struct FemCoefficients<const D: usize> {
    /// `m_i = Σ_j m_ij`
    pub lumped_mass: Vec<f64>,
    /// Diagonal consistent mass `m_ii`.
    pub mass_diag: Vec<f64>,
    /// `m_i^{σa} = ∫ φ_i σ_a`
    pub lumped_sigma_a: Vec<f64>,
    /// `m_i^{σt} = ∫ φ_i (σ_a + σ_s)`
    pub lumped_sigma_t: Vec<f64>,
    /// `s_i = ∫ φ_i q`
    pub source: Vec<MomentState<D>>,
    /// Diagonal reactive masses `m_ii^{σa}`, `m_ii^{σt}`.
    pub mass_sigma_diag: Vec<(f64, f64)>,
    pub edges: Vec<Edge<D>>,
    /// `Σ_{j≠i} d_ij`
    pub viscosity_sum: Vec<f64>,
    pub boundary: Vec<BoundaryNode<D>>,
    offsets: Vec<usize>,
    incidences: Vec<Incidence>,
}

impl<const D: usize> FemCoefficients<D> {
    pub fn n_nodes(&self) -> usize {
        self.lumped_mass.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Incident edges of node `i`, sorted by neighbor index.
    pub fn incident(&self, i: usize) -> &[Incidence] {
        &self.incidences[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.incident(i).iter().find(|inc| inc.neighbor == j).map(|inc| inc.edge)
    }

    /// `c_ij` for an ordered pair of distinct neighbors.
    pub fn c(&self, i: usize, j: usize) -> Option<[f64; D]> {
        let e = &self.edges[self.edge_index(i, j)?];
        Some(if e.i == i { e.c_ij } else { e.c_ji })
    }

    /// Lumped reactive mass for component `k`.
    pub fn lumped_sigma(&self, i: usize, k: usize) -> f64 {
        if k == 0 {
            self.lumped_sigma_a[i]
        } else {
            self.lumped_sigma_t[i]
        }
    }

    /// Consistent-mass inner product `Σ_ij a_i m_ij b_j` of two nodal scalars.
    pub fn mass_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.n_nodes() {
            sum += self.mass_diag[i] * a[i] * b[i];
        }
        for e in &self.edges {
            sum += e.mass * (a[e.i] * b[e.j] + a[e.j] * b[e.i]);
        }
        sum
    }
}

/// Two-point Gauss rule on `[0, 1]`.
const GAUSS_POINTS: [f64; 2] = [
    0.5 - 0.5 / 1.732_050_807_568_877_2,
    0.5 + 0.5 / 1.732_050_807_568_877_2,
];
const GAUSS_WEIGHT: f64 = 0.5;

/// Assembles all scheme coefficients for `mesh` and `materials`.
pub fn assemble_coefficients<const D: usize, M: MaterialFields<D> + ?Sized>(
    mesh: &Mesh<D>,
    materials: &M,
) -> Result<FemCoefficients<D>> {
    let n = mesh.n_nodes();

    // Sparsity: all pairs sharing a cell.
    let mut offsets = Vec::with_capacity(n + 1);
    let mut incidences = Vec::new();
    let mut edges: Vec<Edge<D>> = Vec::new();
    let mut upper_start = Vec::with_capacity(n + 1);
    let neighbor_lists: Vec<Vec<usize>> = (0..n).map(|i| mesh.neighbors(i)).collect();
    for (i, nbs) in neighbor_lists.iter().enumerate() {
        upper_start.push(edges.len());
        for &j in nbs.iter().filter(|&&j| j > i) {
            edges.push(Edge {
                i,
                j,
                mass: 0.0,
                c_ij: [0.0; D],
                c_ji: [0.0; D],
                viscosity: 0.0,
                mass_sigma_a: 0.0,
                mass_sigma_t: 0.0,
            });
        }
    }
    upper_start.push(edges.len());
    for (i, nbs) in neighbor_lists.iter().enumerate() {
        offsets.push(incidences.len());
        for &j in nbs {
            incidences.push(Incidence { edge: find_edge(&upper_start, &edges, i, j), neighbor: j, forward: i < j });
        }
    }
    offsets.push(incidences.len());
    drop(neighbor_lists);

    let mut lumped_mass = vec![0.0; n];
    let mut mass_diag = vec![0.0; n];
    let mut lumped_sigma_a = vec![0.0; n];
    let mut lumped_sigma_t = vec![0.0; n];
    let mut mass_sigma_diag = vec![(0.0, 0.0); n];
    let mut source = vec![MomentState::<D>::zero(); n];

    let h = mesh.spacing();
    let nloc = mesh.nodes_per_cell();
    let nq = 1usize << D;
    let cell_volume: f64 = h.iter().product();

    // Reference basis values and physical gradients at each quadrature point.
    let mut phi = vec![vec![0.0; nloc]; nq];
    let mut grad = vec![vec![[0.0; D]; nloc]; nq];
    let mut xi_q = vec![[0.0; D]; nq];
    for q in 0..nq {
        for k in 0..D {
            xi_q[q][k] = GAUSS_POINTS[(q >> k) & 1];
        }
        for a in 0..nloc {
            let mut val = 1.0;
            for k in 0..D {
                val *= hat(a, k, xi_q[q][k]);
            }
            phi[q][a] = val;
            for k in 0..D {
                let mut g = if (a >> k) & 1 == 1 { 1.0 } else { -1.0 } / h[k];
                for l in (0..D).filter(|&l| l != k) {
                    g *= hat(a, l, xi_q[q][l]);
                }
                grad[q][a][k] = g;
            }
        }
    }
    let wq = GAUSS_WEIGHT.powi(D as i32) * cell_volume;

    let mut local_nodes = vec![0usize; nloc];
    let mut local_edge = vec![vec![usize::MAX; nloc]; nloc];
    for cell in 0..mesh.n_cells() {
        for (a, slot) in local_nodes.iter_mut().enumerate() {
            *slot = mesh.cell_node(cell, a);
        }
        for a in 0..nloc {
            for b in 0..nloc {
                if a != b {
                    local_edge[a][b] = find_edge(&upper_start, &edges, local_nodes[a], local_nodes[b]);
                }
            }
        }
        let origin = mesh.cell_origin(cell);
        for q in 0..nq {
            let mut x = origin;
            for k in 0..D {
                x[k] += xi_q[q][k] * h[k];
            }
            let sa = materials.sigma_a(&x);
            let ss = materials.sigma_s(&x);
            let qv = materials.source(&x);
            if !(sa >= 0.0 && ss >= 0.0) {
                return Err(M1Error::Config(format!(
                    "negative or undefined cross section at {x:?}: sigma_a = {sa}, sigma_s = {ss}"
                )));
            }
            if !qv.is_realizable(false) {
                return Err(M1Error::Config(format!(
                    "source {qv:?} at {x:?} is not an admissible moment vector"
                )));
            }
            let st = sa + ss;
            for a in 0..nloc {
                let ia = local_nodes[a];
                let wa = wq * phi[q][a];
                source[ia] += wa * qv;
                for b in 0..nloc {
                    let mab = wa * phi[q][b];
                    lumped_mass[ia] += mab;
                    lumped_sigma_a[ia] += mab * sa;
                    lumped_sigma_t[ia] += mab * st;
                    if a == b {
                        mass_diag[ia] += mab;
                        mass_sigma_diag[ia].0 += mab * sa;
                        mass_sigma_diag[ia].1 += mab * st;
                        continue;
                    }
                    let e = &mut edges[local_edge[a][b]];
                    let forward = ia < local_nodes[b];
                    let c = if forward { &mut e.c_ij } else { &mut e.c_ji };
                    for k in 0..D {
                        c[k] += wa * grad[q][b][k];
                    }
                    if forward {
                        e.mass += mab;
                        e.mass_sigma_a += mab * sa;
                        e.mass_sigma_t += mab * st;
                    }
                }
            }
        }
    }

    let mut viscosity_sum = vec![0.0; n];
    for e in edges.iter_mut() {
        e.viscosity = LAMBDA_MAX * norm(&e.c_ij).max(norm(&e.c_ji));
        viscosity_sum[e.i] += e.viscosity;
        viscosity_sum[e.j] += e.viscosity;
    }

    let boundary = assemble_boundary(mesh);

    Ok(FemCoefficients {
        lumped_mass,
        mass_diag,
        lumped_sigma_a,
        lumped_sigma_t,
        source,
        mass_sigma_diag,
        edges,
        viscosity_sum,
        boundary,
        offsets,
        incidences,
    })
}

fn find_edge<const D: usize>(upper_start: &[usize], edges: &[Edge<D>], i: usize, j: usize) -> usize {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    (upper_start[lo]..upper_start[lo + 1])
        .find(|&e| edges[e].j == hi)
        .expect("stencil contains every pair sharing a cell")
}

/// 1D hat function of local vertex `a` along axis `k` at reference coordinate `t`.
#[inline]
fn hat(a: usize, k: usize, t: f64) -> f64 {
    if (a >> k) & 1 == 1 {
        t
    } else {
        1.0 - t
    }
}

fn norm<const D: usize>(v: &[f64; D]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `∫ φ` of 1D grid line `i` among `cells + 1` lines, by two-point Gauss per segment.
fn line_weight(i: usize, cells: usize, h: f64) -> f64 {
    let segment: f64 = GAUSS_POINTS.iter().map(|&t| GAUSS_WEIGHT * h * t).sum();
    let mut w = 0.0;
    if i > 0 {
        w += segment;
    }
    if i < cells {
        w += segment;
    }
    w
}

fn assemble_boundary<const D: usize>(mesh: &Mesh<D>) -> Vec<BoundaryNode<D>> {
    let cells = mesh.cells_per_axis();
    let h = mesh.spacing();
    mesh.boundary_nodes()
        .into_iter()
        .map(|node| {
            let idx = mesh.node_multi_index(node);
            let facets = mesh
                .boundary_normals(node)
                .into_iter()
                .map(|normal| {
                    let axis = normal.iter().position(|&c| c != 0.0).unwrap();
                    let weight = (0..D)
                        .filter(|&l| l != axis)
                        .map(|l| line_weight(idx[l], cells[l], h[l]))
                        .product();
                    BoundaryFacet { weight, normal }
                })
                .collect();
            BoundaryNode { node, facets }
        })
        .collect()
}

/// Lumped boundary term `Σ_facets w (f(u_i)·n − F(u_i, û_i; n))`.
///
/// With the do-nothing choice `û_i = u_i` this vanishes identically.
pub fn boundary_term<const D: usize>(
    u: &MomentState<D>,
    u_hat: &MomentState<D>,
    node: &BoundaryNode<D>,
) -> Result<MomentState<D>> {
    if node.facets.is_empty() {
        return Err(M1Error::Contract(format!(
            "boundary term requested at node {} which has no boundary facets",
            node.node
        )));
    }
    let f = flux(u)?;
    let mut out = MomentState::zero();
    for facet in &node.facets {
        let lf = lax_friedrichs_flux(u, u_hat, &facet.normal)?;
        out += facet.weight * (f.dot(&facet.normal) - lf);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn interval(cells: usize, len: f64) -> FemCoefficients<1> {
        let mesh = Mesh::uniform([0.0], [len], [cells]).unwrap();
        assemble_coefficients(&mesh, &UniformMaterials::vacuum()).unwrap()
    }

    #[test]
    fn p1_interval_matches_analytic_integrals() {
        let h = 0.25;
        let fc = interval(4, 1.0);
        for i in 1..4 {
            assert_relative_eq!(fc.lumped_mass[i], h, epsilon = 1e-15);
            assert_relative_eq!(fc.mass_diag[i], 2.0 * h / 3.0, epsilon = 1e-15);
            assert_relative_eq!(fc.c(i, i + 1).unwrap()[0], 0.5, epsilon = 1e-15);
            assert_relative_eq!(fc.c(i, i - 1).unwrap()[0], -0.5, epsilon = 1e-15);
        }
        assert_relative_eq!(fc.lumped_mass[0], h / 2.0, epsilon = 1e-15);
        for e in &fc.edges {
            assert_relative_eq!(e.mass, h / 6.0, epsilon = 1e-15);
            assert_relative_eq!(e.viscosity, 0.5, epsilon = 1e-15);
        }
        assert_eq!(fc.n_edges(), 4);
    }

    #[test]
    fn q1_row_sums_and_antisymmetry() {
        let mesh = Mesh::uniform([-1.0, 0.0], [2.0, 1.5], [6, 5]).unwrap();
        let fc = assemble_coefficients(&mesh, &UniformMaterials::vacuum()).unwrap();
        for i in 0..fc.n_nodes() {
            let mut row = fc.mass_diag[i];
            let mut csum = [0.0; 2];
            for inc in fc.incident(i) {
                row += fc.edges[inc.edge].mass;
                let c = fc.c(i, inc.neighbor).unwrap();
                csum[0] += c[0];
                csum[1] += c[1];
            }
            assert_relative_eq!(row, fc.lumped_mass[i], max_relative = 1e-12);
            assert!(fc.lumped_mass[i] > 0.0);
            // Σ_j c_ij = ∫φ_i ∇1 = 0 needs c_ii, which is zero only in the interior.
            if !mesh.is_boundary(i) {
                assert!(csum[0].abs() < 1e-14 && csum[1].abs() < 1e-14);
                assert_eq!(fc.incident(i).len(), 8);
            }
        }
        for e in &fc.edges {
            assert!(e.viscosity > 0.0);
            if !mesh.is_boundary(e.i) || !mesh.is_boundary(e.j) {
                for k in 0..2 {
                    assert_relative_eq!(e.c_ij[k], -e.c_ji[k], epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn q1_interior_values() {
        let h = 0.5;
        let mesh = Mesh::uniform([0.0, 0.0], [2.0, 2.0], [4, 4]).unwrap();
        let fc = assemble_coefficients(&mesh, &UniformMaterials::vacuum()).unwrap();
        let i = mesh.node_index([2, 2]);
        let right = mesh.node_index([3, 2]);
        let diag = mesh.node_index([3, 3]);
        let c = fc.c(i, right).unwrap();
        assert_relative_eq!(c[0], h / 3.0, epsilon = 1e-15);
        assert!(c[1].abs() < 1e-16);
        let c = fc.c(i, diag).unwrap();
        assert_relative_eq!(c[0], h / 12.0, epsilon = 1e-15);
        assert_relative_eq!(c[1], h / 12.0, epsilon = 1e-15);
        assert_relative_eq!(fc.lumped_mass[i], h * h, epsilon = 1e-15);
    }

    #[test]
    fn vacuum_has_no_reactive_mass() {
        let mesh = Mesh::uniform([0.0, 0.0], [1.0, 1.0], [3, 3]).unwrap();
        let fc = assemble_coefficients(&mesh, &UniformMaterials::vacuum()).unwrap();
        assert!(fc.lumped_sigma_a.iter().chain(&fc.lumped_sigma_t).all(|&x| x == 0.0));
    }

    #[test]
    fn unit_source_gives_lumped_mass() {
        let mesh = Mesh::uniform([0.0, 0.0], [1.0, 2.0], [3, 4]).unwrap();
        let mat = UniformMaterials {
            sigma_a: 2.0,
            sigma_s: 1.0,
            source: MomentState::isotropic(1.0),
        };
        let fc = assemble_coefficients(&mesh, &mat).unwrap();
        for i in 0..fc.n_nodes() {
            assert_relative_eq!(fc.source[i].psi0, fc.lumped_mass[i], max_relative = 1e-14);
            assert_eq!(fc.source[i].psi1, [0.0, 0.0]);
            assert_relative_eq!(fc.lumped_sigma_a[i], 2.0 * fc.lumped_mass[i], max_relative = 1e-14);
            assert!(fc.lumped_sigma_t[i] >= fc.lumped_sigma_a[i]);
        }
    }

    #[test]
    fn rejects_negative_cross_section() {
        let mesh = Mesh::uniform([0.0], [1.0], [3]).unwrap();
        let mat = UniformMaterials::<1> { sigma_a: -1.0, ..UniformMaterials::vacuum() };
        assert!(matches!(assemble_coefficients(&mesh, &mat), Err(M1Error::Config(_))));
    }

    #[test]
    fn boundary_weights_sum_to_perimeter() {
        let mesh = Mesh::uniform([0.0, 0.0], [3.0, 2.0], [6, 4]).unwrap();
        let fc = assemble_coefficients(&mesh, &UniformMaterials::vacuum()).unwrap();
        let total: f64 = fc.boundary.iter().flat_map(|b| &b.facets).map(|f| f.weight).sum();
        assert_relative_eq!(total, 10.0, epsilon = 1e-13);
        let corner = fc.boundary.iter().find(|b| b.node == 0).unwrap();
        assert_eq!(corner.facets.len(), 2);
    }

    #[test]
    fn do_nothing_boundary_term_vanishes() {
        let mesh = Mesh::uniform([0.0, 0.0], [1.0, 1.0], [2, 2]).unwrap();
        let fc = assemble_coefficients(&mesh, &UniformMaterials::vacuum()).unwrap();
        let u = MomentState::new(1.0, [0.3, 0.1]);
        for b in &fc.boundary {
            assert_eq!(boundary_term(&u, &u, b).unwrap(), MomentState::zero());
            let iso = MomentState::isotropic(1.0);
            assert_eq!(boundary_term(&iso, &iso, b).unwrap(), MomentState::zero());
        }
    }

    #[test]
    fn boundary_term_with_external_state() {
        let node = BoundaryNode { node: 0, facets: vec![BoundaryFacet { weight: 0.7, normal: [1.0] }] };
        let u2 = MomentState::<1>::isotropic(2.0);
        let u1 = MomentState::<1>::isotropic(1.0);
        let f2 = flux(&u2).unwrap().dot(&[1.0]);
        let f1 = flux(&u1).unwrap().dot(&[1.0]);
        let expected = 0.7 * (0.5 * (f2 - f1) - 0.5 * (u2 - u1));
        let got = boundary_term(&u2, &u1, &node).unwrap();
        assert_relative_eq!(got.psi0, expected.psi0, epsilon = 1e-15);
        assert_relative_eq!(got.psi1[0], expected.psi1[0], epsilon = 1e-15);

        let interior = BoundaryNode::<1> { node: 3, facets: vec![] };
        assert!(matches!(boundary_term(&u1, &u1, &interior), Err(M1Error::Contract(_))));
    }
}
