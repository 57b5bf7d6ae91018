//! Benchmark problems: line source, flash, homogeneous disk and lattice.

use std::fmt;
use std::str::FromStr;

use crate::error::{M1Error, Result};
use crate::fem::MaterialFields;
use crate::m1::MomentState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourceKind {
    #[default]
    Isotropic,
    /// Collimated beam pointing in the negative y direction.
    Anisotropic,
}

impl FromStr for SourceKind {
    type Err = M1Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isotropic" => Ok(SourceKind::Isotropic),
            "anisotropic" => Ok(SourceKind::Anisotropic),
            other => Err(M1Error::Config(format!(
                "unknown source kind '{other}' (expected isotropic or anisotropic)"
            ))),
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceKind::Isotropic => "isotropic",
            SourceKind::Anisotropic => "anisotropic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    LineSource,
    Flash,
    HomogeneousDisk,
    Lattice(SourceKind),
}

impl ScenarioKind {
    pub const NAMES: [&'static str; 4] = ["line_source", "flash", "homogeneous_disk", "lattice"];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::LineSource => "line_source",
            ScenarioKind::Flash => "flash",
            ScenarioKind::HomogeneousDisk => "homogeneous_disk",
            ScenarioKind::Lattice(_) => "lattice",
        }
    }

    /// Parses a scenario name; `source` only matters for the lattice.
    pub fn parse(name: &str, source: SourceKind) -> Result<Self> {
        match name {
            "line_source" => Ok(ScenarioKind::LineSource),
            "flash" => Ok(ScenarioKind::Flash),
            "homogeneous_disk" | "disk" => Ok(ScenarioKind::HomogeneousDisk),
            "lattice" => Ok(ScenarioKind::Lattice(source)),
            other => Err(M1Error::Config(format!(
                "unknown scenario '{other}' (valid: {})",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

/// How the domain boundary is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Radiation never reaches the boundary before the final time.
    NoneNeeded,
    /// Exterior state equal to the interior trace.
    DoNothing,
}

/// A benchmark definition. All numeric parameters are public and may be
/// overridden through [`Scenario::set_param`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub boundary: BoundaryMode,
    pub t_final: f64,
    pub cfl: f64,
    pub steady_cfl: f64,
    /// Absorption inside the absorbing region (disk or lattice blocks).
    pub sigma_a: f64,
    /// Scattering of the lattice background medium.
    pub sigma_s: f64,
    /// Source strength `q⁽⁰⁾` inside the source region.
    pub source: f64,
    /// Radius of the flash pulse or the radiating disk.
    pub radius: f64,
    /// Width parameter of the line-source Gaussian.
    pub theta: f64,
    /// Density floor of the initial condition.
    pub floor: f64,
    /// Flux ratio of the flash pulse, directed along +x.
    pub flux_ratio: f64,
}

impl Scenario {
    pub fn line_source() -> Self {
        Self {
            kind: ScenarioKind::LineSource,
            lower: [-0.5, -0.5],
            upper: [0.5, 0.5],
            boundary: BoundaryMode::NoneNeeded,
            t_final: 0.45,
            cfl: 0.5,
            steady_cfl: 0.9,
            sigma_a: 0.0,
            sigma_s: 0.0,
            source: 0.0,
            radius: 0.0,
            theta: 0.02,
            floor: 1e-4,
            flux_ratio: 0.0,
        }
    }

    pub fn flash() -> Self {
        Self {
            kind: ScenarioKind::Flash,
            lower: [-10.0, -10.0],
            upper: [10.0, 10.0],
            boundary: BoundaryMode::NoneNeeded,
            t_final: 6.0,
            radius: 0.5,
            floor: 1e-10,
            flux_ratio: 0.9,
            ..Self::line_source()
        }
    }

    pub fn homogeneous_disk() -> Self {
        Self {
            kind: ScenarioKind::HomogeneousDisk,
            lower: [-5.0, -5.0],
            upper: [5.0, 5.0],
            boundary: BoundaryMode::DoNothing,
            t_final: 3.0,
            sigma_a: 10.0,
            source: 1.0,
            radius: 1.0,
            floor: 1e-10,
            ..Self::line_source()
        }
    }

    pub fn lattice(source_kind: SourceKind) -> Self {
        Self {
            kind: ScenarioKind::Lattice(source_kind),
            lower: [0.0, 0.0],
            upper: [7.0, 7.0],
            boundary: BoundaryMode::DoNothing,
            t_final: 3.2,
            sigma_a: 10.0,
            sigma_s: 1.0,
            source: 1.0,
            floor: 1e-10,
            ..Self::line_source()
        }
    }

    pub fn from_kind(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::LineSource => Self::line_source(),
            ScenarioKind::Flash => Self::flash(),
            ScenarioKind::HomogeneousDisk => Self::homogeneous_disk(),
            ScenarioKind::Lattice(s) => Self::lattice(s),
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Label including the lattice source variant.
    pub fn label(&self) -> String {
        match self.kind {
            ScenarioKind::Lattice(s) => format!("lattice_{s}"),
            k => k.name().to_string(),
        }
    }

    /// Whether the problem has a nonzero source, which steady runs require.
    pub fn has_forcing(&self) -> bool {
        matches!(self.kind, ScenarioKind::HomogeneousDisk | ScenarioKind::Lattice(_)) && self.source > 0.0
    }

    /// Keys accepted by [`Scenario::set_param`] for this scenario.
    pub fn param_keys(&self) -> &'static [&'static str] {
        match self.kind {
            ScenarioKind::LineSource => &["x_min", "x_max", "y_min", "y_max", "t_final", "cfl", "theta", "floor"],
            ScenarioKind::Flash => {
                &["x_min", "x_max", "y_min", "y_max", "t_final", "cfl", "radius", "floor", "flux_ratio"]
            }
            ScenarioKind::HomogeneousDisk => &[
                "x_min", "x_max", "y_min", "y_max", "t_final", "cfl", "steady_cfl", "sigma_a", "source_strength",
                "radius", "floor",
            ],
            ScenarioKind::Lattice(_) => &[
                "x_min", "x_max", "y_min", "y_max", "t_final", "cfl", "steady_cfl", "sigma_a", "sigma_s", "source_strength",
                "floor",
            ],
        }
    }

    pub fn set_param(&mut self, key: &str, value: f64) -> Result<()> {
        if !self.param_keys().contains(&key) {
            return Err(M1Error::Config(format!(
                "parameter '{key}' does not apply to scenario {} (valid: {})",
                self.name(),
                self.param_keys().join(", ")
            )));
        }
        if !value.is_finite() {
            return Err(M1Error::Config(format!("parameter '{key}' must be finite, got {value}")));
        }
        let slot = match key {
            "x_min" => &mut self.lower[0],
            "x_max" => &mut self.upper[0],
            "y_min" => &mut self.lower[1],
            "y_max" => &mut self.upper[1],
            "t_final" => &mut self.t_final,
            "cfl" => &mut self.cfl,
            "steady_cfl" => &mut self.steady_cfl,
            "sigma_a" => &mut self.sigma_a,
            "sigma_s" => &mut self.sigma_s,
            "source_strength" => &mut self.source,
            "radius" => &mut self.radius,
            "theta" => &mut self.theta,
            "floor" => &mut self.floor,
            "flux_ratio" => &mut self.flux_ratio,
            _ => unreachable!(),
        };
        *slot = value;
        self.validate()
    }

    /// Checks that materials are nonnegative, the source is weakly
    /// admissible and the initial condition strictly realizable.
    pub fn validate(&self) -> Result<()> {
        for k in 0..2 {
            if !(self.upper[k] > self.lower[k]) {
                return Err(M1Error::Config(format!("empty domain along axis {k}")));
            }
        }
        if self.sigma_a < 0.0 || self.sigma_s < 0.0 || self.source < 0.0 {
            return Err(M1Error::Config("material coefficients and source must be nonnegative".into()));
        }
        if !(self.floor > 0.0) {
            return Err(M1Error::Config("initial density floor must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.flux_ratio) {
            return Err(M1Error::Config("flash flux ratio must lie in [0, 1)".into()));
        }
        if !(self.t_final > 0.0) {
            return Err(M1Error::Config("final time must be positive".into()));
        }
        for c in [self.cfl, self.steady_cfl] {
            if !(c > 0.0 && c <= 1.0) {
                return Err(M1Error::Config(format!("CFL number must lie in (0, 1], got {c}")));
            }
        }
        if self.kind == ScenarioKind::LineSource && !(self.theta > 0.0) {
            return Err(M1Error::Config("theta must be positive".into()));
        }
        Ok(())
    }

    pub fn initial_state(&self, x: &[f64; 2]) -> MomentState<2> {
        let r2 = x[0] * x[0] + x[1] * x[1];
        match self.kind {
            ScenarioKind::LineSource => {
                let g = (-10.0 * r2 / (self.theta * self.theta)).exp();
                MomentState::isotropic(g.max(self.floor))
            }
            ScenarioKind::Flash if r2 <= self.radius * self.radius => {
                MomentState::new(1.0, [self.flux_ratio, 0.0])
            }
            _ => MomentState::isotropic(self.floor),
        }
    }

    /// Whether `x` lies in the absorbing region.
    pub fn is_absorbing(&self, x: &[f64; 2]) -> bool {
        match self.kind {
            ScenarioKind::HomogeneousDisk => in_disk(x, self.radius),
            ScenarioKind::Lattice(_) => in_lattice_absorber(x),
            _ => false,
        }
    }

    /// Whether `x` lies in the source region.
    pub fn is_source(&self, x: &[f64; 2]) -> bool {
        match self.kind {
            ScenarioKind::HomogeneousDisk => in_disk(x, self.radius),
            ScenarioKind::Lattice(_) => in_interval(x[0], 3.0, 4.0) && in_interval(x[1], 3.0, 4.0),
            _ => false,
        }
    }
}

fn in_disk(x: &[f64; 2], radius: f64) -> bool {
    x[0] * x[0] + x[1] * x[1] <= radius * radius
}

fn in_interval(v: f64, a: f64, b: f64) -> bool {
    a <= v && v <= b
}

fn in_any(v: f64, intervals: &[(f64, f64)]) -> bool {
    intervals.iter().any(|&(a, b)| in_interval(v, a, b))
}

/// Checkerboard absorber of the lattice problem (closed sets):
/// `([1,2] ∪ [5,6]) × ([1,2] ∪ [3,4] ∪ [5,6])`,
/// `([2,3] ∪ [4,5]) × ([2,3] ∪ [4,5])` and `[3,4] × [1,2]`.
pub fn in_lattice_absorber(x: &[f64; 2]) -> bool {
    let (px, py) = (x[0], x[1]);
    (in_any(px, &[(1.0, 2.0), (5.0, 6.0)]) && in_any(py, &[(1.0, 2.0), (3.0, 4.0), (5.0, 6.0)]))
        || (in_any(px, &[(2.0, 3.0), (4.0, 5.0)]) && in_any(py, &[(2.0, 3.0), (4.0, 5.0)]))
        || (in_interval(px, 3.0, 4.0) && in_interval(py, 1.0, 2.0))
}

impl MaterialFields<2> for Scenario {
    fn sigma_a(&self, x: &[f64; 2]) -> f64 {
        if self.is_absorbing(x) {
            self.sigma_a
        } else {
            0.0
        }
    }

    fn sigma_s(&self, x: &[f64; 2]) -> f64 {
        match self.kind {
            ScenarioKind::Lattice(_) if !self.is_absorbing(x) => self.sigma_s,
            _ => 0.0,
        }
    }

    fn source(&self, x: &[f64; 2]) -> MomentState<2> {
        if !self.is_source(x) {
            return MomentState::zero();
        }
        match self.kind {
            ScenarioKind::Lattice(SourceKind::Anisotropic) => MomentState::new(self.source, [0.0, -self.source]),
            _ => MomentState::isotropic(self.source),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_coefficients;
    use crate::mesh::Mesh;

    #[test]
    fn line_source_initial_condition() {
        let s = Scenario::line_source();
        assert_eq!(s.initial_state(&[0.0, 0.0]).psi0, 1.0);
        assert_eq!(s.initial_state(&[0.4, 0.4]).psi0, 1e-4);
        assert!(s.initial_state(&[0.01, 0.0]).is_realizable(true));
        assert_eq!(s.t_final, 0.45);
    }

    #[test]
    fn flash_initial_condition() {
        let s = Scenario::flash();
        let inside = s.initial_state(&[0.1, 0.2]);
        assert!((inside.flux_ratio() - 0.9).abs() < 1e-15);
        let edge = s.initial_state(&[0.5, 0.0]);
        assert_eq!(edge.psi0, 1.0);
        let out = s.initial_state(&[3.0, 0.0]);
        assert_eq!(out, MomentState::new(1e-10, [0.0, 0.0]));
    }

    #[test]
    fn disk_materials() {
        let s = Scenario::homogeneous_disk();
        assert_eq!(s.sigma_a(&[0.0, 0.0]), 10.0);
        assert_eq!(s.source(&[0.0, 0.0]).psi0, 1.0);
        assert_eq!(s.sigma_a(&[3.0, 3.0]), 0.0);
        assert_eq!(s.source(&[3.0, 3.0]).psi0, 0.0);
        assert_eq!(s.sigma_a(&[1.0, 0.0]), 10.0);
        assert_eq!(s.sigma_s(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn lattice_materials() {
        let s = Scenario::lattice(SourceKind::Isotropic);
        assert_eq!(s.sigma_a(&[1.5, 1.5]), 10.0);
        assert_eq!(s.sigma_s(&[1.5, 1.5]), 0.0);
        assert_eq!(s.sigma_a(&[3.5, 3.5]), 0.0);
        assert_eq!(s.sigma_s(&[3.5, 3.5]), 1.0);
        assert_eq!(s.source(&[3.5, 3.5]), MomentState::isotropic(1.0));
        let a = Scenario::lattice(SourceKind::Anisotropic);
        let q = a.source(&[3.5, 3.5]);
        assert_eq!(q, MomentState::new(1.0, [0.0, -1.0]));
        assert!(q.is_realizable(false) && !q.is_realizable(true));
    }

    #[test]
    fn absorber_cells_match_table() {
        // row y in 0..7 from the bottom, column x from the left
        let table = [
            "0000000", //
            "0101010", //
            "0010100", //
            "0100010", //
            "0010100", //
            "0100010", //
            "0000000",
        ];
        let mut count = 0;
        for (y, row) in table.iter().enumerate() {
            for (x, c) in row.chars().enumerate() {
                let centre = [x as f64 + 0.5, y as f64 + 0.5];
                let expected = c == '1';
                assert_eq!(in_lattice_absorber(&centre), expected, "cell ({x}, {y})");
                count += expected as usize;
            }
        }
        assert_eq!(count, 11);
    }

    #[test]
    fn absorber_count_by_enumeration() {
        let n = (0..49).filter(|c| in_lattice_absorber(&[(c % 7) as f64 + 0.5, (c / 7) as f64 + 0.5])).count();
        assert_eq!(n, 11);
        // shared edges and corners belong to the closed set
        assert!(in_lattice_absorber(&[2.0, 2.5]));
        assert!(in_lattice_absorber(&[1.0, 1.0]));
        assert!(!in_lattice_absorber(&[0.5, 0.5]));
    }

    #[test]
    fn assembled_sources_are_admissible() {
        for s in [
            Scenario::line_source(),
            Scenario::flash(),
            Scenario::homogeneous_disk(),
            Scenario::lattice(SourceKind::Isotropic),
            Scenario::lattice(SourceKind::Anisotropic),
        ] {
            let mesh = Mesh::with_nodes(s.lower, s.upper, [22, 22]).unwrap();
            let c = assemble_coefficients(&mesh, &s).unwrap();
            for si in &c.source {
                assert!(si.psi0 >= 0.0);
                assert!(si.psi1_norm() <= si.psi0 * (1.0 + 1e-14));
            }
            for i in 0..mesh.n_nodes() {
                assert!(s.initial_state(&mesh.node_coords(i)).is_realizable(true));
            }
        }
    }

    #[test]
    fn parameter_overrides() {
        let mut s = Scenario::line_source();
        s.set_param("theta", 0.05).unwrap();
        assert_eq!(s.theta, 0.05);
        assert!(s.set_param("sigma_s", 1.0).is_err());
        assert!(s.set_param("cfl", 2.0).is_err());
        let mut l = Scenario::lattice(SourceKind::Isotropic);
        l.set_param("sigma_a", 5.0).unwrap();
        assert_eq!(l.sigma_a(&[1.5, 1.5]), 5.0);
    }

    #[test]
    fn names_round_trip() {
        for n in ScenarioKind::NAMES {
            assert_eq!(ScenarioKind::parse(n, SourceKind::Isotropic).unwrap().name(), n);
        }
        let err = ScenarioKind::parse("torus", SourceKind::Isotropic).unwrap_err().to_string();
        assert!(err.contains("line_source") && err.contains("lattice"));
        assert!(Scenario::lattice(SourceKind::Isotropic).has_forcing());
        assert!(!Scenario::flash().has_forcing());
    }
}
