//! Field and log output: ASCII legacy VTK, CSV line-outs, residual history
//! and realizability audit reports.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{M1Error, Result};
use crate::m1::MomentState;
use crate::mesh::Mesh;
use crate::time_loop::{ResidualRecord, RunStats};

pub const RESIDUAL_HEADER: &str = "step,pseudo_time,residual_l2";

/// Formats with 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

/// Renders the legacy VTK structured-points dataset with point arrays
/// `psi0`, `psi1`, `flux_ratio` and `log10_psi0`.
pub fn render_vtk<const D: usize>(mesh: &Mesh<D>, u: &[MomentState<D>], title: &str) -> Result<String> {
    if D > 3 {
        return Err(M1Error::Contract("VTK output supports at most three dimensions".into()));
    }
    if u.len() != mesh.n_nodes() {
        return Err(M1Error::Contract(format!(
            "field has {} values, mesh has {} nodes",
            u.len(),
            mesh.n_nodes()
        )));
    }
    let mut dims = [1usize; 3];
    let mut origin = [0.0; 3];
    let mut spacing = [1.0; 3];
    for k in 0..D {
        dims[k] = mesh.nodes_per_axis()[k];
        origin[k] = mesh.lower()[k];
        spacing[k] = mesh.spacing()[k];
    }
    let title = title.replace('\n', " ");
    let mut s = String::with_capacity(u.len() * 100);
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{title}");
    s.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(s, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2]);
    let _ = writeln!(s, "ORIGIN {} {} {}", num(origin[0]), num(origin[1]), num(origin[2]));
    let _ = writeln!(s, "SPACING {} {} {}", num(spacing[0]), num(spacing[1]), num(spacing[2]));
    let _ = writeln!(s, "POINT_DATA {}", u.len());

    s.push_str("SCALARS psi0 double 1\nLOOKUP_TABLE default\n");
    for st in u {
        let _ = writeln!(s, "{}", num(st.psi0));
    }
    let _ = writeln!(s, "SCALARS psi1 double {D}");
    s.push_str("LOOKUP_TABLE default\n");
    for st in u {
        let row: Vec<String> = st.psi1.iter().map(|&v| num(v)).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s.push_str("SCALARS flux_ratio double 1\nLOOKUP_TABLE default\n");
    for st in u {
        let _ = writeln!(s, "{}", num(st.flux_ratio()));
    }
    s.push_str("SCALARS log10_psi0 double 1\nLOOKUP_TABLE default\n");
    for st in u {
        let _ = writeln!(s, "{}", num(st.psi0.log10()));
    }
    Ok(s)
}

pub fn write_fields<const D: usize>(u: &[MomentState<D>], mesh: &Mesh<D>, path: &Path, title: &str) -> Result<()> {
    let text = render_vtk(mesh, u, title)?;
    write_file(path, &text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialBin {
    /// Bin centre.
    pub r: f64,
    pub psi0: f64,
    pub flux_ratio: f64,
    pub count: usize,
}

/// Arithmetic means of `psi0` and the flux ratio over nodes whose distance to
/// `center` falls in `[k w, (k+1) w)`; empty bins are skipped.
pub fn radial_profile(mesh: &Mesh<2>, u: &[MomentState<2>], center: [f64; 2], width: f64) -> Vec<RadialBin> {
    let mut sums: Vec<(f64, f64, usize)> = Vec::new();
    for (i, st) in u.iter().enumerate() {
        let x = mesh.node_coords(i);
        let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
        let k = (r / width).floor() as usize;
        if k >= sums.len() {
            sums.resize(k + 1, (0.0, 0.0, 0));
        }
        sums[k].0 += st.psi0;
        sums[k].1 += st.flux_ratio();
        sums[k].2 += 1;
    }
    sums.into_iter()
        .enumerate()
        .filter(|(_, s)| s.2 > 0)
        .map(|(k, (p, f, n))| RadialBin {
            r: (k as f64 + 0.5) * width,
            psi0: p / n as f64,
            flux_ratio: f / n as f64,
            count: n,
        })
        .collect()
}

/// Nodes on the horizontal grid line closest to `y`: `(x, psi0, f)`.
pub fn axis_profile(mesh: &Mesh<2>, u: &[MomentState<2>], y: f64) -> Vec<(f64, f64, f64)> {
    let row = mesh.node_multi_index(mesh.nearest_node(&[mesh.lower()[0], y]))[1];
    (0..mesh.nodes_per_axis()[0])
        .map(|ix| {
            let i = mesh.node_index([ix, row]);
            (mesh.node_coords(i)[0], u[i].psi0, u[i].flux_ratio())
        })
        .collect()
}

pub fn write_radial_csv(bins: &[RadialBin], path: &Path) -> Result<()> {
    let mut s = String::from("r,psi0,f\n");
    for b in bins {
        let _ = writeln!(s, "{},{},{}", num(b.r), num(b.psi0), num(b.flux_ratio));
    }
    write_file(path, &s)
}

pub fn write_axis_csv(rows: &[(f64, f64, f64)], path: &Path) -> Result<()> {
    let mut s = String::from("x,psi0,f\n");
    for (x, p, f) in rows {
        let _ = writeln!(s, "{},{},{}", num(*x), num(*p), num(*f));
    }
    write_file(path, &s)
}

pub fn render_residual_log(history: &[ResidualRecord]) -> String {
    let mut s = String::from(RESIDUAL_HEADER);
    s.push('\n');
    for r in history {
        let _ = writeln!(s, "{},{},{}", r.step, num(r.pseudo_time), num(r.residual_l2));
    }
    s
}

pub fn write_residual_log(history: &[ResidualRecord], path: &Path) -> Result<()> {
    write_file(path, &render_residual_log(history))
}

/// Summary of a run's realizability record.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub scenario: String,
    pub scheme: String,
    pub nodes_per_axis: usize,
    pub steps: usize,
    pub fields_checked: usize,
    pub final_time: f64,
    pub min_psi0: f64,
    pub max_flux_ratio: f64,
    pub violations: usize,
    /// Diagnostics of the first violation, if any.
    pub failure: Option<String>,
}

impl AuditReport {
    pub fn from_stats(scenario: &str, scheme: &str, nodes: usize, t: f64, stats: &RunStats) -> Self {
        Self {
            scenario: scenario.to_string(),
            scheme: scheme.to_string(),
            nodes_per_axis: nodes,
            steps: stats.steps,
            fields_checked: stats.fields_checked,
            final_time: t,
            min_psi0: stats.min_psi0,
            max_flux_ratio: stats.max_flux_ratio,
            violations: 0,
            failure: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {}", self.scenario);
        let _ = writeln!(s, "scheme = {}", self.scheme);
        let _ = writeln!(s, "nodes_per_axis = {}", self.nodes_per_axis);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "fields_checked = {}", self.fields_checked);
        let _ = writeln!(s, "final_time = {}", num(self.final_time));
        let _ = writeln!(s, "min_psi0 = {}", num(self.min_psi0));
        let _ = writeln!(s, "max_flux_ratio = {}", num(self.max_flux_ratio));
        let _ = writeln!(s, "one_minus_max_flux_ratio = {}", num(1.0 - self.max_flux_ratio));
        let _ = writeln!(s, "violations = {}", self.violations);
        if let Some(f) = &self.failure {
            let _ = writeln!(s, "failure = {}", f.replace('\n', " "));
        }
        let _ = writeln!(s, "status = {}", if self.passed() { "pass" } else { "fail" });
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh() -> Mesh<2> {
        Mesh::with_nodes([-1.0, -1.0], [1.0, 1.0], [5, 5]).unwrap()
    }

    #[test]
    fn constant_field_vtk() {
        let m = mesh();
        let u = vec![MomentState::isotropic(2.0); m.n_nodes()];
        let s = render_vtk(&m, &u, "test").unwrap();
        assert!(s.starts_with("# vtk DataFile Version 3.0\ntest\nASCII\nDATASET STRUCTURED_POINTS\n"));
        assert!(s.contains("DIMENSIONS 5 5 1\n"));
        assert!(s.contains("POINT_DATA 25\n"));
        let order: Vec<usize> = ["psi0", "psi1", "flux_ratio", "log10_psi0"]
            .iter()
            .map(|n| s.find(&format!("SCALARS {n} double")).unwrap())
            .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
        let f_block = &s[order[2]..order[3]];
        assert_eq!(f_block.lines().skip(2).filter(|l| *l == num(0.0)).count(), 25);
        let psi0_block = &s[order[0]..order[1]];
        assert_eq!(psi0_block.lines().skip(2).filter(|l| l.parse::<f64>().unwrap() == 2.0).count(), 25);
    }

    #[test]
    fn seventeen_digits_round_trip() {
        let v = 0.1f64 + 0.2;
        assert_eq!(num(v).parse::<f64>().unwrap(), v);
        assert_eq!(num(1.0 / 3.0).split('e').next().unwrap().len(), 18);
    }

    #[test]
    fn vtk_is_deterministic() {
        let m = mesh();
        let u: Vec<_> = (0..25).map(|i| MomentState::new(1.0 + i as f64, [0.1 * i as f64, 0.0])).collect();
        assert_eq!(render_vtk(&m, &u, "a").unwrap(), render_vtk(&m, &u, "a").unwrap());
        assert!(render_vtk(&m, &u[..3], "a").is_err());
    }

    #[test]
    fn radial_binning_oracle() {
        let m = mesh();
        let u: Vec<_> = (0..m.n_nodes())
            .map(|i| {
                let x = m.node_coords(i);
                MomentState::isotropic(1.0 + x[0] * x[0] + x[1] * x[1])
            })
            .collect();
        let bins = radial_profile(&m, &u, [0.0, 0.0], 0.5);
        // distances on the 5x5 grid with h = 0.5: 0, 0.5, 0.707, 1, 1.118, 1.414
        let mut expect: Vec<(usize, f64, usize)> = Vec::new();
        for i in 0..m.n_nodes() {
            let x = m.node_coords(i);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let k = (r / 0.5 + 1e-12).floor() as usize;
            match expect.iter_mut().find(|e| e.0 == k) {
                Some(e) => {
                    e.1 += u[i].psi0;
                    e.2 += 1;
                }
                None => expect.push((k, u[i].psi0, 1)),
            }
        }
        expect.sort_by_key(|e| e.0);
        assert_eq!(bins.len(), expect.len());
        for (b, e) in bins.iter().zip(&expect) {
            assert_eq!(b.count, e.2);
            assert!((b.psi0 - e.1 / e.2 as f64).abs() < 1e-14);
            assert_eq!(b.r, (e.0 as f64 + 0.5) * 0.5);
        }
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 25);
    }

    #[test]
    fn axis_line_out() {
        let m = mesh();
        let u: Vec<_> = (0..m.n_nodes()).map(|i| MomentState::isotropic(1.0 + m.node_coords(i)[1])).collect();
        let rows = axis_profile(&m, &u, 0.0);
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[0].0, -1.0);
        assert!(rows.iter().all(|r| r.1 == 1.0));
    }

    #[test]
    fn residual_log_format() {
        let h = vec![
            ResidualRecord { step: 0, pseudo_time: 0.0, residual_l2: 1.0 },
            ResidualRecord { step: 1, pseudo_time: 0.5, residual_l2: 1e-9 },
        ];
        let s = render_residual_log(&h);
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("step,pseudo_time,residual_l2"));
        let last: Vec<&str> = s.lines().last().unwrap().split(',').collect();
        assert_eq!(last[0], "1");
        assert!(last[2].parse::<f64>().unwrap() <= 1e-8);
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let m = mesh();
        let u = vec![MomentState::isotropic(1.0); m.n_nodes()];
        let p = dir.path().join("sub/field.vtk");
        write_fields(&u, &m, &p, "x").unwrap();
        assert!(p.exists());
        let audit = AuditReport::from_stats("flash", "mcl", 5, 1.0, &RunStats::default());
        let a = dir.path().join("audit.txt");
        audit.write(&a).unwrap();
        let text = fs::read_to_string(a).unwrap();
        assert!(text.contains("violations = 0") && text.contains("status = pass"));
    }
}
