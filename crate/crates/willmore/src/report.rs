//! Structured run reports and mesh export.
//!
//! Everything here is built for reproducibility: reports carry no
//! timestamps or host data, maps are ordered, and floats go through the
//! shortest round-trip formatter, so identical inputs produce identical
//! bytes.

use crate::mcs::{Mcs, SurfaceChart};
use crate::sequence::SequenceLedger;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::io::{self, Write};

/// Where the numbers came from: enough to rerun the command, nothing
/// machine-specific.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub tol_version: String,
}

/// The JSON report shape shared by every subcommand:
/// `{surface, resolution, results{…}, residuals{…}, provenance{…}}`.
///
/// `results` holds primary quantities (energies, degrees, classification
/// outcomes — possibly nested); `residuals` is a flat name → number map of
/// diagnostic maxima.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub surface: String,
    pub resolution: usize,
    pub results: BTreeMap<String, Value>,
    pub residuals: BTreeMap<String, f64>,
    pub provenance: Provenance,
}

impl Report {
    pub fn new(surface: impl Into<String>, resolution: usize, seed: u64) -> Self {
        Report {
            surface: surface.into(),
            resolution,
            results: BTreeMap::new(),
            residuals: BTreeMap::new(),
            provenance: Provenance {
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed,
                tol_version: crate::tol::TOL_VERSION.to_string(),
            },
        }
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("result serializes");
        self.results.insert(key.to_string(), v);
    }

    pub fn residual(&mut self, key: &str, value: f64) {
        assert!(value.is_finite(), "residual {key} is not finite: {value}");
        self.residuals.insert(key.to_string(), value);
    }

    /// Canonical serialization: pretty-printed, key-ordered, trailing
    /// newline. This exact byte stream is the determinism contract.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_json_string().as_bytes())
    }
}

/// The standard analysis block: energy, degree, and the full residual
/// suite of one surface.
pub fn analysis_report(m: &Mcs, seed: u64) -> Report {
    let mut r = Report::new(&m.name, m.chart.nx.min(m.chart.ny), seed);
    let w = m.interior();
    r.result("energy", m.willmore_energy());
    r.result("a_norm", m.hopf.a.max_in(w));
    r.result("q_norm", m.hopf.q.max_in(w));
    r.result("masked_nodes", m.masked_count);
    let deg = m.degree();
    r.result(
        "degree",
        json!({
            "value": deg.value,
            "rounded": deg.rounded,
            "residual": deg.rounding_residual,
            "chart_restricted": deg.chart_restricted,
        }),
    );
    r.residual("conformality", m.conformality_residual());
    r.residual("s_square", m.s_square_residual());
    r.residual("frame_relation", m.frame_residual);
    r.residual("mean_x", m.mean_x_residual);
    r.residual("mean_y", m.mean_y_residual);
    let st = m.structure_residuals();
    r.residual("q_psi", st.q_psi);
    r.residual("im_a_dist", st.im_a_dist);
    r.residual("star_a_minus_sa", st.star_a_minus_sa);
    r.residual("star_a_plus_as", st.star_a_plus_as);
    r.residual("star_q_plus_sq", st.star_q_plus_sq);
    r.residual("star_q_minus_qs", st.star_q_minus_qs);
    let h = m.harmonicity();
    r.residual("dstar_a", h.dstar_a);
    r.residual("dstar_q", h.dstar_q);
    r.residual("dnabla_a", h.dnabla_a);
    r.residual("normal_identity", m.normal_identity_check());
    r
}

/// One row per grid node: chart coordinates, the four components of `g`,
/// `N`, `R`, `H`, and the pointwise Hopf-field magnitudes (the larger of
/// the two coordinate evaluations).
pub fn write_csv<W: Write>(m: &Mcs, mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "u,v,g_1,g_i,g_j,g_k,n_1,n_i,n_j,n_k,r_1,r_i,r_j,r_k,h_1,h_i,h_j,h_k,a_norm,q_norm"
    )?;
    let c = &m.chart;
    for i in 0..c.nx {
        for j in 0..c.ny {
            let u = c.x0 + i as f64 * c.hx;
            let v = c.y0 + j as f64 * c.hy;
            let g = m.g.at(i, j);
            let n = m.n.at(i, j);
            let r = m.r.at(i, j);
            let h = m.h.at(i, j);
            let a = m.hopf.a.cx.at(i, j).norm().max(m.hopf.a.cy.at(i, j).norm());
            let q = m.hopf.q.cx.at(i, j).norm().max(m.hopf.q.cy.at(i, j).norm());
            writeln!(
                w,
                "{u},{v},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{a},{q}",
                g.w, g.x, g.y, g.z, n.w, n.x, n.y, n.z, r.w, r.x, r.y, r.z, h.w, h.x, h.y, h.z
            )?;
        }
    }
    Ok(())
}

/// Wavefront OBJ of the grid: vertex positions are the `1, i, j`
/// components of `g`; the `k` component follows each vertex as a
/// `#k <value>` attribute comment. Grid cells become quads split into two
/// triangles, wrapping around periodic axes, so a torus chart yields
/// `nx·ny` vertices and `2·nx·ny` triangles.
pub fn write_obj<W: Write>(s: &SurfaceChart, mut w: W) -> io::Result<()> {
    let c = &s.chart;
    writeln!(w, "# surface: {}", s.name)?;
    writeln!(
        w,
        "# grid: {} x {}{}{}",
        c.nx,
        c.ny,
        if c.periodic_x { " periodic-x" } else { "" },
        if c.periodic_y { " periodic-y" } else { "" }
    )?;
    writeln!(w, "# vertices are the (1,i,j) components of g; '#k' lines carry the k component")?;
    for i in 0..c.nx {
        for j in 0..c.ny {
            let g = s.g.at(i, j);
            writeln!(w, "v {} {} {}", g.w, g.x, g.y)?;
            writeln!(w, "#k {}", g.z)?;
        }
    }
    let idx = |i: usize, j: usize| i * c.ny + j + 1;
    let cells_x = if c.periodic_x { c.nx } else { c.nx - 1 };
    let cells_y = if c.periodic_y { c.ny } else { c.ny - 1 };
    for i in 0..cells_x {
        for j in 0..cells_y {
            let i1 = (i + 1) % c.nx;
            let j1 = (j + 1) % c.ny;
            let (a, b, cc, d) = (idx(i, j), idx(i1, j), idx(i1, j1), idx(i, j1));
            writeln!(w, "f {a} {b} {cc}")?;
            writeln!(w, "f {a} {cc} {d}")?;
        }
    }
    Ok(())
}

/// Fixed-width text table of a sequence ledger: one line per surface plus
/// the two termination verdicts.
pub fn ledger_table(led: &SequenceLedger) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>5}  {:<28} {:>14} {:>11} {:>11} {:>11} {:>6}",
        "index", "name", "energy", "harmonicity", "|A|", "|Q|", "deg"
    );
    for e in &led.entries {
        let deg = e
            .degree
            .map(|d| d.to_string())
            .unwrap_or_else(|| "-".to_string());
        let _ = writeln!(
            out,
            "{:>5}  {:<28} {:>14.8} {:>11.3e} {:>11.3e} {:>11.3e} {:>6}",
            e.index, e.name, e.energy, e.harmonicity, e.a_norm, e.q_norm, deg
        );
    }
    for (side, t) in [("forward", &led.forward), ("backward", &led.backward)] {
        let ev: Vec<String> = t
            .evidence
            .iter()
            .map(|(k, v)| format!("{k}={v:.3e}"))
            .collect();
        let _ = writeln!(
            out,
            "{side}: {:?} after {} step(s)  [{}]",
            t.kind,
            t.steps,
            ev.join(", ")
        );
    }
    if let Some(q) = &led.quantization {
        let _ = writeln!(
            out,
            "quantization: max |dW - 4 pi v| = {:.3e} over {} pair(s)",
            q.max_residual,
            q.pairs.len()
        );
    }
    if let Some(lb) = &led.length_bound {
        let _ = writeln!(
            out,
            "length bound: n*v + W/4pi + 2n(n+1) deg K = {:.6} (n = {}, v = {}) -> {}",
            lb.lhs,
            lb.realized_length,
            lb.v0,
            if lb.satisfied { "satisfied" } else { "VIOLATED" }
        );
    }
    if led.local {
        let _ = writeln!(
            out,
            "note: open chart; energies and classifications are chart-restricted"
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{gallery, mcs};

    #[test]
    fn csv_row_count_matches_grid() {
        let s = gallery::clifford_torus(16).unwrap();
        let m = mcs::analyze(&s).unwrap();
        let mut buf = Vec::new();
        write_csv(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), 20);
        assert_eq!(lines.clone().count(), 16 * 16);
        let first: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|t| t.parse().unwrap())
            .collect();
        assert!(first.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn obj_counts_torus_and_disk() {
        let torus = gallery::clifford_torus(12).unwrap();
        let mut buf = Vec::new();
        write_obj(&torus, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let verts = text.lines().filter(|l| l.starts_with("v ")).count();
        let faces = text.lines().filter(|l| l.starts_with("f ")).count();
        let kattrs = text.lines().filter(|l| l.starts_with("#k ")).count();
        assert_eq!(verts, 12 * 12);
        assert_eq!(faces, 2 * 12 * 12);
        assert_eq!(kattrs, verts);

        let disk = gallery::round_sphere(9).unwrap();
        let mut buf = Vec::new();
        write_obj(&disk, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let verts = text.lines().filter(|l| l.starts_with("v ")).count();
        let faces = text.lines().filter(|l| l.starts_with("f ")).count();
        assert_eq!(verts, 81);
        assert_eq!(faces, 2 * 8 * 8);
    }

    #[test]
    fn analysis_report_is_deterministic() {
        let s = gallery::round_sphere(16).unwrap();
        let m = mcs::analyze(&s).unwrap();
        let a = analysis_report(&m, 7).to_json_string();
        let m2 = mcs::analyze(&s).unwrap();
        let b = analysis_report(&m2, 7).to_json_string();
        assert_eq!(a, b);
        assert!(!a.contains("time"), "reports must not carry timestamps");
    }

    #[test]
    fn report_validates_against_shipped_schema() {
        let schema: serde_json::Value =
            serde_json::from_str(include_str!("../../../schema/report.schema.json")).unwrap();
        let validator = jsonschema::validator_for(&schema).unwrap();

        let s = gallery::clifford_torus(16).unwrap();
        let m = mcs::analyze(&s).unwrap();
        let mut rep = analysis_report(&m, 42);
        // sequence reports nest the full ledger; the schema must admit it
        let led = crate::sequence::run_sequence(&s, 1, &crate::tol::Tolerances::default(), 42)
            .unwrap();
        rep.result("sequence", &led);
        let value = serde_json::to_value(&rep).unwrap();
        if let Err(e) = validator.validate(&value) {
            panic!("report does not match schema: {e}");
        }

        // the schema is not vacuous: a report missing its provenance block
        // must fail
        let mut broken = value.clone();
        broken.as_object_mut().unwrap().remove("provenance");
        assert!(validator.validate(&broken).is_err());
    }
}
