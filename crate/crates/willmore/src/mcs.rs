//! The mean curvature sphere congruence and its Hopf fields.
//!
//! A surface arrives as the affine chart `g: M → H` of a map into the
//! 4-sphere, `f = ψH` with `ψ = (g, 1)ᵀ`. From `g` this module derives
//!
//! * the left and right normals `N`, `R` with `*dg = N dg = −dg R`,
//! * the quaternionic mean curvature `H` from `2 dg H = dN − N*dN`,
//! * the congruence `S` acting by `Sψ = −ψR` and `Se = eN − ψH`,
//! * the Hopf fields `A = ¼(S dS + *dS)` and `Q = ¼(S dS − *dS)`,
//! * the Willmore energy `W = 2∫⟨A ∧ *A⟩` and the degree of `(V, S)`,
//!
//! together with residuals for every structural identity used, so a
//! computed number always travels with the evidence for it.
//!
//! ## Exactness policy
//!
//! Finite differences give `N`, `R`, `H` that satisfy the frame relations
//! only up to O(h²), which would leak into `S² + 1` and poison everything
//! downstream built on `S` being a complex structure. The pipeline
//! therefore enforces the relations pointwise after the derivative step:
//! `N` and `R` are projected to unit imaginary quaternions (so `N² = R² =
//! −1` exactly) and `H` to the compatible part `½(H − R H N)` (so `RH =
//! HN` exactly). With those three identities exact, `S² = −1` holds to
//! roundoff at every node, independent of resolution. The discarded parts
//! are O(h²) on genuinely conformal data and are reported as residuals
//! (`frame_residual`, `mean_x_residual`, `mean_y_residual`) rather than
//! silently dropped.

use crate::chart::{
    connection_curvature, differential, exterior_d, integrate, integrate_window, star, wedge,
    Field, GridChart, OneForm, Window,
};
use crate::quat::{HMat2, HVec2, Quat};
use crate::tol::EPS_BRANCH_REL;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum McsError {
    #[error("chart is degenerate: {masked} of {total} nodes have |g_x| below the branch threshold")]
    ChartDegenerate { masked: usize, total: usize },
}

/// A surface sampled on a conformal chart, as the affine representative
/// `g` of the line `ψH = (g, 1)ᵀH`.
#[derive(Clone, Debug)]
pub struct SurfaceChart {
    pub name: String,
    pub chart: GridChart,
    pub g: Field<Quat>,
}

impl SurfaceChart {
    pub fn new(name: impl Into<String>, chart: GridChart, g: Field<Quat>) -> Self {
        SurfaceChart {
            name: name.into(),
            chart,
            g,
        }
    }

    /// The homogeneous frame vector `ψ = (g, 1)ᵀ` at a node.
    pub fn psi(&self, i: usize, j: usize) -> HVec2 {
        HVec2::new(self.g.at(i, j), Quat::ONE)
    }
}

/// Left/right normals with the branch-point mask.
pub struct Normals {
    pub n: Field<Quat>,
    pub r: Field<Quat>,
    /// Nodes where `|g_x|` collapsed and values were filled from neighbors.
    pub mask: Field<bool>,
}

/// The Hopf-field splitting of `dS`.
#[derive(Clone, Debug)]
pub struct HopfData {
    pub a: OneForm<HMat2>,
    pub q: OneForm<HMat2>,
    /// `−(A + Q)`: the connection form of `∇̂ = d − (A + Q)`.
    pub nablahat: OneForm<HMat2>,
}

/// Residual maxima of the structural equations, all over the interior
/// window with masked halos excluded.
#[derive(Clone, Copy, Debug, Default)]
pub struct StructureReport {
    /// `|Q ψ̂|`: the line `L = ψH` lies in `ker Q`.
    pub q_psi: f64,
    /// chordal distance of the image of `A` from `L`.
    pub im_a_dist: f64,
    pub star_a_minus_sa: f64,
    pub star_a_plus_as: f64,
    pub star_q_plus_sq: f64,
    pub star_q_minus_qs: f64,
}

impl StructureReport {
    pub fn max(&self) -> f64 {
        self.q_psi
            .max(self.im_a_dist)
            .max(self.star_a_minus_sa)
            .max(self.star_a_plus_as)
            .max(self.star_q_plus_sq)
            .max(self.star_q_minus_qs)
    }
}

/// Harmonicity residuals: all three vanish exactly when the congruence is
/// harmonic (the surface is Willmore).
#[derive(Clone, Copy, Debug, Default)]
pub struct Harmonicity {
    /// `‖d*A‖` interior max.
    pub dstar_a: f64,
    /// `‖d*Q‖` interior max.
    pub dstar_q: f64,
    /// `‖d∇̂A‖ = ‖dA + ω∧A + A∧ω‖` interior max, `ω = −(A+Q)`.
    pub dnabla_a: f64,
}

impl Harmonicity {
    pub fn max(&self) -> f64 {
        self.dstar_a.max(self.dstar_q).max(self.dnabla_a)
    }
}

/// Degree of `(V, S)` from the curvature of `∇̂`.
#[derive(Clone, Copy, Debug)]
pub struct DegreeReport {
    /// `(1/2π) ∫ ⟨S·R∇̂⟩` over the chart.
    pub value: f64,
    /// Nearest integer — only on a closed (torus) chart.
    pub rounded: Option<i64>,
    /// `|value − rounded|` when rounding applies.
    pub rounding_residual: Option<f64>,
    /// True on non-torus charts: the integral depends on the chart window
    /// and must not be read as a topological degree.
    pub chart_restricted: bool,
}

impl DegreeReport {
    /// Whether the torus-chart value failed to land near an integer.
    pub fn integrality_warning(&self) -> bool {
        matches!(self.rounding_residual, Some(r) if r > 0.05)
    }
}

/// The full cached congruence bundle for one surface chart.
pub struct Mcs {
    pub chart: GridChart,
    pub name: String,
    pub g: Field<Quat>,
    /// Left normal, unit imaginary at every node.
    pub n: Field<Quat>,
    /// Right normal, unit imaginary at every node.
    pub r: Field<Quat>,
    /// Quaternionic mean curvature, `RH = HN`-compatible at every node.
    pub h: Field<Quat>,
    pub s: Field<HMat2>,
    pub ds: OneForm<HMat2>,
    pub hopf: HopfData,
    pub mask: Field<bool>,
    /// Mask dilated by one node; residual maxima skip these.
    pub halo: Field<bool>,
    pub masked_count: usize,
    /// Pre-projection `max |RH − HN|`: honest O(h²) frame-compatibility
    /// defect of the raw finite-difference data.
    pub frame_residual: f64,
    /// `max |2 g_x H − (N_x − N N_y)|` with the final (projected) `H`.
    pub mean_x_residual: f64,
    /// `max |2 g_y H − (N_y + N N_x)|` with the final `H`.
    pub mean_y_residual: f64,
}

/// Fill masked nodes by nearest-unmasked value, multi-source BFS in fixed
/// index order (deterministic).
fn bfs_fill(f: &mut Field<Quat>, mask: &Field<bool>, chart: &GridChart) {
    let (nx, ny) = (chart.nx, chart.ny);
    let mut filled = Field::fill_bool(nx, ny, false);
    let mut queue = VecDeque::new();
    for i in 0..nx {
        for j in 0..ny {
            if !mask.at(i, j) {
                filled.set(i, j, true);
                queue.push_back((i, j));
            }
        }
    }
    while let Some((i, j)) = queue.pop_front() {
        let v = f.at(i, j);
        let mut neighbors = [(0usize, 0usize); 4];
        let mut nn = 0;
        if i > 0 {
            neighbors[nn] = (i - 1, j);
            nn += 1;
        } else if chart.periodic_x {
            neighbors[nn] = (nx - 1, j);
            nn += 1;
        }
        if i + 1 < nx {
            neighbors[nn] = (i + 1, j);
            nn += 1;
        } else if chart.periodic_x {
            neighbors[nn] = (0, j);
            nn += 1;
        }
        if j > 0 {
            neighbors[nn] = (i, j - 1);
            nn += 1;
        } else if chart.periodic_y {
            neighbors[nn] = (i, ny - 1);
            nn += 1;
        }
        if j + 1 < ny {
            neighbors[nn] = (i, j + 1);
            nn += 1;
        } else if chart.periodic_y {
            neighbors[nn] = (i, 0);
            nn += 1;
        }
        for &(ii, jj) in &neighbors[..nn] {
            if !filled.at(ii, jj) {
                f.set(ii, jj, v);
                filled.set(ii, jj, true);
                queue.push_back((ii, jj));
            }
        }
    }
}

/// Left and right normals `N = g_y g_x⁻¹`, `R = −g_x⁻¹ g_y`, projected to
/// unit imaginary quaternions, with branch-point masking and fill.
pub fn normals(s: &SurfaceChart) -> Result<Normals, McsError> {
    let dg = differential(&s.chart, &s.g);
    let gx_max = dg.cx.max_all();
    let eps = EPS_BRANCH_REL * gx_max;
    let mask = Field::from_fn_bool(s.chart.nx, s.chart.ny, |i, j| dg.cx.at(i, j).norm() <= eps);
    let masked = mask.count();
    let total = s.chart.nx * s.chart.ny;
    if masked * 5 > total {
        return Err(McsError::ChartDegenerate { masked, total });
    }
    let mut n = Field::from_fn(s.chart.nx, s.chart.ny, |i, j| {
        if mask.at(i, j) {
            Quat::ZERO
        } else {
            (dg.cy.at(i, j) * dg.cx.at(i, j).inv()).im().unit_im()
        }
    });
    let mut r = Field::from_fn(s.chart.nx, s.chart.ny, |i, j| {
        if mask.at(i, j) {
            Quat::ZERO
        } else {
            (-(dg.cx.at(i, j).inv() * dg.cy.at(i, j))).im().unit_im()
        }
    });
    bfs_fill(&mut n, &mask, &s.chart);
    bfs_fill(&mut r, &mask, &s.chart);
    Ok(Normals { n, r, mask })
}

/// Assemble the congruence from frame data: `Sψ = −ψR`, `Se = eN − ψH`.
/// On the standard basis the columns are `(N − gH, −H)ᵀ` and
/// `(−gR − Ng + gHg, −R + Hg)ᵀ`. With `N² = R² = −1` and `RH = HN` this
/// squares to `−1` identically.
pub fn sphere_congruence(
    g: &Field<Quat>,
    n: &Field<Quat>,
    r: &Field<Quat>,
    h: &Field<Quat>,
) -> Field<HMat2> {
    Field::from_fn(g.nx(), g.ny(), |i, j| {
        let (gv, nv, rv, hv) = (g.at(i, j), n.at(i, j), r.at(i, j), h.at(i, j));
        HMat2::new(
            nv - gv * hv,
            -gv * rv - nv * gv + gv * hv * gv,
            -hv,
            -rv + hv * gv,
        )
    })
}

/// Split `dS` into the Hopf fields: `A = ¼(S dS + *dS)`,
/// `Q = ¼(S dS − *dS)`. Then `A + Q = ½ S dS` and `dS = 2*(Q − A)` hold
/// exactly as algebra of the extraction.
pub fn hopf_fields(s: &Field<HMat2>, ds: &OneForm<HMat2>) -> HopfData {
    let sds = ds.zip_field(s, |dsv, sv| sv * dsv);
    let sds_star = star(ds);
    let a = sds.zip_form(&sds_star, |p, q| (p + q) * 0.25);
    let q = sds.zip_form(&sds_star, |p, qq| (p - qq) * 0.25);
    let nablahat = a.zip_form(&q, |av, qv| -(av + qv));
    HopfData { a, q, nablahat }
}

/// Run the full congruence pipeline on a surface chart.
pub fn analyze(surface: &SurfaceChart) -> Result<Mcs, McsError> {
    let chart = surface.chart;
    let Normals { n, r, mask } = normals(surface)?;
    let masked_count = mask.count();
    let halo = mask.dilate(chart.periodic_x, chart.periodic_y);
    let dg = differential(&chart, &surface.g);
    let dn = differential(&chart, &n);

    // H from the ∂x-evaluation of 2 dg H = dN − N *dN.
    let mut h_raw = Field::from_fn(chart.nx, chart.ny, |i, j| {
        if mask.at(i, j) {
            Quat::ZERO
        } else {
            dg.cx.at(i, j).inv() * (dn.cx.at(i, j) - n.at(i, j) * dn.cy.at(i, j)) * 0.5
        }
    });
    bfs_fill(&mut h_raw, &mask, &chart);

    // Honest pre-projection frame defect, then enforce RH = HN exactly.
    let frame_field = Field::from_fn(chart.nx, chart.ny, |i, j| {
        (r.at(i, j) * h_raw.at(i, j) - h_raw.at(i, j) * n.at(i, j)).norm()
    });
    let frame_residual = frame_field.max_in_masked(chart.interior(), Some(&halo));
    let h = Field::from_fn(chart.nx, chart.ny, |i, j| {
        (h_raw.at(i, j) - r.at(i, j) * h_raw.at(i, j) * n.at(i, j)) * 0.5
    });

    let rx = Field::from_fn(chart.nx, chart.ny, |i, j| {
        (dg.cx.at(i, j) * h.at(i, j) * 2.0 - (dn.cx.at(i, j) - n.at(i, j) * dn.cy.at(i, j)))
            .norm()
    });
    let mean_x_residual = rx.max_in_masked(chart.interior(), Some(&halo));
    let ry = Field::from_fn(chart.nx, chart.ny, |i, j| {
        (dg.cy.at(i, j) * h.at(i, j) * 2.0 - (dn.cy.at(i, j) + n.at(i, j) * dn.cx.at(i, j)))
            .norm()
    });
    let mean_y_residual = ry.max_in_masked(chart.interior(), Some(&halo));

    let s = sphere_congruence(&surface.g, &n, &r, &h);
    let ds = differential(&chart, &s);
    let hopf = hopf_fields(&s, &ds);

    Ok(Mcs {
        chart,
        name: surface.name.clone(),
        g: surface.g.clone(),
        n,
        r,
        h,
        s,
        ds,
        hopf,
        mask,
        halo,
        masked_count,
        frame_residual,
        mean_x_residual,
        mean_y_residual,
    })
}

impl Mcs {
    pub fn interior(&self) -> Window {
        self.chart.interior()
    }

    fn halo_opt(&self) -> Option<&Field<bool>> {
        if self.masked_count > 0 {
            Some(&self.halo)
        } else {
            None
        }
    }

    /// `max |S² + 1|` over all nodes: machine-small by construction.
    pub fn s_square_residual(&self) -> f64 {
        self.s
            .map(|sv| sv * sv + HMat2::IDENTITY)
            .max_all()
    }

    /// Conformality defect: `max(|g_y − N g_x|, |g_y + g_x R|) / (|g_x| + |g_y|)`,
    /// max over unmasked interior nodes (edges of integrated or rebuilt
    /// charts are inherently polluted by stacked one-sided stencils).
    pub fn conformality_residual(&self) -> f64 {
        self.conformality_residual_in(self.interior())
    }

    /// [`Self::conformality_residual`] over an explicit window, for
    /// surfaces whose construction needs a wider exclusion band.
    pub fn conformality_residual_in(&self, w: Window) -> f64 {
        let dg = differential(&self.chart, &self.g);
        let f = Field::from_fn(self.chart.nx, self.chart.ny, |i, j| {
            let gx = dg.cx.at(i, j);
            let gy = dg.cy.at(i, j);
            let den = gx.norm() + gy.norm();
            if den == 0.0 {
                return 0.0;
            }
            let e1 = (gy - self.n.at(i, j) * gx).norm();
            let e2 = (gy + gx * self.r.at(i, j)).norm();
            e1.max(e2) / den
        });
        f.max_in_masked(w, self.halo_opt())
    }

    /// `max |RH − HN|` with the final fields: zero to roundoff by
    /// construction (the pre-projection value is `frame_residual`).
    pub fn frame_relation_residual(&self) -> f64 {
        let f = Field::from_fn(self.chart.nx, self.chart.ny, |i, j| {
            (self.r.at(i, j) * self.h.at(i, j) - self.h.at(i, j) * self.n.at(i, j)).norm()
        });
        f.max_all()
    }

    /// Structural residual suite for the congruence and its Hopf fields.
    pub fn structure_residuals(&self) -> StructureReport {
        structure_residuals_for(self, &self.hopf)
    }

    pub fn harmonicity(&self) -> Harmonicity {
        harmonicity_residual(&self.chart, &self.hopf, self.halo_opt())
    }

    /// Pointwise Willmore density `⟨A∧*A⟩ = −⟨A_x² + A_y²⟩ ≥ 0`.
    pub fn willmore_density(&self) -> Field<f64> {
        willmore_density(&self.hopf)
    }

    /// `W = 2 ∫ ⟨A∧*A⟩` over the whole chart (exact lattice sum on a
    /// torus, trapezoid weights on a closed chart).
    pub fn willmore_energy(&self) -> f64 {
        2.0 * integrate(&self.chart, &self.willmore_density())
    }

    /// Chart-restricted energy over a window (plain node sum), for
    /// comparisons that must use the same region as another pipeline.
    pub fn willmore_energy_window(&self, w: Window) -> f64 {
        2.0 * integrate_window(&self.chart, &self.willmore_density(), w)
    }

    pub fn degree(&self) -> DegreeReport {
        let f = connection_curvature(&self.chart, &self.hopf.nablahat);
        let density = self.s.zip(&f, |sv, fv| (sv * fv).trace_re());
        let value = integrate(&self.chart, &density) / (2.0 * std::f64::consts::PI);
        if self.chart.is_torus() {
            let rounded = value.round() as i64;
            DegreeReport {
                value,
                rounded: Some(rounded),
                rounding_residual: Some((value - rounded as f64).abs()),
                chart_restricted: false,
            }
        } else {
            DegreeReport {
                value,
                rounded: None,
                rounding_residual: None,
                chart_restricted: true,
            }
        }
    }

    /// Residual of `dR + R·*dR = 4⟨α, *Aψ⟩` where `⟨α, v⟩` reads the
    /// second component: the derivative of the right normal is carried by
    /// `A` alone.
    pub fn normal_identity_check(&self) -> f64 {
        let dr = differential(&self.chart, &self.r);
        let f = Field::from_fn(self.chart.nx, self.chart.ny, |i, j| {
            let psi = HVec2::new(self.g.at(i, j), Quat::ONE);
            let rv = self.r.at(i, j);
            // x-evaluation: (*dR)_x = dR_y, (*A)_x = A_y
            let ex = dr.cx.at(i, j) + rv * dr.cy.at(i, j)
                - (self.hopf.a.cy.at(i, j) * psi).b * 4.0;
            // y-evaluation: (*dR)_y = −dR_x, (*A)_y = −A_x
            let ey = dr.cy.at(i, j) - rv * dr.cx.at(i, j)
                + (self.hopf.a.cx.at(i, j) * psi).b * 4.0;
            ex.norm().max(ey.norm())
        });
        f.max_in_masked(self.interior(), self.halo_opt())
    }
}

fn structure_residuals_for(m: &Mcs, hd: &HopfData) -> StructureReport {
    let w = m.interior();
    let halo = m.halo_opt();
    // |Q ψ̂| with unit-norm ψ
    let qpsi = Field::from_fn(m.chart.nx, m.chart.ny, |i, j| {
        let psi = HVec2::new(m.g.at(i, j), Quat::ONE);
        let psin = psi * (1.0 / psi.norm());
        (hd.q.cx.at(i, j) * psin)
            .norm()
            .max((hd.q.cy.at(i, j) * psin).norm())
    });
    // chordal distance of the dominant image column of A from L = ψH
    let a_max = hd.a.max_all();
    let ima = Field::from_fn(m.chart.nx, m.chart.ny, |i, j| {
        let psi = HVec2::new(m.g.at(i, j), Quat::ONE);
        let lp = match crate::quat::ProjPoint::new(psi) {
            Some(p) => p,
            None => return 0.0,
        };
        let mut worst = 0.0f64;
        for av in [hd.a.cx.at(i, j), hd.a.cy.at(i, j)] {
            if av.norm() < 1e-8 * a_max {
                continue; // image of a numerically-zero matrix is undefined
            }
            let c1 = HVec2::new(av.m11, av.m21);
            let c2 = HVec2::new(av.m12, av.m22);
            let col = if c1.norm() >= c2.norm() { c1 } else { c2 };
            if let Some(p) = crate::quat::ProjPoint::new(col) {
                worst = worst.max(p.chordal(&lp));
            }
        }
        worst
    });
    let type_res = |lhs: &OneForm<HMat2>| -> f64 { lhs.max_in_masked(w, halo) };
    let sa = hd.a.zip_field(&m.s, |av, sv| sv * av);
    let as_ = hd.a.zip_field(&m.s, |av, sv| av * sv);
    let sq = hd.q.zip_field(&m.s, |qv, sv| sv * qv);
    let qs = hd.q.zip_field(&m.s, |qv, sv| qv * sv);
    let star_a = star(&hd.a);
    let star_q = star(&hd.q);
    StructureReport {
        q_psi: qpsi.max_in_masked(w, halo),
        im_a_dist: ima.max_in_masked(w, halo),
        star_a_minus_sa: type_res(&star_a.zip_form(&sa, |x, y| x - y)),
        star_a_plus_as: type_res(&star_a.zip_form(&as_, |x, y| x + y)),
        star_q_plus_sq: type_res(&star_q.zip_form(&sq, |x, y| x + y)),
        star_q_minus_qs: type_res(&star_q.zip_form(&qs, |x, y| x - y)),
    }
}

/// Harmonicity residuals of a Hopf splitting on a chart.
pub fn harmonicity_residual(
    chart: &GridChart,
    hd: &HopfData,
    halo: Option<&Field<bool>>,
) -> Harmonicity {
    let w = chart.interior();
    let dstar_a = exterior_d(chart, &star(&hd.a)).max_in_masked(w, halo);
    let dstar_q = exterior_d(chart, &star(&hd.q)).max_in_masked(w, halo);
    let da = exterior_d(chart, &hd.a);
    let wa = wedge(&hd.nablahat, &hd.a);
    let aw = wedge(&hd.a, &hd.nablahat);
    let dn = Field::from_fn(da.nx(), da.ny(), |i, j| {
        da.at(i, j) + wa.at(i, j) + aw.at(i, j)
    });
    Harmonicity {
        dstar_a,
        dstar_q,
        dnabla_a: dn.max_in_masked(w, halo),
    }
}

/// `⟨A∧*A⟩` as a pointwise density: `−Re tr(A_x² + A_y²)`.
pub fn willmore_density(hd: &HopfData) -> Field<f64> {
    let w = wedge(&hd.a, &star(&hd.a));
    w.map(|m| m.trace_re())
}
