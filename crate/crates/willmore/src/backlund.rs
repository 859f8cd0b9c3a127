//! Bäcklund transforms of Willmore surfaces.
//!
//! The forward transform reads the kernel line field of `A`, the backward
//! transform the image line field of `Q`; both produce a new map into
//! `HP¹` which is again Willmore away from isolated points. The one-step
//! variant integrates the closed 1-form `dg♯ = ⟨α, *A e⟩` directly after
//! a choice of point at infinity, and carries explicit formulas for the
//! new mean curvature sphere data (`N♯ = −R`, `R♯ = ⟨β, Se⟩`,
//! `H♯ = −2⟨β, ψ⟩`) that the test suite checks against an independent
//! re-analysis of the integrated surface.
//!
//! All rebuilt surfaces come back as affine charts. Since a transform can
//! pass through the point at infinity of the *input* chart, every rebuild
//! searches for a Möbius normalization under which the new surface stays
//! at a chordal margin from infinity, and records the normalization so
//! that congruences and Hopf fields can be compared across the step by
//! conjugation.

use crate::chart::{differential, path_integrate, Field, GridChart, OneForm};
use crate::linefield::{
    image_line_field_smooth, kernel_line_field_smooth, LineField, LineFieldError,
};
use crate::mcs::{self, Mcs, McsError, SurfaceChart};
use crate::quat::{HMat2, HVec2, ProjPoint, Quat};
use crate::tol::{Tolerances, EPS_ZERO_REL, FRAME_MARGIN, REBUILD_SHRINK, ROUND_SPHERE_FLOOR};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BacklundError {
    #[error(transparent)]
    Mcs(#[from] McsError),
    #[error("line field: {0}")]
    LineField(#[from] LineFieldError),
    #[error("point at infinity collides with the surface (margin {margin:.3e} < {required:.3e})")]
    FrameCollision { margin: f64, required: f64 },
    #[error("transform 1-form is not closed (defect {defect:.3e} > allowed {allowed:.3e})")]
    NotClosed { defect: f64, allowed: f64 },
    #[error("β-covector singular: transform line meets eH (margin {margin:.3e} < {required:.3e})")]
    BetaSingular { margin: f64, required: f64 },
    #[error("no affine chart found after {attempts} Möbius attempts")]
    NoAffineChart { attempts: usize },
    #[error("Hopf fields below round-sphere floor (‖A‖ {a_norm:.3e}, ‖Q‖ {q_norm:.3e})")]
    RoundSphere { a_norm: f64, q_norm: f64 },
    #[error("Möbius transform meets infinity on the chart (min |denominator| {min_den:.3e})")]
    MoebiusSingular { min_den: f64 },
    #[error("dual chart singular: surface meets 0 (min |g| {min_g:.3e})")]
    DualSingular { min_g: f64 },
    #[error("Möbius matrix is singular")]
    SingularMatrix,
}

/// Absolute all-zero floor for line-field extraction: a Hopf field below
/// the twistor ratio gate times the congruence derivative scale counts as
/// vanishing, as does anything at the round-sphere floor.
pub fn all_zero_floor(m: &Mcs, tol: &Tolerances) -> f64 {
    let n = m.chart.nx.min(m.chart.ny);
    (tol.twistor_ratio_gate(n) * 0.5 * m.ds.max_in(m.interior())).max(ROUND_SPHERE_FLOOR)
}

/// A choice of point at infinity for the one-step transform, stored as
/// the Möbius normalization `G` under which that point has representative
/// `e = (1,0)ᵀ` and the dual covector `α` reads the second component.
#[derive(Clone, Debug)]
pub struct AffineFrame {
    pub moebius: HMat2,
    pub moebius_inv: HMat2,
}

impl AffineFrame {
    /// Infinity at `(1,0)ᵀH`, the input chart's own point at infinity.
    pub fn standard() -> Self {
        AffineFrame {
            moebius: HMat2::IDENTITY,
            moebius_inv: HMat2::IDENTITY,
        }
    }

    /// Infinity at `(0,1)ᵀH` (the origin of the input chart). The frame
    /// of choice for minimal inputs, whose kernel line *is* the standard
    /// infinity.
    pub fn inverted() -> Self {
        let swap = HMat2::new(Quat::ZERO, Quat::ONE, Quat::ONE, Quat::ZERO);
        AffineFrame {
            moebius: swap,
            moebius_inv: swap,
        }
    }

    pub fn from_moebius(g: HMat2) -> Result<Self, BacklundError> {
        let gi = g.try_inv().ok_or(BacklundError::SingularMatrix)?;
        Ok(AffineFrame {
            moebius: g,
            moebius_inv: gi,
        })
    }

    /// The chosen point at infinity in input coordinates: `G⁻¹(1,0)ᵀ`.
    pub fn infinity(&self) -> ProjPoint {
        ProjPoint::new(self.moebius_inv * HVec2::new(Quat::ONE, Quat::ZERO))
            .expect("invertible G maps lines to lines")
    }

    /// Minimum chordal distance from the surface to infinity, measured in
    /// the normalized frame.
    pub fn margin(&self, s: &SurfaceChart) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..s.chart.nx {
            for j in 0..s.chart.ny {
                let v = self.moebius * s.psi(i, j);
                let d = match ProjPoint::new(v) {
                    Some(p) => p.rep().b.norm(),
                    None => 0.0,
                };
                min = min.min(d);
            }
        }
        min
    }
}

/// Apply a Möbius transformation nodewise: `g ↦ (G₁₁g + G₁₂)(G₂₁g + G₂₂)⁻¹`.
pub fn moebius_apply(g: &HMat2, s: &SurfaceChart) -> Result<SurfaceChart, BacklundError> {
    let chart = s.chart.clone();
    let mut min_den = f64::INFINITY;
    for i in 0..chart.nx {
        for j in 0..chart.ny {
            let den = g.m21 * s.g.at(i, j) + g.m22;
            min_den = min_den.min(den.norm());
        }
    }
    let scale = g.norm() * (1.0 + s.g.max_all());
    if min_den <= 1e-12 * scale {
        return Err(BacklundError::MoebiusSingular { min_den });
    }
    let gm = g.clone();
    let gf = Field::from_fn(chart.nx, chart.ny, |i, j| {
        let gv = s.g.at(i, j);
        (gm.m11 * gv + gm.m12) * (gm.m21 * gv + gm.m22).inv()
    });
    Ok(SurfaceChart::new(format!("{}-moebius", s.name), chart, gf))
}

/// Möbius matrix for inversion centered at `q`: `g ↦ (g − q)⁻¹`.
pub fn invert_at(q: Quat) -> HMat2 {
    HMat2::new(Quat::ZERO, Quat::ONE, Quat::ONE, -q)
}

/// Result of the one-step transform: the integrated surface on the input
/// chart (in the frame's normalized coordinates), with its closedness
/// diagnostics and the analyzed normalized input for sharp-data reads.
pub struct OneStep {
    pub surface: SurfaceChart,
    /// Mean curvature sphere analysis of the *normalized* input.
    pub input: Mcs,
    pub defect: f64,
    pub allowed_defect: f64,
    pub periods: Vec<Quat>,
}

/// Integrate `dg♯ = ⟨α, *A e⟩` from the chart center after normalizing by
/// the frame. Errors when infinity meets the surface or when the 1-form
/// fails the closedness gate (10× the harmonicity residual of the input).
pub fn one_step(
    s: &SurfaceChart,
    frame: &AffineFrame,
    tol: &Tolerances,
) -> Result<OneStep, BacklundError> {
    let normalized = moebius_apply(&frame.moebius, s)?;
    let margin = AffineFrame::standard().margin(&normalized);
    if margin < FRAME_MARGIN {
        return Err(BacklundError::FrameCollision {
            margin,
            required: FRAME_MARGIN,
        });
    }
    let m = mcs::analyze(&normalized)?;
    // ω_x = ⟨α, (*A)_x e⟩ = (A_y e)₂, ω_y = ⟨α, (*A)_y e⟩ = −(A_x e)₂
    let omega = OneForm {
        cx: m.hopf.a.cy.map(|av| av.m21),
        cy: m.hopf.a.cx.map(|av| -av.m21),
    };
    let base = (m.chart.nx / 2, m.chart.ny / 2);
    let pi = path_integrate(&m.chart, &omega, base);
    let harm = m.harmonicity().max();
    // The 1e−12 floor keeps pure-roundoff inputs (whose harmonicity is at
    // machine precision) from tripping the gate on an equally tiny defect.
    let allowed = tol.defect_factor() * harm.max(1e-12);
    if pi.defect > allowed {
        return Err(BacklundError::NotClosed {
            defect: pi.defect,
            allowed,
        });
    }
    let surface = SurfaceChart::new(
        format!("{}-sharp", s.name),
        m.chart.clone(),
        pi.values,
    );
    Ok(OneStep {
        surface,
        input: m,
        defect: pi.defect,
        allowed_defect: allowed,
        periods: pi.periods,
    })
}

/// Predicted mean curvature sphere data of the one-step transform, read
/// off the input congruence through the splitting `H² = eH ⊕ L̃`.
pub struct SharpData {
    pub n_sharp: Field<Quat>,
    pub r_sharp: Field<Quat>,
    pub h_sharp: Field<Quat>,
    /// Minimum chordal distance of the kernel line from `eH`.
    pub beta_margin: f64,
}

/// Compute `N♯ = −R`, `R♯ = ⟨β, Se⟩`, `H♯ = −2⟨β, ψ⟩` where `β` is the
/// unique covector with `⟨β, e⟩ = 1`, `β|_L̃ = 0`.
pub fn sharp_sphere_data(one: &OneStep, tol: &Tolerances) -> Result<SharpData, BacklundError> {
    let m = &one.input;
    let floor = all_zero_floor(m, tol);
    let lf = kernel_line_field_smooth(&m.chart, &m.hopf.a, EPS_ZERO_REL, floor)?;
    let mut beta_margin = f64::INFINITY;
    for i in 0..m.chart.nx {
        for j in 0..m.chart.ny {
            beta_margin = beta_margin.min(lf.lines.at(i, j).b.norm());
        }
    }
    if beta_margin < FRAME_MARGIN {
        return Err(BacklundError::BetaSingular {
            margin: beta_margin,
            required: FRAME_MARGIN,
        });
    }
    // β = (1, b₂) with b₂ = −l₁l₂⁻¹ for L̃ = (l₁, l₂)H
    let b2 = lf.lines.map(|l| -(l.a * l.b.inv()));
    let n_sharp = m.r.map(|rv| -rv);
    let r_sharp = m
        .s
        .zip(&b2, |sv, bv| sv.m11 + bv * sv.m21);
    let h_sharp = m
        .g
        .zip(&b2, |gv, bv| -(gv + bv) * 2.0);
    Ok(SharpData {
        n_sharp,
        r_sharp,
        h_sharp,
        beta_margin,
    })
}

/// Distances between the predicted sharp data and an independent
/// analysis of the integrated surface.
pub struct SharpConsistency {
    pub n_dist: f64,
    pub r_dist: f64,
    pub h_dist: f64,
    /// `max |R♯H♯ − H♯N♯|` of the predicted fields.
    pub frame_rel: f64,
    /// Mean curvature identity residuals of the re-analyzed surface.
    pub mean_x: f64,
    pub mean_y: f64,
}

pub fn sharp_consistency(
    one: &OneStep,
    sharp: &SharpData,
) -> Result<SharpConsistency, BacklundError> {
    let ms = mcs::analyze(&one.surface)?;
    // the integrated surface inherits edge pollution from the input's
    // one-sided stencils, one band deeper than the default margin
    let w = ms.interior().shrunk(REBUILD_SHRINK);
    let n_dist = ms
        .n
        .zip(&sharp.n_sharp, |a, b| (a - b).norm())
        .max_in(w);
    let r_dist = ms
        .r
        .zip(&sharp.r_sharp, |a, b| (a - b).norm())
        .max_in(w);
    let h_dist = ms
        .h
        .zip(&sharp.h_sharp, |a, b| (a - b).norm())
        .max_in(w);
    let frame_rel = Field::from_fn(ms.chart.nx, ms.chart.ny, |i, j| {
        (sharp.r_sharp.at(i, j) * sharp.h_sharp.at(i, j)
            - sharp.h_sharp.at(i, j) * sharp.n_sharp.at(i, j))
        .norm()
    })
    .max_in(w);
    // re-derive the mean curvature identities of the integrated surface
    // over the same widened exclusion band
    let dg = differential(&ms.chart, &ms.g);
    let dn = differential(&ms.chart, &ms.n);
    let mean_x = Field::from_fn(ms.chart.nx, ms.chart.ny, |i, j| {
        (dg.cx.at(i, j) * ms.h.at(i, j) * 2.0
            - (dn.cx.at(i, j) - ms.n.at(i, j) * dn.cy.at(i, j)))
        .norm()
    })
    .max_in(w);
    let mean_y = Field::from_fn(ms.chart.nx, ms.chart.ny, |i, j| {
        (dg.cy.at(i, j) * ms.h.at(i, j) * 2.0
            - (dn.cy.at(i, j) + ms.n.at(i, j) * dn.cx.at(i, j)))
        .norm()
    })
    .max_in(w);
    Ok(SharpConsistency {
        n_dist,
        r_dist,
        h_dist,
        frame_rel,
        mean_x,
        mean_y,
    })
}

/// A full Bäcklund transform: the rebuilt surface, the line field it came
/// from (in input-frame coordinates, on the full input chart), and the
/// Möbius normalization + index offset needed to compare data across the
/// step.
pub struct Transform {
    pub surface: SurfaceChart,
    pub line_field: LineField,
    pub moebius: HMat2,
    pub moebius_inv: HMat2,
    /// Rebuilt node `(i, j)` sits at input node `(i + offset.0, j + offset.1)`.
    pub offset: (usize, usize),
    /// Möbius candidates tried before one met the chart margin.
    pub attempts: usize,
}

impl Transform {
    /// The transform line at a *rebuilt-chart* node, in input coordinates.
    pub fn line_at(&self, i: usize, j: usize) -> ProjPoint {
        self.line_field.line(i + self.offset.0, j + self.offset.1)
    }

    /// Conjugate an endomorphism of the rebuilt frame back to the input
    /// frame: `X ↦ G⁻¹XG`.
    pub fn pull_back(&self, x: HMat2) -> HMat2 {
        self.moebius_inv * x * self.moebius
    }
}

/// Forward transform `f̃ = ker A`.
pub fn backlund_forward(m: &Mcs, tol: &Tolerances, seed: u64) -> Result<Transform, BacklundError> {
    rebuild(m, tol, seed, true)
}

/// Backward transform `f̂ = im Q`.
pub fn backlund_backward(
    m: &Mcs,
    tol: &Tolerances,
    seed: u64,
) -> Result<Transform, BacklundError> {
    rebuild(m, tol, seed, false)
}

const CHART_ATTEMPTS: usize = 16;

fn rebuild(m: &Mcs, tol: &Tolerances, seed: u64, forward: bool) -> Result<Transform, BacklundError> {
    let w = m.interior();
    let a_norm = m.hopf.a.max_in(w);
    let q_norm = m.hopf.q.max_in(w);
    if a_norm < ROUND_SPHERE_FLOOR && q_norm < ROUND_SPHERE_FLOOR {
        return Err(BacklundError::RoundSphere { a_norm, q_norm });
    }
    let floor = all_zero_floor(m, tol);
    let lf = if forward {
        kernel_line_field_smooth(&m.chart, &m.hopf.a, EPS_ZERO_REL, floor)?
    } else {
        image_line_field_smooth(&m.chart, &m.hopf.q, EPS_ZERO_REL, floor)?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let swap = HMat2::new(Quat::ZERO, Quat::ONE, Quat::ONE, Quat::ZERO);
    for attempt in 0..CHART_ATTEMPTS {
        let g = match attempt {
            0 => HMat2::IDENTITY,
            1 => swap,
            _ => {
                let mut q = || {
                    Quat::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    )
                };
                HMat2::new(q(), q(), q(), q())
            }
        };
        let gi = match g.try_inv() {
            Some(gi) => gi,
            None => continue,
        };
        let mut margin = f64::INFINITY;
        for i in 0..m.chart.nx {
            for j in 0..m.chart.ny {
                let d = match ProjPoint::new(g * lf.lines.at(i, j)) {
                    Some(p) => p.rep().b.norm(),
                    None => 0.0,
                };
                margin = margin.min(d);
                if margin < FRAME_MARGIN {
                    break;
                }
            }
            if margin < FRAME_MARGIN {
                break;
            }
        }
        if margin < FRAME_MARGIN {
            continue;
        }
        // rebuilt charts drop a band of nodes on non-periodic axes: the
        // one-sided stencils of the input analysis pollute the outermost
        // line-field values
        let sx = if m.chart.periodic_x { 0 } else { REBUILD_SHRINK };
        let sy = if m.chart.periodic_y { 0 } else { REBUILD_SHRINK };
        let chart = GridChart {
            nx: m.chart.nx - 2 * sx,
            ny: m.chart.ny - 2 * sy,
            hx: m.chart.hx,
            hy: m.chart.hy,
            x0: m.chart.x0 + sx as f64 * m.chart.hx,
            y0: m.chart.y0 + sy as f64 * m.chart.hy,
            periodic_x: m.chart.periodic_x,
            periodic_y: m.chart.periodic_y,
        };
        let gf = Field::from_fn(chart.nx, chart.ny, |i, j| {
            let p = ProjPoint::new(g * lf.lines.at(i + sx, j + sy))
                .expect("margin check keeps representatives finite");
            p.affine(1e-12)
                .expect("margin check keeps the chart affine")
        });
        let suffix = if forward { "tilde" } else { "hat" };
        let surface = SurfaceChart::new(format!("{}-{suffix}", m.name), chart, gf);
        return Ok(Transform {
            surface,
            line_field: lf,
            moebius: g,
            moebius_inv: gi,
            offset: (sx, sy),
            attempts: attempt + 1,
        });
    }
    Err(BacklundError::NoAffineChart {
        attempts: CHART_ATTEMPTS,
    })
}

/// How to compare the congruences across a transform step.
#[derive(Clone, Copy, Debug)]
pub enum SphereRelation {
    /// `S̃ = −S` on `V/L̃`: the quotient entry of `S̃ + S` in an
    /// `L̃`-adapted basis (forward steps).
    ForwardQuotient,
    /// `(Ŝ + S)|_L̂ = 0`: the restriction to the transform line
    /// (backward steps).
    BackwardRestriction,
    /// `Ŝ + S = 0` as full matrices (backward steps off twistor
    /// projections, where the whole congruence flips sign).
    FullMatrix,
}

/// Residual of the sphere relation across a transform, measured on the
/// rebuilt chart's interior and conjugated back to the input frame.
pub fn sphere_relation_residual(
    input: &Mcs,
    t: &Transform,
    kind: SphereRelation,
) -> Result<f64, BacklundError> {
    let mt = mcs::analyze(&t.surface)?;
    let w = mt.interior();
    let mut worst = 0.0f64;
    for i in w.i0..w.i1 {
        for j in w.j0..w.j1 {
            let s_new = t.pull_back(mt.s.at(i, j));
            let s_old = input.s.at(i + t.offset.0, j + t.offset.1);
            let sum = s_new + s_old;
            let r = match kind {
                SphereRelation::FullMatrix => sum.norm(),
                SphereRelation::BackwardRestriction => {
                    let v = t.line_at(i, j).rep();
                    (sum * v).norm()
                }
                SphereRelation::ForwardQuotient => {
                    let l = t.line_at(i, j);
                    let basis = HMat2::from_columns(l.rep(), l.perp().rep());
                    match basis.try_inv() {
                        Some(bi) => (bi * sum * basis).m22.norm(),
                        None => sum.norm(),
                    }
                }
            };
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// `max ‖G⁻¹ X̃ G − Y‖` over both evaluations on the rebuilt interior,
/// where `X̃` is the rebuilt surface's `Q` (forward: the new `Q̃` should
/// reproduce the input `A`) or `A` (backward: `Â` reproduces `Q`).
pub fn hopf_transport_residual(
    input: &Mcs,
    t: &Transform,
    forward: bool,
) -> Result<f64, BacklundError> {
    let mt = mcs::analyze(&t.surface)?;
    let w = mt.interior();
    let (new_form, old_form) = if forward {
        (&mt.hopf.q, &input.hopf.a)
    } else {
        (&mt.hopf.a, &input.hopf.q)
    };
    let mut worst = 0.0f64;
    for i in w.i0..w.i1 {
        for j in w.j0..w.j1 {
            let (oi, oj) = (i + t.offset.0, j + t.offset.1);
            let rx = (t.pull_back(new_form.cx.at(i, j)) - old_form.cx.at(oi, oj)).norm();
            let ry = (t.pull_back(new_form.cy.at(i, j)) - old_form.cy.at(oi, oj)).norm();
            worst = worst.max(rx).max(ry);
        }
    }
    Ok(worst)
}

/// Chordal distance between `hat(tilde(f))` and `f`: extract the backward
/// line field of the forward transform, pull it to the input frame, and
/// compare with the input's `ψ`-lines.
pub fn involution_residual(
    input: &Mcs,
    fwd: &Transform,
    tol: &Tolerances,
) -> Result<f64, BacklundError> {
    let mt = mcs::analyze(&fwd.surface)?;
    let floor = all_zero_floor(&mt, tol);
    let back = image_line_field_smooth(&mt.chart, &mt.hopf.q, EPS_ZERO_REL, floor)?;
    let w = mt.interior();
    let mut worst = 0.0f64;
    for i in w.i0..w.i1 {
        for j in w.j0..w.j1 {
            let pulled = match ProjPoint::new(fwd.moebius_inv * back.lines.at(i, j)) {
                Some(p) => p,
                None => continue,
            };
            let psi = ProjPoint::new(HVec2::new(
                input.g.at(i + fwd.offset.0, j + fwd.offset.1),
                Quat::ONE,
            ))
            .expect("affine ψ is never zero");
            worst = worst.max(pulled.chordal(&psi));
        }
    }
    Ok(worst)
}

/// The dual Willmore surface: annihilator lines `L⊥`, congruence `S*`.
pub struct Dual {
    pub surface: SurfaceChart,
    /// `max ‖S(g⊥) − S*‖`: the analyzed congruence of the dual chart
    /// against the adjoint of the input congruence.
    pub s_match: f64,
    /// Chordal residual between `ker A(g⊥)` and `(im Q)⊥`.
    pub ker_vs_im: f64,
}

/// Build the dual surface `g⊥ = −ḡ⁻¹` (the affine chart of the
/// Hermitian-perp line field) and verify its congruence is the adjoint.
pub fn dual_surface(m: &Mcs, tol: &Tolerances) -> Result<Dual, BacklundError> {
    let mut min_g = f64::INFINITY;
    for i in 0..m.chart.nx {
        for j in 0..m.chart.ny {
            min_g = min_g.min(m.g.at(i, j).norm());
        }
    }
    if min_g < 1e-6 {
        return Err(BacklundError::DualSingular { min_g });
    }
    let gperp = m.g.map(|gv| -(gv.conj().inv()));
    let surface = SurfaceChart::new(format!("{}-dual", m.name), m.chart.clone(), gperp);
    let md = mcs::analyze(&surface)?;
    let w = md.interior();
    let s_match = md
        .s
        .zip(&m.s, |sd, s| (sd - s.adjoint()).norm())
        .max_in(w);
    let floor_d = all_zero_floor(&md, tol);
    let ker_d = kernel_line_field_smooth(&md.chart, &md.hopf.a, EPS_ZERO_REL, floor_d)?;
    let floor_m = all_zero_floor(m, tol);
    let im_q = image_line_field_smooth(&m.chart, &m.hopf.q, EPS_ZERO_REL, floor_m)?;
    let mut ker_vs_im = 0.0f64;
    for i in w.i0..w.i1 {
        for j in w.j0..w.j1 {
            ker_vs_im = ker_vs_im.max(ker_d.line(i, j).chordal(&im_q.line(i, j).perp()));
        }
    }
    Ok(Dual {
        surface,
        s_match,
        ker_vs_im,
    })
}
