//! Line fields: smooth families of lines in `H²` extracted from the Hopf
//! fields.
//!
//! The forward transform lives on `L̃ = ker A`, the backward transform on
//! `L̂ = im Q`. Both fields have isolated zeros where the defining matrix
//! degenerates; those nodes become holes and are filled from resolved
//! neighbors, the numerical counterpart of extending the bundle smoothly
//! across the zeros.
//!
//! Two extraction strategies are provided. The *pinned* per-node rule
//! (dominant evaluation, dominant row/column) is the reference semantics
//! and what the certification suite measures. The *smooth* variants pool
//! all four rows (least squares) or all four columns(Gram matrix) of both
//! evaluations before extracting; they lose no accuracy on clean data and
//! are markedly more stable on rebuilt charts, so the transform driver
//! uses them.

use crate::chart::{Field, GridChart, Window};
use crate::quat::{HMat2, HVec2, ProjPoint, Quat};
use std::collections::VecDeque;
use thiserror::Error;

use crate::chart::OneForm;

#[derive(Debug, Error)]
pub enum LineFieldError {
    #[error("field is numerically zero (max norm {max_norm:.3e} below floor {floor:.3e})")]
    AllZero { max_norm: f64, floor: f64 },
    #[error("no node resolved a line (all {total} nodes are holes)")]
    AllHoles { total: usize },
}

/// A smooth family of lines with per-node extraction diagnostics.
#[derive(Clone, Debug)]
pub struct LineField {
    /// Normalized representative of the line at each node.
    pub lines: Field<HVec2>,
    /// Smallest-pivot ratio from the rank decision at each node: near 0
    /// means the matrix was unambiguously rank one. Holes carry 1.
    pub confidence: Field<f64>,
    /// Nodes where the field was below the zero threshold and the line
    /// was filled from a neighbor.
    pub holes: Field<bool>,
    pub hole_count: usize,
}

impl LineField {
    pub fn line(&self, i: usize, j: usize) -> ProjPoint {
        ProjPoint::new(self.lines.at(i, j)).expect("stored line representatives are unit-norm")
    }

    /// Largest chordal distance between lattice-adjacent lines.
    pub fn continuity(&self, chart: &GridChart) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..chart.nx {
            for j in 0..chart.ny {
                let p = self.line(i, j);
                if i + 1 < chart.nx || chart.periodic_x {
                    let ii = if i + 1 < chart.nx { i + 1 } else { 0 };
                    worst = worst.max(p.chordal(&self.line(ii, j)));
                }
                if j + 1 < chart.ny || chart.periodic_y {
                    let jj = if j + 1 < chart.ny { j + 1 } else { 0 };
                    worst = worst.max(p.chordal(&self.line(i, jj)));
                }
            }
        }
        worst
    }

    /// Largest chordal distance from the given line over a window.
    pub fn max_distance_to(&self, p: &ProjPoint, w: Window) -> f64 {
        let mut worst = 0.0f64;
        for i in w.i0..w.i1 {
            for j in w.j0..w.j1 {
                worst = worst.max(self.line(i, j).chordal(p));
            }
        }
        worst
    }

    /// Chordal spread over a window: the largest distance from the line
    /// at the most confident node. A constant field spreads only by
    /// stencil noise.
    pub fn spread(&self, w: Window) -> f64 {
        let mut best = (f64::INFINITY, w.i0, w.j0);
        for i in w.i0..w.i1 {
            for j in w.j0..w.j1 {
                let c = self.confidence.at(i, j);
                if c < best.0 {
                    best = (c, i, j);
                }
            }
        }
        self.max_distance_to(&self.line(best.1, best.2), w)
    }

    /// The single line the field collapses to, if its spread over the
    /// window is below `tol`.
    pub fn constant_line(&self, w: Window, tol: f64) -> Option<ProjPoint> {
        let mut best = (f64::INFINITY, w.i0, w.j0);
        for i in w.i0..w.i1 {
            for j in w.j0..w.j1 {
                let c = self.confidence.at(i, j);
                if c < best.0 {
                    best = (c, i, j);
                }
            }
        }
        let p = self.line(best.1, best.2);
        if self.max_distance_to(&p, w) < tol {
            Some(p)
        } else {
            None
        }
    }
}

fn fill_holes(
    lines: &mut Field<HVec2>,
    holes: &Field<bool>,
    chart: &GridChart,
) -> Result<(), LineFieldError> {
    let (nx, ny) = (chart.nx, chart.ny);
    let total = nx * ny;
    if holes.count() == total {
        return Err(LineFieldError::AllHoles { total });
    }
    if holes.count() == 0 {
        return Ok(());
    }
    let mut filled = Field::fill_bool(nx, ny, false);
    let mut queue = VecDeque::new();
    for i in 0..nx {
        for j in 0..ny {
            if !holes.at(i, j) {
                filled.set(i, j, true);
                queue.push_back((i, j));
            }
        }
    }
    while let Some((i, j)) = queue.pop_front() {
        let v = lines.at(i, j);
        let push = |ii: usize, jj: usize, filled: &mut Field<bool>, queue: &mut VecDeque<(usize, usize)>, lines: &mut Field<HVec2>| {
            if !filled.at(ii, jj) {
                lines.set(ii, jj, v);
                filled.set(ii, jj, true);
                queue.push_back((ii, jj));
            }
        };
        if i > 0 {
            push(i - 1, j, &mut filled, &mut queue, lines);
        } else if chart.periodic_x {
            push(nx - 1, j, &mut filled, &mut queue, lines);
        }
        if i + 1 < nx {
            push(i + 1, j, &mut filled, &mut queue, lines);
        } else if chart.periodic_x {
            push(0, j, &mut filled, &mut queue, lines);
        }
        if j > 0 {
            push(i, j - 1, &mut filled, &mut queue, lines);
        } else if chart.periodic_y {
            push(i, ny - 1, &mut filled, &mut queue, lines);
        }
        if j + 1 < ny {
            push(i, j + 1, &mut filled, &mut queue, lines);
        } else if chart.periodic_y {
            push(i, 0, &mut filled, &mut queue, lines);
        }
    }
    Ok(())
}

/// The kernel line of the dominant row of `b`, parameterized on the side
/// with the better-conditioned inverse. Returns the representative and
/// the row ratio used as confidence.
fn kernel_of(b: &HMat2) -> (HVec2, f64) {
    let r1n = b.m11.norm_sq() + b.m12.norm_sq();
    let r2n = b.m21.norm_sq() + b.m22.norm_sq();
    let (a, bb, conf) = if r1n >= r2n {
        (b.m11, b.m12, (r2n / r1n.max(1e-300)).sqrt())
    } else {
        (b.m21, b.m22, (r1n / r2n.max(1e-300)).sqrt())
    };
    // row·v = 0: (1, −b⁻¹a) or (−a⁻¹b, 1), whichever inverse is tamer
    let v = if bb.norm_sq() >= a.norm_sq() {
        HVec2::new(Quat::ONE, -(bb.inv() * a))
    } else {
        HVec2::new(-(a.inv() * bb), Quat::ONE)
    };
    (v, conf)
}

/// The image line of `b` from its dominant column.
fn image_of(b: &HMat2) -> (HVec2, f64) {
    let c1 = HVec2::new(b.m11, b.m21);
    let c2 = HVec2::new(b.m12, b.m22);
    let (v, conf) = if c1.norm_sq() >= c2.norm_sq() {
        (c1, (c2.norm_sq() / c1.norm_sq().max(1e-300)).sqrt())
    } else {
        (c2, (c1.norm_sq() / c2.norm_sq().max(1e-300)).sqrt())
    };
    (v, conf)
}

fn normalize_rep(v: HVec2) -> Option<HVec2> {
    ProjPoint::new(v).map(|p| p.rep())
}

/// Reference norm for the zero tests: the interior maximum. Stacked
/// one-sided stencils make the outermost ~3 nodes of a closed chart O(1)
/// wrong in second-derivative quantities, so edge values must not veto an
/// all-zero classification.
fn interior_norm(chart: &GridChart, form: &OneForm<HMat2>) -> f64 {
    form.max_in(chart.interior())
}

fn extract(
    chart: &GridChart,
    form: &OneForm<HMat2>,
    eps_zero: f64,
    floor: f64,
    per_node: impl Fn(&HMat2) -> (HVec2, f64),
) -> Result<LineField, LineFieldError> {
    let max_norm = interior_norm(chart, form);
    if max_norm <= floor {
        return Err(LineFieldError::AllZero { max_norm, floor });
    }
    let zero_at = eps_zero * max_norm;
    let mut lines = Field::fill(chart.nx, chart.ny, HVec2::new(Quat::ONE, Quat::ZERO));
    let mut confidence = Field::fill(chart.nx, chart.ny, 1.0f64);
    let mut holes = Field::fill_bool(chart.nx, chart.ny, false);
    let mut hole_count = 0usize;
    for i in 0..chart.nx {
        for j in 0..chart.ny {
            let bx = form.cx.at(i, j);
            let by = form.cy.at(i, j);
            let b = if bx.norm() >= by.norm() { bx } else { by };
            if b.norm() < zero_at {
                holes.set(i, j, true);
                hole_count += 1;
                continue;
            }
            let (v, conf) = per_node(&b);
            match normalize_rep(v) {
                Some(rep) => {
                    lines.set(i, j, rep);
                    confidence.set(i, j, conf);
                }
                None => {
                    holes.set(i, j, true);
                    hole_count += 1;
                }
            }
        }
    }
    fill_holes(&mut lines, &holes, chart)?;
    Ok(LineField {
        lines,
        confidence,
        holes,
        hole_count,
    })
}

/// Kernel line field of a Hopf field: per node the dominant evaluation's
/// dominant row, holes filled by continuity.
///
/// `eps_zero` is the relative hole threshold; `floor` the absolute
/// all-zero threshold below which the whole field counts as vanishing
/// (the twistor termination signal).
pub fn kernel_line_field(
    chart: &GridChart,
    a: &OneForm<HMat2>,
    eps_zero: f64,
    floor: f64,
) -> Result<LineField, LineFieldError> {
    extract(chart, a, eps_zero, floor, kernel_of)
}

/// Image line field: mirror of [`kernel_line_field`] on dominant columns.
pub fn image_line_field(
    chart: &GridChart,
    q: &OneForm<HMat2>,
    eps_zero: f64,
    floor: f64,
) -> Result<LineField, LineFieldError> {
    extract(chart, q, eps_zero, floor, image_of)
}

/// Kernel line field pooling all four rows of both evaluations in a least
/// squares sense: `t` minimizing `Σ|aᵢ + bᵢ t|²` (or the mirrored
/// parameterization when better conditioned). Exact on rank-one data,
/// noise-averaging on rebuilt charts.
pub fn kernel_line_field_smooth(
    chart: &GridChart,
    a: &OneForm<HMat2>,
    eps_zero: f64,
    floor: f64,
) -> Result<LineField, LineFieldError> {
    let max_norm = interior_norm(chart, a);
    if max_norm <= floor {
        return Err(LineFieldError::AllZero { max_norm, floor });
    }
    let zero_at = eps_zero * max_norm;
    let mut lines = Field::fill(chart.nx, chart.ny, HVec2::new(Quat::ONE, Quat::ZERO));
    let mut confidence = Field::fill(chart.nx, chart.ny, 1.0f64);
    let mut holes = Field::fill_bool(chart.nx, chart.ny, false);
    let mut hole_count = 0usize;
    for i in 0..chart.nx {
        for j in 0..chart.ny {
            let mx = a.cx.at(i, j);
            let my = a.cy.at(i, j);
            if mx.norm().max(my.norm()) < zero_at {
                holes.set(i, j, true);
                hole_count += 1;
                continue;
            }
            let rows = [
                (mx.m11, mx.m12),
                (mx.m21, mx.m22),
                (my.m11, my.m12),
                (my.m21, my.m22),
            ];
            let mut bb = 0.0f64;
            let mut ba = Quat::ZERO;
            let mut aa = 0.0f64;
            let mut ab = Quat::ZERO;
            for (av, bv) in rows {
                bb += bv.norm_sq();
                ba += bv.conj() * av;
                aa += av.norm_sq();
                ab += av.conj() * bv;
            }
            let v = if bb >= aa {
                HVec2::new(Quat::ONE, -(ba * (1.0 / bb)))
            } else {
                HVec2::new(-(ab * (1.0 / aa)), Quat::ONE)
            };
            // residual-based confidence: how far the pooled rows are from
            // actually annihilating the line
            let mut res = 0.0f64;
            let mut scale = 0.0f64;
            for (av, bv) in rows {
                res += (av * v.a + bv * v.b).norm_sq();
                scale += (av.norm_sq() + bv.norm_sq()) * v.norm_sq();
            }
            let conf = (res / scale.max(1e-300)).sqrt();
            match normalize_rep(v) {
                Some(rep) => {
                    lines.set(i, j, rep);
                    confidence.set(i, j, conf);
                }
                None => {
                    holes.set(i, j, true);
                    hole_count += 1;
                }
            }
        }
    }
    fill_holes(&mut lines, &holes, chart)?;
    Ok(LineField {
        lines,
        confidence,
        holes,
        hole_count,
    })
}

/// Image line field via the Gram matrix `G = Σ cᵢ cᵢ*` of all four
/// columns of both evaluations: the dominant eigenvector of a 2×2
/// quaternion-Hermitian matrix, in closed form.
pub fn image_line_field_smooth(
    chart: &GridChart,
    q: &OneForm<HMat2>,
    eps_zero: f64,
    floor: f64,
) -> Result<LineField, LineFieldError> {
    let max_norm = interior_norm(chart, q);
    if max_norm <= floor {
        return Err(LineFieldError::AllZero { max_norm, floor });
    }
    let zero_at = eps_zero * max_norm;
    let mut lines = Field::fill(chart.nx, chart.ny, HVec2::new(Quat::ONE, Quat::ZERO));
    let mut confidence = Field::fill(chart.nx, chart.ny, 1.0f64);
    let mut holes = Field::fill_bool(chart.nx, chart.ny, false);
    let mut hole_count = 0usize;
    for i in 0..chart.nx {
        for j in 0..chart.ny {
            let mx = q.cx.at(i, j);
            let my = q.cy.at(i, j);
            if mx.norm().max(my.norm()) < zero_at {
                holes.set(i, j, true);
                hole_count += 1;
                continue;
            }
            let cols = [
                HVec2::new(mx.m11, mx.m21),
                HVec2::new(mx.m12, mx.m22),
                HVec2::new(my.m11, my.m21),
                HVec2::new(my.m12, my.m22),
            ];
            // G = Σ c c* = [[α, γ], [γ̄, β]] with α, β real
            let mut alpha = 0.0f64;
            let mut beta = 0.0f64;
            let mut gamma = Quat::ZERO;
            for c in cols {
                alpha += c.a.norm_sq();
                beta += c.b.norm_sq();
                gamma += c.a * c.b.conj();
            }
            let half = 0.5 * (alpha - beta);
            let lambda = 0.5 * (alpha + beta) + (half * half + gamma.norm_sq()).sqrt();
            // two algebraic branches of the eigenvector; same line where
            // both are nonzero, so take the better conditioned one
            let v1 = HVec2::new(gamma, Quat::scalar(lambda - alpha));
            let v2 = HVec2::new(Quat::scalar(lambda - beta), gamma.conj());
            let v = if v1.norm_sq() >= v2.norm_sq() { v1 } else { v2 };
            // residual eigenvalue gap as confidence: λ₂/λ₁
            let lambda2 = 0.5 * (alpha + beta) - (half * half + gamma.norm_sq()).sqrt();
            let conf = (lambda2.max(0.0) / lambda.max(1e-300)).sqrt();
            match normalize_rep(v) {
                Some(rep) => {
                    lines.set(i, j, rep);
                    confidence.set(i, j, conf);
                }
                None => {
                    holes.set(i, j, true);
                    hole_count += 1;
                }
            }
        }
    }
    fill_holes(&mut lines, &holes, chart)?;
    Ok(LineField {
        lines,
        confidence,
        holes,
        hole_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::OneForm;
    use crate::gallery;
    use crate::mcs;
    use crate::tol::EPS_ZERO_REL;

    /// A rank-one form `z·B₀ dx`-type with a simple zero at chart center
    /// and known kernel line.
    fn planted(n: usize) -> (GridChart, OneForm<HMat2>, ProjPoint) {
        let chart = GridChart::disk(
            n,
            n,
            -1.0,
            -1.0,
            2.0 / (n - 1) as f64,
            2.0 / (n - 1) as f64,
        )
        .unwrap();
        // B₀ = column·row with kernel (1, −k)ᵀH: row = (k, 1)
        let row = (Quat::K, Quat::ONE);
        let col = (Quat::ONE + Quat::J, Quat::I);
        let b0 = HMat2::new(
            col.0 * row.0,
            col.0 * row.1,
            col.1 * row.0,
            col.1 * row.1,
        );
        let fx = Field::from_fn(n, n, |i, j| {
            let (x, y) = chart.coord(i, j);
            b0 * Quat::complex(x, y).norm()
        });
        let fy = Field::from_fn(n, n, |i, j| {
            let (x, y) = chart.coord(i, j);
            b0 * (0.3 * Quat::complex(x, y).norm())
        });
        let kernel = ProjPoint::new(HVec2::new(Quat::ONE, -Quat::K)).unwrap();
        (chart, OneForm { cx: fx, cy: fy }, kernel)
    }

    #[test]
    fn planted_zero_filled() {
        let (chart, form, kernel) = planted(17);
        for extractor in [kernel_line_field, kernel_line_field_smooth] {
            let lf = extractor(&chart, &form, EPS_ZERO_REL, 1e-12).unwrap();
            assert!(lf.hole_count >= 1, "zero at center not detected");
            assert!(lf.holes.at(8, 8));
            let d = lf.max_distance_to(&kernel, chart.full());
            assert!(d < 1e-2, "filled kernel field off by {d}");
            assert!(lf.continuity(&chart) < 0.5);
        }
    }

    #[test]
    fn all_zero_raised() {
        let chart = GridChart::disk(16, 16, 0.0, 0.0, 0.1, 0.1).unwrap();
        let zero = OneForm {
            cx: Field::fill(16, 16, HMat2::ZERO),
            cy: Field::fill(16, 16, HMat2::ZERO),
        };
        assert!(matches!(
            kernel_line_field(&chart, &zero, 1e-5, 1e-8),
            Err(LineFieldError::AllZero { .. })
        ));
        assert!(matches!(
            image_line_field(&chart, &zero, 1e-5, 1e-8),
            Err(LineFieldError::AllZero { .. })
        ));
    }

    #[test]
    fn catenoid_kernel_and_image_constant() {
        let m = mcs::analyze(&gallery::catenoid_patch(65, 1.5).unwrap()).unwrap();
        let e = ProjPoint::new(HVec2::new(Quat::ONE, Quat::ZERO)).unwrap();
        let w = m.chart.interior();
        let ker = kernel_line_field(&m.chart, &m.hopf.a, EPS_ZERO_REL, 1e-12).unwrap();
        let dk = ker.max_distance_to(&e, w);
        assert!(dk < 5e-3, "ker A distance to eH: {dk}");
        let im = image_line_field(&m.chart, &m.hopf.q, EPS_ZERO_REL, 1e-12).unwrap();
        let di = im.max_distance_to(&e, w);
        assert!(di < 5e-3, "im Q distance to eH: {di}");
        // smooth variants agree
        let ks = kernel_line_field_smooth(&m.chart, &m.hopf.a, EPS_ZERO_REL, 1e-12).unwrap();
        assert!(ks.max_distance_to(&e, w) < 5e-3);
        let is_ = image_line_field_smooth(&m.chart, &m.hopf.q, EPS_ZERO_REL, 1e-12).unwrap();
        assert!(is_.max_distance_to(&e, w) < 5e-3);
    }

    #[test]
    fn clifford_image_continuous() {
        let m = mcs::analyze(&gallery::clifford_torus(32).unwrap()).unwrap();
        let im = image_line_field(&m.chart, &m.hopf.q, EPS_ZERO_REL, 1e-12).unwrap();
        assert_eq!(im.hole_count, 0);
        assert!(im.continuity(&m.chart) < 0.5);
    }

    #[test]
    fn constant_detection() {
        let m = mcs::analyze(&gallery::catenoid_patch(65, 1.5).unwrap()).unwrap();
        let ker = kernel_line_field(&m.chart, &m.hopf.a, EPS_ZERO_REL, 1e-12).unwrap();
        let w = m.chart.interior();
        let p = ker.constant_line(w, 1e-2).expect("catenoid kernel field is constant");
        let e = ProjPoint::new(HVec2::new(Quat::ONE, Quat::ZERO)).unwrap();
        assert!(p.chordal(&e) < 1e-3);
        // Clifford's image field is genuinely varying
        let mc = mcs::analyze(&gallery::clifford_torus(32).unwrap()).unwrap();
        let imc = image_line_field(&mc.chart, &mc.hopf.q, EPS_ZERO_REL, 1e-12).unwrap();
        assert!(imc.constant_line(mc.chart.full(), 1e-2).is_none());
    }
}
