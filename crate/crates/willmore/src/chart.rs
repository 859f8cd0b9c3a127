//! Structured conformal charts and the discrete calculus on them.
//!
//! Charts are node-centered rectangular grids in a conformal coordinate
//! `z = x + iy`, either closed rectangles (disk-type, one-sided stencils at
//! the edges) or tori (periodic wrap in both axes). Sampled 0-forms live in
//! [`Field`], 1-forms in [`OneForm`] as their evaluations on `∂x` and `∂y`.
//!
//! All derivative stencils are second order. One-sided edge stencils
//! pollute derived quantities to a depth of a few nodes, so every reported
//! residual maximum excludes an interior margin on non-periodic axes; see
//! [`GridChart::interior`].

use crate::quat::{HMat2, HVec2, Quat};
use rayon::prelude::*;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

/// Values a field can carry: closed under the linear operations the
/// calculus needs, with a magnitude for residual norms.
pub trait Value:
    Copy
    + Send
    + Sync
    + Default
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
{
    fn magnitude(self) -> f64;
}

impl Value for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Value for Quat {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

impl Value for HVec2 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

impl Value for HMat2 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("grid too small: {nx}x{ny} nodes (need at least 8 per axis)")]
    TooSmall { nx: usize, ny: usize },
    #[error("grid spacing must be positive, got hx={hx}, hy={hy}")]
    BadSpacing { hx: f64, hy: f64 },
}

/// A rectangular node grid in the conformal coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridChart {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub x0: f64,
    pub y0: f64,
    pub periodic_x: bool,
    pub periodic_y: bool,
}

impl GridChart {
    /// Doubly periodic chart with periods `nx·hx × ny·hy`.
    pub fn torus(nx: usize, ny: usize, hx: f64, hy: f64) -> Result<Self, ChartError> {
        Self::build(nx, ny, hx, hy, 0.0, 0.0, true, true)
    }

    /// Closed rectangle `[x0, x0+(nx−1)hx] × [y0, y0+(ny−1)hy]`.
    pub fn disk(
        nx: usize,
        ny: usize,
        x0: f64,
        y0: f64,
        hx: f64,
        hy: f64,
    ) -> Result<Self, ChartError> {
        Self::build(nx, ny, hx, hy, x0, y0, false, false)
    }

    /// Rectangle closed in `x`, periodic in `y` (cylinder charts such as the
    /// catenoid's).
    pub fn cylinder(
        nx: usize,
        ny: usize,
        x0: f64,
        y0: f64,
        hx: f64,
        hy: f64,
    ) -> Result<Self, ChartError> {
        Self::build(nx, ny, hx, hy, x0, y0, false, true)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        nx: usize,
        ny: usize,
        hx: f64,
        hy: f64,
        x0: f64,
        y0: f64,
        px: bool,
        py: bool,
    ) -> Result<Self, ChartError> {
        if nx < 8 || ny < 8 {
            return Err(ChartError::TooSmall { nx, ny });
        }
        if !(hx > 0.0 && hy > 0.0) {
            return Err(ChartError::BadSpacing { hx, hy });
        }
        Ok(GridChart {
            nx,
            ny,
            hx,
            hy,
            x0,
            y0,
            periodic_x: px,
            periodic_y: py,
        })
    }

    #[inline]
    pub fn coord(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x0 + i as f64 * self.hx, self.y0 + j as f64 * self.hy)
    }

    pub fn is_torus(&self) -> bool {
        self.periodic_x && self.periodic_y
    }

    /// Trim depth for residual reports on a non-periodic axis. One-sided
    /// stencils corrupt second-generation derivatives about three nodes
    /// deep, so a fixed band of 4 is the floor; on fine grids the band
    /// grows with the node count so the window keeps a fixed fraction of
    /// the chart.
    pub fn margin(n: usize, periodic: bool) -> usize {
        if periodic {
            0
        } else {
            4.max((0.05 * n as f64).ceil() as usize)
        }
    }

    pub fn margin_x(&self) -> usize {
        Self::margin(self.nx, self.periodic_x)
    }

    pub fn margin_y(&self) -> usize {
        Self::margin(self.ny, self.periodic_y)
    }

    /// Interior node window for residual maxima.
    pub fn interior(&self) -> Window {
        let mx = self.margin_x();
        let my = self.margin_y();
        Window {
            i0: mx,
            i1: self.nx - mx,
            j0: my,
            j1: self.ny - my,
        }
    }

    /// Interior cell window (cells are indexed by their lower-left node;
    /// a periodic axis has `n` cells, a closed one `n−1`).
    pub fn interior_cells(&self) -> Window {
        let mx = self.margin_x();
        let my = self.margin_y();
        Window {
            i0: mx,
            i1: if self.periodic_x { self.nx } else { self.nx - 1 - mx },
            j0: my,
            j1: if self.periodic_y { self.ny } else { self.ny - 1 - my },
        }
    }

    pub fn full(&self) -> Window {
        Window {
            i0: 0,
            i1: self.nx,
            j0: 0,
            j1: self.ny,
        }
    }
}

/// Half-open index window `[i0, i1) × [j0, j1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl Window {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.i0 && i < self.i1 && j >= self.j0 && j < self.j1
    }

    /// Shrink by `b` nodes on every side.
    pub fn shrunk(&self, b: usize) -> Window {
        Window {
            i0: self.i0 + b,
            i1: self.i1.saturating_sub(b),
            j0: self.j0 + b,
            j1: self.j1.saturating_sub(b),
        }
    }
}

/// A sampled 0-form: an `nx × ny` array of values, row = x-index.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    nx: usize,
    ny: usize,
    data: Vec<T>,
}

impl<T: Value> Field<T> {
    pub fn fill(nx: usize, ny: usize, v: T) -> Self {
        Field {
            nx,
            ny,
            data: vec![v; nx * ny],
        }
    }

    /// Build a field by evaluating `f(i, j)` at every node. Rows are filled
    /// in parallel; each value lands at a fixed index, so the result is
    /// identical for any thread count.
    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(usize, usize) -> T + Sync) -> Self {
        let mut data = vec![T::default(); nx * ny];
        data.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = f(i, j);
            }
        });
        Field { nx, ny, data }
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.ny + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.ny + j] = v;
    }

    pub fn map<U: Value>(&self, f: impl Fn(T) -> U + Sync) -> Field<U> {
        Field::from_fn(self.nx, self.ny, |i, j| f(self.at(i, j)))
    }

    pub fn zip<U: Value, V: Value>(
        &self,
        o: &Field<U>,
        f: impl Fn(T, U) -> V + Sync,
    ) -> Field<V> {
        Field::from_fn(self.nx, self.ny, |i, j| f(self.at(i, j), o.at(i, j)))
    }

    /// Maximum magnitude over a window, in fixed index order.
    pub fn max_in(&self, w: Window) -> f64 {
        let mut m = 0.0f64;
        for i in w.i0..w.i1 {
            for j in w.j0..w.j1 {
                m = m.max(self.at(i, j).magnitude());
            }
        }
        m
    }

    pub fn max_all(&self) -> f64 {
        let mut m = 0.0f64;
        for v in &self.data {
            m = m.max(v.magnitude());
        }
        m
    }

    /// Maximum magnitude over a window, skipping nodes within a Chebyshev
    /// distance of 1 from any masked node (`mask = true` means excluded).
    pub fn max_in_masked(&self, w: Window, halo: Option<&Field<bool>>) -> f64 {
        match halo {
            None => self.max_in(w),
            Some(h) => {
                let mut m = 0.0f64;
                for i in w.i0..w.i1 {
                    for j in w.j0..w.j1 {
                        if !h.at(i, j) {
                            m = m.max(self.at(i, j).magnitude());
                        }
                    }
                }
                m
            }
        }
    }

    /// Sum over a window in fixed index order (deterministic reduction).
    pub fn sum_in(&self, w: Window) -> T {
        let mut s = T::default();
        for i in w.i0..w.i1 {
            for j in w.j0..w.j1 {
                s = s + self.at(i, j);
            }
        }
        s
    }
}

impl Field<bool> {
    pub fn fill_bool(nx: usize, ny: usize, v: bool) -> Self {
        Field {
            nx,
            ny,
            data: vec![v; nx * ny],
        }
    }

    pub fn from_fn_bool(nx: usize, ny: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                data.push(f(i, j));
            }
        }
        Field { nx, ny, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> bool {
        self.data[i * self.ny + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[i * self.ny + j] = v;
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Dilate by one node in Chebyshev distance (used for mask halos).
    pub fn dilate(&self, periodic_x: bool, periodic_y: bool) -> Field<bool> {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        Field::from_fn_bool(self.nx, self.ny, |i, j| {
            for di in -1..=1isize {
                for dj in -1..=1isize {
                    let mut ii = i as isize + di;
                    let mut jj = j as isize + dj;
                    if periodic_x {
                        ii = ii.rem_euclid(nx);
                    }
                    if periodic_y {
                        jj = jj.rem_euclid(ny);
                    }
                    if ii >= 0 && ii < nx && jj >= 0 && jj < ny && self.at(ii as usize, jj as usize)
                    {
                        return true;
                    }
                }
            }
            false
        })
    }
}

/// A sampled 1-form: evaluations on `∂x` and `∂y`.
#[derive(Clone, Debug)]
pub struct OneForm<T> {
    pub cx: Field<T>,
    pub cy: Field<T>,
}

impl<T: Value> OneForm<T> {
    pub fn max_in(&self, w: Window) -> f64 {
        self.cx.max_in(w).max(self.cy.max_in(w))
    }

    pub fn max_all(&self) -> f64 {
        self.cx.max_all().max(self.cy.max_all())
    }

    pub fn max_in_masked(&self, w: Window, halo: Option<&Field<bool>>) -> f64 {
        self.cx
            .max_in_masked(w, halo)
            .max(self.cy.max_in_masked(w, halo))
    }

    pub fn map<U: Value>(&self, f: impl Fn(T) -> U + Sync) -> OneForm<U> {
        OneForm {
            cx: self.cx.map(&f),
            cy: self.cy.map(&f),
        }
    }

    /// Combine componentwise with another form.
    pub fn zip_form<U: Value, V: Value>(
        &self,
        o: &OneForm<U>,
        f: impl Fn(T, U) -> V + Sync,
    ) -> OneForm<V> {
        OneForm {
            cx: self.cx.zip(&o.cx, &f),
            cy: self.cy.zip(&o.cy, &f),
        }
    }

    /// Combine each component with the same 0-form (e.g. `S·A` nodewise).
    pub fn zip_field<U: Value, V: Value>(
        &self,
        s: &Field<U>,
        f: impl Fn(T, U) -> V + Sync,
    ) -> OneForm<V> {
        OneForm {
            cx: self.cx.zip(s, &f),
            cy: self.cy.zip(s, &f),
        }
    }
}

#[inline]
fn d_node<T: Value>(
    n: usize,
    h: f64,
    periodic: bool,
    idx: usize,
    get: impl Fn(usize) -> T,
) -> T {
    let inv2h = 1.0 / (2.0 * h);
    if periodic {
        let prev = if idx == 0 { n - 1 } else { idx - 1 };
        let next = if idx + 1 == n { 0 } else { idx + 1 };
        (get(next) - get(prev)) * inv2h
    } else if idx == 0 {
        // second-order one-sided: (−3f₀ + 4f₁ − f₂) / 2h
        (get(1) * 4.0 - get(0) * 3.0 - get(2)) * inv2h
    } else if idx + 1 == n {
        (get(n - 1) * 3.0 - get(n - 2) * 4.0 + get(n - 3)) * inv2h
    } else {
        (get(idx + 1) - get(idx - 1)) * inv2h
    }
}

/// Discrete differential: central differences in the interior and across
/// periodic seams, second-order one-sided stencils at closed edges.
pub fn differential<T: Value>(chart: &GridChart, f: &Field<T>) -> OneForm<T> {
    let cx = Field::from_fn(chart.nx, chart.ny, |i, j| {
        d_node(chart.nx, chart.hx, chart.periodic_x, i, |ii| f.at(ii, j))
    });
    let cy = Field::from_fn(chart.nx, chart.ny, |i, j| {
        d_node(chart.ny, chart.hy, chart.periodic_y, j, |jj| f.at(i, jj))
    });
    OneForm { cx, cy }
}

/// The complex structure on 1-forms: `(*ω)(X) = ω(JX)` with `J∂x = ∂y`,
/// so `(*ω)_x = ω_y` and `(*ω)_y = −ω_x`. Algebraic (no stencils), and an
/// exact anti-involution: `** = −id`.
pub fn star<T: Value>(w: &OneForm<T>) -> OneForm<T> {
    OneForm {
        cx: w.cy.clone(),
        cy: w.cx.map(|v| -v),
    }
}

/// The `dx∧dy` coefficient of `α∧β` for endomorphism-valued forms:
/// `α_x β_y − α_y β_x` with values composed.
pub fn wedge(a: &OneForm<HMat2>, b: &OneForm<HMat2>) -> Field<HMat2> {
    Field::from_fn(a.cx.nx(), a.cx.ny(), |i, j| {
        a.cx.at(i, j) * b.cy.at(i, j) - a.cy.at(i, j) * b.cx.at(i, j)
    })
}

/// The `dx∧dy` coefficient of `dω`: `∂x(ω_y) − ∂y(ω_x)`.
pub fn exterior_d<T: Value>(chart: &GridChart, w: &OneForm<T>) -> Field<T> {
    let dyx = differential(chart, &w.cy).cx;
    let dxy = differential(chart, &w.cx).cy;
    Field::from_fn(chart.nx, chart.ny, |i, j| dyx.at(i, j) - dxy.at(i, j))
}

/// Quadrature of a scalar density over the whole chart: exact lattice sum
/// on periodic axes, trapezoid weights on closed axes.
pub fn integrate(chart: &GridChart, rho: &Field<f64>) -> f64 {
    let wx = |i: usize| -> f64 {
        if chart.periodic_x || (i > 0 && i + 1 < chart.nx) {
            1.0
        } else {
            0.5
        }
    };
    let wy = |j: usize| -> f64 {
        if chart.periodic_y || (j > 0 && j + 1 < chart.ny) {
            1.0
        } else {
            0.5
        }
    };
    let mut s = 0.0;
    for i in 0..chart.nx {
        for j in 0..chart.ny {
            s += rho.at(i, j) * wx(i) * wy(j);
        }
    }
    s * chart.hx * chart.hy
}

/// Plain node-sum quadrature over a window, `Σ ρ · hx·hy`. Used when two
/// quantities must be compared over exactly the same region.
pub fn integrate_window(chart: &GridChart, rho: &Field<f64>, w: Window) -> f64 {
    let mut s = 0.0;
    for i in w.i0..w.i1 {
        for j in w.j0..w.j1 {
            s += rho.at(i, j);
        }
    }
    s * chart.hx * chart.hy
}

/// Result of [`path_integrate`].
pub struct PathIntegral {
    pub values: Field<Quat>,
    /// Maximum cell circulation per unit cell area over interior cells: a
    /// direct closedness diagnostic in the same units as a harmonicity
    /// residual.
    pub defect: f64,
    /// Lattice periods `∮ω` along x and y (torus charts only, else zero).
    pub periods: Vec<Quat>,
}

/// Integrate a quaternion-valued 1-form along a comb spanning tree rooted
/// at `base`: a spine along the base row in x, teeth along columns in y,
/// trapezoid rule per lattice edge.
///
/// The comb is rooted at the chart center by callers so that no tree path
/// runs along the one-sided edge stencils.
pub fn path_integrate(
    chart: &GridChart,
    w: &OneForm<Quat>,
    base: (usize, usize),
) -> PathIntegral {
    let (nx, ny) = (chart.nx, chart.ny);
    let (bi, bj) = base;
    let mut vals = Field::fill(nx, ny, Quat::ZERO);
    // Spine: walk the base row outward in both x directions.
    for i in bi + 1..nx {
        let step = (w.cx.at(i - 1, bj) + w.cx.at(i, bj)) * (0.5 * chart.hx);
        let v = vals.at(i - 1, bj) + step;
        vals.set(i, bj, v);
    }
    for i in (0..bi).rev() {
        let step = (w.cx.at(i, bj) + w.cx.at(i + 1, bj)) * (0.5 * chart.hx);
        let v = vals.at(i + 1, bj) - step;
        vals.set(i, bj, v);
    }
    // Teeth: walk every column outward from the spine.
    for i in 0..nx {
        for j in bj + 1..ny {
            let step = (w.cy.at(i, j - 1) + w.cy.at(i, j)) * (0.5 * chart.hy);
            let v = vals.at(i, j - 1) + step;
            vals.set(i, j, v);
        }
        for j in (0..bj).rev() {
            let step = (w.cy.at(i, j) + w.cy.at(i, j + 1)) * (0.5 * chart.hy);
            let v = vals.at(i, j + 1) - step;
            vals.set(i, j, v);
        }
    }
    // Closedness defect: trapezoid circulation around each interior cell,
    // normalized by cell area.
    let cells = chart.interior_cells();
    let area = chart.hx * chart.hy;
    let mut defect = 0.0f64;
    for i in cells.i0..cells.i1 {
        for j in cells.j0..cells.j1 {
            let ip = if i + 1 == nx { 0 } else { i + 1 };
            let jp = if j + 1 == ny { 0 } else { j + 1 };
            let c = (w.cx.at(i, j) + w.cx.at(ip, j)) * (0.5 * chart.hx)
                + (w.cy.at(ip, j) + w.cy.at(ip, jp)) * (0.5 * chart.hy)
                - (w.cx.at(i, jp) + w.cx.at(ip, jp)) * (0.5 * chart.hx)
                - (w.cy.at(i, j) + w.cy.at(i, jp)) * (0.5 * chart.hy);
            defect = defect.max(c.norm() / area);
        }
    }
    // Torus periods along the two lattice loops through the base node.
    let mut periods = Vec::new();
    if chart.is_torus() {
        let mut px = Quat::ZERO;
        for i in 0..nx {
            let ip = if i + 1 == nx { 0 } else { i + 1 };
            px += (w.cx.at(i, bj) + w.cx.at(ip, bj)) * (0.5 * chart.hx);
        }
        let mut py = Quat::ZERO;
        for j in 0..ny {
            let jp = if j + 1 == ny { 0 } else { j + 1 };
            py += (w.cy.at(bi, j) + w.cy.at(bi, jp)) * (0.5 * chart.hy);
        }
        periods.push(px);
        periods.push(py);
    }
    PathIntegral {
        values: vals,
        defect,
        periods,
    }
}

/// Curvature of the connection `d + ω`: the `dx∧dy` coefficient of
/// `dω + ω∧ω`.
pub fn connection_curvature(chart: &GridChart, w: &OneForm<HMat2>) -> Field<HMat2> {
    let dw = exterior_d(chart, w);
    let ww = wedge(w, w);
    Field::from_fn(chart.nx, chart.ny, |i, j| dw.at(i, j) + ww.at(i, j))
}
