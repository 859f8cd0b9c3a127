//! Independent Euclidean Willmore-energy oracle.
//!
//! Treats the chart map as a plain immersion into `R⁴` (the four real
//! coefficients of the quaternion), computes first and second fundamental
//! forms by finite differences, the mean curvature vector `H⃗`, Gauss
//! curvature `K`, normal curvature `K⊥`, and the classical integrand
//! `(|H⃗|² − K − K⊥)·dA`.
//!
//! This module deliberately shares no computational code with the
//! quaternionic pipeline — it keeps its own arrays, its own stencils and
//! its own quadrature — so agreement between the two on a gallery surface
//! certifies the quaternionic normalization rather than echoing it.

use crate::mcs::SurfaceChart;

type V4 = [f64; 4];

fn dot(a: V4, b: V4) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

fn axpy(a: f64, x: V4, y: V4) -> V4 {
    [
        a * x[0] + y[0],
        a * x[1] + y[1],
        a * x[2] + y[2],
        a * x[3] + y[3],
    ]
}

fn scale(a: f64, x: V4) -> V4 {
    [a * x[0], a * x[1], a * x[2], a * x[3]]
}

fn det4(m: [V4; 4]) -> f64 {
    // Laplace expansion along the first row via 3×3 minors.
    let minor = |r: [usize; 3], c: [usize; 3]| -> f64 {
        m[r[0]][c[0]] * (m[r[1]][c[1]] * m[r[2]][c[2]] - m[r[1]][c[2]] * m[r[2]][c[1]])
            - m[r[0]][c[1]] * (m[r[1]][c[0]] * m[r[2]][c[2]] - m[r[1]][c[2]] * m[r[2]][c[0]])
            + m[r[0]][c[2]] * (m[r[1]][c[0]] * m[r[2]][c[1]] - m[r[1]][c[1]] * m[r[2]][c[0]])
    };
    m[0][0] * minor([1, 2, 3], [1, 2, 3]) - m[0][1] * minor([1, 2, 3], [0, 2, 3])
        + m[0][2] * minor([1, 2, 3], [0, 1, 3])
        - m[0][3] * minor([1, 2, 3], [0, 1, 2])
}

struct Grid4 {
    nx: usize,
    ny: usize,
    data: Vec<V4>,
}

impl Grid4 {
    fn at(&self, i: usize, j: usize) -> V4 {
        self.data[i * self.ny + j]
    }

    fn diff(&self, axis: usize, h: f64, periodic: bool) -> Grid4 {
        let (nx, ny) = (self.nx, self.ny);
        let n = if axis == 0 { nx } else { ny };
        let inv2h = 1.0 / (2.0 * h);
        let mut out = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                let idx = if axis == 0 { i } else { j };
                let get = |k: usize| -> V4 {
                    if axis == 0 {
                        self.at(k, j)
                    } else {
                        self.at(i, k)
                    }
                };
                let mut d = [0.0; 4];
                for c in 0..4 {
                    d[c] = if periodic {
                        let p = if idx == 0 { n - 1 } else { idx - 1 };
                        let q = if idx + 1 == n { 0 } else { idx + 1 };
                        (get(q)[c] - get(p)[c]) * inv2h
                    } else if idx == 0 {
                        (-3.0 * get(0)[c] + 4.0 * get(1)[c] - get(2)[c]) * inv2h
                    } else if idx + 1 == n {
                        (3.0 * get(n - 1)[c] - 4.0 * get(n - 2)[c] + get(n - 3)[c]) * inv2h
                    } else {
                        (get(idx + 1)[c] - get(idx - 1)[c]) * inv2h
                    };
                }
                out.push(d);
            }
        }
        Grid4 { nx, ny, data: out }
    }
}

/// Per-node oracle output plus quadrature helpers.
pub struct OracleData {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    periodic_x: bool,
    periodic_y: bool,
    /// Willmore integrand `(|H⃗|² − K − K⊥)·√(EG−F²)` per node.
    pub density: Vec<f64>,
    /// `|H⃗|` per node (row-major), for curvature cross-checks.
    pub hvec_norm: Vec<f64>,
}

impl OracleData {
    pub fn density_at(&self, i: usize, j: usize) -> f64 {
        self.density[i * self.ny + j]
    }

    pub fn hvec_at(&self, i: usize, j: usize) -> f64 {
        self.hvec_norm[i * self.ny + j]
    }

    /// Full-chart energy: plain lattice sum on periodic axes, trapezoid
    /// weights on closed ones.
    pub fn energy(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.nx {
            for j in 0..self.ny {
                let wi = if self.periodic_x || (i > 0 && i + 1 < self.nx) {
                    1.0
                } else {
                    0.5
                };
                let wj = if self.periodic_y || (j > 0 && j + 1 < self.ny) {
                    1.0
                } else {
                    0.5
                };
                s += self.density_at(i, j) * wi * wj;
            }
        }
        s * self.hx * self.hy
    }

    /// Plain node-sum energy over an index window `[i0,i1)×[j0,j1)`, for
    /// like-for-like comparisons with a window-restricted energy.
    pub fn energy_window(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> f64 {
        let mut s = 0.0;
        for i in i0..i1 {
            for j in j0..j1 {
                s += self.density_at(i, j);
            }
        }
        s * self.hx * self.hy
    }
}

/// Run the Euclidean pipeline on a sampled chart.
pub fn euclidean_oracle(s: &SurfaceChart) -> OracleData {
    let (nx, ny) = (s.chart.nx, s.chart.ny);
    let mut data = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let q = s.g.at(i, j);
            data.push([q.w, q.x, q.y, q.z]);
        }
    }
    let r = Grid4 { nx, ny, data };
    let ru = r.diff(0, s.chart.hx, s.chart.periodic_x);
    let rv = r.diff(1, s.chart.hy, s.chart.periodic_y);
    let ruu = ru.diff(0, s.chart.hx, s.chart.periodic_x);
    let ruv = rv.diff(0, s.chart.hx, s.chart.periodic_x);
    let rvv = rv.diff(1, s.chart.hy, s.chart.periodic_y);

    let mut density = vec![0.0; nx * ny];
    let mut hnorm = vec![0.0; nx * ny];
    let mut wd_max = 0.0f64;
    for idx in 0..nx * ny {
        let gu = ru.data[idx];
        let gv = rv.data[idx];
        let e = dot(gu, gu);
        let g = dot(gv, gv);
        let f = dot(gu, gv);
        wd_max = wd_max.max(e * g - f * f);
    }
    for i in 0..nx {
        for j in 0..ny {
            let idx = i * ny + j;
            let gu = ru.data[idx];
            let gv = rv.data[idx];
            let e = dot(gu, gu);
            let f = dot(gu, gv);
            let g = dot(gv, gv);
            let wd = e * g - f * f;
            if wd <= 1e-14 * wd_max {
                continue; // degenerate node: contributes nothing
            }
            // orthonormal tangent frame
            let e1 = scale(1.0 / e.sqrt(), gu);
            let g2 = axpy(-dot(gv, e1), e1, gv);
            let g2n = dot(g2, g2).sqrt();
            let e2 = scale(1.0 / g2n, g2);
            let normal_part = |w: V4| -> V4 {
                let t = axpy(-dot(w, e1), e1, w);
                axpy(-dot(t, e2), e2, t)
            };
            let ii_uu = normal_part(ruu.data[idx]);
            let ii_uv = normal_part(ruv.data[idx]);
            let ii_vv = normal_part(rvv.data[idx]);
            let hvec = scale(
                1.0 / (2.0 * wd),
                axpy(
                    g,
                    ii_uu,
                    axpy(-2.0 * f, ii_uv, scale(e, ii_vv)),
                ),
            );
            let kg = (dot(ii_uu, ii_vv) - dot(ii_uv, ii_uv)) / wd;
            // orthonormal normal frame: coordinate axes projected to the
            // normal space, two largest survivors, Gram-Schmidt, oriented
            // by det(e1, e2, n1, n2) > 0
            let mut cands: Vec<(f64, V4)> = (0..4)
                .map(|k| {
                    let mut b = [0.0; 4];
                    b[k] = 1.0;
                    let c = normal_part(b);
                    (dot(c, c).sqrt(), c)
                })
                .collect();
            cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let n1 = scale(1.0 / cands[0].0, cands[0].1);
            let b2 = axpy(-dot(cands[1].1, n1), n1, cands[1].1);
            let mut n2 = scale(1.0 / dot(b2, b2).sqrt(), b2);
            if det4([e1, e2, n1, n2]) < 0.0 {
                n2 = scale(-1.0, n2);
            }
            // second fundamental form in the orthonormal tangent frame
            let c11 = 1.0 / e.sqrt();
            let c21 = -f / e / g2n;
            let c22 = 1.0 / g2n;
            let ii11 = scale(c11 * c11, ii_uu);
            let ii12 = axpy(c11 * c21, ii_uu, scale(c11 * c22, ii_uv));
            let ii22 = axpy(
                c21 * c21,
                ii_uu,
                axpy(2.0 * c21 * c22, ii_uv, scale(c22 * c22, ii_vv)),
            );
            // shape-operator matrices against n1, n2; K⊥ from their
            // commutator (Ricci equation), sign pinned by the Clifford
            // calibration
            let a1 = [
                [dot(ii11, n1), dot(ii12, n1)],
                [dot(ii12, n1), dot(ii22, n1)],
            ];
            let a2 = [
                [dot(ii11, n2), dot(ii12, n2)],
                [dot(ii12, n2), dot(ii22, n2)],
            ];
            let comm10 = a1[1][0] * a2[0][0] + a1[1][1] * a2[1][0]
                - (a2[1][0] * a1[0][0] + a2[1][1] * a1[1][0]);
            let kperp = comm10;
            hnorm[idx] = dot(hvec, hvec).sqrt();
            density[idx] = (dot(hvec, hvec) - kg - kperp) * wd.sqrt();
        }
    }
    OracleData {
        nx,
        ny,
        hx: s.chart.hx,
        hy: s.chart.hy,
        periodic_x: s.chart.periodic_x,
        periodic_y: s.chart.periodic_y,
        density,
        hvec_norm: hnorm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Field, GridChart};
    use crate::gallery;
    use crate::quat::Quat;
    use std::f64::consts::PI;

    #[test]
    fn flat_plane_zero() {
        let n = 16;
        let chart = GridChart::disk(n, n, 0.0, 0.0, 0.1, 0.1).unwrap();
        let g = Field::from_fn(n, n, |i, j| {
            let (x, y) = chart.coord(i, j);
            Quat::complex(x, y)
        });
        let o = euclidean_oracle(&SurfaceChart::new("plane", chart, g));
        assert!(o.energy().abs() < 1e-10);
    }

    #[test]
    fn round_sphere_cancels() {
        // |H⃗|² = K = 1 and K⊥ = 0 on the unit-sphere patch
        let o = euclidean_oracle(&gallery::round_sphere(33).unwrap());
        let m = 4;
        assert!(o.energy_window(m, 33 - m, m, 33 - m).abs() < 1e-3);
    }

    #[test]
    fn clifford_torus_two_pi_squared() {
        let o = euclidean_oracle(&gallery::clifford_torus(64).unwrap());
        let w = o.energy();
        // exact lattice value for single-frequency data: (sin h / h)² · 2π²
        let h = 2.0 * PI / 64.0;
        let expect = (h.sin() / h).powi(2) * 2.0 * PI * PI;
        assert!(
            (w - expect).abs() < 1e-8,
            "w={w}, expected {expect}"
        );
        assert!((w - 2.0 * PI * PI).abs() / (2.0 * PI * PI) < 0.01);
    }

    #[test]
    fn clifford_mean_curvature_unit() {
        let o = euclidean_oracle(&gallery::clifford_torus(32).unwrap());
        for i in 0..32 {
            for j in 0..32 {
                assert!((o.hvec_at(i, j) - 1.0).abs() < 5e-3, "at ({i},{j}): {}", o.hvec_at(i, j));
            }
        }
    }
}
