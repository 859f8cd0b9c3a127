//! Versioned tolerance table.
//!
//! Every numerical gate in the crate reads its threshold from here, so a
//! report can cite a single tolerance-table version and a user can loosen
//! or tighten everything coherently through one scale factor.
//!
//! Resolution-dependent gates assume second-order stencils: a residual
//! that is O(h²) on an n-node chart shrinks by 4× when n doubles, so the
//! gates carry an `(n₀/n)²` factor anchored at a calibration resolution.

/// Version string recorded in reports next to any gate decision.
pub const TOL_VERSION: &str = "tol-1";

/// Relative zero threshold for rank decisions in 2×2 quaternionic
/// elimination: a second pivot below this fraction of the first counts as
/// zero. Large enough to absorb O(h²) contamination of analytically
/// rank-1 data at desk resolutions, small enough that a genuinely rank-2
/// matrix (pivot ratio O(1)) never passes.
pub const RANK_EPS: f64 = 1e-9;

/// Relative magnitude below which a Hopf-field value is treated as zero
/// when extracting its line field. Scaled by the field's global maximum.
pub const EPS_ZERO_REL: f64 = 1e-5;

/// Relative `|g_x|` threshold for branch-point masking: nodes where the
/// chart derivative collapses below this fraction of its global maximum
/// are masked and filled from neighbors.
pub const EPS_BRANCH_REL: f64 = 1e-6;

/// Both Hopf-field sup-norms below this absolute floor means the surface
/// is a piece of a round sphere (the congruence is constant, so `dS = 0`
/// identically; the floor only absorbs roundoff).
pub const ROUND_SPHERE_FLOOR: f64 = 1e-8;

/// Minimum acceptable frame margin: the affine chart `e` must stay at
/// least this chordal distance from every congruence line used with it.
pub const FRAME_MARGIN: f64 = 0.05;

/// Per-side shrink band (nodes) applied to a rebuilt chart on non-periodic
/// axes before re-running the congruence pipeline. A rebuilt map inherits
/// one-sided-stencil noise in its outermost ~3 nodes; re-differentiating
/// would push that noise past the normal interior margin on coarse grids.
pub const REBUILD_SHRINK: usize = 4;

/// Tolerance table with a user-adjustable global scale.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// Multiplies every resolution-dependent gate. 1.0 = calibrated defaults.
    pub scale: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { scale: 1.0 }
    }
}

impl Tolerances {
    pub fn new(scale: f64) -> Self {
        Tolerances { scale }
    }

    /// Harmonicity acceptance gate for an input surface at resolution `n`
    /// (smaller grid axis). Calibration points: the roughest genuinely
    /// Willmore gallery member (the twistor cubic) measures 1.4e−2 at
    /// n=33 falling ~4× per doubling, while the non-Willmore control
    /// plateaus at ~3.5e−2 for all n. The ceiling 0.025 splits the two at
    /// every resolution; the h² term takes over once it is sharper.
    pub fn harmonicity_gate(&self, n: usize) -> f64 {
        let r = 64.0 / n as f64;
        (0.05 * r * r).clamp(5e-3, 0.025) * self.scale
    }

    /// Twistor-detection gate on the ratio `‖A‖/‖Q‖` (or its mirror for
    /// the backward direction). On the twistor cubic at n=128 the true
    /// ratio is ~7e−4 and on its rebuilt successor ~4e−2; the gate at 8e−2
    /// separates both from generic surfaces (ratio O(1)) with ≥2× margin.
    /// Clamped so it neither collapses below discretization noise on fine
    /// grids nor opens past 0.1 on coarse ones.
    pub fn twistor_ratio_gate(&self, n: usize) -> f64 {
        let r = 128.0 / n as f64;
        (0.08 * r * r).clamp(5e-3, 0.1) * self.scale
    }

    /// Chordal spread below which a line field counts as constant
    /// (minimal-surface detection: `ker A` is the point at infinity of the
    /// chart). The spread of a genuinely constant field is pure O(h²)
    /// extraction noise, but its coefficient varies across the Möbius
    /// orbit of the surface: the catenoid in its standard chart measures
    /// 6.2e−4 at n=65 while its inversion through the origin reaches
    /// 6.6e−3 (the conjugated Hopf field is worse conditioned for the
    /// extraction). Genuinely varying transforms sit at O(1) spread. The
    /// coefficient 5e−3 clears the worst measured constant family ~3×
    /// and stays ~20× under generic fields at every desk resolution.
    pub fn constant_map_tol(&self, n: usize) -> f64 {
        let r = 128.0 / n as f64;
        5e-3 * r * r * self.scale
    }

    /// Maximum allowed path-integration defect for a one-step transform,
    /// expressed as a multiple of the input's harmonicity residual (the
    /// retraction form is closed exactly when the surface is harmonic, so
    /// the defect should track that residual, not exceed it).
    pub fn defect_factor(&self) -> f64 {
        10.0 * self.scale
    }
}
