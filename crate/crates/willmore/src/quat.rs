//! Quaternionic scalars and linear algebra on H².
//!
//! Everything downstream treats H² as a *right* H-module: lines are right
//! submodules `vH`, scalars act from the right, and 2×2 matrices act from
//! the left, so `(Bv)·λ = B(v·λ)` holds by construction. Multiplication
//! uses the Hamilton convention `ij = k`.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// A quaternion `w + x·i + y·j + z·k`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const ZERO: Quat = Quat::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quat = Quat::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quat = Quat::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quat = Quat::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quat = Quat::new(0.0, 0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    /// Embed a real scalar.
    #[inline]
    pub const fn scalar(s: f64) -> Self {
        Quat::new(s, 0.0, 0.0, 0.0)
    }

    /// Embed a complex number into the `span{1, i}` plane.
    #[inline]
    pub const fn complex(re: f64, im: f64) -> Self {
        Quat::new(re, im, 0.0, 0.0)
    }

    #[inline]
    pub fn conj(self) -> Self {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Two-sided inverse `q̄ / |q|²`. Division by a vanishing quaternion
    /// yields non-finite components; gated call sites use [`Quat::try_inv`].
    #[inline]
    pub fn inv(self) -> Self {
        self.conj() / self.norm_sq()
    }

    /// Inverse with an explicit zero-divisor guard.
    #[inline]
    pub fn try_inv(self, eps: f64) -> Option<Self> {
        if self.norm() <= eps {
            None
        } else {
            Some(self.inv())
        }
    }

    #[inline]
    pub fn re(self) -> f64 {
        self.w
    }

    /// Imaginary part as a quaternion (real component dropped).
    #[inline]
    pub fn im(self) -> Self {
        Quat::new(0.0, self.x, self.y, self.z)
    }

    /// Imaginary part rescaled to unit norm: the nearest exact square root
    /// of −1. Returns `i` for inputs with no imaginary part at all, so the
    /// result always satisfies `q² = −1` to machine precision.
    #[inline]
    pub fn unit_im(self) -> Self {
        let v = self.im();
        let n = v.norm();
        if n == 0.0 {
            Quat::I
        } else {
            v / n
        }
    }

    /// Euclidean inner product of the four coefficients.
    #[inline]
    pub fn dot(self, o: Self) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Quat {
    type Output = Quat;
    #[inline]
    fn add(self, o: Quat) -> Quat {
        Quat::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Quat {
    type Output = Quat;
    #[inline]
    fn sub(self, o: Quat) -> Quat {
        Quat::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quat {
    type Output = Quat;
    #[inline]
    fn neg(self) -> Quat {
        Quat::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl AddAssign for Quat {
    #[inline]
    fn add_assign(&mut self, o: Quat) {
        *self = *self + o;
    }
}

impl SubAssign for Quat {
    #[inline]
    fn sub_assign(&mut self, o: Quat) {
        *self = *self - o;
    }
}

impl Mul for Quat {
    type Output = Quat;
    /// Hamilton product, `ij = k`.
    #[inline]
    fn mul(self, o: Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

impl Mul<f64> for Quat {
    type Output = Quat;
    #[inline]
    fn mul(self, s: f64) -> Quat {
        Quat::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Quat {
    type Output = Quat;
    #[inline]
    fn div(self, s: f64) -> Quat {
        Quat::new(self.w / s, self.x / s, self.y / s, self.z / s)
    }
}

/// A column vector in H² with the right scalar action `(v·λ) = (aλ, bλ)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct HVec2 {
    pub a: Quat,
    pub b: Quat,
}

impl HVec2 {
    #[inline]
    pub const fn new(a: Quat, b: Quat) -> Self {
        HVec2 { a, b }
    }

    /// Right scalar action.
    #[inline]
    pub fn scale_r(self, l: Quat) -> Self {
        HVec2::new(self.a * l, self.b * l)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.a.norm_sq() + self.b.norm_sq()
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Hermitian pairing `⟨v, w⟩ = v̄ᵃwᵃ + v̄ᵇwᵇ` (conjugate-linear in `self`).
    #[inline]
    pub fn herm(self, o: Self) -> Quat {
        self.a.conj() * o.a + self.b.conj() * o.b
    }
}

impl Add for HVec2 {
    type Output = HVec2;
    #[inline]
    fn add(self, o: HVec2) -> HVec2 {
        HVec2::new(self.a + o.a, self.b + o.b)
    }
}

impl Sub for HVec2 {
    type Output = HVec2;
    #[inline]
    fn sub(self, o: HVec2) -> HVec2 {
        HVec2::new(self.a - o.a, self.b - o.b)
    }
}

impl Neg for HVec2 {
    type Output = HVec2;
    #[inline]
    fn neg(self) -> HVec2 {
        HVec2::new(-self.a, -self.b)
    }
}

impl Mul<f64> for HVec2 {
    type Output = HVec2;
    #[inline]
    fn mul(self, s: f64) -> HVec2 {
        HVec2::new(self.a * s, self.b * s)
    }
}

/// A 2×2 quaternionic matrix acting on [`HVec2`] from the left.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct HMat2 {
    pub m11: Quat,
    pub m12: Quat,
    pub m21: Quat,
    pub m22: Quat,
}

impl HMat2 {
    pub const ZERO: HMat2 = HMat2::new(Quat::ZERO, Quat::ZERO, Quat::ZERO, Quat::ZERO);
    pub const IDENTITY: HMat2 = HMat2::new(Quat::ONE, Quat::ZERO, Quat::ZERO, Quat::ONE);

    #[inline]
    pub const fn new(m11: Quat, m12: Quat, m21: Quat, m22: Quat) -> Self {
        HMat2 { m11, m12, m21, m22 }
    }

    #[inline]
    pub const fn from_columns(c1: HVec2, c2: HVec2) -> Self {
        HMat2::new(c1.a, c2.a, c1.b, c2.b)
    }

    #[inline]
    pub fn col(self, k: usize) -> HVec2 {
        match k {
            0 => HVec2::new(self.m11, self.m21),
            _ => HVec2::new(self.m12, self.m22),
        }
    }

    #[inline]
    pub fn row(self, k: usize) -> (Quat, Quat) {
        match k {
            0 => (self.m11, self.m12),
            _ => (self.m21, self.m22),
        }
    }

    /// Conjugate transpose. Anti-homomorphism: `(BC)* = C* B*`.
    #[inline]
    pub fn adjoint(self) -> Self {
        HMat2::new(
            self.m11.conj(),
            self.m21.conj(),
            self.m12.conj(),
            self.m22.conj(),
        )
    }

    /// `Re(m11 + m22)`, the real trace form ⟨·⟩ used by the energy and
    /// degree quadratures.
    #[inline]
    pub fn trace_re(self) -> f64 {
        self.m11.w + self.m22.w
    }

    /// Frobenius norm over all 16 real coefficients.
    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.m11.norm_sq() + self.m12.norm_sq() + self.m21.norm_sq() + self.m22.norm_sq()
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Inverse by row-pivoted block elimination. Ordinary determinant
    /// formulas do not survive noncommutativity; the Schur-complement form
    /// `[[a,b],[c,d]]⁻¹` with pivot `a` does. Returns `None` when the matrix
    /// is numerically singular.
    pub fn try_inv(self) -> Option<HMat2> {
        // Pivot on the larger of |m11|, |m21| to keep the elimination stable.
        let swap = self.m21.norm() > self.m11.norm();
        let (a, b, c, d) = if swap {
            (self.m21, self.m22, self.m11, self.m12)
        } else {
            (self.m11, self.m12, self.m21, self.m22)
        };
        let scale = self.norm();
        let ai = a.try_inv(1e-14 * scale)?;
        let s = d - c * ai * b; // Schur complement
        let si = s.try_inv(1e-14 * scale)?;
        let aib = ai * b;
        let cai = c * ai;
        let inv = HMat2::new(ai + aib * si * cai, -(aib * si), -(si * cai), si);
        // Undo the row swap: (P·M)⁻¹ = M⁻¹·P⁻¹, and our P swaps columns of
        // the inverse.
        Some(if swap {
            HMat2::new(inv.m12, inv.m11, inv.m22, inv.m21)
        } else {
            inv
        })
    }

    pub fn is_finite(self) -> bool {
        self.m11.is_finite() && self.m12.is_finite() && self.m21.is_finite() && self.m22.is_finite()
    }
}

impl Add for HMat2 {
    type Output = HMat2;
    #[inline]
    fn add(self, o: HMat2) -> HMat2 {
        HMat2::new(
            self.m11 + o.m11,
            self.m12 + o.m12,
            self.m21 + o.m21,
            self.m22 + o.m22,
        )
    }
}

impl Sub for HMat2 {
    type Output = HMat2;
    #[inline]
    fn sub(self, o: HMat2) -> HMat2 {
        HMat2::new(
            self.m11 - o.m11,
            self.m12 - o.m12,
            self.m21 - o.m21,
            self.m22 - o.m22,
        )
    }
}

impl Neg for HMat2 {
    type Output = HMat2;
    #[inline]
    fn neg(self) -> HMat2 {
        HMat2::new(-self.m11, -self.m12, -self.m21, -self.m22)
    }
}

impl Mul for HMat2 {
    type Output = HMat2;
    #[inline]
    fn mul(self, o: HMat2) -> HMat2 {
        HMat2::new(
            self.m11 * o.m11 + self.m12 * o.m21,
            self.m11 * o.m12 + self.m12 * o.m22,
            self.m21 * o.m11 + self.m22 * o.m21,
            self.m21 * o.m12 + self.m22 * o.m22,
        )
    }
}

impl Mul<HVec2> for HMat2 {
    type Output = HVec2;
    #[inline]
    fn mul(self, v: HVec2) -> HVec2 {
        HVec2::new(
            self.m11 * v.a + self.m12 * v.b,
            self.m21 * v.a + self.m22 * v.b,
        )
    }
}

impl Mul<f64> for HMat2 {
    type Output = HMat2;
    #[inline]
    fn mul(self, s: f64) -> HMat2 {
        HMat2::new(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)
    }
}

/// A point of HP¹: a quaternionic line `vH ⊂ H²`.
///
/// The stored representative is normalized on construction: divided by the
/// larger-magnitude component when the two magnitudes differ by at least a
/// factor of 2 (affine-chart normalization), otherwise rescaled to unit
/// norm. Equality of lines is scale-free and should always be tested with
/// [`ProjPoint::chordal`], never on raw representatives.
#[derive(Clone, Copy, Debug)]
pub struct ProjPoint {
    rep: HVec2,
}

impl ProjPoint {
    /// Normalize a nonzero representative. `None` when `v` is numerically
    /// zero (norm below 1e−300, i.e. genuinely no line).
    pub fn new(v: HVec2) -> Option<ProjPoint> {
        let na = v.a.norm();
        let nb = v.b.norm();
        if (na + nb) < 1e-300 {
            return None;
        }
        let rep = if na >= 2.0 * nb {
            v.scale_r(v.a.inv())
        } else if nb >= 2.0 * na {
            v.scale_r(v.b.inv())
        } else {
            v * (1.0 / v.norm())
        };
        Some(ProjPoint { rep })
    }

    /// The point at infinity `(1,0)ᵀH` of the standard affine chart.
    pub fn infinity() -> ProjPoint {
        ProjPoint {
            rep: HVec2::new(Quat::ONE, Quat::ZERO),
        }
    }

    /// The line `(g, 1)ᵀH` of an affine value `g`.
    pub fn from_affine(g: Quat) -> ProjPoint {
        ProjPoint::new(HVec2::new(g, Quat::ONE)).expect("affine representative is nonzero")
    }

    #[inline]
    pub fn rep(&self) -> HVec2 {
        self.rep
    }

    /// Affine read `a·b⁻¹`, i.e. the value `g` with `vH = (g,1)ᵀH`.
    /// `None` when the line is too close to `(1,0)ᵀH` for the read to be
    /// trustworthy (relative second component below `eps`).
    pub fn affine(&self, eps: f64) -> Option<Quat> {
        let nb = self.rep.b.norm();
        if nb <= eps * self.rep.norm() {
            None
        } else {
            Some(self.rep.a * self.rep.b.inv())
        }
    }

    /// Hermitian orthoprojector `v(v*v)⁻¹v*` onto the line.
    pub fn projector(&self) -> HMat2 {
        let v = self.rep;
        let n = v.norm_sq();
        HMat2::new(
            v.a * v.a.conj() / n,
            v.a * v.b.conj() / n,
            v.b * v.a.conj() / n,
            v.b * v.b.conj() / n,
        )
    }

    /// Chordal distance `‖P₁ − P₂‖_F / √2 ∈ [0, 1]`, invariant under right
    /// scaling of either representative.
    pub fn chordal(&self, o: &ProjPoint) -> f64 {
        (self.projector() - o.projector()).norm() / std::f64::consts::SQRT_2
    }

    /// The orthogonal line under the standard Hermitian pairing: the
    /// annihilator of `vH`, identified with a line in H² again.
    pub fn perp(&self) -> ProjPoint {
        let v = self.rep;
        // ⟨v, w⟩ = ā·w₁ + b̄·w₂ = 0 with w = (−ā⁻¹b̄, 1) when a ≠ 0.
        if v.a.norm() >= v.b.norm() {
            ProjPoint::new(HVec2::new(-(v.a.conj().inv() * v.b.conj()), Quat::ONE))
                .expect("perp representative is nonzero")
        } else {
            ProjPoint::new(HVec2::new(Quat::ONE, -(v.b.conj().inv() * v.a.conj())))
                .expect("perp representative is nonzero")
        }
    }
}

/// Numerical rank of a 2×2 quaternionic matrix together with the kernel or
/// image line when the rank is one.
#[derive(Clone, Copy, Debug)]
pub struct RankLine {
    pub rank: u8,
    pub line: Option<ProjPoint>,
    /// Second-pivot to first-pivot magnitude ratio from the elimination;
    /// small values mean a confident rank-1 classification.
    pub pivot_ratio: f64,
}

fn eliminate(b: &HMat2) -> (usize, usize, f64, f64) {
    // Full pivoting: locate the largest-magnitude entry.
    let mags = [
        b.m11.norm(),
        b.m12.norm(),
        b.m21.norm(),
        b.m22.norm(),
    ];
    let (mut pi, mut pm) = (0usize, mags[0]);
    for (i, &m) in mags.iter().enumerate().skip(1) {
        if m > pm {
            pi = i;
            pm = m;
        }
    }
    let (r, c) = (pi / 2, pi % 2);
    if pm == 0.0 {
        return (r, c, 0.0, 0.0);
    }
    // Eliminate the other row against the pivot row; the surviving entry in
    // the complementary position is the second pivot.
    let (pr1, pr2) = b.row(r);
    let (or1, or2) = b.row(1 - r);
    let p = if c == 0 { pr1 } else { pr2 };
    let below = if c == 0 { or1 } else { or2 };
    let factor = below * p.inv();
    let rest = if c == 0 {
        or2 - factor * pr2
    } else {
        or1 - factor * pr1
    };
    (r, c, pm, rest.norm())
}

/// Kernel of a 2×2 quaternionic matrix by pivoted elimination.
///
/// Rank is decided against `eps`: everything below `eps · (largest pivot)`
/// counts as zero, and an all-zero matrix reports rank 0. Only rank-1
/// matrices carry a kernel line.
pub fn kernel_line(b: &HMat2, eps: f64) -> RankLine {
    let (r, c, p1, p2) = eliminate(b);
    if p1 == 0.0 {
        return RankLine {
            rank: 0,
            line: None,
            pivot_ratio: 0.0,
        };
    }
    let ratio = p2 / p1;
    if ratio >= eps {
        return RankLine {
            rank: 2,
            line: None,
            pivot_ratio: ratio,
        };
    }
    // The pivot row spans the row space; its kernel is the matrix kernel.
    let (r1, r2) = b.row(r);
    let (p, off) = if c == 0 { (r1, r2) } else { (r2, r1) };
    let vc = -(p.inv() * off);
    let v = if c == 0 {
        HVec2::new(vc, Quat::ONE)
    } else {
        HVec2::new(Quat::ONE, vc)
    };
    RankLine {
        rank: 1,
        line: ProjPoint::new(v),
        pivot_ratio: ratio,
    }
}

/// Image (column span) of a rank-1 matrix; rank logic as [`kernel_line`].
pub fn image_line(b: &HMat2, eps: f64) -> RankLine {
    let (_, c, p1, p2) = eliminate(b);
    if p1 == 0.0 {
        return RankLine {
            rank: 0,
            line: None,
            pivot_ratio: 0.0,
        };
    }
    let ratio = p2 / p1;
    if ratio >= eps {
        return RankLine {
            rank: 2,
            line: None,
            pivot_ratio: ratio,
        };
    }
    RankLine {
        rank: 1,
        line: ProjPoint::new(b.col(c)),
        pivot_ratio: ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn hamilton_table() {
        assert_eq!(Quat::I * Quat::J, Quat::K);
        assert_eq!(Quat::J * Quat::K, Quat::I);
        assert_eq!(Quat::K * Quat::I, Quat::J);
        assert_eq!(Quat::I * Quat::I, -Quat::ONE);
        // (1+i)(1+j) = 1 + i + j + k
        let p = (Quat::ONE + Quat::I) * (Quat::ONE + Quat::J);
        assert_eq!(p, Quat::new(1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn inverse_roundtrip() {
        let q = Quat::new(2.0, 1.0, 0.0, -3.0);
        assert!((q * q.inv() - Quat::ONE).norm() < TOL);
        assert!((q.inv() * q - Quat::ONE).norm() < TOL);
        assert_eq!(Quat::I.inv(), -Quat::I);
        assert_eq!(Quat::scalar(2.0).inv(), Quat::scalar(0.5));
        let q = Quat::new(1.0, 1.0, 1.0, 1.0);
        assert!((q.inv() - Quat::new(0.25, -0.25, -0.25, -0.25)).norm() < TOL);
    }

    #[test]
    fn kernel_planted_rank_one() {
        // B = u·(row α): u = (1, j)ᵀ, α = (k, 1) → kernel (1, −k)ᵀH.
        let b = HMat2::new(Quat::K, Quat::ONE, Quat::J * Quat::K, Quat::J);
        let kl = kernel_line(&b, 1e-9);
        assert_eq!(kl.rank, 1);
        let line = kl.line.unwrap();
        let expect = ProjPoint::new(HVec2::new(Quat::ONE, -Quat::K)).unwrap();
        assert!(line.chordal(&expect) < 1e-12);
        let v = line.rep();
        assert!((b * v).norm() < 1e-10 * b.norm());
    }

    #[test]
    fn kernel_rank_flags() {
        let kl = kernel_line(&HMat2::ZERO, 1e-9);
        assert_eq!(kl.rank, 0);
        let diag = HMat2::new(Quat::ONE, Quat::ZERO, Quat::ZERO, Quat::ZERO);
        let kl = kernel_line(&diag, 1e-9);
        assert_eq!(kl.rank, 1);
        let expect = ProjPoint::new(HVec2::new(Quat::ZERO, Quat::ONE)).unwrap();
        assert!(kl.line.unwrap().chordal(&expect) < 1e-12);
        assert_eq!(kernel_line(&HMat2::IDENTITY, 1e-9).rank, 2);
    }

    #[test]
    fn image_examples() {
        let diag = HMat2::new(Quat::ONE, Quat::ZERO, Quat::ZERO, Quat::ZERO);
        let il = image_line(&diag, 1e-9);
        assert_eq!(il.rank, 1);
        assert!(il.line.unwrap().chordal(&ProjPoint::infinity()) < 1e-12);
        // columns (j,1)ᵀ and (jk, k)ᵀ = (j,1)ᵀ·k span the same line
        let b = HMat2::new(Quat::J, Quat::J * Quat::K, Quat::ONE, Quat::K);
        let il = image_line(&b, 1e-9);
        assert_eq!(il.rank, 1);
        let expect = ProjPoint::new(HVec2::new(Quat::J, Quat::ONE)).unwrap();
        assert!(il.line.unwrap().chordal(&expect) < 1e-12);
        assert_eq!(image_line(&HMat2::IDENTITY, 1e-9).rank, 2);
    }

    #[test]
    fn adjoint_props() {
        let m = HMat2::new(Quat::I, Quat::ZERO, Quat::ZERO, Quat::I);
        assert_eq!(m.adjoint().m11, -Quat::I);
        assert_eq!(HMat2::IDENTITY.adjoint(), HMat2::IDENTITY);
    }

    #[test]
    fn mat_inverse() {
        let m = HMat2::new(
            Quat::new(1.0, 2.0, 0.0, 1.0),
            Quat::J,
            Quat::new(0.5, 0.0, -1.0, 0.0),
            Quat::new(2.0, 0.0, 0.0, 3.0),
        );
        let mi = m.try_inv().unwrap();
        assert!((m * mi - HMat2::IDENTITY).norm() < 1e-12);
        assert!((mi * m - HMat2::IDENTITY).norm() < 1e-12);
        // Vanishing pivot exercise: zero top-left still invertible.
        let m = HMat2::new(Quat::ZERO, Quat::ONE, Quat::J, Quat::K);
        let mi = m.try_inv().unwrap();
        assert!((m * mi - HMat2::IDENTITY).norm() < 1e-12);
    }

    #[test]
    fn projpoint_affine_and_perp() {
        let g = Quat::new(0.3, -1.2, 0.7, 0.1);
        let p = ProjPoint::from_affine(g);
        assert!((p.affine(1e-12).unwrap() - g).norm() < TOL);
        assert!(ProjPoint::infinity().affine(1e-9).is_none());
        let pp = p.perp();
        assert!(pp.rep().herm(p.rep()).norm() < 1e-12);
        assert!(pp.perp().chordal(&p) < 1e-12);
    }
}
