use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A real 2×2 matrix stored row-major.
///
/// Serializes as a flat row-major array `[m11, m12, m21, m22]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, d)
    }

    pub fn scalar(s: f64) -> Self {
        Mat2::diag(s, s)
    }

    /// Rotation of phase space by `angle`, `(x, p) -> (x cos + p sin, -x sin + p cos)`.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Mat2::new(c, s, -s, c)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn transpose(&self) -> Self {
        let [[a, b], [c, d]] = self.0;
        Mat2::new(a, c, b, d)
    }

    pub fn scale(&self, s: f64) -> Self {
        let [[a, b], [c, d]] = self.0;
        Mat2::new(a * s, b * s, c * s, d * s)
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let [[a, b], [c, d]] = self.0;
        Some(Mat2::new(d / det, -b / det, -c / det, a / det))
    }

    /// `self * m * selfᵀ`.
    pub fn conjugate(&self, m: &Mat2) -> Mat2 {
        *self * *m * self.transpose()
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.0;
        [a * v[0] + b * v[1], c * v[0] + d * v[1]]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (*self - *other).max_abs()
    }

    pub fn symmetric_part(&self) -> Mat2 {
        let off = 0.5 * (self.0[0][1] + self.0[1][0]);
        Mat2::new(self.0[0][0], off, off, self.0[1][1])
    }

    /// Eigenvalues `(min, max)` of the symmetric part of the matrix.
    pub fn sym_eigenvalues(&self) -> (f64, f64) {
        let s = self.symmetric_part();
        let mean = 0.5 * (s.0[0][0] + s.0[1][1]);
        let half_diff = 0.5 * (s.0[0][0] - s.0[1][1]);
        let radius = half_diff.hypot(s.0[0][1]);
        let hi = mean + radius;
        // Recover the small eigenvalue from the determinant when the
        // subtraction would cancel.
        let det = s.det();
        let lo = if hi > 0.0 && det > 0.0 && (mean - radius) < 1e-6 * hi {
            det / hi
        } else {
            mean - radius
        };
        (lo, hi)
    }

    /// Angle of the eigenvector of the largest eigenvalue of the symmetric part,
    /// measured from the first axis, in `(-π/2, π/2]`.
    pub fn sym_major_axis_angle(&self) -> f64 {
        let s = self.symmetric_part();
        0.5 * (2.0 * s.0[0][1]).atan2(s.0[0][0] - s.0[1][1])
    }

    /// Singular values `(min, max)`.
    pub fn singular_values(&self) -> (f64, f64) {
        let (lo, hi) = (*self * self.transpose()).sym_eigenvalues();
        (lo.max(0.0).sqrt(), hi.max(0.0).sqrt())
    }

    pub fn to_row_major(&self) -> [f64; 4] {
        let [[a, b], [c, d]] = self.0;
        [a, b, c, d]
    }

    pub fn from_row_major(v: [f64; 4]) -> Self {
        Mat2::new(v[0], v[1], v[2], v[3])
    }
}

impl Default for Mat2 {
    fn default() -> Self {
        Mat2::IDENTITY
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl Add for Mat2 {
    type Output = Mat2;

    fn add(self, rhs: Mat2) -> Mat2 {
        let a = self.to_row_major();
        let b = rhs.to_row_major();
        Mat2::new(a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;

    fn sub(self, rhs: Mat2) -> Mat2 {
        self + rhs.scale(-1.0)
    }
}

impl Serialize for Mat2 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_row_major().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Mat2 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        <[f64; 4]>::deserialize(deserializer).map(Mat2::from_row_major)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal() {
        let (lo, hi) = Mat2::diag(9.0, 4.0).sym_eigenvalues();
        assert_eq!((lo, hi), (4.0, 9.0));
    }

    #[test]
    fn eigenvalues_match_characteristic_polynomial() {
        let m = Mat2::new(3.0, 1.5, 1.5, 0.7);
        let (lo, hi) = m.sym_eigenvalues();
        assert!((lo + hi - m.trace()).abs() < 1e-12);
        assert!((lo * hi - m.det()).abs() < 1e-12);
    }

    #[test]
    fn small_eigenvalue_keeps_relative_precision() {
        let big = 1e3;
        let m = Mat2::rotation(0.3).conjugate(&Mat2::diag(big, 1.0 / big));
        let (lo, _) = m.sym_eigenvalues();
        assert!((lo * big - 1.0).abs() < 1e-8, "lo = {lo}");
    }

    #[test]
    fn serializes_row_major() {
        let m = Mat2::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(serde_json::to_string(&m).unwrap(), "[1.0,2.0,3.0,4.0]");
        let back: Mat2 = serde_json::from_str("[1.0,2.0,3.0,4.0]").unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rotation_quarter_turn() {
        let r = Mat2::rotation(std::f64::consts::FRAC_PI_2);
        assert!(r.max_abs_diff(&Mat2::new(0.0, 1.0, -1.0, 0.0)) < 1e-15);
    }
}
