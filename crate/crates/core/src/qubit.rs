//! Stack-allocated 2×2 complex matrices for the qubit-only hot loops.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;

use crate::operator::{CMatrix, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[ZERO, ZERO], [ZERO, ZERO]]);
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([
            [C64::new(a, 0.0), C64::new(b, 0.0)],
            [C64::new(c, 0.0), C64::new(d, 0.0)],
        ])
    }

    /// `|u><v|` for real vectors.
    pub fn outer_real(u: [f64; 2], v: [f64; 2]) -> Self {
        Mat2::real(u[0] * v[0], u[0] * v[1], u[1] * v[0], u[1] * v[1])
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn commutator(&self, other: &Mat2) -> Self {
        *self * *other - *other * *self
    }

    /// `<u| M |u>` for a real vector.
    pub fn expect_real(&self, u: [f64; 2]) -> C64 {
        let m = &self.0;
        m[0][0] * u[0] * u[0] + (m[0][1] + m[1][0]) * u[0] * u[1] + m[1][1] * u[1] * u[1]
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn to_cmatrix(&self) -> CMatrix {
        let m = &self.0;
        ndarray::array![[m[0][0], m[0][1]], [m[1][0], m[1][1]]]
    }

    /// Panics unless `m` is 2×2.
    pub fn from_cmatrix(m: &CMatrix) -> Self {
        assert_eq!(m.dim(), (2, 2), "expected a 2x2 matrix");
        Mat2([[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]])
    }

    /// `Σ|λ|` of the Hermitian part.
    pub fn trace_norm(&self) -> f64 {
        let m = &self.0;
        let a = m[0][0].re;
        let d = m[1][1].re;
        let b = 0.5 * (m[0][1] + m[1][0].conj());
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        (mean + radius).abs() + (mean - radius).abs()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |a, z| a.max(z.norm()))
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
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
