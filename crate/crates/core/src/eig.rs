//! Dense Hermitian eigensolver.
//!
//! Householder reduction to a complex Hermitian tridiagonal form, a diagonal
//! phase transform that makes the off-diagonal real, then implicit QL with
//! Wilkinson-type shifts on the real symmetric tridiagonal matrix.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::operator::{hermiticity_error, max_abs, CMatrix};

const MAX_QL_ITER: usize = 60;

/// Eigenvalues in ascending order and the matching orthonormal eigenvectors
/// stored as columns.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

fn check_input(h: &CMatrix) -> Result<()> {
    let (r, c) = h.dim();
    if r != c {
        return Err(Error::NotSquare { rows: r, cols: c });
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let herm = hermiticity_error(h);
    if herm > 1e-10 * max_abs(h).max(1.0) {
        return Err(Error::NotHermitian(herm));
    }
    Ok(())
}

/// Full eigendecomposition of a Hermitian matrix.
pub fn hermitian_eig(h: &CMatrix) -> Result<HermitianEig> {
    check_input(h)?;
    let n = h.nrows();
    let (d, e, q) = tridiagonalize(h, true);
    let q = q.expect("accumulated reflectors");
    let (mut diag, mut sub, phases) = realify(&d, &e);
    let mut z = Array2::<f64>::eye(n);
    tql_implicit(&mut diag, &mut sub, Some(&mut z))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));

    let mut vectors = CMatrix::zeros((n, n));
    // V = Q * diag(phases) * Z
    let qd: CMatrix = Array2::from_shape_fn((n, n), |(r, i)| q[(r, i)] * phases[i]);
    for (col, &j) in order.iter().enumerate() {
        for r in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                acc += qd[(r, i)] * z[(i, j)];
            }
            vectors[(r, col)] = acc;
        }
    }
    let values = order.iter().map(|&j| diag[j]).collect();
    Ok(HermitianEig { values, vectors })
}

/// Eigenvalues only, ascending. Skips reflector accumulation.
pub fn eigvalsh(h: &CMatrix) -> Result<Vec<f64>> {
    check_input(h)?;
    let (d, e, _) = tridiagonalize(h, false);
    let (mut diag, mut sub, _) = realify(&d, &e);
    tql_implicit(&mut diag, &mut sub, None)?;
    diag.sort_by(f64::total_cmp);
    Ok(diag)
}

/// Returns (diagonal, complex subdiagonal, accumulated unitary Q) such that
/// `h = Q T Q^dagger` with `T` Hermitian tridiagonal.
fn tridiagonalize(h: &CMatrix, want_q: bool) -> (Vec<f64>, Vec<C64>, Option<CMatrix>) {
    let n = h.nrows();
    let mut a = h.clone();
    let mut q = want_q.then(|| CMatrix::eye(n));
    let mut v = vec![C64::new(0.0, 0.0); n];
    let mut p = vec![C64::new(0.0, 0.0); n];

    for k in 0..n.saturating_sub(2) {
        let tail: f64 = ((k + 2)..n).map(|i| a[(i, k)].norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let xnorm = (tail + x0.norm_sqr()).sqrt();
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;

        v.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        v[k + 1] = x0 - alpha;
        for i in (k + 2)..n {
            v[i] = a[(i, k)];
        }
        let vnorm = v[(k + 1)..].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut v[(k + 1)..] {
            *z /= vnorm;
        }

        // p = A v over the active block (rows k.., reflector support k+1..)
        for i in k..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in (k + 1)..n {
                acc += a[(i, j)] * v[j];
            }
            p[i] = acc;
        }
        let kk: f64 = ((k + 1)..n).map(|i| (v[i].conj() * p[i]).re).sum();
        for i in k..n {
            p[i] -= v[i] * kk;
        }
        // A <- A - 2 (v w^dagger + w v^dagger), w = p
        for i in k..n {
            for j in k..n {
                a[(i, j)] -= 2.0 * (v[i] * p[j].conj() + p[i] * v[j].conj());
            }
        }
        if let Some(q) = q.as_mut() {
            // Q <- Q (I - 2 v v^dagger)
            for r in 0..n {
                let mut qv = C64::new(0.0, 0.0);
                for j in (k + 1)..n {
                    qv += q[(r, j)] * v[j];
                }
                for j in (k + 1)..n {
                    q[(r, j)] -= 2.0 * qv * v[j].conj();
                }
            }
        }
    }

    let d = (0..n).map(|i| a[(i, i)].re).collect();
    let e = (0..n.saturating_sub(1)).map(|i| a[(i + 1, i)]).collect();
    (d, e, q)
}

/// Diagonal unitary `D` with `D^dagger T D` real symmetric.
fn realify(d: &[f64], e: &[C64]) -> (Vec<f64>, Vec<f64>, Vec<C64>) {
    let n = d.len();
    let mut phases = vec![C64::new(1.0, 0.0); n];
    let mut sub = vec![0.0; n];
    for i in 0..e.len() {
        let mag = e[i].norm();
        sub[i] = mag;
        phases[i + 1] = if mag > 0.0 {
            phases[i] * (e[i] / mag)
        } else {
            phases[i]
        };
    }
    (d.to_vec(), sub, phases)
}

/// Implicit QL on a real symmetric tridiagonal matrix. `e[i]` couples rows
/// `i` and `i + 1`; `e[n - 1]` is ignored. Rotations are accumulated into `z`.
fn tql_implicit(d: &mut [f64], e: &mut [f64], mut z: Option<&mut Array2<f64>>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    // absolute floor: eigenvalues far below the norm (rank-deficient states)
    // cannot be resolved to relative accuracy, and need not be
    let anorm = d.iter().zip(e.iter()).fold(0.0f64, |a, (x, y)| a.max(x.abs() + y.abs()));
    let floor = f64::EPSILON * anorm;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() <= floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITER {
                return Err(Error::NoConvergence(MAX_QL_ITER));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let f = z[(k, i + 1)];
                        z[(k, i + 1)] = s * z[(k, i)] + c * f;
                        z[(k, i)] = c * z[(k, i)] - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
