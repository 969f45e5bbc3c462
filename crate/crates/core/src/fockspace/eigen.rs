//! Dense Hermitian eigensolver.
//!
//! The matrix is reduced to Hermitian tridiagonal form with complex
//! Householder reflections, the sub-diagonal phases are absorbed into a
//! diagonal unitary so the tridiagonal becomes real symmetric, and the
//! result is diagonalized by implicit QL iteration (the `tql2` scheme of
//! EISPACK / Jama). Rotations are accumulated directly into the complex
//! basis when eigenvectors are requested.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const MAX_QL_ITERATIONS: usize = 64;

struct Tridiagonal {
    diag: Vec<f64>,
    /// `off[i]` couples rows `i - 1` and `i`; `off[0]` is unused.
    off: Vec<f64>,
    /// Column-major unitary whose columns span the tridiagonal basis.
    basis: Option<Vec<C64>>,
}

fn tridiagonalize(a: &DMatrix<C64>, want_vectors: bool) -> Tridiagonal {
    let n = a.nrows();
    let mut h: Vec<C64> = a.as_slice().to_vec();
    let mut q = want_vectors.then(|| {
        let mut q = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            q[i + i * n] = C64::new(1.0, 0.0);
        }
        q
    });
    let zero = C64::new(0.0, 0.0);
    let mut sub = vec![zero; n];
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    let mut w = vec![zero; n];
    let mut s = vec![zero; n];

    for k in 0..n.saturating_sub(2) {
        let m0 = k + 1;
        let x0 = h[m0 + k * n];
        let tail: f64 = (m0 + 1..n).map(|i| h[i + k * n].norm_sqr()).sum();
        if tail == 0.0 {
            sub[k] = x0;
            continue;
        }
        let x0_abs = x0.norm();
        let norm = (x0.norm_sqr() + tail).sqrt();
        let phase = if x0_abs > 0.0 {
            x0 / x0_abs
        } else {
            C64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;

        for i in m0..n {
            v[i] = h[i + k * n];
        }
        v[m0] -= alpha;
        let vnorm = (2.0 * norm * (norm + x0_abs)).sqrt();
        for vi in &mut v[m0..n] {
            *vi /= vnorm;
        }

        // p = H22 v, accumulated column by column
        for pi in &mut p[m0..n] {
            *pi = zero;
        }
        for j in m0..n {
            let vj = v[j];
            let col = &h[j * n..(j + 1) * n];
            for i in m0..n {
                p[i] += col[i] * vj;
            }
        }
        let kk: f64 = (m0..n).map(|i| (v[i].conj() * p[i]).re).sum();
        for i in m0..n {
            w[i] = (p[i] - v[i] * kk) * 2.0;
        }
        // H22 <- H22 - v w^H - w v^H
        for j in m0..n {
            let wj = w[j].conj();
            let vj = v[j].conj();
            let col = &mut h[j * n..(j + 1) * n];
            for i in m0..n {
                col[i] -= v[i] * wj + w[i] * vj;
            }
        }
        sub[k] = alpha;

        if let Some(q) = q.as_mut() {
            for si in s.iter_mut() {
                *si = zero;
            }
            for j in m0..n {
                let vj = v[j];
                let col = &q[j * n..(j + 1) * n];
                for r in 0..n {
                    s[r] += col[r] * vj;
                }
            }
            for j in m0..n {
                let cvj = v[j].conj() * 2.0;
                let col = &mut q[j * n..(j + 1) * n];
                for r in 0..n {
                    col[r] -= s[r] * cvj;
                }
            }
        }
    }
    if n >= 2 {
        sub[n - 2] = h[(n - 1) + (n - 2) * n];
    }

    let diag: Vec<f64> = (0..n).map(|i| h[i + i * n].re).collect();
    let mut off = vec![0.0; n];
    let mut phases = vec![C64::new(1.0, 0.0); n];
    for i in 0..n.saturating_sub(1) {
        let e = sub[i];
        let abs = e.norm();
        off[i + 1] = abs;
        phases[i + 1] = if abs > 0.0 {
            phases[i] * e / abs
        } else {
            phases[i]
        };
    }
    if let Some(q) = q.as_mut() {
        for (j, ph) in phases.iter().enumerate() {
            for x in &mut q[j * n..(j + 1) * n] {
                *x *= ph;
            }
        }
    }
    Tridiagonal {
        diag,
        off,
        basis: q,
    }
}

/// Implicit QL on a real symmetric tridiagonal matrix. On return `d` holds
/// the (unsorted) eigenvalues and the columns of `z`, if given, the
/// corresponding eigenvectors expressed in the original basis.
fn tql2(d: &mut [f64], off: &[f64], mut z: Option<&mut Vec<C64>>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let mut e = vec![0.0; n];
    e[..(n - 1)].copy_from_slice(&off[1..n]);

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::EigenNotConverged);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[l + 2..n] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_mut() {
                        let (lo, hi) = z.split_at_mut((i + 1) * n);
                        let zi = &mut lo[i * n..];
                        let zi1 = &mut hi[..n];
                        for k in 0..n {
                            let a = zi[k];
                            let b = zi1[k];
                            zi1[k] = a * s + b * c;
                            zi[k] = a * c - b * s;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub(crate) fn hermitian_eigenvalues(a: &DMatrix<C64>) -> Result<Vec<f64>> {
    let t = tridiagonalize(a, false);
    let mut d = t.diag;
    tql2(&mut d, &t.off, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvalues (ascending) and the matching orthonormal eigenvectors as
/// matrix columns.
pub(crate) fn hermitian_eigen(a: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let n = a.nrows();
    let t = tridiagonalize(a, true);
    let mut d = t.diag;
    let mut z = t.basis.expect("basis requested");
    tql2(&mut d, &t.off, Some(&mut z))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| z[r + order[c] * n]);
    Ok((values, vectors))
}
