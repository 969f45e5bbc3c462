//! Linear algebra on the truncated Fock basis `{|0>, ..., |n_max>}`.

mod eigen;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Relative tolerance on `max |A - A^H| / max |A|` for an operator to count
/// as hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Largest squeezing magnitude accepted by [`squeeze_matrix`].
pub const MAX_SQUEEZE: f64 = 1.5;

/// Element-wise agreement required between two padded exponentials before a
/// squeeze matrix is accepted.
const SQUEEZE_PAD_TOL: f64 = 1e-12;
const SQUEEZE_PAD_CAP: usize = 1600;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// A state vector on the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amps: DVector<C64>,
}

impl FockVector {
    pub fn new(amps: Vec<C64>) -> Self {
        assert!(!amps.is_empty(), "Fock vector needs dimension >= 1");
        Self {
            amps: DVector::from_vec(amps),
        }
    }

    /// The number state `|n>` in a basis of dimension `dim`.
    pub fn number_state(n: usize, dim: usize) -> Self {
        assert!(n < dim);
        let mut amps = vec![ZERO; dim];
        amps[n] = ONE;
        Self::new(amps)
    }

    pub(crate) fn from_dvector(amps: DVector<C64>) -> Self {
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self {
            amps: &self.amps / C64::new(n, 0.0),
        }
    }

    /// `<self|other>`
    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amps.dotc(&other.amps)
    }
}

/// A dense operator on the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    matrix: DMatrix<C64>,
    hermitian: bool,
}

impl FockOperator {
    /// Wraps a square matrix without any hermiticity claim.
    pub fn general(matrix: DMatrix<C64>) -> Self {
        assert!(matrix.is_square(), "Fock operators are square");
        Self {
            matrix,
            hermitian: false,
        }
    }

    /// Wraps a matrix that must be hermitian to within [`HERMITICITY_TOL`].
    /// The stored matrix is the symmetrized `(A + A^H) / 2`.
    pub fn hermitian(matrix: DMatrix<C64>) -> Result<Self> {
        let mut op = Self::general(matrix);
        op.require_hermitian()?;
        op.symmetrize();
        op.hermitian = true;
        Ok(op)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
            hermitian: true,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self {
            matrix: DMatrix::from_diagonal(&d),
            hermitian: true,
        }
    }

    /// `|v><v|`
    pub fn projector(v: &FockVector) -> Self {
        let a = v.as_dvector();
        Self {
            matrix: a * a.adjoint(),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_max(&self) -> usize {
        self.dim() - 1
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// `max |A_nm - conj(A_mn)|`
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest off-diagonal modulus.
    pub fn off_diagonal_max(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    worst = worst.max(self.matrix[(i, j)].norm());
                }
            }
        }
        worst
    }

    fn require_hermitian(&self) -> Result<()> {
        if self.hermitian {
            return Ok(());
        }
        let residual = self.hermiticity_residual();
        let tolerance = HERMITICITY_TOL * self.max_abs().max(f64::MIN_POSITIVE);
        if residual <= tolerance {
            Ok(())
        } else {
            Err(Error::NotHermitian {
                residual,
                tolerance,
            })
        }
    }

    fn symmetrize(&mut self) {
        let adj = self.matrix.adjoint();
        self.matrix += adj;
        self.matrix *= C64::new(0.5, 0.0);
    }

    /// Hermitian copy of `self`, symmetrized.
    fn hermitian_matrix(&self) -> Result<DMatrix<C64>> {
        self.require_hermitian()?;
        let mut m = self.matrix.clone();
        if !self.hermitian {
            let adj = m.adjoint();
            m += adj;
            m *= C64::new(0.5, 0.0);
        }
        Ok(m)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            matrix: &self.matrix * C64::new(factor, 0.0),
            hermitian: self.hermitian,
        }
    }

    /// `self + factor * other`
    pub fn add_scaled(&self, other: &FockOperator, factor: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(Self {
            matrix: &self.matrix + &other.matrix * C64::new(factor, 0.0),
            hermitian: self.hermitian && other.hermitian,
        })
    }

    pub fn apply(&self, v: &FockVector) -> FockVector {
        FockVector::from_dvector(&self.matrix * v.as_dvector())
    }

    /// `<v|A|v>`
    pub fn expectation(&self, v: &FockVector) -> C64 {
        v.as_dvector().dotc(&(&self.matrix * v.as_dvector()))
    }

    /// Operator norm bound used for relative residuals (largest singular
    /// value for hermitian operators, i.e. max |eigenvalue|).
    pub fn spectral_norm(&self) -> Result<f64> {
        let vals = eigen::hermitian_eigenvalues(&self.hermitian_matrix()?)?;
        Ok(vals.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
    }

    /// Restriction to the first `dim` basis states.
    pub fn truncated(&self, dim: usize) -> Self {
        assert!(dim >= 1 && dim <= self.dim());
        Self {
            matrix: self.matrix.view((0, 0), (dim, dim)).into_owned(),
            hermitian: self.hermitian,
        }
    }

    /// Congruence `D A D` with a real diagonal `D`; preserves the inertia of
    /// `A` whenever every entry of `D` is nonzero.
    pub fn congruence_diagonal(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.dim());
        let n = self.dim();
        Self {
            matrix: DMatrix::from_fn(n, n, |i, j| self.matrix[(i, j)] * (d[i] * d[j])),
            hermitian: self.hermitian,
        }
    }
}

/// Coherent state `|alpha>` truncated at `n_max`, with amplitudes
/// `e^{-|alpha|^2/2} alpha^n / sqrt(n!)` built in log-magnitude form.
pub fn coherent_vector(alpha: C64, n_max: usize) -> FockVector {
    let mut amps = vec![ZERO; n_max + 1];
    let r = alpha.norm();
    if r == 0.0 {
        amps[0] = ONE;
        return FockVector::new(amps);
    }
    let theta = alpha.arg();
    let ln_r = r.ln();
    let mut log_mag = -0.5 * r * r;
    for (n, amp) in amps.iter_mut().enumerate() {
        if n > 0 {
            log_mag += ln_r - 0.5 * (n as f64).ln();
        }
        *amp = C64::from_polar(log_mag.exp(), n as f64 * theta);
    }
    FockVector::new(amps)
}

/// Matrix elements `<m|D(alpha)|n>` for `m < rows`, `n < cols`.
///
/// Uses the associated-Laguerre closed form with the `sqrt(n!/m!)` prefactor
/// folded into the three-term recurrence, so every intermediate stays of
/// order one.
pub(crate) fn displacement_block(alpha: C64, rows: usize, cols: usize) -> DMatrix<C64> {
    let mut out = DMatrix::from_element(rows, cols, ZERO);
    let x = alpha.norm_sqr();
    let r = alpha.norm();
    let theta = if r > 0.0 { alpha.arg() } else { 0.0 };
    let ln_r = if r > 0.0 { r.ln() } else { f64::NEG_INFINITY };
    let kmax = rows.max(cols);

    // log of |alpha|^k e^{-x/2} / sqrt(k!)
    let mut log_f0 = -0.5 * x;
    let mut f = Vec::new();
    for k in 0..kmax {
        if k > 0 {
            log_f0 += ln_r - 0.5 * (k as f64).ln();
        }
        let f0 = if r == 0.0 {
            if k == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            log_f0.exp()
        };
        // lower triangle entries (j + k, j) need j < min(rows - k, cols);
        // upper triangle entries (j, j + k) need j < min(rows, cols - k)
        let lower = if k < rows { (rows - k).min(cols) } else { 0 };
        let upper = if k > 0 && k < cols {
            rows.min(cols - k)
        } else {
            0
        };
        let len = lower.max(upper);
        if len == 0 {
            continue;
        }
        f.clear();
        f.push(f0);
        let kf = k as f64;
        for j in 0..len.saturating_sub(1) {
            let jf = j as f64;
            let a = (2.0 * jf + 1.0 + kf - x) / ((jf + 1.0) * (jf + kf + 1.0)).sqrt();
            let prev = if j == 0 { 0.0 } else { f[j - 1] };
            let b = ((jf * (jf + kf)) / ((jf + 1.0) * (jf + kf + 1.0))).sqrt();
            f.push(a * f[j] - b * prev);
        }
        let ph_lower = C64::from_polar(1.0, kf * theta);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let ph_upper = C64::from_polar(sign, -kf * theta);
        for j in 0..lower {
            out[(j + k, j)] = ph_lower * f[j];
        }
        for j in 0..upper {
            out[(j, j + k)] = ph_upper * f[j];
        }
    }
    out
}

/// Displacement operator `D(alpha) = exp(alpha a^dag - alpha^* a)` on the
/// truncated basis (exact matrix elements, cropped).
pub fn displacement_matrix(alpha: C64, n_max: usize) -> FockOperator {
    FockOperator::general(displacement_block(alpha, n_max + 1, n_max + 1))
}

fn squeeze_padded(r: f64, pad: usize, rows: usize, cols: usize) -> DMatrix<f64> {
    // generator -r (a^dag^2 - a^2) / 2 is real antisymmetric
    let mut g = DMatrix::<f64>::zeros(pad, pad);
    for n in 0..pad.saturating_sub(2) {
        let amp = 0.5 * r * (((n + 1) * (n + 2)) as f64).sqrt();
        g[(n + 2, n)] = -amp;
        g[(n, n + 2)] = amp;
    }
    g.exp().view((0, 0), (rows, cols)).into_owned()
}

/// Elements `<m|S(r)|n>` for `m < rows`, `n < cols`, from the exponential of
/// the generator on a padded basis. The padding grows until two successive
/// paddings agree on the requested block.
pub(crate) fn squeeze_block(r: f64, rows: usize, cols: usize) -> Result<DMatrix<C64>> {
    let n_max = rows.max(cols).saturating_sub(1);
    if !r.is_finite() || r.abs() > MAX_SQUEEZE {
        return Err(Error::SqueezeTooLarge {
            r,
            limit: MAX_SQUEEZE,
            n_max,
        });
    }
    let need = rows.max(cols);
    if r == 0.0 {
        return Ok(DMatrix::from_fn(rows, cols, |i, j| {
            if i == j {
                ONE
            } else {
                ZERO
            }
        }));
    }
    let mut pad = (2 * need).max(need + 60);
    let mut prev = squeeze_padded(r, pad, rows, cols);
    loop {
        let next_pad = pad + pad / 2;
        if next_pad > SQUEEZE_PAD_CAP {
            return Err(Error::SqueezeTooLarge {
                r,
                limit: MAX_SQUEEZE,
                n_max,
            });
        }
        let next = squeeze_padded(r, next_pad, rows, cols);
        let diff = (&next - &prev).amax();
        if diff <= SQUEEZE_PAD_TOL {
            return Ok(next.map(|x| C64::new(x, 0.0)));
        }
        prev = next;
        pad = next_pad;
    }
}

/// Squeezing operator `S(r) = exp(-r (a^dag^2 - a^2) / 2)` on the truncated
/// basis.
pub fn squeeze_matrix(r: f64, n_max: usize) -> Result<FockOperator> {
    Ok(FockOperator::general(squeeze_block(r, n_max + 1, n_max + 1)?))
}

/// Annihilation operator `a` on a basis of dimension `dim`.
pub fn annihilation(dim: usize) -> FockOperator {
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    FockOperator::general(m)
}

/// Smallest eigenvalue of a hermitian operator.
pub fn min_eigenvalue(h: &FockOperator) -> Result<f64> {
    let vals = eigen::hermitian_eigenvalues(&h.hermitian_matrix()?)?;
    Ok(vals[0])
}

/// All eigenvalues, ascending.
pub fn eigenvalues(h: &FockOperator) -> Result<Vec<f64>> {
    eigen::hermitian_eigenvalues(&h.hermitian_matrix()?)
}

/// Eigenpairs sorted by descending eigenvalue.
pub fn eigendecompose(h: &FockOperator) -> Result<Vec<(f64, FockVector)>> {
    let (vals, vecs) = eigen::hermitian_eigen(&h.hermitian_matrix()?)?;
    Ok(vals
        .iter()
        .enumerate()
        .rev()
        .map(|(i, &v)| (v, FockVector::from_dvector(vecs.column(i).into_owned())))
        .collect())
}

/// Eigenvector of the smallest eigenvalue.
pub fn min_eigenpair(h: &FockOperator) -> Result<(f64, FockVector)> {
    let (vals, vecs) = eigen::hermitian_eigen(&h.hermitian_matrix()?)?;
    Ok((vals[0], FockVector::from_dvector(vecs.column(0).into_owned())))
}

/// Gershgorin margin `min_n (H_nn - sum_{m != n} |H_nm|)`. A nonnegative
/// margin certifies positive semidefiniteness.
pub fn gershgorin_margin(h: &FockOperator) -> Result<f64> {
    let m = h.hermitian_matrix()?;
    let n = m.nrows();
    let mut margin = f64::INFINITY;
    for i in 0..n {
        let radius: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].norm()).sum();
        margin = margin.min(m[(i, i)].re - radius);
    }
    Ok(margin)
}

fn check_normalized_diagonal(a: &FockOperator) -> Result<()> {
    let off = a.off_diagonal_max();
    if off > 1e-12 * a.max_abs() {
        return Err(Error::NotDiagonal(off));
    }
    let tr = a.trace();
    if (tr - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(tr));
    }
    Ok(())
}

/// Overlap `sum_n sqrt(a_nn b_nn)` of two Fock-diagonal states.
pub fn root_fidelity(a: &FockOperator, b: &FockOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    check_normalized_diagonal(a)?;
    check_normalized_diagonal(b)?;
    Ok(a
        .diagonal()
        .iter()
        .zip(b.diagonal())
        .map(|(x, y)| (x.max(0.0) * y.max(0.0)).sqrt())
        .sum())
}

/// Fidelity of two Fock-diagonal states, `F = (sum_n sqrt(a_nn b_nn))^2`.
///
/// This is the squared (Jozsa) convention; it is the quantity the
/// vacuum-removal closed form reproduces. [`root_fidelity`] gives the
/// unsquared overlap.
pub fn diagonal_fidelity(a: &FockOperator, b: &FockOperator) -> Result<f64> {
    let f = root_fidelity(a, b)?;
    Ok((f * f).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn max_dev(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Truncated generator exponential, the independent route for D(alpha).
    fn displacement_by_expm(alpha: C64, n_max: usize, pad: usize) -> DMatrix<C64> {
        let a = annihilation(pad).into_matrix();
        let gen = a.adjoint() * alpha - &a * alpha.conj();
        gen.exp().view((0, 0), (n_max + 1, n_max + 1)).into_owned()
    }

    #[test]
    fn vacuum_coherent_state() {
        let v = coherent_vector(c(0.0, 0.0), 5);
        assert_eq!(v.amplitudes()[0], ONE);
        assert!(v.amplitudes()[1..].iter().all(|x| *x == ZERO));
    }

    #[test]
    fn coherent_state_normalization() {
        let v = coherent_vector(c(1.0, 0.0), 60);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_vacuum_overlap() {
        let alpha = coherent_vector(c(1.0, 0.0), 60);
        let vac = coherent_vector(c(0.0, 0.0), 60);
        let overlap = vac.inner(&alpha).norm_sqr();
        let expected = (-1.0f64).exp();
        assert!((overlap - expected).abs() < 1e-14);
        assert!((overlap - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn coherent_large_amplitude_does_not_overflow() {
        let v = coherent_vector(c(20.0, 5.0), 900);
        assert!(v.amplitudes().iter().all(|x| x.re.is_finite() && x.im.is_finite()));
        assert!((v.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn displacement_identity_at_zero() {
        let d = displacement_matrix(c(0.0, 0.0), 12);
        assert!(max_dev(d.matrix(), &DMatrix::identity(13, 13)) < 1e-15);
    }

    #[test]
    fn displacement_of_vacuum_is_coherent() {
        let alpha = c(0.7, 0.2);
        let d = displacement_matrix(alpha, 40);
        let col = d.apply(&FockVector::number_state(0, 41));
        let coh = coherent_vector(alpha, 40);
        let dev = col
            .amplitudes()
            .iter()
            .zip(coh.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(dev <= 1e-10, "{dev:e}");
    }

    #[test]
    fn displacement_matches_generator_exponential() {
        for alpha in [c(0.3, -0.4), c(1.2, 0.9), c(-2.0, 0.0), c(0.0, 1.7)] {
            let lag = displacement_matrix(alpha, 30);
            let ex = displacement_by_expm(alpha, 30, 160);
            let dev = max_dev(lag.matrix(), &ex);
            assert!(dev < 1e-10, "alpha={alpha} dev={dev:e}");
        }
    }

    #[test]
    fn displacement_interior_unitarity() {
        for alpha in [c(1.5, 0.0), c(1.0, -1.0), c(0.3, 1.4), c(-1.2, 0.8)] {
            let d = displacement_matrix(alpha, 60);
            let prod = d.matrix() * d.matrix().adjoint();
            let half = 31;
            let block = prod.view((0, 0), (half, half)).into_owned();
            assert!(max_dev(&block, &DMatrix::identity(half, half)) <= 1e-8);
        }
    }

    #[test]
    fn squeeze_identity_at_zero() {
        let s = squeeze_matrix(0.0, 10).unwrap();
        assert!(max_dev(s.matrix(), &DMatrix::identity(11, 11)) < 1e-15);
    }

    #[test]
    fn squeezed_vacuum_quadrature_variance() {
        let n_max = 60;
        let s = squeeze_matrix(0.3, n_max).unwrap();
        let psi = s.apply(&FockVector::number_state(0, n_max + 1));
        let a = annihilation(n_max + 1).into_matrix();
        let x = (&a + a.adjoint()) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let xv = &x * psi.as_dvector();
        let mean = psi.as_dvector().dotc(&xv).re;
        let second = psi.as_dvector().dotc(&(&x * &xv)).re;
        let var = second - mean * mean;
        let expected = (-0.6f64).exp() / 2.0;
        assert!((var - expected).abs() < 1e-10, "{var} vs {expected}");
        assert!((var - 0.27441).abs() < 1e-5);
    }

    #[test]
    fn squeeze_preserves_parity() {
        let s = squeeze_matrix(0.5, 40).unwrap();
        assert!(s.get(1, 0).norm() <= 1e-12);
        for m in 0..41 {
            for n in 0..41 {
                if (m + n) % 2 == 1 {
                    assert!(s.get(m, n).norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn squeeze_interior_orthonormality() {
        for (r, n_max) in [(0.1, 60), (-0.1, 60), (0.15, 100)] {
            let s = squeeze_matrix(r, n_max).unwrap();
            let half = n_max / 2 + 1;
            let rows = s.matrix().view((0, 0), (half, n_max + 1)).into_owned();
            let gram = &rows * rows.adjoint();
            assert!(max_dev(&gram, &DMatrix::identity(half, half)) <= 1e-8);
        }
    }

    #[test]
    fn squeeze_rejects_large_r() {
        assert!(matches!(
            squeeze_matrix(2.0, 60),
            Err(Error::SqueezeTooLarge { .. })
        ));
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert_eq!(min_eigenvalue(&FockOperator::identity(5)).unwrap(), 1.0);
        let d = FockOperator::from_diagonal(&[1.0, -2.0, 3.0]);
        assert!((min_eigenvalue(&d).unwrap() + 2.0).abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = DMatrix::from_element(2, 2, ZERO);
        m[(0, 1)] = ONE;
        let op = FockOperator::general(m);
        assert!(matches!(min_eigenvalue(&op), Err(Error::NotHermitian { .. })));
        assert!(matches!(
            FockOperator::hermitian(op.matrix().clone()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn gershgorin_examples() {
        assert_eq!(gershgorin_margin(&FockOperator::identity(4)).unwrap(), 1.0);
        let d = FockOperator::from_diagonal(&[0.4, 0.1, 0.7]);
        assert_eq!(gershgorin_margin(&d).unwrap(), 0.1);
    }

    #[test]
    fn eigendecompose_examples() {
        let pairs = eigendecompose(&FockOperator::identity(3)).unwrap();
        assert!(pairs.iter().all(|(v, _)| (v - 1.0).abs() < 1e-15));

        let d = FockOperator::from_diagonal(&[0.2, 0.5, 0.3]);
        let pairs = eigendecompose(&d).unwrap();
        let vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        assert_eq!(vals, vec![0.5, 0.3, 0.2]);
        assert!((pairs[0].1.amplitudes()[1].norm() - 1.0).abs() < 1e-15);
        assert!((pairs[2].1.amplitudes()[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thermal_spectrum_is_geometric() {
        let nbar: f64 = 1.0;
        let diag: Vec<f64> = (0..31)
            .map(|n| nbar.powi(n) / (nbar + 1.0).powi(n + 1))
            .collect();
        let pairs = eigendecompose(&FockOperator::from_diagonal(&diag)).unwrap();
        for (n, (val, _)) in pairs.iter().enumerate() {
            assert!((val - diag[n]).abs() <= 1e-12);
        }
    }

    #[test]
    fn eigendecompose_reconstructs() {
        let alpha = c(0.6, -0.3);
        let d = displacement_matrix(alpha, 20);
        let thermal = FockOperator::from_diagonal(
            &(0..21).map(|n| 0.5f64.powi(n + 1)).collect::<Vec<_>>(),
        );
        let rho = FockOperator::hermitian(
            d.matrix() * thermal.matrix() * d.matrix().adjoint(),
        )
        .unwrap();
        let pairs = eigendecompose(&rho).unwrap();
        let mut rec = DMatrix::from_element(21, 21, ZERO);
        for (val, v) in &pairs {
            rec += v.as_dvector() * v.as_dvector().adjoint() * C64::new(*val, 0.0);
        }
        assert!(max_dev(&rec, rho.matrix()) <= 1e-8 * rho.max_abs());
        assert!(pairs.windows(2).all(|w| w[0].0 >= w[1].0));
    }

    #[test]
    fn fidelity_examples() {
        let a = FockOperator::from_diagonal(&[0.5, 0.25, 0.25]);
        assert!((diagonal_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let p0 = FockOperator::from_diagonal(&[1.0, 0.0]);
        let p1 = FockOperator::from_diagonal(&[0.0, 1.0]);
        assert_eq!(diagonal_fidelity(&p0, &p1).unwrap(), 0.0);
        let bad = FockOperator::from_diagonal(&[0.5, 0.4]);
        assert!(matches!(
            diagonal_fidelity(&a.truncated(2), &bad),
            Err(Error::NotNormalized(_))
        ));
        let coh = FockOperator::projector(&coherent_vector(c(0.1, 0.0), 3).normalized());
        let proj = FockOperator::from_diagonal(&[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            diagonal_fidelity(&coh, &proj),
            Err(Error::NotDiagonal(_))
        ));
    }
}
