//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const LN2: f64 = std::f64::consts::LN_2;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

/// `(A + Aᴴ) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Real inner product `Re tr(Aᴴ B)`.
pub fn re_inner(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub fn trace_re(a: &CMat) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Natural-log determinant of a Hermitian positive-definite matrix, or `None`
/// when the Cholesky factorization fails.
/// Cholesky factor of a Hermitian positive-definite matrix with its log-determinant.
///
/// The complex factorization happily takes square roots of negative pivots, so
/// every pivot is checked to be real and positive.
pub fn cholesky_hpd(a: &CMat) -> Option<(Cholesky<C64, Dyn>, f64)> {
    let chol = hermitian_part(a).cholesky()?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-10 * d.re) {
            return None;
        }
        acc += d.re.ln();
    }
    Some((chol, 2.0 * acc))
}

pub fn logdet_hpd(a: &CMat) -> Option<f64> {
    if a.nrows() == 0 {
        return Some(0.0);
    }
    cholesky_hpd(a).map(|(_, ld)| ld)
}

pub fn inverse_hpd(a: &CMat) -> Option<CMat> {
    if a.nrows() == 0 {
        return Some(zeros(0, 0));
    }
    let (chol, _) = cholesky_hpd(a)?;
    Some(hermitian_part(&chol.inverse()))
}

/// Hermitian eigendecomposition with eigenvalues sorted descending.
pub fn herm_eig(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    herm_eig(a).0.last().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(a: &CMat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    herm_eig(a).0[0]
}

/// Apply `f` to the eigenvalues of a Hermitian matrix.
pub fn herm_map(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = herm_eig(a);
    let scaled = DVector::from_iterator(vals.len(), vals.iter().map(|&v| c(f(v))));
    let mut left = vecs.clone();
    for (j, s) in scaled.iter().enumerate() {
        left.column_mut(j).scale_mut(s.re);
    }
    hermitian_part(&(left * vecs.adjoint()))
}

/// Principal square root of a Hermitian PSD matrix (negative eigenvalues clipped).
pub fn sqrt_hpsd(a: &CMat) -> CMat {
    herm_map(a, |v| v.max(0.0).sqrt())
}

/// Projection onto the PSD cone by eigenvalue clipping.
pub fn clip_psd(a: &CMat) -> CMat {
    herm_map(a, |v| v.max(0.0))
}

/// Orthonormal real basis of the n×n Hermitian matrices under `Re tr(AᴴB)`.
///
/// Coordinates are ordered: diagonal entries first, then for each `a < b` the
/// symmetric and antisymmetric off-diagonal pairs.
#[derive(Debug, Clone)]
pub struct HermitianBasis {
    n: usize,
    elements: Vec<CMat>,
}

impl HermitianBasis {
    pub fn new(n: usize) -> Self {
        let mut elements = Vec::with_capacity(n * n);
        for a in 0..n {
            let mut e = zeros(n, n);
            e[(a, a)] = c(1.0);
            elements.push(e);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for a in 0..n {
            for b in (a + 1)..n {
                let mut sym = zeros(n, n);
                sym[(a, b)] = c(h);
                sym[(b, a)] = c(h);
                elements.push(sym);
                let mut anti = zeros(n, n);
                anti[(a, b)] = C64::new(0.0, -h);
                anti[(b, a)] = C64::new(0.0, h);
                elements.push(anti);
            }
        }
        Self { n, elements }
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn element(&self, idx: usize) -> &CMat {
        &self.elements[idx]
    }

    pub fn elements(&self) -> &[CMat] {
        &self.elements
    }

    pub fn coords(&self, a: &CMat) -> Vec<f64> {
        self.elements.iter().map(|e| re_inner(e, a)).collect()
    }

    pub fn from_coords(&self, x: &[f64]) -> CMat {
        let mut out = zeros(self.n, self.n);
        for (e, &v) in self.elements.iter().zip(x) {
            out += e.scale(v);
        }
        out
    }
}
