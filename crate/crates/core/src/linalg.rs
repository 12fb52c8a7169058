//! Dense linear-algebra kernel: orthonormal ranges, ranks, one-sided
//! inverses and the matrix exponential.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Matrix with orthonormal columns spanning a subspace of `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis<T: Real> {
    matrix: DMatrix<T>,
    tol: T,
}

impl<T: Real> Basis<T> {
    /// The `n x 0` basis of the zero subspace.
    pub fn empty(n: usize) -> Self {
        Basis { matrix: DMatrix::zeros(n, 0), tol: T::default_rank_tol() }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.matrix
    }

    pub fn tol(&self) -> T {
        self.tol
    }

    /// Ambient dimension `n`.
    pub fn ambient_dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Subspace dimension (number of columns).
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Orthogonal projector onto the spanned subspace.
    pub fn projector(&self) -> DMatrix<T> {
        &self.matrix * self.matrix.transpose()
    }
}

pub fn all_finite<T: Real>(m: &DMatrix<T>) -> bool {
    m.iter().all(|v| v.is_finite_value())
}

fn check_finite<T: Real>(m: &DMatrix<T>, what: &str) -> Result<()> {
    if all_finite(m) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains non-finite entries")))
    }
}

fn to_faer<T: Real>(m: &DMatrix<T>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].as_f64())
}

// SVDs go through faer in double precision: nalgebra's bidiagonal SVD can
// return an inaccurate factorization for exactly rank-deficient input.

/// Singular values (descending) and the matching left singular vectors.
fn left_svd<T: Real>(m: &DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (Vec::new(), DMatrix::zeros(m.nrows(), 0));
    }
    match to_faer(m).thin_svd() {
        Ok(svd) => {
            let s = svd.S().column_vector();
            let u = svd.U();
            let values = (0..s.nrows()).map(|i| T::lit(s[i])).collect();
            (values, DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| T::lit(u[(i, j)])))
        }
        Err(_) => nalgebra_left_svd(m),
    }
}

fn nalgebra_left_svd<T: Real>(m: &DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sorted = DMatrix::from_fn(m.nrows(), order.len(), |i, j| u[(i, order[j])]);
    (values, sorted)
}

/// Singular values in descending order.
pub fn singular_values<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    left_svd(m).0
}

fn numerical_rank<T: Real>(sv: &[T], tol: T) -> usize {
    match sv.first() {
        Some(&max) if max > T::zero() => sv.iter().take_while(|&&s| s > tol * max).count(),
        _ => 0,
    }
}

/// Rank with singular values below `tol * sigma_max` treated as zero.
pub fn rank_with_tol<T: Real>(m: &DMatrix<T>, tol: T) -> usize {
    numerical_rank(&singular_values(m), tol)
}

pub fn rank<T: Real>(m: &DMatrix<T>) -> usize {
    rank_with_tol(m, T::default_rank_tol())
}

/// Orthonormal basis of `im(m)` using the default rank tolerance.
pub fn orth<T: Real>(m: &DMatrix<T>) -> Result<Basis<T>> {
    orth_with_tol(m, T::default_rank_tol())
}

/// Orthonormal basis of `im(m)`; singular values at or below
/// `tol * sigma_max` are discarded.
pub fn orth_with_tol<T: Real>(m: &DMatrix<T>, tol: T) -> Result<Basis<T>> {
    check_finite(m, "orth argument")?;
    if tol <= T::zero() {
        return Err(Error::InvalidInput("rank tolerance must be positive".into()));
    }
    let (sv, u) = left_svd(m);
    let r = numerical_rank(&sv, tol);
    Ok(Basis { matrix: u.columns(0, r).into_owned(), tol })
}

/// Left inverse of an orthonormal basis: its transpose.
pub fn left_inverse<T: Real>(v: &Basis<T>) -> DMatrix<T> {
    v.matrix.transpose()
}

/// Right inverse `W^T (W W^T)^{-1}` of a full-row-rank matrix.
pub fn right_inverse<T: Real>(w: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_finite(w, "right_inverse argument")?;
    let r = rank(w);
    if r != w.nrows() {
        return Err(Error::Rank(format!(
            "right inverse needs full row rank, got rank {r} for {} rows",
            w.nrows()
        )));
    }
    if w.nrows() == 0 {
        return Ok(DMatrix::zeros(w.ncols(), 0));
    }
    let gram = w * w.transpose();
    let inv = gram
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Rank("W W^T is singular".into()))?;
    Ok(w.transpose() * inv)
}

/// `e^{A t}` by Padé scaling and squaring.
pub fn expm<T: Real>(a: &DMatrix<T>, t: T) -> Result<DMatrix<T>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "expm needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(a, "expm argument")?;
    if !t.is_finite_value() {
        return Err(Error::InvalidInput("expm time must be finite".into()));
    }
    if a.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    Ok((a * t).exp())
}

/// Horizontal concatenation; every block must have `rows` rows.
pub fn hcat<T: Real>(rows: usize, blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.columns_mut(at, b.ncols()).copy_from(*b);
        at += b.ncols();
    }
    out
}

/// Vertical concatenation; every block must have `cols` columns.
pub fn vcat<T: Real>(cols: usize, blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.rows_mut(at, b.nrows()).copy_from(*b);
        at += b.nrows();
    }
    out
}

/// Spectral-norm distance between the orthogonal projectors onto two
/// subspaces given by orthonormal column matrices.
pub fn subspace_distance<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    let pa = a * a.transpose();
    let pb = b * b.transpose();
    singular_values(&(pa - pb)).first().copied().unwrap_or_else(T::zero)
}

/// 2-norm condition number `sigma_max / sigma_min` of a square matrix.
pub fn condition_number<T: Real>(m: &DMatrix<T>) -> T {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > T::zero() => hi / lo,
        (Some(_), Some(_)) => T::max_value().unwrap_or_else(T::one),
        _ => T::one(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn orth_axis_aligned_rank_one() {
        let b = orth(&dmatrix![2.0f64, 0.0; 0.0, 0.0]).unwrap();
        assert_eq!(b.dim(), 1);
        assert_abs_diff_eq!(b.matrix()[(0, 0)].abs(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b.matrix()[(1, 0)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn orth_identity_spans_everything() {
        let b = orth(&DMatrix::<f64>::identity(3, 3)).unwrap();
        assert_eq!(b.dim(), 3);
        assert!((b.projector() - DMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn orth_rank_one_direction() {
        let b = orth(&dmatrix![1.0, 2.0; 2.0, 4.0]).unwrap();
        assert_eq!(b.dim(), 1);
        let expected = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]) / 5f64.sqrt();
        assert!(subspace_distance(b.matrix(), &expected) < 1e-12);
    }

    #[test]
    fn orth_zero_and_empty() {
        assert_eq!(orth(&DMatrix::<f64>::zeros(4, 3)).unwrap().dim(), 0);
        let e = orth(&DMatrix::<f64>::zeros(4, 0)).unwrap();
        assert_eq!((e.ambient_dim(), e.dim()), (4, 0));
    }

    #[test]
    fn orth_rejects_non_finite() {
        let m = dmatrix![1.0, f64::NAN];
        assert!(matches!(orth(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn orth_works_for_f32() {
        let b = orth(&dmatrix![1.0f32, 2.0; 2.0, 4.0]).unwrap();
        assert_eq!(b.dim(), 1);
    }

    #[test]
    fn left_inverse_cases() {
        let e1 = orth(&dmatrix![1.0; 0.0]).unwrap();
        let li = left_inverse(&e1);
        assert_abs_diff_eq!((li * e1.matrix())[(0, 0)], 1.0, epsilon = 1e-15);
        let id = orth(&DMatrix::<f64>::identity(3, 3)).unwrap();
        assert!((left_inverse(&id) * id.matrix() - DMatrix::identity(3, 3)).norm() < 1e-12);
        let v = orth(&random(5, 2, 3)).unwrap();
        let prod = left_inverse(&v) * v.matrix();
        assert!((prod - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn right_inverse_cases() {
        let w = dmatrix![1.0, 0.0];
        assert!((right_inverse(&w).unwrap() - dmatrix![1.0; 0.0]).norm() < 1e-15);
        let w = DMatrix::<f64>::identity(2, 2) * 2.0;
        assert!((right_inverse(&w).unwrap() - DMatrix::identity(2, 2) * 0.5).norm() < 1e-15);
        let w = random(2, 5, 11);
        let prod = &w * right_inverse(&w).unwrap();
        assert!((prod - DMatrix::identity(2, 2)).amax() < 1e-10);
        let deficient = dmatrix![1.0, 2.0; 2.0, 4.0];
        assert!(matches!(right_inverse(&deficient), Err(Error::Rank(_))));
    }

    #[test]
    fn expm_closed_forms() {
        let z = expm(&DMatrix::<f64>::zeros(3, 3), 1.0).unwrap();
        assert!((z - DMatrix::identity(3, 3)).norm() < 1e-15);
        let d = expm(&dmatrix![1.0, 0.0; 0.0, -1.0], 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((d - dmatrix![e, 0.0; 0.0, 1.0 / e]).amax() < 1e-14);
        for &t in &[0.1f64, 1.0, 7.5] {
            let n = expm(&dmatrix![0.0, 1.0; 0.0, 0.0], t).unwrap();
            assert!((n - dmatrix![1.0, t; 0.0, 1.0]).amax() < 1e-12 * t.max(1.0));
        }
    }

    #[test]
    fn expm_matches_symmetric_eigen_oracle() {
        // e^{S} = Q e^{Lambda} Q^T for symmetric S, independent of Padé.
        for seed in 0..5 {
            let g = random(6, 6, 100 + seed);
            let mut s = (&g + g.transpose()) * 0.5;
            let scale = 10.0 / singular_values(&s)[0];
            s *= scale;
            let eig = s.clone().symmetric_eigen();
            let exp_l = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::exp));
            let oracle = &eig.eigenvectors * exp_l * eig.eigenvectors.transpose();
            let got = expm(&s, 1.0).unwrap();
            let rel = (&got - &oracle).norm() / oracle.norm();
            assert!(rel < 1e-12, "relative error {rel}");
        }
    }

    #[test]
    fn expm_rejects_non_square() {
        assert!(matches!(expm(&DMatrix::<f64>::zeros(2, 3), 1.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn hcat_vcat_shapes() {
        let a = DMatrix::<f64>::zeros(3, 2);
        let b = DMatrix::<f64>::zeros(3, 0);
        assert_eq!(hcat(3, &[&a, &b, &a]).shape(), (3, 4));
        let c = DMatrix::<f64>::zeros(1, 2);
        assert_eq!(vcat(2, &[&c, &a.transpose().columns(0, 2).into_owned()]).shape(), (3, 2));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix_strategy() -> impl Strategy<Value = DMatrix<f64>> {
            (1usize..7, 1usize..7, any::<u64>(), 0usize..4).prop_map(|(r, c, seed, drop)| {
                let mut m = random(r, c, seed);
                // Make some columns dependent so rank deficiency is exercised.
                for k in 0..drop.min(c.saturating_sub(1)) {
                    let src = m.column(0).into_owned() * (k as f64 + 0.5);
                    m.set_column(c - 1 - k, &src);
                }
                m
            })
        }

        proptest! {
            #[test]
            fn orth_preserves_image(m in matrix_strategy()) {
                let b = orth(&m).unwrap();
                let tol = 1e-10;
                // Orthonormal columns.
                let gram = b.matrix().transpose() * b.matrix();
                prop_assert!((gram - DMatrix::identity(b.dim(), b.dim())).amax() < 1e-10);
                // Every column of m lies in im(b) and dims agree.
                let residual = &m - b.projector() * &m;
                prop_assert!(residual.amax() <= 10.0 * tol * m.amax().max(1.0) + 1e-12);
                prop_assert_eq!(b.dim(), rank(&m));
                // left inverse is exact on orthonormal bases.
                let li = left_inverse(&b) * b.matrix();
                prop_assert!((li - DMatrix::identity(b.dim(), b.dim())).amax() < 1e-12);
            }

            #[test]
            fn expm_semigroup(seed in any::<u64>(), s in -1.0f64..1.0, t in -1.0f64..1.0) {
                let mut a = random(6, 6, seed);
                let norm = singular_values(&a)[0];
                a *= 2.0 / norm;
                let lhs = expm(&a, s).unwrap() * expm(&a, t).unwrap();
                let rhs = expm(&a, s + t).unwrap();
                prop_assert!((lhs - rhs).amax() < 1e-9);
            }
        }
    }
}
