//! Partial reachability spaces `R_N` and partial unobservability spaces
//! `O_N`, computed as Krylov closures that stop once the rank settles.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::linalg::{hcat, orth, Basis};
use crate::lss::Lss;
use crate::scalar::Real;

/// Orthonormal basis of `R_N`.
#[derive(Debug, Clone)]
pub struct ReachBasisN<T: Real> {
    pub basis: Basis<T>,
    pub depth: usize,
    /// Iteration after which the rank stopped growing (`<= depth`).
    pub stabilized_at: usize,
}

/// Row-orthonormal `W` with `ker W = O_N`.
#[derive(Debug, Clone)]
pub struct ObsKernelN<T: Real> {
    pub w: DMatrix<T>,
    pub depth: usize,
    pub stabilized_at: usize,
}

impl<T: Real> ReachBasisN<T> {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

impl<T: Real> ObsKernelN<T> {
    /// `n - dim O_N`.
    pub fn rank(&self) -> usize {
        self.w.nrows()
    }
}

/// `span{ A_v seed : |v| <= depth }` for the generator family `mats`.
///
/// Returns the basis and the iteration at which the dimension became
/// stationary. Both partial spaces go through here.
pub fn krylov_closure<T: Real>(
    mats: &[DMatrix<T>],
    seed: &DMatrix<T>,
    depth: usize,
) -> Result<(Basis<T>, usize)> {
    let n = seed.nrows();
    let mut v = orth(seed)?;
    for k in 1..=depth {
        if v.dim() == 0 || v.dim() == n {
            return Ok((v, k - 1));
        }
        let images: Vec<DMatrix<T>> = mats.iter().map(|a| a * v.matrix()).collect();
        let mut blocks = vec![v.matrix()];
        blocks.extend(images.iter());
        let next = orth(&hcat(n, &blocks))?;
        if next.dim() == v.dim() {
            return Ok((v, k - 1));
        }
        v = next;
    }
    Ok((v, depth))
}

/// Partial reachability space `R_N = span{A_v [x0 B_1 .. B_D] : |v| <= N}`.
pub fn reach_space<T: Real>(sys: &Lss<T>, depth: usize) -> Result<ReachBasisN<T>> {
    sys.ensure_valid()?;
    let mats: Vec<DMatrix<T>> = sys.modes.iter().map(|md| md.a.clone()).collect();
    let (basis, stabilized_at) = krylov_closure(&mats, &sys.b_tilde(), depth)?;
    Ok(ReachBasisN { basis, depth, stabilized_at })
}

/// Partial unobservability space, as the transposed reachability closure of
/// `(A_q^T, C_q^T)` with zero initial state.
pub fn unobs_space<T: Real>(sys: &Lss<T>, depth: usize) -> Result<ObsKernelN<T>> {
    sys.ensure_valid()?;
    let mats: Vec<DMatrix<T>> = sys.modes.iter().map(|md| md.a.transpose()).collect();
    let seed = sys.c_tilde().transpose();
    let (basis, stabilized_at) = krylov_closure(&mats, &seed, depth)?;
    Ok(ObsKernelN { w: basis.matrix().transpose(), depth, stabilized_at })
}
