//! Krylov iterations constrained by an automaton: per-state subspaces are
//! propagated along transitions until every state's rank is stationary.

use nalgebra::DMatrix;

use crate::automata::{Ndfa, State};
use crate::error::{Error, Result};
use crate::linalg::{hcat, orth, Basis};
use crate::lss::Lss;
use crate::scalar::Real;

/// Per-state bases after the fixed-point loop.
#[derive(Debug, Clone)]
pub struct StateBasisMap<T: Real> {
    pub bases: Vec<Basis<T>>,
    /// Number of sweeps performed, including the final stationary one.
    pub iterations: usize,
}

/// Runs `V_s <- orth([V_s, A_q V_{s'}^old for every edge s' -q-> s])` until
/// no rank changes, or for at most `max_sweeps` sweeps.
fn propagate<T: Real>(
    mats: &[DMatrix<T>],
    mut bases: Vec<Basis<T>>,
    edges: &[(State, usize, State)],
    max_sweeps: Option<usize>,
) -> Result<StateBasisMap<T>> {
    let n = mats.first().map_or(0, |a| a.nrows());
    let mut iterations = 0;
    loop {
        if max_sweeps.is_some_and(|k| iterations >= k) {
            break;
        }
        iterations += 1;
        let mut next = Vec::with_capacity(bases.len());
        let mut changed = false;
        for (s, old) in bases.iter().enumerate() {
            let images: Vec<DMatrix<T>> = edges
                .iter()
                .filter(|&&(_, _, to)| to == s)
                .filter(|&&(from, _, _)| bases[from].dim() > 0)
                .map(|&(from, q, _)| &mats[q - 1] * bases[from].matrix())
                .collect();
            if images.is_empty() {
                next.push(old.clone());
                continue;
            }
            let mut blocks = vec![old.matrix()];
            blocks.extend(images.iter());
            let v = orth(&hcat(n, &blocks))?;
            changed |= v.dim() != old.dim();
            next.push(v);
        }
        bases = next;
        if !changed {
            break;
        }
    }
    Ok(StateBasisMap { bases, iterations })
}

fn check_automaton<T: Real>(sys: &Lss<T>, a: &Ndfa) -> Result<()> {
    if a.max_letter() > sys.mode_count() {
        return Err(Error::LetterOutOfRange { letter: a.max_letter(), modes: sys.mode_count() });
    }
    if !a.is_coreachable() {
        return Err(Error::Precondition(
            "automaton must be co-reachable; trim it with trim_coreachable first".into(),
        ));
    }
    Ok(())
}

fn column_seed<T: Real>(g: &DMatrix<T>, j: usize, n: usize) -> Result<DMatrix<T>> {
    if g.nrows() != n || j >= g.ncols() {
        return Err(Error::Dimension(format!(
            "column {j} of a {}x{} matrix with state dimension {n}",
            g.nrows(),
            g.ncols()
        )));
    }
    Ok(g.columns(j, 1).into_owned())
}

/// Per-state reachability bases for the column `g[:, j]` (0-based `j`).
/// `max_sweeps = None` runs to the fixed point.
pub fn reach_state_bases<T: Real>(
    sys: &Lss<T>,
    g: &DMatrix<T>,
    j: usize,
    a: &Ndfa,
    max_sweeps: Option<usize>,
) -> Result<StateBasisMap<T>> {
    sys.ensure_valid()?;
    check_automaton(sys, a)?;
    let seed = column_seed(g, j, sys.n)?;
    let mut bases = vec![Basis::empty(sys.n); a.state_count()];
    bases[a.initial()] = orth(&seed)?;
    let mats: Vec<DMatrix<T>> = sys.modes.iter().map(|md| md.a.clone()).collect();
    let edges: Vec<_> = a.transitions().iter().copied().collect();
    propagate(&mats, bases, &edges, max_sweeps)
}

/// Orthonormal basis of `span{ A_v g[:, j] : v in L(a) }` (0-based `j`).
pub fn reach_constrained<T: Real>(sys: &Lss<T>, g: &DMatrix<T>, j: usize, a: &Ndfa) -> Result<Basis<T>> {
    if a.finals().is_empty() {
        column_seed(g, j, sys.n)?;
        return Ok(Basis::empty(sys.n));
    }
    let map = reach_state_bases(sys, g, j, a, None)?;
    let finals: Vec<&DMatrix<T>> = a.finals().iter().map(|&f| map.bases[f].matrix()).collect();
    orth(&hcat(sys.n, &finals))
}

/// Per-state bases of the transposed row spaces for the row `h[i, :]`
/// (0-based `i`), propagated backwards from the final states.
pub fn obs_state_bases<T: Real>(
    sys: &Lss<T>,
    h: &DMatrix<T>,
    i: usize,
    a: &Ndfa,
    max_sweeps: Option<usize>,
) -> Result<StateBasisMap<T>> {
    sys.ensure_valid()?;
    check_automaton(sys, a)?;
    let seed = column_seed(&h.transpose(), i, sys.n)?;
    let seed_basis = orth(&seed)?;
    let mut bases = vec![Basis::empty(sys.n); a.state_count()];
    for &f in a.finals() {
        bases[f] = seed_basis.clone();
    }
    let mats: Vec<DMatrix<T>> = sys.modes.iter().map(|md| md.a.transpose()).collect();
    let reversed: Vec<_> = a.transitions().iter().map(|&(s, q, t)| (t, q, s)).collect();
    propagate(&mats, bases, &reversed, max_sweeps)
}

/// Row-orthonormal `W` with `ker W = { x : h[i, :] A_v x = 0 for all v in L(a) }`
/// (0-based `i`).
pub fn obs_constrained<T: Real>(sys: &Lss<T>, h: &DMatrix<T>, i: usize, a: &Ndfa) -> Result<DMatrix<T>> {
    if a.finals().is_empty() {
        column_seed(&h.transpose(), i, sys.n)?;
        return Ok(DMatrix::zeros(0, sys.n));
    }
    let map = obs_state_bases(sys, h, i, a, None)?;
    Ok(map.bases[a.initial()].matrix().transpose())
}
