//! N- and 2N-moment matching by one- and two-sided projection.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, RankTriple, Result};
use crate::linalg::{condition_number, left_inverse, rank, right_inverse, Basis};
use crate::lss::{Lss, ModeMatrices};
use crate::scalar::Real;
use crate::subspace::{reach_space, unobs_space};

/// Condition number of `WV` above which a warning is logged.
pub const WV_CONDITION_WARN: f64 = 1e12;

/// Which side(s) of the system the projection acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReductionMode {
    /// Reachability side: `x = V z`.
    R,
    /// Observability side: `z = W x`.
    O,
    /// Both sides, Petrov-Galerkin.
    T,
}

impl fmt::Display for ReductionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReductionMode::R => "R",
            ReductionMode::O => "O",
            ReductionMode::T => "T",
        })
    }
}

impl FromStr for ReductionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "R" | "r" => Ok(ReductionMode::R),
            "O" | "o" => Ok(ReductionMode::O),
            "T" | "t" => Ok(ReductionMode::T),
            other => Err(Error::Parse(format!("unknown reduction mode {other:?} (expected R, O or T)"))),
        }
    }
}

/// Ranks of the projection matrices that were actually formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProjectionRanks {
    pub v: Option<usize>,
    pub w: Option<usize>,
    pub wv: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ReductionReport<T: Real> {
    pub reduced: Lss<T>,
    pub mode: ReductionMode,
    /// Requested depth `N`; `None` for selection-based reducers.
    pub depth: Option<usize>,
    /// Word length up to which Markov parameters are guaranteed to match.
    pub matched_depth: Option<usize>,
    pub ranks: ProjectionRanks,
    /// Condition number of `WV` for two-sided projections.
    pub wv_condition: Option<T>,
}

fn map_modes<T: Real>(
    sys: &Lss<T>,
    f: impl Fn(&ModeMatrices<T>) -> ModeMatrices<T>,
) -> Vec<ModeMatrices<T>> {
    sys.modes.iter().map(f).collect()
}

/// `A~ = V^T A V`, `B~ = V^T B`, `C~ = C V`, `x0~ = V^T x0`.
pub fn project_left<T: Real>(sys: &Lss<T>, v: &Basis<T>) -> Lss<T> {
    let vm = v.matrix();
    let vl = left_inverse(v);
    Lss {
        p: sys.p,
        m: sys.m,
        n: v.dim(),
        modes: map_modes(sys, |md| ModeMatrices {
            a: &vl * &md.a * vm,
            b: &vl * &md.b,
            c: &md.c * vm,
        }),
        x0: &vl * &sys.x0,
    }
}

/// `A~ = W A W^+`, `B~ = W B`, `C~ = C W^+`, `x0~ = W x0` for full-row-rank `W`.
pub fn project_right<T: Real>(sys: &Lss<T>, w: &DMatrix<T>) -> Result<Lss<T>> {
    let wr = right_inverse(w)?;
    Ok(Lss {
        p: sys.p,
        m: sys.m,
        n: w.nrows(),
        modes: map_modes(sys, |md| ModeMatrices {
            a: w * &md.a * &wr,
            b: w * &md.b,
            c: &md.c * &wr,
        }),
        x0: w * &sys.x0,
    })
}

/// Two-sided projection with `P = V (W V)^{-1}`.
///
/// Checks `rank V = rank W = rank WV` first and reports the triple on
/// failure. Returns the reduced system and `cond(WV)`.
pub fn project_two_sided<T: Real>(
    sys: &Lss<T>,
    w: &DMatrix<T>,
    v: &DMatrix<T>,
) -> Result<(Lss<T>, T)> {
    let wv = w * v;
    let ranks = RankTriple { v: rank(v), w: rank(w), wv: rank(&wv) };
    if ranks.v != ranks.w || ranks.w != ranks.wv || v.ncols() != ranks.v || w.nrows() != ranks.w {
        return Err(Error::RankFailure(ranks));
    }
    let r = ranks.v;
    if r == 0 {
        let reduced = Lss {
            p: sys.p,
            m: sys.m,
            n: 0,
            modes: map_modes(sys, |_| ModeMatrices {
                a: DMatrix::zeros(0, 0),
                b: DMatrix::zeros(0, sys.m),
                c: DMatrix::zeros(sys.p, 0),
            }),
            x0: DVector::zeros(0),
        };
        return Ok((reduced, T::one()));
    }
    let cond = condition_number(&wv);
    if cond.as_f64() > WV_CONDITION_WARN {
        log::warn!("WV is ill-conditioned (cond = {:.3e})", cond.as_f64());
    } else {
        log::debug!("cond(WV) = {:.3e}", cond.as_f64());
    }
    let inv = wv.lu().try_inverse().ok_or(Error::RankFailure(ranks))?;
    let p = v * inv;
    let reduced = Lss {
        p: sys.p,
        m: sys.m,
        n: r,
        modes: map_modes(sys, |md| ModeMatrices {
            a: w * &md.a * &p,
            b: w * &md.b,
            c: &md.c * &p,
        }),
        x0: w * &sys.x0,
    };
    Ok((reduced, cond))
}

/// Reduces `sys` so that Markov parameters match up to length `N`
/// (modes R and O) or `2N` (mode T, when the rank condition holds).
pub fn reduce<T: Real>(sys: &Lss<T>, depth: usize, mode: ReductionMode) -> Result<ReductionReport<T>> {
    sys.ensure_valid()?;
    match mode {
        ReductionMode::R => {
            let v = reach_space(sys, depth)?;
            Ok(ReductionReport {
                reduced: project_left(sys, &v.basis),
                mode,
                depth: Some(depth),
                matched_depth: Some(depth),
                ranks: ProjectionRanks { v: Some(v.dim()), ..Default::default() },
                wv_condition: None,
            })
        }
        ReductionMode::O => {
            let w = unobs_space(sys, depth)?;
            Ok(ReductionReport {
                reduced: project_right(sys, &w.w)?,
                mode,
                depth: Some(depth),
                matched_depth: Some(depth),
                ranks: ProjectionRanks { w: Some(w.rank()), ..Default::default() },
                wv_condition: None,
            })
        }
        ReductionMode::T => {
            let v = reach_space(sys, depth)?;
            let w = unobs_space(sys, depth)?;
            let (reduced, cond) = project_two_sided(sys, &w.w, v.basis.matrix())?;
            let r = reduced.n;
            Ok(ReductionReport {
                reduced,
                mode,
                depth: Some(depth),
                matched_depth: Some(2 * depth),
                ranks: ProjectionRanks { v: Some(r), w: Some(r), wv: Some(r) },
                wv_condition: Some(cond),
            })
        }
    }
}

pub(crate) fn check_compatible<T: Real>(sys: &Lss<T>, red: &Lss<T>) -> Result<()> {
    if sys.p != red.p || sys.m != red.m || sys.mode_count() != red.mode_count() {
        return Err(Error::Dimension(format!(
            "systems differ in (p, m, D): ({}, {}, {}) vs ({}, {}, {})",
            sys.p,
            sys.m,
            sys.mode_count(),
            red.p,
            red.m,
            red.mode_count()
        )));
    }
    Ok(())
}

/// Relative Frobenius error `|a - b| / |a|`, absolute when `a = 0`.
pub(crate) fn relative_error<T: Real>(reference: &DMatrix<T>, other: &DMatrix<T>) -> T {
    let diff = (reference - other).norm();
    let scale = reference.norm();
    if scale > T::zero() {
        diff / scale
    } else {
        diff
    }
}

/// Largest relative Markov-parameter error over all words of length
/// `<= depth`.
pub fn check_partial_realization<T: Real>(sys: &Lss<T>, red: &Lss<T>, depth: usize) -> Result<T> {
    sys.ensure_valid()?;
    red.ensure_valid()?;
    check_compatible(sys, red)?;
    let full = sys.markov_parameters_up_to(depth)?;
    let reduced = red.markov_parameters_up_to(depth)?;
    Ok(full
        .iter()
        .map(|(w, mp)| relative_error(&mp.value, &reduced[w].value))
        .fold(T::zero(), |acc, e| if e > acc { e } else { acc }))
}
