//! Reducers that match a selection of Markov-parameter columns, rows or
//! entries, and exact output matching along a fixed mode sequence.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::automata::{generating_ndfa, Ndfa};
use crate::error::{Error, Result};
use crate::krylov::{obs_constrained, reach_constrained};
use crate::linalg::{hcat, orth, rank, Basis};
use crate::lss::Lss;
use crate::moment::{
    check_compatible, project_left, project_right, project_two_sided, ProjectionRanks, ReductionMode,
    ReductionReport,
};
use crate::scalar::Real;
use crate::selection::{AlphaLanguages, BetaLanguages};
use crate::word::{Mode, Word};

/// `orth[V_x0, V_(q,j) ..]` spanning `A_w x0` for `w in L_0` and
/// `A_w B_q e_j` for `w in L_(q,j)`.
pub fn beta_space<T: Real>(sys: &Lss<T>, langs: &BetaLanguages) -> Result<Basis<T>> {
    sys.ensure_valid()?;
    let x0 = DMatrix::from_column_slice(sys.n, 1, sys.x0.as_slice());
    let mut parts = vec![reach_constrained(sys, &x0, 0, &langs.x0.trim_coreachable())?];
    for (&(q, j), a) in &langs.columns {
        check_index(q, j, sys.mode_count(), sys.m, "input")?;
        parts.push(reach_constrained(sys, &sys.mode(q).b, j - 1, &a.trim_coreachable())?);
    }
    let blocks: Vec<&DMatrix<T>> = parts.iter().map(Basis::matrix).collect();
    orth(&hcat(sys.n, &blocks))
}

/// Row-orthonormal `W` whose kernel is the intersection of
/// `ker e_i^T C_q A_v` over `v in L_(q,i)`.
pub fn alpha_space<T: Real>(sys: &Lss<T>, langs: &AlphaLanguages) -> Result<DMatrix<T>> {
    sys.ensure_valid()?;
    let mut parts = Vec::new();
    for (&(q, i), a) in &langs.rows {
        check_index(q, i, sys.mode_count(), sys.p, "output")?;
        parts.push(obs_constrained(sys, &sys.mode(q).c, i - 1, &a.trim_coreachable())?.transpose());
    }
    let blocks: Vec<&DMatrix<T>> = parts.iter().collect();
    Ok(orth(&hcat(sys.n, &blocks))?.matrix().transpose())
}

fn check_index(q: Mode, k: usize, modes: usize, dim: usize, what: &str) -> Result<()> {
    if q == 0 || q > modes || k == 0 || k > dim {
        return Err(Error::InvalidInput(format!(
            "index ({q}, {k}) outside modes 1..={modes} / {what}s 1..={dim}"
        )));
    }
    Ok(())
}

fn selection_report<T: Real>(reduced: Lss<T>, mode: ReductionMode, ranks: ProjectionRanks) -> ReductionReport<T> {
    ReductionReport { reduced, mode, depth: None, matched_depth: None, ranks, wv_condition: None }
}

/// Reduction matching the selected columns.
pub fn reduce_beta<T: Real>(sys: &Lss<T>, langs: &BetaLanguages) -> Result<ReductionReport<T>> {
    let v = beta_space(sys, langs)?;
    let ranks = ProjectionRanks { v: Some(v.dim()), ..Default::default() };
    Ok(selection_report(project_left(sys, &v), ReductionMode::R, ranks))
}

/// Reduction matching the selected rows.
pub fn reduce_alpha<T: Real>(sys: &Lss<T>, langs: &AlphaLanguages) -> Result<ReductionReport<T>> {
    let w = alpha_space(sys, langs)?;
    let ranks = ProjectionRanks { w: Some(w.nrows()), ..Default::default() };
    Ok(selection_report(project_right(sys, &w)?, ReductionMode::O, ranks))
}

/// Two-sided reduction matching the selected entries; fails with the rank
/// triple unless `rank V = rank W = rank WV`.
pub fn reduce_alphabeta<T: Real>(
    sys: &Lss<T>,
    alpha: &AlphaLanguages,
    beta: &BetaLanguages,
) -> Result<ReductionReport<T>> {
    let v = beta_space(sys, beta)?;
    let w = alpha_space(sys, alpha)?;
    let (reduced, cond) = project_two_sided(sys, &w, v.matrix())?;
    let r = reduced.n;
    let ranks = ProjectionRanks { v: Some(r), w: Some(r), wv: Some(rank(&(&w * v.matrix()))) };
    let mut rep = selection_report(reduced, ReductionMode::T, ranks);
    rep.wv_condition = Some(cond);
    Ok(rep)
}

/// What a selection asks the reduced model to reproduce.
#[derive(Debug, Clone, Copy)]
pub enum Matched<'a> {
    Columns(&'a BetaLanguages),
    Rows(&'a AlphaLanguages),
    Entries { alpha: &'a AlphaLanguages, beta: &'a BetaLanguages },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemKind {
    /// Column `C~ A_w x0`.
    X0Column,
    /// Column `C~ A_w B_q e_j`.
    Column,
    /// Row `e_i^T C_q A_v B~`.
    Row,
    /// Entry `e_i^T C_q A_v A_w B_q0 e_j` (or `.. A_w x0` when `input` is `None`).
    Entry,
}

/// Error of one matched item, relative to the Frobenius norm of the
/// Markov parameter it belongs to.
#[derive(Debug, Clone)]
pub struct ItemError<T: Real> {
    pub kind: ItemKind,
    /// Markov-parameter word the item lives in.
    pub word: Word,
    /// Output block `(q, i)` for rows and entries.
    pub output: Option<(Mode, usize)>,
    /// Input block `(q0, j)` for columns and entries; `None` for `x0`.
    pub input: Option<(Mode, usize)>,
    pub error: T,
}

impl<T: Real> fmt::Display for ItemError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} word {}", self.kind, self.word)?;
        if let Some((q, i)) = self.output {
            write!(f, " row ({q},{i})")?;
        }
        match (self.kind, self.input) {
            (_, Some((q, j))) => write!(f, " col ({q},{j})")?,
            (ItemKind::X0Column | ItemKind::Entry, None) => write!(f, " col x0")?,
            _ => {}
        }
        write!(f, ": {:.3e}", self.error.as_f64())
    }
}

#[derive(Debug, Clone)]
pub struct SelectionCheck<T: Real> {
    pub max_error: T,
    pub items: Vec<ItemError<T>>,
}

impl<T: Real> SelectionCheck<T> {
    pub fn worst(&self) -> Option<&ItemError<T>> {
        self.items.iter().max_by(|a, b| a.error.partial_cmp(&b.error).unwrap_or(std::cmp::Ordering::Equal))
    }
}

struct Evaluator<'a, T: Real> {
    sys: &'a Lss<T>,
    red: &'a Lss<T>,
}

impl<T: Real> Evaluator<'_, T> {
    fn scale(&self, w: &Word) -> Result<T> {
        Ok(self.sys.markov_parameter(w)?.value.norm())
    }

    fn relative(&self, w: &Word, a: &DMatrix<T>, b: &DMatrix<T>) -> Result<T> {
        let diff = (a - b).norm();
        let s = self.scale(w)?;
        Ok(if s > T::zero() { diff / s } else { diff })
    }

    /// Input column: `x0` for `None`, `B_q e_j` otherwise.
    fn input(sys: &Lss<T>, input: Option<(Mode, usize)>) -> DMatrix<T> {
        match input {
            None => DMatrix::from_column_slice(sys.n, 1, sys.x0.as_slice()),
            Some((q, j)) => sys.mode(q).b.columns(j - 1, 1).into_owned(),
        }
    }

    fn column(&self, w: &Word, input: Option<(Mode, usize)>) -> Result<T> {
        let f = |s: &Lss<T>| -> Result<DMatrix<T>> { Ok(s.c_tilde() * s.a_word(w)? * Self::input(s, input)) };
        self.relative(w, &f(self.sys)?, &f(self.red)?)
    }

    fn row(&self, v: &Word, (q, i): (Mode, usize)) -> Result<T> {
        let f = |s: &Lss<T>| -> Result<DMatrix<T>> {
            Ok(s.mode(q).c.rows(i - 1, 1) * s.a_word(v)? * s.b_tilde())
        };
        self.relative(v, &f(self.sys)?, &f(self.red)?)
    }

    /// Entry of `M(w v)`: the column's word `w` acts first, then the row's `v`.
    fn entry(&self, v: &Word, (q, i): (Mode, usize), w: &Word, input: Option<(Mode, usize)>) -> Result<T> {
        let f = |s: &Lss<T>| -> Result<DMatrix<T>> {
            Ok(s.mode(q).c.rows(i - 1, 1) * s.a_word(v)? * s.a_word(w)? * Self::input(s, input))
        };
        self.relative(&w.concat(v), &f(self.sys)?, &f(self.red)?)
    }
}

/// A matched column: its input block (`None` for `x0`) and word.
type ColumnWord = (Option<(Mode, usize)>, Word);

fn column_words(beta: &BetaLanguages, modes: usize, cap: usize) -> Result<Vec<ColumnWord>> {
    let mut out = Vec::new();
    for w in beta.x0.accepted_words_up_to(modes, cap)? {
        out.push((None, w));
    }
    for (&k, a) in &beta.columns {
        for w in a.accepted_words_up_to(modes, cap)? {
            out.push((Some(k), w));
        }
    }
    Ok(out)
}

fn row_words(alpha: &AlphaLanguages, modes: usize, cap: usize) -> Result<Vec<((Mode, usize), Word)>> {
    let mut out = Vec::new();
    for (&k, a) in &alpha.rows {
        for v in a.accepted_words_up_to(modes, cap)? {
            out.push((k, v));
        }
    }
    Ok(out)
}

/// Compares exactly the Markov-parameter rows, columns or entries a
/// selection names, enumerating accepted words up to length `depth_cap`.
pub fn check_selection<T: Real>(
    sys: &Lss<T>,
    red: &Lss<T>,
    matched: Matched<'_>,
    depth_cap: usize,
) -> Result<SelectionCheck<T>> {
    sys.ensure_valid()?;
    red.ensure_valid()?;
    check_compatible(sys, red)?;
    let d = sys.mode_count();
    let ev = Evaluator { sys, red };
    let mut items = Vec::new();
    match matched {
        Matched::Columns(beta) => {
            for (input, w) in column_words(beta, d, depth_cap)? {
                let kind = if input.is_some() { ItemKind::Column } else { ItemKind::X0Column };
                let error = ev.column(&w, input)?;
                items.push(ItemError { kind, word: w, output: None, input, error });
            }
        }
        Matched::Rows(alpha) => {
            for (out, v) in row_words(alpha, d, depth_cap)? {
                let error = ev.row(&v, out)?;
                items.push(ItemError { kind: ItemKind::Row, word: v, output: Some(out), input: None, error });
            }
        }
        Matched::Entries { alpha, beta } => {
            let cols = column_words(beta, d, depth_cap)?;
            for (out, v) in row_words(alpha, d, depth_cap)? {
                for (input, w) in &cols {
                    let error = ev.entry(&v, out, w, *input)?;
                    items.push(ItemError {
                        kind: ItemKind::Entry,
                        word: w.concat(&v),
                        output: Some(out),
                        input: *input,
                        error,
                    });
                }
            }
        }
    }
    let max_error = items.iter().map(|it| it.error).fold(T::zero(), |a, e| if e > a { e } else { a });
    Ok(SelectionCheck { max_error, items })
}

/// Default word-length cap for [`check_selection`]: `n * |S|` for the
/// largest automaton involved, which the rank-stabilization argument covers.
pub fn default_depth_cap<T: Real>(sys: &Lss<T>, matched: Matched<'_>) -> usize {
    let states = match matched {
        Matched::Columns(b) => b.max_states(),
        Matched::Rows(a) => a.max_states(),
        Matched::Entries { alpha, beta } => alpha.max_states().max(beta.max_states()),
    };
    sys.n.max(1) * states
}

/// Which side a sequence-matching reduction projects on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Column,
    Row,
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "column" | "col" | "columns" => Ok(Side::Column),
            "row" | "rows" => Ok(Side::Row),
            other => Err(Error::Parse(format!("unknown side {other:?} (expected column or row)"))),
        }
    }
}

/// Column languages for sequence `upsilon`: `L_0 = L_upsilon` and
/// `L_(q0,j) = q0^{-1} L_upsilon` for every `j`.
pub fn sequence_beta<T: Real>(sys: &Lss<T>, upsilon: &Word) -> Result<BetaLanguages> {
    upsilon.check_alphabet(sys.mode_count())?;
    let gen = generating_ndfa(upsilon)?;
    let mut columns = std::collections::BTreeMap::new();
    for q0 in 1..=sys.mode_count() {
        let quotient = gen.left_quotient(q0).trim_coreachable();
        if quotient == Ndfa::empty_language() {
            continue;
        }
        for j in 1..=sys.m {
            columns.insert((q0, j), quotient.clone());
        }
    }
    Ok(BetaLanguages { x0: gen.trim_coreachable(), columns })
}

/// Row languages for sequence `upsilon`: `L_(q,i) = L_upsilon q^{-1}`.
pub fn sequence_alpha<T: Real>(sys: &Lss<T>, upsilon: &Word) -> Result<AlphaLanguages> {
    upsilon.check_alphabet(sys.mode_count())?;
    let gen = generating_ndfa(upsilon)?;
    let mut rows = std::collections::BTreeMap::new();
    for q in 1..=sys.mode_count() {
        let quotient = gen.right_quotient(q).trim_coreachable();
        if quotient == Ndfa::empty_language() {
            continue;
        }
        for i in 1..=sys.p {
            rows.insert((q, i), quotient.clone());
        }
    }
    Ok(AlphaLanguages { rows })
}

/// Reduced model whose output coincides with that of `sys` for every
/// switching signal whose mode sequence is `upsilon`.
pub fn match_sequence<T: Real>(sys: &Lss<T>, upsilon: &Word, side: Side) -> Result<ReductionReport<T>> {
    if upsilon.len() == 1 {
        log::warn!("sequence of length 1: matching a single mode");
    }
    match side {
        Side::Column => reduce_beta(sys, &sequence_beta(sys, upsilon)?),
        Side::Row => reduce_alpha(sys, &sequence_alpha(sys, upsilon)?),
    }
}

/// Direct identity checks `V A~_w B~_q e_j = A_w B_q e_j` used by tests
/// and the CLI `verify` command; returns the largest relative residual.
pub fn column_identity_residual<T: Real>(
    sys: &Lss<T>,
    red: &Lss<T>,
    v: &DMatrix<T>,
    beta: &BetaLanguages,
    depth_cap: usize,
) -> Result<T> {
    let mut worst = T::zero();
    for (input, w) in column_words(beta, sys.mode_count(), depth_cap)? {
        let full: DVector<T> = sys.a_word(&w)? * Evaluator::input(sys, input).column(0);
        let red_col: DVector<T> = red.a_word(&w)? * Evaluator::input(red, input).column(0);
        let res = (v * red_col - &full).norm() / full.norm().max(T::lit(1e-300));
        if res > worst {
            worst = res;
        }
    }
    Ok(worst)
}

/// Dual of [`column_identity_residual`]: `e_i^T C~_q A~_v W = e_i^T C_q A_v`.
pub fn row_identity_residual<T: Real>(
    sys: &Lss<T>,
    red: &Lss<T>,
    w: &DMatrix<T>,
    alpha: &AlphaLanguages,
    depth_cap: usize,
) -> Result<T> {
    let mut worst = T::zero();
    for ((q, i), v) in row_words(alpha, sys.mode_count(), depth_cap)? {
        let full = sys.mode(q).c.rows(i - 1, 1) * sys.a_word(&v)?;
        let red_row = red.mode(q).c.rows(i - 1, 1) * red.a_word(&v)?;
        let res = (red_row * w - &full).norm() / full.norm().max(T::lit(1e-300));
        if res > worst {
            worst = res;
        }
    }
    Ok(worst)
}
