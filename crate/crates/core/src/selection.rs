//! Nice row and column selections, their index languages and the greedy
//! construction of a selection with prescribed dimension.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::automata::Ndfa;
use crate::error::{Error, Result};
use crate::lss::Lss;
use crate::scalar::Real;
use crate::subspace::{reach_space, unobs_space};
use crate::word::{Mode, Word};

/// Column `(w, q, j)`: the `j`-th column of `A_w B_q`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColumnEntry {
    pub w: Word,
    pub q: Mode,
    pub j: usize,
}

/// Row `(v, q, i)`: the `i`-th row of `C_q A_v`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowEntry {
    pub v: Word,
    pub q: Mode,
    pub i: usize,
}

impl fmt::Display for ColumnEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.w, self.q, self.j)
    }
}

impl fmt::Display for RowEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.v, self.q, self.i)
    }
}

/// Finite column selection: words `w` picking `A_w x0` and entries picking
/// columns of `A_w B_q`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NiceColumnSelection {
    #[serde(default)]
    pub x0_words: BTreeSet<Word>,
    #[serde(default)]
    pub columns: BTreeSet<ColumnEntry>,
}

/// Finite row selection picking rows of `C_q A_v`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NiceRowSelection {
    #[serde(default)]
    pub rows: BTreeSet<RowEntry>,
}

/// A column and/or row selection as stored on disk.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionFile {
    #[serde(default)]
    pub x0_words: BTreeSet<Word>,
    #[serde(default)]
    pub columns: BTreeSet<ColumnEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<BTreeSet<RowEntry>>,
}

impl SelectionFile {
    pub fn column_selection(&self) -> NiceColumnSelection {
        NiceColumnSelection { x0_words: self.x0_words.clone(), columns: self.columns.clone() }
    }

    pub fn row_selection(&self) -> Option<NiceRowSelection> {
        self.rows.clone().map(|rows| NiceRowSelection { rows })
    }

    pub fn has_columns(&self) -> bool {
        !self.x0_words.is_empty() || !self.columns.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// An entry whose required shorter companion is absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectionViolation {
    X0Word { word: Word, missing: Word },
    Column { entry: ColumnEntry, missing: ColumnEntry },
    Row { entry: RowEntry, missing: RowEntry },
}

impl fmt::Display for SelectionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionViolation::X0Word { word, missing } => {
                write!(f, "x0 word {word} requires {missing}")
            }
            SelectionViolation::Column { entry, missing } => write!(f, "{entry} requires {missing}"),
            SelectionViolation::Row { entry, missing } => write!(f, "{entry} requires {missing}"),
        }
    }
}

fn finish(violations: Vec<SelectionViolation>) -> std::result::Result<(), Vec<SelectionViolation>> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

impl NiceColumnSelection {
    pub fn len(&self) -> usize {
        self.x0_words.len() + self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Prefix closure: `(w s, q, j)` needs `(w, q, j)`, and `w s` needs `w`.
    pub fn validate_nice(&self) -> std::result::Result<(), Vec<SelectionViolation>> {
        let mut out = Vec::new();
        for word in &self.x0_words {
            if let Some(missing) = word.without_last() {
                if !self.x0_words.contains(&missing) {
                    out.push(SelectionViolation::X0Word { word: word.clone(), missing });
                }
            }
        }
        for entry in &self.columns {
            if let Some(w) = entry.w.without_last() {
                let missing = ColumnEntry { w, ..entry.clone() };
                if !self.columns.contains(&missing) {
                    out.push(SelectionViolation::Column { entry: entry.clone(), missing });
                }
            }
        }
        finish(out)
    }

    /// Checks mode and input indices against a system.
    pub fn check_indices<T: Real>(&self, sys: &Lss<T>) -> Result<()> {
        for w in &self.x0_words {
            w.check_alphabet(sys.mode_count())?;
        }
        for e in &self.columns {
            e.w.check_alphabet(sys.mode_count())?;
            if e.q == 0 || e.q > sys.mode_count() || e.j == 0 || e.j > sys.m {
                return Err(Error::InvalidInput(format!(
                    "column entry {e} outside modes 1..={} / inputs 1..={}",
                    sys.mode_count(),
                    sys.m
                )));
            }
        }
        Ok(())
    }

    /// Word sets per index, with `J_beta` the indices that occur.
    pub fn languages(&self) -> ColumnLanguages {
        let mut columns: BTreeMap<(Mode, usize), BTreeSet<Word>> = BTreeMap::new();
        for e in &self.columns {
            columns.entry((e.q, e.j)).or_default().insert(e.w.clone());
        }
        ColumnLanguages { x0: self.x0_words.clone(), columns }
    }

    /// `[A_w x0 .. | A_w B_q e_j ..]` in set order.
    pub fn vectors<T: Real>(&self, sys: &Lss<T>) -> Result<DMatrix<T>> {
        self.check_indices(sys)?;
        let mut cols: Vec<DVector<T>> = Vec::with_capacity(self.len());
        for w in &self.x0_words {
            cols.push(sys.a_word(w)? * &sys.x0);
        }
        for e in &self.columns {
            cols.push(sys.a_word(&e.w)? * sys.mode(e.q).b.column(e.j - 1));
        }
        Ok(columns_matrix(sys.n, &cols))
    }
}

impl NiceRowSelection {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Suffix closure: `(s v, q, i)` needs `(v, q, i)`.
    pub fn validate_nice(&self) -> std::result::Result<(), Vec<SelectionViolation>> {
        let mut out = Vec::new();
        for entry in &self.rows {
            if let Some(v) = entry.v.without_first() {
                let missing = RowEntry { v, ..entry.clone() };
                if !self.rows.contains(&missing) {
                    out.push(SelectionViolation::Row { entry: entry.clone(), missing });
                }
            }
        }
        finish(out)
    }

    pub fn check_indices<T: Real>(&self, sys: &Lss<T>) -> Result<()> {
        for e in &self.rows {
            e.v.check_alphabet(sys.mode_count())?;
            if e.q == 0 || e.q > sys.mode_count() || e.i == 0 || e.i > sys.p {
                return Err(Error::InvalidInput(format!(
                    "row entry {e} outside modes 1..={} / outputs 1..={}",
                    sys.mode_count(),
                    sys.p
                )));
            }
        }
        Ok(())
    }

    pub fn languages(&self) -> RowLanguages {
        let mut rows: BTreeMap<(Mode, usize), BTreeSet<Word>> = BTreeMap::new();
        for e in &self.rows {
            rows.entry((e.q, e.i)).or_default().insert(e.v.clone());
        }
        RowLanguages { rows }
    }

    /// Rows `e_i^T C_q A_v` stacked in set order.
    pub fn vectors<T: Real>(&self, sys: &Lss<T>) -> Result<DMatrix<T>> {
        self.check_indices(sys)?;
        let mut cols: Vec<DVector<T>> = Vec::with_capacity(self.len());
        for e in &self.rows {
            let row = sys.mode(e.q).c.row(e.i - 1) * sys.a_word(&e.v)?;
            cols.push(row.transpose());
        }
        Ok(columns_matrix(sys.n, &cols).transpose())
    }
}

fn columns_matrix<T: Real>(n: usize, cols: &[DVector<T>]) -> DMatrix<T> {
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(cols)
    }
}

/// Explicit word sets of a finite column selection.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnLanguages {
    pub x0: BTreeSet<Word>,
    /// Keyed by `(q, j)`; only indices with a nonempty language appear.
    pub columns: BTreeMap<(Mode, usize), BTreeSet<Word>>,
}

/// Explicit word sets of a finite row selection.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RowLanguages {
    /// Keyed by `(q, i)`.
    pub rows: BTreeMap<(Mode, usize), BTreeSet<Word>>,
}

impl ColumnLanguages {
    /// `J_beta`.
    pub fn indices(&self) -> Vec<(Mode, usize)> {
        self.columns.keys().copied().collect()
    }

    /// `t_beta = |J_beta| + 1`.
    pub fn subset_cardinality(&self) -> usize {
        self.columns.len() + 1
    }

    pub fn to_automata(&self) -> BetaLanguages {
        BetaLanguages {
            x0: Ndfa::from_words(self.x0.iter()),
            columns: self.columns.iter().map(|(&k, ws)| (k, Ndfa::from_words(ws.iter()))).collect(),
        }
    }
}

impl RowLanguages {
    /// `I_alpha`.
    pub fn indices(&self) -> Vec<(Mode, usize)> {
        self.rows.keys().copied().collect()
    }

    /// `t_alpha = |I_alpha|`.
    pub fn subset_cardinality(&self) -> usize {
        self.rows.len()
    }

    pub fn to_automata(&self) -> AlphaLanguages {
        AlphaLanguages {
            rows: self.rows.iter().map(|(&k, ws)| (k, Ndfa::from_words(ws.iter()))).collect(),
        }
    }
}

/// Column selection given by automata, possibly infinite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BetaLanguages {
    /// Words `w` selecting `A_w x0`.
    pub x0: Ndfa,
    /// Keyed by `(q, j)`.
    pub columns: BTreeMap<(Mode, usize), Ndfa>,
}

/// Row selection given by automata, possibly infinite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphaLanguages {
    /// Keyed by `(q, i)`.
    pub rows: BTreeMap<(Mode, usize), Ndfa>,
}

impl BetaLanguages {
    pub fn subset_cardinality(&self) -> usize {
        self.columns.len() + 1
    }

    pub fn max_states(&self) -> usize {
        self.columns.values().map(Ndfa::state_count).chain([self.x0.state_count()]).max().unwrap_or(1)
    }
}

impl AlphaLanguages {
    pub fn subset_cardinality(&self) -> usize {
        self.rows.len()
    }

    pub fn max_states(&self) -> usize {
        self.rows.values().map(Ndfa::state_count).max().unwrap_or(1)
    }
}

/// Ordering key `phi` on words; `None` on overflow.
pub fn word_order_key(v: &Word, modes: usize) -> Option<u128> {
    v.order_key(modes)
}

/// Greedy left-to-right scan over `seeds` propagated by `mats`, in the
/// order (scan word, seed index). A child `(w s, c)` is only examined when
/// `(w, c)` was kept: if `(w, c)` depends on earlier vectors, so does its
/// image under `A_s`.
fn greedy_scan<T: Real>(
    mats: &[DMatrix<T>],
    seeds: &[DVector<T>],
    target: usize,
) -> Vec<(Word, usize)> {
    let tol = T::default_rank_tol() * T::lit(100.0);
    let mut basis: Vec<DVector<T>> = Vec::new();
    let mut picked = Vec::new();
    let mut layer: Vec<(Word, usize, DVector<T>)> =
        seeds.iter().enumerate().map(|(c, x)| (Word::empty(), c, x.clone())).collect();
    while !layer.is_empty() && picked.len() < target {
        let mut kept = Vec::new();
        for (w, c, x) in layer {
            if picked.len() == target {
                break;
            }
            let scale = x.norm();
            if scale == T::zero() {
                continue;
            }
            let mut r = x.clone();
            // Two passes of classical Gram-Schmidt.
            for _ in 0..2 {
                for b in &basis {
                    let coef = b.dot(&r);
                    r.axpy(-coef, b, T::one());
                }
            }
            let rn = r.norm();
            if rn > tol * scale {
                basis.push(r / rn);
                picked.push((w.clone(), c));
                kept.push((w, c, x));
            }
        }
        let mut next: Vec<(Word, usize, DVector<T>)> = Vec::new();
        for (w, c, x) in &kept {
            for (s, a) in mats.iter().enumerate() {
                next.push((w.push(s + 1), *c, a * x));
            }
        }
        // Scan order: word first (same length, so lexicographic), then seed.
        next.sort_by(|a, b| a.0.letters().cmp(b.0.letters()).then(a.1.cmp(&b.1)));
        layer = next;
    }
    picked
}

/// Nice column selection whose vectors span an `r`-dimensional subspace,
/// chosen by scanning `A_v [x0 B_1 .. B_D]` block by block in word order.
pub fn select_nice_columns<T: Real>(sys: &Lss<T>, r: usize) -> Result<NiceColumnSelection> {
    sys.ensure_valid()?;
    let available = if sys.n == 0 { 0 } else { reach_space(sys, sys.n - 1)?.dim() };
    if r > available {
        return Err(Error::Infeasible(format!(
            "requested {r} columns but the reachable space has dimension {available} (achievable maximum)"
        )));
    }
    let bt = sys.b_tilde();
    let seeds: Vec<DVector<T>> = (0..bt.ncols()).map(|c| bt.column(c).into_owned()).collect();
    let mats: Vec<DMatrix<T>> = sys.modes.iter().map(|md| md.a.clone()).collect();
    let picked = greedy_scan(&mats, &seeds, r);
    if picked.len() < r {
        return Err(Error::Infeasible(format!(
            "only {} independent columns found for requested {r} (achievable maximum)",
            picked.len()
        )));
    }
    let mut sel = NiceColumnSelection::default();
    for (w, c) in picked {
        if c == 0 {
            sel.x0_words.insert(w);
        } else {
            let (q, j) = ((c - 1) / sys.m + 1, (c - 1) % sys.m + 1);
            sel.columns.insert(ColumnEntry { w, q, j });
        }
    }
    Ok(sel)
}

/// Nice row selection with `dim O_alpha = n - r`; the dual scan over
/// `A_v^T C_q^T e_i`.
pub fn select_nice_rows<T: Real>(sys: &Lss<T>, r: usize) -> Result<NiceRowSelection> {
    sys.ensure_valid()?;
    let available = if sys.n == 0 { 0 } else { unobs_space(sys, sys.n - 1)?.rank() };
    if r > available {
        return Err(Error::Infeasible(format!(
            "requested {r} rows but the observable quotient has dimension {available} (achievable maximum)"
        )));
    }
    let ct = sys.c_tilde();
    let seeds: Vec<DVector<T>> = (0..ct.nrows()).map(|k| ct.row(k).transpose()).collect();
    let mats: Vec<DMatrix<T>> = sys.modes.iter().map(|md| md.a.transpose()).collect();
    let picked = greedy_scan(&mats, &seeds, r);
    if picked.len() < r {
        return Err(Error::Infeasible(format!(
            "only {} independent rows found for requested {r} (achievable maximum)",
            picked.len()
        )));
    }
    let rows = picked
        .into_iter()
        .map(|(w, k)| RowEntry { v: w.reversed(), q: k / sys.p + 1, i: k % sys.p + 1 })
        .collect();
    Ok(NiceRowSelection { rows })
}
