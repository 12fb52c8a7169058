//! The linear switched system model, its Markov parameters and the JSON
//! model format.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::word::{count_words_up_to, Word};

/// Upper bound on the number of words `markov_parameters_up_to` enumerates.
pub const WORD_ENUMERATION_LIMIT: u128 = 1_000_000;

/// Local linear dynamics `(A_q, B_q, C_q)` of one discrete mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMatrices<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
}

/// Continuous-time LSS
/// `x' = A_q x + B_q u`, `y = C_q x`, `x(0) = x0`, with modes `q = 1..D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lss<T: Real> {
    pub p: usize,
    pub m: usize,
    pub n: usize,
    pub modes: Vec<ModeMatrices<T>>,
    pub x0: DVector<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Field {
    A,
    B,
    C,
    X0,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::A => "A",
            Field::B => "B",
            Field::C => "C",
            Field::X0 => "x0",
        })
    }
}

/// One violated model invariant. Modes are reported 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ModelIssue {
    NoModes,
    NoInputs,
    NoOutputs,
    DimensionMismatch {
        mode: Option<usize>,
        field: Field,
        expected: (usize, usize),
        found: (usize, usize),
    },
    NonFinite {
        mode: Option<usize>,
        field: Field,
    },
}

impl fmt::Display for ModelIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let place = |mode: &Option<usize>, field: &Field| match mode {
            Some(q) => format!("mode {q} field {field}"),
            None => field.to_string(),
        };
        match self {
            ModelIssue::NoModes => f.write_str("system has no modes (D = 0)"),
            ModelIssue::NoInputs => f.write_str("input dimension m must be at least 1"),
            ModelIssue::NoOutputs => f.write_str("output dimension p must be at least 1"),
            ModelIssue::DimensionMismatch { mode, field, expected, found } => write!(
                f,
                "{}: expected {}x{}, found {}x{}",
                place(mode, field),
                expected.0,
                expected.1,
                found.0,
                found.1
            ),
            ModelIssue::NonFinite { mode, field } => {
                write!(f, "{}: non-finite entry", place(mode, field))
            }
        }
    }
}

/// Markov parameter `M(v) = C~ A_v B~` of shape `Dp x (mD + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovParameter<T: Real> {
    pub word: Word,
    pub value: DMatrix<T>,
}

impl<T: Real> Lss<T> {
    /// Builds and validates a system.
    pub fn new(
        p: usize,
        m: usize,
        n: usize,
        modes: Vec<ModeMatrices<T>>,
        x0: DVector<T>,
    ) -> Result<Self> {
        let sys = Lss { p, m, n, modes, x0 };
        sys.ensure_valid()?;
        Ok(sys)
    }

    /// Number of discrete modes `D`.
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn mode(&self, q: usize) -> &ModeMatrices<T> {
        &self.modes[q - 1]
    }

    /// Collects every invariant violation.
    pub fn validate(&self) -> std::result::Result<(), Vec<ModelIssue>> {
        let mut issues = Vec::new();
        if self.modes.is_empty() {
            issues.push(ModelIssue::NoModes);
        }
        if self.m == 0 {
            issues.push(ModelIssue::NoInputs);
        }
        if self.p == 0 {
            issues.push(ModelIssue::NoOutputs);
        }
        let mut check = |mode: Option<usize>, field: Field, mat: &DMatrix<T>, expected: (usize, usize)| {
            if mat.shape() != expected {
                issues.push(ModelIssue::DimensionMismatch { mode, field, expected, found: mat.shape() });
            } else if !mat.iter().all(|v| v.is_finite_value()) {
                issues.push(ModelIssue::NonFinite { mode, field });
            }
        };
        for (i, md) in self.modes.iter().enumerate() {
            let q = Some(i + 1);
            check(q, Field::A, &md.a, (self.n, self.n));
            check(q, Field::B, &md.b, (self.n, self.m));
            check(q, Field::C, &md.c, (self.p, self.n));
        }
        let x0 = DMatrix::from_column_slice(self.x0.len(), 1, self.x0.as_slice());
        check(None, Field::X0, &x0, (self.n, 1));
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        self.validate().map_err(Error::InvalidModel)
    }

    /// `A_w = A_{q_k} .. A_{q_1}`; identity for the empty word.
    pub fn a_word(&self, w: &Word) -> Result<DMatrix<T>> {
        w.check_alphabet(self.mode_count())?;
        Ok(w.letters()
            .iter()
            .fold(DMatrix::identity(self.n, self.n), |acc, &q| &self.mode(q).a * acc))
    }

    /// `C~ = [C_1; ..; C_D]`, shape `Dp x n`.
    pub fn c_tilde(&self) -> DMatrix<T> {
        let blocks: Vec<&DMatrix<T>> = self.modes.iter().map(|md| &md.c).collect();
        crate::linalg::vcat(self.n, &blocks)
    }

    /// `B~ = [x0, B_1, .., B_D]`, shape `n x (mD + 1)`.
    pub fn b_tilde(&self) -> DMatrix<T> {
        let x0 = DMatrix::from_column_slice(self.n, 1, self.x0.as_slice());
        let mut blocks: Vec<&DMatrix<T>> = vec![&x0];
        blocks.extend(self.modes.iter().map(|md| &md.b));
        crate::linalg::hcat(self.n, &blocks)
    }

    pub fn markov_parameter(&self, v: &Word) -> Result<MarkovParameter<T>> {
        let value = self.c_tilde() * self.a_word(v)? * self.b_tilde();
        Ok(MarkovParameter { word: v.clone(), value })
    }

    /// Markov parameters for every word of length at most `depth`.
    pub fn markov_parameters_up_to(&self, depth: usize) -> Result<BTreeMap<Word, MarkovParameter<T>>> {
        let count = count_words_up_to(self.mode_count(), depth);
        if count > WORD_ENUMERATION_LIMIT {
            return Err(Error::SizeGuard { requested: count, limit: WORD_ENUMERATION_LIMIT });
        }
        let c_tilde = self.c_tilde();
        let mut out = BTreeMap::new();
        // Propagate A_w B~ breadth-first so each word costs one product.
        let mut layer = vec![(Word::empty(), self.b_tilde())];
        for level in 0..=depth {
            let mut next = Vec::new();
            for (w, aw_b) in layer {
                out.insert(w.clone(), MarkovParameter { word: w.clone(), value: &c_tilde * &aw_b });
                if level < depth {
                    for q in 1..=self.mode_count() {
                        next.push((w.push(q), &self.mode(q).a * &aw_b));
                    }
                }
            }
            layer = next;
        }
        Ok(out)
    }

    /// Minimal realization with the same input-output map: projection onto
    /// the reachable space, then factoring out the unobservable space.
    pub fn minimize(&self) -> Result<Lss<T>> {
        self.ensure_valid()?;
        if self.n == 0 {
            return Ok(self.clone());
        }
        let reach = crate::subspace::reach_space(self, self.n - 1)?;
        let reachable = crate::moment::project_left(self, &reach.basis);
        if reachable.n == 0 {
            return Ok(reachable);
        }
        let obs = crate::subspace::unobs_space(&reachable, reachable.n - 1)?;
        crate::moment::project_right(&reachable, &obs.w)
    }

    /// Converts every matrix to another scalar type.
    pub fn cast<U: Real>(&self) -> Lss<U> {
        let conv = |m: &DMatrix<T>| m.map(|v| U::lit(v.as_f64()));
        Lss {
            p: self.p,
            m: self.m,
            n: self.n,
            modes: self
                .modes
                .iter()
                .map(|md| ModeMatrices { a: conv(&md.a), b: conv(&md.b), c: conv(&md.c) })
                .collect(),
            x0: self.x0.map(|v| U::lit(v.as_f64())),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from_lss(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_lss()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModeFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
}

/// On-disk model layout: row-major nested arrays of doubles.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    p: usize,
    m: usize,
    n: usize,
    #[serde(rename = "D")]
    d: usize,
    modes: Vec<ModeFile>,
    x0: Vec<f64>,
}

fn rows_of<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].as_f64()).collect())
        .collect()
}

fn matrix_from_rows<T: Real>(
    rows: &[Vec<f64>],
    shape: (usize, usize),
    mode: usize,
    field: Field,
) -> std::result::Result<DMatrix<T>, ModelIssue> {
    let found_cols = rows.first().map_or(shape.1, |r| r.len());
    let mismatch = || ModelIssue::DimensionMismatch {
        mode: Some(mode),
        field,
        expected: shape,
        found: (rows.len(), found_cols),
    };
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(mismatch());
    }
    Ok(DMatrix::from_fn(shape.0, shape.1, |i, j| T::lit(rows[i][j])))
}

impl ModelFile {
    fn from_lss<T: Real>(sys: &Lss<T>) -> Self {
        ModelFile {
            p: sys.p,
            m: sys.m,
            n: sys.n,
            d: sys.mode_count(),
            modes: sys
                .modes
                .iter()
                .map(|md| ModeFile { a: rows_of(&md.a), b: rows_of(&md.b), c: rows_of(&md.c) })
                .collect(),
            x0: sys.x0.iter().map(|v| v.as_f64()).collect(),
        }
    }

    fn into_lss<T: Real>(self) -> Result<Lss<T>> {
        let mut issues = Vec::new();
        if self.modes.len() != self.d {
            return Err(Error::Parse(format!(
                "model declares D = {} but lists {} modes",
                self.d,
                self.modes.len()
            )));
        }
        let mut modes = Vec::with_capacity(self.d);
        for (i, md) in self.modes.iter().enumerate() {
            let q = i + 1;
            let a = matrix_from_rows(&md.a, (self.n, self.n), q, Field::A);
            let b = matrix_from_rows(&md.b, (self.n, self.m), q, Field::B);
            let c = matrix_from_rows(&md.c, (self.p, self.n), q, Field::C);
            match (a, b, c) {
                (Ok(a), Ok(b), Ok(c)) => modes.push(ModeMatrices { a, b, c }),
                (a, b, c) => issues.extend([a.err(), b.err(), c.err()].into_iter().flatten()),
            }
        }
        if self.x0.len() != self.n {
            issues.push(ModelIssue::DimensionMismatch {
                mode: None,
                field: Field::X0,
                expected: (self.n, 1),
                found: (self.x0.len(), 1),
            });
        }
        if !issues.is_empty() {
            return Err(Error::InvalidModel(issues));
        }
        let x0 = DVector::from_iterator(self.n, self.x0.iter().map(|&v| T::lit(v)));
        Lss::new(self.p, self.m, self.n, modes, x0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{random_lss, RandomLssSpec};
    use nalgebra::dmatrix;

    fn two_mode() -> Lss<f64> {
        random_lss(&RandomLssSpec { n: 3, m: 1, p: 1, modes: 2, ..Default::default() }, 7)
    }

    #[test]
    fn validate_well_formed() {
        assert!(two_mode().validate().is_ok());
    }

    #[test]
    fn validate_names_mode_and_field() {
        let mut sys = two_mode();
        sys.modes[0].b = DMatrix::zeros(2, 1);
        let issues = sys.validate().unwrap_err();
        assert_eq!(
            issues,
            vec![ModelIssue::DimensionMismatch {
                mode: Some(1),
                field: Field::B,
                expected: (3, 1),
                found: (2, 1)
            }]
        );
    }

    #[test]
    fn validate_x0_and_collects_all() {
        let mut sys = two_mode();
        sys.x0 = DVector::zeros(4);
        sys.modes[1].a[(0, 0)] = f64::INFINITY;
        sys.m = 0;
        let issues = sys.validate().unwrap_err();
        assert!(issues.contains(&ModelIssue::NoInputs));
        assert!(issues.contains(&ModelIssue::NonFinite { mode: Some(2), field: Field::A }));
        assert!(issues.iter().any(|i| matches!(i, ModelIssue::DimensionMismatch { field: Field::X0, .. })));
        let sys = Lss::<f64> { p: 1, m: 1, n: 0, modes: vec![], x0: DVector::zeros(0) };
        assert_eq!(sys.validate().unwrap_err(), vec![ModelIssue::NoModes]);
    }

    #[test]
    fn a_word_products() {
        let sys = two_mode();
        assert_eq!(sys.a_word(&Word::empty()).unwrap(), DMatrix::identity(3, 3));
        let a12 = sys.a_word(&Word::parse("12").unwrap()).unwrap();
        assert!((a12 - &sys.modes[1].a * &sys.modes[0].a).amax() < 1e-14);
        assert!(matches!(
            sys.a_word(&Word::parse("3").unwrap()),
            Err(Error::LetterOutOfRange { letter: 3, modes: 2 })
        ));
    }

    #[test]
    fn a_word_single_mode_power() {
        let sys = random_lss(&RandomLssSpec { n: 4, modes: 1, ..Default::default() }, 3);
        let a = &sys.modes[0].a;
        let naive = a * a * a;
        assert!((sys.a_word(&Word::parse("111").unwrap()).unwrap() - naive).amax() < 1e-12);
    }

    #[test]
    fn markov_shapes_and_identity_dynamics() {
        let sys = two_mode();
        assert_eq!(sys.markov_parameter(&Word::empty()).unwrap().value.shape(), (2, 3));
        let mut id = sys.clone();
        for md in &mut id.modes {
            md.a = DMatrix::identity(3, 3);
        }
        let base = id.c_tilde() * id.b_tilde();
        for w in crate::word::words_up_to(2, 3) {
            assert!((id.markov_parameter(&w).unwrap().value - &base).amax() < 1e-14);
        }
    }

    #[test]
    fn markov_matches_elementwise_triple_product() {
        let sys = two_mode();
        let m = sys.markov_parameter(&Word::parse("21").unwrap()).unwrap().value;
        // v = 21 applies A_2 first, so A_v = A_1 A_2.
        let (ct, bt) = (sys.c_tilde(), sys.b_tilde());
        let prod = &sys.modes[0].a * &sys.modes[1].a;
        for i in 0..ct.nrows() {
            for j in 0..bt.ncols() {
                let mut acc = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        acc += ct[(i, k)] * prod[(k, l)] * bt[(l, j)];
                    }
                }
                assert!((m[(i, j)] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn markov_enumeration_counts() {
        let sys = two_mode();
        assert_eq!(sys.markov_parameters_up_to(1).unwrap().len(), 3);
        let single = random_lss(&RandomLssSpec { n: 2, modes: 1, ..Default::default() }, 1);
        assert_eq!(single.markov_parameters_up_to(4).unwrap().len(), 5);
        let three = random_lss(&RandomLssSpec { n: 2, modes: 3, ..Default::default() }, 1);
        let params = three.markov_parameters_up_to(2).unwrap();
        assert_eq!(params.len(), 13);
        for w in crate::word::words_up_to(3, 2) {
            let direct = three.markov_parameter(&w).unwrap().value;
            assert!((&params[&w].value - direct).amax() < 1e-12);
        }
        assert!(matches!(three.markov_parameters_up_to(40), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn concatenation_reverses_product_order() {
        let sys = random_lss(&RandomLssSpec { n: 3, modes: 3, ..Default::default() }, 5);
        let u = Word::parse("13").unwrap();
        let v = Word::parse("221").unwrap();
        let lhs = sys.a_word(&u.concat(&v)).unwrap();
        let rhs = sys.a_word(&v).unwrap() * sys.a_word(&u).unwrap();
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn minimize_keeps_minimal_dimension() {
        let sys = two_mode();
        let min = sys.minimize().unwrap();
        assert_eq!(min.n, 3);
        let err = crate::moment::check_partial_realization(&sys, &min, 6).unwrap();
        assert!(err < 1e-9);
    }

    #[test]
    fn minimize_drops_unreachable_block() {
        // Embed a minimal 3-state system in 5 states; the extra block is
        // never excited (zero input/initial coupling) and decoupled.
        let core = two_mode();
        let mut big = Vec::new();
        for (i, md) in core.modes.iter().enumerate() {
            let mut a = DMatrix::zeros(5, 5);
            a.view_mut((0, 0), (3, 3)).copy_from(&md.a);
            a[(3, 3)] = -0.5 + i as f64;
            a[(4, 3)] = 1.0;
            a[(4, 4)] = 0.3;
            let mut b = DMatrix::zeros(5, 1);
            b.view_mut((0, 0), (3, 1)).copy_from(&md.b);
            let mut c = DMatrix::zeros(1, 5);
            c.view_mut((0, 0), (1, 3)).copy_from(&md.c);
            c[(0, 4)] = 2.0;
            big.push(ModeMatrices { a, b, c });
        }
        let mut x0 = DVector::zeros(5);
        x0.rows_mut(0, 3).copy_from(&core.x0);
        let big = Lss::new(1, 1, 5, big, x0).unwrap();
        let min = big.minimize().unwrap();
        assert_eq!(min.n, 3);
        let err = crate::moment::check_partial_realization(&big, &min, 10).unwrap();
        assert!(err < 1e-9, "{err}");
        // Second pass is a fixed point up to isomorphism.
        let again = min.minimize().unwrap();
        assert_eq!(again.n, 3);
        assert!(crate::moment::check_partial_realization(&min, &again, 6).unwrap() < 1e-9);
    }

    #[test]
    fn minimize_zero_state() {
        let sys = Lss::<f64>::new(
            1,
            1,
            0,
            vec![ModeMatrices { a: DMatrix::zeros(0, 0), b: DMatrix::zeros(0, 1), c: DMatrix::zeros(1, 0) }],
            DVector::zeros(0),
        )
        .unwrap();
        assert_eq!(sys.minimize().unwrap(), sys);
    }

    #[test]
    fn json_round_trip_is_bit_identical() {
        let sys = random_lss(&RandomLssSpec { n: 4, m: 2, p: 3, modes: 3, ..Default::default() }, 99);
        let text = sys.to_json().unwrap();
        let back = Lss::<f64>::from_json(&text).unwrap();
        assert_eq!(back, sys);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn json_layout_and_errors() {
        let sys = Lss::new(
            1,
            1,
            1,
            vec![ModeMatrices { a: dmatrix![-1.0], b: dmatrix![1.0], c: dmatrix![2.0] }],
            DVector::from_element(1, 0.5),
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&sys.to_json().unwrap()).unwrap();
        assert_eq!(v["D"], 1);
        assert_eq!(v["modes"][0]["A"][0][0], -1.0);
        assert_eq!(v["x0"][0], 0.5);
        let bad = r#"{"p":1,"m":1,"n":2,"D":1,"modes":[{"A":[[1,0],[0,1]],"B":[[1]],"C":[[1,0]]}],"x0":[0,0]}"#;
        match Lss::<f64>::from_json(bad) {
            Err(Error::InvalidModel(issues)) => assert!(matches!(
                issues[0],
                ModelIssue::DimensionMismatch { mode: Some(1), field: Field::B, .. }
            )),
            other => panic!("unexpected {other:?}"),
        }
    }
}
