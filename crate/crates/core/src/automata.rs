//! Nondeterministic finite automata over the mode alphabet, used to index
//! (possibly infinite) word languages.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lss::WORD_ENUMERATION_LIMIT;
use crate::word::{Mode, Word};

pub type State = usize;

/// NDFA `(S, Q, ->, F, s0)` with states `0..state_count` and no
/// epsilon transitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "NdfaFile", into = "NdfaFile")]
pub struct Ndfa {
    state_count: usize,
    initial: State,
    finals: BTreeSet<State>,
    transitions: BTreeSet<(State, Mode, State)>,
}

#[derive(Serialize, Deserialize)]
struct NdfaFile {
    states: usize,
    initial: State,
    finals: Vec<State>,
    transitions: Vec<[usize; 3]>,
}

impl TryFrom<NdfaFile> for Ndfa {
    type Error = Error;

    fn try_from(f: NdfaFile) -> Result<Self> {
        Ndfa::new(
            f.states,
            f.initial,
            f.finals,
            f.transitions.into_iter().map(|[s, q, t]| (s, q, t)),
        )
    }
}

impl From<Ndfa> for NdfaFile {
    fn from(a: Ndfa) -> Self {
        NdfaFile {
            states: a.state_count,
            initial: a.initial,
            finals: a.finals.into_iter().collect(),
            transitions: a.transitions.into_iter().map(|(s, q, t)| [s, q, t]).collect(),
        }
    }
}

impl Ndfa {
    pub fn new(
        state_count: usize,
        initial: State,
        finals: impl IntoIterator<Item = State>,
        transitions: impl IntoIterator<Item = (State, Mode, State)>,
    ) -> Result<Self> {
        if initial >= state_count {
            return Err(Error::InvalidInput(format!(
                "initial state {initial} outside 0..{state_count}"
            )));
        }
        let finals: BTreeSet<State> = finals.into_iter().collect();
        if let Some(&f) = finals.iter().find(|&&f| f >= state_count) {
            return Err(Error::InvalidInput(format!("final state {f} outside 0..{state_count}")));
        }
        let transitions: BTreeSet<(State, Mode, State)> = transitions.into_iter().collect();
        for &(s, q, t) in &transitions {
            if s >= state_count || t >= state_count {
                return Err(Error::InvalidInput(format!(
                    "transition ({s}, {q}, {t}) has an endpoint outside 0..{state_count}"
                )));
            }
            if q == 0 {
                return Err(Error::InvalidInput(format!(
                    "transition ({s}, {q}, {t}) uses letter 0; letters start at 1"
                )));
            }
        }
        Ok(Ndfa { state_count, initial, finals, transitions })
    }

    /// One-state automaton with no finals.
    pub fn empty_language() -> Self {
        Ndfa { state_count: 1, initial: 0, finals: BTreeSet::new(), transitions: BTreeSet::new() }
    }

    /// Accepts only the empty word.
    pub fn epsilon() -> Self {
        Ndfa { state_count: 1, initial: 0, finals: [0].into(), transitions: BTreeSet::new() }
    }

    /// Accepts every word over `1..=modes`.
    pub fn universal(modes: usize) -> Self {
        Ndfa {
            state_count: 1,
            initial: 0,
            finals: [0].into(),
            transitions: (1..=modes).map(|q| (0, q, 0)).collect(),
        }
    }

    /// Trie automaton for a finite set of words.
    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a Word>) -> Self {
        let mut transitions = BTreeSet::new();
        let mut finals = BTreeSet::new();
        let mut children: Vec<std::collections::BTreeMap<Mode, State>> = vec![Default::default()];
        for w in words {
            let mut s = 0;
            for &q in w.letters() {
                s = match children[s].get(&q) {
                    Some(&t) => t,
                    None => {
                        let t = children.len();
                        children.push(Default::default());
                        children[s].insert(q, t);
                        transitions.insert((s, q, t));
                        t
                    }
                };
            }
            finals.insert(s);
        }
        Ndfa { state_count: children.len(), initial: 0, finals, transitions }
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn initial(&self) -> State {
        self.initial
    }

    pub fn finals(&self) -> &BTreeSet<State> {
        &self.finals
    }

    pub fn transitions(&self) -> &BTreeSet<(State, Mode, State)> {
        &self.transitions
    }

    /// Largest letter used by any transition (0 if none).
    pub fn max_letter(&self) -> Mode {
        self.transitions.iter().map(|&(_, q, _)| q).max().unwrap_or(0)
    }

    fn step(&self, from: &BTreeSet<State>, letter: Mode) -> BTreeSet<State> {
        self.transitions
            .iter()
            .filter(|&&(s, q, _)| q == letter && from.contains(&s))
            .map(|&(_, _, t)| t)
            .collect()
    }

    pub fn accepts(&self, w: &Word) -> bool {
        let mut current: BTreeSet<State> = [self.initial].into();
        for &q in w.letters() {
            current = self.step(&current, q);
            if current.is_empty() {
                return false;
            }
        }
        current.iter().any(|s| self.finals.contains(s))
    }

    /// States from which some final state is reachable.
    pub fn coreachable_states(&self) -> BTreeSet<State> {
        let mut seen: BTreeSet<State> = self.finals.clone();
        let mut queue: VecDeque<State> = self.finals.iter().copied().collect();
        while let Some(t) = queue.pop_front() {
            for &(s, _, to) in &self.transitions {
                if to == t && seen.insert(s) {
                    queue.push_back(s);
                }
            }
        }
        seen
    }

    pub fn is_coreachable(&self) -> bool {
        self.coreachable_states().len() == self.state_count
    }

    pub fn is_empty_language(&self) -> bool {
        !self.coreachable_states().contains(&self.initial)
    }

    /// Drops every state that cannot reach a final state, renumbering the
    /// survivors in ascending order. An empty language yields
    /// [`Ndfa::empty_language`].
    pub fn trim_coreachable(&self) -> Ndfa {
        let keep = self.coreachable_states();
        if !keep.contains(&self.initial) {
            return Ndfa::empty_language();
        }
        let index: std::collections::BTreeMap<State, State> =
            keep.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Ndfa {
            state_count: keep.len(),
            initial: index[&self.initial],
            finals: self.finals.iter().map(|f| index[f]).collect(),
            transitions: self
                .transitions
                .iter()
                .filter_map(|&(s, q, t)| Some((*index.get(&s)?, q, *index.get(&t)?)))
                .collect(),
        }
    }

    /// Automaton for `{ w | q0 w in L }`.
    pub fn left_quotient(&self, q0: Mode) -> Ndfa {
        let fresh = self.state_count;
        let succ = self.step(&[self.initial].into(), q0);
        let mut transitions = self.transitions.clone();
        for &(s, q, t) in &self.transitions {
            if succ.contains(&s) {
                transitions.insert((fresh, q, t));
            }
        }
        let mut finals = self.finals.clone();
        if succ.iter().any(|s| self.finals.contains(s)) {
            finals.insert(fresh);
        }
        Ndfa { state_count: fresh + 1, initial: fresh, finals, transitions }
    }

    /// Automaton for `{ v | v q in L }`.
    pub fn right_quotient(&self, q: Mode) -> Ndfa {
        let finals = self
            .transitions
            .iter()
            .filter(|&&(_, l, t)| l == q && self.finals.contains(&t))
            .map(|&(s, _, _)| s)
            .collect();
        Ndfa { finals, ..self.clone() }
    }

    /// Accepted words of length `<= depth`, in shortlex order.
    pub fn accepted_words_up_to(&self, modes: usize, depth: usize) -> Result<Vec<Word>> {
        let mut out = Vec::new();
        let mut stack = vec![(Word::empty(), BTreeSet::from([self.initial]))];
        while let Some((w, set)) = stack.pop() {
            if set.iter().any(|s| self.finals.contains(s)) {
                out.push(w.clone());
                if out.len() as u128 > WORD_ENUMERATION_LIMIT {
                    return Err(Error::SizeGuard {
                        requested: out.len() as u128,
                        limit: WORD_ENUMERATION_LIMIT,
                    });
                }
            }
            if w.len() < depth {
                for q in 1..=modes {
                    let next = self.step(&set, q);
                    if !next.is_empty() {
                        stack.push((w.push(q), next));
                    }
                }
            }
        }
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.letters().cmp(b.letters())));
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Automaton for `{ q_1^{w_1} .. q_k^{w_k} : w_i >= 0 }` where
/// `upsilon = q_1 .. q_k`. Every state is final.
pub fn generating_ndfa(upsilon: &Word) -> Result<Ndfa> {
    if upsilon.is_empty() {
        return Err(Error::InvalidInput("generating automaton needs a nonempty mode word".into()));
    }
    let k = upsilon.len();
    let letter = |i: usize| upsilon.letters()[i - 1];
    let mut transitions = BTreeSet::new();
    for i in 0..=k {
        for j in i + 1..=k {
            transitions.insert((i, letter(j), j));
        }
        if i >= 1 {
            transitions.insert((i, letter(i), i));
        }
    }
    Ndfa::new(k + 1, 0, 0..=k, transitions)
}
