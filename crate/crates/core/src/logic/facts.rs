use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use super::term::{Atom, PredKey, Term, Var};

/// Plain extensional set of atoms, kept in insertion order.
///
/// Atoms are ground except for placeholder variables standing in for the
/// unknown text of empty cells in partial designs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct FactSet {
    atoms: IndexSet<Atom>,
}

impl From<Vec<Atom>> for FactSet {
    fn from(v: Vec<Atom>) -> Self {
        FactSet { atoms: v.into_iter().collect() }
    }
}

impl From<FactSet> for Vec<Atom> {
    fn from(f: FactSet) -> Self {
        f.atoms.into_iter().collect()
    }
}

impl FromIterator<Atom> for FactSet {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        FactSet { atoms: iter.into_iter().collect() }
    }
}

impl FactSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false when the atom was already present.
    pub fn insert(&mut self, atom: Atom) -> bool {
        self.atoms.insert(atom)
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = Atom>) {
        self.atoms.extend(other);
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    pub fn with_pred<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Atom> + 'a {
        self.atoms.iter().filter(move |a| &*a.pred == name)
    }

    pub fn is_ground(&self) -> bool {
        self.atoms.iter().all(Atom::is_ground)
    }

    /// Placeholder variables occurring in the set.
    pub fn placeholders(&self) -> Vec<Var> {
        let mut seen = IndexSet::new();
        for a in &self.atoms {
            for v in a.vars() {
                seen.insert(v);
            }
        }
        seen.into_iter().collect()
    }
}

impl IntoIterator for FactSet {
    type Item = Atom;
    type IntoIter = indexmap::set::IntoIter<Atom>;

    fn into_iter(self) -> Self::IntoIter {
        self.atoms.into_iter()
    }
}

impl<'a> IntoIterator for &'a FactSet {
    type Item = &'a Atom;
    type IntoIter = indexmap::set::Iter<'a, Atom>;

    fn into_iter(self) -> Self::IntoIter {
        self.atoms.iter()
    }
}

impl fmt::Display for FactSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.atoms {
            writeln!(f, "{a}.")?;
        }
        Ok(())
    }
}

/// Opaque stand-in for a placeholder when placeholders may not be bound.
/// Contains a space, so no whitespace-delimited token can equal it.
fn frozen_placeholder(v: Var) -> Term {
    Term::Sym(Arc::from(format!("_ {}", v.0)))
}

/// Argument-indexed store of facts used by the prover.
#[derive(Debug, Default)]
pub struct FactIndex {
    facts: Vec<Atom>,
    /// Copy of each non-ground fact with placeholders replaced by opaque symbols.
    frozen: Vec<Option<Atom>>,
    by_pred: HashMap<PredKey, Vec<u32>>,
    by_arg: HashMap<(PredKey, usize, Term), Vec<u32>>,
    unindexed: HashSet<(PredKey, usize)>,
}

const INDEXED_ARGS: usize = 2;

impl FactIndex {
    pub fn new<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> Self {
        let mut idx = FactIndex::default();
        for a in atoms {
            idx.push(a.clone());
        }
        idx
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Self {
        let mut idx = FactIndex::default();
        for a in atoms {
            idx.push(a);
        }
        idx
    }

    fn push(&mut self, atom: Atom) {
        let id = self.facts.len() as u32;
        let key = atom.key();
        for (pos, t) in atom.args.iter().enumerate().take(INDEXED_ARGS) {
            if t.is_var() {
                self.unindexed.insert((key.clone(), pos));
            } else {
                self.by_arg.entry((key.clone(), pos, t.clone())).or_default().push(id);
            }
        }
        self.by_pred.entry(key).or_default().push(id);
        let frozen = if atom.is_ground() {
            None
        } else {
            Some(Atom::with_pred(
                atom.pred.clone(),
                atom.args
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => frozen_placeholder(*v),
                        other => other.clone(),
                    })
                    .collect(),
            ))
        };
        self.facts.push(atom);
        self.frozen.push(frozen);
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn has_pred(&self, key: &PredKey) -> bool {
        self.by_pred.contains_key(key)
    }

    pub(crate) fn fact(&self, id: u32) -> &Atom {
        &self.facts[id as usize]
    }

    pub(crate) fn frozen(&self, id: u32) -> Option<&Atom> {
        self.frozen[id as usize].as_ref()
    }

    /// Candidate fact ids for a goal whose arguments are already dereferenced.
    pub(crate) fn candidates(&self, key: &PredKey, args: &[Term]) -> &[u32] {
        let mut best: Option<&[u32]> = None;
        for (pos, t) in args.iter().enumerate().take(INDEXED_ARGS) {
            if t.is_var() || self.unindexed.contains(&(key.clone(), pos)) {
                continue;
            }
            let ids = self
                .by_arg
                .get(&(key.clone(), pos, t.clone()))
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            if best.is_none_or(|b| ids.len() < b.len()) {
                best = Some(ids);
            }
        }
        best.unwrap_or_else(|| self.by_pred.get(key).map(Vec::as_slice).unwrap_or(&[]))
    }
}
