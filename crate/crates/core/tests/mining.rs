use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdassist_core::ilp::Bias;
use tdassist_core::logic::{Atom, FactIndex, KnowledgeBase, Term, Var};
use tdassist_core::mining::{canonical_form, mine, MiningParams, Pattern};

const BIAS: &str = "body e(+n, -n)\nbody c(+n, #t)\nbody f(+n)\n";

fn random_corpus(rng: &mut ChaCha8Rng, drawings: usize) -> Vec<Vec<Atom>> {
    let toks = ["x", "y", "z", "w"];
    (0..drawings)
        .map(|_| {
            let nodes = rng.gen_range(2..6);
            let mut facts = Vec::new();
            let n = |i: usize| Term::sym(&format!("n{i}"));
            for _ in 0..rng.gen_range(1..12) {
                facts.push(Atom::new("e", vec![n(rng.gen_range(0..nodes)), n(rng.gen_range(0..nodes))]));
            }
            for _ in 0..rng.gen_range(0..10) {
                facts.push(Atom::new("c", vec![n(rng.gen_range(0..nodes)), Term::sym(toks[rng.gen_range(0..4)])]));
            }
            for _ in 0..rng.gen_range(0..4) {
                facts.push(Atom::new("f", vec![n(rng.gen_range(0..nodes))]));
            }
            facts.sort_by_key(|a| a.to_string());
            facts.dedup();
            facts.truncate(40);
            facts
        })
        .collect()
}

/// Naive backtracking evaluation of an existential conjunction over facts.
fn naive_holds(lits: &[Atom], facts: &[Atom], env: &mut BTreeMap<Var, Term>) -> bool {
    let Some((first, rest)) = lits.split_first() else {
        return true;
    };
    for f in facts {
        if f.pred != first.pred || f.args.len() != first.args.len() {
            continue;
        }
        let mut bound = Vec::new();
        let mut ok = true;
        for (p, t) in first.args.iter().zip(&f.args) {
            match p {
                Term::Var(v) => match env.get(v) {
                    Some(x) if x != t => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        env.insert(*v, t.clone());
                        bound.push(*v);
                    }
                },
                c if c != t => {
                    ok = false;
                    break;
                }
                _ => {}
            }
        }
        if ok && naive_holds(rest, facts, env) {
            for v in bound {
                env.remove(&v);
            }
            return true;
        }
        for v in bound {
            env.remove(&v);
        }
    }
    false
}

fn connected(lits: &[Atom]) -> bool {
    let mut reached = vec![false; lits.len()];
    reached[0] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..lits.len() {
            if reached[i] {
                continue;
            }
            let vi: BTreeSet<Var> = lits[i].vars().collect();
            if (0..lits.len()).any(|j| reached[j] && lits[j].vars().any(|v| vi.contains(&v))) {
                reached[i] = true;
                changed = true;
            }
        }
    }
    reached.iter().all(|&r| r)
}

/// All literal sequences up to `max` long with variables numbered by first
/// occurrence; everything is of the single type `n`.
fn enumerate(max: usize, consts: &[Term]) -> Vec<Vec<Atom>> {
    fn rec(cur: &mut Vec<Atom>, nvars: u32, max: usize, consts: &[Term], out: &mut Vec<Vec<Atom>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == max {
            return;
        }
        let v = |i: u32| Term::Var(Var(i));
        let mut shapes: Vec<(Atom, u32)> = Vec::new();
        for a in 0..=nvars {
            let n1 = nvars.max(a + 1);
            for b in 0..=n1 {
                shapes.push((Atom::new("e", vec![v(a), v(b)]), n1.max(b + 1)));
            }
            for c in consts {
                shapes.push((Atom::new("c", vec![v(a), c.clone()]), (a + 1).max(nvars)));
            }
            shapes.push((Atom::new("f", vec![v(a)]), (a + 1).max(nvars)));
        }
        for (lit, n) in shapes {
            if cur.contains(&lit) {
                continue;
            }
            cur.push(lit);
            rec(cur, n, max, consts, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), 0, max, consts, &mut out);
    out
}

/// Isomorphism by trying every literal permutation and checking that a
/// variable bijection maps one onto the other.
fn isomorphic(a: &[Atom], b: &[Atom]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut idx: Vec<usize> = (0..b.len()).collect();
    permute(&mut idx, 0, &mut |perm| {
        let mut fwd = BTreeMap::new();
        let mut back = BTreeMap::new();
        a.iter().zip(perm.iter().map(|&i| &b[i])).all(|(x, y)| {
            x.pred == y.pred
                && x.args.len() == y.args.len()
                && x.args.iter().zip(&y.args).all(|(s, t)| match (s, t) {
                    (Term::Var(u), Term::Var(w)) => {
                        *fwd.entry(*u).or_insert(*w) == *w && *back.entry(*w).or_insert(*u) == *u
                    }
                    (s, t) => s == t,
                })
        })
    })
}

fn permute(v: &mut [usize], k: usize, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    if k == v.len() {
        return f(v);
    }
    for i in k..v.len() {
        v.swap(k, i);
        if permute(v, k + 1, f) {
            v.swap(k, i);
            return true;
        }
        v.swap(k, i);
    }
    false
}

fn oracle(corpus: &[Vec<Atom>], max: usize, min_count: usize) -> BTreeMap<String, usize> {
    let consts: BTreeSet<Term> = corpus
        .iter()
        .flatten()
        .filter(|a| &*a.pred == "c")
        .map(|a| a.args[1].clone())
        .collect();
    let consts: Vec<Term> = consts.into_iter().collect();
    let mut by_key: BTreeMap<String, Vec<Atom>> = BTreeMap::new();
    for lits in enumerate(max, &consts) {
        if !connected(&lits) {
            continue;
        }
        let key = canonical_form(&Pattern::new(lits.clone()));
        match by_key.get(&key) {
            Some(rep) => assert!(isomorphic(rep, &lits), "{key} merges non-isomorphic patterns"),
            None => {
                by_key.insert(key, lits);
            }
        }
    }
    by_key
        .into_iter()
        .filter_map(|(k, lits)| {
            let s = corpus.iter().filter(|f| naive_holds(&lits, f, &mut BTreeMap::new())).count();
            (s >= min_count).then_some((k, s))
        })
        .collect()
}

fn mined(corpus: &[Vec<Atom>], params: &MiningParams) -> BTreeMap<String, usize> {
    let idx: Vec<FactIndex> = corpus.iter().map(FactIndex::new).collect();
    let kbs: Vec<KnowledgeBase> = idx
        .iter()
        .map(|i| {
            let mut kb = KnowledgeBase::new();
            kb.add_facts(i);
            kb
        })
        .collect();
    let ps = mine(&kbs, &Bias::parse(BIAS).unwrap(), params).unwrap();
    let mut out = BTreeMap::new();
    for m in &ps.patterns {
        assert!(m.pattern.is_connected());
        assert!(out.insert(canonical_form(&m.pattern), m.support).is_none(), "duplicate {}", m.pattern);
    }
    out
}

#[test]
fn mining_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for round in 0..6 {
        let n = rng.gen_range(3..=20);
        let corpus = random_corpus(&mut rng, n);
        let params = MiningParams { min_support: [0.1, 0.3, 0.5][round % 3], max_literals: 3, ..Default::default() };
        let got = mined(&corpus, &params);
        let want = oracle(&corpus, 3, params.min_count(n).max(1));
        assert_eq!(got, want, "round {round}");
    }
}

#[test]
fn anti_monotone_and_order_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let corpus = random_corpus(&mut rng, 12);
    let params = MiningParams { min_support: 0.25, max_literals: 3, ..Default::default() };
    let got = mined(&corpus, &params);
    for (k, s) in &got {
        let lits = Pattern::parse(k).unwrap().literals;
        for drop in 0..lits.len() {
            let mut sub = lits.clone();
            sub.remove(drop);
            if sub.is_empty() || !connected(&sub) {
                continue;
            }
            let sk = canonical_form(&Pattern::new(sub));
            assert!(got[&sk] >= *s, "{sk} below its extension {k}");
        }
    }
    let mut rev = corpus.clone();
    rev.reverse();
    assert_eq!(mined(&rev, &params), got);
}
