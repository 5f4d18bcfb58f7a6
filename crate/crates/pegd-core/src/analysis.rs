//! Kleene fixed-point engine and the grammar analyses built on it:
//! nullability `ν`, well-formedness `WF`, and first sets.
//!
//! Recursive rule systems are solved by iterating to stability: every key
//! starts at the lattice's least element and each pass joins the freshly
//! evaluated value into the table. Evaluation may discover new keys (e.g.
//! derived cells forced on first read); they enter with bottom. Iteration
//! order is deterministic key-insertion order; because values only ever
//! move up under join, the result does not depend on that order.
//!
//! `ν` contains negation and is not monotone in general. The join-based
//! iteration still stabilizes (the table itself is monotone), and a pass
//! budget converts any genuinely non-stabilizing system into an error. For
//! grammars that are not well-formed the reported `ν` is a defined value of
//! the iteration but has no language-level meaning.

use std::collections::btree_set::BTreeSet;
use std::collections::HashMap;

use crate::derive::Session;
use crate::error::{Error, Result};
use crate::expr::{ExprId, ExprNode, Pool, RuleId, Terminal};

/// A join-semilattice with a least element and finite height.
pub trait Lattice {
    type Value: Clone + PartialEq;
    fn bottom(&self) -> Self::Value;
    fn join(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    /// Length of the longest strictly increasing chain, used to budget
    /// iteration passes.
    fn height(&self) -> usize;
}

/// The Boolean lattice: ⊥ = false, join = ∨.
pub struct BoolLattice;

impl Lattice for BoolLattice {
    type Value = bool;
    fn bottom(&self) -> bool {
        false
    }
    fn join(&self, a: &bool, b: &bool) -> bool {
        *a || *b
    }
    fn height(&self) -> usize {
        1
    }
}

/// First-set information for a rule: the pair (base, mask) representing the
/// accumulator-passing function `t ↦ base ∪ (mask ∩ t)`. Join is pointwise
/// union, bottom is (∅, ∅).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FirstsInfo {
    /// Terminals the expression itself can start with.
    pub base: BTreeSet<Terminal>,
    /// Terminals from the continuation that can show through.
    pub mask: BTreeSet<Terminal>,
}

pub struct FirstsLattice {
    pub alphabet_size: usize,
}

impl Lattice for FirstsLattice {
    type Value = FirstsInfo;
    fn bottom(&self) -> FirstsInfo {
        FirstsInfo::default()
    }
    fn join(&self, a: &FirstsInfo, b: &FirstsInfo) -> FirstsInfo {
        FirstsInfo {
            base: a.base.union(&b.base).copied().collect(),
            mask: a.mask.union(&b.mask).copied().collect(),
        }
    }
    fn height(&self) -> usize {
        2 * self.alphabet_size
    }
}

/// Value table for one fixed-point run, in key-insertion order. Reading an
/// unknown key registers it with the bottom value so that discovered keys
/// get equations of their own on the next sweep.
#[derive(Debug)]
pub struct FixTable<V> {
    values: HashMap<RuleId, V>,
    order: Vec<RuleId>,
    bottom: V,
}

impl<V: Clone> FixTable<V> {
    fn new(bottom: V) -> Self {
        FixTable {
            values: HashMap::new(),
            order: Vec::new(),
            bottom,
        }
    }

    /// Current value of `key`, registering it at bottom if unseen.
    pub fn value(&mut self, key: RuleId) -> V {
        if !self.values.contains_key(&key) {
            self.values.insert(key, self.bottom.clone());
            self.order.push(key);
        }
        self.values[&key].clone()
    }

    pub fn keys(&self) -> &[RuleId] {
        &self.order
    }

    pub fn get(&self, key: RuleId) -> Option<&V> {
        self.values.get(&key)
    }
}

/// Iterates `eval` over the key set until a full pass changes nothing.
///
/// Every key starts at bottom; each pass replaces `v` with `join(v, eval)`.
/// Keys discovered mid-pass are evaluated within the same pass. The pass
/// budget is `#keys × height + #keys + 1`, recomputed as keys are
/// discovered; exceeding it reports a non-stabilizing system.
pub fn fix<L, F>(
    session: &mut Session,
    seeds: &[RuleId],
    lattice: &L,
    mut eval: F,
) -> Result<FixTable<L::Value>>
where
    L: Lattice,
    F: FnMut(&mut Session, &mut FixTable<L::Value>, RuleId) -> Result<L::Value>,
{
    let mut table = FixTable::new(lattice.bottom());
    for &seed in seeds {
        table.value(seed);
    }
    let mut passes = 0usize;
    loop {
        let budget = table.order.len() * lattice.height() + table.order.len() + 1;
        if passes > budget {
            return Err(Error::IterationBudgetExceeded {
                passes,
                keys: table.order.len(),
            });
        }
        passes += 1;
        let mut changed = false;
        let mut i = 0;
        while i < table.order.len() {
            let key = table.order[i];
            let computed = eval(session, &mut table, key)?;
            let old = table.value(key);
            let joined = lattice.join(&old, &computed);
            if joined != old {
                table.values.insert(key, joined);
                changed = true;
            }
            i += 1;
        }
        if !changed {
            return Ok(table);
        }
    }
}

/// Nonterminals referenced directly by `e` (not through rule bodies), in
/// first-visit order.
fn direct_rules(pool: &Pool, e: ExprId) -> Vec<RuleId> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut stack = vec![e];
    while let Some(e) = stack.pop() {
        if !seen.insert(e) {
            continue;
        }
        match pool.node(e) {
            ExprNode::Nonterm(r) => {
                if !out.contains(&r) {
                    out.push(r);
                }
            }
            ExprNode::Seq(l, r) | ExprNode::Choice(l, r) => {
                stack.push(r);
                stack.push(l);
            }
            ExprNode::Star(i) | ExprNode::Not(i) | ExprNode::And(i) => stack.push(i),
            _ => {}
        }
    }
    out
}

/// Three-valued truth for the ν fixpoint. `Unknown` is the least element
/// of the information order; the logical connectives are Kleene's, which
/// are monotone in that order. This matters because ν contains negation:
/// iterating a two-valued system from ⊥ can latch a transient ⊤ (computed
/// from a dependency that had not stabilized yet) that the join never lets
/// go of again. With three values a key only becomes true/false once its
/// support justifies it, so the fixpoint is order-independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tri {
    Unknown,
    False,
    True,
}

impl Tri {
    fn of(b: bool) -> Tri {
        if b {
            Tri::True
        } else {
            Tri::False
        }
    }

    fn and(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::False, _) | (_, Tri::False) => Tri::False,
            (Tri::True, Tri::True) => Tri::True,
            _ => Tri::Unknown,
        }
    }

    fn or(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::True, _) | (_, Tri::True) => Tri::True,
            (Tri::False, Tri::False) => Tri::False,
            _ => Tri::Unknown,
        }
    }

    fn not(self) -> Tri {
        match self {
            Tri::Unknown => Tri::Unknown,
            Tri::False => Tri::True,
            Tri::True => Tri::False,
        }
    }
}

/// Information-order lattice over [`Tri`].
struct TriLattice;

impl Lattice for TriLattice {
    type Value = Tri;
    fn bottom(&self) -> Tri {
        Tri::Unknown
    }
    fn join(&self, a: &Tri, b: &Tri) -> Tri {
        match (*a, *b) {
            (Tri::Unknown, x) | (x, Tri::Unknown) => x,
            // Determined values never flip under Kleene evaluation.
            (x, _) => x,
        }
    }
    fn height(&self) -> usize {
        1
    }
}

/// Three-valued ν of an expression.
fn nu_tri_of(
    pool: &Pool,
    e: ExprId,
    lookup: &mut impl FnMut(RuleId) -> Tri,
    memo: &mut HashMap<ExprId, Tri>,
) -> Tri {
    if let Some(&v) = memo.get(&e) {
        return v;
    }
    let v = match pool.node(e) {
        ExprNode::Empty | ExprNode::Star(_) => Tri::True,
        ExprNode::Term(_) | ExprNode::Wildcard | ExprNode::Fail => Tri::False,
        ExprNode::Nonterm(r) => lookup(r),
        ExprNode::Seq(l, r) => {
            nu_tri_of(pool, l, lookup, memo).and(nu_tri_of(pool, r, lookup, memo))
        }
        ExprNode::Choice(l, r) => {
            nu_tri_of(pool, l, lookup, memo).or(nu_tri_of(pool, r, lookup, memo))
        }
        ExprNode::Not(i) => nu_tri_of(pool, i, lookup, memo).not(),
        ExprNode::And(i) => nu_tri_of(pool, i, lookup, memo),
    };
    memo.insert(e, v);
    v
}

/// ν of an expression given a resolver for rule-level values.
fn nu_of(
    pool: &Pool,
    e: ExprId,
    lookup: &mut impl FnMut(RuleId) -> bool,
    memo: &mut HashMap<ExprId, bool>,
) -> bool {
    if let Some(&v) = memo.get(&e) {
        return v;
    }
    let v = match pool.node(e) {
        ExprNode::Empty | ExprNode::Star(_) => true,
        ExprNode::Term(_) | ExprNode::Wildcard | ExprNode::Fail => false,
        ExprNode::Nonterm(r) => lookup(r),
        ExprNode::Seq(l, r) => {
            nu_of(pool, l, lookup, memo) && nu_of(pool, r, lookup, memo)
        }
        ExprNode::Choice(l, r) => {
            nu_of(pool, l, lookup, memo) || nu_of(pool, r, lookup, memo)
        }
        ExprNode::Not(i) => !nu_of(pool, i, lookup, memo),
        ExprNode::And(i) => nu_of(pool, i, lookup, memo),
    };
    memo.insert(e, v);
    v
}

/// WF of an expression given resolvers for rule-level WF and expression ν.
fn wf_of(
    pool: &Pool,
    e: ExprId,
    lookup: &mut impl FnMut(RuleId) -> bool,
    nu: &mut impl FnMut(ExprId) -> bool,
    memo: &mut HashMap<ExprId, bool>,
) -> bool {
    if let Some(&v) = memo.get(&e) {
        return v;
    }
    let v = match pool.node(e) {
        ExprNode::Empty | ExprNode::Term(_) | ExprNode::Wildcard | ExprNode::Fail => true,
        ExprNode::Nonterm(r) => lookup(r),
        ExprNode::Seq(l, r) => {
            wf_of(pool, l, lookup, nu, memo) && (!nu(l) || wf_of(pool, r, lookup, nu, memo))
        }
        ExprNode::Choice(l, r) => {
            wf_of(pool, l, lookup, nu, memo) && wf_of(pool, r, lookup, nu, memo)
        }
        ExprNode::Star(i) => wf_of(pool, i, lookup, nu, memo) && !nu(i),
        ExprNode::Not(i) | ExprNode::And(i) => wf_of(pool, i, lookup, nu, memo),
    };
    memo.insert(e, v);
    v
}

/// Firsts pair of an expression given a resolver for rule-level pairs.
fn firsts_of(
    pool: &Pool,
    alphabet: &BTreeSet<Terminal>,
    e: ExprId,
    lookup: &mut impl FnMut(RuleId) -> FirstsInfo,
    memo: &mut HashMap<ExprId, FirstsInfo>,
) -> FirstsInfo {
    if let Some(v) = memo.get(&e) {
        return v.clone();
    }
    let v = match pool.node(e) {
        // firsts' ε t = t
        ExprNode::Empty => FirstsInfo {
            base: BTreeSet::new(),
            mask: alphabet.clone(),
        },
        // firsts' a t = {a}
        ExprNode::Term(a) => FirstsInfo {
            base: [a].into_iter().collect(),
            mask: BTreeSet::new(),
        },
        // firsts' _ t = the whole alphabet
        ExprNode::Wildcard => FirstsInfo {
            base: alphabet.clone(),
            mask: BTreeSet::new(),
        },
        // firsts' ∅ t = ∅
        ExprNode::Fail => FirstsInfo::default(),
        ExprNode::Nonterm(r) => lookup(r),
        // firsts' (e1 e2) t = firsts' e1 (firsts' e2 t)
        ExprNode::Seq(l, r) => {
            let fl = firsts_of(pool, alphabet, l, lookup, memo);
            let fr = firsts_of(pool, alphabet, r, lookup, memo);
            FirstsInfo {
                base: fl
                    .base
                    .iter()
                    .copied()
                    .chain(fl.mask.intersection(&fr.base).copied())
                    .collect(),
                mask: fl.mask.intersection(&fr.mask).copied().collect(),
            }
        }
        // firsts' (e1/e2) t = firsts' e1 t ∪ firsts' e2 t
        ExprNode::Choice(l, r) => {
            let fl = firsts_of(pool, alphabet, l, lookup, memo);
            let fr = firsts_of(pool, alphabet, r, lookup, memo);
            FirstsInfo {
                base: fl.base.union(&fr.base).copied().collect(),
                mask: fl.mask.union(&fr.mask).copied().collect(),
            }
        }
        // firsts' e* t = t ∪ firsts' e t
        ExprNode::Star(i) => {
            let fi = firsts_of(pool, alphabet, i, lookup, memo);
            FirstsInfo {
                base: fi.base,
                mask: alphabet.clone(),
            }
        }
        // firsts' !e t = t
        ExprNode::Not(_) => FirstsInfo {
            base: BTreeSet::new(),
            mask: alphabet.clone(),
        },
        // firsts' &e t = firsts e ∩ t
        ExprNode::And(i) => {
            let fi = firsts_of(pool, alphabet, i, lookup, memo);
            FirstsInfo {
                base: BTreeSet::new(),
                mask: fi.base,
            }
        }
    };
    memo.insert(e, v.clone());
    v
}

impl Session {
    /// Makes sure rule-level ν values exist for every rule reachable from
    /// `e`, running a fixed-point pass for the missing ones.
    ///
    /// The system is solved with Kleene three-valued logic first, which
    /// determines every rule of a meaningful (well-formed) grammar. Keys
    /// still unknown after that — negative self-reference like `A <- !A`,
    /// whose ν has no language-level meaning — are then resolved with the
    /// two-valued ⊥-start ∨-join iteration so they still get a stable
    /// reported value.
    fn ensure_nu(&mut self, e: ExprId) -> Result<()> {
        let seeds: Vec<RuleId> = direct_rules(self.grammar().pool(), e)
            .into_iter()
            .filter(|r| !self.nu_rules.contains_key(r))
            .collect();
        if seeds.is_empty() {
            return Ok(());
        }
        let table = fix(self, &seeds, &TriLattice, |session, table, key| {
            let body = session.rule_body(key)?;
            let cache = std::mem::take(&mut session.nu_rules);
            let mut memo = HashMap::new();
            let v = nu_tri_of(
                session.grammar().pool(),
                body,
                &mut |r| match cache.get(&r) {
                    Some(&b) => Tri::of(b),
                    None => table.value(r),
                },
                &mut memo,
            );
            session.nu_rules = cache;
            Ok(v)
        })?;
        let mut residual = Vec::new();
        for &key in table.keys() {
            match table.value_ref(key) {
                Tri::True => {
                    self.nu_rules.insert(key, true);
                }
                Tri::False => {
                    self.nu_rules.insert(key, false);
                }
                Tri::Unknown => residual.push(key),
            }
        }
        if residual.is_empty() {
            return Ok(());
        }
        let residual_set: std::collections::HashSet<RuleId> = residual.iter().copied().collect();
        let table = fix(self, &residual, &BoolLattice, |session, table, key| {
            let body = session.rule_body(key)?;
            let cache = std::mem::take(&mut session.nu_rules);
            let mut memo = HashMap::new();
            let v = nu_of(
                session.grammar().pool(),
                body,
                &mut |r| {
                    if residual_set.contains(&r) {
                        table.value(r)
                    } else {
                        cache.get(&r).copied().unwrap_or_else(|| table.value(r))
                    }
                },
                &mut memo,
            );
            session.nu_rules = cache;
            Ok(v)
        })?;
        for &key in table.keys() {
            self.nu_rules.entry(key).or_insert(table.value_ref(key));
        }
        Ok(())
    }

    /// ν(e): can the expression accept immediately, without consuming or
    /// examining further input? Meaningful for well-formed grammars; for
    /// ill-formed ones the value is the stable point of the iteration.
    pub fn nullable(&mut self, e: ExprId) -> Result<bool> {
        if let Some(&v) = self.nu_exprs.get(&e) {
            return Ok(v);
        }
        self.ensure_nu(e)?;
        let cache = std::mem::take(&mut self.nu_rules);
        let mut memo = HashMap::new();
        let v = nu_of(
            self.grammar().pool(),
            e,
            &mut |r| *cache.get(&r).expect("nu closure incomplete"),
            &mut memo,
        );
        self.nu_rules = cache;
        self.nu_exprs.extend(memo);
        Ok(v)
    }

    fn ensure_wf(&mut self, e: ExprId) -> Result<()> {
        self.ensure_nu(e)?;
        let seeds: Vec<RuleId> = direct_rules(self.grammar().pool(), e)
            .into_iter()
            .filter(|r| !self.wf_rules.contains_key(r))
            .collect();
        if seeds.is_empty() {
            return Ok(());
        }
        let table = fix(self, &seeds, &BoolLattice, |session, table, key| {
            let body = session.rule_body(key)?;
            // Rules reached for the first time may not have ν values yet.
            session.ensure_nu(body)?;
            let wf_cache = std::mem::take(&mut session.wf_rules);
            let nu_cache = std::mem::take(&mut session.nu_rules);
            let pool = session.grammar().pool();
            let mut nu_memo = HashMap::new();
            let mut wf_memo = HashMap::new();
            let v = wf_of(
                pool,
                body,
                &mut |r| wf_cache.get(&r).copied().unwrap_or_else(|| table.value(r)),
                &mut |sub| {
                    nu_of(
                        pool,
                        sub,
                        &mut |r| *nu_cache.get(&r).expect("nu closure incomplete"),
                        &mut nu_memo,
                    )
                },
                &mut wf_memo,
            );
            session.wf_rules = wf_cache;
            session.nu_rules = nu_cache;
            Ok(v)
        })?;
        for &key in table.keys() {
            self.wf_rules.insert(key, table.value_ref(key));
        }
        Ok(())
    }

    /// WF(e) over the current environment.
    pub fn wf_expr(&mut self, e: ExprId) -> Result<bool> {
        if let Some(&v) = self.wf_exprs.get(&e) {
            return Ok(v);
        }
        self.ensure_wf(e)?;
        let wf_cache = std::mem::take(&mut self.wf_rules);
        let nu_cache = std::mem::take(&mut self.nu_rules);
        let pool = self.grammar().pool();
        let mut nu_memo = HashMap::new();
        let mut wf_memo = HashMap::new();
        let v = wf_of(
            pool,
            e,
            &mut |r| *wf_cache.get(&r).expect("wf closure incomplete"),
            &mut |sub| {
                nu_of(
                    pool,
                    sub,
                    &mut |r| *nu_cache.get(&r).expect("nu closure incomplete"),
                    &mut nu_memo,
                )
            },
            &mut wf_memo,
        );
        self.wf_rules = wf_cache;
        self.nu_rules = nu_cache;
        self.wf_exprs.extend(wf_memo);
        Ok(v)
    }

    /// Per-rule WF for every rule currently defined, plus WF of the start
    /// expression. Rules are reported in id order.
    pub fn well_formed(&mut self) -> Result<(Vec<(RuleId, bool)>, bool)> {
        let rules: Vec<RuleId> = self.grammar().rule_ids().collect();
        let mut report = Vec::with_capacity(rules.len());
        for rule in rules {
            let reference = self.grammar_mut().pool_mut().mk_nonterm(rule);
            report.push((rule, self.wf_expr(reference)?));
        }
        let start = self.grammar().start();
        let overall = self.wf_expr(start)?;
        Ok((report, overall))
    }

    fn ensure_firsts(&mut self, e: ExprId) -> Result<()> {
        let seeds: Vec<RuleId> = direct_rules(self.grammar().pool(), e)
            .into_iter()
            .filter(|r| !self.firsts_rules.contains_key(r))
            .collect();
        if seeds.is_empty() {
            return Ok(());
        }
        let alphabet: BTreeSet<Terminal> = self.grammar().alphabet().iter().copied().collect();
        let lattice = FirstsLattice {
            alphabet_size: alphabet.len(),
        };
        let table = fix(self, &seeds, &lattice, |session, table, key| {
            let body = session.rule_body(key)?;
            let cache = std::mem::take(&mut session.firsts_rules);
            let mut memo = HashMap::new();
            let v = firsts_of(
                session.grammar().pool(),
                &alphabet,
                body,
                &mut |r| match cache.get(&r) {
                    Some((base, mask)) => FirstsInfo {
                        base: base.iter().copied().collect(),
                        mask: mask.iter().copied().collect(),
                    },
                    None => table.value(r),
                },
                &mut memo,
            );
            session.firsts_rules = cache;
            Ok(v)
        })?;
        for &key in table.keys() {
            let info = table.value_ref(key);
            self.firsts_rules.insert(
                key,
                (
                    info.base.iter().copied().collect(),
                    info.mask.iter().copied().collect(),
                ),
            );
        }
        Ok(())
    }

    /// The (over-approximated) first set of `e`: terminals that can begin a
    /// sentence of `e`.
    pub fn first_set(&mut self, e: ExprId) -> Result<BTreeSet<Terminal>> {
        if let Some(v) = self.firsts_exprs.get(&e) {
            return Ok(v.iter().copied().collect());
        }
        self.ensure_firsts(e)?;
        let alphabet: BTreeSet<Terminal> = self.grammar().alphabet().iter().copied().collect();
        let cache = std::mem::take(&mut self.firsts_rules);
        let mut memo = HashMap::new();
        let info = firsts_of(
            self.grammar().pool(),
            &alphabet,
            e,
            &mut |r| {
                let (base, mask) = cache.get(&r).expect("firsts closure incomplete");
                FirstsInfo {
                    base: base.iter().copied().collect(),
                    mask: mask.iter().copied().collect(),
                }
            },
            &mut memo,
        );
        self.firsts_rules = cache;
        self.firsts_exprs
            .insert(e, info.base.iter().copied().collect());
        Ok(info.base)
    }
}

impl<V: Clone> FixTable<V> {
    fn value_ref(&self, key: RuleId) -> V {
        self.values[&key].clone()
    }
}
