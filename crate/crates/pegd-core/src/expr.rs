//! Interned parsing-expression algebra with simplifying smart constructors.
//!
//! All expressions live in a [`Pool`] and are referred to by [`ExprId`].
//! Hash consing guarantees that building the same shape twice yields the
//! same id, so id equality is structural equality. The `mk_*` constructors
//! additionally rewrite their result with a fixed table of language-preserving
//! identities, applied exhaustively at the root. Because every subexpression
//! was itself built through a smart constructor, expressions stay in root
//! normal form globally without a separate compaction pass.

use std::collections::HashMap;

/// Interning key for an expression. Equal ids mean equal shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExprId(pub(crate) u32);

impl ExprId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Identifier of a grammar rule (base or derived).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId(pub(crate) u32);

impl RuleId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A terminal symbol: one token of the grammar alphabet.
pub type Terminal = char;

/// The nine parsing-expression variants plus first-class positive lookahead.
///
/// `And(e)` is kept as its own node rather than being expanded to `!!e` so
/// that printed expressions keep the `&` the user wrote; everywhere it
/// matters its semantics are defined to coincide with `Not(Not(e))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExprNode {
    /// `''` — matches the empty string.
    Empty,
    /// `%fail` — matches nothing.
    Fail,
    /// `.` — matches any one terminal.
    Wildcard,
    /// A single terminal.
    Term(Terminal),
    /// Reference to a rule.
    Nonterm(RuleId),
    /// `e1 e2`.
    Seq(ExprId, ExprId),
    /// Prioritized choice `e1 / e2`.
    Choice(ExprId, ExprId),
    /// `e*`.
    Star(ExprId),
    /// Negative lookahead `!e`.
    Not(ExprId),
    /// Positive lookahead `&e`.
    And(ExprId),
}

/// Hash-consing store for expressions.
///
/// A pool is single-owner mutable state: all construction for one grammar or
/// derivation session must go through the same pool. Interned nodes are
/// immutable once created.
#[derive(Debug, Clone)]
pub struct Pool {
    nodes: Vec<ExprNode>,
    index: HashMap<ExprNode, ExprId>,
    empty: ExprId,
    fail: ExprId,
    wildcard: ExprId,
    star_wild: ExprId,
}

impl Default for Pool {
    fn default() -> Self {
        Self::new()
    }
}

impl Pool {
    pub fn new() -> Self {
        let mut pool = Pool {
            nodes: Vec::new(),
            index: HashMap::new(),
            empty: ExprId(0),
            fail: ExprId(0),
            wildcard: ExprId(0),
            star_wild: ExprId(0),
        };
        pool.empty = pool.intern(ExprNode::Empty);
        pool.fail = pool.intern(ExprNode::Fail);
        pool.wildcard = pool.intern(ExprNode::Wildcard);
        pool.star_wild = pool.intern(ExprNode::Star(pool.wildcard));
        pool
    }

    fn intern(&mut self, node: ExprNode) -> ExprId {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = ExprId(self.nodes.len() as u32);
        self.nodes.push(node);
        self.index.insert(node, id);
        id
    }

    /// Interns a node verbatim, skipping the simplification table.
    ///
    /// Recognition semantics do not depend on normal form, so this is safe;
    /// it exists so tests can build the left-hand side of an identity as
    /// written and compare it against the rewritten form.
    pub fn mk_raw(&mut self, node: ExprNode) -> ExprId {
        self.intern(node)
    }

    pub fn node(&self, e: ExprId) -> ExprNode {
        self.nodes[e.index()]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn mk_empty(&self) -> ExprId {
        self.empty
    }

    pub fn mk_fail(&self) -> ExprId {
        self.fail
    }

    pub fn mk_wild(&self) -> ExprId {
        self.wildcard
    }

    /// `.*` — the "rest of the input" expression used by the lookahead rules.
    pub fn star_wild(&self) -> ExprId {
        self.star_wild
    }

    pub fn mk_term(&mut self, a: Terminal) -> ExprId {
        self.intern(ExprNode::Term(a))
    }

    pub fn mk_nonterm(&mut self, rule: RuleId) -> ExprId {
        self.intern(ExprNode::Nonterm(rule))
    }

    /// `e*`. The identity table has no rewrites rooted at a star.
    pub fn mk_star(&mut self, e: ExprId) -> ExprId {
        self.intern(ExprNode::Star(e))
    }

    /// `e1 e2` with root rewrites:
    /// `ε e → e`, `e ε → e`, `∅ e → ∅`, `e ∅ → ∅`, `_* _* → _*`,
    /// `!e1 !e1 e2 → !e1 e2`, `&e1 &e1 e2 → &e1 e2`.
    pub fn mk_seq(&mut self, e1: ExprId, e2: ExprId) -> ExprId {
        if e1 == self.empty {
            return e2;
        }
        if e2 == self.empty {
            return e1;
        }
        if e1 == self.fail || e2 == self.fail {
            return self.fail;
        }
        if e1 == self.star_wild && e2 == self.star_wild {
            return self.star_wild;
        }
        // Adjacent duplicated lookahead: Seq(p, Seq(p, e)) → Seq(p, e).
        if is_lookahead(self.node(e1)) {
            if let ExprNode::Seq(h, _) = self.node(e2) {
                if h == e1 {
                    return e2;
                }
            }
        }
        self.intern(ExprNode::Seq(e1, e2))
    }

    /// `e1 / e2` with root rewrites:
    /// `∅ / e → e`, `e / ∅ → e`, `e / e → e`, `e1 / !e1 e2 → e1 / e2`,
    /// `e1 / !e1 → e1 / ε`, `e1 e2 / e1 e3 → e1 (e2 / e3)`,
    /// `e1 _* / e2 _* → (e1 / e2) _*`.
    pub fn mk_choice(&mut self, e1: ExprId, e2: ExprId) -> ExprId {
        if e1 == self.fail {
            return e2;
        }
        if e2 == self.fail {
            return e1;
        }
        if e1 == e2 {
            return e1;
        }
        if let ExprNode::Seq(h, t) = self.node(e2) {
            if self.node(h) == ExprNode::Not(e1) {
                return self.mk_choice(e1, t);
            }
        }
        if self.node(e2) == ExprNode::Not(e1) {
            return self.mk_choice(e1, self.empty);
        }
        if let (ExprNode::Seq(h1, t1), ExprNode::Seq(h2, t2)) = (self.node(e1), self.node(e2)) {
            if h1 == h2 {
                let tail = self.mk_choice(t1, t2);
                return self.mk_seq(h1, tail);
            }
            if t1 == self.star_wild && t2 == self.star_wild {
                let head = self.mk_choice(h1, h2);
                return self.mk_seq(head, self.star_wild);
            }
        }
        self.intern(ExprNode::Choice(e1, e2))
    }

    /// `!e` with root rewrites:
    /// `!ε → ∅`, `!(_*) → ∅`, `!∅ → ε`, `!(e _*) → !e`, `!&e → !e`, `!!e → &e`.
    pub fn mk_not(&mut self, e: ExprId) -> ExprId {
        if e == self.empty || e == self.star_wild {
            return self.fail;
        }
        if e == self.fail {
            return self.empty;
        }
        match self.node(e) {
            ExprNode::Seq(h, t) if t == self.star_wild => self.mk_not(h),
            ExprNode::And(inner) => self.mk_not(inner),
            ExprNode::Not(inner) => self.mk_and(inner),
            _ => self.intern(ExprNode::Not(e)),
        }
    }

    /// `&e` with root rewrites:
    /// `&ε → ε`, `&(_*) → ε`, `&∅ → ∅`, `&(e _*) → &e`, `&&e → &e`, `&!e → !e`.
    pub fn mk_and(&mut self, e: ExprId) -> ExprId {
        if e == self.empty || e == self.star_wild {
            return self.empty;
        }
        if e == self.fail {
            return self.fail;
        }
        match self.node(e) {
            ExprNode::Seq(h, t) if t == self.star_wild => self.mk_and(h),
            ExprNode::And(_) | ExprNode::Not(_) => e,
            _ => self.intern(ExprNode::And(e)),
        }
    }
}

fn is_lookahead(node: ExprNode) -> bool {
    matches!(node, ExprNode::Not(_) | ExprNode::And(_))
}
