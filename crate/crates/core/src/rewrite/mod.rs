//! Term rewriting: rules, deterministic site enumeration and application.
//!
//! A site is addressed by its child-index path from the program root. Sites
//! of a rule are listed in pre-order (root first, then children left to
//! right), and the position in that list is the site's ordinal.

mod catalog;
mod check;

use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::ir::{Expr, IrError, Program};

pub use catalog::build_catalog;
pub use check::{check_rules, RuleTally};

/// What a rewrite preserves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Contract {
    /// Every slot of the rewritten subtree is unchanged.
    Full,
    /// Only the program's leading `output_width` slots are preserved; the
    /// body may widen and trailing slots carry partial sums. Such rules only
    /// fire at the program root.
    Prefix,
}

impl fmt::Display for Contract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Contract::Full => write!(f, "full"),
            Contract::Prefix => write!(f, "prefix"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Vectorize,
    Algebra,
    VectorAlgebra,
    Balance,
    Rotation,
    Reduce,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Category::Vectorize => "vectorize",
            Category::Algebra => "algebra",
            Category::VectorAlgebra => "vector-algebra",
            Category::Balance => "balance",
            Category::Rotation => "rotation",
            Category::Reduce => "reduce",
        };
        f.write_str(s)
    }
}

type Matcher = Box<dyn Fn(&Expr) -> bool + Send + Sync>;
type Builder = Box<dyn Fn(&Expr) -> Result<Expr, IrError> + Send + Sync>;

pub struct Rule {
    name: String,
    index: usize,
    category: Category,
    contract: Contract,
    pattern: String,
    matcher: Matcher,
    builder: Builder,
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Rule")
            .field("name", &self.name)
            .field("index", &self.index)
            .field("contract", &self.contract)
            .finish()
    }
}

impl Rule {
    pub(crate) fn new(
        name: impl Into<String>,
        category: Category,
        contract: Contract,
        pattern: impl Into<String>,
        matcher: impl Fn(&Expr) -> bool + Send + Sync + 'static,
        builder: impl Fn(&Expr) -> Result<Expr, IrError> + Send + Sync + 'static,
    ) -> Rule {
        Rule {
            name: name.into(),
            index: usize::MAX,
            category,
            contract,
            pattern: pattern.into(),
            matcher: Box::new(matcher),
            builder: Box::new(builder),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn category(&self) -> Category {
        self.category
    }

    pub fn contract(&self) -> Contract {
        self.contract
    }

    /// Human-readable `lhs => rhs` summary.
    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn root_only(&self) -> bool {
        self.contract == Contract::Prefix
    }

    pub fn matches(&self, e: &Expr) -> bool {
        (self.matcher)(e)
    }

    /// Rewrites a node the matcher accepted.
    pub fn rewrite_node(&self, e: &Expr) -> Result<Expr, IrError> {
        (self.builder)(e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Site {
    pub path: Vec<usize>,
    pub ordinal: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewriteError {
    #[error("rule `{rule}` does not match at site {ordinal}")]
    InvalidSite { rule: String, ordinal: usize },
    #[error("rule `{rule}` built an ill-typed term: {source}")]
    IllTyped { rule: String, source: IrError },
}

pub struct Catalog {
    rules: Vec<Rule>,
    version: String,
}

impl Catalog {
    pub(crate) fn from_rules(mut rules: Vec<Rule>) -> Catalog {
        for (i, r) in rules.iter_mut().enumerate() {
            r.index = i;
        }
        let mut names: Vec<&str> = rules.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), rules.len(), "rule names must be unique");
        let version = format!("catalog-1/{}", rules.len());
        Catalog { rules, version }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn get(&self, index: usize) -> Option<&Rule> {
        self.rules.get(index)
    }

    pub fn by_name(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }

    /// Number of sites per rule, in catalog order.
    pub fn match_counts(&self, e: &Expr) -> Vec<usize> {
        let mut counts = vec![0usize; self.rules.len()];
        e.walk(&mut |path, node| {
            for (i, r) in self.rules.iter().enumerate() {
                if (path.is_empty() || !r.root_only()) && r.matches(node) {
                    counts[i] += 1;
                }
            }
        });
        counts
    }
}

/// The fixed rule catalog, built once.
pub fn catalog() -> &'static Catalog {
    static CATALOG: OnceLock<Catalog> = OnceLock::new();
    CATALOG.get_or_init(build_catalog)
}

/// Pre-order list of places where `rule` applies in `e`.
pub fn match_sites(rule: &Rule, e: &Expr) -> Vec<Site> {
    if rule.root_only() {
        return if rule.matches(e) {
            vec![Site {
                path: Vec::new(),
                ordinal: 0,
            }]
        } else {
            Vec::new()
        };
    }
    let mut sites = Vec::new();
    e.walk(&mut |path, node| {
        if rule.matches(node) {
            let ordinal = sites.len();
            sites.push(Site {
                path: path.to_vec(),
                ordinal,
            });
        }
    });
    sites
}

/// Rewrites the subtree at `site`, sharing everything outside its path.
pub fn apply(rule: &Rule, e: &Expr, site: &Site) -> Result<Expr, RewriteError> {
    let invalid = || RewriteError::InvalidSite {
        rule: rule.name.clone(),
        ordinal: site.ordinal,
    };
    if rule.root_only() && !site.path.is_empty() {
        return Err(invalid());
    }
    let node = e.at(&site.path).ok_or_else(invalid)?;
    if !rule.matches(node) {
        return Err(invalid());
    }
    let ill_typed = |source| RewriteError::IllTyped {
        rule: rule.name.clone(),
        source,
    };
    let replacement = rule.rewrite_node(node).map_err(ill_typed)?;
    e.replace_at(&site.path, replacement).map_err(ill_typed)
}

/// Applies a rule to a program body. Prefix rules may widen the body; the
/// declared output width is kept.
pub fn apply_program(rule: &Rule, p: &Program, site: &Site) -> Result<Program, RewriteError> {
    let body = apply(rule, p.body(), site)?;
    p.with_body(body).map_err(|source| RewriteError::IllTyped {
        rule: rule.name.clone(),
        source,
    })
}

/// Resolves `(rule, ordinal)` to a site and applies it.
pub fn apply_ordinal(rule: &Rule, p: &Program, ordinal: usize) -> Result<Program, RewriteError> {
    let site = match_sites(rule, p.body())
        .into_iter()
        .nth(ordinal)
        .ok_or_else(|| RewriteError::InvalidSite {
            rule: rule.name.clone(),
            ordinal,
        })?;
    apply_program(rule, p, &site)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_expr, parse_program, print_expr};

    fn rule(name: &str) -> &'static Rule {
        catalog().by_name(name).unwrap_or_else(|| panic!("missing rule {name}"))
    }

    fn rewrite_once(name: &str, src: &str) -> String {
        let e = parse_expr(src).unwrap();
        let r = rule(name);
        let sites = match_sites(r, &e);
        assert!(!sites.is_empty(), "{name} does not match {src}");
        print_expr(&apply(r, &e, &sites[0]).unwrap())
    }

    #[test]
    fn catalog_size_and_indices() {
        let c = catalog();
        assert!(c.len() >= 60, "catalog has {} rules", c.len());
        for (i, r) in c.rules().iter().enumerate() {
            assert_eq!(r.index(), i);
        }
        for name in ["mul-commutativity", "comm-factor", "rotation-reduce-4", "iso-vectorize-add-2"] {
            assert!(c.by_name(name).is_some(), "{name}");
        }
    }

    #[test]
    fn commutativity_sites_preorder() {
        let e = parse_expr("(* (* a b) c)").unwrap();
        let sites = match_sites(rule("mul-commutativity"), &e);
        let paths: Vec<Vec<usize>> = sites.iter().map(|s| s.path.clone()).collect();
        assert_eq!(paths, vec![vec![], vec![0]]);
        assert_eq!(sites[1].ordinal, 1);
    }

    #[test]
    fn factor_does_not_match_plain_sum() {
        let e = parse_expr("(+ a b)").unwrap();
        assert!(match_sites(rule("comm-factor"), &e).is_empty());
    }

    #[test]
    fn iso_vectorize_add() {
        assert_eq!(
            rewrite_once("iso-vectorize-add-2", "(Vec (+ a b) (+ c d))"),
            "(VecAdd (Vec a c) (Vec b d))"
        );
    }

    #[test]
    fn non_iso_vectorize_pads_identity() {
        assert_eq!(
            rewrite_once("non-iso-vectorize-mul", "(Vec (* a b) (* c d) (- f g))"),
            "(VecMul (Vec a c (- f g)) (Vec b d 1))"
        );
        assert_eq!(
            rewrite_once("non-iso-vectorize-add", "(Vec (+ a b) x (+ c d))"),
            "(VecAdd (Vec a x c) (Vec b 0 d))"
        );
    }

    #[test]
    fn comm_factor() {
        assert_eq!(rewrite_once("comm-factor", "(+ (* x y) (* x z))"), "(* x (+ y z))");
    }

    #[test]
    fn rotation_reduce_layout() {
        let out = rewrite_once("rotation-reduce-2", "(Vec (+ (* a b) (* c d)) (+ (* e f) (* g h)))");
        assert_eq!(
            out,
            "(VecAdd (VecMul (Vec a e c g) (Vec b f d h)) (<< (VecMul (Vec a e c g) (Vec b f d h)) 2))"
        );
    }

    #[test]
    fn reduce_only_at_root() {
        let e = parse_expr("(VecMul (Vec (+ (* a b) (* c d))) (Vec e))").unwrap();
        assert!(match_sites(rule("rotation-reduce-2"), &e).is_empty());
        let bad = Site { path: vec![0], ordinal: 0 };
        assert!(apply(rule("rotation-reduce-2"), &e, &bad).is_err());
    }

    #[test]
    fn invalid_site_rejected() {
        let e = parse_expr("(* a b)").unwrap();
        let site = Site { path: vec![0], ordinal: 3 };
        assert_eq!(
            apply(rule("mul-commutativity"), &e, &site),
            Err(RewriteError::InvalidSite { rule: "mul-commutativity".into(), ordinal: 3 })
        );
    }

    #[test]
    fn program_keeps_output_width() {
        let p = parse_program("(Vec (+ (* a b) (* c d) ))").unwrap();
        let q = apply_ordinal(rule("rotation-reduce-2"), &p, 0).unwrap();
        assert_eq!(q.width(), 2);
        assert_eq!(q.output_width(), 1);
    }

    #[test]
    fn locality() {
        let e = parse_expr("(VecAdd (Vec (* a 1) b) (Vec c (* d 1)))").unwrap();
        let r = rule("mul-one");
        let sites = match_sites(r, &e);
        assert_eq!(sites.len(), 2);
        let out = apply(r, &e, &sites[1]).unwrap();
        assert!(out.children()[0].ptr_eq(e.children()[0]));
    }

    #[test]
    fn match_counts_agree_with_sites() {
        let e = parse_expr("(Vec (+ (* a 1) (* a 1)) (+ b 0))").unwrap();
        let c = catalog();
        let counts = c.match_counts(&e);
        for r in c.rules() {
            assert_eq!(counts[r.index()], match_sites(r, &e).len(), "{}", r.name());
        }
    }
}
