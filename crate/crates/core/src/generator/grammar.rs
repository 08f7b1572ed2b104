//! Production-weighted typed grammar over the merge DSL.
//!
//! A [`GeneratorPolicy`] holds one logit per enabled production. Sampling is a
//! top-down derivation: at every choice point a production is drawn with
//! probability proportional to `exp(logit / T)` among the eligible ones.
//! Beyond `max_depth` only terminal productions are eligible, so every
//! derivation terminates and yields a well-typed program.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Temperature;
use crate::dsl::{render_program, BinOp, Expr, Op};

/// Scalar literals the grammar can emit.
pub const LITERALS: [f64; 12] = [-1.0, -0.5, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0, 1.5, 2.0];

pub const DEFAULT_MAX_DEPTH: usize = 8;

/// Extra initial logit given to terminal productions so that random
/// derivations stay small.
pub const TERMINAL_PRIOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonterminal {
    Vector,
    Scalar,
    List,
    Index,
    Literal,
}

impl Nonterminal {
    fn name(self) -> &'static str {
        match self {
            Nonterminal::Vector => "vector",
            Nonterminal::Scalar => "scalar",
            Nonterminal::List => "list",
            Nonterminal::Index => "index",
            Nonterminal::Literal => "literal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Production {
    /// `models[i]`; the index is chosen by the `Index` nonterminal.
    VecIndex,
    /// Accumulator of the innermost fold lambda.
    VecAcc,
    /// Element of the innermost fold lambda.
    VecItem,
    VecOp(Op),
    VecFold,
    ScalarLit,
    ScalarOp(Op),
    ScalarBin(BinOp),
    ListModels,
    ListTail,
    ListPair,
    ListTriple,
    Index(usize),
    /// Index into [`LITERALS`].
    Literal(usize),
}

const VECTOR_OPS: [Op; 9] = [
    Op::Add,
    Op::Sub,
    Op::Scale,
    Op::Hadamard,
    Op::Emax,
    Op::Emin,
    Op::MeanStack,
    Op::SumStack,
    Op::Ones,
];
const SCALAR_OPS: [Op; 6] = [Op::MeanElem, Op::Norm1, Op::Norm2, Op::Cos, Op::Clamp, Op::Length];
const BINOPS: [BinOp; 3] = [BinOp::Add, BinOp::Sub, BinOp::Mul];

fn binop_name(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "plus",
        BinOp::Sub => "minus",
        BinOp::Mul => "times",
    }
}

impl Production {
    /// Every production of the grammar for `k` input models.
    pub fn all(k: usize) -> Vec<Production> {
        let mut out = vec![Production::VecIndex, Production::VecAcc, Production::VecItem];
        out.extend(VECTOR_OPS.iter().map(|&op| Production::VecOp(op)));
        out.push(Production::VecFold);
        out.push(Production::ScalarLit);
        out.extend(SCALAR_OPS.iter().map(|&op| Production::ScalarOp(op)));
        out.extend(BINOPS.iter().map(|&op| Production::ScalarBin(op)));
        out.extend([
            Production::ListModels,
            Production::ListTail,
            Production::ListPair,
            Production::ListTriple,
        ]);
        out.extend((0..k).map(Production::Index));
        out.extend((0..LITERALS.len()).map(Production::Literal));
        out
    }

    pub fn lhs(self) -> Nonterminal {
        match self {
            Production::VecIndex
            | Production::VecAcc
            | Production::VecItem
            | Production::VecOp(_)
            | Production::VecFold => Nonterminal::Vector,
            Production::ScalarLit | Production::ScalarOp(_) | Production::ScalarBin(_) => Nonterminal::Scalar,
            Production::ListModels | Production::ListTail | Production::ListPair | Production::ListTriple => {
                Nonterminal::List
            }
            Production::Index(_) => Nonterminal::Index,
            Production::Literal(_) => Nonterminal::Literal,
        }
    }

    /// Child nonterminals in derivation order.
    pub fn rhs(self) -> Vec<Nonterminal> {
        use Nonterminal::*;
        match self {
            Production::VecIndex => vec![Index],
            Production::VecAcc | Production::VecItem => vec![],
            Production::VecOp(op) | Production::ScalarOp(op) => op
                .signature()
                .0
                .iter()
                .map(|t| match t {
                    crate::dsl::DslType::Scalar => Scalar,
                    crate::dsl::DslType::VectorList => List,
                    _ => Vector,
                })
                .collect(),
            Production::VecFold => vec![List, Vector, Vector],
            Production::ScalarLit => vec![Literal],
            Production::ScalarBin(_) => vec![Scalar, Scalar],
            Production::ListModels => vec![],
            Production::ListTail => vec![List],
            Production::ListPair => vec![Vector, Vector],
            Production::ListTriple => vec![Vector, Vector, Vector],
            Production::Index(_) | Production::Literal(_) => vec![],
        }
    }

    /// Terminal productions stay eligible at the depth limit.
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            Production::VecIndex
                | Production::VecAcc
                | Production::VecItem
                | Production::ScalarLit
                | Production::ListModels
                | Production::Index(_)
                | Production::Literal(_)
        )
    }

    fn needs_lambda(self) -> bool {
        matches!(self, Production::VecAcc | Production::VecItem)
    }

    /// Strategy word used in reports, e.g. `mean_stack` or `fold`.
    pub fn token(self) -> String {
        match self {
            Production::VecIndex => "index".into(),
            Production::VecAcc => "acc".into(),
            Production::VecItem => "item".into(),
            Production::VecOp(op) | Production::ScalarOp(op) => op.name().into(),
            Production::VecFold => "fold".into(),
            Production::ScalarLit => "lit".into(),
            Production::ScalarBin(op) => binop_name(op).into(),
            Production::ListModels => "models".into(),
            Production::ListTail => "tail".into(),
            Production::ListPair => "pair".into(),
            Production::ListTriple => "triple".into(),
            Production::Index(i) => i.to_string(),
            Production::Literal(i) => format!("{:?}", LITERALS[i]),
        }
    }
}

impl fmt::Display for Production {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.lhs().name(), self.token())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("unknown production `{0}`")]
    UnknownProduction(String),
    #[error("policy invalid: {0}")]
    InvalidPolicy(String),
    #[error("program is not derivable in the current grammar: {0}")]
    NotDerivable(String),
}

impl FromStr for Production {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, GrammarError> {
        let unknown = || GrammarError::UnknownProduction(s.to_string());
        let (lhs, rhs) = s.split_once('.').ok_or_else(unknown)?;
        let p = match (lhs, rhs) {
            ("vector", "index") => Production::VecIndex,
            ("vector", "acc") => Production::VecAcc,
            ("vector", "item") => Production::VecItem,
            ("vector", "fold") => Production::VecFold,
            ("vector", name) => Production::VecOp(
                VECTOR_OPS
                    .into_iter()
                    .find(|op| op.name() == name)
                    .ok_or_else(unknown)?,
            ),
            ("scalar", "lit") => Production::ScalarLit,
            ("scalar", name) => {
                if let Some(op) = BINOPS.into_iter().find(|&op| binop_name(op) == name) {
                    Production::ScalarBin(op)
                } else {
                    Production::ScalarOp(
                        SCALAR_OPS
                            .into_iter()
                            .find(|op| op.name() == name)
                            .ok_or_else(unknown)?,
                    )
                }
            }
            ("list", "models") => Production::ListModels,
            ("list", "tail") => Production::ListTail,
            ("list", "pair") => Production::ListPair,
            ("list", "triple") => Production::ListTriple,
            ("index", i) => Production::Index(i.parse().map_err(|_| unknown())?),
            ("literal", v) => {
                let v: f64 = v.parse().map_err(|_| unknown())?;
                Production::Literal(LITERALS.iter().position(|&l| l == v).ok_or_else(unknown)?)
            }
            _ => return Err(unknown()),
        };
        Ok(p)
    }
}

impl Serialize for Production {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Production {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The refinable generator: one logit per enabled production.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorPolicy {
    pub production_logits: BTreeMap<Production, f64>,
    pub max_depth: usize,
    pub version: u32,
    /// Number of input models the index productions cover.
    pub k: usize,
}

impl GeneratorPolicy {
    /// Full grammar with the default initial logits: 0 for every production
    /// plus [`TERMINAL_PRIOR`] on terminals.
    pub fn new(k: usize) -> Self {
        let logits = Production::all(k)
            .into_iter()
            .map(|p| (p, if p.is_terminal() { TERMINAL_PRIOR } else { 0.0 }))
            .collect();
        Self {
            production_logits: logits,
            max_depth: DEFAULT_MAX_DEPTH,
            version: 1,
            k,
        }
    }

    /// Full grammar with all logits zero.
    pub fn uniform(k: usize) -> Self {
        let mut p = Self::new(k);
        p.production_logits.values_mut().for_each(|l| *l = 0.0);
        p
    }

    /// Grammar restricted to the listed productions (logits zero).
    pub fn restricted(k: usize, productions: &[Production]) -> Result<Self, GrammarError> {
        let p = Self {
            production_logits: productions.iter().map(|&p| (p, 0.0)).collect(),
            max_depth: DEFAULT_MAX_DEPTH,
            version: 1,
            k,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn logit(&self, p: Production) -> Option<f64> {
        self.production_logits.get(&p).copied()
    }

    pub fn enabled(&self) -> impl Iterator<Item = Production> + '_ {
        self.production_logits.keys().copied()
    }

    fn productions_of(&self, nt: Nonterminal) -> impl Iterator<Item = (Production, f64)> + '_ {
        self.production_logits
            .iter()
            .filter(move |(p, _)| p.lhs() == nt)
            .map(|(p, l)| (*p, *l))
    }

    /// Checks that every nonterminal reachable from `Vector` can always
    /// finish: it needs a terminal production usable outside any lambda.
    pub fn validate(&self) -> Result<(), GrammarError> {
        let invalid = |m: String| Err(GrammarError::InvalidPolicy(m));
        if self.k == 0 {
            return invalid("k must be positive".into());
        }
        for (p, l) in &self.production_logits {
            if !l.is_finite() {
                return invalid(format!("logit of {p} is not finite"));
            }
            if let Production::Index(i) = p {
                if *i >= self.k {
                    return invalid(format!("{p} is out of range for k = {}", self.k));
                }
            }
        }
        let mut reachable = BTreeSet::from([Nonterminal::Vector]);
        let mut frontier = vec![Nonterminal::Vector];
        while let Some(nt) = frontier.pop() {
            let mut finishes = false;
            for (p, _) in self.productions_of(nt) {
                if p.is_terminal() && !p.needs_lambda() {
                    finishes = true;
                }
                for child in p.rhs() {
                    if reachable.insert(child) {
                        frontier.push(child);
                    }
                }
            }
            if !finishes {
                return invalid(format!(
                    "nonterminal `{}` has no terminal production usable outside a lambda",
                    nt.name()
                ));
            }
        }
        Ok(())
    }

    /// Sampling distribution at one choice point.
    pub fn distribution(
        &self,
        nt: Nonterminal,
        temperature: Temperature,
        at_depth_limit: bool,
        in_lambda: bool,
    ) -> Vec<(Production, f64)> {
        let eligible: Vec<(Production, f64)> = self
            .productions_of(nt)
            .filter(|(p, _)| (!at_depth_limit || p.is_terminal()) && (in_lambda || !p.needs_lambda()))
            .collect();
        let max = eligible.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
        let t = temperature.value();
        let weights: Vec<f64> = eligible.iter().map(|(_, l)| ((l - max) / t).exp()).collect();
        let total: f64 = weights.iter().sum();
        eligible
            .iter()
            .zip(weights)
            .map(|((p, _), w)| (*p, w / total))
            .collect()
    }

    /// Draws one program body.
    pub fn sample_expr<R: Rng + ?Sized>(&self, temperature: Temperature, rng: &mut R) -> Expr {
        let mut s = Sampler {
            policy: self,
            temperature,
            rng,
            lambdas: 0,
        };
        s.vector(0)
    }

    /// Draws one program and renders its source text.
    pub fn sample_program<R: Rng + ?Sized>(&self, temperature: Temperature, rng: &mut R) -> String {
        render_program(&self.sample_expr(temperature, rng))
    }

    /// Productions used by `expr`, in pre-order, recovered by re-deriving the
    /// expression in this grammar.
    pub fn derivation(&self, expr: &Expr) -> Result<Vec<Production>, GrammarError> {
        let mut out = Vec::new();
        Rederive {
            policy: self,
            out: &mut out,
            scope: Vec::new(),
        }
        .vector(expr)?;
        Ok(out)
    }
}

struct Sampler<'a, R: ?Sized> {
    policy: &'a GeneratorPolicy,
    temperature: Temperature,
    rng: &'a mut R,
    lambdas: usize,
}

fn binder_names(level: usize) -> (String, String) {
    if level == 0 {
        ("acc".into(), "x".into())
    } else {
        (format!("acc{level}"), format!("x{level}"))
    }
}

impl<R: Rng + ?Sized> Sampler<'_, R> {
    fn choose(&mut self, nt: Nonterminal, depth: usize) -> Production {
        let dist = self.policy.distribution(
            nt,
            self.temperature,
            depth >= self.policy.max_depth,
            self.lambdas > 0,
        );
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for (p, w) in &dist {
            acc += w;
            if u < acc {
                return *p;
            }
        }
        dist.last().expect("validated policy has an eligible production").0
    }

    fn vector(&mut self, depth: usize) -> Expr {
        match self.choose(Nonterminal::Vector, depth) {
            Production::VecIndex => match self.choose(Nonterminal::Index, depth + 1) {
                Production::Index(i) => Expr::Index(i),
                other => unreachable!("index nonterminal produced {other}"),
            },
            Production::VecAcc => Expr::Var(binder_names(self.lambdas - 1).0),
            Production::VecItem => Expr::Var(binder_names(self.lambdas - 1).1),
            Production::VecOp(op) => self.call(op, depth),
            Production::VecFold => {
                let list = self.list(depth + 1);
                let init = self.vector(depth + 1);
                let (acc, item) = binder_names(self.lambdas);
                self.lambdas += 1;
                let body = self.vector(depth + 1);
                self.lambdas -= 1;
                Expr::Fold {
                    list: Box::new(list),
                    init: Box::new(init),
                    acc,
                    item,
                    body: Box::new(body),
                }
            }
            other => unreachable!("vector nonterminal produced {other}"),
        }
    }

    fn scalar(&mut self, depth: usize) -> Expr {
        match self.choose(Nonterminal::Scalar, depth) {
            Production::ScalarLit => match self.choose(Nonterminal::Literal, depth + 1) {
                Production::Literal(i) => Expr::Lit(LITERALS[i]),
                other => unreachable!("literal nonterminal produced {other}"),
            },
            Production::ScalarOp(op) => self.call(op, depth),
            Production::ScalarBin(op) => {
                let a = self.scalar(depth + 1);
                let b = self.scalar(depth + 1);
                Expr::Binary(op, Box::new(a), Box::new(b))
            }
            other => unreachable!("scalar nonterminal produced {other}"),
        }
    }

    fn list(&mut self, depth: usize) -> Expr {
        match self.choose(Nonterminal::List, depth) {
            Production::ListModels => Expr::Models,
            Production::ListTail => Expr::call(Op::Tail, vec![self.list(depth + 1)]),
            Production::ListPair => Expr::List(vec![self.vector(depth + 1), self.vector(depth + 1)]),
            Production::ListTriple => Expr::List(vec![
                self.vector(depth + 1),
                self.vector(depth + 1),
                self.vector(depth + 1),
            ]),
            other => unreachable!("list nonterminal produced {other}"),
        }
    }

    fn call(&mut self, op: Op, depth: usize) -> Expr {
        let args = Production::VecOp(op)
            .rhs()
            .into_iter()
            .map(|nt| match nt {
                Nonterminal::Scalar => self.scalar(depth + 1),
                Nonterminal::List => self.list(depth + 1),
                _ => self.vector(depth + 1),
            })
            .collect();
        Expr::call(op, args)
    }
}

struct Rederive<'a> {
    policy: &'a GeneratorPolicy,
    out: &'a mut Vec<Production>,
    scope: Vec<(String, String)>,
}

impl Rederive<'_> {
    fn push(&mut self, p: Production) -> Result<(), GrammarError> {
        if self.policy.logit(p).is_none() {
            return Err(GrammarError::NotDerivable(format!("production {p} is disabled")));
        }
        self.out.push(p);
        Ok(())
    }

    fn fail<T>(what: &Expr, wanted: &str) -> Result<T, GrammarError> {
        Err(GrammarError::NotDerivable(format!("`{what}` is not a {wanted} production")))
    }

    fn vector(&mut self, e: &Expr) -> Result<(), GrammarError> {
        match e {
            Expr::Index(i) => {
                self.push(Production::VecIndex)?;
                self.push(Production::Index(*i))
            }
            Expr::Var(name) => match self.scope.last() {
                Some((acc, _)) if acc == name => self.push(Production::VecAcc),
                Some((_, item)) if item == name => self.push(Production::VecItem),
                _ => Err(GrammarError::NotDerivable(format!(
                    "`{name}` does not refer to the innermost lambda"
                ))),
            },
            Expr::Call(op, args) if VECTOR_OPS.contains(op) => {
                self.push(Production::VecOp(*op))?;
                self.args(*op, args)
            }
            Expr::Fold {
                list,
                init,
                acc,
                item,
                body,
            } => {
                self.push(Production::VecFold)?;
                self.list(list)?;
                self.vector(init)?;
                self.scope.push((acc.clone(), item.clone()));
                let r = self.vector(body);
                self.scope.pop();
                r
            }
            _ => Self::fail(e, "vector"),
        }
    }

    fn scalar(&mut self, e: &Expr) -> Result<(), GrammarError> {
        match e {
            Expr::Lit(v) => {
                let i = LITERALS
                    .iter()
                    .position(|l| l == v)
                    .ok_or_else(|| GrammarError::NotDerivable(format!("literal {v} is not in the grammar")))?;
                self.push(Production::ScalarLit)?;
                self.push(Production::Literal(i))
            }
            Expr::Call(op, args) if SCALAR_OPS.contains(op) => {
                self.push(Production::ScalarOp(*op))?;
                self.args(*op, args)
            }
            Expr::Binary(op, a, b) => {
                self.push(Production::ScalarBin(*op))?;
                self.scalar(a)?;
                self.scalar(b)
            }
            _ => Self::fail(e, "scalar"),
        }
    }

    fn list(&mut self, e: &Expr) -> Result<(), GrammarError> {
        match e {
            Expr::Models => self.push(Production::ListModels),
            Expr::Call(Op::Tail, args) => {
                self.push(Production::ListTail)?;
                self.list(&args[0])
            }
            Expr::List(items) if items.len() == 2 || items.len() == 3 => {
                self.push(if items.len() == 2 {
                    Production::ListPair
                } else {
                    Production::ListTriple
                })?;
                items.iter().try_for_each(|i| self.vector(i))
            }
            _ => Self::fail(e, "list"),
        }
    }

    fn args(&mut self, op: Op, args: &[Expr]) -> Result<(), GrammarError> {
        for (nt, arg) in Production::VecOp(op).rhs().into_iter().zip(args) {
            match nt {
                Nonterminal::Scalar => self.scalar(arg)?,
                Nonterminal::List => self.list(arg)?,
                _ => self.vector(arg)?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, MergeProgram, Provenance};
    use crate::rng::substream;

    fn t(v: f64) -> Temperature {
        Temperature::new(v).unwrap()
    }

    #[test]
    fn production_names_round_trip() {
        for p in Production::all(3) {
            assert_eq!(p.to_string().parse::<Production>().unwrap(), p, "{p}");
        }
        assert!("vector.nope".parse::<Production>().is_err());
        assert!("literal.0.7".parse::<Production>().is_err());
        assert_eq!("literal.-0.5".parse::<Production>().unwrap(), Production::Literal(1));
    }

    #[test]
    fn default_policy_is_valid() {
        GeneratorPolicy::new(3).validate().unwrap();
        GeneratorPolicy::uniform(2).validate().unwrap();
        let json = serde_json::to_string(&GeneratorPolicy::new(3)).unwrap();
        assert_eq!(serde_json::from_str::<GeneratorPolicy>(&json).unwrap(), GeneratorPolicy::new(3));
    }

    #[test]
    fn restricted_policies_must_terminate() {
        GeneratorPolicy::restricted(3, &[Production::VecIndex, Production::Index(0)]).unwrap();
        assert!(GeneratorPolicy::restricted(3, &[Production::VecIndex]).is_err());
        assert!(GeneratorPolicy::restricted(3, &[Production::VecOp(Op::MeanStack), Production::ListModels]).is_err());
        assert!(GeneratorPolicy::restricted(3, &[Production::VecIndex, Production::Index(4)]).is_err());
        assert!(GeneratorPolicy::restricted(
            3,
            &[
                Production::VecIndex,
                Production::Index(0),
                Production::VecOp(Op::Scale)
            ]
        )
        .is_err());
    }

    #[test]
    fn forced_identity_grammar() {
        let p = GeneratorPolicy::restricted(3, &[Production::VecIndex, Production::Index(0)]).unwrap();
        let mut rng = substream(1, 0, 0, 0);
        for _ in 0..20 {
            assert_eq!(p.sample_program(t(1.0), &mut rng), "merge(models) = models[0]");
        }
    }

    #[test]
    fn samples_compile_and_rederive() {
        let p = GeneratorPolicy::new(3);
        for i in 0..500 {
            let mut rng = substream(42, 0, i, 0);
            let src = p.sample_program(t(1.2), &mut rng);
            let prog = MergeProgram::compile(&src, Provenance::default()).unwrap_or_else(|e| panic!("{src}: {e}"));
            let expr = p.sample_expr(t(1.2), &mut substream(42, 0, i, 0));
            assert_eq!(prog.expr(), &expr);
            let derivation = p.derivation(prog.expr()).unwrap();
            assert_eq!(derivation.len(), {
                // one production per AST node except the lambda, plus one
                // for each index and literal choice
                let mut n = 0;
                prog.typed().walk(&mut |node| {
                    n += match node.node {
                        crate::dsl::Node::Lambda(_) => 0,
                        crate::dsl::Node::Index(_) | crate::dsl::Node::Lit(_) => 2,
                        _ => 1,
                    }
                });
                n
            });
        }
    }

    #[test]
    fn depth_limit_forces_terminals() {
        let mut p = GeneratorPolicy::uniform(3);
        p.max_depth = 0;
        let mut rng = substream(9, 0, 0, 0);
        for _ in 0..50 {
            let e = p.sample_expr(t(1.0), &mut rng);
            assert!(matches!(e, Expr::Index(_)), "{e}");
        }
    }

    #[test]
    fn rederivation_failures() {
        let p = GeneratorPolicy::new(3);
        let not = |src: &str| {
            matches!(
                p.derivation(&parse(src).unwrap()),
                Err(GrammarError::NotDerivable(_))
            )
        };
        assert!(not("merge(models) = scale(0.7, models[0])"));
        assert!(not("merge(models) = models[5]"));
        assert!(not("merge(models) = mean_stack([models[0]])"));
        assert!(not("merge(models) = fold(models, models[0], (a, b) -> fold(models, a, (c, d) -> a))"));
        assert!(!not("merge(models) = fold(models, models[0], (a, b) -> fold(models, a, (c, d) -> c))"));
        let restricted = GeneratorPolicy::restricted(3, &[Production::VecIndex, Production::Index(0)]).unwrap();
        assert!(restricted.derivation(&parse("merge(models) = models[1]").unwrap()).is_err());
    }

    #[test]
    fn distribution_respects_temperature() {
        let mut p = GeneratorPolicy::uniform(2);
        p.production_logits.insert(Production::ListModels, 1.0);
        let cold = p.distribution(Nonterminal::List, t(0.01), false, false);
        let hot = p.distribution(Nonterminal::List, t(100.0), false, false);
        let models = |d: &[(Production, f64)]| d.iter().find(|(q, _)| *q == Production::ListModels).unwrap().1;
        assert!(models(&cold) > 0.999);
        assert!((models(&hot) - 0.25).abs() < 0.01);
        let at_limit = p.distribution(Nonterminal::List, t(1.0), true, false);
        assert_eq!(at_limit, vec![(Production::ListModels, 1.0)]);
    }
}
