//! The merge-program language.
//!
//! A program maps the list of candidate task vectors (`models`) to a single
//! merged task vector:
//!
//! ```text
//! # Algorithm A: halve towards each later model's mean
//! merge(models) = fold(tail(models), models[0],
//!                      (acc, x) -> scale(0.5, add(acc, ones(mean_elem(x)))))
//! ```
//!
//! Programs are parsed, typechecked, hashed in canonical form for duplicate
//! detection, and interpreted under a step budget. The language has no
//! recursion and no division, so every run terminates and the only numeric
//! failure is a non-finite intermediate.

mod ast;
mod canon;
mod interp;
mod lexer;
mod parser;
mod typecheck;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{render_program, BinOp, DslType, Expr, Node, Op, Typed};
pub use canon::{canonical_form, canonical_hash, CanonicalHash};
pub use interp::{evaluate, EvalBudget};
pub use lexer::Pos;
pub use parser::parse;
pub use typecheck::typecheck;

use crate::merge::TaskVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("unknown identifier `{name}` at {line}:{col}")]
    UnknownIdentifier { name: String, line: usize, col: usize },
    #[error("`{name}` takes {expected} argument(s), got {found} at {line}:{col}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        line: usize,
        col: usize,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypeError {
    #[error("program must produce a Vector, found {0}")]
    ResultType(DslType),
    #[error("{context}: expected {expected}, found {found}")]
    Mismatch {
        context: String,
        expected: DslType,
        found: DslType,
    },
    #[error("`{name}` takes {expected} argument(s), got {found}")]
    Arity { name: String, expected: usize, found: usize },
    #[error("unbound variable `{0}`")]
    Unbound(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("evaluation budget exhausted")]
    Timeout,
    #[error("index {index} out of range for {len} models")]
    Index { index: usize, len: usize },
    #[error("non-finite value produced by `{0}`")]
    NonFinite(&'static str),
    #[error("`{0}` applied to an empty list")]
    EmptyList(&'static str),
    #[error("no input models")]
    NoModels,
    #[error("input models have mismatched dimensions ({expected} vs {found})")]
    Dimension { expected: usize, found: usize },
    #[error("unbound variable index {0}")]
    UnboundVariable(usize),
    #[error("ill-typed program reached the interpreter")]
    ResultType,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// Where a program came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Grammar,
    Remote,
    Fixture,
    #[default]
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub iteration: u32,
    pub generator: GeneratorKind,
}

/// A parsed, typechecked candidate merge algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeProgram {
    source: String,
    expr: Expr,
    typed: Typed,
    hash: CanonicalHash,
    pub provenance: Provenance,
}

impl MergeProgram {
    pub fn compile(source: impl Into<String>, provenance: Provenance) -> Result<Self, CompileError> {
        let source = source.into();
        let expr = parse(&source)?;
        let typed = typecheck(&expr)?;
        let hash = canonical_hash(&typed);
        Ok(Self {
            source,
            expr,
            typed,
            hash,
            provenance,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn typed(&self) -> &Typed {
        &self.typed
    }

    pub fn hash(&self) -> CanonicalHash {
        self.hash
    }

    /// Source re-rendered from the AST, without comments or original layout.
    pub fn pretty(&self) -> String {
        render_program(&self.expr)
    }

    pub fn evaluate(&self, models: &[TaskVector], budget: EvalBudget) -> Result<TaskVector, EvalError> {
        evaluate(&self.typed, models, budget)
    }

    /// Operator names used by the program, one entry per occurrence
    /// (`fold` included).
    pub fn op_tokens(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        self.typed.walk(&mut |n| match &n.node {
            Node::Call(op, _) => out.push(op.name()),
            Node::Fold { .. } => out.push("fold"),
            _ => {}
        });
        out
    }
}

impl fmt::Display for MergeProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}
