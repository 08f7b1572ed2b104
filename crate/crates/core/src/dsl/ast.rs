use std::fmt;

use serde::{Deserialize, Serialize};

/// Static type of a DSL expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DslType {
    Scalar,
    Vector,
    VectorList,
    /// The fold lambda, `(Vector, Vector) -> Vector`.
    Fn2,
}

impl fmt::Display for DslType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DslType::Scalar => "Scalar",
            DslType::Vector => "Vector",
            DslType::VectorList => "VectorList",
            DslType::Fn2 => "Fn2(Vector,Vector->Vector)",
        };
        f.write_str(s)
    }
}

/// Built-in operators callable as `name(args)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    Add,
    Sub,
    Scale,
    Hadamard,
    Emax,
    Emin,
    MeanElem,
    Norm1,
    Norm2,
    Cos,
    MeanStack,
    SumStack,
    Ones,
    Clamp,
    Length,
    Tail,
}

impl Op {
    pub const ALL: [Op; 16] = [
        Op::Add,
        Op::Sub,
        Op::Scale,
        Op::Hadamard,
        Op::Emax,
        Op::Emin,
        Op::MeanElem,
        Op::Norm1,
        Op::Norm2,
        Op::Cos,
        Op::MeanStack,
        Op::SumStack,
        Op::Ones,
        Op::Clamp,
        Op::Length,
        Op::Tail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Scale => "scale",
            Op::Hadamard => "hadamard",
            Op::Emax => "emax",
            Op::Emin => "emin",
            Op::MeanElem => "mean_elem",
            Op::Norm1 => "norm1",
            Op::Norm2 => "norm2",
            Op::Cos => "cos",
            Op::MeanStack => "mean_stack",
            Op::SumStack => "sum_stack",
            Op::Ones => "ones",
            Op::Clamp => "clamp",
            Op::Length => "length",
            Op::Tail => "tail",
        }
    }

    pub fn from_name(name: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.name() == name)
    }

    /// Argument types and result type.
    pub fn signature(self) -> (&'static [DslType], DslType) {
        use DslType::*;
        match self {
            Op::Add | Op::Sub | Op::Hadamard | Op::Emax | Op::Emin => (&[Vector, Vector], Vector),
            Op::Scale => (&[Scalar, Vector], Vector),
            Op::MeanElem | Op::Norm1 | Op::Norm2 => (&[Vector], Scalar),
            Op::Cos => (&[Vector, Vector], Scalar),
            Op::MeanStack | Op::SumStack => (&[VectorList], Vector),
            Op::Ones => (&[Scalar], Vector),
            Op::Clamp => (&[Scalar, Scalar, Scalar], Scalar),
            Op::Length => (&[VectorList], Scalar),
            Op::Tail => (&[VectorList], VectorList),
        }
    }

    pub fn arity(self) -> usize {
        self.signature().0.len()
    }

    /// Operators whose result is invariant (bit for bit) under argument swap.
    pub fn is_commutative(self) -> bool {
        matches!(self, Op::Add | Op::Emax | Op::Emin | Op::Hadamard)
    }
}

/// Infix scalar arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Mul)
    }
}

/// Untyped expression tree as written in source, binder names intact.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Models,
    Index(usize),
    Lit(f64),
    Var(String),
    Call(Op, Vec<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    List(Vec<Expr>),
    Fold {
        list: Box<Expr>,
        init: Box<Expr>,
        acc: String,
        item: String,
        body: Box<Expr>,
    },
}

impl Expr {
    pub fn call(op: Op, args: Vec<Expr>) -> Expr {
        Expr::Call(op, args)
    }

    pub fn node_count(&self) -> usize {
        1 + match self {
            Expr::Models | Expr::Index(_) | Expr::Lit(_) | Expr::Var(_) => 0,
            Expr::Call(_, args) | Expr::List(args) => args.iter().map(Expr::node_count).sum(),
            Expr::Binary(_, a, b) => a.node_count() + b.node_count(),
            // the lambda counts as a node of its own
            Expr::Fold { list, init, body, .. } => 1 + list.node_count() + init.node_count() + body.node_count(),
        }
    }
}

/// Formats a literal so that it lexes back to the identical `f64`.
pub(crate) fn format_lit(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:?}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Models => f.write_str("models"),
            Expr::Index(i) => write!(f, "models[{i}]"),
            Expr::Lit(v) => f.write_str(&format_lit(*v)),
            Expr::Var(name) => f.write_str(name),
            Expr::Call(op, args) => {
                write!(f, "{}(", op.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::List(items) => {
                f.write_str("[")?;
                for (i, a) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str("]")
            }
            Expr::Fold {
                list,
                init,
                acc,
                item,
                body,
            } => write!(f, "fold({list}, {init}, ({acc}, {item}) -> {body})"),
        }
    }
}

/// Renders a complete program from its body expression.
pub fn render_program(body: &Expr) -> String {
    format!("merge(models) = {body}")
}

/// Expression tree annotated with types; variables are de Bruijn indices
/// (0 = the innermost bound name, counting the item binder before the
/// accumulator of each lambda).
#[derive(Debug, Clone, PartialEq)]
pub struct Typed {
    pub ty: DslType,
    pub node: Node,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Models,
    Index(usize),
    Lit(f64),
    Var(usize),
    Call(Op, Vec<Typed>),
    Binary(BinOp, Box<Typed>, Box<Typed>),
    List(Vec<Typed>),
    Fold {
        list: Box<Typed>,
        init: Box<Typed>,
        lambda: Box<Typed>,
    },
    /// Body of a fold lambda; always typed `Fn2`.
    Lambda(Box<Typed>),
}

impl Typed {
    pub fn node_count(&self) -> usize {
        1 + match &self.node {
            Node::Models | Node::Index(_) | Node::Lit(_) | Node::Var(_) => 0,
            Node::Call(_, args) | Node::List(args) => args.iter().map(Typed::node_count).sum(),
            Node::Binary(_, a, b) => a.node_count() + b.node_count(),
            Node::Fold { list, init, lambda } => list.node_count() + init.node_count() + lambda.node_count(),
            Node::Lambda(body) => body.node_count(),
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Typed)) {
        visit(self);
        match &self.node {
            Node::Models | Node::Index(_) | Node::Lit(_) | Node::Var(_) => {}
            Node::Call(_, args) | Node::List(args) => args.iter().for_each(|a| a.walk(visit)),
            Node::Binary(_, a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            Node::Fold { list, init, lambda } => {
                list.walk(visit);
                init.walk(visit);
                lambda.walk(visit);
            }
            Node::Lambda(body) => body.walk(visit),
        }
    }
}
