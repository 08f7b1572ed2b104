use serde::{Deserialize, Serialize};

use super::ast::{Node, Op, Typed};
use super::EvalError;
use crate::merge::TaskVector;

/// Maximum number of node evaluations a single program run may perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct EvalBudget(u64);

impl EvalBudget {
    pub fn new(max_steps: u64) -> Result<Self, String> {
        if max_steps == 0 {
            return Err("evaluation budget must be at least 1 step".into());
        }
        Ok(Self(max_steps))
    }

    /// `10_000 * K * d` node evaluations.
    pub fn default_for(k: usize, d: usize) -> Self {
        Self((10_000u64 * k as u64 * d as u64).max(1))
    }

    pub fn max_steps(self) -> u64 {
        self.0
    }
}

impl TryFrom<u64> for EvalBudget {
    type Error = String;

    fn try_from(v: u64) -> Result<Self, String> {
        Self::new(v)
    }
}

impl From<EvalBudget> for u64 {
    fn from(b: EvalBudget) -> u64 {
        b.0
    }
}

#[derive(Debug, Clone)]
enum Value {
    Scalar(f64),
    Vector(Vec<f64>),
    List(Vec<Vec<f64>>),
}

struct Interp<'a> {
    models: &'a [TaskVector],
    dim: usize,
    steps_left: u64,
    env: Vec<Vec<f64>>,
}

/// Runs a well-typed program on `models` under `budget`.
///
/// Every node evaluation consumes one step; running out yields
/// [`EvalError::Timeout`]. Non-finite intermediates are errors, never values.
pub fn evaluate(program: &Typed, models: &[TaskVector], budget: EvalBudget) -> Result<TaskVector, EvalError> {
    let dim = match models.first() {
        Some(m) => m.len(),
        None => return Err(EvalError::NoModels),
    };
    if let Some(bad) = models.iter().find(|m| m.len() != dim) {
        return Err(EvalError::Dimension {
            expected: dim,
            found: bad.len(),
        });
    }
    let mut interp = Interp {
        models,
        dim,
        steps_left: budget.max_steps(),
        env: Vec::new(),
    };
    match interp.eval(program)? {
        Value::Vector(v) => TaskVector::new(v).map_err(|_| EvalError::NonFinite("result")),
        _ => Err(EvalError::ResultType),
    }
}

fn finite_scalar(op: &'static str, v: f64) -> Result<Value, EvalError> {
    if v.is_finite() {
        Ok(Value::Scalar(v))
    } else {
        Err(EvalError::NonFinite(op))
    }
}

fn finite_vector(op: &'static str, v: Vec<f64>) -> Result<Value, EvalError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(Value::Vector(v))
    } else {
        Err(EvalError::NonFinite(op))
    }
}

fn zip_with(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Interp<'_> {
    fn tick(&mut self) -> Result<(), EvalError> {
        if self.steps_left == 0 {
            return Err(EvalError::Timeout);
        }
        self.steps_left -= 1;
        Ok(())
    }

    fn scalar(&mut self, t: &Typed) -> Result<f64, EvalError> {
        match self.eval(t)? {
            Value::Scalar(s) => Ok(s),
            _ => Err(EvalError::ResultType),
        }
    }

    fn vector(&mut self, t: &Typed) -> Result<Vec<f64>, EvalError> {
        match self.eval(t)? {
            Value::Vector(v) => Ok(v),
            _ => Err(EvalError::ResultType),
        }
    }

    fn list(&mut self, t: &Typed) -> Result<Vec<Vec<f64>>, EvalError> {
        match self.eval(t)? {
            Value::List(l) => Ok(l),
            _ => Err(EvalError::ResultType),
        }
    }

    fn eval(&mut self, t: &Typed) -> Result<Value, EvalError> {
        self.tick()?;
        match &t.node {
            Node::Models => Ok(Value::List(self.models.iter().map(|m| m.values().to_vec()).collect())),
            Node::Index(i) => self
                .models
                .get(*i)
                .map(|m| Value::Vector(m.values().to_vec()))
                .ok_or(EvalError::Index {
                    index: *i,
                    len: self.models.len(),
                }),
            Node::Lit(v) => Ok(Value::Scalar(*v)),
            Node::Var(k) => {
                let slot = self.env.len().checked_sub(k + 1).ok_or(EvalError::UnboundVariable(*k))?;
                Ok(Value::Vector(self.env[slot].clone()))
            }
            Node::Binary(op, a, b) => {
                let a = self.scalar(a)?;
                let b = self.scalar(b)?;
                finite_scalar(op.symbol(), op.apply(a, b))
            }
            Node::List(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.vector(item)?);
                }
                Ok(Value::List(out))
            }
            Node::Fold { list, init, lambda } => {
                let list = self.list(list)?;
                let mut acc = self.vector(init)?;
                let body = match &lambda.node {
                    Node::Lambda(body) => body,
                    _ => return Err(EvalError::ResultType),
                };
                for item in list {
                    // the lambda node itself is charged once per application
                    self.tick()?;
                    self.env.push(acc);
                    self.env.push(item);
                    let out = self.vector(body);
                    self.env.truncate(self.env.len() - 2);
                    acc = out?;
                }
                Ok(Value::Vector(acc))
            }
            Node::Lambda(_) => Err(EvalError::ResultType),
            Node::Call(op, args) => self.call(*op, args),
        }
    }

    fn call(&mut self, op: Op, args: &[Typed]) -> Result<Value, EvalError> {
        let name = op.name();
        match op {
            Op::Add | Op::Sub | Op::Hadamard | Op::Emax | Op::Emin => {
                let a = self.vector(&args[0])?;
                let b = self.vector(&args[1])?;
                let out = match op {
                    Op::Add => zip_with(&a, &b, |x, y| x + y),
                    Op::Sub => zip_with(&a, &b, |x, y| x - y),
                    Op::Hadamard => zip_with(&a, &b, |x, y| x * y),
                    Op::Emax => zip_with(&a, &b, f64::max),
                    _ => zip_with(&a, &b, f64::min),
                };
                finite_vector(name, out)
            }
            Op::Scale => {
                let s = self.scalar(&args[0])?;
                let v = self.vector(&args[1])?;
                finite_vector(name, v.into_iter().map(|x| s * x).collect())
            }
            Op::MeanElem => {
                let v = self.vector(&args[0])?;
                finite_scalar(name, v.iter().sum::<f64>() / v.len() as f64)
            }
            Op::Norm1 => {
                let v = self.vector(&args[0])?;
                finite_scalar(name, v.iter().map(|x| x.abs()).sum())
            }
            Op::Norm2 => {
                let v = self.vector(&args[0])?;
                finite_scalar(name, norm2(&v))
            }
            Op::Cos => {
                let a = self.vector(&args[0])?;
                let b = self.vector(&args[1])?;
                let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                finite_scalar(name, dot / (norm2(&a) * norm2(&b)))
            }
            Op::MeanStack | Op::SumStack => {
                let list = self.list(&args[0])?;
                if list.is_empty() {
                    return Err(EvalError::EmptyList(name));
                }
                let mut out = vec![0.0; self.dim];
                for v in &list {
                    for (o, x) in out.iter_mut().zip(v) {
                        *o += x;
                    }
                }
                if op == Op::MeanStack {
                    let k = list.len() as f64;
                    out.iter_mut().for_each(|o| *o /= k);
                }
                finite_vector(name, out)
            }
            Op::Ones => {
                let s = self.scalar(&args[0])?;
                Ok(Value::Vector(vec![s; self.dim]))
            }
            Op::Clamp => {
                let x = self.scalar(&args[0])?;
                let lo = self.scalar(&args[1])?;
                let hi = self.scalar(&args[2])?;
                Ok(Value::Scalar(x.max(lo).min(hi)))
            }
            Op::Length => {
                let list = self.list(&args[0])?;
                Ok(Value::Scalar(list.len() as f64))
            }
            Op::Tail => {
                let mut list = self.list(&args[0])?;
                if !list.is_empty() {
                    list.remove(0);
                }
                Ok(Value::List(list))
            }
        }
    }
}
