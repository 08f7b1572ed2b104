use super::ast::{DslType, Expr, Node, Typed};
use super::TypeError;

/// Annotates every node with its type and resolves binders to de Bruijn
/// indices. The program as a whole must produce a `Vector`.
pub fn typecheck(expr: &Expr) -> Result<Typed, TypeError> {
    let typed = check(expr, &mut Vec::new())?;
    if typed.ty != DslType::Vector {
        return Err(TypeError::ResultType(typed.ty));
    }
    Ok(typed)
}

fn expect(context: &str, expected: DslType, got: &Typed) -> Result<(), TypeError> {
    if got.ty == expected {
        Ok(())
    } else {
        Err(TypeError::Mismatch {
            context: context.to_string(),
            expected,
            found: got.ty,
        })
    }
}

fn check(expr: &Expr, scope: &mut Vec<String>) -> Result<Typed, TypeError> {
    let (ty, node) = match expr {
        Expr::Models => (DslType::VectorList, Node::Models),
        Expr::Index(i) => (DslType::Vector, Node::Index(*i)),
        Expr::Lit(v) => (DslType::Scalar, Node::Lit(*v)),
        Expr::Var(name) => {
            let depth = scope
                .iter()
                .rev()
                .position(|n| n == name)
                .ok_or_else(|| TypeError::Unbound(name.clone()))?;
            (DslType::Vector, Node::Var(depth))
        }
        Expr::Call(op, args) => {
            let (params, ret) = op.signature();
            if params.len() != args.len() {
                return Err(TypeError::Arity {
                    name: op.name().to_string(),
                    expected: params.len(),
                    found: args.len(),
                });
            }
            let typed: Vec<Typed> = args.iter().map(|a| check(a, scope)).collect::<Result<_, _>>()?;
            for (i, (param, arg)) in params.iter().zip(&typed).enumerate() {
                expect(&format!("argument {} of {}", i + 1, op.name()), *param, arg)?;
            }
            (ret, Node::Call(*op, typed))
        }
        Expr::Binary(op, a, b) => {
            let a = check(a, scope)?;
            let b = check(b, scope)?;
            expect(&format!("left operand of `{}`", op.symbol()), DslType::Scalar, &a)?;
            expect(&format!("right operand of `{}`", op.symbol()), DslType::Scalar, &b)?;
            (DslType::Scalar, Node::Binary(*op, Box::new(a), Box::new(b)))
        }
        Expr::List(items) => {
            let typed: Vec<Typed> = items.iter().map(|a| check(a, scope)).collect::<Result<_, _>>()?;
            for item in &typed {
                expect("list element", DslType::Vector, item)?;
            }
            (DslType::VectorList, Node::List(typed))
        }
        Expr::Fold {
            list,
            init,
            acc,
            item,
            body,
        } => {
            let list = check(list, scope)?;
            expect("fold list", DslType::VectorList, &list)?;
            let init = check(init, scope)?;
            expect("fold initial value", DslType::Vector, &init)?;
            scope.push(acc.clone());
            scope.push(item.clone());
            let body = check(body, scope);
            scope.truncate(scope.len() - 2);
            let body = body?;
            expect("fold lambda body", DslType::Vector, &body)?;
            let lambda = Typed {
                ty: DslType::Fn2,
                node: Node::Lambda(Box::new(body)),
            };
            (
                DslType::Vector,
                Node::Fold {
                    list: Box::new(list),
                    init: Box::new(init),
                    lambda: Box::new(lambda),
                },
            )
        }
    };
    Ok(Typed { ty, node })
}
