//! Recursive-descent parser for merge programs.
//!
//! ```text
//! program := "merge" "(" "models" ")" "=" expr
//! expr    := term (("+" | "-") term)*
//! term    := unary ("*" unary)*
//! unary   := "-" unary | primary
//! primary := number | "(" expr ")" | "[" expr ("," expr)* "]"
//!          | "models" ["[" int "]"] | ident
//!          | "fold" "(" expr "," expr "," "(" ident "," ident ")" "->" expr ")"
//!          | op "(" expr ("," expr)* ")"
//! ```
//!
//! Name resolution happens here: unknown operators, unbound variables and
//! arity mismatches are reported as parse errors.

use super::ast::{BinOp, Expr, Op};
use super::lexer::{tokenize, Pos, Spanned, Tok};
use super::ParseError;

const RESERVED: [&str; 3] = ["merge", "models", "fold"];

struct Parser {
    toks: Vec<Spanned>,
    at: usize,
    scope: Vec<String>,
}

pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: tokenize(source)?,
        at: 0,
        scope: Vec::new(),
    };
    p.expect_word("merge")?;
    p.expect(Tok::LParen)?;
    p.expect_word("models")?;
    p.expect(Tok::RParen)?;
    p.expect(Tok::Eq)?;
    let body = p.expr()?;
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected("end of input"));
    }
    Ok(body)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let pos = self.pos();
        ParseError::Syntax {
            line: pos.line,
            col: pos.col,
            message: format!("expected {wanted}, found {}", self.peek().describe()),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn expect_word(&mut self, word: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(w) if w == word => {
                self.bump();
                Ok(())
            }
            _ => Err(self.unexpected(&format!("`{word}`"))),
        }
    }

    fn binder(&mut self) -> Result<String, ParseError> {
        let pos = self.pos();
        match self.bump().tok {
            Tok::Ident(name) => {
                if RESERVED.contains(&name.as_str()) || Op::from_name(&name).is_some() {
                    Err(ParseError::Syntax {
                        line: pos.line,
                        col: pos.col,
                        message: format!("`{name}` is reserved and cannot be bound"),
                    })
                } else {
                    Ok(name)
                }
            }
            other => Err(ParseError::Syntax {
                line: pos.line,
                col: pos.col,
                message: format!("expected a variable name, found {}", other.describe()),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while self.peek() == &Tok::Star {
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(BinOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() != &Tok::Minus {
            return self.primary();
        }
        self.bump();
        Ok(match self.unary()? {
            Expr::Lit(v) => Expr::Lit(-v),
            e => Expr::Binary(BinOp::Mul, Box::new(Expr::Lit(-1.0)), Box::new(e)),
        })
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut args = vec![self.expr()?];
        while self.peek() == &Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Number(v, _) => {
                self.bump();
                Ok(Expr::Lit(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::LBracket => {
                self.bump();
                let mut items = vec![self.expr()?];
                while self.peek() == &Tok::Comma {
                    self.bump();
                    items.push(self.expr()?);
                }
                self.expect(Tok::RBracket)?;
                Ok(Expr::List(items))
            }
            Tok::Ident(name) => {
                self.bump();
                self.named(name, pos)
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    fn named(&mut self, name: String, pos: Pos) -> Result<Expr, ParseError> {
        if name == "models" {
            if self.peek() != &Tok::LBracket {
                return Ok(Expr::Models);
            }
            self.bump();
            let ipos = self.pos();
            let index = match self.bump().tok {
                Tok::Number(v, raw) if raw.chars().all(|c| c.is_ascii_digit()) => v as usize,
                other => {
                    return Err(ParseError::Syntax {
                        line: ipos.line,
                        col: ipos.col,
                        message: format!("expected a non-negative integer index, found {}", other.describe()),
                    })
                }
            };
            self.expect(Tok::RBracket)?;
            return Ok(Expr::Index(index));
        }
        if name == "fold" {
            self.expect(Tok::LParen)?;
            let list = self.expr()?;
            self.expect(Tok::Comma)?;
            let init = self.expr()?;
            self.expect(Tok::Comma)?;
            self.expect(Tok::LParen)?;
            let acc = self.binder()?;
            self.expect(Tok::Comma)?;
            let bpos = self.pos();
            let item = self.binder()?;
            if item == acc {
                return Err(ParseError::Syntax {
                    line: bpos.line,
                    col: bpos.col,
                    message: format!("lambda binds `{item}` twice"),
                });
            }
            self.expect(Tok::RParen)?;
            self.expect(Tok::Arrow)?;
            self.scope.push(acc.clone());
            self.scope.push(item.clone());
            let body = self.expr();
            self.scope.truncate(self.scope.len() - 2);
            let body = body?;
            self.expect(Tok::RParen)?;
            return Ok(Expr::Fold {
                list: Box::new(list),
                init: Box::new(init),
                acc,
                item,
                body: Box::new(body),
            });
        }
        if let Some(op) = Op::from_name(&name) {
            if self.peek() != &Tok::LParen {
                return Err(self.unexpected(&format!("`(` after `{name}`")));
            }
            let args = self.args()?;
            if args.len() != op.arity() {
                return Err(ParseError::Arity {
                    name,
                    expected: op.arity(),
                    found: args.len(),
                    line: pos.line,
                    col: pos.col,
                });
            }
            return Ok(Expr::Call(op, args));
        }
        if self.scope.contains(&name) {
            return Ok(Expr::Var(name));
        }
        Err(ParseError::UnknownIdentifier {
            name,
            line: pos.line,
            col: pos.col,
        })
    }
}
