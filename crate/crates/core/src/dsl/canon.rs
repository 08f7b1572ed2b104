//! Canonical form of typed programs, the key used for duplicate detection.
//!
//! Normalization: binders are already de Bruijn indices after typechecking,
//! arguments of commutative operators are sorted by their canonical text, and
//! scalar subexpressions built only from literals are folded with the same
//! floating-point operations the interpreter would perform.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ast::{format_lit, Node, Op, Typed};

/// 128-bit digest of a program's canonical form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalHash([u8; 16]);

impl CanonicalHash {
    pub fn to_hex(self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        Some(Self(bytes.try_into().ok()?))
    }
}

impl fmt::Display for CanonicalHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for CanonicalHash {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for CanonicalHash {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CanonicalHash::from_hex(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid hash `{s}`")))
    }
}

enum Canon {
    Lit(f64),
    Text(String),
}

impl Canon {
    fn text(&self) -> String {
        match self {
            Canon::Lit(v) => format_lit(*v),
            Canon::Text(s) => s.clone(),
        }
    }
}

fn canon(t: &Typed) -> Canon {
    match &t.node {
        Node::Models => Canon::Text("models".into()),
        Node::Index(i) => Canon::Text(format!("models[{i}]")),
        Node::Lit(v) => Canon::Lit(*v),
        Node::Var(k) => Canon::Text(format!("${k}")),
        Node::Binary(op, a, b) => {
            let (a, b) = (canon(a), canon(b));
            if let (Canon::Lit(x), Canon::Lit(y)) = (&a, &b) {
                let v = op.apply(*x, *y);
                if v.is_finite() {
                    return Canon::Lit(v);
                }
            }
            let mut parts = [a.text(), b.text()];
            if op.is_commutative() {
                parts.sort();
            }
            Canon::Text(format!("({} {} {})", parts[0], op.symbol(), parts[1]))
        }
        Node::Call(op, args) => {
            let args: Vec<Canon> = args.iter().map(canon).collect();
            if *op == Op::Clamp {
                if let [Canon::Lit(x), Canon::Lit(lo), Canon::Lit(hi)] = args.as_slice() {
                    return Canon::Lit(x.max(*lo).min(*hi));
                }
            }
            let mut parts: Vec<String> = args.iter().map(Canon::text).collect();
            if op.is_commutative() {
                parts.sort();
            }
            Canon::Text(format!("{}({})", op.name(), parts.join(",")))
        }
        Node::List(items) => {
            let parts: Vec<String> = items.iter().map(|i| canon(i).text()).collect();
            Canon::Text(format!("[{}]", parts.join(",")))
        }
        Node::Fold { list, init, lambda } => Canon::Text(format!(
            "fold({},{},{})",
            canon(list).text(),
            canon(init).text(),
            canon(lambda).text()
        )),
        Node::Lambda(body) => Canon::Text(format!("\\{}", canon(body).text())),
    }
}

/// Normalized textual form of a typed program.
pub fn canonical_form(t: &Typed) -> String {
    canon(t).text()
}

pub fn canonical_hash(t: &Typed) -> CanonicalHash {
    let digest = Sha256::digest(canonical_form(t).as_bytes());
    let mut out = [0u8; 16];
    out.copy_from_slice(&digest[..16]);
    CanonicalHash(out)
}
