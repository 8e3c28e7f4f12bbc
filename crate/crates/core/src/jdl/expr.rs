use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};

/// Result of evaluating an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Undefined,
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
    List(Vec<Value>),
}

impl Value {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_undefined(&self) -> bool {
        matches!(self, Value::Undefined)
    }

    /// Folds non-finite reals to `Undefined`.
    fn real(r: f64) -> Value {
        if r.is_finite() {
            Value::Real(r)
        } else {
            Value::Undefined
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Undefined => s.serialize_none(),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Int(i) => s.serialize_i64(*i),
            Value::Real(r) => s.serialize_f64(*r),
            Value::Str(v) => s.serialize_str(v),
            Value::List(vs) => vs.serialize(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttrScope {
    Other,
    Own,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 3,
            BinaryOp::Add | BinaryOp::Sub => 4,
            BinaryOp::Mul | BinaryOp::Div => 5,
        }
    }

    pub const ALL: [BinaryOp; 12] = [
        BinaryOp::Eq,
        BinaryOp::Ne,
        BinaryOp::Lt,
        BinaryOp::Le,
        BinaryOp::Gt,
        BinaryOp::Ge,
        BinaryOp::And,
        BinaryOp::Or,
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Function {
    Member,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Value),
    List(Vec<Expr>),
    AttrRef(AttrScope, String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Function, Vec<Expr>),
}

impl Expr {
    pub fn bool(b: bool) -> Self {
        Expr::Literal(Value::Bool(b))
    }

    pub fn other(name: &str) -> Self {
        Expr::AttrRef(AttrScope::Other, name.to_string())
    }

    pub fn binary(op: BinaryOp, l: Expr, r: Expr) -> Self {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }
}

/// Attribute map with case-insensitive names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttrMap(BTreeMap<String, Value>);

impl AttrMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, v: Value) {
        self.0.insert(name.to_ascii_lowercase(), v);
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(&name.to_ascii_lowercase())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }
}

impl FromIterator<(String, Value)> for AttrMap {
    fn from_iter<T: IntoIterator<Item = (String, Value)>>(iter: T) -> Self {
        let mut m = AttrMap::new();
        for (k, v) in iter {
            m.insert(&k, v);
        }
        m
    }
}

/// The two attribute sets an expression can see: the candidate resource
/// (`other`) and the job itself (`self`).
#[derive(Debug, Clone, Copy)]
pub struct EvalEnv<'a> {
    pub other: &'a AttrMap,
    pub own: &'a AttrMap,
}

/// Evaluates with three-valued logic. Never fails: type errors, missing
/// attributes and division by zero all yield `Undefined`.
pub fn evaluate(expr: &Expr, env: &EvalEnv<'_>) -> Value {
    match expr {
        Expr::Literal(v) => v.clone(),
        Expr::List(items) => Value::List(items.iter().map(|e| evaluate(e, env)).collect()),
        Expr::AttrRef(scope, name) => {
            let map = match scope {
                AttrScope::Other => env.other,
                AttrScope::Own => env.own,
            };
            map.get(name).cloned().unwrap_or(Value::Undefined)
        }
        Expr::Unary(op, inner) => match (op, evaluate(inner, env)) {
            (UnaryOp::Not, Value::Bool(b)) => Value::Bool(!b),
            (UnaryOp::Neg, Value::Int(i)) => i.checked_neg().map(Value::Int).unwrap_or(Value::Undefined),
            (UnaryOp::Neg, Value::Real(r)) => Value::Real(-r),
            _ => Value::Undefined,
        },
        Expr::Binary(BinaryOp::And, l, r) => {
            let lv = evaluate(l, env);
            if lv == Value::Bool(false) {
                return lv;
            }
            match (lv, evaluate(r, env)) {
                (_, Value::Bool(false)) => Value::Bool(false),
                (Value::Bool(true), Value::Bool(true)) => Value::Bool(true),
                _ => Value::Undefined,
            }
        }
        Expr::Binary(BinaryOp::Or, l, r) => {
            let lv = evaluate(l, env);
            if lv == Value::Bool(true) {
                return lv;
            }
            match (lv, evaluate(r, env)) {
                (_, Value::Bool(true)) => Value::Bool(true),
                (Value::Bool(false), Value::Bool(false)) => Value::Bool(false),
                _ => Value::Undefined,
            }
        }
        Expr::Binary(op, l, r) => binary(*op, &evaluate(l, env), &evaluate(r, env)),
        Expr::Call(Function::Member, args) => {
            if args.len() != 2 {
                return Value::Undefined;
            }
            let a = evaluate(&args[0], env);
            let b = evaluate(&args[1], env);
            let (list, needle) = match (&a, &b) {
                (_, Value::List(l)) => (l, &a),
                (Value::List(l), _) => (l, &b),
                _ => return Value::Undefined,
            };
            if needle.is_undefined() {
                return Value::Undefined;
            }
            Value::Bool(list.iter().any(|item| same_value(item, needle)))
        }
    }
}

fn same_value(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Str(x), Value::Str(y)) => x == y,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Int(x), Value::Int(y)) => x == y,
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        },
    }
}

fn binary(op: BinaryOp, l: &Value, r: &Value) -> Value {
    use std::cmp::Ordering;
    match op {
        BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => match (l, r) {
            (Value::Int(a), Value::Int(b)) => {
                let out = match op {
                    BinaryOp::Add => a.checked_add(*b),
                    BinaryOp::Sub => a.checked_sub(*b),
                    BinaryOp::Mul => a.checked_mul(*b),
                    _ => a.checked_div(*b),
                };
                out.map(Value::Int).unwrap_or(Value::Undefined)
            }
            _ => match (l.as_f64(), r.as_f64()) {
                (Some(a), Some(b)) => match op {
                    BinaryOp::Add => Value::real(a + b),
                    BinaryOp::Sub => Value::real(a - b),
                    BinaryOp::Mul => Value::real(a * b),
                    _ if b == 0.0 => Value::Undefined,
                    _ => Value::real(a / b),
                },
                _ => Value::Undefined,
            },
        },
        _ => {
            let ord: Option<Ordering> = match (l, r) {
                (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
                (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
                (Value::Bool(a), Value::Bool(b)) => {
                    return match op {
                        BinaryOp::Eq => Value::Bool(a == b),
                        BinaryOp::Ne => Value::Bool(a != b),
                        _ => Value::Undefined,
                    }
                }
                _ => match (l.as_f64(), r.as_f64()) {
                    (Some(a), Some(b)) => a.partial_cmp(&b),
                    _ => None,
                },
            };
            match ord {
                None => Value::Undefined,
                Some(o) => Value::Bool(match op {
                    BinaryOp::Eq => o == Ordering::Equal,
                    BinaryOp::Ne => o != Ordering::Equal,
                    BinaryOp::Lt => o == Ordering::Less,
                    BinaryOp::Le => o != Ordering::Greater,
                    BinaryOp::Gt => o == Ordering::Greater,
                    BinaryOp::Ge => o != Ordering::Less,
                    _ => unreachable!("logical operators handled by caller"),
                }),
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Undefined => f.write_str("undefined"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r:?}"),
            Value::Str(s) => write!(f, "{}", super::print::quote(s)),
            Value::List(vs) => {
                f.write_str("{")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &str) -> Expr {
        Expr::Literal(Value::Str(v.into()))
    }

    fn eval(e: &Expr, other: &AttrMap) -> Value {
        let own = AttrMap::new();
        evaluate(e, &EvalEnv { other, own: &own })
    }

    #[test]
    fn member_on_tags() {
        let list = Expr::List(vec![s("ATLAS"), s("CMS")]);
        let e = Expr::Call(Function::Member, vec![s("ATLAS"), list.clone()]);
        assert_eq!(eval(&e, &AttrMap::new()), Value::Bool(true));
        let e = Expr::Call(Function::Member, vec![list, s("atlas")]);
        assert_eq!(eval(&e, &AttrMap::new()), Value::Bool(false));
        let e = Expr::Call(Function::Member, vec![s("ATLAS"), Expr::other("RunTimeEnvironment")]);
        assert_eq!(eval(&e, &AttrMap::new()), Value::Undefined);
    }

    #[test]
    fn undefined_and_short_circuit() {
        let gt = Expr::binary(BinaryOp::Gt, Expr::other("FreeCPUs"), Expr::Literal(Value::Int(0)));
        assert_eq!(eval(&gt, &AttrMap::new()), Value::Undefined);
        let and = Expr::binary(BinaryOp::And, Expr::bool(false), gt.clone());
        assert_eq!(eval(&and, &AttrMap::new()), Value::Bool(false));
        let or = Expr::binary(BinaryOp::Or, gt, Expr::bool(true));
        assert_eq!(eval(&or, &AttrMap::new()), Value::Bool(true));
    }

    #[test]
    fn arithmetic_edges() {
        let i = |n| Expr::Literal(Value::Int(n));
        let div0 = Expr::binary(BinaryOp::Div, i(1), i(0));
        assert_eq!(eval(&div0, &AttrMap::new()), Value::Undefined);
        let rdiv0 = Expr::binary(BinaryOp::Div, Expr::Literal(Value::Real(1.0)), i(0));
        assert_eq!(eval(&rdiv0, &AttrMap::new()), Value::Undefined);
        let overflow = Expr::binary(BinaryOp::Add, i(i64::MAX), i(1));
        assert_eq!(eval(&overflow, &AttrMap::new()), Value::Undefined);
        let mixed = Expr::binary(BinaryOp::Mul, i(2), Expr::Literal(Value::Real(1.5)));
        assert_eq!(eval(&mixed, &AttrMap::new()), Value::Real(3.0));
        assert_eq!(eval(&Expr::binary(BinaryOp::Div, i(7), i(2)), &AttrMap::new()), Value::Int(3));
    }

    #[test]
    fn comparisons_by_type() {
        let cmp = |op, a: Value, b: Value| eval(&Expr::binary(op, Expr::Literal(a), Expr::Literal(b)), &AttrMap::new());
        assert_eq!(cmp(BinaryOp::Lt, Value::Int(1), Value::Real(1.5)), Value::Bool(true));
        assert_eq!(cmp(BinaryOp::Eq, Value::Str("pbs".into()), Value::Str("PBS".into())), Value::Bool(false));
        assert_eq!(cmp(BinaryOp::Eq, Value::Str("1".into()), Value::Int(1)), Value::Undefined);
        assert_eq!(cmp(BinaryOp::Lt, Value::Bool(false), Value::Bool(true)), Value::Undefined);
        assert_eq!(cmp(BinaryOp::Ne, Value::Bool(false), Value::Bool(true)), Value::Bool(true));
    }

    #[test]
    fn attr_lookup_is_case_insensitive() {
        let mut other = AttrMap::new();
        other.insert("FreeCPUs", Value::Int(3));
        assert_eq!(eval(&Expr::other("freecpus"), &other), Value::Int(3));
    }
}
