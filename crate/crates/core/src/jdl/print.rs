//! Canonical text form: attributes sorted by name, one per line, single
//! spaces around binary operators and only the parentheses precedence needs.

use std::fmt::Write;

use super::expr::{AttrScope, Expr, Function, UnaryOp, Value};

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

const UNARY_PRECEDENCE: u8 = 6;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, _, _) => op.precedence(),
        Expr::Unary(_, _) => UNARY_PRECEDENCE,
        // a negative literal prints with a leading '-' and reparses as a unary
        Expr::Literal(Value::Int(i)) if *i < 0 => UNARY_PRECEDENCE,
        Expr::Literal(Value::Real(r)) if r.is_sign_negative() => UNARY_PRECEDENCE,
        _ => 7,
    }
}

fn needs_self_prefix(name: &str) -> bool {
    ["true", "false", "undefined", "other", "self"]
        .iter()
        .any(|k| k.eq_ignore_ascii_case(name))
}

fn literal(v: &Value, out: &mut String) {
    match v {
        Value::Int(i64::MIN) => out.push_str("(-9223372036854775807 - 1)"),
        Value::Real(r) if !r.is_finite() => out.push_str("undefined"),
        Value::List(items) => {
            out.push('{');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                literal(item, out);
            }
            out.push('}');
        }
        other => {
            let _ = write!(out, "{other}");
        }
    }
}

pub fn write_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Literal(v) => literal(v, out),
        Expr::List(items) => {
            out.push('{');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(item, out);
            }
            out.push('}');
        }
        Expr::AttrRef(AttrScope::Other, name) => {
            let _ = write!(out, "other.{name}");
        }
        Expr::AttrRef(AttrScope::Own, name) => {
            if needs_self_prefix(name) {
                out.push_str("self.");
            }
            out.push_str(name);
        }
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnaryOp::Not => '!',
                UnaryOp::Neg => '-',
            });
            // "--x" and "- -1" must not fuse into something else
            if precedence(inner) <= UNARY_PRECEDENCE {
                out.push('(');
                write_expr(inner, out);
                out.push(')');
            } else {
                write_expr(inner, out);
            }
        }
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            wrap(l, precedence(l) < p, out);
            let _ = write!(out, " {} ", op.symbol());
            wrap(r, precedence(r) <= p, out);
        }
        Expr::Call(Function::Member, args) => {
            out.push_str("Member(");
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(a, out);
            }
            out.push(')');
        }
    }
}

fn wrap(e: &Expr, paren: bool, out: &mut String) {
    if paren {
        out.push('(');
        write_expr(e, out);
        out.push(')');
    } else {
        write_expr(e, out);
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(e, &mut s);
    s
}
