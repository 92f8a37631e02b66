use super::{Reg, RegisterFile, Value};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

/// Register expressions. Booleans are integers: comparisons yield 0 or 1 and
/// any nonzero value counts as true.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(Value),
    Reg(Reg),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    Overflow,
}

impl Expr {
    pub fn registers(&self, out: &mut BTreeSet<Reg>) {
        match self {
            Expr::Int(_) => {}
            Expr::Reg(r) => {
                out.insert(r.clone());
            }
            Expr::Unary(_, e) => e.registers(out),
            Expr::Binary(_, a, b) => {
                a.registers(out);
                b.registers(out);
            }
        }
    }

    pub fn register_set(&self) -> BTreeSet<Reg> {
        let mut out = BTreeSet::new();
        self.registers(&mut out);
        out
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Reg(r) => write!(f, "{r}"),
            Expr::Unary(UnOp::Neg, e) => write!(f, "-({e})"),
            Expr::Unary(UnOp::Not, e) => write!(f, "!({e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

pub fn eval_expr(e: &Expr, regs: &RegisterFile) -> Result<Value, EvalError> {
    Ok(match e {
        Expr::Int(v) => *v,
        Expr::Reg(r) => regs.get(r),
        Expr::Unary(UnOp::Neg, e) => eval_expr(e, regs)?.checked_neg().ok_or(EvalError::Overflow)?,
        Expr::Unary(UnOp::Not, e) => (eval_expr(e, regs)? == 0) as Value,
        Expr::Binary(op, a, b) => {
            let x = eval_expr(a, regs)?;
            // Short-circuit so that `r = 0 || 1 / r = 1` is total.
            match op {
                BinOp::And if x == 0 => return Ok(0),
                BinOp::Or if x != 0 => return Ok(1),
                _ => {}
            }
            let y = eval_expr(b, regs)?;
            match op {
                BinOp::Add => x.checked_add(y).ok_or(EvalError::Overflow)?,
                BinOp::Sub => x.checked_sub(y).ok_or(EvalError::Overflow)?,
                BinOp::Mul => x.checked_mul(y).ok_or(EvalError::Overflow)?,
                BinOp::Div if y == 0 => return Err(EvalError::DivisionByZero),
                BinOp::Div => x.checked_div(y).ok_or(EvalError::Overflow)?,
                BinOp::Mod if y == 0 => return Err(EvalError::DivisionByZero),
                BinOp::Mod => x.checked_rem(y).ok_or(EvalError::Overflow)?,
                BinOp::Eq => (x == y) as Value,
                BinOp::Ne => (x != y) as Value,
                BinOp::Lt => (x < y) as Value,
                BinOp::Le => (x <= y) as Value,
                BinOp::Gt => (x > y) as Value,
                BinOp::Ge => (x >= y) as Value,
                BinOp::And | BinOp::Or => (y != 0) as Value,
            }
        }
    })
}
