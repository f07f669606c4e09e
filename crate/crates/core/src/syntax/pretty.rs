//! Concrete-syntax printing. The output re-parses to the same tree.

use std::fmt;

use super::ast::*;

const WIDTH: usize = 88;

fn expr_level(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Num(v) if v.is_sign_negative() => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

fn write_expr(e: &Expr, min: u8, out: &mut String) {
    let wrap = expr_level(e) < min;
    if wrap {
        out.push('(');
    }
    match e {
        Expr::Num(v) => out.push_str(&format_num(*v)),
        Expr::Var(v) => out.push_str(v),
        Expr::Const { name, .. } => out.push_str(name),
        Expr::Neg(inner) => {
            out.push('-');
            // a literal right after `-` would read back as a negative number
            let min = if matches!(**inner, Expr::Num(_)) { 6 } else { 3 };
            write_expr(inner, min, out);
        }
        Expr::Sqrt(inner) => {
            out.push_str("sqrt(");
            write_expr(inner, 0, out);
            out.push(')');
        }
        Expr::Bin(op, a, b) => {
            let (la, lb) = match op {
                BinOp::Add | BinOp::Sub => (1, 2),
                BinOp::Mul | BinOp::Div => (2, 3),
                BinOp::Pow => (5, 3),
            };
            write_expr(a, la, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_expr(b, lb, out);
        }
    }
    if wrap {
        out.push(')');
    }
}

/// Shortest decimal text that reads back to the same double.
pub fn format_num(v: f64) -> String {
    format!("{v}")
}

fn bool_level(b: &BoolExpr) -> u8 {
    match b {
        BoolExpr::Or(..) => 0,
        BoolExpr::And(..) => 1,
        BoolExpr::Not(_) => 2,
        _ => 3,
    }
}

fn write_bool(b: &BoolExpr, min: u8, out: &mut String) {
    let wrap = bool_level(b) < min;
    if wrap {
        out.push('(');
    }
    match b {
        BoolExpr::True => out.push_str("true"),
        BoolExpr::False => out.push_str("false"),
        BoolExpr::Flag(f) => out.push_str(f),
        BoolExpr::Cmp(op, l, r) => {
            write_expr(l, 0, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_expr(r, 0, out);
        }
        BoolExpr::Not(inner) => {
            out.push_str("not ");
            write_bool(inner, 2, out);
        }
        BoolExpr::And(l, r) => {
            write_bool(l, 1, out);
            out.push_str(" and ");
            write_bool(r, 2, out);
        }
        BoolExpr::Or(l, r) => {
            write_bool(l, 0, out);
            out.push_str(" or ");
            write_bool(r, 1, out);
        }
    }
    if wrap {
        out.push(')');
    }
}

fn proc_level(p: &ProcessTerm) -> u8 {
    match p {
        ProcessTerm::Parallel(..) => 0,
        ProcessTerm::IntChoice(..) => 1,
        ProcessTerm::Seq(..) => 2,
        ProcessTerm::Guard(..) => 3,
        _ => 4,
    }
}

fn event_text(ev: &CommEvent) -> String {
    match ev {
        CommEvent::Input { chan, var } => format!("{chan}?{var}"),
        CommEvent::Output { chan, expr } => {
            let mut s = format!("{chan}!");
            write_expr(expr, 0, &mut s);
            s
        }
    }
}

fn ode_text(spec: &OdeSpec, dom: &BoolExpr) -> String {
    let mut s = String::from("<");
    if let Some(n) = &spec.name {
        s.push_str(n);
        s.push_str(": ");
    }
    for (i, (v, e)) in spec.equations.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        s.push_str(v);
        s.push_str("_dot = ");
        write_expr(e, 0, &mut s);
    }
    s.push_str(" & ");
    write_bool(dom, 0, &mut s);
    s.push('>');
    s
}

/// Renders a process, breaking long constructs over several lines. `indent`
/// is the column at which continuation lines start.
fn render(p: &ProcessTerm, min: u8, indent: usize, flat_only: bool) -> String {
    if proc_level(p) < min {
        return format!("({})", render(p, 0, indent + 1, flat_only));
    }
    if !flat_only {
        let flat = render(p, min, indent, true);
        if indent + flat.len() <= WIDTH || flat.len() < 24 {
            return flat;
        }
    }
    let pad = " ".repeat(indent);
    let sep = |s: &str| if flat_only { format!(" {s} ") } else { format!("\n{pad}{s} ") };
    match p {
        ProcessTerm::Skip => "skip".into(),
        ProcessTerm::Stop => "stop".into(),
        ProcessTerm::Assign(x, e) => {
            let mut s = format!("{x} := ");
            write_expr(e, 0, &mut s);
            s
        }
        ProcessTerm::VecAssign(pairs) => {
            let names: Vec<_> = pairs.iter().map(|(x, _)| x.as_str()).collect();
            let vals: Vec<_> = pairs
                .iter()
                .map(|(_, e)| {
                    let mut s = String::new();
                    write_expr(e, 0, &mut s);
                    s
                })
                .collect();
            format!("({}) := ({})", names.join(", "), vals.join(", "))
        }
        ProcessTerm::Wait(e) => {
            let mut s = String::from("wait ");
            write_expr(e, 0, &mut s);
            s
        }
        ProcessTerm::Input(ch, x) => format!("{ch}?{x}"),
        ProcessTerm::Output(ch, e) => event_text(&CommEvent::Output { chan: ch.clone(), expr: e.clone() }),
        ProcessTerm::Seq(..) => {
            let mut parts = Vec::new();
            let mut cur = p;
            while let ProcessTerm::Seq(a, b) = cur {
                parts.push(render(a, 3, indent, flat_only));
                cur = b;
            }
            parts.push(render(cur, 2, indent, flat_only));
            let joiner = if flat_only { "; ".to_string() } else { format!(";\n{pad}") };
            parts.join(&joiner)
        }
        ProcessTerm::Guard(b, body) => {
            let mut s = String::new();
            write_bool(b, 0, &mut s);
            s.push_str(" -> ");
            let body_indent = indent + 2;
            s.push_str(&render(body, 3, body_indent, flat_only));
            s
        }
        ProcessTerm::IntChoice(a, b) => {
            format!("{}{}{}", render(a, 1, indent, flat_only), sep("|~|"), render(b, 2, indent, flat_only))
        }
        ProcessTerm::Parallel(a, b) => {
            format!("{}{}{}", render(a, 0, indent, flat_only), sep("||"), render(b, 1, indent, flat_only))
        }
        ProcessTerm::Repeat(body, bound) => {
            let n = match &bound.name {
                Some(name) => name.clone(),
                None => bound.count.to_string(),
            };
            if flat_only {
                format!("({})*{{{n}}}", render(body, 0, indent, true))
            } else {
                let inner_pad = " ".repeat(indent + 2);
                format!("(\n{inner_pad}{}\n{pad})*{{{n}}}", render(body, 0, indent + 2, false))
            }
        }
        ProcessTerm::ExtChoice(branches) => format!("[{}]", render_branches(branches, indent + 1, flat_only)),
        ProcessTerm::Ode(spec, dom) => ode_text(spec, dom),
        ProcessTerm::OdeInterrupt(spec, dom, branches) => {
            let head = ode_text(spec, dom);
            if flat_only {
                format!("{head} |> [{}]", render_branches(branches, 0, true))
            } else {
                let inner = indent + 4;
                format!("{head}\n{pad}|> [{}]", render_branches(branches, inner, false))
            }
        }
    }
}

fn render_branches(branches: &[(CommEvent, ProcessTerm)], indent: usize, flat_only: bool) -> String {
    let pad = " ".repeat(indent.saturating_sub(1));
    let parts: Vec<String> = branches
        .iter()
        .map(|(ev, body)| {
            let head = format!("{} -> ", event_text(ev));
            let body_indent = indent + head.len();
            format!("{head}{}", render(body, 1, body_indent, flat_only))
        })
        .collect();
    let joiner = if flat_only { " [] ".to_string() } else { format!("\n{pad}[] ") };
    parts.join(&joiner)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(self, 0, &mut s);
        f.write_str(&s)
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_bool(self, 0, &mut s);
        f.write_str(&s)
    }
}

impl fmt::Display for CommEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&event_text(self))
    }
}

/// Single-line rendering.
impl fmt::Display for ProcessTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self, 0, 0, true))
    }
}

/// Multi-line rendering with continuation lines starting at `indent`.
pub fn pretty(p: &ProcessTerm, indent: usize) -> String {
    render(p, 0, indent, false)
}
