//! `.hcsp` model files: header declarations plus process definitions.
//!
//! ```text
//! #const Qmax=2.0, r=0.18
//! #vars d=4.5, v=1
//! #bound horizon=40
//! #ode fill equilibrium=[4.0], T=12.5, L=1, M2=0.3
//! Tank ::= ...
//! system ::= Tank || Controller
//! ```

use std::collections::BTreeMap;

use super::ast::*;
use super::lexer::{tokenize, Tok};
use super::parser::{Parser, Scope};
use super::pretty::{format_num, pretty};
use super::ParseError;
use crate::eval::eval_in;
use crate::numerics::{OdeField, VectorField};
use crate::Valuation;

/// Tolerance on `|f(x̄)|` for a certified equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    /// Named constants in declaration order.
    pub consts: Vec<(String, f64)>,
    /// Initial valuation.
    pub init: Valuation,
    /// Named repetition bounds.
    pub bounds: BTreeMap<String, u32>,
    /// Process definitions in order, excluding `system`.
    pub defs: Vec<(String, ProcessTerm)>,
    pub system: ProcessTerm,
    /// Names of the parallel components when `system` is written `A || B`.
    pub system_names: Option<Vec<String>>,
    pub warnings: Vec<String>,
}

struct Header {
    line: usize,
    keyword: String,
    body: String,
}

fn header_of(line: &str) -> Option<(String, String)> {
    let t = line.trim_start();
    let rest = t.strip_prefix('#')?;
    for kw in ["vars", "const", "bound", "ode"] {
        if let Some(body) = rest.strip_prefix(kw) {
            if body.starts_with(char::is_whitespace) || body.is_empty() {
                return Some((kw.to_string(), body.to_string()));
            }
        }
    }
    None
}

/// Splits `a=1, b=2` style lists at top-level commas (brackets nest).
fn split_top(body: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in body.chars() {
        match c {
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        parts.push(cur);
    }
    parts
}

fn parse_binding(item: &str, line: usize) -> Result<(String, String), ParseError> {
    let (k, v) = item
        .split_once('=')
        .ok_or_else(|| ParseError::new(line, 1, format!("expected `name=value`, found `{}`", item.trim())))?;
    let k = k.trim();
    if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(ParseError::new(line, 1, format!("bad declaration name `{k}`")));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

fn header_expr(text: &str, line: usize, scope: &Scope) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text, line, scope.clone())?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

fn closed_value(e: &Expr, line: usize, env: &BTreeMap<String, f64>) -> Result<f64, ParseError> {
    eval_in(e, env).map_err(|err| match err {
        crate::eval::EvalError::UnknownVariable(v) => {
            ParseError::new(line, 1, format!("unknown identifier `{v}` in declarations"))
        }
        other => ParseError::new(line, 1, format!("cannot evaluate declaration: {other}")),
    })
}

fn cert_from(body: &str, line: usize, scope: &Scope) -> Result<(String, StabilityCert), ParseError> {
    let body = body.trim();
    let (name, rest) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
    let mut cert = StabilityCert {
        equilibrium: Vec::new(),
        equilibrium_time: None,
        lipschitz: None,
        second_deriv_bound: None,
        slope_bound: None,
    };
    let env = BTreeMap::new();
    for item in split_top(rest) {
        let (k, v) = parse_binding(&item, line)?;
        if k == "equilibrium" {
            let inner = v
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| ParseError::new(line, 1, "equilibrium must be a bracketed list"))?;
            for part in split_top(inner) {
                let e = header_expr(&part, line, scope)?;
                closed_value(&e, line, &env)?;
                cert.equilibrium.push(e);
            }
            continue;
        }
        let value = closed_value(&header_expr(&v, line, scope)?, line, &env)?;
        if value < 0.0 {
            return Err(ParseError::new(line, 1, format!("`{k}` must be nonnegative")));
        }
        match k.as_str() {
            "T" => cert.equilibrium_time = Some(value),
            "L" => cert.lipschitz = Some(value),
            "M2" => cert.second_deriv_bound = Some(value),
            "M" => cert.slope_bound = Some(value),
            _ => return Err(ParseError::new(line, 1, format!("unknown certificate field `{k}`"))),
        }
    }
    Ok((name.to_string(), cert))
}

/// Parses a model file.
pub fn parse_model(text: &str) -> Result<Model, ParseError> {
    let mut headers = Vec::new();
    let mut body = String::with_capacity(text.len());
    for (i, line) in text.lines().enumerate() {
        match header_of(line) {
            Some((keyword, rest)) => {
                headers.push(Header { line: i + 1, keyword, body: rest });
                body.push('\n');
            }
            None => {
                body.push_str(line);
                body.push('\n');
            }
        }
    }

    let mut scope = Scope::default();
    let mut consts = Vec::new();
    let mut init = Valuation::new();
    let mut certs: Vec<(usize, String, StabilityCert)> = Vec::new();
    for h in &headers {
        match h.keyword.as_str() {
            "const" => {
                for item in split_top(&h.body) {
                    let (k, v) = parse_binding(&item, h.line)?;
                    let value = closed_value(&header_expr(&v, h.line, &scope)?, h.line, &BTreeMap::new())?;
                    scope.consts.insert(k.clone(), value);
                    consts.push((k, value));
                }
            }
            "bound" => {
                for item in split_top(&h.body) {
                    let (k, v) = parse_binding(&item, h.line)?;
                    let value = closed_value(&header_expr(&v, h.line, &scope)?, h.line, &BTreeMap::new())?;
                    if value < 0.0 || value.fract() != 0.0 {
                        return Err(ParseError::new(h.line, 1, format!("bound `{k}` must be a nonnegative integer")));
                    }
                    scope.bounds.insert(k, value as u32);
                }
            }
            _ => {}
        }
    }
    for h in &headers {
        match h.keyword.as_str() {
            "vars" => {
                for item in split_top(&h.body) {
                    let (k, v) = parse_binding(&item, h.line)?;
                    let value = closed_value(&header_expr(&v, h.line, &scope)?, h.line, &BTreeMap::new())?;
                    init.insert(k, value);
                }
            }
            "ode" => {
                let (name, cert) = cert_from(&h.body, h.line, &scope)?;
                certs.push((h.line, name, cert));
            }
            _ => {}
        }
    }

    let mut parser = Parser::new(&body, 1, scope)?;
    let mut defs = Vec::new();
    let mut system = None;
    let mut system_names = None;
    while !parser.at_eof() {
        let name = parser.definition_head()?;
        if name == "system" {
            system_names = parser.peek_name_list();
        }
        let term = parser.process()?;
        parser.expect_definition_end()?;
        if name == "system" {
            system = Some(term);
        } else {
            parser.scope.defs.insert(name.clone(), term.clone());
            defs.push((name, term));
        }
    }
    let warnings = parser.take_warnings();
    let mut system = system.ok_or_else(|| ParseError::new(0, 0, "missing `system ::=` definition"))?;

    for (line, name, cert) in certs {
        let mut found = false;
        let mut attach = |p: &mut ProcessTerm| {
            p.for_each_ode_mut(&mut |spec| {
                if spec.name.as_deref() == Some(name.as_str()) {
                    spec.cert = Some(cert.clone());
                    found = true;
                }
            })
        };
        attach(&mut system);
        for (_, d) in defs.iter_mut() {
            attach(d);
        }
        if !found {
            return Err(ParseError::new(line, 1, format!("unknown identifier `{name}`: no ODE carries this name")));
        }
        check_equilibrium(&system, &name, &cert, &init).map_err(|m| ParseError::new(line, 1, m))?;
    }

    Ok(Model { consts, init, bounds: parser.scope.bounds.clone(), defs, system, system_names, warnings })
}

fn check_equilibrium(system: &ProcessTerm, name: &str, cert: &StabilityCert, init: &Valuation) -> Result<(), String> {
    let mut result = Ok(());
    system.for_each_ode(&mut |spec, _| {
        if spec.name.as_deref() != Some(name) || result.is_err() {
            return;
        }
        if cert.equilibrium.len() != spec.equations.len() {
            result = Err(format!(
                "equilibrium of `{name}` has {} components, the ODE has {}",
                cert.equilibrium.len(),
                spec.equations.len()
            ));
            return;
        }
        let point: Vec<f64> =
            cert.equilibrium.iter().map(|e| eval_in(e, &BTreeMap::new()).unwrap_or(f64::NAN)).collect();
        let field = match OdeField::new(spec, init) {
            Ok(f) => f,
            Err(e) => {
                result = Err(format!("ODE `{name}`: {e}"));
                return;
            }
        };
        match field.eval(&point) {
            Ok(fx) => {
                let norm = fx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if norm > EQUILIBRIUM_TOL {
                    result = Err(format!("certificate of `{name}`: |f(x)| = {norm:e} at the stated equilibrium"));
                }
            }
            Err(e) => result = Err(format!("certificate of `{name}`: {e}")),
        }
    });
    result
}

impl Model {
    /// Parses a process term using this model's constants and definitions.
    pub fn parse_term(&self, text: &str) -> Result<ProcessTerm, ParseError> {
        let scope = self.scope();
        let mut p = Parser::new(text, 1, scope)?;
        let t = p.process()?;
        p.expect_eof()?;
        Ok(t)
    }

    pub fn scope(&self) -> Scope {
        Scope {
            consts: self.consts.iter().cloned().collect(),
            bounds: self.bounds.clone(),
            defs: self.defs.iter().cloned().collect(),
        }
    }

    /// Sets a named repetition bound everywhere it is used.
    pub fn set_bound(&mut self, name: &str, count: u32) {
        fn go(p: &mut ProcessTerm, name: &str, count: u32) {
            match p {
                ProcessTerm::Repeat(body, b) => {
                    if b.name.as_deref() == Some(name) {
                        b.count = count;
                    }
                    go(body, name, count);
                }
                ProcessTerm::Seq(a, b) | ProcessTerm::IntChoice(a, b) | ProcessTerm::Parallel(a, b) => {
                    go(a, name, count);
                    go(b, name, count);
                }
                ProcessTerm::Guard(_, q) => go(q, name, count),
                ProcessTerm::ExtChoice(br) | ProcessTerm::OdeInterrupt(_, _, br) => {
                    for (_, q) in br {
                        go(q, name, count);
                    }
                }
                _ => {}
            }
        }
        self.bounds.insert(name.to_string(), count);
        go(&mut self.system, name, count);
        for (_, d) in self.defs.iter_mut() {
            go(d, name, count);
        }
    }

    /// Renders the model back to `.hcsp` text.
    pub fn to_hcsp(&self) -> String {
        let mut out = String::new();
        let list = |items: Vec<String>| items.join(", ");
        if !self.consts.is_empty() {
            out += &format!(
                "#const {}\n",
                list(self.consts.iter().map(|(k, v)| format!("{k}={}", format_num(*v))).collect())
            );
        }
        if !self.init.is_empty() {
            out += &format!(
                "#vars {}\n",
                list(self.init.iter().map(|(k, v)| format!("{k}={}", format_num(*v))).collect())
            );
        }
        if !self.bounds.is_empty() {
            out += &format!("#bound {}\n", list(self.bounds.iter().map(|(k, v)| format!("{k}={v}")).collect()));
        }
        let mut certs = BTreeMap::new();
        self.system.for_each_ode(&mut |spec, _| {
            if let (Some(n), Some(c)) = (&spec.name, &spec.cert) {
                certs.insert(n.clone(), c.clone());
            }
        });
        for (name, c) in certs {
            let mut fields = vec![format!(
                "equilibrium=[{}]",
                c.equilibrium.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ")
            )];
            for (k, v) in
                [("T", c.equilibrium_time), ("L", c.lipschitz), ("M2", c.second_deriv_bound), ("M", c.slope_bound)]
            {
                if let Some(v) = v {
                    fields.push(format!("{k}={}", format_num(v)));
                }
            }
            out += &format!("#ode {name} {}\n", fields.join(", "));
        }
        out.push('\n');
        match &self.system_names {
            Some(names) => {
                for (name, term) in &self.defs {
                    if names.contains(name) {
                        let head = format!("{name} ::= ");
                        out += &format!("{head}{}\n\n", pretty(term, 4));
                    }
                }
                out += &format!("system ::= {}\n", names.join(" || "));
            }
            None => out += &format!("system ::= {}\n", pretty(&self.system, 4)),
        }
        out
    }
}

/// True if the text looks like a model file rather than a bare term.
pub fn looks_like_model(text: &str) -> bool {
    text.lines().any(|l| header_of(l).is_some())
        || tokenize(text, 1)
            .map(|t| t.windows(2).any(|w| matches!(w[0].tok, Tok::Ident(_)) && w[1].tok == Tok::Define))
            .unwrap_or(false)
}
