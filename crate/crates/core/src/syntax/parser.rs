use std::collections::{BTreeMap, HashSet};

use super::ast::*;
use super::lexer::{describe, tokenize, Kw, Tok, Token};
use super::ParseError;

/// Names visible while parsing: header constants, named repetition bounds and
/// previously defined processes.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    pub consts: BTreeMap<String, f64>,
    pub bounds: BTreeMap<String, u32>,
    pub defs: BTreeMap<String, ProcessTerm>,
}

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
    pub scope: Scope,
    warnings: Vec<String>,
    failed_guards: HashSet<usize>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    pub fn new(src: &str, first_line: usize, scope: Scope) -> PResult<Parser> {
        Ok(Parser {
            toks: tokenize(src, first_line)?,
            pos: 0,
            scope,
            warnings: Vec::new(),
            failed_guards: HashSet::new(),
        })
    }

    pub fn take_warnings(&mut self) -> Vec<String> {
        std::mem::take(&mut self.warnings)
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, msg: impl Into<String>) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError::new(t.line, t.col, msg)
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        self.error_here(format!("expected {wanted}, found {}", describe(self.peek())))
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok) -> PResult<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.unexpected(&describe(tok)))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    /// True at `Name ::=`, the start of the next definition in a model file.
    pub fn at_definition(&self) -> bool {
        matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Define)
    }

    pub fn expect_eof(&self) -> PResult<()> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    pub fn expect_definition_end(&self) -> PResult<()> {
        if self.at_eof() || self.at_definition() {
            Ok(())
        } else {
            Err(self.unexpected("`;`, a new definition or end of input"))
        }
    }

    /// `Name ::=`
    pub fn definition_head(&mut self) -> PResult<String> {
        let name = self.ident()?;
        self.expect(&Tok::Define)?;
        Ok(name)
    }

    /// If the upcoming definition body is `A || B || ...` over defined process
    /// names, returns the names. Does not consume input.
    pub fn peek_name_list(&self) -> Option<Vec<String>> {
        let mut k = 0;
        let mut names = Vec::new();
        loop {
            match self.peek_at(k) {
                Tok::Ident(n) if self.scope.defs.contains_key(n) => names.push(n.clone()),
                _ => return None,
            }
            k += 1;
            if self.peek_at(k) != &Tok::Par {
                break;
            }
            k += 1;
        }
        let next_def = matches!(self.peek_at(k), Tok::Ident(_)) && self.peek_at(k + 1) == &Tok::Define;
        (self.peek_at(k) == &Tok::Eof || next_def).then_some(names)
    }

    // ---- processes ----

    pub fn process(&mut self) -> PResult<ProcessTerm> {
        let mut lhs = self.int_choice()?;
        while self.eat(&Tok::Par) {
            let rhs = self.int_choice()?;
            lhs = ProcessTerm::parallel(lhs, rhs);
        }
        Ok(lhs)
    }

    fn int_choice(&mut self) -> PResult<ProcessTerm> {
        let mut lhs = self.sequence()?;
        while self.eat(&Tok::IntChoice) {
            let rhs = self.sequence()?;
            lhs = ProcessTerm::int_choice(lhs, rhs);
        }
        Ok(lhs)
    }

    fn ends_sequence(&self) -> bool {
        matches!(self.peek(), Tok::RParen | Tok::RBracket | Tok::Box | Tok::Eof | Tok::Par | Tok::IntChoice)
            || self.at_definition()
    }

    fn sequence(&mut self) -> PResult<ProcessTerm> {
        let first = self.prefix()?;
        if self.peek() == &Tok::Semi {
            self.bump();
            if self.ends_sequence() {
                // tolerated trailing `;`
                return Ok(first);
            }
            let rest = self.sequence()?;
            return Ok(ProcessTerm::seq(first, rest));
        }
        Ok(first)
    }

    fn prefix(&mut self) -> PResult<ProcessTerm> {
        if let Some(g) = self.try_guard()? {
            return Ok(g);
        }
        self.postfix()
    }

    fn try_guard(&mut self) -> PResult<Option<ProcessTerm>> {
        let start = self.pos;
        if self.failed_guards.contains(&start) {
            return Ok(None);
        }
        let saved_warnings = self.warnings.len();
        match self.bool_expr() {
            Ok(b) if self.peek() == &Tok::Arrow => {
                self.bump();
                let body = self.prefix()?;
                Ok(Some(ProcessTerm::guard(b, body)))
            }
            _ => {
                self.pos = start;
                self.warnings.truncate(saved_warnings);
                self.failed_guards.insert(start);
                Ok(None)
            }
        }
    }

    fn postfix(&mut self) -> PResult<ProcessTerm> {
        let mut p = self.atom()?;
        while self.peek() == &Tok::Star && self.peek_at(1) == &Tok::LBrace {
            self.bump();
            self.bump();
            let bound = self.repeat_bound()?;
            self.expect(&Tok::RBrace)?;
            p = ProcessTerm::Repeat(Box::new(p), bound);
        }
        Ok(p)
    }

    fn repeat_bound(&mut self) -> PResult<RepeatBound> {
        match self.peek().clone() {
            Tok::Num(v) => {
                if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                    return Err(self.error_here(format!("repetition bound must be a nonnegative integer, found {v}")));
                }
                self.bump();
                Ok(RepeatBound::literal(v as u32))
            }
            Tok::Ident(name) => match self.scope.bounds.get(&name) {
                Some(&count) => {
                    self.bump();
                    Ok(RepeatBound { count, name: Some(name) })
                }
                None => Err(self.error_here(format!("unknown repetition bound `{name}`"))),
            },
            _ => Err(self.unexpected("repetition bound")),
        }
    }

    fn atom(&mut self) -> PResult<ProcessTerm> {
        match self.peek().clone() {
            Tok::Kw(Kw::Skip) => {
                self.bump();
                Ok(ProcessTerm::Skip)
            }
            Tok::Kw(Kw::Stop) => {
                self.bump();
                Ok(ProcessTerm::Stop)
            }
            Tok::Kw(Kw::Wait) => {
                self.bump();
                Ok(ProcessTerm::Wait(self.expr()?))
            }
            Tok::LBracket => {
                self.bump();
                let branches = self.branches()?;
                Ok(ProcessTerm::ExtChoice(branches))
            }
            Tok::Lt => self.ode(),
            Tok::LParen => {
                if let Some(p) = self.try_vec_assign()? {
                    return Ok(p);
                }
                self.bump();
                let p = self.process()?;
                self.expect(&Tok::RParen)?;
                Ok(p)
            }
            Tok::Ident(name) => {
                let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
                self.bump();
                match self.peek().clone() {
                    Tok::Assign => {
                        self.bump();
                        Ok(ProcessTerm::Assign(name, self.expr()?))
                    }
                    Tok::Quest | Tok::Bang => {
                        let dir = if self.bump() == Tok::Quest { Dir::Input } else { Dir::Output };
                        if self.eat(&Tok::Assign) {
                            return Ok(ProcessTerm::Assign(readiness_var(&name, dir), self.expr()?));
                        }
                        match dir {
                            Dir::Input => Ok(ProcessTerm::Input(name, self.ident()?)),
                            Dir::Output => Ok(ProcessTerm::Output(name, self.expr()?)),
                        }
                    }
                    _ => match self.scope.defs.get(&name) {
                        Some(p) => Ok(p.clone()),
                        None => Err(ParseError::new(line, col, format!("unknown process `{name}`"))),
                    },
                }
            }
            _ => Err(self.unexpected("a process")),
        }
    }

    fn try_vec_assign(&mut self) -> PResult<Option<ProcessTerm>> {
        let start = self.pos;
        self.bump(); // (
        let mut targets = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Ident(name) if !self.scope.defs.contains_key(&name) => {
                    self.bump();
                    targets.push(name);
                }
                _ => {
                    self.pos = start;
                    return Ok(None);
                }
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        if !(self.eat(&Tok::RParen) && self.eat(&Tok::Assign)) {
            self.pos = start;
            return Ok(None);
        }
        self.expect(&Tok::LParen)?;
        let mut exprs = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            exprs.push(self.expr()?);
        }
        self.expect(&Tok::RParen)?;
        if exprs.len() != targets.len() {
            return Err(self.error_here(format!(
                "simultaneous assignment has {} targets but {} values",
                targets.len(),
                exprs.len()
            )));
        }
        Ok(Some(ProcessTerm::VecAssign(targets.into_iter().zip(exprs).collect())))
    }

    /// Parses `io -> P ([] io -> P)* ]` after the opening bracket.
    fn branches(&mut self) -> PResult<Vec<(CommEvent, ProcessTerm)>> {
        let mut out = Vec::new();
        loop {
            let ev = self.comm_event()?;
            self.expect(&Tok::Arrow)?;
            let body = self.int_choice()?;
            out.push((ev, body));
            if self.eat(&Tok::Box) {
                continue;
            }
            self.expect(&Tok::RBracket)?;
            return Ok(out);
        }
    }

    fn comm_event(&mut self) -> PResult<CommEvent> {
        let chan = self.ident()?;
        match self.bump() {
            Tok::Quest => Ok(CommEvent::Input { chan, var: self.ident()? }),
            Tok::Bang => Ok(CommEvent::Output { chan, expr: self.expr()? }),
            _ => {
                self.pos -= 1;
                Err(self.unexpected("`?` or `!`"))
            }
        }
    }

    fn ode(&mut self) -> PResult<ProcessTerm> {
        self.expect(&Tok::Lt)?;
        let name = if matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::Colon {
            let n = self.ident()?;
            self.bump();
            Some(n)
        } else {
            None
        };
        let mut equations = Vec::new();
        loop {
            let lhs = self.ident()?;
            let var = match lhs.strip_suffix("_dot") {
                Some(v) if !v.is_empty() => v.to_string(),
                _ => {
                    self.pos -= 1;
                    return Err(self.error_here(format!("expected a derivative `x_dot`, found `{lhs}`")));
                }
            };
            self.expect(&Tok::EqSign)?;
            equations.push((var, self.expr()?));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::Amp)?;
        let domain = self.bool_expr()?;
        let domain = self.make_open(domain);
        self.expect(&Tok::Gt)?;
        let spec = OdeSpec { name, equations, cert: None };
        if self.eat(&Tok::Interrupt) {
            self.expect(&Tok::LBracket)?;
            let branches = self.branches()?;
            return Ok(ProcessTerm::OdeInterrupt(spec, domain, branches));
        }
        Ok(ProcessTerm::Ode(spec, domain))
    }

    /// Domains of continuous evolution denote open sets; non-strict
    /// comparisons are tightened to strict ones.
    fn make_open(&mut self, b: BoolExpr) -> BoolExpr {
        match b {
            BoolExpr::Cmp(op @ (CmpOp::Le | CmpOp::Ge), l, r) => {
                let strict = if op == CmpOp::Le { CmpOp::Lt } else { CmpOp::Gt };
                let msg = format!(
                    "non-strict comparison `{}` in an evolution domain replaced by `{}`",
                    op.symbol(),
                    strict.symbol()
                );
                log::warn!("{msg}");
                self.warnings.push(msg);
                BoolExpr::Cmp(strict, l, r)
            }
            BoolExpr::Not(inner) => BoolExpr::not(self.make_open(*inner)),
            BoolExpr::And(a, c) => {
                let a = self.make_open(*a);
                BoolExpr::and(a, self.make_open(*c))
            }
            BoolExpr::Or(a, c) => {
                let a = self.make_open(*a);
                BoolExpr::or(a, self.make_open(*c))
            }
            other => other,
        }
    }

    // ---- boolean expressions ----

    pub fn bool_expr(&mut self) -> PResult<BoolExpr> {
        let mut lhs = self.bool_and()?;
        while self.eat(&Tok::Kw(Kw::Or)) {
            let rhs = self.bool_and()?;
            lhs = BoolExpr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn bool_and(&mut self) -> PResult<BoolExpr> {
        let mut lhs = self.bool_not()?;
        while self.eat(&Tok::Kw(Kw::And)) {
            let rhs = self.bool_not()?;
            lhs = BoolExpr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn bool_not(&mut self) -> PResult<BoolExpr> {
        if self.eat(&Tok::Kw(Kw::Not)) {
            return Ok(BoolExpr::not(self.bool_not()?));
        }
        self.bool_primary()
    }

    fn bool_primary(&mut self) -> PResult<BoolExpr> {
        match self.peek().clone() {
            Tok::Kw(Kw::True) => {
                self.bump();
                Ok(BoolExpr::True)
            }
            Tok::Kw(Kw::False) => {
                self.bump();
                Ok(BoolExpr::False)
            }
            Tok::Ident(name)
                if matches!(self.peek_at(1), Tok::Quest | Tok::Bang)
                    && !matches!(
                        self.peek_at(2),
                        Tok::Ident(_) | Tok::Num(_) | Tok::LParen | Tok::Minus | Tok::Assign | Tok::Kw(Kw::Sqrt)
                    ) =>
            {
                self.bump();
                let dir = if self.bump() == Tok::Quest { Dir::Input } else { Dir::Output };
                Ok(BoolExpr::Flag(readiness_var(&name, dir)))
            }
            Tok::LParen => {
                let start = self.pos;
                self.bump();
                if let Ok(b) = self.bool_expr() {
                    if self.eat(&Tok::RParen) {
                        return Ok(b);
                    }
                }
                self.pos = start;
                self.comparison()
            }
            _ => self.comparison(),
        }
    }

    fn comparison(&mut self) -> PResult<BoolExpr> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            Tok::EqSign => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            _ => return Err(self.unexpected("comparison operator")),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(BoolExpr::Cmp(op, lhs, rhs))
    }

    // ---- arithmetic ----

    pub fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star if self.peek_at(1) != &Tok::LBrace => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Minus) {
            // `-2` is a negative literal; `-(2)` and `--2` keep the negation
            let literal = matches!(self.peek(), Tok::Num(_));
            return Ok(match self.unary()? {
                Expr::Num(v) if literal => Expr::Num(-v),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.primary()?;
        if self.eat(&Tok::Caret) {
            let exp = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(match self.scope.consts.get(&name) {
                    Some(&value) => Expr::Const { name, value },
                    None => Expr::Var(name),
                })
            }
            Tok::Kw(Kw::Sqrt) => {
                self.bump();
                self.expect(&Tok::LParen)?;
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(Expr::Sqrt(Box::new(e)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            _ => Err(self.unexpected("an expression")),
        }
    }
}

/// Parses a single process term with no header scope.
pub fn parse(text: &str) -> Result<ProcessTerm, ParseError> {
    parse_in_scope(text, &Scope::default()).map(|(p, _)| p)
}

/// Parses a process term against a scope; returns the term and any warnings.
pub fn parse_in_scope(text: &str, scope: &Scope) -> Result<(ProcessTerm, Vec<String>), ParseError> {
    let mut p = Parser::new(text, 1, scope.clone())?;
    let term = p.process()?;
    p.expect_eof()?;
    Ok((term, p.take_warnings()))
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text, 1, Scope::default())?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_bool(text: &str) -> Result<BoolExpr, ParseError> {
    let mut p = Parser::new(text, 1, Scope::default())?;
    let b = p.bool_expr()?;
    p.expect_eof()?;
    Ok(b)
}
