//! CPLEX-style LP text format.
//!
//! The writer emits every column in the objective (zero coefficients
//! included) so a read-back model keeps the original column order. The reader
//! accepts the usual sections (`Minimize`, `Subject To`, `Bounds`,
//! `Binaries`, `Generals`, `End`), `\` comments, and constraints spanning
//! several lines.

use std::fmt::Write as _;

use super::{RowLabel, Sense, StandardFormModel, VarKind};
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 8;

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (f64, String)>) {
    for (n, (coef, name)) in terms.enumerate() {
        if n > 0 && n % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if coef.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {name}", num(coef.abs()));
    }
}

pub fn write_lp(model: &StandardFormModel) -> String {
    let mut out = String::new();
    out.push_str("\\ written by rck\nMinimize\n obj:");
    let c = model.cost_vector();
    write_terms(&mut out, model.variables.iter().zip(&c).map(|(v, &c)| (c, v.name.clone())));
    out.push_str("\nSubject To\n");
    for row in &model.constraints {
        let _ = write!(out, " {}:", row.label);
        if row.coeffs.is_empty() {
            // an empty row still needs a term
            let _ = write!(out, " 0 {}", model.variables.first().map_or("x", |v| v.name.as_str()));
        }
        write_terms(
            &mut out,
            row.coeffs.iter().map(|&(j, a)| (a, model.variables[j].name.clone())),
        );
        let _ = writeln!(out, " {} {}", row.sense.symbol(), num(row.rhs));
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else if v.lower == v.upper {
            let _ = writeln!(out, " {} = {}", v.name, num(v.lower));
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
        }
    }
    for (kind, header) in [(VarKind::Binary, "Binaries"), (VarKind::Integer, "Generals")] {
        let names: Vec<&str> = model.variables.iter().filter(|v| v.kind == kind).map(|v| v.name.as_str()).collect();
        if !names.is_empty() {
            let _ = writeln!(out, "{header}");
            for chunk in names.chunks(TERMS_PER_LINE) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Plus,
    Minus,
    Colon,
    Cmp(Sense),
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    let lower = line.trim().to_ascii_lowercase();
    let squashed: String = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    Some(match squashed.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Section::Objective,
        "subject to" | "such that" | "st" | "s.t." | "st." => Section::Constraints,
        "bounds" | "bound" => Section::Bounds,
        "binaries" | "binary" | "bin" => Section::Binaries,
        "generals" | "general" | "gen" | "integers" => Section::Generals,
        "end" => Section::End,
        "maximize" | "maximise" | "maximum" | "max" => return None,
        _ => return None,
    })
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || "_!\"#$%&()/,;?@'`{}|~[]".contains(c)
}

fn is_ident_char(c: char) -> bool {
    is_ident_start(c) || c.is_ascii_digit() || c == '.'
}

fn lex(line: &str, line_no: usize, out: &mut Vec<(Tok, usize)>) -> Result<()> {
    let chars: Vec<char> = line.chars().collect();
    let mut p = 0;
    let err = |msg: String| Error::LpParse { line: line_no, msg };
    while p < chars.len() {
        let c = chars[p];
        if c.is_whitespace() {
            p += 1;
        } else if c == '\\' {
            break;
        } else if c == '+' {
            out.push((Tok::Plus, line_no));
            p += 1;
        } else if c == '-' {
            out.push((Tok::Minus, line_no));
            p += 1;
        } else if c == ':' {
            out.push((Tok::Colon, line_no));
            p += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let next = chars.get(p + 1).copied();
            let (sense, len) = match (c, next) {
                ('<', Some('=')) | ('=', Some('<')) => (Sense::Le, 2),
                ('>', Some('=')) | ('=', Some('>')) => (Sense::Ge, 2),
                ('<', _) => (Sense::Le, 1),
                ('>', _) => (Sense::Ge, 1),
                _ => (Sense::Eq, 1),
            };
            out.push((Tok::Cmp(sense), line_no));
            p += len;
        } else if c.is_ascii_digit() || c == '.' {
            let start = p;
            while p < chars.len() && (chars[p].is_ascii_digit() || chars[p] == '.') {
                p += 1;
            }
            if p < chars.len() && (chars[p] == 'e' || chars[p] == 'E') {
                let mut q = p + 1;
                if q < chars.len() && (chars[q] == '+' || chars[q] == '-') {
                    q += 1;
                }
                if q < chars.len() && chars[q].is_ascii_digit() {
                    p = q;
                    while p < chars.len() && chars[p].is_ascii_digit() {
                        p += 1;
                    }
                }
            }
            let text: String = chars[start..p].iter().collect();
            let v = text.parse::<f64>().map_err(|_| err(format!("bad number `{text}`")))?;
            out.push((Tok::Num(v), line_no));
        } else if is_ident_start(c) {
            let start = p;
            while p < chars.len() && is_ident_char(chars[p]) {
                p += 1;
            }
            let word: String = chars[start..p].iter().collect();
            let lower = word.to_ascii_lowercase();
            if lower == "inf" || lower == "infinity" {
                out.push((Tok::Num(f64::INFINITY), line_no));
            } else {
                out.push((Tok::Ident(word), line_no));
            }
        } else {
            return Err(err(format!("unexpected character `{c}`")));
        }
    }
    Ok(())
}

struct Parser {
    model: StandardFormModel,
}

impl Parser {
    fn col(&mut self, name: &str) -> usize {
        match self.model.column(name) {
            Some(j) => j,
            None => self.model.add_var(name, VarKind::Continuous, 0.0, f64::INFINITY),
        }
    }

    /// Parses `[sign] [num] ident` terms until a comparison or the end.
    fn expr(&mut self, toks: &[(Tok, usize)], pos: &mut usize) -> Result<(Vec<(usize, f64)>, f64)> {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        let mut constant = 0.0;
        while *pos < toks.len() {
            let mut sign = 1.0;
            let mut saw_sign = false;
            while let Some((t, _)) = toks.get(*pos) {
                match t {
                    Tok::Plus => {}
                    Tok::Minus => sign = -sign,
                    _ => break,
                }
                saw_sign = true;
                *pos += 1;
            }
            let line = toks.get(*pos).map_or(0, |t| t.1);
            match toks.get(*pos).map(|t| &t.0) {
                Some(Tok::Num(v)) => {
                    *pos += 1;
                    if let Some((Tok::Ident(name), _)) = toks.get(*pos) {
                        let name = name.clone();
                        *pos += 1;
                        let j = self.col(&name);
                        terms.push((j, sign * v));
                    } else {
                        constant += sign * v;
                    }
                }
                Some(Tok::Ident(name)) => {
                    let name = name.clone();
                    *pos += 1;
                    let j = self.col(&name);
                    terms.push((j, sign));
                }
                Some(Tok::Cmp(_)) | None if !saw_sign => break,
                other => {
                    return Err(Error::LpParse { line, msg: format!("unexpected token {other:?} in expression") });
                }
            }
        }
        Ok((terms, constant))
    }
}

fn signed_number(toks: &[(Tok, usize)], pos: &mut usize) -> Option<f64> {
    let mut sign = 1.0;
    loop {
        match toks.get(*pos).map(|t| &t.0) {
            Some(Tok::Plus) => *pos += 1,
            Some(Tok::Minus) => {
                sign = -sign;
                *pos += 1;
            }
            Some(Tok::Num(v)) => {
                *pos += 1;
                return Some(sign * v);
            }
            _ => return None,
        }
    }
}

fn merge(terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for (j, a) in terms {
        match out.iter_mut().find(|(k, _)| *k == j) {
            Some(e) => e.1 += a,
            None => out.push((j, a)),
        }
    }
    out.retain(|(_, a)| *a != 0.0);
    out
}

/// Parses an LP file produced by [`write_lp`] or a compatible tool.
pub fn parse_lp(text: &str) -> Result<StandardFormModel> {
    let mut section = Section::None;
    let mut buckets: Vec<(Section, Vec<(Tok, usize)>)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('\\') {
            continue;
        }
        let lower = trimmed.to_ascii_lowercase();
        if matches!(lower.as_str(), "maximize" | "maximise" | "maximum" | "max") {
            return Err(Error::LpParse { line: line_no, msg: "only minimization is supported".into() });
        }
        if let Some(s) = section_of(trimmed) {
            section = s;
            buckets.push((s, Vec::new()));
            continue;
        }
        if section == Section::None {
            return Err(Error::LpParse { line: line_no, msg: "content before the objective section".into() });
        }
        if section == Section::End {
            return Err(Error::LpParse { line: line_no, msg: "content after End".into() });
        }
        // bounds are one per line; keep a line marker by starting a new bucket
        if section == Section::Bounds {
            buckets.push((Section::Bounds, Vec::new()));
        }
        let bucket = &mut buckets.last_mut().expect("section bucket").1;
        lex(trimmed, line_no, bucket)?;
    }

    let mut p = Parser { model: StandardFormModel::default() };
    let mut objective: Vec<(usize, f64)> = Vec::new();
    let mut binaries: Vec<String> = Vec::new();
    let mut generals: Vec<String> = Vec::new();
    for (section, toks) in buckets {
        let mut pos = 0;
        match section {
            Section::Objective => {
                if matches!(toks.get(1).map(|t| &t.0), Some(Tok::Colon)) {
                    pos = 2;
                }
                let (terms, _) = p.expr(&toks, &mut pos)?;
                if pos < toks.len() {
                    return Err(Error::LpParse { line: toks[pos].1, msg: "trailing tokens in objective".into() });
                }
                objective.extend(terms);
            }
            Section::Constraints => {
                let mut unnamed = 0usize;
                while pos < toks.len() {
                    let line = toks[pos].1;
                    let name = match (&toks[pos].0, toks.get(pos + 1).map(|t| &t.0)) {
                        (Tok::Ident(n), Some(Tok::Colon)) => {
                            let n = n.clone();
                            pos += 2;
                            n
                        }
                        _ => {
                            unnamed += 1;
                            format!("c{unnamed}")
                        }
                    };
                    let (terms, constant) = p.expr(&toks, &mut pos)?;
                    let sense = match toks.get(pos).map(|t| &t.0) {
                        Some(Tok::Cmp(s)) => *s,
                        _ => return Err(Error::LpParse { line, msg: format!("constraint `{name}` lacks a comparison") }),
                    };
                    pos += 1;
                    let rhs = signed_number(&toks, &mut pos)
                        .ok_or_else(|| Error::LpParse { line, msg: format!("constraint `{name}` lacks a numeric rhs") })?;
                    let label: RowLabel = name.parse().expect("infallible");
                    p.model.add_row(merge(terms), sense, rhs - constant, label);
                }
            }
            Section::Bounds => parse_bound(&mut p, &toks)?,
            Section::Binaries | Section::Generals => {
                for (t, line) in &toks {
                    match t {
                        Tok::Ident(n) if section == Section::Binaries => binaries.push(n.clone()),
                        Tok::Ident(n) => generals.push(n.clone()),
                        other => return Err(Error::LpParse { line: *line, msg: format!("expected a name, found {other:?}") }),
                    }
                }
            }
            Section::None | Section::End => {}
        }
    }
    for name in binaries {
        let j = p.col(&name);
        let v = &mut p.model.variables[j];
        v.kind = VarKind::Binary;
        v.lower = v.lower.max(0.0);
        v.upper = v.upper.min(1.0);
    }
    for name in generals {
        let j = p.col(&name);
        p.model.variables[j].kind = VarKind::Integer;
    }
    p.model.objective = merge(objective);
    let mut model = p.model;
    model.y_cols = indexed_columns(&model, "y_");
    model.z_cols = indexed_columns(&model, "z_");
    model.validate()?;
    Ok(model)
}

/// Columns named `<prefix><k>` for `k = 0, 1, ...` up to the first gap.
fn indexed_columns(model: &StandardFormModel, prefix: &str) -> Vec<usize> {
    (0..).map_while(|k| model.column(&format!("{prefix}{k}"))).collect()
}

fn parse_bound(p: &mut Parser, toks: &[(Tok, usize)]) -> Result<()> {
    let Some(line) = toks.first().map(|t| t.1) else { return Ok(()) };
    let err = |msg: &str| Error::LpParse { line, msg: msg.to_string() };
    let mut pos = 0;
    // `l <= x [<= u]`
    if let Some(lo) = signed_number(toks, &mut pos) {
        let Some(Tok::Cmp(s1)) = toks.get(pos).map(|t| &t.0) else { return Err(err("malformed bound")) };
        pos += 1;
        let Some(Tok::Ident(name)) = toks.get(pos).map(|t| &t.0) else { return Err(err("malformed bound")) };
        let j = p.col(&name.clone());
        pos += 1;
        match s1 {
            Sense::Le => p.model.variables[j].lower = lo,
            Sense::Ge => p.model.variables[j].upper = lo,
            Sense::Eq => {
                p.model.variables[j].lower = lo;
                p.model.variables[j].upper = lo;
            }
        }
        if let Some(Tok::Cmp(s2)) = toks.get(pos).map(|t| &t.0) {
            let s2 = *s2;
            pos += 1;
            let v = signed_number(toks, &mut pos).ok_or_else(|| err("malformed bound"))?;
            match s2 {
                Sense::Le => p.model.variables[j].upper = v,
                Sense::Ge => p.model.variables[j].lower = v,
                Sense::Eq => return Err(err("malformed bound")),
            }
        }
        return if pos == toks.len() { Ok(()) } else { Err(err("trailing tokens in bound")) };
    }
    // `x >= l`, `x <= u`, `x = v`, `x free`
    let Some(Tok::Ident(name)) = toks.first().map(|t| &t.0) else { return Err(err("malformed bound")) };
    let j = p.col(&name.clone());
    pos = 1;
    match toks.get(pos).map(|t| &t.0) {
        Some(Tok::Ident(w)) if w.eq_ignore_ascii_case("free") => {
            p.model.variables[j].lower = f64::NEG_INFINITY;
            p.model.variables[j].upper = f64::INFINITY;
            pos += 1;
        }
        Some(Tok::Cmp(s)) => {
            let s = *s;
            pos += 1;
            let v = signed_number(toks, &mut pos).ok_or_else(|| err("malformed bound"))?;
            let var = &mut p.model.variables[j];
            match s {
                Sense::Le => var.upper = v,
                Sense::Ge => var.lower = v,
                Sense::Eq => {
                    var.lower = v;
                    var.upper = v;
                }
            }
        }
        _ => return Err(err("malformed bound")),
    }
    if pos == toks.len() {
        Ok(())
    } else {
        Err(err("trailing tokens in bound"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate, GeneratorConfig};
    use crate::model::{build_rutlcscp_la_rc, build_tlcscp};
    use crate::types::RobustConfig;

    #[test]
    fn rc_model_round_trips() {
        let inst = generate(&GeneratorConfig::new(4, 4, 3, 10.0, 6.0, 15.0, 15.0, 2)).unwrap();
        let model = build_rutlcscp_la_rc(&inst, &RobustConfig::new(0.85, 1)).unwrap();
        let text = write_lp(&model);
        let back = parse_lp(&text).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn empty_row_survives() {
        let mut inst = generate(&GeneratorConfig::new(2, 2, 2, 10.0, 5.0, 5.0, 5.0, 1)).unwrap();
        inst.q_nom[1] = vec![1.0, 1.0];
        inst.q_dev[1] = vec![0.0, 0.0];
        let model = build_tlcscp(&inst).unwrap();
        let back = parse_lp(&write_lp(&model)).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn hand_written_file() {
        let text = r"\ toy
Minimize
 cost: 2 x + 3y_0 - 0 z
Subject To
 c1: x + y_0 >= 1
 -x
   + 2.5e-1 y_0 <= -0.5
 r: x - y_0 = 0
Bounds
 x <= 4
 -inf <= z <= 10
 1 <= w <= 2
Binaries
 y_0
Generals
 w
End
";
        let m = parse_lp(text).unwrap();
        assert_eq!(m.num_vars(), 4);
        assert_eq!(m.objective, vec![(0, 2.0), (1, 3.0)]);
        assert_eq!(m.constraints[1].coeffs, vec![(0, -1.0), (1, 0.25)]);
        assert_eq!(m.constraints[1].rhs, -0.5);
        assert_eq!(m.constraints[1].label, RowLabel::Other("c1".into()));
        assert_eq!(m.constraints[2].sense, Sense::Eq);
        let z = m.column("z").unwrap();
        assert_eq!(m.variables[z].lower, f64::NEG_INFINITY);
        assert_eq!(m.variables[m.column("x").unwrap()].upper, 4.0);
        assert_eq!(m.variables[m.column("w").unwrap()].kind, VarKind::Integer);
        assert_eq!(m.y_cols, vec![1]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_lp("Minimize\n obj: x\nSubject To\n c: x + >= 1\nEnd\n").unwrap_err();
        assert!(matches!(e, Error::LpParse { line: 4, .. }), "{e}");
        assert!(parse_lp("Maximize\n x\nEnd\n").is_err());
        assert!(parse_lp(" x + y\n").is_err());
    }
}
