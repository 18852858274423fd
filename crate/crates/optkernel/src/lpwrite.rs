use std::fmt::Write;

use crate::model::{IntegerModel, Relation};

fn sanitize(name: &str, fallback: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect();
    match cleaned.chars().next() {
        None => fallback.to_string(),
        Some(c) if c.is_ascii_digit() || c == '.' => format!("_{cleaned}"),
        Some(_) => cleaned,
    }
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn terms(out: &mut String, names: &[String], items: impl Iterator<Item = (usize, f64)>) {
    let mut any = false;
    for (k, (j, a)) in items.enumerate() {
        if k > 0 && k % 8 == 0 {
            out.push_str("\n   ");
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", num(a.abs()), names[j]);
        any = true;
    }
    if !any {
        let _ = write!(out, " 0 {}", names.first().map(String::as_str).unwrap_or("x"));
    }
}

/// Render a model in CPLEX LP format. Output is deterministic.
pub fn write_lp(model: &IntegerModel) -> String {
    let lp = &model.lp;
    let names: Vec<String> = lp
        .variables
        .iter()
        .enumerate()
        .map(|(j, v)| format!("{}_{j}", sanitize(&v.name, "x")))
        .collect();
    let mut out = String::from("\\ generated by optkernel\nMaximize\n obj:");
    terms(
        &mut out,
        &names,
        lp.variables.iter().enumerate().filter(|(_, v)| v.objective != 0.0).map(|(j, v)| (j, v.objective)),
    );
    if lp.objective_offset != 0.0 {
        let _ = write!(out, " + {} constant_one", num(lp.objective_offset));
    }
    out.push_str("\nSubject To\n");
    for (i, c) in lp.constraints.iter().enumerate() {
        let _ = write!(out, " {}_{i}:", sanitize(&c.name, "r"));
        terms(&mut out, &names, c.terms.iter().map(|(v, a)| (v.0, *a)));
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {rel} {}", num(c.rhs));
    }
    if lp.objective_offset != 0.0 {
        out.push_str(" fix_constant_one: constant_one = 1\n");
    }
    out.push_str("Bounds\n");
    for (v, name) in lp.variables.iter().zip(&names) {
        if v.lower == v.upper {
            let _ = writeln!(out, " {name} = {}", num(v.lower));
        } else if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", num(v.lower), num(v.upper));
        }
    }
    let ints: Vec<&String> = {
        let mut ids: Vec<usize> = model.integer.iter().map(|v| v.0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().map(|j| &names[j]).collect()
    };
    if !ints.is_empty() {
        out.push_str("General\n");
        for chunk in ints.chunks(8) {
            let line: Vec<&str> = chunk.iter().map(|s| s.as_str()).collect();
            let _ = writeln!(out, " {}", line.join(" "));
        }
    }
    out.push_str("End\n");
    out
}
