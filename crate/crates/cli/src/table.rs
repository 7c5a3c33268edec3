//! Aligned plain-text rendering of a JSON report.

use serde_json::Value;

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(match n.as_f64() {
            Some(x) if n.is_f64() => {
                let s = format!("{:.10}", x);
                // Round-off below the printed precision should not show a sign.
                if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
                    s.trim_start_matches('-').to_string()
                } else {
                    s
                }
            }
            _ => n.to_string(),
        }),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn is_matrix(v: &Value) -> Option<(usize, usize)> {
    let rows = v.as_array()?;
    let first = rows.first()?.as_array()?;
    first.first()?.as_array()?;
    Some((rows.len(), first.len()))
}

fn flatten(prefix: &str, v: &Value, pairs: &mut Vec<(String, String)>, tables: &mut Vec<(String, Vec<Value>)>) {
    if let Some(s) = scalar(v) {
        pairs.push((prefix.to_string(), s));
        return;
    }
    if let Some((r, c)) = is_matrix(v) {
        pairs.push((prefix.to_string(), format!("<{}x{} matrix>", r, c)));
        return;
    }
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{}.{}", prefix, k) };
                flatten(&key, x, pairs, tables);
            }
        }
        Value::Array(items) if items.iter().all(|x| x.is_object()) && !items.is_empty() => {
            tables.push((prefix.to_string(), items.clone()));
        }
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(|x| scalar(x).unwrap_or_else(|| "[..]".into())).collect();
            pairs.push((prefix.to_string(), format!("[{}]", parts.join(", "))));
        }
        _ => {}
    }
}

fn render_rows(name: &str, rows: &[Value], out: &mut String) {
    let mut cols: Vec<String> = Vec::new();
    for r in rows {
        for (k, v) in r.as_object().into_iter().flatten() {
            if scalar(v).is_some() && !cols.contains(k) {
                cols.push(k.clone());
            }
        }
    }
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| cols.iter().map(|c| r.get(c).and_then(scalar).unwrap_or_default()).collect())
        .collect();
    let widths: Vec<usize> = cols
        .iter()
        .enumerate()
        .map(|(i, c)| cells.iter().map(|row| row[i].chars().count()).chain([c.chars().count()]).max().unwrap_or(0))
        .collect();
    let line = |vals: &[String]| vals.iter().zip(&widths).map(|(v, w)| format!("{:<w$}", v, w = *w)).collect::<Vec<_>>().join("  ");
    out.push_str(&format!("\n{}\n", name));
    out.push_str(line(&cols).trim_end());
    out.push('\n');
    for row in &cells {
        out.push_str(line(row).trim_end());
        out.push('\n');
    }
}

pub fn render(report: &Value) -> String {
    let mut pairs = Vec::new();
    let mut tables = Vec::new();
    flatten("", report, &mut pairs, &mut tables);
    let w = pairs.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in &pairs {
        out.push_str(&format!("{:<w$}  {}\n", k, v, w = w));
    }
    for (name, rows) in &tables {
        render_rows(name, rows, &mut out);
    }
    out
}
