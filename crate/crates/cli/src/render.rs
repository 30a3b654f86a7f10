use serde_json::Value;

/// Plain-text table with left-aligned, space-padded columns.
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Table {
        Table {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let n = self.headers.len();
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate().take(n) {
                widths[i] = widths[i].max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let mut out = String::new();
            for (i, width) in widths.iter().enumerate() {
                let cell = cells.get(i).map(String::as_str).unwrap_or("");
                if i + 1 == n {
                    out.push_str(cell);
                } else {
                    out.push_str(&format!("{cell:<width$}  "));
                }
            }
            out.trim_end().to_string() + "\n"
        };
        let mut out = line(&self.headers);
        out.push_str(&line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>()));
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }
}

/// Two-column listing of the scalar-ish fields of a JSON object.
pub fn fields(value: &Value, skip: &[&str]) -> String {
    let mut t = Table::new(["field", "value"]);
    if let Some(obj) = value.as_object() {
        for (k, v) in obj {
            if skip.contains(&k.as_str()) || v.is_object() {
                continue;
            }
            t.row(vec![k.clone(), cell(v)]);
        }
    }
    t.render()
}

pub fn cell(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => i.to_string(),
            (_, Some(u), _) => u.to_string(),
            (_, _, Some(f)) => number(f),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Array(items) if items.len() > 12 => format!("({} items)", items.len()),
        Value::Array(items) if items.iter().all(|i| !i.is_array() && !i.is_object()) => {
            items.iter().map(cell).collect::<Vec<_>>().join(", ")
        }
        other => other.to_string(),
    }
}

pub fn number(f: f64) -> String {
    if f.fract() == 0.0 && f.abs() < 1e15 {
        format!("{f:.1}")
    } else {
        format!("{f:.4}")
    }
}

/// `name=value` pairs of a settings array.
pub fn settings(v: &Value) -> String {
    let pairs: Vec<String> = v
        .as_array()
        .map(|a| {
            a.iter()
                .map(|s| format!("{}={}", cell(&s["name"]), cell(&s["value"])))
                .collect()
        })
        .unwrap_or_default();
    if pairs.is_empty() {
        "(defaults)".into()
    } else {
        pairs.join(" ")
    }
}

/// Mean and stdev of every measure in an evaluation object.
pub fn evaluation(v: &Value) -> String {
    let mut t = Table::new(["measure", "mean", "stdev", "folds"]);
    if let Some(obj) = v.as_object() {
        for (name, m) in obj {
            if name == "confusion_matrix" {
                continue;
            }
            let folds = m["folds"].as_array().map_or(0, Vec::len);
            t.row(vec![
                name.clone(),
                cell(&m["mean"]),
                cell(&m["stdev"]),
                folds.to_string(),
            ]);
        }
    }
    t.render()
}
