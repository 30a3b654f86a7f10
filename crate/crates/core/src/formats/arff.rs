use super::{
    format_number, validate_attributes, AttributeKind, AttributeSpec, Cell, Dataset, DatasetError, FormatError,
};

#[derive(Debug, Clone, PartialEq)]
struct Token {
    text: String,
    quoted: bool,
}

enum Section {
    Preamble,
    Header,
    Data,
}

/// Parses one ARFF document.
///
/// Keywords are case-insensitive, `%` lines and blank lines are skipped and
/// `?` (unquoted) marks a missing value. `date` attributes and sparse rows
/// are rejected.
pub fn parse_arff(text: &str) -> Result<Dataset, FormatError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut section = Section::Preamble;
    let mut relation = String::new();
    let mut attributes: Vec<AttributeSpec> = Vec::new();
    let mut rows = Vec::new();

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        match section {
            Section::Data => rows.push(parse_row(line, line_no, &attributes)?),
            Section::Preamble | Section::Header => {
                let (keyword, rest) =
                    split_keyword(line).ok_or_else(|| malformed(line_no, "expected a header keyword"))?;
                match (keyword.as_str(), &section) {
                    ("@relation", Section::Preamble) => {
                        relation = parse_relation(rest, line_no)?;
                        section = Section::Header;
                    }
                    ("@relation", Section::Header) => return Err(malformed(line_no, "duplicate @relation")),
                    (_, Section::Preamble) => return Err(FormatError::MissingSection("@relation")),
                    ("@attribute", _) => {
                        let attr = parse_attribute(rest, line_no)?;
                        attributes.push(attr);
                        validate_attributes(&attributes).map_err(|e| malformed(line_no, &e.to_string()))?;
                    }
                    ("@data", _) => {
                        if !rest.trim().is_empty() {
                            return Err(malformed(line_no, "unexpected text after @data"));
                        }
                        if attributes.is_empty() {
                            return Err(FormatError::MissingSection("@attribute"));
                        }
                        section = Section::Data;
                    }
                    (other, _) => return Err(malformed(line_no, &format!("unknown keyword `{other}`"))),
                }
            }
        }
    }

    match section {
        Section::Preamble => Err(FormatError::MissingSection("@relation")),
        Section::Header => Err(FormatError::MissingSection("@data")),
        Section::Data => Ok(Dataset {
            relation,
            attributes,
            rows,
        }),
    }
}

fn malformed(line: usize, reason: &str) -> FormatError {
    FormatError::MalformedHeader {
        line,
        reason: reason.to_string(),
    }
}

fn split_keyword(line: &str) -> Option<(String, &str)> {
    if !line.starts_with('@') {
        return None;
    }
    let end = line.find(char::is_whitespace).unwrap_or(line.len());
    Some((line[..end].to_ascii_lowercase(), &line[end..]))
}

fn parse_relation(rest: &str, line_no: usize) -> Result<String, FormatError> {
    let rest = rest.trim();
    if rest.is_empty() {
        return Err(malformed(line_no, "@relation needs a name"));
    }
    if rest.starts_with('\'') || rest.starts_with('"') {
        let mut chars = rest.chars().peekable();
        let name = read_quoted(&mut chars, line_no)?;
        if chars.any(|c| !c.is_whitespace()) {
            return Err(malformed(line_no, "unexpected text after relation name"));
        }
        Ok(name)
    } else {
        Ok(rest.to_string())
    }
}

fn parse_attribute(rest: &str, line_no: usize) -> Result<AttributeSpec, FormatError> {
    let rest = rest.trim_start();
    let mut chars = rest.chars().peekable();
    let name = match chars.peek() {
        Some('\'') | Some('"') => read_quoted(&mut chars, line_no)?,
        Some(_) => {
            let mut name = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() || c == '{' {
                    break;
                }
                name.push(c);
                chars.next();
            }
            name
        }
        None => return Err(malformed(line_no, "@attribute needs a name")),
    };
    let type_spec: String = chars.collect();
    let type_spec = type_spec.trim();
    let kind = if let Some(inner) = type_spec.strip_prefix('{') {
        let inner = inner
            .strip_suffix('}')
            .ok_or_else(|| malformed(line_no, "unterminated nominal specification"))?;
        let tokens = split_tokens(inner, line_no)?;
        let mut labels = Vec::with_capacity(tokens.len());
        for token in tokens {
            if token.text.is_empty() && !token.quoted {
                return Err(malformed(line_no, "empty nominal label"));
            }
            labels.push(token.text);
        }
        AttributeKind::Nominal(labels)
    } else {
        match type_spec.to_ascii_lowercase().as_str() {
            "numeric" | "real" | "integer" => AttributeKind::Numeric,
            "string" => AttributeKind::String,
            "" => return Err(malformed(line_no, "@attribute needs a type")),
            t if t.starts_with("date") => return Err(malformed(line_no, "date attributes are not supported")),
            t => return Err(malformed(line_no, &format!("unsupported attribute type `{t}`"))),
        }
    };
    let attr = AttributeSpec { name, kind };
    validate_attributes(std::slice::from_ref(&attr)).map_err(|e: DatasetError| malformed(line_no, &e.to_string()))?;
    Ok(attr)
}

fn parse_row(line: &str, line_no: usize, attributes: &[AttributeSpec]) -> Result<Vec<Cell>, FormatError> {
    let tokens = split_tokens(line, line_no)?;
    if line.starts_with('{') || tokens.len() != attributes.len() {
        return Err(FormatError::ArityMismatch {
            line: line_no,
            expected: attributes.len(),
            got: tokens.len(),
        });
    }
    tokens
        .into_iter()
        .zip(attributes)
        .map(|(token, attr)| {
            if !token.quoted && token.text == "?" {
                return Ok(Cell::Missing);
            }
            match &attr.kind {
                AttributeKind::Numeric => match token.text.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(Cell::Number(v)),
                    _ => Err(FormatError::InvalidNumber {
                        line: line_no,
                        column: attr.name.clone(),
                        token: token.text,
                    }),
                },
                AttributeKind::Nominal(labels) => {
                    labels.iter().position(|l| *l == token.text).map(Cell::Category).ok_or(
                        FormatError::UnknownNominalValue {
                            line: line_no,
                            column: attr.name.clone(),
                            token: token.text,
                        },
                    )
                }
                AttributeKind::String => Ok(Cell::Text(token.text)),
            }
        })
        .collect()
}

/// Splits a comma-separated list, honouring single and double quotes.
fn split_tokens(input: &str, line_no: usize) -> Result<Vec<Token>, FormatError> {
    let mut tokens = Vec::new();
    let mut chars = input.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        let token = match chars.peek() {
            Some('\'') | Some('"') => {
                let text = read_quoted(&mut chars, line_no)?;
                while chars.peek().is_some_and(|c| c.is_whitespace()) {
                    chars.next();
                }
                match chars.peek() {
                    None | Some(',') => {}
                    Some(_) => {
                        return Err(FormatError::ArityMismatch {
                            line: line_no,
                            expected: tokens.len() + 1,
                            got: tokens.len() + 2,
                        })
                    }
                }
                Token { text, quoted: true }
            }
            _ => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c == ',' {
                        break;
                    }
                    text.push(c);
                    chars.next();
                }
                Token {
                    text: text.trim().to_string(),
                    quoted: false,
                }
            }
        };
        tokens.push(token);
        match chars.next() {
            Some(',') => continue,
            _ => break,
        }
    }
    Ok(tokens)
}

fn read_quoted(chars: &mut std::iter::Peekable<std::str::Chars<'_>>, line_no: usize) -> Result<String, FormatError> {
    let quote = chars.next().expect("caller checked for a quote");
    let mut out = String::new();
    loop {
        match chars.next() {
            None => return Err(malformed(line_no, "unterminated quoted string")),
            Some(c) if c == quote => return Ok(out),
            Some('\\') => match chars.next() {
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                Some('t') => out.push('\t'),
                Some(c @ ('\\' | '\'' | '"' | '%')) => out.push(c),
                Some(c) => {
                    out.push('\\');
                    out.push(c);
                }
                None => return Err(malformed(line_no, "unterminated quoted string")),
            },
            Some(c) => out.push(c),
        }
    }
}

fn needs_quoting(s: &str) -> bool {
    s.is_empty()
        || s == "?"
        || s.starts_with('@')
        || s.chars()
            .any(|c| c.is_whitespace() || c.is_control() || matches!(c, ',' | '\'' | '"' | '\\' | '%' | '{' | '}'))
}

fn quote(s: &str) -> String {
    if !needs_quoting(s) {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

/// Writes the canonical ARFF form of `ds`.
pub fn write_arff(ds: &Dataset) -> String {
    let mut out = String::new();
    out.push_str("@relation ");
    out.push_str(&quote(&ds.relation));
    out.push('\n');
    for attr in &ds.attributes {
        out.push_str("@attribute ");
        out.push_str(&quote(&attr.name));
        out.push(' ');
        match &attr.kind {
            AttributeKind::Numeric => out.push_str("numeric"),
            AttributeKind::String => out.push_str("string"),
            AttributeKind::Nominal(labels) => {
                out.push('{');
                out.push_str(&labels.iter().map(|l| quote(l)).collect::<Vec<_>>().join(","));
                out.push('}');
            }
        }
        out.push('\n');
    }
    out.push_str("@data\n");
    for row in &ds.rows {
        let line = row
            .iter()
            .zip(&ds.attributes)
            .map(|(cell, attr)| match cell {
                Cell::Missing => "?".to_string(),
                Cell::Number(v) => format_number(*v),
                Cell::Category(i) => quote(&attr.kind.labels().expect("validated nominal")[*i]),
                Cell::Text(s) => quote(s),
            })
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&line);
        out.push('\n');
    }
    out
}
