use super::IoError;

pub const FORMAT_VERSION: u32 = 1;
pub const FORMAT_SESSION: &str = "gazekit-session";
pub const FORMAT_ESTIMATES: &str = "gazekit-estimates";
pub const FORMAT_TRUTH: &str = "gazekit-truth";
pub const FORMAT_MIRROR: &str = "gazekit-mirror";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileHeader {
    pub format_name: String,
    pub format_version: u32,
    /// Metadata in file order.
    pub metadata: Vec<(String, String)>,
}

impl FileHeader {
    pub fn new(format_name: &str) -> Self {
        Self { format_name: format_name.into(), format_version: FORMAT_VERSION, metadata: vec![] }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.metadata.push((key.into(), value.into()));
    }

    pub fn render(&self) -> String {
        let mut s = format!("#! {} v{}\n", self.format_name, self.format_version);
        for (k, v) in &self.metadata {
            s.push_str(&format!("#@ {k} = {v}\n"));
        }
        s
    }
}

/// Body line with its 1-based line number.
#[derive(Debug)]
pub(crate) struct BodyLine<'a> {
    pub line: usize,
    pub text: &'a str,
}

/// Splits a text file into its header and the non-comment body lines.
pub(crate) fn split_header<'a>(text: &'a str, expected: &str) -> Result<(FileHeader, Vec<BodyLine<'a>>), IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (_, first) = lines.next().ok_or(IoError::MissingHeader)?;
    let rest = first.strip_prefix("#!").ok_or(IoError::MissingHeader)?;
    let mut parts = rest.split_whitespace();
    let (Some(name), Some(ver), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(IoError::malformed(1, "header must be `#! <format> v<version>`"));
    };
    if name != expected {
        return Err(IoError::WrongFormat { expected: expected.into(), found: name.into() });
    }
    let version: u32 = ver
        .strip_prefix('v')
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| IoError::malformed(1, format!("invalid version `{ver}`")))?;
    if version != FORMAT_VERSION {
        return Err(IoError::VersionMismatch { found: version, supported: FORMAT_VERSION });
    }
    let mut header = FileHeader::new(expected);
    let mut body = vec![];
    for (line, text) in lines {
        if let Some(meta) = text.strip_prefix("#@") {
            if !body.is_empty() {
                return Err(IoError::malformed(line, "metadata must precede records"));
            }
            let (k, v) = meta.split_once('=').ok_or_else(|| IoError::malformed(line, "metadata must be `#@ key = value`"))?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(IoError::malformed(line, "invalid metadata key"));
            }
            header.metadata.push((k.to_string(), v.trim().to_string()));
        } else if text.trim().is_empty() || text.starts_with('#') {
            continue;
        } else {
            body.push(BodyLine { line, text });
        }
    }
    Ok((header, body))
}

/// Parses whitespace-separated floats, requiring exactly `n`.
pub(crate) fn parse_floats(line: usize, fields: &[&str], n: usize, what: &str) -> Result<Vec<f64>, IoError> {
    if fields.len() != n {
        return Err(IoError::malformed(line, format!("{what}: expected {n} values, got {}", fields.len())));
    }
    fields
        .iter()
        .map(|f| {
            let x: f64 = f.parse().map_err(|_| IoError::malformed(line, format!("{what}: invalid number `{f}`")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(IoError::malformed(line, format!("{what}: non-finite value")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip_keeps_unknown_keys() {
        let mut h = FileHeader::new(FORMAT_SESSION);
        h.push("zeta", "1");
        h.push("alpha", "two words");
        let text = h.render();
        let (parsed, body) = split_header(&text, FORMAT_SESSION).unwrap();
        assert_eq!(parsed, h);
        assert!(body.is_empty());
    }

    #[test]
    fn version_and_format_errors_are_distinct() {
        assert_eq!(
            split_header("#! gazekit-session v2\n", FORMAT_SESSION).unwrap_err(),
            IoError::VersionMismatch { found: 2, supported: 1 }
        );
        assert!(matches!(split_header("#! other v1\n", FORMAT_SESSION), Err(IoError::WrongFormat { .. })));
        assert_eq!(split_header("", FORMAT_SESSION).unwrap_err(), IoError::MissingHeader);
        assert!(matches!(split_header("#! gazekit-session 1\n", FORMAT_SESSION), Err(IoError::Malformed { line: 1, .. })));
    }
}
