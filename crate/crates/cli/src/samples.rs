//! Reading n × d sample matrices from comma-separated text.

use tfit_core::{Error, WeightedSample};

fn parse_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        msg: msg.into(),
    }
}

/// One sample per row; a first row that does not parse as numbers is taken
/// as a header. Blank lines and `#` comments are ignored.
pub fn parse_samples(text: &str) -> Result<Vec<Vec<f64>>, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut first = true;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            let msg = match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    format!("expected {expected_len} columns, found {len}")
                }
                _ => e.to_string(),
            };
            parse_err(line, msg)
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, String> = rec
            .iter()
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format!("bad value '{t}'")),
            })
            .collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if first => {}
            Err(msg) => return Err(parse_err(line, msg)),
        }
        first = false;
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no samples in input"));
    }
    Ok(rows)
}

pub fn read_samples(text: &str) -> Result<WeightedSample, Error> {
    WeightedSample::uniform(parse_samples(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_comments() {
        let rows = parse_samples("x,y\n# note\n1,2\n\n3, 4.5\n").unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 4.5]]);
    }

    #[test]
    fn errors_name_the_line() {
        assert_eq!(
            parse_samples("1,2\n3,4\n5,oops\n").unwrap_err(),
            Error::Parse { line: 3, msg: "bad value 'oops'".into() }
        );
        assert!(matches!(parse_samples("1,2\n3\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_samples(""), Err(Error::Parse { line: 1, .. })));
        assert!(parse_samples("a,b\n").is_err());
    }
}
