use std::path::Path;

use nalgebra::DVector;
use npd_core::{Complex64, Error, Result};

/// One sample per line: `re` or `re,im`. Blank lines and `#` comments are skipped.
pub fn read_signal(path: &Path) -> Result<DVector<Complex64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_signal(&text, path)
}

pub fn parse_signal(text: &str, path: &Path) -> Result<DVector<Complex64>> {
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let malformed = |msg: String| Error::MalformedFile { path: path.to_path_buf(), line: i + 1, msg };
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| malformed(format!("'{s}' is not a number")));
        let z = match parts.as_slice() {
            [re] => Complex64::new(num(re)?, 0.0),
            [re, im] => Complex64::new(num(re)?, num(im)?),
            _ => return Err(malformed(format!("expected `re` or `re,im`, got '{line}'"))),
        };
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(malformed("non-finite sample".into()));
        }
        samples.push(z);
    }
    if samples.is_empty() {
        return Err(Error::MalformedFile { path: path.to_path_buf(), line: 0, msg: "no samples".into() });
    }
    Ok(DVector::from_vec(samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_and_complex_lines() {
        let v = parse_signal("# header\n1.5\n\n-2, 0.5  # trailing\n", Path::new("x")).unwrap();
        assert_eq!(v.as_slice(), &[Complex64::new(1.5, 0.0), Complex64::new(-2.0, 0.5)]);
    }

    #[test]
    fn bad_lines_report_their_number() {
        let err = parse_signal("1\n2\nabc\n", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::MalformedFile { line: 3, .. }));
        assert!(parse_signal("1,2,3\n", Path::new("x")).is_err());
        assert!(parse_signal("# nothing\n", Path::new("x")).is_err());
    }
}
