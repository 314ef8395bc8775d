//! Plain-text complex matrices.
//!
//! One entry per line as `re im`, row-major; a blank line separates
//! matrices; `#` starts a comment. The dimension of each matrix is the
//! square root of its entry count.

use std::fmt::Write as _;

use qae_core::{Complex64, Matrix64};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: expected two numbers `re im`, found {found:?}")]
    BadEntry { line: usize, found: String },
    #[error("line {line}: matrix ending here has {count} entries, not a square number")]
    NotSquare { line: usize, count: usize },
    #[error("no matrices found")]
    Empty,
}

pub fn parse(text: &str) -> Result<Vec<Matrix64>, ParseError> {
    let mut out = Vec::new();
    let mut entries: Vec<Complex64> = Vec::new();
    let mut last_line = 0;

    let mut flush = |entries: &mut Vec<Complex64>, line: usize| -> Result<(), ParseError> {
        if entries.is_empty() {
            return Ok(());
        }
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim * dim != entries.len() || dim == 0 {
            return Err(ParseError::NotSquare {
                line,
                count: entries.len(),
            });
        }
        let rows = entries.chunks(dim).map(<[_]>::to_vec).collect();
        out.push(Matrix64::from_rows(rows).expect("equal row lengths"));
        entries.clear();
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            // a comment-only line does not end a matrix
            if raw.trim().is_empty() {
                flush(&mut entries, last_line)?;
            }
            continue;
        }
        let nums: Vec<&str> = content.split_whitespace().collect();
        let parsed = match nums.as_slice() {
            [re, im] => re.parse::<f64>().ok().zip(im.parse::<f64>().ok()),
            _ => None,
        };
        let (re, im) = parsed.ok_or_else(|| ParseError::BadEntry {
            line,
            found: content.to_string(),
        })?;
        entries.push(Complex64::new(re, im));
        last_line = line;
    }
    flush(&mut entries, last_line)?;
    if out.is_empty() {
        return Err(ParseError::Empty);
    }
    Ok(out)
}

/// Writes matrices with round-trip exact float formatting.
pub fn format(matrices: &[Matrix64]) -> String {
    let mut s = String::new();
    for (i, m) in matrices.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                let z = m[(r, c)];
                writeln!(s, "{} {}", z.re, z.im).expect("write to String");
            }
        }
    }
    s
}

/// The three unitaries learned in the drift experiment (control run and
/// the two perturbed runs), as printed to three decimals.
pub const LEARNED_UNITARIES: &str = include_str!("../data/learned_unitaries.txt");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_file_parses() {
        let ms = parse(LEARNED_UNITARIES).unwrap();
        assert_eq!(ms.len(), 3);
        for m in &ms {
            assert_eq!((m.rows(), m.cols()), (3, 3));
            assert_eq!(m[(0, 2)], Complex64::new(0.0, 0.0));
        }
        assert_eq!(ms[0][(1, 2)], Complex64::new(-0.003, -0.973));
        assert_eq!(ms[2][(2, 2)], Complex64::new(0.142, 0.319));
    }

    #[test]
    fn round_trip_is_exact() {
        let m = Matrix64::from_rows(vec![
            vec![Complex64::new(0.1, 1.0 / 3.0), Complex64::new(-2e-17, 5.0)],
            vec![Complex64::new(std::f64::consts::PI, 0.0), Complex64::new(1.0, -1.0)],
        ])
        .unwrap();
        let text = format(&[m.clone(), m.clone()]);
        assert_eq!(parse(&text).unwrap(), vec![m.clone(), m]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            parse("1 0\n0 0\nx 1\n"),
            Err(ParseError::BadEntry {
                line: 3,
                found: "x 1".into()
            })
        );
        assert_eq!(
            parse("1 0\n0 0\n0 0\n\n1 0\n"),
            Err(ParseError::NotSquare { line: 3, count: 3 })
        );
        assert_eq!(parse("# nothing\n\n"), Err(ParseError::Empty));
        assert!(matches!(parse("1 2 3\n"), Err(ParseError::BadEntry { line: 1, .. })));
    }
}
