//! COO text format (FROSTT-style `.tns`): one entry per line, k 1-based
//! indices followed by a decimal value, with an optional leading header
//! `# shape m1 m2 ... mk`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Shape, SparseObservations};
use crate::error::{Error, Result};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a `.tns` file. The shape comes from the header when present,
/// otherwise from the maximum index seen per mode.
pub fn read_tns(path: impl AsRef<Path>) -> Result<SparseObservations> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut declared_shape: Option<Vec<usize>> = None;
    let mut entries: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut max_index: Vec<usize> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let mut tokens = rest.split_ascii_whitespace();
            if tokens.next() == Some("shape") && declared_shape.is_none() && entries.is_empty() {
                let dims: Vec<usize> = tokens
                    .map(|t| {
                        t.parse::<usize>()
                            .map_err(|_| parse_err(path, lineno, format!("bad dimension '{t}'")))
                    })
                    .collect::<Result<_>>()?;
                if dims.len() < 2 {
                    return Err(parse_err(path, lineno, "shape header needs at least 2 dims"));
                }
                declared_shape = Some(dims);
            }
            continue; // other '#' lines are comments
        }
        let tokens: Vec<&str> = trimmed.split_ascii_whitespace().collect();
        if tokens.len() < 3 {
            return Err(parse_err(path, lineno, "expected k indices and a value"));
        }
        let k = tokens.len() - 1;
        if let Some(dims) = &declared_shape {
            if k != dims.len() {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("expected {} indices, found {k}", dims.len()),
                ));
            }
        } else if !entries.is_empty() && k != max_index.len() {
            return Err(parse_err(path, lineno, "inconsistent index count"));
        }
        let mut index = Vec::with_capacity(k);
        for t in &tokens[..k] {
            let one_based: usize = t
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad index '{t}'")))?;
            if one_based == 0 {
                return Err(parse_err(path, lineno, "indices are 1-based"));
            }
            index.push(one_based - 1);
        }
        let value: f64 = tokens[k]
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad value '{}'", tokens[k])))?;
        if max_index.len() < k {
            max_index.resize(k, 0);
        }
        for (m, &l) in max_index.iter_mut().zip(&index) {
            *m = (*m).max(l + 1);
        }
        entries.push((index, value));
    }

    let dims = match declared_shape {
        Some(dims) => dims,
        None => {
            if entries.is_empty() {
                return Err(parse_err(path, 0, "no entries and no shape header"));
            }
            max_index
        }
    };
    let shape = Shape::new(dims)?;
    SparseObservations::new(shape, entries)
}

/// Writes a `.tns` file with a shape header and 1-based indices, LF endings.
pub fn write_tns(path: impl AsRef<Path>, obs: &SparseObservations) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_tns_to(&mut w, obs)?;
    w.flush()?;
    Ok(())
}

pub fn write_tns_to(w: &mut impl Write, obs: &SparseObservations) -> Result<()> {
    write!(w, "# shape")?;
    for m in obs.shape().dims() {
        write!(w, " {m}")?;
    }
    writeln!(w)?;
    for (idx, v) in obs.iter() {
        for l in idx {
            write!(w, "{} ", l + 1)?;
        }
        writeln!(w, "{v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn tmp(name: &str, contents: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("grtc-tns-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn reads_single_line_with_header() {
        let p = tmp("single.tns", "# shape 2 2 2\n1 1 1 5.0\n");
        let obs = read_tns(&p).unwrap();
        assert_eq!(obs.shape().dims(), &[2, 2, 2]);
        assert_eq!(obs.nnz(), 1);
        assert_eq!(obs.index(0), &[0, 0, 0]);
        assert_eq!(obs.value(0), 5.0);
    }

    #[test]
    fn accepts_scientific_notation_and_infers_shape() {
        let p = tmp("sci.tns", "2 3 1.5e-3\n1 1 -2E2\n");
        let obs = read_tns(&p).unwrap();
        assert_eq!(obs.shape().dims(), &[2, 3]);
        assert_eq!(obs.value(0), -200.0);
        assert_eq!(obs.value(1), 1.5e-3);
    }

    #[test]
    fn duplicate_entries_are_an_error() {
        let p = tmp("dup.tns", "# shape 2 2\n1 1 1.0\n1 1 2.0\n");
        assert!(matches!(read_tns(&p), Err(Error::DuplicateEntry { .. })));
    }

    #[test]
    fn reports_line_numbers() {
        let p = tmp("bad.tns", "# shape 2 2\n1 1 1.0\n1 x 2.0\n");
        match read_tns(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_canonical() {
        let mut rng = crate::testutil::rng(21);
        let shape = Shape::new(vec![4, 3, 2]).unwrap();
        let obs = crate::testutil::random_observations(&shape, 10, &mut rng);
        let p = std::env::temp_dir().join("grtc-tns-tests/roundtrip.tns");
        write_tns(&p, &obs).unwrap();
        let back = read_tns(&p).unwrap();
        assert_eq!(back.shape(), obs.shape());
        assert_eq!(back.values(), obs.values());
        for pos in 0..obs.nnz() {
            assert_eq!(back.index(pos), obs.index(pos));
        }
    }
}
