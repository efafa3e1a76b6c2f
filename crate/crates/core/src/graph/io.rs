//! Edge-list text format: header `# nodes n`, then one line `i j w` per
//! undirected edge with 1-based indices and i < j.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::GraphAdjacency;
use crate::error::{Error, Result};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<GraphAdjacency> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut n: Option<usize> = None;
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let mut tokens = rest.split_ascii_whitespace();
            if tokens.next() == Some("nodes") {
                let count = tokens
                    .next()
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(path, lineno, "bad node count"))?;
                n = Some(count);
            }
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_ascii_whitespace().collect();
        if tokens.len() != 3 {
            return Err(parse_err(path, lineno, "expected 'i j w'"));
        }
        let i: usize = tokens[0]
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad index '{}'", tokens[0])))?;
        let j: usize = tokens[1]
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad index '{}'", tokens[1])))?;
        let w: f64 = tokens[2]
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad weight '{}'", tokens[2])))?;
        if i == 0 || j == 0 {
            return Err(parse_err(path, lineno, "indices are 1-based"));
        }
        if i >= j {
            return Err(parse_err(path, lineno, "edges must satisfy i < j"));
        }
        edges.push((i - 1, j - 1, w));
    }
    let n = n.unwrap_or_else(|| {
        edges
            .iter()
            .map(|&(_, j, _)| j + 1)
            .max()
            .unwrap_or(0)
    });
    GraphAdjacency::new(n, edges)
}

pub fn write_edge_list(path: impl AsRef<Path>, graph: &GraphAdjacency) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_edge_list_to(&mut w, graph)?;
    w.flush()?;
    Ok(())
}

pub fn write_edge_list_to(w: &mut impl Write, graph: &GraphAdjacency) -> Result<()> {
    writeln!(w, "# nodes {}", graph.n())?;
    for &(i, j, weight) in graph.edges() {
        writeln!(w, "{} {} {weight}", i + 1, j + 1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn tmp(name: &str, contents: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("grtc-graph-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn reads_header_and_edges() {
        let p = tmp("ok.edges", "# nodes 4\n1 2 1.0\n2 4 0.5\n");
        let g = read_edge_list(&p).unwrap();
        assert_eq!(g.n(), 4);
        assert_eq!(g.edges(), &[(0, 1, 1.0), (1, 3, 0.5)]);
    }

    #[test]
    fn rejects_reversed_edges_and_self_loops() {
        let rev = tmp("rev.edges", "# nodes 3\n2 1 1.0\n");
        assert!(read_edge_list(&rev).is_err());
        let selfloop = tmp("self.edges", "# nodes 3\n2 2 1.0\n");
        assert!(read_edge_list(&selfloop).is_err());
    }

    #[test]
    fn round_trip() {
        let g = crate::graph::chain_graph(5).unwrap();
        let p = std::env::temp_dir().join("grtc-graph-tests/chain.edges");
        write_edge_list(&p, &g).unwrap();
        assert_eq!(read_edge_list(&p).unwrap(), g);
    }
}
