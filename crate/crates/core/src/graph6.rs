//! graph6 text format: parser and encoder.
//!
//! A record is the vertex count `N(n)` followed by the upper triangle of the
//! adjacency matrix in column-major order — bit `pos` covers pair `(i, j)`
//! with `i < j`, ordered `(0,1), (0,2), (1,2), (0,3), …` — packed into 6-bit
//! groups, each stored as `byte − 63`. Valid bytes are `'?'..='~'`; trailing
//! padding bits must be zero. `N(n)` is one byte for `n ≤ 62`, `'~'` plus
//! three bytes (18 bits) up to 258047, `"~~"` plus six bytes (36 bits) above
//! that. An optional `>>graph6<<` header prefix is accepted and stripped.

use crate::graph::Graph;
use thiserror::Error;

/// Largest vertex count the parser will materialize. The format itself admits
/// n up to 2³⁶−1, but graphs are stored densely, so unbounded records from
/// untrusted input would be a memory denial-of-service.
pub const MAX_VERTICES: u64 = crate::graph::MAX_WIRE_VERTICES as u64;

const HEADER: &str = ">>graph6<<";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Graph6Error {
    #[error("empty graph6 record")]
    Empty,
    #[error("byte 0x{byte:02x} at offset {offset} is outside the graph6 range '?'..='~'")]
    ByteOutOfRange { byte: u8, offset: usize },
    #[error("record holds {found} bytes but {expected} are required at offset {offset}")]
    Truncated {
        expected: usize,
        found: usize,
        offset: usize,
    },
    #[error("unexpected trailing data at offset {offset}")]
    TrailingBytes { offset: usize },
    #[error("nonzero padding bit in the final group at offset {offset}")]
    NonzeroPadding { offset: usize },
    #[error("vertex count {n} exceeds the supported maximum {max}")]
    TooManyVertices { n: u64, max: u64 },
}

/// Record-level error carrying the 1-based line it came from.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {source}")]
pub struct Graph6LineError {
    pub line: usize,
    #[source]
    pub source: Graph6Error,
}

fn sextet(bytes: &[u8], offset: usize) -> Result<u64, Graph6Error> {
    match bytes.get(offset) {
        None => Err(Graph6Error::Truncated {
            expected: offset + 1,
            found: bytes.len(),
            offset,
        }),
        Some(&b) if !(63..=126).contains(&b) => Err(Graph6Error::ByteOutOfRange { byte: b, offset }),
        Some(&b) => Ok((b - 63) as u64),
    }
}

/// Parses one graph6 record (optionally prefixed by the `>>graph6<<` header).
pub fn parse_graph6(record: &str) -> Result<Graph, Graph6Error> {
    let record = record.strip_prefix(HEADER).unwrap_or(record);
    let bytes = record.as_bytes();
    if bytes.is_empty() {
        return Err(Graph6Error::Empty);
    }
    for (offset, &byte) in bytes.iter().enumerate() {
        if !(63..=126).contains(&byte) {
            return Err(Graph6Error::ByteOutOfRange { byte, offset });
        }
    }

    // vertex count
    let (n, mut pos) = if sextet(bytes, 0)? < 63 {
        (sextet(bytes, 0)?, 1)
    } else if sextet(bytes, 1)? < 63 {
        let n = (sextet(bytes, 1)? << 12) | (sextet(bytes, 2)? << 6) | sextet(bytes, 3)?;
        (n, 4)
    } else {
        let mut n = 0u64;
        for k in 0..6 {
            n = (n << 6) | sextet(bytes, 2 + k)?;
        }
        (n, 8)
    };
    if n > MAX_VERTICES {
        return Err(Graph6Error::TooManyVertices {
            n,
            max: MAX_VERTICES,
        });
    }
    let n = n as usize;

    let nbits = n * n.saturating_sub(1) / 2;
    let ngroups = nbits.div_ceil(6);
    if bytes.len() < pos + ngroups {
        return Err(Graph6Error::Truncated {
            expected: pos + ngroups,
            found: bytes.len(),
            offset: bytes.len(),
        });
    }
    if bytes.len() > pos + ngroups {
        return Err(Graph6Error::TrailingBytes {
            offset: pos + ngroups,
        });
    }

    let mut g = Graph::empty(n);
    let mut bit = 0usize;
    for j in 1..n {
        for i in 0..j {
            let group = sextet(bytes, pos + bit / 6)?;
            if (group >> (5 - bit % 6)) & 1 == 1 {
                g.add_edge(i, j).expect("indices in range");
            }
            bit += 1;
        }
    }
    // validate the final group's padding
    while bit < 6 * ngroups {
        let group = sextet(bytes, pos + bit / 6)?;
        if (group >> (5 - bit % 6)) & 1 == 1 {
            return Err(Graph6Error::NonzeroPadding {
                offset: pos + bit / 6,
            });
        }
        bit += 1;
    }
    pos += ngroups;
    debug_assert_eq!(pos, bytes.len());
    Ok(g)
}

/// Encodes a graph as a canonical (headerless) graph6 record.
pub fn encode_graph6(g: &Graph) -> String {
    let n = g.n();
    let mut out: Vec<u8> = Vec::new();
    let nv = n as u64;
    if nv <= 62 {
        out.push(nv as u8 + 63);
    } else if nv <= 258_047 {
        out.push(126);
        out.push(((nv >> 12) & 63) as u8 + 63);
        out.push(((nv >> 6) & 63) as u8 + 63);
        out.push((nv & 63) as u8 + 63);
    } else {
        out.push(126);
        out.push(126);
        for k in (0..6).rev() {
            out.push(((nv >> (6 * k)) & 63) as u8 + 63);
        }
    }
    let mut group = 0u8;
    let mut filled = 0u8;
    for j in 1..n {
        for i in 0..j {
            group = (group << 1) | u8::from(g.has_edge(i, j));
            filled += 1;
            if filled == 6 {
                out.push(group + 63);
                group = 0;
                filled = 0;
            }
        }
    }
    if filled > 0 {
        out.push((group << (6 - filled)) + 63);
    }
    String::from_utf8(out).expect("graph6 bytes are ASCII")
}

/// Parses a graph6 file body: one record per line, blank lines skipped.
pub fn parse_graph6_lines(text: &str) -> Result<Vec<Graph>, Graph6LineError> {
    let mut graphs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let g = parse_graph6(line).map_err(|source| Graph6LineError {
            line: idx + 1,
            source,
        })?;
        graphs.push(g);
    }
    Ok(graphs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_graph;
    use proptest::prelude::*;

    #[test]
    fn single_vertex_record() {
        let g = parse_graph6("@").unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(encode_graph6(&g), "@");
    }

    #[test]
    fn format_reference_example() {
        // From the format description: DQc is the 5-vertex graph with
        // edges 0-2, 0-4, 1-3, 3-4.
        let g = parse_graph6("DQc").unwrap();
        assert_eq!(g.n(), 5);
        assert_eq!(g.edge_list(), vec![(0, 2), (0, 4), (1, 3), (3, 4)]);
        assert_eq!(encode_graph6(&g), "DQc");
    }

    #[test]
    fn frozen_spot_records() {
        assert_eq!(encode_graph6(&Graph::complete(4)), "C~");
        assert_eq!(encode_graph6(&Graph::cycle(6)), "EhEG");
        let two_triangles = Graph::complete(3).disjoint_union(&Graph::complete(3));
        assert_eq!(encode_graph6(&two_triangles), "EwCW");
    }

    #[test]
    fn header_is_stripped() {
        let g = parse_graph6(">>graph6<<DQc").unwrap();
        assert_eq!(g.n(), 5);
    }

    #[test]
    fn reference_corpus_round_trips() {
        let text = include_str!("../tests/fixtures/graph6_corpus.json");
        let corpus: serde_json::Value = serde_json::from_str(text).unwrap();
        let mut seen = 0;
        for item in corpus.as_array().unwrap() {
            let record = item["record"].as_str().unwrap();
            let n = item["n"].as_u64().unwrap() as usize;
            let edges: Vec<(usize, usize)> = item["edges"]
                .as_array()
                .unwrap()
                .iter()
                .map(|e| {
                    (
                        e[0].as_u64().unwrap() as usize,
                        e[1].as_u64().unwrap() as usize,
                    )
                })
                .collect();
            let g = parse_graph6(record).unwrap();
            assert_eq!(g.n(), n, "vertex count of {record}");
            assert_eq!(g.edge_list(), edges, "edge list of {record}");
            assert_eq!(encode_graph6(&g), record, "re-encoding of {record}");
            seen += 1;
        }
        assert!(seen >= 50, "corpus unexpectedly small: {seen}");
    }

    #[test]
    fn malformed_records_report_offsets() {
        assert_eq!(parse_graph6(""), Err(Graph6Error::Empty));
        assert_eq!(
            parse_graph6("D "),
            Err(Graph6Error::ByteOutOfRange {
                byte: b' ',
                offset: 1
            })
        );
        // n = 5 needs 10 edge bits = 2 groups; provide only 1
        assert_eq!(
            parse_graph6("DQ"),
            Err(Graph6Error::Truncated {
                expected: 3,
                found: 2,
                offset: 2
            })
        );
        assert_eq!(
            parse_graph6("DQcc"),
            Err(Graph6Error::TrailingBytes { offset: 3 })
        );
        // n = 2: one edge bit, five padding bits; group 010000 ('O') sets a pad bit.
        assert_eq!(
            parse_graph6("AO"),
            Err(Graph6Error::NonzeroPadding { offset: 1 })
        );
        // 18-bit form encoding a count beyond the cap: (62,62,62) → 257982
        assert_eq!(
            parse_graph6("~}}}"),
            Err(Graph6Error::TooManyVertices {
                n: 257_982,
                max: MAX_VERTICES
            })
        );
    }

    #[test]
    fn line_parser_reports_line_numbers() {
        let graphs = parse_graph6_lines("@\n\nDQc\n").unwrap();
        assert_eq!(graphs.len(), 2);
        let err = parse_graph6_lines("@\nD \n").unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(
            err.source,
            Graph6Error::ByteOutOfRange {
                byte: b' ',
                offset: 1
            }
        );
    }

    proptest! {
        #[test]
        fn encode_parse_round_trip(n in 0usize..70, p in 0.0f64..1.0, seed in 0u64..1000) {
            let g = random_graph(n, p, seed);
            let rec = encode_graph6(&g);
            let back = parse_graph6(&rec).unwrap();
            prop_assert_eq!(&g, &back);
            prop_assert_eq!(encode_graph6(&back), rec);
        }
    }
}
