//! Spatial adjacency structure for CAR models.
//!
//! The adjacency file format is one line per region,
//! `region_id: neighbor_id,neighbor_id,...`, with `#` starting a comment
//! line. Edges must be listed symmetrically; nothing is symmetrized
//! silently. A region with no neighbors is rejected at parse time because
//! the CAR conditional is undefined for `m_i = 0`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: duplicate region id `{id}`")]
    DuplicateRegion { line: usize, id: String },
    #[error("line {line}: region `{id}` has an empty neighbor list")]
    EmptyNeighborList { line: usize, id: String },
    #[error("line {line}: malformed line (expected `region_id: n1,n2,...`)")]
    Malformed { line: usize },
    #[error("region `{id}` lists unknown neighbor `{neighbor}`")]
    UnknownNeighbor { id: String, neighbor: String },
    #[error("region `{id}` lists itself as a neighbor")]
    SelfLoop { id: String },
    #[error("asymmetric edge: `{from}` lists `{to}` but not vice versa")]
    AsymmetricEdge { from: String, to: String },
    #[error("region `{id}` lists neighbor `{neighbor}` more than once")]
    DuplicateEdge { id: String, neighbor: String },
    #[error("adjacency input contains no regions")]
    Empty,
    #[error("region index {index} out of range (graph has {len} regions)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("i/o error reading adjacency input: {0}")]
    Io(#[from] std::io::Error),
}

/// Symmetric neighborhood structure over an ordered set of regions.
///
/// Region order is the file order; every downstream per-region vector
/// indexes against this order. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionGraph {
    region_ids: Vec<String>,
    adjacency: Vec<Vec<usize>>,
}

impl RegionGraph {
    /// Build a graph from region ids and per-region neighbor lists,
    /// running the full validation suite.
    pub fn new(region_ids: Vec<String>, adjacency: Vec<Vec<usize>>) -> Result<Self, GraphError> {
        assert_eq!(region_ids.len(), adjacency.len());
        if region_ids.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut seen = HashMap::new();
        for (i, id) in region_ids.iter().enumerate() {
            if seen.insert(id.clone(), i).is_some() {
                return Err(GraphError::DuplicateRegion { line: i + 1, id: id.clone() });
            }
        }
        let g = RegionGraph { region_ids, adjacency };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<(), GraphError> {
        for (i, neigh) in self.adjacency.iter().enumerate() {
            if neigh.is_empty() {
                return Err(GraphError::EmptyNeighborList {
                    line: i + 1,
                    id: self.region_ids[i].clone(),
                });
            }
            let mut sorted = neigh.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != neigh.len() {
                let dup = duplicate_entry(neigh);
                return Err(GraphError::DuplicateEdge {
                    id: self.region_ids[i].clone(),
                    neighbor: self.region_ids[dup].clone(),
                });
            }
            for &j in neigh {
                if j >= self.len() {
                    return Err(GraphError::IndexOutOfRange { index: j, len: self.len() });
                }
                if j == i {
                    return Err(GraphError::SelfLoop { id: self.region_ids[i].clone() });
                }
                if !self.adjacency[j].contains(&i) {
                    return Err(GraphError::AsymmetricEdge {
                        from: self.region_ids[i].clone(),
                        to: self.region_ids[j].clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.region_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region_ids.is_empty()
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.region_ids.iter().position(|r| r == id)
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// Number of neighbors `m_i`.
    pub fn neighbor_count(&self, i: usize) -> Result<usize, GraphError> {
        self.adjacency
            .get(i)
            .map(Vec::len)
            .ok_or(GraphError::IndexOutOfRange { index: i, len: self.len() })
    }

    pub fn neighbor_counts(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// Undirected edge count.
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Number of connected components. The intrinsic CAR only needs local
    /// neighborhoods, so a disconnected graph is usable; callers should
    /// warn when this exceeds 1 (identifiability is resolved per component
    /// by the sum-to-zero recentering in the model code).
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.len()];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for &j in &self.adjacency[i] {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        components
    }

    /// Serialize back to the adjacency text format. Round trips exactly
    /// through [`load_adjacency`].
    pub fn to_adjacency_text(&self) -> String {
        let mut out = String::new();
        for (i, neigh) in self.adjacency.iter().enumerate() {
            let names: Vec<&str> =
                neigh.iter().map(|&j| self.region_ids[j].as_str()).collect();
            writeln!(out, "{}: {}", self.region_ids[i], names.join(",")).unwrap();
        }
        out
    }
}

fn duplicate_entry(neigh: &[usize]) -> usize {
    let mut seen = std::collections::HashSet::new();
    for &j in neigh {
        if !seen.insert(j) {
            return j;
        }
    }
    unreachable!("caller established a duplicate exists")
}

/// Parse and validate an adjacency text stream.
///
/// Asymmetry is an error, never repaired: a file that says `A: B` must
/// also say `B: A`.
pub fn load_adjacency<R: BufRead>(source: R) -> Result<RegionGraph, GraphError> {
    let mut ids: Vec<String> = Vec::new();
    let mut neighbor_names: Vec<Vec<String>> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();

    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = match line.split_once('#') {
            Some((before, _)) => before,
            None => line.as_str(),
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        let (id, rest) = content
            .split_once(':')
            .ok_or(GraphError::Malformed { line: lineno })?;
        let id = id.trim();
        if id.is_empty() {
            return Err(GraphError::Malformed { line: lineno });
        }
        let names: Vec<String> = rest
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect();
        if names.is_empty() {
            return Err(GraphError::EmptyNeighborList { line: lineno, id: id.to_owned() });
        }
        if index.insert(id.to_owned(), ids.len()).is_some() {
            return Err(GraphError::DuplicateRegion { line: lineno, id: id.to_owned() });
        }
        ids.push(id.to_owned());
        neighbor_names.push(names);
    }

    if ids.is_empty() {
        return Err(GraphError::Empty);
    }

    let mut adjacency = Vec::with_capacity(ids.len());
    for (i, names) in neighbor_names.iter().enumerate() {
        let mut row = Vec::with_capacity(names.len());
        for name in names {
            let &j = index.get(name).ok_or_else(|| GraphError::UnknownNeighbor {
                id: ids[i].clone(),
                neighbor: name.clone(),
            })?;
            row.push(j);
        }
        adjacency.push(row);
    }

    RegionGraph::new(ids, adjacency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn load(text: &str) -> Result<RegionGraph, GraphError> {
        load_adjacency(text.as_bytes())
    }

    #[test]
    fn chain_neighbor_counts() {
        let g = load("A: B\nB: A,C\nC: B\n").unwrap();
        assert_eq!(g.neighbor_counts(), vec![1, 2, 1]);
        assert_eq!(g.neighbor_count(1).unwrap(), 2);
        assert_eq!(g.region_ids(), ["A", "B", "C"]);
    }

    #[test]
    fn complete_graph_k4() {
        let g = load("a: b,c,d\nb: a,c,d\nc: a,b,d\nd: a,b,c\n").unwrap();
        for i in 0..4 {
            assert_eq!(g.neighbor_count(i).unwrap(), 3);
        }
    }

    #[test]
    fn isolated_region_is_error() {
        let err = load("A:\n").unwrap_err();
        assert!(matches!(err, GraphError::EmptyNeighborList { .. }));
    }

    #[test]
    fn asymmetric_edge_is_error() {
        let err = load("A: B\nB: A,C\nC: A\n").unwrap_err();
        assert!(matches!(err, GraphError::AsymmetricEdge { .. }));
    }

    #[test]
    fn self_loop_is_error() {
        let err = load("A: A,B\nB: A\n").unwrap_err();
        assert!(matches!(err, GraphError::SelfLoop { .. }));
    }

    #[test]
    fn duplicate_region_is_error() {
        let err = load("A: B\nB: A\nA: B\n").unwrap_err();
        assert!(matches!(err, GraphError::DuplicateRegion { .. }));
    }

    #[test]
    fn unknown_neighbor_is_error() {
        let err = load("A: B\nB: A,Q\n").unwrap_err();
        assert!(matches!(err, GraphError::UnknownNeighbor { .. }));
    }

    #[test]
    fn empty_input_is_error() {
        assert!(matches!(load("# only a comment\n").unwrap_err(), GraphError::Empty));
    }

    #[test]
    fn index_out_of_range() {
        let g = load("A: B\nB: A\n").unwrap();
        assert!(matches!(
            g.neighbor_count(2),
            Err(GraphError::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let g = load("# header\nA: B # trailing\n\nB: A\n").unwrap();
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn handshake_lemma() {
        let g = load("A: B\nB: A,C\nC: B,D\nD: C\n").unwrap();
        let total: usize = g.neighbor_counts().iter().sum();
        assert_eq!(total % 2, 0);
        assert_eq!(total, 2 * g.edge_count());
    }

    #[test]
    fn round_trip_exact() {
        let text = "alpha: beta,gamma\nbeta: alpha\ngamma: alpha\n";
        let g = load(text).unwrap();
        let g2 = load(&g.to_adjacency_text()).unwrap();
        assert_eq!(g, g2);
        assert_eq!(g.to_adjacency_text(), text);
    }

    #[test]
    fn component_count() {
        let g = load("A: B\nB: A\nC: D\nD: C\n").unwrap();
        assert_eq!(g.component_count(), 2);
        let g = load("A: B\nB: A,C\nC: B\n").unwrap();
        assert_eq!(g.component_count(), 1);
    }

    const PA_FIXTURE: &str =
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/pa67.adj"));

    /// Independent oracle: scan the raw fixture into an undirected edge set
    /// without going through the parser's index machinery, then compare.
    #[test]
    fn pa_fixture_matches_edge_set_scan() {
        let g = load(PA_FIXTURE).unwrap();
        assert_eq!(g.len(), 67);
        assert!(g.neighbor_counts().iter().all(|&m| m >= 1));

        let mut edges: HashSet<(String, String)> = HashSet::new();
        let mut first_region: HashMap<String, Vec<String>> = HashMap::new();
        for line in PA_FIXTURE.lines() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (id, rest) = line.split_once(':').unwrap();
            let id = id.trim().to_owned();
            let names: Vec<String> =
                rest.split(',').map(|s| s.trim().to_owned()).filter(|s| !s.is_empty()).collect();
            for n in &names {
                let (a, b) = if id < *n { (id.clone(), n.clone()) } else { (n.clone(), id.clone()) };
                edges.insert((a, b));
            }
            first_region.insert(id, names);
        }
        assert_eq!(g.edge_count(), edges.len());
        for (i, id) in g.region_ids().iter().enumerate() {
            assert_eq!(g.neighbor_count(i).unwrap(), first_region[id].len());
        }
        // a corner county: neighbor count equals its raw adjacency-list length
        let corner = g.index_of("P01").unwrap();
        assert_eq!(g.neighbor_count(corner).unwrap(), first_region["P01"].len());
    }
}
