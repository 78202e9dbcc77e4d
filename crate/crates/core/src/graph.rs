//! Undirected weighted graphs and the symmetric graph shifts built on them.
//!
//! Vertices are 0-based in the API and 1-based in every file format.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An undirected finite graph with nonnegative edge weights, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    /// Edges as `(i, j, w)` with `i < j`, sorted.
    edges: Vec<(usize, usize, f64)>,
    weights: DMatrix<f64>,
    is_edge: DMatrix<bool>,
}

impl Graph {
    /// Builds a graph from 0-based weighted edges. Each unordered pair may appear once.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("graph order must be at least 2, got {n}")));
        }
        let mut weights = DMatrix::zeros(n, n);
        let mut is_edge = DMatrix::from_element(n, n, false);
        let mut list = Vec::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) out of range for order {n}")));
            }
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at vertex {i}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) has invalid weight {w}")));
            }
            if is_edge[(i, j)] {
                return Err(Error::InvalidArgument(format!("duplicate edge ({i}, {j})")));
            }
            is_edge[(i, j)] = true;
            is_edge[(j, i)] = true;
            weights[(i, j)] = w;
            weights[(j, i)] = w;
            list.push((i.min(j), i.max(j), w));
        }
        list.sort_by_key(|e| (e.0, e.1));
        Ok(Self { n, edges: list, weights, is_edge })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.is_edge[(i, j)]
    }

    /// Weighted adjacency matrix `W`.
    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Vertex degrees `D(i,i) = Σ_j W(i,j)`.
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.weights.row(i).sum()).collect()
    }
}

/// The unweighted cycle graph `C_n`: vertex `i` joined to `i ± 1 mod n`.
pub fn cycle_graph(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("cycle graph needs at least 3 vertices, got {n}")));
    }
    Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n, 1.0)))
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        GraphFile { n: self.n, edges: self.edges.iter().map(|&(i, j, w)| (i + 1, j + 1, w)).collect() }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let file = GraphFile::deserialize(deserializer)?;
        let mut edges = Vec::with_capacity(file.edges.len());
        for (i, j, w) in file.edges {
            if i == 0 || j == 0 {
                return Err(D::Error::custom("graph files use 1-based vertex indices"));
            }
            edges.push((i - 1, j - 1, w));
        }
        Graph::from_edges(file.n, edges).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftKind {
    Adjacency,
    Degree,
    Laplacian,
    Custom,
}

/// A real symmetric matrix supported on the diagonal and the edges of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphShift {
    matrix: DMatrix<f64>,
    kind: ShiftKind,
}

impl GraphShift {
    /// Builds one of the standard shifts. Use [`GraphShift::custom`] for caller matrices.
    pub fn build(graph: &Graph, kind: ShiftKind) -> Result<Self> {
        let w = graph.adjacency();
        let degree = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(graph.degrees()));
        let matrix = match kind {
            ShiftKind::Adjacency => w.clone(),
            ShiftKind::Degree => degree,
            ShiftKind::Laplacian => degree - w,
            ShiftKind::Custom => {
                return Err(Error::InvalidArgument(
                    "custom shifts are built from a caller matrix with GraphShift::custom".into(),
                ))
            }
        };
        Ok(Self { matrix, kind })
    }

    /// Accepts a caller matrix after checking symmetry and the edge sparsity pattern.
    pub fn custom(graph: &Graph, matrix: DMatrix<f64>) -> Result<Self> {
        if !validate_shift(graph, &matrix)? {
            return Err(Error::InvalidShift("matrix must be symmetric with off-diagonal support on edges only".into()));
        }
        Ok(Self { matrix, kind: ShiftKind::Custom })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }
}

/// True iff `matrix` is exactly symmetric and its off-diagonal nonzeros lie on edges.
pub fn validate_shift(graph: &Graph, matrix: &DMatrix<f64>) -> Result<bool> {
    let n = graph.order();
    if matrix.nrows() != n || matrix.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{}, graph has order {n}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    for i in 0..n {
        for j in 0..n {
            let v = matrix[(i, j)];
            if !v.is_finite() || v != matrix[(j, i)] {
                return Ok(false);
            }
            if i != j && v != 0.0 && !graph.has_edge(i, j) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_four_edges() {
        let g = cycle_graph(4).unwrap();
        assert_eq!(g.order(), 4);
        assert_eq!(g.edges(), &[(0, 1, 1.0), (0, 3, 1.0), (1, 2, 1.0), (2, 3, 1.0)]);
    }

    #[test]
    fn cycle_thirty_has_thirty_edges() {
        let g = cycle_graph(30).unwrap();
        assert_eq!(g.order(), 30);
        assert_eq!(g.edges().len(), 30);
    }

    #[test]
    fn cycle_rejects_small_orders() {
        assert!(matches!(cycle_graph(2), Err(Error::InvalidArgument(_))));
        assert!(matches!(cycle_graph(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn laplacian_of_cycle() {
        let g = cycle_graph(4).unwrap();
        let l = GraphShift::build(&g, ShiftKind::Laplacian).unwrap();
        let expected = DMatrix::identity(4, 4) * 2.0 - g.adjacency();
        assert_eq!(l.matrix(), &expected);
        for i in 0..4 {
            assert_eq!(l.matrix().row(i).sum(), 0.0);
        }

        let g30 = cycle_graph(30).unwrap();
        let l30 = GraphShift::build(&g30, ShiftKind::Laplacian).unwrap();
        assert_eq!(l30.matrix(), &(DMatrix::identity(30, 30) * 2.0 - g30.adjacency()));
    }

    #[test]
    fn custom_shift_rejects_non_edge() {
        let g = cycle_graph(4).unwrap();
        let mut m = DMatrix::identity(4, 4);
        m[(0, 2)] = 1.0;
        m[(2, 0)] = 1.0;
        assert!(matches!(GraphShift::custom(&g, m), Err(Error::InvalidShift(_))));

        let mut asym = g.adjacency().clone();
        asym[(0, 1)] = 0.5;
        assert!(matches!(GraphShift::custom(&g, asym), Err(Error::InvalidShift(_))));
    }

    #[test]
    fn validate_examples() {
        let g = cycle_graph(4).unwrap();
        assert!(validate_shift(&g, &DMatrix::identity(4, 4)).unwrap());
        assert!(validate_shift(&g, g.adjacency()).unwrap());
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 2)] = 1.0;
        m[(2, 0)] = 1.0;
        assert!(!validate_shift(&g, &m).unwrap());
        assert!(matches!(validate_shift(&g, &DMatrix::identity(3, 3)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn every_kind_validates() {
        let g = Graph::from_edges(5, [(0, 1, 0.5), (1, 2, 2.0), (3, 4, 1.5), (0, 4, 0.25)]).unwrap();
        for kind in [ShiftKind::Adjacency, ShiftKind::Degree, ShiftKind::Laplacian] {
            let s = GraphShift::build(&g, kind).unwrap();
            assert!(validate_shift(&g, s.matrix()).unwrap());
            assert_eq!(s.matrix(), &s.matrix().transpose());
        }
    }

    #[test]
    fn graph_json_is_one_based() {
        let g = cycle_graph(3).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(json, r#"{"n":3,"edges":[[1,2,1.0],[1,3,1.0],[2,3,1.0]]}"#);
        let back: Graph = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<Graph>(r#"{"n":3,"edges":[[0,1,1.0]]}"#).is_err());
        assert!(serde_json::from_str::<Graph>(r#"{"n":3,"edges":[[1,1,1.0]]}"#).is_err());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::from_edges(1, []).is_err());
        assert!(Graph::from_edges(3, [(0, 0, 1.0)]).is_err());
        assert!(Graph::from_edges(3, [(0, 3, 1.0)]).is_err());
        assert!(Graph::from_edges(3, [(0, 1, -1.0)]).is_err());
        assert!(Graph::from_edges(3, [(0, 1, 1.0), (1, 0, 1.0)]).is_err());
    }
}
