use super::StreetGraph;

/// Row-normalized inverse-length adjacency `Â = D⁻¹A`, stored as CSR.
///
/// `A[u][v] = 1 / length(u, v)`. Isolated nodes carry a unit self-loop so every row of
/// `Â` is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    /// Row sums of the raw weight matrix `A` (self-loop included for isolated nodes).
    pub degree: Vec<f64>,
}

impl NormalizedAdjacency {
    /// Builds from explicit sparse rows of (column, value); columns must be ascending.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, degree: Vec<f64>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                assert!(c < n);
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        NormalizedAdjacency { n, row_ptr, cols, vals, degree }
    }

    /// Dense all-ones matrix, which turns the masked recurrence into a plain CT-RNN.
    pub fn all_ones(n: usize) -> Self {
        let rows = (0..n).map(|_| (0..n).map(|j| (j, 1.0)).collect()).collect();
        Self::from_rows(rows, vec![n as f64; n])
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzero entries of row `i` as parallel (columns, values) slices.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                out[i * self.n + j] = x;
            }
        }
        out
    }

    pub fn is_isolated(&self, i: usize) -> bool {
        let (c, _) = self.row(i);
        c == [i]
    }
}

pub fn normalized_adjacency(graph: &StreetGraph) -> NormalizedAdjacency {
    let n = graph.node_count();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, nbrs) in graph.neighbors().into_iter().enumerate() {
        rows[i] = nbrs.into_iter().map(|(j, len)| (j, 1.0 / len)).collect();
        rows[i].sort_by_key(|(j, _)| *j);
    }
    let mut degree = vec![0.0; n];
    for (i, row) in rows.iter_mut().enumerate() {
        if row.is_empty() {
            row.push((i, 1.0));
        }
        degree[i] = row.iter().map(|(_, w)| w).sum();
        for (_, w) in row.iter_mut() {
            *w /= degree[i];
        }
    }
    NormalizedAdjacency::from_rows(rows, degree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{Edge, Node};

    #[test]
    fn path_graph_middle_row() {
        let g = StreetGraph::new(
            vec![
                Node { id: 0, lat: 0.0, lon: 0.0, poi: None },
                Node { id: 1, lat: 0.0, lon: 0.001, poi: None },
                Node { id: 2, lat: 0.0, lon: 0.002, poi: None },
            ],
            vec![Edge { u: 0, v: 1, length_m: 100.0 }, Edge { u: 1, v: 2, length_m: 50.0 }],
        )
        .unwrap();
        let a = normalized_adjacency(&g);
        // hand computation: weights 1/100 and 1/50, degree 3/100
        let w_a = 1.0 / 100.0;
        let w_c = 1.0 / 50.0;
        let d = w_a + w_c;
        assert_eq!(a.get(1, 0), w_a / d);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.get(1, 2), w_c / d);
        assert!((a.get(1, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((a.get(1, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.degree[1], d);
    }

    #[test]
    fn isolated_node_is_identity_row() {
        let g = StreetGraph::new(
            vec![
                Node { id: 0, lat: 0.0, lon: 0.0, poi: None },
                Node { id: 1, lat: 0.0, lon: 0.001, poi: None },
                Node { id: 5, lat: 1.0, lon: 1.0, poi: None },
            ],
            vec![Edge { u: 0, v: 1, length_m: 10.0 }],
        )
        .unwrap();
        let a = normalized_adjacency(&g);
        assert!(a.is_isolated(2));
        assert_eq!(a.get(2, 2), 1.0);
        assert_eq!(a.get(2, 0), 0.0);
        assert_eq!(a.get(0, 0), 0.0);
    }
}
