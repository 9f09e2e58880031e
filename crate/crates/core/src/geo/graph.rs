use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::haversine_m;
use super::index::GridIndex;
use crate::error::{Error, Result};
use crate::series::{csv_err, csv_io};

/// POIs link to at most this many street nodes.
pub const MAX_POI_LINKS: usize = 5;
/// Street nodes farther than this from a POI are not linked (except by the fallback).
pub const POI_LINK_RADIUS_M: f64 = 80.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: u64,
    pub lat: f64,
    pub lon: f64,
    /// Set for nodes that represent a point of interest.
    pub poi: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub u: u64,
    pub v: u64,
    pub length_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Poi {
    pub id: usize,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

/// An undirected street graph with positive edge lengths.
///
/// Edges are stored once with `u < v`; duplicates are collapsed to their minimum length.
#[derive(Debug, Clone)]
pub struct StreetGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index_of: HashMap<u64, usize>,
    spatial: GridIndex,
}

impl StreetGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self> {
        let mut index_of = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index_of.insert(n.id, i).is_some() {
                return Err(Error::DuplicateNode(n.id));
            }
            if !(-90.0..=90.0).contains(&n.lat) || !(-180.0..=180.0).contains(&n.lon) {
                return Err(Error::Invalid(format!("node {} has invalid coordinates", n.id)));
            }
        }
        let mut pois: Vec<usize> = nodes.iter().filter_map(|n| n.poi).collect();
        pois.sort_unstable();
        for (k, p) in pois.iter().enumerate() {
            if *p != k {
                return Err(Error::Invalid(format!(
                    "poi ids must be distinct and cover 0..{}",
                    pois.len()
                )));
            }
        }
        let mut dedup: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for (line, e) in edges.iter().enumerate() {
            if !(e.length_m > 0.0) || !e.length_m.is_finite() {
                return Err(Error::NonPositiveLength { line: line + 2 });
            }
            for id in [e.u, e.v] {
                if !index_of.contains_key(&id) {
                    return Err(Error::DanglingEdge { line: line + 2, node: id });
                }
            }
            if e.u == e.v {
                return Err(Error::Invalid(format!("self-loop on node {}", e.u)));
            }
            let key = (e.u.min(e.v), e.u.max(e.v));
            let len = dedup.entry(key).or_insert(e.length_m);
            *len = len.min(e.length_m);
        }
        let edges = dedup
            .into_iter()
            .map(|((u, v), length_m)| Edge { u, v, length_m })
            .collect();
        let spatial = GridIndex::build(&nodes);
        Ok(StreetGraph { nodes, edges, index_of, spatial })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Position of node `id` in `nodes()`.
    pub fn index(&self, id: u64) -> Option<usize> {
        self.index_of.get(&id).copied()
    }

    pub fn poi_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.poi.is_some()).count()
    }

    /// Node index of each POI, ordered by poi id.
    pub fn poi_nodes(&self) -> Vec<usize> {
        let mut out = vec![0; self.poi_count()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.poi {
                out[p] = i;
            }
        }
        out
    }

    /// Id of the node closest (haversine) to the query; ties go to the smallest id.
    ///
    /// Panics on an empty graph.
    pub fn nearest_node(&self, lat: f64, lon: f64) -> u64 {
        let idx = self.nearest_index(lat, lon);
        self.nodes[idx].id
    }

    pub fn nearest_index(&self, lat: f64, lon: f64) -> usize {
        assert!(!self.nodes.is_empty(), "nearest_node on empty graph");
        self.spatial.nearest(&self.nodes, lat, lon)
    }

    /// Undirected neighbor lists as (node index, edge length).
    pub fn neighbors(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            let (a, b) = (self.index_of[&e.u], self.index_of[&e.v]);
            adj[a].push((b, e.length_m));
            adj[b].push((a, e.length_m));
        }
        adj
    }

    /// Stable content hash over nodes and edges, used to pair checkpoints with graphs.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for n in &self.nodes {
            h.update(n.id.to_le_bytes());
            h.update(n.lat.to_bits().to_le_bytes());
            h.update(n.lon.to_bits().to_le_bytes());
            h.update(n.poi.map_or(u64::MAX, |p| p as u64).to_le_bytes());
        }
        for e in &self.edges {
            h.update(e.u.to_le_bytes());
            h.update(e.v.to_le_bytes());
            h.update(e.length_m.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Writes `node_id,lat,lon,is_poi,poi_id` and `u,v,length_m` tables.
    pub fn write_csv(&self, nodes_path: &Path, edges_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(nodes_path).map_err(|e| csv_io(nodes_path, e))?;
        w.write_record(["node_id", "lat", "lon", "is_poi", "poi_id"])
            .map_err(|e| csv_io(nodes_path, e))?;
        for n in &self.nodes {
            w.write_record([
                n.id.to_string(),
                n.lat.to_string(),
                n.lon.to_string(),
                (n.poi.is_some() as u8).to_string(),
                n.poi.map(|p| p.to_string()).unwrap_or_default(),
            ])
            .map_err(|e| csv_io(nodes_path, e))?;
        }
        w.flush().map_err(|e| Error::io(nodes_path, e))?;
        let mut w = csv::Writer::from_path(edges_path).map_err(|e| csv_io(edges_path, e))?;
        w.write_record(["u", "v", "length_m"]).map_err(|e| csv_io(edges_path, e))?;
        for e in &self.edges {
            w.write_record([e.u.to_string(), e.v.to_string(), e.length_m.to_string()])
                .map_err(|err| csv_io(edges_path, err))?;
        }
        w.flush().map_err(|e| Error::io(edges_path, e))
    }
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, file: &str, line: usize) -> Result<&'a str> {
    rec.get(i)
        .map(str::trim)
        .ok_or_else(|| Error::parse(file, line, format!("missing column {i}")))
}

fn num<T: std::str::FromStr>(s: &str, file: &str, line: usize) -> Result<T> {
    s.parse::<T>()
        .map_err(|_| Error::parse(file, line, format!("cannot parse {s:?}")))
}

/// Loads a street graph from a node table (`node_id,lat,lon[,is_poi,poi_id]`) and an edge
/// list (`u,v,length_m`).
pub fn load_street_graph(nodes_path: &Path, edges_path: &Path) -> Result<StreetGraph> {
    let nfile = nodes_path.display().to_string();
    let mut rdr = csv::Reader::from_path(nodes_path).map_err(|e| csv_io(nodes_path, e))?;
    let mut nodes = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(&nfile, e))?;
        let id = num(field(&rec, 0, &nfile, line)?, &nfile, line)?;
        let lat = num(field(&rec, 1, &nfile, line)?, &nfile, line)?;
        let lon = num(field(&rec, 2, &nfile, line)?, &nfile, line)?;
        let poi = match rec.get(4).map(str::trim) {
            Some(s) if !s.is_empty() => Some(num(s, &nfile, line)?),
            _ => None,
        };
        nodes.push(Node { id, lat, lon, poi });
    }
    let efile = edges_path.display().to_string();
    let mut rdr = csv::Reader::from_path(edges_path).map_err(|e| csv_io(edges_path, e))?;
    let mut edges = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(&efile, e))?;
        let u = num(field(&rec, 0, &efile, line)?, &efile, line)?;
        let v = num(field(&rec, 1, &efile, line)?, &efile, line)?;
        let length_m: f64 = num(field(&rec, 2, &efile, line)?, &efile, line)?;
        if !(length_m > 0.0) {
            return Err(Error::NonPositiveLength { line });
        }
        edges.push((line, Edge { u, v, length_m }));
    }
    let ids: std::collections::HashSet<u64> = nodes.iter().map(|n| n.id).collect();
    for (line, e) in &edges {
        for id in [e.u, e.v] {
            if !ids.contains(&id) {
                return Err(Error::DanglingEdge { line: *line, node: id });
            }
        }
    }
    StreetGraph::new(nodes, edges.into_iter().map(|(_, e)| e).collect())
}

/// Reads `poi_id,name,lat,lon`.
pub fn read_pois(path: &Path) -> Result<Vec<Poi>> {
    let file = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(&file, e))?;
        out.push(Poi {
            id: num(field(&rec, 0, &file, line)?, &file, line)?,
            name: field(&rec, 1, &file, line)?.to_string(),
            lat: num(field(&rec, 2, &file, line)?, &file, line)?,
            lon: num(field(&rec, 3, &file, line)?, &file, line)?,
        });
    }
    Ok(out)
}

pub fn write_pois(path: &Path, pois: &[Poi]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["poi_id", "name", "lat", "lon"]).map_err(|e| csv_io(path, e))?;
    for p in pois {
        w.write_record([p.id.to_string(), p.name.clone(), p.lat.to_string(), p.lon.to_string()])
            .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Adds each POI as a new node linked to up to [`MAX_POI_LINKS`] nearest street nodes
/// within [`POI_LINK_RADIUS_M`]. A POI with nothing in range links to its single nearest
/// street node. Link lengths are clamped to at least 1 m.
///
/// New node ids continue after the largest existing id, in input order.
pub fn attach_pois(graph: &StreetGraph, pois: &[Poi]) -> Result<StreetGraph> {
    let mut seen: Vec<usize> = graph.nodes.iter().filter_map(|n| n.poi).collect();
    for p in pois {
        if seen.contains(&p.id) {
            return Err(Error::DuplicatePoi(p.id));
        }
        seen.push(p.id);
    }
    let street: Vec<&Node> = graph.nodes.iter().filter(|n| n.poi.is_none()).collect();
    if street.is_empty() && !pois.is_empty() {
        return Err(Error::Invalid("cannot attach POIs to a graph without street nodes".into()));
    }
    let mut next_id = graph.nodes.iter().map(|n| n.id).max().map_or(0, |m| m + 1);
    let mut nodes = graph.nodes.clone();
    let mut edges = graph.edges.clone();
    for p in pois {
        let id = next_id;
        next_id += 1;
        nodes.push(Node { id, lat: p.lat, lon: p.lon, poi: Some(p.id) });
        let mut cand: Vec<(f64, u64)> = street
            .iter()
            .map(|n| (haversine_m(p.lat, p.lon, n.lat, n.lon), n.id))
            .collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut links: Vec<(f64, u64)> = cand
            .iter()
            .copied()
            .take_while(|(d, _)| *d <= POI_LINK_RADIUS_M)
            .take(MAX_POI_LINKS)
            .collect();
        if links.is_empty() {
            links.push(cand[0]);
        }
        for (d, other) in links {
            edges.push(Edge { u: id, v: other, length_m: d.max(1.0) });
        }
    }
    StreetGraph::new(nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    pub(crate) fn path_graph() -> StreetGraph {
        StreetGraph::new(
            vec![
                Node { id: 0, lat: 47.8, lon: 13.0, poi: None },
                Node { id: 1, lat: 47.8009, lon: 13.0, poi: None },
                Node { id: 2, lat: 47.80135, lon: 13.0, poi: None },
            ],
            vec![
                Edge { u: 0, v: 1, length_m: 100.0 },
                Edge { u: 1, v: 2, length_m: 50.0 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn loads_minimal_path() {
        let d = tempfile::tempdir().unwrap();
        let n = write(d.path(), "n.csv", "node_id,lat,lon\n1,47.8,13.0\n2,47.801,13.0\n3,47.802,13.0\n");
        let e = write(d.path(), "e.csv", "u,v,length_m\n1,2,100\n2,3,50\n");
        let g = load_street_graph(&n, &e).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn zero_length_reports_line() {
        let d = tempfile::tempdir().unwrap();
        let n = write(d.path(), "n.csv", "node_id,lat,lon\n1,47.8,13.0\n2,47.801,13.0\n");
        let e = write(d.path(), "e.csv", "u,v,length_m\n1,2,10\n2,1,0\n");
        let err = load_street_graph(&n, &e).unwrap_err();
        assert_eq!(err.to_string(), "nonpositive edge length at line 3");
    }

    #[test]
    fn dangling_endpoint_is_rejected() {
        let d = tempfile::tempdir().unwrap();
        let n = write(d.path(), "n.csv", "node_id,lat,lon\n1,47.8,13.0\n");
        let e = write(d.path(), "e.csv", "u,v,length_m\n1,9,10\n");
        assert!(matches!(
            load_street_graph(&n, &e),
            Err(Error::DanglingEdge { line: 2, node: 9 })
        ));
    }

    #[test]
    fn duplicate_edges_keep_minimum() {
        let g = StreetGraph::new(
            vec![
                Node { id: 1, lat: 0.0, lon: 0.0, poi: None },
                Node { id: 2, lat: 0.0, lon: 0.001, poi: None },
            ],
            vec![
                Edge { u: 1, v: 2, length_m: 30.0 },
                Edge { u: 2, v: 1, length_m: 20.0 },
            ],
        )
        .unwrap();
        assert_eq!(g.edges(), &[Edge { u: 1, v: 2, length_m: 20.0 }]);
    }

    #[test]
    fn bad_number_is_parse_error() {
        let d = tempfile::tempdir().unwrap();
        let n = write(d.path(), "n.csv", "node_id,lat,lon\n1,abc,13.0\n");
        let e = write(d.path(), "e.csv", "u,v,length_m\n");
        assert!(matches!(load_street_graph(&n, &e), Err(Error::Parse { line: 2, .. })));
    }

    /// Street nodes spread east of a POI at the given distances (meters).
    fn fan(dists: &[f64]) -> (StreetGraph, Poi) {
        let (lat, lon) = (47.8, 13.0);
        let m_per_deg_lon = haversine_m(lat, lon, lat, lon + 1e-3) * 1e3;
        let nodes = dists
            .iter()
            .enumerate()
            .map(|(i, d)| Node { id: i as u64, lat, lon: lon + d / m_per_deg_lon, poi: None })
            .collect();
        let g = StreetGraph::new(nodes, vec![]).unwrap();
        (g, Poi { id: 0, name: "p".into(), lat, lon })
    }

    #[test]
    fn attach_caps_at_five_nearest() {
        let (g, p) = fan(&[10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0]);
        let g2 = attach_pois(&g, &[p]).unwrap();
        let poi_id = 7;
        let linked: Vec<u64> = g2.edges().iter().filter(|e| e.u == poi_id || e.v == poi_id).map(|e| e.u.min(e.v)).collect();
        assert_eq!(linked, vec![0, 1, 2, 3, 4]);
        assert_eq!(g2.poi_nodes(), vec![7]);
    }

    #[test]
    fn attach_falls_back_to_nearest() {
        let (g, p) = fan(&[300.0, 400.0]);
        let g2 = attach_pois(&g, &[p]).unwrap();
        assert_eq!(g2.edge_count(), 1);
        assert!((g2.edges()[0].length_m - 300.0).abs() < 1e-6);
    }

    #[test]
    fn attach_single_close_node() {
        let (g, p) = fan(&[2.0, 500.0]);
        let g2 = attach_pois(&g, &[p]).unwrap();
        assert_eq!(g2.edge_count(), 1);
        assert!((g2.edges()[0].length_m - 2.0).abs() < 1e-6);
        let (g, p) = fan(&[0.2]);
        let g3 = attach_pois(&g, &[p]).unwrap();
        assert_eq!(g3.edges()[0].length_m, 1.0);
    }

    #[test]
    fn attach_rejects_duplicate_poi() {
        let (g, p) = fan(&[10.0]);
        assert!(matches!(attach_pois(&g, &[p.clone(), p]), Err(Error::DuplicatePoi(0))));
    }

    #[test]
    fn hash_changes_with_edges() {
        let g = path_graph();
        let mut e = g.edges().to_vec();
        e[0].length_m = 101.0;
        let h = StreetGraph::new(g.nodes().to_vec(), e).unwrap();
        assert_ne!(g.content_hash(), h.content_hash());
        assert_eq!(g.content_hash(), path_graph().content_hash());
    }
}
