//! On-disk cache of k-NN graphs and their Laplacian eigenbases, keyed by
//! `(dataset digest, k)`. Floats are stored as raw little-endian bits so a
//! cached basis is identical to a freshly computed one.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, gft_basis, laplacian, GftBasis, Graph, StationTable};
use crate::io::stations::dataset_digest;

const MAGIC: &[u8; 8] = b"GSPGFT01";

pub fn cache_path(dir: &Path, digest: &str, k: usize) -> PathBuf {
    dir.join(format!("graph-{}-k{}.bin", &digest[..16.min(digest.len())], k))
}

fn encode(graph: &Graph, basis: &GftBasis) -> Vec<u8> {
    let n = graph.n();
    let edges = graph.edges();
    let mut out = Vec::with_capacity(32 + edges.len() * 16 + (n + n * n) * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(edges.len() as u64).to_le_bytes());
    for (i, j) in edges {
        out.extend_from_slice(&(i as u64).to_le_bytes());
        out.extend_from_slice(&(j as u64).to_le_bytes());
    }
    for v in basis.eigenvalues.iter().chain(basis.vectors.iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn chunk(&mut self) -> Option<[u8; 8]> {
        let s = self.bytes.get(self.pos..self.pos + 8)?;
        self.pos += 8;
        s.try_into().ok()
    }

    fn word(&mut self) -> Option<usize> {
        usize::try_from(u64::from_le_bytes(self.chunk()?)).ok()
    }

    fn floats(&mut self, count: usize) -> Option<Vec<f64>> {
        (0..count)
            .map(|_| Some(f64::from_le_bytes(self.chunk()?)))
            .collect()
    }
}

fn decode(bytes: &[u8]) -> Option<(Graph, GftBasis)> {
    let mut r = Reader { bytes, pos: 0 };
    if &r.chunk()? != MAGIC {
        return None;
    }
    let n = r.word()?;
    let m = r.word()?;
    if bytes.len() != 24 + 16 * m + 8 * (n + n * n) {
        return None;
    }
    let mut adjacency = DMatrix::zeros(n, n);
    for _ in 0..m {
        let i = r.word()?;
        let j = r.word()?;
        if i >= n || j >= n {
            return None;
        }
        adjacency[(i, j)] = 1.0;
        adjacency[(j, i)] = 1.0;
    }
    let eigenvalues = DVector::from_vec(r.floats(n)?);
    let vectors = DMatrix::from_vec(n, n, r.floats(n * n)?);
    let graph = Graph::from_adjacency(adjacency).ok()?;
    Some((
        graph,
        GftBasis {
            eigenvalues,
            vectors,
        },
    ))
}

/// Returns the graph and basis for `(stations, k)`, computing and storing them on a miss.
///
/// `dir = None` disables caching.
pub fn load_or_build(
    stations: &StationTable,
    k: usize,
    dir: Option<&Path>,
) -> Result<(Graph, GftBasis, bool)> {
    let path = dir.map(|d| cache_path(d, &dataset_digest(stations), k));
    if let Some(p) = &path {
        if let Ok(bytes) = std::fs::read(p) {
            if let Some((graph, basis)) = decode(&bytes) {
                if graph.n() == stations.len() {
                    return Ok((graph, basis, true));
                }
            }
            log::warn!("ignoring unreadable graph cache {}", p.display());
        }
    }
    let graph = build_knn_graph(stations, k)?;
    let basis = gft_basis(&laplacian(&graph))?;
    if let (Some(p), Some(d)) = (&path, dir) {
        std::fs::create_dir_all(d)?;
        let tmp = p.with_extension("tmp");
        std::fs::write(&tmp, encode(&graph, &basis))?;
        std::fs::rename(&tmp, p).map_err(Error::Io)?;
    }
    Ok((graph, basis, false))
}
