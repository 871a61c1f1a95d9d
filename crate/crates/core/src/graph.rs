//! Sensor graphs built from station coordinates, the Laplacian graph Fourier
//! basis, and the bandlimited subspace spanned by its lowest frequencies.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Raw station data: identifiers, (latitude, longitude) in degrees and one
/// scalar reading per station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationTable {
    ids: Vec<String>,
    coords: Vec<[f64; 2]>,
    signal: Vec<f64>,
}

impl StationTable {
    pub fn new(ids: Vec<String>, coords: Vec<[f64; 2]>, signal: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if coords.len() != n || signal.len() != n {
            return Err(Error::InvalidStations(format!(
                "column lengths differ: {} ids, {} coordinates, {} values",
                n,
                coords.len(),
                signal.len()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidStations(format!(
                "need at least 2 stations, got {n}"
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(n);
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidStations(format!("duplicate id {id:?}")));
            }
        }
        for (i, (c, v)) in coords.iter().zip(&signal).enumerate() {
            if !c[0].is_finite() || !c[1].is_finite() || !v.is_finite() {
                return Err(Error::InvalidStations(format!(
                    "non-finite entry for station {:?}",
                    ids[i]
                )));
            }
        }
        Ok(Self {
            ids,
            coords,
            signal,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn signal(&self) -> &[f64] {
        &self.signal
    }
}

/// Great-circle distance in kilometres between two (lat, lon) points in degrees.
pub fn haversine_km(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (lat1, lon1) = (a[0].to_radians(), a[1].to_radians());
    let (lat2, lon2) = (b[0].to_radians(), b[1].to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Undirected graph with a binary symmetric adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: DMatrix<f64>,
}

impl Graph {
    /// Validates symmetry, zero diagonal, binary entries and that every node has an edge.
    pub fn from_adjacency(adjacency: DMatrix<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: adjacency.ncols(),
            });
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::InvalidParameter(format!("self loop at node {i}")));
            }
            let mut degree = 0.0;
            for j in 0..n {
                let w = adjacency[(i, j)];
                if w != 0.0 && w != 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "non-binary weight {w} at ({i}, {j})"
                    )));
                }
                if w != adjacency[(j, i)] {
                    return Err(Error::NotSymmetric((w - adjacency[(j, i)]).abs()));
                }
                degree += w;
            }
            if degree == 0.0 {
                return Err(Error::InvalidParameter(format!("node {i} has no edges")));
            }
        }
        Ok(Self { adjacency })
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency
            .row_iter()
            .map(|r| r.iter().filter(|&&w| w != 0.0).count())
            .collect()
    }

    /// Edge list with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adjacency[(i, j)] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// k-nearest-neighbor graph under haversine distance, symmetrized by union.
///
/// Equal distances are broken by the lower node index.
pub fn build_knn_graph(stations: &StationTable, k: usize) -> Result<Graph> {
    let n = stations.len();
    if k == 0 || k >= n {
        return Err(Error::NeighborCountOutOfRange { k, n });
    }
    let coords = stations.coords();
    let mut adjacency = DMatrix::zeros(n, n);
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        candidates.clear();
        candidates.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (haversine_km(coords[i], coords[j]), j)),
        );
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in candidates.iter().take(k) {
            adjacency[(i, j)] = 1.0;
            adjacency[(j, i)] = 1.0;
        }
    }
    Ok(Graph { adjacency })
}

/// Combinatorial Laplacian `L = D − W`.
pub fn laplacian(g: &Graph) -> DMatrix<f64> {
    let w = g.adjacency();
    let n = g.n();
    let mut l = -w.clone();
    for i in 0..n {
        l[(i, i)] = w.row(i).sum();
    }
    l
}

/// Laplacian eigenbasis, frequencies ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct GftBasis {
    pub eigenvalues: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl GftBasis {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Full spectral decomposition of a symmetric shift operator.
pub fn gft_basis(l: &DMatrix<f64>) -> Result<GftBasis> {
    let (eigenvalues, vectors) = linalg::sym_eigen(l)?;
    Ok(GftBasis {
        eigenvalues,
        vectors,
    })
}

/// The first `f` columns of the GFT basis (`U_F`).
#[derive(Debug, Clone, PartialEq)]
pub struct BandBasis {
    u_f: DMatrix<f64>,
}

impl BandBasis {
    /// Wraps an N×F matrix with orthonormal columns. Used for synthetic bases in tests
    /// and by callers that bring their own transform.
    pub fn from_matrix(u_f: DMatrix<f64>) -> Result<Self> {
        let (n, f) = u_f.shape();
        if f == 0 || f > n {
            return Err(Error::BandwidthOutOfRange { f, n });
        }
        let err = linalg::orthonormality_error(&u_f);
        if err > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "columns are not orthonormal (max |UᵀU − I| = {err:e})"
            )));
        }
        Ok(Self { u_f })
    }

    pub fn n(&self) -> usize {
        self.u_f.nrows()
    }

    pub fn f(&self) -> usize {
        self.u_f.ncols()
    }

    pub fn u_f(&self) -> &DMatrix<f64> {
        &self.u_f
    }

    /// `U_F s` as a node-domain signal.
    pub fn synthesize(&self, s: &DVector<f64>) -> DVector<f64> {
        &self.u_f * s
    }

    /// `U_Fᵀ x`.
    pub fn analyze(&self, x: &DVector<f64>) -> DVector<f64> {
        self.u_f.tr_mul(x)
    }
}

pub fn band_select(basis: &GftBasis, f: usize) -> Result<BandBasis> {
    let n = basis.n();
    if f == 0 || f > n {
        return Err(Error::BandwidthOutOfRange { f, n });
    }
    Ok(BandBasis {
        u_f: basis.vectors.columns(0, f).into_owned(),
    })
}

/// Projects `x` onto the band: returns `(s_F, x_o)` with `s_F = U_Fᵀx`, `x_o = U_F s_F`.
pub fn project_bandlimited(
    band: &BandBasis,
    x: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if x.len() != band.n() {
        return Err(Error::DimensionMismatch {
            expected: band.n(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("signal has non-finite entries".into()));
    }
    let s_f = band.analyze(x);
    let x_o = band.synthesize(&s_f);
    Ok((s_f, x_o))
}
