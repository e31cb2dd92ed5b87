use crate::linalg::Matrix;
use crate::network::{CanonicalIndexing, NetworkSpec};

/// Per-class first- and second-order network data in one fixed class order.
///
/// The heavy-traffic formulas are permutation-equivariant, so the same
/// struct serves both user order and canonical order.
#[derive(Debug, Clone)]
pub struct Primitives {
    pub num_stations: usize,
    pub station: Vec<usize>,
    pub alpha: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mean: Vec<f64>,
    pub scv_arrival: Vec<f64>,
    pub scv_service: Vec<f64>,
    pub routing: Matrix,
}

impl Primitives {
    pub fn from_spec(spec: &NetworkSpec, lambda: &[f64]) -> Self {
        let k = spec.num_classes();
        Self {
            num_stations: spec.num_stations(),
            station: (0..k).map(|c| spec.station_of(c)).collect(),
            alpha: spec.arrival_rates(),
            lambda: lambda.to_vec(),
            mean: spec.mean_services(),
            scv_arrival: (0..k).map(|c| spec.scv_arrival(c)).collect(),
            scv_service: (0..k).map(|c| spec.scv_service(c)).collect(),
            routing: spec.routing_matrix(),
        }
    }

    /// The same data relabeled into canonical order.
    pub fn canonical(spec: &NetworkSpec, lambda: &[f64], ix: &CanonicalIndexing) -> Self {
        let user = Self::from_spec(spec, lambda);
        let order = ix.user_order();
        let pick = |v: &[f64]| order.iter().map(|&u| v[u]).collect::<Vec<_>>();
        let k = order.len();
        Self {
            num_stations: user.num_stations,
            station: order.iter().map(|&u| user.station[u]).collect(),
            alpha: pick(&user.alpha),
            lambda: pick(&user.lambda),
            mean: pick(&user.mean),
            scv_arrival: pick(&user.scv_arrival),
            scv_service: pick(&user.scv_service),
            routing: Matrix::from_fn(k, k, |i, j| user.routing[(order[i], order[j])]),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.station.len()
    }

    /// Service rates `μ_k = 1/m_k`.
    pub fn rates(&self) -> Vec<f64> {
        self.mean.iter().map(|m| 1.0 / m).collect()
    }

    /// `J×K` constituency matrix, `C_{jk} = 1` iff class k is served at j.
    pub fn constituency(&self) -> Matrix {
        Matrix::from_fn(self.num_stations, self.num_classes(), |j, k| {
            if self.station[k] == j {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn intensities(&self) -> Vec<f64> {
        let mut rho = vec![0.0; self.num_stations];
        for k in 0..self.num_classes() {
            rho[self.station[k]] += self.lambda[k] * self.mean[k];
        }
        rho
    }
}
