use crate::features::FeatureSpec;

/// Graph of a tensor network: edge dimensions plus, per vertex, the edges it
/// touches. Only the counting needed for parameter and capacity bookkeeping
/// lives here; contraction is specialised to CPD and TT/TR.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkShape {
    edge_dims: Vec<usize>,
    vertices: Vec<Vec<usize>>,
}

impl NetworkShape {
    /// `vertices[v]` lists edge ids into `edge_dims`.
    pub fn new(edge_dims: Vec<usize>, vertices: Vec<Vec<usize>>) -> Self {
        for v in &vertices {
            for &e in v {
                assert!(e < edge_dims.len(), "edge id {e} out of range");
            }
        }
        NetworkShape { edge_dims, vertices }
    }

    /// CPD: one vertex per mode, each joined to the shared rank hyperedge.
    pub fn cpd(mode_dims: &[usize], rank: usize) -> Self {
        let modes = mode_dims.len();
        let mut edge_dims = mode_dims.to_vec();
        edge_dims.push(rank);
        let vertices = (0..modes).map(|p| vec![p, modes]).collect();
        Self::new(edge_dims, vertices)
    }

    /// TT/TR chain with bond dimensions `ranks` (length `modes + 1`, closed
    /// when `ranks[0] == ranks[modes] > 1`).
    pub fn chain(mode_dims: &[usize], ranks: &[usize]) -> Self {
        let modes = mode_dims.len();
        assert_eq!(ranks.len(), modes + 1, "rank chain length must be modes + 1");
        let ring = ranks[0] > 1;
        let mut edge_dims = mode_dims.to_vec();
        // bond edges: ids modes + b for b in 0..=modes (ring reuses bond 0 at the end)
        edge_dims.extend_from_slice(ranks);
        let vertices = (0..modes)
            .map(|p| {
                let right = if ring && p + 1 == modes { modes } else { modes + p + 1 };
                vec![modes + p, p, right]
            })
            .collect();
        Self::new(edge_dims, vertices)
    }

    /// CPD over the spec's model modes (quantized or dense).
    pub fn cpd_for_spec(spec: &FeatureSpec, rank: usize) -> Self {
        Self::cpd(&spec.mode_dims(), rank)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// `P = sum_v prod_{e in E_v} dim(e)`, in exact integer arithmetic.
    pub fn param_count(&self) -> u128 {
        self.vertices
            .iter()
            .map(|v| v.iter().map(|&e| self.edge_dims[e] as u128).product::<u128>())
            .sum()
    }
}

pub fn param_count(shape: &NetworkShape) -> u128 {
    shape.param_count()
}

/// Upper bound `2 P ln(12 |V|)` on the VC-dimension of a tensor-network model.
pub fn vc_bound(params: u128, num_vertices: usize) -> f64 {
    2.0 * params as f64 * (12.0 * num_vertices as f64).ln()
}

/// `M / P` truncated (not rounded) to one decimal, the way compression ratios
/// are tabulated.
pub fn compression_ratio(features: u128, params: u128) -> f64 {
    ((features * 10) / params) as f64 / 10.0
}
