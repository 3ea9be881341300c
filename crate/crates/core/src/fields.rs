//! Scalar fields on the mesh, impedance fields on the boundary, and bump
//! bases spanning perturbation directions supported in Σ.

use crate::error::{CoreError, Result};
use crate::geometry::{BoundaryMesh, Mesh, SigmaPatch};
use serde::{Deserialize, Serialize};

pub mod rng {
    //! Fixed, documented pseudo-random generator so every experiment is
    //! bit-reproducible across platforms and toolchain versions.
    //!
    //! SplitMix64: state advances by the golden-gamma constant and the
    //! output is a finalizing mix (Steele/Lea/Flood, 2014). Doubles are
    //! drawn as the top 53 bits scaled to [0, 1).

    #[derive(Debug, Clone)]
    pub struct SplitMix64 {
        state: u64,
    }

    impl SplitMix64 {
        pub fn new(seed: u64) -> Self {
            SplitMix64 { state: seed }
        }

        /// Independent stream derived from (seed, label); the label is
        /// FNV-1a hashed into the initial state.
        pub fn stream(seed: u64, label: &str) -> Self {
            let mut h: u64 = 0xcbf2_9ce4_8422_2325;
            for byte in label.as_bytes() {
                h ^= *byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            let mut rng = SplitMix64 { state: seed ^ h };
            rng.next_u64(); // decorrelate from the raw xor
            rng
        }

        pub fn next_u64(&mut self) -> u64 {
            self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = self.state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^ (z >> 31)
        }

        /// Uniform in [0, 1).
        pub fn next_f64(&mut self) -> f64 {
            (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
        }

        /// Uniform in [lo, hi).
        pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
            lo + (hi - lo) * self.next_f64()
        }
    }
}

/// One real value per mesh node (potential q, conformal factor c).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        ScalarField {
            values: vec![value; mesh.num_nodes()],
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Self {
        ScalarField {
            values: mesh.coords.iter().map(|&[x, y]| f(x, y)).collect(),
        }
    }

    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(CoreError::Contract(format!(
                "field has {} values, mesh has {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Config("field contains non-finite values".into()));
        }
        Ok(ScalarField { values })
    }
}

/// One real value per boundary position (impedances ω, ω₀, directions ω̃).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryField {
    pub values: Vec<f64>,
}

impl BoundaryField {
    pub fn zeros(bmesh: &BoundaryMesh) -> Self {
        BoundaryField {
            values: vec![0.0; bmesh.len()],
        }
    }

    pub fn constant(bmesh: &BoundaryMesh, value: f64) -> Self {
        BoundaryField {
            values: vec![value; bmesh.len()],
        }
    }

    pub fn from_values(bmesh: &BoundaryMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != bmesh.len() {
            return Err(CoreError::Contract(format!(
                "boundary field has {} values, boundary has {} nodes",
                values.len(),
                bmesh.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Config(
                "boundary field contains non-finite values".into(),
            ));
        }
        Ok(BoundaryField { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Node-exact compact support check for perturbation directions.
    pub fn is_supported_in(&self, sigma: &SigmaPatch) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(p, &v)| v == 0.0 || sigma.contains(p))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// self + t·dir
    pub fn add_scaled(&self, t: f64, dir: &BoundaryField) -> BoundaryField {
        BoundaryField {
            values: self
                .values
                .iter()
                .zip(&dir.values)
                .map(|(a, b)| a + t * b)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpShape {
    Hat,
    Smooth,
}

/// J overlapping bumps supported in Σ that sum to 1 on the patch nodes
/// (exact partition of unity: hats by construction, smooth bumps by
/// Shepard normalization).
#[derive(Debug, Clone)]
pub struct BumpBasis {
    pub bumps: Vec<BoundaryField>,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub shape: BumpShape,
    pub sigma: SigmaPatch,
}

impl BumpBasis {
    pub fn len(&self) -> usize {
        self.bumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bumps.is_empty()
    }
}

/// Standard compactly supported profile, normalized to B(0) = 1.
fn smooth_profile(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

/// Equispaced bump basis over Σ. Knots sit on patch nodes, so with J = |Σ|
/// and hat shape the basis is exactly nodal.
pub fn bump_basis(
    bmesh: &BoundaryMesh,
    sigma: &SigmaPatch,
    j_bumps: usize,
    shape: BumpShape,
) -> Result<BumpBasis> {
    let n = sigma.len();
    if j_bumps < 2 || j_bumps > n {
        return Err(CoreError::Config(format!(
            "bump count J={j_bumps} out of range [2, {n}]"
        )));
    }
    let arcs: Vec<f64> = sigma.positions().map(|p| bmesh.arc[p]).collect();
    // knots on patch nodes, equispaced in index
    let knot_pos: Vec<usize> = (0..j_bumps)
        .map(|j| (j as f64 * (n - 1) as f64 / (j_bumps - 1) as f64).round() as usize)
        .collect();
    let knots: Vec<f64> = knot_pos.iter().map(|&i| arcs[i]).collect();

    let mut raw = vec![vec![0.0; n]; j_bumps];
    let mut widths = vec![0.0; j_bumps];
    for j in 0..j_bumps {
        let left = if j == 0 { knots[1] - knots[0] } else { knots[j] - knots[j - 1] };
        let right = if j + 1 == j_bumps {
            knots[j] - knots[j - 1]
        } else {
            knots[j + 1] - knots[j]
        };
        match shape {
            BumpShape::Hat => {
                widths[j] = 0.5 * (left + right);
                for (i, &s) in arcs.iter().enumerate() {
                    let v = if s <= knots[j] {
                        1.0 - (knots[j] - s) / left
                    } else {
                        1.0 - (s - knots[j]) / right
                    };
                    raw[j][i] = v.max(0.0);
                }
            }
            BumpShape::Smooth => {
                let r = 1.5 * left.max(right);
                widths[j] = r;
                for (i, &s) in arcs.iter().enumerate() {
                    raw[j][i] = smooth_profile((s - knots[j]) / r);
                }
            }
        }
    }
    if matches!(shape, BumpShape::Smooth) {
        // Shepard normalization: the bumps then sum to exactly 1 on Σ
        for i in 0..n {
            let total: f64 = raw.iter().map(|b| b[i]).sum();
            debug_assert!(total > 0.0);
            for b in raw.iter_mut() {
                b[i] /= total;
            }
        }
    }

    // conditioning check on the collocation Gram matrix
    let mut gram = vec![0.0; j_bumps * j_bumps];
    for a in 0..j_bumps {
        for b in 0..=a {
            let v: f64 = (0..n).map(|i| raw[a][i] * raw[b][i]).sum();
            gram[a * j_bumps + b] = v;
            gram[b * j_bumps + a] = v;
        }
    }
    let (gvals, _) = crate::linalg::jacobi_eigen(&gram, j_bumps);
    let gmax = gvals.last().copied().unwrap_or(0.0);
    if gvals[0] <= 1e-12 * gmax.max(1e-300) {
        return Err(CoreError::Config(
            "bump collocation matrix is rank deficient".into(),
        ));
    }

    let bumps = raw
        .into_iter()
        .map(|patch_vals| {
            let mut full = vec![0.0; bmesh.len()];
            for (i, p) in sigma.positions().enumerate() {
                full[p] = patch_vals[i];
            }
            BoundaryField { values: full }
        })
        .collect();
    Ok(BumpBasis {
        bumps,
        centers: knots,
        widths,
        shape,
        sigma: *sigma,
    })
}

/// Smooth random bump supported strictly inside Σ; sup-norm rescaled to
/// exactly `amplitude`. Deterministic in `seed` — center and width come
/// from the stream (seed, "random_bump").
pub fn random_bump(
    bmesh: &BoundaryMesh,
    sigma: &SigmaPatch,
    seed: u64,
    amplitude: f64,
) -> Result<BoundaryField> {
    if !(amplitude > 0.0) {
        return Err(CoreError::Config("bump amplitude must be > 0".into()));
    }
    let mut rng = rng::SplitMix64::stream(seed, "random_bump");
    let mut full = vec![0.0; bmesh.len()];
    let n = sigma.len();
    if n == 1 {
        full[sigma.first] = amplitude;
        return Ok(BoundaryField { values: full });
    }
    let arcs: Vec<f64> = sigma.positions().map(|p| bmesh.arc[p]).collect();
    let (s0, s1) = (arcs[0], arcs[n - 1]);
    let span = s1 - s0;
    let max_gap = arcs.windows(2).fold(0.0f64, |m, w| m.max(w[1] - w[0]));

    let center = rng.uniform(s0 + 0.15 * span, s1 - 0.15 * span);
    let mut width = rng.uniform(0.10 * span, 0.30 * span);
    width = width.max(2.0 * max_gap);
    width = width.min(center - s0 - 0.02 * span).min(s1 - center - 0.02 * span);
    width = width.max(1.5 * max_gap);

    let mut maxval = 0.0f64;
    let mut patch_vals = vec![0.0; n];
    for (i, &s) in arcs.iter().enumerate() {
        let v = smooth_profile((s - center) / width);
        patch_vals[i] = v;
        maxval = maxval.max(v);
    }
    debug_assert!(maxval > 0.0, "bump support misses all patch nodes");
    for (i, p) in sigma.positions().enumerate() {
        full[p] = patch_vals[i] * amplitude / maxval;
    }
    Ok(BoundaryField { values: full })
}
