//! Relaxing-space machinery: gradient-representation-space construction,
//! closest-direction extraction via principal angles, the greedy search for
//! the maximal relaxable subspace of the frozen space, and executable checks
//! of the guarantees the search comes with.
//!
//! Per-layer searches are independent of each other and touch no shared
//! state, so they may run concurrently.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, energy_rank, norm, normalize, numerical_rank, svd, Matrix, ToleranceConfig};
use crate::network::PerSampleGrads;
use crate::subspace::{complement, Subspace};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Knobs of the relaxing-space search.
///
/// `zeta = cos(gamma)` is the acceptance threshold on the cosine between a
/// frozen-space direction and the gradient representation space; hidden
/// layers and the output-adjacent layer carry separate values.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RelaxConfig {
    pub zeta_hidden: f64,
    pub zeta_output: f64,
    /// Cap on the gradient-representation-space dimension (top-k).
    pub k_g: usize,
    /// Epochs of fine-tuning between successive searches.
    pub e_t: usize,
    /// Cap on search rounds per task.
    pub max_search_rounds: usize,
    /// Per-sample gradient probe batch size for each search round.
    pub probe_batch: usize,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        RelaxConfig {
            zeta_hidden: 0.95,
            zeta_output: 0.9,
            k_g: 10,
            e_t: 1,
            max_search_rounds: 2,
            probe_batch: 256,
        }
    }
}

impl RelaxConfig {
    pub fn validate(&self) -> Result<()> {
        for z in [self.zeta_hidden, self.zeta_output] {
            if !(z > 0.0 && z <= 1.0) {
                return Err(Error::Config(format!("zeta must lie in (0, 1], got {z}")));
            }
        }
        if self.k_g < 1 || self.e_t < 1 || self.max_search_rounds < 1 || self.probe_batch < 1 {
            return Err(Error::Config(
                "k_g, e_t, max_search_rounds and probe_batch must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Threshold for layer `layer` of `n_layers`: the output-adjacent layer
    /// uses `zeta_output`, all others `zeta_hidden`.
    pub fn zeta_for_layer(&self, layer: usize, n_layers: usize) -> f64 {
        if layer + 1 == n_layers {
            self.zeta_output
        } else {
            self.zeta_hidden
        }
    }
}

/// Diagnostics of one search invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchReport {
    /// Number of directions appended to the relaxing space.
    pub added_dims: usize,
    /// Cosine of each accepted direction to the gradient space, in
    /// acceptance order (non-increasing).
    pub cosines: Vec<f64>,
    /// Greedy iterations that accepted a direction (equals `added_dims`).
    pub rounds_used: usize,
    /// Best cosine left in the complement at termination; below the
    /// acceptance threshold by construction.
    pub complement_max_cosine: f64,
}

impl SearchReport {
    fn empty() -> Self {
        SearchReport {
            added_dims: 0,
            cosines: vec![],
            rounds_used: 0,
            complement_max_cosine: 0.0,
        }
    }
}

/// Representation space of a batch of per-sample gradients: the span of the
/// leading right singular vectors of the vertically stacked per-sample
/// gradient matrices, capped at `k_g` and thresholded by squared-singular-
/// value energy at `epsilon_g`.
///
/// Exploits the rank-one structure of dense-layer per-sample gradients
/// (`δ xᵀ`): the Gram matrix of the stack equals `Σ ‖δⱼ‖² xⱼxⱼᵀ`, so the
/// right singular vectors of the stack are exactly the left singular vectors
/// of the inputs scaled per-column by `‖δⱼ‖`. Returns the empty subspace
/// when every per-sample gradient vanishes.
pub fn gradient_rep_space(
    grads: &PerSampleGrads,
    k_g: usize,
    epsilon_g: f64,
    tol: &ToleranceConfig,
) -> Result<Subspace> {
    let ambient = grads.inputs.rows();
    let n = grads.count();
    let mut scaled = Matrix::zeros(ambient, n);
    let mut any = false;
    for j in 0..n {
        let w = grads.deltas.col_norm(j);
        if w == 0.0 {
            continue;
        }
        any = true;
        for i in 0..ambient {
            scaled.set(i, j, grads.inputs.get(i, j) * w);
        }
    }
    if !any || scaled.max_abs() == 0.0 {
        return Ok(Subspace::empty(ambient));
    }
    let decomp = svd(&scaled)?;
    top_energy_subspace(&decomp.u, &decomp.singular, k_g, epsilon_g, tol)
}

/// Same construction from explicit per-sample gradient matrices: stacks them
/// vertically and takes right singular vectors. Intended for verification at
/// small sizes; the factored entry point is the production path.
pub fn gradient_rep_space_dense(
    mats: &[Matrix],
    k_g: usize,
    epsilon_g: f64,
    tol: &ToleranceConfig,
) -> Result<Subspace> {
    let first = mats
        .first()
        .ok_or_else(|| Error::InvalidInput("no per-sample gradients".into()))?;
    let (out, ambient) = (first.rows(), first.cols());
    if mats.iter().any(|m| m.rows() != out || m.cols() != ambient) {
        return Err(Error::ShapeMismatch(
            "per-sample gradient shapes differ".into(),
        ));
    }
    let mut stack = Matrix::zeros(out * mats.len(), ambient);
    for (s, m) in mats.iter().enumerate() {
        for i in 0..out {
            stack.row_mut(s * out + i).copy_from_slice(m.row(i));
        }
    }
    if stack.max_abs() == 0.0 {
        return Ok(Subspace::empty(ambient));
    }
    let decomp = svd(&stack)?;
    top_energy_subspace(&decomp.v, &decomp.singular, k_g, epsilon_g, tol)
}

fn top_energy_subspace(
    vectors: &Matrix,
    singular: &[f64],
    k_g: usize,
    epsilon_g: f64,
    tol: &ToleranceConfig,
) -> Result<Subspace> {
    let rank = numerical_rank(singular, tol);
    if rank == 0 {
        return Ok(Subspace::empty(vectors.rows()));
    }
    let k = energy_rank(&singular[..rank], epsilon_g)?.min(k_g);
    Ok(Subspace::from_basis_unchecked(vectors.take_cols(k)))
}

/// Direction of the complement closest to the gradient space: the unit
/// vector `d ∈ complement` maximizing `‖Proj_Rg d‖`, together with that
/// maximum (the largest principal cosine). Computed from the top singular
/// triple of `B_compᵀ B_Rg`.
pub fn closest_direction(complement: &Subspace, rg: &Subspace) -> Result<(Vec<f64>, f64)> {
    if complement.is_empty() || rg.is_empty() {
        return Err(Error::EmptySubspace(
            "closest_direction needs nonempty subspaces".into(),
        ));
    }
    if complement.ambient_dim() != rg.ambient_dim() {
        return Err(Error::ShapeMismatch("ambient dimension mismatch".into()));
    }
    let cross = complement.basis().mul_at_b(rg.basis());
    let decomp = svd(&cross)?;
    let cosine = decomp.singular[0].clamp(0.0, 1.0);
    let coeffs = decomp.u.col(0);
    let mut d = complement.basis().mul_vec(&coeffs);
    normalize(&mut d);
    Ok((d, cosine))
}

/// Greedy search for the relaxing space inside the frozen space `u`.
///
/// Starting from `existing_v ⊆ u`, repeatedly takes the complement `u \ v`,
/// extracts its closest direction to `rg`, and appends it while the cosine
/// clears `zeta` (within `angle_tol`). On return every added basis vector
/// has cosine ≥ `zeta − angle_tol` to `rg` and no relaxable direction
/// remains in the final complement.
pub fn search_relaxing_space(
    u: &Subspace,
    rg: &Subspace,
    zeta: f64,
    existing_v: &Subspace,
    tol: &ToleranceConfig,
) -> Result<(Subspace, SearchReport)> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "zeta must lie in (0, 1], got {zeta}"
        )));
    }
    if u.ambient_dim() != existing_v.ambient_dim() || u.ambient_dim() != rg.ambient_dim() {
        return Err(Error::ShapeMismatch("ambient dimension mismatch".into()));
    }
    let contain = u.containment_residual(existing_v)?;
    if contain > tol.orthonorm_tol {
        return Err(Error::InvalidInput(format!(
            "existing relaxing space is not contained in the frozen space \
             (residual {contain:.3e})"
        )));
    }
    if u.is_empty() || rg.is_empty() {
        return Ok((existing_v.clone(), SearchReport::empty()));
    }

    let mut v = existing_v.clone();
    let mut report = SearchReport::empty();
    loop {
        let comp = complement(u, &v, tol)?;
        if comp.is_empty() {
            break;
        }
        let (d, cosine) = closest_direction(&comp, rg)?;
        if cosine >= zeta - tol.angle_tol {
            v = append_orthonormal(&v, &d);
            report.cosines.push(cosine);
            report.added_dims += 1;
            report.rounds_used += 1;
        } else {
            report.complement_max_cosine = cosine;
            break;
        }
    }
    Ok((v, report))
}

/// Append a direction to a basis, re-orthogonalizing once for hygiene.
fn append_orthonormal(v: &Subspace, d: &[f64]) -> Subspace {
    let mut dd = d.to_vec();
    for q in 0..v.dim() {
        let qcol = v.basis().col(q);
        let c = dot(&qcol, &dd);
        axpy(-c, &qcol, &mut dd);
    }
    normalize(&mut dd);
    Subspace::from_basis_unchecked(v.basis().push_col(&dd))
}

/// Pass/fail record of the three searchable guarantees, evaluated on one
/// `(u, rg, zeta)` instance and the search output.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremChecklist {
    /// The relaxing space never out-dimensions the gradient space.
    pub dim_bound: bool,
    /// No relaxable direction remains in the complement at termination.
    pub maximality_witness: bool,
    /// Accepted cosines are non-increasing.
    pub monotone_cosines: bool,
    /// Sampled vectors of V are at least as aligned as the last accepted one.
    pub lemma1_sampled: bool,
}

impl TheoremChecklist {
    pub fn passed(&self) -> bool {
        self.dim_bound && self.maximality_witness && self.monotone_cosines && self.lemma1_sampled
    }
}

/// Evaluates the checklist for a search produced by [`search_relaxing_space`]
/// with an empty starting space. `n_samples` random unit vectors of `v` are
/// drawn for the sampled clause.
pub fn verify_theorems(
    u: &Subspace,
    rg: &Subspace,
    zeta: f64,
    v: &Subspace,
    report: &SearchReport,
    tol: &ToleranceConfig,
    rng: &mut impl Rng,
    n_samples: usize,
) -> TheoremChecklist {
    let dim_bound = v.dim() <= rg.dim();

    let maximality_witness = if u.is_empty() || rg.is_empty() {
        true
    } else {
        match complement(u, v, tol) {
            Ok(comp) if !comp.is_empty() => match closest_direction(&comp, rg) {
                Ok((_, cosine)) => cosine < zeta && report.complement_max_cosine < zeta,
                Err(_) => false,
            },
            Ok(_) => true,
            Err(_) => false,
        }
    };

    let monotone_cosines = report
        .cosines
        .windows(2)
        .all(|w| w[0] >= w[1] - 1e-12);

    let lemma1_sampled = if v.dim() == 0 || rg.is_empty() {
        true
    } else {
        let last = *report.cosines.last().unwrap_or(&0.0);
        (0..n_samples).all(|_| {
            let mut c: Vec<f64> = (0..v.dim()).map(|_| sample_normal(rng)).collect();
            if normalize(&mut c) == 0.0 {
                return true;
            }
            let x = v.basis().mul_vec(&c);
            let cos = cosine_to(rg, &x);
            cos >= last - 1e-6
        })
    };

    TheoremChecklist {
        dim_bound,
        maximality_witness,
        monotone_cosines,
        lemma1_sampled,
    }
}

/// Cosine of the angle between `x` and the subspace.
pub fn cosine_to(s: &Subspace, x: &[f64]) -> f64 {
    let n = norm(x);
    if n == 0.0 || s.is_empty() {
        return 0.0;
    }
    (norm(&s.coefficients(x)) / n).clamp(0.0, 1.0)
}

fn sample_normal(rng: &mut impl Rng) -> f64 {
    // Box–Muller; avoids pulling a distributions dependency into hot loops.
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::PerSampleGrads;
    use crate::rng::substream;
    use crate::subspace::span_of;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn random_subspace(ambient: usize, dim: usize, rng: &mut impl Rng) -> Subspace {
        loop {
            let m = Matrix::from_fn(ambient, dim, |_, _| rng.random_range(-1.0..1.0));
            let s = span_of(&m, &tol()).unwrap();
            if s.dim() == dim {
                return s;
            }
        }
    }

    /// Independent eigen-oracle for the stacked Gram matrix (cyclic Jacobi).
    fn gram_eigen_rank(mats: &[Matrix], epsilon: f64) -> usize {
        let n = mats[0].cols();
        let mut g = Matrix::zeros(n, n);
        for m in mats {
            g = g.add(&m.mul_at_b(m));
        }
        let mut a: Vec<Vec<f64>> = (0..n).map(|i| g.row(i).to_vec()).collect();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p][q] * a[p][q];
                }
            }
            if off < 1e-26 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q].abs() < 1e-32 {
                        continue;
                    }
                    let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[i][i].max(0.0)).collect();
        eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let total: f64 = eig.iter().sum();
        let mut cum = 0.0;
        for (i, e) in eig.iter().enumerate() {
            cum += e;
            if cum >= epsilon * total {
                return i + 1;
            }
        }
        eig.len()
    }

    #[test]
    fn rank_one_gradient_recovers_input_direction() {
        let x = vec![0.6, 0.0, 0.8];
        let delta = vec![2.0, -1.0];
        let grads = PerSampleGrads {
            deltas: Matrix::from_columns(2, &[delta]).unwrap(),
            inputs: Matrix::from_columns(3, &[x.clone()]).unwrap(),
        };
        let s = gradient_rep_space(&grads, 5, 0.9, &tol()).unwrap();
        assert_eq!(s.dim(), 1);
        let b = s.basis().col(0);
        for (a, e) in b.iter().zip(x.iter()) {
            assert!((a.abs() - e.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn k_g_caps_the_dimension() {
        let mut rng = substream(20, "relax-cap", &[]);
        let grads = PerSampleGrads {
            deltas: Matrix::from_fn(4, 10, |_, _| rng.random_range(-1.0..1.0)),
            inputs: Matrix::from_fn(6, 10, |_, _| rng.random_range(-1.0..1.0)),
        };
        let s = gradient_rep_space(&grads, 1, 1.0, &tol()).unwrap();
        assert!(s.dim() <= 1);
    }

    #[test]
    fn zero_gradients_give_empty_space() {
        let grads = PerSampleGrads {
            deltas: Matrix::zeros(4, 5),
            inputs: Matrix::from_fn(6, 5, |i, j| (i + j) as f64),
        };
        let s = gradient_rep_space(&grads, 3, 0.9, &tol()).unwrap();
        assert!(s.is_empty());
        assert!(gradient_rep_space_dense(&[Matrix::zeros(4, 6)], 3, 0.9, &tol())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn factored_and_dense_paths_agree_with_eigen_oracle() {
        let mut rng = substream(21, "relax-agree", &[]);
        let n_samples = 10;
        let deltas = Matrix::from_fn(4, n_samples, |_, _| rng.random_range(-1.0..1.0));
        let inputs = Matrix::from_fn(6, n_samples, |_, _| rng.random_range(-1.0..1.0));
        let grads = PerSampleGrads {
            deltas: deltas.clone(),
            inputs: inputs.clone(),
        };
        let mats: Vec<Matrix> = (0..n_samples).map(|j| grads.materialize(j)).collect();
        for eps in [0.5, 0.9, 1.0] {
            let fast = gradient_rep_space(&grads, 100, eps, &tol()).unwrap();
            let dense = gradient_rep_space_dense(&mats, 100, eps, &tol()).unwrap();
            assert_eq!(fast.dim(), dense.dim(), "eps={eps}");
            assert!(fast.projector_distance(&dense) < 1e-8, "eps={eps}");
            assert_eq!(fast.dim(), gram_eigen_rank(&mats, eps), "eigen oracle, eps={eps}");
        }
    }

    #[test]
    fn closest_direction_containment_and_orthogonality() {
        let mut rng = substream(22, "relax-closest", &[]);
        let comp = random_subspace(10, 6, &mut rng);
        // Rg ⊆ complement: cosine 1 and d ∈ Rg.
        let combo = Matrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let rg = span_of(&comp.basis().mul(&combo), &tol()).unwrap();
        let (d, cos) = closest_direction(&comp, &rg).unwrap();
        assert!((cos - 1.0).abs() < 1e-10);
        assert!(rg.angle(&d).unwrap() < 1e-7);
        // Orthogonal Rg: cosine 0.
        let mut basis_cols: Vec<Vec<f64>> = Vec::new();
        for j in 0..4 {
            let mut v: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = comp.project(&v).unwrap();
            for (x, pi) in v.iter_mut().zip(p.iter()) {
                *x -= pi;
            }
            for q in &basis_cols {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
            if normalize(&mut v) > 1e-6 && j < 2 {
                basis_cols.push(v);
            }
        }
        let rg_perp =
            Subspace::from_basis(Matrix::from_columns(10, &basis_cols).unwrap(), &tol()).unwrap();
        let (_, cos0) = closest_direction(&comp, &rg_perp).unwrap();
        assert!(cos0 < 1e-10);
        // Empty inputs are rejected.
        assert!(closest_direction(&Subspace::empty(10), &rg).is_err());
        assert!(closest_direction(&comp, &Subspace::empty(10)).is_err());
    }

    #[test]
    fn search_with_zeta_one_and_disjoint_spaces_is_noop() {
        let mut rng = substream(23, "relax-noop", &[]);
        let u = random_subspace(12, 5, &mut rng);
        let rg = random_subspace(12, 2, &mut rng);
        let (v, report) =
            search_relaxing_space(&u, &rg, 1.0, &Subspace::empty(12), &tol()).unwrap();
        assert_eq!(v.dim(), 0);
        assert_eq!(report.added_dims, 0);
        assert!(report.complement_max_cosine < 1.0);
    }

    #[test]
    fn search_with_contained_rg_saturates_the_bound() {
        let mut rng = substream(24, "relax-contained", &[]);
        let u = random_subspace(12, 6, &mut rng);
        let combo = Matrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
        let rg = span_of(&u.basis().mul(&combo), &tol()).unwrap();
        for zeta in [0.3, 0.9, 1.0] {
            let (v, report) =
                search_relaxing_space(&u, &rg, zeta, &Subspace::empty(12), &tol()).unwrap();
            assert_eq!(v.dim(), rg.dim(), "zeta={zeta}");
            assert!(report.cosines.iter().all(|&c| c > 1.0 - 1e-9));
        }
    }

    #[test]
    fn search_oracle_on_random_instance() {
        let mut rng = substream(25, "relax-oracle", &[]);
        let u = random_subspace(12, 8, &mut rng);
        let rg = random_subspace(12, 2, &mut rng);
        let zeta = 0.5;
        let (v, report) =
            search_relaxing_space(&u, &rg, zeta, &Subspace::empty(12), &tol()).unwrap();
        let comp = complement(&u, &v, &tol()).unwrap();
        // Sampled complement vectors never reach the threshold.
        for _ in 0..100_000 {
            let mut c: Vec<f64> = (0..comp.dim()).map(|_| sample_normal(&mut rng)).collect();
            if normalize(&mut c) == 0.0 {
                continue;
            }
            let x = comp.basis().mul_vec(&c);
            assert!(cosine_to(&rg, &x) < zeta + 1e-6);
        }
        // Sampled relaxing-space vectors stay above the last accepted cosine.
        if v.dim() > 0 {
            let last = *report.cosines.last().unwrap();
            for _ in 0..100_000 {
                let mut c: Vec<f64> = (0..v.dim()).map(|_| sample_normal(&mut rng)).collect();
                if normalize(&mut c) == 0.0 {
                    continue;
                }
                let x = v.basis().mul_vec(&c);
                assert!(cosine_to(&rg, &x) >= last - 1e-6);
            }
        }
    }

    #[test]
    fn search_theorem_properties_random_campaign() {
        let mut rng = substream(26, "relax-campaign", &[]);
        for i in 0..200 {
            let ambient = rng.random_range(2..=20);
            let du = rng.random_range(1..=ambient);
            let dr = rng.random_range(1..=ambient.min(6));
            let zeta = rng.random_range(0.05..=1.0);
            let u = random_subspace(ambient, du, &mut rng);
            let rg = random_subspace(ambient, dr, &mut rng);
            let (v, report) =
                search_relaxing_space(&u, &rg, zeta, &Subspace::empty(ambient), &tol()).unwrap();
            let checklist =
                verify_theorems(&u, &rg, zeta, &v, &report, &tol(), &mut rng, 200);
            assert!(checklist.passed(), "instance {i}: {checklist:?}");
            assert!(report.rounds_used <= rg.dim(), "instance {i}");
            // Idempotence: re-running adds nothing.
            let (v2, r2) = search_relaxing_space(&u, &rg, zeta, &v, &tol()).unwrap();
            assert_eq!(v2.dim(), v.dim(), "instance {i}");
            assert_eq!(r2.added_dims, 0, "instance {i}");
        }
    }

    #[test]
    fn search_rejects_foreign_existing_space() {
        let mut rng = substream(27, "relax-foreign", &[]);
        let u = random_subspace(8, 3, &mut rng);
        let foreign = random_subspace(8, 2, &mut rng);
        let rg = random_subspace(8, 2, &mut rng);
        assert!(search_relaxing_space(&u, &rg, 0.5, &foreign, &tol()).is_err());
    }

    #[test]
    fn search_with_empty_inputs_returns_existing() {
        let mut rng = substream(28, "relax-empty", &[]);
        let u = random_subspace(8, 3, &mut rng);
        let (v, report) =
            search_relaxing_space(&u, &Subspace::empty(8), 0.5, &Subspace::empty(8), &tol())
                .unwrap();
        assert!(v.is_empty());
        assert_eq!(report.added_dims, 0);
        let (v2, _) = search_relaxing_space(
            &Subspace::empty(8),
            &Subspace::empty(8),
            0.5,
            &Subspace::empty(8),
            &tol(),
        )
        .unwrap();
        assert!(v2.is_empty());
    }

    #[test]
    fn zeta_selection_by_layer() {
        let cfg = RelaxConfig::default();
        assert_eq!(cfg.zeta_for_layer(0, 3), cfg.zeta_hidden);
        assert_eq!(cfg.zeta_for_layer(1, 3), cfg.zeta_hidden);
        assert_eq!(cfg.zeta_for_layer(2, 3), cfg.zeta_output);
    }

    #[test]
    fn config_validation() {
        let mut cfg = RelaxConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.zeta_hidden = 0.0;
        assert!(cfg.validate().is_err());
        cfg.zeta_hidden = 0.5;
        cfg.max_search_rounds = 0;
        assert!(cfg.validate().is_err());
    }
}
