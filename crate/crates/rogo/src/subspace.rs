//! Subspaces of a layer's input space and the geometric primitives the
//! training rules are built from: projection, vector-to-subspace angle,
//! frozen-space extension, representation-space extraction and the oblique
//! combination construction.

use crate::error::{Error, Result};
use crate::linalg::{
    axpy, dot, energy_rank, norm, normalize, numerical_rank, orthonormalize, svd, Matrix,
    ToleranceConfig,
};
use std::io::{Read, Write};

/// Serialization format tag; bump on layout changes.
const SUBSPACE_FORMAT_VERSION: u8 = 1;

/// A subspace represented by an orthonormal basis (`ambient × dim`,
/// columns are the basis vectors). `dim` may be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient: usize,
    basis: Matrix,
}

impl Subspace {
    pub fn empty(ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: Matrix::zeros(ambient, 0),
        }
    }

    /// Wrap a basis after checking orthonormality within `orthonorm_tol`.
    pub fn from_basis(basis: Matrix, tol: &ToleranceConfig) -> Result<Self> {
        if !basis.is_finite() {
            return Err(Error::InvalidInput("basis has non-finite entries".into()));
        }
        if basis.cols() > basis.rows() {
            return Err(Error::InvalidInput(format!(
                "basis of {} columns cannot be orthonormal in dimension {}",
                basis.cols(),
                basis.rows()
            )));
        }
        let gram = basis.mul_at_b(&basis);
        let defect = gram.sub(&Matrix::identity(basis.cols())).max_abs();
        if defect >= tol.orthonorm_tol {
            return Err(Error::InvalidInput(format!(
                "basis is not orthonormal: |BᵀB − I| max entry {defect:.3e}"
            )));
        }
        Ok(Subspace {
            ambient: basis.rows(),
            basis,
        })
    }

    /// Internal constructor for bases that are orthonormal by construction.
    pub(crate) fn from_basis_unchecked(basis: Matrix) -> Self {
        Subspace {
            ambient: basis.rows(),
            basis,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    /// Basis coefficients `Bᵀv`.
    pub fn coefficients(&self, v: &[f64]) -> Vec<f64> {
        self.basis.mul_tvec(v)
    }

    /// Orthogonal projection `B Bᵀ v`. The projection over the empty
    /// subspace is the zero vector.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.ambient {
            return Err(Error::ShapeMismatch(format!(
                "vector of length {} vs ambient dimension {}",
                v.len(),
                self.ambient
            )));
        }
        if self.is_empty() {
            return Ok(vec![0.0; self.ambient]);
        }
        Ok(self.basis.mul_vec(&self.coefficients(v)))
    }

    /// Minimum angle between `v` and the subspace, in `[0, π/2]`:
    /// `arccos(‖B Bᵀ v‖ / ‖v‖)`. By convention the angle to the empty
    /// subspace is `π/2`.
    pub fn angle(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.ambient {
            return Err(Error::ShapeMismatch(format!(
                "vector of length {} vs ambient dimension {}",
                v.len(),
                self.ambient
            )));
        }
        let n = norm(v);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidInput(
                "angle is undefined for the zero vector".into(),
            ));
        }
        if self.is_empty() {
            return Ok(std::f64::consts::FRAC_PI_2);
        }
        // arccos(‖BBᵀv‖/‖v‖) evaluated as atan2(‖v−Pv‖, ‖Pv‖), which is
        // well-conditioned at both ends of [0, π/2].
        let proj = self.project(v)?;
        let resid: Vec<f64> = v.iter().zip(proj.iter()).map(|(a, b)| a - b).collect();
        Ok(norm(&resid).atan2(norm(&proj)).clamp(0.0, std::f64::consts::FRAC_PI_2))
    }

    /// Max residual `‖v − B Bᵀ v‖` over the columns of `other`; zero when
    /// `other` is contained in `self`.
    pub fn containment_residual(&self, other: &Subspace) -> Result<f64> {
        if other.ambient != self.ambient {
            return Err(Error::ShapeMismatch("ambient dimension mismatch".into()));
        }
        let mut worst = 0.0f64;
        for j in 0..other.dim() {
            let col = other.basis.col(j);
            let proj = self.project(&col)?;
            let resid: f64 = col
                .iter()
                .zip(proj.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(resid);
        }
        Ok(worst)
    }

    /// Max entry of |P_self − P_other| where P = B Bᵀ; a basis-independent
    /// distance between subspaces.
    pub fn projector_distance(&self, other: &Subspace) -> f64 {
        let ps = self.basis.mul_abt(&self.basis);
        let po = other.basis.mul_abt(&other.basis);
        ps.sub(&po).max_abs()
    }

    /// Versioned binary dump: tag, ambient, dim, then the basis row-major
    /// as little-endian `f64`.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&[SUBSPACE_FORMAT_VERSION])?;
        w.write_all(&(self.ambient as u64).to_le_bytes())?;
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        for v in self.basis.data() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R, tol: &ToleranceConfig) -> Result<Self> {
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        if tag[0] != SUBSPACE_FORMAT_VERSION {
            return Err(Error::Format {
                path: "<subspace stream>".into(),
                offset: 0,
                what: format!("unsupported format version {}", tag[0]),
            });
        }
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let ambient = u64::from_le_bytes(buf) as usize;
        r.read_exact(&mut buf)?;
        let dim = u64::from_le_bytes(buf) as usize;
        let mut data = vec![0.0f64; ambient * dim];
        for v in data.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Subspace::from_basis(Matrix::from_row_major(ambient, dim, data)?, tol)
    }
}

/// Union `span(U ∪ R)`: keeps `U`'s basis columns verbatim and in order,
/// orthogonalizes `R`'s columns against them and appends the survivors.
pub fn extend(u: &Subspace, r: &Subspace, tol: &ToleranceConfig) -> Result<Subspace> {
    if u.ambient != r.ambient {
        return Err(Error::ShapeMismatch(format!(
            "ambient dimensions differ: {} vs {}",
            u.ambient, r.ambient
        )));
    }
    if u.is_empty() {
        return Ok(r.clone());
    }
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    for j in 0..r.dim() {
        let mut v = r.basis.col(j);
        for _ in 0..2 {
            // Against U's columns, then against already-accepted new ones.
            for q in 0..u.dim() {
                let qcol = u.basis.col(q);
                let c = dot(&qcol, &v);
                axpy(-c, &qcol, &mut v);
            }
            for q in &accepted {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let n = norm(&v);
        if n > tol.rank_tol {
            for x in v.iter_mut() {
                *x /= n;
            }
            accepted.push(v);
        }
    }
    let mut basis = u.basis.clone();
    for col in &accepted {
        basis = basis.push_col(col);
    }
    Ok(Subspace::from_basis_unchecked(basis))
}

/// Orthogonal complement of `V` within `U` (`U \ V`): orthogonalizes `U`'s
/// basis against `V` and re-orthonormalizes, dropping near-zero residuals.
/// When `V` is empty the result is `U` verbatim.
pub fn complement(u: &Subspace, v: &Subspace, tol: &ToleranceConfig) -> Result<Subspace> {
    if u.ambient != v.ambient {
        return Err(Error::ShapeMismatch("ambient dimension mismatch".into()));
    }
    if v.is_empty() {
        return Ok(u.clone());
    }
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    for j in 0..u.dim() {
        let mut w = u.basis.col(j);
        for _ in 0..2 {
            for q in 0..v.dim() {
                let qcol = v.basis.col(q);
                let c = dot(&qcol, &w);
                axpy(-c, &qcol, &mut w);
            }
            for q in &accepted {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let n = norm(&w);
        if n > tol.rank_tol {
            for x in w.iter_mut() {
                *x /= n;
            }
            accepted.push(w);
        }
    }
    Ok(Subspace::from_basis_unchecked(Matrix::from_columns(
        u.ambient, &accepted,
    )?))
}

/// Span of the top-energy left singular vectors of a sample matrix
/// (columns are per-sample layer inputs). The kept dimension is the
/// `energy_rank` of the spectrum at `epsilon`, truncated to numerical rank.
pub fn extract_representation_space(
    samples: &Matrix,
    epsilon: f64,
    tol: &ToleranceConfig,
) -> Result<Subspace> {
    if samples.cols() == 0 || samples.max_abs() == 0.0 {
        return Err(Error::InvalidInput(
            "representation extraction needs at least one nonzero sample".into(),
        ));
    }
    let decomp = svd(samples)?;
    let rank = numerical_rank(&decomp.singular, tol);
    if rank == 0 {
        return Err(Error::InvalidInput(
            "sample matrix is numerically zero".into(),
        ));
    }
    let k = energy_rank(&decomp.singular[..rank], epsilon)?;
    Ok(Subspace::from_basis_unchecked(decomp.u.take_cols(k)))
}

/// Realizes the oblique construction: given a unit `v ⟂ U` and a target
/// angle `theta ∈ [0, π/2]`, returns the unit vector
/// `cos(theta)·u₁ + sin(theta)·v` (with `u₁` the first basis column of `U`)
/// whose angle to `U` is exactly `theta`.
pub fn oblique_combine(
    v: &[f64],
    u: &Subspace,
    theta: f64,
    tol: &ToleranceConfig,
) -> Result<Vec<f64>> {
    if u.is_empty() {
        return Err(Error::EmptySubspace(
            "oblique combination needs a nonempty subspace".into(),
        ));
    }
    if v.len() != u.ambient {
        return Err(Error::ShapeMismatch("vector/ambient mismatch".into()));
    }
    if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&theta) {
        return Err(Error::InvalidInput(format!(
            "theta must lie in [0, π/2], got {theta}"
        )));
    }
    let mut vn = v.to_vec();
    let n = normalize(&mut vn);
    if n == 0.0 {
        return Err(Error::InvalidInput("zero vector".into()));
    }
    let cos_to_u = norm(&u.project(&vn)?);
    if cos_to_u > tol.angle_tol {
        return Err(Error::InvalidInput(format!(
            "vector is not orthogonal to the subspace: residual cosine {cos_to_u:.3e}"
        )));
    }
    let u1 = u.basis.col(0);
    let mut out: Vec<f64> = u1
        .iter()
        .zip(vn.iter())
        .map(|(a, b)| theta.cos() * a + theta.sin() * b)
        .collect();
    normalize(&mut out);
    Ok(out)
}

/// Orthonormalize then wrap; convenience used by tests and generators.
pub fn span_of(m: &Matrix, tol: &ToleranceConfig) -> Result<Subspace> {
    Ok(Subspace::from_basis_unchecked(orthonormalize(m, tol)?))
}
