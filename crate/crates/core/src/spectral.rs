//! Singular systems of compact operators.
//!
//! An operator `K` is held as `(σ_l, u_l, v_l)` with `K v_l = σ_l u_l` and
//! `K* u_l = σ_l v_l`. Vectors are manipulated through their coefficients in
//! these bases; everything the regularizers need is coefficientwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative cutoff below which computed singular values are dropped.
pub const RANK_CUTOFF: f64 = 1e-14;
/// Jacobi sweeps stop once every pair is orthogonal to this relative level.
pub const JACOBI_TOL: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 60;

/// Coefficients of a vector in a singular basis, plus the norm of the part
/// not spanned by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    pub coefficients: Vec<f64>,
    pub orthogonal_norm: f64,
}

impl CoefficientVector {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self {
            coefficients,
            orthogonal_norm: 0.0,
        }
    }

    pub fn with_orthogonal(coefficients: Vec<f64>, orthogonal_norm: f64) -> Self {
        Self {
            coefficients,
            orthogonal_norm,
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len])
    }

    pub fn unit(len: usize, index: usize) -> Self {
        let mut c = vec![0.0; len];
        c[index] = 1.0;
        Self::new(c)
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn norm_squared(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>()
            + self.orthogonal_norm * self.orthogonal_norm
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Norm of `self - other`. Orthogonal parts are only known by their
    /// norms, so they are treated as parallel when both are nonzero.
    pub fn distance(&self, other: &CoefficientVector) -> Result<f64> {
        check_len(other.len(), self.len(), "distance")?;
        let inner: f64 = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let orth = self.orthogonal_norm - other.orthogonal_norm;
        Ok((inner + orth * orth).sqrt())
    }
}

/// Orthonormal system in a space of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// The first `rank` standard unit vectors.
    Standard { dim: usize },
    /// Explicit vectors, each of length `dim`.
    Dense { dim: usize, vectors: Vec<Vec<f64>> },
}

impl Basis {
    pub fn dim(&self) -> usize {
        match self {
            Basis::Standard { dim } | Basis::Dense { dim, .. } => *dim,
        }
    }

    /// Vector `l` as a dense array.
    pub fn vector(&self, l: usize) -> Vec<f64> {
        match self {
            Basis::Standard { dim } => {
                let mut e = vec![0.0; *dim];
                e[l] = 1.0;
                e
            }
            Basis::Dense { vectors, .. } => vectors[l].clone(),
        }
    }

    fn project(&self, rank: usize, x: &[f64]) -> CoefficientVector {
        let coefficients: Vec<f64> = match self {
            Basis::Standard { .. } => x[..rank].to_vec(),
            Basis::Dense { vectors, .. } => vectors.iter().map(|v| dot(v, x)).collect(),
        };
        let total: f64 = x.iter().map(|v| v * v).sum();
        let inside: f64 = coefficients.iter().map(|c| c * c).sum();
        let orthogonal_norm = (total - inside).max(0.0).sqrt();
        // Cancellation leaves ~sqrt(eps)·‖x‖ of noise in the difference above.
        let orthogonal_norm = if orthogonal_norm <= 1e-7 * total.sqrt() {
            0.0
        } else {
            orthogonal_norm
        };
        CoefficientVector::with_orthogonal(coefficients, orthogonal_norm)
    }

    fn synthesize(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        match self {
            Basis::Standard { .. } => out[..coefficients.len()].copy_from_slice(coefficients),
            Basis::Dense { vectors, .. } => {
                for (c, v) in coefficients.iter().zip(vectors) {
                    for (o, vi) in out.iter_mut().zip(v) {
                        *o += c * vi;
                    }
                }
            }
        }
        out
    }
}

/// Truncated singular system of a compact operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    singular_values: Vec<f64>,
    left: Basis,
    right: Basis,
}

/// Source condition `x̂ = (K*K)^{ν/2} w`, `‖w‖ ≤ ρ`, with `w` given by its
/// solution-side coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceCondition {
    pub nu: f64,
    pub rho: f64,
    pub w_coefficients: Vec<f64>,
}

impl SourceCondition {
    pub fn new(nu: f64, rho: f64, w_coefficients: Vec<f64>) -> Result<Self> {
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(Error::input(format!("source exponent must be >= 0, got {nu}")));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::input(format!("source radius must be > 0, got {rho}")));
        }
        let norm = w_coefficients.iter().map(|w| w * w).sum::<f64>().sqrt();
        if norm > rho * (1.0 + 1e-12) {
            return Err(Error::input(format!("‖w‖ = {norm} exceeds rho = {rho}")));
        }
        Ok(Self {
            nu,
            rho,
            w_coefficients,
        })
    }
}

/// JSON export of a decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

impl SpectralDecomposition {
    /// Builds a decomposition from explicit parts, checking the invariants.
    pub fn from_parts(singular_values: Vec<f64>, left: Basis, right: Basis) -> Result<Self> {
        if singular_values.is_empty() {
            return Err(Error::input("decomposition needs at least one singular value"));
        }
        for (l, s) in singular_values.iter().enumerate() {
            if !(s.is_finite() && *s > 0.0) {
                return Err(Error::input(format!("singular value {l} = {s} is not positive")));
            }
        }
        if singular_values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::input("singular values must be non-increasing"));
        }
        let rank = singular_values.len();
        for basis in [&left, &right] {
            match basis {
                Basis::Standard { dim } if *dim < rank => {
                    return Err(Error::input("basis dimension below rank"));
                }
                Basis::Dense { dim, vectors }
                    if vectors.len() != rank || vectors.iter().any(|v| v.len() != *dim) =>
                {
                    return Err(Error::input("basis shape does not match rank"));
                }
                _ => {}
            }
        }
        Ok(Self {
            singular_values,
            left,
            right,
        })
    }

    /// Diagonal operator on `R^m` with the given singular values.
    pub fn diagonal(singular_values: Vec<f64>) -> Result<Self> {
        let m = singular_values.len();
        Self::from_parts(
            singular_values,
            Basis::Standard { dim: m },
            Basis::Standard { dim: m },
        )
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values[0]
    }

    pub fn left_basis(&self) -> &Basis {
        &self.left
    }

    pub fn right_basis(&self) -> &Basis {
        &self.right
    }

    pub fn data_dim(&self) -> usize {
        self.left.dim()
    }

    pub fn solution_dim(&self) -> usize {
        self.right.dim()
    }

    pub fn summary(&self) -> DecompositionSummary {
        DecompositionSummary {
            singular_values: self.singular_values.clone(),
            rank: self.rank(),
        }
    }

    /// Coefficients `(y, u_l)` of a data-space vector.
    pub fn project_data(&self, y: &[f64]) -> Result<CoefficientVector> {
        check_len(y.len(), self.data_dim(), "data vector")?;
        Ok(self.left.project(self.rank(), y))
    }

    /// Coefficients `(x, v_l)` of a solution-space vector.
    pub fn project_solution(&self, x: &[f64]) -> Result<CoefficientVector> {
        check_len(x.len(), self.solution_dim(), "solution vector")?;
        Ok(self.right.project(self.rank(), x))
    }

    /// `Σ c_l v_l`; the orthogonal part, known only by its norm, is dropped.
    pub fn solution_vector(&self, x: &CoefficientVector) -> Result<Vec<f64>> {
        check_len(x.len(), self.rank(), "solution coefficients")?;
        Ok(self.right.synthesize(&x.coefficients))
    }

    /// `Σ c_l u_l`.
    pub fn data_vector(&self, y: &CoefficientVector) -> Result<Vec<f64>> {
        check_len(y.len(), self.rank(), "data coefficients")?;
        Ok(self.left.synthesize(&y.coefficients))
    }

    /// `K x`, coefficientwise `σ_l x_l`.
    pub fn apply_forward(&self, x: &CoefficientVector) -> Result<CoefficientVector> {
        check_len(x.len(), self.rank(), "forward input")?;
        Ok(CoefficientVector::new(
            self.singular_values
                .iter()
                .zip(&x.coefficients)
                .map(|(s, c)| s * c)
                .collect(),
        ))
    }

    /// `K⁺ y`, coefficientwise `y_l / σ_l`; the orthogonal part is discarded.
    pub fn apply_pseudoinverse(&self, y: &CoefficientVector) -> Result<CoefficientVector> {
        check_len(y.len(), self.rank(), "pseudoinverse input")?;
        Ok(CoefficientVector::new(
            self.singular_values
                .iter()
                .zip(&y.coefficients)
                .map(|(s, c)| c / s)
                .collect(),
        ))
    }

    /// Exact solution and data `(x̂, ŷ)` for `x̂ = (K*K)^{ν/2} w`.
    pub fn synthesize_source(
        &self,
        sc: &SourceCondition,
    ) -> Result<(CoefficientVector, CoefficientVector)> {
        check_len(sc.w_coefficients.len(), self.rank(), "source coefficients")?;
        let x_hat = CoefficientVector::new(
            self.singular_values
                .iter()
                .zip(&sc.w_coefficients)
                .map(|(s, w)| s.powf(sc.nu) * w)
                .collect(),
        );
        let y_hat = self.apply_forward(&x_hat)?;
        Ok((x_hat, y_hat))
    }

    /// Dense `Σ σ_l u_l v_lᵀ`, row-major.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.solution_dim()]; self.data_dim()];
        for (l, s) in self.singular_values.iter().enumerate() {
            let u = self.left.vector(l);
            let v = self.right.vector(l);
            for (row, ui) in a.iter_mut().zip(&u) {
                if *ui == 0.0 {
                    continue;
                }
                for (aij, vj) in row.iter_mut().zip(&v) {
                    *aij += s * ui * vj;
                }
            }
        }
        a
    }
}

fn check_len(got: usize, want: usize, what: &str) -> Result<()> {
    if got != want {
        return Err(Error::input(format!("{what}: length {got}, expected {want}")));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Singular value decomposition of a dense row-major matrix by one-sided
/// (Hestenes) Jacobi rotations.
pub fn svd(matrix: &[Vec<f64>]) -> Result<SpectralDecomposition> {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::input("matrix must have at least one row and column"));
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::input(format!(
                "row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite entry at ({i}, {j})")));
        }
    }

    // Orthogonalize the columns of A (or of Aᵀ when A is wide).
    let transposed = cols > rows;
    let n_vec = if transposed { rows } else { cols };
    let mut work: Vec<Vec<f64>> = if transposed {
        matrix.to_vec()
    } else {
        (0..cols)
            .map(|j| matrix.iter().map(|row| row[j]).collect())
            .collect()
    };
    let mut rot: Vec<Vec<f64>> = (0..n_vec)
        .map(|j| {
            let mut e = vec![0.0; n_vec];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n_vec {
            for q in (p + 1)..n_vec {
                let alpha = dot(&work[p], &work[p]);
                let beta = dot(&work[q], &work[q]);
                let gamma = dot(&work[p], &work[q]);
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut work, p, q, c, s);
                rotate(&mut rot, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut triples: Vec<(f64, Vec<f64>, Vec<f64>)> = work
        .into_iter()
        .zip(rot)
        .map(|(w, r)| {
            let sigma = dot(&w, &w).sqrt();
            (sigma, w, r)
        })
        .collect();
    triples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let sigma_max = triples[0].0;
    if sigma_max == 0.0 {
        return Err(Error::input("zero matrix has no nontrivial singular system"));
    }
    triples.retain(|t| t.0 >= RANK_CUTOFF * sigma_max);

    let mut singular_values = Vec::with_capacity(triples.len());
    let mut normalized = Vec::with_capacity(triples.len());
    let mut rotations = Vec::with_capacity(triples.len());
    for (sigma, w, r) in triples {
        normalized.push(w.iter().map(|x| x / sigma).collect::<Vec<_>>());
        rotations.push(r);
        singular_values.push(sigma);
    }
    // Columns of A·V are σ u; for Aᵀ the roles of the two bases swap.
    let (left, right) = if transposed {
        (
            Basis::Dense {
                dim: rows,
                vectors: rotations,
            },
            Basis::Dense {
                dim: cols,
                vectors: normalized,
            },
        )
    } else {
        (
            Basis::Dense {
                dim: rows,
                vectors: normalized,
            },
            Basis::Dense {
                dim: cols,
                vectors: rotations,
            },
        )
    };
    SpectralDecomposition::from_parts(singular_values, left, right)
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (wp, wq) = (&mut head[p], &mut tail[0]);
    for (a, b) in wp.iter_mut().zip(wq.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Coefficients `1/√(l(l−1))` for `l ≥ 2` (and 0 for `l = 1`) of the noise
/// direction that defeats the uncapped discrepancy principle.
pub fn counterexample_direction(m: usize) -> Result<CoefficientVector> {
    if m < 2 {
        return Err(Error::input("counterexample needs m >= 2"));
    }
    Ok(CoefficientVector::new(
        (1..=m)
            .map(|l| {
                if l == 1 {
                    0.0
                } else {
                    let l = l as f64;
                    1.0 / (l * (l - 1.0)).sqrt()
                }
            })
            .collect(),
    ))
}

/// Largest level for which `10^{-l}` is still a normal double with a
/// representable square.
pub const COUNTEREXAMPLE_MAX_LEVELS: usize = 150;

/// Diagonal operator `σ_l = 10^{-l}` with its adversarial noise direction.
/// The exact data of this scenario is zero.
pub fn counterexample_operator(m: usize) -> Result<(SpectralDecomposition, CoefficientVector)> {
    let direction = counterexample_direction(m)?;
    if m > COUNTEREXAMPLE_MAX_LEVELS {
        return Err(Error::input(format!(
            "counterexample operator limited to {COUNTEREXAMPLE_MAX_LEVELS} levels (σ_l² underflows)"
        )));
    }
    let sigmas = (1..=m).map(|l| 10f64.powi(-(l as i32))).collect();
    Ok((SpectralDecomposition::diagonal(sigmas)?, direction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn frobenius_error(a: &[Vec<f64>], op: &SpectralDecomposition) -> f64 {
        let r = op.reconstruct();
        a.iter()
            .zip(&r)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)))
            .sum::<f64>()
            .sqrt()
    }

    fn frobenius(a: &[Vec<f64>]) -> f64 {
        a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn max_gram_defect(basis: &Basis, rank: usize) -> f64 {
        let vs: Vec<_> = (0..rank).map(|l| basis.vector(l)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..rank {
            for j in 0..rank {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(&vs[i], &vs[j]) - target).abs());
            }
        }
        worst
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..rows)
            .map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn svd_identity() {
        let op = svd(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(op.singular_values(), &[1.0, 1.0]);
    }

    #[test]
    fn svd_diagonal_keeps_standard_basis() {
        let op = svd(&[vec![3.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(op.singular_values(), &[3.0, 2.0]);
        for l in 0..2 {
            let u = op.left_basis().vector(l);
            let v = op.right_basis().vector(l);
            assert!((u[l].abs() - 1.0).abs() < 1e-15);
            assert!((v[l].abs() - 1.0).abs() < 1e-15);
            assert!((u[l] * v[l] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn svd_permutation() {
        let op = svd(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(op.singular_values(), &[1.0, 1.0]);
        assert!(frobenius_error(&[vec![0.0, 1.0], vec![1.0, 0.0]], &op) < 1e-14);
    }

    #[test]
    fn svd_random_6x6_reconstructs() {
        let a = random_matrix(6, 6, 2024);
        let op = svd(&a).unwrap();
        assert!(frobenius_error(&a, &op) <= 1e-8 * frobenius(&a));
        assert!(max_gram_defect(op.left_basis(), op.rank()) < 1e-10);
        assert!(max_gram_defect(op.right_basis(), op.rank()) < 1e-10);
    }

    #[test]
    fn svd_truncates_rank_deficient() {
        // Rank one: outer product.
        let a = vec![vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]];
        let op = svd(&a).unwrap();
        assert_eq!(op.rank(), 1);
        assert!((op.singular_values()[0] - (14.0f64 * 5.0).sqrt()).abs() < 1e-12);
        assert!(frobenius_error(&a, &op) < 1e-12);
    }

    #[test]
    fn svd_rejects_bad_input() {
        assert!(matches!(svd(&[vec![f64::NAN]]), Err(Error::Input(_))));
        assert!(matches!(svd(&[]), Err(Error::Input(_))));
        assert!(matches!(svd(&[vec![1.0], vec![1.0, 2.0]]), Err(Error::Input(_))));
    }

    #[test]
    fn forward_and_pseudoinverse() {
        let op = SpectralDecomposition::diagonal(vec![2.0, 1.0]).unwrap();
        let y = op.apply_forward(&CoefficientVector::new(vec![1.0, 1.0])).unwrap();
        assert_eq!(y.coefficients, vec![2.0, 1.0]);
        assert_eq!(y.orthogonal_norm, 0.0);
        let x = op.apply_pseudoinverse(&y).unwrap();
        assert_eq!(x.coefficients, vec![1.0, 1.0]);
        assert_eq!(op.apply_forward(&CoefficientVector::zeros(2)).unwrap().norm(), 0.0);
        assert_eq!(op.apply_pseudoinverse(&CoefficientVector::zeros(2)).unwrap().norm(), 0.0);
        assert!(op.apply_forward(&CoefficientVector::zeros(3)).is_err());

        let tiny = SpectralDecomposition::diagonal(vec![1e-8]).unwrap();
        let x = tiny.apply_pseudoinverse(&CoefficientVector::new(vec![1.0])).unwrap();
        assert!((x.coefficients[0] - 1e8).abs() < 1e-4);
    }

    #[test]
    fn pseudoinverse_ignores_orthogonal_part() {
        let op = SpectralDecomposition::diagonal(vec![2.0]).unwrap();
        let x = op
            .apply_pseudoinverse(&CoefficientVector::with_orthogonal(vec![4.0], 3.0))
            .unwrap();
        assert_eq!(x.coefficients, vec![2.0]);
        assert_eq!(x.orthogonal_norm, 0.0);
    }

    #[test]
    fn counterexample_forward_on_e2() {
        let (op, _) = counterexample_operator(5).unwrap();
        let y = op.apply_forward(&CoefficientVector::unit(5, 1)).unwrap();
        assert!((y.coefficients[1] - 1e-2).abs() < 1e-18);
        assert!((op.singular_values()[2] - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn counterexample_direction_values() {
        let d = counterexample_direction(10).unwrap();
        assert_eq!(d.coefficients[0], 0.0);
        assert!((d.coefficients[1] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(counterexample_direction(1).is_err());
        assert!(counterexample_operator(1).is_err());
    }

    #[test]
    fn counterexample_tail_identity() {
        // Σ_{l>3} 1/(l(l-1)) = 1/3 − 1/m.
        let d = counterexample_direction(1_000_000).unwrap();
        let tail: f64 = d.coefficients[3..].iter().map(|c| c * c).sum();
        assert!((tail - 1.0 / 3.0).abs() < 2e-6, "tail {tail}");
    }

    #[test]
    fn counterexample_telescoping_partial_sums() {
        for m in [2usize, 3, 10, 100, 1000, 10_000] {
            let d = counterexample_direction(m).unwrap();
            let s: f64 = d.coefficients.iter().map(|c| c * c).sum();
            assert!((s - (1.0 - 1.0 / m as f64)).abs() < 1e-10, "m={m}: {s}");
        }
    }

    #[test]
    fn source_synthesis() {
        let op = SpectralDecomposition::diagonal(vec![0.5]).unwrap();
        let sc = SourceCondition::new(2.0, 1.0, vec![1.0]).unwrap();
        let (x, y) = op.synthesize_source(&sc).unwrap();
        assert_eq!(x.coefficients, vec![0.25]);
        assert_eq!(y.coefficients, vec![0.125]);

        let op = SpectralDecomposition::diagonal(vec![1.0, 0.5, 0.25]).unwrap();
        let w = vec![0.3, -0.4, 0.5];
        let sc = SourceCondition::new(0.0, 1.0, w.clone()).unwrap();
        assert_eq!(op.synthesize_source(&sc).unwrap().0.coefficients, w);
    }

    #[test]
    fn source_synthesis_harmonic_spectrum() {
        let sigmas: Vec<f64> = (1..=5).map(|l| 1.0 / l as f64).collect();
        let op = SpectralDecomposition::diagonal(sigmas).unwrap();
        let sc = SourceCondition::new(1.0, 1.0, CoefficientVector::unit(5, 2).coefficients).unwrap();
        let (x, y) = op.synthesize_source(&sc).unwrap();
        // oracle: elementwise σ_l^ν w_l
        let expected = [0.0, 0.0, 1.0 / 3.0, 0.0, 0.0];
        for (a, b) in x.coefficients.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let back = op.apply_pseudoinverse(&y).unwrap();
        assert!(back.distance(&x).unwrap() < 1e-12);
    }

    #[test]
    fn source_condition_validation() {
        assert!(SourceCondition::new(1.0, 1.0, vec![1.0, 1.0]).is_err());
        assert!(SourceCondition::new(-1.0, 1.0, vec![0.5]).is_err());
        assert!(SourceCondition::new(1.0, 0.0, vec![0.0]).is_err());
    }

    #[test]
    fn projection_tracks_orthogonal_component() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0]];
        let op = svd(&a).unwrap();
        let c = op.project_data(&[3.0, 4.0, 0.0]).unwrap();
        assert!((c.norm() - 5.0).abs() < 1e-12);
        assert!((c.orthogonal_norm - 4.0).abs() < 1e-12);
    }

    #[test]
    fn from_parts_rejects_bad_spectrum() {
        assert!(SpectralDecomposition::diagonal(vec![1.0, 2.0]).is_err());
        assert!(SpectralDecomposition::diagonal(vec![1.0, 0.0]).is_err());
        assert!(SpectralDecomposition::diagonal(vec![]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn svd_reconstruction_and_orthonormality(rows in 1usize..=50, cols in 1usize..=50, seed in any::<u64>()) {
            let a = random_matrix(rows, cols, seed);
            let op = svd(&a).unwrap();
            prop_assert!(frobenius_error(&a, &op) <= 1e-8 * frobenius(&a));
            prop_assert!(max_gram_defect(op.left_basis(), op.rank()) < 1e-10);
            prop_assert!(max_gram_defect(op.right_basis(), op.rank()) < 1e-10);
            prop_assert!(op.singular_values().windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn pseudoinverse_inverts_forward(seed in any::<u64>(), m in 1usize..40) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut sigmas: Vec<f64> = (0..m).map(|_| 10f64.powf(rng.random_range(-8.0..0.0))).collect();
            sigmas.sort_by(|a, b| b.total_cmp(a));
            let op = SpectralDecomposition::diagonal(sigmas).unwrap();
            let x = CoefficientVector::new((0..m).map(|_| rng.random_range(-1.0..1.0)).collect());
            let back = op.apply_pseudoinverse(&op.apply_forward(&x).unwrap()).unwrap();
            prop_assert!(back.distance(&x).unwrap() <= 1e-12 * x.norm().max(1e-300));
        }
    }
}
