//! Grouped designs: the coefficient partition, per-group empirical Gram
//! blocks and their symmetric (generalized) square roots.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{GqrError, Result};
use crate::Matrix;

/// Relative spectral cutoff below which an eigenvalue counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Tolerated relative asymmetry of a matrix handed to [`sqrt_psd`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Partition `{G₁, …, G_q}` of the coefficient indices `0..p`.
///
/// Indices are zero-based. The first group is always `[0]`, the unpenalized
/// intercept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    p: usize,
}

impl GroupPartition {
    /// Validates an explicit list of index sets.
    ///
    /// An intercept-only partition (`q = 1`) is accepted so that the
    /// unpenalized location problem can be expressed with the same types.
    pub fn new(groups: Vec<Vec<usize>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(GqrError::InvalidPartition("no groups".into()));
        }
        if groups[0] != [0] {
            return Err(GqrError::InvalidPartition(
                "first group must be the intercept {0}".into(),
            ));
        }
        let p: usize = groups.iter().map(Vec::len).sum();
        let mut seen = vec![false; p];
        for (k, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(GqrError::InvalidPartition(format!("group {k} is empty")));
            }
            for &j in g {
                if j >= p {
                    return Err(GqrError::InvalidPartition(format!(
                        "index {j} in group {k} exceeds p = {p}"
                    )));
                }
                if seen[j] {
                    return Err(GqrError::InvalidPartition(format!(
                        "index {j} appears in more than one group"
                    )));
                }
                seen[j] = true;
            }
        }
        Ok(Self { groups, p })
    }

    /// Contiguous groups with the given sizes, e.g. `[1, 5, 5]`.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut groups = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &s in sizes {
            groups.push((start..start + s).collect());
            start += s;
        }
        Self::new(groups)
    }

    /// The all-singleton partition `{0}, {1}, …, {p−1}` used for the ℓ₁ fit.
    pub fn singletons(p: usize) -> Result<Self> {
        Self::new((0..p).map(|j| vec![j]).collect())
    }

    /// Intercept followed by `d` contiguous blocks of `m` columns.
    pub fn uniform(d: usize, m: usize) -> Result<Self> {
        let mut sizes = vec![1];
        sizes.extend(std::iter::repeat_n(m, d));
        Self::from_sizes(&sizes)
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn group(&self, k: usize) -> &[usize] {
        &self.groups[k]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// `min_{k≥2} p_k`, or 1 for an intercept-only partition.
    pub fn p_min(&self) -> usize {
        self.groups[1..].iter().map(Vec::len).min().unwrap_or(1)
    }

    /// `p_S = Σ_{k∈S} p_k`.
    pub fn p_of(&self, set: &[usize]) -> usize {
        set.iter().map(|&k| self.groups[k].len()).sum()
    }

    /// Group index of every coefficient.
    pub fn membership(&self) -> Vec<usize> {
        let mut owner = vec![0; self.p];
        for (k, g) in self.groups.iter().enumerate() {
            for &j in g {
                owner[j] = k;
            }
        }
        owner
    }

    /// Active groups `S(β) = {0} ∪ {k ≥ 1 : ‖β_{G_k}‖₂ > tol}`.
    pub fn support(&self, beta: &[f64], tol: f64) -> Vec<usize> {
        let mut s = vec![0];
        for k in 1..self.groups.len() {
            if self.block_norm(beta, k) > tol {
                s.push(k);
            }
        }
        s
    }

    /// `‖β_{G_k}‖₂`.
    pub fn block_norm(&self, beta: &[f64], k: usize) -> f64 {
        self.groups[k].iter().map(|&j| beta[j] * beta[j]).sum::<f64>().sqrt()
    }

    /// Copies `β_{G_k}` out of a full coefficient vector.
    pub fn gather(&self, v: &[f64], k: usize) -> Vec<f64> {
        self.groups[k].iter().map(|&j| v[j]).collect()
    }

    /// Writes a block back into a full vector.
    pub fn scatter(&self, block: &[f64], k: usize, out: &mut [f64]) {
        for (&j, &b) in self.groups[k].iter().zip(block) {
            out[j] = b;
        }
    }
}

/// Result of [`sqrt_psd`].
#[derive(Debug, Clone)]
pub struct PsdSqrt {
    pub sqrt: Matrix,
    pub pinv_sqrt: Matrix,
    pub rank: usize,
    /// Eigenvalues after clipping, ascending.
    pub eigenvalues: Vec<f64>,
}

/// Symmetric square root and generalized inverse square root of a PSD matrix.
///
/// Eigenvalues below `1e-10·max(1, λ_max)` (including slightly negative ones)
/// are set to zero, and their inverse square roots to zero as well.
pub fn sqrt_psd(a: &Matrix) -> Result<PsdSqrt> {
    if !a.is_square() {
        return Err(GqrError::DimensionMismatch(format!(
            "sqrt_psd needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(GqrError::NonFinite("sqrt_psd input"));
    }
    let m = a.nrows();
    let scale = a.amax().max(1.0);
    let asym = (a - a.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(GqrError::Asymmetric(asym));
    }
    if m == 0 {
        return Ok(PsdSqrt {
            sqrt: Matrix::zeros(0, 0),
            pinv_sqrt: Matrix::zeros(0, 0),
            rank: 0,
            eigenvalues: vec![],
        });
    }
    if m == 1 {
        let v = a[(0, 0)];
        let tol = RANK_TOL * v.max(1.0);
        let (s, inv, rank, ev) = if v > tol {
            (v.sqrt(), 1.0 / v.sqrt(), 1, v)
        } else {
            (0.0, 0.0, 0, 0.0)
        };
        return Ok(PsdSqrt {
            sqrt: Matrix::from_element(1, 1, s),
            pinv_sqrt: Matrix::from_element(1, 1, inv),
            rank,
            eigenvalues: vec![ev],
        });
    }

    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lmax = eig.eigenvalues.max();
    let tol = RANK_TOL * lmax.max(1.0);
    let mut root = vec![0.0; m];
    let mut inv_root = vec![0.0; m];
    let mut clipped = vec![0.0; m];
    let mut rank = 0;
    for i in 0..m {
        let d = eig.eigenvalues[i];
        if d > tol {
            root[i] = d.sqrt();
            inv_root[i] = 1.0 / root[i];
            clipped[i] = d;
            rank += 1;
        }
    }
    let u = &eig.eigenvectors;
    let scaled = |diag: &[f64]| {
        let mut us = u.clone();
        for (j, &s) in diag.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        let mut out = &us * u.transpose();
        // exact symmetry
        out = (&out + out.transpose()) * 0.5;
        out
    };
    clipped.sort_by(f64::total_cmp);
    Ok(PsdSqrt {
        sqrt: scaled(&root),
        pinv_sqrt: scaled(&inv_root),
        rank,
        eigenvalues: clipped,
    })
}

/// Design matrix, partition and the cached per-group Gram quantities.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct GroupedDesign {
    x: Matrix,
    partition: GroupPartition,
    gram_blocks: Vec<Matrix>,
    gram_sqrts: Vec<Matrix>,
    gram_sqrt_pinvs: Vec<Matrix>,
    ranks: Vec<usize>,
}

impl GroupedDesign {
    /// Builds the design and caches `Σ̂_k`, `Σ̂_k^{1/2}` and `Σ̂_k^{-1/2}`.
    ///
    /// The first column must be exactly one in every row.
    pub fn new(x: Matrix, partition: GroupPartition) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 {
            return Err(GqrError::DimensionMismatch("design has no rows".into()));
        }
        if p != partition.p() {
            return Err(GqrError::DimensionMismatch(format!(
                "design has {p} columns but partition covers {}",
                partition.p()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GqrError::NonFinite("design matrix"));
        }
        if let Some(row) = (0..n).find(|&i| x[(i, 0)] != 1.0) {
            return Err(GqrError::NonUnitIntercept {
                row,
                value: x[(row, 0)],
            });
        }

        let q = partition.num_groups();
        let mut gram_blocks = Vec::with_capacity(q);
        let mut gram_sqrts = Vec::with_capacity(q);
        let mut gram_sqrt_pinvs = Vec::with_capacity(q);
        let mut ranks = Vec::with_capacity(q);
        for k in 0..q {
            let xk = x.select_columns(partition.group(k));
            let gram = xk.tr_mul(&xk) / n as f64;
            let root = sqrt_psd(&gram)?;
            gram_blocks.push(gram);
            gram_sqrts.push(root.sqrt);
            gram_sqrt_pinvs.push(root.pinv_sqrt);
            ranks.push(root.rank);
        }
        Ok(Self {
            x,
            partition,
            gram_blocks,
            gram_sqrts,
            gram_sqrt_pinvs,
            ranks,
        })
    }

    /// Convenience: prepend the intercept column to `covariates` and build
    /// with contiguous groups of the given sizes (the first size must be 1).
    pub fn with_intercept(covariates: &Matrix, sizes: &[usize]) -> Result<Self> {
        let n = covariates.nrows();
        let mut x = Matrix::from_element(n, covariates.ncols() + 1, 1.0);
        x.columns_mut(1, covariates.ncols()).copy_from(covariates);
        Self::new(x, GroupPartition::from_sizes(sizes)?)
    }

    /// Same matrix under a different partition.
    pub fn repartition(&self, partition: GroupPartition) -> Result<Self> {
        Self::new(self.x.clone(), partition)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn num_groups(&self) -> usize {
        self.partition.num_groups()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    /// `Σ̂_k = X'_{G_k} X_{G_k} / n`.
    pub fn gram(&self, k: usize) -> &Matrix {
        &self.gram_blocks[k]
    }

    /// `Σ̂_k^{1/2}`.
    pub fn gram_sqrt(&self, k: usize) -> &Matrix {
        &self.gram_sqrts[k]
    }

    /// Generalized inverse `Σ̂_k^{-1/2}`.
    pub fn gram_sqrt_pinv(&self, k: usize) -> &Matrix {
        &self.gram_sqrt_pinvs[k]
    }

    pub fn gram_rank(&self, k: usize) -> usize {
        self.ranks[k]
    }

    /// `X_{G_k}` as a dense `n × p_k` matrix.
    pub fn group_columns(&self, k: usize) -> Matrix {
        self.x.select_columns(self.partition.group(k))
    }

    /// Full empirical Gram `X'X / n`.
    pub fn full_gram(&self) -> Matrix {
        self.x.tr_mul(&self.x) / self.n() as f64
    }
}

/// Block-diagonal transform returned by [`rescale_to_identity`].
///
/// Holds `D_k^{1/2}` and `D_k^{-1/2}` for each group; the intercept block is 1.
#[derive(Debug, Clone)]
pub struct Rescaling {
    partition: GroupPartition,
    sqrt_blocks: Vec<Matrix>,
    inv_sqrt_blocks: Vec<Matrix>,
}

impl Rescaling {
    pub fn sqrt_block(&self, k: usize) -> &Matrix {
        &self.sqrt_blocks[k]
    }

    fn apply(&self, v: &[f64], blocks: &[Matrix]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (k, b) in blocks.iter().enumerate() {
            let block = crate::Vector::from_vec(self.partition.gather(v, k));
            self.partition.scatter((b * block).as_slice(), k, &mut out);
        }
        out
    }

    /// `β = D^{1/2} β⁰`.
    pub fn to_rescaled_coefficients(&self, beta_original: &[f64]) -> Vec<f64> {
        self.apply(beta_original, &self.sqrt_blocks)
    }

    /// `β⁰ = D^{-1/2} β`.
    pub fn to_original_coefficients(&self, beta_rescaled: &[f64]) -> Vec<f64> {
        self.apply(beta_rescaled, &self.inv_sqrt_blocks)
    }

    /// Recovers `X⁰` from the rescaled design (`x_i⁰ = D^{1/2} x_i`).
    pub fn restore_design(&self, x_rescaled: &Matrix) -> Matrix {
        let mut out = x_rescaled.clone();
        for (k, b) in self.sqrt_blocks.iter().enumerate() {
            let idx = self.partition.group(k);
            let cols = x_rescaled.select_columns(idx) * b;
            for (c, &j) in idx.iter().enumerate() {
                out.set_column(j, &cols.column(c));
            }
        }
        out
    }
}

/// Rescales every group so that its (population or empirical) Gram block is
/// the identity: `x_i = D^{-1/2} x_i⁰`.
///
/// `population_grams`, when given, holds one matrix per non-intercept group
/// (`q − 1` entries, in partition order). Otherwise the empirical blocks
/// `Σ̂_k` are used.
pub fn rescale_to_identity(
    design: &GroupedDesign,
    population_grams: Option<&[Matrix]>,
) -> Result<(GroupedDesign, Rescaling)> {
    let part = design.partition();
    let q = part.num_groups();
    if let Some(g) = population_grams {
        if g.len() != q - 1 {
            return Err(GqrError::DimensionMismatch(format!(
                "expected {} population Gram blocks, got {}",
                q - 1,
                g.len()
            )));
        }
    }
    let mut sqrt_blocks = vec![Matrix::identity(1, 1)];
    let mut inv_sqrt_blocks = vec![Matrix::identity(1, 1)];
    for k in 1..q {
        let gram = match population_grams {
            Some(g) => {
                let pk = part.group(k).len();
                if g[k - 1].shape() != (pk, pk) {
                    return Err(GqrError::DimensionMismatch(format!(
                        "population Gram for group {k} must be {pk}x{pk}"
                    )));
                }
                &g[k - 1]
            }
            None => design.gram(k),
        };
        let root = sqrt_psd(gram)?;
        if root.rank < gram.nrows() {
            return Err(GqrError::SingularGram {
                group: k,
                min_eig: root.eigenvalues.first().copied().unwrap_or(0.0),
            });
        }
        sqrt_blocks.push(root.sqrt);
        inv_sqrt_blocks.push(root.pinv_sqrt);
    }
    let rescaling = Rescaling {
        partition: part.clone(),
        sqrt_blocks,
        inv_sqrt_blocks,
    };

    let x0 = design.x();
    let mut x = x0.clone();
    for k in 1..q {
        let idx = part.group(k);
        let cols = x0.select_columns(idx) * &rescaling.inv_sqrt_blocks[k];
        for (c, &j) in idx.iter().enumerate() {
            x.set_column(j, &cols.column(c));
        }
    }
    Ok((GroupedDesign::new(x, part.clone())?, rescaling))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs(a: &Matrix) -> f64 {
        a.amax()
    }

    #[test]
    fn partition_rejects_bad_inputs() {
        assert!(GroupPartition::new(vec![]).is_err());
        assert!(GroupPartition::new(vec![vec![1], vec![0]]).is_err());
        assert!(GroupPartition::new(vec![vec![0], vec![1, 1]]).is_err());
        assert!(GroupPartition::new(vec![vec![0], vec![]]).is_err());
        assert!(GroupPartition::new(vec![vec![0], vec![3]]).is_err());
        let p = GroupPartition::from_sizes(&[1, 5, 5]).unwrap();
        assert_eq!(p.p(), 11);
        assert_eq!(p.num_groups(), 3);
        assert_eq!(p.p_min(), 5);
        assert_eq!(p.p_of(&[0, 2]), 6);
    }

    #[test]
    fn column_of_ones() {
        let x = Matrix::from_element(3, 1, 1.0);
        let d = GroupedDesign::new(x, GroupPartition::from_sizes(&[1]).unwrap()).unwrap();
        assert_eq!(d.gram(0)[(0, 0)], 1.0);
        assert_eq!(d.gram_sqrt(0)[(0, 0)], 1.0);
    }

    #[test]
    fn rejects_non_unit_intercept_and_mismatch() {
        let x = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 1.0]);
        let part = GroupPartition::from_sizes(&[1, 1]).unwrap();
        assert!(matches!(
            GroupedDesign::new(x.clone(), part),
            Err(GqrError::NonUnitIntercept { row: 1, .. })
        ));
        let part3 = GroupPartition::from_sizes(&[1, 2]).unwrap();
        assert!(matches!(
            GroupedDesign::new(x, part3),
            Err(GqrError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn diagonal_two_block() {
        // X_{G2} = [[2,0],[0,2]], n = 2 → Σ̂₂ = 2I, root √2·I
        let x = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 1.0, 0.0, 2.0]);
        let d = GroupedDesign::new(x, GroupPartition::from_sizes(&[1, 2]).unwrap()).unwrap();
        let two = Matrix::identity(2, 2) * 2.0;
        assert!(max_abs(&(d.gram(1) - &two)) < 1e-15);
        let root = d.gram_sqrt(1);
        assert!(max_abs(&(root - Matrix::identity(2, 2) * 2f64.sqrt())) < 1e-14);
        assert!(max_abs(&(root * root - &two)) < 1e-10);
    }

    #[test]
    fn orthonormal_block_has_identity_root() {
        // columns (1,1,-1,-1) and (1,-1,1,-1): X'X/n = I
        let x = Matrix::from_row_slice(4, 3, &[1.0, 1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
        let d = GroupedDesign::new(x, GroupPartition::from_sizes(&[1, 2]).unwrap()).unwrap();
        assert!(max_abs(&(d.gram_sqrt(1) - Matrix::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn sqrt_psd_examples() {
        let i3 = Matrix::identity(3, 3);
        let r = sqrt_psd(&i3).unwrap();
        assert!(max_abs(&(r.sqrt - &i3)) < 1e-14);
        assert!(max_abs(&(r.pinv_sqrt - &i3)) < 1e-14);
        assert_eq!(r.rank, 3);

        let r = sqrt_psd(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(r.rank, 0);
        assert_eq!(max_abs(&r.sqrt), 0.0);
        assert_eq!(max_abs(&r.pinv_sqrt), 0.0);

        let a = Matrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0]);
        let r = sqrt_psd(&a).unwrap();
        assert_eq!(r.rank, 1);
        assert!(max_abs(&(r.sqrt - Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]))) < 1e-14);
        assert!(max_abs(&(r.pinv_sqrt - Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]))) < 1e-14);
    }

    #[test]
    fn sqrt_psd_errors() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(sqrt_psd(&a), Err(GqrError::Asymmetric(_))));
        let b = Matrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(matches!(sqrt_psd(&b), Err(GqrError::NonFinite(_))));
    }

    fn random_design(n: usize, sizes: &[usize], seed: u64) -> GroupedDesign {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p: usize = sizes.iter().sum();
        let x = Matrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random_range(-2.0..2.0) });
        GroupedDesign::new(x, GroupPartition::from_sizes(sizes).unwrap()).unwrap()
    }

    #[test]
    fn gram_invariants_hold_on_random_designs() {
        for seed in 0..5 {
            let d = random_design(12, &[1, 3, 2, 4], seed);
            let full = d.full_gram();
            for k in 0..d.num_groups() {
                let idx = d.partition().group(k);
                let sub = Matrix::from_fn(idx.len(), idx.len(), |a, b| full[(idx[a], idx[b])]);
                assert!(max_abs(&(&sub - d.gram(k))) < 1e-12);
                let s = d.gram_sqrt(k);
                assert!(max_abs(&(s * s - d.gram(k))) < 1e-10);
                // Σ^{-1/2} Σ Σ^{-1/2} is a projector; full rank here so identity
                let proj = d.gram_sqrt_pinv(k) * d.gram(k) * d.gram_sqrt_pinv(k);
                assert!(max_abs(&(&proj - Matrix::identity(idx.len(), idx.len()))) < 1e-8);
            }
        }
    }

    #[test]
    fn rank_deficient_block_gives_projector() {
        // group 2 holds a column and its double: rank 1
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Matrix::from_fn(10, 3, |_, j| if j == 0 { 1.0 } else { 0.0 });
        let mut x = x;
        for i in 0..10 {
            let v: f64 = rng.random_range(-1.0..1.0);
            x[(i, 1)] = v;
            x[(i, 2)] = 2.0 * v;
        }
        let d = GroupedDesign::new(x, GroupPartition::from_sizes(&[1, 2]).unwrap()).unwrap();
        assert_eq!(d.gram_rank(1), 1);
        let proj = d.gram_sqrt_pinv(1) * d.gram(1) * d.gram_sqrt_pinv(1);
        // projector onto span{(1,2)}
        let expect = Matrix::from_row_slice(2, 2, &[0.2, 0.4, 0.4, 0.8]);
        assert!(max_abs(&(proj - expect)) < 1e-8);
    }

    #[test]
    fn sqrt_idempotence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = Matrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let a = &b * b.transpose() + Matrix::identity(4, 4) * 0.1;
        let s = sqrt_psd(&a).unwrap().sqrt;
        let s2 = sqrt_psd(&(&s * &s)).unwrap().sqrt;
        assert!(max_abs(&(s2 - s)) < 1e-8);
    }

    #[test]
    fn rescale_identity_grams_is_noop() {
        let x = Matrix::from_row_slice(4, 3, &[1.0, 1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
        let d = GroupedDesign::new(x, GroupPartition::from_sizes(&[1, 2]).unwrap()).unwrap();
        let (r, rec) = rescale_to_identity(&d, None).unwrap();
        assert!(max_abs(&(r.x() - d.x())) < 1e-12);
        assert!(max_abs(&(rec.sqrt_block(1) - Matrix::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn rescale_scalar_case() {
        let d = random_design(8, &[1, 2], 5);
        let grams = vec![Matrix::identity(2, 2) * 4.0];
        let (r, rec) = rescale_to_identity(&d, Some(&grams)).unwrap();
        for i in 0..8 {
            assert!((r.x()[(i, 1)] - d.x()[(i, 1)] / 2.0).abs() < 1e-14);
        }
        let b = rec.to_rescaled_coefficients(&[1.0, 1.0, -3.0]);
        assert_eq!(b, vec![1.0, 2.0, -6.0]);
    }

    #[test]
    fn rescale_random_spd_round_trips() {
        let d = random_design(40, &[1, 3], 9);
        let (r, rec) = rescale_to_identity(&d, None).unwrap();
        assert!(max_abs(&(r.gram(1) - Matrix::identity(3, 3))) < 1e-8);
        let back = rec.restore_design(r.x());
        assert!(max_abs(&(back - d.x())) < 1e-10);
        let beta = vec![0.3, -1.0, 2.0, 0.5];
        let there = rec.to_rescaled_coefficients(&beta);
        let again = rec.to_original_coefficients(&there);
        for (a, b) in beta.iter().zip(&again) {
            assert!((a - b).abs() < 1e-10);
        }
        // fitted values unchanged: x_i'β = x_i⁰'β⁰
        let lhs = r.x() * crate::Vector::from_vec(there);
        let rhs = d.x() * crate::Vector::from_vec(beta);
        assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn rescale_rejects_singular() {
        let grams = vec![Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])];
        let d = random_design(8, &[1, 2], 1);
        assert!(matches!(
            rescale_to_identity(&d, Some(&grams)),
            Err(GqrError::SingularGram { group: 1, .. })
        ));
    }
}
