//! Labeled tensor-product systems, states, Kraus channels and entropy.
//!
//! Multi-indices are row-major over the subsystem order of a [`SystemSpec`]:
//! the first subsystem is the most significant digit, matching
//! `kron(a, b)` for a spec `[a, b]`.

use std::collections::HashSet;
use std::fmt;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, default_support_tol, ComplexMatrix, EigenSystem, C64};

/// Trace slack accepted by [`State::new`].
pub const TRACE_TOL: f64 = 1e-10;
/// Slack on `sum K* K = I` accepted by [`KrausChannel::new`].
pub const TP_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subsystem {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of labeled tensor factors.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SystemSpec {
    subsystems: Vec<Subsystem>,
}

impl SystemSpec {
    pub fn new(subsystems: Vec<Subsystem>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &subsystems {
            if s.dim == 0 {
                return Err(Error::InvalidArgument(format!(
                    "subsystem `{}` has dimension 0",
                    s.label
                )));
            }
            if !seen.insert(s.label.as_str()) {
                return Err(Error::DuplicateLabel(s.label.clone()));
            }
        }
        Ok(Self { subsystems })
    }

    /// Builds a spec from `(label, dim)` pairs.
    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(label, dim)| Subsystem {
                    label: label.into(),
                    dim,
                })
                .collect(),
        )
    }

    /// Spec with no factors (total dimension 1).
    pub fn trivial() -> Self {
        Self {
            subsystems: Vec::new(),
        }
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.subsystems.iter().map(|s| s.label.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subsystems.iter().map(|s| s.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.subsystems.iter().map(|s| s.dim).product()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.subsystems.iter().any(|s| s.label == label)
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.subsystems[self.index_of(label)?].dim)
    }

    /// Product of the dimensions of the given labels.
    pub fn dim_of_all<S: AsRef<str>>(&self, labels: &[S]) -> Result<usize> {
        labels
            .iter()
            .try_fold(1usize, |acc, l| Ok(acc * self.dim_of(l.as_ref())?))
    }

    /// Sub-spec of the given labels, kept in this spec's order.
    pub fn restrict<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let idx = self.sorted_indices(keep)?;
        Ok(Self {
            subsystems: idx.iter().map(|&i| self.subsystems[i].clone()).collect(),
        })
    }

    /// Labels of this spec that are not in `labels`, in this spec's order.
    pub fn complement<S: AsRef<str>>(&self, labels: &[S]) -> Vec<String> {
        let drop: HashSet<&str> = labels.iter().map(|l| l.as_ref()).collect();
        self.subsystems
            .iter()
            .filter(|s| !drop.contains(s.label.as_str()))
            .map(|s| s.label.clone())
            .collect()
    }

    /// Concatenation; fails on shared labels.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut subsystems = self.subsystems.clone();
        subsystems.extend(other.subsystems.iter().cloned());
        Self::new(subsystems)
    }

    /// Reorders the factors. `order` must be a permutation of the labels.
    pub fn reorder<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        let perm = self.permutation(order)?;
        Ok(Self {
            subsystems: perm.iter().map(|&i| self.subsystems[i].clone()).collect(),
        })
    }

    /// Positions (in this spec) of the labels in `order`, validated as a
    /// permutation.
    pub fn permutation<S: AsRef<str>>(&self, order: &[S]) -> Result<Vec<usize>> {
        if order.len() != self.len() {
            return Err(Error::InvalidPermutation(format!(
                "expected {} labels, got {}",
                self.len(),
                order.len()
            )));
        }
        let mut seen = vec![false; self.len()];
        let mut perm = Vec::with_capacity(order.len());
        for l in order {
            let i = self
                .index_of(l.as_ref())
                .map_err(|_| Error::InvalidPermutation(format!("unknown label `{}`", l.as_ref())))?;
            if seen[i] {
                return Err(Error::InvalidPermutation(format!(
                    "label `{}` repeated",
                    l.as_ref()
                )));
            }
            seen[i] = true;
            perm.push(i);
        }
        Ok(perm)
    }

    fn sorted_indices<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        let mut idx = Vec::with_capacity(labels.len());
        for l in labels {
            let i = self.index_of(l.as_ref())?;
            if idx.contains(&i) {
                return Err(Error::DuplicateLabel(l.as_ref().to_string()));
            }
            idx.push(i);
        }
        idx.sort_unstable();
        Ok(idx)
    }
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .subsystems
            .iter()
            .map(|s| format!("{}:{}", s.label, s.dim))
            .collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// For each output basis index, the input index under the leg permutation
/// `perm` (output leg `k` is input leg `perm[k]`).
pub(crate) fn permutation_index_map(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    let n = dims.len();
    let total: usize = dims.iter().product();
    let mut in_strides = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        in_strides[k] = in_strides[k + 1] * dims[k + 1];
    }
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let mut map = vec![0usize; total];
    let mut digits = vec![0usize; n];
    for (out_idx, slot) in map.iter_mut().enumerate() {
        let mut rem = out_idx;
        for k in (0..n).rev() {
            digits[k] = rem % out_dims[k];
            rem /= out_dims[k];
        }
        *slot = (0..n).map(|k| digits[k] * in_strides[perm[k]]).sum();
    }
    map
}

/// Reorders tensor legs of a square matrix: output leg `k` is input leg
/// `perm[k]`.
pub fn permute_matrix(m: &ComplexMatrix, dims: &[usize], perm: &[usize]) -> ComplexMatrix {
    if perm.iter().enumerate().all(|(k, &p)| k == p) {
        return m.clone();
    }
    let map = permutation_index_map(dims, perm);
    let d = map.len();
    ComplexMatrix::from_fn(d, d, |i, j| m[(map[i], map[j])])
}

/// Partial trace over every leg not listed in `keep` (positions, ascending).
pub fn partial_trace_matrix(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> ComplexMatrix {
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let mut perm = keep.to_vec();
    perm.extend(&traced);
    let pm = permute_matrix(m, dims, &perm);
    let dk: usize = keep.iter().map(|&i| dims[i]).product();
    let dt: usize = traced.iter().map(|&i| dims[i]).product();
    ComplexMatrix::from_fn(dk, dk, |i, j| {
        (0..dt).map(|t| pm[(i * dt + t, j * dt + t)]).sum()
    })
}

/// A matrix bound to a [`SystemSpec`], with no positivity requirements.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    spec: SystemSpec,
    matrix: ComplexMatrix,
}

impl Operator {
    pub fn new(spec: SystemSpec, matrix: ComplexMatrix) -> Result<Self> {
        let d = spec.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimMismatch(format!(
                "spec {} needs a {d}x{d} matrix, got {}x{}",
                spec,
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { spec, matrix })
    }

    pub fn identity(spec: &SystemSpec) -> Self {
        let d = spec.total_dim();
        Self {
            spec: spec.clone(),
            matrix: linalg::identity(d),
        }
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let keep_idx = self.spec.sorted_indices(keep)?;
        let spec = self.spec.restrict(keep)?;
        let matrix = partial_trace_matrix(&self.matrix, &self.spec.dims(), &keep_idx);
        Ok(Self { spec, matrix })
    }

    pub fn permute<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        let perm = self.spec.permutation(order)?;
        Ok(Self {
            spec: self.spec.reorder(order)?,
            matrix: permute_matrix(&self.matrix, &self.spec.dims(), &perm),
        })
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            spec: self.spec.concat(&other.spec)?,
            matrix: self.matrix.kronecker(&other.matrix),
        })
    }

    /// `self ⊗ I` on the remaining factors of `target`, reordered to
    /// `target`'s order.
    pub fn embed(&self, target: &SystemSpec) -> Result<Self> {
        for s in self.spec.subsystems() {
            if target.dim_of(&s.label)? != s.dim {
                return Err(Error::SpecMismatch(format!(
                    "subsystem `{}` has dimension {} but target has {}",
                    s.label,
                    s.dim,
                    target.dim_of(&s.label)?
                )));
            }
        }
        let rest = target.complement(&self.spec.labels());
        let rest_spec = target.restrict(&rest)?;
        let full = self.tensor(&Operator::identity(&rest_spec))?;
        full.permute(&target.labels())
    }

    /// Relabels the matrix with another spec of the same total dimension.
    pub fn with_spec(self, spec: SystemSpec) -> Result<Self> {
        Operator::new(spec, self.matrix)
    }
}

/// Density matrix bound to a [`SystemSpec`].
///
/// Construction checks Hermiticity (relative 1e-10), unit trace (1e-10) and
/// `lambda_min >= -max(64 dim eps lambda_max, 1e-12)`. The stored matrix is
/// the exact Hermitian part of the input.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    op: Operator,
}

impl State {
    pub fn new(spec: SystemSpec, matrix: ComplexMatrix) -> Result<Self> {
        let op = Operator::new(spec, matrix)?;
        let eig = linalg::eig_hermitian(op.matrix())?;
        let tr = linalg::trace(op.matrix());
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace is {:.12} + {:.3e}i, expected 1",
                tr.re, tr.im
            )));
        }
        let slack = (default_support_tol(op.dim()) * eig.lambda_max()).max(1e-12);
        if eig.lambda_min() < -slack {
            return Err(Error::NegativeEigenvalue {
                lambda_min: eig.lambda_min(),
            });
        }
        Ok(Self::from_operator_unchecked(op))
    }

    /// Wraps a matrix that is a state up to rounding (outputs of trace
    /// preserving maps on states). Only the Hermitian part is kept.
    pub(crate) fn from_operator_unchecked(op: Operator) -> Self {
        let matrix = linalg::hermitian_part(&op.matrix);
        Self {
            op: Operator {
                spec: op.spec,
                matrix,
            },
        }
    }

    pub(crate) fn from_parts_unchecked(spec: SystemSpec, matrix: ComplexMatrix) -> Self {
        Self::from_operator_unchecked(Operator { spec, matrix })
    }

    /// Normalizes a PSD matrix to unit trace and validates.
    pub fn from_unnormalized(spec: SystemSpec, matrix: ComplexMatrix) -> Result<Self> {
        let tr = linalg::trace(&matrix).re;
        if tr.is_nan() || tr <= 0.0 || !tr.is_finite() {
            return Err(Error::InvalidState(format!("trace {tr} is not positive")));
        }
        Self::new(spec, matrix / c(tr))
    }

    /// `I / d`.
    pub fn maximally_mixed(spec: &SystemSpec) -> Self {
        let d = spec.total_dim();
        Self::from_parts_unchecked(spec.clone(), linalg::identity(d) / c(d as f64))
    }

    /// `|psi><psi| / <psi|psi>`.
    pub fn pure(spec: &SystemSpec, psi: &[C64]) -> Result<Self> {
        let d = spec.total_dim();
        if psi.len() != d {
            return Err(Error::DimMismatch(format!(
                "vector of length {} for total dimension {d}",
                psi.len()
            )));
        }
        let v = nalgebra::DVector::from_column_slice(psi);
        let m = &v * v.adjoint();
        Self::from_unnormalized(spec.clone(), m)
    }

    /// Diagonal state with the given probabilities.
    pub fn diagonal(spec: &SystemSpec, probs: &[f64]) -> Result<Self> {
        if probs.len() != spec.total_dim() {
            return Err(Error::DimMismatch(format!(
                "{} probabilities for total dimension {}",
                probs.len(),
                spec.total_dim()
            )));
        }
        Self::new(spec.clone(), linalg::diag(probs))
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.op.spec
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.op.matrix
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn eig(&self) -> EigenSystem {
        linalg::eig_symmetrized(self.matrix())
    }

    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        Ok(Self::from_operator_unchecked(self.op.partial_trace(keep)?))
    }

    pub fn permute<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        Ok(Self {
            op: self.op.permute(order)?,
        })
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            op: self.op.tensor(&other.op)?,
        })
    }

    /// `(1 - w) self + w tau`.
    pub fn mix_with_maximally_mixed(&self, w: f64) -> Self {
        let d = self.dim();
        let m = self.matrix() * c(1.0 - w) + linalg::identity(d) * c(w / d as f64);
        Self::from_parts_unchecked(self.spec().clone(), m)
    }

    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        ensure_same_spec(self.spec(), other.spec())?;
        Ok(0.5 * linalg::trace_norm(&(self.matrix() - other.matrix())))
    }
}

pub(crate) fn ensure_same_spec(a: &SystemSpec, b: &SystemSpec) -> Result<()> {
    if a != b {
        return Err(Error::SpecMismatch(format!("{a} vs {b}")));
    }
    Ok(())
}

/// Partial trace keeping `keep` in the original order.
pub fn partial_trace<S: AsRef<str>>(s: &State, keep: &[S]) -> Result<State> {
    s.partial_trace(keep)
}

pub fn tensor(a: &State, b: &State) -> Result<State> {
    a.tensor(b)
}

pub fn permute_systems<S: AsRef<str>>(s: &State, order: &[S]) -> Result<State> {
    s.permute(order)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ensemble {
    HilbertSchmidt,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            m[(i, j)] = C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
        }
    }
    m
}

/// Random complex Gaussian matrix, deterministic in `seed`.
pub fn random_gaussian(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gaussian_matrix(&mut rng, rows, cols)
}

/// Haar-ish random unitary from the QR factor of a Gaussian matrix.
pub fn random_unitary(dim: usize, seed: u64) -> ComplexMatrix {
    random_isometry(dim, dim, seed)
}

/// Random isometry `rows x cols` (`rows >= cols`) with orthonormal columns.
pub fn random_isometry(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = random_gaussian(rows, cols, seed);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // fix column phases so the distribution does not depend on the QR sign convention
    let mut out = q.columns(0, cols).into_owned();
    for j in 0..cols {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..rows {
                out[(i, j)] *= phase;
            }
        }
    }
    out
}

/// Random positive definite matrix `G G* + floor I`, unnormalized.
pub fn random_psd(dim: usize, floor: f64, seed: u64) -> ComplexMatrix {
    let g = random_gaussian(dim, dim, seed);
    &g * g.adjoint() + linalg::identity(dim) * c(floor)
}

/// Random Hermitian matrix with i.i.d. Gaussian entries.
pub fn random_hermitian(dim: usize, seed: u64) -> ComplexMatrix {
    linalg::hermitian_part(&random_gaussian(dim, dim, seed))
}

/// `(1 - floor) G G*/tr(G G*) + floor tau`, with `G` complex Gaussian.
pub fn random_state(spec: &SystemSpec, ensemble: Ensemble, floor: f64, seed: u64) -> State {
    let Ensemble::HilbertSchmidt = ensemble;
    let d = spec.total_dim();
    let g = random_gaussian(d, d, seed);
    let w = &g * g.adjoint();
    let tr = linalg::trace(&w).re;
    let rho = w / c(tr);
    State::from_parts_unchecked(spec.clone(), rho).mix_with_maximally_mixed(floor)
}

/// Completely positive map `X -> sum K X K*` between raw dimensions, used for
/// adjoints of channels and Petz-type maps.
#[derive(Clone, Debug)]
pub struct CpMap {
    pub in_dim: usize,
    pub out_dim: usize,
    pub kraus: Vec<ComplexMatrix>,
}

impl CpMap {
    pub fn new(in_dim: usize, out_dim: usize, kraus: Vec<ComplexMatrix>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidChannel("empty Kraus family".into()));
        }
        for k in &kraus {
            if k.nrows() != out_dim || k.ncols() != in_dim {
                return Err(Error::DimMismatch(format!(
                    "Kraus operator is {}x{}, expected {out_dim}x{in_dim}",
                    k.nrows(),
                    k.ncols()
                )));
            }
        }
        Ok(Self {
            in_dim,
            out_dim,
            kraus,
        })
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.out_dim, self.out_dim);
        for k in &self.kraus {
            out += k * x * k.adjoint();
        }
        out
    }

    /// `||N(I) - I||_F`.
    pub fn unital_defect(&self) -> f64 {
        (self.apply(&linalg::identity(self.in_dim)) - linalg::identity(self.out_dim)).norm()
    }

    /// `||sum K* K - I||_F`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let mut s = ComplexMatrix::zeros(self.in_dim, self.in_dim);
        for k in &self.kraus {
            s += k.adjoint() * k;
        }
        (s - linalg::identity(self.in_dim)).norm()
    }

    /// Hilbert-Schmidt adjoint `X -> sum K* X K`.
    pub fn adjoint(&self) -> CpMap {
        CpMap {
            in_dim: self.out_dim,
            out_dim: self.in_dim,
            kraus: self.kraus.iter().map(|k| k.adjoint()).collect(),
        }
    }

    /// Canonical Stinespring operator `V = sum_i K_i ⊗ |i>`, shape
    /// `(out_dim * n) x in_dim` with row index `o * n + i`.
    pub fn stinespring(&self) -> ComplexMatrix {
        let n = self.kraus.len();
        let mut v = ComplexMatrix::zeros(self.out_dim * n, self.in_dim);
        for (i, k) in self.kraus.iter().enumerate() {
            for o in 0..self.out_dim {
                for j in 0..self.in_dim {
                    v[(o * n + i, j)] = k[(o, j)];
                }
            }
        }
        v
    }
}

/// Completely positive trace-preserving map given by Kraus operators.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    in_spec: SystemSpec,
    out_spec: SystemSpec,
    kraus: Vec<ComplexMatrix>,
}

impl KrausChannel {
    pub fn new(in_spec: SystemSpec, out_spec: SystemSpec, kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let map = CpMap::new(in_spec.total_dim(), out_spec.total_dim(), kraus)?;
        if map.kraus.iter().any(|k| !linalg::is_finite(k)) {
            return Err(Error::NonFinite);
        }
        let defect = map.trace_preservation_defect();
        if defect > TP_TOL {
            return Err(Error::InvalidChannel(format!(
                "not trace preserving (defect {defect:.3e})"
            )));
        }
        Ok(Self {
            in_spec,
            out_spec,
            kraus: map.kraus,
        })
    }

    pub fn identity(spec: &SystemSpec) -> Self {
        Self {
            in_spec: spec.clone(),
            out_spec: spec.clone(),
            kraus: vec![linalg::identity(spec.total_dim())],
        }
    }

    /// `tr_Y` as the Kraus family `{<t|_Y ⊗ I}` over basis tuples `t` of the
    /// traced factors.
    pub fn partial_trace<S: AsRef<str>>(spec: &SystemSpec, traced: &[S]) -> Result<Self> {
        let traced_idx = spec.sorted_indices(traced)?;
        let dims = spec.dims();
        let keep_idx: Vec<usize> = (0..dims.len()).filter(|i| !traced_idx.contains(i)).collect();
        let keep_labels: Vec<String> = keep_idx
            .iter()
            .map(|&i| spec.subsystems()[i].label.clone())
            .collect();
        let out_spec = spec.restrict(&keep_labels)?;
        let d = spec.total_dim();
        let dk = out_spec.total_dim();
        let dt = d / dk;
        let mut kraus = vec![ComplexMatrix::zeros(dk, d); dt];
        let mut digits = vec![0usize; dims.len()];
        for full in 0..d {
            let mut rem = full;
            for k in (0..dims.len()).rev() {
                digits[k] = rem % dims[k];
                rem /= dims[k];
            }
            let ki = keep_idx.iter().fold(0, |acc, &k| acc * dims[k] + digits[k]);
            let ti = traced_idx.iter().fold(0, |acc, &k| acc * dims[k] + digits[k]);
            kraus[ti][(ki, full)] = c(1.0);
        }
        Ok(Self {
            in_spec: spec.clone(),
            out_spec,
            kraus,
        })
    }

    /// `X -> tau_L ⊗ tr_L X` on the factor `label`, reordered to `spec`.
    /// A conditional expectation onto `I_L ⊗ B(rest)`.
    pub fn trace_and_replace(spec: &SystemSpec, label: &str) -> Result<Self> {
        let d_l = spec.dim_of(label)?;
        let local = SystemSpec::from_pairs([(label, d_l)])?;
        let scale = c(1.0 / (d_l as f64).sqrt());
        let mut kraus = Vec::with_capacity(d_l * d_l);
        for a in 0..d_l {
            for b in 0..d_l {
                let mut e = ComplexMatrix::zeros(d_l, d_l);
                e[(a, b)] = scale;
                kraus.push(Operator::new(local.clone(), e)?.embed(spec)?.into_matrix());
            }
        }
        Ok(Self {
            in_spec: spec.clone(),
            out_spec: spec.clone(),
            kraus,
        })
    }

    /// Kraus operators `(I ⊗ <i|_E) V` of an isometry `V: in -> out ⊗ E`
    /// whose rows are indexed `o * env_dim + i`.
    pub fn from_isometry(
        in_spec: SystemSpec,
        out_spec: SystemSpec,
        env_dim: usize,
        v: &ComplexMatrix,
    ) -> Result<Self> {
        let d_in = in_spec.total_dim();
        let d_out = out_spec.total_dim();
        if v.nrows() != d_out * env_dim || v.ncols() != d_in {
            return Err(Error::DimMismatch(format!(
                "isometry is {}x{}, expected {}x{}",
                v.nrows(),
                v.ncols(),
                d_out * env_dim,
                d_in
            )));
        }
        let kraus = (0..env_dim)
            .map(|i| ComplexMatrix::from_fn(d_out, d_in, |o, j| v[(o * env_dim + i, j)]))
            .collect();
        Self::new(in_spec, out_spec, kraus)
    }

    /// Random channel from a random isometry with `n_kraus` environment
    /// dimensions.
    pub fn random(in_spec: &SystemSpec, out_spec: &SystemSpec, n_kraus: usize, seed: u64) -> Result<Self> {
        let v = random_isometry(out_spec.total_dim() * n_kraus, in_spec.total_dim(), seed);
        Self::from_isometry(in_spec.clone(), out_spec.clone(), n_kraus, &v)
    }

    pub fn in_spec(&self) -> &SystemSpec {
        &self.in_spec
    }

    pub fn out_spec(&self) -> &SystemSpec {
        &self.out_spec
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn as_cp_map(&self) -> CpMap {
        CpMap {
            in_dim: self.in_spec.total_dim(),
            out_dim: self.out_spec.total_dim(),
            kraus: self.kraus.clone(),
        }
    }

    /// The unital adjoint `T*` as a CP map on the output space.
    pub fn adjoint_map(&self) -> CpMap {
        self.as_cp_map().adjoint()
    }

    pub fn apply(&self, s: &State) -> Result<State> {
        ensure_same_spec(&self.in_spec, s.spec())?;
        Ok(State::from_parts_unchecked(
            self.out_spec.clone(),
            self.apply_matrix(s.matrix())?,
        ))
    }

    pub fn apply_matrix(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.in_spec.total_dim();
        if x.nrows() != d || x.ncols() != d {
            return Err(Error::SpecMismatch(format!(
                "channel input dimension {d}, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        let mut out = ComplexMatrix::zeros(self.out_spec.total_dim(), self.out_spec.total_dim());
        for k in &self.kraus {
            out += k * x * k.adjoint();
        }
        Ok(out)
    }

    /// `T*(X) = sum K* X K`.
    pub fn apply_adjoint(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.out_spec.total_dim();
        if x.nrows() != d || x.ncols() != d {
            return Err(Error::SpecMismatch(format!(
                "channel output dimension {d}, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        let mut out = ComplexMatrix::zeros(self.in_spec.total_dim(), self.in_spec.total_dim());
        for k in &self.kraus {
            out += k.adjoint() * x * k;
        }
        Ok(out)
    }
}

pub fn apply_channel(ch: &KrausChannel, s: &State) -> Result<State> {
    ch.apply(s)
}

pub fn apply_adjoint(ch: &KrausChannel, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    ch.apply_adjoint(x)
}

/// `-sum lambda ln lambda` over the support, in nats.
pub fn von_neumann_entropy(s: &State) -> f64 {
    entropy_of_matrix(s.matrix())
}

pub(crate) fn entropy_of_matrix(m: &ComplexMatrix) -> f64 {
    let eig = linalg::eig_symmetrized(m);
    let cut = eig.cutoff(default_support_tol(eig.dim()));
    let s: f64 = eig
        .values
        .iter()
        .filter(|&&l| l > cut && l > 0.0)
        .map(|&l| -l * l.ln())
        .sum();
    s.clamp(0.0, (eig.dim().max(1) as f64).ln())
}

/// Converts a dense complex matrix into a row-major pair of real/imag tables.
pub fn to_re_im(m: &ComplexMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let re = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect())
        .collect();
    let im = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect())
        .collect();
    (re, im)
}

pub fn from_re_im(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<ComplexMatrix> {
    let n = re.len();
    let m = re.first().map_or(0, |r| r.len());
    if im.len() != n || re.iter().chain(im.iter()).any(|r| r.len() != m) {
        return Err(Error::DimMismatch(
            "real and imaginary parts must be rectangular and of equal shape".into(),
        ));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| C64::new(re[i][j], im[i][j])))
}
