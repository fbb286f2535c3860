//! Block decomposition `rho = rho_B^{1/2} U_B* (⊕ d_B p_n eta_L ⊗ eta_R) U_B rho_B^{1/2}`
//! of a BS-QMC.
//!
//! The blocks come from the *-algebra on `H_B` generated by the A-slices
//! `<i|eta_AB|j>` of `eta_AB`: minimal central projections give the blocks,
//! eigenspaces of a generic element give the left factor, and partial
//! isometries inside the algebra align the right factors.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{certify, eta_tri, b_matrix};
use crate::divergences::{Tripartite, Tripartition};
use crate::error::{Error, Result};
use crate::io::StateFile;
use crate::linalg::{self, c, default_support_tol, psd, ComplexMatrix, C64};
use crate::quantum::{from_re_im, partial_trace_matrix, to_re_im, State, Subsystem, SystemSpec};

pub const DEFAULT_DECOMPOSE_SEED: u64 = 0x5eed_b10c;
/// Trace distance up to which a reconstruction counts as exact.
pub const RECONSTRUCTION_TOL: f64 = 1e-7;
/// Span, commutant and eigenvalue-clustering tolerance.
const ALG_TOL: f64 = 1e-7;
/// Decompositions of certified states whose reconstruction is worse than
/// this are reported as failures.
const FAILURE_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct Block {
    pub d_l: usize,
    pub d_r: usize,
    pub p: f64,
    /// State on `A ⊗ B^L` (labels `A`, `BL`).
    pub eta_l: State,
    /// State on `B^R ⊗ C` (labels `BR`, `C`).
    pub eta_r: State,
}

#[derive(Clone, Debug)]
pub struct DecompositionB {
    pub spec: SystemSpec,
    pub partition: Tripartition,
    pub dims: [usize; 3],
    /// Rows `off_n .. off_n + d_l d_r` map `H_B` onto block `n`, with the
    /// block index `l * d_r + r`.
    pub u_b: ComplexMatrix,
    pub blocks: Vec<Block>,
    /// Trace distance between the reconstruction and the input.
    pub residual: f64,
}

/// Indices in `A ⊗ B ⊗ C` of the sub-block `A ⊗ B[off..off+len] ⊗ C`.
fn block_indices(dims: [usize; 3], off: usize, len: usize) -> Vec<usize> {
    let [da, db, dc] = dims;
    let mut idx = Vec::with_capacity(da * len * dc);
    for a in 0..da {
        for b in off..off + len {
            for k in 0..dc {
                idx.push((a * db + b) * dc + k);
            }
        }
    }
    idx
}

pub(crate) fn place_block(big: &mut ComplexMatrix, blk: &ComplexMatrix, dims: [usize; 3], off: usize, len: usize) {
    let idx = block_indices(dims, off, len);
    for (i, &gi) in idx.iter().enumerate() {
        for (j, &gj) in idx.iter().enumerate() {
            big[(gi, gj)] = blk[(i, j)];
        }
    }
}

/// Orthonormal (Hilbert-Schmidt) family of matrices.
#[derive(Default)]
struct Span {
    basis: Vec<ComplexMatrix>,
}

impl Span {
    /// Adds the normalized component of `m` outside the span, if its norm
    /// exceeds `tol` relative to `m`.
    fn add(&mut self, m: &ComplexMatrix) -> Option<ComplexMatrix> {
        let n0 = m.norm();
        if n0 == 0.0 {
            return None;
        }
        let mut v = m / c(n0);
        for _ in 0..2 {
            for b in &self.basis {
                let k = b.dotc(&v);
                v -= b * k;
            }
        }
        let n = v.norm();
        if n <= ALG_TOL {
            return None;
        }
        v /= c(n);
        self.basis.push(v.clone());
        Some(v)
    }

    fn len(&self) -> usize {
        self.basis.len()
    }
}

/// Orthonormal basis of the unital algebra generated by `gens` (a set
/// closed under adjoints), and an orthonormal basis of the generators' span.
fn generate_algebra(gens: &[ComplexMatrix], d: usize) -> (Vec<ComplexMatrix>, Vec<ComplexMatrix>) {
    let scale = gens.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let mut gspan = Span::default();
    for g in gens {
        if g.norm() > 1e-12 * scale {
            gspan.add(g);
        }
    }
    let gens = gspan.basis;
    let mut span = Span::default();
    let mut queue = VecDeque::new();
    if let Some(v) = span.add(&linalg::identity(d)) {
        queue.push_back(v);
    }
    for g in &gens {
        if let Some(v) = span.add(g) {
            queue.push_back(v);
        }
    }
    while let Some(x) = queue.pop_front() {
        if span.len() == d * d {
            break;
        }
        for g in &gens {
            let p = g * &x;
            if p.norm() < 1e-9 {
                continue;
            }
            if let Some(v) = span.add(&p) {
                queue.push_back(v);
            }
        }
    }
    (span.basis, gens)
}

/// Basis of the center: elements of the algebra commuting with every
/// generator.
fn center(basis: &[ComplexMatrix], gens: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
    let m = basis.len();
    let comms: Vec<Vec<ComplexMatrix>> = basis
        .iter()
        .map(|a| gens.iter().map(|g| linalg::commutator(a, g)).collect())
        .collect();
    let gram = ComplexMatrix::from_fn(m, m, |i, j| {
        comms[i].iter().zip(&comms[j]).map(|(x, y)| x.dotc(y)).sum::<C64>()
    });
    let e = linalg::eig_symmetrized(&gram);
    (0..m)
        .filter(|&k| e.values[k].max(0.0).sqrt() <= 10.0 * ALG_TOL)
        .map(|k| {
            basis
                .iter()
                .enumerate()
                .fold(ComplexMatrix::zeros(basis[0].nrows(), basis[0].ncols()), |acc, (i, a)| {
                    acc + a * e.vectors[(i, k)]
                })
        })
        .collect()
}

fn random_combination(basis: &[ComplexMatrix], rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(basis[0].nrows(), basis[0].ncols());
    for b in basis {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        out += b * C64::new(re, im);
    }
    out
}

/// Groups descending eigenvalues separated by more than `ALG_TOL`.
fn cluster(values: &[f64]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k - 1] - values[k] > ALG_TOL {
            out.push(start..k);
            start = k;
        }
    }
    out
}

/// `(d_l, d_r, W)` for each block; `W` is `d_B x d_l d_r` with orthonormal
/// columns ordered `l * d_r + r`.
fn algebra_blocks(eta: &ComplexMatrix, dims: [usize; 3], rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize, ComplexMatrix)>> {
    let [da, db, _] = dims;
    let eta_ab = partial_trace_matrix(eta, &dims, &[0, 1]);
    let mut gens = Vec::with_capacity(da * da);
    for i in 0..da {
        for j in 0..da {
            gens.push(eta_ab.view((i * db, j * db), (db, db)).into_owned());
        }
    }
    let (basis, gens) = generate_algebra(&gens, db);
    let z_basis = center(&basis, &gens);
    if z_basis.is_empty() {
        return Err(Error::DecompositionFailed("empty center".into()));
    }
    let z = linalg::hermitian_part(&random_combination(&z_basis, rng));
    let z = &z / c(z.norm());
    let ez = linalg::eig_symmetrized(&z);

    let mut out = Vec::new();
    for range in cluster(&ez.values) {
        let v = ez.vectors.columns(range.start, range.len()).into_owned();
        let dn = v.ncols();
        let a = linalg::hermitian_part(&random_combination(&basis, rng));
        let an = v.adjoint() * a * &v;
        let an = &an / c(an.norm().max(f64::MIN_POSITIVE));
        let ea = linalg::eig_symmetrized(&an);
        let parts = cluster(&ea.values);
        let dl = parts.len();
        let dr = dn / dl;
        if parts.iter().any(|p| p.len() != dr) {
            return Err(Error::DecompositionFailed(format!(
                "eigenspace multiplicities {:?} are not uniform",
                parts.iter().map(|p| p.len()).collect::<Vec<_>>()
            )));
        }
        let frames: Vec<ComplexMatrix> = parts
            .iter()
            .map(|p| &v * ea.vectors.columns(p.start, p.len()))
            .collect();
        let mut aligned = None;
        for _ in 0..16 {
            let s = random_combination(&basis, rng);
            let s = &s / c(s.norm());
            let mut cols = vec![frames[0].clone()];
            let mut ok = true;
            for f in &frames[1..] {
                let cm = f.adjoint() * &s * &frames[0];
                if linalg::min_singular_value(&cm) < 1e-6 {
                    ok = false;
                    break;
                }
                cols.push(f * &cm * psd::inv_sqrt(&(cm.adjoint() * &cm)));
            }
            if ok {
                aligned = Some(cols);
                break;
            }
        }
        let cols = aligned.ok_or_else(|| {
            Error::DecompositionFailed("could not align the right factors".into())
        })?;
        let mut w = ComplexMatrix::zeros(db, dn);
        for (l, g) in cols.iter().enumerate() {
            w.columns_mut(l * dr, dr).copy_from(g);
        }
        out.push((dl, dr, w));
    }
    Ok(out)
}

fn factor_state(labels: [(&str, usize); 2], m: ComplexMatrix, p: f64) -> Result<State> {
    let spec = SystemSpec::from_pairs(labels)?;
    if p <= 1e-14 {
        return Ok(State::maximally_mixed(&spec));
    }
    State::from_unnormalized(spec, linalg::hermitian_part(&m))
}

/// Runs the decomposition without first certifying the state; the residual
/// tells whether it succeeded.
pub fn decompose_unchecked(rho: &State, part: &Tripartition, seed: u64) -> Result<DecompositionB> {
    let t = Tripartite::new(rho, part)?;
    let [da, db, dc] = t.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rb = t.rho_b();
    let eb = linalg::eig_symmetrized(&rb);
    let tol = default_support_tol(db);
    let r = eb.rank(tol);
    if r == 0 {
        return Err(Error::DecompositionFailed("rho_B vanishes".into()));
    }
    let support = if r < db { eb.support_basis(tol) } else { linalg::identity(db) };
    let restricted = if r < db {
        let v = linalg::identity(da).kronecker(&support).kronecker(&linalg::identity(dc));
        v.adjoint() * &t.rho * v
    } else {
        t.rho.clone()
    };
    let rdims = [da, r, dc];
    let tr = Tripartite::from_matrix(restricted, rdims);
    let eta = eta_tri(&tr).eta;

    let mut raw = Vec::new();
    for (dl, dr, w) in algebra_blocks(&eta, rdims, &mut rng)? {
        let u = linalg::identity(da).kronecker(&w.adjoint()).kronecker(&linalg::identity(dc));
        let blk = &u * &eta * u.adjoint();
        let p = linalg::trace(&blk).re;
        let bdims = [da, dl, dr, dc];
        let eta_l = factor_state([("A", da), ("BL", dl)], partial_trace_matrix(&blk, &bdims, &[0, 1]), p)?;
        let eta_r = factor_state([("BR", dr), ("C", dc)], partial_trace_matrix(&blk, &bdims, &[2, 3]), p)?;
        raw.push((
            Block {
                d_l: dl,
                d_r: dr,
                p: p.max(0.0),
                eta_l,
                eta_r,
            },
            &support * w,
        ));
    }
    if r < db {
        let k = eb.kernel_basis(tol);
        let dk = k.ncols();
        raw.push((
            Block {
                d_l: 1,
                d_r: dk,
                p: 0.0,
                eta_l: State::maximally_mixed(&SystemSpec::from_pairs([("A", da), ("BL", 1)])?),
                eta_r: State::maximally_mixed(&SystemSpec::from_pairs([("BR", dk), ("C", dc)])?),
            },
            k,
        ));
    }
    let total: f64 = raw.iter().map(|(b, _)| b.p).sum();
    for (b, _) in raw.iter_mut() {
        b.p /= total;
    }
    raw.sort_by(|(x, _), (y, _)| {
        (y.d_l * y.d_r)
            .cmp(&(x.d_l * x.d_r))
            .then(y.p.partial_cmp(&x.p).unwrap_or(std::cmp::Ordering::Equal))
    });
    let mut u_b = ComplexMatrix::zeros(db, db);
    let mut off = 0;
    for (b, w) in &raw {
        let n = b.d_l * b.d_r;
        u_b.rows_mut(off, n).copy_from(&w.adjoint());
        off += n;
    }
    let mut d = DecompositionB {
        spec: rho.spec().clone(),
        partition: part.clone(),
        dims: t.dims,
        u_b,
        blocks: raw.into_iter().map(|(b, _)| b).collect(),
        residual: f64::INFINITY,
    };
    let rb_state = State::from_parts_unchecked(t.abc_spec.restrict(&part.b)?, rb);
    let rec = reconstruct(&d, &rb_state)?;
    d.residual = rec.trace_distance(rho)?;
    Ok(d)
}

/// Decomposes a certified BS-QMC with the default seed.
pub fn structure_decompose(rho: &State, part: &Tripartition) -> Result<DecompositionB> {
    structure_decompose_seeded(rho, part, DEFAULT_DECOMPOSE_SEED)
}

pub fn structure_decompose_seeded(rho: &State, part: &Tripartition, seed: u64) -> Result<DecompositionB> {
    let cert = certify(rho, part)?;
    if !cert.verdict_bsqmc {
        return Err(Error::NotBSQMC(format!("BS residual {:.3e}", cert.res_b)));
    }
    let d = decompose_unchecked(rho, part, seed)?;
    if d.residual > FAILURE_TOL {
        return Err(Error::DecompositionFailed(format!(
            "reconstruction is off by {:.3e} in trace distance",
            d.residual
        )));
    }
    Ok(d)
}

/// `rho_B^{1/2} U_B* (⊕ p_n eta_L ⊗ eta_R) U_B rho_B^{1/2}`, normalized.
pub fn reconstruct(d: &DecompositionB, rho_b: &State) -> Result<State> {
    let [da, db, dc] = d.dims;
    let x = b_matrix(&d.partition, rho_b, db)?;
    let mut big = ComplexMatrix::zeros(da * db * dc, da * db * dc);
    let mut off = 0;
    for b in &d.blocks {
        let n = b.d_l * b.d_r;
        if b.eta_l.dim() != da * b.d_l || b.eta_r.dim() != b.d_r * dc || off + n > db {
            return Err(Error::DimMismatch("block factors do not fit the system".into()));
        }
        let blk = b.eta_l.matrix().kronecker(b.eta_r.matrix()) * c(b.p);
        place_block(&mut big, &blk, d.dims, off, n);
        off += n;
    }
    if off != db {
        return Err(Error::DimMismatch(format!("blocks cover {off} of {db} dimensions")));
    }
    let u = linalg::identity(da).kronecker(&d.u_b).kronecker(&linalg::identity(dc));
    let s = linalg::identity(da).kronecker(&psd::sqrt(&x)).kronecker(&linalg::identity(dc));
    let m = &s * u.adjoint() * big * u * &s;
    let abc_spec = d.spec.reorder(&d.partition.abc_order())?;
    State::from_unnormalized(abc_spec, m)?.permute(&d.spec.labels())
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct BlockJson {
    d_l: usize,
    d_r: usize,
    p: f64,
    eta_l: StateFile,
    eta_r: StateFile,
}

#[derive(Serialize, Deserialize)]
struct DecompositionJson {
    subsystems: Vec<Subsystem>,
    partition: String,
    u_b: MatrixJson,
    residual: f64,
    blocks: Vec<BlockJson>,
}

impl DecompositionB {
    pub fn to_json(&self) -> String {
        let (re, im) = to_re_im(&self.u_b);
        let j = DecompositionJson {
            subsystems: self.spec.subsystems().to_vec(),
            partition: self.partition.to_string(),
            u_b: MatrixJson { re, im },
            residual: self.residual,
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockJson {
                    d_l: b.d_l,
                    d_r: b.d_r,
                    p: b.p,
                    eta_l: StateFile::from_state(&b.eta_l),
                    eta_r: StateFile::from_state(&b.eta_r),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&j).expect("decomposition serializes")
    }

    /// Parses and validates a serialized decomposition.
    pub fn from_json(text: &str) -> Result<Self> {
        let j: DecompositionJson = serde_json::from_str(text)?;
        let spec = SystemSpec::new(j.subsystems)?;
        let partition: Tripartition = j.partition.parse()?;
        partition.validate(&spec)?;
        let dims = [
            spec.dim_of_all(&partition.a)?,
            spec.dim_of_all(&partition.b)?,
            spec.dim_of_all(&partition.c)?,
        ];
        let u_b = from_re_im(&j.u_b.re, &j.u_b.im)?;
        let db = dims[1];
        if u_b.nrows() != db || u_b.ncols() != db {
            return Err(Error::DimMismatch(format!("U_B must be {db}x{db}")));
        }
        let defect = (&u_b * u_b.adjoint() - linalg::identity(db)).norm();
        if defect > 1e-8 {
            return Err(Error::InvalidArgument(format!("U_B is not unitary (defect {defect:.3e})")));
        }
        let mut blocks = Vec::with_capacity(j.blocks.len());
        for b in j.blocks {
            blocks.push(Block {
                d_l: b.d_l,
                d_r: b.d_r,
                p: b.p,
                eta_l: b.eta_l.into_state()?,
                eta_r: b.eta_r.into_state()?,
            });
        }
        let cover: usize = blocks.iter().map(|b| b.d_l * b.d_r).sum();
        if cover != db {
            return Err(Error::DimMismatch(format!("blocks cover {cover} of {db} dimensions")));
        }
        let total: f64 = blocks.iter().map(|b| b.p).sum();
        if (total - 1.0).abs() > 1e-10 || blocks.iter().any(|b| b.p < 0.0) {
            return Err(Error::InvalidArgument(format!("block weights sum to {total}")));
        }
        Ok(Self {
            spec,
            partition,
            dims,
            u_b,
            blocks,
            residual: j.residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{paper_example, planted_bs_qmc};
    use crate::quantum::{random_state, Ensemble};

    fn dims_multiset(d: &DecompositionB) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = d.blocks.iter().map(|b| (b.d_l, b.d_r)).collect();
        v.sort();
        v
    }

    #[test]
    fn product_state_is_one_block() {
        let part = Tripartition::abc();
        let one = |l: &str, d: usize, s: u64| {
            random_state(&SystemSpec::from_pairs([(l, d)]).unwrap(), Ensemble::HilbertSchmidt, 0.1, s)
        };
        let (ra, rc) = (one("A", 2, 1), one("C", 3, 3));
        let rho = ra.tensor(&one("B", 2, 2)).unwrap().tensor(&rc).unwrap();
        let d = structure_decompose(&rho, &part).unwrap();
        assert_eq!(d.blocks.len(), 1);
        let b = &d.blocks[0];
        assert!(b.d_l == 1 || b.d_r == 1);
        assert!(d.residual < 1e-10);
        let a = partial_trace_matrix(b.eta_l.matrix(), &[2, b.d_l], &[0]);
        let cc = partial_trace_matrix(b.eta_r.matrix(), &[b.d_r, 3], &[1]);
        assert!((a - ra.matrix()).norm() < 1e-10);
        assert!((cc - rc.matrix()).norm() < 1e-10);
    }

    #[test]
    fn example_and_planted() {
        let part = Tripartition::abc();
        let d = structure_decompose(&paper_example(), &part).unwrap();
        assert!(!d.blocks.is_empty() && d.residual < 1e-7);

        let rho = planted_bs_qmc(&[(1, 2), (2, 1)], 2, 2, 7).unwrap();
        let d = structure_decompose(&rho, &part).unwrap();
        assert_eq!(dims_multiset(&d), vec![(1, 2), (2, 1)]);
        assert!(d.residual < 1e-7);
        let u = &d.u_b;
        assert!((u * u.adjoint() - linalg::identity(4)).norm() < 1e-10);
    }

    #[test]
    fn tau_reconstructs_tau() {
        let spec = SystemSpec::from_pairs([("A", 2), ("B", 3), ("C", 2)]).unwrap();
        let d = DecompositionB {
            spec: spec.clone(),
            partition: Tripartition::abc(),
            dims: [2, 3, 2],
            u_b: linalg::identity(3),
            blocks: vec![Block {
                d_l: 3,
                d_r: 1,
                p: 1.0,
                eta_l: State::maximally_mixed(&SystemSpec::from_pairs([("A", 2), ("BL", 3)]).unwrap()),
                eta_r: State::maximally_mixed(&SystemSpec::from_pairs([("BR", 1), ("C", 2)]).unwrap()),
            }],
            residual: 0.0,
        };
        let tau_b = State::maximally_mixed(&SystemSpec::from_pairs([("B", 3)]).unwrap());
        let out = reconstruct(&d, &tau_b).unwrap();
        assert!((out.matrix() - State::maximally_mixed(&spec).matrix()).norm() < 1e-14);
        let bad = State::maximally_mixed(&SystemSpec::from_pairs([("B", 2)]).unwrap());
        assert!(matches!(reconstruct(&d, &bad), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn singular_marginal_gets_kernel_block() {
        let part = Tripartition::abc();
        let rho = planted_bs_qmc(&[(1, 1), (1, 2)], 2, 2, 3).unwrap();
        // embed B = C^3 into C^4 with an unused direction
        let v = ComplexMatrix::from_fn(4, 3, |i, j| if i == j { c(1.0) } else { c(0.0) });
        let big = linalg::identity(2).kronecker(&v).kronecker(&linalg::identity(2));
        let spec = SystemSpec::from_pairs([("A", 2), ("B", 4), ("C", 2)]).unwrap();
        let wide = State::new(spec, &big * rho.matrix() * big.adjoint()).unwrap();
        let d = structure_decompose(&wide, &part).unwrap();
        assert!(d.residual < 1e-7, "{}", d.residual);
        assert!(d.blocks.iter().any(|b| b.p == 0.0));
    }

    #[test]
    fn rejects_non_bs_qmc_and_json_round_trips() {
        let part = Tripartition::abc();
        let noisy = random_state(
            &SystemSpec::from_pairs([("A", 2), ("B", 2), ("C", 2)]).unwrap(),
            Ensemble::HilbertSchmidt,
            0.0,
            1,
        );
        assert!(matches!(structure_decompose(&noisy, &part), Err(Error::NotBSQMC(_))));
        assert!(decompose_unchecked(&noisy, &part, 1).unwrap().residual > 1e-4);

        let d = structure_decompose(&paper_example(), &part).unwrap();
        let back = DecompositionB::from_json(&d.to_json()).unwrap();
        assert_eq!(back.u_b, d.u_b);
        assert_eq!(back.blocks.len(), d.blocks.len());
    }
}
