//! Built-in and planted tripartite states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::decompose::place_block;
use crate::error::{Error, Result};
use crate::linalg::{self, c, psd, ComplexMatrix};
use crate::quantum::{partial_trace_matrix, random_hermitian, random_psd, random_unitary, State, SystemSpec};

fn abc_spec(da: usize, db: usize, dc: usize) -> Result<SystemSpec> {
    SystemSpec::from_pairs([("A", da), ("B", db), ("C", dc)])
}

/// The 8x8 BS-QMC on `C^2 ⊗ C^2 ⊗ C^2` that is not a QMC.
pub fn paper_example() -> State {
    const T: f64 = 1.0 / 3.0;
    const N: f64 = 1.0 / 9.0;
    let rows: [[f64; 8]; 8] = [
        [T, 0., 0., 0., 0., 0., 0., 0.],
        [0., 4. * T, 0., -2. * T, 0., 0., 0., 0.],
        [0., 0., 2. * T, 0., 0., 0., 0., 0.],
        [0., -2. * T, 0., 4. * T, 0., 0., 0., 0.],
        [0., 0., 0., 0., N, 0., N, 0.],
        [0., 0., 0., 0., 0., T, 0., 0.],
        [0., 0., 0., 0., N, 0., 4. * N, 0.],
        [0., 0., 0., 0., 0., 0., 0., 2. * T],
    ];
    let m = ComplexMatrix::from_fn(8, 8, |i, j| c(9.0 / 47.0 * rows[i][j]));
    State::new(abc_spec(2, 2, 2).expect("labels"), m).expect("example is a state")
}

fn check_blocks(blocks: &[(usize, usize)], da: usize, dc: usize) -> Result<usize> {
    if blocks.is_empty() || da == 0 || dc == 0 || blocks.iter().any(|&(l, r)| l == 0 || r == 0) {
        return Err(Error::InvalidArgument("block and system dimensions must be positive".into()));
    }
    Ok(blocks.iter().map(|&(l, r)| l * r).sum())
}

/// Random density matrix on `X ⊗ Y` (or `Y ⊗ X` if `y_first`) whose
/// marginal on `Y` is maximally mixed.
fn tau_marginal_state(dx: usize, dy: usize, y_first: bool, seed: u64) -> ComplexMatrix {
    let g = random_psd(dx * dy, 0.1, seed);
    let (dims, keep) = if y_first { ([dy, dx], 0) } else { ([dx, dy], 1) };
    let m = partial_trace_matrix(&g, &dims, &[keep]);
    let s = psd::inv_sqrt(&m);
    let s = if y_first {
        s.kronecker(&linalg::identity(dx))
    } else {
        linalg::identity(dx).kronecker(&s)
    };
    &s * g * &s / c(dy as f64)
}

fn normalized_psd(d: usize, seed: u64) -> ComplexMatrix {
    let g = random_psd(d, 0.1, seed);
    let tr = linalg::trace(&g);
    g / tr
}

/// A planted QMC `eta = U_B* (⊕ p_n eta_{A B_n^L} ⊗ eta_{B_n^R C}) U_B` with
/// `eta_B = tau_B`.
#[derive(Clone, Debug)]
pub struct PlantedEta {
    pub state: State,
    pub u_b: ComplexMatrix,
    pub blocks: Vec<(usize, usize)>,
}

impl PlantedEta {
    /// `U_B* (⊕ w_n rho_{B_n^L} ⊗ rho_{B_n^R}) U_B` with random factors.
    pub fn block_state(&self, weights: &[f64], seed: u64) -> Result<State> {
        if weights.len() != self.blocks.len() || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument("one non-negative weight per block".into()));
        }
        let db = self.u_b.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = ComplexMatrix::zeros(db, db);
        let mut off = 0;
        for (&(dl, dr), &w) in self.blocks.iter().zip(weights) {
            let f = normalized_psd(dl, rng.random()).kronecker(&normalized_psd(dr, rng.random()));
            d.view_mut((off, off), (dl * dr, dl * dr)).copy_from(&(f * c(w)));
            off += dl * dr;
        }
        let m = self.u_b.adjoint() * d * &self.u_b;
        State::from_unnormalized(SystemSpec::from_pairs([("B", db)])?, m)
    }
}

pub fn planted_eta(blocks: &[(usize, usize)], da: usize, dc: usize, seed: u64) -> Result<PlantedEta> {
    let db = check_blocks(blocks, da, dc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [da, db, dc];
    let mut d = ComplexMatrix::zeros(da * db * dc, da * db * dc);
    let mut off = 0;
    for &(dl, dr) in blocks {
        let q = (dl * dr) as f64 / db as f64;
        let left = tau_marginal_state(da, dl, false, rng.random());
        let right = tau_marginal_state(dc, dr, true, rng.random());
        place_block(&mut d, &(left.kronecker(&right) * c(q)), dims, off, dl * dr);
        off += dl * dr;
    }
    let u_b = random_unitary(db, rng.random());
    let u = linalg::identity(da).kronecker(&u_b).kronecker(&linalg::identity(dc));
    let state = State::from_unnormalized(abc_spec(da, db, dc)?, u.adjoint() * d * u)?;
    Ok(PlantedEta {
        state,
        u_b,
        blocks: blocks.to_vec(),
    })
}

/// Random QMC `U_B* (⊕ q_n rho_{A B_n^L} ⊗ rho_{B_n^R C}) U_B` with random
/// weights and factors.
pub fn planted_qmc(blocks: &[(usize, usize)], da: usize, dc: usize, seed: u64) -> Result<State> {
    let db = check_blocks(blocks, da, dc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [da, db, dc];
    let weights: Vec<f64> = blocks.iter().map(|_| 0.2 + rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    let mut d = ComplexMatrix::zeros(da * db * dc, da * db * dc);
    let mut off = 0;
    for (&(dl, dr), w) in blocks.iter().zip(&weights) {
        let left = normalized_psd(da * dl, rng.random());
        let right = normalized_psd(dr * dc, rng.random());
        place_block(&mut d, &(left.kronecker(&right) * c(w / total)), dims, off, dl * dr);
        off += dl * dr;
    }
    let u_b = random_unitary(db, rng.random());
    let u = linalg::identity(da).kronecker(&u_b).kronecker(&linalg::identity(dc));
    State::from_unnormalized(abc_spec(da, db, dc)?, u.adjoint() * d * u)
}

/// `d_B^2 X_B^{1/2} eta_AB eta_BC X_B^{1/2}` over a planted `eta` and a
/// random full-rank `X_B`.
pub fn planted_bs_qmc(blocks: &[(usize, usize)], da: usize, dc: usize, seed: u64) -> Result<State> {
    let planted = planted_eta(blocks, da, dc, seed)?;
    let db = planted.u_b.nrows();
    let x = State::from_unnormalized(
        SystemSpec::from_pairs([("B", db)])?,
        random_psd(db, 0.05, seed ^ 0x9e37_79b9_7f4a_7c15),
    )?;
    super::bs_family_from_qmc(&planted.state, &crate::divergences::Tripartition::abc(), &x)
}

/// `d_B X_B^{1/2} (eta + eps X_A ⊗ I_B ⊗ Y_C) X_B^{1/2}` with a planted QMC
/// `eta` and traceless Hermitian `X_A`, `Y_C` of unit operator norm.
///
/// The perturbation leaves `eta_AB`, `eta_BC` and `eta_B = tau_B` unchanged,
/// so the marginals of the associated eta still commute while `eta` is no
/// longer a QMC for `eps > 0`.
pub fn perturbed_commuting(
    blocks: &[(usize, usize)],
    da: usize,
    dc: usize,
    eps: f64,
    seed: u64,
) -> Result<State> {
    if da < 2 || dc < 2 {
        return Err(Error::InvalidArgument("A and C need dimension at least 2".into()));
    }
    let planted = planted_eta(blocks, da, dc, seed)?;
    let db = planted.u_b.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let traceless = |d: usize, s: u64| {
        let h = random_hermitian(d, s);
        let h = &h - linalg::identity(d) * (linalg::trace(&h) / c(d as f64));
        let n = linalg::operator_norm(&h);
        h / c(n)
    };
    let xa = traceless(da, rng.random());
    let yc = traceless(dc, rng.random());
    let pert = xa.kronecker(&linalg::identity(db)).kronecker(&yc);
    let eta = planted.state.matrix() + pert * c(eps);
    let x = psd::sqrt(&random_psd(db, 0.05, rng.random()));
    let big = linalg::identity(da).kronecker(&x).kronecker(&linalg::identity(dc));
    let m = &big * eta * &big;
    State::from_unnormalized(planted.state.spec().clone(), m)
}
