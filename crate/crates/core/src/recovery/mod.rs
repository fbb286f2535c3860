//! Recovery maps for a channel `T` and reference `sigma`, saturation checks
//! for the BS-entropy data-processing inequality, the multiplicative-domain
//! test and a generator of saturating pairs.

mod extension;
pub mod quadrature;

pub use extension::{phi_map, phi_map_polar, phi_rot, recover_with, rotated_petz, RecoveryMap};
pub use extension::align;
pub use quadrature::{beta0, QuadratureRule};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::divergences::{bs_entropy_matrix, umegaki_matrix, xlogx};
use crate::error::{Error, Result};
use crate::linalg::{self, c, default_support_tol, psd, ComplexMatrix, EigenSystem};
use crate::quantum::{
    ensure_same_spec, random_psd, random_unitary, CpMap, KrausChannel, State, SystemSpec,
};

/// Default tolerance for every saturation verdict.
pub const SATURATION_TOL: f64 = 1e-8;

fn check_io(sigma: &State, ch: &KrausChannel, x: &ComplexMatrix) -> Result<()> {
    ensure_same_spec(ch.in_spec(), sigma.spec())?;
    let d = ch.out_spec().total_dim();
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::SpecMismatch(format!(
            "input must be {d}x{d}, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Petz map `sigma^{1/2} T*(T(sigma)^{-1/2} X T(sigma)^{-1/2}) sigma^{1/2}`.
pub fn petz_recover(sigma: &State, ch: &KrausChannel, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_io(sigma, ch, x)?;
    let ts = ch.apply_matrix(sigma.matrix())?;
    let ts_is = psd::inv_sqrt(&ts);
    let s_half = psd::sqrt(sigma.matrix());
    let inner = ch.apply_adjoint(&(&ts_is * x * &ts_is))?;
    Ok(&s_half * inner * &s_half)
}

/// BS map `sigma T*(T(sigma)^{-1} X)`. Linear and trace preserving but not
/// positive; the output need not be Hermitian.
pub fn bs_recover(sigma: &State, ch: &KrausChannel, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_io(sigma, ch, x)?;
    let ts = ch.apply_matrix(sigma.matrix())?;
    Ok(sigma.matrix() * ch.apply_adjoint(&(psd::pinv(&ts) * x))?)
}

/// Symmetrized BS map `(sigma T*(T(sigma)^{-1} X X* T(sigma)^{-1}) sigma)^{1/2}`.
pub fn bs_recover_sym(sigma: &State, ch: &KrausChannel, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_io(sigma, ch, x)?;
    let ts = ch.apply_matrix(sigma.matrix())?;
    let ti = psd::pinv(&ts);
    let inner = ch.apply_adjoint(&(&ti * x * x.adjoint() * &ti))?;
    Ok(psd::sqrt(&(sigma.matrix() * inner * sigma.matrix())))
}

/// `T_sigma(X) = T(sigma)^{-1/2} T(sigma^{1/2} X sigma^{1/2}) T(sigma)^{-1/2}`,
/// the adjoint of the Petz map, with Kraus operators
/// `T(sigma)^{-1/2} K_i sigma^{1/2}`.
pub fn petz_adjoint_map(sigma: &State, ch: &KrausChannel) -> Result<CpMap> {
    ensure_same_spec(ch.in_spec(), sigma.spec())?;
    let ts = ch.apply_matrix(sigma.matrix())?;
    let ts_is = psd::inv_sqrt(&ts);
    let s_half = psd::sqrt(sigma.matrix());
    let kraus = ch.kraus().iter().map(|k| &ts_is * k * &s_half).collect();
    CpMap::new(sigma.dim(), ch.out_spec().total_dim(), kraus)
}

/// `[rho/sigma] = sigma^{-1/2} rho sigma^{-1/2}` with the pseudo-inverse.
pub fn relative_modular(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> ComplexMatrix {
    let s = psd::inv_sqrt(sigma);
    &s * rho * &s
}

#[derive(Clone, Debug, Serialize)]
pub struct FGap {
    pub name: &'static str,
    pub gap: f64,
}

/// Gaps and residuals of the four equivalent saturation conditions.
#[derive(Clone, Debug, Serialize)]
pub struct SaturationReport {
    /// `D(rho||sigma) - D(T rho||T sigma)` (Umegaki, reported only).
    pub d_gap: f64,
    /// BS-entropy gap, condition (i).
    pub bs_gap: f64,
    /// Maximal f-divergence gaps for `x log x`, `x^2`, `(x-1)^2/(x+1)`,
    /// condition (ii).
    pub f_gaps: Vec<FGap>,
    /// `tr[rho^2 sigma^{-1}] - tr[T(rho)^2 T(sigma)^{-1}]`.
    pub moment_gap: f64,
    /// `||B(T rho) - rho||_1`, condition (iii).
    pub residual_b: f64,
    /// `||B^sym(T rho) - rho||_1`, condition (iv).
    pub residual_bsym: f64,
    pub tol: f64,
    pub verdict_bs_equal: bool,
    pub verdict_f_equal: bool,
    pub verdict_b_fixed: bool,
    pub verdict_bsym_fixed: bool,
}

impl SaturationReport {
    pub fn verdicts(&self) -> [bool; 4] {
        [
            self.verdict_bs_equal,
            self.verdict_f_equal,
            self.verdict_b_fixed,
            self.verdict_bsym_fixed,
        ]
    }

    pub fn all_true(&self) -> bool {
        self.verdicts().iter().all(|&v| v)
    }

    pub fn all_false(&self) -> bool {
        self.verdicts().iter().all(|&v| !v)
    }

    pub fn consistent(&self) -> bool {
        self.all_true() || self.all_false()
    }
}

fn f_div(rho: &ComplexMatrix, sigma: &EigenSystem, f: &dyn Fn(f64) -> f64) -> f64 {
    let tol = default_support_tol(sigma.dim());
    let basis = sigma.support_basis(tol);
    let r = basis.ncols();
    let lam = &sigma.values[..r];
    let rs = basis.adjoint() * rho * &basis;
    let q = ComplexMatrix::from_fn(r, r, |i, j| rs[(i, j)] / c((lam[i] * lam[j]).sqrt()));
    let qe = linalg::eig_symmetrized(&q);
    qe.values
        .iter()
        .enumerate()
        .map(|(k, &qk)| {
            let w: f64 = (0..r).map(|i| lam[i] * qe.vectors[(i, k)].norm_sqr()).sum();
            w * f(qk.max(0.0))
        })
        .sum()
}

/// Evaluates every condition of the BS saturation theorem for `(rho, sigma, T)`.
pub fn check_saturation(rho: &State, sigma: &State, ch: &KrausChannel) -> Result<SaturationReport> {
    check_saturation_with_tol(rho, sigma, ch, SATURATION_TOL)
}

pub fn check_saturation_with_tol(
    rho: &State,
    sigma: &State,
    ch: &KrausChannel,
    tol: f64,
) -> Result<SaturationReport> {
    ensure_same_spec(rho.spec(), sigma.spec())?;
    ensure_same_spec(ch.in_spec(), sigma.spec())?;
    let se = sigma.eig();
    let stol = default_support_tol(se.dim());
    if se.rank(stol) < se.dim() {
        return Err(Error::SingularSigma(format!(
            "rank {} < dimension {}",
            se.rank(stol),
            se.dim()
        )));
    }
    let tr = ch.apply_matrix(rho.matrix())?;
    let ts = ch.apply_matrix(sigma.matrix())?;
    let tse = linalg::eig_symmetrized(&ts);

    let d_gap = umegaki_matrix(rho.matrix(), sigma.matrix()).value - umegaki_matrix(&tr, &ts).value;
    let bs_gap = bs_entropy_matrix(rho.matrix(), sigma.matrix()).value - bs_entropy_matrix(&tr, &ts).value;

    let fs: [(&'static str, &dyn Fn(f64) -> f64); 3] = [
        ("x log x", &xlogx),
        ("x^2", &|x: f64| x * x),
        ("(x-1)^2/(x+1)", &|x: f64| (x - 1.0).powi(2) / (x + 1.0)),
    ];
    let f_gaps: Vec<FGap> = fs
        .iter()
        .map(|(name, f)| FGap {
            name,
            gap: f_div(rho.matrix(), &se, *f) - f_div(&tr, &tse, *f),
        })
        .collect();
    let moment_gap = {
        let lhs = linalg::trace(&(rho.matrix() * rho.matrix() * psd::pinv(sigma.matrix()))).re;
        let rhs = linalg::trace(&(&tr * &tr * psd::pinv(&ts))).re;
        lhs - rhs
    };
    let residual_b = linalg::trace_norm(&(bs_recover(sigma, ch, &tr)? - rho.matrix()));
    let residual_bsym = linalg::trace_norm(&(bs_recover_sym(sigma, ch, &tr)? - rho.matrix()));

    Ok(SaturationReport {
        d_gap,
        bs_gap,
        verdict_bs_equal: bs_gap.abs() <= tol,
        verdict_f_equal: f_gaps.iter().all(|g| g.gap.abs() <= tol) && moment_gap.abs() <= tol,
        verdict_b_fixed: residual_b <= tol,
        verdict_bsym_fixed: residual_bsym <= tol,
        f_gaps,
        moment_gap,
        residual_b,
        residual_bsym,
        tol,
    })
}

/// Outcome of a multiplicative-domain test of a unital CP map `N` at `X`.
#[derive(Clone, Debug)]
pub struct MultiplicativeDomainReport {
    /// `||N(X^2) - N(X)^2||_F`.
    pub defect: f64,
    pub in_domain: bool,
    /// `Y = N(X)`.
    pub y: ComplexMatrix,
    /// `||(Y ⊗ I_E) V - V X||_F` for the Stinespring operator
    /// `V = sum_i K_i ⊗ |i>`.
    pub intertwiner_residual: f64,
}

/// Tests `N(X^2) = N(X)^2` and the intertwining relation `(Y ⊗ I_E) V = V X`.
pub fn multiplicative_domain_check(
    n: &CpMap,
    x: &ComplexMatrix,
    tol: f64,
) -> Result<MultiplicativeDomainReport> {
    let defect = n.unital_defect();
    if defect > 1e-10 {
        return Err(Error::NonUnital(defect));
    }
    if x.nrows() != n.in_dim || x.ncols() != n.in_dim {
        return Err(Error::DimMismatch(format!(
            "map acts on {}x{} matrices, got {}x{}",
            n.in_dim,
            n.in_dim,
            x.nrows(),
            x.ncols()
        )));
    }
    let asym = linalg::relative_asymmetry(x);
    if asym > linalg::HERMITIAN_TOL {
        return Err(Error::NonHermitian { asymmetry: asym });
    }
    let x = linalg::hermitian_part(x);
    let y = linalg::hermitian_part(&n.apply(&x));
    let d = (n.apply(&(&x * &x)) - &y * &y).norm();
    let v = n.stinespring();
    let env = n.kraus.len();
    let res = (y.kronecker(&linalg::identity(env)) * &v - &v * &x).norm();
    Ok(MultiplicativeDomainReport {
        defect: d,
        in_domain: d <= tol,
        y,
        intertwiner_residual: res,
    })
}

/// A pair of states with a channel saturating the BS data-processing
/// inequality.
#[derive(Clone, Debug)]
pub struct SaturatingPair {
    pub rho: State,
    pub sigma: State,
    pub channel: KrausChannel,
}

/// `G^{-1/2} G G^{-1/2}`-style normalization so that `tr_E eta = I`.
fn normalize_env_marginal(g: &ComplexMatrix, d: usize, env: usize) -> ComplexMatrix {
    let marg = crate::quantum::partial_trace_matrix(g, &[d, env], &[0]);
    let s = psd::inv_sqrt(&marg).kronecker(&linalg::identity(env));
    &s * g * &s
}

/// Builds `rho = U* rho0 U`, `sigma = U* sigma0 U` from the block form
///
/// ```text
/// rho0   = (Q^{1/2} S* ⊗ I_E) (⊕ eta_L ⊗ eta_R) (S Q^{1/2} ⊗ I_E)
/// sigma0 = (Q^{1/2} S* ⊗ I_E) (⊕ I_L  ⊗ eta_R) (S Q^{1/2} ⊗ I_E)
/// ```
///
/// with `tr_E eta_R = I`, `Q = T(sigma)` a random density matrix, `S` and
/// `U` random unitaries. The channel is `T = tr_E[U . U*]` from `H = K ⊗ E`
/// (label `H`) to `K` (label `K`).
pub fn construct_saturating_pair(
    blocks: &[(usize, usize)],
    env_dim: usize,
    seed: u64,
) -> Result<SaturatingPair> {
    if blocks.is_empty() || env_dim == 0 || blocks.iter().any(|&(l, r)| l == 0 || r == 0) {
        return Err(Error::InvalidArgument(
            "blocks and environment dimension must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k: usize = blocks.iter().map(|&(l, r)| l * r).sum();
    let big = k * env_dim;

    let mut q = random_psd(k, 0.2, rng.random());
    q /= linalg::trace(&q);
    let s = random_unitary(k, rng.random());

    let mut d_rho = ComplexMatrix::zeros(big, big);
    let mut d_sigma = ComplexMatrix::zeros(big, big);
    let mut offset = 0;
    for &(dl, dr) in blocks {
        let eta_l = random_psd(dl, 0.2, rng.random());
        let g = random_psd(dr * env_dim, 0.2, rng.random());
        let eta_r = normalize_env_marginal(&g, dr, env_dim);
        let br = eta_l.kronecker(&eta_r);
        let bs = linalg::identity(dl).kronecker(&eta_r);
        let n = dl * dr * env_dim;
        d_rho.view_mut((offset, offset), (n, n)).copy_from(&br);
        d_sigma.view_mut((offset, offset), (n, n)).copy_from(&bs);
        offset += n;
    }
    let outer = (psd::sqrt(&q) * s.adjoint()).kronecker(&linalg::identity(env_dim));
    let mut rho0 = &outer * d_rho * outer.adjoint();
    rho0 /= linalg::trace(&rho0);
    let sigma0 = &outer * d_sigma * outer.adjoint();

    let u = random_unitary(big, rng.random());
    let in_spec = SystemSpec::from_pairs([("H", big)])?;
    let out_spec = SystemSpec::from_pairs([("K", k)])?;
    let rho = State::from_unnormalized(in_spec.clone(), u.adjoint() * rho0 * &u)?;
    let sigma = State::from_unnormalized(in_spec.clone(), u.adjoint() * sigma0 * &u)?;
    let channel = KrausChannel::from_isometry(in_spec, out_spec, env_dim, &u)?;
    Ok(SaturatingPair {
        rho,
        sigma,
        channel,
    })
}
