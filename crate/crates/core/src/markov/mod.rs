//! (BS-)Markov structure of tripartite states: the eta correspondence,
//! certification, block decompositions, the family of BS-QMCs over a QMC,
//! the Hamiltonian form and the tests for when a BS-QMC is a QMC.

mod decompose;
mod generate;

pub use decompose::{
    decompose_unchecked, reconstruct, structure_decompose, structure_decompose_seeded, Block,
    DecompositionB, DEFAULT_DECOMPOSE_SEED, RECONSTRUCTION_TOL,
};
pub use generate::{
    paper_example, perturbed_commuting, planted_bs_qmc, planted_eta, planted_qmc, PlantedEta,
};

use serde::Serialize;

use crate::divergences::{bs_cmi_tri, cmi_tri, BsCmiVariant, Tripartite, Tripartition};
use crate::error::{Error, Result};
use crate::linalg::{self, c, default_support_tol, psd, ComplexMatrix, C64};
use crate::quantum::{partial_trace_matrix, Operator, State};
use crate::recovery::{align, recover_with, RecoveryMap};

/// Absolute tolerance for every certification verdict.
pub const CERT_TOL: f64 = 1e-8;

pub(crate) struct EtaData {
    /// `eta` in A, B, C order.
    pub eta: ComplexMatrix,
    /// `tr P_B`, equal to `d_B` when `rho_B` is invertible.
    pub rank_b: usize,
    /// `rho_B^{1/2}` on B.
    pub rho_b_sqrt: ComplexMatrix,
}

pub(crate) fn mid(t: &Tripartite, m: &ComplexMatrix) -> ComplexMatrix {
    linalg::identity(t.da()).kronecker(m).kronecker(&linalg::identity(t.dc()))
}

pub(crate) fn ab_to_abc(t: &Tripartite, m: &ComplexMatrix) -> ComplexMatrix {
    m.kronecker(&linalg::identity(t.dc()))
}

pub(crate) fn bc_to_abc(t: &Tripartite, m: &ComplexMatrix) -> ComplexMatrix {
    linalg::identity(t.da()).kronecker(m)
}

pub(crate) fn eta_tri(t: &Tripartite) -> EtaData {
    let e = linalg::eig_symmetrized(&t.rho_b());
    let tol = default_support_tol(t.db());
    let r = e.rank(tol).max(1);
    let s = mid(t, &e.apply_on_support(|x| 1.0 / x.sqrt(), tol));
    let eta = linalg::hermitian_part(&(&s * &t.rho * &s)) / c(r as f64);
    EtaData {
        eta,
        rank_b: r,
        rho_b_sqrt: e.apply_on_support(f64::sqrt, tol),
    }
}

/// `eta = tr[P_B]^{-1} rho_B^{-1/2} rho rho_B^{-1/2}`, which is
/// `d_B^{-1} rho_B^{-1/2} rho rho_B^{-1/2}` for invertible `rho_B`.
pub fn eta_from_rho(rho: &State, part: &Tripartition) -> Result<State> {
    let t = Tripartite::new(rho, part)?;
    t.to_state(eta_tri(&t).eta)
}

/// Residuals and verdicts of the BS-QMC and QMC conditions.
#[derive(Clone, Debug, Serialize)]
pub struct CertReport {
    /// `||P_{B->AB}(rho_BC) - rho||_1`.
    pub res_petz: f64,
    /// `||rho_AB rho_B^{-1} rho_BC - rho||_1`.
    pub res_b: f64,
    pub res_bsym: f64,
    pub res_phi: f64,
    pub cmi: f64,
    /// `None` when a term is infinite.
    pub bs_cmi_rev: Option<f64>,
    /// `||[eta_AB, eta_BC]||_F`.
    pub eta_commutator: f64,
    /// `||rho - d_B^2 rho_B^{1/2} eta_AB eta_BC rho_B^{1/2}||_1`.
    pub eta_product_residual: f64,
    /// Petz residual of `eta`.
    pub eta_petz_residual: f64,
    pub tol: f64,
    pub verdict_qmc: bool,
    pub verdict_bsqmc: bool,
    /// Some residual lies within a factor 10 of the tolerance.
    pub marginal: bool,
}

fn recovery_residual(rho: &State, part: &Tripartition, map: RecoveryMap) -> Result<f64> {
    let x = rho.partial_trace(&part.bc())?;
    let out = recover_with(rho, &part.b, &part.ab(), map, x.operator())?;
    let m = align(out, rho.spec())?;
    Ok(linalg::trace_norm(&(m - rho.matrix())))
}

fn commutator_abc(t: &Tripartite, x_ab: &ComplexMatrix, y_bc: &ComplexMatrix) -> f64 {
    linalg::commutator(&ab_to_abc(t, x_ab), &bc_to_abc(t, y_bc)).norm()
}

fn near(r: f64, tol: f64) -> bool {
    r >= 0.1 * tol && r <= 10.0 * tol
}

/// Certifies whether `rho` is a QMC and whether it is a BS-QMC.
pub fn certify(rho: &State, part: &Tripartition) -> Result<CertReport> {
    certify_with_tol(rho, part, CERT_TOL)
}

pub fn certify_with_tol(rho: &State, part: &Tripartition, tol: f64) -> Result<CertReport> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let t = Tripartite::new(rho, part)?;
    let res_petz = recovery_residual(rho, part, RecoveryMap::Petz)?;
    let res_b = recovery_residual(rho, part, RecoveryMap::Bs)?;
    let res_bsym = recovery_residual(rho, part, RecoveryMap::BsSym)?;
    let res_phi = recovery_residual(rho, part, RecoveryMap::Phi)?;

    let ed = eta_tri(&t);
    let dims = t.dims;
    let eta_ab = partial_trace_matrix(&ed.eta, &dims, &[0, 1]);
    let eta_bc = partial_trace_matrix(&ed.eta, &dims, &[1, 2]);
    let eta_commutator = commutator_abc(&t, &eta_ab, &eta_bc);
    let s = mid(&t, &ed.rho_b_sqrt);
    let r = ed.rank_b as f64;
    let prod = &s * ab_to_abc(&t, &eta_ab) * bc_to_abc(&t, &eta_bc) * &s * c(r * r);
    let eta_product_residual = linalg::trace_norm(&(prod - &t.rho));
    let eta_state = t.to_state(ed.eta.clone())?;
    let eta_petz_residual = recovery_residual(&eta_state, part, RecoveryMap::Petz)?;

    let marginal = [res_petz, res_b, res_bsym, res_phi].iter().any(|&r| near(r, tol));
    let below = [res_b, res_bsym, res_phi].map(|r| r <= tol);
    if !marginal && below.iter().any(|&b| b) && !below.iter().all(|&b| b) {
        return Err(Error::InconsistentCertificate(format!(
            "BS residuals disagree: b = {res_b:.3e}, bsym = {res_bsym:.3e}, phi = {res_phi:.3e}"
        )));
    }
    let verdict_bsqmc = res_b <= tol;
    let verdict_qmc = res_petz <= tol;
    if verdict_qmc && !verdict_bsqmc && !marginal {
        return Err(Error::InconsistentCertificate(format!(
            "Petz residual {res_petz:.3e} passes but BS residual {res_b:.3e} fails"
        )));
    }
    Ok(CertReport {
        res_petz,
        res_b,
        res_bsym,
        res_phi,
        cmi: cmi_tri(&t),
        bs_cmi_rev: bs_cmi_tri(&t, BsCmiVariant::Rev).ok(),
        eta_commutator,
        eta_product_residual,
        eta_petz_residual,
        tol,
        verdict_qmc,
        verdict_bsqmc,
        marginal,
    })
}

/// Brings a state on the B labels into the partition's B order.
pub(crate) fn b_matrix(part: &Tripartition, x: &State, db: usize) -> Result<ComplexMatrix> {
    if x.dim() != db {
        return Err(Error::DimMismatch(format!(
            "B marginal has dimension {}, expected {db}",
            x.dim()
        )));
    }
    let labels = x.spec().labels();
    let same_set = labels.len() == part.b.len() && part.b.iter().all(|l| labels.contains(&l.as_str()));
    if same_set {
        Ok(x.permute(&part.b)?.matrix().clone())
    } else {
        Ok(x.matrix().clone())
    }
}

/// `rho = d_B^2 X_B^{1/2} eta_AB eta_BC X_B^{1/2}` for a QMC `eta` with
/// maximally mixed `eta_B`; the result is a BS-QMC with `rho_B = X_B`.
pub fn bs_family_from_qmc(eta: &State, part: &Tripartition, x_b: &State) -> Result<State> {
    let t = Tripartite::new(eta, part)?;
    let db = t.db();
    let dev = (t.rho_b() - linalg::identity(db) / c(db as f64)).norm();
    if dev > 1e-8 {
        return Err(Error::EtaBNotMaximallyMixed(dev));
    }
    let eta_ab = t.rho_ab();
    let eta_bc = t.rho_bc();
    let comm = commutator_abc(&t, &eta_ab, &eta_bc);
    if comm > 1e-8 {
        return Err(Error::NotCommutingMarginals(comm));
    }
    let x = b_matrix(part, x_b, db)?;
    let xh = mid(&t, &psd::sqrt(&x));
    let m = &xh * ab_to_abc(&t, &eta_ab) * bc_to_abc(&t, &eta_bc) * &xh * c((db * db) as f64);
    let out = t.to_state(linalg::hermitian_part(&m))?;
    let out = State::new(out.spec().clone(), out.matrix().clone())?;

    let rb = Tripartite::new(&out, part)?.rho_b();
    let drift = (rb - x).norm();
    if drift > 1e-8 {
        return Err(Error::NotBSQMC(format!("rho_B deviates from X_B by {drift:.3e}")));
    }
    let res = recovery_residual(&out, part, RecoveryMap::Bs)?;
    if res > 1e-8 {
        return Err(Error::NotBSQMC(format!("BS recovery residual {res:.3e}")));
    }
    Ok(out)
}

/// `H_AB = -log eta_AB`, `H_BC = -log eta_BC` and how well
/// `rho_B^{1/2} exp(-H_AB - H_BC) rho_B^{1/2}` reproduces `rho`.
#[derive(Clone, Debug)]
pub struct HamiltonianForm {
    pub h_ab: Operator,
    pub h_bc: Operator,
    /// `||[H_AB, H_BC]||_F`.
    pub commutator_norm: f64,
    /// Trace-norm distance after normalizing the reconstruction.
    pub reconstruction_residual: f64,
}

pub fn hamiltonian_form(rho: &State, part: &Tripartition) -> Result<HamiltonianForm> {
    let cert = certify(rho, part)?;
    if !cert.verdict_bsqmc {
        return Err(Error::NotBSQMC(format!("BS residual {:.3e}", cert.res_b)));
    }
    let t = Tripartite::new(rho, part)?;
    let ed = eta_tri(&t);
    let eta_ab = partial_trace_matrix(&ed.eta, &t.dims, &[0, 1]);
    let eta_bc = partial_trace_matrix(&ed.eta, &t.dims, &[1, 2]);
    let neg_log = |m: &ComplexMatrix, name: &str| -> Result<ComplexMatrix> {
        let e = linalg::eig_symmetrized(m);
        let tol = default_support_tol(e.dim());
        if e.rank(tol) < e.dim() {
            return Err(Error::RankDeficientMarginal(format!(
                "eta_{name} has rank {} < {}",
                e.rank(tol),
                e.dim()
            )));
        }
        Ok(e.apply(|x| -x.ln()))
    };
    let h_ab = neg_log(&eta_ab, "AB")?;
    let h_bc = neg_log(&eta_bc, "BC")?;
    let big_ab = ab_to_abc(&t, &h_ab);
    let big_bc = bc_to_abc(&t, &h_bc);
    let commutator_norm = linalg::commutator(&big_ab, &big_bc).norm();
    let g = linalg::eig_symmetrized(&(big_ab + big_bc)).apply(|x| (-x).exp());
    let s = mid(&t, &ed.rho_b_sqrt);
    let mut rec = &s * g * &s;
    rec /= linalg::trace(&rec);
    let reconstruction_residual = linalg::trace_norm(&(rec - &t.rho));
    Ok(HamiltonianForm {
        h_ab: Operator::new(t.abc_spec.restrict(&part.ab())?, h_ab)?,
        h_bc: Operator::new(t.abc_spec.restrict(&part.bc())?, h_bc)?,
        commutator_norm,
        reconstruction_residual,
    })
}

/// Conditions under which a BS-QMC is a QMC, evaluated numerically.
#[derive(Clone, Debug, Serialize)]
pub struct QmcWithinBsReport {
    /// `||W* W - I||_F`.
    pub w_unitarity_defect: f64,
    /// `||rho_AB^{1/2} rho_B^{-1/2} - d_B^{1/2} W eta_AB^{1/2}||_F`.
    pub polar_residual: f64,
    /// `||W eta_BC W* - eta_BC||_1`.
    pub residual_iv: f64,
    /// `||d_B^{-1} rho_AB^{-1/2} rho rho_AB^{-1/2} - eta_BC||_1`.
    pub residual_v: f64,
    /// `(t, ||[rho_B^{it} eta_AB rho_B^{-it}, eta_BC]||_F)` at sampled `t`;
    /// a heuristic, not a verdict source.
    pub rotated_commutators: Vec<(f64, f64)>,
    pub tol: f64,
    pub verdict_qmc: bool,
}

pub const ROTATION_SAMPLES: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

pub fn qmc_within_bs_check(rho: &State, part: &Tripartition) -> Result<QmcWithinBsReport> {
    let cert = certify(rho, part)?;
    if !cert.verdict_bsqmc {
        return Err(Error::NotBSQMC(format!("BS residual {:.3e}", cert.res_b)));
    }
    let t = Tripartite::new(rho, part)?;
    let ed = eta_tri(&t);
    let r = ed.rank_b as f64;
    let eta_ab = partial_trace_matrix(&ed.eta, &t.dims, &[0, 1]);
    let eta_bc = partial_trace_matrix(&ed.eta, &t.dims, &[1, 2]);
    let rho_ab = t.rho_ab();
    let be = linalg::eig_symmetrized(&t.rho_b());
    let btol = default_support_tol(t.db());
    let id_a = linalg::identity(t.da());

    let a = psd::sqrt(&rho_ab) * id_a.kronecker(&be.apply_on_support(|x| 1.0 / x.sqrt(), btol));
    let (w, _) = linalg::polar_unitary(&a)?;
    let n = w.nrows();
    let w_unitarity_defect = (w.adjoint() * &w - linalg::identity(n)).norm();
    let polar_residual = (&a - &w * psd::sqrt(&eta_ab) * c(r.sqrt())).norm();

    let big_w = ab_to_abc(&t, &w);
    let big_bc = bc_to_abc(&t, &eta_bc);
    let residual_iv = linalg::trace_norm(&(&big_w * &big_bc * big_w.adjoint() - &big_bc));
    let s = ab_to_abc(&t, &psd::inv_sqrt(&rho_ab));
    let residual_v = linalg::trace_norm(&(&s * &t.rho * &s / c(r) - &big_bc));

    let rotated_commutators = ROTATION_SAMPLES
        .iter()
        .map(|&tt| {
            let u = id_a.kronecker(&be.apply_complex_on_support(
                |x| (C64::new(0.0, tt) * x.ln()).exp(),
                btol,
            ));
            let rot = &u * &eta_ab * u.adjoint();
            (tt, commutator_abc(&t, &rot, &eta_bc))
        })
        .collect();
    Ok(QmcWithinBsReport {
        w_unitarity_defect,
        polar_residual,
        residual_iv,
        residual_v,
        rotated_commutators,
        tol: CERT_TOL,
        verdict_qmc: residual_iv <= CERT_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{random_state, Ensemble, SystemSpec};
    use approx::assert_abs_diff_eq;

    fn abc(da: usize, db: usize, dc: usize) -> SystemSpec {
        SystemSpec::from_pairs([("A", da), ("B", db), ("C", dc)]).unwrap()
    }

    #[test]
    fn eta_fixed_point_and_product() {
        let part = Tripartition::abc();
        let ra = random_state(&SystemSpec::from_pairs([("A", 2)]).unwrap(), Ensemble::HilbertSchmidt, 0.1, 1);
        let rb = random_state(&SystemSpec::from_pairs([("B", 3)]).unwrap(), Ensemble::HilbertSchmidt, 0.1, 2);
        let rc = random_state(&SystemSpec::from_pairs([("C", 2)]).unwrap(), Ensemble::HilbertSchmidt, 0.1, 3);
        let rho = ra.tensor(&rb).unwrap().tensor(&rc).unwrap();
        let eta = eta_from_rho(&rho, &part).unwrap();
        let tau_b = State::maximally_mixed(rb.spec());
        let expect = ra.tensor(&tau_b).unwrap().tensor(&rc).unwrap();
        assert!((eta.matrix() - expect.matrix()).norm() < 1e-12);
        let again = eta_from_rho(&eta, &part).unwrap();
        assert!((again.matrix() - eta.matrix()).norm() < 1e-12);
    }

    #[test]
    fn eta_singular_marginal_uses_support() {
        let spec = abc(2, 2, 2);
        let mut probs = vec![0.0; 8];
        for (i, p) in probs.iter_mut().enumerate() {
            // B index is the middle bit; keep only B = 0
            if (i >> 1) & 1 == 0 {
                *p = (i + 1) as f64;
            }
        }
        let tot: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= tot);
        let rho = State::diagonal(&spec, &probs).unwrap();
        let eta = eta_from_rho(&rho, &Tripartition::abc()).unwrap();
        let eb = eta.partial_trace(&["B"]).unwrap();
        assert_abs_diff_eq!(eb.matrix()[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eb.matrix()[(1, 1)].re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn example_is_bs_qmc_but_not_qmc() {
        let rho = paper_example();
        let rep = certify(&rho, &Tripartition::abc()).unwrap();
        assert!(rep.verdict_bsqmc && !rep.verdict_qmc, "{rep:?}");
        assert!(rep.res_petz > 1e-3);
        assert!(rep.eta_petz_residual < 1e-9);
        let eta = eta_from_rho(&rho, &Tripartition::abc()).unwrap();
        let eta_rep = certify(&eta, &Tripartition::abc()).unwrap();
        assert!(eta_rep.verdict_qmc);
    }

    #[test]
    fn random_states_fail_both() {
        for seed in 0..5 {
            let rho = random_state(&abc(2, 2, 2), Ensemble::HilbertSchmidt, 0.0, seed);
            let rep = certify(&rho, &Tripartition::abc()).unwrap();
            assert!(!rep.verdict_qmc && !rep.verdict_bsqmc, "{rep:?}");
        }
    }

    #[test]
    fn planted_qmc_certifies() {
        let rho = planted_qmc(&[(1, 2), (2, 1)], 2, 2, 4).unwrap();
        let rep = certify(&rho, &Tripartition::abc()).unwrap();
        assert!(rep.verdict_qmc && rep.verdict_bsqmc, "{rep:?}");
        assert!(rep.cmi.abs() < 1e-9);
    }

    #[test]
    fn family_examples() {
        let part = Tripartition::abc();
        let planted = planted_eta(&[(1, 2), (2, 1)], 2, 2, 5).unwrap();
        let tau = State::maximally_mixed(&SystemSpec::from_pairs([("B", 4)]).unwrap());
        let same = bs_family_from_qmc(&planted.state, &part, &tau).unwrap();
        assert!((same.matrix() - planted.state.matrix()).norm() < 1e-12);

        let mut found = false;
        for seed in 0..5 {
            let x = random_state(tau.spec(), Ensemble::HilbertSchmidt, 0.05, 100 + seed);
            let rho = bs_family_from_qmc(&planted.state, &part, &x).unwrap();
            let rep = certify(&rho, &part).unwrap();
            assert!(rep.verdict_bsqmc);
            let rb = rho.partial_trace(&["B"]).unwrap();
            assert!((rb.matrix() - x.matrix()).norm() < 1e-8);
            found |= !rep.verdict_qmc;
        }
        assert!(found);

        let x = planted.block_state(&[0.3, 0.7], 9).unwrap();
        let rho = bs_family_from_qmc(&planted.state, &part, &x).unwrap();
        assert!(certify(&rho, &part).unwrap().verdict_qmc);
    }

    #[test]
    fn family_rejects_bad_eta() {
        let part = Tripartition::abc();
        let rho = paper_example();
        let x = rho.partial_trace(&["B"]).unwrap();
        assert!(matches!(
            bs_family_from_qmc(&rho, &part, &x),
            Err(Error::EtaBNotMaximallyMixed(_))
        ));
        let noisy = random_state(&abc(2, 2, 2), Ensemble::HilbertSchmidt, 0.0, 3);
        let eta = eta_from_rho(&noisy, &part).unwrap();
        assert!(matches!(
            bs_family_from_qmc(&eta, &part, &x),
            Err(Error::NotCommutingMarginals(_))
        ));
    }

    #[test]
    fn hamiltonian_examples() {
        let part = Tripartition::abc();
        let rho = paper_example();
        let h = hamiltonian_form(&rho, &part).unwrap();
        assert!(h.reconstruction_residual < 1e-7);
        assert!(h.commutator_norm < 1e-8);
        let planted = planted_bs_qmc(&[(2, 1), (1, 2)], 2, 2, 8).unwrap();
        let h = hamiltonian_form(&planted, &part).unwrap();
        assert!(h.commutator_norm < 1e-8 && h.reconstruction_residual < 1e-7);
        let noisy = random_state(&abc(2, 2, 2), Ensemble::HilbertSchmidt, 0.0, 3);
        assert!(matches!(hamiltonian_form(&noisy, &part), Err(Error::NotBSQMC(_))));
    }

    #[test]
    fn qmc_within_bs_examples() {
        let part = Tripartition::abc();
        let ex = qmc_within_bs_check(&paper_example(), &part).unwrap();
        assert!(ex.residual_iv > 1e-3 && !ex.verdict_qmc);
        assert!(ex.w_unitarity_defect < 1e-10 && ex.polar_residual < 1e-9);

        let q = planted_qmc(&[(2, 1), (1, 2)], 2, 2, 3).unwrap();
        let rep = qmc_within_bs_check(&q, &part).unwrap();
        assert!(rep.residual_iv < 1e-8 && rep.residual_v < 1e-8, "{rep:?}");
        assert!(rep.rotated_commutators.iter().all(|&(_, n)| n < 1e-8));

        for seed in 0..4 {
            let b = planted_bs_qmc(&[(1, 2), (2, 1)], 2, 2, seed).unwrap();
            let rep = qmc_within_bs_check(&b, &part).unwrap();
            assert!((rep.residual_iv - rep.residual_v).abs() < 1e-9, "{rep:?}");
        }
    }
}
