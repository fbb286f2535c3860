//! Quantitative inequalities evaluated as `(lhs, rhs, margin)` triples.
//!
//! Lower bounds read `lhs >= rhs`, upper bounds `lhs <= rhs`; in both cases
//! `margin` is oriented so that a non-negative margin means the inequality
//! holds.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::divergences::{bs_cmi_tri, bs_entropy, cmi_tri, umegaki, BsCmiVariant, Tripartite, Tripartition};
use crate::error::{Error, Result};
use crate::linalg::{self, default_support_tol, psd, ComplexMatrix};
use crate::markov::{ab_to_abc, bc_to_abc, eta_tri, mid};
use crate::quantum::{partial_trace_matrix, KrausChannel, State};
use crate::recovery::{align, bs_recover, petz_recover, phi_map, phi_rot, QuadratureRule};

/// Slack under which an inequality still counts as satisfied.
pub const MARGIN_TOL: f64 = 1e-9;

/// `[eta_AB, eta_BC]` Frobenius norm below which U1 and U2 are evaluated.
pub const COMMUTING_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Satisfied,
    Violated,
    NotApplicable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Satisfied => "satisfied",
            Status::Violated => "violated",
            Status::NotApplicable => "not_applicable",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub kind: BoundKind,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub satisfied: bool,
    pub status: Status,
}

impl BoundCheck {
    pub fn new(name: &str, kind: BoundKind, lhs: f64, rhs: f64) -> Self {
        let margin = match kind {
            BoundKind::Lower => lhs - rhs,
            BoundKind::Upper => rhs - lhs,
        };
        let satisfied = margin >= -MARGIN_TOL;
        Self {
            name: name.to_string(),
            kind,
            lhs,
            rhs,
            margin,
            satisfied,
            status: if satisfied { Status::Satisfied } else { Status::Violated },
        }
    }

    /// A check whose hypothesis fails; `rhs` and `margin` are NaN.
    pub fn not_applicable(name: &str, kind: BoundKind, lhs: f64) -> Self {
        Self {
            name: name.to_string(),
            kind,
            lhs,
            rhs: f64::NAN,
            margin: f64::NAN,
            satisfied: false,
            status: Status::NotApplicable,
        }
    }

    pub fn is_applicable(&self) -> bool {
        self.status != Status::NotApplicable
    }
}

/// Writes `name,lhs,rhs,margin,status` rows.
pub fn write_csv<W: Write>(checks: &[BoundCheck], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "lhs", "rhs", "margin", "status"])
        .map_err(csv_err)?;
    for b in checks {
        w.write_record([
            b.name.clone(),
            format!("{:?}", b.lhs),
            format!("{:?}", b.rhs),
            format!("{:?}", b.margin),
            b.status.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Smallest eigenvalue, failing with `SingularInput` below the support tolerance.
fn require_pd(m: &ComplexMatrix, what: &str) -> Result<f64> {
    let lmin = linalg::eig_symmetrized(m).lambda_min();
    if lmin <= default_support_tol(m.nrows()) {
        return Err(Error::SingularInput(format!("{what} has smallest eigenvalue {lmin:.3e}")));
    }
    Ok(lmin)
}

fn finite(v: crate::divergences::DivergenceValue, what: &str) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::SingularInput(format!("{what} is infinite")));
    }
    Ok(v.value)
}

/// `D(rho||sigma) - D(N rho||N sigma) >= (pi/8)^4 ||rho^{-1}||^{-2}
/// ||N(sigma)^{-1}||^{-2} ||P^sigma_N N(rho) - rho||_1^4` for a conditional
/// expectation `N`. That `N` is one is left to the caller.
pub fn cv_lower_bound(rho: &State, sigma: &State, ch: &KrausChannel) -> Result<BoundCheck> {
    let l_rho = require_pd(rho.matrix(), "rho")?;
    let n_rho = ch.apply(rho)?;
    let n_sigma = ch.apply(sigma)?;
    let l_ns = require_pd(n_sigma.matrix(), "N(sigma)")?;
    let lhs = finite(umegaki(rho, sigma)?, "D(rho||sigma)")?
        - finite(umegaki(&n_rho, &n_sigma)?, "D(N rho||N sigma)")?;
    let rec = petz_recover(sigma, ch, n_rho.matrix())?;
    let dist = linalg::trace_norm(&(rec - rho.matrix()));
    let rhs = (PI / 8.0).powi(4) * l_rho.powi(2) * l_ns.powi(2) * dist.powi(4);
    Ok(BoundCheck::new("cv", BoundKind::Lower, lhs, rhs))
}

/// `D^(rho||sigma) - D^(T rho||T sigma) >= (pi/8)^4 ||rho^{-1/2} sigma rho^{-1/2}||^{-4}
/// ||rho^{-1}||^{-2} ||B^rho_T T(sigma) - sigma||_1^4`, with the BS map anchored at `rho`.
pub fn bs_dpi_lower_bound(rho: &State, sigma: &State, ch: &KrausChannel) -> Result<BoundCheck> {
    let l_rho = require_pd(rho.matrix(), "rho")?;
    let t_rho = ch.apply(rho)?;
    require_pd(t_rho.matrix(), "T(rho)")?;
    let t_sigma = ch.apply(sigma)?;
    let lhs = finite(bs_entropy(rho, sigma)?, "D^(rho||sigma)")?
        - finite(bs_entropy(&t_rho, &t_sigma)?, "D^(T rho||T sigma)")?;
    let ri = psd::inv_sqrt(rho.matrix());
    let rel = linalg::operator_norm(&(&ri * sigma.matrix() * &ri));
    let rec = bs_recover(rho, ch, t_sigma.matrix())?;
    let dist = linalg::trace_norm(&(rec - sigma.matrix()));
    let rhs = (PI / 8.0).powi(4) * rel.powi(-4) * l_rho.powi(2) * dist.powi(4);
    Ok(BoundCheck::new("bs_dpi", BoundKind::Lower, lhs, rhs))
}

/// `I_A ⊗ rho_BC^{-1/2}`.
fn bc_inv_sqrt(t: &Tripartite) -> ComplexMatrix {
    bc_to_abc(t, &psd::inv_sqrt(&t.rho_bc()))
}

fn rev_cmi(t: &Tripartite) -> Result<f64> {
    bs_cmi_tri(t, BsCmiVariant::Rev)
}

/// `I^rev >= (pi/8)^4 ||rho_BC^{-1/2} rho rho_BC^{-1/2}||^{-2} ||Phi_{B->AB}(rho_BC) - rho||_1^4`.
pub fn rev_cmi_lower_phi(rho: &State, part: &Tripartition) -> Result<BoundCheck> {
    let t = Tripartite::new(rho, part)?;
    require_pd(&t.rho, "rho_ABC")?;
    require_pd(&t.rho_bc(), "rho_BC")?;
    let lhs = rev_cmi(&t)?;
    let s = bc_inv_sqrt(&t);
    let k = linalg::operator_norm(&(&s * &t.rho * &s));
    let x = rho.partial_trace(&part.bc())?;
    let rec = phi_map(rho, &part.b, &part.ab(), x.operator())?;
    let dist = linalg::trace_norm(&(align(rec, rho.spec())? - rho.matrix()));
    let rhs = (PI / 8.0).powi(4) * k.powi(-2) * dist.powi(4);
    Ok(BoundCheck::new("rev_cmi_phi", BoundKind::Lower, lhs, rhs))
}

/// The three inequalities between `I^rev_rho` and `I_eta` with explicit
/// constants, plus the quantities that decide which upper bound is tighter.
#[derive(Clone, Debug, Serialize)]
pub struct Prop42Report {
    /// `L`, `U1`, `U2` in that order.
    pub checks: Vec<BoundCheck>,
    pub i_rev: f64,
    pub i_eta: f64,
    pub eta_commutator: f64,
    pub g1: f64,
    pub g2: f64,
    /// `(4/pi)^4 (d_A d_B d_C)^2 ||eta^{-1}||^2`.
    pub crossover: f64,
    /// `None` when U1/U2 are not applicable or the comparison is a tie.
    pub crossover_consistent: Option<bool>,
}

impl Prop42Report {
    pub fn lower(&self) -> &BoundCheck {
        &self.checks[0]
    }

    pub fn u1(&self) -> &BoundCheck {
        &self.checks[1]
    }

    pub fn u2(&self) -> &BoundCheck {
        &self.checks[2]
    }
}

pub fn prop42_bounds(rho: &State, part: &Tripartition) -> Result<Prop42Report> {
    let t = Tripartite::new(rho, part)?;
    let [da, db, dc] = t.dims.map(|d| d as f64);
    require_pd(&t.rho, "rho_ABC")?;
    let rho_b = t.rho_b();
    let rho_ab = t.rho_ab();
    let rho_bc = t.rho_bc();
    let lb_min = require_pd(&rho_b, "rho_B")?;
    require_pd(&rho_ab, "rho_AB")?;
    require_pd(&rho_bc, "rho_BC")?;
    let lb_max = linalg::eig_symmetrized(&rho_b).lambda_max();

    let i_rev = rev_cmi(&t)?;
    let ed = eta_tri(&t);
    let eta_t = Tripartite::from_matrix(ed.eta.clone(), t.dims);
    let i_eta = cmi_tri(&eta_t);
    let eta_ab = partial_trace_matrix(&ed.eta, &t.dims, &[0, 1]);
    let eta_bc = partial_trace_matrix(&ed.eta, &t.dims, &[1, 2]);
    let eta_commutator = linalg::commutator(&ab_to_abc(&t, &eta_ab), &bc_to_abc(&t, &eta_bc)).norm();
    let eta_inv = 1.0 / linalg::eig_symmetrized(&ed.eta).lambda_min();

    let s = bc_inv_sqrt(&t);
    let k = linalg::operator_norm(&(&s * &t.rho * &s));

    let rhs_l = if i_eta <= 0.0 {
        0.0
    } else {
        let m = da.min(dc).ln() + 1.0;
        2f64.powi(-8) * m.powi(-8) * (db * PI * lb_min / 8.0).powi(4) * k.powi(-2) * i_eta.powi(8)
    };
    let lower = BoundCheck::new("prop42_L", BoundKind::Lower, i_rev, rhs_l);

    let rho_inv = linalg::eig_symmetrized(&t.rho).apply(|x| 1.0 / x);
    let a = linalg::operator_norm(&(rho_inv * bc_to_abc(&t, &rho_bc)));
    let b_inv = bc_to_abc(&t, &psd::pinv(&rho_bc)) * mid(&t, &rho_b) * ab_to_abc(&t, &psd::pinv(&rho_ab));
    let g1 = k * (lb_max / lb_min).sqrt() * a * linalg::operator_norm(&b_inv);
    let g2 = (PI / 8.0).powi(4) * eta_inv.powi(-2) * (da * db * db * dc).powi(-4);
    let g = g2.powf(-0.25) * g1;
    let h = 2.0 * db * (da * db * dc).sqrt() * g1;
    let crossover = (4.0 / PI).powi(4) * (da * db * dc).powi(2) * eta_inv.powi(2);

    let applicable = eta_commutator < COMMUTING_TOL;
    let (u1, u2, crossover_consistent) = if applicable {
        let r1 = g * i_eta.max(0.0).powf(0.25);
        let r2 = h * i_eta.max(0.0).sqrt();
        let consistent = if (r1 - r2).abs() <= 1e-12 * r1.max(r2) || (i_eta - crossover).abs() <= 1e-9 * crossover {
            None
        } else {
            Some((r1 < r2) == (i_eta > crossover))
        };
        (
            BoundCheck::new("prop42_U1", BoundKind::Upper, i_rev, r1),
            BoundCheck::new("prop42_U2", BoundKind::Upper, i_rev, r2),
            consistent,
        )
    } else {
        (
            BoundCheck::not_applicable("prop42_U1", BoundKind::Upper, i_rev),
            BoundCheck::not_applicable("prop42_U2", BoundKind::Upper, i_rev),
            None,
        )
    };
    Ok(Prop42Report {
        checks: vec![lower, u1, u2],
        i_rev,
        i_eta,
        eta_commutator,
        g1,
        g2,
        crossover,
        crossover_consistent,
    })
}

/// `I^rev <= d_C^{-1} ||rho^{-1/2} rho_AB^{1/2}||^2 ||(id_A ⊗ Phi^rot_{B->BC})(rho_AB) - rho||_1`.
pub fn prop43_upper(rho: &State, part: &Tripartition, rule: &QuadratureRule) -> Result<BoundCheck> {
    let t = Tripartite::new(rho, part)?;
    require_pd(&t.rho, "rho_ABC")?;
    require_pd(&t.rho_b(), "rho_B")?;
    let lhs = rev_cmi(&t)?;
    let x = rho.partial_trace(&part.ab())?;
    let rec = phi_rot(rho, &part.b, &part.bc(), x.operator(), rule)?;
    let dist = linalg::trace_norm(&(align(rec, rho.spec())? - rho.matrix()));
    let n = linalg::operator_norm(&(psd::inv_sqrt(&t.rho) * ab_to_abc(&t, &psd::sqrt(&t.rho_ab()))));
    let rhs = n * n * dist / t.dc() as f64;
    Ok(BoundCheck::new("prop43", BoundKind::Upper, lhs, rhs))
}
