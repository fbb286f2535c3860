//! Open 1D spin chains with finite-range translation-invariant interactions,
//! their Gibbs states and the decay of `I_eta` and `I^rev` with the size of
//! the shielding region.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::csv_err;
use crate::divergences::{bs_cmi_tri, cmi_tri, BsCmiVariant, Tripartite, Tripartition};
use crate::error::{Error, Result};
use crate::linalg::{self, c, psd, ComplexMatrix, C64};
use crate::markov::{bc_to_abc, eta_tri};
use crate::quantum::{from_re_im, to_re_im, Operator, State, SystemSpec};

/// Largest Hilbert-space dimension accepted for a chain.
pub const MAX_DIM: usize = 4096;

/// Slack for the strength cap and Hermiticity of terms.
const TERM_TOL: f64 = 1e-10;

pub fn pauli_x() -> ComplexMatrix {
    linalg::from_real_rows(&[&[0., 1.], &[1., 0.]])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0.), C64::new(0., -1.), C64::new(0., 1.), c(0.)])
}

pub fn pauli_z() -> ComplexMatrix {
    linalg::diag(&[1., -1.])
}

/// Local terms `(width, h)` repeated at every position of the chain.
#[derive(Clone, Debug)]
pub struct InteractionSpec {
    pub local_dim: usize,
    pub terms: Vec<(usize, ComplexMatrix)>,
    pub range: usize,
    pub j_cap: f64,
}

impl InteractionSpec {
    pub fn new(local_dim: usize, terms: Vec<(usize, ComplexMatrix)>, range: usize, j_cap: f64) -> Result<Self> {
        let s = Self {
            local_dim,
            terms,
            range,
            j_cap,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInteraction(m));
        if self.local_dim < 1 || self.range < 1 {
            return bad("local dimension and range must be positive".into());
        }
        if !(self.j_cap >= 0.0 && self.j_cap.is_finite()) {
            return bad(format!("strength cap {} is not a non-negative number", self.j_cap));
        }
        for (k, (w, h)) in self.terms.iter().enumerate() {
            if *w < 1 || *w > self.range {
                return bad(format!("term {k} has width {w} outside 1..={}", self.range));
            }
            let d = self.local_dim.checked_pow(*w as u32).unwrap_or(usize::MAX);
            if h.nrows() != d || h.ncols() != d {
                return bad(format!("term {k} must be {d}x{d}, got {}x{}", h.nrows(), h.ncols()));
            }
            if !linalg::is_finite(h) || (h - h.adjoint()).norm() > TERM_TOL * h.norm().max(1.0) {
                return bad(format!("term {k} is not Hermitian"));
            }
            let n = linalg::operator_norm(h);
            if n > self.j_cap * (1.0 + TERM_TOL) + TERM_TOL {
                return bad(format!("term {k} has norm {n} above the cap {}", self.j_cap));
            }
        }
        Ok(())
    }

    /// Transverse-field Ising: `-J Z Z` on neighbours and `-g X` on sites.
    pub fn tfim(j: f64, g: f64) -> Self {
        let zz = pauli_z().kronecker(&pauli_z()) * c(-j);
        let x = pauli_x() * c(-g);
        Self::new(2, vec![(2, zz), (1, x)], 2, j.abs().max(g.abs())).expect("valid TFIM")
    }

    /// XXZ: `J (X X + Y Y + delta Z Z)` on neighbours.
    pub fn xxz(j: f64, delta: f64) -> Self {
        let kk = |p: ComplexMatrix| p.kronecker(&p);
        let h = (kk(pauli_x()) + kk(pauli_y()) + kk(pauli_z()) * c(delta)) * c(j);
        let cap = linalg::operator_norm(&h);
        Self::new(2, vec![(2, h)], 2, cap).expect("valid XXZ")
    }
}

#[derive(Serialize, Deserialize)]
struct TermFile {
    width: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

/// JSON form used for custom interactions.
#[derive(Serialize, Deserialize)]
pub struct InteractionFile {
    local_dim: usize,
    range: usize,
    j_cap: f64,
    terms: Vec<TermFile>,
}

impl InteractionFile {
    pub fn from_spec(s: &InteractionSpec) -> Self {
        Self {
            local_dim: s.local_dim,
            range: s.range,
            j_cap: s.j_cap,
            terms: s
                .terms
                .iter()
                .map(|(w, h)| {
                    let (re, im) = to_re_im(h);
                    TermFile { width: *w, re, im }
                })
                .collect(),
        }
    }

    pub fn into_spec(self) -> Result<InteractionSpec> {
        let terms = self
            .terms
            .into_iter()
            .map(|t| Ok((t.width, from_re_im(&t.re, &t.im)?)))
            .collect::<Result<Vec<_>>>()?;
        InteractionSpec::new(self.local_dim, terms, self.range, self.j_cap)
    }
}

pub fn parse_interaction(text: &str) -> Result<InteractionSpec> {
    serde_json::from_str::<InteractionFile>(text)?.into_spec()
}

/// Sites labelled `s0, s1, ...`.
pub fn chain_spec(local_dim: usize, n: usize) -> Result<SystemSpec> {
    SystemSpec::from_pairs((0..n).map(|i| (format!("s{i}"), local_dim)))
}

fn chain_dim(local_dim: usize, n: usize) -> Result<usize> {
    match local_dim.checked_pow(n as u32) {
        Some(d) if d <= MAX_DIM => Ok(d),
        _ => Err(Error::TooLarge(format!(
            "{local_dim}^{n} exceeds the dimension cap {MAX_DIM}"
        ))),
    }
}

/// `H = sum_x sum_terms I ⊗ h at x ⊗ I` with open boundary.
pub fn build_hamiltonian(spec: &InteractionSpec, n: usize) -> Result<Operator> {
    spec.validate()?;
    if n < spec.range {
        return Err(Error::InvalidArgument(format!(
            "chain of {n} sites is shorter than the range {}",
            spec.range
        )));
    }
    let dim = chain_dim(spec.local_dim, n)?;
    let d = spec.local_dim;
    let mut h = ComplexMatrix::zeros(dim, dim);
    for (w, term) in &spec.terms {
        for x in 0..=(n - w) {
            let left = linalg::identity(d.pow(x as u32));
            let right = linalg::identity(d.pow((n - x - w) as u32));
            h += left.kronecker(term).kronecker(&right);
        }
    }
    Operator::new(chain_spec(d, n)?, h)
}

/// `exp(-beta H) / tr exp(-beta H)` through the spectrum, shifted by the
/// ground energy.
pub fn gibbs_state(h: &Operator, beta: f64) -> Result<State> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("inverse temperature {beta} must be positive")));
    }
    let e = linalg::eig_hermitian(h.matrix())?;
    let e0 = e.lambda_min();
    let w = e.apply(|x| (-beta * (x - e0)).exp());
    let z = linalg::trace(&w);
    Ok(State::from_parts_unchecked(h.spec().clone(), linalg::hermitian_part(&(w / z))))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayRow {
    pub size_a: usize,
    pub size_b: usize,
    pub size_c: usize,
    pub i_eta: f64,
    pub i_rev: f64,
    /// `4 sqrt(2 (d_A + d_C + 1)^2 / (d_B pi)) ||rho_B^{-1}||^{1/2}
    /// ||rho_BC^{-1/2} rho rho_BC^{-1/2}||^{1/4} (I^rev)^{1/8}`.
    pub bound_chain: f64,
}

impl DecayRow {
    pub fn chain_margin(&self) -> f64 {
        self.bound_chain - self.i_eta
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DecayCurve {
    pub rows: Vec<DecayRow>,
}

impl DecayCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sizeA", "sizeB", "sizeC", "I_eta", "I_rev", "bound_chain"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.size_a.to_string(),
                r.size_b.to_string(),
                r.size_c.to_string(),
                format!("{:?}", r.i_eta),
                format!("{:?}", r.i_rev),
                format!("{:?}", r.bound_chain),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `I_eta` strictly decreasing along the rows.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].i_eta < w[0].i_eta)
    }
}

/// Contiguous `A | B | C` split with `|A| = ceil((n - |B|) / 2)`.
pub fn balanced_split(n: usize, size_b: usize) -> Result<(usize, usize, usize)> {
    if size_b < 1 || size_b + 2 > n {
        return Err(Error::BadPartition(format!(
            "|B| = {size_b} leaves no room for A and C in {n} sites"
        )));
    }
    let rest = n - size_b;
    let a = rest.div_ceil(2);
    Ok((a, size_b, rest - a))
}

/// All `|B|` for which both A and C are non-empty.
pub fn default_b_sizes(n: usize) -> Vec<usize> {
    (1..n.saturating_sub(1)).collect()
}

fn site_labels(range: std::ops::Range<usize>) -> Vec<String> {
    range.map(|i| format!("s{i}")).collect()
}

fn decay_row(rho: &State, split: (usize, usize, usize)) -> Result<DecayRow> {
    let (na, nb, nc) = split;
    let part = Tripartition::new(
        site_labels(0..na),
        site_labels(na..na + nb),
        site_labels(na + nb..na + nb + nc),
    );
    let t = Tripartite::new(rho, &part)?;
    let [da, db, dc] = t.dims.map(|d| d as f64);
    let ed = eta_tri(&t);
    let i_eta = cmi_tri(&Tripartite::from_matrix(ed.eta, t.dims));
    let i_rev = bs_cmi_tri(&t, BsCmiVariant::Rev)?;
    let rho_b_inv = 1.0 / linalg::eig_symmetrized(&t.rho_b()).lambda_min();
    let s = bc_to_abc(&t, &psd::inv_sqrt(&t.rho_bc()));
    let k = linalg::operator_norm(&(&s * &t.rho * &s));
    let bound_chain = 4.0 * (2.0 * (da + dc + 1.0).powi(2) / (db * PI)).sqrt()
        * rho_b_inv.sqrt()
        * k.powf(0.25)
        * i_rev.max(0.0).powf(0.125);
    Ok(DecayRow {
        size_a: na,
        size_b: nb,
        size_c: nc,
        i_eta,
        i_rev,
        bound_chain,
    })
}

/// Gibbs state of the whole chain split as `A | B | C` for each `|B|` in
/// `b_sizes`; rows are computed in parallel and sorted by `|B|`.
pub fn decay_experiment(spec: &InteractionSpec, n: usize, beta: f64, b_sizes: &[usize]) -> Result<DecayCurve> {
    let splits = b_sizes
        .iter()
        .map(|&b| balanced_split(n, b))
        .collect::<Result<Vec<_>>>()?;
    let h = build_hamiltonian(spec, n)?;
    let rho = gibbs_state(&h, beta)?;
    let mut rows = splits
        .par_iter()
        .map(|&s| decay_row(&rho, s))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.size_b);
    rows.dedup_by_key(|r| r.size_b);
    Ok(DecayCurve { rows })
}
