//! Label-based maps `F -> N F` anchored at a reference state: the Petz,
//! BS, symmetrized BS, Phi and rotated maps of the tripartite setting.
//!
//! For `from = B`, `to = AB` and an input on `B C` these are the maps
//! `P_{B->AB}`, `B_{B->AB}`, ... tensored with `id_C`. The reference state
//! supplies the marginals `rho_F` and `rho_NF` (with `N = to \ from`).

use crate::error::{Error, Result};
use crate::linalg::{self, c, default_support_tol, ComplexMatrix, EigenSystem, C64};
use crate::quantum::{permute_matrix, Operator, State, SystemSpec};

use super::quadrature::QuadratureRule;

/// Which recovery map to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecoveryMap {
    /// `rho_NF^{1/2} rho_F^{-1/2} X rho_F^{-1/2} rho_NF^{1/2}`
    Petz,
    /// `rho_NF rho_F^{-1} X`
    Bs,
    /// `(rho_NF rho_F^{-1} X X* rho_F^{-1} rho_NF)^{1/2}`
    BsSym,
    /// `K X K*` with `K = rho_F^{1/2} (rho_F^{-1/2} rho_NF rho_F^{-1/2})^{1/2} rho_F^{-1/2}`
    Phi,
}

impl RecoveryMap {
    pub const ALL: [RecoveryMap; 4] = [
        RecoveryMap::Petz,
        RecoveryMap::Bs,
        RecoveryMap::BsSym,
        RecoveryMap::Phi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RecoveryMap::Petz => "petz",
            RecoveryMap::Bs => "bs",
            RecoveryMap::BsSym => "bs_sym",
            RecoveryMap::Phi => "phi",
        }
    }
}

impl std::str::FromStr for RecoveryMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "petz" => Ok(Self::Petz),
            "bs" | "b" => Ok(Self::Bs),
            "bs_sym" | "bsym" | "sym" => Ok(Self::BsSym),
            "phi" => Ok(Self::Phi),
            other => Err(Error::InvalidArgument(format!(
                "unknown recovery map `{other}` (expected petz, bs, bs_sym or phi)"
            ))),
        }
    }
}

/// Geometry of one application: legs `N, F` from the reference and the
/// remaining legs `R` of the input, with the input lifted to `I_N ⊗ X` in
/// `N, F, R` order.
pub(crate) struct Extension {
    dn: usize,
    df: usize,
    dr: usize,
    /// `I_N ⊗ X` in `N, F, R` order.
    x: ComplexMatrix,
    rho_nf: ComplexMatrix,
    rho_f: ComplexMatrix,
    nfr_spec: SystemSpec,
    out_labels: Vec<String>,
}

fn to_strings<S: AsRef<str>>(v: &[S]) -> Vec<String> {
    v.iter().map(|s| s.as_ref().to_string()).collect()
}

impl Extension {
    pub fn new<S: AsRef<str>, T: AsRef<str>>(
        reference: &State,
        from: &[S],
        to: &[T],
        x: &Operator,
    ) -> Result<Self> {
        let ref_spec = reference.spec();
        let from = to_strings(from);
        let to = to_strings(to);
        if from.is_empty() {
            return Err(Error::InvalidArgument("`from` must name at least one subsystem".into()));
        }
        for l in from.iter().chain(&to) {
            ref_spec.index_of(l)?;
        }
        for l in &from {
            if !to.contains(l) {
                return Err(Error::InvalidArgument(format!(
                    "`from` label `{l}` is not in `to`"
                )));
            }
        }
        // F and N in reference order
        let f: Vec<String> = ref_spec
            .labels()
            .into_iter()
            .filter(|l| from.iter().any(|x| x == l))
            .map(String::from)
            .collect();
        let n: Vec<String> = ref_spec
            .labels()
            .into_iter()
            .filter(|l| to.iter().any(|x| x == l) && !f.iter().any(|x| x == l))
            .map(String::from)
            .collect();
        let x_spec = x.spec();
        for l in &f {
            let want = ref_spec.dim_of(l)?;
            let have = x_spec.dim_of(l).map_err(|_| {
                Error::SpecMismatch(format!("input has no subsystem `{l}`"))
            })?;
            if want != have {
                return Err(Error::SpecMismatch(format!(
                    "subsystem `{l}` has dimension {have} in the input but {want} in the reference"
                )));
            }
        }
        for l in &n {
            if x_spec.contains(l) {
                return Err(Error::SpecMismatch(format!(
                    "input already carries output subsystem `{l}`"
                )));
            }
        }
        let r = x_spec.complement(&f);
        let mut fr = f.clone();
        fr.extend(r.iter().cloned());
        let x_fr = x.permute(&fr)?;
        let n_spec = ref_spec.restrict(&n)?;
        let nfr_spec = n_spec.concat(x_fr.spec())?;
        let dn = n_spec.total_dim();
        let df = ref_spec.dim_of_all(&f)?;
        let dr = x_spec.dim_of_all(&r)?;
        let x_full = linalg::identity(dn).kronecker(x_fr.matrix());

        let mut nf = n.clone();
        nf.extend(f.iter().cloned());
        let rho_nf = reference.partial_trace(&nf)?.permute(&nf)?.matrix().clone();
        let rho_f = reference.partial_trace(&f)?.matrix().clone();

        let mut out_labels: Vec<String> = ref_spec
            .labels()
            .into_iter()
            .filter(|l| to.iter().any(|x| x == l))
            .map(String::from)
            .collect();
        out_labels.extend(r);
        Ok(Self {
            dn,
            df,
            dr,
            x: x_full,
            rho_nf,
            rho_f,
            nfr_spec,
            out_labels,
        })
    }

    fn lift(&self, l: &ComplexMatrix) -> ComplexMatrix {
        l.kronecker(&linalg::identity(self.dr))
    }

    /// `I_N ⊗ m` for `m` on `F`.
    fn on_f(&self, m: &ComplexMatrix) -> ComplexMatrix {
        linalg::identity(self.dn).kronecker(m)
    }

    fn finish(&self, y: ComplexMatrix) -> Result<Operator> {
        let op = Operator::new(self.nfr_spec.clone(), y)?;
        op.permute(&self.out_labels)
    }

    fn f_eig(&self) -> EigenSystem {
        linalg::eig_symmetrized(&self.rho_f)
    }

    fn require_invertible_f(&self, e: &EigenSystem) -> Result<()> {
        let tol = default_support_tol(self.df);
        if e.rank(tol) < self.df {
            return Err(Error::SingularMarginal(format!(
                "reference marginal on the source legs has rank {} < {}",
                e.rank(tol),
                self.df
            )));
        }
        Ok(())
    }

    /// `M = rho_F^{-1/2} rho_NF rho_F^{-1/2}` (with `I_N ⊗`), pseudo-inverse.
    fn modular(&self, fe: &EigenSystem) -> ComplexMatrix {
        let tol = default_support_tol(self.df);
        let inv_sqrt = self.on_f(&fe.apply_on_support(|x| 1.0 / x.sqrt(), tol));
        &inv_sqrt * &self.rho_nf * &inv_sqrt
    }

    pub fn apply(&self, map: RecoveryMap, strict: bool) -> Result<Operator> {
        let fe = self.f_eig();
        if strict {
            self.require_invertible_f(&fe)?;
        }
        let tol_f = default_support_tol(self.df);
        let y = match map {
            RecoveryMap::Petz => {
                let l = crate::linalg::psd::sqrt(&self.rho_nf)
                    * self.on_f(&fe.apply_on_support(|x| 1.0 / x.sqrt(), tol_f));
                let l = self.lift(&l);
                &l * &self.x * l.adjoint()
            }
            RecoveryMap::Bs => {
                let l = &self.rho_nf * self.on_f(&fe.apply_on_support(|x| 1.0 / x, tol_f));
                self.lift(&l) * &self.x
            }
            RecoveryMap::BsSym => {
                let l = self.lift(&(&self.rho_nf * self.on_f(&fe.apply_on_support(|x| 1.0 / x, tol_f))));
                let inner = &l * &self.x * self.x.adjoint() * l.adjoint();
                crate::linalg::psd::sqrt(&inner)
            }
            RecoveryMap::Phi => {
                let m = self.modular(&fe);
                let k = self.on_f(&fe.apply_on_support(f64::sqrt, tol_f))
                    * crate::linalg::psd::sqrt(&m)
                    * self.on_f(&fe.apply_on_support(|x| 1.0 / x.sqrt(), tol_f));
                let k = self.lift(&k);
                &k * &self.x * k.adjoint()
            }
        };
        self.finish(y)
    }

    /// `sum_k w_k K_{t_k} X K_{t_k}*` with
    /// `K_t = rho_F^{(1-it)/2} M^{(1-it)/2} rho_F^{(-1+it)/2}`.
    pub fn apply_rotated(&self, rule: &QuadratureRule, strict: bool) -> Result<Operator> {
        let fe = self.f_eig();
        if strict {
            self.require_invertible_f(&fe)?;
        }
        let tol_f = default_support_tol(self.df);
        let me = linalg::eig_symmetrized(&self.modular(&fe));
        let tol_m = default_support_tol(me.dim());
        let d = self.x.nrows();
        let mut y = ComplexMatrix::zeros(d, d);
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let z_plus = C64::new(0.5, -0.5 * t);
            let z_minus = C64::new(-0.5, 0.5 * t);
            let left = self.on_f(&fe.apply_complex_on_support(|x| (z_plus * x.ln()).exp(), tol_f));
            let mid = me.apply_complex_on_support(|x| (z_plus * x.ln()).exp(), tol_m);
            let right = self.on_f(&fe.apply_complex_on_support(|x| (z_minus * x.ln()).exp(), tol_f));
            let k = self.lift(&(left * mid * right));
            y += (&k * &self.x * k.adjoint()) * c(w);
        }
        self.finish(y)
    }

    /// `d_F eta_NF^{1/2 - it} X eta_NF^{1/2 + it}`; the reference must have
    /// maximally mixed marginal on `F`.
    pub fn apply_rotated_petz(&self, t: f64) -> Result<Operator> {
        let tau = linalg::identity(self.df) / c(self.df as f64);
        let dev = (&self.rho_f - tau).norm();
        if dev > 1e-8 {
            return Err(Error::EtaBNotMaximallyMixed(dev));
        }
        let e = linalg::eig_symmetrized(&self.rho_nf);
        let tol = default_support_tol(e.dim());
        let left = e.apply_complex_on_support(|x| (C64::new(0.5, -t) * x.ln()).exp(), tol);
        let right = e.apply_complex_on_support(|x| (C64::new(0.5, t) * x.ln()).exp(), tol);
        let l = self.lift(&left);
        let r = self.lift(&right);
        self.finish(&l * &self.x * r * c(self.df as f64))
    }
}

/// `Phi_{from -> to}(X)` anchored at `reference`.
///
/// The output lists the `to` labels in the reference's order followed by the
/// input's remaining labels in the input's order.
pub fn phi_map<S: AsRef<str>, T: AsRef<str>>(
    reference: &State,
    from: &[S],
    to: &[T],
    x: &Operator,
) -> Result<Operator> {
    Extension::new(reference, from, to, x)?.apply(RecoveryMap::Phi, true)
}

/// Rotated `Phi`: the `beta0`-average of `K_t X K_t*`.
pub fn phi_rot<S: AsRef<str>, T: AsRef<str>>(
    reference: &State,
    from: &[S],
    to: &[T],
    x: &Operator,
    rule: &QuadratureRule,
) -> Result<Operator> {
    Extension::new(reference, from, to, x)?.apply_rotated(rule, true)
}

/// Rotated Petz map `R^t` of a reference with maximally mixed `from` marginal.
pub fn rotated_petz<S: AsRef<str>, T: AsRef<str>>(
    eta_ref: &State,
    from: &[S],
    to: &[T],
    t: f64,
    x: &Operator,
) -> Result<Operator> {
    Extension::new(eta_ref, from, to, x)?.apply_rotated_petz(t)
}

/// Applies one of the recovery maps with pseudo-inverses on supports.
pub fn recover_with<S: AsRef<str>, T: AsRef<str>>(
    reference: &State,
    from: &[S],
    to: &[T],
    map: RecoveryMap,
    x: &Operator,
) -> Result<Operator> {
    Extension::new(reference, from, to, x)?.apply(map, false)
}

/// `Phi` as the `W` form `rho_NF^{1/2} W rho_F^{-1/2} X rho_F^{-1/2} W* rho_NF^{1/2}`
/// with `W` the unitary polar factor of `rho_NF^{1/2} rho_F^{-1/2}`.
pub fn phi_map_polar<S: AsRef<str>, T: AsRef<str>>(
    reference: &State,
    from: &[S],
    to: &[T],
    x: &Operator,
) -> Result<Operator> {
    let ext = Extension::new(reference, from, to, x)?;
    let fe = ext.f_eig();
    ext.require_invertible_f(&fe)?;
    let tol = default_support_tol(ext.df);
    let inv_sqrt = ext.on_f(&fe.apply_on_support(|v| 1.0 / v.sqrt(), tol));
    let sqrt_nf = crate::linalg::psd::sqrt(&ext.rho_nf);
    let (w, _) = linalg::polar_unitary(&(&sqrt_nf * &inv_sqrt))?;
    let k = ext.lift(&(sqrt_nf * w * inv_sqrt));
    ext.finish(&k * &ext.x * k.adjoint())
}

/// Reorders an operator whose labels match `target` up to order.
pub fn align(op: Operator, target: &SystemSpec) -> Result<ComplexMatrix> {
    let perm = op.spec().permutation(&target.labels())?;
    Ok(permute_matrix(op.matrix(), &op.spec().dims(), &perm))
}
