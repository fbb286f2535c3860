//! Relative entropies, maximal f-divergences, CMI and BS-CMI.
//!
//! All logarithms are natural. `0 log 0 = 0` in every spectral sum.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, default_support_tol, ComplexMatrix};
use crate::quantum::{ensure_same_spec, entropy_of_matrix, partial_trace_matrix, State, SystemSpec};

/// Divergence that may be `+inf` when the support condition fails.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DivergenceValue {
    pub value: f64,
    pub support_violation: bool,
}

impl DivergenceValue {
    fn finite(value: f64) -> Self {
        Self {
            value,
            support_violation: false,
        }
    }

    fn infinite() -> Self {
        Self {
            value: f64::INFINITY,
            support_violation: true,
        }
    }

    pub fn is_finite(&self) -> bool {
        !self.support_violation
    }
}

/// Weight of `rho` outside the support of `sigma`, `tr[rho (I - P_sigma)]`.
fn kernel_leak(rho: &ComplexMatrix, sigma_eig: &linalg::EigenSystem, tol: f64) -> f64 {
    let ker = sigma_eig.kernel_basis(tol);
    if ker.ncols() == 0 {
        return 0.0;
    }
    linalg::trace(&(ker.adjoint() * rho * &ker)).re
}

fn leak_threshold(dim: usize) -> f64 {
    default_support_tol(dim).max(1e-12)
}

/// Evaluates `tr[sigma f(sigma^{-1/2} rho sigma^{-1/2})]` on the support of
/// `sigma`. The caller is responsible for the support condition.
fn f_divergence_on_support(
    rho: &ComplexMatrix,
    sigma: &linalg::EigenSystem,
    f: &dyn Fn(f64) -> f64,
    tol: f64,
) -> f64 {
    let basis = sigma.support_basis(tol);
    let r = basis.ncols();
    if r == 0 {
        return 0.0;
    }
    let lam: Vec<f64> = sigma.values[..r].to_vec();
    let rho_s = basis.adjoint() * rho * &basis;
    let q = ComplexMatrix::from_fn(r, r, |i, j| rho_s[(i, j)] / c((lam[i] * lam[j]).sqrt()));
    let qe = linalg::eig_symmetrized(&q);
    // tr[diag(lam) f(Q)] = sum_k f(q_k) sum_i lam_i |v_ik|^2
    qe.values
        .iter()
        .enumerate()
        .map(|(k, &qk)| {
            let w: f64 = (0..r).map(|i| lam[i] * qe.vectors[(i, k)].norm_sqr()).sum();
            w * f(qk.max(0.0))
        })
        .sum()
}

pub(crate) fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

pub(crate) fn umegaki_matrix(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> DivergenceValue {
    let tol = default_support_tol(rho.nrows());
    let se = linalg::eig_symmetrized(sigma);
    if kernel_leak(rho, &se, tol) > leak_threshold(rho.nrows()) {
        return DivergenceValue::infinite();
    }
    let re = linalg::eig_symmetrized(rho);
    let rho_log_rho: f64 = {
        let cut = re.cutoff(tol);
        re.values.iter().filter(|&&l| l > cut).map(|&l| xlogx(l)).sum()
    };
    let log_sigma = se.apply_on_support(f64::ln, tol);
    let cross = linalg::trace(&(rho * log_sigma)).re;
    DivergenceValue::finite(rho_log_rho - cross)
}

pub(crate) fn bs_entropy_matrix(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> DivergenceValue {
    let tol = default_support_tol(rho.nrows());
    let se = linalg::eig_symmetrized(sigma);
    if kernel_leak(rho, &se, tol) > leak_threshold(rho.nrows()) {
        return DivergenceValue::infinite();
    }
    DivergenceValue::finite(f_divergence_on_support(rho, &se, &xlogx, tol))
}

/// Umegaki relative entropy `tr[rho log rho - rho log sigma]`.
pub fn umegaki(rho: &State, sigma: &State) -> Result<DivergenceValue> {
    ensure_same_spec(rho.spec(), sigma.spec())?;
    Ok(umegaki_matrix(rho.matrix(), sigma.matrix()))
}

/// Belavkin-Staszewski relative entropy `tr[sigma f([rho/sigma])]` with
/// `f(x) = x log x` and `[rho/sigma] = sigma^{-1/2} rho sigma^{-1/2}`.
pub fn bs_entropy(rho: &State, sigma: &State) -> Result<DivergenceValue> {
    ensure_same_spec(rho.spec(), sigma.spec())?;
    Ok(bs_entropy_matrix(rho.matrix(), sigma.matrix()))
}

/// `tr[sigma f(sigma^{-1/2} rho sigma^{-1/2})]` for invertible `sigma`.
pub fn maximal_f_divergence(rho: &State, sigma: &State, f: impl Fn(f64) -> f64) -> Result<f64> {
    ensure_same_spec(rho.spec(), sigma.spec())?;
    let tol = default_support_tol(rho.dim());
    let se = sigma.eig();
    if se.rank(tol) < se.dim() {
        return Err(Error::SingularSigma(format!(
            "rank {} < dimension {}",
            se.rank(tol),
            se.dim()
        )));
    }
    Ok(f_divergence_on_support(rho.matrix(), &se, &f, tol))
}

/// [`maximal_f_divergence`] with `sigma` restricted to its support. Fails if
/// `rho` has weight outside that support.
pub fn maximal_f_divergence_on_support(
    rho: &State,
    sigma: &State,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    ensure_same_spec(rho.spec(), sigma.spec())?;
    let tol = default_support_tol(rho.dim());
    let se = sigma.eig();
    let leak = kernel_leak(rho.matrix(), &se, tol);
    if leak > leak_threshold(rho.dim()) {
        return Err(Error::SupportViolation(format!(
            "rho has weight {leak:.3e} on ker sigma"
        )));
    }
    Ok(f_divergence_on_support(rho.matrix(), &se, &f, tol))
}

/// Geometric Renyi divergence `log tr[sigma (sigma^{-1/2} rho sigma^{-1/2})^alpha] / (alpha - 1)`.
pub fn geometric_renyi(rho: &State, sigma: &State, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let q = maximal_f_divergence(rho, sigma, |x| x.powf(alpha))?;
    Ok(q.ln() / (alpha - 1.0))
}

/// Split of a spec's labels into the groups A, B, C.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Tripartition {
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub c: Vec<String>,
}

impl Tripartition {
    pub fn new<S: Into<String>>(
        a: impl IntoIterator<Item = S>,
        b: impl IntoIterator<Item = S>,
        c: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            a: a.into_iter().map(Into::into).collect(),
            b: b.into_iter().map(Into::into).collect(),
            c: c.into_iter().map(Into::into).collect(),
        }
    }

    /// `A`, `B`, `C` each a single label.
    pub fn single(a: &str, b: &str, c: &str) -> Self {
        Self::new([a], [b], [c])
    }

    /// The usual `A,B,C` split.
    pub fn abc() -> Self {
        Self::single("A", "B", "C")
    }

    pub fn ab(&self) -> Vec<String> {
        self.a.iter().chain(&self.b).cloned().collect()
    }

    pub fn bc(&self) -> Vec<String> {
        self.b.iter().chain(&self.c).cloned().collect()
    }

    pub fn abc_order(&self) -> Vec<String> {
        self.a.iter().chain(&self.b).chain(&self.c).cloned().collect()
    }

    /// Checks that the groups are nonempty, disjoint and cover `spec`.
    pub fn validate(&self, spec: &SystemSpec) -> Result<()> {
        for (name, g) in [("A", &self.a), ("B", &self.b), ("C", &self.c)] {
            if g.is_empty() {
                return Err(Error::BadPartition(format!("group {name} is empty")));
            }
        }
        let all = self.abc_order();
        for (i, l) in all.iter().enumerate() {
            if !spec.contains(l) {
                return Err(Error::BadPartition(format!("unknown label `{l}`")));
            }
            if all[..i].contains(l) {
                return Err(Error::BadPartition(format!("label `{l}` used twice")));
            }
        }
        if all.len() != spec.len() {
            return Err(Error::BadPartition(format!(
                "labels {:?} do not cover {}",
                all, spec
            )));
        }
        Ok(())
    }
}

impl FromStr for Tripartition {
    type Err = Error;

    /// Parses `"A,B,C"`; a group may join several labels with `+`.
    fn from_str(s: &str) -> Result<Self> {
        let groups: Vec<Vec<String>> = s
            .split(',')
            .map(|g| g.split('+').map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect())
            .collect();
        if groups.len() != 3 {
            return Err(Error::BadPartition(format!(
                "expected three comma-separated groups, got `{s}`"
            )));
        }
        let mut it = groups.into_iter();
        Ok(Self {
            a: it.next().unwrap(),
            b: it.next().unwrap(),
            c: it.next().unwrap(),
        })
    }
}

impl fmt::Display for Tripartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.a.join("+"), self.b.join("+"), self.c.join("+"))
    }
}

/// A state brought into `A ⊗ B ⊗ C` order with grouped dimensions.
#[derive(Clone, Debug)]
pub(crate) struct Tripartite {
    /// The input spec, for writing results back in the caller's order.
    pub spec: SystemSpec,
    /// Spec in A, B, C group order.
    pub abc_spec: SystemSpec,
    pub dims: [usize; 3],
    /// Density matrix in A, B, C order.
    pub rho: ComplexMatrix,
}

impl Tripartite {
    pub fn new(s: &State, part: &Tripartition) -> Result<Self> {
        part.validate(s.spec())?;
        let order = part.abc_order();
        let permuted = s.permute(&order)?;
        let spec = s.spec();
        let dims = [
            spec.dim_of_all(&part.a)?,
            spec.dim_of_all(&part.b)?,
            spec.dim_of_all(&part.c)?,
        ];
        Ok(Self {
            spec: spec.clone(),
            abc_spec: permuted.spec().clone(),
            dims,
            rho: permuted.matrix().clone(),
        })
    }

    pub fn from_matrix(rho: ComplexMatrix, dims: [usize; 3]) -> Self {
        let abc_spec = SystemSpec::from_pairs([("A", dims[0]), ("B", dims[1]), ("C", dims[2])])
            .expect("distinct labels");
        Self {
            spec: abc_spec.clone(),
            abc_spec,
            dims,
            rho,
        }
    }

    pub fn da(&self) -> usize {
        self.dims[0]
    }

    pub fn db(&self) -> usize {
        self.dims[1]
    }

    pub fn dc(&self) -> usize {
        self.dims[2]
    }

    pub fn marginal(&self, keep: &[usize]) -> ComplexMatrix {
        partial_trace_matrix(&self.rho, &self.dims, keep)
    }

    pub fn rho_ab(&self) -> ComplexMatrix {
        self.marginal(&[0, 1])
    }

    pub fn rho_bc(&self) -> ComplexMatrix {
        self.marginal(&[1, 2])
    }

    pub fn rho_b(&self) -> ComplexMatrix {
        self.marginal(&[1])
    }

    pub fn rho_c(&self) -> ComplexMatrix {
        self.marginal(&[2])
    }

    /// Writes a matrix given in A, B, C order back in the caller's order.
    pub fn to_state(&self, m: ComplexMatrix) -> Result<State> {
        let s = State::from_parts_unchecked(self.abc_spec.clone(), m);
        s.permute(&self.spec.labels())
    }
}

/// `S(AB) + S(BC) - S(ABC) - S(B)`.
pub fn cmi(rho: &State, part: &Tripartition) -> Result<f64> {
    Ok(cmi_tri(&Tripartite::new(rho, part)?))
}

pub(crate) fn cmi_tri(t: &Tripartite) -> f64 {
    entropy_of_matrix(&t.rho_ab()) + entropy_of_matrix(&t.rho_bc())
        - entropy_of_matrix(&t.rho)
        - entropy_of_matrix(&t.rho_b())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BsCmiVariant {
    Os,
    Ts,
    Rev,
}

impl BsCmiVariant {
    pub const ALL: [BsCmiVariant; 3] = [BsCmiVariant::Os, BsCmiVariant::Ts, BsCmiVariant::Rev];

    pub fn name(self) -> &'static str {
        match self {
            BsCmiVariant::Os => "os",
            BsCmiVariant::Ts => "ts",
            BsCmiVariant::Rev => "rev",
        }
    }
}

impl FromStr for BsCmiVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "os" => Ok(Self::Os),
            "ts" => Ok(Self::Ts),
            "rev" => Ok(Self::Rev),
            other => Err(Error::InvalidArgument(format!(
                "unknown BS-CMI variant `{other}` (expected os, ts or rev)"
            ))),
        }
    }
}

impl fmt::Display for BsCmiVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// BS conditional mutual information:
///
/// * `os`:  `D^(rho_ABC || rho_AB ⊗ tau_C) - D^(rho_BC || rho_B ⊗ tau_C)`
/// * `ts`:  same with `rho_C` in place of `tau_C`
/// * `rev`: `D^(rho_AB ⊗ tau_C || rho_ABC) - D^(rho_B ⊗ tau_C || rho_BC)`
pub fn bs_cmi(rho: &State, part: &Tripartition, variant: BsCmiVariant) -> Result<f64> {
    bs_cmi_tri(&Tripartite::new(rho, part)?, variant)
}

pub(crate) fn bs_cmi_tri(t: &Tripartite, variant: BsCmiVariant) -> Result<f64> {
    let dc = t.dc();
    let third = match variant {
        BsCmiVariant::Ts => t.rho_c(),
        _ => linalg::identity(dc) / c(dc as f64),
    };
    let rho_ab_x = t.rho_ab().kronecker(&third);
    let rho_b_x = t.rho_b().kronecker(&third);
    let rho_bc = t.rho_bc();
    let (first, second) = match variant {
        BsCmiVariant::Os | BsCmiVariant::Ts => (
            bs_entropy_matrix(&t.rho, &rho_ab_x),
            bs_entropy_matrix(&rho_bc, &rho_b_x),
        ),
        BsCmiVariant::Rev => (
            bs_entropy_matrix(&rho_ab_x, &t.rho),
            bs_entropy_matrix(&rho_b_x, &rho_bc),
        ),
    };
    if first.support_violation || second.support_violation {
        return Err(Error::SupportViolation(format!(
            "a {variant} BS-CMI term is infinite"
        )));
    }
    Ok(first.value - second.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{random_state, Ensemble, KrausChannel};
    use approx::assert_abs_diff_eq;

    fn qubit() -> SystemSpec {
        SystemSpec::from_pairs([("A", 2)]).unwrap()
    }

    fn abc(da: usize, db: usize, dc: usize) -> SystemSpec {
        SystemSpec::from_pairs([("A", da), ("B", db), ("C", dc)]).unwrap()
    }

    fn ghz() -> State {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut psi = vec![c(0.0); 8];
        psi[0] = c(h);
        psi[7] = c(h);
        State::pure(&abc(2, 2, 2), &psi).unwrap()
    }

    #[test]
    fn umegaki_examples() {
        let p = State::diagonal(&qubit(), &[0.5, 0.5]).unwrap();
        let q = State::diagonal(&qubit(), &[0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(umegaki(&p, &p).unwrap().value, 0.0, epsilon = 1e-14);
        let kl = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        assert_abs_diff_eq!(umegaki(&p, &q).unwrap().value, kl, epsilon = 1e-12);
        assert_abs_diff_eq!(kl, 0.14384, epsilon = 1e-5);

        let zero = State::diagonal(&qubit(), &[1.0, 0.0]).unwrap();
        let one = State::diagonal(&qubit(), &[0.0, 1.0]).unwrap();
        let d = umegaki(&zero, &one).unwrap();
        assert!(d.support_violation);
        assert!(d.value.is_infinite());
    }

    #[test]
    fn bs_entropy_examples() {
        let p = State::diagonal(&qubit(), &[0.3, 0.7]).unwrap();
        let q = State::diagonal(&qubit(), &[0.6, 0.4]).unwrap();
        let d = umegaki(&p, &q).unwrap().value;
        let b = bs_entropy(&p, &q).unwrap().value;
        assert_abs_diff_eq!(d, b, epsilon = 1e-12);
        assert_abs_diff_eq!(bs_entropy(&p, &p).unwrap().value, 0.0, epsilon = 1e-14);

        let r = random_state(&qubit(), Ensemble::HilbertSchmidt, 0.05, 1);
        let s = random_state(&qubit(), Ensemble::HilbertSchmidt, 0.05, 2);
        let gap = bs_entropy(&r, &s).unwrap().value - umegaki(&r, &s).unwrap().value;
        assert!(gap > 1e-6, "gap {gap}");
    }

    #[test]
    fn bs_entropy_support_violation() {
        let zero = State::diagonal(&qubit(), &[1.0, 0.0]).unwrap();
        let one = State::diagonal(&qubit(), &[0.0, 1.0]).unwrap();
        assert!(bs_entropy(&zero, &one).unwrap().support_violation);
        // supp rho inside supp sigma stays finite
        let mixed = State::diagonal(&qubit(), &[0.5, 0.5]).unwrap();
        let d = bs_entropy(&zero, &mixed).unwrap();
        assert_abs_diff_eq!(d.value, 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn maximal_f_examples() {
        let p = State::diagonal(&qubit(), &[0.5, 0.5]).unwrap();
        let q = State::diagonal(&qubit(), &[0.25, 0.75]).unwrap();
        let sq = maximal_f_divergence(&p, &q, |x| x * x).unwrap();
        assert_abs_diff_eq!(sq, 0.25 / 0.25 + 0.25 / 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(sq, 1.33333, epsilon = 1e-5);
        let lin = maximal_f_divergence(&p, &q, |x| x).unwrap();
        assert_abs_diff_eq!(lin, 1.0, epsilon = 1e-14);
        let b = maximal_f_divergence(&p, &q, xlogx).unwrap();
        assert_abs_diff_eq!(b, bs_entropy(&p, &q).unwrap().value, epsilon = 1e-14);
        let singular = State::diagonal(&qubit(), &[1.0, 0.0]).unwrap();
        assert!(matches!(
            maximal_f_divergence(&p, &singular, |x| x),
            Err(Error::SingularSigma(_))
        ));
        let restricted = maximal_f_divergence_on_support(&singular, &singular, |x| x * x).unwrap();
        assert_abs_diff_eq!(restricted, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn geometric_renyi_examples() {
        let p = State::diagonal(&qubit(), &[0.5, 0.5]).unwrap();
        let q = State::diagonal(&qubit(), &[0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(geometric_renyi(&p, &p, 2.0).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(geometric_renyi(&p, &q, 2.0).unwrap(), (4.0f64 / 3.0).ln(), epsilon = 1e-12);
        assert!(matches!(geometric_renyi(&p, &q, 1.0), Err(Error::AlphaOutOfRange(_))));
        assert!(matches!(geometric_renyi(&p, &q, 2.5), Err(Error::AlphaOutOfRange(_))));

        for seed in 0..20 {
            let r = random_state(&qubit(), Ensemble::HilbertSchmidt, 0.05, seed);
            let s = random_state(&qubit(), Ensemble::HilbertSchmidt, 0.05, seed + 100);
            let v: Vec<f64> = [1.25, 1.5, 2.0]
                .iter()
                .map(|&a| geometric_renyi(&r, &s, a).unwrap())
                .collect();
            assert!(v[0] <= v[1] + 1e-12 && v[1] <= v[2] + 1e-12, "{v:?}");
        }
    }

    #[test]
    fn tripartition_parsing() {
        let p: Tripartition = "A,B1+B2,C".parse().unwrap();
        assert_eq!(p.b, vec!["B1", "B2"]);
        assert_eq!(p.to_string(), "A,B1+B2,C");
        assert!("A,B".parse::<Tripartition>().is_err());
        let spec = abc(2, 2, 2);
        assert!(Tripartition::abc().validate(&spec).is_ok());
        assert!(matches!(
            Tripartition::single("A", "B", "D").validate(&spec),
            Err(Error::BadPartition(_))
        ));
        assert!(matches!(
            Tripartition::single("A", "B", "B").validate(&spec),
            Err(Error::BadPartition(_))
        ));
    }

    #[test]
    fn cmi_examples() {
        let part = Tripartition::abc();
        let sa = random_state(&SystemSpec::from_pairs([("A", 2)]).unwrap(), Ensemble::HilbertSchmidt, 0.0, 1);
        let sb = random_state(&SystemSpec::from_pairs([("B", 2)]).unwrap(), Ensemble::HilbertSchmidt, 0.0, 2);
        let sc = random_state(&SystemSpec::from_pairs([("C", 2)]).unwrap(), Ensemble::HilbertSchmidt, 0.0, 3);
        let prod = sa.tensor(&sb).unwrap().tensor(&sc).unwrap();
        assert_abs_diff_eq!(cmi(&prod, &part).unwrap(), 0.0, epsilon = 1e-10);
        for v in BsCmiVariant::ALL {
            assert_abs_diff_eq!(bs_cmi(&prod, &part, v).unwrap(), 0.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(cmi(&ghz(), &part).unwrap(), 2f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn cmi_respects_grouping_and_order() {
        let spec = SystemSpec::from_pairs([("C", 2), ("A", 2), ("B", 2)]).unwrap();
        let s = random_state(&spec, Ensemble::HilbertSchmidt, 0.0, 8);
        let direct = cmi(&s, &Tripartition::abc()).unwrap();
        let reordered = s.permute(&["A", "B", "C"]).unwrap();
        assert_abs_diff_eq!(direct, cmi(&reordered, &Tripartition::abc()).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn bs_cmi_rev_support_violation() {
        assert!(matches!(
            bs_cmi(&ghz(), &Tripartition::abc(), BsCmiVariant::Rev),
            Err(Error::SupportViolation(_))
        ));
    }

    #[test]
    fn classical_states_os_ts_match_cmi() {
        let part = Tripartition::abc();
        for seed in 0..10 {
            let r = random_state(&abc(2, 2, 2), Ensemble::HilbertSchmidt, 0.0, seed);
            let probs: Vec<f64> = (0..8).map(|i| r.matrix()[(i, i)].re).collect();
            let s = State::diagonal(&abc(2, 2, 2), &probs).unwrap();
            let i = cmi(&s, &part).unwrap();
            for v in [BsCmiVariant::Os, BsCmiVariant::Ts] {
                assert_abs_diff_eq!(bs_cmi(&s, &part, v).unwrap(), i, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn dpi_under_channel() {
        let a = SystemSpec::from_pairs([("X", 3)]).unwrap();
        let b = SystemSpec::from_pairs([("Y", 2)]).unwrap();
        for seed in 0..20 {
            let r = random_state(&a, Ensemble::HilbertSchmidt, 0.01, seed);
            let s = random_state(&a, Ensemble::HilbertSchmidt, 0.01, seed + 1000);
            let ch = KrausChannel::random(&a, &b, 2, seed + 2000).unwrap();
            let (tr, ts) = (ch.apply(&r).unwrap(), ch.apply(&s).unwrap());
            let d0 = umegaki(&r, &s).unwrap().value;
            let d1 = umegaki(&tr, &ts).unwrap().value;
            let b0 = bs_entropy(&r, &s).unwrap().value;
            let b1 = bs_entropy(&tr, &ts).unwrap().value;
            assert!(d1 <= d0 + 1e-9 && b1 <= b0 + 1e-9);
            assert!(b0 >= d0 - 1e-10 && d0 >= -1e-10);
        }
    }
}
