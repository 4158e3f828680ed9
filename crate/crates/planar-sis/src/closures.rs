//! Third-moment factorization heuristics.
//!
//! Each closure expresses the conditional densities `mu(Phi)^{0,r}_{Psi,Psi}(x)` and
//! `mu(Phi)^{0,r}_{Psi,Phi}(x)` through pair correlation functions evaluated at
//! `|x|`, `|x - r|` and `r`. Internally every family is compiled to a weighted sum of
//! power or arithmetic terms over those three values.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Position;
use crate::quadrature::gl64;
use crate::radial::RadialFunction;

/// Floor applied to PCF values raised to negative powers.
pub const PCF_FLOOR: f64 = 1e-12;

pub const REGISTERED: [&str; 11] = [
    "b0i", "b1i", "b0.5i", "binfi", "g1", "a1", "b1g1", "m2bi", "m3bi", "minfbi", "minfbg1",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegralKind {
    MinfBI,
    MinfBG1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// `k` or `l` may be infinite.
    BayesIndependent { k: f64, l: f64 },
    BayesGeometric { k: f64, l: f64 },
    GeometricMean { eta: f64 },
    ArithmeticMean { eta: f64 },
    Mixture(Vec<(f64, ClosureSpec)>),
    IntegralMixture(IntegralKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureSpec {
    pub name: String,
    pub family: Family,
}

/// The three PCFs entering a closure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcfTriple {
    pub psi_phi: RadialFunction,
    pub phi_phi: RadialFunction,
    pub psi_psi: RadialFunction,
}

/// PCF values at `|x|`, `|x - r|` and `r`.
///
/// For Psi,Psi conditioning these are `(xi_PsiPhi(|x|), xi_PsiPhi(|x-r|), xi_PsiPsi(r))`;
/// for Psi,Phi conditioning `(xi_PsiPhi(|x|), xi_PhiPhi(|x-r|), xi_PsiPhi(r))`.
pub type Args = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Density {
    pub value: f64,
    /// A zero PCF value met a negative exponent and was floored.
    pub singular: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Term {
    Power([f64; 3]),
    /// `eta * args[0] + (1 - eta) * args[1]`
    Arith(f64),
}

/// A closure flattened into weighted terms, one list per conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    psipsi: Vec<(f64, Term)>,
    psiphi: Vec<(f64, Term)>,
}

fn bayes_weights(k: f64, l: f64) -> (f64, f64) {
    // (k/(k+2l), l/(k+2l)) with the infinite endpoints
    if k.is_infinite() {
        (1.0, 0.0)
    } else if l.is_infinite() {
        (0.0, 0.5)
    } else {
        (k / (k + 2.0 * l), l / (k + 2.0 * l))
    }
}

/// Exponents of the Bayes-independent family, `(psipsi, psiphi)`.
pub fn bayes_independent_exponents(k: f64, l: f64) -> ([f64; 3], [f64; 3]) {
    let (a, b) = bayes_weights(k, l);
    ([a + b, a + b, -a], [a + b, 2.0 * b, -b])
}

/// Exponents of the combined Bayes-geometric family, `(psipsi, psiphi)`.
pub fn bayes_geometric_exponents(k: f64, l: f64) -> ([f64; 3], [f64; 3]) {
    let (a, b) = bayes_weights(k, l);
    (
        [a + 1.5 * b, 0.5 * a + 1.5 * b, -(b + 0.5 * a)],
        [0.5 * a + 1.5 * b, b + 0.5 * a, -0.5 * b],
    )
}

fn integral_exponents(kind: IntegralKind, eta: f64) -> ([f64; 3], [f64; 3]) {
    match kind {
        IntegralKind::MinfBI => ([eta, eta, 1.0 - 2.0 * eta], [eta, 2.0 * (1.0 - eta), eta - 1.0]),
        IntegralKind::MinfBG1 => (
            [0.5 + 0.5 * eta, 1.0 - 0.5 * eta, -0.5],
            [1.0 - 0.5 * eta, 0.5, 0.5 * eta - 0.5],
        ),
    }
}

fn eval_terms(terms: &[(f64, Term)], args: Args) -> Density {
    let mut value = 0.0;
    let mut singular = false;
    for &(w, t) in terms {
        value += w * match t {
            Term::Arith(eta) => eta * args[0] + (1.0 - eta) * args[1],
            Term::Power(e) => {
                let mut prod = 1.0;
                for i in 0..3 {
                    if e[i] == 0.0 {
                        continue;
                    }
                    let mut x = args[i];
                    if e[i] < 0.0 && x < PCF_FLOOR {
                        singular |= x <= 0.0;
                        x = PCF_FLOOR;
                    }
                    prod *= if e[i] == 1.0 { x } else { x.max(0.0).powf(e[i]) };
                }
                prod
            }
        };
    }
    Density { value, singular }
}

impl Compiled {
    /// Closure factor for Psi,Psi conditioning, without the `lambda p` prefactor.
    pub fn psipsi(&self, args: Args) -> f64 {
        eval_terms(&self.psipsi, args).value
    }

    /// Closure factor for Psi,Phi conditioning, without the `lambda p` prefactor.
    pub fn psiphi(&self, args: Args) -> f64 {
        eval_terms(&self.psiphi, args).value
    }

    pub(crate) fn psipsi_terms(&self) -> &[(f64, Term)] {
        &self.psipsi
    }

    pub(crate) fn psiphi_terms(&self) -> &[(f64, Term)] {
        &self.psiphi
    }

    pub fn psipsi_checked(&self, args: Args) -> Density {
        eval_terms(&self.psipsi, args)
    }

    pub fn psiphi_checked(&self, args: Args) -> Density {
        eval_terms(&self.psiphi, args)
    }
}

impl ClosureSpec {
    pub fn new(name: impl Into<String>, family: Family) -> Result<Self> {
        let s = Self {
            name: name.into(),
            family,
        };
        s.validate()?;
        Ok(s)
    }

    /// Look up a registered closure by its canonical code.
    pub fn from_code(code: &str) -> Result<Self> {
        let bi = |name: &str, k: f64, l: f64| Self {
            name: name.into(),
            family: Family::BayesIndependent { k, l },
        };
        let inf = f64::INFINITY;
        let spec = match code {
            "b0i" => bi("b0i", inf, 1.0),
            "b1i" => bi("b1i", 1.0, 1.0),
            "b0.5i" => bi("b0.5i", 2.0, 1.0),
            "binfi" => bi("binfi", 0.0, 1.0),
            "g1" => Self {
                name: code.into(),
                family: Family::GeometricMean { eta: 0.5 },
            },
            "a1" => Self {
                name: code.into(),
                family: Family::ArithmeticMean { eta: 0.5 },
            },
            "b1g1" => Self {
                name: code.into(),
                family: Family::BayesGeometric { k: 1.0, l: 1.0 },
            },
            "m2bi" => Self {
                name: code.into(),
                family: Family::Mixture(vec![
                    (0.5, Self::from_code("b0i")?),
                    (0.5, Self::from_code("binfi")?),
                ]),
            },
            "m3bi" => Self {
                name: code.into(),
                family: Family::Mixture(vec![
                    (1.0 / 3.0, Self::from_code("b0i")?),
                    (1.0 / 3.0, Self::from_code("b1i")?),
                    (1.0 / 3.0, Self::from_code("binfi")?),
                ]),
            },
            "minfbi" => Self {
                name: code.into(),
                family: Family::IntegralMixture(IntegralKind::MinfBI),
            },
            "minfbg1" => Self {
                name: code.into(),
                family: Family::IntegralMixture(IntegralKind::MinfBG1),
            },
            other => return Err(Error::UnknownSpec(other.into())),
        };
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            Family::BayesIndependent { k, l } | Family::BayesGeometric { k, l } => {
                if !(*k >= 0.0 && *l >= 0.0) || (*k == 0.0 && *l == 0.0) {
                    return Err(invalid("k,l", "need k,l >= 0, not both zero"));
                }
                if k.is_infinite() && l.is_infinite() {
                    return Err(invalid("k,l", "k and l cannot both be infinite"));
                }
            }
            Family::GeometricMean { eta } | Family::ArithmeticMean { eta } => {
                if !(0.0..=1.0).contains(eta) {
                    return Err(invalid("eta", "need eta in [0,1]"));
                }
            }
            Family::Mixture(parts) => {
                if parts.is_empty() || parts.iter().any(|(w, _)| !(*w > 0.0)) {
                    return Err(invalid("weights", "mixture weights must be positive"));
                }
                let total: f64 = parts.iter().map(|(w, _)| w).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(invalid("weights", format!("weights sum to {total}")));
                }
                for (_, s) in parts {
                    s.validate()?;
                }
            }
            Family::IntegralMixture(_) => {}
        }
        Ok(())
    }

    pub fn compile(&self) -> Compiled {
        let mut c = Compiled {
            psipsi: Vec::new(),
            psiphi: Vec::new(),
        };
        self.push_terms(1.0, &mut c);
        c
    }

    fn push_terms(&self, weight: f64, c: &mut Compiled) {
        match &self.family {
            Family::BayesIndependent { k, l } => {
                let (pp, pf) = bayes_independent_exponents(*k, *l);
                c.psipsi.push((weight, Term::Power(pp)));
                c.psiphi.push((weight, Term::Power(pf)));
            }
            Family::BayesGeometric { k, l } => {
                let (pp, pf) = bayes_geometric_exponents(*k, *l);
                c.psipsi.push((weight, Term::Power(pp)));
                c.psiphi.push((weight, Term::Power(pf)));
            }
            Family::GeometricMean { eta } => {
                let e = [*eta, 1.0 - eta, 0.0];
                c.psipsi.push((weight, Term::Power(e)));
                c.psiphi.push((weight, Term::Power(e)));
            }
            Family::ArithmeticMean { eta } => {
                c.psipsi.push((weight, Term::Arith(*eta)));
                c.psiphi.push((weight, Term::Arith(*eta)));
            }
            Family::Mixture(parts) => {
                for (w, s) in parts {
                    s.push_terms(weight * w, c);
                }
            }
            Family::IntegralMixture(kind) => {
                let (nodes, weights) = gl64();
                for (&eta, &w) in nodes.iter().zip(weights) {
                    let (pp, pf) = integral_exponents(*kind, eta);
                    c.psipsi.push((weight * w, Term::Power(pp)));
                    c.psiphi.push((weight * w, Term::Power(pf)));
                }
            }
        }
    }

    /// `mu(Phi)^{0,r}_{Psi,Psi}(x)` with `r` placed at `(r, 0)`.
    pub fn eval_mu_psipsi(&self, pcf: &PcfTriple, lambda_p: f64, r: f64, x: Position) -> Density {
        let (nx, nxr) = norms(r, x);
        let d = self.compile().psipsi_checked([
            pcf.psi_phi.eval(nx),
            pcf.psi_phi.eval(nxr),
            pcf.psi_psi.eval(r),
        ]);
        Density {
            value: lambda_p * d.value,
            singular: d.singular,
        }
    }

    /// `mu(Phi)^{0,r}_{Psi,Phi}(x)` with `r` placed at `(r, 0)`.
    pub fn eval_mu_psiphi(&self, pcf: &PcfTriple, lambda_p: f64, r: f64, x: Position) -> Density {
        let (nx, nxr) = norms(r, x);
        let d = self.compile().psiphi_checked([
            pcf.psi_phi.eval(nx),
            pcf.phi_phi.eval(nxr),
            pcf.psi_phi.eval(r),
        ]);
        Density {
            value: lambda_p * d.value,
            singular: d.singular,
        }
    }
}

fn norms(r: f64, x: Position) -> (f64, f64) {
    (x.x.hypot(x.y), (x.x - r).hypot(x.y))
}
