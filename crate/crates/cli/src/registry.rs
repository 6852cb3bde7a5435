//! The registered experiments. Acceptance criteria map one-to-one onto
//! entries with a `criterion` number.

use fracflow::{Error, Result};

use crate::config::RunConfig;
use crate::experiments::{determinism, linear, solver, stats};
use crate::runner::{Context, Outcome};

pub struct Experiment {
    pub name: &'static str,
    /// Acceptance criterion this experiment decides, if any.
    pub criterion: Option<u8>,
    pub description: &'static str,
    /// The mathematical statement being checked.
    pub statement: &'static str,
    pub defaults: fn() -> RunConfig,
    pub run: fn(&Context) -> Result<Outcome>,
}

pub static EXPERIMENTS: &[Experiment] = &[
    Experiment {
        name: "linear-spectral-decay",
        criterion: Some(1),
        description: "empirical spectrum of the linear flow against exponential decay",
        statement: "the spectral measure of P_t u0 is exp(-2t|k|^{2s}) sigma",
        defaults: linear::spectral_decay_defaults,
        run: linear::spectral_decay,
    },
    Experiment {
        name: "semigroup-contraction",
        criterion: Some(2),
        description: "semigroup law and L2 contraction of P_t",
        statement: "P_{t1} P_{t2} = P_{t1+t2} and t -> |P_t u|_2 is nonincreasing",
        defaults: linear::semigroup_defaults,
        run: linear::semigroup,
    },
    Experiment {
        name: "kernel-identities",
        criterion: Some(3),
        description: "kernel mass, scaling law and the s = 1 Gaussian kernel",
        statement: "p_t has unit mass, p_t(x) = t^{-d/2s} p_1(t^{-1/2s} x), p_t is Gaussian for s = 1",
        defaults: linear::kernel_defaults,
        run: linear::kernel_identities,
    },
    Experiment {
        name: "gradient-semigroup-bound",
        criterion: Some(4),
        description: "L2 amplification of the smoothed directional derivative",
        statement: "|grad_z P_t|_{L2->L2} <= c_s t^{-1/2s}",
        defaults: linear::gradient_defaults,
        run: linear::gradient_bound,
    },
    Experiment {
        name: "picard-contraction",
        criterion: Some(5),
        description: "Picard residual ratios against the Bielecki contraction constant",
        statement: "the Duhamel map contracts with rate rho(K) in the Bielecki norm for K > K0",
        defaults: solver::contraction_defaults,
        run: solver::contraction,
    },
    Experiment {
        name: "moment-monotonicity",
        criterion: Some(6),
        description: "E|u(t)|^p along cut-off Burgers flows",
        statement: "t -> E|u(t)|^p is nonincreasing for p >= 1",
        defaults: stats::moments_defaults,
        run: stats::moments,
    },
    Experiment {
        name: "energy-dissipation",
        criterion: Some(7),
        description: "energy identity, linear oracle first, then tanh and cut-off Burgers",
        statement: "d/dt E u^2 = -2 E |(-Delta)^{s/2} u|^2",
        defaults: stats::dissipation_defaults,
        run: stats::dissipation,
    },
    Experiment {
        name: "derivative-orthogonality",
        criterion: Some(8),
        description: "vanishing of E[grad_z f(u) g(u)] for homogeneous fields",
        statement: "E[(grad_z f(u))(x) g(u(x))] = 0",
        defaults: stats::orthogonality_defaults,
        run: stats::orthogonality,
    },
    Experiment {
        name: "cutoff-ladder-cauchy",
        criterion: Some(9),
        description: "distances between solutions along the cut-off ladder",
        statement: "solutions with flux f(h_n) form a Cauchy family as n grows",
        defaults: solver::ladder_defaults,
        run: solver::ladder,
    },
    Experiment {
        name: "stroock-varopoulos",
        criterion: Some(10),
        description: "Dirichlet-form slack of the Stroock-Varopoulos inequality",
        statement: "E (I-P_h)(sgn w |w|^a) sgn w |w|^b >= ab E (I-P_h)|w| |w| for a + b = 2",
        defaults: stats::stroock_defaults,
        run: stats::stroock_varopoulos,
    },
    Experiment {
        name: "solver-cross-validation",
        criterion: Some(11),
        description: "Picard against marching, and second-order convergence of marching",
        statement: "both solvers approximate the same mild solution",
        defaults: solver::cross_defaults,
        run: solver::cross_validation,
    },
    Experiment {
        name: "replay-determinism",
        criterion: Some(12),
        description: "byte-identical tables across worker counts",
        statement: "(config, seed) determines every output",
        defaults: determinism::defaults,
        run: determinism::run,
    },
    Experiment {
        name: "zero-nonlinearity",
        criterion: None,
        description: "Picard iteration with f = 0 against the semigroup",
        statement: "with f = 0 the mild solution is P_t u0",
        defaults: solver::zero_defaults,
        run: solver::zero_nonlinearity,
    },
];

/// Looks up an experiment; unknown names report the closest registered one.
pub fn find(name: &str) -> Result<&'static Experiment> {
    if let Some(e) = EXPERIMENTS.iter().find(|e| e.name == name) {
        return Ok(e);
    }
    let nearest = EXPERIMENTS
        .iter()
        .map(|e| (strsim::levenshtein(name, e.name), e.name))
        .min()
        .map(|(_, n)| n)
        .unwrap_or("");
    Err(Error::Config(format!(
        "unknown experiment \"{name}\"; did you mean \"{nearest}\"? (see `fracflow list`)"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_criterion_has_exactly_one_experiment() {
        for c in 1..=12u8 {
            let n = EXPERIMENTS.iter().filter(|e| e.criterion == Some(c)).count();
            assert_eq!(n, 1, "criterion {c}");
        }
        let mut names: Vec<_> = EXPERIMENTS.iter().map(|e| e.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), EXPERIMENTS.len());
    }

    #[test]
    fn unknown_name_suggests_nearest() {
        let Err(Error::Config(msg)) = find("moment-monotonicty") else {
            panic!("expected a configuration error");
        };
        assert!(msg.contains("\"moment-monotonicity\""), "{msg}");
    }

    #[test]
    fn defaults_name_their_experiment() {
        for e in EXPERIMENTS {
            assert_eq!((e.defaults)().experiment, e.name);
        }
    }
}
