use crate::model::Params;
use serde::Deserialize;

/// Update rule. ADADELTA defaults follow Zeiler (2012): decay 0.95,
/// epsilon 1e-6, unit learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OptimizerConfig {
    Adadelta {
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_rate")]
        learning_rate: f64,
    },
    Sgd {
        learning_rate: f64,
    },
}

fn default_rho() -> f64 {
    0.95
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_rate() -> f64 {
    1.0
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adadelta {
            rho: default_rho(),
            epsilon: default_epsilon(),
            learning_rate: default_rate(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Adadelta {
        rho: f64,
        epsilon: f64,
        learning_rate: f64,
        /// Running mean of squared gradients.
        grad_sq: Params,
        /// Running mean of squared updates.
        delta_sq: Params,
    },
    Sgd {
        learning_rate: f64,
    },
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, like: &Params) -> Self {
        match config {
            OptimizerConfig::Adadelta {
                rho,
                epsilon,
                learning_rate,
            } => Optimizer::Adadelta {
                rho,
                epsilon,
                learning_rate,
                grad_sq: like.zeros_like(),
                delta_sq: like.zeros_like(),
            },
            OptimizerConfig::Sgd { learning_rate } => Optimizer::Sgd { learning_rate },
        }
    }

    /// One descent step along `grad`.
    pub fn step(&mut self, params: &mut Params, grad: &Params) {
        match self {
            Optimizer::Sgd { learning_rate } => params.add_scaled(-*learning_rate, grad),
            Optimizer::Adadelta {
                rho,
                epsilon,
                learning_rate,
                grad_sq,
                delta_sq,
            } => {
                let (rho, eps, lr) = (*rho, *epsilon, *learning_rate);
                let blocks = params
                    .blocks_mut()
                    .into_iter()
                    .zip(grad.blocks())
                    .zip(grad_sq.blocks_mut())
                    .zip(delta_sq.blocks_mut());
                for ((((_, p), (_, g)), (_, eg)), (_, ed)) in blocks {
                    for i in 0..p.len() {
                        eg[i] = rho * eg[i] + (1.0 - rho) * g[i] * g[i];
                        let delta = -((ed[i] + eps).sqrt() / (eg[i] + eps).sqrt()) * g[i];
                        ed[i] = rho * ed[i] + (1.0 - rho) * delta * delta;
                        p[i] += lr * delta;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;

    fn params() -> Params {
        Params::uniform(
            Dims {
                vocab: 4,
                embed: 2,
                hidden: 2,
                arity: 1,
            },
            1.0,
            3,
        )
    }

    #[test]
    fn first_adadelta_step_matches_formula() {
        let mut p = params();
        let start = p.clone();
        let g = params();
        let mut opt = Optimizer::new(OptimizerConfig::default(), &p);
        opt.step(&mut p, &g);
        let (gv, sv, pv) = (
            g.blocks()[0].1[0],
            start.blocks()[0].1[0],
            p.blocks()[0].1[0],
        );
        let eg = 0.05 * gv * gv;
        let expected = sv - (1e-6f64).sqrt() / (eg + 1e-6).sqrt() * gv;
        assert!((pv - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_leaves_parameters() {
        let mut p = params();
        let start = p.clone();
        let mut opt = Optimizer::new(
            OptimizerConfig::Adadelta {
                rho: 0.95,
                epsilon: 1e-6,
                learning_rate: 0.0,
            },
            &p,
        );
        opt.step(&mut p, &params());
        assert_eq!(p, start);
        let mut sgd = Optimizer::new(OptimizerConfig::Sgd { learning_rate: 0.0 }, &p);
        sgd.step(&mut p, &params());
        assert_eq!(p, start);
    }

    #[test]
    fn config_parses_from_toml() {
        let c: OptimizerConfig = toml::from_str("kind = \"adadelta\"\nrho = 0.9").unwrap();
        assert_eq!(
            c,
            OptimizerConfig::Adadelta {
                rho: 0.9,
                epsilon: 1e-6,
                learning_rate: 1.0
            }
        );
        let s: OptimizerConfig = toml::from_str("kind = \"sgd\"\nlearning_rate = 0.1").unwrap();
        assert_eq!(s, OptimizerConfig::Sgd { learning_rate: 0.1 });
    }
}
