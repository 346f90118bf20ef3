use serde::{Deserialize, Serialize};

/// Parameter update rule shared by all trainable models.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    /// Plain full-batch gradient descent: `p -= lr * g`.
    #[default]
    GradientDescent,
    /// Gradient descent with heavy-ball momentum.
    Momentum { beta: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter optimizer state, one slot per parameter tensor.
#[derive(Clone, Debug)]
pub(crate) struct OptimizerState {
    rule: Optimizer,
    lr: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub(crate) fn new(rule: Optimizer, lr: f64, sizes: &[usize]) -> Self {
        let slots = |on: bool| {
            if on {
                sizes.iter().map(|&n| vec![0.0; n]).collect()
            } else {
                Vec::new()
            }
        };
        Self {
            rule,
            lr,
            step: 0,
            first: slots(!matches!(rule, Optimizer::GradientDescent)),
            second: slots(matches!(rule, Optimizer::Adam { .. })),
        }
    }

    /// Applies one update. `params[i]` and `grads[i]` must have equal length.
    pub(crate) fn apply(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        debug_assert_eq!(params.len(), grads.len());
        self.step += 1;
        let lr = self.lr;
        match self.rule {
            Optimizer::GradientDescent => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, gv) in p.iter_mut().zip(g.iter()) {
                        *pv -= lr * gv;
                    }
                }
            }
            Optimizer::Momentum { beta } => {
                for ((p, g), vel) in params.iter_mut().zip(grads).zip(&mut self.first) {
                    for ((pv, gv), v) in p.iter_mut().zip(g.iter()).zip(vel.iter_mut()) {
                        *v = beta * *v + gv;
                        *pv -= lr * *v;
                    }
                }
            }
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    for (((pv, gv), mv), vv) in
                        p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut())
                    {
                        *mv = beta1 * *mv + (1.0 - beta1) * gv;
                        *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                        *pv -= lr * (*mv / c1) / ((*vv / c2).sqrt() + epsilon);
                    }
                }
            }
        }
    }
}
