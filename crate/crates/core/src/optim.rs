//! Compass (pattern) search for maximising functions of periodic phases.

/// Options for [`PatternSearch::maximize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSearch {
    pub initial_step: f64,
    pub min_step: f64,
    pub shrink: f64,
    pub max_evals: usize,
}

impl Default for PatternSearch {
    fn default() -> Self {
        Self {
            initial_step: 0.05,
            min_step: 1e-6,
            shrink: 0.5,
            max_evals: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

impl PatternSearch {
    /// Polls `±step` along every coordinate, moving on the first improvement.
    /// A successful move is repeated with a doubled step while it keeps
    /// improving; a full sweep without improvement shrinks the step.
    pub fn maximize(&self, x0: Vec<f64>, mut f: impl FnMut(&[f64]) -> f64) -> Optimum {
        let mut x = x0;
        let mut best = f(&x);
        let mut evals = 1;
        let mut step = self.initial_step;
        let mut trial = x.clone();
        while step >= self.min_step && evals < self.max_evals {
            let mut improved = false;
            for i in 0..x.len() {
                for dir in [1.0, -1.0] {
                    trial.copy_from_slice(&x);
                    trial[i] += dir * step;
                    let v = f(&trial);
                    evals += 1;
                    if v > best {
                        best = v;
                        x.copy_from_slice(&trial);
                        improved = true;
                        // extend along the successful direction
                        let mut reach = 2.0 * step;
                        while evals < self.max_evals {
                            trial.copy_from_slice(&x);
                            trial[i] += dir * reach;
                            let v = f(&trial);
                            evals += 1;
                            if v > best {
                                best = v;
                                x.copy_from_slice(&trial);
                                reach *= 2.0;
                            } else {
                                break;
                            }
                        }
                        break;
                    }
                }
            }
            if !improved {
                step *= self.shrink;
            }
        }
        Optimum {
            x,
            value: best,
            evals,
        }
    }
}
