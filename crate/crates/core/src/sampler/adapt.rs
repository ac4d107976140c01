/// Robbins–Monro tuned proposal standard deviation.
///
/// After the `s`-th use the log step size moves by `s^(-0.8) (alpha - target)`,
/// where `alpha` is the realized acceptance probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveScale {
    log_eta: f64,
    step: u64,
    target: f64,
}

pub const ADAPTATION_EXPONENT: f64 = 0.8;

impl AdaptiveScale {
    pub fn new(eta: f64, target: f64) -> Self {
        assert!(eta > 0.0, "proposal scale must be positive");
        AdaptiveScale { log_eta: eta.ln(), step: 1, target }
    }

    pub fn eta(&self) -> f64 {
        self.log_eta.exp()
    }

    pub fn log_eta(&self) -> f64 {
        self.log_eta
    }

    /// Number of the next adaptation step.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn adapt(&mut self, accept_prob: f64) {
        debug_assert!((0.0..=1.0).contains(&accept_prob));
        let gain = (self.step as f64).powf(-ADAPTATION_EXPONENT);
        self.log_eta += gain * (accept_prob - self.target);
        self.step += 1;
    }
}
