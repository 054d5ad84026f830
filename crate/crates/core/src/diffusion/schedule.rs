//! DDPM noise schedules.

use crate::error::{Error, Result};

/// Variance schedule and the derived quantities used by the forward process
/// and the reverse (posterior) update. Timesteps are 1-based: `beta(1)` is
/// the least-noisy step and `beta(T)` the noisiest; `alpha_bar(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>, // indexed 0..=T
}

impl NoiseSchedule {
    /// Linear schedule from `beta_min` at t=1 to `beta_max` at t=T.
    pub fn linear(timesteps: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if timesteps == 0 {
            return Err(Error::InvalidParameter("timesteps must be positive".into()));
        }
        let betas: Vec<f64> = (0..timesteps)
            .map(|i| {
                if timesteps == 1 {
                    beta_min
                } else {
                    beta_min + (beta_max - beta_min) * i as f64 / (timesteps - 1) as f64
                }
            })
            .collect();
        Self::from_betas(betas)
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidParameter("empty beta schedule".into()));
        }
        let mut alpha_bars = Vec::with_capacity(betas.len() + 1);
        alpha_bars.push(1.0);
        let mut prod = 1.0;
        for (i, &b) in betas.iter().enumerate() {
            if !(0.0..1.0).contains(&b) || b == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "beta[{i}] = {b} outside (0, 1)"
                )));
            }
            prod *= 1.0 - b;
            alpha_bars.push(prod);
        }
        Ok(Self { betas, alpha_bars })
    }

    pub fn timesteps(&self) -> usize {
        self.betas.len()
    }

    /// `beta_t`, 1-based.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    /// Cumulative signal fraction `alpha_bar_t` for `t` in `0..=T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    /// Posterior standard deviation `sigma_t`. Exactly zero at t = 1.
    pub fn sigma(&self, t: usize) -> f64 {
        let beta_tilde =
            (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t)) * self.beta(t);
        beta_tilde.sqrt()
    }

    /// Coefficients `(c_x0, c_xt)` of the posterior mean
    /// `mu = c_x0 * x0_pred + c_xt * x_t` at step `t`.
    pub fn posterior_coefficients(&self, t: usize) -> (f64, f64) {
        let ab_prev = self.alpha_bar(t - 1);
        let ab = self.alpha_bar(t);
        let beta = self.beta(t);
        let alpha = 1.0 - beta;
        let c_x0 = ab_prev.sqrt() * beta / (1.0 - ab);
        let c_xt = alpha.sqrt() * (1.0 - ab_prev) / (1.0 - ab);
        (c_x0, c_xt)
    }

    /// Coarsen to `steps` evenly spaced timesteps. Returns the coarse
    /// schedule together with the original timestep each coarse step stands
    /// for (used for the denoiser's time conditioning). `steps == timesteps`
    /// returns the schedule unchanged.
    pub fn respaced(&self, steps: usize) -> Result<(NoiseSchedule, Vec<usize>)> {
        let total = self.timesteps();
        if steps == 0 || steps > total {
            return Err(Error::InvalidParameter(format!(
                "steps must be in 1..={total}, got {steps}"
            )));
        }
        if steps == total {
            return Ok((self.clone(), (1..=total).collect()));
        }
        let mut originals = Vec::with_capacity(steps);
        let mut betas = Vec::with_capacity(steps);
        let mut prev_ab = 1.0;
        for i in 1..=steps {
            // Even spacing with the last coarse step pinned at T.
            let t = (i * total).div_euclid(steps);
            let ab = self.alpha_bar(t);
            betas.push(1.0 - ab / prev_ab);
            prev_ab = ab;
            originals.push(t);
        }
        Ok((NoiseSchedule::from_betas(betas)?, originals))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule() -> NoiseSchedule {
        NoiseSchedule::linear(200, 1e-4, 0.02).unwrap()
    }

    #[test]
    fn alpha_bar_strictly_decreases() {
        let s = schedule();
        for t in 1..=s.timesteps() {
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            assert!(s.alpha_bar(t) > 0.0);
        }
    }

    #[test]
    fn sigma_is_zero_at_step_one_and_increases() {
        let s = schedule();
        assert_eq!(s.sigma(1), 0.0);
        for t in 2..=s.timesteps() {
            assert!(s.sigma(t) > s.sigma(t - 1), "sigma not increasing at {t}");
        }
    }

    #[test]
    fn posterior_coefficients_match_closed_form_mid_schedule() {
        let s = schedule();
        let t = 100;
        let (c0, ct) = s.posterior_coefficients(t);
        let ab_prev = s.alpha_bar(t - 1);
        let ab = s.alpha_bar(t);
        let beta = s.beta(t);
        assert!((c0 - ab_prev.sqrt() * beta / (1.0 - ab)).abs() < 1e-15);
        assert!((ct - (1.0 - beta).sqrt() * (1.0 - ab_prev) / (1.0 - ab)).abs() < 1e-15);
        // Near (but not exactly) an affine combination.
        assert!((c0 + ct - 1.0).abs() < 0.05);
    }

    #[test]
    fn rejects_invalid_betas() {
        assert!(NoiseSchedule::from_betas(vec![0.0]).is_err());
        assert!(NoiseSchedule::from_betas(vec![1.0]).is_err());
        assert!(NoiseSchedule::from_betas(vec![]).is_err());
        assert!(NoiseSchedule::linear(0, 1e-4, 0.02).is_err());
    }

    #[test]
    fn respacing_preserves_terminal_noise_level() {
        let s = schedule();
        let (coarse, originals) = s.respaced(50).unwrap();
        assert_eq!(coarse.timesteps(), 50);
        assert_eq!(originals.len(), 50);
        assert_eq!(*originals.last().unwrap(), 200);
        assert!((coarse.alpha_bar(50) - s.alpha_bar(200)).abs() < 1e-12);
        // Identity respacing returns the schedule unchanged.
        let (same, originals) = s.respaced(200).unwrap();
        assert_eq!(same, s);
        assert_eq!(originals[0], 1);
    }
}
