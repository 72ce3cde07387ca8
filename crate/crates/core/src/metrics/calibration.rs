//! Deterministic Gaussian score model for checking the ROC harness.

use statrs::distribution::{ContinuousCDF, Normal};

use super::roc::MatchTrial;

/// Trials whose scores are the quantiles `(i + 0.5) / n` of two unit-variance
/// Gaussians: impostors centred at 0 and genuine ones shifted so that, at the
/// threshold giving FAR `far`, the true accept rate is `target_tar`.
///
/// Using quantiles instead of random draws makes the empirical ROC converge
/// to the model curve without sampling noise.
pub fn gaussian_calibration_trials(target_tar: f64, far: f64, n_genuine: usize, n_impostor: usize) -> Vec<MatchTrial> {
    let std = Normal::standard();
    let threshold = std.inverse_cdf(1.0 - far);
    let shift = threshold - std.inverse_cdf(1.0 - target_tar);
    let quantile = |i: usize, n: usize| std.inverse_cdf((i as f64 + 0.5) / n as f64);
    let genuine = (0..n_genuine).map(|i| MatchTrial {
        probe: format!("g{i}"),
        gallery: format!("g{i}'"),
        genuine: true,
        score: shift + quantile(i, n_genuine),
        failed: false,
    });
    let impostor = (0..n_impostor).map(|i| MatchTrial {
        probe: format!("i{i}"),
        gallery: format!("i{i}'"),
        genuine: false,
        score: quantile(i, n_impostor),
        failed: false,
    });
    genuine.chain(impostor).collect()
}
