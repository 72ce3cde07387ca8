//! Small numeric helpers shared across modules: angle wrapping and
//! order-independent reductions.

/// Wraps an angle in degrees into the half-open range `[-90, 90)`.
///
/// Values already inside the range are returned bit-for-bit unchanged, which
/// makes the operation idempotent.
pub fn wrap_half_turn(deg: f64) -> f64 {
    if (-90.0..90.0).contains(&deg) {
        return deg;
    }
    let mut out = deg - 180.0 * ((deg + 90.0) / 180.0).floor();
    if out >= 90.0 {
        out -= 180.0;
    }
    if out < -90.0 {
        out += 180.0;
    }
    out
}

/// Sum that does not depend on the order of `values`.
///
/// The inputs are sorted by total order and accumulated with Neumaier
/// compensation, so any permutation (or any parallel split that is gathered
/// back into one slice) produces the same bits.
pub fn stable_sum(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in sorted {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Arithmetic mean via [`stable_sum`]. `None` for an empty slice.
pub fn stable_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(stable_sum(values) / values.len() as f64)
}

/// Mean and population standard deviation. `None` for an empty slice.
pub fn mean_and_pop_std(values: &[f64]) -> Option<(f64, f64)> {
    let mean = stable_mean(values)?;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = stable_sum(&sq) / values.len() as f64;
    Some((mean, var.sqrt()))
}
