//! Water-filling power allocation `p_i = (μ − 1/λ_i)^+`, `Σ p_i = P`.

#[derive(Debug, Clone, PartialEq)]
pub struct Waterfill {
    pub powers: Vec<f64>,
    /// Water level μ; zero when nothing is active.
    pub level: f64,
}

/// Exact water-filling by the sorted active-set rule. Channels with
/// `λ ≤ 0` (or non-finite) never receive power.
pub fn waterfill(lambdas: &[f64], power: f64) -> Waterfill {
    let mut powers = vec![0.0; lambdas.len()];
    let mut order: Vec<usize> = (0..lambdas.len())
        .filter(|&i| lambdas[i] > 0.0 && lambdas[i].is_finite())
        .collect();
    if order.is_empty() || !(power > 0.0) {
        return Waterfill { powers, level: 0.0 };
    }
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]).then(a.cmp(&b)));
    // Largest active set whose water level clears the weakest member's floor.
    let mut inv_sum = 0.0;
    let mut level = 0.0;
    let mut active = 0;
    for (k, &i) in order.iter().enumerate() {
        let floor = 1.0 / lambdas[i];
        let candidate = (power + inv_sum + floor) / (k + 1) as f64;
        if candidate <= floor {
            break;
        }
        inv_sum += floor;
        level = candidate;
        active = k + 1;
    }
    let mut used = 0.0;
    for &i in &order[..active] {
        powers[i] = (level - 1.0 / lambdas[i]).max(0.0);
        used += powers[i];
    }
    // Remove rounding drift so the budget holds with equality.
    if used > 0.0 {
        let scale = power / used;
        for &i in &order[..active] {
            powers[i] *= scale;
        }
    }
    Waterfill { powers, level }
}
