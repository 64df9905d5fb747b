use crate::scalar::Real;

/// `L(z) = Σ p_j z_j`.
pub fn weighted_mass<T: Real>(z: &[T], p: &[T]) -> T {
    z.iter().zip(p).map(|(&a, &b)| a * b).sum()
}

/// `𝓛(z) = Σ (p_j/β_j) z_j`.
pub fn adjusted_mass<T: Real>(z: &[T], p: &[T], beta: &[T]) -> T {
    z.iter().zip(p).zip(beta).map(|((&a, &b), &c)| a * b / c).sum()
}

/// `ρ = Σ α_j / (β_j K)`.
pub fn load<T: Real>(alpha: &[T], beta: &[T], servers: usize) -> T {
    let k = T::from_usize(servers).expect("server count");
    alpha.iter().zip(beta).map(|(&a, &b)| a / (b * k)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_arithmetic() {
        assert!((weighted_mass(&[2.0, 3.0], &[0.25, 0.75]) - 2.75f64).abs() < 1e-15);
        assert!((adjusted_mass(&[2.0, 3.0], &[0.25, 0.75], &[1.0, 3.0]) - 1.25f64).abs() < 1e-15);
        assert!((load(&[3.0, 1.0], &[2.0, 1.0], 2) - 1.25f64).abs() < 1e-15);
        assert!((load(&[3.0f32, 1.0], &[2.0, 1.0], 2) - 1.25f32).abs() < 1e-6);
    }
}
