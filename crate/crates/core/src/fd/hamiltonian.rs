//! Monotone numerical Hamiltonian: upwinding for convection, Godunov for the
//! normal-propagation term.

/// Upwind choice of the one-sided derivative for velocity component `v`.
/// `v == 0` takes the minus side.
#[inline(always)]
pub fn upwind(minus: f64, plus: f64, v: f64) -> f64 {
    if v < 0.0 {
        plus
    } else {
        minus
    }
}

/// Godunov selection of the squared one-sided derivative.
#[inline(always)]
pub fn godunov_sq(minus: f64, plus: f64, v: f64, s_l: f64) -> f64 {
    if v > s_l {
        minus * minus
    } else if v < -s_l {
        plus * plus
    } else {
        let a = minus.max(0.0);
        let b = plus.min(0.0);
        (a * a).max(b * b)
    }
}

/// `H = V1 G_x^vel + V2 G_y^vel + S_l sqrt((G_x^nor)^2 + (G_y^nor)^2)`
///
/// Arguments are one-sided derivatives of the full level-set function
/// (periodic part plus `P`).
#[inline(always)]
pub fn godunov_hamiltonian(
    gx_m: f64,
    gx_p: f64,
    gy_m: f64,
    gy_p: f64,
    v1: f64,
    v2: f64,
    s_l: f64,
) -> f64 {
    let conv = v1 * upwind(gx_m, gx_p, v1) + v2 * upwind(gy_m, gy_p, v2);
    let nor = godunov_sq(gx_m, gx_p, v1, s_l) + godunov_sq(gy_m, gy_p, v2, s_l);
    conv + s_l * nor.sqrt()
}

/// Godunov flux of the pure normal term `S_l |∇G|` (no convection).
#[inline(always)]
pub fn godunov_normal(gx_m: f64, gx_p: f64, gy_m: f64, gy_p: f64, s_l: f64) -> f64 {
    s_l * (godunov_sq(gx_m, gx_p, 0.0, s_l) + godunov_sq(gy_m, gy_p, 0.0, s_l)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fast_flow_uses_minus_side_squared() {
        // V1 = 2 > S_l = 1: (Gx^-)^2 regardless of the plus side.
        assert!((godunov_sq(-0.7, 5.0, 2.0, 1.0) - 0.49).abs() < 1e-15);
        let h = godunov_hamiltonian(-0.7, 5.0, 0.0, 0.0, 2.0, 0.0, 1.0);
        assert!((h - (2.0 * -0.7 + 0.7)).abs() < 1e-15);
    }

    #[test]
    fn expansion_fan_gives_zero() {
        let h = godunov_hamiltonian(-1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_eq!(h, 0.0);
    }

    #[test]
    fn slow_flow_hand_value() {
        let h = godunov_hamiltonian(1.0, 1.0, 0.0, 0.0, 0.5, 0.0, 1.0);
        assert!((h - 1.5).abs() < 1e-15);
    }

    #[test]
    fn zero_velocity_takes_minus_side() {
        assert_eq!(upwind(1.0, 2.0, 0.0), 1.0);
        assert_eq!(upwind(1.0, 2.0, -0.0), 1.0);
    }

    #[test]
    fn monotone_in_one_sided_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s_l = 1.0;
        for _ in 0..20_000 {
            let mut args: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
            let v1 = rng.gen_range(-4.0..4.0);
            let v2 = rng.gen_range(-4.0..4.0);
            let h0 = godunov_hamiltonian(args[0], args[1], args[2], args[3], v1, v2, s_l);
            let delta = rng.gen_range(1e-6..0.5);
            for (k, sign) in [(0usize, 1.0), (1, -1.0), (2, 1.0), (3, -1.0)] {
                let saved = args[k];
                args[k] += delta;
                let h1 = godunov_hamiltonian(args[0], args[1], args[2], args[3], v1, v2, s_l);
                args[k] = saved;
                // nondecreasing in minus-side arguments, nonincreasing in plus-side
                assert!(sign * (h1 - h0) >= -1e-12, "arg {k}: {h0} -> {h1}");
            }
        }
    }

    #[test]
    fn consistent_with_exact_hamiltonian_on_smooth_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let gx: f64 = rng.gen_range(-2.0..2.0);
            let gy: f64 = rng.gen_range(-2.0..2.0);
            let v1 = rng.gen_range(-3.0..3.0);
            let v2 = rng.gen_range(-3.0..3.0);
            let h = godunov_hamiltonian(gx, gx, gy, gy, v1, v2, 0.8);
            let exact = v1 * gx + v2 * gy + 0.8 * gx.hypot(gy);
            assert!((h - exact).abs() < 1e-12);
        }
    }
}
