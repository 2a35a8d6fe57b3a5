use std::f64::consts::{PI, TAU};

use mmw_mec::harness::{spearman, Flags};
use mmw_mec::latency::{timeline_latency, total_latency, DelayCoeffs};
use mmw_mec::linalg::{phase_matrix, random_gaussian};
use mmw_mec::offload::{binary_rho, optimal_rho};
use mmw_mec::pa::{h_of_vout, pa_power, total_pa_power};
use mmw_mec::pcccp::{constraint_excess, scale_to_constraints, waterfill};
use mmw_mec::ssca::{ssca_step, AnalogSet, SurrogateState, Weights};
use mmw_mec::system::{db_to_linear, linear_to_db, quantize_phases, DbScale, RealMatrix, SystemDims};
use mmw_mec::channel::ChannelTriple;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn coeff() -> impl Strategy<Value = f64> {
    (-3.0f64..2.0).prop_map(|e| 10f64.powf(e))
}

fn coeffs() -> impl Strategy<Value = DelayCoeffs> {
    (coeff(), coeff(), coeff(), coeff(), coeff()).prop_map(|(a, b, c, d, e)| DelayCoeffs::new(a, b, c, d, e))
}

proptest! {
    #[test]
    fn closed_form_latency_matches_timeline(k in coeffs(), rho in 0.0f64..=1.0) {
        let a = total_latency(rho, &k).unwrap();
        let b = timeline_latency(rho, &k).unwrap();
        prop_assert!((a.total - b.total).abs() <= 1e-12 * b.total);
        prop_assert_eq!(a.case, b.case);
    }

    #[test]
    fn optimal_ratio_is_global(k in coeffs()) {
        let s = optimal_rho(&k).unwrap();
        prop_assert!((0.0..=1.0).contains(&s.rho));
        for i in 0..=1000 {
            let t = total_latency(i as f64 / 1000.0, &k).unwrap().total;
            prop_assert!(s.total_latency <= t + 1e-12 * t);
        }
        prop_assert!(s.total_latency <= binary_rho(&k).unwrap().total_latency);
    }

    #[test]
    fn latency_never_decreases_with_slower_links(k in coeffs(), rho in 0.0f64..=1.0, f in 1.0f64..3.0) {
        let slower = DelayCoeffs::new(k.k_local, k.k_edge, k.k_up * f, k.k_down * f, k.k_d2d * f);
        prop_assert!(total_latency(rho, &slower).unwrap().total >= total_latency(rho, &k).unwrap().total);
    }

    #[test]
    fn decibel_round_trip(x in -150.0f64..60.0) {
        for scale in [DbScale::PowerRatio, DbScale::Milliwatt] {
            let back = linear_to_db(db_to_linear(x, scale).unwrap(), scale).unwrap();
            prop_assert!((back - x).abs() < 1e-9);
        }
    }

    #[test]
    fn quantized_phases_lie_on_grid(t in -20.0f64..20.0, bits in 1u32..10) {
        let m = RealMatrix::from_element(1, 1, t);
        let q = quantize_phases(&m, bits).unwrap();
        let step = TAU / (1u64 << bits) as f64;
        let v = q[(0, 0)];
        prop_assert!((0.0..TAU).contains(&v));
        let k = v / step;
        prop_assert!((k - k.round()).abs() < 1e-9);
        // circular distance at most half a step
        let d = (t - v).rem_euclid(TAU);
        prop_assert!(d.min(TAU - d) <= step / 2.0 + 1e-12);
        prop_assert_eq!(quantize_phases(&q, bits).unwrap(), q);
    }

    #[test]
    fn pa_consumption_properties(pm in 0.01f64..10.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (pl, ph) = (pa_power(lo * pm, pm).unwrap(), pa_power(hi * pm, pm).unwrap());
        prop_assert!(pl <= ph);
        prop_assert!(ph <= 4.0 * pm / PI * (1.0 + 1e-15));
        prop_assert!(pl >= lo * pm * (1.0 - 1e-15));
        let v = (a * pm).sqrt();
        prop_assert!((h_of_vout(v, pm).unwrap() - pa_power(v * v, pm).unwrap()).abs() <= 1e-14 * pm.max(1.0));
    }

    #[test]
    fn waterfill_spends_exactly_the_power(gains in prop::collection::vec(0.0f64..10.0, 1..6), power in 0.0f64..5.0) {
        let p = waterfill(&gains, power);
        prop_assert_eq!(p.len(), gains.len());
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        if gains.iter().any(|&g| g > 0.0) {
            prop_assert!((p.iter().sum::<f64>() - power).abs() <= 1e-9 * power.max(1.0));
        }
        for (i, &g) in gains.iter().enumerate() {
            if g == 0.0 {
                prop_assert_eq!(p[i], 0.0);
            }
        }
    }

    #[test]
    fn scaled_precoders_meet_constraints(seed in 0u64..1000, gain in 0.01f64..100.0, budget in 0.05f64..5.0, pm in 0.1f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = phase_matrix(&RealMatrix::from_fn(6, 2, |i, j| (i * 7 + j * 3) as f64 * 0.37));
        let w = random_gaussian(&mut rng, 2, 2, gain);
        let (scaled, s) = scale_to_constraints(&f, &w, budget, pm);
        prop_assert!((0.0..=1.0).contains(&s));
        let (total, per_pa) = constraint_excess(&f, &scaled, budget, pm);
        prop_assert!(total <= 1e-9 && per_pa <= 1e-12);
        prop_assert!(total_pa_power(&f, &scaled, pm * (1.0 + 1e-12)).unwrap() <= budget * (1.0 + 1e-9));
    }

    #[test]
    fn analog_phases_stay_unit_modulus(seed in 0u64..200, steps in 1usize..20) {
        let d = SystemDims::new(4, 2, 2, 2, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = AnalogSet::random(&mut rng, &d);
        let mut s = SurrogateState::new(&d, 0.5).unwrap();
        for _ in 0..steps {
            let ch = ChannelTriple {
                h1: random_gaussian(&mut rng, 4, 2, 1.0),
                h2: random_gaussian(&mut rng, 2, 4, 1.0),
                h3: random_gaussian(&mut rng, 2, 2, 1.0),
                path_loss: [1.0; 3],
            };
            let (next, st, _) = ssca_step(&a, &s, &ch, &Weights::uniform(), [0.1; 3], 0.5, 0.5).unwrap();
            a = next;
            s = st;
        }
        let m = a.matrices();
        for block in [&m.bs_rx, &m.bs_tx, &m.user_a, &m.user_b] {
            for z in block.iter() {
                prop_assert!((z.norm() - 1.0).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn flags_text_round_trip(bits in 0u8..32) {
        let mut f = Flags::NONE;
        for (i, flag) in [Flags::NOT_CONVERGED, Flags::KEPT_INITIAL, Flags::DEGENERATE, Flags::GRID_FALLBACK, Flags::FAILED].into_iter().enumerate() {
            if bits & (1 << i) != 0 {
                f.insert(flag);
            }
        }
        prop_assert_eq!(f.to_string().parse::<Flags>().unwrap(), f);
    }

    #[test]
    fn rank_correlation_bounds(x in prop::collection::vec(-10.0f64..10.0, 3..12), shift in -5.0f64..5.0) {
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + shift).collect();
        if let Ok(r) = spearman(&x, &y) {
            prop_assert!((r - 1.0).abs() < 1e-12);
            let neg: Vec<f64> = y.iter().map(|v| -v).collect();
            prop_assert!((spearman(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        }
    }
}
