use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use beamsynth::array::{build_steering_matrix, compute_pattern, steering_vector};
use beamsynth::baselines::{dft_codebook_abf, inner, ls_recover, mrt, omp_hybrid, OmpDictionary, PhasePattern};
use beamsynth::beamformer::analog_from_hybrid;
use beamsynth::channel::generate_channels;
use beamsynth::eval::spectral_efficiency;
use beamsynth::objective::composite_loss;
use beamsynth::pattern::{make_target, segment_regions};
use beamsynth::rng::{complex_gaussian, rng_for, unit_complex_vector};
use beamsynth::synthesis::{synthesize_direct, SynthesisConfig};
use beamsynth::{
    AngleGrid, Architecture, ArrayConfig, BeamPattern, Beamformer, Channel, ChannelModelConfig, Complex64,
    SteeringMatrix, TargetShape, TargetSpec,
};

fn small_cfg() -> ArrayConfig {
    ArrayConfig::new(4, 4, 0.5, 1.0, 2).unwrap()
}

fn coarse_grid() -> Arc<AngleGrid> {
    Arc::new(AngleGrid::uniform((2.0, 178.0), (-88.0, 88.0), 4.0).unwrap())
}

fn arch() -> impl Strategy<Value = Architecture> {
    prop_oneof![
        Just(Architecture::Digital),
        Just(Architecture::Analog),
        Just(Architecture::Hybrid)
    ]
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn random_channel(seed: u64, n_t: usize) -> Channel {
    let mut rng = rng_for(seed, 3);
    Channel::new((0..n_t).map(|_| complex_gaussian(&mut rng)).collect()).unwrap()
}

fn rotate(bf: &Beamformer, psi: f64) -> Beamformer {
    match bf {
        Beamformer::Digital { w } => Beamformer::Digital {
            w: w.iter().map(|z| z * Complex64::cis(psi)).collect(),
        },
        Beamformer::Analog { phases } => Beamformer::Analog {
            phases: phases.iter().map(|p| p + psi).collect(),
        },
        Beamformer::Hybrid { phi_rf, w_bb } => Beamformer::Hybrid {
            phi_rf: phi_rf.iter().map(|p| p + psi).collect(),
            w_bb: w_bb.clone(),
        },
    }
}

fn default_steering() -> &'static SteeringMatrix {
    static A: OnceLock<SteeringMatrix> = OnceLock::new();
    A.get_or_init(|| build_steering_matrix(&ArrayConfig::default(), &AngleGrid::default()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pattern_ignores_global_phase_and_scale(seed in any::<u64>(), psi in 0.0..std::f64::consts::TAU, c in 0.01f64..100.0) {
        let cfg = small_cfg();
        let grid = coarse_grid();
        let f = unit_complex_vector(&mut rng_for(seed, 0), cfg.n_t());
        let base = compute_pattern(&cfg, &grid, &f).unwrap();
        let rotated: Vec<Complex64> = f.iter().map(|z| z * Complex64::cis(psi)).collect();
        let scaled: Vec<Complex64> = f.iter().map(|z| z * c).collect();
        for other in [compute_pattern(&cfg, &grid, &rotated).unwrap(), compute_pattern(&cfg, &grid, &scaled).unwrap()] {
            for (a, b) in base.values().iter().zip(other.values()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pattern_is_peak_normalized(seed in any::<u64>()) {
        let cfg = small_cfg();
        let f = unit_complex_vector(&mut rng_for(seed, 0), cfg.n_t());
        let p = compute_pattern(&cfg, &coarse_grid(), &f).unwrap();
        prop_assert_eq!(p.values()[p.peak_index()], 0.0);
        prop_assert!(p.values().iter().all(|&v| (-60.0..=0.0).contains(&v)));
    }

    #[test]
    fn steering_matrix_columns_are_steering_vectors(i in 0usize..45, j in 0usize..45) {
        let cfg = small_cfg();
        let grid = coarse_grid();
        let a = build_steering_matrix(&cfg, &grid).unwrap();
        let (zen, az) = (grid.zeniths()[i], grid.azimuths()[j]);
        let v = steering_vector(&cfg, zen, az);
        prop_assert_eq!(a.column(grid.index(i, j)), v.as_slice());
    }

    #[test]
    fn regions_are_idempotent_and_definitional(width in 5.0f64..40.0, height in 5.0f64..40.0, taper in 0.0f64..6.0, tri in any::<bool>()) {
        let shape = if tri {
            TargetShape::Triangular { base_deg: width, height_deg: height }
        } else {
            TargetShape::FlatTop { width_deg: width, height_deg: height }
        };
        let spec = TargetSpec { shape, center_zenith_deg: 90.0, center_azimuth_deg: 0.0, side_lobe_db: -25.0, taper_deg: taper };
        let target = make_target(&spec, &AngleGrid::default()).unwrap();
        let mask = segment_regions(&target);
        let copy = BeamPattern::from_db(target.shared_grid(), target.values().to_vec()).unwrap();
        prop_assert_eq!(&segment_regions(&copy), &mask);
        prop_assert!(mask.main_lobe().iter().all(|&c| target.values()[c] >= -10.0));
        prop_assert!(mask.side_lobe().iter().all(|&c| target.values()[c] < -20.0));
    }

    #[test]
    fn region_counts_scale_with_resolution(width in 6.0f64..30.0, height in 6.0f64..30.0) {
        let spec = TargetSpec {
            shape: TargetShape::FlatTop { width_deg: width, height_deg: height },
            center_zenith_deg: 90.0,
            center_azimuth_deg: 0.0,
            side_lobe_db: -25.0,
            taper_deg: 0.0,
        };
        let full = segment_regions(&make_target(&spec, &AngleGrid::uniform((1.0, 179.0), (-89.0, 89.0), 1.0).unwrap()).unwrap());
        let half = segment_regions(&make_target(&spec, &AngleGrid::uniform((1.0, 179.0), (-89.0, 89.0), 0.5).unwrap()).unwrap());
        // One boundary row or column of the fine grid on each side.
        let slack = 2.0 * (2.0 * (width + height) + 4.0);
        prop_assert!((half.n_ml() as f64 - 4.0 * full.n_ml() as f64).abs() <= slack);
    }

    #[test]
    fn composite_loss_is_permutation_invariant_within_regions(seed in any::<u64>(), shift in 0usize..1000) {
        let cfg = small_cfg();
        let grid = coarse_grid();
        let mut rng = rng_for(seed, 1);
        let target = compute_pattern(&cfg, &grid, &unit_complex_vector(&mut rng, cfg.n_t())).unwrap();
        let synth = compute_pattern(&cfg, &grid, &unit_complex_vector(&mut rng, cfg.n_t())).unwrap();
        let mask = segment_regions(&target);
        let base = composite_loss(&target, &synth, &mask).unwrap();
        // Rotate the (target, synth) pairs among the cells of each region.
        let (mut t, mut s) = (target.values().to_vec(), synth.values().to_vec());
        for cells in [mask.main_lobe(), mask.moderate(), mask.side_lobe()] {
            let n = cells.len();
            for (k, &c) in cells.iter().enumerate() {
                let from = cells[(k + shift) % n.max(1)];
                t[c] = target.values()[from];
                s[c] = synth.values()[from];
            }
        }
        let t = BeamPattern::from_db(target.shared_grid(), t).unwrap();
        let s = BeamPattern::from_db(target.shared_grid(), s).unwrap();
        let permuted = composite_loss(&t, &s, &segment_regions(&t)).unwrap();
        prop_assert!((permuted.total - base.total).abs() < 1e-9 * (1.0 + base.total));
    }

    #[test]
    fn side_lobe_loss_is_monotone(seed in any::<u64>(), pick in any::<prop::sample::Index>(), bump in 0.0f64..20.0) {
        let cfg = small_cfg();
        let grid = coarse_grid();
        let mut rng = rng_for(seed, 2);
        let target = compute_pattern(&cfg, &grid, &unit_complex_vector(&mut rng, cfg.n_t())).unwrap();
        let synth = compute_pattern(&cfg, &grid, &unit_complex_vector(&mut rng, cfg.n_t())).unwrap();
        let mask = segment_regions(&target);
        prop_assume!(mask.n_sl() > 0);
        let c = mask.side_lobe()[pick.index(mask.n_sl())];
        let mut raised = synth.values().to_vec();
        prop_assume!(c != synth.peak_index());
        raised[c] = (raised[c] + bump).min(-1e-3);
        let raised = BeamPattern::from_db(target.shared_grid(), raised).unwrap();
        let before = composite_loss(&target, &synth, &mask).unwrap().l_sl;
        let after = composite_loss(&target, &raised, &mask).unwrap().l_sl;
        prop_assert!(after >= before - 1e-12);
    }

    #[test]
    fn realized_vectors_are_unit_norm(seed in any::<u64>(), arch in arch(), n_rf in 1usize..4) {
        let cfg = ArrayConfig::new(4, 2, 0.5, 1.0, n_rf).unwrap();
        let bf = Beamformer::random(arch, &cfg, &mut rng_for(seed, 4));
        let f = bf.realize(&cfg).unwrap();
        prop_assert!((norm(&f) - 1.0).abs() < 1e-12);
        if arch == Architecture::Analog {
            prop_assert!(f.iter().all(|z| (z.norm() - 8f64.sqrt().recip()).abs() < 1e-12));
        }
    }

    #[test]
    fn analog_projection_is_idempotent(seed in any::<u64>()) {
        let cfg = small_cfg();
        let hybrid = Beamformer::random(Architecture::Hybrid, &cfg, &mut rng_for(seed, 5));
        let once = analog_from_hybrid(&hybrid, &cfg).unwrap();
        let f = once.realize(&cfg).unwrap();
        let again = Beamformer::analog_from_vector(&f).unwrap().realize(&cfg).unwrap();
        prop_assert!(f.iter().zip(&again).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn rate_ignores_global_phase_of_parameters(seed in any::<u64>(), arch in arch(), psi in -10.0f64..10.0) {
        let cfg = small_cfg();
        let h = random_channel(seed, cfg.n_t());
        let bf = Beamformer::random(arch, &cfg, &mut rng_for(seed, 6));
        let a = spectral_efficiency(&h, &bf.realize(&cfg).unwrap(), 0.0).unwrap();
        let b = spectral_efficiency(&h, &rotate(&bf, psi).realize(&cfg).unwrap(), 0.0).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn channels_reconstruct_from_paths(seed in any::<u64>()) {
        let cfg = small_cfg();
        let model = ChannelModelConfig { seed, ..Default::default() };
        for ch in generate_channels(&cfg, &model, 4).unwrap() {
            prop_assert!(ch.reconstruction_error(&cfg).unwrap() < 1e-12);
        }
    }

    #[test]
    fn mrt_ignores_channel_scale(seed in any::<u64>(), c in 1e-3f64..1e3) {
        let cfg = small_cfg();
        let h = random_channel(seed, cfg.n_t());
        let scaled = Channel::new(h.h().iter().map(|z| z * c).collect()).unwrap();
        let (a, b) = (mrt(&h).unwrap().realize(&cfg).unwrap(), mrt(&scaled).unwrap().realize(&cfg).unwrap());
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-12));
    }

    #[test]
    fn dft_selection_ignores_channel_phase(seed in any::<u64>(), psi in 0.0..std::f64::consts::TAU) {
        let cfg = small_cfg();
        let h = random_channel(seed, cfg.n_t());
        let rotated = Channel::new(h.h().iter().map(|z| z * Complex64::cis(psi)).collect()).unwrap();
        prop_assert_eq!(dft_codebook_abf(&h, &cfg).unwrap(), dft_codebook_abf(&rotated, &cfg).unwrap());
    }

    #[test]
    fn omp_residuals_never_grow(seed in any::<u64>(), n_rf in 1usize..5) {
        let cfg = ArrayConfig::new(4, 4, 0.5, 1.0, n_rf).unwrap();
        let dict = OmpDictionary::sine_grid(&cfg, 8).unwrap();
        let f = unit_complex_vector(&mut rng_for(seed, 7), cfg.n_t());
        let r = omp_hybrid(&f, &cfg, &dict).unwrap().residual_norms;
        prop_assert!(r.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn rate_grows_with_snr(seed in any::<u64>(), lo in -30.0f64..30.0, step in 0.1f64..10.0) {
        let cfg = small_cfg();
        let h = random_channel(seed, cfg.n_t());
        let f = unit_complex_vector(&mut rng_for(seed, 8), cfg.n_t());
        prop_assume!(inner(h.h(), &f).norm() > 1e-6);
        prop_assert!(spectral_efficiency(&h, &f, lo + step).unwrap() > spectral_efficiency(&h, &f, lo).unwrap());
    }

    #[test]
    fn mrt_dominates_unit_norm_competitors(seed in any::<u64>(), snr in -20.0f64..20.0, arch in arch()) {
        let cfg = small_cfg();
        let h = random_channel(seed, cfg.n_t());
        let best = spectral_efficiency(&h, &mrt(&h).unwrap().realize(&cfg).unwrap(), snr).unwrap();
        let other = Beamformer::random(arch, &cfg, &mut rng_for(seed, 9)).realize(&cfg).unwrap();
        prop_assert!(spectral_efficiency(&h, &other, snr).unwrap() <= best + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn ls_recovery_reproduces_the_pattern(seed in any::<u64>()) {
        let cfg = ArrayConfig::default();
        let grid = AngleGrid::default();
        let a = default_steering();
        let f = unit_complex_vector(&mut rng_for(seed, 10), cfg.n_t());
        let fh = ls_recover(&PhasePattern::from_vector(a, &f).unwrap(), a).unwrap().realize(&cfg).unwrap();
        let p = compute_pattern(&cfg, &grid, &f).unwrap();
        let q = compute_pattern(&cfg, &grid, &fh).unwrap();
        for (x, y) in p.values().iter().zip(q.values()) {
            if *x > -40.0 {
                prop_assert!((x - y).abs() < 0.1);
            }
        }
    }

    #[test]
    fn synthesis_invariants(seed in any::<u64>(), arch in arch()) {
        let cfg = small_cfg();
        let target = compute_pattern(&cfg, &AngleGrid::default(), &unit_complex_vector(&mut rng_for(seed, 11), cfg.n_t())).unwrap();
        let syn = SynthesisConfig { architecture: arch, seed, epochs: 30, ..Default::default() };
        let a = synthesize_direct(&target, &cfg, &syn).unwrap();
        let b = synthesize_direct(&target, &cfg, &syn).unwrap();
        prop_assert_eq!(&a.beamformer, &b.beamformer);
        prop_assert_eq!(&a.trajectory, &b.trajectory);
        prop_assert_eq!(a.loss, b.loss);
        prop_assert!(a.loss.total <= a.trajectory[0]);
        let f = a.beamformer.realize(&cfg).unwrap();
        prop_assert!((norm(&f) - 1.0).abs() < 1e-12);
        if arch == Architecture::Analog {
            prop_assert!(f.iter().all(|z| (z.norm() - 0.25).abs() < 1e-12));
        }
    }
}
