//! Randomized invariants.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sinkbss::evaluation::{decompose, evaluate, sdr_sir_sar};
use sinkbss::mixsim::{convolve_mix, MixSpec, RirBank};
use sinkbss::signal::{convolve_direct, convolve_fft};
use sinkbss::stft::{analyze, synthesize, StftConfig};
use sinkbss::transport::{optimal_mapping, BandPowerPair, SinkhornParams};
use sinkbss::AudioBuffer;

fn noise(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stft_round_trip(seed in 0u64..1 << 40, frame_pow in 4u32..9, quarter in any::<bool>(), extra in 0usize..3, len_frames in 3usize..12) {
        let frame = 1usize << frame_pow;
        let hop = if quarter { frame / 4 } else { frame / 2 };
        let cfg = StftConfig::new(frame, hop, frame << extra).unwrap();
        let len = frame * len_frames + hop / 3;
        let x = noise(seed, len);
        let back = synthesize(&analyze(&AudioBuffer::mono(x.clone(), 8000).unwrap(), cfg).unwrap()).unwrap();
        let y = back.channel(0);
        let (lo, hi) = (frame, y.len() - frame);
        for t in lo..hi {
            prop_assert!((y[t] - x[t]).abs() < 1e-9);
        }
    }

    #[test]
    fn fft_convolution_matches_direct(seed in 0u64..1 << 40, la in 1usize..300, lb in 1usize..300) {
        let (a, b) = (noise(seed, la), noise(seed ^ 1, lb));
        let (d, f) = (convolve_direct(&a, &b), convolve_fft(&a, &b));
        prop_assert_eq!(d.len(), f.len());
        let scale = d.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (p, q) in d.iter().zip(&f) {
            prop_assert!((p - q).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn mixing_is_linear(seed in 0u64..1 << 40, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let bank = RirBank::synthetic(seed, 2, 2, 40, 0.002, 8000).unwrap();
        let spec = MixSpec::Convolutive(bank);
        let len = 300;
        let s1 = AudioBuffer::new(vec![noise(seed, len), noise(seed + 1, len)], 8000).unwrap();
        let s2 = AudioBuffer::new(vec![noise(seed + 2, len), noise(seed + 3, len)], 8000).unwrap();
        let comb: Vec<Vec<f64>> = (0..2)
            .map(|n| (0..len).map(|t| a * s1.channel(n)[t] + b * s2.channel(n)[t]).collect())
            .collect();
        let m = convolve_mix(&AudioBuffer::new(comb, 8000).unwrap(), &spec).unwrap();
        let (m1, m2) = (convolve_mix(&s1, &spec).unwrap(), convolve_mix(&s2, &spec).unwrap());
        for ch in 0..2 {
            for t in 0..len {
                let want = a * m1.channel(ch)[t] + b * m2.channel(ch)[t];
                prop_assert!((m.channel(ch)[t] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn decomposition_sums_to_padded_estimate(seed in 0u64..1 << 40, taps in 1usize..8) {
        let len = 120;
        let refs = vec![noise(seed, len), noise(seed + 1, len)];
        let est = noise(seed + 2, len);
        let dec = decompose(&est, &refs, 1, taps).unwrap();
        let total = dec.total();
        prop_assert_eq!(total.len(), len + taps - 1);
        for (t, v) in total.iter().enumerate() {
            let want = if t < len { est[t] } else { 0.0 };
            prop_assert!((v - want).abs() < 1e-9);
        }
    }

    #[test]
    fn scores_are_scale_invariant(seed in 0u64..1 << 40, gain in 0.01f64..100.0) {
        let len = 150;
        let refs = vec![noise(seed, len), noise(seed + 1, len)];
        let est: Vec<f64> = (0..len).map(|t| refs[0][t] + 0.3 * refs[1][t] + 0.1 * noise(seed + 2, len)[t]).collect();
        let scale = |x: &[f64]| -> Vec<f64> { x.iter().map(|v| v * gain).collect() };
        let scaled_refs: Vec<Vec<f64>> = refs.iter().map(|r| scale(r)).collect();
        let a = sdr_sir_sar(&decompose(&est, &refs, 0, 3).unwrap());
        for b in [
            sdr_sir_sar(&decompose(&scale(&est), &refs, 0, 3).unwrap()),
            sdr_sir_sar(&decompose(&scale(&est), &scaled_refs, 0, 3).unwrap()),
        ] {
            prop_assert!((a.sdr - b.sdr).abs() < 1e-9);
            prop_assert!((a.sir - b.sir).abs() < 1e-9);
            prop_assert!((a.sar - b.sar).abs() < 1e-9);
        }
    }

    #[test]
    fn evaluation_follows_estimate_order(seed in 0u64..1 << 40) {
        let len = 200;
        let refs = vec![noise(seed, len), noise(seed + 1, len)];
        let ests = vec![refs[1].clone(), refs[0].iter().map(|v| 0.5 * v).collect()];
        let mix: Vec<f64> = (0..len).map(|t| refs[0][t] + refs[1][t]).collect();
        let rep = evaluate(&ests, &refs, &mix, 2).unwrap();
        prop_assert_eq!(rep.permutation, vec![1, 0]);
    }

    #[test]
    fn transport_plan_is_consistent(seed in 0u64..1 << 40, f in 1usize..24, normalize in any::<bool>()) {
        let v = noise(seed, 2 * f);
        let sigma2: Vec<f64> = v[..f].iter().map(|x| x * x).collect();
        let ypow: Vec<f64> = v[f..].iter().map(|x| x * x).collect();
        let params = SinkhornParams { normalize_scale: normalize, ..Default::default() };
        let pair = BandPowerPair::new(sigma2, ypow, params.eps_floor).unwrap();
        let out = optimal_mapping(&pair, &params).unwrap();
        prop_assert!(out.plan.as_slice().iter().all(|q| q.is_finite() && *q >= 0.0));
        for (a, b) in out.sigma2_hat.iter().zip(out.plan.row_sums()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
    }
}
