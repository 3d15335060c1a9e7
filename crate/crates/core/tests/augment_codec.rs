use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spdh::augment::{augment_frame, AugmentSpec, RotationAxis, TranslationAxis};
use spdh::codec::{decode, DecodeOptions, SpdhEncoder, ZQuantization};
use spdh::geometry::{DepthImage, PinholeIntrinsics};
use spdh::JointSet3D;

/// Upper 0.1% point of chi-square with 9 degrees of freedom.
const CHI2_9_P001: f64 = 27.877;
/// Same for 1 degree of freedom.
const CHI2_1_P001: f64 = 10.828;

fn chi_square(counts: &[usize], expected: f64) -> f64 {
    counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum()
}

#[test]
fn sampled_augmentations_are_uniform_per_axis() {
    let spec = AugmentSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000;
    let mut rot_x = 0;
    let mut trans_x = 0;
    let mut angle_bins = [0usize; 10];
    let mut offset_bins = [0usize; 10];
    for _ in 0..n {
        let s = spec.sample(&mut rng);
        assert!((-5.0..=5.0).contains(&s.angle_deg));
        assert!((-80.0..=80.0).contains(&s.offset_mm));
        rot_x += (s.rot_axis == RotationAxis::X) as usize;
        trans_x += (s.trans_axis == TranslationAxis::X) as usize;
        angle_bins[(((s.angle_deg + 5.0) / 10.0 * 10.0) as usize).min(9)] += 1;
        offset_bins[(((s.offset_mm + 80.0) / 160.0 * 10.0) as usize).min(9)] += 1;
    }
    let half = n as f64 / 2.0;
    assert!(chi_square(&[rot_x, n - rot_x], half) < CHI2_1_P001);
    assert!(chi_square(&[trans_x, n - trans_x], half) < CHI2_1_P001);
    assert!(chi_square(&angle_bins, n as f64 / 10.0) < CHI2_9_P001, "{angle_bins:?}");
    assert!(chi_square(&offset_bins, n as f64 / 10.0) < CHI2_9_P001, "{offset_bins:?}");
}

#[test]
fn augmented_labels_survive_the_codec() {
    let k = PinholeIntrinsics::new(365.0, 365.0, 192.0, 96.0, 384, 192).unwrap();
    let enc = SpdhEncoder::new(k, ZQuantization::standard(), 50.0).unwrap();
    let depth = DepthImage::from_vec(384, 192, 8000.0, vec![2000.0; 384 * 192]).unwrap();
    let spec = AugmentSpec::default();
    let pts = [
        Vector3::new(0.0, 0.0, 1500.0),
        Vector3::new(-250.0, 80.0, 2100.0),
        Vector3::new(300.0, -60.0, 2600.0),
        Vector3::new(120.0, 40.0, 1100.0),
    ];
    let joints = JointSet3D::from_positions(["a", "b", "c", "d"], pts);
    let mut checked = 0;
    for frame_id in 0..40 {
        let aug = augment_frame(&depth, &joints, &k, &spec, frame_id).unwrap();
        let (stack, flags) = enc.encode(&aug.joints).unwrap();
        let out = decode(&stack, &k, &DecodeOptions::default()).unwrap();
        for ((p, g), ok) in out.positions().zip(aug.joints.positions()).zip(flags) {
            if !ok {
                continue;
            }
            checked += 1;
            // composition: same tolerance as the plain codec round trip
            // (one slice plus one column of slack)
            assert!((p.z - g.z).abs() <= 15.0 + 1e-6, "{p} vs {g}");
            assert!((p - g).norm() <= 20.0, "{p} vs {g}");
        }
    }
    assert!(checked > 100);
}

#[test]
fn augmentation_is_reproducible_per_frame() {
    let k = PinholeIntrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64).unwrap();
    let depth = DepthImage::from_vec(64, 64, 8000.0, (0..4096).map(|i| 900.0 + (i % 50) as f32).collect()).unwrap();
    let spec = AugmentSpec {
        seed: 11,
        ..Default::default()
    };
    let a = augment_frame(&depth, &JointSet3D::default(), &k, &spec, 5).unwrap();
    let b = augment_frame(&depth, &JointSet3D::default(), &k, &spec, 5).unwrap();
    let c = augment_frame(&depth, &JointSet3D::default(), &k, &spec, 6).unwrap();
    assert_eq!(a.depth, b.depth);
    assert_eq!(a.sample, b.sample);
    assert_ne!(a.sample, c.sample);
}
