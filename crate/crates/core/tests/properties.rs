use plm_core::engine::weighted_all;
use plm_core::mnist::encode_idx_images;
use plm_core::nn::DropoutMask;
use plm_core::{parse_idx_images, parse_idx_labels, ActivationKind, GradientSet, Mlp, RawImage, RngStream};
use proptest::prelude::*;

fn storage_like(seed: u64, dims: [usize; 3]) -> Mlp {
    Mlp::init(
        &dims,
        &[ActivationKind::BiasedSigmoid, ActivationKind::SoftmaxZeroBias],
        &mut RngStream::new(seed),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn softmax_output_is_a_distribution(
        seed in any::<u64>(),
        input in prop::collection::vec(-50.0f64..50.0, 7),
    ) {
        let net = storage_like(seed, [7, 5, 4]);
        let y = net.predict(&input).unwrap();
        let sum: f64 = y.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12, "sum {}", sum);
        prop_assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn frozen_biases_never_move(
        seed in any::<u64>(),
        grads in prop::collection::vec(-10.0f64..10.0, 64),
        lr in 0.0f64..5.0,
    ) {
        let mut net = storage_like(seed, [3, 4, 5]);
        let mut g = GradientSet::zeros_like(&net);
        let mut src = grads.iter().cycle();
        for layer in &mut g.layers {
            for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *v = *src.next().unwrap();
            }
        }
        net.apply_update(&g, lr).unwrap();
        prop_assert!(net.layers()[1].bias().iter().all(|b| *b == 0.0));
    }

    #[test]
    fn image_parser_is_total(bytes in prop::collection::vec(any::<u8>(), 0..2000)) {
        let _ = parse_idx_images(&bytes);
    }

    #[test]
    fn label_parser_is_total(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let _ = parse_idx_labels(&bytes);
    }

    #[test]
    fn image_parser_total_on_valid_headers(
        count in 0u32..4,
        rows in 0u32..40,
        tail in prop::collection::vec(any::<u8>(), 0..4000),
    ) {
        let mut bytes = Vec::new();
        for f in [2051u32, count, rows, 28] {
            bytes.extend_from_slice(&f.to_be_bytes());
        }
        bytes.extend(tail);
        if let Ok(images) = parse_idx_images(&bytes) {
            prop_assert_eq!(images.len() as u32, count);
            prop_assert_eq!(rows, 28);
        }
    }

    #[test]
    fn idx_images_roundtrip(raw in prop::collection::vec(prop::collection::vec(any::<u8>(), 784), 0..5)) {
        let images: Vec<RawImage> = raw.iter().map(|p| RawImage::from_bytes(p).unwrap()).collect();
        let parsed = parse_idx_images(&encode_idx_images(&images)).unwrap();
        prop_assert_eq!(parsed.len(), images.len());
        for (a, b) in parsed.iter().zip(&raw) {
            prop_assert_eq!(&a.pixels()[..], &b[..]);
        }
    }

    #[test]
    fn weighted_all_is_the_count_weighted_mean(
        nt in 0usize..200, nn in 0usize..200, mt in 0usize..200, mn in 0usize..200,
    ) {
        let train = if nt == 0 { 0.0 } else { (mt % (nt + 1)) as f64 / nt as f64 };
        let new = if nn == 0 { 0.0 } else { (mn % (nn + 1)) as f64 / nn as f64 };
        let all = weighted_all(nt, train, nn, new);
        if nt + nn == 0 {
            prop_assert_eq!(all, 0.0);
        } else {
            let mistakes = (mt % (nt + 1)) * usize::from(nt > 0) + (mn % (nn + 1)) * usize::from(nn > 0);
            prop_assert!((all - mistakes as f64 / (nt + nn) as f64).abs() <= 1e-15);
        }
    }
}

/// Averaging many inverted-dropout passes reproduces the clean activations.
#[test]
fn inverted_dropout_preserves_expectation() {
    let net = storage_like(5, [6, 8, 3]);
    let input = [0.3, -0.2, 0.5, 0.1, -0.4, 0.25];
    let clean = net.forward(&input, None).unwrap().layers[0].output.clone();

    let mut rng = RngStream::new(77);
    let n = 10_000;
    let mut sum = vec![0.0; 8];
    let mut sum_sq = vec![0.0; 8];
    for _ in 0..n {
        let masks = [DropoutMask::sample(8, 0.5, &mut rng)];
        let pass = net.forward(&input, Some(&masks)).unwrap();
        for (j, v) in pass.layers[0].output.iter().enumerate() {
            sum[j] += v;
            sum_sq[j] += v * v;
        }
    }
    for j in 0..8 {
        let mean = sum[j] / n as f64;
        let var = sum_sq[j] / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!((mean - clean[j]).abs() <= 3.0 * se, "unit {j}: mean {mean} clean {} se {se}", clean[j]);
    }
}
