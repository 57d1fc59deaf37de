use attrikit::corpus::{edit_bin, edit_ratio, freeform_mask, Manifest, SampleRecord, Split};
use attrikit::evalkit::{ConfusionMatrix, EvalReport, ReportMeta};
use attrikit::features::{build_backbone, extract_pyramid, pixel_embedding, text_embedding, BackboneConfig};
use attrikit::histogram::Histogram;
use attrikit::pixelops::{gaussian_blur, resize_exact, Image};
use attrikit::rng::SplitMix64;
use proptest::prelude::*;

fn image(w: usize, h: usize, c: usize, seed: u64) -> Image {
    let mut rng = SplitMix64::new(seed);
    Image::from_fn(w, h, c, |_, _, _| rng.next_f64())
}

proptest! {
    #[test]
    fn report_metrics_are_consistent(classes in 2usize..6, pairs in prop::collection::vec((0usize..6, 0usize..6), 1..80)) {
        let pairs: Vec<(usize, usize)> = pairs.into_iter().map(|(t, p)| (t % classes, p % classes)).collect();
        let names = (0..classes).map(|i| format!("c{i}")).collect();
        let r = EvalReport::from_confusion(ConfusionMatrix::from_pairs(names, pairs.iter().copied()).unwrap(), ReportMeta::default());
        let direct = pairs.iter().filter(|(t, p)| t == p).count() as f64 / pairs.len() as f64;
        prop_assert!((r.accuracy - direct).abs() <= 1e-12);
        for v in [r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let f1s: Vec<f64> = r.per_class.iter().map(|c| c.f1).collect();
        let lo = f1s.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = f1s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r.macro_f1 >= lo - 1e-15 && r.macro_f1 <= hi + 1e-15);
        for t in 0..classes {
            let support = pairs.iter().filter(|(a, _)| *a == t).count() as u64;
            prop_assert_eq!(r.confusion.row_sum(t), support);
        }
    }

    #[test]
    fn histogram_density_integrates_to_one(values in prop::collection::vec(-1.0f64..=1.0, 1..200), bins in 1usize..40) {
        let h = Histogram::from_values(values, -1.0, 1.0, bins).unwrap();
        prop_assert!((h.integral() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn edit_bins_are_monotone_in_ratio(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(edit_bin(lo).unwrap() <= edit_bin(hi).unwrap());
    }

    #[test]
    fn freeform_masks_hit_the_requested_ratio(w in 4usize..40, h in 4usize..40, ratio in 0.0f64..=1.0, seed: u64) {
        let m = freeform_mask(w, h, ratio, seed).unwrap();
        let want = (ratio * (w * h) as f64).round() / (w * h) as f64;
        prop_assert_eq!(edit_ratio(&m).unwrap(), want);
    }

    #[test]
    fn text_embeddings_are_unit_or_zero(prompt in "[a-zA-Z0-9 ,.!-]{0,60}", seed: u64) {
        let e = text_embedding(&prompt, 64, seed).unwrap();
        let norm = e.data.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-6);
        prop_assert_eq!(norm == 0.0, !prompt.chars().any(|c| c.is_ascii_alphanumeric()));
        prop_assert_eq!(e, text_embedding(&prompt, 64, seed).unwrap());
    }

    #[test]
    fn blur_commutes_with_horizontal_flip(w in 2usize..24, h in 2usize..24, seed: u64, sigma in 0.3f64..3.0) {
        let img = image(w, h, 3, seed);
        let a = gaussian_blur(&img.flip_horizontal(), sigma, 3).unwrap();
        let b = gaussian_blur(&img, sigma, 3).unwrap().flip_horizontal();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn unit_grid_pixel_embedding_is_channel_means(w in 1usize..20, h in 1usize..20, seed: u64) {
        let img = image(w, h, 3, seed);
        let e = pixel_embedding(&img, 1).unwrap();
        for c in 0..3 {
            let mean = img.plane(c).iter().sum::<f64>() / (w * h) as f64;
            prop_assert!((e.data[c] - mean).abs() <= 1e-9);
        }
    }

    #[test]
    fn resize_preserves_constants(w in 1usize..30, h in 1usize..30, tw in 1usize..30, th in 1usize..30, v in 0.0f64..=1.0) {
        let out = resize_exact(&Image::filled(w, h, 3, v), tw, th).unwrap();
        prop_assert!(out.data().iter().all(|x| (x - v).abs() < 1e-12));
    }

    #[test]
    fn manifest_jsonl_roundtrip(labels in prop::collection::vec("[a-z]{1,6}", 1..12), prompt in proptest::option::of("[ -~]{0,20}")) {
        let records = labels.iter().enumerate().map(|(i, l)| {
            let mut r = SampleRecord::new(format!("img/{i}.png"), l.clone(), [Split::Train, Split::Val, Split::Test][i % 3]);
            r.prompt = prompt.clone();
            r
        }).collect();
        let m = Manifest::from_records(records).unwrap();
        let back = Manifest::parse(&m.to_jsonl()).unwrap();
        prop_assert_eq!(&back, &m);
        let mut sorted = m.classes().to_vec();
        sorted.sort();
        sorted.dedup();
        prop_assert_eq!(m.classes(), &sorted[..]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pyramid_is_positively_homogeneous(seed: u64, c in 0.1f64..3.0) {
        let b = build_backbone(&BackboneConfig::default()).unwrap();
        // Inputs stay below 0.3 so scaling by c < 3 never clamps.
        let small = Image::new(16, 16, 3, image(16, 16, 3, seed).data().iter().map(|v| v * 0.3).collect()).unwrap();
        let scaled = Image::new(16, 16, 3, small.data().iter().map(|v| v * c).collect()).unwrap();
        let p = extract_pyramid(&b, &small).unwrap();
        let q = extract_pyramid(&b, &scaled).unwrap();
        for (l, m) in p.layers.iter().zip(&q.layers) {
            for (x, y) in l.data().iter().zip(m.data()) {
                prop_assert!(((*x as f64) * c - *y as f64).abs() <= 1e-5 * (1.0 + (*y as f64).abs()));
            }
        }
    }
}
