use histoseg::analysis::{canny_edges, compare_methods_gray, mssim, CannyParams, SsimParams};
use histoseg::raster::{encode_png_gray, rgb_pixel_to_yiq};
use histoseg::threshold::{chain_trace, nested_trace};
use histoseg::{
    apply_segmentation, binarize, build_histogram, compute_thresholds, decode_image, extract_object, fixtures,
    kappa_thresholds, luminance_gray, rgb_to_yiq, thresholds_m1, thresholds_m2, Fill, GrayImage, Histogram,
    Methodology, RgbImage, SegmentParams, SegmentSelection,
};
use proptest::prelude::*;

fn histogram() -> impl Strategy<Value = Histogram> {
    prop::collection::vec(0u64..2000, 256).prop_map(|v| {
        let mut counts = [0u64; 256];
        counts.copy_from_slice(&v);
        counts[0] += 1;
        counts[255] += 1;
        Histogram::from_counts(counts)
    })
}

/// Histograms whose mass sits in a few clusters, with long empty runs.
fn sparse_histogram() -> impl Strategy<Value = Histogram> {
    prop::collection::vec((any::<u8>(), 1u64..5000), 2..12).prop_map(|pairs| Histogram::from_pairs(&pairs))
}

fn gray_image() -> impl Strategy<Value = GrayImage> {
    (2usize..24, 2usize..24).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h).prop_map(move |v| GrayImage::new(w, h, v).unwrap())
    })
}

fn rgb_image() -> impl Strategy<Value = RgbImage> {
    (1usize..16, 1usize..16).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<[u8; 3]>(), w * h).prop_map(move |v| RgbImage::new(w, h, v).unwrap())
    })
}

fn kappa() -> impl Strategy<Value = f64> {
    0.0f64..=4.0
}

fn method() -> impl Strategy<Value = Methodology> {
    prop::sample::select(Methodology::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn yiq_is_linear(a in any::<[u8; 3]>(), b in any::<[u8; 3]>()) {
        let half = |p: [u8; 3]| p.map(|c| c / 2);
        let (a, b) = (half(a), half(b));
        let sum = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
        let (ya, yb, ys) = (rgb_pixel_to_yiq(a), rgb_pixel_to_yiq(b), rgb_pixel_to_yiq(sum));
        for c in 0..3 {
            prop_assert!((ya[c] + yb[c] - ys[c]).abs() <= 1e-9);
        }
    }

    #[test]
    fn global_mean_is_pixel_average(img in gray_image()) {
        let h = build_histogram(&img);
        prop_assert_eq!(h.total(), img.values().len() as u64);
        let avg = img.values().iter().map(|&v| v as f64).sum::<f64>() / img.values().len() as f64;
        let mean = h.range_stats(0, 255).unwrap().mean;
        prop_assert!((mean - avg).abs() <= 1e-9 * avg.max(1.0));
    }

    #[test]
    fn mass_splits(h in histogram(), a in any::<u8>(), b in any::<u8>(), t in any::<u8>()) {
        let (a, b) = (a.min(b), a.max(b));
        prop_assume!(a <= t && t < b);
        let whole = h.range_stats(a, b).unwrap().mass;
        let left = h.range_stats(a, t).unwrap().mass;
        let right = h.range_stats(t + 1, b).unwrap().mass;
        prop_assert_eq!(left + right, whole);
    }

    #[test]
    fn std_ignores_empty_bins(pairs in prop::collection::vec((40u8..200, 1u64..500), 1..20), pad_lo in 0u8..40, pad_hi in 0u8..55) {
        let h = Histogram::from_pairs(&pairs);
        let tight = h.range_stats(40, 199).unwrap();
        let wide = h.range_stats(40 - pad_lo, 200 + pad_hi).unwrap();
        prop_assert_eq!(tight.mass, wide.mass);
        prop_assert!((tight.std - wide.std).abs() <= 1e-9);
        prop_assert!((tight.mean - wide.mean).abs() <= 1e-9);
    }

    #[test]
    fn range_stats_bounds(h in sparse_histogram(), a in any::<u8>(), b in any::<u8>()) {
        let (a, b) = (a.min(b), a.max(b));
        let s = h.range_stats(a, b).unwrap();
        if s.mass > 0 {
            prop_assert!(s.mean >= a as f64 - 1e-9 && s.mean <= b as f64 + 1e-9);
            prop_assert!(s.std >= 0.0);
        }
    }

    #[test]
    fn kappa_thresholds_monotone(h in histogram(), k1 in kappa(), dk1 in 0.0f64..4.0, k2 in kappa(), dk2 in 0.0f64..4.0) {
        let s = h.global_stats();
        let (low, high) = kappa_thresholds(&s, k1, k2).unwrap();
        let (low2, high2) = kappa_thresholds(&s, k1 + dk1, k2 + dk2).unwrap();
        prop_assert!(low2 <= low);
        prop_assert!(high2 >= high);
    }

    #[test]
    fn nested_ranges_converge(h in histogram(), n in (2usize..6).prop_map(|k| 2 * k + 1), k1 in 0.1f64..2.0, k2 in 0.1f64..2.0) {
        let t = nested_trace(&h, n, k1, k2).unwrap();
        prop_assert!(t.lows.windows(2).all(|w| w[0] <= w[1]), "{:?}", t.lows);
        prop_assert!(t.highs.windows(2).all(|w| w[0] >= w[1]), "{:?}", t.highs);
        if let (Some(&l), Some(&u)) = (t.lows.last(), t.highs.last()) {
            prop_assert!(l <= t.mid && t.mid <= u, "{l} {} {u}", t.mid);
        }
    }

    #[test]
    fn chains_diverge(h in histogram(), n in (2usize..6).prop_map(|k| 2 * k + 1), k1 in 0.1f64..2.0, k2 in 0.1f64..2.0) {
        let t = chain_trace(&h, n, k1, k2).unwrap();
        prop_assert!(t.left.windows(2).all(|w| w[0] >= w[1]), "{:?}", t.left);
        prop_assert!(t.right.windows(2).all(|w| w[0] <= w[1]), "{:?}", t.right);
        prop_assert!(t.left.first().is_none_or(|&l| l <= t.mid));
        prop_assert!(t.right.first().is_none_or(|&r| r >= t.mid));
    }

    #[test]
    fn methods_agree_at_n1(h in sparse_histogram(), k1 in kappa(), k2 in kappa()) {
        let a = thresholds_m1(&h, 1, k1, k2).unwrap();
        let b = thresholds_m2(&h, 1, k1, k2).unwrap();
        prop_assert!(a.same_partition(&b));
        prop_assert_eq!(a.thresholds(), b.thresholds());
        prop_assert_eq!(a.segment_means(), b.segment_means());
        prop_assert_eq!(a.thresholds(), &[h.global_stats().mean.round() as u8]);
    }

    #[test]
    fn first_level_kappa1_monotone(h in sparse_histogram(), k1 in 0.0f64..3.0, dk in 0.0f64..3.0, k2 in kappa()) {
        let lo = nested_trace(&h, 3, k1, k2).unwrap();
        let hi = nested_trace(&h, 3, k1 + dk, k2).unwrap();
        if let (Some(a), Some(b)) = (lo.lows.first(), hi.lows.first()) {
            prop_assert!(b <= a);
        }
    }

    #[test]
    fn threshold_set_invariants(h in sparse_histogram(), m in method(), n in (0usize..5).prop_map(|k| 2 * k + 1), k1 in kappa(), k2 in kappa()) {
        let Ok(ts) = compute_thresholds(&h, &SegmentParams::new(m, n, k1, k2)) else {
            // only Otsu refuses, when there are too few populated levels
            prop_assert_eq!(m, Methodology::Otsu);
            prop_assert!(h.populated_bins() < n + 1);
            return Ok(());
        };
        prop_assert_eq!(ts.thresholds().len(), n);
        prop_assert!(ts.thresholds().windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(ts.segment_means().len(), n + 1);
        for i in 0..=n {
            let (a, b) = ts.segment_range(i);
            let mean = ts.segment_means()[i];
            prop_assert!(a <= mean && mean <= b, "segment {i} [{a}, {b}] mean {mean}");
        }
        if m != Methodology::Otsu {
            prop_assert!(ts.thresholds().iter().all(|&t| (1..=254).contains(&t)));
        }
    }

    #[test]
    fn delta_property(img in gray_image(), m in method(), n in (0usize..4).prop_map(|k| 2 * k + 1)) {
        let h = build_histogram(&img);
        let Ok(ts) = compute_thresholds(&h, &SegmentParams::new(m, n, 1.0, 1.0)) else {
            return Ok(());
        };
        let seg = apply_segmentation(&img, &ts);
        let out = build_histogram(seg.mapped());
        prop_assert!(out.populated_bins() <= n + 1);
        for level in out.populated_levels() {
            prop_assert!(ts.segment_means().contains(&level));
        }
        for (&label, &v) in seg.labels().iter().zip(seg.mapped().values()) {
            prop_assert_eq!(ts.segment_means()[label as usize], v);
        }
    }

    #[test]
    fn masks_of_complementary_selections_partition(img in rgb_image(), n in (0usize..3).prop_map(|k| 2 * k + 1), pick in prop::collection::btree_set(0usize..8, 1..4)) {
        let gray = luminance_gray(&rgb_to_yiq(&img));
        let ts = thresholds_m2(&build_histogram(&gray), n, 1.0, 1.0).unwrap();
        let pick: Vec<usize> = pick.into_iter().filter(|&i| i <= n).collect();
        prop_assume!(!pick.is_empty() && pick.len() <= n);
        let seg = apply_segmentation(&gray, &ts);
        let sel = SegmentSelection::new(pick.iter().copied(), Fill::Black).unwrap();
        let rest = sel.complement(&ts).unwrap();
        let a = binarize(&seg, &sel).unwrap();
        let b = binarize(&seg, &rest).unwrap();
        for (p, (&x, &y)) in a.bits().iter().zip(b.bits()).enumerate() {
            prop_assert_eq!(x + y, 1);
            let owner = ts.segment_of(gray.values()[p]);
            prop_assert_eq!(x == 1, pick.contains(&owner));
        }
    }

    #[test]
    fn extraction_keeps_object_and_fills_background(img in rgb_image(), fill in prop::sample::select(vec![Fill::Black, Fill::White])) {
        let yiq = rgb_to_yiq(&img);
        let gray = luminance_gray(&yiq);
        let ts = thresholds_m1(&build_histogram(&gray), 1, 1.0, 1.0).unwrap();
        let seg = apply_segmentation(&gray, &ts);
        let mask = binarize(&seg, &SegmentSelection::new([1], fill).unwrap()).unwrap();
        let res = extract_object(&yiq, &mask, fill).unwrap();
        for p in 0..gray.values().len() {
            if mask.bits()[p] == 1 {
                prop_assert_eq!(res.extracted_y.values()[p], gray.values()[p]);
                let (a, b) = (res.extracted_rgb.pixels()[p], img.pixels()[p]);
                prop_assert!(a.iter().zip(b).all(|(x, y)| (*x as i32 - y as i32).abs() <= 1));
            } else {
                let f = fill.level() as i32;
                prop_assert!(res.extracted_rgb.pixels()[p].iter().all(|&c| (c as i32 - f).abs() <= 1));
            }
        }
    }

    #[test]
    fn ssim_symmetric_and_bounded(a in gray_image(), seed in any::<u64>()) {
        let b = GrayImage::from_fn(a.width(), a.height(), |x, y| {
            (a.get(x, y) as u64 ^ seed.rotate_left((x * 7 + y) as u32 % 64)) as u8
        }).unwrap();
        let params = SsimParams { window: 2, ..SsimParams::default() };
        let ab = mssim(&a, &b, &params).unwrap();
        let ba = mssim(&b, &a, &params).unwrap();
        prop_assert!((ab.mssim - ba.mssim).abs() <= 1e-12);
        prop_assert!(ab.mssim <= 1.0 + 1e-12);
        prop_assert!(ab.per_window.iter().all(|&s| (-1.0 - 1e-12..=1.0 + 1e-12).contains(&s)));
        prop_assert_eq!(mssim(&a, &a, &params).unwrap().mssim, 1.0);
    }

    #[test]
    fn edge_maps_are_binary(img in gray_image(), sigma in 0.5f64..2.5) {
        let e = canny_edges(&img, &CannyParams { sigma, ..CannyParams::default() }).unwrap();
        prop_assert!(e.bits().iter().all(|&b| b <= 1));
        prop_assert_eq!(e.bits().len(), img.values().len());
    }

    #[test]
    fn png_round_trip(img in gray_image()) {
        let back = decode_image(&encode_png_gray(&img).unwrap()).unwrap();
        prop_assert!(back.pixels().iter().zip(img.values()).all(|(p, &v)| *p == [v, v, v]));
    }
}

/// Expected counts of two equal-mass discretized normals.
fn two_normal_histogram(m1: f64, m2: f64, sd: f64) -> Histogram {
    let mut counts = [0u64; 256];
    for (v, c) in counts.iter_mut().enumerate() {
        let pdf = |m: f64| (-0.5 * ((v as f64 - m) / sd).powi(2)).exp();
        *c = (1e5 * (pdf(m1) + pdf(m2))).round() as u64;
    }
    Histogram::from_counts(counts)
}

proptest! {
    #[test]
    fn separated_gaussians_split_between_modes(sd in 2.0f64..10.0, m1 in 20.0f64..80.0, gap in 8.0f64..12.0) {
        let m2 = m1 + gap * sd;
        prop_assume!(m2 + 4.0 * sd <= 255.0);
        let h = two_normal_histogram(m1, m2, sd);
        for ts in [thresholds_m1(&h, 1, 1.0, 1.0).unwrap(), thresholds_m2(&h, 1, 1.0, 1.0).unwrap()] {
            let t = ts.thresholds()[0] as f64;
            prop_assert!(t > m1 + 3.0 * sd && t < m2 - 3.0 * sd, "t = {t}");
        }
    }
}

#[test]
fn mssim_grows_with_segment_count() {
    let gray = fixtures::two_gaussians(256, 1).gray();
    let rows = compare_methods_gray(&gray, &[1, 3, 5, 7], 1.0, 1.0).unwrap();
    for method in [Methodology::M1, Methodology::M2] {
        let scores: Vec<f64> = rows.iter().filter(|r| r.method == method).map(|r| r.mssim).collect();
        assert_eq!(scores.len(), 4);
        assert!(scores.windows(2).all(|w| w[1] >= w[0]), "{method}: {scores:?}");
    }
}
