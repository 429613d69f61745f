use rcrobust::image::*;
use rcrobust::Rng;

fn ramp(h: usize, w: usize) -> ImagePlane {
    let n = h * w * 3;
    ImagePlane::new(h, w, (0..n).map(|i| i as f64 / (n - 1) as f64).collect()).unwrap()
}

#[test]
fn gamma_draws_stay_in_bands() {
    let mut rng = Rng::new(1, 0);
    for _ in 0..10_000 {
        match ImageDegradation::LowLight(Severity::Light).sample(&mut rng) {
            SampledDegradation::LowLight { gamma } => assert!((1.0..=2.0).contains(&gamma)),
            other => panic!("{other:?}"),
        }
        match ImageDegradation::LowLight(Severity::Heavy).sample(&mut rng) {
            SampledDegradation::LowLight { gamma } => assert!((2.0..=3.0).contains(&gamma)),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn gamma_is_elementwise_power() {
    let img = ramp(4, 5);
    let out = gamma_lowlight(&img, 2.5).unwrap();
    for (a, b) in img.data().iter().zip(out.data()) {
        assert!((a.powf(2.5) - b).abs() < 1e-15);
        assert!(b <= a);
    }
    assert!(gamma_lowlight(&img, 0.0).is_err());
}

#[test]
fn weather_blend_matches_oracle() {
    let img = ramp(3, 4);
    let mut rng = Rng::new(2, 0);
    let mono: Vec<f64> = (0..12).map(|_| rng.unit()).collect();
    let color: Vec<f64> = (0..36).map(|_| rng.unit()).collect();
    for (channels, data) in [(1, mono), (3, color)] {
        let map = DegradationMap::new(WeatherKind::Fog, 3, 4, channels, data.clone()).unwrap();
        let out = composite_weather(&img, &map, 0.8).unwrap();
        for px in 0..12 {
            for c in 0..3 {
                let a = if channels == 1 { data[px] } else { data[px * 3 + c] };
                let v = img.data()[px * 3 + c];
                let expect = v * (1.0 - a) + 0.8 * a;
                assert!((out.data()[px * 3 + c] - expect).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn full_map_yields_atmosphere() {
    let img = ramp(2, 2);
    let map = DegradationMap::new(WeatherKind::Rain, 2, 2, 1, vec![1.0; 4]).unwrap();
    let out = composite_weather(&img, &map, 0.6).unwrap();
    assert!(out.data().iter().all(|v| (v - 0.6).abs() < 1e-15));
    let wrong = DegradationMap::new(WeatherKind::Rain, 3, 2, 1, vec![1.0; 6]).unwrap();
    assert!(composite_weather(&img, &wrong, 0.6).is_err());
}

#[test]
fn one_timestamp_shares_one_gamma() {
    let frames: Vec<ImagePlane> = (0..6).map(|i| ramp(3 + i, 4)).collect();
    let (out, sampled) = same_timestamp_consistency(
        &frames,
        None,
        ImageDegradation::LowLight(Severity::Heavy),
        &mut Rng::new(3, 0),
    )
    .unwrap();
    let SampledDegradation::LowLight { gamma } = sampled else {
        panic!("expected low light")
    };
    for (f, o) in frames.iter().zip(&out) {
        assert_eq!(*o, gamma_lowlight(f, gamma).unwrap());
    }
}

#[test]
fn weather_needs_matching_maps() {
    let frames = vec![ramp(2, 2), ramp(2, 2)];
    let fog = |v| DegradationMap::new(WeatherKind::Fog, 2, 2, 1, vec![v; 4]).unwrap();
    let deg = ImageDegradation::Weather(WeatherKind::Fog, Severity::Light);
    let mut rng = Rng::new(4, 0);
    assert!(same_timestamp_consistency(&frames, None, deg, &mut rng).is_err());
    assert!(same_timestamp_consistency(&frames, Some(&[fog(0.5)]), deg, &mut rng).is_err());
    let (out, _) = same_timestamp_consistency(&frames, Some(&[fog(0.0), fog(1.0)]), deg, &mut rng).unwrap();
    assert_eq!(out[0], frames[0]);
    // Light severity halves the map before blending.
    for (v, o) in frames[1].data().iter().zip(out[1].data()) {
        assert!((o - (0.5 * v + 0.5 * 0.8)).abs() < 1e-12);
    }
}

#[test]
fn pnm_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.ppm");
    let img = ImagePlane::new(2, 3, (0..18).map(|i| i as f64 * 15.0 / 255.0).collect()).unwrap();
    img.write(&path).unwrap();
    let back = ImagePlane::read(&path).unwrap();
    for (a, b) in img.data().iter().zip(back.data()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn gamma_is_non_increasing_in_gamma() {
    let mut rng = Rng::new(5, 0);
    for _ in 0..200 {
        let v = rng.uniform(1e-6, 1.0 - 1e-6);
        let img = ImagePlane::filled(1, 1, v).unwrap();
        let mut last = 1.0;
        for g in [1.0, 1.3, 1.7, 2.0, 2.4, 3.0] {
            let out = gamma_lowlight(&img, g).unwrap().data()[0];
            assert!(out <= last && (0.0..=1.0).contains(&out));
            last = out;
        }
    }
}

#[test]
fn weather_blend_is_affine_in_image() {
    let mut rng = Rng::new(6, 0);
    let mut plane = || ImagePlane::new(3, 3, (0..27).map(|_| rng.unit()).collect()).unwrap();
    let (i1, i2) = (plane(), plane());
    let map = DegradationMap::new(WeatherKind::Snow, 3, 3, 3, plane().data().to_vec()).unwrap();
    let a = 0.3;
    let mix = ImagePlane::new(3, 3, i1.data().iter().zip(i2.data()).map(|(x, y)| a * x + (1.0 - a) * y).collect()).unwrap();
    let lhs = composite_weather(&mix, &map, 0.8).unwrap();
    let b1 = composite_weather(&i1, &map, 0.8).unwrap();
    let b2 = composite_weather(&i2, &map, 0.8).unwrap();
    for k in 0..27 {
        let rhs = a * b1.data()[k] + (1.0 - a) * b2.data()[k];
        assert!((lhs.data()[k] - rhs).abs() <= 1e-12);
        assert!((0.0..=1.0).contains(&lhs.data()[k]));
    }
}

#[test]
fn single_frame_matches_direct_call() {
    let frame = ramp(3, 3);
    let deg = ImageDegradation::LowLight(Severity::Light);
    let (out, sampled) = same_timestamp_consistency(&[frame.clone()], None, deg, &mut Rng::new(7, 0)).unwrap();
    assert_eq!(out[0], sampled.apply(&frame, None).unwrap());
    let (_, again) = same_timestamp_consistency(&[frame], None, deg, &mut Rng::new(7, 0)).unwrap();
    assert_eq!(sampled, again);
}
