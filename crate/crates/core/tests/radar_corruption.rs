use rcrobust::bench::SweepConfig;
use rcrobust::radar::*;
use rcrobust::{BoxAnnotation, GridSpec, PointCloud, RadarPoint, Rng};

fn cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = Rng::new(seed, 0);
    PointCloud::new(
        "f",
        (0..n)
            .map(|_| {
                RadarPoint::new(
                    rng.uniform(-40.0, 40.0),
                    rng.uniform(-40.0, 40.0),
                    rng.uniform(-2.0, 2.0),
                    rng.uniform(0.0, 20.0),
                    rng.uniform(-5.0, 5.0),
                )
            })
            .collect(),
    )
}

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

// Independent point-in-rotated-box check: rotate into the box frame by hand.
fn inside(p: &RadarPoint, b: &BoxAnnotation) -> bool {
    let (s, c) = b.yaw.sin_cos();
    let dx = p.x - b.center[0];
    let dy = p.y - b.center[1];
    let u = c * dx + s * dy;
    let w = -s * dx + c * dy;
    u.abs() <= b.size[0] / 2.0 && w.abs() <= b.size[1] / 2.0 && (p.z - b.center[2]).abs() <= b.size[2] / 2.0
}

#[test]
fn sampled_sigma_is_uniform_on_range() {
    let mut rng = Rng::new(11, 0);
    let draws: Vec<f64> = (0..100_000).map(|_| sample_sigma(&mut rng)).collect();
    assert!(draws.iter().all(|s| (1.0..=50.0).contains(s)));
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    assert!((25.0..=26.0).contains(&mean), "mean {mean}");
}

#[test]
fn removing_half_leaves_half() {
    let c = cloud(100, 1);
    let out = key_point_missing(&c, &[], 0, 50, &mut Rng::new(2, 0)).unwrap();
    assert_eq!(out.len(), 50);
    assert!(key_point_missing(&c, &[], 0, 51, &mut Rng::new(2, 0)).is_err());
    assert!(key_point_missing(&c, &[], 0, 0, &mut Rng::new(2, 0)).is_err());
}

#[test]
fn in_box_removal_only_takes_box_points() {
    let b = BoxAnnotation::new([5.0, 5.0, 0.0], [20.0, 10.0, 4.0], 0.6).unwrap();
    for seed in 0..50 {
        let c = cloud(200, seed);
        let out = key_point_missing(&c, &[b], 1, 8, &mut Rng::new(seed, 3)).unwrap();
        let in_box = c.points.iter().filter(|p| inside(p, &b)).count();
        assert_eq!(c.len() - out.len(), in_box.min(8));
        // Survivors keep their order, so a merge walk recovers the removed set.
        let mut j = 0;
        for p in &c.points {
            if j < out.len() && out.points[j] == *p {
                j += 1;
            } else {
                assert!(inside(p, &b), "removed point outside the box");
            }
        }
        assert_eq!(j, out.len());
    }
}

#[test]
fn point_related_spurious_spread_matches_sigma() {
    let base = RadarPoint::new(1.0, 2.0, 0.5, 4.0, -1.0);
    let c = PointCloud::new("one", vec![base; 100_000]);
    let grid = GridSpec::default();
    let out = spurious_points(&c, SpuriousMode::PointRelated, 1.0, 3.0, &grid, &mut Rng::new(5, 0)).unwrap();
    assert_eq!(out.len(), 200_000);
    let xs: Vec<f64> = out.points[100_000..].iter().map(|p| p.x - base.x).collect();
    let s = std_dev(&xs);
    assert!((2.97..=3.03).contains(&s), "std {s}");
}

#[test]
fn point_shift_moves_positions_only() {
    let c = cloud(100_000, 4);
    let out = point_shift(&c, 5.0, &mut Rng::new(8, 0)).unwrap();
    let dx: Vec<f64> = c.points.iter().zip(&out.points).map(|(a, b)| b.x - a.x).collect();
    let s = std_dev(&dx);
    assert!((4.95..=5.05).contains(&s), "std {s}");
    for (a, b) in c.points.iter().zip(&out.points) {
        assert_eq!(a.rcs.to_bits(), b.rcs.to_bits());
        assert_eq!(a.v.to_bits(), b.v.to_bits());
    }
}

#[test]
fn non_positional_leaves_positions() {
    let c = cloud(100_000, 6);
    let out = non_positional_disturbance(&c, 10.0, &mut Rng::new(9, 0)).unwrap();
    for (a, b) in c.points.iter().zip(&out.points) {
        assert_eq!(a.position(), b.position());
    }
    let dr: Vec<f64> = c.points.iter().zip(&out.points).map(|(a, b)| b.rcs - a.rcs).collect();
    let s = std_dev(&dr);
    assert!((9.9..=10.1).contains(&s), "std {s}");
}

#[test]
fn displacement_grows_with_sigma() {
    let c = cloud(20_000, 12);
    let mut last = 0.0;
    for sigma in [1.0, 5.0, 10.0, 25.0, 50.0] {
        let out = point_shift(&c, sigma, &mut Rng::new(13, 0)).unwrap();
        let mean = c
            .points
            .iter()
            .zip(&out.points)
            .map(|(a, b)| ((b.x - a.x).powi(2) + (b.y - a.y).powi(2) + (b.z - a.z).powi(2)).sqrt())
            .sum::<f64>()
            / c.len() as f64;
        assert!(mean > last, "σ {sigma}: {mean} <= {last}");
        last = mean;
    }
}

#[test]
fn beam_drop_removes_whole_sectors() {
    let c = cloud(5000, 21);
    let mut rng = Rng::new(3, 0);
    let out = beam_drop(&c, 32, 10, &mut rng).unwrap();
    let sector = |p: &RadarPoint| (((p.y.atan2(p.x) + std::f64::consts::PI) / std::f64::consts::TAU * 32.0) as usize) % 32;
    let lost: std::collections::BTreeSet<usize> =
        c.points.iter().filter(|p| !out.points.contains(p)).map(sector).collect();
    assert_eq!(lost.len(), 10);
    for p in &c.points {
        assert_eq!(out.points.contains(p), !lost.contains(&sector(p)));
    }
    assert!(beam_drop(&c, 32, 33, &mut rng).is_err());
}

#[test]
fn default_sweep_covers_beam_levels() {
    let cfg = SweepConfig::default();
    assert_eq!(cfg.levels[&CorruptionKind::BeamDrop], vec![10.0, 14.0]);
    for kind in [CorruptionKind::SpuriousPoints, CorruptionKind::NonPositionalDisturbance, CorruptionKind::PointShifting] {
        assert_eq!(cfg.levels[&kind], vec![3.0, 5.0]);
    }
}

#[test]
fn labels_resolve() {
    assert_eq!("C1".parse::<CorruptionKind>().unwrap(), CorruptionKind::SpuriousPoints);
    assert_eq!("C3".parse::<CorruptionKind>().unwrap(), CorruptionKind::BeamDrop);
    assert!("C9".parse::<CorruptionKind>().is_err());
}

#[test]
fn spec_application_is_seeded() {
    let c = cloud(300, 30);
    let grid = GridSpec::default();
    let spec = CorruptionSpec::new(CorruptionKind::SpuriousPoints).with_level(5.0).unwrap().with_seed(77);
    let a = spec.apply(&c, &[], &grid).unwrap();
    let b = spec.apply(&c, &[], &grid).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, spec.with_seed(78).apply(&c, &[], &grid).unwrap());
    assert!(CorruptionSpec::new(CorruptionKind::BeamDrop).with_level(2.5).is_err());
    assert!(CorruptionSpec::new(CorruptionKind::PointShifting).with_level(0.0).is_err());
}
