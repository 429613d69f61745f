use proptest::prelude::*;
use rcrobust::io::tables::{read_clouds_from, write_clouds_to};
use rcrobust::io::voxel::{decode_voxel_grid, encode_voxel_grid};
use rcrobust::io::Pnm;
use rcrobust::types::point_in_box;
use rcrobust::{BoxAnnotation, GridSpec, PointCloud, RadarPoint, Rng, VoxelGrid};

// Independent membership: express the offset in the box axes via dot
// products with the box's unit vectors.
fn oracle_inside(p: [f64; 3], b: &BoxAnnotation) -> bool {
    let ax = [b.yaw.cos(), b.yaw.sin()];
    let ay = [-b.yaw.sin(), b.yaw.cos()];
    let d = [p[0] - b.center[0], p[1] - b.center[1]];
    let u = d[0] * ax[0] + d[1] * ax[1];
    let w = d[0] * ay[0] + d[1] * ay[1];
    2.0 * u.abs() <= b.size[0] && 2.0 * w.abs() <= b.size[1] && 2.0 * (p[2] - b.center[2]).abs() <= b.size[2]
}

#[test]
fn quarter_turn_box_swaps_extents() {
    let b = BoxAnnotation::new([0.0, 0.0, 0.0], [4.0, 2.0, 2.0], std::f64::consts::FRAC_PI_2).unwrap();
    let at = |x, y| RadarPoint::new(x, y, 0.0, 0.0, 0.0);
    assert!(point_in_box(&at(0.0, 1.9), &b));
    assert!(!point_in_box(&at(1.9, 0.0), &b));
    assert!(point_in_box(&at(0.9, -1.9), &b));
    assert!(!point_in_box(&RadarPoint::new(0.0, 0.0, 1.1, 0.0, 0.0), &b));
}

#[test]
fn box_membership_matches_oracle() {
    let mut rng = Rng::new(1, 0);
    let mut agree_inside = 0;
    for _ in 0..10_000 {
        let b = BoxAnnotation::new(
            [rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(-1.0, 1.0)],
            [rng.uniform(0.5, 6.0), rng.uniform(0.5, 6.0), rng.uniform(0.5, 3.0)],
            rng.uniform(-std::f64::consts::PI, std::f64::consts::PI),
        )
        .unwrap();
        let p = [
            b.center[0] + rng.uniform(-4.0, 4.0),
            b.center[1] + rng.uniform(-4.0, 4.0),
            b.center[2] + rng.uniform(-2.0, 2.0),
        ];
        let got = point_in_box(&RadarPoint::new(p[0], p[1], p[2], 0.0, 0.0), &b);
        assert_eq!(got, oracle_inside(p, &b), "{p:?} {b:?}");
        agree_inside += got as usize;
    }
    assert!(agree_inside > 500, "{agree_inside}");
}

#[test]
fn grid_index_examples() {
    let g = GridSpec::default();
    assert_eq!(g.cell_size(0), 0.8);
    assert_eq!(g.voxel_index([-51.2, 0.0, -5.0]).unwrap()[0], 0);
    assert_eq!(g.voxel_index([51.2, 0.0, 3.0]).unwrap(), [127, 64, 7]);
    assert_eq!(g.voxel_index([0.0, 0.0, 0.0]).unwrap()[0], 64);
    assert!(g.voxel_index([51.3, 0.0, 0.0]).is_none());
    assert!(g.voxel_index([f64::NAN, 0.0, 0.0]).is_none());
}

#[test]
fn voxel_index_sweeps_every_cell_in_order() {
    let g = GridSpec::default();
    let mut seen = vec![false; 128];
    let mut last = 0;
    for i in 0..=100_000 {
        let x = -51.2 + 102.4 * i as f64 / 100_000.0;
        let ix = g.voxel_index([x.min(51.2), 0.0, 0.0]).unwrap()[0];
        assert!(ix >= last);
        last = ix;
        seen[ix] = true;
    }
    assert!(seen.iter().all(|&s| s));
}

#[test]
fn rng_streams_reproduce() {
    for (seed, stream) in [(0, 0), (7, 3), (u64::MAX, 1 << 40)] {
        let mut a = Rng::new(seed, stream);
        let mut b = Rng::new(seed, stream);
        for _ in 0..10_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }
    assert_ne!(Rng::new(1, 0).next_u64(), Rng::new(1, 1).next_u64());
}

fn finite() -> impl Strategy<Value = f64> {
    -1e6f64..1e6
}

proptest! {
    #[test]
    fn voxel_index_is_monotone(a in -51.2f64..=51.2, b in -51.2f64..=51.2) {
        let g = GridSpec::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let il = g.voxel_index([lo, lo, -5.0]).unwrap();
        let ih = g.voxel_index([hi, hi, -5.0]).unwrap();
        prop_assert!(il[0] <= ih[0] && il[1] <= ih[1]);
    }

    #[test]
    fn cloud_csv_round_trips(pts in prop::collection::vec((finite(), finite(), finite(), finite(), finite()), 0..40)) {
        let cloud = PointCloud::new(
            "frame_7",
            pts.iter().map(|&(x, y, z, r, v)| RadarPoint::new(x, y, z, r, v)).collect(),
        );
        let mut buf = Vec::new();
        write_clouds_to(&mut buf, &[&cloud]).unwrap();
        let back = read_clouds_from(buf.as_slice()).unwrap();
        if cloud.is_empty() {
            prop_assert!(back.is_empty() || back[0].is_empty());
        } else {
            prop_assert_eq!(back, vec![cloud]);
        }
    }

    #[test]
    fn pnm_round_trips(w in 1usize..9, h in 1usize..9, color in any::<bool>(), seed in any::<u64>()) {
        let channels = if color { 3 } else { 1 };
        let mut rng = Rng::new(seed, 0);
        let data: Vec<u8> = (0..w * h * channels).map(|_| rng.index(256) as u8).collect();
        let img = Pnm::new(w, h, channels, data).unwrap();
        prop_assert_eq!(Pnm::decode(&img.encode()).unwrap(), img);
    }

    #[test]
    fn voxel_grid_round_trips(nx in 1usize..6, ny in 1usize..6, nz in 1usize..4, seed in any::<u64>()) {
        let spec = GridSpec::new([0.0, nx as f64], [-1.0, ny as f64], [0.0, 2.0], [nx, ny, nz]).unwrap();
        let mut rng = Rng::new(seed, 0);
        let n = spec.len();
        let grid = VoxelGrid::from_fields(
            spec,
            (0..n).map(|_| rng.standard_normal()).collect(),
            (0..n).map(|_| rng.standard_normal()).collect(),
            (0..n).map(|_| rng.index(9) as u32).collect(),
        ).unwrap();
        prop_assert_eq!(decode_voxel_grid(&encode_voxel_grid(&grid)).unwrap(), grid);
    }
}

#[test]
fn truncated_voxel_file_is_rejected() {
    let spec = GridSpec::new([0.0, 2.0], [0.0, 2.0], [0.0, 1.0], [2, 2, 1]).unwrap();
    let bytes = encode_voxel_grid(&VoxelGrid::zeros(spec));
    assert!(decode_voxel_grid(&bytes[..bytes.len() - 3]).is_err());
    assert!(decode_voxel_grid(b"XXXX").is_err());
}
