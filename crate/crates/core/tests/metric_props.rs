use proptest::prelude::*;

use sio_core::metric::{validate_metric, Metric, PointCloud, PointCloudFile};

fn metrics() -> impl Strategy<Value = Metric> {
    prop_oneof![
        Just(Metric::euclidean()),
        Just(Metric::lp(1.0)),
        (1.0f64..6.0).prop_map(Metric::lp),
        Just(Metric::max_norm()),
        (0.2f64..=1.0).prop_map(|a| Metric::snowflake(Metric::euclidean(), a)),
        (0.2f64..=1.0, 1.0f64..4.0).prop_map(|(a, p)| Metric::snowflake(Metric::lp(p), a)),
    ]
}

fn clouds() -> impl Strategy<Value = PointCloud> {
    (metrics(), 1usize..4, 2usize..25).prop_flat_map(|(metric, dim, n)| {
        prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), n)
            .prop_map(move |pts| PointCloud::new(metric.clone(), pts).unwrap())
    })
}

fn brute_diameter(c: &PointCloud) -> f64 {
    let mut d = 0.0f64;
    for i in 0..c.len() {
        for j in 0..c.len() {
            d = d.max(c.distance(i, j).unwrap());
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triangle_inequality_holds(c in clouds()) {
        let n = c.len();
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let (xy, yz, xz) = (c.distance(x, y).unwrap(), c.distance(y, z).unwrap(), c.distance(x, z).unwrap());
                    prop_assert!(xz <= (xy + yz) * (1.0 + 1e-12) + 1e-300, "{x} {y} {z}: {xz} > {xy} + {yz}");
                }
            }
        }
        let report = validate_metric(&c, 7);
        prop_assert!(report.triangle_ok && report.symmetry_ok && report.identity_ok);
        prop_assert!(report.exhaustive);
    }

    #[test]
    fn distance_is_bit_symmetric(c in clouds()) {
        for i in 0..c.len() {
            prop_assert_eq!(c.distance(i, i).unwrap(), 0.0);
            for j in 0..c.len() {
                prop_assert_eq!(c.distance(i, j).unwrap().to_bits(), c.distance(j, i).unwrap().to_bits());
            }
        }
    }

    #[test]
    fn cached_diameter_matches_pairwise_max(c in clouds()) {
        prop_assert_eq!(c.diameter(), brute_diameter(&c));
        prop_assert_eq!(c.recompute_diameter(), c.diameter());
    }

    #[test]
    fn rescaling_is_idempotent(c in clouds()) {
        prop_assume!(c.diameter() > 0.0);
        let (once, scale) = c.rescale_to_unit_diameter().unwrap();
        prop_assert!(once.diameter() <= 1.0);
        prop_assert!((once.diameter() - 1.0).abs() <= 1e-14);
        prop_assert!((scale - c.diameter()).abs() <= 1e-12 * c.diameter());
        let (twice, scale2) = once.rescale_to_unit_diameter().unwrap();
        prop_assert!((scale2 - 1.0).abs() <= 1e-14);
        for i in 0..c.len() {
            for j in 0..c.len() {
                let (a, b) = (once.distance(i, j).unwrap(), twice.distance(i, j).unwrap());
                prop_assert!((a - b).abs() <= 1e-14 * a.max(1e-300), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn file_round_trip(c in clouds()) {
        let file = PointCloudFile::from_cloud(&c);
        let text = serde_json::to_string(&file).unwrap();
        let back = serde_json::from_str::<PointCloudFile>(&text).unwrap().into_cloud().unwrap();
        for i in 0..c.len() {
            prop_assert_eq!(c.coords(i), back.coords(i));
        }
        prop_assert_eq!(c.diameter(), back.diameter());
    }
}

#[test]
fn rescale_examples() {
    let two = PointCloud::new(Metric::euclidean(), vec![vec![0.0], vec![2.0]]).unwrap();
    let (unit, scale) = two.rescale_to_unit_diameter().unwrap();
    assert_eq!((unit.distance(0, 1).unwrap(), scale), (1.0, 2.0));

    let (same, scale) = unit.rescale_to_unit_diameter().unwrap();
    assert_eq!((same.distance(0, 1).unwrap(), scale), (1.0, 1.0));

    let corners = vec![vec![0.0, 0.0], vec![0.75, 0.0], vec![0.0, 0.75], vec![0.75, 0.75]];
    let c = PointCloud::new(Metric::euclidean(), corners).unwrap();
    let expected = 0.75 * 2f64.sqrt();
    assert!((c.diameter() - expected).abs() <= 1e-15);
    let (u, scale) = c.rescale_to_unit_diameter().unwrap();
    assert!((scale - expected).abs() <= 1e-15);
    assert!(u.diameter() <= 1.0 && u.diameter() >= 1.0 - 1e-15);
}

#[test]
fn single_point_cannot_be_rescaled() {
    let c = PointCloud::new(Metric::euclidean(), vec![vec![1.0, 2.0]]).unwrap();
    assert!(c.rescale_to_unit_diameter().is_err());
}
