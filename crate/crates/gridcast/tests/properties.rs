//! Property tests over the numeric foundations: tensor algebra identities,
//! activation derivatives, encoding round trips, expected-improvement
//! bounds, scaler inversion, and binning conservation.

use gridcast::datasets::{bin_incidents, GridSpec, IncidentRecord, ScalerState};
use gridcast::hyperopt::{
    decode, encode, expected_improvement, sample_random, Dimension, SearchSpace,
};
use gridcast::tensor::{Activation, Tensor};
use proptest::prelude::*;

fn arb_shape() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 1..=4)
}

fn arb_tensor() -> impl Strategy<Value = Tensor> {
    arb_shape().prop_flat_map(|shape| {
        let n: usize = shape.iter().product();
        prop::collection::vec(-100.0f64..100.0, n)
            .prop_map(move |data| Tensor::new(shape.clone(), data).unwrap())
    })
}

proptest! {
    #[test]
    fn pad_then_crop_is_identity(t in arb_tensor(), seed in 0u64..1000) {
        let mut s = seed;
        let pads: Vec<(usize, usize)> = (0..t.rank())
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                (((s >> 16) % 3) as usize, ((s >> 32) % 3) as usize)
            })
            .collect();
        let padded = t.pad_zero(&pads).unwrap();
        let back = padded.crop(&pads).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn concat_is_associative(
        base in arb_tensor(),
        axis_pick in 0usize..4,
        la in 1usize..4,
        lb in 1usize..4,
        lc in 1usize..4,
    ) {
        let axis = axis_pick % base.rank();
        let make = |len: usize, fill: f64| {
            let mut shape = base.shape().to_vec();
            shape[axis] = len;
            Tensor::filled(&shape, fill)
        };
        let a = make(la, 1.0);
        let b = make(lb, 2.0);
        let c = make(lc, 3.0);
        let ab = Tensor::concat(&[&a, &b], axis).unwrap();
        let left = Tensor::concat(&[&ab, &c], axis).unwrap();
        let flat = Tensor::concat(&[&a, &b, &c], axis).unwrap();
        prop_assert_eq!(left, flat);
    }

    #[test]
    fn activation_derivative_matches_central_differences(z in -3.0f64..3.0) {
        let h = 1e-5;
        for a in Activation::ALL {
            // keep clear of the relu kink where the derivative jumps
            if a == Activation::Relu && z.abs() < 1e-2 {
                continue;
            }
            let fd = (a.apply(z + h) - a.apply(z - h)) / (2.0 * h);
            let an = a.derivative(z);
            let denom = an.abs().max(fd.abs()).max(1e-9);
            prop_assert!(
                ((an - fd) / denom).abs() < 1e-6,
                "{a:?} at {z}: analytic {an} vs fd {fd}"
            );
        }
    }

    #[test]
    fn encode_decode_round_trip(seed in 0u64..10_000) {
        use rand::SeedableRng;
        let space = SearchSpace::new(vec![
            Dimension::real("x", -5.0, 5.0),
            Dimension::log_real("lr", 1e-6, 1e-1),
            Dimension::integer("n", -3, 12),
            Dimension::categorical("c", &["a", "b", "c", "d"]),
            Dimension::binary_feature("flag"),
        ]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let theta = sample_random(&space, &mut rng);
        let enc = encode(&theta, &space).unwrap();
        prop_assert_eq!(enc.len(), space.encoded_width());
        prop_assert!(enc.iter().all(|v| v.is_finite()));
        let back = decode(&enc, &space).unwrap();
        for (a, b) in theta.iter().zip(&back) {
            match (a, b) {
                (gridcast::hyperopt::ParamValue::Real(x), gridcast::hyperopt::ParamValue::Real(y)) =>
                    prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0)),
                _ => prop_assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn expected_improvement_is_nonnegative_and_bounded(
        mu in -50.0f64..50.0,
        sigma in 0.0f64..20.0,
        f_star in -50.0f64..50.0,
    ) {
        let ei = expected_improvement(mu, sigma, f_star);
        prop_assert!(ei >= 0.0);
        prop_assert!(ei.is_finite());
        // EI never exceeds the optimistic bound max(f*-mu,0) + sigma
        prop_assert!(ei <= (f_star - mu).max(0.0) + sigma + 1e-12);
    }

    #[test]
    fn ei_monotone_nonincreasing_in_mu(
        sigma in 0.0f64..10.0,
        f_star in -5.0f64..5.0,
        mu in -10.0f64..10.0,
        bump in 0.001f64..5.0,
    ) {
        let lo = expected_improvement(mu, sigma, f_star);
        let hi = expected_improvement(mu + bump, sigma, f_star);
        prop_assert!(hi <= lo + 1e-9);
    }

    #[test]
    fn scaler_round_trip(lo in -100.0f64..100.0, width in 0.001f64..200.0, frac in 0.0f64..1.0) {
        let bounds = (lo, lo + width);
        let x = lo + frac * width;
        let back = ScalerState::unscale_value(bounds, ScalerState::scale_value(bounds, x));
        prop_assert!((back - x).abs() < 1e-9 * x.abs().max(1.0));
    }

    #[test]
    fn binning_conserves_in_range_records(seed in 0u64..500, n in 0usize..60) {
        use chrono::{TimeZone, Utc, TimeDelta};
        use rand::{Rng, SeedableRng};
        let grid = GridSpec { q: 3, p: 3, lat_min: 0.0, lat_max: 3.0, lon_min: 0.0, lon_max: 3.0 };
        let start = Utc.with_ymd_and_hms(2020, 1, 6, 0, 0, 0).unwrap();
        let end = start + TimeDelta::hours(48);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let records: Vec<IncidentRecord> = (0..n)
            .map(|_| IncidentRecord {
                timestamp: start + TimeDelta::minutes(rng.random_range(-300..3480)),
                latitude: rng.random_range(-1.0..4.0),
                longitude: rng.random_range(-1.0..4.0),
                category: "Medic Response".into(),
            })
            .collect();
        let (cube, _, report) = bin_incidents(&records, &grid, 8, (start, end)).unwrap();
        let in_scope = records.iter().filter(|r| {
            r.timestamp >= start
                && r.timestamp < end
                && (0.0..3.0).contains(&r.latitude)
                && (0.0..3.0).contains(&r.longitude)
        }).count();
        prop_assert_eq!(cube.sum() as usize, in_scope);
        prop_assert_eq!(report.binned, in_scope);
        prop_assert_eq!(
            report.binned + report.dropped_outside_box + report.dropped_outside_range,
            n
        );
    }
}
