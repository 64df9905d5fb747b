use roslab::primitives::*;
use roslab::stats::summarize;
use roslab::Error;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + b.abs())
}

#[test]
fn moments_examples() {
    let m = DistributionSpec::exponential(2.0).moments();
    assert!(close(m.mean, 0.5) && close(m.variance, 0.25) && close(m.third_abs, 0.75));
    let m = DistributionSpec::deterministic(1.0).moments();
    assert_eq!((m.mean, m.variance, m.third_abs), (1.0, 0.0, 1.0));
    let m = DistributionSpec::Gamma { shape: 2.0, rate: 2.0 }.moments();
    assert!(close(m.mean, 1.0) && close(m.variance, 0.5) && close(m.third_abs, 3.0));
}

#[test]
fn survival_examples() {
    let e = DistributionSpec::exponential(1.0);
    assert_eq!(e.survival(0.0), 1.0);
    assert!(close(e.survival(1.0), (-1.0f64).exp()));
    assert_eq!(DistributionSpec::deterministic(2.0).survival(3.0), 0.0);
}

#[test]
fn atoms_are_rejected_where_laws_must_be_continuous() {
    let d = DistributionSpec::deterministic(1.0);
    for role in [Role::Interarrival, Role::Service, Role::InitialResidual] {
        assert!(matches!(d.validate(role), Err(Error::Config(_))));
    }
    for role in [Role::FirstArrival, Role::Patience, Role::InitialPatience] {
        d.validate(role).unwrap();
    }
    assert!(DistributionSpec::exponential(-1.0).validate(Role::Patience).is_err());
}

#[test]
fn decomposition_identity_on_hand_built_path() {
    let s = RenewalStream::from_interevents(1.0, 0.5, vec![0.7, 0.9], false);
    let d = renewal_decompose(&s, 1.0).unwrap();
    assert_eq!(d.count, 1);
    assert!(close(d.martingale, 0.3));
    assert!(close(d.remainder, 0.7));
    assert!(matches!(renewal_decompose(&s, -1.0), Err(Error::Domain(_))));
}

#[test]
fn deterministic_stream_has_no_martingale_part() {
    let s = RenewalStream::from_interevents(0.5, 0.5, vec![0.5; 30], false);
    for k in 0..25 {
        let d = s.decompose(0.37 * k as f64).unwrap();
        assert!(d.martingale.abs() < 1e-12);
        assert!((d.count as f64 - d.remainder).abs() < 1e-9);
    }
}

#[test]
fn empty_sums_at_time_zero() {
    let law = DistributionSpec::exponential(1.0);
    for delay in [None, Some(1.5)] {
        let s = RenewalStream::new(&law, delay, 5).unwrap();
        let d = s.decompose(0.0).unwrap();
        assert_eq!((d.count, d.martingale, d.remainder), (0, 0.0, 0.0));
    }
}

#[test]
fn identity_holds_on_random_streams() {
    let laws = [
        DistributionSpec::exponential(1.3),
        DistributionSpec::Gamma { shape: 0.5, rate: 0.5 },
        DistributionSpec::Lognormal { median: 1.0, sigma: 0.8 },
        DistributionSpec::UniformShifted { shift: 0.2, width: 1.0 },
    ];
    for (i, law) in laws.iter().enumerate() {
        let mut s = RenewalStream::new(law, (i % 2 == 1).then_some(0.4), i as u64).unwrap();
        s.realize_until(40.0).unwrap();
        for &t in s.jumps().iter().take_while(|&&t| t <= 40.0) {
            let d = s.decompose(t).unwrap();
            assert!((d.count as f64 - d.martingale - d.remainder).abs() < 1e-9);
        }
    }
}

#[test]
fn martingale_part_has_mean_zero() {
    let law = DistributionSpec::Hyperexponential { probs: vec![0.5, 0.5], rates: vec![0.5, 2.0] };
    let t = 10.0;
    let o: Vec<f64> = (0..2_000u64)
        .map(|seed| {
            let mut s = RenewalStream::new(&law, None, seed).unwrap();
            s.realize_until(t).unwrap();
            s.decompose(t).unwrap().martingale
        })
        .collect();
    let sum = summarize(&o);
    assert!(sum.mean.abs() < 3.0 * (sum.variance / o.len() as f64).sqrt(), "{sum:?}");
}

#[test]
fn scaling_examples() {
    let s = RenewalStream::from_interevents(1.0, 1.0, vec![1.0; 200], false);
    assert!(close(scale_renewal(&s, 100.0, ScaleMode::Fluid, 1.0, 1.0).unwrap(), 1.0));
    assert!(scale_renewal(&s, 100.0, ScaleMode::Diffusion, 1.0, 1.0).unwrap().abs() < 1e-12);
    assert!(matches!(scale_renewal(&s, 0.5, ScaleMode::Fluid, 1.0, 1.0), Err(Error::Domain(_))));
}

#[test]
fn substreams_are_reproducible_and_distinct() {
    assert_eq!(derive_seed(1, &[2, 3]), derive_seed(1, &[2, 3]));
    assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
    assert_ne!(replication_seed(9, 100, 0), replication_seed(9, 100, 1));
}
