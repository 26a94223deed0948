mod common;

use cobra_ensemble::classifier_cobra::ClassifierCobraModel;
use cobra_ensemble::cobra::CobraModel;
use cobra_ensemble::ewa::{gibbs_weights, EwaModel};
use cobra_ensemble::machines::{Machine, Model, Output, PredictionTable};
use cobra_ensemble::rng::XorShift64Star;
use cobra_ensemble::{MachineSet, Matrix};
use common::*;
use num_bigint::{BigInt, Sign};
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Table machines defined on the rows of `points`; `outputs[j][i]` is
/// machine `j` at row `i`.
fn table_set(points: &Matrix, outputs: &[Vec<Output>]) -> MachineSet {
    MachineSet::new(
        outputs
            .iter()
            .enumerate()
            .map(|(j, o)| {
                Machine::new(
                    format!("m{j}"),
                    Model::Table(PredictionTable::new(points, o.clone()).unwrap()),
                )
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn cobra_matches_literal_loop() {
    let mut rng = XorShift64Star::new(11);
    for trial in 0..100 {
        let l = 1 + rng.below(40);
        let q = 10;
        let m = 1 + rng.below(4);
        let d = 1 + rng.below(3);
        let points = random_matrix(&mut rng, l + q, d, -1.0, 1.0);
        // Quarter-step values make exact |a - b| == eps ties common.
        let preds: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..l + q)
                    .map(|_| (rng.uniform(-2.0, 2.0) * 4.0).round() / 4.0)
                    .collect()
            })
            .collect();
        let responses: Vec<f64> = (0..l).map(|_| rng.normal()).collect();
        let eps = if trial % 2 == 0 {
            0.25 * (1 + rng.below(6)) as f64
        } else {
            rng.uniform(0.01, 2.0)
        };
        let alpha = 1 + rng.below(m);
        let outputs: Vec<Vec<Output>> = preds
            .iter()
            .map(|p| p.iter().map(|&v| Output::Real(v)).collect())
            .collect();
        let cache: Vec<Vec<f64>> = preds.iter().map(|p| p[..l].to_vec()).collect();
        let model = CobraModel::from_predictions(
            table_set(&points, &outputs),
            cache.clone(),
            responses.clone(),
            eps,
            alpha,
        )
        .unwrap();
        for k in l..l + q {
            let outs: Vec<f64> = preds.iter().map(|p| p[k]).collect();
            let got = model.predict(points.row(k)).unwrap();
            let want = cobra_oracle(&cache, &responses, &outs, eps, alpha);
            assert_eq!(got.to_bits(), want.to_bits(), "trial {trial}");
        }
    }
}

#[test]
fn classifier_matches_literal_loop() {
    let mut rng = XorShift64Star::new(12);
    for trial in 0..100 {
        let l = 1 + rng.below(30);
        let q = 10;
        let m = 1 + rng.below(3);
        let k = 2 + rng.below(3);
        let points = random_matrix(&mut rng, l + q, 2, -1.0, 1.0);
        let labels: Vec<Vec<usize>> = (0..m).map(|_| (0..l + q).map(|_| rng.below(k)).collect()).collect();
        let responses: Vec<usize> = (0..l).map(|_| rng.below(k)).collect();
        let alpha = 1 + rng.below(m);
        let outputs: Vec<Vec<Output>> = labels
            .iter()
            .map(|p| p.iter().map(|&v| Output::Label(v)).collect())
            .collect();
        let cache: Vec<Vec<usize>> = labels.iter().map(|p| p[..l].to_vec()).collect();
        let names = (0..k).map(|c| c.to_string()).collect();
        let model = ClassifierCobraModel::from_labels(
            table_set(&points, &outputs),
            cache.clone(),
            responses.clone(),
            names,
            alpha,
        )
        .unwrap();
        for row in l..l + q {
            let outs: Vec<usize> = labels.iter().map(|p| p[row]).collect();
            assert_eq!(
                model.predict(points.row(row)).unwrap(),
                classifier_oracle(&cache, &responses, &outs, alpha, k),
                "trial {trial}"
            );
        }
    }
}

const BITS: u64 = 200;

/// Exact value of a finite double as `num / 2^shift`.
fn exact(v: f64) -> (BigInt, u64) {
    let bits = v.to_bits();
    let neg = bits >> 63 == 1;
    let e = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1 << 52) - 1);
    let (m, e) = if e == 0 {
        (frac, -1074)
    } else {
        (frac | (1 << 52), e - 1075)
    };
    let mut n = BigInt::from(m);
    if neg {
        n = -n;
    }
    if e >= 0 {
        (n << e as usize, 0)
    } else {
        (n, (-e) as u64)
    }
}

/// `round(v * 2^BITS)`-ish fixed-point value of a double.
fn fixed(v: f64) -> BigInt {
    let (n, shift) = exact(v);
    if shift > BITS {
        n >> (shift - BITS) as usize
    } else {
        n << (BITS - shift) as usize
    }
}

/// `exp(-x)` in fixed point for fixed-point `x >= 0`.
fn fixed_exp_neg(x: &BigInt) -> BigInt {
    let one = BigInt::one() << BITS as usize;
    // Reduce until x / 2^k < 1, then square back.
    let mut k = 0usize;
    let mut r = x.clone();
    while r > one {
        r >>= 1;
        k += 1;
    }
    let mut term = one.clone();
    let mut sum = one.clone();
    for i in 1..80 {
        term = -((&term * &r) >> BITS as usize) / BigInt::from(i);
        if term.is_zero() {
            break;
        }
        sum += &term;
    }
    for _ in 0..k {
        sum = (&sum * &sum) >> BITS as usize;
        if sum.is_zero() {
            break;
        }
    }
    sum
}

/// Gibbs weights `exp(-r_j/beta) / sum` in 200-bit fixed point.
fn bigint_weights(risks: &[f64], beta: f64) -> Vec<f64> {
    let min = risks.iter().copied().fold(f64::INFINITY, f64::min);
    let b = fixed(beta);
    let e: Vec<BigInt> = risks
        .iter()
        .map(|&r| {
            let x = ((fixed(r) - fixed(min)) << BITS as usize) / &b;
            fixed_exp_neg(&x)
        })
        .collect();
    let total: BigInt = e.iter().sum();
    e.iter()
        .map(|v| {
            let q = (v << 64usize) / &total;
            assert!(q.sign() != Sign::Minus);
            q.abs().to_f64().unwrap() / 2f64.powi(64)
        })
        .collect()
}

#[test]
fn gibbs_weights_match_high_precision_oracle() {
    let mut rng = XorShift64Star::new(13);
    for trial in 0..200 {
        let m = 1 + rng.below(8);
        let risks: Vec<f64> = (0..m).map(|_| rng.uniform(0.0, 5.0)).collect();
        let beta = 10f64.powf(rng.uniform(-2.0, 2.0));
        let got = gibbs_weights(&risks, beta).unwrap();
        let want = bigint_weights(&risks, beta);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12, "trial {trial}: {g} vs {w}");
        }
    }
}

#[test]
fn fixed_point_exp_sanity() {
    let e1 = fixed_exp_neg(&fixed(1.0)).to_f64().unwrap() / 2f64.powi(BITS as i32);
    assert!((e1 - (-1.0f64).exp()).abs() < 1e-15);
    let e0 = fixed_exp_neg(&BigInt::zero());
    assert_eq!(e0, BigInt::one() << BITS as usize);
}

#[test]
fn ewa_prediction_is_weighted_sum() {
    let mut rng = XorShift64Star::new(14);
    let points = random_matrix(&mut rng, 20, 2, -1.0, 1.0);
    let preds: Vec<Vec<f64>> = (0..3).map(|_| (0..20).map(|_| rng.normal()).collect()).collect();
    let outputs: Vec<Vec<Output>> = preds
        .iter()
        .map(|p| p.iter().map(|&v| Output::Real(v)).collect())
        .collect();
    let risks = vec![0.3, 0.1, 0.7];
    let model = EwaModel::from_risks(table_set(&points, &outputs), risks.clone(), 0.2).unwrap();
    let w = bigint_weights(&risks, 0.2);
    for (i, row) in points.iter_rows().enumerate() {
        let want: f64 = (0..3).map(|j| w[j] * preds[j][i]).sum();
        assert!((model.predict(row).unwrap() - want).abs() < 1e-12);
    }
}
