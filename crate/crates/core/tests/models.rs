mod support;

use cadsvm::datasets::{generate_toy, split, ToyConfig};
use cadsvm::kernels::{design_matrix, graph_laplacian, BasisSet};
use cadsvm::losses::{loss_01cd, loss_mha, Label, LossParams};
use cadsvm::models::*;
use cadsvm::{Dataset, LabeledSample};
use nalgebra::{dmatrix, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::svm_dual::{svm_by_dual, svm_primal};

fn dataset(points: &[(&[f64], i64)]) -> Dataset {
    let samples = points
        .iter()
        .map(|(x, y)| LabeledSample {
            x: x.to_vec(),
            y: Label::from_value(*y).unwrap(),
        })
        .collect();
    Dataset::new("test", samples).unwrap()
}

fn toy(r: f64, seed: u64, total: usize) -> Dataset {
    generate_toy(&ToyConfig { r, total, seed }).unwrap()
}

fn train_values(model: &TrainedModel, data: &Dataset) -> (DVector<f64>, DVector<f64>) {
    model.decision_values(&data.features()).unwrap()
}

const SQRT10: f64 = 3.1622776601683795;

// ---- QP assembly ----

#[test]
fn plain_svm_assembly_shape() {
    let design = dmatrix![1.0, 0.5; 0.5, 1.0];
    let mut rows = hinge_rows(0, 1.0);
    rows.extend(hinge_rows(1, -1.0));
    let loss = LossRows { rows, slack_cost: vec![0.5, 0.5] };
    let qp = assemble_training_qp(&design, &loss, 0, 1e-3, 0.0).unwrap();
    assert_eq!((qp.n_vars(), qp.n_cons()), (4, 4));
    // ξ_1 ≥ 1 − h_1 is the row −Φ_1 w − ξ_1 ≤ −1.
    assert_eq!(qp.g().row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, -0.5, -1.0, 0.0]);
    assert_eq!(qp.h()[0], -1.0);
    assert_eq!(qp.q().as_slice(), &[0.0, 0.0, 0.5, 0.5]);
    assert_eq!(qp.p()[(0, 0)], 1e-3);
}

#[test]
fn ambiguous_sample_contributes_only_its_own_row() {
    let p = LossParams::calibrated(0.2, 0.3).unwrap();
    let rows = mha_rows(0, Label::Ambiguous, &p);
    assert_eq!(rows.len(), 2);
    let amb = p.eta() * p.d();
    assert_eq!(rows[0], LossRow { sample: 0, h_coef: 0.0, r_coef: amb * p.beta(), offset: amb });
    assert_eq!(rows[1], LossRow::nonnegative(0));
    let qp = assemble_training_qp(&dmatrix![1.0], &LossRows { rows, slack_cost: vec![1.0] }, 1, 1.0, 1.0).unwrap();
    // Variables (w, u, ξ): the w column is empty.
    assert_eq!(qp.g()[(0, 0)], 0.0);
    assert_eq!(qp.g()[(0, 1)], amb * p.beta());
}

#[test]
fn cro_rows_are_cad_rows_without_ambiguity_and_with_unit_eta() {
    let p = LossParams::calibrated(0.06, 0.2).unwrap().with_eta(1.0).unwrap();
    for (i, y) in [Label::Positive, Label::Negative].into_iter().enumerate() {
        assert_eq!(mh_rows(i, y.as_f64(), &p, 1.0), mha_rows(i, y, &p));
    }
}

#[test]
fn assembly_rejects_bad_input() {
    let loss = LossRows { rows: hinge_rows(0, 1.0), slack_cost: vec![1.0, 1.0] };
    assert!(assemble_training_qp(&dmatrix![1.0; 1.0], &loss, 0, 1.0, 0.0).is_err());
    let loss = LossRows { rows: hinge_rows(0, 1.0), slack_cost: vec![1.0] };
    assert!(assemble_training_qp(&dmatrix![1.0, 2.0], &loss, 1, 1.0, 0.0).is_err());
    assert!(assemble_training_qp(&dmatrix![1.0], &loss, 0, 0.0, 0.0).is_err());
}

// ---- SVM ----

#[test]
fn separable_pair() {
    let data = dataset(&[(&[-1.0], -1), (&[1.0], 1)]);
    let model = train_svm(&data, 1e-5, 1.0).unwrap();
    assert!(predict(&model, &[-1.0]).unwrap().h_value < 0.0);
    assert!(predict(&model, &[1.0]).unwrap().h_value > 0.0);
    assert!(model.u().iter().all(|&v| v == 0.0));
}

fn six_points() -> Dataset {
    dataset(&[
        (&[0.0, 0.0], -1),
        (&[0.4, 0.1], -1),
        (&[0.9, 0.8], 1),
        (&[1.0, 0.2], 1),
        (&[0.5, 0.5], -1),
        (&[0.6, 0.4], 1),
    ])
}

#[test]
fn svm_matches_dual_coordinate_ascent() {
    let data = six_points();
    let y: Vec<f64> = data.labels().iter().map(|l| l.as_f64()).collect();
    for &(lambda, sigma) in &[(1e-2, 0.5), (1e-3, 1.0), (1e-1, 0.3)] {
        let phi = design_matrix(&BasisSet::new(data.features(), sigma).unwrap(), &data.features()).unwrap();
        let oracle = svm_primal(&phi, &y, lambda, &svm_by_dual(&phi, &y, lambda, 20_000));
        for backend in [Backend::Structured, Backend::Dense] {
            let trainer = Trainer::new(TrainOptions { backend, ..Default::default() });
            let model = trainer.svm(&data, lambda, sigma).unwrap();
            let obj = svm_primal(&phi, &y, lambda, model.w());
            assert!((obj - oracle).abs() < 1e-4, "{backend:?} λ={lambda}: {obj} vs {oracle}");
            assert!(obj <= 1.0, "zero model has objective 1");
        }
    }
}

#[test]
fn larger_lambda_never_grows_w() {
    let data = toy(0.0, 3, 80);
    let mut previous = f64::INFINITY;
    for lambda in [1e-7, 1e-5, 1e-3, 1e-1] {
        let norm = train_svm(&data, lambda, 0.3).unwrap().w().norm();
        assert!(norm <= previous + 1e-8, "λ={lambda}: {norm} > {previous}");
        previous = norm;
    }
}

#[test]
fn svm_rejects_bad_data() {
    let one_class = dataset(&[(&[0.0], 1), (&[1.0], 1)]);
    assert!(matches!(train_svm(&one_class, 1e-3, 1.0), Err(cadsvm::Error::InvalidData(_))));
    let with_ambiguous = dataset(&[(&[0.0], 1), (&[1.0], -1), (&[2.0], 0)]);
    assert!(train_svm(&with_ambiguous, 1e-3, 1.0).is_err());
}

// ---- random relabelling ----

#[test]
fn rl_without_ambiguous_samples_is_the_plain_method() {
    let data = toy(0.0, 4, 60);
    let a = train_svm(&data, 1e-3, SQRT10).unwrap();
    let b = train_svm_rl(&data, 1e-3, SQRT10, 99).unwrap();
    assert_eq!(a.w(), b.w());
    assert_eq!(b.method(), Method::SvmRl);
    let a = train_cro_svm(&data, 1e-3, 1e-3, SQRT10, 0.2).unwrap();
    let b = train_cro_svm_rl(&data, 1e-3, 1e-3, SQRT10, 0.2, 99).unwrap();
    assert_eq!((a.w(), a.u()), (b.w(), b.u()));
}

#[test]
fn rl_is_deterministic_per_seed() {
    let data = toy(0.5, 4, 60);
    let a = train_svm_rl(&data, 1e-3, SQRT10, 5).unwrap();
    let b = train_svm_rl(&data, 1e-3, SQRT10, 5).unwrap();
    assert_eq!(a.w().as_slice(), b.w().as_slice());
    let a = train_cro_svm_rl(&data, 1e-3, 1e-5, SQRT10, 0.06, 5).unwrap();
    let b = train_cro_svm_rl(&data, 1e-3, 1e-5, SQRT10, 0.06, 5).unwrap();
    assert_eq!(a.u().as_slice(), b.u().as_slice());
}

#[test]
fn relabelling_is_a_fair_coin() {
    let samples = (0..10_000)
        .map(|i| LabeledSample { x: vec![i as f64], y: Label::Ambiguous })
        .collect();
    let data = Dataset::new("amb", samples).unwrap();
    let relabelled = relabel_ambiguous(&data, 17).unwrap();
    let counts = relabelled.counts();
    assert_eq!(counts.ambiguous, 0);
    assert!((counts.positive as f64 / 10_000.0 - 0.5).abs() < 0.02);
}

// ---- LapSVM ----

#[test]
fn lapsvm_without_laplacian_is_the_svm() {
    let data = toy(0.0, 6, 60);
    let a = train_svm(&data, 1e-3, SQRT10).unwrap();
    let b = train_lapsvm(&data, 1e-3, SQRT10, SQRT10, 0.0).unwrap();
    assert!((a.w() - b.w()).norm() < 1e-6);
}

#[test]
fn laplacian_weight_smooths_the_function() {
    let data = toy(0.5, 6, 60);
    let lap = graph_laplacian(&data.features(), 0.3).unwrap();
    let smoothness = |tau: f64| {
        let model = train_lapsvm(&data, 1e-3, 0.5, 0.3, tau).unwrap();
        let (h, _) = train_values(&model, &data);
        lap.quadratic_form(h.as_slice())
    };
    assert!(smoothness(1.0) < smoothness(0.0));
}

#[test]
fn lapsvm_follows_unlabelled_chains() {
    // Two chains of unlabelled points with one labelled end each.
    let mut points: Vec<(Vec<f64>, i64)> = Vec::new();
    for k in 0..8 {
        points.push((vec![0.4 * k as f64], if k == 0 { -1 } else { 0 }));
        points.push((vec![6.0 + 0.4 * k as f64], if k == 7 { 1 } else { 0 }));
    }
    let refs: Vec<(&[f64], i64)> = points.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
    let data = dataset(&refs);
    let model = train_lapsvm(&data, 1e-3, 1.0, 0.4, 1.0).unwrap();
    for (x, _) in &points {
        let h = predict(&model, x).unwrap().h_value;
        assert_eq!(h > 0.0, x[0] > 4.5, "x = {}, h = {h}", x[0]);
    }
}

// ---- two-step ----

#[test]
fn two_step_without_ambiguity_accepts_everything() {
    let data = toy(0.0, 8, 60);
    let model = train_two_step(&data, 1e-3, 1e-3, SQRT10, 0.2, 0.2).unwrap();
    let (_, r) = train_values(&model, &data);
    assert!(r.iter().all(|&v| v > 0.0));
    assert!(!model.used_fallback());
    let svm = train_svm(&data, 1e-3, SQRT10).unwrap();
    assert!((model.w() - svm.w()).norm() < 1e-6);
}

#[test]
fn two_step_rejects_the_mixed_region() {
    let data = toy(0.9, 8, 200);
    let model = train_two_step(&data, 1e-5, 1e-5, SQRT10, 0.2, 0.2).unwrap();
    let (_, r) = train_values(&model, &data);
    let mixed: Vec<usize> = (0..data.len()).filter(|&i| data.samples()[i].x[1] >= 0.5).collect();
    let rejected = mixed.iter().filter(|&&i| r[i] <= 0.0).count();
    assert!(2 * rejected > mixed.len(), "{rejected} of {}", mixed.len());
}

#[test]
fn equal_class_weights_give_an_unweighted_rejector() {
    let data = toy(0.5, 9, 60);
    let (c, lambda_rej) = (0.06, 1e-4);
    let model = train_two_step(&data, 1e-3, lambda_rej, SQRT10, c, c).unwrap();
    // Ambiguous against the rest, with λ rescaled by the common weight.
    let target = data
        .with_samples(
            data.samples()
                .iter()
                .map(|s| LabeledSample {
                    x: s.x.clone(),
                    y: if s.y.is_ambiguous() { Label::Negative } else { Label::Positive },
                })
                .collect(),
        )
        .unwrap();
    let svm = train_svm(&target, lambda_rej / c, SQRT10).unwrap();
    let y: Vec<f64> = target.labels().iter().map(|l| l.as_f64()).collect();
    let phi = design_matrix(&BasisSet::new(data.features(), SQRT10).unwrap(), &data.features()).unwrap();
    let a = svm_primal(&phi, &y, lambda_rej / c, model.u());
    let b = svm_primal(&phi, &y, lambda_rej / c, svm.w());
    // The rejector objective is this one scaled by c, so its tolerance is 1e-8 / c.
    assert!((a - b).abs() < 1e-8 / c, "{a} vs {b}");
    let (_, r) = train_values(&model, &data);
    let (h, _) = train_values(&svm, &data);
    assert!((r - h).amax() < 1e-4);
}

// ---- CRO-SVM ----

#[test]
fn cro_svm_accepts_clean_data_near_half_cost() {
    let data = toy(0.0, 10, 80).filtered(|s| s.x[1] < 0.5);
    let model = train_cro_svm(&data, 1e-5, 1e-5, 0.5, 0.45).unwrap();
    let (_, r) = train_values(&model, &data);
    assert!(r.iter().all(|&v| v > 0.0));
}

#[test]
fn cro_svm_rejects_an_overlap_at_low_cost() {
    // 1-D: negatives on [0, 1), positives on [2, 3), both classes on [1, 2).
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut samples = Vec::new();
    for k in 0..60 {
        let (x, y) = match k % 4 {
            0 => (rng.gen_range(0.0..1.0), Label::Negative),
            1 => (rng.gen_range(2.0..3.0), Label::Positive),
            2 => (rng.gen_range(1.0..2.0), Label::Negative),
            _ => (rng.gen_range(1.0..2.0), Label::Positive),
        };
        samples.push(LabeledSample { x: vec![x], y });
    }
    let data = Dataset::new("overlap", samples).unwrap();
    let model = train_cro_svm(&data, 1e-5, 1e-5, 0.5, 0.03).unwrap();
    let (_, r) = train_values(&model, &data);
    let overlap: Vec<usize> = (0..data.len()).filter(|&i| (1.1..1.9).contains(&data.samples()[i].x[0])).collect();
    assert!(overlap.iter().all(|&i| r[i] <= 0.0));
    let mh = model.surrogate_risk(&data).unwrap();
    let reg = 0.5e-5 * (model.w().norm_squared() + model.u().norm_squared());
    assert!(mh + reg <= 1.0, "zero model has objective 1");
}

// ---- CAD-SVM ----

#[test]
fn cad_with_unit_eta_and_no_ambiguity_is_cro() {
    let data = toy(0.0, 12, 60);
    let trainer = Trainer::new(TrainOptions { eta_override: Some(1.0), ..Default::default() });
    let cad = trainer.cad_svm(&data, 1e-3, 1e-3, SQRT10, 0.2, 0.2).unwrap();
    let cro = train_cro_svm(&data, 1e-3, 1e-3, SQRT10, 0.2).unwrap();
    assert!((cad.w() - cro.w()).norm() < 1e-6);
    assert!((cad.u() - cro.u()).norm() < 1e-6);
}

#[test]
fn cad_rejects_most_of_the_mixed_region() {
    let data = toy(0.5, 13, 400);
    let (train, _) = split(&data, 1.0 / 3.0, 1).unwrap();
    let model = train_cad_svm(&train, 1e-5, 1e-5, SQRT10, 0.2, 0.2).unwrap();
    let p = model.loss_params().unwrap();
    assert!((p.alpha() - 1.2).abs() < 1e-12 && (p.beta() - 1.4).abs() < 1e-12);
    let (_, r) = train_values(&model, &train);
    let mixed: Vec<usize> = (0..train.len()).filter(|&i| train.samples()[i].x[1] >= 0.5).collect();
    let rejected = mixed.iter().filter(|&&i| r[i] <= 0.0).count();
    assert!(rejected as f64 >= 0.8 * mixed.len() as f64);
}

#[test]
fn far_ambiguous_sample_barely_moves_the_classifier() {
    let data = toy(0.5, 14, 60);
    let n = data.len() as f64;
    let mut samples = data.samples().to_vec();
    samples.push(LabeledSample { x: vec![40.0, 40.0], y: Label::Ambiguous });
    let extended = data.with_samples(samples).unwrap();
    // The slack average runs over N + 1 samples, so compare at the same
    // per-sample weight by rescaling λ.
    let (lambda, sigma) = (1e-3, 0.5);
    let scale = (n + 1.0) / n;
    let base = train_cad_svm(&data, lambda * scale, lambda * scale, sigma, 0.2, 0.2).unwrap();
    let more = train_cad_svm(&extended, lambda, lambda, sigma, 0.2, 0.2).unwrap();
    let w = more.w().rows(0, data.len()).into_owned();
    assert!((w - base.w()).norm() < 1e-4);
}

#[test]
fn cad_surrogate_bounds_and_optimality() {
    let data = toy(0.5, 15, 90);
    let model = train_cad_svm(&data, 1e-3, 1e-3, SQRT10, 0.06, 0.2).unwrap();
    let p = *model.loss_params().unwrap();
    let (h, r) = train_values(&model, &data);
    let mut mha = 0.0;
    let mut zero_one = 0.0;
    let mut at_zero = 0.0;
    for (i, s) in data.samples().iter().enumerate() {
        mha += loss_mha(h[i], r[i], s.y, &p);
        zero_one += loss_01cd(h[i], r[i], s.y, &p);
        at_zero += loss_mha(0.0, 0.0, s.y, &p);
    }
    let reg = 0.5e-3 * (model.w().norm_squared() + model.u().norm_squared());
    assert!(mha >= zero_one);
    assert!(mha / data.len() as f64 + reg <= at_zero / data.len() as f64 + 1e-9);
    assert!((model.surrogate_risk(&data).unwrap() - mha / data.len() as f64).abs() < 1e-12);
}

// ---- backends ----

#[test]
fn structured_and_dense_backends_agree() {
    let data = toy(0.5, 16, 48);
    let dense = Trainer::new(TrainOptions { backend: Backend::Dense, ..Default::default() });
    let structured = Trainer::default();
    let hp = Hyperparams { lambda: 1e-4, lambda_rej: 1e-3, sigma: 0.5, sigma_graph: 0.5, tau: 1e-2, c: 0.2, d: 0.2 };
    for method in Method::ALL {
        let a = structured.train(method, &data, &hp, 3).unwrap();
        let b = dense.train(method, &data, &hp, 3).unwrap();
        let (ha, ra) = train_values(&a, &data);
        let (hb, rb) = train_values(&b, &data);
        assert!((&ha - &hb).amax() < 1e-4, "{method}: h differs by {}", (ha - hb).amax());
        assert!((&ra - &rb).amax() < 1e-4, "{method}: r differs by {}", (ra - rb).amax());
    }
}

// ---- prediction ----

#[test]
fn zero_classifier_predicts_negative() {
    let basis = BasisSet::new(dmatrix![0.0, 0.0; 1.0, 1.0], 1.0).unwrap();
    let model = TrainedModel::new(Method::Svm, basis, DVector::zeros(2), DVector::zeros(2), Hyperparams::default(), None).unwrap();
    let p = predict(&model, &[0.3, 0.2]).unwrap();
    assert_eq!((p.label, p.h_value), (Label::Negative, 0.0));
    assert!(p.rejected);
}

#[test]
fn equal_coefficients_give_equal_values() {
    let basis = BasisSet::new(dmatrix![0.5], 2.0).unwrap();
    let coef = DVector::from_element(1, 0.7);
    let model = TrainedModel::new(Method::CadSvm, basis, coef.clone(), coef, Hyperparams::default(), None).unwrap();
    let p = predict(&model, &[1.5]).unwrap();
    assert_eq!(p.h_value, p.r_value);
    assert!(predict(&model, &[1.0, 2.0]).is_err());
}

#[test]
fn batch_prediction_matches_pointwise() {
    let data = toy(0.5, 17, 60);
    let model = train_cad_svm(&data, 1e-3, 1e-3, 0.5, 0.2, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let points = DMatrix::from_fn(100, 2, |_, _| rng.gen_range(-0.5..1.5));
    let batch = predict_batch(&model, &points).unwrap();
    for (i, b) in batch.iter().enumerate() {
        let single = predict(&model, &[points[(i, 0)], points[(i, 1)]]).unwrap();
        assert_eq!(*b, single);
    }
}

#[test]
fn model_validation() {
    let basis = BasisSet::new(dmatrix![0.0], 1.0).unwrap();
    let bad = TrainedModel::new(Method::Svm, basis.clone(), DVector::zeros(2), DVector::zeros(1), Hyperparams::default(), None);
    assert!(bad.is_err());
    let nan = TrainedModel::new(Method::Svm, basis, DVector::from_element(1, f64::NAN), DVector::zeros(1), Hyperparams::default(), None);
    assert!(nan.is_err());
}

// ---- model files ----

#[test]
fn model_text_round_trips_exactly() {
    let data = toy(0.5, 18, 40);
    let hp = Hyperparams { lambda: 1e-5, lambda_rej: 1e-7, sigma: SQRT10, sigma_graph: 10f64.powf(0.75), tau: 1e-3, c: 0.2, d: 0.5 };
    for method in Method::ALL {
        let model = Trainer::default().train(method, &data, &hp, 1).unwrap();
        let text = model.to_text();
        let back = TrainedModel::from_text(&text).unwrap();
        assert_eq!(back, model, "{method}");
        assert_eq!(back.to_text(), text);
    }
    let dir = tempfile::tempdir().unwrap();
    let model = train_cad_svm(&data, 1e-5, 1e-5, SQRT10, 0.2, 0.2).unwrap();
    let path = dir.path().join("m.model");
    model.save(&path).unwrap();
    assert_eq!(TrainedModel::load(&path).unwrap(), model);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("surrogate 2.0000000000000001e-1 2.0000000000000001e-1 1.2000000000000000e0"));
}

#[test]
fn truncated_model_file_is_a_parse_error() {
    let data = toy(0.5, 18, 20);
    let text = train_svm(&data.binary_part(), 1e-3, 1.0).unwrap().to_text();
    let cut: String = text.lines().take(12).collect::<Vec<_>>().join("\n");
    assert!(matches!(TrainedModel::from_text(&cut), Err(cadsvm::Error::Parse { .. })));
    assert!(TrainedModel::from_text("nonsense").is_err());
    assert!(TrainedModel::from_text(&text.replace("method svm", "method bogus")).is_err());
}

#[test]
fn method_tags_parse() {
    for m in Method::ALL {
        assert_eq!(m.tag().parse::<Method>().unwrap(), m);
    }
    let err = "bogus".parse::<Method>().unwrap_err().to_string();
    assert!(err.contains("cad-svm") && err.contains("lapsvm"));
}
