use mdl_core::game::{run_bilinear_hedge, solve_matrix_game};
use mdl_core::problem::exact_worst_case_loss;
use mdl_core::{InstanceF32, InstanceF64, RandomizedHypothesisF32, RandomizedHypothesisF64, TrajectoryF32};

const DOC: &str = r#"{"k": 2, "R": 1, "d": 1, "hypotheses": ["a", "b"],
  "losses": [[[[[0.5, 1.0]], [[-0.5, 1.0]]], [[[-0.5, 1.0]], [[0.5, 1.0]]]]]}"#;

#[test]
fn f32_and_f64_agree() {
    let a: InstanceF64 = serde_json::from_str(DOC).unwrap();
    let b: InstanceF32 = serde_json::from_str(DOC).unwrap();
    let mix64 = RandomizedHypothesisF64::new(vec![0, 1], vec![0.5, 0.5]).unwrap();
    let mix32 = RandomizedHypothesisF32::new(vec![0, 1], vec![0.5, 0.5]).unwrap();
    assert_eq!(exact_worst_case_loss(&a, &mix64).unwrap(), 0.0);
    assert_eq!(exact_worst_case_loss(&b, &mix32).unwrap(), 0.0);

    let g64 = solve_matrix_game(&a.objective_matrix(), 1e-9).unwrap();
    let g32 = solve_matrix_game(&b.objective_matrix(), 1e-5f32).unwrap();
    assert!(g64.value.abs() < 1e-9);
    assert!(g32.value.abs() < 1e-5);
    assert!((g32.pi_star[0] - 0.5).abs() < 1e-4);
}

#[test]
fn f32_bilinear_and_trajectory() {
    let ys: Vec<Vec<f32>> = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
    let traj = run_bilinear_hedge(&ys, 0.2f32).unwrap();
    assert!(traj.averaged_gap(&ys) <= 0.2);
    let ws: Vec<Vec<f32>> = traj.rounds.iter().map(|r| r.weights.clone()).collect();
    let t = TrajectoryF32::from_vectors(&ws).unwrap();
    assert_eq!(t.k(), 2);
}
