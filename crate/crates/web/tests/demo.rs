use heteroclust::Method;
use heteroclust_web::{cluster_demo, deflation_demo, sweep_demo};

#[test]
fn cluster_demo_scores_every_method() {
    let demo = cluster_demo("subgaussian", 30, 3, 0.2, 4).unwrap();
    assert_eq!(demo.dims, [30, 30, 30]);
    let methods: Vec<Method> = demo.scores.iter().map(|s| s.method).collect();
    assert_eq!(methods, Method::ALL.to_vec());
    assert!(demo.scores[0].exact);
    assert_eq!(demo.hhc_scatter.x.len(), 30);
    assert_eq!(demo.hsc_scatter.labels.len(), 30);
    assert_eq!(demo.truth.len(), 30);
}

#[test]
fn deflation_demo_reports_trace() {
    let demo = deflation_demo("stochastic", 40, 2, 20.0, 1, 0).unwrap();
    assert!(demo.tau > 0.0);
    assert!(demo.spectrum.windows(2).all(|w| w[0] >= w[1]));
    assert!(!demo.ranks.is_empty());
    assert!(deflation_demo("stochastic", 40, 2, 20.0, 1, 3).is_err());
}

#[test]
fn sweep_demo_summarizes_each_grid_point() {
    let rows = sweep_demo("subgaussian", 15, 2, &[0.3, 0.9], 2, 0).unwrap();
    assert_eq!(rows.len(), 2 * Method::ALL.len());
    assert!(rows.iter().all(|r| r.trials == 2));
}

#[test]
fn inputs_are_validated() {
    assert!(cluster_demo("poisson", 20, 2, 0.5, 0).is_err());
    assert!(cluster_demo("subgaussian", 500, 2, 0.5, 0).is_err());
    assert!(cluster_demo("subgaussian", 20, 1, 0.5, 0).is_err());
    let json = serde_json::to_string(&cluster_demo("stochastic", 20, 2, 5.0, 0).unwrap()).unwrap();
    assert!(json.contains("\"method\":\"hhc-hlloyd\""));
}
