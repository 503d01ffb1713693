//! Bundled experiments: one per reference study (fig3..fig8) plus a
//! cross-validation suite.

use coopsense::detection::SensorType;

use crate::run::{default_tau2_grid, Engine, MetricKind, Study};

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub studies: Vec<Study>,
    pub engine: Engine,
    pub policy: &'static str,
    pub n_trials: u64,
    pub notes: Vec<String>,
}

pub const PRESET_NAMES: &[&str] = &["fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "desk-validate"];

fn kv(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn axis(name: &str, values: &[f64]) -> (String, Vec<f64>) {
    (name.to_string(), values.to_vec())
}

fn range(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(f64::from).collect()
}

/// Marker threshold of the fig3 preset; see its description.
pub const FIG3_TAU2: f64 = 60.0;

/// Marker thresholds of the fig5 preset; both sensor types use the same one.
pub const FIG5_TAU2: f64 = 25.0;

pub fn preset(name: &str) -> Option<Preset> {
    let memoryless = SensorType::Memoryless;
    let aggregate = SensorType::Aggregate;
    let p = match name {
        "fig3" => Preset {
            name: "fig3",
            description: "detection error of memoryless sensors vs tau1 for lambda in {10, 30, 50}; \
                          full scale (N_s=20, K=10) with sampled source vectors, tau2=60",
            studies: vec![Study {
                overrides: kv(&[("tau2", FIG3_TAU2)]),
                axes: vec![axis("lambda", &[10.0, 30.0, 50.0]), axis("tau1", &range(0, 21))],
                metrics: vec![MetricKind::DetectionError(memoryless)],
            }],
            engine: Engine::Analytic,
            policy: "sampled:20000",
            n_trials: 20_000,
            notes: vec![],
        },
        "fig4" => Preset {
            name: "fig4",
            description: "detection error minimized over (tau1, tau2) vs N_s for M in {0, 1e7, 2e7} and \
                          alpha in {0.2, 0.3}; desk scale K=5 (x_FC=300), exact enumeration",
            studies: vec![Study {
                overrides: kv(&[("x_FC", 300.0)]),
                axes: vec![
                    axis("alpha", &[0.2, 0.3]),
                    axis("M", &[0.0, 1e7, 2e7]),
                    axis("N_s", &[4.0, 6.0, 8.0, 10.0]),
                ],
                metrics: vec![MetricKind::MinDetectionError {
                    sensor_type: memoryless,
                    tau2_grid: default_tau2_grid(),
                }],
            }],
            engine: Engine::Analytic,
            policy: "exact",
            n_trials: 20_000,
            notes: vec![format!("tau1 grid 0..=N_s+1; tau2 grid {:?}", default_tau2_grid())],
        },
        "fig5" => Preset {
            name: "fig5",
            description: "detection error of memoryless vs aggregate sensors vs delta, M=1e8; \
                          desk scale N_s=10, K=5, lambda=2, tau1=3, tau2=tau2_agg=25",
            studies: vec![Study {
                overrides: kv(&[
                    ("x_FC", 300.0),
                    ("N_s", 10.0),
                    ("M", 1e8),
                    ("lambda", 2.0),
                    ("tau1", 3.0),
                    ("tau2", FIG5_TAU2),
                    ("tau2_agg", FIG5_TAU2),
                ]),
                axes: vec![axis("delta", &[1e-4, 1e-3, 5e-3, 1e-2, 5e-2])],
                metrics: vec![
                    MetricKind::DetectionError(memoryless),
                    MetricKind::DetectionError(aggregate),
                ],
            }],
            engine: Engine::Analytic,
            policy: "exact",
            n_trials: 20_000,
            notes: vec![],
        },
        "fig6" => Preset {
            name: "fig6",
            description: "type-A localization error vs M for delta in {0, 0.005, 0.01}; \
                          desk scale N_s=10, K=5, alpha=0.8",
            studies: vec![Study {
                overrides: kv(&[("x_FC", 300.0), ("N_s", 10.0), ("alpha", 0.8)]),
                axes: vec![
                    axis("delta", &[0.0, 0.005, 0.01]),
                    axis("M", &[1e8, 3e8, 1e9, 3e9, 1e10, 3e10, 1e11, 3e11, 1e12]),
                ],
                metrics: vec![MetricKind::LocalizationTypeA, MetricKind::LocalizationBoundTypeA],
            }],
            engine: Engine::Analytic,
            policy: "exact",
            n_trials: 20_000,
            notes: vec![],
        },
        "fig7" => Preset {
            name: "fig7",
            description: "type-A and type-B localization error vs N_s, M=1e10, alpha=0.8, \
                          for x_FC in {300, 600} and delta in {0, 0.01}",
            studies: vec![Study {
                overrides: kv(&[("M", 1e10), ("alpha", 0.8)]),
                axes: vec![
                    axis("x_FC", &[300.0, 600.0]),
                    axis("delta", &[0.0, 0.01]),
                    axis("N_s", &[2.0, 4.0, 6.0, 8.0, 10.0]),
                ],
                metrics: vec![MetricKind::LocalizationTypeA, MetricKind::LocalizationTypeB],
            }],
            engine: Engine::Analytic,
            policy: "exact",
            n_trials: 20_000,
            notes: vec![],
        },
        "fig8" => Preset {
            name: "fig8",
            description: "type-A and type-B localization error vs x_FC - x_0 (K = 1..10), N_s=10, M=1e10",
            studies: vec![Study {
                overrides: kv(&[("N_s", 10.0), ("M", 1e10)]),
                axes: vec![
                    axis("delta", &[0.0, 0.01]),
                    axis(
                        "x_FC",
                        &[60.0, 120.0, 180.0, 240.0, 300.0, 360.0, 420.0, 480.0, 540.0, 600.0],
                    ),
                ],
                metrics: vec![MetricKind::LocalizationTypeA, MetricKind::LocalizationTypeB],
            }],
            engine: Engine::Analytic,
            policy: "exact",
            n_trials: 20_000,
            notes: vec![],
        },
        "desk-validate" => Preset {
            name: "desk-validate",
            description: "closed forms against Monte-Carlo at desk scale: detection (N_s=6, K=5) for both \
                          sensor types, localization (N_s=10, K=5, alpha=0.8) for both FC types",
            studies: vec![
                Study {
                    overrides: kv(&[
                        ("x_FC", 300.0),
                        ("N_s", 6.0),
                        ("lambda", 2.0),
                        ("tau1", 2.0),
                        ("tau2", 8.0),
                        ("tau2_agg", 40.0),
                    ]),
                    axes: vec![],
                    metrics: [memoryless, aggregate]
                        .into_iter()
                        .flat_map(|st| [MetricKind::FalseAlarm(st), MetricKind::MissDetection(st)])
                        .collect(),
                },
                Study {
                    overrides: kv(&[("x_FC", 300.0), ("N_s", 10.0), ("alpha", 0.8)]),
                    axes: vec![axis("delta", &[0.0, 0.005, 0.01]), axis("M", &[1e9, 1e10])],
                    metrics: vec![
                        MetricKind::LocalizationTypeA,
                        MetricKind::LocalizationBoundTypeA,
                        MetricKind::LocalizationTypeB,
                    ],
                },
            ],
            engine: Engine::Both,
            policy: "exact",
            n_trials: 20_000,
            notes: vec![],
        },
        _ => return None,
    };
    Some(p)
}

pub fn list_presets() -> Vec<(&'static str, &'static str)> {
    PRESET_NAMES
        .iter()
        .map(|n| {
            let p = preset(n).expect("registered preset");
            (p.name, p.description)
        })
        .collect()
}
