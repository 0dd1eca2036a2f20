use chernlab::flow::{Formulation, Integrator};
use chernlab::Scheme;
use chernlab_cli::config::{
    config_hash, emit, parse_config, CertSetting, DtSetting, MetricFamily, Monitor, Potential, ScenarioConfig,
};
use proptest::prelude::*;

fn family(n: usize) -> impl Strategy<Value = MetricFamily> {
    let seed = 0u64..1000;
    let mut options = vec![
        Just(MetricFamily::Flat).boxed(),
        (0.0..0.9f64, seed.clone())
            .prop_map(|(amplitude, seed)| MetricFamily::KahlerPotential { amplitude, seed })
            .boxed(),
        (1.0..100.0f64, 0.01..0.12f64, 5.0..20.0f64, 0.0..5.0f64, seed.clone())
            .prop_map(|(rho0, kappa, center, amplitude, seed)| MetricFamily::ConformalRadial {
                rho0,
                kappa,
                center,
                amplitude,
                seed,
            })
            .boxed(),
    ];
    if n == 2 {
        options.push(
            (-0.9..0.9f64, seed).prop_map(|(eps, seed)| MetricFamily::NonkahlerPerturbed { eps, seed }).boxed(),
        );
    }
    proptest::strategy::Union::new(options)
}

fn cert() -> impl Strategy<Value = Option<CertSetting>> {
    proptest::option::of((0.01..10.0f64, 0.01..2.0f64).prop_map(|(s, beta)| CertSetting { s, beta }))
}

fn config() -> impl Strategy<Value = ScenarioConfig> {
    (1usize..=2).prop_flat_map(|n| {
        (
            (4usize..64, prop_oneof![Just(Scheme::Spectral), Just(Scheme::Central4)], family(n)),
            (
                prop_oneof![Just(Formulation::Metric), Just(Formulation::Potential)],
                prop_oneof![Just(Integrator::Euler), Just(Integrator::Rk4)],
                1e-4..1.0f64,
                proptest::collection::vec(0.0..1.0f64, 0..4),
                proptest::option::of(1e-6..1e-2f64),
                any::<bool>(),
            ),
            (proptest::sample::subsequence(Monitor::ALL.to_vec(), 0..=5), proptest::option::of(0.0..5.0f64)),
            (cert(), cert(), proptest::collection::vec(proptest::option::of((0.01..1.0f64, 0u64..50)), 1..3)),
        )
            .prop_map(move |(grid, flow, monitors, certs)| {
                let (half, scheme, family) = grid;
                let (formulation, integrator, t_end, fractions, dt, check) = flow;
                let (a2, a3, pots) = certs;
                ScenarioConfig {
                    n,
                    size: 2 * half,
                    scheme,
                    family,
                    formulation,
                    integrator,
                    t_end,
                    snapshots: fractions.iter().map(|f| f * t_end).collect(),
                    dt: dt.map_or(DtSetting::Auto, DtSetting::Fixed),
                    stability_check: check,
                    monitors: monitors.0,
                    trace_c1: monitors.1,
                    a2,
                    a3,
                    potentials: pots
                        .into_iter()
                        .map(|p| p.map_or(Potential::Zero, |(amplitude, seed)| Potential::Trig { amplitude, seed }))
                        .collect(),
                    ..ScenarioConfig::default()
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn emitted_text_reparses_to_equal_config(cfg in config()) {
        let text = emit(&cfg);
        let back = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e:?}\n{text}")))?;
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(emit(&back), text);
        prop_assert_eq!(config_hash(&back), config_hash(&cfg));
    }
}

#[test]
fn minimal_flat_text_gets_documented_defaults() {
    let cfg = parse_config("metric.family = flat\n").unwrap();
    assert_eq!((cfg.size, cfg.scheme, cfg.integrator), (64, Scheme::Spectral, Integrator::Euler));
}

#[test]
fn negative_end_time_error_text() {
    let errs = parse_config("metric.family = flat\nflow.t_end = -1\n").unwrap_err();
    assert_eq!(errs.len(), 1);
    assert_eq!(errs[0].to_string(), "line 2: flow.t_end must be positive");
}

#[test]
fn range_errors_are_each_named() {
    let text = "grid.N = 9\nflow.dt_fraction = 2\nmetric.family = kahler_potential\nmetric.amplitude = 1.5\n";
    let msgs: Vec<String> = parse_config(text).unwrap_err().into_iter().map(|e| e.to_string()).collect();
    assert_eq!(msgs.len(), 3, "{msgs:?}");
    assert!(msgs[0].starts_with("line 1: grid.N"));
    assert!(msgs[1].starts_with("line 2: flow.dt_fraction"));
    assert!(msgs[2].starts_with("line 4: metric.amplitude"));
}

#[test]
fn unknown_monitor_named() {
    let errs = parse_config("monitors = kahler_defect, bogus\n").unwrap_err();
    assert!(errs[0].message.contains("\"bogus\""), "{}", errs[0]);
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let text = std::fs::read_to_string(&path).unwrap();
            parse_config(&text).unwrap_or_else(|e| panic!("{}: {e:?}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 5);
}
