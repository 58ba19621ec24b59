use twotier::config::{ApRule, RunConfig, ScenarioKind};
use twotier::experiments::{run, sweep};

/// Equality that treats NaN fields (empty delay samples) as equal.
fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap()
}

fn small(scenario: ScenarioKind) -> RunConfig {
    let mut c = RunConfig {
        scenario,
        relax_preconditions: true,
        warmup: 64,
        measure: 1280,
        ..Default::default()
    };
    match scenario {
        ScenarioKind::Static => {
            c.n = 200.0;
            c.a_p_scale = 0.2;
            c.tagged_flows = 100;
        }
        ScenarioKind::MobileIid | ScenarioKind::MobileRw => {
            c.n = 40.0;
            c.a_p = ApRule::Explicit(1.0 / 64.0);
            c.p = 0.3;
            if scenario == ScenarioKind::MobileRw {
                c.s_rw = Some(1.0 / 16.0);
            }
        }
    }
    c
}

#[test]
fn reruns_are_bit_identical() {
    for s in [ScenarioKind::Static, ScenarioKind::MobileIid, ScenarioKind::MobileRw] {
        let c = small(s);
        assert_eq!(json(&run(&c).unwrap()), json(&run(&c).unwrap()), "{}", s.name());
    }
}

#[test]
fn seeds_change_the_sample() {
    let a = small(ScenarioKind::MobileIid);
    let b = RunConfig { seed: 2, ..a.clone() };
    assert_ne!(json(&run(&a).unwrap().primary), json(&run(&b).unwrap().primary));
}

#[test]
fn sweep_runs_match_standalone_runs() {
    // Parallel scheduling must not leak into results.
    let base = small(ScenarioKind::MobileIid);
    let rep = sweep(&base, "n", &[30.0, 40.0, 50.0], &[3, 4]).unwrap();
    assert_eq!(rep.runs.len(), 6);
    let one = RunConfig { n: 40.0, seed: 4, ..base };
    assert_eq!(json(&rep.runs[3]), json(&run(&one).unwrap()));
}

#[test]
fn auditing_does_not_perturb_results() {
    for s in [ScenarioKind::Static, ScenarioKind::MobileIid] {
        let on = small(s);
        let off = RunConfig { audit: false, trace: true, ..on.clone() };
        let (a, b) = (run(&on).unwrap(), run(&off).unwrap());
        assert_eq!(json(&a.primary), json(&b.primary), "{}", s.name());
        assert_eq!(json(&a.secondary), json(&b.secondary), "{}", s.name());
    }
}

#[test]
fn config_text_round_trips() {
    let c = RunConfig { s_rw: Some(1.0 / 64.0), queues: Some(10), seed: 77, ..small(ScenarioKind::MobileRw) };
    assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
}
