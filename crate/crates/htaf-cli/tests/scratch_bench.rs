use htaf_cli::config::{DataSource, MethodGrid, RunConfig};
use htaf_cli::experiment::run_experiment;
use htaf_cli::synth::SynthName;
use htaf_core::activations::{HtafParams, SurrogateKind};
use htaf_core::training::TrainMethod;

fn acceptance_config(name: SynthName, epochs: usize, full: bool) -> RunConfig {
    let mut cfg = RunConfig::builtin(name);
    cfg.dataset = DataSource::Builtin {
        name: name.as_str().to_string(),
        rows: None,
        seed: None,
    };
    cfg.hidden_dims = vec![256, 256, 128];
    cfg.batch_norm = false;
    cfg.lr = 1e-3;
    cfg.epochs = epochs;
    cfg.batch_size = 128;
    cfg.n_repeats = 5;
    cfg.master_seed = 0;
    let htaf = MethodGrid {
        name: "htaf".to_string(),
        candidates: vec![TrainMethod::Htaf(HtafParams::new(2.0, 11.0).unwrap())],
    };
    cfg.methods = if full {
        vec![
            htaf,
            MethodGrid {
                name: "scaled_sigmoid".to_string(),
                candidates: vec![TrainMethod::ScaledSigmoid { beta0: 22.0 }],
            },
            MethodGrid {
                name: "ste".to_string(),
                candidates: vec![TrainMethod::Ste {
                    surrogate: SurrogateKind::Rectangular,
                }],
            },
        ]
    } else {
        vec![htaf]
    };
    cfg
}

fn show(name: SynthName, epochs: usize, full: bool) {
    let cfg = acceptance_config(name, epochs, full);
    let t = std::time::Instant::now();
    let run = run_experiment(&cfg).unwrap();
    println!(
        "=== {} ({:?}, epochs {epochs}, {:.0}s)",
        run.report.dataset,
        run.report.metric,
        t.elapsed().as_secs_f64()
    );
    for m in &run.report.methods {
        let epochs_sel: Vec<usize> = m.repeats.iter().map(|r| r.best_epoch).collect();
        println!(
            "  {:<16} soft {:.4} +/- {:.4}   hard {:.4} +/- {:.4}   best_epochs {:?}",
            m.name, m.mean_trainmode, m.stderr_trainmode, m.mean_heaviside, m.stderr_heaviside, epochs_sel
        );
    }
}

#[test]
#[ignore]
fn probe_wine() {
    show(SynthName::WineLike, 60, true);
}

#[test]
#[ignore]
fn probe_abalone() {
    show(SynthName::AbaloneLike, 150, true);
}

#[test]
#[ignore]
fn probe_churn() {
    show(SynthName::ChurnLike, 60, false);
}

#[test]
#[ignore]
fn probe_fico() {
    show(SynthName::FicoLike, 60, false);
}
