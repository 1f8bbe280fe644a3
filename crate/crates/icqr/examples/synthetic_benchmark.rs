//! The full benchmark loop as a library call: repeated trials of all four
//! methods on heteroscedastic data, summarized like the CLI's `run` command.
//!
//! ```text
//! cargo run --release -p icqr --example synthetic_benchmark
//! ```

use icqr::bench::{
    emit_report, run_experiment, synthetic_by_name, ExperimentConfig, ReportFormat,
};
use icqr::{QuantileNetConfig, Result};

fn main() -> Result<()> {
    let cfg = ExperimentConfig {
        synthetic: Some(synthetic_by_name("two-group")?),
        trials: 5,
        seed: 1,
        // few epochs: the point of the comparison is the conformal step
        // repairing an imperfect band, not a perfectly fitted model
        net: QuantileNetConfig {
            hidden_layers: vec![16],
            epochs: 10,
            ..QuantileNetConfig::default()
        },
        ..ExperimentConfig::default()
    };

    let report = run_experiment(&cfg)?;
    let mut stdout = std::io::stdout().lock();
    emit_report(&report, ReportFormat::Table, &mut stdout)?;

    let icqr = report
        .methods
        .iter()
        .find(|m| m.method.name() == "icqr")
        .expect("icqr was requested");
    if let Some(d) = &icqr.diagnostics {
        println!("\nicqr diagnostics per trial:");
        println!("  selected k:         {:?}", d.selected_k);
        println!(
            "  variance explained: {:?}",
            d.variance_explained
                .iter()
                .map(|v| (v * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>()
        );
        println!("  mean importances:   {:?}", d.mean_importance);
    }
    Ok(())
}
