//! Ranks features by how much shuffling them degrades the pinball loss.
//!
//! ```text
//! cargo run -p icqr --example permutation_importance
//! ```

use icqr::bench::{generate_synthetic, GroupSpec, SyntheticSpec};
use icqr::importance::{permutation_importance, weight_features, ImportanceConfig};
use icqr::{train, QuantileNetConfig, Result};

fn main() -> Result<()> {
    // y = 1 + 10·x1 + noise; the group column is constant and the trailing
    // distractor columns never touch the response
    let spec = SyntheticSpec {
        name: "signal-and-distractors".to_string(),
        rows: 1200,
        distractors: 2,
        groups: vec![GroupSpec {
            proportion: 1.0,
            intercept: 1.0,
            slope: 10.0,
            noise_std: 0.5,
        }],
    };
    let data = generate_synthetic(&spec, 13)?;

    let net = QuantileNetConfig {
        hidden_layers: vec![16],
        epochs: 150,
        seed: 9,
        ..QuantileNetConfig::for_alpha(0.1)?
    };
    let model = train(&data, &net)?;

    let cfg = ImportanceConfig {
        repetitions: 5,
        seed: 17,
        ..ImportanceConfig::default()
    };
    let iv = permutation_importance(&model, &data, &cfg)?;
    println!("baseline mean pinball error: {:.4}", iv.baseline_error);
    println!("\nfeature      importance");
    for (name, value) in data.column_names().iter().zip(&iv.values) {
        println!("{name:<12} {value:>10.4}");
    }

    let weighted = weight_features(&data, &iv)?;
    println!("\nafter importance weighting, row 0 becomes {:?}", weighted.row(0));
    println!("(distances in this space are dominated by features the model uses)");
    Ok(())
}
