//! Trains the three-headed quantile network and inspects its band.
//!
//! ```text
//! cargo run -p icqr --example train_quantile_net
//! ```

use icqr::bench::{generate_synthetic, synthetic_by_name};
use icqr::quantile_net::pinball_loss;
use icqr::{train, QuantileNetConfig, Result};

fn main() -> Result<()> {
    let mut spec = synthetic_by_name("linear")?;
    spec.rows = 600;
    let data = generate_synthetic(&spec, 3)?;

    let cfg = QuantileNetConfig {
        hidden_layers: vec![16],
        learning_rate: 0.02,
        epochs: 200,
        batch_size: 50,
        seed: 1,
        ..QuantileNetConfig::for_alpha(0.1)?
    };
    let model = train(&data, &cfg)?;
    println!(
        "trained on {} rows; mean pinball objective {:.4}",
        data.n_rows(),
        model.objective(&data)?
    );

    println!("\n     x1    lower   median    upper    truth");
    for i in (0..data.n_rows()).step_by(120) {
        let x = data.row(i);
        let p = model.predict(x)?;
        println!(
            "{:>7.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            x[1], p.lower, p.median, p.upper, data.response()[i]
        );
    }

    // per-head pinball losses show each head tracking its own level
    let levels = cfg.quantile_levels;
    let mut losses = [0.0f64; 3];
    for i in 0..data.n_rows() {
        let p = model.predict(data.row(i))?;
        let y = data.response()[i];
        for (slot, (level, pred)) in losses.iter_mut().zip(
            levels
                .iter()
                .zip([p.lower, p.median, p.upper]),
        ) {
            *slot += pinball_loss(*level, y, pred);
        }
    }
    println!("\nper-head mean pinball losses:");
    for (level, total) in levels.iter().zip(losses) {
        println!("  level {:>4}: {:.4}", level, total / data.n_rows() as f64);
    }

    let path = std::env::temp_dir().join("icqr_example_model.json");
    model.save(&path)?;
    let reloaded = icqr::QuantileModel::load(&path)?;
    let p = reloaded.predict(data.row(0))?;
    println!("\nmodel saved to {} and reloaded", path.display());
    println!("reloaded prediction for row 0: [{:.3}, {:.3}]", p.lower, p.upper);
    Ok(())
}
