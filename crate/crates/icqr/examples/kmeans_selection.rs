//! k-means with restarts, plus the variance-explained rule for choosing k.
//!
//! ```text
//! cargo run -p icqr --example kmeans_selection
//! ```

use icqr::cluster::{kmeans, select_k, variance_explained, KMeansConfig, KSelectionConfig};
use icqr::{Matrix, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn three_blobs(n_per: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [(-6.0, 0.0), (0.0, 5.0), (7.0, -2.0)];
    let mut rows = Vec::with_capacity(3 * n_per);
    for &(cx, cy) in &centers {
        for _ in 0..n_per {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            rows.push(vec![cx + dx, cy + dy]);
        }
    }
    // shuffle rows so cluster structure is not positional
    for i in (1..rows.len()).rev() {
        rows.swap(i, rng.random_range(0..=i));
    }
    Matrix::from_rows(&rows).unwrap()
}

fn main() -> Result<()> {
    let points = three_blobs(60, 2024);

    let cfg = KMeansConfig {
        restarts: 5,
        seed: 1,
        ..KMeansConfig::default()
    };
    let fitted = kmeans(&points, 3, &cfg)?;
    println!("k = 3 directly:");
    println!("  objective {:.2}", fitted.objective);
    println!("  sizes {:?}", fitted.cluster_sizes);
    for c in &fitted.centroids {
        println!("  centroid ({:>6.2}, {:>6.2})", c[0], c[1]);
    }
    println!(
        "  variance explained {:.3} (recomputed: {:.3})",
        fitted.variance_explained,
        variance_explained(&fitted, &points)
    );

    let selection = select_k(
        &points,
        &KSelectionConfig {
            variance_threshold: 0.9,
            max_k: 8,
            kmeans: cfg,
            force_k: None,
        },
    )?;
    println!("\nincremental selection (stop once variance explained > 0.9):");
    for c in &selection.candidates {
        println!(
            "  k = {}: variance explained {:.3}, objective {:.2}",
            c.k, c.variance_explained, c.objective
        );
    }
    println!(
        "selected k = {} (threshold met: {})",
        selection.model.k(),
        selection.threshold_met
    );
    Ok(())
}
