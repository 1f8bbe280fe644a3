//! Round-trips a dataset through CSV, then normalizes and splits it.
//!
//! ```text
//! cargo run -p icqr --example load_and_split
//! ```

use icqr::bench::{generate_synthetic, synthetic_by_name};
use icqr::{load_csv, split, write_csv, Normalizer, Result, SplitSpec};

fn main() -> Result<()> {
    let mut spec = synthetic_by_name("two-group")?;
    spec.rows = 400;
    let data = generate_synthetic(&spec, 7)?;

    let dir = std::env::temp_dir().join("icqr_example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("two_group.csv");
    write_csv(&data, &path, "y")?;
    let data = load_csv(&path, "y")?;
    println!(
        "loaded {} rows x {} features from {}",
        data.n_rows(),
        data.n_features(),
        path.display()
    );
    println!("columns: {:?}", data.column_names());

    let (train_set, cal, val) = split(&data, &SplitSpec::new(0.5, 0.25, 0.25, 42)?)?;
    println!(
        "split into train {}, calibration {}, validation {}",
        train_set.n_rows(),
        cal.n_rows(),
        val.n_rows()
    );

    let normalizer = Normalizer::fit(&train_set)?;
    println!("feature centers: {:?}", normalizer.center());
    println!("feature scales:  {:?}", normalizer.scale());

    let train_norm = normalizer.apply(&train_set)?;
    let first = train_norm.row(0);
    println!("first normalized train row: {first:?}");
    Ok(())
}
