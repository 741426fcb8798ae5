//! Regenerates the bundled mixed-type fixture:
//!
//! ```text
//! cargo run --example make_fixture -- crates/core/tests/fixtures
//! ```
//!
//! 2000 rows, 10% minority, three continuous and two categorical features.
//! The minority class is shifted in two continuous features and prefers
//! some categories, so a k-NN scorer separates the classes well but not
//! perfectly.

use std::path::PathBuf;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use taei::tabular::{write_csv, ColumnSpec, MixedDataset, TabularSchema};

const N: usize = 2000;
const N_MINORITY: usize = 200;

fn main() -> taei::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/core/tests/fixtures".into()));
    let schema = TabularSchema::new(
        vec![
            ColumnSpec::continuous("age"),
            ColumnSpec::categorical("plan", ["basic", "plus", "pro", "team"]),
            ColumnSpec::continuous("usage"),
            ColumnSpec::categorical("region", ["north", "south", "west"]),
            ColumnSpec::continuous("tenure"),
            ColumnSpec::categorical("churn", ["no", "yes"]),
        ],
        "churn",
        "yes",
    )?;

    let mut r = taei::rng::seeded(20_240_501);
    let mut cont = Array2::zeros((N, 3));
    let mut cat = Array2::zeros((N, 2));
    let mut labels = Vec::with_capacity(N);
    for i in 0..N {
        let minority = i % (N / N_MINORITY) == 0;
        let shift = if minority { 1.0 } else { 0.0 };
        cont[[i, 0]] = Normal::new(40.0 - 6.0 * shift, 10.0).unwrap().sample(&mut r);
        cont[[i, 1]] = Normal::new(120.0 + 45.0 * shift, 30.0).unwrap().sample(&mut r);
        cont[[i, 2]] = r.random_range(0.0..10.0f64).round();
        let plan_weights: [f64; 4] = if minority { [0.5, 0.3, 0.1, 0.1] } else { [0.25, 0.25, 0.25, 0.25] };
        cat[[i, 0]] = draw(&mut r, &plan_weights);
        cat[[i, 1]] = draw(&mut r, &[0.4, 0.35, 0.25]);
        labels.push(minority);
    }
    let data = MixedDataset::new(Arc::new(schema.clone()), cont, cat, labels)?;
    std::fs::create_dir_all(&dir).map_err(|e| taei::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    write_csv(dir.join("mixed.csv"), &data)?;
    schema.to_json_file(dir.join("mixed.schema.json"))?;
    println!("wrote {} rows to {}", N, dir.display());
    Ok(())
}

fn draw(r: &mut impl Rng, weights: &[f64]) -> usize {
    let u: f64 = r.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
