//! MCA of a simulated survey through the indicator matrix and through the
//! Burt matrix, showing that both give the same factors.
//!
//! ```text
//! cargo run --example mca_indicator_burt
//! ```

use mcalogit::mca::{mca, McaVariant};
use mcalogit::simulate::{generate_dataset, SimConfig, DEFAULT_BASE_VARIANCE};
use mcalogit::tables::{burt_matrix, encode_indicator};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig {
        n: 200,
        m: 8,
        categories_per_variable: 3,
        k: 2,
        ratio: 2.0,
        strength: 0.5,
        base_variance: DEFAULT_BASE_VARIANCE,
        seed: 11,
    };
    let (t, _) = generate_dataset(&cfg)?.table.drop_empty_categories()?;
    let a = encode_indicator(&t);
    let b = burt_matrix(&a);
    println!("{} individuals, {} variables, {} categories", t.n(), t.m(), t.layout().n_categories());
    println!("Burt block (v0, v1):\n{}", b.block(0, 1));

    let ind = mca(&t, 3, McaVariant::Indicator)?;
    let burt = mca(&t, 3, McaVariant::Burt)?;
    println!("dim  indicator eigenvalue  Burt eigenvalue  share");
    for q in 0..3 {
        println!(
            "{:>3}  {:>20.6}  {:>15.6}  {:>4.1}%",
            q + 1,
            ind.eigenvalues[q],
            burt.eigenvalues[q],
            100.0 * ind.inertia_shares()[q]
        );
    }
    let diff = (0..3)
        .map(|q| {
            let (x, y) = (ind.category_coords.column(q), burt.category_coords.column(q));
            (x - y).norm().min((x + y).norm())
        })
        .fold(0.0f64, f64::max);
    println!("largest category coordinate difference up to sign: {:.2e}", diff);

    println!("\ncorrelation ratios (variable x dimension)");
    let eta = ind.correlation_ratios(&t);
    for j in 0..t.m() {
        println!("  {:<4} {:.3} {:.3} {:.3}", t.names()[j], eta[(j, 0)], eta[(j, 1)], eta[(j, 2)]);
    }
    Ok(())
}
