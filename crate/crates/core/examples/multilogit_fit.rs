//! Majorization fit of the multilogit-bilinear model, unpenalized and with
//! a cross-validated trace-norm penalty, on simulated data.
//!
//! ```text
//! cargo run --release --example multilogit_fit
//! ```

use mcalogit::multilogit::{
    fit_cross_validated, fit_majorization, predict_probabilities, rmse_probabilities, CvOptions, MmOptions,
};
use mcalogit::simulate::{generate_dataset, mca_estimate, SimConfig, DEFAULT_BASE_VARIANCE};
use mcalogit::tables::encode_indicator;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig {
        n: 100,
        m: 20,
        categories_per_variable: 3,
        k: 2,
        ratio: 2.0,
        strength: 1.0,
        base_variance: DEFAULT_BASE_VARIANCE,
        seed: 3,
    };
    let data = generate_dataset(&cfg)?;
    let (t, dropped) = data.table.drop_empty_categories()?;
    if !dropped.is_empty() {
        println!("dropping {} unobserved categories", dropped.len());
        return Ok(());
    }
    let a = encode_indicator(&t);

    let (model, trace) = fit_majorization(&a, 2, &MmOptions::default())?;
    println!(
        "unpenalized: {} iterations, converged {}, objective {:.3} -> {:.3}",
        trace.iterations,
        trace.converged,
        trace.objective[0],
        trace.objective.last().unwrap()
    );
    let rmse = rmse_probabilities(&data.true_probs, &predict_probabilities(&model)?)?;

    let (pen, pen_trace, cv) = fit_cross_validated(&a, 2, &MmOptions::default(), &CvOptions::default())?;
    println!("cross-validation over lambda (lambda_max {:.2})", cv.lambda_max);
    for (l, d) in cv.lambdas.iter().zip(&cv.deviance) {
        let mark = if *l == cv.best_lambda { " <" } else { "" };
        println!("  lambda {:>8.3}  held-out deviance {:>10.2}{}", l, d, mark);
    }
    println!("penalized: {} iterations, singular values {:?}", pen_trace.iterations, pen.factors.d().as_slice());
    let pen_rmse = rmse_probabilities(&data.true_probs, &predict_probabilities(&pen)?)?;
    let mca_rmse = rmse_probabilities(&data.true_probs, &mca_estimate(&data, 2)?)?;
    println!("probability RMSE: model {:.4}, penalized {:.4}, MCA {:.4}", rmse, pen_rmse, mca_rmse);
    Ok(())
}
