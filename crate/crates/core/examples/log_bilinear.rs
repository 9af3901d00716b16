//! RC(K) log-bilinear and linear-bilinear fits of a contingency table,
//! next to CA refitted as alternating weighted regressions.
//!
//! ```text
//! cargo run --example log_bilinear
//! ```

use mcalogit::bilinear::{fit_ca_glm, fit_linear_bilinear, fit_log_bilinear, poisson_deviance, LogBilinearOptions};
use mcalogit::corresp::{ca_fit, ContingencyTable};
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x = DMatrix::from_row_slice(
        5,
        4,
        &[
            50., 45., 8., 18., 8., 50., 31., 14., 2., 13., 41., 30., 1., 4., 16., 45., 20., 21., 22., 19.,
        ],
    );
    let t = ContingencyTable::new(x.clone())?;
    let n = x.sum();
    let indep = t.independence() * n;
    println!("independence deviance {:.3}", poisson_deviance(&x, &indep));
    for k in 1..=2 {
        let rc = fit_log_bilinear(&x, k, &LogBilinearOptions::default())?;
        println!(
            "RC({}) deviance {:.3} after {} iterations (converged {}), d = {:?}",
            k,
            rc.deviance(),
            rc.iterations,
            rc.converged,
            rc.interaction.d().as_slice()
        );
    }

    let glm = fit_ca_glm(&t, 2, 1000, 1e-12)?;
    let ca = ca_fit(&t, 2)?;
    println!(
        "CA singular values {:?}; regression refit {:?} in {} iterations",
        ca.factors.d().as_slice(),
        glm.result.factors.d().as_slice(),
        glm.iterations
    );

    let lb = fit_linear_bilinear(&x.map(|v| (v + 0.5).ln()), 1, true)?;
    println!("linear-bilinear on log counts: d = {:?}, sigma2 = {:.4}", lb.interaction.d().as_slice(), lb.sigma2);
    Ok(())
}
