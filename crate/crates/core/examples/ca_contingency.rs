//! Correspondence analysis of a small hair/eye colour style table.
//!
//! ```text
//! cargo run --example ca_contingency
//! ```

use mcalogit::corresp::{ca_fit, ca_reconstruct, pearson_chi2, read_contingency};

const TABLE: &str = ",black,brunette,red,blond
brown,68,119,26,7
blue,20,84,17,94
hazel,15,54,14,10
green,5,29,14,16
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = read_contingency(TABLE.as_bytes())?;
    let res = ca_fit(&t, 2)?;
    println!("chi2 = {:.3}, total inertia = {:.5}", pearson_chi2(&t), res.total_inertia);
    for (q, (ev, share)) in res.eigenvalues().iter().zip(res.inertia_shares().iter()).enumerate() {
        println!("dim {}: eigenvalue {:.5}, share {:.1}%", q + 1, ev, 100.0 * share);
    }
    println!("\nrow principal coordinates");
    for (i, label) in t.row_labels().iter().enumerate() {
        println!("  {:<8} {:>8.4} {:>8.4}", label, res.row_principal[(i, 0)], res.row_principal[(i, 1)]);
    }
    println!("column principal coordinates");
    for (j, label) in t.col_labels().iter().enumerate() {
        println!("  {:<8} {:>8.4} {:>8.4}", label, res.col_principal[(j, 0)], res.col_principal[(j, 1)]);
    }
    let observed = t.proportions();
    for k in 0..=res.rank() {
        let err = (ca_reconstruct(&res, &t, k)? - &observed).norm();
        println!("rank {} reconstruction error {:.2e}", k, err);
    }
    Ok(())
}
