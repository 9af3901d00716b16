//! Reruns selected rows of the RMSE comparison between the fitted
//! multilogit-bilinear model and MCA.
//!
//! ```text
//! cargo run --release --example table2_reproduction -- 1,5,10,14 5
//! ```

use mcalogit::simulate::{run_grid, table2_row, GridCell, GridOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let ids: Vec<usize> = args
        .next()
        .unwrap_or_else(|| "1,5".into())
        .split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let reps: usize = args.next().map_or(Ok(3), |s| s.parse())?;
    let cells: Vec<GridCell> = ids
        .iter()
        .map(|&id| table2_row(id).map(GridCell::from_table2).ok_or(format!("no row {}", id)))
        .collect::<Result<_, _>>()?;
    let opts = GridOptions { reps, master_seed: 2024, ..Default::default() };
    let start = std::time::Instant::now();
    let report = run_grid(&cells, &opts)?;
    print!("{}", report.render());
    for s in &report.cells {
        if let (Some(a), Some(b)) = (s.model, s.mca) {
            println!("cell {:>2}: model sd {:.1e}, mca sd {:.1e}, failures {}", s.cell.id, a.sd, b.sd, s.failures);
        }
    }
    println!("{} reps in {:.1?}", reps, start.elapsed());
    Ok(())
}
