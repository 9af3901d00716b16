//! Fits the model, exports latent coordinates in the distance form and
//! draws MCA and model biplots as SVG.
//!
//! ```text
//! cargo run --release --example latent_biplot -- /tmp/biplots
//! ```

use std::fs;
use std::path::PathBuf;

use mcalogit::biplot::render_svg;
use mcalogit::export::{write_coordinates_csv, BiplotData, CoordinatePoint, PointKind};
use mcalogit::mca::mca_indicator;
use mcalogit::multilogit::{fit_majorization, latent_coordinates, probabilities_from_latent, predict_probabilities, MmOptions};
use mcalogit::simulate::{generate_dataset, SimConfig, DEFAULT_BASE_VARIANCE};
use mcalogit::tables::encode_indicator;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "biplots".into()));
    fs::create_dir_all(&dir)?;
    let cfg = SimConfig {
        n: 300,
        m: 100,
        categories_per_variable: 3,
        k: 2,
        ratio: 2.0,
        strength: 1.0,
        base_variance: DEFAULT_BASE_VARIANCE,
        seed: 1,
    };
    let data = generate_dataset(&cfg)?;
    let (t, _) = data.table.drop_empty_categories()?;

    let res = mca_indicator(&t, 2)?;
    let shares: Vec<f64> = res.inertia_shares().iter().cloned().collect();
    let svg = render_svg(&BiplotData::new("MCA", &res.points(&t), Some(&shares)));
    fs::write(dir.join("mca.svg"), svg)?;

    let a = encode_indicator(&t);
    let opts = MmOptions { lambda: 2.0, ..Default::default() };
    let (model, _) = fit_majorization(&a, 2, &opts)?;
    let lat = latent_coordinates(&model);
    let gap = (probabilities_from_latent(&lat, &model.layout).probs - predict_probabilities(&model)?.probs).amax();
    println!("distance form reproduces the model probabilities to {:.1e}", gap);

    let mut points: Vec<CoordinatePoint> = (0..t.n())
        .map(|i| CoordinatePoint {
            id: format!("i{}", i + 1),
            kind: PointKind::Individual,
            coords: lat.individuals.row(i).iter().cloned().collect(),
        })
        .collect();
    points.extend((0..lat.categories.nrows()).map(|c| {
        let (j, l) = t.layout().locate(c);
        CoordinatePoint {
            id: format!("{}={}", t.names()[j], t.labels()[j][l]),
            kind: PointKind::Category,
            coords: lat.categories.row(c).iter().cloned().collect(),
        }
    }));
    write_coordinates_csv(fs::File::create(dir.join("latent.csv"))?, &points)?;
    fs::write(dir.join("model.svg"), render_svg(&BiplotData::new("multilogit-bilinear", &points, None)))?;
    println!("wrote mca.svg, model.svg and latent.csv to {}", dir.display());
    Ok(())
}
