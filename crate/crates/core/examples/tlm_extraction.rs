//! Extract sheet and contact resistance from the bundled TLM dataset, then
//! size a reference resistor from the film.

use std::path::Path;

use camsim::device::{resistance_from_geometry, tlm_fit, FilmExtraction, TlmDataset, WS2_SHEET_RESISTANCE};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> camsim::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/tlm_synthetic.csv");
    let data = TlmDataset::from_csv_path(&path, 10.0)?;
    let fit = tlm_fit(&data)?;
    println!("clean:  Rsh = {:.4} MOhm/sq, Rc = {:.2} kOhm", fit.sheet_resistance / 1e6, fit.contact_resistance / 1e3);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(1.0, 0.03).unwrap();
    let mut noisy = data.clone();
    for p in &mut noisy.points {
        p.resistance_ohm *= noise.sample(&mut rng);
    }
    let nfit = tlm_fit(&noisy)?;
    println!(
        "3% noise: Rsh = {:.4} MOhm/sq ({:+.2}%), rms residual {:.1} kOhm",
        nfit.sheet_resistance / 1e6,
        100.0 * (nfit.sheet_resistance / WS2_SHEET_RESISTANCE - 1.0),
        nfit.fit_residual / 1e3
    );

    let film = FilmExtraction::ideal(WS2_SHEET_RESISTANCE);
    for (l, w) in [(0.2, 0.2), (0.2, 0.1), (0.4, 0.2)] {
        let r = resistance_from_geometry(&film, l, w, 0)?;
        println!("L = {l} um, W = {w} um -> {:.2} MOhm", r / 1e6);
    }
    Ok(())
}
