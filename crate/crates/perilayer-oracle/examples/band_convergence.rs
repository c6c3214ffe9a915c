//! Prints the oracle value of D_∞ for the centred disk of radius 0.25 under
//! grid refinement.

use perilayer_oracle::{band_d_infinity, Disk};

fn main() {
    let disk = Disk {
        center: [0.5, 0.0],
        radius: 0.25,
    };
    let l_band: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(12.0);
    let max: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(256);
    for n in [64usize, 128, 256, 512].into_iter().filter(|&n| n <= max) {
        let t = std::time::Instant::now();
        let r = band_d_infinity(Some(&disk), l_band, 1.0 / n as f64);
        println!(
            "h=1/{n} D_inf={:.10} res={:.1e} time={:.1}s",
            r.d_infinity,
            r.relative_residual,
            t.elapsed().as_secs_f64()
        );
    }
}
