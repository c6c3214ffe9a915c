//! Prints the oracle value of N₂ᵗ for the centred disk of radius 0.25 under
//! grid refinement.

use perilayer_oracle::{band_n2_tangential, Disk};

fn main() {
    let disk = Disk {
        center: [0.5, 0.0],
        radius: 0.25,
    };
    let l_band: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3.0);
    for n in [64usize, 128, 256, 512] {
        let t = std::time::Instant::now();
        let r = band_n2_tangential(Some(&disk), l_band, 1.0 / n as f64);
        println!("h = 1/{:<4} N2t = {:.10} residual {:.1e} ({:.1} s)", n, r.n2_t, r.relative_residual, t.elapsed().as_secs_f64());
    }
}
