//! Scratch timing probe for the limit-law evaluator (not part of the test
//! suite; run with `cargo run --release --example limitprobe`).

use ringkpz::exactdist::QuadratureSpec;
use ringkpz::limitdist::{f2_limit, fu_limit, ScalingParams};
use std::time::Instant;

fn main() {
    let quad = QuadratureSpec::new(0.5, 64).unwrap();
    for &x in &[2.0, 0.0, -2.0, -4.0, -6.0] {
        let sp = ScalingParams::new(1.0, 0.0, x).unwrap();
        let t0 = Instant::now();
        let e = f2_limit(&sp, &quad).unwrap();
        println!(
            "F2  x={x:+.1}: value={:+.6e} prec={} z_nodes={} xi={} floor={:.1e} in {:?}",
            e.value,
            e.precision,
            e.z_nodes,
            e.xi_nodes,
            e.noise_floor,
            t0.elapsed()
        );
    }
    for &x in &[0.0, -4.0] {
        let sp = ScalingParams::new(1.0, 0.0, x).unwrap();
        let t0 = Instant::now();
        let e = fu_limit(&sp, &quad).unwrap();
        println!(
            "FU  x={x:+.1}: value={:+.6e} prec={} z_nodes={} xi={} floor={:.1e} in {:?}",
            e.value,
            e.precision,
            e.z_nodes,
            e.xi_nodes,
            e.noise_floor,
            t0.elapsed()
        );
    }
}
