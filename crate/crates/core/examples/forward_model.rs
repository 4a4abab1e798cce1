//! Press a T shape, clock 20 weight patterns through the summing amplifier
//! and compare the ADC codes with the ideal inner products.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spts::firmware::SensingMatrix;
use spts::frontend::{acquire, frame_rate, measure_once, AcquisitionConfig};
use spts::scenarios::{ShapeKind, ShapeSpec};
use spts::tactile::{transduce, CircuitParams, GridGeometry};

fn main() -> spts::Result<()> {
    let g = GridGeometry::default();
    let circuit = CircuitParams::default();
    let shape = ShapeSpec::new(ShapeKind::T, (4.0, 4.5), 7.0, 8.0).with_thickness(2.0);
    let frame = transduce(&shape.render(&g)?, &circuit)?;

    let phi = SensingMatrix::from_master_seed(1, 20, g.len(), circuit.supply)?;
    let acq = AcquisitionConfig {
        noise_sigma: 5e-3,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y = acquire(&frame, &phi, &circuit, &acq, &mut rng)?;

    println!("frame rate at M=20: {} FPS", frame_rate(20, &acq)?);
    println!("  i   t (us)    ideal (V)   ADC (V)");
    for i in 0..y.len() {
        let ideal = measure_once(&phi.row(i), &frame, &circuit)?;
        println!("{i:3} {:8.2} {ideal:+11.5} {:+9.5}", y.timestamps()[i] * 1e6, y.values()[i]);
    }
    println!("LSB {:.5} V, rms |y| {:.4} V", acq.lsb(), y.rms());
    Ok(())
}
