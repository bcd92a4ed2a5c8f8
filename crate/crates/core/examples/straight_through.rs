//! One straight-through Gumbel selection: the forward value is one-hot, the
//! gradient is that of the relaxed softmax.
//!
//!     cargo run --release --example straight_through

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treeattn::parser::{gumbel_noise, select_with_noise, GumbelConfig};
use treeattn::tensor::{Tape, Tensor};

fn main() -> treeattn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let logits = vec![0.5, 1.5, -0.3, 0.9];
    let readout = vec![1.0, -2.0, 0.5, 3.0];
    for temperature in [0.5, 1.0, 2.0] {
        let config = GumbelConfig {
            temperature,
            ..GumbelConfig::default()
        };
        let noise = gumbel_noise(logits.len(), &mut rng);
        let mut tape = Tape::new();
        let l = tape.param(&Tensor::vector(logits.clone())?);
        let base = tape.log_softmax(l)?;
        let selection = select_with_noise(&mut tape, base, &config, &noise, None)?;
        let weights = selection.weights.expect("train mode");
        let c = tape.constant_vec(readout.clone())?;
        let y = tape.dot(weights, c)?;
        let grads = tape.backward(y)?;
        println!("tau {temperature}");
        println!("  forward  {:?}", tape.value(weights));
        println!("  relaxed  {:?}", round(&selection.relaxed));
        println!("  dy/dl    {:?}", round(grads.get(l).expect("tracked")));
    }
    Ok(())
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}
