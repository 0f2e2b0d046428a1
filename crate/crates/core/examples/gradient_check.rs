//! Compares backpropagated gradients of a small tanh network with central
//! finite differences.

use guided_rl::nn::{Activation, Mlp};
use guided_rl::rng::RngStream;

fn main() -> guided_rl::Result<()> {
    let mut rng = RngStream::new(0, "init");
    let mut net = Mlp::new(&[3, 5, 4, 2], Activation::Tanh, Activation::Identity, &mut rng)?;
    let x = [0.3, -1.2, 0.7];
    let target = [1.0, -0.5];
    let loss = |net: &Mlp| -> guided_rl::Result<f64> {
        let y = net.forward(&x)?;
        Ok(y.iter().zip(&target).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum())
    };

    let cache = net.forward_cached(&x)?;
    let out_grad: Vec<f64> = cache.output().iter().zip(&target).map(|(a, b)| a - b).collect();
    let mut grads = net.zero_grads();
    net.backward(&cache, &out_grad, &mut grads)?;

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..net.num_params() {
        let p = net.params()[i];
        net.params_mut()[i] = p + h;
        let up = loss(&net)?;
        net.params_mut()[i] = p - h;
        let down = loss(&net)?;
        net.params_mut()[i] = p;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grads[i]).abs() / fd.abs().max(grads[i].abs()).max(1e-8));
    }
    println!("{} parameters, worst relative error {worst:.2e}", net.num_params());
    Ok(())
}
