//! Prints how many samples of each batch are switched to the partial channel
//! over a run, in batch mode and per-sample mode.

use guided_rl::guidance::{partial_count, MixingSchedule};
use guided_rl::obs::Channel;
use guided_rl::rng::RngStream;

fn main() -> guided_rl::Result<()> {
    let (iterations, batch) = (20u64, 5000usize);
    let nmix = iterations / 2;
    println!("batch mode, N_MIX = {nmix}");
    for i in 0..iterations {
        let k = partial_count(batch, i, Some(nmix));
        println!("  iteration {i:>2}: {k:>4} partial / {batch}");
    }

    let steps_per_iteration = 1000u64;
    let mut s = MixingSchedule::per_sample(nmix * steps_per_iteration, RngStream::new(0, "guidance"));
    println!("per-sample mode, n_mix = {}", nmix * steps_per_iteration);
    for i in 0..iterations {
        let partial = (0..steps_per_iteration)
            .filter(|_| s.insertion_channel() == Channel::Partial)
            .count();
        println!("  iteration {i:>2}: {partial:>4} partial / {steps_per_iteration}");
    }
    Ok(())
}
