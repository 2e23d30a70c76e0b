//! Step and plateau learning-rate schedules.

use sskt::training::{plateau_schedule, step_schedule, PlateauState};

fn main() {
    for epoch in [0, 149, 150, 250, 350] {
        println!(
            "step epoch {epoch:>3}: lr {}",
            step_schedule(0.1, 0.1, &[150, 250, 350], epoch)
        );
    }

    // Validation accuracy stalls after epoch 2; patience 2 drops the rate twice.
    let mut state = PlateauState::new(0.1, true);
    for (epoch, acc) in [0.50, 0.60, 0.65, 0.64, 0.65, 0.63, 0.62, 0.61]
        .into_iter()
        .enumerate()
    {
        let lr = plateau_schedule(&mut state, acc, 0.1, 2);
        println!("plateau epoch {epoch}: metric {acc:.2} -> lr {lr}");
    }
}
