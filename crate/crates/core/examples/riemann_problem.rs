//! Exact Riemann solutions: the Sod tube and a gas/stiffened-liquid interface.

use abinitio::eos::{EosParams, FullState, PhaseState};
use abinitio::riemann;

fn main() -> abinitio::Result<()> {
    let gas = EosParams::ideal_gas(1.4);
    let sod = riemann::solve(
        &FullState::validated(PhaseState::new(1.0, 0.0, 1.0), gas)?,
        &FullState::validated(PhaseState::new(0.125, 0.0, 0.1), gas)?,
    )?;
    println!("Sod: p* = {:.6}, u* = {:.6}", sod.p_star, sod.u_star);
    println!(
        "     waves {:?} / {:?}, speeds {:.4} .. {:.4}",
        sod.left_wave,
        sod.right_wave,
        sod.min_speed(),
        sod.max_speed()
    );

    // self-similar profile at t = 0.2
    println!("{:>8} {:>10} {:>10} {:>10}", "x", "rho", "u", "p");
    for j in 0..=10 {
        let x = -0.5 + 0.1 * j as f64;
        let w = sod.sample(x / 0.2);
        println!("{x:>8.2} {:>10.5} {:>10.5} {:>10.5}", w.rho(), w.u(), w.p());
    }

    let liquid = EosParams::new(4.4, 6000.0, 0.0)?;
    let sol = riemann::solve(
        &FullState::validated(PhaseState::new(1000.0, 0.0, 1e4), liquid)?,
        &FullState::validated(PhaseState::new(1.0, 0.0, 1.0), gas)?,
    )?;
    println!(
        "liquid|gas: p* = {:.4}, u* = {:.4}, rho* = {:.4} / {:.4}",
        sol.p_star, sol.u_star, sol.rho_star_left, sol.rho_star_right
    );
    Ok(())
}
