//! Maximum error at t = 10 for the traveling kink as the grid is refined.

use kgspline::{run, traveling_wave, BasisConfig, RunSettings};

fn main() -> kgspline::Result<()> {
    let spec = traveling_wave(0.5)?;
    let mut previous: Option<f64> = None;
    println!("{:>6} {:>7} {:>12} {:>7}", "h", "dt", "linf(10)", "ratio");
    for (h, dt) in [(0.2, 0.05), (0.1, 0.02), (0.05, 0.01)] {
        let cfg = BasisConfig::from_spacing(-30.0, 30.0, h, 0.0)?;
        let report = run(&spec, &cfg, &RunSettings::new(dt, spec.t_end), &mut [])?;
        let linf = report.final_linf.unwrap_or(f64::NAN);
        let ratio = previous
            .map(|p| format!("{:.2}", p / linf))
            .unwrap_or_default();
        println!("{h:>6} {dt:>7} {linf:>12.5e} {ratio:>7}");
        previous = Some(linf);
    }
    Ok(())
}
