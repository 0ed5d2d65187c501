//! Agreement and accuracy metrics on small hand-made vectors.

use affect_eval::stats::{ccc, fisher_z, fisher_z_inv, fmt_coef, pcc, uar_binary, uar_chance_threshold};

fn main() -> affect_eval::Result<()> {
    let gold = [0.1, 0.4, 0.35, 0.8, 0.6, 0.2];
    let shifted: Vec<f64> = gold.iter().map(|v| v + 0.3).collect();
    let scaled: Vec<f64> = gold.iter().map(|v| 0.5 * v).collect();

    // PCC ignores location and scale; CCC penalizes both.
    for (name, pred) in [("shifted", &shifted), ("scaled", &scaled)] {
        let r = pcc(&gold, pred)?;
        println!("{name:8} pcc {} (p {:.3})  ccc {}", fmt_coef(r.r), r.p_two_sided, fmt_coef(ccc(&gold, pred)?));
    }
    println!("ccc([0,1,2],[2,3,4]) = {}", ccc(&[0.0, 1.0, 2.0], &[2.0, 3.0, 4.0])?);

    let z = fisher_z(0.5)?;
    println!("fisher_z(0.5) = {z:.6}, back = {:.6}", fisher_z_inv(z));

    let reference = [true, true, false, false, false, false, true, false];
    let marked = [true, false, false, false, true, false, true, false];
    println!(
        "presence UAR {:.3} (chance bound for n = 8 at 5%: {:.3})",
        uar_binary(&marked, &reference)?,
        uar_chance_threshold(reference.len(), 0.05)
    );
    Ok(())
}
