//! Late fusion: OLS weights over unimodal predictions fitted on validation
//! predictions, and the refusal to fit on test-split data.

use affect_eval::fusion::{apply_static_fusion, fit_static_fusion, Split, Tagged};
use affect_eval::stats::ccc;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> affect_eval::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n01 = Normal::new(0.0, 1.0).expect("valid normal");
    // Three unimodal predictors of decreasing quality.
    let mut draw = |n: usize| {
        let gold: Vec<f64> = (0..n).map(|_| n01.sample(&mut rng)).collect();
        let preds: Vec<Vec<f64>> =
            gold.iter().map(|g| [0.6, 1.0, 1.6].iter().map(|s| 0.7 * g + s * n01.sample(&mut rng)).collect()).collect();
        (preds, gold)
    };
    let (val_x, val_y) = draw(200);
    let (test_x, test_y) = draw(200);

    let model = fit_static_fusion(&Tagged::new(Split::Validation, val_x), &Tagged::new(Split::Validation, val_y))?;
    let fused: Vec<f64> = test_x.iter().map(|r| apply_static_fusion(&model, r)).collect::<affect_eval::Result<_>>()?;
    for m in 0..3 {
        let uni: Vec<f64> = test_x.iter().map(|r| r[m]).collect();
        println!("modality {m}: CCC {:.3}", ccc(&uni, &test_y)?);
    }
    println!("fused:      CCC {:.3}", ccc(&fused, &test_y)?);

    let leak = fit_static_fusion(&Tagged::new(Split::Test, test_x), &Tagged::new(Split::Test, test_y));
    println!("fitting on test data: {}", leak.unwrap_err());
    Ok(())
}
