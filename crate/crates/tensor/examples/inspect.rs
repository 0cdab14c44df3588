//! Ad-hoc frame statistics for debugging generated output (not a test).
use lidarseq_tensor::{load, Tensor};

fn stats(name: &str, t: &Tensor<f32>) {
    let d = t.to_vec();
    let hw = d.len() / 2;
    let range = &d[..hw];
    let lo = range.iter().cloned().fold(f32::INFINITY, f32::min);
    let hi = range.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let mean = range.iter().sum::<f32>() / hw as f32;
    let frac_neg09 = range.iter().filter(|v| **v <= -0.9).count() as f32 / hw as f32;
    let frac_sentinel = range.iter().filter(|v| **v <= -0.9999).count() as f32 / hw as f32;
    println!(
        "{}: range in [{:.3}, {:.3}] mean {:.3}; <=-0.9: {:.2}%, <=-0.9999: {:.2}%",
        name, lo, hi, mean, frac_neg09 * 100.0, frac_sentinel * 100.0
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let a: Tensor<f32> = load(&args[1]).unwrap();
    stats(&args[1], &a);
    if args.len() > 2 {
        let b: Tensor<f32> = load(&args[2]).unwrap();
        stats(&args[2], &b);
        let (da, db) = (a.to_vec(), b.to_vec());
        let mae: f32 = da.iter().zip(&db).map(|(x, y)| (x - y).abs()).sum::<f32>() / da.len() as f32;
        println!("MAE: {:.4}", mae);
    }
}
