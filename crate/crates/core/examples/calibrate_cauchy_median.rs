//! Empirical median of |Cauchy| from the sketch's own coefficient
//! generator; the l1 estimator divides by this constant.

use emd_stream::sketch::{cauchy_coefficient, CAUCHY_ABS_MEDIAN};

fn main() {
    let n = 400_000u64;
    let mut v: Vec<f64> = (0..n).map(|c| cauchy_coefficient(0xC0FFEE, (c % 97) as usize, c).abs()).collect();
    let mid = v.len() / 2;
    let (_, median, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    println!("empirical median {:.4} over {n} draws", median);
    println!("constant in use  {CAUCHY_ABS_MEDIAN:.4}");
    let below = v.iter().filter(|x| **x <= 1.0).count() as f64 / n as f64;
    println!("P(|C| <= 1) = {below:.4}");
}
