use inrlab::linalg::{matmul, Matrix};
use std::time::Instant;

fn bench(m: usize, k: usize, n: usize) {
    let a = Matrix::from_fn(m, k, |i, j| ((i * 7 + j * 3) % 11) as f64 * 0.1);
    let b = Matrix::from_fn(k, n, |i, j| ((i * 5 + j) % 13) as f64 * 0.1);
    let reps = 20;
    let t = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(matmul(&a, &b).unwrap());
    }
    let dt = t.elapsed().as_secs_f64() / reps as f64;
    println!("{m}x{k}x{n}: {:.3} ms, {:.2} GFLOP/s", dt * 1e3, 2.0 * (m * k * n) as f64 / dt / 1e9);
}

fn main() {
    for (m, k, n) in [(128, 128, 9216), (128, 128, 3200), (128, 3200, 128), (128, 1, 3200), (1, 128, 3200), (128, 128, 128), (128, 3200, 1), (1, 3200, 128)] {
        bench(m, k, n);
    }
}
