use camnoise_tensor::ops;
use std::time::Instant;

fn bench(batch: usize, cin: usize, cout: usize, h: usize, w: usize, reps: usize) {
    let hw = h * w;
    let x: Vec<f32> = (0..batch * cin * hw).map(|i| (i % 17) as f32 / 17.0).collect();
    let wt: Vec<f32> = (0..cout * cin * 9).map(|i| (i % 13) as f32 / 13.0 - 0.5).collect();
    let b: Vec<f32> = vec![0.1; cout];
    let mut out = vec![0.0f32; batch * cout * hw];

    ops::conv3x3_forward(&x, &wt, &b, batch, cin, cout, h, w, &mut out);
    let t = Instant::now();
    for _ in 0..reps {
        ops::conv3x3_forward(&x, &wt, &b, batch, cin, cout, h, w, &mut out);
    }
    let dt = t.elapsed().as_secs_f64() / reps as f64;
    let macs = (batch * cout * cin * 9 * hw) as f64;
    println!("[{batch}x{cin}->{cout} {h}x{w}] forward: {:.4}s  {:.2} GMAC/s", dt, macs / dt / 1e9);

    let dy = out.clone();
    let mut dx = vec![0.0f32; x.len()];
    let mut dw = vec![0.0f32; wt.len()];
    let mut db = vec![0.0f32; b.len()];
    let t = Instant::now();
    for _ in 0..reps {
        ops::conv3x3_backward(&x, &wt, &dy, batch, cin, cout, h, w, Some(&mut dx), &mut dw, &mut db);
    }
    let dt = t.elapsed().as_secs_f64() / reps as f64;
    println!("[{batch}x{cin}->{cout} {h}x{w}] backward: {:.4}s  {:.2} GMAC/s", dt, 2.0 * macs / dt / 1e9);
}

fn main() {
    bench(16, 16, 16, 32, 32, 10);   // acceptance desk-scale shape
    bench(4, 64, 64, 128, 128, 2);   // full-scale shape
}
