use rwld_core::noise::{build_spatial_covariance, NoiseSampler, NoiseSpec, SamplingMethod};
use rwld_core::{Grid, HurstParam};

fn main() {
    let hp = HurstParam::new(0.3).unwrap();
    let grid = Grid::new(2.0, 64, 1.0, 16).unwrap();
    let q = build_spatial_covariance(&grid, &hp);
    let dt = grid.dt();
    let n = grid.nx;
    for seed in [29u64, 30, 31, 37, 41, 43, 47, 53] {
        let spec = NoiseSpec {
            hp,
            grid,
            seed,
            method: SamplingMethod::ExactCholesky,
        };
        let sampler = NoiseSampler::new(&spec).unwrap();
        let mut acc = vec![0.0f64; n * n];
        let reps = 100_000usize.div_ceil(grid.nt);
        let mut rows = 0usize;
        for rep in 0..reps {
            let dw = sampler.sample(rep as u64);
            for i in 0..grid.nt {
                let w = dw.row(i);
                for j in 0..n {
                    for k in j..n {
                        acc[j * n + k] += w[j] * w[k];
                    }
                }
                rows += 1;
            }
        }
        let mut z_max: f64 = 0.0;
        let mut adj_emp_max = f64::NEG_INFINITY;
        for j in 0..n {
            for k in j..n {
                let emp = acc[j * n + k] / rows as f64;
                let want = dt * q.at(j, k);
                let var = dt * dt * (q.at(j, j) * q.at(k, k) + q.at(j, k) * q.at(j, k));
                let z = (emp - want).abs() / (var / rows as f64).sqrt();
                z_max = z_max.max(z);
                if k == j + 1 {
                    adj_emp_max = adj_emp_max.max(emp);
                }
            }
        }
        println!("seed {seed}: z_max {z_max:.3} adj_emp_max {adj_emp_max:.3e}");
    }
}
