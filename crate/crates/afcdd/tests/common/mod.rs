//! Shared test oracles, independent of the library's evolution paths.
#![allow(dead_code)] // each test binary compiles this module separately

use afcdd::ou::OuParams;
use afcdd::sequence::DdSequence;
use num_complex::Complex64 as C64;

pub type Mat2 = [[C64; 2]; 2];

pub fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn u_free(phi: f64) -> Mat2 {
    [
        [C64::from_polar(1.0, -phi / 2.0), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::from_polar(1.0, phi / 2.0)],
    ]
}

pub fn u_pulse(phase: f64, area: f64) -> Mat2 {
    let c = C64::new((area / 2.0).cos(), 0.0);
    let s = (area / 2.0).sin();
    [
        [c, C64::new(0.0, -s) * C64::from_polar(1.0, -phase)],
        [C64::new(0.0, -s) * C64::from_polar(1.0, phase), c],
    ]
}

/// Density-matrix product oracle: evolves rho0 = (I + sigma_x)/2 through the
/// schedule at a fixed static detuning and returns the transverse coherence
/// c = 2 rho_10. No Bloch rotations, no sampling.
pub fn unitary_coherence(seq: &DdSequence, d0_rad_s: f64) -> C64 {
    let durs = seq.segment_durations();
    let mut u: Mat2 = [
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
    ];
    for (k, &dur) in durs.iter().enumerate() {
        u = matmul(&u_free(d0_rad_s * dur), &u);
        if let Some(p) = seq.pulses.get(k) {
            u = matmul(&u_pulse(p.phase_rad, p.area_rad), &u);
        }
    }
    let rho0 = [
        [C64::new(0.5, 0.0), C64::new(0.5, 0.0)],
        [C64::new(0.5, 0.0), C64::new(0.5, 0.0)],
    ];
    let udag: Mat2 = [
        [u[0][0].conj(), u[1][0].conj()],
        [u[0][1].conj(), u[1][1].conj()],
    ];
    let rho = matmul(&matmul(&u, &rho0), &udag);
    2.0 * rho[1][0]
}

/// Exact storage efficiency for ideal pi pulses under OU dephasing, from the
/// Gaussian-process filter integral: the net phase is Gaussian with variance
/// sigma^2 sum_jk s_j s_k I_jk over toggling-sign segments, where I_jk is the
/// double integral of exp(-|t - s| / tau_c) over segments j and k.
pub fn exact_ideal_eta(seq: &DdSequence, ou: &OuParams<f64>) -> f64 {
    let durs = seq.segment_durations();
    let tc = ou.tau_c_s;
    let mut starts = vec![0.0];
    for d in &durs {
        starts.push(starts.last().unwrap() + d);
    }
    let mut var = 0.0;
    for j in 0..durs.len() {
        for k in 0..durs.len() {
            let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
            let i_jk = if j == k {
                2.0 * tc * durs[j] - 2.0 * tc * tc * (1.0 - (-durs[j] / tc).exp())
            } else {
                let (a, b) = if j < k { (j, k) } else { (k, j) };
                let gap = starts[b] - (starts[a] + durs[a]);
                tc * tc
                    * (-gap / tc).exp()
                    * (1.0 - (-durs[a] / tc).exp())
                    * (1.0 - (-durs[b] / tc).exp())
            };
            var += sign * i_jk;
        }
    }
    (-(ou.sigma_rad_s * ou.sigma_rad_s) * var).exp()
}

/// Even pulse-count grid from the repetition step up to n_max, about
/// `points` entries.
pub fn even_grid_to(n_max: u32, points: usize) -> Vec<u32> {
    let step = ((n_max as f64 / points as f64 / 2.0).ceil() as u32).max(1) * 2;
    let mut g: Vec<u32> = (1..)
        .map(|k| k * step)
        .take_while(|&n| n <= n_max)
        .collect();
    if g.is_empty() {
        g.push(2);
    }
    g
}
