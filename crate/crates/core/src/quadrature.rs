//! Fixed-order Gauss-Legendre quadrature.

const NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Eight-point rule on `[lo, hi]`.
pub fn gauss8(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let mut acc = 0.0;
    for (x, w) in NODES.iter().zip(WEIGHTS) {
        acc += w * (f(mid - half * x) + f(mid + half * x));
    }
    acc * half
}

/// Eight-point rule composed over `pieces` equal subintervals.
pub fn gauss8_composite(f: impl Fn(f64) -> f64, lo: f64, hi: f64, pieces: usize) -> f64 {
    let h = (hi - lo) / pieces as f64;
    (0..pieces)
        .map(|k| gauss8(&f, lo + h * k as f64, lo + h * (k + 1) as f64))
        .sum()
}
