/// 4-point Gauss-Legendre nodes on [0, 1] with matching weights (sum 1).
pub const GL4_NODES: [f64; 4] = [
    0.069_431_844_202_973_71,
    0.330_009_478_207_571_9,
    0.669_990_521_792_428_1,
    0.930_568_155_797_026_3,
];

pub const GL4_WEIGHTS: [f64; 4] = [
    0.173_927_422_568_726_93,
    0.326_072_577_431_273_07,
    0.326_072_577_431_273_07,
    0.173_927_422_568_726_93,
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_degree_seven() {
        for deg in 0..=7 {
            let q: f64 = GL4_NODES.iter().zip(GL4_WEIGHTS).map(|(x, w)| w * x.powi(deg)).sum();
            assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "degree {deg}");
        }
    }
}
