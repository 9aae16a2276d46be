//! Adaptive Gauss–Kronrod integration and Gauss–Hermite nodes.

use std::collections::BinaryHeap;

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_980_148_300,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Value and estimated absolute error of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for QuadResult {
    type Output = QuadResult;

    fn add(self, rhs: Self) -> Self {
        QuadResult {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
        }
    }
}

/// Stopping rule for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self {
            abs: 0.0,
            rel,
            max_intervals: 2000,
        }
    }

    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 2000,
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

/// One application of the 21-point Kronrod rule on `[a, b]`.
pub fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> QuadResult {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut gauss = 0.0;
    let mut kronrod = fc * WGK[10];
    let mut res_abs = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    QuadResult { value, error: err }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    result: QuadResult,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.result.error == other.result.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.result.error.total_cmp(&other.result.error)
    }
}

/// Globally adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`:
/// the segment with the largest error estimate is bisected until the total
/// error meets the tolerance or the interval budget runs out.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            error: 0.0,
        };
    }
    let first = kronrod21(&f, a, b);
    let mut total = first;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        result: first,
    });
    while total.error > tol.target(total.value) && heap.len() < tol.max_intervals {
        let seg = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            heap.push(seg);
            break;
        }
        let left = kronrod21(&f, seg.a, mid);
        let right = kronrod21(&f, mid, seg.b);
        total.value += left.value + right.value - seg.result.value;
        total.error += left.error + right.error - seg.result.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            result: left,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            result: right,
        });
    }
    // Re-sum to shed the drift of the running updates.
    heap.into_iter().fold(
        QuadResult {
            value: 0.0,
            error: 0.0,
        },
        |acc, s| acc + s.result,
    )
}

/// Integrates over consecutive breakpoints, splitting the tolerance evenly.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: Tolerance) -> QuadResult {
    let pieces = breaks.len().saturating_sub(1).max(1);
    let piece_tol = Tolerance {
        abs: tol.abs / pieces as f64,
        ..tol
    };
    breaks
        .windows(2)
        .map(|w| integrate(&f, w[0], w[1], piece_tol))
        .fold(
            QuadResult {
                value: 0.0,
                error: 0.0,
            },
            |acc, r| acc + r,
        )
}

/// Physicists' Gauss–Hermite rule: nodes and weights for `∫ f(x) e^{−x²} dx`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // orthonormal Hermite recurrence
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    // ascending order
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_integrates_polynomials_exactly() {
        for deg in 0..=31 {
            let r = kronrod21(&|x: f64| x.powi(deg), 0.0, 1.0);
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((r.value - exact).abs() < 1e-14, "degree {deg}: {}", r.value);
        }
    }

    #[test]
    fn gauss_weights_are_consistent() {
        // The embedded 10-point Gauss rule is exact to degree 19.
        let w: f64 = WG.iter().sum::<f64>() * 2.0;
        assert!((w - 2.0).abs() < 1e-14);
        let m2: f64 = (0..5).map(|i| 2.0 * WG[i] * XGK[2 * i + 1].powi(18)).sum();
        assert!((m2 - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = integrate(|x: f64| x.powf(-0.4), 0.0, 1.0, Tolerance::relative(1e-10));
        assert!((r.value - 1.0 / 0.6).abs() < 1e-9, "{r:?}");
        let r = integrate(|x: f64| (1.0 - x * x).sqrt(), -1.0, 1.0, Tolerance::relative(1e-12));
        assert!((r.value - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn hermite_moments() {
        let (x, w) = gauss_hermite(20);
        let pi_sqrt = std::f64::consts::PI.sqrt();
        let mut expected = pi_sqrt;
        for k in 0..20 {
            let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(2 * k)).sum();
            assert!((m - expected).abs() < 1e-12 * expected, "moment {k}");
            expected *= (2.0 * k as f64 + 1.0) / 2.0;
        }
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }
}
