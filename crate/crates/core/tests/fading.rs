use crlink::fading::{sample_block_gains, GainModel, GainStreams, RatioLaw};

fn section_v() -> GainModel {
    GainModel::new(1.0, 1.0, 0.03, 0.03, 1e-3).unwrap()
}

fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0f64, |d, (k, &x)| {
        let f = cdf(x);
        d.max((f - k as f64 / n).abs()).max(((k + 1) as f64 / n - f).abs())
    })
}

fn draws(model: &GainModel, seed: u64, n: usize) -> Vec<crlink::fading::BlockGains> {
    let mut s = GainStreams::new(seed);
    (0..n).map(|_| sample_block_gains(model, &mut s)).collect()
}

/// `P(s_a / s_b <= x)` for independent exponentials with mean ratio `r`.
fn ratio_of_exponentials_cdf(x: f64, r: f64) -> f64 {
    x / (x + r)
}

#[test]
fn modified_snir_laws_match_samples() {
    let m = section_v();
    let g = draws(&m, 21, 1_000_000);
    let a = m.alpha_scale();
    let b = m.beta_scale();
    let d_alpha = ks(g.iter().map(|x| x.alpha()).collect(), |t| ratio_of_exponentials_cdf(t, a));
    let d_beta = ks(g.iter().map(|x| x.beta()).collect(), |t| ratio_of_exponentials_cdf(t, b));
    let d_prod = ks(g.iter().map(|x| x.alpha() * x.beta()).collect(), |t| m.product_cdf(t));
    let d_rad = ks(g.iter().map(|x| x.beta() / x.alpha()).collect(), |t| m.radial_cdf(t));
    for (name, d) in [("alpha", d_alpha), ("beta", d_beta), ("product", d_prod), ("radial", d_rad)] {
        assert!(d <= 0.002, "{name}: KS {d}");
    }
}

#[test]
fn product_cdf_matches_direct_integration() {
    // P(alpha beta <= t) = int P(alpha <= t / y) f_beta(y) dy with
    // f_beta(y) = B / (y + B)^2; on y = B e^v the weight is e^v / (1 + e^v)^2.
    let m = GainModel::new(1.3, 0.7, 0.05, 0.02, 1e-3).unwrap();
    let (a, b) = (m.alpha_scale(), m.beta_scale());
    for t in [1e-3, 0.5, 10.0, 400.0, 1e4, 1e6] {
        let n = 200_000;
        let (lo, hi) = (-45.0, 45.0);
        let h = (hi - lo) / n as f64;
        let f = |v: f64| {
            let w = v.exp();
            ratio_of_exponentials_cdf(t / (b * w), a) * w / ((1.0 + w) * (1.0 + w))
        };
        let mut acc = f(lo) + f(hi);
        for k in 1..n {
            acc += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let direct = acc * h / 3.0;
        let exact = m.product_cdf(t);
        assert!((direct - exact).abs() < 1e-7 * exact.max(1e-3), "t {t}: {direct} vs {}", m.product_cdf(t));
    }
}

#[test]
fn gain_draws_have_configured_means() {
    let m = GainModel::new(2.0, 0.5, 0.1, 0.04, 1e-3).unwrap();
    let g = draws(&m, 3, 400_000);
    let n = g.len() as f64;
    for (name, mean, xs) in [
        ("s11", m.mean_s11(), g.iter().map(|x| x.s11).collect::<Vec<_>>()),
        ("s22", m.mean_s22(), g.iter().map(|x| x.s22).collect()),
        ("s12", m.mean_s12(), g.iter().map(|x| x.s12).collect()),
        ("s21", m.mean_s21(), g.iter().map(|x| x.s21).collect()),
    ] {
        let avg = xs.iter().sum::<f64>() / n;
        // Exponential: standard deviation equals the mean.
        assert!((avg - mean).abs() < 4.0 * mean / n.sqrt(), "{name}: {avg} vs {mean}");
        let tail = xs.iter().filter(|&&x| x > 3.0 * mean).count() as f64 / n;
        let p = (-3.0f64).exp();
        assert!((tail - p).abs() < 4.0 * (p * (1.0 - p) / n).sqrt(), "{name} tail {tail}");
    }
}

#[test]
fn gains_are_independent() {
    let m = section_v();
    let g = draws(&m, 8, 400_000);
    let n = g.len() as f64;
    let corr = |f: fn(&crlink::fading::BlockGains) -> (f64, f64)| {
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for b in &g {
            let (x, y) = f(b);
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let cov = sxy / n - sx * sy / (n * n);
        cov / ((sxx / n - (sx / n).powi(2)) * (syy / n - (sy / n).powi(2))).sqrt()
    };
    for c in [
        corr(|b| (b.s11, b.s22)),
        corr(|b| (b.s11, b.s21)),
        corr(|b| (b.s12, b.s21)),
        corr(|b| (b.s22, b.s12)),
    ] {
        assert!(c.abs() < 5.0 / n.sqrt(), "correlation {c}");
    }
}

#[test]
fn seeking_matches_sequential_draws() {
    let m = section_v();
    let seq = draws(&m, 77, 1000);
    for k in [0u64, 1, 499, 999] {
        let mut s = GainStreams::at_block(77, k);
        assert_eq!(sample_block_gains(&m, &mut s), seq[k as usize]);
    }
}

#[test]
fn link_snir_law_matches_samples() {
    // Primary SNIR P1 s11 / (p2 s21 + N0) at p2 = 2.
    let m = section_v();
    let law = RatioLaw::new(1.0, 2.0, 1e-3, m.mean_s11(), m.mean_s21()).unwrap();
    let g = draws(&m, 5, 500_000);
    let d = ks(g.iter().map(|x| law.sample(x.s11, x.s21)).collect(), |y| law.cdf(y));
    assert!(d <= 0.003, "KS {d}");
}
