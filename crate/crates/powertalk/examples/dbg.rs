use powertalk::*;
fn main() {
    let g = GridConfig::default();
    let pilot = Symbol::new(400.0, droop_slope(400.0, g.v_min, g.i_a_max).unwrap()).unwrap();
    let dist = LoadDistribution::uniform(g.r_min, g.r_max).unwrap();
    let quad = QuadratureSpec::default();
    for (vh, vl) in [(401.0, 399.0), (400.5, 399.5), (402.0, 398.0)] {
        let c = Constellation::fixed_rd(pilot, vh, vl, &g).unwrap();
        let (p10, p01) = flip_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 1.0, &quad).unwrap();
        let (q1e, q0e) = erasure_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 2.0, &quad).unwrap();
        println!("vh={vh} vl={vl}: p10={p10:.8} p01={p01:.8} diff={:.2e}  q1e={q1e:.8} q0e={q0e:.8}", (p10-p01).abs());
    }
}
