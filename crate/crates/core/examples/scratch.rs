use cataclysm::anosov::*;
use cataclysm::surface::*;
use cataclysm::flags::*;
use cataclysm::liealg::*;

fn main() {
    let f = fuchsian_octagon(2).unwrap();
    let rep = hitchin(&f, 3).unwrap();
    let oracle = BoundaryOracle::new(&rep);
    let pres = rep.presentation().clone();
    let gamma = Word::parse("a1", &pres).unwrap();
    let f1 = oracle.flag_at(&gamma).unwrap();
    for htxt in ["b1", "b2", "a2 b1", "b1 a2 b2", "b2^-1 a2 b1", "a2 a2 b1"] {
        let h = Word::parse(htxt, &pres).unwrap();
        let conj = gamma.conjugated_by(&h);
        let lhs = oracle.flag_at(&conj).unwrap();
        let rhs = f1.translate(&rep.evaluate(&h));
        let g = rep.evaluate(&conj);
        let moduli = eigenvalue_moduli(&g);
        // invariance residual of lhs under g
        let mut inv_res: f64 = 0.0;
        for d in rep.theta().indices() {
            let v = lhs.frame().columns(0, d).into_owned();
            let p = &v * v.transpose();
            let gv = g.matrix() * &v;
            inv_res = inv_res.max((&gv - &p * &gv).amax() / g.matrix().amax());
        }
        let mut inv_res_rhs: f64 = 0.0;
        for d in rep.theta().indices() {
            let v = rhs.frame().columns(0, d).into_owned();
            let p = &v * v.transpose();
            let gv = g.matrix() * &v;
            inv_res_rhs = inv_res_rhs.max((&gv - &p * &gv).amax() / g.matrix().amax());
        }
        println!("h = {htxt}: dist {:.3e}, |g| {:.3e}, moduli {:?}, inv(lhs) {:.1e} inv(rhs) {:.1e}",
            lhs.dist(&rhs), g.matrix().amax(), moduli.iter().map(|m| format!("{:.2e}", m)).collect::<Vec<_>>(), inv_res, inv_res_rhs);
    }
}
