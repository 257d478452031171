use bubbleflow::mesh::RadialMesh;
use bubbleflow::state::{EulerField, LLGParams, MagnetizationField};
use bubbleflow::stencil::SpatialOperators;
use bubbleflow::dynamics::*;

fn harmonic_theta(q: f64, mesh: &RadialMesh<f64>) -> Vec<f64> {
    mesh.nodes().iter().map(|&r| 2.0 * (q * r).atan()).collect()
}
fn radial_field(theta: &[f64], phi: f64) -> MagnetizationField<f64> {
    MagnetizationField {
        u: theta.iter().map(|t| phi.cos() * t.sin()).collect(),
        v: theta.iter().map(|t| phi.sin() * t.sin()).collect(),
        w: theta.iter().map(|t| t.cos()).collect(),
    }
}

fn main() {
    // 3comp residual per node profile
    for n in [101usize, 201] {
        let mesh = RadialMesh::<f64>::uniform(n);
        let ops = SpatialOperators::new(&mesh);
        let theta = harmonic_theta(1.0, &mesh);
        let field = radial_field(&theta, 0.0);
        let params = LLGParams::heat_flow(1);
        let mut ut = vec![0.0; n]; let mut vt = vec![0.0; n]; let mut wt = vec![0.0; n];
        rhs_3comp(&field, &mesh, &ops, &params, &mut ut, &mut vt, &mut wt);
        let (mut worst, mut at) = (0.0f64, 0usize);
        for i in 0..n {
            let m = ut[i].abs().max(vt[i].abs()).max(wt[i].abs());
            if m > worst { worst = m; at = i; }
        }
        println!("3comp n={n}: max residual {worst:.3e} at node {at} (r={})", mesh.nodes()[at]);
    }
    // euler residual
    for n in [101usize, 201] {
        let mesh = RadialMesh::<f64>::uniform(n);
        let field = EulerField { theta: harmonic_theta(1.0, &mesh), phi: vec![0.3; n] };
        let params = LLGParams::new(0.6, 0.8, 1).unwrap();
        let rates = rhs_euler(&field, &mesh, &params);
        let (mut worst, mut at) = (0.0f64, 0usize);
        for i in 0..n {
            let m = rates.theta_t[i].abs().max(rates.phi_t[i].abs());
            if m > worst { worst = m; at = i; }
        }
        println!("euler n={n}: max residual {worst:.3e} at node {at}");
    }
    // radial vs 3comp
    {
        let n = 201;
        let mesh = RadialMesh::<f64>::uniform(n);
        let ops = SpatialOperators::new(&mesh);
        let theta: Vec<f64> = mesh.nodes().iter().map(|&r| 4.0/3.0*std::f64::consts::PI*r).collect();
        let field = radial_field(&theta, 0.0);
        let params = LLGParams::heat_flow(1);
        let mut ut = vec![0.0; n]; let mut vt = vec![0.0; n]; let mut wt = vec![0.0; n];
        rhs_3comp(&field, &mesh, &ops, &params, &mut ut, &mut vt, &mut wt);
        let mut tt = vec![0.0; n];
        rhs_radial(&theta, &mesh, &ops, &mut tt);
        let h = 1.0/(n-1) as f64;
        let mut worst = 0.0f64; let mut at = 0;
        for i in 1..n-1 {
            let d = (ut[i] - theta[i].cos()*tt[i]).abs().max((wt[i] + theta[i].sin()*tt[i]).abs());
            if d > worst { worst = d; at = i; }
        }
        println!("radial-vs-3comp: worst {worst:.3e} at node {at}, 60h^2 = {:.3e}", 60.0*h*h);
    }
}
