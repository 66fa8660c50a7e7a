use hypershell::geometry::{SurfacePatch, V2};
use hypershell::strain::{check_noncharacteristic, NoncharRegion};
fn main() {
    let mk = SurfacePatch::monkey_saddle([0.3, 2.4, 0.2, 4.8]).unwrap();
    let hb = NoncharRegion::hyperbola_box(0.5, 1.0, 2.0);
    let g = check_noncharacteristic(&mk, &hb, 41);
    println!("pass={} sweep={:.3e} lateral={:.3e} mixed={:.3e}", g.pass, g.min_sweep, g.min_lateral, g.max_mixed);
    println!("a={} b={}", hb.a, hb.b);
    for (t,s) in [(0.0,0.0),(hb.a,0.0),(0.0,hb.b),(hb.a,hb.b),(hb.a*0.5,hb.b*0.5)] {
        let x = hb.point(t,s);
        println!("({t:.2},{s:.2}) -> x=({:.3},{:.3}) g-det={:.3e}", x[0], x[1], mk.metric_at(x).determinant());
    }
}
