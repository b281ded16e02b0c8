use rand::rngs::StdRng;
use rand::SeedableRng;
use std::time::Instant;
use tree2_core::field::Precision;
use tree2_core::tree2d::TreeCtx;
use tree2_core::verify::{rand_inner_vertex, rand_sl, transporter_for_pairs};

fn main() {
    let ctx = TreeCtx::new(2, Precision::new(32, 32));
    let mut rng = StdRng::seed_from_u64(106);
    for k in 0..3 {
        let t0 = Instant::now();
        let p1 = rand_inner_vertex(&mut rng, &ctx).unwrap();
        let q1 = rand_inner_vertex(&mut rng, &ctx).unwrap();
        println!("{k}: gen {:?}", t0.elapsed());
        let h = rand_sl(&mut rng, 2, 2, 3);
        let t1 = Instant::now();
        let p2 = ctx.act(&h, &p1).unwrap();
        let q2 = ctx.act(&h, &q1).unwrap();
        println!("{k}: act {:?}", t1.elapsed());
        let t2 = Instant::now();
        match transporter_for_pairs(&ctx, (&p1, &q1), (&p2, &q2)) {
            Ok(Some(_)) => println!("{k}: transporter ok {:?}", t2.elapsed()),
            Ok(None) => println!("{k}: none {:?}", t2.elapsed()),
            Err(e) => println!("{k}: ERR {e} {:?}", t2.elapsed()),
        }
    }
}
