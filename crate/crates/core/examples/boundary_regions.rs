//! Builds a decision region (interpolating toward another class's target) and an
//! adversarial region (interpolating toward a PGD example) for spiral points.
//! The arm means of the spiral sit on the wrong side of the boundary, so the
//! targets fall back to correctly classified member points.

use regionlab::analytics::{interpolation_search, pgd_attack, PgdConfig};
use regionlab::data::{make_spiral, SpiralSpec};
use regionlab::polytope::insphere;
use regionlab::sweep::ClassTargets;
use regionlab::train::{train, TrainConfig, Variant};

fn main() -> regionlab::Result<()> {
    let data = make_spiral(&SpiralSpec::default());
    let (model, _) = train(&TrainConfig::spiral(Variant::Bn, 0), &data)?;
    let targets = ClassTargets::new(&model, &data)?;
    println!("fallback targets per class: {:?}", targets.fallback);
    let pgd = PgdConfig { eps: 0.25, step: 0.02, ..PgdConfig::default() };
    for i in [10, 400, 900] {
        let x = data.point(i);
        let other = 1 - data.labels[i];
        let target = targets.points[other].as_ref().expect("spiral arms are learned");
        let d = interpolation_search(&model, x.view(), target.view(), 10_000)?;
        print!("point {i}: decision alpha {:.6}", d.alpha_star);
        if !d.no_boundary {
            print!(" radius {:.4}", insphere(&d.boundary_system)?.inradius);
        }
        let adv = pgd_attack(&model, x.view(), data.labels[i], &pgd)?;
        let a = interpolation_search(&model, x.view(), adv.x_adv.view(), 10_000)?;
        println!(
            "; pgd success {} loss {:.3}, adversarial alpha {:.6}{}",
            adv.success,
            adv.loss,
            a.alpha_star,
            if a.no_boundary { " (no boundary)" } else { "" }
        );
    }
    Ok(())
}
