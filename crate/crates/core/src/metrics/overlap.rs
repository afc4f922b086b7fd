//! Volumetric overlap (DSC) and centerline overlap (clDice).

use super::topology::skeletonize;
use super::EmptyPolicy;
use crate::error::Result;
use crate::volume::Mask3;

/// `2|P∩G| / (|P| + |G|)`.
pub fn dsc(p: &Mask3, g: &Mask3, policy: EmptyPolicy) -> Result<f64> {
    p.grid().ensure_same(g.grid(), "dsc")?;
    let (np, ng) = (p.count(), g.count());
    if let Some(v) = policy.resolve(np == 0, ng == 0) {
        return Ok(v);
    }
    Ok(2.0 * p.intersection_count(g) as f64 / (np + ng) as f64)
}

/// Topology precision and sensitivity from precomputed skeletons:
/// `(|skel(P)∩G| / |skel(P)|, |skel(G)∩P| / |skel(G)|)`.
pub fn topology_precision_sensitivity(p: &Mask3, g: &Mask3, skel_p: &Mask3, skel_g: &Mask3) -> (f64, f64) {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    (
        ratio(skel_p.intersection_count(g), skel_p.count()),
        ratio(skel_g.intersection_count(p), skel_g.count()),
    )
}

/// Centerline Dice: harmonic mean of topology precision and sensitivity.
pub fn cl_dice(p: &Mask3, g: &Mask3, policy: EmptyPolicy) -> Result<f64> {
    p.grid().ensure_same(g.grid(), "cl_dice")?;
    if let Some(v) = policy.resolve(p.is_empty(), g.is_empty()) {
        return Ok(v);
    }
    let (sp, sg) = (skeletonize(p), skeletonize(g));
    let (tprec, tsens) = topology_precision_sensitivity(p, g, &sp, &sg);
    if tprec + tsens == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * tprec * tsens / (tprec + tsens))
}
