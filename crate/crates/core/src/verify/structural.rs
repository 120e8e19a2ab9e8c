use super::{CheckReport, ConstantSource, Witness};
use crate::basis::Basis;
use crate::damping::{structural_constant_estimate, ConstantProvenance, DampingProfile};
use crate::error::Result;

/// Grid check of `|grad a|^2 <= C_a a` on `{a > floor}` against the known constant.
/// Profiles without a known constant, or whose ratio exceeds it, are NON-COMPLIANT.
pub fn structural_report(profile: &DampingProfile, basis: &Basis, floor: f64) -> Result<CheckReport> {
    let est = structural_constant_estimate(profile, basis, floor)?;
    let mut rep = CheckReport::new("structural_condition");
    let source = match profile.provenance {
        ConstantProvenance::Analytic => ConstantSource::Analytic,
        ConstantProvenance::Declared => ConstantSource::Declared,
        ConstantProvenance::Unknown => ConstantSource::Unknown,
    };
    rep.measure("ratio_max", est.value)
        .measure("C_a", profile.structural_constant)
        .measure("a_at_witness", est.a_at_witness)
        .tolerance("floor", floor)
        .tolerance("relative_margin", 1e-2)
        .constant("C_a", source);
    let witness = (!est.compliant).then(|| {
        Witness::new(format!("NON-COMPLIANT: |grad a|^2 / a peaks at x = {:?}", est.witness), None, est.value)
    });
    Ok(rep.conclude(est.compliant, witness))
}
