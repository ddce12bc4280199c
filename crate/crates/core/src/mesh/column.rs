use super::{structured_box, tags, Domain, Mesh};
use crate::error::{Error, Result};

/// Structured `b x h x b` column with the height along the second axis.
/// `divisions` counts cells along each axis.
pub fn generate_column_mesh(height: f64, breadth: f64, divisions: [usize; 3]) -> Result<Mesh> {
    if !(height > 0.0 && breadth > 0.0) || !height.is_finite() || !breadth.is_finite() {
        return Err(Error::Argument(format!(
            "column dimensions must be positive (h = {height}, b = {breadth})"
        )));
    }
    if divisions.iter().any(|&d| d == 0) {
        return Err(Error::Argument(format!("zero divisions in {divisions:?}")));
    }
    let side = |axis: usize, upper: bool| match (axis, upper) {
        (1, false) => tags::BOTTOM,
        (1, true) => tags::TOP,
        _ => tags::SIDES,
    };
    Ok(structured_box(
        divisions,
        [breadth, height, breadth],
        |_, _, _| true,
        side,
        tags::SIDES,
        Domain::Macro,
    ))
}
