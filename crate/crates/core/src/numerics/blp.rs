use super::NumericsError;

/// Largest number of assignment maps the exhaustive search will visit.
pub const MAX_SEARCH_SPACE: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySearchResult {
    /// Chosen base station per UAV, `None` when left unassigned.
    pub choice: Vec<Option<usize>>,
    pub objective: f64,
    pub visited: u64,
}

/// Exhaustive search over maps UAV → base station or none.
///
/// Maps are visited in lexicographic order (UAV 0 most significant, base
/// stations ascending, "none" last) and only a strictly better objective
/// replaces the incumbent, so ties go to the lexicographically smallest map.
/// The all-unassigned map is the fallback when nothing else passes.
/// When `objective_bound` is given the search stops at the first feasible map
/// reaching it.
pub fn enumerate_binary_assignments<P, O>(
    num_bs: usize,
    num_uav: usize,
    mut predicate: P,
    mut objective: O,
    objective_bound: Option<f64>,
) -> Result<BinarySearchResult, NumericsError>
where
    P: FnMut(&[Option<usize>]) -> bool,
    O: FnMut(&[Option<usize>]) -> f64,
{
    let size = (num_bs as u128 + 1)
        .checked_pow(num_uav as u32)
        .unwrap_or(u128::MAX);
    if size > MAX_SEARCH_SPACE {
        return Err(NumericsError::SearchSpaceTooLarge {
            size,
            cap: MAX_SEARCH_SPACE,
        });
    }
    let mut best: Option<BinarySearchResult> = None;
    let mut visited = 0u64;
    let mut digits = vec![0usize; num_uav];
    let mut choice: Vec<Option<usize>> = vec![None; num_uav];
    for _ in 0..size {
        for (c, &d) in choice.iter_mut().zip(&digits) {
            *c = (d < num_bs).then_some(d);
        }
        visited += 1;
        if predicate(&choice) {
            let value = objective(&choice);
            if best.as_ref().map_or(true, |b| value > b.objective) {
                best = Some(BinarySearchResult {
                    choice: choice.clone(),
                    objective: value,
                    visited,
                });
            }
            if objective_bound.is_some_and(|b| value >= b) {
                break;
            }
        }
        // Advance the odometer, least significant digit last.
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d <= num_bs {
                break;
            }
            *d = 0;
        }
    }
    let mut best = best.unwrap_or_else(|| {
        let none = vec![None; num_uav];
        BinarySearchResult {
            objective: objective(&none),
            choice: none,
            visited,
        }
    });
    best.visited = visited;
    Ok(best)
}
