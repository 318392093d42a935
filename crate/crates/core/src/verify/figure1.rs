//! The worked example: a five-generation tree with twelve survivors.

use super::{CheckReport, Status};
use crate::genealogy::{
    b_sequence, btilde_from_pairs, coalescent_times, extract_btilde, BTildeState,
};
use crate::tree::Tree;

pub const HORIZON: usize = 5;

/// `B_1, ..., B_11`.
pub const B_ROWS: [&[u32]; 11] = [
    &[1],
    &[0, 2],
    &[1, 1],
    &[0, 1],
    &[2, 0],
    &[1, 0],
    &[0, 0, 0, 1],
    &[0, 0, 1, 0],
    &[0, 0, 0, 0, 1],
    &[1, 0, 0, 1, 0],
    &[0, 0, 0, 1, 0],
];

pub const A_ROW: [u32; 11] = [1, 2, 1, 2, 1, 1, 4, 3, 5, 1, 4];

pub const L_ROW: [usize; 11] = [1, 2, 2, 2, 2, 2, 4, 4, 5, 5, 5];

/// `B~_1, ..., B~_11` as `(position, multiplicity)` atoms.
pub const BTILDE_ROWS: [&[(u32, u32)]; 11] = [
    &[(1, 1)],
    &[(2, 2)],
    &[(1, 1), (2, 1)],
    &[(2, 1)],
    &[(1, 2)],
    &[(1, 1)],
    &[(4, 1)],
    &[(3, 1)],
    &[(5, 1)],
    &[(1, 1)],
    &[(4, 1)],
];

/// Outcome of the example reproduction; `mismatch` names the first failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Figure1Outcome {
    pub a: Vec<u32>,
    pub l: Vec<usize>,
    pub btilde: Vec<BTildeState>,
    pub mismatch: Option<String>,
}

fn first_diff<T: PartialEq>(got: &[T], want: &[T]) -> Option<usize> {
    (0..got.len().max(want.len())).find(|&i| got.get(i) != want.get(i))
}

/// `D_1` implied by a sequence of coalescence times: at depth `n`, one
/// surviving daughter for each time equal to `n` not preceded by a larger one.
pub fn first_d_row(times: &[u32], horizon: usize) -> Vec<u32> {
    let mut d = vec![0u32; horizon];
    let mut running = 0;
    for &a in times {
        if a >= running {
            d[a as usize - 1] += 1;
        }
        running = running.max(a);
    }
    d
}

/// Full rows `D_1, ..., D_K` completing the `B` table: entries beyond `l_i`
/// have not been touched since `D_1`, and `D_K` is null.
pub fn completed_d_rows() -> Vec<Vec<u32>> {
    let d1 = first_d_row(&A_ROW, HORIZON);
    let mut rows: Vec<Vec<u32>> = B_ROWS
        .iter()
        .map(|b| {
            let mut row = b.to_vec();
            row.extend_from_slice(&d1[b.len()..]);
            row
        })
        .collect();
    rows.push(vec![0; HORIZON]);
    rows
}

/// Derives `A` (first non-zero entry), `l` (row length) and `B~` from the
/// embedded `B` table and compares them with the embedded rows; then
/// rebuilds the tree and reads the same quantities back off it.
pub fn figure1_consistency() -> Figure1Outcome {
    let a: Vec<u32> =
        B_ROWS.iter().map(|b| b.iter().position(|&x| x != 0).map_or(0, |p| p as u32 + 1)).collect();
    let l: Vec<usize> = B_ROWS.iter().map(|b| b.len()).collect();
    let pairs: Vec<(u32, u32)> =
        a.iter().zip(B_ROWS).map(|(&a, b)| (a, b[a as usize - 1])).collect();
    let btilde = btilde_from_pairs(&pairs);
    let expected: Vec<BTildeState> =
        BTILDE_ROWS.iter().map(|atoms| BTildeState::from_atoms(atoms.to_vec())).collect();
    let running: Vec<usize> = A_ROW
        .iter()
        .scan(0, |m, &x| {
            *m = (*m).max(x as usize);
            Some(*m)
        })
        .collect();

    let mismatch = if let Some(i) = first_diff(&a, &A_ROW) {
        Some(format!("A differs at index {}", i + 1))
    } else if let Some(i) = first_diff(&l, &L_ROW).or_else(|| first_diff(&running, &L_ROW)) {
        Some(format!("l differs at index {}", i + 1))
    } else if let Some(i) = first_diff(&btilde, &expected) {
        Some(format!("B~ differs at index {}", i + 1))
    } else {
        tree_roundtrip(&expected).err()
    };
    Figure1Outcome { a, l, btilde, mismatch }
}

fn tree_roundtrip(expected_btilde: &[BTildeState]) -> Result<(), String> {
    let tree = Tree::from_d_rows(HORIZON, &completed_d_rows()).map_err(|e| format!("tree: {e}"))?;
    if tree.survivors() != 12 {
        return Err(format!("tree has {} survivors, expected 12", tree.survivors()));
    }
    let cpp = coalescent_times(&tree).map_err(|e| e.to_string())?;
    if let Some(i) = first_diff(cpp.times(), &A_ROW) {
        return Err(format!("tree A differs at index {}", i + 1));
    }
    let bs = b_sequence(&tree).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<u32>> = B_ROWS.iter().map(|b| b.to_vec()).collect();
    if let Some(i) = first_diff(&bs, &rows) {
        return Err(format!("tree B differs at index {}", i + 1));
    }
    let bt = extract_btilde(&tree).map_err(|e| e.to_string())?;
    if let Some(i) = first_diff(&bt, expected_btilde) {
        return Err(format!("tree B~ differs at index {}", i + 1));
    }
    Ok(())
}

pub fn figure1_report() -> CheckReport {
    let outcome = figure1_consistency();
    let status = if outcome.mismatch.is_none() { Status::Pass } else { Status::Fail };
    let shown: Vec<String> = outcome.btilde.iter().map(|b| b.to_string()).collect();
    CheckReport {
        check: "figure1_consistency".into(),
        env_digest: "embedded".into(),
        metric: if outcome.mismatch.is_none() { 0.0 } else { 1.0 },
        threshold: 0.0,
        status,
        detail: Some(outcome.mismatch.unwrap_or_else(|| format!("B~ = {}", shown.join(" ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_reproduces() {
        let out = figure1_consistency();
        assert_eq!(out.mismatch, None);
        assert_eq!(out.btilde[10].to_string(), "d4");
        assert_eq!(out.btilde[1].to_string(), "2d2");
        assert!(figure1_report().passed());
    }

    #[test]
    fn first_row() {
        assert_eq!(first_d_row(&A_ROW, 5), vec![1, 2, 0, 1, 1]);
        assert_eq!(first_d_row(&[1, 2, 1], 2), vec![1, 1]);
        assert_eq!(completed_d_rows()[0], vec![1, 2, 0, 1, 1]);
        assert_eq!(completed_d_rows()[6], vec![0, 0, 0, 1, 1]);
    }
}
