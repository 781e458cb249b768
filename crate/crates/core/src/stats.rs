//! Friedman rank aggregation and the Nemenyi post-hoc critical distance over
//! a treatments × blocks result grid.

use std::io::BufRead;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("grid needs at least 2 treatments and 2 blocks, got {treatments}x{blocks}")]
    TooSmall { treatments: usize, blocks: usize },
    #[error("grid has a missing or unparsable cell at block {block}, column {column}")]
    BadCell { block: usize, column: usize },
    #[error("nemenyi q-table covers k in [2, 10], got {0}")]
    UnsupportedK(usize),
    #[error("csv error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// F1 scores for k treatments over N blocks (no missing cells).
#[derive(Debug, Clone)]
pub struct ResultGrid {
    pub treatments: Vec<String>,
    /// N rows of k scores.
    pub scores: Vec<Vec<f64>>,
}

impl ResultGrid {
    pub fn new(treatments: Vec<String>, scores: Vec<Vec<f64>>) -> Result<ResultGrid, StatsError> {
        let k = treatments.len();
        let n = scores.len();
        if k < 2 || n < 2 {
            return Err(StatsError::TooSmall { treatments: k, blocks: n });
        }
        for (b, row) in scores.iter().enumerate() {
            if row.len() != k {
                return Err(StatsError::BadCell { block: b, column: row.len().min(k) });
            }
        }
        Ok(ResultGrid { treatments, scores })
    }

    pub fn k(&self) -> usize {
        self.treatments.len()
    }

    pub fn blocks(&self) -> usize {
        self.scores.len()
    }

    /// Swap treatments and blocks; block labels become `block1..blockN`.
    pub fn transpose(&self) -> Result<ResultGrid, StatsError> {
        let n = self.blocks();
        let k = self.k();
        let treatments = (1..=n).map(|i| format!("block{i}")).collect();
        let scores = (0..k)
            .map(|j| (0..n).map(|b| self.scores[b][j]).collect())
            .collect();
        ResultGrid::new(treatments, scores)
    }
}

/// Mean ranks (rank 1 = best F1) plus the Friedman chi-square statistic.
#[derive(Debug, Clone, Serialize)]
pub struct FriedmanResult {
    pub mean_ranks: Vec<f64>,
    pub statistic: f64,
}

/// Ranks within one block, descending by score, average ranks on ties.
fn block_ranks(row: &[f64]) -> Vec<f64> {
    let k = row.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).expect("finite scores"));
    let mut ranks = vec![0.0; k];
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        // positions i..=j tie: average of ranks i+1 ..= j+1
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Within each block, rank treatments descending by score (rank 1 = best,
/// ties averaged), then report mean ranks and the Friedman statistic
/// χ²_F = 12N/(k(k+1)) · (Σ R̄ⱼ² − k(k+1)²/4).
///
/// An all-equal grid is degenerate, not an error: every mean rank is
/// (k+1)/2 and the statistic is 0.
pub fn friedman_ranks(grid: &ResultGrid) -> FriedmanResult {
    let k = grid.k();
    let n = grid.blocks();
    let mut mean_ranks = vec![0.0; k];
    for row in &grid.scores {
        for (j, r) in block_ranks(row).into_iter().enumerate() {
            mean_ranks[j] += r;
        }
    }
    for r in &mut mean_ranks {
        *r /= n as f64;
    }
    let sum_sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let kf = k as f64;
    let statistic =
        12.0 * n as f64 / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0) * (kf + 1.0) / 4.0);
    FriedmanResult { mean_ranks, statistic: statistic.max(0.0) }
}

/// Studentized-range derived q constants at the 5% level, k = 2..=10.
const Q_05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];

/// Nemenyi critical distance at alpha = 0.05:
/// CD = q(k) · sqrt(k(k+1) / (6N)).
pub fn nemenyi_cd(k: usize, n: usize) -> Result<f64, StatsError> {
    if !(2..=10).contains(&k) {
        return Err(StatsError::UnsupportedK(k));
    }
    let q = Q_05[k - 2];
    let kf = k as f64;
    Ok(q * (kf * (kf + 1.0) / (6.0 * n as f64)).sqrt())
}

/// Pairs (i, j) with i < j whose mean ranks are not significantly different:
/// rank gap strictly below the critical distance. A zero gap is never
/// significant, whatever the CD.
pub fn significance_groups(mean_ranks: &[f64], cd: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..mean_ranks.len() {
        for j in i + 1..mean_ranks.len() {
            let gap = (mean_ranks[i] - mean_ranks[j]).abs();
            if gap < cd || gap == 0.0 {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Read a grid from CSV: header row of treatment names, one row per block.
/// An optional leading label column (non-numeric first header cell pairs
/// with non-numeric first data cells) is skipped.
pub fn grid_from_csv<R: BufRead>(reader: R) -> Result<ResultGrid, StatsError> {
    let mut lines: Vec<Vec<String>> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        if !lines.is_empty() && cells.len() != lines[0].len() {
            return Err(StatsError::Csv {
                line: i + 1,
                msg: format!("expected {} cells, found {}", lines[0].len(), cells.len()),
            });
        }
        lines.push(cells);
    }
    if lines.len() < 2 {
        return Err(StatsError::TooSmall { treatments: 0, blocks: lines.len().saturating_sub(1) });
    }
    let has_label_column = lines[1]
        .first()
        .map(|c| c.parse::<f64>().is_err())
        .unwrap_or(false);
    let skip = usize::from(has_label_column);
    let treatments: Vec<String> = lines[0][skip..].to_vec();
    let mut scores = Vec::new();
    for (b, row) in lines[1..].iter().enumerate() {
        let mut vals = Vec::with_capacity(treatments.len());
        for (c, cell) in row[skip..].iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| StatsError::BadCell { block: b, column: c })?;
            vals.push(v);
        }
        scores.push(vals);
    }
    ResultGrid::new(treatments, scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn all_equal_grid_is_degenerate_not_failed() {
        let grid = ResultGrid::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0]],
        )
        .unwrap();
        let res = friedman_ranks(&grid);
        assert_eq!(res.mean_ranks, vec![2.0, 2.0, 2.0]); // (k+1)/2
        assert_relative_eq!(res.statistic, 0.0);
    }

    #[test]
    fn dominant_treatment_ranks_first() {
        let grid = ResultGrid::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.9, 0.5], vec![0.8, 0.6], vec![0.7, 0.2]],
        )
        .unwrap();
        let res = friedman_ranks(&grid);
        assert_eq!(res.mean_ranks, vec![1.0, 2.0]);
    }

    #[test]
    fn three_by_three_matches_hand_ranking() {
        // hand-ranked blocks:
        //   (5, 9, 7)  -> ranks (3, 1, 2)
        //   (6, 6, 1)  -> ranks (1.5, 1.5, 3)
        //   (2, 8, 4)  -> ranks (3, 1, 2)
        let grid = ResultGrid::new(
            vec!["x".into(), "y".into(), "z".into()],
            vec![vec![5.0, 9.0, 7.0], vec![6.0, 6.0, 1.0], vec![2.0, 8.0, 4.0]],
        )
        .unwrap();
        let res = friedman_ranks(&grid);
        let expect = [(3.0 + 1.5 + 3.0) / 3.0, (1.0 + 1.5 + 1.0) / 3.0, (2.0 + 3.0 + 2.0) / 3.0];
        for (got, want) in res.mean_ranks.iter().zip(expect) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn per_block_ranks_sum_to_arithmetic_series() {
        for row in [
            vec![3.0, 1.0, 2.0, 5.0, 4.0],
            vec![1.0, 1.0, 1.0, 1.0, 1.0],
            vec![2.0, 2.0, 5.0, 5.0, 1.0],
        ] {
            let k = row.len() as f64;
            let sum: f64 = block_ranks(&row).iter().sum();
            assert_relative_eq!(sum, k * (k + 1.0) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ranks_invariant_under_monotone_transforms() {
        let rows = vec![vec![0.62, 0.81, 0.70], vec![0.55, 0.60, 0.57]];
        let grid = ResultGrid::new(vec!["a".into(), "b".into(), "c".into()], rows.clone()).unwrap();
        let transformed = ResultGrid::new(
            grid.treatments.clone(),
            rows.iter()
                .map(|r| r.iter().map(|v| (v * 10.0).exp()).collect())
                .collect(),
        )
        .unwrap();
        assert_eq!(friedman_ranks(&grid).mean_ranks, friedman_ranks(&transformed).mean_ranks);
    }

    #[test]
    fn nemenyi_constants() {
        // k=2: q = 1.960, CD = 1.960 / sqrt(N)
        let cd = nemenyi_cd(2, 9).unwrap();
        assert_relative_eq!(cd, 1.960 * (6.0_f64 / (6.0 * 9.0)).sqrt(), epsilon = 1e-12);
        // k=8, N=5: 3.031 * sqrt(72/30)
        assert_relative_eq!(nemenyi_cd(8, 5).unwrap(), 4.695, epsilon = 1e-3);
        // CD shrinks toward zero as blocks accumulate
        assert!(nemenyi_cd(8, 100_000_000).unwrap() < 0.01);
        assert!(nemenyi_cd(8, 500).unwrap() < nemenyi_cd(8, 5).unwrap());
        assert!(nemenyi_cd(1, 5).is_err());
        assert!(nemenyi_cd(11, 5).is_err());
    }

    #[test]
    fn significance_pairs() {
        let ranks = [1.0, 1.5, 3.5, 3.5];
        // huge CD: every pair flagged
        assert_eq!(significance_groups(&ranks, 10.0).len(), 6);
        // CD 0: only the exact tie
        assert_eq!(significance_groups(&ranks, 0.0), vec![(2, 3)]);
        // symmetric by construction (i < j), gap 0.5 < 1.0, gap 2.0 not
        assert_eq!(significance_groups(&ranks, 1.0), vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn csv_parsing_with_and_without_label_column() {
        let plain = "m1,m2,m3\n1,2,3\n4,5,6\n";
        let grid = grid_from_csv(plain.as_bytes()).unwrap();
        assert_eq!(grid.k(), 3);
        assert_eq!(grid.blocks(), 2);

        let labeled = "embedding,m1,m2\nglove,1.0,2.0\nfasttext,3.0,4.0\n";
        let grid = grid_from_csv(labeled.as_bytes()).unwrap();
        assert_eq!(grid.treatments, vec!["m1", "m2"]);
        assert_eq!(grid.scores, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);

        assert!(grid_from_csv("m1,m2\n1,x\n".as_bytes()).is_err());
        assert!(grid_from_csv("m1,m2\n".as_bytes()).is_err());
    }

    #[test]
    fn transpose_swaps_axes() {
        let grid = grid_from_csv("m1,m2,m3\n1,2,3\n4,5,6\n".as_bytes()).unwrap();
        let t = grid.transpose().unwrap();
        assert_eq!(t.k(), 2);
        assert_eq!(t.blocks(), 3);
        assert_eq!(t.scores, vec![vec![1.0, 4.0], vec![2.0, 5.0], vec![3.0, 6.0]]);
    }
}
