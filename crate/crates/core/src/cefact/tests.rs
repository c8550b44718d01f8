use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::blocksparse::{BlockPartition, BlockSparseMatrix, BlockSparsityPattern, Symmetry, Triplet};
use crate::dense::DenseBlock;
use crate::error::CeError;
use crate::problems::{assemble_diffusion_3d, geometric_block_ordering, CoarseningPlan, Grid3D};

fn to_na(a: &BlockSparseMatrix<f64>) -> DMatrix<f64> {
    let n = a.dim();
    DMatrix::from_row_slice(n, n, &a.to_dense())
}

/// Sparse symmetric matrix, made SPD by Gershgorin diagonal shift.
fn random_spd(n: usize, density: f64, rng: &mut ChaCha8Rng) -> Vec<Triplet<f64>> {
    let mut entries = Vec::new();
    let mut rowsum = vec![0.0; n];
    for i in 0..n {
        for j in 0..i {
            if rng.gen::<f64>() < density {
                let v: f64 = rng.gen_range(-1.0..1.0);
                entries.push((i, j, v));
                entries.push((j, i, v));
                rowsum[i] += v.abs();
                rowsum[j] += v.abs();
            }
        }
    }
    for (i, s) in rowsum.into_iter().enumerate() {
        entries.push((i, i, s + rng.gen_range(0.1..1.0)));
    }
    entries
}

fn random_partition(n: usize, max_block: usize, rng: &mut ChaCha8Rng) -> BlockPartition {
    let mut sizes = Vec::new();
    let mut left = n;
    while left > 0 {
        let s = rng.gen_range(1..=max_block.min(left));
        sizes.push(s);
        left -= s;
    }
    BlockPartition::from_sizes(&sizes).unwrap()
}

fn diffusion(n: usize, block: usize) -> (BlockSparseMatrix<f64>, CoarseningPlan, Vec<f64>) {
    let g = Grid3D::cube(n).unwrap();
    let p = assemble_diffusion_3d::<f64>(&g);
    let plan = geometric_block_ordering(&g, block, 2).unwrap();
    let a = BlockSparseMatrix::from_triplets(&plan.permute_triplets(&p.entries), plan.partition.clone(), Symmetry::Full)
        .unwrap();
    let rhs = plan.permute_vector(&p.rhs);
    (a, plan, rhs)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

// ---- compress_row ----

/// Star pattern: block 4 touches 0..4, so row 0 sees 1, 2, 3 as far blocks.
fn star_level(far_blocks: &[DenseBlock<f64>]) -> LevelMatrix<f64> {
    let close = BlockSparsityPattern::from_edges(5, [(0, 4), (1, 4), (2, 4), (3, 4)]).unwrap();
    let part = BlockPartition::uniform(40, 8).unwrap();
    let mut work = BlockSparseMatrix::zeros(part, close.square());
    for i in 0..5 {
        *work.block_mut(i, i).unwrap() = DenseBlock::from_fn(8, 8, |a, b| if a == b { 10.0 } else { 0.0 });
    }
    for (k, f) in far_blocks.iter().enumerate() {
        *work.block_mut(0, k + 1).unwrap() = f.clone();
        *work.block_mut(k + 1, 0).unwrap() = f.transpose();
    }
    LevelMatrix::from_working(work, close, 1)
}

#[test]
fn compress_row_without_far_blocks_is_identity() {
    let a = BlockSparseMatrix::from_triplets(
        &[(0, 0, 2.0), (1, 1, 2.0), (1, 0, -1.0)],
        BlockPartition::uniform(2, 1).unwrap(),
        Symmetry::Mirror,
    )
    .unwrap();
    let mut lm = LevelMatrix::new(&a, 1);
    let (u, r) = lm.compress_row(0, &CompressionStrategy::eps(1e-8)).unwrap();
    assert_eq!(r, 0);
    assert_eq!(u, DenseBlock::identity(1));
}

#[test]
fn compress_row_finds_exact_rank_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = DenseBlock::from_fn(8, 2, |_, _| rng.gen_range(-1.0..1.0));
    let hs: Vec<DenseBlock<f64>> =
        (0..3).map(|_| DenseBlock::from_fn(2, 8, |_, _| rng.gen_range(-1.0..1.0))).collect();
    let blocks: Vec<DenseBlock<f64>> = hs.iter().map(|h| g.matmul(h)).collect();
    let mut lm = star_level(&blocks);
    let f = lm.far_row_matrix(0);
    assert_eq!((f.rows(), f.cols()), (8, 24));
    let sigma = DMatrix::from_row_slice(8, 24, f.as_slice()).singular_values();
    let pattern_before = lm.matrix().pattern().clone();

    let (u, r) = lm.compress_row(0, &CompressionStrategy::eps(1e-8)).unwrap();
    assert_eq!(r, 2);
    assert!(u.orthogonality_defect() <= 1e-12);
    assert_eq!(lm.matrix().pattern(), &pattern_before);
    // discarded part E = rows 2.. of Ũᵀ F
    let rotated = u.matmul_tn(&f);
    let e = rotated.submatrix(2, 8, 0, 24).frobenius_norm();
    let s1 = sigma.max();
    assert!(e <= 1e-8 * s1, "‖E‖ = {e:e}");
    for j in 1..4 {
        let blk = lm.matrix().block(0, j).unwrap();
        assert!((2..8).all(|row| blk.row(row).iter().all(|&v| v == 0.0)));
        let mirror = lm.matrix().block(j, 0).unwrap();
        assert_eq!(mirror, &blk.transpose());
    }
}

#[test]
fn compress_row_fixed_rank_ignores_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let blocks: Vec<DenseBlock<f64>> =
        (0..3).map(|_| DenseBlock::from_fn(8, 8, |_, _| rng.gen_range(-1.0..1.0))).collect();
    let mut lm = star_level(&blocks);
    let (_, r) = lm.compress_row(0, &CompressionStrategy::rank(4)).unwrap();
    assert_eq!(r, 4);
}

#[test]
fn compression_preserves_quadratic_form_on_kept_part() {
    // Two-sided rotation before truncation is a similarity on the block row.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let blocks: Vec<DenseBlock<f64>> =
        (0..3).map(|_| DenseBlock::from_fn(8, 8, |_, _| rng.gen_range(-1.0..1.0))).collect();
    let mut lm = star_level(&blocks);
    let d_before = lm.matrix().block(0, 0).unwrap().clone();
    let (u, _) = lm.compress_row(0, &CompressionStrategy::rank(8)).unwrap();
    let d_after = lm.matrix().block(0, 0).unwrap();
    let expect = u.matmul_tn(&d_before.matmul(&u));
    for (a, b) in d_after.as_slice().iter().zip(expect.as_slice()) {
        assert!((a - b).abs() < 1e-13);
    }
}

// ---- eliminate_subrow ----

#[test]
fn eliminate_identity_block() {
    let a = BlockSparseMatrix::from_dense(
        &DenseBlock::<f64>::identity(4).as_slice().to_vec(),
        BlockPartition::uniform(4, 4).unwrap(),
    )
    .unwrap();
    let mut lm = LevelMatrix::new(&a, 1);
    let sub = lm.eliminate_subrow(0, 0).unwrap();
    assert_eq!(sub.diag, DenseBlock::identity(4));
    assert_eq!(sub.targets.len(), 1);
    assert!(lm.matrix().block(0, 0).unwrap().as_slice().iter().all(|&v| v == 0.0));

    let f = ce_factorize(&a, &CoarseningPlan::sequential(4, 4, 2).unwrap(), &FactorOptions::new(CompressionStrategy::eps(1e-8)).dense_threshold(0))
        .unwrap();
    assert_eq!(f.num_levels(), 1);
    assert_eq!(f.tail().rows(), 0);
}

#[test]
fn two_block_elimination_matches_dense_cholesky() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let entries = random_spd(7, 0.7, &mut rng);
    let part = BlockPartition::from_sizes(&[4, 3]).unwrap();
    let a = BlockSparseMatrix::from_triplets(&entries, part, Symmetry::Full).unwrap();
    let mut lm = LevelMatrix::new(&a, 1);
    assert!(lm.far().row(0).is_empty() && lm.far().row(1).is_empty());
    let s0 = lm.eliminate_subrow(0, 0).unwrap();
    let s1 = lm.eliminate_subrow(1, 0).unwrap();
    // assemble L = [[L̂0, 0], [L̃(1), L̂1]]
    let mut l = DMatrix::<f64>::zeros(7, 7);
    for (dest, blk) in &s0.targets {
        let r0 = if *dest == 0 { 0 } else { 4 };
        for i in 0..blk.rows() {
            for j in 0..blk.cols() {
                l[(r0 + i, j)] = blk[(i, j)];
            }
        }
    }
    for (dest, blk) in &s1.targets {
        if *dest == 1 {
            for i in 0..3 {
                for j in 0..3 {
                    l[(4 + i, 4 + j)] = blk[(i, j)];
                }
            }
        }
    }
    let dense = to_na(&a);
    let rec = &l * l.transpose();
    assert!((&rec - &dense).norm() <= 1e-13 * dense.norm());
    let chol = dense.clone().cholesky().unwrap().l();
    for i in 0..7 {
        for j in 0..=i {
            assert!((chol[(i, j)].abs() - l[(i, j)].abs()).abs() < 1e-12);
        }
    }
    assert!(lm.matrix().max_abs() < 1e-13);
}

#[test]
fn breakdown_shift_then_error() {
    // Indefinite 2x2 diagonal part once the first row is eliminated.
    let entries = vec![(0, 0, 1.0), (1, 1, 1.0), (1, 0, 2.0)];
    let a = BlockSparseMatrix::from_triplets(&entries, BlockPartition::uniform(2, 1).unwrap(), Symmetry::Mirror)
        .unwrap();
    let plan = CoarseningPlan::sequential(2, 1, 2).unwrap();
    let err = ce_factorize(&a, &plan, &FactorOptions::new(CompressionStrategy::eps(1e-8)).dense_threshold(0))
        .unwrap_err();
    assert!(matches!(err, CeError::Breakdown { level: 1, block: 1 }), "{err:?}");
}

#[test]
fn negated_diagonal_is_rejected_before_level_one() {
    let (a, plan, _) = diffusion(4, 8);
    let mut t = a.lower_triplets();
    for e in t.iter_mut() {
        if e.0 == 13 && e.1 == 13 {
            e.2 = -e.2;
        }
    }
    let bad = BlockSparseMatrix::from_triplets(&t, a.partition().clone(), Symmetry::Mirror).unwrap();
    let err = ce_factorize(&bad, &plan, &FactorOptions::new(CompressionStrategy::rank(4)).dense_threshold(0))
        .unwrap_err();
    assert!(matches!(err, CeError::NotPositiveDefinite { block: 1 }), "{err:?}");
}

// ---- level sweep ----

#[test]
fn block_diagonal_sweep_eliminates_everything() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let part = BlockPartition::uniform(12, 4).unwrap();
    let mut entries = Vec::new();
    for b in 0..3 {
        for (i, j, v) in random_spd(4, 1.0, &mut rng) {
            entries.push((4 * b + i, 4 * b + j, v));
        }
    }
    let a = BlockSparseMatrix::from_triplets(&entries, part, Symmetry::Full).unwrap();
    let out = level::level_sweep(&a, 1, &CompressionStrategy::rank(2), &[0, 0, 1]).unwrap();
    assert!(out.ranks.iter().all(|&r| r == 0));
    assert_eq!(out.remainder.dim(), 0);
    assert_eq!(out.l.eliminated, 12);
    for col in &out.l.columns {
        let d = a.block(col.block, col.block).unwrap();
        let chol = crate::dense::dense_cholesky(d).unwrap();
        assert_eq!(col.diag, chol);
        assert_eq!(col.entries.len(), 0);
    }
}

#[test]
fn path_sweep_remainder_pattern() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 16;
    let mut entries = Vec::new();
    for i in 0..n {
        entries.push((i, i, 4.0));
        if i + 1 < n {
            let v = rng.gen_range(-1.0..-0.5);
            entries.push((i + 1, i, v));
        }
    }
    // 4 blocks of 4 joined by a tridiagonal coupling form a block path.
    let a = BlockSparseMatrix::from_triplets(&entries, BlockPartition::uniform(n, 4).unwrap(), Symmetry::Mirror)
        .unwrap();
    let path = a.pattern().clone();
    let assignment = [0, 0, 1, 1];
    let out = level::level_sweep(&a, 1, &CompressionStrategy::rank(2), &assignment).unwrap();
    assert_eq!(out.remainder.num_blocks(), 2);
    let bound = path.square().coarsen(&[vec![0, 1], vec![2, 3]]).unwrap();
    assert!(out.remainder.pattern().is_subset_of(&bound));
    // rows with far blocks keep exactly r
    assert_eq!(out.ranks, vec![2, 2, 2, 2]);
}

// ---- driver ----

#[test]
fn below_threshold_is_plain_dense_cholesky() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let entries = random_spd(30, 0.3, &mut rng);
    let part = BlockPartition::uniform(30, 4).unwrap();
    let a = BlockSparseMatrix::from_triplets(&entries, part, Symmetry::Full).unwrap();
    let plan = CoarseningPlan::sequential(30, 4, 2).unwrap();
    let f = ce_factorize(&a, &plan, &FactorOptions::new(CompressionStrategy::eps(1e-2))).unwrap();
    assert_eq!(f.num_levels(), 0);
    assert!(f.reconstruction_error(&a).unwrap() <= 1e-13);
    let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
    assert_eq!(f.apply_q(&x).unwrap(), x);
    assert_eq!(f.apply_q_transpose(&x).unwrap(), x);
}

#[test]
fn dense_fallback_solve_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let entries = random_spd(50, 0.2, &mut rng);
    let a = BlockSparseMatrix::from_triplets(&entries, BlockPartition::uniform(50, 5).unwrap(), Symmetry::Full)
        .unwrap();
    let plan = CoarseningPlan::sequential(50, 5, 2).unwrap();
    let f = ce_factorize(&a, &plan, &FactorOptions::new(CompressionStrategy::eps(1e-2))).unwrap();
    let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = f.solve(&b).unwrap();
    let r: Vec<f64> = a.matvec(&x).unwrap().iter().zip(&b).map(|(p, q)| p - q).collect();
    assert!(norm(&r) <= 1e-12 * norm(&b));
    let oracle = to_na(&a).cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b.clone()));
    let diff: f64 = x.iter().zip(oracle.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    assert!(diff <= 1e-12 * oracle.norm());
    assert!(f.solve(&vec![0.0; 50]).unwrap().iter().all(|&v| v == 0.0));
    assert!(matches!(f.solve(&[1.0]), Err(CeError::LengthMismatch { .. })));
}

#[test]
fn single_block_level_rotation_matches_dense() {
    // One level over a single block: Q x = P Ũᵀ x with Ũ = I (no far blocks).
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let entries = random_spd(6, 0.8, &mut rng);
    let a = BlockSparseMatrix::from_triplets(&entries, BlockPartition::uniform(6, 6).unwrap(), Symmetry::Full)
        .unwrap();
    let f = ce_factorize(&a, &CoarseningPlan::sequential(6, 6, 2).unwrap(), &FactorOptions::new(CompressionStrategy::eps(1e-8)).dense_threshold(0))
        .unwrap();
    assert_eq!(f.num_levels(), 1);
    let lvl = &f.levels()[0];
    let x: Vec<f64> = (0..6).map(|i| i as f64 + 1.0).collect();
    let mut expect = vec![0.0; 6];
    lvl.q.rotations[0].gemv_t_add(&x, &mut expect);
    let permuted: Vec<f64> = lvl.q.permutation.iter().map(|&o| expect[o]).collect();
    assert_eq!(f.apply_q(&x).unwrap(), permuted);
}

#[test]
fn rotation_level_matches_dense_oracle() {
    // Level with genuine rotations: check apply_q against an explicit dense Q.
    let (a, plan, _) = diffusion(4, 8);
    let f = ce_factorize(&a, &plan, &FactorOptions::new(CompressionStrategy::rank(4)).dense_threshold(0)).unwrap();
    let lvl = &f.levels()[0];
    let n = a.dim();
    let mut u = DMatrix::<f64>::zeros(n, n);
    for (i, rot) in lvl.q.rotations.iter().enumerate() {
        let s = lvl.q.partition.start(i);
        for r in 0..rot.rows() {
            for c in 0..rot.cols() {
                u[(s + r, s + c)] = rot[(r, c)];
            }
        }
    }
    let mut p = DMatrix::<f64>::zeros(n, n);
    for (new, &old) in lvl.q.permutation.iter().enumerate() {
        p[(new, old)] = 1.0;
    }
    let q1 = &p * u.transpose();
    let x: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
    let expect = &q1 * nalgebra::DVector::from_vec(x.clone());
    let mut got = x.clone();
    lvl.q.apply(&mut got, &mut Vec::new());
    for (g, e) in got.iter().zip(expect.iter()) {
        assert!((g - e).abs() < 1e-13);
    }
}

#[test]
fn diffusion_fixed_rank_accounting() {
    let (a, plan, _) = diffusion(8, 8);
    let f = ce_factorize(&a, &plan, &FactorOptions::new(CompressionStrategy::rank(4)).dense_threshold(64)).unwrap();
    let s = &f.stats;
    assert!(s.levels[0].eliminated_fraction() >= 0.45, "{}", s.levels[0].eliminated_fraction());
    assert_eq!(s.levels[0].l_blocks, 2 * a.pattern().count_lower());
    assert!(s.l_blocks() <= s.predicted_l_blocks());
    for (l, e) in s.levels.iter().zip(&s.prediction.edges) {
        assert_eq!(l.edges, *e);
    }
    assert!(s.max_orthogonality_defect() <= 1e-12);
    let eliminated: usize = s.levels.iter().map(|l| l.eliminated).sum();
    assert_eq!(eliminated + s.tail_dim, a.dim());
}

#[test]
fn diffusion_tight_eps_reconstructs() {
    let (a, plan, rhs) = diffusion(8, 8);
    let f = ce_factorize(&a, &plan, &FactorOptions::new(CompressionStrategy::eps(1e-12)).dense_threshold(64)).unwrap();
    assert!(f.num_levels() >= 1);
    let err = f.reconstruction_error(&a).unwrap();
    assert!(err <= 1e-9, "reconstruction error {err:e}");
    let x = f.solve(&rhs).unwrap();
    let r: Vec<f64> = a.matvec(&x).unwrap().iter().zip(&rhs).map(|(p, q)| p - q).collect();
    assert!(norm(&r) <= 1e-8 * norm(&rhs));
}

#[test]
fn looser_eps_is_less_accurate() {
    let (a, plan, _) = diffusion(8, 8);
    let err = |eps: f64| {
        let f = ce_factorize(&a, &plan, &FactorOptions::new(CompressionStrategy::eps(eps)).dense_threshold(64)).unwrap();
        f.reconstruction_error(&a).unwrap()
    };
    let (coarse, fine) = (err(1e-2), err(1e-6));
    assert!(coarse / fine >= 1e2, "{coarse:e} vs {fine:e}");
}

#[test]
fn reconstruction_is_symmetric_and_psd() {
    let (a, plan, _) = diffusion(6, 8);
    let f = ce_factorize(&a, &plan, &FactorOptions::new(CompressionStrategy::rank(4)).dense_threshold(16)).unwrap();
    let n = a.dim();
    let rec = DMatrix::from_row_slice(n, n, &f.reconstruct_dense().unwrap());
    assert!((&rec - rec.transpose()).amax() <= 1e-12 * rec.amax());
    let eig = rec.symmetric_eigen().eigenvalues;
    let anorm = to_na(&a).norm();
    assert!(eig.min() >= -1e-10 * anorm);
}

#[test]
fn reconstruct_guard() {
    let (a, plan, _) = diffusion(17, 8);
    let f = ce_factorize(&a, &plan, &FactorOptions::new(CompressionStrategy::rank(4)).dense_threshold(2048)).unwrap();
    assert!(matches!(f.reconstruct_dense(), Err(CeError::TooLarge { .. })));
}

#[test]
fn plan_partition_must_match() {
    let (a, _, _) = diffusion(4, 8);
    let plan = CoarseningPlan::sequential(64, 4, 2).unwrap();
    assert!(matches!(
        ce_factorize(&a, &plan, &FactorOptions::new(CompressionStrategy::rank(2))),
        Err(CeError::InvalidPlan(_))
    ));
}

#[test]
fn f32_smoke() {
    let g = Grid3D::cube(4).unwrap();
    let p = assemble_diffusion_3d::<f32>(&g);
    let plan = geometric_block_ordering(&g, 8, 2).unwrap();
    let a = BlockSparseMatrix::from_triplets(&plan.permute_triplets(&p.entries), plan.partition.clone(), Symmetry::Full)
        .unwrap();
    let f = ce_factorize(&a, &plan, &FactorOptions::new(CompressionStrategy::eps(1e-5)).dense_threshold(8)).unwrap();
    let rhs = plan.permute_vector(&p.rhs);
    let x = f.solve(&rhs).unwrap();
    let r: Vec<f32> = a.matvec(&x).unwrap().iter().zip(&rhs).map(|(p, q)| p - q).collect();
    let rel = crate::scalar::norm2(&r) / crate::scalar::norm2(&rhs);
    assert!(rel < 1e-3, "{rel}");
}

// ---- predicted_nnz ----

#[test]
fn predicted_examples() {
    let one = predicted_nnz(&BlockSparsityPattern::identity(1), &[], 3).unwrap();
    assert_eq!(one.total, 0.5 * 9.0);

    let id = predicted_nnz(&BlockSparsityPattern::identity(4), &[vec![0, 0, 1, 1]], 4).unwrap();
    assert_eq!(id.level_blocks, vec![8]);
    assert_eq!(id.total, 8.0 + 0.5 * 4.0 * 16.0);

    let path = BlockSparsityPattern::from_edges(8, (0..7).map(|i| (i, i + 1))).unwrap();
    let pr = predicted_nnz(&path, &[vec![0, 0, 1, 1, 2, 2, 3, 3], vec![0, 0, 1, 1]], 2).unwrap();
    // path(8): 8 + 7 lower blocks; band-2 coarsened by pairs is path(4): 4 + 3
    assert_eq!(pr.level_blocks, vec![30, 14]);
    assert_eq!(pr.tail_blocks, 2);
    assert_eq!(pr.total, 30.0 + 14.0 + 0.5 * 4.0 * 4.0);
}

#[test]
fn stats_csv_round_trip() {
    let (a, plan, _) = diffusion(6, 8);
    let f = ce_factorize(&a, &plan, &FactorOptions::new(CompressionStrategy::eps(1e-3)).dense_threshold(16)).unwrap();
    let csv = f.stats.to_csv();
    assert!(csv.starts_with(STATS_HEADER));
    let rows = parse_stats_csv(&csv).unwrap();
    assert_eq!(rows, f.stats.rows());
    assert_eq!(write_stats_csv(&rows), csv);
}

// ---- randomized properties ----

fn random_case(seed: u64, max_n: usize) -> (BlockSparseMatrix<f64>, CoarseningPlan) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_n);
    let density = rng.gen_range(0.02..0.3);
    let entries = random_spd(n, density, &mut rng);
    let part = random_partition(n, 6, &mut rng);
    let m = part.num_blocks();
    let mut levels = Vec::new();
    let mut blocks = m;
    while blocks > 1 {
        levels.push(plan::consecutive(blocks, 2));
        blocks = blocks.div_ceil(2);
    }
    let plan = CoarseningPlan::new((0..n).collect(), part.clone(), levels, 2).unwrap();
    (BlockSparseMatrix::from_triplets(&entries, part, Symmetry::Full).unwrap(), plan)
}

mod plan {
    pub fn consecutive(m: usize, j: usize) -> Vec<usize> {
        (0..m).map(|b| b / j).collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tight_eps_reconstructs_random_spd(seed in any::<u64>()) {
        let (a, plan) = random_case(seed, 60);
        let f = ce_factorize(&a, &plan, &FactorOptions::new(CompressionStrategy::eps(1e-14)).dense_threshold(0)).unwrap();
        prop_assert!(f.reconstruction_error(&a).unwrap() <= 1e-9);
        prop_assert!(f.stats.max_orthogonality_defect() <= 1e-12);
    }

    #[test]
    fn q_round_trip_and_solve_consistency(seed in any::<u64>(), rank in 1usize..4) {
        let (a, plan) = random_case(seed, 60);
        let f = ce_factorize(&a, &plan, &FactorOptions::new(CompressionStrategy::rank(rank)).dense_threshold(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let x: Vec<f64> = (0..a.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let back = f.apply_q_transpose(&f.apply_q(&x).unwrap()).unwrap();
        let d: Vec<f64> = back.iter().zip(&x).map(|(p, q)| p - q).collect();
        prop_assert!(norm(&d) <= 1e-13 * norm(&x));

        let y = f.solve(&x).unwrap();
        let ay = f.apply_operator(&y).unwrap();
        let d: Vec<f64> = ay.iter().zip(&x).map(|(p, q)| p - q).collect();
        prop_assert!(norm(&d) <= 1e-10 * norm(&x));

        let quad: f64 = f.apply_operator(&x).unwrap().iter().zip(&x).map(|(p, q)| p * q).sum();
        prop_assert!(quad > 0.0);

        let s = &f.stats;
        prop_assert!(s.l_blocks() <= s.predicted_l_blocks());
        let eliminated: usize = s.levels.iter().map(|l| l.eliminated).sum();
        prop_assert_eq!(eliminated + s.tail_dim, a.dim());
    }
}
