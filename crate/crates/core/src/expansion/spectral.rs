use super::{Certificate, CutEvaluation};
use crate::cube::VertexSet;
use crate::error::{LabError, Result};
use crate::graph::Graph;

pub const MAX_SPECTRAL_VERTICES: usize = 4096;
/// Required `||Lx - lambda x|| / ||x||` for every returned eigenpair.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Slack callers allow when comparing the spectral bound with exact values.
pub const SPECTRAL_SLACK: f64 = 1e-8;

const MAX_SWEEPS: usize = 100;
/// Vertices whose incident edges seed extra sweep directions in a
/// degenerate eigenspace.
const DIRECTION_SEEDS: usize = 4;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[j]` is the unit eigenvector for `values[j]`.
    pub vectors: Vec<Vec<f64>>,
    /// Largest relative residual over all pairs.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralCertificate {
    pub lambda2: f64,
    pub lower_bound: f64,
    pub residual: f64,
}

/// Full eigendecomposition of the symmetric `n x n` row-major matrix by
/// cyclic Jacobi rotations.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> Result<Eigen> {
    if matrix.len() != n * n {
        return Err(LabError::param(format!(
            "matrix has {} entries, expected {}",
            matrix.len(),
            n * n
        )));
    }
    for i in 0..n {
        for j in 0..i {
            if matrix[i * n + j] != matrix[j * n + i] {
                return Err(LabError::param("matrix is not symmetric"));
            }
        }
    }
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);

    let mut previous = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        // stop once rotations no longer reduce the off-diagonal mass
        if off <= f64::EPSILON * scale * 1e-3 || off >= previous {
            break;
        }
        previous = off;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| {
            let x: Vec<f64> = (0..n).map(|k| v[k * n + col]).collect();
            let norm = x.iter().map(|y| y * y).sum::<f64>().sqrt();
            x.into_iter().map(|y| y / norm).collect()
        })
        .collect();
    let residual = values
        .iter()
        .zip(&vectors)
        .map(|(&lambda, x)| {
            (0..n)
                .map(|i| {
                    let lx: f64 = (0..n).map(|j| matrix[i * n + j] * x[j]).sum();
                    (lx - lambda * x[i]).powi(2)
                })
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    if residual > RESIDUAL_TOLERANCE * scale.max(1.0) {
        return Err(LabError::Invariant(format!(
            "eigensolve residual {residual:e} above tolerance"
        )));
    }
    Ok(Eigen {
        values,
        vectors,
        residual,
    })
}

fn laplacian_eigen(g: &Graph) -> Result<Eigen> {
    let n = g.vertex_count();
    if n > MAX_SPECTRAL_VERTICES {
        return Err(LabError::guard(format!(
            "spectral routines limited to {MAX_SPECTRAL_VERTICES} vertices, graph has {n}"
        )));
    }
    if n < 2 {
        return Err(LabError::param("edge-expansion needs at least two vertices"));
    }
    let mut l = vec![0.0; n * n];
    for v in 0..n {
        l[v * n + v] = g.degree(v) as f64;
        for &w in g.neighbours(v) {
            l[v * n + w as usize] = -1.0;
        }
    }
    let eigen = symmetric_eigen(&l, n)?;
    // the Laplacian residual is checked against ||x|| alone
    if eigen.residual > RESIDUAL_TOLERANCE {
        return Err(LabError::Invariant(format!(
            "Laplacian residual {:e} above {RESIDUAL_TOLERANCE:e}",
            eigen.residual
        )));
    }
    Ok(eigen)
}

/// `lambda_2 / 2` for the unnormalised Laplacian, a lower bound on `h(G)`
/// up to [`SPECTRAL_SLACK`].
pub fn cheeger_spectral_lower(g: &Graph) -> Result<SpectralCertificate> {
    let eigen = laplacian_eigen(g)?;
    let lambda2 = eigen.values[1].max(0.0);
    Ok(SpectralCertificate {
        lambda2,
        lower_bound: lambda2 / 2.0,
        residual: eigen.residual,
    })
}

/// Best prefix cut of the vertex order induced by `x`, from either end.
fn sweep(g: &Graph, x: &[f64], best: &mut Option<(u64, usize, Vec<usize>)>) {
    let n = g.vertex_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(i.cmp(&j)));
    for reversed in [false, true] {
        if reversed {
            order.sort_by(|&i, &j| x[j].total_cmp(&x[i]).then(i.cmp(&j)));
        }
        let mut inside = vec![false; n];
        let mut boundary: i64 = 0;
        for (size, &v) in order.iter().take(n / 2).enumerate() {
            let into = g.neighbours(v).iter().filter(|&&w| inside[w as usize]).count() as i64;
            boundary += g.degree(v) as i64 - 2 * into;
            inside[v] = true;
            let size = size + 1;
            let better = match best {
                None => true,
                Some((b, s, _)) => {
                    (boundary as u128) * (*s as u128) < (*b as u128) * (size as u128)
                }
            };
            if better {
                *best = Some((boundary as u64, size, order[..size].to_vec()));
            }
        }
    }
}

/// Fiedler sweep: the best prefix cut over every eigenvector whose
/// eigenvalue is within tolerance of `lambda_2`. When that eigenspace is
/// degenerate, projections of a few edge differences are swept as well,
/// which recovers axis-aligned cuts on symmetric graphs.
pub fn cheeger_sweep_upper(g: &Graph) -> Result<CutEvaluation> {
    let eigen = laplacian_eigen(g)?;
    let n = g.vertex_count();
    let lambda2 = eigen.values[1];
    let tol = SPECTRAL_SLACK * lambda2.abs().max(1.0);
    let space: Vec<&Vec<f64>> = eigen
        .values
        .iter()
        .zip(&eigen.vectors)
        .skip(1)
        .take_while(|(&l, _)| l <= lambda2 + tol)
        .map(|(_, x)| x)
        .collect();

    let mut best = None;
    for x in &space {
        sweep(g, x, &mut best);
    }
    if space.len() > 1 {
        for u in 0..n.min(DIRECTION_SEEDS) {
            for &w in g.neighbours(u) {
                let w = w as usize;
                let mut y = vec![0.0; n];
                for x in &space {
                    let c = x[u] - x[w];
                    for (yi, xi) in y.iter_mut().zip(x.iter()) {
                        *yi += c * xi;
                    }
                }
                // snap rounding noise so exact ties fall back to vertex ids
                for yi in &mut y {
                    *yi = (*yi * 1e9).round() / 1e9;
                }
                sweep(g, &y, &mut best);
            }
        }
    }
    let (boundary, _, members) = best.expect("n >= 2 gives a nonempty sweep");
    let set = VertexSet::from_indices(n, members);
    Ok(CutEvaluation::new(set, boundary, Certificate::SweepUpper))
}
