//! Exact inference over a first-order linear chain.
//!
//! Scores live in two matrices: `emissions` is `T × K`, `transitions` is
//! `(K+1) × (K+1)` where row `K` is the start state and column `K` the stop
//! state, so `transitions[[K, y0]]` scores entering the sentence and
//! `transitions[[y_last, K]]` scores leaving it.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

fn check(emissions: ArrayView2<f64>, transitions: ArrayView2<f64>) -> Result<(usize, usize)> {
    let (len, n_tags) = emissions.dim();
    if len == 0 {
        return Err(Error::Argument("cannot decode an empty sequence".into()));
    }
    if n_tags == 0 {
        return Err(Error::Argument("tag set is empty".into()));
    }
    if transitions.dim() != (n_tags + 1, n_tags + 1) {
        return Err(Error::Contract(format!(
            "transition matrix is {:?}, expected {:?}",
            transitions.dim(),
            (n_tags + 1, n_tags + 1)
        )));
    }
    if emissions.iter().chain(transitions.iter()).any(|v| v.is_nan()) {
        return Err(Error::Numeric("NaN in chain scores".into()));
    }
    Ok((len, n_tags))
}

/// Total score of one tag path, start and stop transitions included.
pub fn path_score(emissions: ArrayView2<f64>, transitions: ArrayView2<f64>, path: &[usize]) -> f64 {
    let stop = emissions.ncols();
    let mut score = 0.0;
    let mut prev = stop;
    for (t, &y) in path.iter().enumerate() {
        score += transitions[[prev, y]] + emissions[[t, y]];
        prev = y;
    }
    score + transitions[[prev, stop]]
}

/// Highest-scoring tag path. Ties go to the lowest tag index, both when
/// choosing a back-pointer and when choosing the final tag.
pub fn viterbi(emissions: ArrayView2<f64>, transitions: ArrayView2<f64>) -> Result<Vec<usize>> {
    let (len, n_tags) = check(emissions, transitions)?;
    let start = n_tags;
    let mut delta: Vec<f64> = (0..n_tags)
        .map(|y| transitions[[start, y]] + emissions[[0, y]])
        .collect();
    let mut back = vec![0usize; len * n_tags];
    let mut next = vec![0.0; n_tags];
    for t in 1..len {
        for y in 0..n_tags {
            let mut best = 0;
            let mut best_score = delta[0] + transitions[[0, y]];
            for (p, &d) in delta.iter().enumerate().skip(1) {
                let s = d + transitions[[p, y]];
                if s > best_score {
                    best_score = s;
                    best = p;
                }
            }
            back[t * n_tags + y] = best;
            next[y] = best_score + emissions[[t, y]];
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut last = 0;
    let mut best_score = delta[0] + transitions[[0, start]];
    for (y, &d) in delta.iter().enumerate().skip(1) {
        let s = d + transitions[[y, start]];
        if s > best_score {
            best_score = s;
            last = y;
        }
    }
    let mut path = vec![0; len];
    path[len - 1] = last;
    for t in (1..len).rev() {
        path[t - 1] = back[t * n_tags + path[t]];
    }
    Ok(path)
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Forward (`alpha`) and backward (`beta`) log tables plus `log Z`.
#[derive(Clone, Debug)]
pub struct ForwardBackward {
    pub alpha: Array2<f64>,
    pub beta: Array2<f64>,
    pub log_z: f64,
}

pub fn forward_backward(emissions: ArrayView2<f64>, transitions: ArrayView2<f64>) -> Result<ForwardBackward> {
    let (len, n_tags) = check(emissions, transitions)?;
    let stop = n_tags;
    let mut alpha = Array2::zeros((len, n_tags));
    let mut beta = Array2::zeros((len, n_tags));
    for y in 0..n_tags {
        alpha[[0, y]] = transitions[[stop, y]] + emissions[[0, y]];
        beta[[len - 1, y]] = transitions[[y, stop]];
    }
    for t in 1..len {
        for y in 0..n_tags {
            let prev = alpha.row(t - 1);
            alpha[[t, y]] =
                log_sum_exp((0..n_tags).map(|p| prev[p] + transitions[[p, y]])) + emissions[[t, y]];
        }
    }
    for t in (0..len - 1).rev() {
        for y in 0..n_tags {
            let after = beta.row(t + 1);
            beta[[t, y]] = log_sum_exp(
                (0..n_tags).map(|n| transitions[[y, n]] + emissions[[t + 1, n]] + after[n]),
            );
        }
    }
    let last = alpha.row(len - 1);
    let log_z = log_sum_exp((0..n_tags).map(|y| last[y] + transitions[[y, stop]]));
    if !log_z.is_finite() {
        return Err(Error::Numeric(format!("log partition is {log_z}")));
    }
    Ok(ForwardBackward { alpha, beta, log_z })
}

/// `log` of the sum of `exp(path_score)` over all tag paths.
pub fn forward_log_partition(emissions: ArrayView2<f64>, transitions: ArrayView2<f64>) -> Result<f64> {
    Ok(forward_backward(emissions, transitions)?.log_z)
}

/// Posterior tag and tag-pair marginals of a chain.
#[derive(Clone, Debug)]
pub struct Marginals {
    /// `T × K`, each row sums to one.
    pub nodes: Array2<f64>,
    /// Expected transition counts, same `(K+1) × (K+1)` layout as the
    /// transition matrix (start row and stop column included).
    pub transitions: Array2<f64>,
    pub log_z: f64,
}

pub fn marginals(emissions: ArrayView2<f64>, transitions: ArrayView2<f64>) -> Result<Marginals> {
    let fb = forward_backward(emissions, transitions)?;
    let (len, n_tags) = emissions.dim();
    let stop = n_tags;
    let log_z = fb.log_z;
    let nodes = Array2::from_shape_fn((len, n_tags), |(t, y)| {
        (fb.alpha[[t, y]] + fb.beta[[t, y]] - log_z).exp()
    });
    let mut pairs = Array2::zeros((n_tags + 1, n_tags + 1));
    for y in 0..n_tags {
        pairs[[stop, y]] = nodes[[0, y]];
        pairs[[y, stop]] = nodes[[len - 1, y]];
    }
    for t in 1..len {
        for p in 0..n_tags {
            for y in 0..n_tags {
                pairs[[p, y]] += (fb.alpha[[t - 1, p]]
                    + transitions[[p, y]]
                    + emissions[[t, y]]
                    + fb.beta[[t, y]]
                    - log_z)
                    .exp();
            }
        }
    }
    Ok(Marginals {
        nodes,
        transitions: pairs,
        log_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_step_argmax() {
        let e = array![[0.5, 2.0]];
        let t = Array2::zeros((3, 3));
        assert_eq!(viterbi(e.view(), t.view()).unwrap(), [1]);
    }

    #[test]
    fn zero_scores_tie_break() {
        let e = Array2::zeros((4, 3));
        let t = Array2::zeros((4, 4));
        assert_eq!(viterbi(e.view(), t.view()).unwrap(), [0, 0, 0, 0]);
    }

    #[test]
    fn rejects_empty_and_nan() {
        let t = Array2::zeros((3, 3));
        assert!(matches!(
            viterbi(Array2::zeros((0, 2)).view(), t.view()),
            Err(Error::Argument(_))
        ));
        let e = array![[0.0, f64::NAN]];
        assert!(matches!(viterbi(e.view(), t.view()), Err(Error::Numeric(_))));
        assert!(matches!(
            forward_log_partition(e.view(), t.view()),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(
            viterbi(array![[0.0, 1.0]].view(), Array2::zeros((2, 2)).view()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn two_equal_paths() {
        let z = forward_log_partition(Array2::zeros((1, 2)).view(), Array2::zeros((3, 3)).view()).unwrap();
        assert!((z - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn emission_shift_law() {
        let e = array![[0.3, -1.2, 0.7], [1.1, 0.0, -0.4], [0.2, 0.9, 0.5]];
        let t = Array2::from_shape_fn((4, 4), |(i, j)| ((i * 7 + j * 3) % 5) as f64 * 0.1 - 0.2);
        let c = 1.75;
        let z0 = forward_log_partition(e.view(), t.view()).unwrap();
        let z1 = forward_log_partition((&e + c).view(), t.view()).unwrap();
        assert!((z1 - z0 - 3.0 * c).abs() < 1e-12);
    }

    #[test]
    fn start_and_stop_transitions_matter() {
        let e = Array2::zeros((2, 2));
        let mut t = Array2::zeros((3, 3));
        t[[2, 1]] = 1.0; // start -> 1
        t[[0, 2]] = 2.0; // 0 -> stop
        assert_eq!(viterbi(e.view(), t.view()).unwrap(), [1, 0]);
    }

    #[test]
    fn marginals_are_normalized() {
        let e = array![[0.3, -1.2, 0.7], [1.1, 0.0, -0.4]];
        let t = Array2::from_shape_fn((4, 4), |(i, j)| (i as f64 - j as f64) * 0.3);
        let m = marginals(e.view(), t.view()).unwrap();
        for row in m.nodes.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        // one start, one stop and T-1 internal transitions in expectation
        assert!((m.transitions.row(3).sum() - 1.0).abs() < 1e-12);
        assert!((m.transitions.column(3).sum() - 1.0).abs() < 1e-12);
        let internal: f64 = m.transitions.slice(ndarray::s![..3, ..3]).sum();
        assert!((internal - 1.0).abs() < 1e-12);
    }
}
