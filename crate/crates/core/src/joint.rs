//! Temporally smoothed sentence selection over a photo stream.
//!
//! Every image `i` receives one label `s_i` from a shared candidate set. The
//! energy of a labeling is
//!
//! ```text
//! E(s) = Σ_i unary[i][s_i] + β · #{ j : s_j ≠ s_{j+1} }
//! ```
//!
//! which is a chain model with a Potts pairwise term, minimized exactly by
//! dynamic programming. Because the pairwise cost only distinguishes "same"
//! from "different", the best predecessor of a state is either the same
//! state or the overall cheapest one, giving an `O(K·|C|)` pass.
//!
//! All sums run from the last image to the first, so [`energy`], both
//! solvers, and any brute-force enumeration that calls [`energy`] produce
//! bit-identical values for the same labeling. Among labelings of equal
//! energy the lexicographically smallest one is returned.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JointError {
    #[error("invalid energy instance: {0}")]
    InvalidInstance(String),
    #[error("labeling has length {found}, stream has {expected} images")]
    LengthMismatch { expected: usize, found: usize },
    #[error("label {label} at image {position} is out of range (|C| = {num_labels})")]
    LabelOutOfRange {
        position: usize,
        label: usize,
        num_labels: usize,
    },
    #[error("smoothing weight must be finite and nonnegative, got {0}")]
    InvalidBeta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    pub beta: f64,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self { beta: 1.0 }
    }
}

fn check_beta(beta: f64) -> Result<(), JointError> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(JointError::InvalidBeta(beta))
    }
}

/// `K × |C|` unary cost matrix plus the names needed to report results.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyInstance {
    num_labels: usize,
    unary: Vec<f64>,
    image_ids: Vec<String>,
    timestamps: Vec<String>,
    labels: Vec<String>,
}

impl EnergyInstance {
    /// Builds an instance from one cost row per image. Images are named by
    /// position, labels `c0`, `c1`, and so on.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, JointError> {
        let num_images = rows.len();
        let num_labels = rows.first().map_or(0, Vec::len);
        if num_images == 0 {
            return Err(JointError::InvalidInstance("no images".into()));
        }
        if num_labels == 0 {
            return Err(JointError::InvalidInstance("no candidate labels".into()));
        }
        let mut unary = Vec::with_capacity(num_images * num_labels);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != num_labels {
                return Err(JointError::InvalidInstance(format!(
                    "row {i} has {} costs, expected {num_labels}",
                    row.len()
                )));
            }
            if let Some(c) = row.iter().position(|x| !x.is_finite()) {
                return Err(JointError::InvalidInstance(format!("cost [{i}][{c}] is not finite")));
            }
            unary.extend(row);
        }
        Ok(Self {
            num_labels,
            unary,
            image_ids: (0..num_images).map(|i| i.to_string()).collect(),
            timestamps: vec![String::new(); num_images],
            labels: (0..num_labels).map(|c| format!("c{c}")).collect(),
        })
    }

    pub fn with_images(mut self, ids: Vec<String>, timestamps: Vec<String>) -> Result<Self, JointError> {
        if ids.len() != self.num_images() || timestamps.len() != self.num_images() {
            return Err(JointError::InvalidInstance(format!(
                "{} ids / {} timestamps for {} images",
                ids.len(),
                timestamps.len(),
                self.num_images()
            )));
        }
        self.image_ids = ids;
        self.timestamps = timestamps;
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, JointError> {
        if labels.len() != self.num_labels {
            return Err(JointError::InvalidInstance(format!(
                "{} label names for {} labels",
                labels.len(),
                self.num_labels
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn num_images(&self) -> usize {
        self.unary.len() / self.num_labels
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn row(&self, image: usize) -> &[f64] {
        &self.unary[image * self.num_labels..(image + 1) * self.num_labels]
    }

    pub fn unary(&self, image: usize, label: usize) -> f64 {
        self.unary[image * self.num_labels + label]
    }

    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }

    pub fn timestamps(&self) -> &[String] {
        &self.timestamps
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Sub-instance for images `[start, end)` sharing the same labels.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            num_labels: self.num_labels,
            unary: self.unary[start * self.num_labels..end * self.num_labels].to_vec(),
            image_ids: self.image_ids[start..end].to_vec(),
            timestamps: self.timestamps[start..end].to_vec(),
            labels: self.labels.clone(),
        }
    }

    fn check_labeling(&self, labeling: &[usize]) -> Result<(), JointError> {
        if labeling.len() != self.num_images() {
            return Err(JointError::LengthMismatch {
                expected: self.num_images(),
                found: labeling.len(),
            });
        }
        if let Some((position, &label)) = labeling.iter().enumerate().find(|(_, &l)| l >= self.num_labels) {
            return Err(JointError::LabelOutOfRange {
                position,
                label,
                num_labels: self.num_labels,
            });
        }
        Ok(())
    }
}

/// A labeling together with its energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub labeling: Vec<usize>,
    pub energy: f64,
}

/// Energy of `labeling`, summed from the last image backwards.
pub fn energy(instance: &EnergyInstance, labeling: &[usize], beta: f64) -> Result<f64, JointError> {
    instance.check_labeling(labeling)?;
    let last = labeling.len() - 1;
    let mut acc = instance.unary(last, labeling[last]);
    for i in (0..last).rev() {
        if labeling[i] != labeling[i + 1] {
            acc += beta;
        }
        acc += instance.unary(i, labeling[i]);
    }
    Ok(acc)
}

/// Number of label changes along the stream.
pub fn transitions(labeling: &[usize]) -> usize {
    labeling.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Lowest index holding the minimum of `values`.
fn argmin(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

/// Exact minimizer in `O(K·|C|)`.
pub fn viterbi_joint(instance: &EnergyInstance, beta: f64) -> Result<Solution, JointError> {
    check_beta(beta)?;
    let k = instance.num_images();
    let n = instance.num_labels();

    // cost[i * n + c]: cheapest energy of images i.. given s_i = c.
    // switch[i]: cheapest way to enter image i with a label change.
    let mut cost = vec![0.0; k * n];
    let mut switch = vec![f64::INFINITY; k];
    cost[(k - 1) * n..].copy_from_slice(instance.row(k - 1));
    for i in (0..k - 1).rev() {
        let (head, tail) = cost.split_at_mut((i + 1) * n);
        let next = &tail[..n];
        let (_, m) = argmin(next);
        let sw = m + beta;
        switch[i + 1] = sw;
        for ((out, &stay), &u) in head[i * n..].iter_mut().zip(next).zip(instance.row(i)) {
            *out = stay.min(sw) + u;
        }
    }

    let (first, total) = argmin(&cost[..n]);
    let mut labeling = Vec::with_capacity(k);
    labeling.push(first);
    for i in 1..k {
        let prev = labeling[i - 1];
        let row = &cost[i * n..(i + 1) * n];
        let best = row[prev].min(switch[i]);
        let label = (0..n)
            .find(|&c| {
                if c == prev {
                    row[c] == best
                } else {
                    row[c] + beta == best
                }
            })
            .expect("the minimum is attained by some label");
        labeling.push(label);
    }
    Ok(Solution {
        labeling,
        energy: total,
    })
}

/// Reference solver scanning every transition, `O(K·|C|²)`.
pub fn viterbi_naive(instance: &EnergyInstance, beta: f64) -> Result<Solution, JointError> {
    check_beta(beta)?;
    let k = instance.num_images();
    let n = instance.num_labels();
    let step = |from: usize, to: usize, value: f64| if from == to { value } else { value + beta };

    let mut cost = vec![vec![0.0; n]; k];
    cost[k - 1].copy_from_slice(instance.row(k - 1));
    for i in (0..k - 1).rev() {
        for c in 0..n {
            let mut best = f64::INFINITY;
            for (next, &value) in cost[i + 1].iter().enumerate() {
                best = best.min(step(c, next, value));
            }
            cost[i][c] = best + instance.unary(i, c);
        }
    }

    let mut labeling = Vec::with_capacity(k);
    let (first, total) = argmin(&cost[0]);
    labeling.push(first);
    for i in 1..k {
        let prev = labeling[i - 1];
        let values: Vec<f64> = (0..n).map(|c| step(prev, c, cost[i][c])).collect();
        labeling.push(argmin(&values).0);
    }
    Ok(Solution {
        labeling,
        energy: total,
    })
}

/// Solves consecutive windows of `window` images independently and
/// concatenates the labelings. The returned energy is that of the whole
/// stream under the concatenated labeling.
pub fn viterbi_windowed(instance: &EnergyInstance, beta: f64, window: usize) -> Result<Solution, JointError> {
    if window == 0 {
        return Err(JointError::InvalidInstance("window length must be positive".into()));
    }
    if window >= instance.num_images() {
        return viterbi_joint(instance, beta);
    }
    let mut labeling = Vec::with_capacity(instance.num_images());
    for start in (0..instance.num_images()).step_by(window) {
        let end = (start + window).min(instance.num_images());
        labeling.extend(viterbi_joint(&instance.slice(start, end), beta)?.labeling);
    }
    let energy = energy(instance, &labeling, beta)?;
    Ok(Solution { labeling, energy })
}

/// Maximal run of equal labels, as inclusive image indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub start: usize,
    pub end: usize,
    pub label: usize,
}

impl Run {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn label_runs(labeling: &[usize]) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for (i, &label) in labeling.iter().enumerate() {
        match runs.last_mut() {
            Some(run) if run.label == label => run.end = i,
            _ => runs.push(Run {
                start: i,
                end: i,
                label,
            }),
        }
    }
    runs
}

/// Contiguous images sharing one selected sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiarySegment {
    pub start_index: usize,
    /// Inclusive.
    pub end_index: usize,
    pub label: usize,
    pub sentence: String,
    pub image_ids: Vec<String>,
    pub start_time: String,
    pub end_time: String,
}

impl DiarySegment {
    pub fn len(&self) -> usize {
        self.end_index - self.start_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn group_segments(instance: &EnergyInstance, labeling: &[usize]) -> Result<Vec<DiarySegment>, JointError> {
    instance.check_labeling(labeling)?;
    Ok(label_runs(labeling)
        .into_iter()
        .map(|run| DiarySegment {
            start_index: run.start,
            end_index: run.end,
            label: run.label,
            sentence: instance.labels()[run.label].clone(),
            image_ids: instance.image_ids()[run.start..=run.end].to_vec(),
            start_time: instance.timestamps()[run.start].clone(),
            end_time: instance.timestamps()[run.end].clone(),
        })
        .collect())
}
