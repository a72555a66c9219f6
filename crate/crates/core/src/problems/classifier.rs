use std::io;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::oracle::{step_rng, GradientOracle};
use crate::state::check_dim;

const BATCH_SALT: u64 = 0x6261_7463_6800_0000;

/// Feature rows with binary labels in `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_features: usize,
    /// Row-major, `len() * n_features` entries.
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn new(n_features: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if n_features == 0 || labels.is_empty() {
            return Err(Error::Dataset(
                "dataset needs at least one feature and one example".into(),
            ));
        }
        check_dim(labels.len() * n_features, features.len())?;
        if let Some(y) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(Error::Dataset(format!("label {y} is not 0 or 1")));
        }
        Ok(Dataset {
            n_features,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    /// One row per example, label in the last column, no header.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            rec.push(format!("{}", self.labels[i]));
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::Dataset(e.to_string()))
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
        let (mut features, mut labels, mut width) = (Vec::new(), Vec::new(), None);
        for rec in rdr.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Dataset(e.to_string()))?;
            if vals.len() < 2 {
                return Err(Error::Dataset(
                    "rows need at least one feature and a label".into(),
                ));
            }
            let w = *width.get_or_insert(vals.len());
            if w != vals.len() {
                return Err(Error::Dataset(format!(
                    "ragged row: {} columns, expected {w}",
                    vals.len()
                )));
            }
            features.extend_from_slice(&vals[..w - 1]);
            labels.push(vals[w - 1]);
        }
        let width = width.ok_or_else(|| Error::Dataset("empty file".into()))?;
        Dataset::new(width - 1, features, labels)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::Dataset(e.to_string()))?;
        self.write_csv(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::Dataset(e.to_string()))?;
        Dataset::read_csv(f)
    }
}

/// Binary classifier trained with mean cross-entropy.
///
/// `hidden == 0` is logistic regression without bias. Otherwise a tanh
/// perceptron with parameters laid out as `[W1 (hidden x d), b1, w2, b2]`.
#[derive(Debug, Clone)]
pub struct ToyClassifierProblem {
    pub train: Dataset,
    pub test: Dataset,
    pub hidden: usize,
    /// Minibatch size; `None` uses the full training set.
    pub batch_size: Option<usize>,
    /// Weight decay coefficient, added as `l2/2 ||w||^2`.
    pub l2: f64,
}

/// Synthetic linearly separable data with label noise from a noisy margin.
pub fn make_toy_classifier(
    n_examples: usize,
    n_features: usize,
    hidden: usize,
    seed: u64,
) -> Result<ToyClassifierProblem> {
    if n_examples == 0 || n_features == 0 {
        return Err(Error::InvalidArgument(
            "need n_examples, n_features >= 1".into(),
        ));
    }
    let mut rng = step_rng(seed, 0x6461_7461);
    let mut w_true: Vec<f64> = (0..n_features)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let norm = w_true
        .iter()
        .map(|a| a * a)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    w_true.iter_mut().for_each(|a| *a /= norm);
    let mut draw = |n: usize| {
        let mut feats = Vec::with_capacity(n * n_features);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..n_features)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let noise: f64 = StandardNormal.sample(&mut rng);
            let margin = row.iter().zip(&w_true).map(|(a, b)| a * b).sum::<f64>() + 0.25 * noise;
            labels.push(if margin > 0.0 { 1.0 } else { 0.0 });
            feats.extend(row);
        }
        Dataset::new(n_features, feats, labels)
    };
    let train = draw(n_examples)?;
    let test = draw((n_examples / 4).max(1))?;
    Ok(ToyClassifierProblem {
        train,
        test,
        hidden,
        batch_size: None,
        l2: 0.0,
    })
}

fn sigmoid(o: f64) -> f64 {
    if o >= 0.0 {
        1.0 / (1.0 + (-o).exp())
    } else {
        let e = o.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^o) - y o`
fn bce_with_logit(o: f64, y: f64) -> f64 {
    o.max(0.0) + (-o.abs()).exp().ln_1p() - y * o
}

impl ToyClassifierProblem {
    pub fn from_datasets(train: Dataset, test: Dataset, hidden: usize) -> Result<Self> {
        check_dim(train.n_features, test.n_features)?;
        Ok(ToyClassifierProblem {
            train,
            test,
            hidden,
            batch_size: None,
            l2: 0.0,
        })
    }

    pub fn with_batch_size(mut self, batch: usize) -> Result<Self> {
        if batch == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        self.batch_size = Some(batch);
        Ok(self)
    }

    pub fn with_l2(mut self, l2: f64) -> Self {
        self.l2 = l2;
        self
    }

    fn n_params(&self) -> usize {
        let d = self.train.n_features;
        if self.hidden == 0 {
            d
        } else {
            self.hidden * d + 2 * self.hidden + 1
        }
    }

    /// Zero for logistic regression; scaled Gaussian weights and zero biases otherwise.
    pub fn initial_weights(&self, seed: u64) -> Vec<f64> {
        let mut w = vec![0.0; self.n_params()];
        if self.hidden == 0 {
            return w;
        }
        let (d, h) = (self.train.n_features, self.hidden);
        let mut rng = step_rng(seed, 0x696e_6974);
        let s1 = (1.0 / d as f64).sqrt();
        let s2 = (1.0 / h as f64).sqrt();
        for v in &mut w[..h * d] {
            *v = s1 * rng.sample::<f64, _>(StandardNormal);
        }
        for v in &mut w[h * d + h..h * d + 2 * h] {
            *v = s2 * rng.sample::<f64, _>(StandardNormal);
        }
        w
    }

    /// Logit for one example; fills `hid` with hidden activations.
    fn logit(&self, w: &[f64], x: &[f64], hid: &mut [f64]) -> f64 {
        let d = self.train.n_features;
        if self.hidden == 0 {
            return w.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        let h = self.hidden;
        let (w1, rest) = w.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(h);
        let mut o = b2[0];
        for j in 0..h {
            let a = w1[j * d..(j + 1) * d]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                + b1[j];
            hid[j] = a.tanh();
            o += w2[j] * hid[j];
        }
        o
    }

    /// Adds the loss gradient of one example into `out`.
    fn add_example_grad(
        &self,
        w: &[f64],
        x: &[f64],
        y: f64,
        hid: &mut [f64],
        out: &mut [f64],
        scale: f64,
    ) {
        let dz = (sigmoid(self.logit(w, x, hid)) - y) * scale;
        let d = self.train.n_features;
        if self.hidden == 0 {
            for (o, xi) in out.iter_mut().zip(x) {
                *o += dz * xi;
            }
            return;
        }
        let h = self.hidden;
        let w2 = &w[h * d + h..h * d + 2 * h];
        let (gw1, rest) = out.split_at_mut(h * d);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, gb2) = rest.split_at_mut(h);
        gb2[0] += dz;
        for j in 0..h {
            gw2[j] += dz * hid[j];
            let da = dz * w2[j] * (1.0 - hid[j] * hid[j]);
            gb1[j] += da;
            for (g, xi) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                *g += da * xi;
            }
        }
    }

    /// Mean gradient over the given training rows, plus weight decay.
    fn grad_over(&self, w: &[f64], rows: impl ExactSizeIterator<Item = usize>, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut hid = vec![0.0; self.hidden];
        let scale = 1.0 / rows.len() as f64;
        for i in rows {
            self.add_example_grad(
                w,
                self.train.row(i),
                self.train.labels[i],
                &mut hid,
                out,
                scale,
            );
        }
        if self.l2 != 0.0 {
            for (o, wi) in out.iter_mut().zip(w) {
                *o += self.l2 * wi;
            }
        }
    }

    /// Gradient of one training example's loss, without weight decay.
    pub fn example_gradient(&self, w: &[f64], i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_params()];
        let mut hid = vec![0.0; self.hidden];
        self.add_example_grad(
            w,
            self.train.row(i),
            self.train.labels[i],
            &mut hid,
            &mut out,
            1.0,
        );
        out
    }

    fn mean_loss(&self, w: &[f64], data: &Dataset) -> f64 {
        let mut hid = vec![0.0; self.hidden];
        (0..data.len())
            .map(|i| bce_with_logit(self.logit(w, data.row(i), &mut hid), data.labels[i]))
            .sum::<f64>()
            / data.len() as f64
    }

    pub fn test_loss(&self, w: &[f64]) -> f64 {
        self.mean_loss(w, &self.test)
    }

    fn accuracy(&self, w: &[f64], data: &Dataset) -> f64 {
        let mut hid = vec![0.0; self.hidden];
        let hits = (0..data.len())
            .filter(|&i| (self.logit(w, data.row(i), &mut hid) > 0.0) == (data.labels[i] == 1.0))
            .count();
        hits as f64 / data.len() as f64
    }

    pub fn test_accuracy(&self, w: &[f64]) -> f64 {
        self.accuracy(w, &self.test)
    }

    pub fn train_accuracy(&self, w: &[f64]) -> f64 {
        self.accuracy(w, &self.train)
    }

    fn effective_batch(&self) -> Option<usize> {
        self.batch_size.filter(|&b| b < self.train.len())
    }
}

impl GradientOracle for ToyClassifierProblem {
    fn dim(&self) -> usize {
        self.n_params()
    }

    fn value(&self, w: &[f64]) -> f64 {
        let reg = 0.5 * self.l2 * w.iter().map(|a| a * a).sum::<f64>();
        self.mean_loss(w, &self.train) + reg
    }

    fn gradient_into(&self, w: &[f64], out: &mut [f64]) {
        self.grad_over(w, 0..self.train.len(), out)
    }

    fn is_stochastic(&self) -> bool {
        self.effective_batch().is_some()
    }

    /// Uniform sampling with replacement, reproducible from `(seed, step)`.
    fn sample_gradient_into(&self, w: &[f64], seed: u64, step: u64, out: &mut [f64]) {
        let Some(b) = self.effective_batch() else {
            return self.gradient_into(w, out);
        };
        let n = self.train.len();
        let mut rng = step_rng(seed ^ BATCH_SALT, step);
        let rows: Vec<usize> = (0..b).map(|_| rng.random_range(0..n)).collect();
        self.grad_over(w, rows.into_iter(), out)
    }
}
