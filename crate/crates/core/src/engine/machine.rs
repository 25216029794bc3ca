//! The storage/recall pair and the single training steps that drive it.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{EngineError, Phase, ScheduleConfig};
use crate::mnist::{Example, Split};
use crate::nn::{argmax, regularized_gradient, ActivationKind, LossKind, Mlp, RegularizerSpec};
use crate::rng::RngStream;

/// Independent random streams for each source of randomness in a run.
#[derive(Debug, Clone)]
pub struct Streams {
    pub shuffle: RngStream,
    pub class_draw: RngStream,
    pub injection_draw: RngStream,
    pub storage_noise: RngStream,
    pub recall_noise: RngStream,
}

impl Streams {
    pub fn new(root: &RngStream) -> Self {
        Self {
            shuffle: root.derive("sweep-shuffle"),
            class_draw: root.derive("psgd-class-draw"),
            injection_draw: root.derive("injection-draw"),
            storage_noise: root.derive("replica-noise-storage"),
            recall_noise: root.derive("replica-noise-recall"),
        }
    }
}

pub fn one_hot(n: usize, class: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[class] = 1.0;
    v
}

/// A classifier (`storage`, image to class) and a synthesizer (`recall`, class
/// to image) that together hold the learned images in their weights.
///
/// `recall` works in `[0, 1]` pixel space while `storage` takes zero-mean
/// images; `pixel_mean` converts between the two.
#[derive(Debug, Clone, PartialEq)]
pub struct Plm {
    storage: Mlp,
    recall: Mlp,
    pixel_mean: f64,
}

impl Plm {
    /// Fresh pair: storage is `pixels -> hidden -> classes` with a softmax
    /// head, recall is `classes -> hidden -> pixels` with a sigmoid head.
    pub fn build(
        pixels: usize,
        config: &ScheduleConfig,
        pixel_mean: f64,
        rng: &RngStream,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        let storage = Mlp::init(
            &[pixels, config.hidden_units, config.n_classes],
            &[ActivationKind::BiasedSigmoid, ActivationKind::SoftmaxZeroBias],
            &mut rng.derive("weights-storage"),
        )?;
        let recall = Mlp::init(
            &[config.n_classes, config.hidden_units, pixels],
            &[ActivationKind::BiasedSigmoid, ActivationKind::SigmoidZeroBias],
            &mut rng.derive("weights-recall"),
        )?;
        Self::from_networks(storage, recall, pixel_mean)
    }

    pub fn from_networks(storage: Mlp, recall: Mlp, pixel_mean: f64) -> Result<Self, EngineError> {
        let shape = |reason: String| Err(EngineError::InvalidConfig { field: "networks", reason });
        if storage.head() != ActivationKind::SoftmaxZeroBias {
            return shape("storage head must be softmax".into());
        }
        if recall.head() != ActivationKind::SigmoidZeroBias {
            return shape("recall head must be a zero-bias sigmoid".into());
        }
        if storage.input_dim() != recall.output_dim() || storage.output_dim() != recall.input_dim() {
            return shape(format!(
                "storage {:?} and recall {:?} are not mirror images",
                storage.dims(),
                recall.dims()
            ));
        }
        if !pixel_mean.is_finite() {
            return shape("pixel mean must be finite".into());
        }
        Ok(Self {
            storage,
            recall,
            pixel_mean,
        })
    }

    pub fn storage(&self) -> &Mlp {
        &self.storage
    }

    pub fn recall(&self) -> &Mlp {
        &self.recall
    }

    pub fn storage_mut(&mut self) -> &mut Mlp {
        &mut self.storage
    }

    pub fn recall_mut(&mut self) -> &mut Mlp {
        &mut self.recall
    }

    pub fn pixel_mean(&self) -> f64 {
        self.pixel_mean
    }

    pub fn n_classes(&self) -> usize {
        self.storage.output_dim()
    }

    pub fn pixels(&self) -> usize {
        self.storage.input_dim()
    }

    pub fn is_finite(&self) -> bool {
        self.storage.is_finite() && self.recall.is_finite()
    }

    fn check_class(&self, class: usize) -> Result<(), EngineError> {
        if class >= self.n_classes() {
            return Err(EngineError::ClassOutOfRange {
                class,
                n_classes: self.n_classes(),
            });
        }
        Ok(())
    }

    /// Recalls the image for `class`, already shifted into storage's zero-mean
    /// input convention. No dither, no dropout.
    pub fn synthesize(&self, class: usize) -> Result<Vec<f64>, EngineError> {
        self.check_class(class)?;
        let mut img = self.recall.predict(&one_hot(self.n_classes(), class))?;
        for v in &mut img {
            *v -= self.pixel_mean;
        }
        Ok(img)
    }

    /// Storage argmax for a zero-mean image (ties to the lowest class).
    pub fn classify(&self, image: &[f64]) -> Result<usize, EngineError> {
        Ok(argmax(&self.storage.predict(image)?))
    }

    /// Storage argmax for each image, `None` where the image cannot be scored.
    pub fn classify_many(&self, images: &[&[f64]]) -> Vec<Option<usize>> {
        let pixels = self.pixels();
        if images.iter().all(|im| im.len() == pixels) {
            let flat: Vec<f64> = images.iter().flat_map(|im| im.iter().copied()).collect();
            let batch = Array2::from_shape_vec((images.len(), pixels), flat).expect("rows x pixels");
            if let Ok(out) = self.storage.predict_batch(batch) {
                return out.rows().into_iter().map(|r| Some(argmax(r.as_slice().expect("row-major")))).collect();
            }
        }
        images.iter().map(|im| self.classify(im).ok()).collect()
    }

    /// Recalls every class in `classes` and classifies the results.
    pub fn recall_and_classify(&self, classes: &[usize]) -> Vec<Option<usize>> {
        let n = self.n_classes();
        if classes.iter().any(|&c| c >= n) {
            return classes
                .iter()
                .map(|&c| self.synthesize(c).and_then(|im| self.classify(&im)).ok())
                .collect();
        }
        let codes = Array2::from_shape_fn((classes.len(), n), |(r, c)| f64::from(u8::from(classes[r] == c)));
        match self.recall.predict_batch(codes) {
            Ok(mut images) => {
                images.mapv_inplace(|v| v - self.pixel_mean);
                let rows: Vec<&[f64]> = images
                    .rows()
                    .into_iter()
                    .map(|r| r.to_slice().expect("row-major"))
                    .collect();
                self.classify_many(&rows)
            }
            Err(_) => vec![None; classes.len()],
        }
    }

    /// One regularized SGD step on each network for the pair (image, class).
    /// `image` is in the zero-mean convention. Both gradients are taken before
    /// either network moves; the recall network steps by `recall_lr`.
    fn train_pair(
        &mut self,
        image: &[f64],
        class: usize,
        config: &ScheduleConfig,
        recall_lr: f64,
        regularizer: &RegularizerSpec,
        streams: &mut Streams,
    ) -> Result<(), EngineError> {
        self.check_class(class)?;
        let label = one_hot(self.n_classes(), class);
        let pixels: Vec<f64> = image.iter().map(|v| v + self.pixel_mean).collect();

        let gs = regularized_gradient(
            &self.storage,
            image,
            &label,
            LossKind::CrossEntropy,
            regularizer,
            &mut streams.storage_noise,
        )
        .map_err(|e| EngineError::explosion("storage", e))?;
        let gr = regularized_gradient(
            &self.recall,
            &label,
            &pixels,
            LossKind::SumSquared,
            regularizer,
            &mut streams.recall_noise,
        )
        .map_err(|e| EngineError::explosion("recall", e))?;

        self.storage
            .apply_update(&gs, config.learning_rate)
            .map_err(|e| EngineError::explosion("storage", e))?;
        self.recall
            .apply_update(&gr, recall_lr)
            .map_err(|e| EngineError::explosion("recall", e))?;
        Ok(())
    }
}

/// Trains storage and recall separately on the TRAIN examples: `initial_sweeps`
/// passes, each in a freshly shuffled order.
pub fn train_initial(
    plm: &mut Plm,
    train: &[Example],
    config: &ScheduleConfig,
    streams: &mut Streams,
) -> Result<(), EngineError> {
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..config.initial_sweeps {
        order.shuffle(&mut streams.shuffle);
        for &i in &order {
            let ex = &train[i];
            plm.train_pair(&ex.image, ex.class, config, config.recall_learning_rate, &config.regularizer, streams)
                .map_err(|e| e.in_phase(Phase::InitialTraining))?;
        }
    }
    Ok(())
}

/// One step of perpetual SGD: draw a class from all `n_classes`, recall its
/// image, and train both networks on that self-made pair. Returns the class.
pub fn psgd_iteration(
    plm: &mut Plm,
    config: &ScheduleConfig,
    regularizer: &RegularizerSpec,
    streams: &mut Streams,
) -> Result<usize, EngineError> {
    let class = streams.class_draw.random_range(0..plm.n_classes());
    let image = plm.synthesize(class)?;
    plm.train_pair(&image, class, config, config.recall_replay_learning_rate, regularizer, streams)?;
    Ok(class)
}

/// Extra step on a real NEW example, injected alongside PSGD.
pub fn injection_step(
    plm: &mut Plm,
    example: &Example,
    config: &ScheduleConfig,
    regularizer: &RegularizerSpec,
    streams: &mut Streams,
) -> Result<(), EngineError> {
    debug_assert_eq!(example.split, Split::New, "only NEW examples may be injected");
    plm.train_pair(&example.image, example.class, config, config.recall_learning_rate, regularizer, streams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mnist::Split;

    fn tiny_config() -> ScheduleConfig {
        ScheduleConfig {
            n_classes: 4,
            n_train: 3,
            n_new: 1,
            hidden_units: 6,
            regularizer: RegularizerSpec {
                replicas: 4,
                ..RegularizerSpec::default()
            },
            ..ScheduleConfig::default()
        }
    }

    fn tiny_plm() -> Plm {
        Plm::build(9, &tiny_config(), 0.2, &RngStream::new(1)).unwrap()
    }

    #[test]
    fn full_sized_pair() {
        let plm = Plm::build(784, &ScheduleConfig::default(), 0.13, &RngStream::new(1)).unwrap();
        assert_eq!(plm.storage().trainable_parameters(), 86_000);
        assert_eq!(plm.recall().trainable_parameters(), 86_000);
        let mut rev = plm.storage().dims();
        rev.reverse();
        assert_eq!(rev, plm.recall().dims());
    }

    #[test]
    fn zero_recall_synthesizes_half_minus_mean() {
        let mut plm = tiny_plm();
        for l in plm.recall_mut().layers_mut() {
            l.weights_mut().fill(0.0);
        }
        for v in plm.synthesize(2).unwrap() {
            assert_eq!(v, 0.5 - 0.2);
        }
    }

    #[test]
    fn synthesize_is_pure_and_range_checked() {
        let plm = tiny_plm();
        assert_eq!(plm.synthesize(1).unwrap(), plm.synthesize(1).unwrap());
        assert!(matches!(plm.synthesize(4), Err(EngineError::ClassOutOfRange { .. })));
        for c in 0..4 {
            assert!(plm
                .synthesize(c)
                .unwrap()
                .iter()
                .all(|v| (0.0..=1.0).contains(&(v + plm.pixel_mean()))));
        }
    }

    #[test]
    fn zero_learning_rate_leaves_pair_unchanged() {
        let mut plm = tiny_plm();
        let before = plm.clone();
        let config = ScheduleConfig {
            learning_rate: 0.0,
            recall_learning_rate: 0.0,
            recall_replay_learning_rate: 0.0,
            ..tiny_config()
        };
        let mut streams = Streams::new(&RngStream::new(2));
        for _ in 0..5 {
            psgd_iteration(&mut plm, &config, &config.regularizer, &mut streams).unwrap();
        }
        let ex = Example {
            class: 3,
            split: Split::New,
            image: vec![0.1; 9],
        };
        injection_step(&mut plm, &ex, &config, &config.regularizer, &mut streams).unwrap();
        assert_eq!(plm, before);
    }

    #[test]
    fn zero_sweeps_is_a_no_op() {
        let mut plm = tiny_plm();
        let before = plm.clone();
        let config = ScheduleConfig {
            initial_sweeps: 0,
            ..tiny_config()
        };
        let train = vec![Example {
            class: 0,
            split: Split::Train,
            image: vec![0.0; 9],
        }];
        train_initial(&mut plm, &train, &config, &mut Streams::new(&RngStream::new(0))).unwrap();
        assert_eq!(plm, before);
    }

    #[test]
    fn self_consistent_pair_has_zero_storage_gradient() {
        // storage maps every input to a one-hot output when its head weights
        // are huge on a constant-one hidden unit; with exact one-hot output
        // the cross-entropy delta y - t vanishes.
        use crate::nn::{DenseLayer, GradientSet};
        let hidden = DenseLayer::new(2, 1, vec![0.0, 0.0], vec![800.0], ActivationKind::BiasedSigmoid).unwrap();
        let head = DenseLayer::new(1, 2, vec![800.0, -800.0], vec![0.0; 2], ActivationKind::SoftmaxZeroBias).unwrap();
        let storage = Mlp::from_layers(vec![hidden, head]).unwrap();
        let pass = storage.forward(&[0.3, -0.1], None).unwrap();
        assert_eq!(pass.output(), &[1.0, 0.0]);
        let g = storage.backward(&pass, &[1.0, 0.0], LossKind::CrossEntropy).unwrap();
        assert_eq!(g, GradientSet::zeros_like(&storage));
    }

    #[cfg(debug_assertions)]
    #[test]
    #[should_panic(expected = "only NEW examples")]
    fn injecting_train_example_panics_in_debug() {
        let mut plm = tiny_plm();
        let config = tiny_config();
        let ex = Example {
            class: 0,
            split: Split::Train,
            image: vec![0.0; 9],
        };
        let _ = injection_step(&mut plm, &ex, &config, &config.regularizer, &mut Streams::new(&RngStream::new(0)));
    }
}
