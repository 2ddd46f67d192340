#pragma once

// Alternating WGAN training of the generator, discriminator and divergence
// parameters, lambda cross-validation and ablation runs.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cizsl/dataio.hpp"
#include "cizsl/diffmath.hpp"
#include "cizsl/evaluation.hpp"
#include "cizsl/hallucination.hpp"
#include "cizsl/losses.hpp"
#include "cizsl/model.hpp"

namespace cizsl {

struct TrainConfig {
  std::size_t n_steps = 3000;
  std::size_t batch_size = 64;
  std::size_t n_d = 5;
  AdamConfig adam;
  std::vector<double> lambda_grid{1e-4, 1e-3, 1e-2, 0.1, 1.0};
  std::size_t eval_every = 100;
  std::uint64_t seed = 1;
  LossConfig loss;
  /// semantic_dim and visual_dim are taken from the dataset when 0.
  ArchSpec arch;
  HallucinationPolicy policy;
  std::size_t n_generate_eval = 60;
  PoolMetric eval_metric = PoolMetric::Euclidean;
  /// Sample a class uniformly, then an example of it, instead of sampling
  /// examples uniformly.
  bool class_balanced = false;

  void validate() const;
};

struct TrainRecord {
  std::size_t step = 0;
  double loss_g = 0.0;
  double loss_d = 0.0;
  /// mean critic score on real minus on generated features
  double wasserstein = 0.0;
  double top1 = 0.0;
  double auc = 0.0;
  double gamma = 0.0;
  double beta = 0.0;

  friend bool operator==(const TrainRecord&, const TrainRecord&) = default;
};

struct TrainHistory {
  std::vector<TrainRecord> records;

  /// step,loss_g,loss_d,wasserstein,top1,auc,gamma,beta
  std::string to_csv() const;
  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct ModelParams {
  ArchSpec arch;
  HeadSpec head;
  ParamStore gen;
  ParamStore disc;
  ParamStore div;

  std::string arch_tag() const { return cizsl::arch_tag(arch, head); }
  /// gen, disc and div merged into one store.
  ParamStore all() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Builds freshly initialized networks for `ds` under `cfg`.
ModelParams init_model(const ZslDataset& ds, const TrainConfig& cfg);
/// Splits a merged store (as written to a checkpoint) back into its parts.
ModelParams model_from_params(const ArchSpec& arch, const HeadSpec& head, const ParamStore& all);

/// Checkpoint holding the model and the configuration it was trained with.
/// The arch tag check applies when `expected_arch_tag` is non-empty.
void save_model(const ModelParams& model, const TrainConfig& cfg, const std::filesystem::path& dir);
std::pair<ModelParams, TrainConfig> load_model(const std::filesystem::path& dir,
                                               const std::string& expected_arch_tag = {});

/// Stepwise driver; train() is a loop over step().
class Trainer {
 public:
  Trainer(const ZslDataset& ds, const TrainConfig& cfg);

  /// One discriminator Adam update; returns L_D.
  double discriminator_step();
  /// One generator update (and one divergence update when its parameters
  /// are learnable); returns L_G.
  double generator_step();
  /// n_d discriminator steps then one generator step.
  void step();

  /// Evaluation record at the current step on the dataset's unseen (and
  /// seen test) data.
  TrainRecord record() const;

  const ModelParams& model() const { return model_; }
  std::size_t steps_done() const { return steps_; }
  std::size_t d_updates() const { return d_updates_; }
  std::size_t g_updates() const { return g_updates_; }
  std::size_t e_updates() const { return e_updates_; }

 private:
  SeenTextBatch seen_batch(std::vector<std::size_t> labels);
  std::vector<std::size_t> sample_indices(std::size_t n);
  TextNoiseBatch hallucinated_batch(std::size_t n);

  const ZslDataset& ds_;
  TrainConfig cfg_;
  ModelParams model_;
  DivergenceSigns signs_;
  AdamState adam_g_, adam_d_, adam_e_;
  Rng rng_;
  Tensor real_means_;
  std::vector<std::vector<std::size_t>> by_class_;
  std::size_t steps_ = 0, d_updates_ = 0, g_updates_ = 0, e_updates_ = 0;
  double last_d_ = 0.0, last_g_ = 0.0, last_w_ = 0.0;
};

struct TrainResult {
  ModelParams model;
  TrainHistory history;
};

/// Runs cfg.n_steps outer iterations, recording history every eval_every
/// steps and at the final step. Throws NumericError naming the step when a
/// loss becomes non-finite.
TrainResult train(const ZslDataset& ds, const TrainConfig& cfg);

struct LambdaCurve {
  double lambda = 0.0;
  TrainHistory history;  // on the validation split
};

struct CrossValidation {
  std::size_t best_index = 0;  // into lambda_grid
  double best_lambda = 0.0;
  std::size_t best_step = 0;
  double best_auc = 0.0;
  std::vector<LambdaCurve> curves;
  std::vector<std::size_t> train_classes;
  std::vector<std::size_t> validation_classes;
};

/// Holds out a fifth of the seen classes as pseudo-unseen, trains once per
/// grid value and picks the (lambda, step) with the highest validation
/// Seen-Unseen area; the first grid entry and earliest step win ties.
CrossValidation cross_validate(const ZslDataset& ds, const TrainConfig& cfg);

/// cross_validate, then retrain on all seen classes with the winning lambda
/// for the winning number of steps.
struct SelectedModel {
  CrossValidation cv;
  TrainResult final_run;
};
SelectedModel select_and_train(const ZslDataset& ds, const TrainConfig& cfg);

struct AblationBundle {
  std::string label;
  std::function<void(TrainConfig&)> apply;
};

/// Named suites: cizsl-v1-ablation, hallucination-policies, segc, segc-rf,
/// hallucinated-categorization, segc-normalization, creativity-placement.
std::vector<AblationBundle> ablation_suite(const std::string& name);
std::vector<std::string> ablation_suite_names();

struct AblationRow {
  std::string label;
  std::vector<std::uint64_t> seeds;
  std::vector<double> top1;
  std::vector<double> auc;
  double top1_mean = 0.0, top1_std = 0.0;
  double auc_mean = 0.0, auc_std = 0.0;
};

/// Trains and evaluates every bundle once per seed. Each run starts from
/// `cfg` with the bundle applied and its seed set.
std::vector<AblationRow> ablate(const ZslDataset& ds, const TrainConfig& cfg, const std::vector<AblationBundle>& suite,
                                const std::vector<std::uint64_t>& seeds, const EvalConfig& eval);

/// label,seeds,top1_mean,top1_std,auc_mean,auc_std,top1_per_seed,auc_per_seed
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace cizsl
